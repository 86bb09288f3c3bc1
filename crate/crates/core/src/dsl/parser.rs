//! Recursive-descent parser for behavior programs.
//!
//! The grammar is line oriented: newlines terminate conditions, `DO` targets
//! and statements. Blank lines and `#` comments may appear anywhere a newline
//! is accepted.

use indexmap::map::Entry;

use super::ast::*;
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::ParseError;

pub fn parse_program(source: &str) -> Result<BehaviorProgram, ParseError> {
    let tokens = tokenize(source)?;
    Parser { tokens, pos: 0 }.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const STATEMENT_START: &[&str] = &["`MOVE`", "`PLAY`", "`SET`", "`WAIT`"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if !matches!(tok.kind, TokenKind::Eof) {
            self.pos += 1;
        }
        tok
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().kind == TokenKind::Keyword(kw)
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let tok = self.peek();
        ParseError::Unexpected {
            span: tok.span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.kind.to_string(),
        }
    }

    fn expect_keyword(&mut self, kw: Keyword) -> Result<Token, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[&format!("`{}`", kw.as_str())]))
        }
    }

    fn expect_ident(&mut self) -> Result<Ident, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let ident = Ident::new(name.clone(), self.peek().span);
                self.advance();
                Ok(ident)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn expect_number(&mut self) -> Result<(f64, bool, SourceSpan), ParseError> {
        match self.peek().kind {
            TokenKind::Number { value, integer } => {
                let span = self.advance().span;
                Ok((value, integer, span))
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().kind == TokenKind::Newline {
            self.advance();
        }
    }

    /// One or more newlines.
    fn expect_newline(&mut self) -> Result<(), ParseError> {
        if self.peek().kind != TokenKind::Newline {
            return Err(self.unexpected(&["end of line"]));
        }
        self.skip_newlines();
        Ok(())
    }

    /// A newline or the end of input, after a closing `END`.
    fn expect_line_end(&mut self) -> Result<(), ParseError> {
        match self.peek().kind {
            TokenKind::Newline => {
                self.skip_newlines();
                Ok(())
            }
            TokenKind::Eof => Ok(()),
            _ => Err(self.unexpected(&["end of line"])),
        }
    }

    fn program(&mut self) -> Result<BehaviorProgram, ParseError> {
        let mut program = BehaviorProgram::default();
        loop {
            self.skip_newlines();
            match self.peek().kind {
                TokenKind::Eof => return Ok(program),
                TokenKind::Keyword(Keyword::When) => program.rules.push(self.rule()?),
                TokenKind::Keyword(Keyword::Define) => {
                    let def = self.definition()?;
                    match program.definitions.entry(def.name.name.clone()) {
                        Entry::Occupied(prev) => {
                            return Err(ParseError::DuplicateDefinition {
                                name: def.name.name.clone(),
                                span: def.name.span,
                                first: prev.get().name.span,
                            })
                        }
                        Entry::Vacant(slot) => {
                            slot.insert(def);
                        }
                    }
                }
                _ => return Err(self.unexpected(&["`WHEN`", "`DEFINE`", "end of input"])),
            }
        }
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let span = self.expect_keyword(Keyword::When)?.span;
        let condition = self.or_expr()?;
        self.expect_newline()?;
        self.expect_keyword(Keyword::Do)?;
        let then_behavior = self.expect_ident()?;
        self.expect_newline()?;
        let else_behavior = if self.at_keyword(Keyword::Else) {
            self.advance();
            self.expect_newline()?;
            self.expect_keyword(Keyword::Do)?;
            let target = self.expect_ident()?;
            self.expect_newline()?;
            Some(target)
        } else {
            None
        };
        if !self.at_keyword(Keyword::End) {
            let expected: &[&str] = if else_behavior.is_some() {
                &["`END`"]
            } else {
                &["`ELSE`", "`END`"]
            };
            return Err(self.unexpected(expected));
        }
        self.advance();
        self.expect_line_end()?;
        Ok(Rule {
            condition,
            then_behavior,
            else_behavior,
            span,
        })
    }

    fn or_expr(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword(Keyword::Or) {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Condition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.unary()?;
        while self.at_keyword(Keyword::And) {
            self.advance();
            let rhs = self.unary()?;
            lhs = Condition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Condition, ParseError> {
        match self.peek().kind {
            TokenKind::Keyword(Keyword::Not) => {
                self.advance();
                Ok(Condition::Not(Box::new(self.unary()?)))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.or_expr()?;
                if self.peek().kind != TokenKind::RParen {
                    return Err(self.unexpected(&["`)`", "`AND`", "`OR`"]));
                }
                self.advance();
                Ok(inner)
            }
            TokenKind::Ident(_) => self.comparison(),
            _ => Err(self.unexpected(&["`NOT`", "`(`", "identifier"])),
        }
    }

    fn comparison(&mut self) -> Result<Condition, ParseError> {
        let signal = self.expect_ident()?;
        let level = self.at_keyword(Keyword::Level);
        if level {
            self.advance();
        }
        let op = match self.peek().kind {
            TokenKind::Op(op) => {
                self.advance();
                op
            }
            _ => {
                let expected: &[&str] = if level {
                    &["comparison operator"]
                } else {
                    &["`LEVEL`", "comparison operator"]
                };
                return Err(self.unexpected(expected));
            }
        };
        let (value, _, _) = self.expect_number()?;
        Ok(Condition::Comparison {
            signal,
            level,
            op,
            value,
        })
    }

    fn definition(&mut self) -> Result<Definition, ParseError> {
        self.expect_keyword(Keyword::Define)?;
        let name = self.expect_ident()?;
        let mut body = Vec::new();
        match self.peek().kind {
            TokenKind::Newline => self.skip_newlines(),
            // reported below as a missing `END`
            TokenKind::Eof => {}
            _ => return Err(self.unexpected(&["end of line"])),
        }
        loop {
            match self.peek().kind {
                TokenKind::Keyword(Keyword::End) => {
                    self.advance();
                    self.expect_line_end()?;
                    return Ok(Definition { name, body });
                }
                TokenKind::Keyword(Keyword::Move | Keyword::Play | Keyword::Set | Keyword::Wait) => {
                    body.push(self.statement()?);
                    match self.peek().kind {
                        TokenKind::Newline => self.skip_newlines(),
                        TokenKind::Eof => {}
                        _ => return Err(self.unexpected(&["end of line"])),
                    }
                }
                _ => {
                    let mut expected = vec!["`END`"];
                    expected.extend_from_slice(STATEMENT_START);
                    return Err(self.unexpected(&expected));
                }
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let kw = self.advance();
        let TokenKind::Keyword(kw_kind) = kw.kind else {
            unreachable!("statement() is only entered on a keyword")
        };
        match kw_kind {
            Keyword::Move => {
                let actuator = self.expect_ident()?;
                let speed = match self.peek().kind {
                    TokenKind::Keyword(Keyword::Slowly) => {
                        self.advance();
                        Speed::Slowly
                    }
                    TokenKind::Keyword(Keyword::Quickly) => {
                        self.advance();
                        Speed::Quickly
                    }
                    TokenKind::Number { value, .. } => {
                        let span = self.advance().span;
                        if !(0.0..=1.0).contains(&value) {
                            return Err(ParseError::Invalid {
                                span,
                                message: format!("speed {value} is outside [0, 1]"),
                            });
                        }
                        Speed::Value(value)
                    }
                    _ => return Err(self.unexpected(&["`SLOWLY`", "`QUICKLY`", "number"])),
                };
                Ok(Statement::Move { actuator, speed })
            }
            Keyword::Play => {
                let sound = self.expect_ident()?;
                if sound.name != "sound" {
                    return Err(ParseError::Unexpected {
                        span: sound.span,
                        expected: vec!["`sound`".into()],
                        found: format!("identifier `{}`", sound.name),
                    });
                }
                match &self.peek().kind {
                    TokenKind::Str(file) => {
                        let file = file.clone();
                        self.advance();
                        Ok(Statement::Play { sound, file })
                    }
                    _ => Err(self.unexpected(&["string"])),
                }
            }
            Keyword::Set => {
                let actuator = self.expect_ident()?;
                let (value, _, _) = self.expect_number()?;
                Ok(Statement::Set { actuator, value })
            }
            Keyword::Wait => {
                let (value, integer, span) = self.expect_number()?;
                if !integer || value < 1.0 {
                    return Err(ParseError::Invalid {
                        span,
                        message: "WAIT needs a positive integer duration".into(),
                    });
                }
                let unit = match &self.peek().kind {
                    TokenKind::Ident(u) if u == "ms" => TimeUnit::Millis,
                    TokenKind::Ident(u) if u == "us" => TimeUnit::Micros,
                    _ => return Err(self.unexpected(&["`ms`", "`us`"])),
                };
                self.advance();
                let count = value as u64;
                let duration_us = match unit {
                    TimeUnit::Millis => count.checked_mul(1000),
                    TimeUnit::Micros => Some(count),
                }
                .ok_or(ParseError::Invalid {
                    span,
                    message: "WAIT duration overflows".into(),
                })?;
                Ok(Statement::Wait { duration_us, unit })
            }
            _ => unreachable!("statement keywords are checked by the caller"),
        }
    }
}
