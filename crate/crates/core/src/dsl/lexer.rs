use std::fmt;

use super::ast::{CompareOp, SourceSpan};
use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Keyword {
    When,
    Do,
    Else,
    End,
    Define,
    Move,
    Play,
    Set,
    Wait,
    And,
    Or,
    Not,
    Level,
    Slowly,
    Quickly,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Self> {
        Some(match word {
            "WHEN" => Self::When,
            "DO" => Self::Do,
            "ELSE" => Self::Else,
            "END" => Self::End,
            "DEFINE" => Self::Define,
            "MOVE" => Self::Move,
            "PLAY" => Self::Play,
            "SET" => Self::Set,
            "WAIT" => Self::Wait,
            "AND" => Self::And,
            "OR" => Self::Or,
            "NOT" => Self::Not,
            "LEVEL" => Self::Level,
            "SLOWLY" => Self::Slowly,
            "QUICKLY" => Self::Quickly,
            _ => return None,
        })
    }

    pub(crate) fn as_str(self) -> &'static str {
        match self {
            Self::When => "WHEN",
            Self::Do => "DO",
            Self::Else => "ELSE",
            Self::End => "END",
            Self::Define => "DEFINE",
            Self::Move => "MOVE",
            Self::Play => "PLAY",
            Self::Set => "SET",
            Self::Wait => "WAIT",
            Self::And => "AND",
            Self::Or => "OR",
            Self::Not => "NOT",
            Self::Level => "LEVEL",
            Self::Slowly => "SLOWLY",
            Self::Quickly => "QUICKLY",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Number { value: f64, integer: bool },
    Str(String),
    Op(CompareOp),
    LParen,
    RParen,
    Newline,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Number { value, .. } => write!(f, "number `{value}`"),
            TokenKind::Str(s) => write!(f, "string {s:?}"),
            TokenKind::Op(op) => write!(f, "`{}`", op.symbol()),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Newline => f.write_str("end of line"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    while i < chars.len() {
        let c = chars[i];
        let start = SourceSpan::new(line, col, 1);
        match c {
            '\n' => {
                tokens.push(Token {
                    kind: TokenKind::Newline,
                    span: start,
                });
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            _ => {}
        }

        let begin = i;
        let kind = match c {
            '(' => {
                i += 1;
                TokenKind::LParen
            }
            ')' => {
                i += 1;
                TokenKind::RParen
            }
            '<' | '>' | '=' | '!' => {
                let two = chars.get(i + 1) == Some(&'=');
                let op = match (c, two) {
                    ('<', true) => CompareOp::Le,
                    ('<', false) => CompareOp::Lt,
                    ('>', true) => CompareOp::Ge,
                    ('>', false) => CompareOp::Gt,
                    ('=', true) => CompareOp::Eq,
                    ('!', true) => CompareOp::Ne,
                    _ => {
                        return Err(ParseError::Invalid {
                            span: start,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                };
                i += if two { 2 } else { 1 };
                TokenKind::Op(op)
            }
            '"' => {
                i += 1;
                let text_start = i;
                while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                    i += 1;
                }
                if chars.get(i) != Some(&'"') {
                    return Err(ParseError::Invalid {
                        span: start,
                        message: "unterminated string".into(),
                    });
                }
                let text: String = chars[text_start..i].iter().collect();
                i += 1;
                TokenKind::Str(text)
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut integer = true;
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                    integer = false;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[begin..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| ParseError::Invalid {
                    span: start,
                    message: format!("malformed number `{text}`"),
                })?;
                TokenKind::Number {
                    value,
                    integer: integer && !text.starts_with('-'),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[begin..i].iter().collect();
                if let Some(kw) = Keyword::from_word(&word) {
                    TokenKind::Keyword(kw)
                } else if is_dsl_ident(&word) {
                    TokenKind::Ident(word)
                } else {
                    let message = if word.bytes().all(|b| b.is_ascii_uppercase()) {
                        format!("unknown keyword `{word}`")
                    } else {
                        format!("invalid identifier `{word}`: identifiers are lowercase")
                    };
                    return Err(ParseError::Invalid {
                        span: SourceSpan::new(line, col, (i - begin) as u32),
                        message,
                    });
                }
            }
            other => {
                return Err(ParseError::Invalid {
                    span: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        let len = (i - begin) as u32;
        tokens.push(Token {
            kind,
            span: SourceSpan::new(line, col, len),
        });
        col += len;
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: SourceSpan::new(line, col, 0),
    });
    Ok(tokens)
}

/// `[a-z][a-z0-9_]*`
pub fn is_dsl_ident(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}
