//! The behavior language: `WHEN`/`DO`/`ELSE` rules over sensor signals and
//! `DEFINE` blocks of actuator statements.

mod ast;
mod bind;
mod eval;
mod format;
mod lexer;
pub(crate) mod parser;

pub use ast::*;
pub use bind::{
    bind_program, bind_program_with, BindError, BindErrors, BindOptions, BoundBehavior, BoundProgram, BoundRule, Step,
    QUICKLY_SPEED, SLOWLY_SPEED,
};
pub use eval::{eval_condition, EvalError};
pub use format::{format_condition, format_program};
pub use lexer::is_dsl_ident;
pub use parser::parse_program;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{span}: expected {}, found {found}", .expected.join(" or "))]
    Unexpected {
        span: SourceSpan,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: {message}")]
    Invalid { span: SourceSpan, message: String },
    #[error("{span}: `{name}` is already defined at {first}")]
    DuplicateDefinition {
        name: String,
        span: SourceSpan,
        first: SourceSpan,
    },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Unexpected { span, .. }
            | ParseError::Invalid { span, .. }
            | ParseError::DuplicateDefinition { span, .. } => *span,
        }
    }
}
