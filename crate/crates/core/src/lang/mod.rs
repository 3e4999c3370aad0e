//! A small text language for linear integer programs over independent random integers.
//!
//! ```text
//! pint X ~ pmf{0: 0.2, 1: 0.6, 2: 0.15, 3: 0.05};
//! pint Y ~ uniform(0, 9);
//! let V = if (Y < 5) then 2*Y else 2*Y - 9;
//! query pmf[X + V];
//! query Pr[(X + V) mod 10 == 0];
//! ```

use std::fmt;

use thiserror::Error;

pub mod ast;
mod check;
mod eval;
mod lexer;
mod parser;

pub use ast::{Binding, Decl, DistSpec, Expr, ExprKind, Program, Query, QueryKind, Span};
pub use check::{check_independence, Violation};
pub use eval::{dist_to_prob_int, evaluate, evaluate_source, format_value, QueryResult, QueryValue};
pub use parser::{parse, parse_expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LangErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("independence violation: {0}")]
    Independence(String),
    #[error(transparent)]
    Engine(#[from] crate::Error),
}

/// An error tagged with the source position it arose at.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct LangError {
    pub kind: LangErrorKind,
    pub span: Span,
}

impl LangError {
    pub fn new(kind: LangErrorKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub(crate) fn syntax(span: Span, msg: String) -> Self {
        Self::new(LangErrorKind::Syntax(msg), span)
    }

    pub(crate) fn engine(err: crate::Error, span: Span) -> Self {
        Self::new(LangErrorKind::Engine(err), span)
    }

    /// Errors in the program text itself, as opposed to evaluation failures.
    pub fn is_static(&self) -> bool {
        !matches!(self.kind, LangErrorKind::Engine(_))
    }
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.kind)
    }
}
