//! A small text language for pulse programs.
//!
//! ```text
//! seq xy8(n: count, tau: time) {
//!     repeat(n, xy8) {
//!         delay(tau / 2);
//!         pulse(180deg, @pattern);
//!         delay(tau / 2);
//!     }
//! }
//! ```
//!
//! Parameters are typed `time`, `angle` or `count`. Literals with a physical
//! dimension must carry a unit written directly after the number (`s`, `ms`,
//! `us`, `ns`, `ps`, `deg`, `rad`); bare numbers are dimensionless.
//! Expressions support `+ - * /`, unary minus and parentheses, and are
//! dimension-checked while parsing.
//!
//! Statements, each terminated by `;` unless it ends in a block:
//!
//! * `pulse(angle, phase[, duration]);` where `phase` is `x`, `y`, `-x`,
//!   `-y`, `@pattern` or an angle expression. Without a duration the pulse
//!   is instantaneous.
//! * `delay(time);`
//! * `flip;` an instantaneous electron π about x.
//! * `repeat(count[, pattern]) { ... }` with pattern `xy8`, `cp` or an
//!   explicit list such as `[x y -x -y]`. Each `@pattern` pulse inside takes
//!   the next entry of the innermost pattern, cycling across iterations.
//! * `inverse { ... }` the exact time reverse of the enclosed block.
//!
//! `//` starts a comment that runs to the end of the line.

mod ast;
mod expand;
mod lexer;
mod parser;

pub use ast::{format, Axis, BinOp, Dim, Expr, Param, ParamType, Pattern, Phase, SeqProgram, Statement, Unit};
pub use expand::{bind_and_expand, schedule, substitute, Args, ScheduleRow, MAX_ELEMENTS};
pub use parser::parse;

use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Syntax,
    UnknownUnit,
    DuplicateParameter,
    UnknownIdentifier,
    UnitMismatch,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lexical => "lexical error",
            Self::Syntax => "syntax error",
            Self::UnknownUnit => "unknown unit",
            Self::DuplicateParameter => "duplicate parameter",
            Self::UnknownIdentifier => "unknown identifier",
            Self::UnitMismatch => "unit mismatch",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        Self { kind, pos, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BindError {
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
    #[error("`{0}` is not a parameter of this program")]
    UnknownParameter(String),
    #[error("value of `{0}` is not finite")]
    NonFinite(String),
    #[error("{what} must be an integer, got {value}")]
    NonIntegerCount { what: String, value: f64 },
    #[error("{what} must be at least 1, got {value}")]
    NonPositiveCount { what: String, value: f64 },
    #[error("{what} must be non-negative, got {value} s")]
    NegativeDuration { what: String, value: f64 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("`@pattern` used outside a patterned repeat")]
    PatternOutsideRepeat,
    #[error("expansion exceeds {0} elements")]
    TooLarge(usize),
}

/// Programs shipped with the crate, by file stem.
pub const LIBRARY: &[(&str, &str)] = &[
    ("echo", include_str!("../../seq/echo.seq")),
    ("xy8", include_str!("../../seq/xy8.seq")),
    ("fid_h1", include_str!("../../seq/fid_h1.seq")),
    ("fid_h2", include_str!("../../seq/fid_h2.seq")),
    ("fid_h3", include_str!("../../seq/fid_h3.seq")),
    ("2d", include_str!("../../seq/2d.seq")),
];

pub fn library(name: &str) -> Option<SeqProgram> {
    LIBRARY.iter().find(|(n, _)| *n == name).map(|(_, text)| parse(text).expect("shipped program parses"))
}

#[cfg(test)]
mod tests;
