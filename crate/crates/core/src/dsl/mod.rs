//! The `.doa` problem-description language.

pub mod ast;
mod parse;

pub use ast::*;
pub use parse::{parse_problem, DslError};

/// Canonical text for a parsed spec.
pub fn serialize(spec: &ProblemSpec) -> alloc::string::String {
    alloc::string::ToString::to_string(spec)
}
