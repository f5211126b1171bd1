//! Degree-of-arbitrariness engine for moving-frame systems: exact rational
//! arithmetic, exterior calculus on a symbolic coframe, relation closure and
//! involutive seed selection.
#![no_std]

extern crate alloc;

pub mod dsl;
pub mod exterior;
pub mod index;
pub mod involution;
pub mod linalg;
pub mod oracle;
pub mod poly;
pub mod problem;
pub mod relations;
pub mod rat;
