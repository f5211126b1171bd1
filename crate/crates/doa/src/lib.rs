//! File formats, bundled examples, scans and fits around the `doa-core`
//! engine.

pub mod examples;
pub mod fit;
pub mod render;
pub mod runner;
