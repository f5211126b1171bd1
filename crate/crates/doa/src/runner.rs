//! Loading specs, applying overrides, running the pipeline in parallel.

use std::collections::BTreeMap;
use std::path::PathBuf;

use doa_core::dsl::{parse_problem, DslError, ProblemSpec};
use doa_core::index::{ordering_from_hint, IndexOrdering};
use doa_core::involution::{evaluate_candidate, run_pipeline_with, Analysis, CandidateResult, PipelineError, Report, Status};
use doa_core::problem::{instantiate, validate, ConcreteProblem, ProblemError};
use rayon::prelude::*;
use serde::Serialize;

use crate::examples;
use crate::fit;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("unknown example `{0}` (see --list-examples)")]
    UnknownExample(String),
    #[error("parse error: {0}")]
    Parse(#[from] DslError),
    #[error("{0}")]
    Problem(#[from] ProblemError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("bad binding `{0}`: expected key=value")]
    Binding(String),
    #[error("unknown ordering `{0}`")]
    Ordering(String),
}

#[derive(Clone, Debug)]
pub enum Source {
    Example(String),
    Path(PathBuf),
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub max_order: Option<u32>,
    pub seed_order: Option<u32>,
    pub ordering: Option<String>,
    pub trials: Option<u32>,
    pub rng_seed: Option<u64>,
    pub trace: bool,
}

pub fn load(src: &Source) -> Result<ProblemSpec, RunError> {
    let text = match src {
        Source::Example(name) => examples::lookup(name).ok_or_else(|| RunError::UnknownExample(name.clone()))?.source.to_string(),
        Source::Path(p) => std::fs::read_to_string(p).map_err(|err| RunError::Io { path: p.clone(), err })?,
    };
    Ok(parse_problem(&text)?)
}

pub fn parse_bindings(items: &[String]) -> Result<BTreeMap<String, i64>, RunError> {
    let mut out = BTreeMap::new();
    for it in items {
        for kv in it.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| RunError::Binding(kv.to_string()))?;
            let v: i64 = v.trim().parse().map_err(|_| RunError::Binding(kv.to_string()))?;
            out.insert(k.trim().to_string(), v);
        }
    }
    Ok(out)
}

/// Instantiate and apply command-line overrides.  Static validation
/// findings are returned alongside, not treated as fatal.
pub fn prepare(spec: &ProblemSpec, dims: &BTreeMap<String, i64>, o: &Overrides) -> Result<(ConcreteProblem, Vec<String>), RunError> {
    let notes = validate(spec);
    let mut p = instantiate(spec, dims)?;
    if o.max_order.is_some() {
        p.options.max_order = o.max_order;
    }
    if o.seed_order.is_some() {
        p.options.seed_order = o.seed_order;
    }
    if o.ordering.is_some() {
        p.options.ordering = o.ordering.clone();
    }
    if let Some(t) = o.trials {
        p.options.trials = t;
    }
    if let Some(s) = o.rng_seed {
        p.options.rng_seed = s;
    }
    p.options.trace |= o.trace;
    if let Some(h) = &p.options.ordering {
        ordering_from_hint(&p, h).map_err(|_| RunError::Ordering(h.clone()))?;
    }
    Ok((p, notes))
}

fn parallel(an: &Analysis, os: &[IndexOrdering]) -> Vec<CandidateResult> {
    os.par_iter().map(|o| evaluate_candidate(an, o)).collect()
}

pub fn run(p: &ConcreteProblem) -> Result<Report, RunError> {
    Ok(run_pipeline_with(p, &parallel)?)
}

pub fn exit_code(s: Status) -> i32 {
    match s {
        Status::Exact => 0,
        Status::UpperBound | Status::Inconclusive => 2,
        Status::Incompatible => 3,
    }
}

#[derive(Debug, Serialize)]
pub struct ScanResult {
    pub param: String,
    pub reports: Vec<(i64, Report)>,
    pub degree_fit: Option<String>,
    pub dimension_fit: Option<String>,
}

/// Run at every value of `param` in `values` (in parallel) and fit degree and
/// dimension exactly, holding out the last value.
pub fn scan(spec: &ProblemSpec, dims: &BTreeMap<String, i64>, o: &Overrides, param: &str, values: &[i64]) -> Result<ScanResult, RunError> {
    let reports: Vec<(i64, Report)> = values
        .par_iter()
        .map(|&n| {
            let mut d = dims.clone();
            d.insert(param.to_string(), n);
            let (p, _) = prepare(spec, &d, o)?;
            Ok((n, run(&p)?))
        })
        .collect::<Result<_, RunError>>()?;
    let pts = |f: &dyn Fn(&Report) -> usize| -> Vec<(i64, i64)> { reports.iter().map(|(n, r)| (*n, f(r) as i64)).collect() };
    let degree_fit = fit::fit(&pts(&|r| r.characters.degree)).map(|p| fit::format(&p, param));
    let dimension_fit = fit::fit(&pts(&|r| r.characters.dimension)).map(|p| fit::format(&p, param));
    Ok(ScanResult { param: param.to_string(), reports, degree_fit, dimension_fit })
}
