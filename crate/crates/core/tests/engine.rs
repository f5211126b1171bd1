use std::collections::BTreeMap;

use doa_core::dsl::parse_problem;
use doa_core::involution::{run_pipeline, Status};
use doa_core::oracle::{cross_check, DEFAULT_CAP};
use doa_core::problem::{instantiate, ConcreteProblem};
use doa_core::relations::{build_system, generic_point, Blocks};

fn spec_file(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../doa/specs/{name}.doa", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn problem(src: &str, n: Option<i64>) -> ConcreteProblem {
    let dims = n.map(|n| BTreeMap::from([("n".to_string(), n)])).unwrap_or_default();
    instantiate(&parse_problem(src).unwrap(), &dims).unwrap()
}

#[test]
fn descent_surfaces_hidden_conditions() {
    let p = problem(&spec_file("newton_rigid.gravity-free"), Some(4));
    let mut sys = build_system(&p, 2, Blocks::All).unwrap();
    let before = generic_point(&sys, p.options.rng_seed);
    assert!(!before.integrability.is_empty());
    assert!(sys.descend() > 0);
    let after = generic_point(&sys, p.options.rng_seed);
    assert!(after.integrability.is_empty(), "{:?}", after.integrability);
    assert!(after.is_consistent());
}

#[test]
fn incompatible_relations() {
    let src = "problem bad\n[indices]\ni: basic, size 2\n[coframe]\nw[i]: basic\n[invariants]\nf: auxiliary\n[structure]\nd w[i] = 0\n[relations]\none: f = 1\ntwo: f = 2\n";
    let r = run_pipeline(&problem(src, None)).unwrap();
    assert_eq!(r.status, Status::Incompatible);
}

#[test]
fn conflicting_directions_get_an_advisory() {
    let r = run_pipeline(&problem(&spec_file("conflict"), None)).unwrap();
    assert!(r.ordering.is_none());
    assert!(r.advisory.is_some());
    assert!(r.candidates.iter().all(|c| !c.passed));
}

#[test]
fn reports_agree_with_dense_recount() {
    for (name, n) in [("riemann", 3), ("riemann", 4), ("einstein", 4), ("scalar_kg", 3), ("gauge.su2", 3), ("newton_rigid", 4), ("rel_rigid_flow.minkowski-degenerate", 3)] {
        let p = problem(&spec_file(name), Some(n));
        let r = run_pipeline(&p).unwrap();
        let bad: Vec<String> = cross_check(&r, &p, DEFAULT_CAP).into_iter().filter(|l| !l.starts_with("skipped:")).collect();
        assert!(bad.is_empty(), "{name} n={n}: {bad:?}");
    }
}

#[test]
fn report_is_deterministic() {
    let p = problem(&spec_file("einstein"), Some(4));
    let a = serde_json::to_string(&run_pipeline(&p).unwrap()).unwrap();
    let b = serde_json::to_string(&run_pipeline(&p).unwrap()).unwrap();
    assert_eq!(a, b);
}
