use std::collections::BTreeMap;

use doa_core::dsl::parse_problem;
use doa_core::oracle::{brute_force_count, brute_force_free_parameters, DenseRelationSystem, DEFAULT_CAP};
use doa_core::problem::{instantiate, ConcreteProblem};

fn load(src: &str, n: i64) -> (doa_core::dsl::ProblemSpec, ConcreteProblem) {
    let spec = parse_problem(src).unwrap();
    let p = instantiate(&spec, &BTreeMap::from([("n".to_string(), n)])).unwrap();
    (spec, p)
}

fn riemann(extra: &str) -> String {
    let mut s = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../doa/specs/riemann.doa")).unwrap();
    s.push_str(extra);
    s
}

#[test]
fn antisymmetric_pair() {
    let src = "problem a\nparam n = 5\n[indices]\ni: basic, size n\n[coframe]\nw[i]: basic\n[invariants]\nA[i,i]: auxiliary, antisym(1,2)\n[structure]\nd w[i] = 0\n";
    let (_, p) = load(src, 5);
    assert_eq!(brute_force_count(&p, &[], 0, DEFAULT_CAP).unwrap(), 10);
}

#[test]
fn riemann_symmetries_then_bianchi() {
    let (_, p) = load(&riemann(""), 3);
    assert_eq!(brute_force_count(&p, &[], 0, DEFAULT_CAP).unwrap(), 9);
    let (spec, p) = load(&riemann("\n[relations]\nb1: for i,j,k,l: R[i,j,k,l] + R[i,k,l,j] + R[i,l,j,k] = 0\n"), 3);
    assert_eq!(brute_force_count(&p, &spec.relations, 0, DEFAULT_CAP).unwrap(), 6);
}

#[test]
fn ricci_flat_at_four() {
    let (spec, p) = load(&riemann("\n[relations]\nb1: for i,j,k,l: R[i,j,k,l] + R[i,k,l,j] + R[i,l,j,k] = 0\nricci: for i,j: R[k,i,k,j] = 0\n"), 4);
    assert_eq!(brute_force_count(&p, &spec.relations[..1], 0, DEFAULT_CAP).unwrap(), 20);
    assert_eq!(brute_force_count(&p, &spec.relations, 0, DEFAULT_CAP).unwrap(), 10);
}

#[test]
fn cap_is_enforced() {
    let (_, p) = load(&riemann(""), 6);
    assert!(DenseRelationSystem::new(&p, 3, 1000).is_err());
}

#[test]
fn free_parameters_of_a_scalar() {
    let src = "problem s\nparam n = 2\n[indices]\ni: basic, size n\n[coframe]\nw[i]: basic\n[invariants]\nf: auxiliary\n[structure]\nd w[i] = 0\n[relations]\ncomm: f[;1,2] = f[;2,1]\n";
    let (spec, p) = load(src, 2);
    let mut d = DenseRelationSystem::new(&p, 2, DEFAULT_CAP).unwrap();
    d.add_symmetries();
    for r in &spec.relations {
        d.add_relation(r).unwrap();
    }
    assert_eq!(d.counts(), vec![1, 2, 3]);
    let f = 0;
    let firsts = vec![(f, vec![], vec![0]), (f, vec![], vec![1])];
    assert_eq!(brute_force_free_parameters(&d, &firsts, 1), 3);
    assert_eq!(brute_force_free_parameters(&d, &firsts[..1], 1), 2);
}
