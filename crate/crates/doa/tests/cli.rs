use std::process::{Command, Output};

fn doa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doa")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exact_run_exits_zero() {
    let o = doa(&["run", "--example", "riemann", "--dim", "n=4"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("degree      6 at dimension 4"), "{s}");
}

#[test]
fn json_report_schema() {
    let o = doa(&["run", "--example", "einstein", "--dim", "n=4", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "doa.report/1");
    assert_eq!(v["characters"]["degree"], 4);
    assert_eq!(v["characters"]["dimension"], 3);
    assert_eq!(v["eom"]["dimension_drop_one"], true);
}

#[test]
fn upper_bound_exits_two() {
    let o = doa(&["run", "--example", "maurer_cartan_so3", "--format", "json"]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "upper_bound");
    assert_eq!(v["condition_r"]["symmetry_dimension"], 3);
}

#[test]
fn incompatible_exits_three() {
    let dir = std::env::temp_dir().join(format!("doa-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.doa");
    std::fs::write(&path, "problem bad\n[indices]\ni: basic, size 2\n[coframe]\nw[i]: basic\n[invariants]\nf: auxiliary\n[structure]\nd w[i] = 0\n[relations]\none: f = 1\ntwo: f = 2\n").unwrap();
    let o = doa(&["run", "--spec", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn usage_and_parse_errors_exit_one() {
    assert_eq!(code(&doa(&["run"])), 1);
    assert_eq!(code(&doa(&["frobnicate"])), 1);
    assert_eq!(code(&doa(&["run", "--example", "no_such_thing"])), 1);
    assert_eq!(code(&doa(&["run", "--example", "riemann", "--dim", "n"])), 1);
    assert_eq!(code(&doa(&["run", "--spec", "/nonexistent/x.doa"])), 1);
    assert_eq!(code(&doa(&["run", "--example", "riemann", "--ordering", "sideways"])), 1);
    assert_eq!(code(&doa(&["--help"])), 0);
}

#[test]
fn verify_agrees() {
    let o = doa(&["verify", "--example", "einstein", "--dim", "n=4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("oracle agrees"));
}

#[test]
fn scan_fits_polynomials() {
    let o = doa(&["scan", "--example", "riemann", "--range", "2..5", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["degree_fit"], "1/2n^2 - 1/2n");
    assert_eq!(v["dimension_fit"], "n");
}

#[test]
fn lists_examples() {
    let o = doa(&["--list-examples"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("newton_rigid (variants: fixed, gravity-free, poisson)"), "{s}");
    assert_eq!(stdout(&doa(&["examples"])), s);
}

#[test]
fn ordering_override_is_respected() {
    let o = doa(&["run", "--example", "newton_rigid", "--ordering", "1<2<3<0", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["candidates"][0]["ordering"], "1<2<3<0");
}
