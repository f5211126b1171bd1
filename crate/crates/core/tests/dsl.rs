use doa_core::dsl::{parse_problem, serialize, DslError};
use proptest::prelude::*;

const HEAD: &str = "problem t\n[indices]\ni: basic, size 2\n[coframe]\nw[i]: basic\n[invariants]\nf: auxiliary\nh: auxiliary\n[structure]\nd w[i] = 0\n";

#[test]
fn empty_input_is_rejected() {
    let e = parse_problem("").unwrap_err();
    assert!(matches!(&e, DslError::Syntax { line: 1, .. }), "{e:?}");
    assert!(e.to_string().contains("no declarations"), "{e}");
    assert!(parse_problem("# only a comment\n\n").is_err());
}

#[test]
fn symmetry_slot_out_of_range() {
    let src = HEAD.replace("h: auxiliary", "T[i,i]: auxiliary, swap(1,5)");
    match parse_problem(&src).unwrap_err() {
        DslError::SlotRange { name, gen, slot, arity, .. } => {
            assert_eq!((name.as_str(), gen.as_str(), slot, arity), ("T", "swap(1,5)", 5, 2));
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn undeclared_symbol() {
    let src = HEAD.replace("d w[i] = 0", "d w[i] = Q[i,j]*w[i]^w[j]");
    assert!(matches!(parse_problem(&src), Err(DslError::Undeclared { name, .. }) if name == "Q"));
}

#[test]
fn bundled_specs_round_trip() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../doa/specs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let src = std::fs::read_to_string(&path).unwrap();
        let a = parse_problem(&src).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = serialize(&a);
        let b = parse_problem(&text).unwrap_or_else(|e| panic!("{}: reparse: {e}\n{text}", path.display()));
        assert_eq!(a, b, "{}", path.display());
        assert_eq!(serialize(&b), text);
        n += 1;
    }
    assert!(n >= 19);
}

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("f".to_string()),
        Just("h".to_string()),
        (1u8..=2).prop_map(|k| format!("f[;{k}]")),
        (1u8..=2, 1u8..=2).prop_map(|(a, b)| format!("h[;{a},{b}]")),
    ]
}

fn term() -> impl Strategy<Value = String> {
    (1i64..7, 1i64..4, prop::collection::vec(atom(), 1..3)).prop_map(|(p, q, f)| {
        let c = if q == 1 { p.to_string() } else { format!("{p}/{q}") };
        format!("{c} {}", f.join("*"))
    })
}

proptest! {
    #[test]
    fn relation_round_trip(terms in prop::collection::vec(term(), 1..5), signs in prop::collection::vec(any::<bool>(), 5)) {
        let mut lhs = String::new();
        for (k, t) in terms.iter().enumerate() {
            if k > 0 || signs[k] {
                lhs.push_str(if signs[k] { " - " } else { " + " });
            }
            lhs.push_str(t);
        }
        let src = format!("{HEAD}[relations]\nr: {lhs} = 0\n");
        let a = parse_problem(&src).unwrap();
        let b = parse_problem(&serialize(&a)).unwrap();
        prop_assert_eq!(a, b);
    }
}
