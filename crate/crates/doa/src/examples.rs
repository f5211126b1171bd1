//! Specs bundled into the binary.

pub struct Example {
    pub name: &'static str,
    /// `None` for the default variant
    pub variant: Option<&'static str>,
    pub source: &'static str,
}

/// Label under which each example's default variant can also be selected.
const DEFAULT_LABELS: &[(&str, &str)] = &[
    ("riemann_torsion", "direct"),
    ("gauge", "flat"),
    ("yang_mills_einstein", "flat"),
    ("newton_rigid", "fixed"),
    ("rel_rigid_flow", "free"),
];

macro_rules! ex {
    ($name:literal) => {
        Example { name: $name, variant: None, source: include_str!(concat!("../specs/", $name, ".doa")) }
    };
    ($name:literal, $v:literal) => {
        Example { name: $name, variant: Some($v), source: include_str!(concat!("../specs/", $name, ".", $v, ".doa")) }
    };
}

pub const EXAMPLES: &[Example] = &[
    ex!("riemann"),
    ex!("riemann_torsion"),
    ex!("riemann_torsion", "split"),
    ex!("einstein"),
    ex!("gauge"),
    ex!("gauge", "su2"),
    ex!("gauge", "curved"),
    ex!("yang_mills_einstein"),
    ex!("yang_mills_einstein", "su2"),
    ex!("yang_mills_einstein", "coupled"),
    ex!("scalar_kg"),
    ex!("newton_rigid"),
    ex!("newton_rigid", "gravity-free"),
    ex!("newton_rigid", "poisson"),
    ex!("rel_rigid_flow"),
    ex!("rel_rigid_flow", "specified-generic"),
    ex!("rel_rigid_flow", "minkowski-degenerate"),
    ex!("maurer_cartan_so3"),
    ex!("conflict"),
];

pub fn default_label(name: &str) -> Option<&'static str> {
    DEFAULT_LABELS.iter().find(|(n, _)| *n == name).map(|(_, l)| *l)
}

/// `NAME` or `NAME:VARIANT`.
pub fn lookup(sel: &str) -> Option<&'static Example> {
    let (name, variant) = match sel.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (sel, None),
    };
    let variant = variant.filter(|v| default_label(name) != Some(*v));
    EXAMPLES.iter().find(|e| e.name == name && e.variant == variant)
}

/// One line per example: name and its variants.
pub fn listing() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in EXAMPLES.iter().filter(|e| e.variant.is_none()) {
        let mut vs: Vec<&str> = default_label(e.name).into_iter().collect();
        vs.extend(EXAMPLES.iter().filter(|x| x.name == e.name).filter_map(|x| x.variant));
        if vs.is_empty() {
            out.push(e.name.to_string());
        } else {
            out.push(format!("{} (variants: {})", e.name, vs.join(", ")));
        }
    }
    out
}
