//! Instantiation of a parsed spec at concrete sizes, plus static validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::dsl::*;
use crate::index::{tuples, SymGroup};
use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProblemError {
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
    #[error("index class `{0}` has size {1} after instantiation")]
    BadSize(String, i64),
    #[error("index class `{0}` is too large ({1} values, at most 250)")]
    TooLarge(String, usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct Class {
    pub name: String,
    pub kind: ClassKind,
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct Family {
    pub name: String,
    pub kind: FormKind,
    pub slots: Vec<usize>,
    pub group: SymGroup,
}

#[derive(Clone, Debug)]
pub struct SymbolInfo {
    pub name: String,
    pub role: Role,
    pub slots: Vec<usize>,
    pub group: SymGroup,
}

#[derive(Clone, Debug)]
pub struct ConstInfo {
    pub name: String,
    pub slots: Vec<usize>,
    pub factor: Rat,
    pub kind: ConstKind,
}

impl ConstInfo {
    pub fn value(&self, t: &[u8]) -> Rat {
        match self.kind {
            ConstKind::Zero => Rat::ZERO,
            ConstKind::Delta => {
                if t.windows(2).all(|w| w[0] == w[1]) {
                    self.factor.clone()
                } else {
                    Rat::ZERO
                }
            }
            ConstKind::Epsilon => {
                // sign of the permutation, 0 on repeats
                let mut v: Vec<u8> = t.to_vec();
                let mut sign = 1i64;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        if v[i] == v[j] {
                            return Rat::ZERO;
                        }
                        if v[i] > v[j] {
                            sign = -sign;
                        }
                    }
                }
                v.sort_unstable();
                if v.iter().enumerate().any(|(i, &x)| x as usize != i) {
                    return Rat::ZERO;
                }
                &self.factor * &Rat::int(sign)
            }
        }
    }
}

/// A canonical coframe form instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FormInst {
    pub family: usize,
    pub idx: Vec<u8>,
}

/// Engine knobs resolved from the problem's `[options]` and caller overrides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EngineOptions {
    pub max_order: Option<u32>,
    pub seed_order: Option<u32>,
    pub ordering: Option<String>,
    pub trials: u32,
    pub coef_degree: u32,
    pub rng_seed: u64,
    pub exhaustive_limit: usize,
    pub trace: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            max_order: None,
            seed_order: None,
            ordering: None,
            trials: 3,
            coef_degree: 4,
            rng_seed: 0x5eed,
            exhaustive_limit: 6,
            trace: false,
        }
    }
}

impl EngineOptions {
    pub fn from_spec(o: &Options) -> EngineOptions {
        let d = EngineOptions::default();
        EngineOptions {
            max_order: o.max_order,
            seed_order: o.seed_order,
            ordering: o.ordering.clone(),
            trials: o.trials.unwrap_or(d.trials),
            coef_degree: o.coef_degree.unwrap_or(d.coef_degree),
            ..d
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConcreteProblem {
    pub spec: ProblemSpec,
    pub bindings: BTreeMap<String, i64>,
    pub classes: Vec<Class>,
    /// derivation directions: (class, value)
    pub dirs: Vec<(usize, u8)>,
    pub families: Vec<Family>,
    pub forms: Vec<FormInst>,
    pub form_ids: BTreeMap<FormInst, u16>,
    /// basic form of each direction
    pub dir_form: Vec<u16>,
    pub symbols: Vec<SymbolInfo>,
    pub constants: Vec<ConstInfo>,
    pub options: EngineOptions,
    pub warnings: Vec<String>,
}

fn resolve_size(s: &SizeExpr, b: &BTreeMap<String, i64>) -> Result<i64, ProblemError> {
    let mut v = s.constant;
    for (k, p) in &s.terms {
        v += k * b.get(p).copied().ok_or_else(|| ProblemError::Unbound(p.clone()))?;
    }
    Ok(v)
}

fn group_of(arity: usize, gens: &[SymGen], what: &str) -> Result<SymGroup, ProblemError> {
    let g: Vec<(Vec<usize>, i8)> = gens.iter().map(|g| g.action(arity)).collect();
    SymGroup::generate(arity, &g).ok_or_else(|| ProblemError::Invalid(format!("symmetry group of `{what}` is too large")))
}

/// Resolve sizes and enumerate forms.  Bindings override the problem's
/// `param` defaults.
pub fn instantiate(spec: &ProblemSpec, dims: &BTreeMap<String, i64>) -> Result<ConcreteProblem, ProblemError> {
    let mut bindings: BTreeMap<String, i64> = spec.params.iter().cloned().collect();
    for (k, v) in dims {
        bindings.insert(k.clone(), *v);
    }
    let mut warnings = Vec::new();
    let mut classes = Vec::new();
    for c in &spec.classes {
        let n = resolve_size(&c.size, &bindings)?;
        if n < 0 || (n == 0 && c.kind != ClassKind::Basic) {
            return Err(ProblemError::BadSize(c.name.clone(), n));
        }
        if n == 0 {
            warnings.push(format!("degenerate: index class `{}` is empty", c.name));
        }
        if n > 250 {
            return Err(ProblemError::TooLarge(c.name.clone(), n as usize));
        }
        classes.push(Class { name: c.name.clone(), kind: c.kind, size: n as usize });
    }
    let class_ix = |name: &str| spec.classes.iter().position(|c| c.name == name).unwrap();
    let mut dirs = Vec::new();
    for (ci, c) in classes.iter().enumerate() {
        if matches!(c.kind, ClassKind::Basic | ClassKind::Special) {
            for v in 0..c.size {
                dirs.push((ci, v as u8));
            }
        }
    }
    if dirs.len() > 250 {
        return Err(ProblemError::Invalid("too many derivation directions".into()));
    }
    let mut families = Vec::new();
    let mut forms = Vec::new();
    let mut form_ids = BTreeMap::new();
    for (fi, f) in spec.forms.iter().enumerate() {
        let slots: Vec<usize> = f.slots.iter().map(|s| class_ix(s)).collect();
        let group = group_of(slots.len(), &f.syms, &f.name)?;
        let sizes: Vec<usize> = slots.iter().map(|&c| classes[c].size).collect();
        let mut count = 0;
        for t in tuples(&sizes) {
            let (s, rep) = group.canonical(&t);
            if s != 0 && rep == t {
                let inst = FormInst { family: fi, idx: t };
                form_ids.insert(inst.clone(), forms.len() as u16);
                forms.push(inst);
                count += 1;
            }
        }
        if count == 0 && f.kind != FormKind::Alias {
            warnings.push(format!("degenerate: coframe family `{}` has no forms", f.name));
        }
        families.push(Family { name: f.name.clone(), kind: f.kind, slots, group });
    }
    if forms.len() > u16::MAX as usize {
        return Err(ProblemError::Invalid("too many coframe forms".into()));
    }
    let mut dir_form = Vec::with_capacity(dirs.len());
    for &(c, v) in &dirs {
        let fam = families
            .iter()
            .position(|f| f.kind == FormKind::Basic && f.slots == [c])
            .ok_or_else(|| ProblemError::Invalid(format!("no basic coframe family labelled by `{}`", classes[c].name)))?;
        dir_form.push(form_ids[&FormInst { family: fam, idx: alloc::vec![v] }]);
    }
    let mut symbols = Vec::new();
    for s in &spec.symbols {
        let slots: Vec<usize> = s.slots.iter().map(|x| class_ix(x)).collect();
        let group = group_of(slots.len(), &s.syms, &s.name)?;
        symbols.push(SymbolInfo { name: s.name.clone(), role: s.role, slots, group });
    }
    let constants = spec
        .constants
        .iter()
        .map(|c| ConstInfo {
            name: c.name.clone(),
            slots: c.slots.iter().map(|x| class_ix(x)).collect(),
            factor: c.factor.clone(),
            kind: c.kind,
        })
        .collect();
    Ok(ConcreteProblem {
        spec: spec.clone(),
        bindings,
        classes,
        dirs,
        families,
        forms,
        form_ids,
        dir_form,
        symbols,
        constants,
        options: EngineOptions::from_spec(&spec.options),
        warnings,
    })
}

impl ConcreteProblem {
    pub fn ndirs(&self) -> usize {
        self.dirs.len()
    }

    /// Non-alias coframe size `m`.
    pub fn coframe_dim(&self) -> usize {
        self.forms.iter().filter(|f| self.families[f.family].kind != FormKind::Alias).count()
    }

    pub fn is_alias(&self, form: u16) -> bool {
        self.families[self.forms[form as usize].family].kind == FormKind::Alias
    }

    pub fn dir_of_form(&self, form: u16) -> Option<u8> {
        self.dir_form.iter().position(|&f| f == form).map(|d| d as u8)
    }

    pub fn dir_of_value(&self, class: usize, v: u8) -> Option<u8> {
        self.dirs.iter().position(|&(c, x)| c == class && x == v).map(|d| d as u8)
    }

    /// Printed label of a class value: special classes count from 0,
    /// the others from 1.
    pub fn value_label(&self, class: usize, v: u8) -> String {
        match self.classes[class].kind {
            ClassKind::Special => v.to_string(),
            _ => (v as u32 + 1).to_string(),
        }
    }

    pub fn dir_label(&self, d: u8) -> &str {
        // labels are small; cache-free lookup via a static table of strings
        let (c, v) = self.dirs[d as usize];
        let n = match self.classes[c].kind {
            ClassKind::Special => v as usize,
            _ => v as usize + 1,
        };
        LABELS[n.min(LABELS.len() - 1)]
    }

    pub fn form_label(&self, f: u16) -> String {
        let inst = &self.forms[f as usize];
        let fam = &self.families[inst.family];
        if inst.idx.is_empty() {
            return fam.name.clone();
        }
        let v: Vec<String> = inst.idx.iter().zip(&fam.slots).map(|(&x, &c)| self.value_label(c, x)).collect();
        format!("{}[{}]", fam.name, v.join(","))
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    /// Literal index in a slot of `class`, as written in the problem file.
    pub fn literal_value(&self, class: usize, lit: u32) -> Option<u8> {
        let v = match self.classes[class].kind {
            ClassKind::Special => lit as i64,
            _ => lit as i64 - 1,
        };
        (v >= 0 && (v as usize) < self.classes[class].size).then_some(v as u8)
    }

    /// Literal in a derivation slot: the unique direction with that label.
    pub fn literal_dir(&self, lit: u32) -> Option<u8> {
        let hits: Vec<u8> = (0..self.dirs.len() as u8).filter(|&d| self.dir_label(d) == LABELS[(lit as usize).min(LABELS.len() - 1)]).collect();
        (hits.len() == 1).then(|| hits[0])
    }

    /// Classes whose values are interchangeable (no literal indices refer
    /// to them anywhere in the problem).
    pub fn symmetric_classes(&self) -> BTreeSet<usize> {
        let mut lit_classes = BTreeSet::new();
        let mut deriv_lit = false;
        let mut visit = |e: &Expr, p: &ConcreteProblem| walk_refs(e, &mut |r: &Ref| {
            for (k, a) in r.primary.iter().enumerate() {
                if let Arg::Lit(_) = a {
                    if let Some(cl) = p.slot_class(&r.name, k) {
                        lit_classes.insert(cl);
                    }
                }
            }
            if r.deriv.iter().any(|a| matches!(a, Arg::Lit(_))) {
                deriv_lit = true;
            }
        });
        for r in self.spec.relations.iter().chain(self.spec.constraints.iter().flat_map(|b| &b.relations)) {
            visit(&r.lhs, self);
            visit(&r.rhs, self);
        }
        for s in &self.spec.structure {
            visit(&s.rhs, self);
        }
        for a in &self.spec.aliases {
            visit(&a.rhs, self);
        }
        (0..self.classes.len())
            .filter(|c| !lit_classes.contains(c) && !deriv_lit)
            .collect()
    }

    /// Class of slot `k` of a named symbol, form or constant.
    pub fn slot_class(&self, name: &str, k: usize) -> Option<usize> {
        if let Some(s) = self.symbols.iter().find(|s| s.name == name) {
            return s.slots.get(k).copied();
        }
        if let Some(f) = self.families.iter().find(|f| f.name == name) {
            return f.slots.get(k).copied();
        }
        self.constants.iter().find(|c| c.name == name).and_then(|c| c.slots.get(k).copied())
    }
}

static LABELS: [&str; 64] = [
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17", "18", "19",
    "20", "21", "22", "23", "24", "25", "26", "27", "28", "29", "30", "31", "32", "33", "34", "35", "36", "37",
    "38", "39", "40", "41", "42", "43", "44", "45", "46", "47", "48", "49", "50", "51", "52", "53", "54", "55",
    "56", "57", "58", "59", "60", "61", "62", "63+",
];

pub fn walk_refs(e: &Expr, f: &mut dyn FnMut(&Ref)) {
    for t in &e.terms {
        for x in &t.factors {
            match x {
                Factor::Ref(r) => f(r),
                Factor::Paren(e) => walk_refs(e, f),
            }
        }
    }
}

/// Static diagnostics; empty when the problem meets the structural
/// assumptions the engine relies on.
pub fn validate(spec: &ProblemSpec) -> Vec<String> {
    let mut d = Vec::new();
    let class = |n: &str| spec.classes.iter().find(|c| c.name == n);
    let is_dirclass = |n: &str| class(n).map(|c| matches!(c.kind, ClassKind::Basic | ClassKind::Special)).unwrap_or(false);

    if !spec.forms.iter().any(|f| f.kind == FormKind::Basic) {
        d.push("no basic coframe subset: declare at least one `basic` coframe family".into());
    }
    for f in spec.forms.iter().filter(|f| f.kind == FormKind::Basic) {
        if f.slots.len() != 1 || !is_dirclass(&f.slots[0]) {
            d.push(format!("basic coframe family `{}` must carry exactly one basic or special index", f.name));
        }
    }
    for c in spec.classes.iter().filter(|c| matches!(c.kind, ClassKind::Basic | ClassKind::Special)) {
        let n = spec.forms.iter().filter(|f| f.kind == FormKind::Basic && f.slots == [c.name.clone()]).count();
        if n != 1 {
            d.push(format!("index class `{}` labels derivations but has {n} basic coframe families (need exactly 1)", c.name));
        }
    }
    let check_gens = |d: &mut Vec<String>, name: &str, slots: &[String], gens: &[SymGen]| {
        for g in gens {
            let (p, _) = g.action(slots.len());
            if (0..slots.len()).any(|k| slots[k] != slots[p[k]]) {
                d.push(format!("symmetry `{g}` of `{name}` exchanges slots of different index classes"));
            }
        }
    };
    for f in &spec.forms {
        check_gens(&mut d, &f.name, &f.slots, &f.syms);
    }
    for s in &spec.symbols {
        check_gens(&mut d, &s.name, &s.slots, &s.syms);
    }
    // every non-alias family needs a structure equation, aliases need a definition
    for f in &spec.forms {
        let has_d = spec.structure.iter().any(|s| s.lhs.name == f.name);
        let has_def = spec.aliases.iter().any(|a| a.lhs.name == f.name);
        if !has_d {
            d.push(format!("coframe family `{}` has no structure equation", f.name));
        }
        if f.kind == FormKind::Alias && !has_def {
            d.push(format!("alias family `{}` has no `alias` definition", f.name));
        }
        if f.kind != FormKind::Alias && has_def {
            d.push(format!("`{}` is defined by `alias` but not declared as an alias", f.name));
        }
    }
    let form_names: BTreeSet<&str> = spec.forms.iter().map(|f| f.name.as_str()).collect();
    let form_degree = |t: &Term| -> Option<usize> {
        let mut n = 0;
        for x in &t.factors {
            match x {
                Factor::Ref(r) if form_names.contains(r.name.as_str()) => n += 1,
                Factor::Ref(_) => {}
                Factor::Paren(e) => {
                    let degs: BTreeSet<usize> = e.terms.iter().map(|t| t.factors.iter().filter(|x| matches!(x, Factor::Ref(r) if form_names.contains(r.name.as_str()))).count()).collect();
                    if degs.len() != 1 || e.terms.iter().any(|t| t.factors.iter().any(|x| matches!(x, Factor::Paren(_)))) {
                        return None;
                    }
                    n += degs.into_iter().next().unwrap();
                }
            }
        }
        Some(n)
    };
    for s in &spec.structure {
        for t in &s.rhs.terms {
            if !t.coeff.is_zero() && form_degree(t) != Some(2) {
                d.push(format!("structure equation for `{}`: every term must be a 2-form", s.lhs));
                break;
            }
        }
    }
    for a in &spec.aliases {
        for t in &a.rhs.terms {
            if !t.coeff.is_zero() && form_degree(t) != Some(1) {
                d.push(format!("alias definition of `{}`: every term must be a 1-form", a.lhs));
                break;
            }
        }
    }
    for t in &spec.transforms {
        for term in &t.expr.terms {
            let selfs = term.factors.iter().filter(|x| matches!(x, Factor::Ref(r) if r.name == SELF)).count();
            let forms = term.factors.iter().filter(|x| matches!(x, Factor::Ref(r) if form_names.contains(r.name.as_str()))).count();
            let others = term.factors.iter().any(|x| match x {
                Factor::Ref(r) => r.name != SELF && !form_names.contains(r.name.as_str()) && !spec.constants.iter().any(|c| c.name == r.name),
                Factor::Paren(_) => true,
            });
            if selfs != 1 || forms != 1 || others {
                d.push(format!(
                    "transform for class `{}`: each term must be constants × one `{SELF}[..]` × one coframe form",
                    t.class
                ));
                break;
            }
        }
        for term in &t.expr.terms {
            for x in &term.factors {
                if let Factor::Ref(r) = x {
                    if r.name == SELF && r.primary.len() != 1 {
                        d.push(format!("transform for class `{}`: `{SELF}` takes exactly one index", t.class));
                    }
                }
            }
        }
    }
    // derivation slots may only carry basic/special indices; variable classes must agree
    let check_vars = |d: &mut Vec<String>, what: String, exprs: &[&Expr], fixed: &[(String, String)]| {
        let mut cls: BTreeMap<String, String> = fixed.iter().cloned().collect();
        for e in exprs {
            walk_refs(e, &mut |r: &Ref| {
                let slots: Option<&Vec<String>> = spec
                    .symbols
                    .iter()
                    .find(|s| s.name == r.name)
                    .map(|s| &s.slots)
                    .or_else(|| spec.forms.iter().find(|f| f.name == r.name).map(|f| &f.slots))
                    .or_else(|| spec.constants.iter().find(|c| c.name == r.name).map(|c| &c.slots));
                if let Some(slots) = slots {
                    for (a, sc) in r.primary.iter().zip(slots) {
                        if let Arg::Var(v) = a {
                            match cls.get(v) {
                                Some(c) if c != sc && c != "*" => {
                                    d.push(format!("{what}: index `{v}` used with classes `{c}` and `{sc}`"))
                                }
                                _ => {
                                    cls.insert(v.clone(), sc.clone());
                                }
                            }
                        }
                    }
                }
                for a in &r.deriv {
                    if let Arg::Var(v) = a {
                        match cls.get(v) {
                            Some(c) if c != "*" && !is_dirclass(c) => d.push(format!(
                                "{what}: derivation index `{v}` ranges over `{c}`, which is neither basic nor special"
                            )),
                            Some(_) => {}
                            None => {
                                cls.insert(v.clone(), "*".into());
                            }
                        }
                    }
                }
            });
        }
    };
    for s in &spec.structure {
        check_vars(&mut d, format!("structure equation for `{}`", s.lhs), &[&s.rhs], &[]);
    }
    for r in spec.relations.iter().chain(spec.constraints.iter().flat_map(|b| &b.relations)) {
        check_vars(&mut d, format!("relation `{}`", r.name), &[&r.lhs, &r.rhs], &[]);
        for v in &r.free {
            let used = {
                let mut u = false;
                for e in [&r.lhs, &r.rhs] {
                    walk_refs(e, &mut |x: &Ref| {
                        if x.primary.iter().chain(&x.deriv).any(|a| a == &Arg::Var(v.clone())) {
                            u = true;
                        }
                    });
                }
                u
            };
            if !used {
                d.push(format!("relation `{}`: free index `{v}` does not occur", r.name));
            }
        }
    }
    let cap = spec.options.coef_degree.unwrap_or(EngineOptions::default().coef_degree) as usize;
    for r in spec.relations.iter().chain(spec.constraints.iter().flat_map(|b| &b.relations)) {
        let deg = |e: &Expr| e.terms.iter().map(term_degree).max().unwrap_or(0);
        let dg = deg(&r.lhs).max(deg(&r.rhs));
        if dg > cap {
            d.push(format!("relation `{}` has polynomial degree {dg}, above the configured cap {cap}", r.name));
        }
    }
    if spec.options.seed_order == Some(0) {
        for s in spec.symbols.iter().filter(|s| s.role == Role::Auxiliary) {
            d.push(format!(
                "condition I3: auxiliary function `{}` cannot be an involutive seed without a derivation index (seed_order = 0)",
                s.name
            ));
        }
    }
    d
}

fn term_degree(t: &Term) -> usize {
    t.factors
        .iter()
        .map(|x| match x {
            Factor::Ref(_) => 1,
            Factor::Paren(e) => e.terms.iter().map(term_degree).max().unwrap_or(0),
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_problem;

    const FLAT: &str = "problem t\nparam n = 3\n[indices]\ni: basic, size n\n[coframe]\nw[i]: basic\n[invariants]\nf: auxiliary\n[structure]\nd w[i] = 0\n";

    #[test]
    fn flat_problem_is_clean() {
        let spec = parse_problem(FLAT).unwrap();
        assert!(validate(&spec).is_empty(), "{:?}", validate(&spec));
        let p = instantiate(&spec, &BTreeMap::new()).unwrap();
        assert_eq!((p.ndirs(), p.coframe_dim()), (3, 3));
        let p5 = instantiate(&spec, &BTreeMap::from([("n".into(), 5)])).unwrap();
        assert_eq!(p5.ndirs(), 5);
    }

    #[test]
    fn wrong_form_degree_is_reported() {
        let spec = parse_problem(&FLAT.replace("d w[i] = 0", "d w[i] = f*w[i]")).unwrap();
        assert!(validate(&spec).iter().any(|d| d.contains("2-form")));
    }

    #[test]
    fn missing_basic_family_is_reported() {
        let spec = parse_problem(&FLAT.replace("w[i]: basic", "w[i]: vertical")).unwrap();
        assert!(validate(&spec).iter().any(|d| d.contains("basic")));
    }
}
