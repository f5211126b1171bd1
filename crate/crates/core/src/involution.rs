//! Covering, involutive seeds, ordering search, Cartan's test, condition R
//! and the end-to-end pipeline.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::dsl::{ClassKind, Role};
use crate::exterior::{ExteriorError, RelKind};
use crate::index::{ordering_from_hint, Comp, IndexOrdering};
use crate::linalg::{Echelon, Row};
use crate::poly::Var;
use crate::problem::ConcreteProblem;
use crate::rat::Rat;
use crate::relations::{build_system, generic_point, jacobian, normal_counts, priority_key, Blocks, GenericPoint, Jacobian, NormalForm, System};

pub const SCHEMA: &str = "doa.report/1";

/// Suffix sums: the characters of the complete prolongation.
pub fn prolong_characters(s: &[usize]) -> Vec<usize> {
    let mut out = s.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] += out[k + 1];
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Characters {
    /// `s_prime[k-1]` = number of seeds whose last index has rank `k`
    pub s_prime: Vec<usize>,
    pub pseudo_character: usize,
    pub degree: usize,
    pub dimension: usize,
    pub evolution: Vec<String>,
    pub prolonged: Vec<usize>,
}

/// Characters from the ranks of the seeds' last indices.
pub fn compute_characters(last_ranks: &[u32], ndirs: usize, evolution: Vec<String>) -> Characters {
    let mut s = alloc::vec![0usize; ndirs];
    for &r in last_ranks {
        s[r as usize - 1] += 1;
    }
    let dimension = s.iter().rposition(|&x| x > 0).map(|k| k + 1).unwrap_or(0);
    let degree = if dimension == 0 { 0 } else { s[dimension - 1] };
    // the count identity: all seeds minus those below the top rank
    let below: usize = s.iter().take(dimension.saturating_sub(1)).sum();
    let pseudo_character = last_ranks.len() - below;
    let prolonged = prolong_characters(&s);
    Characters { s_prime: s, pseudo_character, degree, dimension, evolution, prolonged }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CartanLedger {
    pub n: usize,
    pub weighted_sum: usize,
    pub pass: bool,
    /// normal components one order up whose parent is not a seed
    pub stray: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionR {
    pub satisfied: bool,
    pub rho: usize,
    pub m: usize,
    pub symmetry_dimension: usize,
    pub result_quality: Quality,
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Exact,
    UpperBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exact,
    UpperBound,
    Inconclusive,
    Incompatible,
}

/// Ordering-independent work for one seed order: the closed relation set,
/// generic points, the Jacobian, the set covered by nothing and condition R.
#[derive(Debug)]
pub struct Analysis<'p> {
    pub sys: System<'p>,
    pub q: usize,
    pub point: GenericPoint,
    pub jac: Jacobian,
    pub extra: Vec<(GenericPoint, Jacobian)>,
    pub empty_cover: BTreeSet<Var>,
    pub targets: Vec<Var>,
    pub cond_r: ConditionR,
    pub diagnostics: Vec<String>,
    pub horizontality: Vec<String>,
}

fn der_var(sys: &System, v: Var, k: u8) -> Option<Var> {
    sys.calc.vars.get(&sys.comp(v).with_der(k))
}

fn unit_known(sys: &System, ech: &Echelon, nf: &NormalForm, v: Var) -> bool {
    if sys.is_given(v) {
        return true;
    }
    match nf.unit(v) {
        Some(u) => ech.contains(u),
        None => false,
    }
}

fn all_derivatives_known(sys: &System, ech: &Echelon, nf: &NormalForm, v: Var) -> bool {
    (0..sys.p().ndirs() as u8).all(|k| match der_var(sys, v, k) {
        Some(w) => unit_known(sys, ech, nf, w),
        None => false,
    })
}

/// Greatest set `S` of components of order ≤ `q` whose first derivatives are
/// all expressible through `S` itself: these are fixed by finitely many
/// constants.
pub fn empty_cover(sys: &System, nf: &NormalForm, q: usize) -> BTreeSet<Var> {
    let mut s: BTreeSet<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v) && sys.order(v) <= q).collect();
    loop {
        let mut ech = nf.ech.clone();
        for &v in &s {
            ech.insert(nf.unit(v).unwrap(), usize::MAX);
        }
        let drop: Vec<Var> = s.iter().copied().filter(|&v| !all_derivatives_known(sys, &ech, nf, v)).collect();
        if drop.is_empty() {
            return s;
        }
        for v in drop {
            s.remove(&v);
        }
    }
}

/// Least fixpoint of the covering rules starting from `known`.
pub fn covering(sys: &System, nf: &NormalForm, known: &BTreeSet<Var>, q: usize) -> (Echelon, BTreeSet<Var>) {
    let mut ech = nf.ech.clone();
    let mut covered: BTreeSet<Var> = known.clone();
    for &v in known {
        if let Some(u) = nf.unit(v) {
            ech.insert(u, usize::MAX);
        }
    }
    let mut cands: Vec<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v) && sys.order(v) < q && !covered.contains(&v)).collect();
    cands.sort_by_key(|&v| core::cmp::Reverse(sys.order(v)));
    loop {
        let mut changed = false;
        for &v in &cands {
            if covered.contains(&v) {
                continue;
            }
            if unit_known(sys, &ech, nf, v) || all_derivatives_known(sys, &ech, nf, v) {
                ech.insert(nf.unit(v).unwrap(), usize::MAX);
                covered.insert(v);
                changed = true;
            }
        }
        if !changed {
            return (ech, covered);
        }
    }
}

/// Greatest subset of `pool` that covers itself on top of `ech`.
fn self_covering(sys: &System, nf: &NormalForm, ech: &Echelon, pool: &[Var]) -> BTreeSet<Var> {
    let mut s: BTreeSet<Var> = pool.iter().copied().collect();
    loop {
        let mut e = ech.clone();
        for &v in &s {
            e.insert(nf.unit(v).unwrap(), usize::MAX);
        }
        let drop: Vec<Var> = s.iter().copied().filter(|&v| !all_derivatives_known(sys, &e, nf, v)).collect();
        if drop.is_empty() {
            return s;
        }
        for v in drop {
            s.remove(&v);
        }
    }
}

fn condition_r(sys: &mut System, pt: &GenericPoint) -> ConditionR {
    let p = sys.p();
    let forms: Vec<u16> = (0..p.forms.len() as u16).filter(|&f| !p.is_alias(f)).collect();
    let m = forms.len();
    let col: BTreeMap<u16, u32> = forms.iter().enumerate().map(|(k, &f)| (f, k as u32)).collect();
    // constant block: forms whose structure equations carry no components
    let constant: Vec<bool> = forms.iter().map(|&f| sys.calc.structure_rhs(f).terms().all(|(_, c)| c.as_constant().is_some())).collect();
    let vars: Vec<Var> = (0..sys.nvars() as Var)
        .filter(|&v| sys.order(v) < sys.q_total && p.symbols[sys.comp(v).sym as usize].role != Role::Auxiliary)
        .collect();
    // complementary (non-constant) columns first so spans can be read off
    let mut perm: Vec<u32> = (0..m as u32).collect();
    perm.sort_by_key(|&k| (constant[k as usize], k));
    let mut pos = alloc::vec![0u32; m];
    for (i, &k) in perm.iter().enumerate() {
        pos[k as usize] = i as u32;
    }
    let mut ech = Echelon::new(m);
    for v in vars {
        let dv = sys.calc.d_var(v);
        let mut row: Row = Vec::new();
        for (mono, c) in dv.terms() {
            if let Some(&k) = col.get(&mono[0]) {
                let x = c.eval(&|w| pt.value(w));
                if !x.is_zero() {
                    row.push((pos[k as usize], x));
                }
            }
        }
        ech.insert(crate::linalg::normalize_row(row), 0);
        if ech.rank() == m {
            break;
        }
    }
    let rho = ech.rank();
    let satisfied = rho == m;
    let ncomp = constant.iter().filter(|&&c| !c).count();
    let comp_spanned = ncomp > 0 && (0..ncomp as u32).all(|c| ech.contains(alloc::vec![(c, Rat::ONE)]));
    let upgrade = !satisfied && comp_spanned && ncomp < m;
    ConditionR {
        satisfied,
        rho,
        m,
        symmetry_dimension: m - rho,
        result_quality: if satisfied || upgrade { Quality::Exact } else { Quality::UpperBound },
        note: if upgrade {
            Some("rank deficit confined to a constant-coefficient block".into())
        } else if !satisfied && p.symbols.iter().any(|s| s.role == Role::Auxiliary) {
            Some("auxiliary functions present: the upper-bound claim may not hold".into())
        } else {
            None
        },
    }
}

impl<'p> Analysis<'p> {
    pub fn new(p: &'p ConcreteProblem, q: usize, blocks: Blocks) -> Result<Analysis<'p>, ExteriorError> {
        let q_total = (q + 1).max(p.options.max_order.unwrap_or(0) as usize);
        let mut sys = build_system(p, q_total, blocks)?;
        let mut diagnostics = Vec::new();
        let seed = p.options.rng_seed;
        let mut point = generic_point(&sys, seed);
        // conditions hidden in the closure surface as integrability failures
        // at the point; make them explicit and resample
        for _ in 0..4 {
            if point.integrability.is_empty() || sys.descend() == 0 {
                break;
            }
            point = generic_point(&sys, seed);
        }
        for c in &point.integrability {
            diagnostics.push(format!("integrability condition at {c}"));
        }
        if point.residual_failures > 0 {
            diagnostics.push(format!("{} relation(s) do not vanish at the sampled point", point.residual_failures));
        }
        let jac = jacobian(&sys, &point);
        let mut extra = Vec::new();
        if !sys.point_independent() {
            for t in 1..p.options.trials.max(1) as u64 {
                let pt = generic_point(&sys, seed.wrapping_add(t));
                let j = jacobian(&sys, &pt);
                extra.push((pt, j));
            }
        }
        let mut horizontality = Vec::new();
        for r in sys.open_residues() {
            let x = r.poly.eval(&|v| point.value(v));
            if !x.is_zero() {
                let forms: Vec<String> = r.mono.iter().map(|&f| p.form_label(f)).collect();
                horizontality.push(format!("{}: residue on {}", r.what, forms.join("^")));
            }
        }
        let cond_r = condition_r(&mut sys, &point);
        let natural = IndexOrdering::from_sequence("natural", &(0..p.ndirs() as u8).collect::<Vec<_>>(), p.ndirs()).unwrap();
        let nf = NormalForm::under(&sys, &jac, &natural);
        let empty_cover = empty_cover(&sys, &nf, q);
        let mut targets: BTreeSet<Var> = BTreeSet::new();
        for f in 0..p.forms.len() as u16 {
            for (_, c) in sys.calc.structure_rhs(f).terms() {
                targets.extend(c.vars());
            }
        }
        for r in &sys.relations {
            if matches!(r.kind, RelKind::Defining | RelKind::Constraint) {
                targets.extend(r.poly.vars());
            }
        }
        let targets = targets.into_iter().filter(|&v| !sys.is_given(v)).collect();
        Ok(Analysis { sys, q, point, jac, extra, empty_cover, targets, cond_r, diagnostics, horizontality })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateResult {
    pub ordering: IndexOrdering,
    pub order_label: String,
    pub passed: bool,
    #[serde(skip)]
    pub seeds: Vec<Var>,
    pub seed_labels: Vec<String>,
    pub normal_counts: Vec<usize>,
    pub o1: Vec<String>,
    pub o2: Vec<String>,
    /// `(a, b)`: the ordering with `a` below `b` is blocked
    pub o2_pairs: Vec<(u8, u8)>,
    pub o2_tags: Vec<String>,
    pub i1_missing: Vec<String>,
    pub i3: Vec<String>,
    pub covering_truncated: bool,
    pub cartan: CartanLedger,
    pub characters: Characters,
    pub per_symbol: BTreeMap<String, Vec<usize>>,
    pub trace: Vec<String>,
}

impl CandidateResult {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend(self.o1.iter().map(|s| format!("O1: {s}")));
        out.extend(self.o2.iter().map(|s| format!("O2: {s}")));
        out.extend(self.i1_missing.iter().map(|s| format!("I1: {s} is not covered")));
        out.extend(self.i3.iter().map(|s| format!("I3: {s}")));
        if !self.cartan.pass {
            out.push(format!("Cartan test: N = {} but Σ k·s'_k = {}", self.cartan.n, self.cartan.weighted_sum));
        }
        out
    }

    /// Only Cartan's test failed: a higher seed order may help.
    pub fn cartan_only(&self) -> bool {
        !self.cartan.pass && self.o1.is_empty() && self.o2.is_empty() && self.i1_missing.is_empty() && self.i3.is_empty()
    }
}

/// O1 for a given seed set: no non-seed of the seed order may need a seed
/// whose last index ranks higher than its own.
pub fn check_o1(an: &Analysis, seeds: &BTreeSet<Var>, o: &IndexOrdering) -> Vec<String> {
    let sys = &an.sys;
    let q = an.q;
    if q == 0 {
        return Vec::new();
    }
    let mut cols: Vec<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v) && sys.order(v) <= q).collect();
    cols.sort_by_cached_key(|&v| (seeds.contains(&v), priority_key(sys.comp(v), o)));
    let sub = Jacobian { rows: an.jac.rows.iter().filter(|(_, i)| sys.relations[*i].order <= q).cloned().collect() };
    let nf = NormalForm::build(sys, &sub, cols);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for &x in nf.var_of.iter() {
        if seeds.contains(&x) || sys.order(x) != q || nf.is_normal(x) {
            continue;
        }
        let rx = o.rank(sys.comp(x).last().unwrap());
        for (y, _) in nf.expression(x) {
            if seeds.contains(&y) && o.rank(sys.comp(y).last().unwrap()) > rx && seen.insert(x) {
                let tag = nf.pivot_tag(x).map(|t| sys.origin_note(t)).unwrap_or_default();
                out.push(format!("{} depends on seed {} ({tag})", sys.label(x), sys.label(y)));
            }
        }
    }
    out
}

fn replace_last(c: &Comp, k: u8) -> Comp {
    let mut c = c.clone();
    *c.der.last_mut().unwrap() = k;
    c
}

pub fn evaluate_candidate(an: &Analysis, o: &IndexOrdering) -> CandidateResult {
    evaluate_seeds(an, o, None)
}

fn evaluate_seeds(an: &Analysis, o: &IndexOrdering, forced: Option<&BTreeSet<Var>>) -> CandidateResult {
    let sys = &an.sys;
    let p = sys.p();
    let q = an.q;
    let nf = NormalForm::under(sys, &an.jac, o);
    let counts = normal_counts(sys, &nf);
    let seeds: BTreeSet<Var> = match forced {
        Some(s) => s.clone(),
        None => nf.normals().filter(|&v| sys.order(v) == q && !an.empty_cover.contains(&v)).collect(),
    };
    let mut i3 = Vec::new();
    for &s in &seeds {
        if p.symbols[sys.comp(s).sym as usize].role == Role::Auxiliary && sys.order(s) == 0 {
            i3.push(format!("auxiliary {} has no derivation index", sys.label(s)));
        }
    }
    // covering
    let mut known = seeds.clone();
    known.extend(an.empty_cover.iter().copied());
    let (mut ech, mut covered) = covering(sys, &nf, &known, q);
    let mut missing: Vec<Var> = an.targets.iter().copied().filter(|&v| !covered.contains(&v) && !unit_known(sys, &ech, &nf, v)).collect();
    let mut truncated = false;
    if !missing.is_empty() {
        let pool: Vec<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v) && sys.order(v) < q && !covered.contains(&v)).collect();
        let extra = self_covering(sys, &nf, &ech, &pool);
        for &v in &extra {
            ech.insert(nf.unit(v).unwrap(), usize::MAX);
        }
        covered.extend(extra);
        missing.retain(|&v| !covered.contains(&v) && !unit_known(sys, &ech, &nf, v));
        truncated = !missing.is_empty();
    }
    let i1_missing: Vec<String> = missing.iter().map(|&v| sys.label(v)).collect();
    // O2
    let mut o2 = Vec::new();
    let mut o2_pairs = BTreeSet::new();
    let mut o2_tags = BTreeSet::new();
    for &s in &seeds {
        let c = sys.comp(s);
        let Some(l) = c.last() else { continue };
        for m in 0..p.ndirs() as u8 {
            if o.rank(m) >= o.rank(l) {
                continue;
            }
            let ok = sys.calc.vars.get(&replace_last(c, m)).map(|w| seeds.contains(&w)).unwrap_or(false);
            if !ok {
                let other = sys.calc.vars.get(&replace_last(c, m));
                if o2_pairs.insert((m, l)) || o2.len() < 8 {
                    let lab = other.map(|w| sys.label(w)).unwrap_or_default();
                    o2.push(format!("seed {} but {lab} is not a seed", sys.label(s)));
                }
                if let Some(t) = other.and_then(|w| nf.pivot_tag(w)) {
                    if o2_tags.len() < 8 {
                        o2_tags.insert(sys.origin_note(t));
                    }
                }
            }
        }
    }
    let o1 = if forced.is_some() { check_o1(an, &seeds, o) } else { Vec::new() };
    // Cartan's test
    let mut n = 0usize;
    let mut stray = 0usize;
    for v in nf.normals() {
        if sys.order(v) != q + 1 || q + 1 > sys.q_total {
            continue;
        }
        let c = sys.comp(v);
        let mut parent = c.clone();
        parent.der.pop();
        match sys.calc.vars.get(&parent) {
            Some(w) if seeds.contains(&w) => n += 1,
            _ => stray += 1,
        }
    }
    let last_ranks: Vec<u32> = seeds.iter().filter_map(|&s| sys.comp(s).last()).map(|d| o.rank(d)).collect();
    let weighted_sum: usize = last_ranks.iter().map(|&r| r as usize).sum();
    let cartan = CartanLedger { n, weighted_sum, pass: n == weighted_sum, stray };
    let used: BTreeSet<u8> = seeds.iter().filter_map(|&s| sys.comp(s).last()).collect();
    let evolution: Vec<String> = (0..p.ndirs() as u8).filter(|d| !used.contains(d)).map(|d| p.dir_label(d).to_string()).collect();
    let characters = compute_characters(&last_ranks, p.ndirs(), evolution);
    let mut per_symbol: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &s in &seeds {
        let c = sys.comp(s);
        if let Some(d) = c.last() {
            let e = per_symbol.entry(p.symbols[c.sym as usize].name.clone()).or_insert_with(|| alloc::vec![0; p.ndirs()]);
            e[o.rank(d) as usize - 1] += 1;
        }
    }
    let mut trace = Vec::new();
    if p.options.trace {
        for &v in nf.var_of.iter().rev() {
            if sys.order(v) > q || nf.is_normal(v) {
                continue;
            }
            let expr: Vec<String> = nf.expression(v).iter().map(|(w, c)| format!("{c}·{}", sys.label(*w))).collect();
            let tag = nf.pivot_tag(v).map(|t| sys.origin_note(t)).unwrap_or_default();
            trace.push(format!("{} = {} [{tag}]", sys.label(v), if expr.is_empty() { "0".into() } else { expr.join(" + ") }));
        }
    }
    let passed = o1.is_empty() && o2.is_empty() && i1_missing.is_empty() && i3.is_empty() && cartan.pass;
    CandidateResult {
        ordering: o.clone(),
        order_label: o.describe(p),
        passed,
        seed_labels: seeds.iter().map(|&s| sys.label(s)).collect(),
        seeds: seeds.into_iter().collect(),
        normal_counts: counts,
        o1,
        o2,
        o2_pairs: o2_pairs.into_iter().collect(),
        o2_tags: o2_tags.into_iter().collect(),
        i1_missing,
        i3,
        covering_truncated: truncated,
        cartan,
        characters,
        per_symbol,
        trace,
    }
}

/// The accepted seeds re-checked under another ordering.
pub fn recheck_seeds(an: &Analysis, seeds: &[Var], o: &IndexOrdering) -> CandidateResult {
    let s: BTreeSet<Var> = seeds.iter().copied().collect();
    evaluate_seeds(an, o, Some(&s))
}

/// The user's hint (or a class hint), then the class heuristics; duplicates
/// by rank map are dropped.
pub fn candidate_orderings(p: &ConcreteProblem) -> Vec<IndexOrdering> {
    let mut hints: Vec<String> = Vec::new();
    if let Some(h) = &p.options.ordering {
        hints.push(h.clone());
    }
    for (c, decl) in p.spec.classes.iter().enumerate() {
        if let Some(h) = &decl.hint {
            if p.classes[c].kind == ClassKind::Special {
                if h.contains("small") {
                    hints.push("special-smallest".into());
                } else if h.contains("larg") || h.contains("great") {
                    hints.push("special-largest".into());
                }
            }
        }
    }
    hints.extend(["natural", "special-smallest", "special-largest"].iter().map(|s| s.to_string()));
    let mut out: Vec<IndexOrdering> = Vec::new();
    for h in hints {
        if let Ok(o) = ordering_from_hint(p, &h) {
            if !out.iter().any(|x| x.ranks == o.ranks) {
                out.push(o);
            }
        }
    }
    out
}

/// Interleavings of the class blocks, values ascending inside classes whose
/// values are interchangeable, all permutations elsewhere.  `None` when the
/// direction count is over the limit.
pub fn exhaustive_orderings(p: &ConcreteProblem) -> Option<Vec<IndexOrdering>> {
    let n = p.ndirs();
    if n > p.options.exhaustive_limit {
        return None;
    }
    let sym = p.symmetric_classes();
    let mut out = Vec::new();
    let mut seq = Vec::with_capacity(n);
    let mut used = alloc::vec![false; n];
    fn rec(p: &ConcreteProblem, sym: &BTreeSet<usize>, seq: &mut Vec<u8>, used: &mut Vec<bool>, out: &mut Vec<IndexOrdering>) {
        let n = used.len();
        if seq.len() == n {
            let name = seq.iter().map(|&d| p.dir_label(d)).collect::<Vec<_>>().join("<");
            out.push(IndexOrdering::from_sequence(name, seq, n).unwrap());
            return;
        }
        for d in 0..n {
            if used[d] {
                continue;
            }
            let (c, v) = p.dirs[d];
            // inside interchangeable classes only the smallest unused value may come next
            if sym.contains(&c) && (0..n).any(|e| !used[e] && p.dirs[e].0 == c && p.dirs[e].1 < v) {
                continue;
            }
            used[d] = true;
            seq.push(d as u8);
            rec(p, sym, seq, used, out);
            seq.pop();
            used[d] = false;
        }
    }
    rec(p, &sym, &mut seq, &mut used, &mut out);
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Advisory {
    pub pair: (String, String),
    pub relations: Vec<String>,
    pub message: String,
}

/// A pair blocked in both directions calls for mixing the two frame forms.
pub fn conflict_advisory(p: &ConcreteProblem, results: &[CandidateResult]) -> Option<Advisory> {
    let mut blocked: BTreeSet<(u8, u8)> = BTreeSet::new();
    let mut tags: BTreeSet<String> = BTreeSet::new();
    for r in results {
        blocked.extend(r.o2_pairs.iter().copied());
        tags.extend(r.o2_tags.iter().cloned());
    }
    let (a, b) = blocked.iter().copied().find(|&(a, b)| a < b && blocked.contains(&(b, a)))?;
    let (la, lb) = (p.dir_label(a).to_string(), p.dir_label(b).to_string());
    Some(Advisory {
        message: format!(
            "neither {la} < {lb} nor {lb} < {la} is admissible; replace the coframe forms of directions {la} and {lb} by independent combinations of both and rerun"
        ),
        pair: (la, lb),
        relations: tags.into_iter().collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateSummary {
    pub ordering: String,
    pub passed: bool,
    pub failures: Vec<String>,
    /// O1 check of the accepted seeds under this ordering
    pub accepted_seeds_o1: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EomFlags {
    pub base_degree: usize,
    pub base_dimension: usize,
    pub dimension_drop_one: bool,
    pub new_evolution: Vec<String>,
    pub single_new_direction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trials {
    pub count: usize,
    pub point_independent: bool,
    pub agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub problem: String,
    pub bindings: BTreeMap<String, i64>,
    pub options: crate::problem::EngineOptions,
    pub status: Status,
    pub seed_order: usize,
    pub max_order: usize,
    pub ordering: Option<String>,
    pub seeds: Vec<String>,
    pub seed_count: usize,
    pub characters: Characters,
    pub per_symbol: BTreeMap<String, Vec<usize>>,
    pub normal_counts: Vec<usize>,
    pub cartan: Option<CartanLedger>,
    pub condition_r: ConditionR,
    pub candidates: Vec<CandidateSummary>,
    pub heuristic_only: bool,
    pub advisory: Option<Advisory>,
    pub eom: Option<EomFlags>,
    pub trials: Trials,
    pub relation_counts: BTreeMap<String, usize>,
    pub covering_truncated: bool,
    pub caveats: Vec<String>,
    pub diagnostics: Vec<String>,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
}

/// How a batch of candidate orderings is evaluated (sequentially here; the
/// std front end evaluates them in parallel).
pub type Evaluator<'a> = &'a (dyn Fn(&Analysis, &[IndexOrdering]) -> Vec<CandidateResult> + Sync);

pub fn sequential(an: &Analysis, os: &[IndexOrdering]) -> Vec<CandidateResult> {
    os.iter().map(|o| evaluate_candidate(an, o)).collect()
}

pub fn default_seed_order(p: &ConcreteProblem) -> usize {
    if let Some(q) = p.options.seed_order {
        return q as usize;
    }
    let mut q = 1usize;
    let rels = p.spec.relations.iter().chain(p.spec.constraints.iter().flat_map(|b| &b.relations));
    for r in rels {
        let mut visit = |rf: &crate::dsl::Ref| q = q.max(rf.deriv.len());
        crate::problem::walk_refs(&r.lhs, &mut visit);
        crate::problem::walk_refs(&r.rhs, &mut visit);
    }
    q
}

pub fn run_pipeline(p: &ConcreteProblem) -> Result<Report, PipelineError> {
    run_pipeline_with(p, &sequential)
}

struct Outcome<'p> {
    an: Analysis<'p>,
    results: Vec<CandidateResult>,
    chosen: Option<usize>,
    heuristic_only: bool,
}

fn search<'p>(p: &'p ConcreteProblem, blocks: Blocks, eval: Evaluator) -> Result<Outcome<'p>, PipelineError> {
    let q0 = default_seed_order(p);
    let qmax = match p.options.max_order {
        Some(m) => (m as usize).saturating_sub(1).max(q0),
        None => q0 + 2,
    };
    let mut q = q0;
    loop {
        let an = Analysis::new(p, q, blocks)?;
        let cands = candidate_orderings(p);
        let mut results = eval(&an, &cands);
        let mut chosen = results.iter().position(|r| r.passed);
        let mut heuristic_only = false;
        if chosen.is_none() && an.sys.incompatible.is_empty() {
            match exhaustive_orderings(p) {
                Some(all) => {
                    let rest: Vec<IndexOrdering> = all.into_iter().filter(|o| !cands.iter().any(|c| c.ranks == o.ranks)).collect();
                    let more = eval(&an, &rest);
                    let base = results.len();
                    results.extend(more);
                    chosen = results[base..].iter().position(|r| r.passed).map(|k| k + base);
                }
                None => heuristic_only = true,
            }
        }
        let retry = chosen.is_none() && q < qmax && results.iter().any(|r| r.cartan_only());
        if !retry {
            return Ok(Outcome { an, results, chosen, heuristic_only });
        }
        q += 1;
    }
}

pub fn run_pipeline_with(p: &ConcreteProblem, eval: Evaluator) -> Result<Report, PipelineError> {
    let out = search(p, Blocks::All, eval)?;
    let an = &out.an;
    let sys = &an.sys;
    let mut diagnostics: Vec<String> = p.warnings.clone();
    diagnostics.extend(an.diagnostics.iter().cloned());
    diagnostics.extend(an.horizontality.iter().map(|h| format!("horizontality: {h}")));
    let mut caveats = Vec::new();
    let incompatible = !sys.incompatible.is_empty();
    diagnostics.extend(sys.incompatible.iter().cloned());

    // trials
    let mut agree = true;
    if let Some(ci) = out.chosen {
        let o = &out.results[ci].ordering;
        for (pt, j) in &an.extra {
            let nf = NormalForm::under(sys, j, o);
            if normal_counts(sys, &nf) != out.results[ci].normal_counts {
                agree = false;
                diagnostics.push(format!("trial with seed {} gives different normal counts", pt.seed));
            }
        }
    }
    let trials = Trials { count: 1 + an.extra.len(), point_independent: an.extra.is_empty(), agree };

    let mut candidates = Vec::new();
    for (i, r) in out.results.iter().enumerate() {
        let accepted_seeds_o1 = match out.chosen {
            Some(ci) if ci != i => recheck_seeds(an, &out.results[ci].seeds, &r.ordering).o1,
            _ => Vec::new(),
        };
        candidates.push(CandidateSummary { ordering: r.order_label.clone(), passed: r.passed, failures: r.failures(), accepted_seeds_o1 });
    }
    let advisory = if out.chosen.is_none() { conflict_advisory(p, &out.results) } else { None };
    if out.heuristic_only {
        caveats.push("heuristic-only ordering search: too many directions for the exhaustive pass".into());
    }

    let chosen = out.chosen.map(|c| &out.results[c]);
    let fallback = out.results.first();
    let shown = chosen.or(fallback);
    let characters = shown.map(|r| r.characters.clone()).unwrap_or_else(|| compute_characters(&[], p.ndirs(), Vec::new()));
    if let (None, Some(f)) = (chosen, fallback) {
        caveats.push(format!("no admissible ordering: characters shown are those of the rejected candidate {}", f.order_label));
    }
    if chosen.is_some_and(|r| r.seeds.is_empty()) {
        caveats.push("empty seed set: the system has no degree of arbitrariness, which does not rule out inconsistency".into());
    }
    if chosen.is_some() && !an.cond_r.satisfied {
        caveats.push(format!("condition R fails: rank {} of {}; symmetry group dimension {}", an.cond_r.rho, an.cond_r.m, an.cond_r.symmetry_dimension));
    }
    if chosen.is_some_and(|r| r.cartan.stray > 0) {
        diagnostics.push(format!("{} normal component(s) one order above the seeds have no seed parent", chosen.unwrap().cartan.stray));
    }

    let status = if incompatible {
        Status::Incompatible
    } else if chosen.is_none() || !an.horizontality.is_empty() || !an.point.is_consistent() || !agree {
        Status::Inconclusive
    } else if an.cond_r.result_quality == Quality::UpperBound {
        Status::UpperBound
    } else {
        Status::Exact
    };

    // equations of motion: compare against the system without them
    let mut eom = None;
    if p.spec.constraints.iter().any(|b| b.eom) && chosen.is_some() {
        let base = search(p, Blocks::NoEom, eval)?;
        if let Some(bc) = base.chosen {
            let b = &base.results[bc].characters;
            let new_evolution: Vec<String> = characters.evolution.iter().filter(|e| !b.evolution.contains(e)).cloned().collect();
            eom = Some(EomFlags {
                base_degree: b.degree,
                base_dimension: b.dimension,
                dimension_drop_one: b.dimension == characters.dimension + 1,
                single_new_direction: new_evolution.len() == 1,
                new_evolution,
            });
        }
    }

    let mut relation_counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &sys.relations {
        let k = match r.kind {
            RelKind::Defining => "defining",
            RelKind::Bianchi => "bianchi",
            RelKind::Generic => "generic",
            RelKind::Derived => "derived",
            RelKind::Constraint => "constraint",
        };
        *relation_counts.entry(k.into()).or_default() += 1;
    }

    Ok(Report {
        schema: SCHEMA,
        problem: p.spec.name.clone(),
        bindings: p.bindings.clone(),
        options: p.options.clone(),
        status,
        seed_order: an.q,
        max_order: sys.q_total,
        ordering: chosen.map(|r| r.order_label.clone()),
        seeds: chosen.map(|r| r.seed_labels.clone()).unwrap_or_default(),
        seed_count: chosen.map(|r| r.seeds.len()).unwrap_or(0),
        characters,
        per_symbol: shown.map(|r| r.per_symbol.clone()).unwrap_or_default(),
        normal_counts: shown.map(|r| r.normal_counts.clone()).unwrap_or_default(),
        cartan: shown.map(|r| r.cartan.clone()),
        condition_r: an.cond_r.clone(),
        candidates,
        heuristic_only: out.heuristic_only,
        advisory,
        eom,
        trials,
        relation_counts,
        covering_truncated: shown.map(|r| r.covering_truncated).unwrap_or(false),
        caveats,
        diagnostics,
        trace: shown.map(|r| r.trace.clone()).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_sums() {
        assert_eq!(prolong_characters(&[20, 20, 14, 6]), [60, 40, 20, 6]);
        assert_eq!(prolong_characters(&[]), [0usize; 0]);
    }

    #[test]
    fn characters_from_last_ranks() {
        let c = compute_characters(&[1, 1, 2, 3, 3, 3], 4, Vec::new());
        assert_eq!(c.s_prime, [2, 1, 3, 0]);
        assert_eq!((c.degree, c.dimension, c.pseudo_character), (3, 3, 3));
        let none = compute_characters(&[], 3, Vec::new());
        assert_eq!((none.degree, none.dimension), (0, 0));
    }
}
