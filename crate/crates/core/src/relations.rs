//! Relation closure, generic points and ordering-aware normal forms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dsl::{FormKind, Role};
use crate::exterior::{Calculus, ExteriorError, Origin, RelKind, Relation, Residue};
use crate::index::{comp_label, enumerate_components, Comp, IndexOrdering};
use crate::linalg::{axpy, normalize_row, Echelon, Row};
use crate::poly::{Poly, Var};
use crate::problem::ConcreteProblem;
use crate::rat::Rat;

/// Which constraint blocks take part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Blocks {
    All,
    NoEom,
}

/// The closed relation set of a problem truncated at derivation order `q_total`.
#[derive(Clone, Debug)]
pub struct System<'p> {
    pub calc: Calculus<'p>,
    pub q_total: usize,
    pub relations: Vec<Relation>,
    pub residues: Vec<Residue>,
    /// nonzero constants produced anywhere: the system is incompatible
    pub incompatible: Vec<String>,
    pub diagnostics: Vec<String>,
    pub given: Vec<bool>,
    closed: usize,
    seen: BTreeSet<Poly>,
}

impl<'p> System<'p> {
    pub fn p(&self) -> &'p ConcreteProblem {
        self.calc.p
    }

    pub fn nvars(&self) -> usize {
        self.calc.vars.len()
    }

    pub fn comp(&self, v: Var) -> &Comp {
        self.calc.vars.comp(v)
    }

    pub fn order(&self, v: Var) -> usize {
        self.calc.vars.comp(v).order()
    }

    pub fn is_given(&self, v: Var) -> bool {
        self.given[v as usize]
    }

    pub fn label(&self, v: Var) -> String {
        comp_label(self.p(), self.comp(v))
    }

    pub fn origin_note(&self, i: usize) -> String {
        let p = self.p();
        match &self.relations[i].origin {
            Origin::Declared { name } => format!("relation {name}"),
            Origin::Constraint { name, block } => format!("constraint {name} (block {block})"),
            Origin::Structure { form } => format!("d² of {form}"),
            Origin::Decomposition { form } => format!("decomposition of {form}"),
            Origin::Commutator { comp } => format!("commutator of {comp}"),
            Origin::Derived { parent, dir } => format!("{} along {}", self.origin_note(*parent), p.dir_label(*dir)),
            Origin::Vertical { parent, form } => format!("{} along {form}", self.origin_note(*parent)),
            Origin::Consequence { parent } => format!("lower-order consequence of {}", self.origin_note(*parent)),
        }
    }

    pub fn fmt_poly(&self, poly: &Poly) -> String {
        struct F<'a, 'b>(&'a System<'b>, &'a Poly);
        impl core::fmt::Display for F<'_, '_> {
            fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                self.1.fmt_with(f, &|f, v| f.write_str(&self.0.label(v)))
            }
        }
        format!("{}", F(self, poly))
    }

    /// Variables interned so far, sorted by order.
    pub fn vars_by_order(&self) -> Vec<Vec<Var>> {
        let mut out = alloc::vec![Vec::new(); self.q_total + 2];
        for (v, c) in self.calc.vars.iter() {
            if c.order() < out.len() {
                out[c.order()].push(v);
            }
        }
        out
    }
}

fn block_included(p: &ConcreteProblem, b: usize, blocks: Blocks) -> bool {
    match blocks {
        Blocks::All => true,
        Blocks::NoEom => !p.spec.constraints[b].eom,
    }
}

/// Build and close the relation set.
pub fn build_system(p: &ConcreteProblem, q_total: usize, blocks: Blocks) -> Result<System<'_>, ExteriorError> {
    let mut calc = Calculus::new(p)?;
    for r in 0..=q_total {
        for s in 0..p.symbols.len() {
            for c in enumerate_components(p, s, r) {
                calc.intern(c);
            }
        }
    }
    let mut sys = System {
        calc,
        q_total,
        relations: Vec::new(),
        residues: Vec::new(),
        incompatible: Vec::new(),
        diagnostics: Vec::new(),
        given: Vec::new(),
        closed: 0,
        seen: BTreeSet::new(),
    };
    let mut declared: Vec<(RelKind, Origin, Poly)> = Vec::new();
    for r in &p.spec.relations {
        for (lab, poly) in sys.calc.instantiate_relation(&r.free, &r.lhs, &r.rhs)? {
            let name = if lab.is_empty() { r.name.clone() } else { format!("{}[{lab}]", r.name) };
            declared.push((RelKind::Defining, Origin::Declared { name }, poly));
        }
    }
    for (b, blk) in p.spec.constraints.iter().enumerate() {
        if !block_included(p, b, blocks) {
            continue;
        }
        for r in &blk.relations {
            for (lab, poly) in sys.calc.instantiate_relation(&r.free, &r.lhs, &r.rhs)? {
                let name = if lab.is_empty() { r.name.clone() } else { format!("{}[{lab}]", r.name) };
                declared.push((RelKind::Constraint, Origin::Constraint { name, block: b }, poly));
            }
        }
    }
    for (kind, origin, poly) in declared {
        let order = sys.calc.poly_order(&poly);
        sys.push(Relation { kind, poly, order, origin });
    }
    let (bianchi, residues) = sys.calc.derive_bianchi();
    sys.residues.extend(residues);
    for r in bianchi {
        sys.push(r);
    }
    if q_total >= 2 {
        let low: Vec<Var> = sys.calc.vars.iter().filter(|(_, c)| c.order() + 2 <= q_total).map(|(v, _)| v).collect();
        for v in low {
            let (rels, res) = sys.calc.generic_relations_of(v);
            sys.residues.extend(res);
            for r in rels {
                sys.push(r);
            }
        }
    }
    sys.close();
    sys.given = (0..sys.nvars() as Var).map(|v| p.symbols[sys.comp(v).sym as usize].role == Role::Given).collect();
    Ok(sys)
}

impl System<'_> {
    fn push(&mut self, r: Relation) -> bool {
        if r.poly.is_zero() {
            return false;
        }
        if let Some(c) = r.poly.as_constant() {
            self.relations.push(r);
            let i = self.relations.len() - 1;
            self.incompatible.push(format!("{} reduces to {c} = 0", self.origin_note(i)));
            return false;
        }
        if !self.seen.insert(r.poly.normalized()) {
            return false;
        }
        self.relations.push(r);
        true
    }

    /// Differentiate every relation below the truncation order along each
    /// basic direction; declared relations and constraints also contribute
    /// their coefficients along the non-basic forms.
    fn close(&mut self) {
        let p = self.p();
        let mut i = self.closed;
        while i < self.relations.len() {
            let r = &self.relations[i];
            if r.order >= self.q_total || r.poly.as_constant().is_some() {
                i += 1;
                continue;
            }
            let vertical = matches!(r.kind, RelKind::Defining | RelKind::Constraint);
            let poly = r.poly.clone();
            let dp = self.calc.d_poly(&poly);
            let mut new = Vec::new();
            for (mono, coef) in dp.terms() {
                let f = mono[0];
                if self.calc.is_basic(f) {
                    let dir = p.dir_of_form(f).expect("basic form labels a direction");
                    new.push((coef.clone(), Origin::Derived { parent: i, dir }, RelKind::Derived));
                } else if vertical && p.families[p.forms[f as usize].family].kind != FormKind::Alias {
                    new.push((coef.clone(), Origin::Vertical { parent: i, form: p.form_label(f) }, RelKind::Derived));
                }
            }
            // directions are emitted in direction order for determinism
            new.sort_by_key(|(_, o, _)| match o {
                Origin::Derived { dir, .. } => (0, *dir as usize, String::new()),
                Origin::Vertical { form, .. } => (1, 0, form.clone()),
                _ => (2, 0, String::new()),
            });
            for (poly, origin, kind) in new {
                let order = self.calc.poly_order(&poly);
                self.push(Relation { kind, poly, order, origin });
            }
            i += 1;
        }
        self.closed = i;
    }

    /// Symbolic descent.  Relations of each order whose top-order part is
    /// linear with constant coefficients are row-reduced together, each row
    /// carrying its lower-order remainder.  A combination whose top part
    /// cancels leaves a remainder that is passed down to its own order and
    /// reduced again; whatever survives is a condition on lower-order data
    /// that the closure never states explicitly.  Returns how many new
    /// relations were added (and closed).
    pub fn descend(&mut self) -> usize {
        // (poly, parent relation, already in the system)
        let mut queue: Vec<Vec<(Poly, usize, bool)>> = alloc::vec![Vec::new(); self.q_total + 1];
        for (i, r) in self.relations.iter().enumerate() {
            if r.order <= self.q_total && r.poly.as_constant().is_none() {
                queue[r.order].push((r.poly.clone(), i, true));
            }
        }
        let mut found: Vec<(Poly, usize)> = Vec::new();
        for r in (0..=self.q_total).rev() {
            let mut ech: BTreeMap<u32, (Row, Poly)> = BTreeMap::new();
            for (poly, parent, known) in core::mem::take(&mut queue[r]) {
                let Some((mut top, mut rest)) = self.split_top(&poly, r) else {
                    if !known {
                        found.push((poly, parent));
                    }
                    continue;
                };
                while let Some((lead, c)) = top.first().cloned() {
                    let Some((prow, prest)) = ech.get(&lead) else { break };
                    let f = &c / &prow[0].1;
                    top = axpy(&top, &f, prow);
                    rest.add_scaled(&-f, prest);
                }
                if let Some(&(lead, _)) = top.first() {
                    if !known {
                        found.push((poly, parent));
                    }
                    ech.insert(lead, (top, rest));
                } else if rest.as_constant().is_some() {
                    found.push((rest, parent));
                } else if !rest.is_zero() {
                    let o = self.calc.poly_order(&rest).min(r);
                    queue[o].push((rest, parent, false));
                }
            }
        }
        let mut added = 0;
        for (poly, parent) in found {
            let order = self.calc.poly_order(&poly);
            if self.push(Relation { kind: RelKind::Derived, poly, order, origin: Origin::Consequence { parent } }) {
                added += 1;
            }
        }
        self.close();
        added
    }

    /// Top-order part as a sparse row when it is linear with constant
    /// coefficients, plus the remainder.
    fn split_top(&self, poly: &Poly, r: usize) -> Option<(Row, Poly)> {
        let mut top: Row = Vec::new();
        let mut rest = Poly::zero();
        for (m, c) in poly.terms() {
            let hits = m.iter().filter(|&&v| self.order(v) == r).count();
            match (hits, m.len()) {
                (0, _) => rest.add_term(c.clone(), m.clone()),
                (1, 1) => top.push((m[0], c.clone())),
                _ => return None,
            }
        }
        Some((normalize_row(top), rest))
    }

    /// Residues that do not vanish identically; the caller evaluates them at
    /// a generic point.
    pub fn open_residues(&self) -> impl Iterator<Item = &Residue> {
        self.residues.iter().filter(|r| !r.poly.is_zero())
    }

    /// True when every relation is linear in its top-order variables with
    /// constant coefficients there: ranks then do not depend on the point.
    pub fn point_independent(&self) -> bool {
        self.relations.iter().all(|r| {
            r.poly.terms().all(|(m, _)| {
                let top = m.iter().filter(|&&v| self.order(v) == r.order).count();
                top == 0 || m.len() == 1
            })
        })
    }
}

/// Small nonzero random integers.
pub struct Sampler(ChaCha8Rng);

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample(&mut self) -> Rat {
        loop {
            let v = (self.0.next_u32() % 101) as i64 - 50;
            if v != 0 {
                return Rat::int(v);
            }
        }
    }
}

/// Values for every interned component satisfying all relations.
#[derive(Clone, Debug)]
pub struct GenericPoint {
    pub values: Vec<Rat>,
    pub seed: u64,
    /// hidden conditions on randomly chosen lower-order data
    pub integrability: Vec<String>,
    pub residual_failures: usize,
}

impl GenericPoint {
    pub fn value(&self, v: Var) -> Rat {
        self.values[v as usize].clone()
    }

    pub fn is_consistent(&self) -> bool {
        self.integrability.is_empty() && self.residual_failures == 0
    }
}

/// Build a point order by order: lower values are substituted, variables
/// that still appear nonlinearly are sampled, and the remaining linear
/// system is solved with unknown (non-given) variables eliminated first so
/// that given data absorbs conditions the relations impose on it.
pub fn generic_point(sys: &System, seed: u64) -> GenericPoint {
    let mut rng = Sampler::new(seed);
    let n = sys.nvars();
    let mut val: Vec<Option<Rat>> = alloc::vec![None; n];
    let by_order = sys.vars_by_order();
    let mut rels_by_order: Vec<Vec<usize>> = alloc::vec![Vec::new(); by_order.len()];
    for (i, r) in sys.relations.iter().enumerate() {
        if r.order < rels_by_order.len() {
            rels_by_order[r.order].push(i);
        }
    }
    let mut integrability = Vec::new();
    for (r, vars) in by_order.iter().enumerate() {
        let polys: Vec<Poly> =
            rels_by_order[r].iter().map(|&i| sys.relations[i].poly.eval_partial(&|v| val[v as usize].clone())).collect();
        let mut nonlinear: BTreeSet<Var> = BTreeSet::new();
        for p in &polys {
            for (m, _) in p.terms() {
                if m.len() >= 2 {
                    nonlinear.extend(m.iter().copied());
                }
            }
        }
        for v in nonlinear {
            val[v as usize] = Some(rng.sample());
        }
        let mut cols: Vec<Var> = vars.iter().copied().filter(|&v| val[v as usize].is_none()).collect();
        cols.sort_by_key(|&v| (sys.is_given(v), v));
        let mut col_of: BTreeMap<Var, u32> = BTreeMap::new();
        for (k, &v) in cols.iter().enumerate() {
            col_of.insert(v, k as u32);
        }
        let konst = cols.len() as u32;
        let mut ech = Echelon::new(cols.len() + 1);
        for (j, p) in polys.iter().enumerate() {
            let p = p.eval_partial(&|v| val[v as usize].clone());
            let mut row: Row = Vec::with_capacity(p.len());
            for (m, c) in p.terms() {
                match m.len() {
                    0 => row.push((konst, c.clone())),
                    _ => row.push((col_of[&m[0]], c.clone())),
                }
            }
            if ech.insert(normalize_row(row), j) == Some(konst) {
                let i = rels_by_order[r][j];
                integrability.push(format!("order {r}: {}", sys.origin_note(i)));
            }
        }
        let mut cval: Vec<Option<Rat>> = alloc::vec![None; cols.len() + 1];
        cval[konst as usize] = Some(Rat::ONE);
        for (k, slot) in cval.iter_mut().enumerate().take(cols.len()) {
            if !ech.is_pivot(k as u32) {
                *slot = Some(rng.sample());
            }
        }
        for k in (0..cols.len()).rev() {
            if let Some((row, _)) = ech.pivot_row(k as u32) {
                let mut acc = Rat::ZERO;
                for (c, coef) in row.iter().skip(1) {
                    acc += &(coef * cval[*c as usize].as_ref().unwrap());
                }
                cval[k] = Some(-acc);
            }
        }
        for (k, &v) in cols.iter().enumerate() {
            val[v as usize] = cval[k].take();
        }
    }
    for v in val.iter_mut() {
        if v.is_none() {
            *v = Some(rng.sample());
        }
    }
    let values: Vec<Rat> = val.into_iter().map(|v| v.unwrap()).collect();
    let residual_failures =
        sys.relations.iter().filter(|r| !r.poly.eval(&|v| values[v as usize].clone()).is_zero()).count();
    GenericPoint { values, seed, integrability, residual_failures }
}

/// Linearised relations at a point, given components dropped.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub rows: Vec<(Vec<(Var, Rat)>, usize)>,
}

pub fn jacobian(sys: &System, pt: &GenericPoint) -> Jacobian {
    let rows = sys
        .relations
        .iter()
        .enumerate()
        .filter(|(_, r)| r.poly.as_constant().is_none())
        .map(|(i, r)| {
            let g = r.poly.gradient_at(&|v| pt.value(v));
            (g.into_iter().filter(|(v, _)| !sys.is_given(*v)).collect::<Vec<_>>(), i)
        })
        .filter(|(g, _)| !g.is_empty())
        .collect();
    Jacobian { rows }
}

/// Elimination priority of a component under an ordering: higher order
/// first, then the derivation ranks compared from the last index backwards
/// (greater eliminated first), so that normal components carry
/// non-increasing derivation indices; symbol declaration order and primary
/// tuple break the remaining ties.
pub fn priority_key(c: &Comp, o: &IndexOrdering) -> (Reverse<usize>, Reverse<Vec<u32>>, u16, Vec<u8>) {
    let ranks: Vec<u32> = c.der.iter().rev().map(|&d| o.rank(d)).collect();
    (Reverse(c.order()), Reverse(ranks), c.sym, c.idx.clone())
}

const NO_COL: u32 = u32::MAX;

/// Echelon of the Jacobian with columns in priority order.  Pivot columns
/// are the dependent components; the rest are normal.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub ech: Echelon,
    pub col_of: Vec<u32>,
    pub var_of: Vec<Var>,
}

impl NormalForm {
    pub fn build(sys: &System, jac: &Jacobian, cols: Vec<Var>) -> NormalForm {
        let mut col_of = alloc::vec![NO_COL; sys.nvars()];
        for (k, &v) in cols.iter().enumerate() {
            col_of[v as usize] = k as u32;
        }
        let mut ech = Echelon::new(cols.len());
        for (g, tag) in &jac.rows {
            let row: Row = g.iter().filter(|(v, _)| col_of[*v as usize] != NO_COL).map(|(v, c)| (col_of[*v as usize], c.clone())).collect();
            ech.insert(normalize_row(row), *tag);
        }
        NormalForm { ech, col_of, var_of: cols }
    }

    /// Columns for all non-given components in the ordering's priority.
    pub fn under(sys: &System, jac: &Jacobian, o: &IndexOrdering) -> NormalForm {
        let mut cols: Vec<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v)).collect();
        cols.sort_by_cached_key(|&v| priority_key(sys.comp(v), o));
        NormalForm::build(sys, jac, cols)
    }

    pub fn col(&self, v: Var) -> Option<u32> {
        match self.col_of.get(v as usize) {
            Some(&c) if c != NO_COL => Some(c),
            _ => None,
        }
    }

    /// Given components are not columns and count as known.
    pub fn is_normal(&self, v: Var) -> bool {
        match self.col(v) {
            Some(c) => !self.ech.is_pivot(c),
            None => false,
        }
    }

    pub fn normals(&self) -> impl Iterator<Item = Var> + '_ {
        self.var_of.iter().copied().filter(|&v| self.is_normal(v))
    }

    pub fn unit(&self, v: Var) -> Option<Row> {
        self.col(v).map(|c| alloc::vec![(c, Rat::ONE)])
    }

    /// Relation index that made `v` dependent.
    pub fn pivot_tag(&self, v: Var) -> Option<usize> {
        self.col(v).and_then(|c| self.ech.pivot_row(c)).map(|(_, t)| t)
    }

    /// Dependent component in terms of normal ones (components only).
    pub fn expression(&self, v: Var) -> Vec<(Var, Rat)> {
        match self.col(v) {
            Some(c) if self.ech.is_pivot(c) => {
                let (row, _) = self.ech.pivot_row(c).unwrap();
                let rest: Row = row.iter().skip(1).cloned().collect();
                self.ech.reduce_full(rest).into_iter().map(|(k, x)| (self.var_of[k as usize], -x)).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Per-order counts of normal components.
pub fn normal_counts(sys: &System, nf: &NormalForm) -> Vec<usize> {
    let mut out = alloc::vec![0usize; sys.q_total + 1];
    for v in nf.normals() {
        let r = sys.order(v);
        if r < out.len() {
            out[r] += 1;
        }
    }
    out
}

/// Rank of the linearised relations of exactly order `r`, restricted to
/// order-`r` components.
pub fn generic_rank(sys: &System, jac: &Jacobian, r: usize) -> usize {
    let cols: Vec<Var> = (0..sys.nvars() as Var).filter(|&v| !sys.is_given(v) && sys.order(v) == r).collect();
    let sub = Jacobian { rows: jac.rows.iter().filter(|(_, i)| sys.relations[*i].order == r).cloned().collect() };
    NormalForm::build(sys, &sub, cols).ech.rank()
}
