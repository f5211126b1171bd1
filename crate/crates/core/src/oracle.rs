//! Dense brute-force recounts.
//!
//! Every component is a raw `(symbol, primary tuple, derivation tuple)` on
//! the full index grid; symmetries are imposed as explicit rows
//! `x_t - sign·x_{g·t}`, never by picking orbit representatives.  Relations
//! are expanded here from the parsed expressions with their own summation,
//! and ranks come from a plain sparse elimination kept separate from the
//! engine's echelon.  Slow on purpose.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dsl::{Arg, ClassKind, ConstKind, Expr, Factor, Ref, RelDecl, Role};
use crate::involution::{Analysis, Report};
use crate::problem::ConcreteProblem;
use crate::rat::Rat;
use crate::relations::Blocks;

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("grid of {needed} entries exceeds the cap of {cap}")]
    Cap { needed: usize, cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown name `{0}`")]
    Unknown(String),
    #[error("relation `{0}` is not linear in the grid components")]
    NonLinear(String),
}

#[derive(Clone, Debug)]
struct Block {
    sym: usize,
    order: usize,
    sizes: Vec<usize>,
    offset: usize,
}

/// Full (non-canonicalized) grid and an exact constraint matrix over it.
#[derive(Clone, Debug)]
pub struct DenseRelationSystem<'p> {
    p: &'p ConcreteProblem,
    blocks: Vec<Block>,
    len: usize,
    ndirs: usize,
    pub rows: Vec<Vec<(usize, Rat)>>,
    pub symmetry_rows: usize,
}

fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * sizes[k + 1];
    }
    s
}

fn all_tuples(sizes: &[usize]) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        let mut next = Vec::with_capacity(out.len() * n);
        for t in &out {
            for v in 0..n as u8 {
                let mut u = t.clone();
                u.push(v);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

impl<'p> DenseRelationSystem<'p> {
    /// Grid of every non-given symbol up to derivation order `max_order`.
    pub fn new(p: &'p ConcreteProblem, max_order: usize, cap: usize) -> Result<Self, OracleError> {
        let nd = p.dirs.len();
        let mut blocks = Vec::new();
        let mut len = 0usize;
        for order in 0..=max_order {
            for (sym, s) in p.symbols.iter().enumerate() {
                if s.role == Role::Given {
                    continue;
                }
                let mut sizes: Vec<usize> = s.slots.iter().map(|&c| p.classes[c].size).collect();
                sizes.extend(core::iter::repeat_n(nd, order));
                let n: usize = sizes.iter().product();
                len = len.checked_add(n).filter(|&l| l <= cap).ok_or(OracleError::Cap { needed: len.saturating_add(n), cap })?;
                blocks.push(Block { sym, order, sizes, offset: len - n });
            }
        }
        Ok(DenseRelationSystem { p, blocks, len, ndirs: nd, rows: Vec::new(), symmetry_rows: 0 })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Column of a raw component; `None` outside the grid.
    pub fn column(&self, sym: usize, prim: &[u8], der: &[u8]) -> Option<usize> {
        let b = self.blocks.iter().find(|b| b.sym == sym && b.order == der.len())?;
        let st = strides(&b.sizes);
        let mut at = b.offset;
        for (k, &v) in prim.iter().chain(der).enumerate() {
            if v as usize >= b.sizes[k] {
                return None;
            }
            at += st[k] * v as usize;
        }
        Some(at)
    }

    /// One row per (tuple, generator): the declared slot symmetries.
    pub fn add_symmetries(&mut self) {
        for b in self.blocks.clone() {
            let decl = &self.p.spec.symbols.iter().find(|s| s.name == self.p.symbols[b.sym].name).expect("declared").syms;
            let arity = self.p.symbols[b.sym].slots.len();
            let gens: Vec<(Vec<usize>, i8)> = decl.iter().map(|g| g.action(arity)).collect();
            for t in all_tuples(&b.sizes) {
                for (img, sign) in &gens {
                    let mut u = t.clone();
                    for (k, &j) in img.iter().enumerate() {
                        u[k] = t[j];
                    }
                    let a = self.column(b.sym, &t[..arity], &t[arity..]).expect("in grid");
                    let c = self.column(b.sym, &u[..arity], &u[arity..]).expect("in grid");
                    let mut row = BTreeMap::new();
                    *row.entry(a).or_insert(Rat::ZERO) += &Rat::ONE;
                    *row.entry(c).or_insert(Rat::ZERO) -= &Rat::int(*sign as i64);
                    self.push(row);
                    self.symmetry_rows += 1;
                }
            }
        }
    }

    fn push(&mut self, row: BTreeMap<usize, Rat>) {
        let r: Vec<(usize, Rat)> = row.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        if !r.is_empty() {
            self.rows.push(r);
        }
    }

    pub fn add_row(&mut self, entries: &[(usize, Rat)]) {
        let mut row = BTreeMap::new();
        for (c, v) in entries {
            *row.entry(*c).or_insert(Rat::ZERO) += v;
        }
        self.push(row);
    }

    /// Every instance of a relation over its free indices.  Terms without
    /// grid components (constants, given data) are dropped; a product of two
    /// grid components is an error.
    pub fn add_relation(&mut self, r: &RelDecl) -> Result<usize, OracleError> {
        let mut doms = Vec::new();
        for v in &r.free {
            let d = self.dom_of_var(v, &r.lhs).or_else(|| self.dom_of_var(v, &r.rhs));
            doms.push(d.ok_or_else(|| OracleError::Unknown(v.clone()))?);
        }
        let sizes: Vec<usize> = doms.iter().map(|&d| self.dom_size(d)).collect();
        let mut added = 0;
        for t in all_tuples(&sizes) {
            let env: Env = r.free.iter().cloned().zip(doms.iter().copied().zip(t)).collect();
            let mut lin = self.expand(&r.lhs, &env).map_err(|_| OracleError::NonLinear(r.name.clone()))?;
            for (c, v) in self.expand(&r.rhs, &env).map_err(|_| OracleError::NonLinear(r.name.clone()))? {
                *lin.entry(c).or_insert(Rat::ZERO) -= &v;
            }
            lin.remove(&None);
            let row: BTreeMap<usize, Rat> = lin.into_iter().map(|(c, v)| (c.unwrap(), v)).collect();
            let before = self.rows.len();
            self.push(row);
            added += self.rows.len() - before;
        }
        Ok(added)
    }

    fn dom_size(&self, d: Dom) -> usize {
        match d {
            Dom::Class(c) => self.p.classes[c].size,
            Dom::Dirs => self.ndirs,
        }
    }

    /// A primary-slot occurrence fixes the class; otherwise a derivation
    /// occurrence makes the variable range over all directions.
    fn dom_of_var(&self, var: &str, e: &Expr) -> Option<Dom> {
        self.find_dom(var, e, true).or_else(|| self.find_dom(var, e, false))
    }

    fn find_dom(&self, var: &str, e: &Expr, primary: bool) -> Option<Dom> {
        e.terms.iter().find_map(|t| self.find_dom_factors(var, &t.factors, primary))
    }

    fn find_dom_factors(&self, var: &str, fs: &[Factor], primary: bool) -> Option<Dom> {
        fs.iter().find_map(|f| match f {
            Factor::Paren(inner) => self.find_dom(var, inner, primary),
            Factor::Ref(r) => {
                let is = |a: &Arg| matches!(a, Arg::Var(v) if v == var);
                if primary {
                    let slots = self.slot_classes(&r.name)?;
                    r.primary.iter().position(is).and_then(|k| slots.get(k).map(|&c| Dom::Class(c)))
                } else {
                    r.deriv.iter().any(is).then_some(Dom::Dirs)
                }
            }
        })
    }

    fn slot_classes(&self, name: &str) -> Option<Vec<usize>> {
        if let Some(s) = self.p.symbols.iter().find(|s| s.name == name) {
            return Some(s.slots.clone());
        }
        self.p.constants.iter().find(|c| c.name == name).map(|c| c.slots.clone())
    }

    fn vars_of(e: &Expr, out: &mut Vec<String>) {
        for t in &e.terms {
            Self::vars_of_factors(&t.factors, out);
        }
    }

    fn vars_of_factors(fs: &[Factor], out: &mut Vec<String>) {
        for f in fs {
            match f {
                Factor::Paren(inner) => Self::vars_of(inner, out),
                Factor::Ref(r) => {
                    for a in r.primary.iter().chain(&r.deriv) {
                        if let Arg::Var(v) = a {
                            if !out.contains(v) {
                                out.push(v.clone());
                            }
                        }
                    }
                }
            }
        }
    }

    fn literal(&self, class: usize, lit: u32) -> Option<u8> {
        let v = match self.p.classes[class].kind {
            ClassKind::Special => lit as i64,
            _ => lit as i64 - 1,
        };
        (v >= 0 && (v as usize) < self.p.classes[class].size).then_some(v as u8)
    }

    /// Linear form: `None` is the constant part.
    fn expand(&self, e: &Expr, env: &Env) -> Result<BTreeMap<Option<usize>, Rat>, ()> {
        let mut out: BTreeMap<Option<usize>, Rat> = BTreeMap::new();
        for t in &e.terms {
            let mut dummies = Vec::new();
            Self::vars_of_factors(&t.factors, &mut dummies);
            dummies.retain(|v| !env.contains_key(v));
            let mut doms = Vec::new();
            for v in &dummies {
                let d = self.find_dom_factors(v, &t.factors, true).or_else(|| self.find_dom_factors(v, &t.factors, false));
                doms.push(d.ok_or(())?);
            }
            let sizes: Vec<usize> = doms.iter().map(|&d| self.dom_size(d)).collect();
            for vals in all_tuples(&sizes) {
                let mut env2 = env.clone();
                env2.extend(dummies.iter().cloned().zip(doms.iter().copied().zip(vals)));
                let mut acc: BTreeMap<Option<usize>, Rat> = BTreeMap::new();
                acc.insert(None, t.coeff.clone());
                for f in &t.factors {
                    let g = match f {
                        Factor::Paren(inner) => self.expand(inner, &env2)?,
                        Factor::Ref(r) => self.expand_ref(r, &env2)?,
                    };
                    acc = mul_linear(&acc, &g)?;
                }
                for (c, v) in acc {
                    *out.entry(c).or_insert(Rat::ZERO) += &v;
                }
            }
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    fn expand_ref(&self, r: &Ref, env: &Env) -> Result<BTreeMap<Option<usize>, Rat>, ()> {
        let slots = self.slot_classes(&r.name).ok_or(())?;
        let in_class = |a: &Arg, class: usize| -> Result<u8, ()> {
            match a {
                Arg::Var(v) => match env.get(v).ok_or(())? {
                    (Dom::Class(c), x) if *c == class => Ok(*x),
                    (Dom::Dirs, d) if self.p.dirs[*d as usize].0 == class => Ok(self.p.dirs[*d as usize].1),
                    _ => Err(()),
                },
                Arg::Lit(l) => self.literal(class, *l).ok_or(()),
                Arg::Slot => Err(()),
            }
        };
        let as_dir = |a: &Arg| -> Result<u8, ()> {
            match a {
                Arg::Var(v) => match env.get(v).ok_or(())? {
                    (Dom::Dirs, d) => Ok(*d),
                    (Dom::Class(c), x) => {
                        self.p.dirs.iter().position(|&(dc, dv)| dc == *c && dv == *x).map(|d| d as u8).ok_or(())
                    }
                },
                Arg::Lit(l) => self.p.literal_dir(*l).ok_or(()),
                Arg::Slot => Err(()),
            }
        };
        let prim: Vec<u8> = r.primary.iter().zip(&slots).map(|(a, &c)| in_class(a, c)).collect::<Result<_, _>>()?;
        let der: Vec<u8> = r.deriv.iter().map(as_dir).collect::<Result<_, _>>()?;
        let mut out = BTreeMap::new();
        if let Some(c) = self.p.constants.iter().find(|c| c.name == r.name) {
            let v = constant_value(c.kind, &c.factor, &prim);
            if !der.is_empty() || v.is_zero() {
                return Ok(out);
            }
            out.insert(None, v);
            return Ok(out);
        }
        let sym = self.p.symbols.iter().position(|s| s.name == r.name).ok_or(())?;
        if self.p.symbols[sym].role == Role::Given {
            // known data: contributes no unknown
            return Ok(out);
        }
        match self.column(sym, &prim, &der) {
            Some(col) => {
                out.insert(Some(col), Rat::ONE);
                Ok(out)
            }
            None => Err(()),
        }
    }

    /// Independent components among the grid columns of exactly `order`.
    pub fn count(&self, order: usize) -> usize {
        self.counts().get(order).copied().unwrap_or(0)
    }

    /// Independent components per order.  One elimination with the
    /// highest-order columns leading: the pivots landing on order-`r`
    /// columns are the rank the rows add there beyond higher orders.
    pub fn counts(&self) -> Vec<usize> {
        let top = self.blocks.iter().map(|b| b.order).max().unwrap_or(0);
        let mut cols = vec![0usize; top + 1];
        let mut order = vec![0usize; self.len];
        for b in &self.blocks {
            let n: usize = b.sizes.iter().product();
            cols[b.order] += n;
            order[b.offset..b.offset + n].fill(b.order);
        }
        let key = |c: usize| (top - order[c]) * self.len + c;
        let rows = self.rows.iter().map(|row| row.iter().map(|(c, v)| (key(*c), v.clone())).collect::<Vec<_>>());
        let mut out = cols;
        for k in pivot_columns(rows) {
            out[top - k / self.len] -= 1;
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum Dom {
    Class(usize),
    Dirs,
}

type Env = BTreeMap<String, (Dom, u8)>;

fn mul_linear(a: &BTreeMap<Option<usize>, Rat>, b: &BTreeMap<Option<usize>, Rat>) -> Result<BTreeMap<Option<usize>, Rat>, ()> {
    let mut out = BTreeMap::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k = match (ka, kb) {
                (None, k) | (k, None) => *k,
                _ => return Err(()),
            };
            *out.entry(k).or_insert(Rat::ZERO) += &(va * vb);
        }
    }
    Ok(out)
}

fn constant_value(kind: ConstKind, factor: &Rat, t: &[u8]) -> Rat {
    match kind {
        ConstKind::Zero => Rat::ZERO,
        ConstKind::Delta => {
            if t.iter().all(|&x| x == t[0]) {
                factor.clone()
            } else {
                Rat::ZERO
            }
        }
        ConstKind::Epsilon => {
            // count inversions; any repeat or value out of 0..len gives 0
            let mut seen = vec![false; t.len()];
            for &x in t {
                if x as usize >= t.len() || seen[x as usize] {
                    return Rat::ZERO;
                }
                seen[x as usize] = true;
            }
            let inv = (0..t.len()).flat_map(|i| (i + 1..t.len()).map(move |j| (i, j))).filter(|&(i, j)| t[i] > t[j]).count();
            if inv % 2 == 0 {
                factor.clone()
            } else {
                -factor.clone()
            }
        }
    }
}

/// Rank by straightforward elimination on sparse maps.
pub fn dense_rank(rows: impl IntoIterator<Item = Vec<(usize, Rat)>>) -> usize {
    pivot_columns(rows).len()
}

/// Leading columns of a reduced basis of the row span.
fn pivot_columns(rows: impl IntoIterator<Item = Vec<(usize, Rat)>>) -> Vec<usize> {
    let mut pivots: BTreeMap<usize, BTreeMap<usize, Rat>> = BTreeMap::new();
    for row in rows {
        let mut r: BTreeMap<usize, Rat> = BTreeMap::new();
        for (c, v) in row {
            *r.entry(c).or_insert(Rat::ZERO) += &v;
        }
        r.retain(|_, v| !v.is_zero());
        while let Some((&lead, lv)) = r.iter().next() {
            match pivots.get(&lead) {
                Some(p) => {
                    let f = lv / &p[&lead];
                    for (c, v) in p {
                        let e = r.entry(*c).or_insert(Rat::ZERO);
                        *e -= &(&f * v);
                        if e.is_zero() {
                            r.remove(c);
                        }
                    }
                }
                None => {
                    pivots.insert(lead, r);
                    break;
                }
            }
        }
    }
    pivots.into_keys().collect()
}

/// Independent components of exactly `order` under the declared symmetries
/// and the given relations.
pub fn brute_force_count(p: &ConcreteProblem, relations: &[RelDecl], order: usize, cap: usize) -> Result<usize, OracleError> {
    let mut d = DenseRelationSystem::new(p, order, cap)?;
    d.add_symmetries();
    for r in relations {
        d.add_relation(r)?;
    }
    Ok(d.count(order))
}

/// Number of independent first derivations of `seeds` (raw components
/// `(symbol, primary, derivation)` of order `q`) modulo the rows of `d`:
/// dim of their image in the order-`q+1` quotient.
pub fn brute_force_free_parameters(d: &DenseRelationSystem, seeds: &[(usize, Vec<u8>, Vec<u8>)], q: usize) -> usize {
    if seeds.is_empty() {
        return 0;
    }
    let all = d.count(q + 1);
    let mut z = d.clone();
    let nd = d.ndirs as u8;
    for (s, prim, der) in seeds {
        for l in 0..nd {
            let mut der2 = der.clone();
            der2.push(l);
            if let Some(c) = d.column(*s, prim, &der2) {
                z.add_row(&[(c, Rat::ONE)]);
            }
        }
    }
    let rest = z.count(q + 1);
    all - rest
}

/// Dense recount of the numbers in a report.  Returns one line per
/// disagreement; counts the cap does not allow are noted with `skipped:`.
pub fn cross_check(report: &Report, p: &ConcreteProblem, cap: usize) -> Vec<String> {
    let mut out = Vec::new();
    let c = &report.characters;
    let total: usize = c.s_prime.iter().sum();
    if report.ordering.is_some() && total != report.seed_count {
        out.push(format!("characters sum to {total} but the report lists {} seeds", report.seed_count));
    }
    let top = c.s_prime.iter().rposition(|&s| s > 0).map(|k| k + 1).unwrap_or(0);
    if top != c.dimension || c.s_prime.get(top.wrapping_sub(1)).copied().unwrap_or(0) != c.degree {
        out.push(format!("degree {} at dimension {} does not match characters {:?}", c.degree, c.dimension, c.s_prime));
    }
    if let Some(cart) = &report.cartan {
        let weighted: usize = c.s_prime.iter().enumerate().map(|(k, s)| (k + 1) * s).sum();
        if cart.weighted_sum != weighted {
            out.push(format!("Cartan weighted sum {} but characters give {weighted}", cart.weighted_sum));
        }
        if cart.pass && cart.n != weighted {
            out.push(format!("Cartan test marked passing with N = {} ≠ {weighted}", cart.n));
        }
    }
    let an = match Analysis::new(p, report.seed_order, Blocks::All) {
        Ok(a) => a,
        Err(e) => {
            out.push(format!("rebuild failed: {e}"));
            return out;
        }
    };
    let sys = &an.sys;
    let mut d = match DenseRelationSystem::new(p, sys.q_total, cap) {
        Ok(d) => d,
        Err(OracleError::Cap { needed, cap }) => {
            out.push(format!("skipped: cap ({needed} > {cap})"));
            return out;
        }
        Err(e) => {
            out.push(format!("skipped: {e}"));
            return out;
        }
    };
    d.add_symmetries();
    for (row, _) in &an.jac.rows {
        let mut entries = Vec::with_capacity(row.len());
        for (v, x) in row {
            let comp = sys.comp(*v);
            if let Some(col) = d.column(comp.sym as usize, &comp.idx, &comp.der) {
                entries.push((col, x.clone()));
            }
        }
        d.add_row(&entries);
    }
    let dense = d.counts();
    for (r, &n) in report.normal_counts.iter().enumerate() {
        let m = dense.get(r).copied().unwrap_or(0);
        if m != n {
            out.push(format!("order {r}: engine counts {n} independent components, dense recount {m}"));
        }
    }
    if let Some(cart) = &report.cartan {
        if cart.stray == 0 && !report.seeds.is_empty() {
            let by_label: BTreeMap<String, (usize, Vec<u8>, Vec<u8>)> = sys
                .calc
                .vars
                .iter()
                .map(|(v, comp)| (sys.label(v), (comp.sym as usize, comp.idx.clone(), comp.der.clone())))
                .collect();
            let seeds: Vec<_> = report.seeds.iter().filter_map(|l| by_label.get(l).cloned()).collect();
            if seeds.len() != report.seeds.len() {
                out.push("seed labels do not resolve to components".to_string());
            } else if report.seed_order < sys.q_total {
                let n = brute_force_free_parameters(&d, &seeds, report.seed_order);
                if n != cart.n {
                    out.push(format!("Cartan N: engine {} but dense recount {n}", cart.n));
                }
            }
        }
    }
    out
}
