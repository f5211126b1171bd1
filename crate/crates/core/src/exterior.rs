//! Wedge algebra over the coframe with polynomial coefficients, expansion of
//! spec expressions, exterior derivative, and the mechanically generated
//! relations (d² residues of the structure equations and of invariants).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::dsl::{Arg, ClassKind, Expr, Factor, FormKind, Ref, Term, SELF};
use crate::index::{canonicalize, comp_label, Comp, VarTable};
use crate::poly::{Poly, Var};
use crate::problem::{ConcreteProblem, FormInst};
use crate::rat::Rat;

/// Sum of `coefficient · ω_{f1}∧…∧ω_{fk}` with monomials kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FormExpr {
    terms: BTreeMap<Vec<u16>, Poly>,
}

/// Sorted merge of two wedge monomials with the sign of the shuffle, or
/// `None` when a form repeats.
fn merge_sign(a: &[u16], b: &[u16]) -> Option<(bool, Vec<u16>)> {
    let mut neg = false;
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j] < a[i] {
            // b[j] jumps over the remaining a's
            if (a.len() - i) % 2 == 1 {
                neg = !neg;
            }
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((neg, out))
}

impl FormExpr {
    pub fn zero() -> FormExpr {
        FormExpr::default()
    }

    pub fn scalar(p: Poly) -> FormExpr {
        let mut e = FormExpr::zero();
        e.add_term(Vec::new(), p);
        e
    }

    pub fn form(f: u16, c: Rat) -> FormExpr {
        let mut e = FormExpr::zero();
        e.add_term(alloc::vec![f], Poly::constant(c));
        e
    }

    pub fn mono(m: &[u16]) -> FormExpr {
        let mut e = FormExpr::zero();
        e.add_term(m.to_vec(), Poly::one());
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &Poly)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mono: &[u16]) -> Poly {
        self.terms.get(mono).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, mono: Vec<u16>, p: Poly) {
        if p.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(q) => {
                q.add_assign(&p);
                if q.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, p);
            }
        }
    }

    pub fn add_assign(&mut self, o: &FormExpr) {
        for (m, p) in &o.terms {
            self.add_term(m.clone(), p.clone());
        }
    }

    pub fn sub_assign(&mut self, o: &FormExpr) {
        for (m, p) in &o.terms {
            self.add_term(m.clone(), p.neg());
        }
    }

    pub fn scale(&self, c: &Poly) -> FormExpr {
        let mut e = FormExpr::zero();
        for (m, p) in &self.terms {
            e.add_term(m.clone(), p.mul(c));
        }
        e
    }

    pub fn wedge(&self, o: &FormExpr) -> FormExpr {
        let mut e = FormExpr::zero();
        for (ma, pa) in &self.terms {
            for (mb, pb) in &o.terms {
                if let Some((neg, m)) = merge_sign(ma, mb) {
                    let p = pa.mul(pb);
                    e.add_term(m, if neg { p.neg() } else { p });
                }
            }
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExteriorError {
    #[error("index `{0}` is not bound")]
    Unbound(String),
    #[error("`{0}` is not declared")]
    Undeclared(String),
    #[error("index `{var}` has class `{have}` but slot {slot} of `{name}` needs `{want}`")]
    ClassMismatch { var: String, have: String, want: String, name: String, slot: usize },
    #[error("literal index {lit} is out of range for slot {slot} of `{name}`")]
    LiteralRange { lit: u32, name: String, slot: usize },
    #[error("index `{0}` cannot label a derivation")]
    NotDirection(String),
    #[error("alias `{0}` is defined in terms of another alias")]
    NestedAlias(String),
    #[error("coframe family `{0}` has no structure equation")]
    MissingStructure(String),
    #[error("malformed transform for class `{0}`")]
    BadTransform(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Val(usize, u8),
    Dir(u8),
}

pub type Env = BTreeMap<String, Bound>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Domain {
    Class(usize),
    Dir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RefKind {
    Sym(usize),
    Form(usize),
    Const(usize),
    SelfRef,
}

/// Where a relation came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Declared { name: String },
    Constraint { name: String, block: usize },
    Structure { form: String },
    Decomposition { form: String },
    Commutator { comp: String },
    Derived { parent: usize, dir: u8 },
    Vertical { parent: usize, form: String },
    /// a row combination of `parent` and others that cancels its top order
    Consequence { parent: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelKind {
    Defining,
    Bianchi,
    Generic,
    Derived,
    Constraint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub kind: RelKind,
    pub poly: Poly,
    /// highest derivation order among the variables
    pub order: usize,
    pub origin: Origin,
}

/// A coefficient of a d² expansion on a monomial containing a non-basic form.
#[derive(Clone, Debug)]
pub struct Residue {
    pub poly: Poly,
    pub mono: Vec<u16>,
    pub what: String,
}

/// Everything needed to differentiate: interned components, structure
/// equations with aliases substituted, alias expansions and compiled
/// transformation tables.
#[derive(Clone, Debug)]
pub struct Calculus<'p> {
    pub p: &'p ConcreteProblem,
    pub vars: VarTable,
    struct_rhs: Vec<Option<FormExpr>>,
    alias_exp: Vec<Option<FormExpr>>,
    /// class → value → [(replacement value, form coefficient)]
    transforms: Vec<Vec<Vec<(u8, FormExpr)>>>,
    dcache: BTreeMap<Var, FormExpr>,
    basic: Vec<bool>,
}

impl<'p> Calculus<'p> {
    pub fn new(p: &'p ConcreteProblem) -> Result<Calculus<'p>, ExteriorError> {
        let nf = p.forms.len();
        let mut c = Calculus {
            p,
            vars: VarTable::default(),
            struct_rhs: alloc::vec![None; nf],
            alias_exp: alloc::vec![None; nf],
            transforms: p.classes.iter().map(|cl| alloc::vec![Vec::new(); cl.size]).collect(),
            dcache: BTreeMap::new(),
            basic: p.forms.iter().map(|f| p.families[f.family].kind == FormKind::Basic).collect(),
        };
        for a in &p.spec.aliases {
            let fam = c.family_index(&a.lhs.name)?;
            for (id, env) in c.instances(fam, &a.lhs)? {
                let e = c.expand(&a.rhs, &env, None)?;
                c.alias_exp[id as usize] = Some(e);
            }
        }
        for t in &p.spec.transforms {
            let cl = p.classes.iter().position(|k| k.name == t.class).ok_or_else(|| ExteriorError::Undeclared(t.class.clone()))?;
            for v in 0..p.classes[cl].size {
                let mut env = Env::new();
                env.insert("$".into(), Bound::Val(cl, v as u8));
                let table = c.compile_transform(&t.expr, &env, cl)?;
                c.transforms[cl][v] = table;
            }
        }
        for s in &p.spec.structure {
            let fam = c.family_index(&s.lhs.name)?;
            for (id, env) in c.instances(fam, &s.lhs)? {
                let e = c.expand(&s.rhs, &env, None)?;
                c.struct_rhs[id as usize] = Some(e);
            }
        }
        for (id, f) in p.forms.iter().enumerate() {
            if c.struct_rhs[id].is_none() {
                return Err(ExteriorError::MissingStructure(p.families[f.family].name.clone()));
            }
        }
        Ok(c)
    }

    fn family_index(&self, name: &str) -> Result<usize, ExteriorError> {
        self.p.families.iter().position(|f| f.name == name).ok_or_else(|| ExteriorError::Undeclared(name.into()))
    }

    /// Canonical instances of a family matched against a left-hand side.
    fn instances(&self, fam: usize, lhs: &Ref) -> Result<Vec<(u16, Env)>, ExteriorError> {
        let p = self.p;
        let mut out = Vec::new();
        'inst: for (id, f) in p.forms.iter().enumerate() {
            if f.family != fam {
                continue;
            }
            let mut env = Env::new();
            for (k, a) in lhs.primary.iter().enumerate() {
                let cl = p.families[fam].slots[k];
                let v = f.idx[k];
                match a {
                    Arg::Var(x) => match env.get(x) {
                        Some(Bound::Val(_, w)) if *w != v => continue 'inst,
                        _ => {
                            env.insert(x.clone(), Bound::Val(cl, v));
                        }
                    },
                    Arg::Lit(l) => {
                        if p.literal_value(cl, *l) != Some(v) {
                            continue 'inst;
                        }
                    }
                    Arg::Slot => continue 'inst,
                }
            }
            out.push((id as u16, env));
        }
        Ok(out)
    }

    fn ref_kind(&self, name: &str, tclass: Option<usize>) -> Result<RefKind, ExteriorError> {
        let p = self.p;
        if name == SELF && tclass.is_some() {
            return Ok(RefKind::SelfRef);
        }
        if let Some(i) = p.symbols.iter().position(|s| s.name == name) {
            return Ok(RefKind::Sym(i));
        }
        if let Some(i) = p.families.iter().position(|s| s.name == name) {
            return Ok(RefKind::Form(i));
        }
        if let Some(i) = p.constants.iter().position(|s| s.name == name) {
            return Ok(RefKind::Const(i));
        }
        Err(ExteriorError::Undeclared(name.into()))
    }

    fn slots_of(&self, k: RefKind, tclass: Option<usize>) -> Vec<usize> {
        match k {
            RefKind::Sym(i) => self.p.symbols[i].slots.clone(),
            RefKind::Form(i) => self.p.families[i].slots.clone(),
            RefKind::Const(i) => self.p.constants[i].slots.clone(),
            RefKind::SelfRef => alloc::vec![tclass.unwrap()],
        }
    }

    fn domain_of(&self, var: &str, t: &Term, tclass: Option<usize>) -> Domain {
        let mut found = None;
        let mut visit = |r: &Ref| {
            if found.is_some() {
                return;
            }
            if let Ok(k) = self.ref_kind(&r.name, tclass) {
                let slots = self.slots_of(k, tclass);
                for (a, &cl) in r.primary.iter().zip(&slots) {
                    if *a == Arg::Var(var.into()) {
                        found = Some(cl);
                        return;
                    }
                }
            }
        };
        for f in &t.factors {
            match f {
                Factor::Ref(r) => visit(r),
                Factor::Paren(e) => crate::problem::walk_refs(e, &mut |r| visit(r)),
            }
        }
        match found {
            Some(c) => Domain::Class(c),
            None => Domain::Dir,
        }
    }

    /// Variables summed at the level of one term: those in direct factors
    /// and those shared between two or more parenthesised factors.
    fn level_vars(&self, t: &Term, env: &Env, tclass: Option<usize>) -> Vec<(String, Domain)> {
        let mut names: Vec<String> = Vec::new();
        let push = |names: &mut Vec<String>, a: &Arg| {
            if let Arg::Var(x) = a {
                if !env.contains_key(x) && !names.contains(x) {
                    names.push(x.clone());
                }
            }
        };
        let mut paren_counts: BTreeMap<String, usize> = BTreeMap::new();
        for f in &t.factors {
            match f {
                Factor::Ref(r) => {
                    for a in r.primary.iter().chain(&r.deriv) {
                        push(&mut names, a);
                    }
                }
                Factor::Paren(e) => {
                    let mut here: Vec<String> = Vec::new();
                    crate::problem::walk_refs(e, &mut |r| {
                        for a in r.primary.iter().chain(&r.deriv) {
                            push(&mut here, a);
                        }
                    });
                    for x in here {
                        *paren_counts.entry(x).or_default() += 1;
                    }
                }
            }
        }
        for (x, n) in paren_counts {
            if n >= 2 && !names.contains(&x) {
                names.push(x);
            }
        }
        names.into_iter().map(|x| {
            let d = self.domain_of(&x, t, tclass);
            (x, d)
        }).collect()
    }

    fn assignments(&self, vars: &[(String, Domain)]) -> Vec<Vec<Bound>> {
        let mut out: Vec<Vec<Bound>> = alloc::vec![Vec::new()];
        for (_, d) in vars {
            let opts: Vec<Bound> = match d {
                Domain::Class(c) => (0..self.p.classes[*c].size as u8).map(|v| Bound::Val(*c, v)).collect(),
                Domain::Dir => (0..self.p.dirs.len() as u8).map(Bound::Dir).collect(),
            };
            let mut next = Vec::with_capacity(out.len() * opts.len());
            for a in &out {
                for o in &opts {
                    let mut b = a.clone();
                    b.push(*o);
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    fn bound(&self, a: &Arg, env: &Env) -> Result<Option<Bound>, ExteriorError> {
        Ok(match a {
            Arg::Var(x) => Some(*env.get(x).ok_or_else(|| ExteriorError::Unbound(x.clone()))?),
            Arg::Slot => Some(*env.get("$").ok_or_else(|| ExteriorError::Unbound("$".into()))?),
            Arg::Lit(_) => None,
        })
    }

    fn prim_value(&self, a: &Arg, cl: usize, name: &str, slot: usize, env: &Env) -> Result<u8, ExteriorError> {
        let p = self.p;
        if let Arg::Lit(l) = a {
            return p.literal_value(cl, *l).ok_or_else(|| ExteriorError::LiteralRange { lit: *l, name: name.into(), slot });
        }
        let mismatch = |have: usize| ExteriorError::ClassMismatch {
            var: match a {
                Arg::Var(x) => x.clone(),
                _ => "$".into(),
            },
            have: p.classes[have].name.clone(),
            want: p.classes[cl].name.clone(),
            name: name.into(),
            slot,
        };
        match self.bound(a, env)?.unwrap() {
            Bound::Val(c, v) if c == cl => Ok(v),
            Bound::Val(c, _) => Err(mismatch(c)),
            Bound::Dir(d) => {
                let (c, v) = p.dirs[d as usize];
                if c == cl {
                    Ok(v)
                } else {
                    Err(mismatch(c))
                }
            }
        }
    }

    fn dir_value(&self, a: &Arg, env: &Env) -> Result<u8, ExteriorError> {
        let p = self.p;
        if let Arg::Lit(l) = a {
            return p.literal_dir(*l).ok_or_else(|| ExteriorError::NotDirection(format!("{l}")));
        }
        match self.bound(a, env)?.unwrap() {
            Bound::Dir(d) => Ok(d),
            Bound::Val(c, v) => p.dir_of_value(c, v).ok_or_else(|| ExteriorError::NotDirection(p.classes[c].name.clone())),
        }
    }

    /// Expand an expression under a binding of its free indices.
    pub fn expand(&mut self, e: &Expr, env: &Env, tclass: Option<usize>) -> Result<FormExpr, ExteriorError> {
        let mut out = FormExpr::zero();
        for t in &e.terms {
            let vars = self.level_vars(t, env, tclass);
            for asg in self.assignments(&vars) {
                let mut env2 = env.clone();
                for ((x, _), b) in vars.iter().zip(asg) {
                    env2.insert(x.clone(), b);
                }
                let mut acc = FormExpr::scalar(Poly::constant(t.coeff.clone()));
                for f in &t.factors {
                    let fe = self.factor(f, &env2, tclass)?;
                    acc = acc.wedge(&fe);
                    if acc.is_zero() {
                        break;
                    }
                }
                out.add_assign(&acc);
            }
        }
        Ok(out)
    }

    fn factor(&mut self, f: &Factor, env: &Env, tclass: Option<usize>) -> Result<FormExpr, ExteriorError> {
        let r = match f {
            Factor::Paren(e) => return self.expand(e, env, tclass),
            Factor::Ref(r) => r,
        };
        let kind = self.ref_kind(&r.name, tclass)?;
        let slots = self.slots_of(kind, tclass);
        let mut idx = Vec::with_capacity(slots.len());
        for (k, (a, &cl)) in r.primary.iter().zip(&slots).enumerate() {
            idx.push(self.prim_value(a, cl, &r.name, k, env)?);
        }
        match kind {
            RefKind::Sym(s) => {
                let mut der = Vec::with_capacity(r.deriv.len());
                for a in &r.deriv {
                    der.push(self.dir_value(a, env)?);
                }
                let (sg, c) = canonicalize(self.p, &Comp { sym: s as u16, idx, der });
                if sg == 0 {
                    return Ok(FormExpr::zero());
                }
                let v = self.vars.intern(c);
                Ok(FormExpr::scalar(Poly::var(v).scale(&Rat::int(sg as i64))))
            }
            RefKind::Form(fam) => {
                let (sg, rep) = self.p.families[fam].group.canonical(&idx);
                if sg == 0 {
                    return Ok(FormExpr::zero());
                }
                let id = self.p.form_ids[&FormInst { family: fam, idx: rep }];
                if self.p.families[fam].kind == FormKind::Alias {
                    match &self.alias_exp[id as usize] {
                        Some(e) => Ok(e.scale(&Poly::constant(Rat::int(sg as i64)))),
                        None => Err(ExteriorError::NestedAlias(r.name.clone())),
                    }
                } else {
                    Ok(FormExpr::form(id, Rat::int(sg as i64)))
                }
            }
            RefKind::Const(c) => Ok(FormExpr::scalar(Poly::constant(self.p.constants[c].value(&idx)))),
            RefKind::SelfRef => Err(ExteriorError::BadTransform(self.p.classes[tclass.unwrap()].name.clone())),
        }
    }

    fn compile_transform(&mut self, e: &Expr, env: &Env, cl: usize) -> Result<Vec<(u8, FormExpr)>, ExteriorError> {
        let mut acc: BTreeMap<u8, FormExpr> = BTreeMap::new();
        let bad = || ExteriorError::BadTransform(self.p.classes[cl].name.clone());
        for t in &e.terms {
            let selfs: Vec<usize> =
                t.factors.iter().enumerate().filter(|(_, f)| matches!(f, Factor::Ref(r) if r.name == SELF)).map(|(i, _)| i).collect();
            if selfs.len() != 1 {
                return Err(bad());
            }
            let self_arg = match &t.factors[selfs[0]] {
                Factor::Ref(r) if r.primary.len() == 1 && r.deriv.is_empty() => r.primary[0].clone(),
                _ => return Err(bad()),
            };
            let vars = self.level_vars(t, env, Some(cl));
            for asg in self.assignments(&vars) {
                let mut env2 = env.clone();
                for ((x, _), b) in vars.iter().zip(asg) {
                    env2.insert(x.clone(), b);
                }
                let m = self.prim_value(&self_arg, cl, SELF, 0, &env2)?;
                let mut fe = FormExpr::scalar(Poly::constant(t.coeff.clone()));
                for (i, f) in t.factors.iter().enumerate() {
                    if i != selfs[0] {
                        fe = fe.wedge(&self.factor(f, &env2, Some(cl))?);
                    }
                }
                if fe.terms().any(|(mono, p)| mono.len() != 1 || p.as_constant().is_none()) {
                    return Err(bad());
                }
                acc.entry(m).or_default().add_assign(&fe);
            }
        }
        Ok(acc.into_iter().filter(|(_, f)| !f.is_zero()).collect())
    }

    pub fn is_basic(&self, f: u16) -> bool {
        self.basic[f as usize]
    }

    pub fn is_basic_mono(&self, m: &[u16]) -> bool {
        m.iter().all(|&f| self.basic[f as usize])
    }

    pub fn dir_form(&self, d: u8) -> u16 {
        self.p.dir_form[d as usize]
    }

    pub fn structure_rhs(&self, f: u16) -> &FormExpr {
        self.struct_rhs[f as usize].as_ref().unwrap()
    }

    pub fn alias_expansion(&self, f: u16) -> Option<&FormExpr> {
        self.alias_exp[f as usize].as_ref()
    }

    pub fn intern(&mut self, c: Comp) -> Var {
        self.vars.intern(c)
    }

    /// `dI = Σ_k I;k ω_k + (transformation terms)`.
    pub fn d_var(&mut self, x: Var) -> FormExpr {
        if let Some(e) = self.dcache.get(&x) {
            return e.clone();
        }
        let p = self.p;
        let c = self.vars.comp(x).clone();
        let mut out = FormExpr::zero();
        for k in 0..p.dirs.len() as u8 {
            let v = self.vars.intern(c.with_der(k));
            out.add_term(alloc::vec![p.dir_form[k as usize]], Poly::var(v));
        }
        let slots = &p.symbols[c.sym as usize].slots;
        for (s, &cl) in slots.iter().enumerate() {
            let table = self.transforms[cl][c.idx[s] as usize].clone();
            for (m, fe) in table {
                let mut c2 = c.clone();
                c2.idx[s] = m;
                let (sg, c2) = canonicalize(p, &c2);
                if sg == 0 {
                    continue;
                }
                let v = self.vars.intern(c2);
                out.add_assign(&fe.scale(&Poly::var(v).scale(&Rat::int(sg as i64))));
            }
        }
        for j in 0..c.der.len() {
            let (cl, val) = p.dirs[c.der[j] as usize];
            let table = self.transforms[cl][val as usize].clone();
            for (m, fe) in table {
                let mut c2 = c.clone();
                c2.der[j] = p.dir_of_value(cl, m).expect("derivation class");
                let v = self.vars.intern(c2);
                out.add_assign(&fe.scale(&Poly::var(v)));
            }
        }
        self.dcache.insert(x, out.clone());
        out
    }

    pub fn d_poly(&mut self, p: &Poly) -> FormExpr {
        let mut out = FormExpr::zero();
        for x in p.vars() {
            let dp = p.derivative(x);
            if dp.is_zero() {
                continue;
            }
            let dx = self.d_var(x);
            out.add_assign(&dx.scale(&dp));
        }
        out
    }

    fn d_mono(&self, m: &[u16]) -> FormExpr {
        let mut out = FormExpr::zero();
        for i in 0..m.len() {
            let pre = FormExpr::mono(&m[..i]);
            let post = FormExpr::mono(&m[i + 1..]);
            let mut t = pre.wedge(self.structure_rhs(m[i])).wedge(&post);
            if i % 2 == 1 {
                t = t.scale(&Poly::constant(Rat::int(-1)));
            }
            out.add_assign(&t);
        }
        out
    }

    pub fn d(&mut self, e: &FormExpr) -> FormExpr {
        let mut out = FormExpr::zero();
        for (m, p) in e.terms() {
            let dp = self.d_poly(p);
            out.add_assign(&dp.wedge(&FormExpr::mono(m)));
            if !m.is_empty() {
                out.add_assign(&self.d_mono(m).scale(p));
            }
        }
        out
    }

    /// Highest derivation order among a polynomial's variables.
    pub fn poly_order(&self, p: &Poly) -> usize {
        p.vars().iter().map(|&v| self.vars.comp(v).order()).max().unwrap_or(0)
    }

    fn relation(&self, kind: RelKind, poly: Poly, origin: Origin) -> Relation {
        let order = self.poly_order(&poly);
        Relation { kind, poly, order, origin }
    }

    /// d² of every coframe form, and d of each alias expansion against the
    /// alias's structure equation.  Basic coefficients become relations, the
    /// rest are returned as residues that must vanish.
    pub fn derive_bianchi(&mut self) -> (Vec<Relation>, Vec<Residue>) {
        let p = self.p;
        let mut rels = Vec::new();
        let mut res = Vec::new();
        for f in 0..p.forms.len() as u16 {
            let label = p.form_label(f);
            let (e, origin) = if p.is_alias(f) {
                let mut e = self.d(&self.alias_exp[f as usize].clone().unwrap());
                e.sub_assign(self.structure_rhs(f));
                (e, Origin::Decomposition { form: label.clone() })
            } else {
                (self.d(&self.structure_rhs(f).clone()), Origin::Structure { form: label.clone() })
            };
            for (m, poly) in e.terms() {
                if self.is_basic_mono(m) {
                    rels.push(self.relation(RelKind::Bianchi, poly.clone(), origin.clone()));
                } else {
                    res.push(Residue { poly: poly.clone(), mono: m.clone(), what: format!("d² of {label}") });
                }
            }
        }
        (rels, res)
    }

    /// Commutation relations from d²I = 0 on basic-basic monomials.
    pub fn generic_relations_of(&mut self, x: Var) -> (Vec<Relation>, Vec<Residue>) {
        let dx = self.d_var(x);
        let e = self.d(&dx);
        let label = comp_label(self.p, self.vars.comp(x));
        let mut rels = Vec::new();
        let mut res = Vec::new();
        for (m, poly) in e.terms() {
            if self.is_basic_mono(m) {
                rels.push(self.relation(RelKind::Generic, poly.clone(), Origin::Commutator { comp: label.clone() }));
            } else {
                res.push(Residue { poly: poly.clone(), mono: m.clone(), what: format!("d² of {label}") });
            }
        }
        (rels, res)
    }

    /// Instances of a declared relation, one per assignment of its free
    /// indices.
    pub fn instantiate_relation(&mut self, free: &[String], lhs: &Expr, rhs: &Expr) -> Result<Vec<(String, Poly)>, ExteriorError> {
        let mut doms = Vec::new();
        for x in free {
            let t = Term { coeff: Rat::ONE, factors: alloc::vec![Factor::Paren(lhs.clone()), Factor::Paren(rhs.clone())] };
            doms.push((x.clone(), self.domain_of(x, &t, None)));
        }
        let mut out = Vec::new();
        for asg in self.assignments(&doms) {
            let mut env = Env::new();
            let mut labels = Vec::new();
            for ((x, _), b) in doms.iter().zip(asg) {
                env.insert(x.clone(), b);
                labels.push(match b {
                    Bound::Val(c, v) => self.p.value_label(c, v),
                    Bound::Dir(d) => self.p.dir_label(d).into(),
                });
            }
            let mut e = self.expand(lhs, &env, None)?;
            e.sub_assign(&self.expand(rhs, &env, None)?);
            let poly = e.coefficient(&[]);
            out.push((labels.join(","), poly));
        }
        Ok(out)
    }

    pub fn special_dirs(&self) -> Vec<u8> {
        (0..self.p.dirs.len() as u8).filter(|&d| self.p.classes[self.p.dirs[d as usize].0].kind == ClassKind::Special).collect()
    }
}
