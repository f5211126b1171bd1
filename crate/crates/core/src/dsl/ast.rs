//! Parsed `.doa` representation and its canonical printer.
//!
//! The printer is the serializer: `parse(print(spec)) == spec`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemSpec {
    pub name: String,
    pub params: Vec<(String, i64)>,
    pub classes: Vec<ClassDecl>,
    pub forms: Vec<FormDecl>,
    pub symbols: Vec<SymbolDecl>,
    pub constants: Vec<ConstDecl>,
    pub transforms: Vec<TransformDecl>,
    pub structure: Vec<StructEq>,
    pub aliases: Vec<AliasDef>,
    pub relations: Vec<RelDecl>,
    pub constraints: Vec<ConstraintBlock>,
    pub options: Options,
}

/// `c0 + Σ k·param`
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeExpr {
    pub constant: i64,
    pub terms: Vec<(i64, String)>,
}

impl SizeExpr {
    pub fn lit(n: i64) -> SizeExpr {
        SizeExpr { constant: n, terms: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Basic,
    Special,
    Group,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassDecl {
    pub name: String,
    pub kind: ClassKind,
    pub size: SizeExpr,
    pub hint: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Basic,
    Vertical,
    Group,
    Alias,
}

/// Slot numbers are 1-based, as written.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SymGen {
    Antisym(usize, usize),
    Sym(usize, usize),
    Perm { images: Vec<usize>, sign: i8 },
}

impl SymGen {
    /// Slot images (0-based) and sign for an arity.
    pub fn action(&self, arity: usize) -> (Vec<usize>, i8) {
        let mut p: Vec<usize> = (0..arity).collect();
        match self {
            SymGen::Antisym(a, b) | SymGen::Sym(a, b) => {
                p.swap(a - 1, b - 1);
                (p, if matches!(self, SymGen::Antisym(..)) { -1 } else { 1 })
            }
            SymGen::Perm { images, sign } => (images.iter().map(|x| x - 1).collect(), *sign),
        }
    }

    pub fn max_slot(&self) -> usize {
        match self {
            SymGen::Antisym(a, b) | SymGen::Sym(a, b) => *a.max(b),
            SymGen::Perm { images, .. } => images.iter().copied().max().unwrap_or(0).max(images.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormDecl {
    pub name: String,
    pub slots: Vec<String>,
    pub kind: FormKind,
    pub syms: Vec<SymGen>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Structural,
    Auxiliary,
    Given,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolDecl {
    pub name: String,
    pub slots: Vec<String>,
    pub role: Role,
    pub syms: Vec<SymGen>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstKind {
    Epsilon,
    Delta,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstDecl {
    pub name: String,
    pub slots: Vec<String>,
    pub factor: Rat,
    pub kind: ConstKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransformDecl {
    pub class: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructEq {
    pub lhs: Ref,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AliasDef {
    pub lhs: Ref,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelDecl {
    pub name: String,
    pub free: Vec<String>,
    pub lhs: Expr,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintBlock {
    pub eom: bool,
    pub relations: Vec<RelDecl>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Options {
    pub max_order: Option<u32>,
    pub seed_order: Option<u32>,
    pub ordering: Option<String>,
    pub trials: Option<u32>,
    pub coef_degree: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Term {
    pub coeff: Rat,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Factor {
    Ref(Ref),
    Paren(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ref {
    pub name: String,
    pub primary: Vec<Arg>,
    pub deriv: Vec<Arg>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Arg {
    Var(String),
    Lit(u32),
    /// `$`: the slot being transformed (transform rules only)
    Slot,
}

/// Name of the placeholder for "this component, slot replaced" in transforms.
pub const SELF: &str = "self";

fn list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for SizeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, p) in &self.terms {
            let (neg, a) = (*k < 0, k.unsigned_abs());
            match (first, neg) {
                (true, true) => f.write_str("-")?,
                (true, false) => {}
                (false, true) => f.write_str("-")?,
                (false, false) => f.write_str("+")?,
            }
            if a != 1 {
                write!(f, "{a}*")?;
            }
            f.write_str(p)?;
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0 {
            write!(f, "+{}", self.constant)
        } else if self.constant < 0 {
            write!(f, "{}", self.constant)
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for SymGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymGen::Antisym(a, b) => write!(f, "antisym({a},{b})"),
            SymGen::Sym(a, b) => write!(f, "sym({a},{b})"),
            SymGen::Perm { images, sign } => {
                if *sign < 0 {
                    f.write_str("-")?;
                }
                f.write_str("perm(")?;
                list(f, images, ",")?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(v) => f.write_str(v),
            Arg::Lit(n) => write!(f, "{n}"),
            Arg::Slot => f.write_str("$"),
        }
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.primary.is_empty() && self.deriv.is_empty() {
            return Ok(());
        }
        f.write_str("[")?;
        list(f, &self.primary, ",")?;
        if !self.deriv.is_empty() {
            f.write_str(";")?;
            list(f, &self.deriv, ",")?;
        }
        f.write_str("]")
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Ref(r) => write!(f, "{r}"),
            Factor::Paren(e) => write!(f, "({e})"),
        }
    }
}

impl Term {
    /// Forms are joined by `^`, everything else by `*`.
    fn fmt_factors(&self, f: &mut fmt::Formatter<'_>, is_form: &dyn Fn(&Factor) -> bool) -> fmt::Result {
        let a = self.coeff.abs();
        let mut first = true;
        if !a.is_one() || self.factors.is_empty() {
            write!(f, "{a}")?;
            first = false;
        }
        let mut prev_form = false;
        for x in &self.factors {
            let form = is_form(x);
            if !first {
                f.write_str(if form && prev_form { "^" } else { "*" })?;
            }
            write!(f, "{x}")?;
            prev_form = form;
            first = false;
        }
        Ok(())
    }
}

/// Expression printing needs to know which names are forms; the problem
/// printer passes that in, a bare `Display` treats nothing as a form.
pub struct ExprPrinter<'a> {
    pub expr: &'a Expr,
    pub forms: &'a [String],
}

impl fmt::Display for ExprPrinter<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let is_form = |x: &Factor| matches!(x, Factor::Ref(r) if self.forms.contains(&r.name));
        if self.expr.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.expr.terms.iter().enumerate() {
            match (i, t.coeff.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            t.fmt_factors(f, &|x| match x {
                Factor::Paren(e) => {
                    // a parenthesised group is a form if its first term ends in one
                    e.terms.first().and_then(|t| t.factors.last()).map(&is_form).unwrap_or(false)
                }
                x => is_form(x),
            })?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ExprPrinter { expr: self, forms: &[] }.fmt(f)
    }
}

fn decl_head(f: &mut fmt::Formatter<'_>, name: &str, slots: &[String]) -> fmt::Result {
    f.write_str(name)?;
    if !slots.is_empty() {
        f.write_str("[")?;
        list(f, slots, ",")?;
        f.write_str("]")?;
    }
    Ok(())
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let forms: Vec<String> = self.forms.iter().map(|x| x.name.clone()).collect();
        let pe = |e: &Expr| ExprPrinter { expr: e, forms: &forms }.to_string();
        writeln!(f, "problem {}", self.name)?;
        for (p, v) in &self.params {
            writeln!(f, "param {p} = {v}")?;
        }
        writeln!(f, "\n[indices]")?;
        for c in &self.classes {
            let kind = match c.kind {
                ClassKind::Basic => "basic",
                ClassKind::Special => "special",
                ClassKind::Group => "group",
            };
            write!(f, "{}: {kind}, size {}", c.name, c.size)?;
            if let Some(h) = &c.hint {
                write!(f, ", hint {h}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "\n[coframe]")?;
        for d in &self.forms {
            decl_head(f, &d.name, &d.slots)?;
            let kind = match d.kind {
                FormKind::Basic => "basic",
                FormKind::Vertical => "vertical",
                FormKind::Group => "group",
                FormKind::Alias => "alias",
            };
            write!(f, ": {kind}")?;
            for g in &d.syms {
                write!(f, ", {g}")?;
            }
            writeln!(f)?;
        }
        if !self.symbols.is_empty() {
            writeln!(f, "\n[invariants]")?;
            for s in &self.symbols {
                decl_head(f, &s.name, &s.slots)?;
                let role = match s.role {
                    Role::Structural => "structural",
                    Role::Auxiliary => "auxiliary",
                    Role::Given => "given",
                };
                write!(f, ": {role}")?;
                for g in &s.syms {
                    write!(f, ", {g}")?;
                }
                writeln!(f)?;
            }
        }
        if !self.constants.is_empty() {
            writeln!(f, "\n[constants]")?;
            for c in &self.constants {
                decl_head(f, &c.name, &c.slots)?;
                let kind = match c.kind {
                    ConstKind::Epsilon => "epsilon",
                    ConstKind::Delta => "delta",
                    ConstKind::Zero => "zero",
                };
                if c.factor.is_one() {
                    writeln!(f, " = {kind}")?;
                } else {
                    writeln!(f, " = {} {kind}", c.factor)?;
                }
            }
        }
        if !self.transforms.is_empty() {
            writeln!(f, "\n[transforms]")?;
            for t in &self.transforms {
                writeln!(f, "{}: {}", t.class, pe(&t.expr))?;
            }
        }
        writeln!(f, "\n[structure]")?;
        for s in &self.structure {
            writeln!(f, "d {} = {}", s.lhs, pe(&s.rhs))?;
        }
        for a in &self.aliases {
            writeln!(f, "alias {} = {}", a.lhs, pe(&a.rhs))?;
        }
        let rel = |f: &mut fmt::Formatter<'_>, r: &RelDecl| -> fmt::Result {
            write!(f, "{}: ", r.name)?;
            if !r.free.is_empty() {
                f.write_str("for ")?;
                list(f, &r.free, ",")?;
                f.write_str(": ")?;
            }
            writeln!(f, "{} = {}", pe(&r.lhs), pe(&r.rhs))
        };
        if !self.relations.is_empty() {
            writeln!(f, "\n[relations]")?;
            for r in &self.relations {
                rel(f, r)?;
            }
        }
        for b in &self.constraints {
            writeln!(f, "\n[constraints{}]", if b.eom { " eom" } else { "" })?;
            for r in &b.relations {
                rel(f, r)?;
            }
        }
        let o = &self.options;
        if *o != Options::default() {
            writeln!(f, "\n[options]")?;
            if let Some(v) = o.max_order {
                writeln!(f, "max_order = {v}")?;
            }
            if let Some(v) = o.seed_order {
                writeln!(f, "seed_order = {v}")?;
            }
            if let Some(v) = &o.ordering {
                writeln!(f, "ordering = {v}")?;
            }
            if let Some(v) = o.trials {
                writeln!(f, "trials = {v}")?;
            }
            if let Some(v) = o.coef_degree {
                writeln!(f, "coef_degree = {v}")?;
            }
        }
        Ok(())
    }
}
