//! Sparse multivariate polynomials over `Rat` in interned variables.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::rat::Rat;

pub type Var = u32;

/// A monomial is a sorted multiset of variables.
pub type Mono = Vec<Var>;

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly {
    terms: BTreeMap<Mono, Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Rat) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::ONE)
    }

    pub fn var(v: Var) -> Poly {
        Poly::term(Rat::ONE, alloc::vec![v])
    }

    pub fn term(c: Rat, mut mono: Mono) -> Poly {
        mono.sort_unstable();
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(mono, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    /// `Some(c)` when the polynomial has no variables.
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::ZERO),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.len()).max().unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().flat_map(|m| m.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn add_term(&mut self, c: Rat, mono: Mono) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(x) => {
                *x += &c;
                if x.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, c);
            }
        }
    }

    pub fn add_scaled(&mut self, c: &Rat, other: &Poly) {
        if c.is_zero() {
            return;
        }
        for (m, x) in &other.terms {
            self.add_term(c * x, m.clone());
        }
    }

    pub fn add_assign(&mut self, other: &Poly) {
        self.add_scaled(&Rat::ONE, other);
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect() }
    }

    pub fn neg(&self) -> Poly {
        self.scale(&Rat::int(-1))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                m.extend_from_slice(m2);
                m.sort_unstable();
                out.add_term(c1 * c2, m);
            }
        }
        out
    }

    pub fn mul_var(&self, v: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut m = m.clone();
            let at = m.partition_point(|&x| x <= v);
            m.insert(at, v);
            out.terms.insert(m, c.clone());
        }
        out
    }

    pub fn derivative(&self, v: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.iter().filter(|&&x| x == v).count();
            if e == 0 {
                continue;
            }
            let mut rest = m.clone();
            let pos = rest.iter().position(|&x| x == v).unwrap();
            rest.remove(pos);
            out.add_term(c * &Rat::int(e as i64), rest);
        }
        out
    }

    pub fn eval(&self, value: &dyn Fn(Var) -> Rat) -> Rat {
        let mut acc = Rat::ZERO;
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &v in m {
                t *= &value(v);
                if t.is_zero() {
                    break;
                }
            }
            acc += &t;
        }
        acc
    }

    /// Substitute the variables for which `value` answers, keep the rest.
    pub fn eval_partial(&self, value: &dyn Fn(Var) -> Option<Rat>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            let mut rest = Vec::new();
            for &v in m {
                match value(v) {
                    Some(x) => t *= &x,
                    None => rest.push(v),
                }
            }
            out.add_term(t, rest);
        }
        out
    }

    /// Replace each variable by a polynomial (variables not mapped stay).
    pub fn substitute(&self, sub: &dyn Fn(Var) -> Option<Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut t = Poly::constant(c.clone());
            for &v in m {
                match sub(v) {
                    Some(p) => t = t.mul(&p),
                    None => t = t.mul_var(v),
                }
            }
            out.add_assign(&t);
        }
        out
    }

    /// Gradient at a point, as sparse `(var, value)` pairs sorted by var.
    pub fn gradient_at(&self, value: &dyn Fn(Var) -> Rat) -> Vec<(Var, Rat)> {
        let mut acc: BTreeMap<Var, Rat> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut start = 0;
            while start < m.len() {
                let v = m[start];
                let end = start + m[start..].iter().take_while(|&&w| w == v).count();
                let mut t = c * &Rat::int((end - start) as i64);
                for (j, &w) in m.iter().enumerate() {
                    if j != start {
                        t *= &value(w);
                    }
                }
                if !t.is_zero() {
                    *acc.entry(v).or_default() += &t;
                }
                start = end;
            }
        }
        acc.into_iter().filter(|(_, x)| !x.is_zero()).collect()
    }

    /// Divide through by the coefficient of the greatest monomial so that
    /// proportional polynomials compare equal.
    pub fn normalized(&self) -> Poly {
        match self.terms.iter().next_back() {
            Some((_, c)) => self.scale(&c.recip()),
            None => Poly::zero(),
        }
    }

    pub fn fmt_with(
        &self,
        f: &mut fmt::Formatter<'_>,
        name: &dyn Fn(&mut fmt::Formatter<'_>, Var) -> fmt::Result,
    ) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_empty() {
                write!(f, "{a}")?;
                continue;
            }
            if !a.is_one() {
                write!(f, "{a}*")?;
            }
            for (j, &v) in m.iter().enumerate() {
                if j > 0 {
                    write!(f, "*")?;
                }
                name(f, v)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &|f, v| write!(f, "x{v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(v: Var) -> Poly {
        Poly::var(v)
    }

    #[test]
    fn product_and_derivative() {
        // (x0 + x1)^2
        let s = x(0).mul(&Poly::one()).mul(&Poly::constant(Rat::ONE));
        let mut p = s.clone();
        p.add_assign(&x(1));
        let sq = p.mul(&p);
        assert_eq!(sq.len(), 3);
        let d = sq.derivative(0);
        // 2 x0 + 2 x1
        let mut want = x(0).scale(&Rat::int(2));
        want.add_assign(&x(1).scale(&Rat::int(2)));
        assert_eq!(d, want);
    }

    #[test]
    fn gradient_matches_derivative() {
        let p = x(0).mul(&x(0)).mul(&x(1));
        let vals = |v: Var| Rat::int(v as i64 + 2);
        let g = p.gradient_at(&vals);
        assert_eq!(g, alloc::vec![(0, Rat::int(12)), (1, Rat::int(4))]);
        for (v, c) in g {
            assert_eq!(p.derivative(v).eval(&vals), c);
        }
    }

    #[test]
    fn partial_evaluation_and_normalization() {
        let mut p = x(0).mul(&x(1));
        p.add_assign(&x(2).scale(&Rat::int(3)));
        let q = p.eval_partial(&|v| if v == 1 { Some(Rat::int(2)) } else { None });
        let mut want = x(0).scale(&Rat::int(2));
        want.add_assign(&x(2).scale(&Rat::int(3)));
        assert_eq!(q, want);
        assert_eq!(q.scale(&Rat::int(-5)).normalized(), q.normalized());
    }
}
