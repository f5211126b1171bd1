//! Components, sign-symmetry groups, canonical representatives and index
//! orderings.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::poly::Var;
use crate::problem::ConcreteProblem;

/// Finite group of signed slot permutations.  An element `(p, s)` acts on a
/// tuple by `u[k] = t[p[k]]` and says `X[t] = s·X[u]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymGroup {
    pub arity: usize,
    pub elems: Vec<(Vec<usize>, i8)>,
}

pub const GROUP_CAP: usize = 40_320;

impl SymGroup {
    pub fn trivial(arity: usize) -> SymGroup {
        SymGroup { arity, elems: alloc::vec![((0..arity).collect(), 1)] }
    }

    /// Closure of the generators; `None` if the group exceeds [`GROUP_CAP`].
    pub fn generate(arity: usize, gens: &[(Vec<usize>, i8)]) -> Option<SymGroup> {
        let id: (Vec<usize>, i8) = ((0..arity).collect(), 1);
        let mut elems = alloc::vec![id.clone()];
        let mut seen: BTreeMap<(Vec<usize>, i8), ()> = BTreeMap::new();
        seen.insert(id, ());
        let mut i = 0;
        while i < elems.len() {
            let (h, hs) = elems[i].clone();
            for (g, gs) in gens {
                // apply h, then g
                let c: Vec<usize> = (0..arity).map(|k| h[g[k]]).collect();
                let e = (c, hs * gs);
                if !seen.contains_key(&e) {
                    if elems.len() >= GROUP_CAP {
                        return None;
                    }
                    seen.insert(e.clone(), ());
                    elems.push(e);
                }
            }
            i += 1;
        }
        Some(SymGroup { arity, elems })
    }

    /// Lexicographically greatest image and the sign relating it to `t`;
    /// sign 0 when the orbit annihilates itself.
    pub fn canonical(&self, t: &[u8]) -> (i8, Vec<u8>) {
        debug_assert_eq!(t.len(), self.arity);
        if self.elems.len() == 1 {
            return (1, t.to_vec());
        }
        let mut best: Vec<u8> = t.to_vec();
        let mut sign: i8 = 1;
        let mut zero = false;
        let mut u = alloc::vec![0u8; t.len()];
        for (p, s) in &self.elems {
            for k in 0..t.len() {
                u[k] = t[p[k]];
            }
            match u.as_slice().cmp(best.as_slice()) {
                core::cmp::Ordering::Greater => {
                    best.copy_from_slice(&u);
                    sign = *s;
                    zero = false;
                }
                core::cmp::Ordering::Equal => {
                    if *s != sign {
                        zero = true;
                    }
                }
                core::cmp::Ordering::Less => {}
            }
        }
        (if zero { 0 } else { sign }, best)
    }

    pub fn order(&self) -> usize {
        self.elems.len()
    }
}

/// An invariant component `sym[idx; der]`.  `idx` holds primary index
/// values (0-based within each slot's class), `der` holds derivation
/// direction ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Comp {
    pub sym: u16,
    pub idx: Vec<u8>,
    pub der: Vec<u8>,
}

impl Comp {
    pub fn order(&self) -> usize {
        self.der.len()
    }

    pub fn last(&self) -> Option<u8> {
        self.der.last().copied()
    }

    pub fn with_der(&self, k: u8) -> Comp {
        let mut c = self.clone();
        c.der.push(k);
        c
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignedComp {
    pub sign: i8,
    pub comp: Option<String>,
}

/// Interned components.
#[derive(Clone, Debug, Default)]
pub struct VarTable {
    comps: Vec<Comp>,
    map: BTreeMap<Comp, Var>,
}

impl VarTable {
    pub fn intern(&mut self, c: Comp) -> Var {
        if let Some(&v) = self.map.get(&c) {
            return v;
        }
        let v = self.comps.len() as Var;
        self.map.insert(c.clone(), v);
        self.comps.push(c);
        v
    }

    pub fn get(&self, c: &Comp) -> Option<Var> {
        self.map.get(c).copied()
    }

    pub fn comp(&self, v: Var) -> &Comp {
        &self.comps[v as usize]
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Comp)> {
        self.comps.iter().enumerate().map(|(i, c)| (i as Var, c))
    }
}

/// Canonicalize a raw component of symbol `sym`.
pub fn canonicalize(p: &ConcreteProblem, c: &Comp) -> (i8, Comp) {
    let (s, idx) = p.symbols[c.sym as usize].group.canonical(&c.idx);
    (s, Comp { sym: c.sym, idx, der: c.der.clone() })
}

/// Canonical nonzero primary tuples of a symbol, ascending.
pub fn canonical_tuples(p: &ConcreteProblem, sym: usize) -> Vec<Vec<u8>> {
    let s = &p.symbols[sym];
    let sizes: Vec<usize> = s.slots.iter().map(|&c| p.classes[c].size).collect();
    let mut out = Vec::new();
    for t in tuples(&sizes) {
        let (sg, rep) = s.group.canonical(&t);
        if sg != 0 && rep == t {
            out.push(t);
        }
    }
    out
}

/// All tuples over the given ranges, lexicographic.
pub fn tuples(sizes: &[usize]) -> Vec<Vec<u8>> {
    let mut out = alloc::vec![Vec::new()];
    for &n in sizes {
        let mut next = Vec::with_capacity(out.len() * n);
        for t in &out {
            for v in 0..n {
                let mut u = t.clone();
                u.push(v as u8);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

/// One representative per nonzero orbit, derivation tuples of length
/// `order`, sorted by `Comp`'s order.
pub fn enumerate_components(p: &ConcreteProblem, sym: usize, order: usize) -> Vec<Comp> {
    let prim = canonical_tuples(p, sym);
    let ders = tuples(&alloc::vec![p.dirs.len(); order]);
    let mut out = Vec::with_capacity(prim.len() * ders.len());
    for t in &prim {
        for d in &ders {
            out.push(Comp { sym: sym as u16, idx: t.clone(), der: d.clone() });
        }
    }
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("direction {0} is outside the ordering's domain")]
    OutOfDomain(usize),
    #[error("ordering `{0}` is not a permutation of the derivation directions")]
    NotPermutation(String),
    #[error("unknown ordering hint `{0}`")]
    UnknownHint(String),
}

/// Rank map on derivation directions: `ranks[dir]` in `1..=ndirs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IndexOrdering {
    pub name: String,
    pub ranks: Vec<u32>,
}

impl IndexOrdering {
    pub fn from_sequence(name: impl Into<String>, seq: &[u8], ndirs: usize) -> Result<IndexOrdering, IndexError> {
        let name = name.into();
        let mut ranks = alloc::vec![0u32; ndirs];
        if seq.len() != ndirs {
            return Err(IndexError::NotPermutation(name));
        }
        for (r, &d) in seq.iter().enumerate() {
            if d as usize >= ndirs || ranks[d as usize] != 0 {
                return Err(IndexError::NotPermutation(name));
            }
            ranks[d as usize] = r as u32 + 1;
        }
        Ok(IndexOrdering { name, ranks })
    }

    /// Directions, lowest rank first.
    pub fn sequence(&self) -> Vec<u8> {
        let mut s: Vec<u8> = (0..self.ranks.len() as u8).collect();
        s.sort_by_key(|&d| self.ranks[d as usize]);
        s
    }

    pub fn rank(&self, dir: u8) -> u32 {
        self.ranks[dir as usize]
    }

    pub fn describe(&self, p: &ConcreteProblem) -> String {
        let labels: Vec<&str> = self.sequence().iter().map(|&d| p.dir_label(d)).collect();
        labels.join("<")
    }
}

/// `s(v)` for a derivation direction.
pub fn rank_of(o: &IndexOrdering, dir: usize) -> Result<u32, IndexError> {
    o.ranks.get(dir).copied().ok_or(IndexError::OutOfDomain(dir))
}

/// Orderings named by hint: `natural`, `special-smallest`,
/// `special-largest`, `reverse`, or an explicit `0<1<2` label chain.
pub fn ordering_from_hint(p: &ConcreteProblem, hint: &str) -> Result<IndexOrdering, IndexError> {
    let n = p.dirs.len();
    let natural: Vec<u8> = (0..n as u8).collect();
    let special = |d: &u8| p.classes[p.dirs[*d as usize].0].kind == crate::dsl::ClassKind::Special;
    let seq: Vec<u8> = match hint {
        "natural" => natural,
        "reverse" => natural.into_iter().rev().collect(),
        "special-smallest" => {
            let (mut s, b): (Vec<u8>, Vec<u8>) = natural.into_iter().partition(special);
            s.extend(b);
            s
        }
        "special-largest" => {
            let (s, mut b): (Vec<u8>, Vec<u8>) = natural.into_iter().partition(special);
            b.extend(s);
            b
        }
        chain if chain.contains('<') || n == 1 => {
            let mut seq = Vec::new();
            for lab in chain.split('<') {
                let lab = lab.trim();
                match (0..n as u8).find(|&d| p.dir_label(d) == lab) {
                    Some(d) => seq.push(d),
                    None => return Err(IndexError::UnknownHint(hint.into())),
                }
            }
            return IndexOrdering::from_sequence(chain, &seq, n);
        }
        other => return Err(IndexError::UnknownHint(other.into())),
    };
    IndexOrdering::from_sequence(hint, &seq, n)
}

/// Display a component as `R[2,1,2,1;3]`.
pub fn comp_label(p: &ConcreteProblem, c: &Comp) -> String {
    let s = &p.symbols[c.sym as usize];
    let mut out = s.name.clone();
    if c.idx.is_empty() && c.der.is_empty() {
        return out;
    }
    out.push('[');
    let prim: Vec<String> = c.idx.iter().zip(&s.slots).map(|(&v, &cl)| p.value_label(cl, v)).collect();
    out.push_str(&prim.join(","));
    if !c.der.is_empty() {
        out.push(';');
        let der: Vec<&str> = c.der.iter().map(|&d| p.dir_label(d)).collect();
        out.push_str(&der.join(","));
    }
    out.push(']');
    out
}

pub fn signed_label(p: &ConcreteProblem, sign: i8, c: &Comp) -> SignedComp {
    SignedComp { sign, comp: if sign == 0 { None } else { Some(comp_label(p, c)) } }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn antisym(a: usize, b: usize, n: usize) -> (Vec<usize>, i8) {
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(a, b);
        (p, -1)
    }

    #[test]
    fn antisymmetric_pair() {
        let g = SymGroup::generate(2, &[antisym(0, 1, 2)]).unwrap();
        assert_eq!(g.canonical(&[0, 1]), (-1, alloc::vec![1, 0]));
        assert_eq!(g.canonical(&[0, 0]).0, 0);
    }

    #[test]
    fn riemann_pairs() {
        let g = SymGroup::generate(4, &[antisym(0, 1, 4), antisym(2, 3, 4)]).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.canonical(&[0, 1, 0, 1]), (1, alloc::vec![1, 0, 1, 0]));
    }

    proptest::proptest! {
        #[test]
        fn canonical_is_orbit_invariant(t in proptest::collection::vec(0u8..4, 4)) {
            let swap = (alloc::vec![2, 3, 0, 1], 1i8);
            let g = SymGroup::generate(4, &[antisym(0, 1, 4), antisym(2, 3, 4), swap]).unwrap();
            let (s, rep) = g.canonical(&t);
            for (p, sg) in &g.elems {
                let u: Vec<u8> = (0..4).map(|k| t[p[k]]).collect();
                let (s2, rep2) = g.canonical(&u);
                proptest::prop_assert_eq!(&rep2, &rep);
                // X[t] = sg X[u]  and  X[u] = s2 X[rep], X[t] = s X[rep]
                proptest::prop_assert_eq!(s as i32, (*sg as i32) * (s2 as i32));
            }
            let (s3, rep3) = g.canonical(&rep);
            proptest::prop_assert_eq!(rep3, rep);
            if s != 0 { proptest::prop_assert_eq!(s3, 1); }
        }
    }
}
