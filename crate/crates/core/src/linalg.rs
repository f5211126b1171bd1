//! Sparse exact row echelon with caller-chosen column priority.
//!
//! Column ids *are* priorities: column 0 is eliminated first.  Callers that
//! work with their own variable ids map them to positions before inserting.
//! Only leading entries are cleared on insertion, which is enough to make the
//! pivot set equal to the greedy (leftmost) basis; `reduce_full` gives the
//! fully reduced expression when one is needed.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::rat::Rat;

pub type Row = Vec<(u32, Rat)>;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
pub struct Echelon {
    pivot_of: Vec<u32>,
    rows: Vec<Row>,
    tags: Vec<usize>,
}

/// `a - f*b` for sorted sparse rows.
pub fn axpy(a: &Row, f: &Rat, b: &Row) -> Row {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, -(f * &b[j].1)));
            j += 1;
        } else {
            let v = &a[i].1 - &(f * &b[j].1);
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Sort by column, merge duplicates, drop zeros.
pub fn normalize_row(mut row: Row) -> Row {
    row.sort_by_key(|e| e.0);
    let mut out: Row = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += &v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|e| !e.1.is_zero());
    out
}

impl Echelon {
    pub fn new(ncols: usize) -> Echelon {
        Echelon { pivot_of: alloc::vec![NONE; ncols], rows: Vec::new(), tags: Vec::new() }
    }

    pub fn ncols(&self) -> usize {
        self.pivot_of.len()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_pivot(&self, col: u32) -> bool {
        self.pivot_of[col as usize] != NONE
    }

    pub fn pivot_row(&self, col: u32) -> Option<(&Row, usize)> {
        match self.pivot_of[col as usize] {
            NONE => None,
            r => Some((&self.rows[r as usize], self.tags[r as usize])),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Row, usize)> {
        self.rows.iter().zip(self.tags.iter().copied())
    }

    /// Clear leading entries until the row is empty or leads on a free column.
    pub fn reduce_leading(&self, mut row: Row) -> Row {
        while let Some((c, v)) = row.first() {
            let p = self.pivot_of[*c as usize];
            if p == NONE {
                break;
            }
            let v = v.clone();
            row = axpy(&row, &v, &self.rows[p as usize]);
        }
        row
    }

    /// Insert a row; returns the new pivot column if the rank grew.
    pub fn insert(&mut self, row: Row, tag: usize) -> Option<u32> {
        let row = self.reduce_leading(row);
        let (c, lead) = row.first()?.clone();
        let row = if lead.is_one() {
            row
        } else {
            let inv = lead.recip();
            row.into_iter().map(|(k, v)| (k, &v * &inv)).collect()
        };
        self.pivot_of[c as usize] = self.rows.len() as u32;
        self.rows.push(row);
        self.tags.push(tag);
        Some(c)
    }

    pub fn contains(&self, row: Row) -> bool {
        self.reduce_leading(row).is_empty()
    }

    /// Eliminate every pivot column from `row`.
    pub fn reduce_full(&self, row: Row) -> Row {
        let mut acc: BTreeMap<u32, Rat> = row.into_iter().collect();
        let mut out = Vec::new();
        while let Some((c, v)) = acc.pop_first() {
            if v.is_zero() {
                continue;
            }
            match self.pivot_of[c as usize] {
                NONE => out.push((c, v)),
                p => {
                    for (k, w) in self.rows[p as usize].iter().skip(1) {
                        let e = acc.entry(*k).or_default();
                        *e -= &(&v * w);
                    }
                }
            }
        }
        out
    }
}

/// Rank of a set of rows (any column numbering).
pub fn rank(ncols: usize, rows: impl IntoIterator<Item = Row>) -> usize {
    let mut e = Echelon::new(ncols);
    for r in rows {
        e.insert(r, 0);
    }
    e.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn r(v: &[(u32, i64)]) -> Row {
        normalize_row(v.iter().map(|&(c, x)| (c, Rat::int(x))).collect())
    }

    #[test]
    fn pivots_are_leftmost_basis() {
        let mut e = Echelon::new(4);
        assert_eq!(e.insert(r(&[(1, 1), (2, 1)]), 0), Some(1));
        assert_eq!(e.insert(r(&[(1, 1), (3, 1)]), 1), Some(2));
        assert_eq!(e.insert(r(&[(2, 1), (3, -1)]), 2), None);
        assert_eq!(e.rank(), 2);
        assert!(!e.is_pivot(0));
        // x1 = -x2, x2 = x3  =>  x1 = -x3
        let full = e.reduce_full(r(&[(1, 1)]));
        assert_eq!(full, vec![(3, Rat::int(-1))]);
    }

    #[test]
    fn rank_ignores_duplicates() {
        let rows = vec![r(&[(0, 2), (1, 4)]), r(&[(0, 1), (1, 2)])];
        assert_eq!(rank(2, rows), 1);
    }

    proptest::proptest! {
        #[test]
        fn rank_is_column_order_invariant(entries in proptest::collection::vec((0u32..6, 0u32..6, -3i64..4), 0..25)) {
            let rows: Vec<Row> = (0..6u32)
                .map(|i| r(&entries.iter().filter(|e| e.0 == i).map(|e| (e.1, e.2)).collect::<Vec<_>>()))
                .collect();
            let flipped: Vec<Row> = rows.iter().map(|row| normalize_row(row.iter().map(|(c, v)| (5 - c, v.clone())).collect())).collect();
            proptest::prop_assert_eq!(rank(6, rows), rank(6, flipped));
        }
    }
}
