//! Three-tuple relations: R^B-extension detection, saturation, and the
//! column-level helpers the reductions rely on.

use crate::error::{arg, Result};
use crate::relation::Relation;
use serde::Serialize;
use std::collections::HashMap;

/// Column `i` of a three-tuple relation as `(t1[i], t2[i], t3[i])`.
pub fn col3(r: &Relation, i: usize) -> [u8; 3] {
    let t = r.tuples();
    [t[0][i], t[1][i], t[2][i]]
}

pub fn columns3(r: &Relation) -> Vec<[u8; 3]> {
    (0..r.arity()).map(|i| col3(r, i)).collect()
}

/// Lookup from column vector to its first position.
pub fn column_index(r: &Relation) -> HashMap<[u8; 3], usize> {
    let mut m = HashMap::new();
    for (i, c) in columns3(r).into_iter().enumerate() {
        m.entry(c).or_insert(i);
    }
    m
}

/// Number of distinct values in a column vector.
pub fn choice_of(c: [u8; 3]) -> usize {
    1 + usize::from(c[1] != c[0]) + usize::from(c[2] != c[0] && c[2] != c[1])
}

/// The 27 maps τ: {1,2,3} → {1,2,3} in lexicographic order (0-based).
pub fn all_tau() -> Vec<[usize; 3]> {
    let mut v = Vec::with_capacity(27);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                v.push([a, b, c]);
            }
        }
    }
    v
}

pub fn apply_tau(c: [u8; 3], tau: [usize; 3]) -> [u8; 3] {
    [c[tau[0]], c[tau[1]], c[tau[2]]]
}

/// The eight column patterns of R^B for values `a`, `b`.
pub fn rb_pattern(a: u8, b: u8) -> [[u8; 3]; 8] {
    [[a, a, b], [a, b, a], [b, a, a], [b, b, a], [b, a, b], [a, b, b], [a, a, a], [b, b, b]]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RBWitness {
    pub a: u8,
    pub b: u8,
    /// `rows[j]` is the index (in canonical order) of the tuple of R playing
    /// the role of the j-th tuple of R^B.
    pub rows: [usize; 3],
    /// 0-based positions replaying the eight R^B columns.
    pub indices: [usize; 8],
}

impl RBWitness {
    /// Checks the witness against `r`.
    pub fn holds(&self, r: &Relation) -> bool {
        if r.len() != 3 || self.a == self.b {
            return false;
        }
        let t = r.tuples();
        rb_pattern(self.a, self.b).iter().zip(&self.indices).all(|(pat, &i)| {
            i < r.arity() && (0..3).all(|j| t[self.rows[j]][i] == pat[j])
        })
    }
}

const ROW_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Finds values a ≠ b, a row assignment and eight positions replaying the
/// R^B pattern. Pairs are tried with a < b; swapping a and b maps the pattern
/// onto itself, so this loses nothing.
pub fn detect_rb_extension(r: &Relation) -> Option<RBWitness> {
    if r.len() != 3 {
        return None;
    }
    let idx = column_index(r);
    let k = r.domain() as u8;
    for a in 0..k {
        for b in a + 1..k {
            'orders: for rows in ROW_ORDERS {
                let mut indices = [0usize; 8];
                for (slot, pat) in rb_pattern(a, b).iter().enumerate() {
                    let mut c = [0u8; 3];
                    for j in 0..3 {
                        c[rows[j]] = pat[j];
                    }
                    match idx.get(&c) {
                        Some(&i) => indices[slot] = i,
                        None => continue 'orders,
                    }
                }
                return Some(RBWitness { a, b, rows, indices });
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SaturationCheck {
    Saturated,
    /// The τ-image of column `column` (0-based) is missing.
    Missing { column: usize, tau: [usize; 3], vector: [u8; 3] },
}

fn need_three(r: &Relation) -> Result<()> {
    if r.len() != 3 {
        return arg(format!("expected a relation with 3 tuples, got {}", r.len()));
    }
    Ok(())
}

pub fn is_saturated(r: &Relation) -> Result<SaturationCheck> {
    need_three(r)?;
    let idx = column_index(r);
    let taus = all_tau();
    for (i, c) in columns3(r).into_iter().enumerate() {
        for &tau in &taus {
            let img = apply_tau(c, tau);
            if !idx.contains_key(&img) {
                return Ok(SaturationCheck::Missing { column: i, tau, vector: img });
            }
        }
    }
    Ok(SaturationCheck::Saturated)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SaturationEntry {
    /// 0-based output position of the new column.
    pub column: usize,
    /// 0-based source position.
    pub source: usize,
    /// 0-based τ.
    pub tau: [usize; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SaturationMap {
    pub entries: Vec<SaturationEntry>,
}

/// Appends every missing τ-image in canonical (column, τ) order, skipping
/// images already present. Original columns are kept in place, so the
/// projection onto them is the input.
pub fn saturate(r: &Relation) -> Result<(Relation, SaturationMap)> {
    need_three(r)?;
    let mut cols = columns3(r);
    let mut idx = column_index(r);
    let mut map = SaturationMap::default();
    let taus = all_tau();
    let original = cols.len();
    for i in 0..original {
        for &tau in &taus {
            let img = apply_tau(cols[i], tau);
            if let std::collections::hash_map::Entry::Vacant(e) = idx.entry(img) {
                e.insert(cols.len());
                map.entries.push(SaturationEntry { column: cols.len(), source: i, tau });
                cols.push(img);
            }
        }
    }
    let as_vecs: Vec<Vec<u8>> = cols.iter().map(|c| c.to_vec()).collect();
    let out = Relation::from_columns(r.domain(), 3, &as_vecs)?;
    debug_assert_eq!(columns3(&out), cols);
    Ok((out, map))
}

/// Positions of 3-choice columns.
pub fn three_choice_positions(r: &Relation) -> Vec<usize> {
    columns3(r).into_iter().enumerate().filter(|(_, c)| choice_of(*c) == 3).map(|(i, _)| i).collect()
}

/// Small 3-tuple relations over {0,1,2} used by tests, benches and the CLI demo.
pub mod fixtures {
    use crate::relation::Relation;

    /// A 10-column extension of R^B over {0,1,2} that is not saturated.
    pub fn r_ex() -> Relation {
        let cols: Vec<Vec<u8>> = [
            [0, 0, 1], [0, 1, 0], [1, 0, 0], [1, 1, 0], [1, 0, 1], [0, 1, 1], [0, 0, 2], [0, 0, 0], [1, 1, 1], [2, 2, 2],
        ]
        .iter()
        .map(|c| c.to_vec())
        .collect();
        Relation::from_columns(3, 3, &cols).unwrap()
    }

    /// `r_ex` with its seventh column replaced by the 3-choice column (0,1,2).
    pub fn r_ex_prime() -> Relation {
        let mut cols = r_ex().columns();
        cols[6] = vec![0, 1, 2];
        Relation::from_columns(3, 3, &cols).unwrap()
    }

    /// The saturation of `r_ex`, written out by rows.
    pub fn saturated_ex() -> Relation {
        let rows: [&[u8]; 3] = [
            &[0, 0, 1, 1, 1, 0, 0, 0, 2, 2, 2, 0, 0, 1, 2],
            &[0, 1, 0, 1, 0, 1, 0, 2, 0, 2, 0, 2, 0, 1, 2],
            &[1, 0, 0, 0, 1, 1, 2, 0, 0, 0, 2, 2, 0, 1, 2],
        ];
        Relation::from_rows(3, &rows).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::relation::{make_rd, r_b};

    fn sorted_cols(r: &Relation) -> Vec<[u8; 3]> {
        let mut c = columns3(r);
        c.sort();
        c
    }

    #[test]
    fn detects_rb() {
        let w = detect_rb_extension(&r_b()).unwrap();
        assert_eq!((w.a, w.b, w.indices), (0, 1, [0, 1, 2, 3, 4, 5, 6, 7]));
        assert!(w.holds(&r_b()));
        let w = detect_rb_extension(&r_ex()).unwrap();
        assert_eq!((w.a, w.b, w.indices), (0, 1, [0, 1, 2, 3, 4, 5, 7, 8]));
        let u = Relation::from_rows(3, &[&[0], &[1], &[2]]).unwrap();
        assert_eq!(detect_rb_extension(&u), None);
        for k in 2..=5 {
            assert!(detect_rb_extension(&make_rd(k).unwrap()).is_some());
        }
    }

    #[test]
    fn saturation_checks() {
        match is_saturated(&r_ex()).unwrap() {
            SaturationCheck::Missing { vector, .. } => assert_eq!(vector, [0, 2, 0]),
            other => panic!("{other:?}"),
        }
        match is_saturated(&r_ex_prime()).unwrap() {
            SaturationCheck::Missing { column, .. } => assert_eq!(column, 6),
            other => panic!("{other:?}"),
        }
        for k in 2..=4 {
            assert_eq!(is_saturated(&make_rd(k).unwrap()).unwrap(), SaturationCheck::Saturated);
        }
        assert!(is_saturated(&Relation::full(2, 2).unwrap()).is_err());
    }

    #[test]
    fn saturates_example() {
        let (s, map) = saturate(&r_ex()).unwrap();
        assert_eq!(sorted_cols(&s), sorted_cols(&saturated_ex()));
        assert_eq!(s.project(&(0..10).collect::<Vec<_>>()).unwrap(), r_ex());
        assert_eq!(map.entries.len(), 5);
        for e in &map.entries {
            assert_eq!(col3(&s, e.column), apply_tau(col3(&s, e.source), e.tau));
        }
        assert!(three_choice_positions(&s).is_empty());
        assert_eq!(saturate(&s).unwrap().0, s);
        let rd = make_rd(3).unwrap();
        assert_eq!(saturate(&rd).unwrap().0, rd);
    }
}
