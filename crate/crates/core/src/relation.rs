//! Finite-domain relations stored as sorted, duplicate-free tuple lists.
//!
//! Positions are 0-based throughout the library; the text formats and the CLI
//! use 1-based positions and variable indices.

use crate::error::{arg, CspError, Result};
use std::collections::HashMap;

/// Largest supported domain size. Value sets are packed into `u32` masks.
pub const MAX_DOMAIN: usize = 32;

/// Bit mask over domain values.
pub type ValueSet = u32;

pub fn mask_of(values: impl IntoIterator<Item = u8>) -> ValueSet {
    values.into_iter().fold(0, |m, v| m | (1 << v))
}

pub fn mask_values(mask: ValueSet) -> impl Iterator<Item = u8> {
    (0..MAX_DOMAIN as u8).filter(move |v| mask & (1 << v) != 0)
}

pub fn full_mask(k: usize) -> ValueSet {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// Concatenation `s⌢t` of two tuples.
pub fn concat(s: &[u8], t: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len() + t.len());
    out.extend_from_slice(s);
    out.extend_from_slice(t);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    domain: usize,
    arity: usize,
    tuples: Vec<Vec<u8>>,
}

fn check_domain(k: usize) -> Result<()> {
    if k == 0 || k > MAX_DOMAIN {
        return arg(format!("domain size {k} outside 1..={MAX_DOMAIN}"));
    }
    Ok(())
}

impl Relation {
    /// Builds a relation, sorting and deduplicating the tuples.
    pub fn new(domain: usize, arity: usize, tuples: impl IntoIterator<Item = Vec<u8>>) -> Result<Self> {
        check_domain(domain)?;
        let mut ts: Vec<Vec<u8>> = Vec::new();
        for t in tuples {
            if t.len() != arity {
                return arg(format!("tuple of length {} in relation of arity {arity}", t.len()));
            }
            if let Some(v) = t.iter().find(|&&v| v as usize >= domain) {
                return arg(format!("value {v} outside domain of size {domain}"));
            }
            ts.push(t);
        }
        ts.sort_unstable();
        ts.dedup();
        Ok(Relation { domain, arity, tuples: ts })
    }

    /// Convenience constructor from row slices; all rows must share one length.
    pub fn from_rows(domain: usize, rows: &[&[u8]]) -> Result<Self> {
        let arity = rows.first().map_or(0, |r| r.len());
        Self::new(domain, arity, rows.iter().map(|r| r.to_vec()))
    }

    /// Builds a relation with `rows` tuples from a list of columns.
    pub fn from_columns(domain: usize, rows: usize, columns: &[Vec<u8>]) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != rows) {
            return arg(format!("column of height {} but {rows} rows requested", c.len()));
        }
        let tuples = (0..rows).map(|r| columns.iter().map(|c| c[r]).collect());
        Self::new(domain, columns.len(), tuples)
    }

    pub fn empty(domain: usize, arity: usize) -> Result<Self> {
        Self::new(domain, arity, std::iter::empty())
    }

    /// All of `D^arity`. Refuses absurdly large results.
    pub fn full(domain: usize, arity: usize) -> Result<Self> {
        check_domain(domain)?;
        let count = (domain as f64).powi(arity as i32);
        if count > 1e7 {
            return Err(CspError::Unsupported(format!("D^{arity} over k={domain} is too large")));
        }
        Self::new(domain, arity, all_tuples(domain, arity))
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Vec<u8>] {
        &self.tuples
    }

    pub fn contains(&self, t: &[u8]) -> bool {
        self.tuples.binary_search_by(|x| x.as_slice().cmp(t)).is_ok()
    }

    pub fn column(&self, i: usize) -> Vec<u8> {
        self.tuples.iter().map(|t| t[i]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<u8>> {
        (0..self.arity).map(|i| self.column(i)).collect()
    }

    /// `proj_i(R)` as a value mask.
    pub fn value_set(&self, i: usize) -> ValueSet {
        mask_of(self.tuples.iter().map(|t| t[i]))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.arity {
            return arg(format!("position {} out of range for arity {}", i + 1, self.arity));
        }
        Ok(())
    }

    /// Projection onto `indices`; indices may repeat.
    pub fn project(&self, indices: &[usize]) -> Result<Relation> {
        for &i in indices {
            self.check_index(i)?;
        }
        let tuples = self.tuples.iter().map(|t| indices.iter().map(|&i| t[i]).collect());
        Relation::new(self.domain, indices.len(), tuples)
    }

    /// Removes duplicated columns. Returns the reduced relation and, for every
    /// original position, the position it maps to, so that
    /// `reduced.project(&map) == self`.
    pub fn remove_redundant(&self) -> (Relation, Vec<usize>) {
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut keep = Vec::new();
        let mut map = Vec::with_capacity(self.arity);
        for i in 0..self.arity {
            let col = self.column(i);
            let next = keep.len();
            let pos = *seen.entry(col).or_insert_with(|| {
                keep.push(i);
                next
            });
            map.push(pos);
        }
        let reduced = self.project(&keep).expect("indices in range");
        (reduced, map)
    }

    pub fn has_redundant_columns(&self) -> bool {
        let mut cols = self.columns();
        cols.sort_unstable();
        cols.windows(2).any(|w| w[0] == w[1])
    }

    /// Number of distinct values in column `i`.
    pub fn choice_class(&self, i: usize) -> Result<usize> {
        self.check_index(i)?;
        Ok(self.value_set(i).count_ones() as usize)
    }

    /// Returns the relation with the same tuples over a larger domain.
    pub fn widen(&self, domain: usize) -> Result<Relation> {
        if domain < self.domain {
            return arg("cannot shrink the domain of a relation");
        }
        Relation::new(domain, self.arity, self.tuples.iter().cloned())
    }

    pub fn intersect(&self, other: &Relation) -> Result<Relation> {
        if self.arity != other.arity || self.domain != other.domain {
            return arg("intersection of relations with different shapes");
        }
        let ts = self.tuples.iter().filter(|t| other.contains(t)).cloned();
        Relation::new(self.domain, self.arity, ts)
    }
}

/// Enumerates `D^n` in lexicographic order.
pub fn all_tuples(k: usize, n: usize) -> impl Iterator<Item = Vec<u8>> {
    let total = (k as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut code| {
        let mut t = vec![0u8; n];
        for slot in t.iter_mut().rev() {
            *slot = (code % k as u64) as u8;
            code /= k as u64;
        }
        t
    })
}

/// The Boolean relation R≠≠≠ whose eight columns enumerate {0,1}³.
pub fn r_b() -> Relation {
    Relation::from_rows(
        2,
        &[&[0, 0, 1, 1, 1, 0, 0, 1], &[0, 1, 0, 1, 0, 1, 0, 1], &[1, 0, 0, 0, 1, 1, 0, 1]],
    )
    .expect("static relation")
}

/// R≠≠ = proj onto the first six positions of R≠≠≠.
pub fn r_neq2() -> Relation {
    r_b().project(&[0, 1, 2, 3, 4, 5]).expect("static relation")
}

/// R_D: the k³-ary relation with three tuples whose columns enumerate D³.
pub fn make_rd(k: usize) -> Result<Relation> {
    if k < 2 {
        return arg(format!("make_rd needs k >= 2, got {k}"));
    }
    check_domain(k)?;
    if k == 2 {
        return Ok(r_b());
    }
    let cols: Vec<Vec<u8>> = all_tuples(k, 3).collect();
    Relation::from_columns(k, 3, &cols)
}

pub fn eq_relation(k: usize) -> Result<Relation> {
    Relation::new(k, 2, (0..k as u8).map(|d| vec![d, d]))
}

pub fn constant_relation(k: usize, d: u8) -> Result<Relation> {
    if d as usize >= k {
        return arg(format!("constant {d} outside domain of size {k}"));
    }
    Relation::new(k, 1, [vec![d]])
}

pub fn unary_relation(k: usize, mask: ValueSet) -> Result<Relation> {
    Relation::new(k, 1, mask_values(mask & full_mask(k)).map(|v| vec![v]))
}

/// Name used for the unary relation with value set `mask`: `c<d>` for
/// singletons, `u<values joined by _>` otherwise (`u_none` for the empty set).
pub fn unary_name(mask: ValueSet) -> String {
    let vals: Vec<String> = mask_values(mask).map(|v| v.to_string()).collect();
    match vals.len() {
        0 => "u_none".to_string(),
        1 => format!("c{}", vals[0]),
        _ => format!("u{}", vals.join("_")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let r = r_b();
        let p = r.project(&[0, 1, 2, 3, 4, 5]).unwrap();
        let expect = Relation::from_rows(
            2,
            &[&[0, 0, 1, 1, 1, 0], &[0, 1, 0, 1, 0, 1], &[1, 0, 0, 0, 1, 1]],
        )
        .unwrap();
        assert_eq!(p, expect);
        assert_eq!(r.project(&(0..8).collect::<Vec<_>>()).unwrap(), r);
        let u = Relation::from_rows(3, &[&[0], &[1], &[2]]).unwrap();
        assert_eq!(u.project(&[0, 0]).unwrap(), eq_relation(3).unwrap());
        assert!(r.project(&[8]).is_err());
    }

    #[test]
    fn redundant_columns() {
        let r = Relation::from_rows(2, &[&[0, 0], &[1, 1]]).unwrap();
        let (red, map) = r.remove_redundant();
        assert_eq!(red, Relation::from_rows(2, &[&[0], &[1]]).unwrap());
        assert_eq!(red.project(&map).unwrap(), r);

        let rd = make_rd(3).unwrap();
        assert_eq!(rd.remove_redundant().0, rd);

        let mut idx: Vec<usize> = (0..8).collect();
        idx.push(0);
        let widened = r_b().project(&idx).unwrap();
        let (red, map) = widened.remove_redundant();
        assert_eq!(red, r_b());
        assert_eq!(map[8], 0);
    }

    #[test]
    fn choice_classes() {
        let r = r_b();
        assert_eq!(r.choice_class(6).unwrap(), 1);
        assert_eq!(r.choice_class(0).unwrap(), 2);
        let rd = make_rd(3).unwrap();
        let i = rd.columns().iter().position(|c| c == &vec![0, 1, 2]).unwrap();
        assert_eq!(rd.choice_class(i).unwrap(), 3);
        assert!(r.choice_class(8).is_err());
    }

    #[test]
    fn rd_shapes() {
        assert_eq!(make_rd(2).unwrap(), r_b());
        let r3 = make_rd(3).unwrap();
        assert_eq!((r3.arity(), r3.len()), (27, 3));
        for k in 2..=6 {
            let r = make_rd(k).unwrap();
            let mut cols = r.columns();
            cols.sort();
            let all: Vec<Vec<u8>> = all_tuples(k, 3).collect();
            assert_eq!(cols, all);
            let mut counts = [0usize; 4];
            for i in 0..r.arity() {
                counts[r.choice_class(i).unwrap()] += 1;
            }
            assert_eq!(counts[1], k);
            assert_eq!(counts[2], 3 * k * (k - 1));
            assert_eq!(counts[3], k * (k - 1) * (k - 2));
            assert!(!r.has_redundant_columns());
        }
        assert!(make_rd(1).is_err());
    }

    #[test]
    fn constructors() {
        assert_eq!(eq_relation(3).unwrap().len(), 3);
        assert_eq!(constant_relation(3, 2).unwrap().tuples(), &[vec![2]]);
        assert!(constant_relation(2, 2).is_err());
        assert_eq!(unary_relation(3, 0b101).unwrap().len(), 2);
        assert_eq!(concat(&[0, 1], &[2]), vec![0, 1, 2]);
        assert_eq!(unary_name(0b100), "c2");
        assert_eq!(unary_name(0b101), "u0_2");
        assert_eq!(Relation::full(2, 3).unwrap().len(), 8);
    }
}
