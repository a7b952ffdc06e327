//! Partial polymorphisms: preservation, enumeration of total polymorphisms,
//! and the exact qfpp-definability test for relations with at most three
//! tuples.

use crate::error::{arg, CspError, Result};
use crate::language::ConstraintLanguage;
use crate::par::{self, Mode};
use crate::relation::{all_tuples, Relation};
use crate::search::{Budget, Network};
use std::collections::{BTreeMap, HashMap};

/// Default node budget for a single search inside this module.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialOperation {
    domain: usize,
    arity: usize,
    map: BTreeMap<Vec<u8>, u8>,
}

impl PartialOperation {
    pub fn new(domain: usize, arity: usize, map: BTreeMap<Vec<u8>, u8>) -> Result<Self> {
        if arity == 0 {
            return arg("partial operations need arity >= 1");
        }
        for (x, &y) in &map {
            if x.len() != arity || x.iter().chain([&y]).any(|&v| v as usize >= domain) {
                return arg("partial operation entry out of shape");
            }
        }
        Ok(PartialOperation { domain, arity, map })
    }

    /// Total operation from its table over `D^a` in lexicographic order.
    pub fn total(domain: usize, arity: usize, table: &[u8]) -> Result<Self> {
        let points: Vec<Vec<u8>> = all_tuples(domain, arity).collect();
        if points.len() != table.len() {
            return arg(format!("table has {} entries, D^{arity} has {}", table.len(), points.len()));
        }
        Self::new(domain, arity, points.into_iter().zip(table.iter().copied()).collect())
    }

    pub fn from_fn(domain: usize, arity: usize, f: impl Fn(&[u8]) -> u8) -> Result<Self> {
        let table: Vec<u8> = all_tuples(domain, arity).map(|t| f(&t)).collect();
        Self::total(domain, arity, &table)
    }

    pub fn projection(domain: usize, arity: usize, i: usize) -> Result<Self> {
        Self::from_fn(domain, arity, |t| t[i])
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entries(&self) -> &BTreeMap<Vec<u8>, u8> {
        &self.map
    }

    pub fn get(&self, x: &[u8]) -> Option<u8> {
        self.map.get(x).copied()
    }

    pub fn is_total(&self) -> bool {
        self.map.len() as f64 == (self.domain as f64).powi(self.arity as i32)
    }

    /// Table in lexicographic point order; `None` unless total.
    pub fn table(&self) -> Option<Vec<u8>> {
        self.is_total().then(|| self.map.values().copied().collect())
    }

    /// Restriction to the points accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&[u8]) -> bool) -> Self {
        let map = self.map.iter().filter(|(x, _)| keep(x)).map(|(x, &y)| (x.clone(), y)).collect();
        PartialOperation { domain: self.domain, arity: self.arity, map }
    }

    /// Componentwise application; `None` if some column is outside the domain
    /// of definition.
    pub fn apply(&self, rows: &[&[u8]]) -> Option<Vec<u8>> {
        if rows.len() != self.arity {
            return None;
        }
        let n = rows.first().map_or(0, |r| r.len());
        let mut col = vec![0u8; self.arity];
        let mut out = Vec::with_capacity(n);
        for p in 0..n {
            for (c, r) in col.iter_mut().zip(rows) {
                *c = r[p];
            }
            out.push(self.get(&col)?);
        }
        Some(out)
    }
}

/// A partial operation together with a tuple sequence of a relation whose
/// image lies outside that relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub operation: PartialOperation,
    pub rows: Vec<Vec<u8>>,
    pub image: Vec<u8>,
    pub relation: String,
}

impl Witness {
    /// Re-applies the operation and confirms the violation against `r`.
    pub fn replays(&self, r: &Relation) -> bool {
        let rows: Vec<&[u8]> = self.rows.iter().map(|x| x.as_slice()).collect();
        rows.iter().all(|t| r.contains(t))
            && self.operation.apply(&rows).as_deref() == Some(self.image.as_slice())
            && !r.contains(&self.image)
    }
}

/// Iterates all `a`-sequences of indices into `0..m` in lexicographic order.
fn sequences(m: usize, a: usize) -> impl Iterator<Item = Vec<usize>> {
    all_tuples(m.max(1), a).filter(move |_| m > 0).map(|t| t.into_iter().map(usize::from).collect())
}

/// First tuple sequence of `r` that `f` maps outside `r`.
pub fn find_violation(f: &PartialOperation, r: &Relation) -> Result<Option<Witness>> {
    if f.domain() != r.domain() {
        return arg("operation and relation have different domains");
    }
    for seq in sequences(r.len(), f.arity()) {
        let rows: Vec<&[u8]> = seq.iter().map(|&i| r.tuples()[i].as_slice()).collect();
        if let Some(img) = f.apply(&rows) {
            if !r.contains(&img) {
                return Ok(Some(Witness {
                    operation: f.clone(),
                    rows: rows.iter().map(|x| x.to_vec()).collect(),
                    image: img,
                    relation: "R".into(),
                }));
            }
        }
    }
    Ok(None)
}

pub fn preserves(f: &PartialOperation, r: &Relation) -> Result<bool> {
    Ok(find_violation(f, r)?.is_none())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolymorphismResult {
    /// Exactly the polymorphisms, in lexicographic table order.
    Complete(Vec<PartialOperation>),
    /// The budget ran out; `found` is a subset of the answer.
    Unknown { found: Vec<PartialOperation>, nodes: u64 },
}

/// Column tuples of every `a`-sequence of tuples of `g`.
fn sequence_columns(g: &Relation, a: usize) -> Vec<Vec<Vec<u8>>> {
    sequences(g.len(), a)
        .map(|seq| (0..g.arity()).map(|p| seq.iter().map(|&i| g.tuples()[i][p]).collect()).collect())
        .collect()
}

/// Constraint network whose variables are the given points of `D^a` and whose
/// solutions are the maps on those points preserving every member of `lang`.
fn preservation_network<'a>(lang: &'a ConstraintLanguage, points: &[Vec<u8>], cols: &[(&'a Relation, Vec<Vec<Vec<u8>>>)]) -> Network<'a> {
    let index: HashMap<&[u8], usize> = points.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    let mut cons: Vec<(&Relation, Vec<usize>)> = Vec::new();
    for (g, seqs) in cols {
        for seq in seqs {
            let idx: Option<Vec<usize>> = seq.iter().map(|c| index.get(c.as_slice()).copied()).collect();
            if let Some(idx) = idx {
                cons.push((g, idx));
            }
        }
    }
    cons.sort();
    cons.dedup();
    Network::new(lang.domain(), points.len(), cons)
}

pub fn enumerate_polymorphisms(lang: &ConstraintLanguage, a: usize, max_nodes: u64) -> Result<PolymorphismResult> {
    if a == 0 {
        return arg("arity must be at least 1");
    }
    let k = lang.domain();
    if (k as f64).powi(a as i32) > 4096.0 {
        return Err(CspError::Unsupported(format!("D^{a} over k={k} has too many points")));
    }
    let points: Vec<Vec<u8>> = all_tuples(k, a).collect();
    let cols: Vec<(&Relation, Vec<Vec<Vec<u8>>>)> = lang.iter().map(|(_, g)| (g, sequence_columns(g, a))).collect();
    let net = preservation_network(lang, &points, &cols);
    let mut found = Vec::new();
    let mut budget = Budget::new(max_nodes, None);
    let res = net.for_each_solution(&mut budget, |table| {
        found.push(PartialOperation::total(k, a, table).expect("table over all points"));
        true
    });
    found.sort_by_key(|x| x.table());
    match res {
        Ok(_) => Ok(PolymorphismResult::Complete(found)),
        Err(CspError::Budget(_)) => Ok(PolymorphismResult::Unknown { found, nodes: budget.nodes }),
        Err(e) => Err(e),
    }
}

/// Decides `pPol(Γ) ⊆ pPol(R)` for `|R| <= 3`, returning a violating partial
/// operation when the inclusion fails.
///
/// A violation, if any exists, is witnessed at some arity `a <= |R|` by a
/// sequence of tuples of `R` and an operation defined exactly on the columns
/// of that sequence. The search therefore ranges over sequences and solves a
/// small constraint network per sequence.
pub fn violating_partial_op(r: &Relation, lang: &ConstraintLanguage) -> Result<Option<Witness>> {
    violating_partial_op_with(r, lang, Mode::Auto, DEFAULT_NODE_BUDGET)
}

pub fn violating_partial_op_with(r: &Relation, lang: &ConstraintLanguage, mode: Mode, max_nodes: u64) -> Result<Option<Witness>> {
    let m = r.len();
    if m > 3 {
        return Err(CspError::Unsupported(format!("violating_partial_op needs |R| <= 3, got {m}")));
    }
    if r.domain() != lang.domain() {
        return arg("relation and language have different domains");
    }
    let k = r.domain();
    let mut candidates = Vec::new();
    for a in 1..=m {
        candidates.extend(sequences(m, a));
    }
    let cols_by_arity: Vec<Vec<(&Relation, Vec<Vec<Vec<u8>>>)>> =
        (0..=m).map(|a| lang.iter().map(|(_, g)| (g, sequence_columns(g, a))).collect()).collect();

    let found = par::find_map_first(mode, &candidates, |seq| {
        let a = seq.len();
        let rows: Vec<&[u8]> = seq.iter().map(|&i| r.tuples()[i].as_slice()).collect();
        let columns: Vec<Vec<u8>> = (0..r.arity()).map(|p| rows.iter().map(|t| t[p]).collect()).collect();
        let mut points = columns.clone();
        points.sort();
        points.dedup();
        let net = preservation_network(lang, &points, &cols_by_arity[a]);
        let pos: Vec<usize> = columns.iter().map(|c| points.binary_search(c).expect("column is a point")).collect();
        let mut hit = None;
        let mut budget = Budget::new(max_nodes, None);
        let res = net.for_each_solution(&mut budget, |vals| {
            let image: Vec<u8> = pos.iter().map(|&i| vals[i]).collect();
            if r.contains(&image) {
                return true;
            }
            let map = points.iter().cloned().zip(vals.iter().copied()).collect();
            let operation = PartialOperation::new(k, a, map).expect("values within domain");
            hit = Some(Witness { operation, rows: rows.iter().map(|t| t.to_vec()).collect(), image, relation: "R".into() });
            false
        });
        match res {
            Err(e) => Some(Err(e)),
            Ok(_) => hit.map(Ok),
        }
    });
    found.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{constant_relation, eq_relation, r_b};

    fn lang_of(rels: Vec<(&str, Relation)>) -> ConstraintLanguage {
        let k = rels.first().map_or(2, |(_, r)| r.domain());
        ConstraintLanguage::from_relations(k, rels.into_iter().map(|(n, r)| (n.to_string(), r))).unwrap()
    }

    #[test]
    fn min_breaks_rb() {
        let min = PartialOperation::from_fn(2, 2, |t| t[0].min(t[1])).unwrap();
        let w = find_violation(&min, &r_b()).unwrap().unwrap();
        assert_eq!(w.image, vec![0, 0, 0, 1, 0, 0, 0, 1]);
        assert!(w.replays(&r_b()));
        assert!(!preserves(&min, &r_b()).unwrap());
    }

    #[test]
    fn trivial_preservation() {
        for i in 0..3 {
            let p = PartialOperation::projection(3, 3, i).unwrap();
            assert!(preserves(&p, &crate::relation::make_rd(3).unwrap()).unwrap());
        }
        let c = PartialOperation::from_fn(3, 1, |_| 2).unwrap();
        assert!(preserves(&c, &constant_relation(3, 2).unwrap()).unwrap());
    }

    #[test]
    fn polymorphism_counts() {
        let empty = ConstraintLanguage::new(2);
        match enumerate_polymorphisms(&empty, 2, u64::MAX).unwrap() {
            PolymorphismResult::Complete(v) => assert_eq!(v.len(), 16),
            other => panic!("{other:?}"),
        }
        let eq = lang_of(vec![("E", eq_relation(2).unwrap())]);
        match enumerate_polymorphisms(&eq, 1, u64::MAX).unwrap() {
            PolymorphismResult::Complete(v) => assert_eq!(v.len(), 4),
            other => panic!("{other:?}"),
        }
        // Oracle: check the four unary Boolean maps directly.
        let expected = (0..4u8)
            .filter(|code| {
                let f = PartialOperation::total(2, 1, &[code & 1, code >> 1]).unwrap();
                preserves(&f, &r_b()).unwrap()
            })
            .count();
        let rb = lang_of(vec![("R", r_b())]);
        match enumerate_polymorphisms(&rb, 1, u64::MAX).unwrap() {
            PolymorphismResult::Complete(v) => {
                assert_eq!(v.len(), expected);
                assert!(v.contains(&PartialOperation::projection(2, 1, 0).unwrap()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn budget_gives_unknown() {
        let empty = ConstraintLanguage::new(3);
        assert!(matches!(enumerate_polymorphisms(&empty, 2, 100).unwrap(), PolymorphismResult::Unknown { .. }));
    }

    #[test]
    fn violating_examples() {
        let rb = lang_of(vec![("R", r_b())]);
        assert_eq!(violating_partial_op(&r_b(), &rb).unwrap(), None);

        let c0 = lang_of(vec![("c0", constant_relation(2, 0).unwrap())]);
        let one = Relation::from_rows(2, &[&[1]]).unwrap();
        let w = violating_partial_op(&one, &c0).unwrap().unwrap();
        assert!(w.replays(&one));
        assert!(preserves(&w.operation, &constant_relation(2, 0).unwrap()).unwrap());

        let big = crate::relation::Relation::full(2, 2).unwrap();
        assert!(matches!(violating_partial_op(&big, &rb), Err(CspError::Unsupported(_))));
    }

    #[test]
    fn modes_return_same_witness() {
        let c0 = lang_of(vec![("c0", constant_relation(3, 0).unwrap())]);
        let r = Relation::from_rows(3, &[&[1, 2], &[2, 0]]).unwrap();
        let a = violating_partial_op_with(&r, &c0, Mode::Auto, DEFAULT_NODE_BUDGET).unwrap();
        let b = violating_partial_op_with(&r, &c0, Mode::Sequential, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(a, b);
    }
}
