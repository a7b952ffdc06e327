//! Exhaustive backtracking over finite-domain constraint networks.
//!
//! Used by the oracle solver, formula evaluation and the partial-polymorphism
//! searches. Pruning only discards partial assignments that provably cannot be
//! extended, so enumeration stays exact.

use crate::error::{CspError, Result};
use crate::relation::{full_mask, Relation, ValueSet};
use std::time::{Duration, Instant};

/// Relations up to this size are checked for a compatible tuple on every
/// partial assignment; larger ones only once all their variables are set.
const FORWARD_CHECK_LIMIT: usize = 1024;

#[derive(Clone, Debug)]
pub struct Budget {
    pub nodes: u64,
    pub max_nodes: u64,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn new(max_nodes: u64, time: Option<Duration>) -> Self {
        Budget { nodes: 0, max_nodes, deadline: time.map(|t| Instant::now() + t) }
    }

    pub fn unlimited() -> Self {
        Budget::new(u64::MAX, None)
    }

    #[inline]
    pub fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(CspError::Budget(format!("more than {} search nodes", self.max_nodes)));
        }
        if self.nodes.is_multiple_of(4096) {
            if let Some(d) = self.deadline {
                if Instant::now() > d {
                    return Err(CspError::Budget("time limit reached".into()));
                }
            }
        }
        Ok(())
    }
}

enum Outcome {
    Continue,
    Found,
    Stop,
}

pub struct Network<'a> {
    k: usize,
    allowed: Vec<ValueSet>,
    cons: Vec<(&'a Relation, Vec<usize>)>,
    var_cons: Vec<Vec<usize>>,
    infeasible: bool,
    order: Vec<usize>,
    prefix: usize,
}

impl<'a> Network<'a> {
    /// Builds a network over `n` variables. Unary constraints are folded into
    /// per-variable value masks.
    pub fn new(k: usize, n: usize, constraints: impl IntoIterator<Item = (&'a Relation, Vec<usize>)>) -> Self {
        let mut allowed = vec![full_mask(k); n];
        let mut cons = Vec::new();
        let mut infeasible = false;
        for (r, args) in constraints {
            match args.len() {
                0 => infeasible |= r.is_empty(),
                1 => allowed[args[0]] &= r.value_set_or_empty(),
                _ => cons.push((r, args)),
            }
        }
        let mut var_cons = vec![Vec::new(); n];
        for (ci, (_, args)) in cons.iter().enumerate() {
            let mut vs = args.clone();
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                var_cons[v].push(ci);
            }
        }
        let mut net = Network { k, allowed, cons, var_cons, infeasible, order: Vec::new(), prefix: n };
        net.order = net.ordering(&(0..n).collect::<Vec<_>>(), &[]);
        net
    }

    /// Restricts variable `v` to the values in `mask`.
    pub fn restrict(&mut self, v: usize, mask: ValueSet) {
        self.allowed[v] &= mask;
    }

    /// Only the first `prefix` variables (in `head`) are enumerated; the rest
    /// need a single witness extension per head assignment.
    pub fn set_existential_tail(&mut self, head: &[usize]) {
        let tail: Vec<usize> = (0..self.allowed.len()).filter(|v| !head.contains(v)).collect();
        self.order = self.ordering(head, &tail);
        self.prefix = head.len();
    }

    /// Greedy maximum-cardinality ordering within each group.
    fn ordering(&self, first: &[usize], second: &[usize]) -> Vec<usize> {
        let n = self.allowed.len();
        let mut placed = vec![false; n];
        let mut weight = vec![0usize; n];
        let mut order = Vec::with_capacity(n);
        for group in [first, second] {
            let mut left: Vec<usize> = group.to_vec();
            while !left.is_empty() {
                let (pos, _) = left
                    .iter()
                    .enumerate()
                    .max_by(|(_, &a), (_, &b)| {
                        let ka = (weight[a], self.var_cons[a].len(), std::cmp::Reverse(a));
                        let kb = (weight[b], self.var_cons[b].len(), std::cmp::Reverse(b));
                        ka.cmp(&kb)
                    })
                    .expect("non-empty");
                let v = left.swap_remove(pos);
                placed[v] = true;
                order.push(v);
                for &ci in &self.var_cons[v] {
                    for &w in &self.cons[ci].1 {
                        if !placed[w] {
                            weight[w] += 1;
                        }
                    }
                }
            }
        }
        order
    }

    fn consistent(&self, ci: usize, value: &[u8], assigned: &[bool]) -> bool {
        let (r, args) = &self.cons[ci];
        if args.iter().all(|&a| assigned[a]) {
            let t: Vec<u8> = args.iter().map(|&a| value[a]).collect();
            return r.contains(&t);
        }
        if r.len() > FORWARD_CHECK_LIMIT {
            return true;
        }
        r.tuples().iter().any(|t| {
            args.iter().zip(t).all(|(&a, &tv)| {
                if assigned[a] {
                    value[a] == tv
                } else {
                    self.allowed[a] & (1 << tv) != 0
                }
            })
        })
    }

    /// Calls `visit` on every solution (or on one witness per head assignment
    /// when an existential tail is set). `visit` returns `false` to stop.
    /// Returns `true` when the enumeration ran to completion.
    pub fn for_each_solution(&self, budget: &mut Budget, mut visit: impl FnMut(&[u8]) -> bool) -> Result<bool> {
        if self.infeasible || self.allowed.contains(&0) {
            return Ok(true);
        }
        if self.cons.iter().any(|(r, _)| r.is_empty()) {
            return Ok(true);
        }
        let n = self.allowed.len();
        let mut value = vec![0u8; n];
        let mut assigned = vec![false; n];
        match self.rec(0, &mut value, &mut assigned, budget, &mut visit)? {
            Outcome::Stop => Ok(false),
            Outcome::Found => Ok(visit(&value)),
            Outcome::Continue => Ok(true),
        }
    }

    fn rec(
        &self,
        depth: usize,
        value: &mut Vec<u8>,
        assigned: &mut Vec<bool>,
        budget: &mut Budget,
        visit: &mut impl FnMut(&[u8]) -> bool,
    ) -> Result<Outcome> {
        if depth == self.order.len() {
            if depth > self.prefix {
                return Ok(Outcome::Found);
            }
            return Ok(if visit(value) { Outcome::Continue } else { Outcome::Stop });
        }
        let v = self.order[depth];
        for d in 0..self.k as u8 {
            if self.allowed[v] & (1 << d) == 0 {
                continue;
            }
            budget.tick()?;
            value[v] = d;
            assigned[v] = true;
            let ok = self.var_cons[v].iter().all(|&ci| self.consistent(ci, value, assigned));
            if ok {
                match self.rec(depth + 1, value, assigned, budget, visit)? {
                    Outcome::Continue => {}
                    Outcome::Found if depth >= self.prefix => {
                        assigned[v] = false;
                        return Ok(Outcome::Found);
                    }
                    Outcome::Found => {
                        if !visit(value) {
                            assigned[v] = false;
                            return Ok(Outcome::Stop);
                        }
                        if depth + 1 != self.prefix {
                            unreachable!("witness search only ends at the head boundary");
                        }
                    }
                    Outcome::Stop => {
                        assigned[v] = false;
                        return Ok(Outcome::Stop);
                    }
                }
            }
            assigned[v] = false;
        }
        Ok(Outcome::Continue)
    }

    /// First solution in search order.
    pub fn first_solution(&self, budget: &mut Budget) -> Result<Option<Vec<u8>>> {
        let mut found = None;
        self.for_each_solution(budget, |a| {
            found = Some(a.to_vec());
            false
        })?;
        Ok(found)
    }
}

impl Relation {
    pub(crate) fn value_set_or_empty(&self) -> ValueSet {
        if self.is_empty() {
            0
        } else {
            self.value_set(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{eq_relation, r_b};

    #[test]
    fn counts_rb_models() {
        let r = r_b();
        let net = Network::new(2, 8, [(&r, (0..8).collect())]);
        let mut count = 0;
        net.for_each_solution(&mut Budget::unlimited(), |_| {
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(count, 3);
    }

    #[test]
    fn existential_tail_projects() {
        // x0 = y = x1 with y existential: one witness per head assignment.
        let eq = eq_relation(3).unwrap();
        let mut net = Network::new(3, 3, [(&eq, vec![0, 2]), (&eq, vec![2, 1])]);
        net.set_existential_tail(&[0, 1]);
        let mut heads = Vec::new();
        net.for_each_solution(&mut Budget::unlimited(), |a| {
            heads.push((a[0], a[1]));
            true
        })
        .unwrap();
        heads.sort();
        assert_eq!(heads, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn budget_is_enforced() {
        let net = Network::new(3, 12, std::iter::empty());
        let mut b = Budget::new(100, None);
        let res = net.for_each_solution(&mut b, |_| true);
        assert!(matches!(res, Err(CspError::Budget(_))));
    }
}
