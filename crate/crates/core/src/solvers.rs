//! Satisfiability procedures: an exhaustive oracle, a baseline that branches
//! on the tuples of three-tuple constraints, and the anchored branching
//! algorithm for R_D with its pruning rules.

use crate::error::{arg, CspError, Result};
use crate::instance::{Assignment, Instance};
use crate::relation::{full_mask, make_rd, Relation, ValueSet};
use crate::search::{Budget, Network};
use serde::Serialize;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub status: Status,
    pub model: Option<Assignment>,
    pub node_count: u64,
    pub wall_time: Duration,
    pub warnings: Vec<String>,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_nodes: 200_000_000, time_limit: None }
    }
}

impl SolverConfig {
    fn budget(&self) -> Budget {
        Budget::new(self.max_nodes, self.time_limit)
    }
}

fn network(inst: &Instance) -> Network<'_> {
    let cons = inst.constraints().iter().map(|c| (inst.relation(c), c.args.clone()));
    Network::new(inst.domain(), inst.num_vars(), cons)
}

fn verified(inst: &Instance, model: Option<Assignment>) -> Result<Option<Assignment>> {
    if let Some(m) = &model {
        if let Some(c) = inst.first_violation(m) {
            return Err(CspError::Internal(format!("model violates constraint {c}")));
        }
    }
    Ok(model)
}

/// Exact satisfiability by exhaustive backtracking. Partial assignments are
/// abandoned only once some constraint has no compatible tuple left.
pub fn brute_force(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let mut budget = cfg.budget();
    let model = verified(inst, network(inst).first_solution(&mut budget)?)?;
    Ok(SolveResult {
        status: if model.is_some() { Status::Sat } else { Status::Unsat },
        model,
        node_count: budget.nodes,
        wall_time: start.elapsed(),
        warnings: Vec::new(),
    })
}

/// Number of models.
pub fn count_models(inst: &Instance, cfg: &SolverConfig) -> Result<u64> {
    let mut budget = cfg.budget();
    let mut n = 0;
    network(inst).for_each_solution(&mut budget, |_| {
        n += 1;
        true
    })?;
    Ok(n)
}

/// The anchor variables `z_0..z_{k-1}`, numbered after the instance's own
/// variables; `z_d` is fixed to `d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorSet {
    pub first: usize,
    pub k: usize,
}

impl AnchorSet {
    pub fn anchor(&self, d: u8) -> usize {
        self.first + d as usize
    }

    pub fn value(&self, node: usize) -> Option<u8> {
        (node >= self.first && node < self.first + self.k).then(|| (node - self.first) as u8)
    }
}

#[derive(Clone)]
struct State {
    parent: Vec<usize>,
}

impl State {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }
}

struct Brancher<'a> {
    inst: &'a Instance,
    anchors: AnchorSet,
    allowed: Vec<ValueSet>,
    /// Non-unary constraints as (relation, args).
    cons: Vec<(&'a Relation, &'a [usize])>,
    var_cons: Vec<Vec<usize>>,
    rd: bool,
    prune_limit: usize,
    three_choice: Vec<bool>,
}

impl<'a> Brancher<'a> {
    fn value(&self, st: &mut State, x: usize) -> Option<u8> {
        let r = st.find(x);
        self.anchors.value(r)
    }

    fn row_fits(&self, st: &mut State, ci: usize, row: &[u8]) -> bool {
        let (_, args) = self.cons[ci];
        let mut seen: Vec<(usize, u8)> = Vec::new();
        for (&x, &v) in args.iter().zip(row) {
            if self.allowed[x] & (1 << v) == 0 {
                return false;
            }
            let root = st.find(x);
            if let Some(fixed) = self.anchors.value(root) {
                if fixed != v {
                    return false;
                }
            } else if let Some(&(_, w)) = seen.iter().find(|(r, _)| *r == root) {
                if w != v {
                    return false;
                }
            } else {
                seen.push((root, v));
            }
        }
        true
    }

    /// Fixes every variable of constraint `ci` to `row`, then checks the
    /// constraints that became fully fixed.
    fn apply(&self, st: &mut State, ci: usize, row: &[u8]) -> bool {
        let (_, args) = self.cons[ci];
        let mut touched = Vec::new();
        for (&x, &v) in args.iter().zip(row) {
            let root = st.find(x);
            if self.anchors.value(root).is_none() {
                st.parent[root] = self.anchors.anchor(v);
                touched.push(x);
            }
        }
        let mut check: Vec<usize> = touched.iter().flat_map(|&x| self.var_cons[x].iter().copied()).collect();
        check.sort_unstable();
        check.dedup();
        check.into_iter().all(|cj| self.satisfied_if_fixed(st, cj))
    }

    fn satisfied_if_fixed(&self, st: &mut State, ci: usize) -> bool {
        let (rel, args) = self.cons[ci];
        let mut t = Vec::with_capacity(args.len());
        for &x in args {
            match self.value(st, x) {
                Some(v) => t.push(v),
                None => return true,
            }
        }
        rel.contains(&t)
    }

    fn first_unresolved(&self, st: &mut State) -> Option<usize> {
        (0..self.cons.len()).find(|&ci| self.cons[ci].1.iter().any(|&x| self.value(st, x).is_none()))
    }

    fn search(&self, st: &mut State, budget: &mut Budget) -> Result<Option<State>> {
        budget.tick()?;
        loop {
            let Some(ci) = self.first_unresolved(st) else {
                return Ok(Some(st.clone()));
            };
            let (rel, args) = self.cons[ci];
            if self.rd {
                let mut roots: Vec<usize> = args.iter().map(|&x| st.find(x)).collect();
                roots.sort_unstable();
                let crowded = roots.chunk_by(|a, b| a == b).any(|g| g.len() > self.prune_limit);
                if crowded {
                    return Ok(None);
                }
                let vals: Vec<Option<u8>> = args.iter().map(|&x| self.value(st, x)).collect();
                let forced = (0..args.len()).find_map(|p| if self.three_choice[p] { vals[p].map(|v| (p, v)) } else { None });
                if let Some((p, v)) = forced {
                    let Some(row) = rel.tuples().iter().find(|t| t[p] == v) else {
                        return Ok(None);
                    };
                    if !self.row_fits(st, ci, row) || !self.apply(st, ci, row) {
                        return Ok(None);
                    }
                    continue;
                }
            }
            for row in rel.tuples() {
                if !self.row_fits(st, ci, row) {
                    continue;
                }
                let mut child = st.clone();
                if !self.apply(&mut child, ci, row) {
                    continue;
                }
                if let Some(done) = self.search(&mut child, budget)? {
                    return Ok(Some(done));
                }
            }
            return Ok(None);
        }
    }
}

fn run_branching(inst: &Instance, cfg: &SolverConfig, rd: Option<&Relation>) -> Result<SolveResult> {
    let start = Instant::now();
    let k = inst.domain();
    let n = inst.num_vars();
    let mut allowed = vec![full_mask(k); n];
    let mut cons = Vec::new();
    let mut trivially_unsat = false;
    for c in inst.constraints() {
        let r = inst.relation(c);
        match r.arity() {
            0 => trivially_unsat |= r.is_empty(),
            1 => allowed[c.args[0]] &= r.value_set_or_empty(),
            _ => {
                if let Some(rd) = rd {
                    if r != rd && !r.is_empty() {
                        return arg(format!("constraint over {} is not R_D", inst.relation_name(c)));
                    }
                } else if r.len() > 3 {
                    return arg(format!("relation {} has {} tuples; at most 3 allowed", inst.relation_name(c), r.len()));
                }
                cons.push((r, c.args.as_slice()));
            }
        }
    }
    let mut var_cons = vec![Vec::new(); n];
    for (ci, (_, args)) in cons.iter().enumerate() {
        for &x in args.iter() {
            if var_cons[x].last() != Some(&ci) {
                var_cons[x].push(ci);
            }
        }
    }
    let three_choice = match rd {
        Some(r) => (0..r.arity()).map(|i| r.value_set(i).count_ones() == 3).collect(),
        None => Vec::new(),
    };
    let anchors = AnchorSet { first: n, k };
    let b = Brancher { inst, anchors, allowed, cons, var_cons, rd: rd.is_some(), prune_limit: k * k, three_choice };
    let mut budget = cfg.budget();
    let mut warnings = Vec::new();
    if rd.is_some() && k < 5 {
        warnings.push(format!(
            "k = {k}: the anchored progress bound needs k >= 5; branching still fixes every variable of the chosen constraint"
        ));
    }
    let outcome = if trivially_unsat || b.allowed.contains(&0) {
        budget.tick()?;
        None
    } else {
        let mut st = State { parent: (0..n + k).collect() };
        b.search(&mut st, &mut budget)?
    };
    let model = outcome.map(|mut st| {
        (0..n)
            .map(|x| match b.value(&mut st, x) {
                Some(v) => v,
                None => b.allowed[x].trailing_zeros() as u8,
            })
            .collect::<Vec<u8>>()
    });
    let model = verified(b.inst, model)?;
    Ok(SolveResult {
        status: if model.is_some() { Status::Sat } else { Status::Unsat },
        model,
        node_count: budget.nodes,
        wall_time: start.elapsed(),
        warnings,
    })
}

/// Branches on the tuples of the first unresolved constraint. Every
/// non-unary relation must have at most three tuples.
pub fn branch_generic(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult> {
    run_branching(inst, cfg, None)
}

/// The anchored branching algorithm for instances over R_D and unary
/// relations: a constraint in which one class fills more than k² positions
/// is unsatisfiable, and a constraint with a fixed variable in a 3-choice
/// position is resolved without branching.
pub fn branch_rd(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult> {
    let k = inst.domain();
    if k < 2 {
        return arg("branch_rd needs k >= 2");
    }
    let rd = make_rd(k)?;
    run_branching(inst, cfg, Some(&rd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{constant_relation, r_b, unary_relation};

    fn rb_instance(n: usize, cons: &[Vec<usize>]) -> Instance {
        let mut inst = Instance::new(2, n);
        let r = inst.add_relation("R", r_b()).unwrap();
        for c in cons {
            inst.add_constraint(r, c.clone()).unwrap();
        }
        inst
    }

    #[test]
    fn oracle_basics() {
        let cfg = SolverConfig::default();
        assert!(brute_force(&Instance::new(2, 3), &cfg).unwrap().is_sat());
        assert!(!brute_force(&Instance::canonical_unsat(2, 4), &cfg).unwrap().is_sat());
        let one = rb_instance(8, &[(0..8).collect()]);
        assert!(brute_force(&one, &cfg).unwrap().is_sat());
        assert_eq!(count_models(&one, &cfg).unwrap(), 3);
    }

    #[test]
    fn oracle_budget() {
        let cfg = SolverConfig { max_nodes: 10, time_limit: None };
        let inst = Instance::new(3, 20);
        assert!(matches!(count_models(&inst, &cfg), Err(CspError::Budget(_))));
    }

    #[test]
    fn generic_node_counts() {
        let cfg = SolverConfig::default();
        let mut inst = Instance::new(2, 2);
        let u = inst.add_relation("c1", constant_relation(2, 1).unwrap()).unwrap();
        inst.add_constraint(u, vec![0]).unwrap();
        let res = branch_generic(&inst, &cfg).unwrap();
        assert!(res.is_sat());
        assert_eq!(res.node_count, 1);
        let one = rb_instance(8, &[(0..8).collect()]);
        let res = branch_generic(&one, &cfg).unwrap();
        assert!(res.is_sat() && res.node_count <= 4);
        let bad = Instance::new(2, 2);
        let mut bad = bad;
        let full = bad.add_relation("F", Relation::full(2, 2).unwrap()).unwrap();
        bad.add_constraint(full, vec![0, 1]).unwrap();
        assert!(branch_generic(&bad, &cfg).is_err());
    }

    #[test]
    fn rd_unary_only_and_pruning() {
        let cfg = SolverConfig::default();
        let mut inst = Instance::new(5, 3);
        let u = inst.add_relation("u", unary_relation(5, 0b110).unwrap()).unwrap();
        inst.add_constraint(u, vec![1]).unwrap();
        let res = branch_rd(&inst, &cfg).unwrap();
        assert!(res.is_sat());
        assert_eq!(res.node_count, 1);

        // x0 fills k^2 + 1 positions of an R_D(3) constraint.
        let k = 3;
        let mut inst = Instance::new(k, 20);
        let r = inst.add_relation("R", make_rd(k).unwrap()).unwrap();
        let args: Vec<usize> = (0..27).map(|p| if p <= k * k { 0 } else { p - k * k }).collect();
        inst.add_constraint(r, args).unwrap();
        let res = branch_rd(&inst, &cfg).unwrap();
        assert!(!res.is_sat());
        assert_eq!(res.node_count, 1);
        assert!(!brute_force(&inst, &cfg).unwrap().is_sat());
        assert!(!res.warnings.is_empty());
    }
}
