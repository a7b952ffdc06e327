//! Mutable instance representation shared by the reductions: constraints can
//! be removed, variables identified or freshly introduced, and the result is
//! compacted back into an [`Instance`].

use crate::error::{CspError, Result};
use crate::instance::Instance;
use crate::relation::{unary_name, unary_relation, Relation, ValueSet};

#[derive(Clone, Debug)]
pub(crate) struct Work {
    pub k: usize,
    pub dead: Vec<bool>,
    /// Whether the variable occurred in a constraint of the input.
    pub used_in_input: Vec<bool>,
    /// Variables created during the reduction.
    pub fresh: Vec<bool>,
    /// The variable each retired variable was replaced by.
    pub alias: Vec<Option<usize>>,
    pub rels: Vec<(String, Relation)>,
    pub cons: Vec<Option<(usize, Vec<usize>)>>,
    pub unsat: bool,
    pub notes: Vec<String>,
}

impl Work {
    pub fn from_instance(inst: &Instance) -> Self {
        let n = inst.num_vars();
        let mut used = vec![false; n];
        let cons: Vec<Option<(usize, Vec<usize>)>> = inst
            .constraints()
            .iter()
            .map(|c| {
                for &a in &c.args {
                    used[a] = true;
                }
                Some((c.rel, c.args.clone()))
            })
            .collect();
        Work {
            k: inst.domain(),
            dead: vec![false; n],
            used_in_input: used,
            fresh: vec![false; n],
            alias: vec![None; n],
            rels: inst.relations().to_vec(),
            cons,
            unsat: inst.has_empty_constraint(),
            notes: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.dead.len()
    }

    pub fn rel_index(&mut self, name: &str, r: &Relation) -> Result<usize> {
        if let Some(i) = self.rels.iter().position(|(n, _)| n == name) {
            if &self.rels[i].1 != r {
                return Err(CspError::Internal(format!("relation name {name} reused with different contents")));
            }
            return Ok(i);
        }
        self.rels.push((name.to_string(), r.clone()));
        Ok(self.rels.len() - 1)
    }

    /// Index of the relation equal to `r`, registering it under `name` if absent.
    pub fn rel_index_by_value(&mut self, name: &str, r: &Relation) -> Result<usize> {
        match self.rels.iter().position(|(_, x)| x == r) {
            Some(i) => Ok(i),
            None => self.rel_index(name, r),
        }
    }

    pub fn add(&mut self, rel: usize, args: Vec<usize>) -> usize {
        self.cons.push(Some((rel, args)));
        self.cons.len() - 1
    }

    pub fn add_unary(&mut self, x: usize, mask: ValueSet) -> Result<()> {
        let r = unary_relation(self.k, mask)?;
        let idx = self.rel_index_by_value(&unary_name(mask), &r)?;
        self.add(idx, vec![x]);
        if mask == 0 {
            self.unsat = true;
        }
        Ok(())
    }

    pub fn remove(&mut self, ci: usize) {
        self.cons[ci] = None;
    }

    pub fn fresh(&mut self) -> usize {
        self.dead.push(false);
        self.used_in_input.push(false);
        self.fresh.push(true);
        self.alias.push(None);
        self.dead.len() - 1
    }

    /// Replaces every occurrence of `x` by `y` and retires `x`.
    pub fn substitute(&mut self, x: usize, y: usize) {
        if x == y {
            return;
        }
        for (_, args) in self.cons.iter_mut().flatten() {
            for a in args.iter_mut() {
                if *a == x {
                    *a = y;
                }
            }
        }
        self.dead[x] = true;
        self.alias[x] = Some(y);
    }

    /// The live variable `x` was eventually replaced by.
    pub fn resolve(&self, mut x: usize) -> usize {
        while let Some(y) = self.alias[x] {
            x = y;
        }
        x
    }

    /// Identifies `x` and `y` (as currently resolved).
    pub fn identify(&mut self, x: usize, y: usize) {
        let (x, y) = (self.resolve(x), self.resolve(y));
        self.substitute(y, x);
    }

    /// Moves every constraint whose relation equals `r` onto one table entry
    /// and returns its index.
    pub fn unify(&mut self, name: &str, r: &Relation) -> Result<usize> {
        let idx = self.rel_index_by_value(name, r)?;
        for (rel, _) in self.cons.iter_mut().flatten() {
            if self.rels[*rel].1 == *r {
                *rel = idx;
            }
        }
        Ok(idx)
    }

    /// Replaces the variable at `(ci, p)` by a fresh one.
    pub fn freshen(&mut self, ci: usize, p: usize) {
        let f = self.fresh();
        self.cons[ci].as_mut().expect("live constraint").1[p] = f;
    }

    /// Replaces constraint `ci` by constants fixing its variables to `row`.
    pub fn fix_to_row(&mut self, ci: usize, row: &[u8]) -> Result<()> {
        let args = self.args(ci).to_vec();
        self.remove(ci);
        let mut done: Vec<(usize, u8)> = Vec::new();
        for (&x, &v) in args.iter().zip(row) {
            if let Some(&(_, w)) = done.iter().find(|(y, _)| *y == x) {
                if w != v {
                    self.mark_unsat("a constraint row disagrees with itself");
                }
                continue;
            }
            done.push((x, v));
            self.add_unary(x, 1 << v)?;
        }
        Ok(())
    }

    pub fn args(&self, ci: usize) -> &[usize] {
        &self.cons[ci].as_ref().expect("live constraint").1
    }

    pub fn rel_of(&self, ci: usize) -> usize {
        self.cons[ci].as_ref().expect("live constraint").0
    }

    pub fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cons.len()).filter(|&i| self.cons[i].is_some())
    }

    /// Live constraints over relation `rel`.
    pub fn over(&self, rel: usize) -> Vec<usize> {
        self.live().filter(|&i| self.rel_of(i) == rel).collect()
    }

    pub fn is_unary(&self, ci: usize) -> bool {
        self.rels[self.rel_of(ci)].1.arity() == 1
    }

    /// Unary constraints on `x` with their value masks.
    pub fn unaries_of(&self, x: usize) -> Vec<(usize, ValueSet)> {
        self.live()
            .filter(|&ci| self.is_unary(ci) && self.args(ci)[0] == x)
            .map(|ci| (ci, self.rels[self.rel_of(ci)].1.value_set_or_empty()))
            .collect()
    }

    /// All (constraint, position) pairs holding `x`.
    pub fn occurrences(&self, x: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for ci in self.live() {
            for (p, &a) in self.args(ci).iter().enumerate() {
                if a == x {
                    out.push((ci, p));
                }
            }
        }
        out
    }

    /// Relation indices of constraints whose relation is neither `allowed`
    /// nor unary.
    pub fn check_shape(&self, allowed: &[usize], what: &str) -> Result<()> {
        for ci in self.live() {
            let r = self.rel_of(ci);
            if !allowed.contains(&r) && self.rels[r].1.arity() != 1 && !self.rels[r].1.is_empty() {
                return Err(CspError::Argument(format!(
                    "constraint over {} is not allowed in {what}",
                    self.rels[r].0
                )));
            }
        }
        Ok(())
    }

    /// Moves every constraint over `from` to relation `to`, reading the new
    /// arguments at `positions` of the old ones.
    pub fn reproject(&mut self, from: usize, to: usize, positions: &[usize]) {
        for (rel, args) in self.cons.iter_mut().flatten() {
            if *rel == from {
                *args = positions.iter().map(|&p| args[p]).collect();
                *rel = to;
            }
        }
    }

    /// Moves the constraints over `main` to `target` (registered as `name`),
    /// reading the old arguments at `positions`.
    pub fn retarget(&mut self, main: usize, name: &str, target: &Relation, positions: &[usize]) -> Result<()> {
        self.rels[main].0 = format!("#in:{name}");
        let idx = self.rel_index(name, target)?;
        self.reproject(main, idx, positions);
        Ok(())
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn mark_unsat(&mut self, why: &str) {
        if !self.unsat {
            self.note(format!("unsat detected ({why}), canonical unsat emitted"));
        }
        self.unsat = true;
    }

    /// Removes the unary constraints on fresh variables that occur in no
    /// other constraint: such a variable can take any value of their
    /// intersection, and none if it is empty.
    fn drop_unary_only_fresh(&mut self) {
        let n = self.num_vars();
        let mut only_unary = self.fresh.clone();
        let mut masks = vec![u32::MAX; n];
        let live: Vec<usize> = self.live().collect();
        for &ci in &live {
            let unary = self.is_unary(ci);
            for &a in self.args(ci) {
                if unary {
                    masks[a] &= self.rels[self.rel_of(ci)].1.value_set_or_empty();
                } else {
                    only_unary[a] = false;
                }
            }
        }
        for ci in live {
            if !self.is_unary(ci) {
                continue;
            }
            let a = self.args(ci)[0];
            if only_unary[a] {
                if masks[a] == 0 {
                    self.mark_unsat("a fresh variable has no value left");
                }
                self.remove(ci);
            }
        }
    }

    /// Builds the output instance. Variables are kept if they are live and
    /// either occur in an output constraint or were unconstrained input
    /// variables; constraints over empty relations or with `unsat` set yield
    /// the canonical unsatisfiable instance of arity `unsat_arity`.
    pub fn finish(mut self, unsat_arity: usize) -> (Instance, Vec<String>) {
        self.drop_unary_only_fresh();
        if self.unsat || self.live().any(|ci| self.rels[self.rel_of(ci)].1.is_empty()) {
            if !self.notes.iter().any(|n| n.contains("canonical unsat")) {
                self.notes.push("unsat detected, canonical unsat emitted".into());
            }
            return (Instance::canonical_unsat(self.k, unsat_arity), self.notes);
        }
        let n = self.num_vars();
        let mut used_out = vec![false; n];
        for ci in self.live() {
            for &a in self.args(ci) {
                used_out[a] = true;
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut count = 0;
        for v in 0..n {
            let keep = !self.dead[v] && (used_out[v] || (!self.fresh[v] && !self.used_in_input[v]));
            if keep {
                index[v] = count;
                count += 1;
            }
        }
        let mut inst = Instance::new(self.k, count);
        let mut rel_map = vec![usize::MAX; self.rels.len()];
        let live: Vec<usize> = self.live().collect();
        for ci in live {
            let (rel, args) = self.cons[ci].take().expect("live");
            if rel_map[rel] == usize::MAX {
                let (name, r) = &self.rels[rel];
                rel_map[rel] = inst.add_relation(name.clone(), r.clone()).expect("consistent table");
            }
            inst.add_constraint(rel_map[rel], args.iter().map(|&a| index[a]).collect()).expect("well-formed");
        }
        (inst, self.notes)
    }
}
