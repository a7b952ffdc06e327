use crate::error::{arg, Result};
use crate::relation::Relation;

/// Total assignment: entry `i` is the value of variable `x_{i+1}`.
pub type Assignment = Vec<u8>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    /// Index into the instance's relation table.
    pub rel: usize,
    pub args: Vec<usize>,
}

/// A CSP instance with variables `0..num_vars` and a local relation table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    domain: usize,
    num_vars: usize,
    relations: Vec<(String, Relation)>,
    constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(domain: usize, num_vars: usize) -> Self {
        Instance { domain, num_vars, relations: Vec::new(), constraints: Vec::new() }
    }

    /// The single-variable instance with one constraint over an empty relation.
    pub fn canonical_unsat(domain: usize, arity: usize) -> Self {
        let mut inst = Instance::new(domain, 1);
        let rel = Relation::empty(domain, arity).expect("valid domain");
        let idx = inst.add_relation("empty", rel).expect("fresh table");
        inst.constraints.push(Constraint { rel: idx, args: vec![0; arity] });
        inst
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn relations(&self) -> &[(String, Relation)] {
        &self.relations
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn relation(&self, c: &Constraint) -> &Relation {
        &self.relations[c.rel].1
    }

    pub fn relation_name(&self, c: &Constraint) -> &str {
        &self.relations[c.rel].0
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|(n, _)| n == name)
    }

    /// Registers a relation. Re-registering an equal relation under the same
    /// name returns the existing index.
    pub fn add_relation(&mut self, name: impl Into<String>, r: Relation) -> Result<usize> {
        let name = name.into();
        if r.domain() != self.domain {
            return arg(format!("relation {name} has domain {} but instance has {}", r.domain(), self.domain));
        }
        if let Some(i) = self.relation_index(&name) {
            if self.relations[i].1 == r {
                return Ok(i);
            }
            return arg(format!("relation name {name} registered twice with different contents"));
        }
        self.relations.push((name, r));
        Ok(self.relations.len() - 1)
    }

    pub fn add_constraint(&mut self, rel: usize, args: Vec<usize>) -> Result<()> {
        let Some((name, r)) = self.relations.get(rel) else {
            return arg(format!("relation index {rel} not registered"));
        };
        if r.arity() != args.len() {
            return arg(format!("constraint over {name} has {} arguments, arity is {}", args.len(), r.arity()));
        }
        if let Some(&v) = args.iter().find(|&&v| v >= self.num_vars) {
            return arg(format!("variable index {} beyond {} variables", v + 1, self.num_vars));
        }
        self.constraints.push(Constraint { rel, args });
        Ok(())
    }

    pub fn add_constraint_named(&mut self, name: &str, args: Vec<usize>) -> Result<()> {
        let Some(rel) = self.relation_index(name) else {
            return arg(format!("unknown relation {name}"));
        };
        self.add_constraint(rel, args)
    }

    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        first
    }

    /// Index of the first violated constraint, or `None` if `a` is a model.
    pub fn first_violation(&self, a: &[u8]) -> Option<usize> {
        if a.len() != self.num_vars || a.iter().any(|&v| v as usize >= self.domain) {
            return Some(usize::MAX);
        }
        self.constraints.iter().position(|c| {
            let t: Vec<u8> = c.args.iter().map(|&x| a[x]).collect();
            !self.relation(c).contains(&t)
        })
    }

    pub fn is_model(&self, a: &[u8]) -> bool {
        self.first_violation(a).is_none()
    }

    /// Contains a constraint over an empty relation.
    pub fn has_empty_constraint(&self) -> bool {
        self.constraints.iter().any(|c| self.relation(c).is_empty())
    }

    /// Number of constraints each variable occurs in.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vars];
        for c in &self.constraints {
            let mut vs = c.args.clone();
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                deg[v] += 1;
            }
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Largest number of argument positions any variable fills.
    pub fn max_occurrences(&self) -> usize {
        let mut occ = vec![0; self.num_vars];
        for c in &self.constraints {
            for &a in &c.args {
                occ[a] += 1;
            }
        }
        occ.into_iter().max().unwrap_or(0)
    }

    /// Drops relations no constraint refers to and renumbers the rest.
    pub fn prune_relations(&mut self) {
        let mut used = vec![false; self.relations.len()];
        for c in &self.constraints {
            used[c.rel] = true;
        }
        let mut remap = vec![usize::MAX; self.relations.len()];
        let mut kept = Vec::new();
        for (i, r) in std::mem::take(&mut self.relations).into_iter().enumerate() {
            if used[i] {
                remap[i] = kept.len();
                kept.push(r);
            }
        }
        self.relations = kept;
        for c in &mut self.constraints {
            c.rel = remap[c.rel];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::r_b;

    #[test]
    fn build_and_check() {
        let mut inst = Instance::new(2, 8);
        let r = inst.add_relation("R", r_b()).unwrap();
        inst.add_constraint(r, (0..8).collect()).unwrap();
        assert!(inst.is_model(&[0, 0, 1, 1, 1, 0, 0, 1]));
        assert_eq!(inst.first_violation(&[0; 8]), Some(0));
        assert!(inst.add_constraint(r, vec![0; 7]).is_err());
        assert!(inst.add_constraint(r, vec![8; 8]).is_err());
        assert!(inst.add_relation("R", crate::relation::r_neq2()).is_err());
        assert_eq!(inst.degrees(), vec![1; 8]);
    }

    #[test]
    fn unsat_shape() {
        let u = Instance::canonical_unsat(3, 5);
        assert_eq!(u.num_vars(), 1);
        assert!(u.has_empty_constraint());
        assert_eq!(u.constraints()[0].args.len(), 5);
    }
}
