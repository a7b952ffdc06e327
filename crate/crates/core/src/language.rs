use crate::error::{arg, Result};
use crate::relation::{all_tuples, constant_relation, full_mask, unary_name, unary_relation, Relation, ValueSet};
use std::collections::BTreeMap;

/// A named set of relations over one shared domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintLanguage {
    domain: usize,
    relations: BTreeMap<String, Relation>,
}

impl ConstraintLanguage {
    pub fn new(domain: usize) -> Self {
        ConstraintLanguage { domain, relations: BTreeMap::new() }
    }

    pub fn from_relations(domain: usize, rels: impl IntoIterator<Item = (String, Relation)>) -> Result<Self> {
        let mut lang = Self::new(domain);
        for (name, r) in rels {
            lang.insert(name, r)?;
        }
        Ok(lang)
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn insert(&mut self, name: impl Into<String>, r: Relation) -> Result<()> {
        let name = name.into();
        if r.domain() != self.domain {
            return arg(format!("relation {name} has domain {} but language has {}", r.domain(), self.domain));
        }
        if name == "eq" || name == "false" {
            return arg(format!("relation name {name} is reserved"));
        }
        self.relations.insert(name, r);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Relation)> {
        self.relations.iter()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Name of a member structurally equal to `r`, if any.
    pub fn find(&self, r: &Relation) -> Option<&str> {
        self.relations.iter().find(|(_, x)| *x == r).map(|(n, _)| n.as_str())
    }

    /// Name of the unary member with value set `mask`, if any.
    pub fn find_unary(&self, mask: ValueSet) -> Option<&str> {
        let target = unary_relation(self.domain, mask).ok()?;
        self.find(&target)
    }

    /// True when every unary relation over the domain is a member.
    pub fn is_ultraconservative(&self) -> bool {
        (0..=full_mask(self.domain)).all(|m| self.find_unary(m).is_some())
    }

    /// Adds every unary relation (all of 2^D) that is not yet present.
    pub fn with_all_unary(mut self) -> Self {
        for mask in 0..=full_mask(self.domain) {
            if self.find_unary(mask).is_none() {
                let r = unary_relation(self.domain, mask).expect("mask within domain");
                self.relations.insert(unary_name(mask), r);
            }
        }
        self
    }

    pub fn merged(&self, other: &ConstraintLanguage) -> Result<Self> {
        let mut out = self.clone();
        for (n, r) in other.iter() {
            out.insert(n.clone(), r.clone())?;
        }
        Ok(out)
    }
}

/// The language 2^D of all unary relations.
pub fn all_unary(k: usize) -> ConstraintLanguage {
    ConstraintLanguage::new(k).with_all_unary()
}

/// Constants c_0..c_{k-1}.
pub fn constants(k: usize) -> Result<ConstraintLanguage> {
    let rels = (0..k as u8).map(|d| Ok((format!("c{d}"), constant_relation(k, d)?)));
    ConstraintLanguage::from_relations(k, rels.collect::<Result<Vec<_>>>()?)
}

/// Boolean k-SAT language: one relation `B^kk \ {t}` per excluded tuple `t`,
/// named `sat_<bits of t>`.
pub fn make_satk(kk: usize) -> Result<ConstraintLanguage> {
    if kk < 3 {
        return arg(format!("make_satk needs clause width >= 3, got {kk}"));
    }
    if kk > 16 {
        return arg("clause width above 16 is not supported");
    }
    let mut lang = ConstraintLanguage::new(2);
    for excluded in all_tuples(2, kk) {
        let name: String = excluded.iter().map(|v| char::from(b'0' + v)).collect();
        let r = Relation::new(2, kk, all_tuples(2, kk).filter(|t| *t != excluded))?;
        lang.insert(format!("sat_{name}"), r)?;
    }
    Ok(lang)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satk() {
        let l = make_satk(3).unwrap();
        assert_eq!(l.len(), 8);
        assert!(l.iter().all(|(_, r)| r.len() == 7 && r.arity() == 3));
        let r = l.get("sat_000").unwrap();
        assert!(r.contains(&[1, 0, 0]) && !r.contains(&[0, 0, 0]));
        assert!(make_satk(2).is_err());
    }

    #[test]
    fn unary_languages() {
        let l = all_unary(3);
        assert_eq!(l.len(), 8);
        assert!(l.is_ultraconservative());
        assert_eq!(l.find_unary(0b010), Some("c1"));
        assert!(!constants(3).unwrap().is_ultraconservative());
    }

    #[test]
    fn domain_mismatch_rejected() {
        let mut l = ConstraintLanguage::new(3);
        assert!(l.insert("R", crate::relation::r_b()).is_err());
        assert!(l.insert("eq", crate::relation::eq_relation(3).unwrap()).is_err());
    }
}
