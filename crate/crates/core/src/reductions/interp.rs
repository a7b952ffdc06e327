//! pp-interpretations: simulating a language over a target domain `E` by
//! blocks of `d` variables over `D`, and the reductions built from them.

use super::report::{LvParams, Reduction, ReductionReport};
use super::work::Work;
use crate::error::{arg, CspError, Result};
use crate::extensions::detect_rb_extension;
use crate::formula::{Atom, AtomRel, PPFormula};
use crate::instance::Instance;
use crate::language::ConstraintLanguage;
use crate::relation::{mask_of, r_b, r_neq2, Relation, ValueSet};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interpretation {
    /// Block width.
    pub d: usize,
    /// The carrier `F ⊆ D^d`.
    pub carrier: Relation,
    /// The surjection `f: F → E`, keyed by carrier tuple.
    pub map: BTreeMap<Vec<u8>, u8>,
    /// The interpreted language, over `E = {0, .., |E|-1}`.
    pub target: ConstraintLanguage,
    /// Definition of `F` over the source language.
    pub carrier_def: PPFormula,
    /// For each target relation name, a definition of its preimage
    /// `f^{-1}(R)` (arity `d * ar(R)`).
    pub preimage_defs: BTreeMap<String, PPFormula>,
}

impl Interpretation {
    /// `{(w_1, .., w_n) ∈ F^n : (f(w_1), .., f(w_n)) ∈ R}` as a relation of
    /// arity `d * n` over the source domain.
    pub fn preimage(&self, r: &Relation) -> Result<Relation> {
        let mut fibre: Vec<Vec<&Vec<u8>>> = vec![Vec::new(); self.target.domain()];
        for (w, &e) in &self.map {
            fibre[e as usize].push(w);
        }
        let mut out = Vec::new();
        for t in r.tuples() {
            let mut partial: Vec<Vec<u8>> = vec![Vec::new()];
            for &e in t {
                partial = partial
                    .iter()
                    .flat_map(|p| fibre[e as usize].iter().map(move |w| [p.as_slice(), w.as_slice()].concat()))
                    .collect();
            }
            out.extend(partial);
        }
        Relation::new(self.carrier.domain(), self.d * r.arity(), out)
    }

    /// Checks that `f` is a total surjection on `F` and that every supplied
    /// formula evaluates (over `gamma`) to the relation it claims to define.
    pub fn validate(&self, gamma: &ConstraintLanguage) -> Result<()> {
        if self.carrier.arity() != self.d {
            return arg(format!("carrier has arity {}, block width is {}", self.carrier.arity(), self.d));
        }
        let keys: Vec<&Vec<u8>> = self.map.keys().collect();
        let tuples: Vec<&Vec<u8>> = self.carrier.tuples().iter().collect();
        if keys != tuples {
            return arg("the map is not defined on exactly the carrier");
        }
        let e = self.target.domain();
        if self.map.values().any(|&v| v as usize >= e) {
            return arg("the map leaves the target domain");
        }
        if mask_of(self.map.values().copied()).count_ones() as usize != e {
            return arg("the map is not surjective");
        }
        if self.carrier_def.arity() != self.d || self.carrier_def.evaluate(gamma)? != self.carrier {
            return arg("carrier definition does not evaluate to the carrier");
        }
        for (name, def) in &self.preimage_defs {
            let Some(r) = self.target.get(name) else {
                return arg(format!("definition for {name}, which the target language lacks"));
            };
            if def.evaluate(gamma)? != self.preimage(r)? {
                return arg(format!("definition of the preimage of {name} is wrong"));
            }
        }
        Ok(())
    }

    fn def_for(&self, r: &Relation, what: &str) -> Result<&PPFormula> {
        let name = self
            .target
            .find(r)
            .ok_or_else(|| CspError::Argument(format!("target language has no {what}")))?;
        self.preimage_defs
            .get(name)
            .ok_or_else(|| CspError::Argument(format!("no preimage definition for {name}")))
    }
}

/// Shrinks `F` to one tuple per value of `f: F → {0, 1}` by conjoining
/// two-element unary constraints per coordinate. Starting from the first
/// tuples `s`, `t` with values 0 and 1, each round keeps the tuples whose
/// coordinates lie in `{s_i, t_i}`; any third survivor `u` replaces the one
/// of `s`, `t` with the same value, which then fails the next round.
///
/// Returns `F'` and the per-coordinate masks with `F' = F ∩ Π masks`.
pub fn refine_two_tuple(f: &Relation, map: &BTreeMap<Vec<u8>, u8>) -> Result<(Relation, Vec<ValueSet>)> {
    let value = |w: &Vec<u8>| map.get(w).copied().ok_or_else(|| CspError::Argument("map is not total on F".into()));
    let first = |want: u8| -> Result<Option<Vec<u8>>> {
        for w in f.tuples() {
            if value(w)? == want {
                return Ok(Some(w.clone()));
            }
        }
        Ok(None)
    };
    let (Some(mut s), Some(mut t)) = (first(0)?, first(1)?) else {
        return arg("map does not attain both 0 and 1");
    };
    if f.tuples().iter().any(|w| map[w] > 1) {
        return arg("map leaves {0, 1}");
    }
    loop {
        let masks: Vec<ValueSet> = (0..f.arity()).map(|i| (1 << s[i]) | (1 << t[i])).collect();
        let inside = |w: &Vec<u8>| w.iter().zip(&masks).all(|(&v, &m)| m & (1 << v) != 0);
        let kept: Vec<Vec<u8>> = f.tuples().iter().filter(|w| inside(w)).cloned().collect();
        match kept.iter().find(|w| **w != s && **w != t) {
            None => return Ok((Relation::new(f.domain(), f.arity(), kept)?, masks)),
            Some(u) if map[u] == 0 => s = u.clone(),
            Some(u) => t = u.clone(),
        }
    }
}

/// Appends `def` to `atoms`, with its free variables mapped through `free`
/// and its bound variables numbered from `next_bound`.
fn instantiate(def: &PPFormula, free: &[usize], next_bound: &mut usize, atoms: &mut Vec<Atom>) {
    let map: Vec<usize> = (0..def.num_vars())
        .map(|v| if v < free.len() { free[v] } else { *next_bound + v - free.len() })
        .collect();
    *next_bound += def.bound.len();
    atoms.extend(def.remap_atoms(&map));
}

/// A pp-definition over `gamma` of an R^B-extension, built from a
/// pp-interpretation of R^B: the preimage of R^B on eight blocks, each block
/// restricted to the two-tuple refinement of the carrier.
pub fn build_rb_from_interpretation(gamma: &ConstraintLanguage, interp: &Interpretation) -> Result<PPFormula> {
    interp.validate(gamma)?;
    let pre = interp.def_for(&r_b(), "R^B member")?;
    let (_, masks) = refine_two_tuple(&interp.carrier, &interp.map)?;
    let d = interp.d;
    let nfree = 8 * d;
    let nbound = pre.bound.len() + 8 * interp.carrier_def.bound.len();
    let mut next = nfree;
    let mut atoms = Vec::new();
    instantiate(pre, &(0..nfree).collect::<Vec<_>>(), &mut next, &mut atoms);
    for j in 0..8 {
        let block: Vec<usize> = (j * d..(j + 1) * d).collect();
        instantiate(&interp.carrier_def, &block, &mut next, &mut atoms);
        for (i, &m) in masks.iter().enumerate() {
            let name = gamma
                .find_unary(m)
                .ok_or_else(|| CspError::Precondition("language lacks a two-element unary relation".into()))?;
            atoms.push(Atom::named(name, vec![block[i]]));
        }
    }
    let phi = PPFormula::with_counts("rb", nfree, nbound, atoms)?;
    let r = phi.evaluate(gamma)?;
    if detect_rb_extension(&r).is_none() {
        return Err(CspError::Internal("interpreted relation is not an R^B-extension".into()));
    }
    Ok(phi)
}

/// Reduces a Boolean instance over R≠≠ in which every variable occurs in at
/// most two constraints to an instance over `gamma`, through a
/// pp-interpretation with definitions of `f^{-1}(R≠≠)` and of the carrier.
///
/// Every variable becomes a block of `d` variables constrained by the
/// carrier definition; every constraint becomes an instance of the preimage
/// definition on the blocks. Bound variables become fresh variables and
/// equality atoms identify variables.
pub fn lv_reduce_3sat(inst: &Instance, gamma: &ConstraintLanguage, interp: &Interpretation) -> Result<Reduction> {
    let rnn = r_neq2();
    if inst.domain() != 2 {
        return arg("lv_reduce_3sat needs a Boolean instance");
    }
    for c in inst.constraints() {
        let r = inst.relation(c);
        if *r != rnn && !r.is_empty() {
            return arg(format!("constraint over {} is not over R≠≠", inst.relation_name(c)));
        }
    }
    if inst.max_occurrences() > 2 {
        return arg("a variable fills more than two argument positions");
    }
    interp.validate(gamma)?;
    if interp.target.domain() != 2 {
        return arg("the interpretation's target domain must be {0, 1}");
    }
    let phi1 = interp.def_for(&rnn, "R≠≠ member")?;
    let phi2 = &interp.carrier_def;
    let (d, n) = (interp.d, inst.num_vars());
    let mut w = Work::from_instance(&Instance::new(gamma.domain(), n * d));
    let blocks: Vec<Vec<usize>> = (0..n).map(|v| (v * d..(v + 1) * d).collect()).collect();
    let place = |w: &mut Work, def: &PPFormula, free: Vec<usize>| -> Result<()> {
        let mut vars = free;
        vars.extend((0..def.bound.len()).map(|_| w.fresh()));
        for atom in &def.atoms {
            let args: Vec<usize> = atom.args.iter().map(|&v| w.resolve(vars[v])).collect();
            match &atom.rel {
                AtomRel::Named(g) => {
                    let idx = w.rel_index(g, gamma.get(g).expect("checked by evaluation"))?;
                    w.add(idx, args);
                }
                AtomRel::Eq => w.identify(args[0], args[1]),
                AtomRel::False => w.mark_unsat("a definition contains false"),
            }
        }
        Ok(())
    };
    for b in &blocks {
        place(&mut w, phi2, b.clone())?;
    }
    for c in inst.constraints() {
        if inst.relation(c).is_empty() {
            w.mark_unsat("input contains an empty constraint");
            continue;
        }
        let free: Vec<usize> = c.args.iter().flat_map(|&v| blocks[v].iter().copied()).collect();
        place(&mut w, phi1, free)?;
    }
    let arity = gamma.iter().map(|(_, r)| r.arity()).max().unwrap_or(1).max(1);
    let (out, notes) = w.finish(arity);
    let (k1, k2) = (phi1.bound.len(), phi2.bound.len());
    let lv = LvParams {
        d,
        k1,
        k2,
        l: phi1.max_degree().max(phi2.max_degree()),
        bound_stated: n * d + 2 * n * k1 + k2,
        bound_corrected: n * (d + k2) + 2 * n * k1,
        max_degree_out: out.max_degree(),
        efpp: phi1.classify().equality_free && phi2.classify().equality_free,
    };
    let mut report = ReductionReport::new("lv_reduce_3sat", inst, &out, notes);
    report.cv_constant = None;
    report.lv = Some(lv);
    Ok(Reduction { instance: out, report })
}

/// Test and demo interpretations.
pub mod samples {
    use super::*;
    use crate::language::all_unary;

    /// The identity interpretation of the Boolean language `{Rnn}` in itself.
    pub fn identity() -> (ConstraintLanguage, Interpretation) {
        let gamma = ConstraintLanguage::from_relations(2, [("Rnn".to_string(), r_neq2())]).expect("static");
        let carrier = Relation::full(2, 1).expect("static");
        let interp = Interpretation {
            d: 1,
            map: carrier.tuples().iter().map(|t| (t.clone(), t[0])).collect(),
            carrier,
            target: gamma.clone(),
            carrier_def: PPFormula::with_counts("F", 1, 0, vec![]).expect("static"),
            preimage_defs: BTreeMap::from([("Rnn".to_string(), PPFormula::atom_of("Rnn", 6))]),
        };
        (gamma, interp)
    }

    /// An interpretation of the Boolean `{Rnn}` over {0,1,2} with blocks of
    /// width 2: `F = {(0,1), (2,2)}`, `f(0,1) = 0`, `f(2,2) = 1`. The
    /// language has `G = {(0,1,0), (2,2,1)}`, which pairs a block with its
    /// value, R≠≠ over {0,1,2}, `F` itself and all unary relations.
    ///
    /// `k2` selects the carrier definition: `F(x1, x2)` for 0, and
    /// `∃z G(x1, x2, z)` otherwise. With `equality` the preimage definition
    /// routes each block value through an equality atom.
    pub fn blocks_of_two(k2: usize, equality: bool) -> (ConstraintLanguage, Interpretation) {
        let g = Relation::new(3, 3, [vec![0, 1, 0], vec![2, 2, 1]]).expect("static");
        let carrier = Relation::new(3, 2, [vec![0, 1], vec![2, 2]]).expect("static");
        let mut gamma = all_unary(3);
        gamma.insert("G", g).expect("fresh");
        gamma.insert("Rnn3", r_neq2().widen(3).expect("static")).expect("fresh");
        gamma.insert("F", carrier.clone()).expect("fresh");
        let carrier_def = if k2 == 0 {
            PPFormula::atom_of("F", 2)
        } else {
            PPFormula::with_counts("F", 2, 1, vec![Atom::named("G", vec![0, 1, 2])]).expect("static")
        };
        // Free x1..x12 (six blocks), bound w1..w6 (and v1..v6 with equality).
        let mut atoms = vec![Atom::named("Rnn3", (12..18).collect())];
        for j in 0..6 {
            if equality {
                atoms.push(Atom::named("G", vec![2 * j, 2 * j + 1, 18 + j]));
                atoms.push(Atom::eq(18 + j, 12 + j));
            } else {
                atoms.push(Atom::named("G", vec![2 * j, 2 * j + 1, 12 + j]));
            }
        }
        let nbound = if equality { 12 } else { 6 };
        let pre = PPFormula::with_counts("Rnn", 12, nbound, atoms).expect("static");
        let target = ConstraintLanguage::from_relations(2, [("Rnn".to_string(), r_neq2())]).expect("static");
        let interp = Interpretation {
            d: 2,
            map: BTreeMap::from([(vec![0, 1], 0), (vec![2, 2], 1)]),
            carrier,
            target,
            carrier_def,
            preimage_defs: BTreeMap::from([("Rnn".to_string(), pre)]),
        };
        (gamma, interp)
    }
}
