use super::report::Reduction;
use super::work::Work;
use crate::error::{arg, Result};
use crate::formula::{AtomRel, PPFormula};
use crate::instance::Instance;
use crate::language::ConstraintLanguage;
use std::collections::BTreeMap;

/// Checks that `def` is quantifier-free and evaluates to `name`'s relation in `inst`.
fn check_def(inst: &Instance, name: &str, def: &PPFormula, gamma: &ConstraintLanguage) -> Result<()> {
    if !def.classify().quantifier_free {
        return arg(format!("definition of {name} has bound variables"));
    }
    if let Some(i) = inst.relation_index(name) {
        let want = &inst.relations()[i].1;
        if def.evaluate(gamma)? != *want {
            return arg(format!("definition of {name} does not evaluate to the relation"));
        }
    }
    Ok(())
}

/// Replaces every constraint over a relation with a definition in `defs` by
/// the definition's atoms; equality atoms identify variables. Relations
/// without a definition are kept if `gamma` has an equal member, under that
/// member's name.
pub fn qfpp_inline(inst: &Instance, defs: &BTreeMap<String, PPFormula>, gamma: &ConstraintLanguage) -> Result<Reduction> {
    if inst.domain() != gamma.domain() {
        return arg("instance and language have different domains");
    }
    for (name, def) in defs {
        check_def(inst, name, def, gamma)?;
    }
    let mut w = Work::from_instance(inst);
    let mut inline: Vec<Option<&PPFormula>> = vec![None; w.rels.len()];
    for (i, (name, r)) in w.rels.iter_mut().enumerate() {
        if let Some(def) = defs.get(name.as_str()) {
            inline[i] = Some(def);
            *name = format!("#in:{name}");
        } else if let Some(g) = gamma.find(r) {
            *name = g.to_string();
        } else if !r.is_empty() {
            return arg(format!("relation {name} has no definition and no equal member in the language"));
        }
    }
    let todo: Vec<usize> = w.live().collect();
    for ci in todo {
        let Some(def) = inline[w.rel_of(ci)] else { continue };
        let args = w.args(ci).to_vec();
        w.remove(ci);
        for atom in &def.atoms {
            let vars: Vec<usize> = atom.args.iter().map(|&v| w.resolve(args[v])).collect();
            match &atom.rel {
                AtomRel::Named(g) => {
                    let idx = w.rel_index(g, gamma.get(g).expect("checked by evaluation"))?;
                    w.add(idx, vars);
                }
                AtomRel::Eq => w.identify(vars[0], vars[1]),
                AtomRel::False => w.mark_unsat("a definition contains false"),
            }
        }
    }
    let arity = gamma.iter().map(|(_, r)| r.arity()).max().unwrap_or(1).max(1);
    let (out, notes) = w.finish(arity);
    Ok(Reduction::new("qfpp_inline", inst, out, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Atom;
    use crate::relation::{r_b, Relation};
    use crate::solvers::{brute_force, SolverConfig};

    fn gamma() -> ConstraintLanguage {
        ConstraintLanguage::from_relations(2, [("RB".to_string(), r_b())]).unwrap()
    }

    #[test]
    fn identity_definitions_change_nothing() {
        let mut inst = Instance::new(2, 8);
        let r = inst.add_relation("RB", r_b()).unwrap();
        inst.add_constraint(r, (0..8).collect()).unwrap();
        let defs = BTreeMap::from([("RB".to_string(), PPFormula::atom_of("RB", 8))]);
        let out = qfpp_inline(&inst, &defs, &gamma()).unwrap();
        assert_eq!(out.instance, inst);
    }

    #[test]
    fn duplicated_column_is_identified() {
        // S = R≠≠≠ with its first column repeated.
        let s = r_b().project(&[0, 0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let mut atoms = vec![Atom::named("RB", vec![0, 2, 3, 4, 5, 6, 7, 8])];
        atoms.push(Atom::eq(0, 1));
        let def = PPFormula::with_counts("S", 9, 0, atoms).unwrap();
        let mut inst = Instance::new(2, 9);
        let r = inst.add_relation("S", s).unwrap();
        inst.add_constraint(r, (0..9).collect()).unwrap();
        let defs = BTreeMap::from([("S".to_string(), def)]);
        let out = qfpp_inline(&inst, &defs, &gamma()).unwrap();
        assert!(out.instance.num_vars() < inst.num_vars());
        let cfg = SolverConfig::default();
        assert_eq!(brute_force(&out.instance, &cfg).unwrap().status, brute_force(&inst, &cfg).unwrap().status);
    }

    #[test]
    fn rejects_bound_variables_and_wrong_definitions() {
        let mut inst = Instance::new(2, 8);
        let r = inst.add_relation("RB", r_b()).unwrap();
        inst.add_constraint(r, (0..8).collect()).unwrap();
        let bound = PPFormula::with_counts("RB", 8, 1, vec![Atom::named("RB", (0..8).collect())]).unwrap();
        let defs = BTreeMap::from([("RB".to_string(), bound)]);
        assert!(qfpp_inline(&inst, &defs, &gamma()).is_err());
        let wrong = PPFormula::with_counts("RB", 8, 0, vec![]).unwrap();
        let defs = BTreeMap::from([("RB".to_string(), wrong)]);
        assert!(qfpp_inline(&inst, &defs, &gamma()).is_err());
    }

    #[test]
    fn false_atom_gives_canonical_unsat() {
        let mut inst = Instance::new(2, 2);
        let e = Relation::empty(2, 2).unwrap();
        let r = inst.add_relation("E", e).unwrap();
        inst.add_constraint(r, vec![0, 1]).unwrap();
        let def = PPFormula::with_counts("E", 2, 0, vec![Atom::falsum()]).unwrap();
        let defs = BTreeMap::from([("E".to_string(), def)]);
        let out = qfpp_inline(&inst, &defs, &gamma()).unwrap();
        assert!(out.instance.has_empty_constraint());
        assert_eq!(out.instance.constraints()[0].args.len(), 8);
    }
}
