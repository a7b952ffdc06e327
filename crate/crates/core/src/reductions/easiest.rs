use super::choice::{add_2choice_args, drop_3choice_args};
use super::inline::qfpp_inline;
use super::lift::{lift_rd, permute_onto};
use super::quantifiers::qfpp_extension;
use super::report::Reduction;
use super::unary::eliminate_unary;
use crate::clones::violating_partial_op;
use crate::error::{CspError, Result};
use crate::extensions::{columns3, detect_rb_extension, saturate, three_choice_positions};
use crate::formula::{canonical_qfpp, PPFormula};
use crate::instance::Instance;
use crate::language::{all_unary, ConstraintLanguage};
use crate::relation::{all_tuples, make_rd, mask_of, Relation};
use std::collections::{BTreeMap, HashSet};

/// A quantifier-free definition of an R^B-extension over a language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discovery {
    pub formula: PPFormula,
    pub relation: Relation,
    /// How it was found.
    pub source: String,
}

const SMALL_ARITY: usize = 8;
const SMALL_SIZE: usize = 40;

/// Looks for a qfpp-definable R^B-extension: first among the three-tuple
/// members, then among three-tuple subsets of small members whose canonical
/// quantifier-free definition is exact and which no partial polymorphism of
/// the language violates.
pub fn discover_rb_extension(gamma: &ConstraintLanguage) -> Result<Discovery> {
    for (name, g) in gamma.iter() {
        if g.len() == 3 && detect_rb_extension(g).is_some() {
            return Ok(Discovery {
                formula: PPFormula::atom_of(name, g.arity()),
                relation: g.clone(),
                source: format!("member {name}"),
            });
        }
    }
    for (name, g) in gamma.iter() {
        if g.arity() > SMALL_ARITY || g.len() > SMALL_SIZE || g.len() < 3 {
            continue;
        }
        let t = g.tuples();
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                for l in j + 1..t.len() {
                    let sub = Relation::new(g.domain(), g.arity(), [t[i].clone(), t[j].clone(), t[l].clone()])?;
                    if detect_rb_extension(&sub).is_none() {
                        continue;
                    }
                    let def = canonical_qfpp(&sub, gamma)?;
                    if def.evaluate(gamma)? == sub && violating_partial_op(&sub, gamma)?.is_none() {
                        return Ok(Discovery {
                            formula: def,
                            relation: sub,
                            source: format!("three tuples of {name}"),
                        });
                    }
                }
            }
        }
    }
    Err(CspError::Precondition(
        "no R^B-extension found: no three-tuple member is one, and no three tuples of a small member \
         give a quantifier-free definable one"
            .into(),
    ))
}

/// Columns missing from `r`, 1- and 2-choice first, then 3-choice, each
/// group in lexicographic order, appended after `r`'s own.
fn complete_columns(r: &Relation) -> Result<(Relation, usize)> {
    let k = r.domain();
    let have: HashSet<[u8; 3]> = columns3(r).into_iter().collect();
    let missing: Vec<Vec<u8>> = all_tuples(k, 3).filter(|c| !have.contains(&[c[0], c[1], c[2]])).collect();
    let (small, three): (Vec<_>, Vec<_>) = missing.into_iter().partition(|c| mask_of(c.iter().copied()).count_ones() < 3);
    let mut cols = r.columns();
    let kept = cols.len() + small.len();
    cols.extend(small);
    cols.extend(three);
    Ok((Relation::from_columns(k, 3, &cols)?, kept))
}

/// Reduces an instance over R_D (and unary relations) to one over an
/// ultraconservative `gamma`, through an R^B-extension `R` defined over
/// `gamma` by `phi` (made quantifier-free if needed) or discovered.
///
/// Unary constraints are eliminated first. With `S` the saturation of `R`
/// without repeated columns, the instance is moved onto `S` (by `lift_rd`
/// when `S` has a 3-choice column, otherwise by extending `S` with every
/// missing column, dropping the 3-choice ones and then the others), then
/// `S` is replaced by its quantifier-free definition over `R`, and `R` by
/// its definition over `gamma`.
pub fn reduce_easiest(inst: &Instance, gamma: &ConstraintLanguage, phi: Option<&PPFormula>) -> Result<Reduction> {
    let k = inst.domain();
    if gamma.domain() != k {
        return Err(CspError::Argument("instance and language have different domains".into()));
    }
    if !gamma.is_ultraconservative() {
        return Err(CspError::Precondition("language does not contain every unary relation".into()));
    }
    let found = match phi {
        Some(p) => {
            let q = if p.classify().quantifier_free { p.clone() } else { qfpp_extension(p, gamma)? };
            let relation = q.evaluate(gamma)?;
            if detect_rb_extension(&relation).is_none() {
                return Err(CspError::Precondition("supplied formula does not define an R^B-extension".into()));
            }
            Discovery { formula: q, relation, source: "supplied".into() }
        }
        None => discover_rb_extension(gamma)?,
    };
    let r = &found.relation;
    let (base, _) = r.remove_redundant();
    let (sat, _) = saturate(&base)?;
    let over_r = ConstraintLanguage::from_relations(k, [("R".to_string(), r.clone())])?;
    let sat_def = canonical_qfpp(&sat, &over_r)?;
    if sat_def.evaluate(&over_r)? != sat {
        return Err(CspError::Internal("saturation is not quantifier-free definable from R".into()));
    }

    let mut red = eliminate_unary(inst)?;
    red.report.step = "reduce_easiest".into();
    red.report.notes.insert(0, format!("R^B-extension: {}", found.source));
    let onto_sat = if !three_choice_positions(&sat).is_empty() {
        lift_rd(&red.instance, &sat)?
    } else {
        let (full, kept) = complete_columns(&sat)?;
        let moved = permute_onto(&red.instance, &make_rd(k)?, &full)?;
        let kept_pos: Vec<usize> = (0..kept).collect();
        let dropped = drop_3choice_args(&moved.instance, &full, &kept_pos)?;
        let mid = full.project(&kept_pos)?;
        let added = add_2choice_args(&dropped.instance, &mid, &(0..sat.arity()).collect::<Vec<_>>())?;
        moved.then(dropped).then(added)
    };
    red = red.then(onto_sat);
    let sat_name = red
        .instance
        .relations()
        .iter()
        .find(|(_, x)| *x == sat)
        .map_or_else(|| "S".to_string(), |(n, _)| n.clone());
    let to_r = over_r.merged(&all_unary(k))?;
    let step1 = qfpp_inline(&red.instance, &BTreeMap::from([(sat_name, sat_def)]), &to_r)?;
    red = red.then(step1);
    let step2 = qfpp_inline(&red.instance, &BTreeMap::from([("R".to_string(), found.formula.clone())]), gamma)?;
    Ok(red.then(step2))
}
