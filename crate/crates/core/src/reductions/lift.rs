use super::choice::{add_2choice_args, drop_3choice_args, setup};
use super::report::Reduction;
use crate::error::{CspError, Result};
use crate::extensions::{columns3, is_saturated, saturate, SaturationCheck};
use crate::instance::Instance;
use crate::relation::{make_rd, mask_of, Relation};
use std::collections::HashSet;

/// Rewrites constraints over `from` into constraints over `to`, where
/// `to == from.project(pi)` for a map `pi` hitting every position of `from`.
/// Position `j` of `to` reads the column of `from` with the same vector.
pub fn permute_onto(inst: &Instance, from: &Relation, to: &Relation) -> Result<Reduction> {
    let fc = columns3(from);
    let pi: Vec<usize> = columns3(to)
        .iter()
        .map(|c| fc.iter().position(|f| f == c))
        .collect::<Option<_>>()
        .ok_or_else(|| CspError::Precondition("target has a column the source lacks".into()))?;
    let hit: HashSet<usize> = pi.iter().copied().collect();
    if hit.len() != from.arity() || from.project(&pi)? != *to {
        return Err(CspError::Precondition("target is not a column rearrangement of the source".into()));
    }
    let (mut w, main, name) = setup(inst, from, "permute_onto")?;
    w.retarget(main, &name, to, &pi)?;
    let (out, notes) = w.finish(to.arity());
    Ok(Reduction::new("permute_onto", inst, out, notes))
}

/// One step of the column chain: `s` is the saturation of the previous
/// relation plus one new 3-choice column, `kept` its positions other than the
/// 3-choice columns with the new value set, and `prev` the arity of the
/// previous relation (which occupies positions `0..prev` of `s`).
struct Link {
    s: Relation,
    kept: Vec<usize>,
    prev: usize,
}

fn missing_triple(r: &Relation) -> Option<[u8; 3]> {
    let have: HashSet<u32> = columns3(r).into_iter().map(mask_of).filter(|m| m.count_ones() == 3).collect();
    let k = r.domain() as u8;
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                if !have.contains(&mask_of([a, b, c])) {
                    return Some([a, b, c]);
                }
            }
        }
    }
    None
}

/// Rewrites an instance over R_D (plus unary constraints) into one over
/// `r`, a saturated three-tuple relation with a 3-choice column (or, for
/// `k = 2`, any R^B-extension over {0,1}).
///
/// Starting from `r` without repeated columns, 3-choice columns with a new
/// value set are appended and saturated until every column over the domain
/// is present. The instance is then mapped onto the last relation and
/// walked back down the chain, each link dropping the new 3-choice columns
/// and then the new 2-choice and constant columns.
///
/// The output may also use constant relations.
pub fn lift_rd(inst: &Instance, r: &Relation) -> Result<Reduction> {
    let k = inst.domain();
    let rd = make_rd(k)?;
    if r.len() != 3 || r.domain() != k {
        return Err(CspError::Argument("lift_rd needs a three-tuple relation over the instance domain".into()));
    }
    let (base, _) = r.remove_redundant();
    if let SaturationCheck::Missing { vector, .. } = is_saturated(&base)? {
        return Err(CspError::Precondition(format!("relation is not saturated, missing {vector:?}")));
    }
    let complete = |x: &Relation| x.arity() == rd.arity();
    if !complete(&base) && !columns3(&base).into_iter().any(|c| mask_of(c).count_ones() == 3) {
        return Err(CspError::Precondition("relation has no 3-choice column".into()));
    }
    let mut chain = Vec::new();
    let mut cur = base.clone();
    while let Some(triple) = missing_triple(&cur) {
        let mut cols = cur.columns();
        cols.push(triple.to_vec());
        let (s, _) = saturate(&Relation::from_columns(k, 3, &cols)?)?;
        let m = mask_of(triple);
        let kept = columns3(&s).into_iter().enumerate().filter(|(_, c)| mask_of(*c) != m).map(|(i, _)| i).collect();
        chain.push(Link { s: s.clone(), kept, prev: cur.arity() });
        cur = s;
    }
    if !complete(&cur) {
        return Err(CspError::Internal("column chain stopped short of R_D".into()));
    }
    let mut red = permute_onto(inst, &rd, &cur)?;
    red.report.step = "lift_rd".into();
    red.report.notes.push(format!("chain of {} links", chain.len()));
    for link in chain.iter().rev() {
        let dropped = drop_3choice_args(&red.instance, &link.s, &link.kept)?;
        let mid = link.s.project(&link.kept)?;
        let prev: Vec<usize> = (0..link.prev).collect();
        let added = add_2choice_args(&dropped.instance, &mid, &prev)?;
        red = red.then(dropped).then(added);
    }
    if base != *r {
        let expand = permute_onto(&red.instance, &base, r)?;
        red = red.then(expand);
    }
    Ok(red)
}
