//! Column-level reductions between three-tuple relations: merging shared
//! 3-choice variables, dropping 3-choice arguments, and dropping extra
//! 2-choice arguments.
//!
//! A constraint over a three-tuple relation is satisfied by choosing one of
//! its rows. All three steps rewrite the instance so that the variables at the
//! argument positions being removed occur nowhere else, after which the
//! positions can be projected away.

use super::report::Reduction;
use super::unary::name_in;
use super::work::Work;
use crate::error::{CspError, Result};
use crate::extensions::{col3, column_index, detect_rb_extension, is_saturated, SaturationCheck};
use crate::instance::Instance;
use crate::relation::{full_mask, mask_of, Relation, ValueSet};
use std::collections::HashMap;

fn need_saturated(r: &Relation) -> Result<()> {
    match is_saturated(r)? {
        SaturationCheck::Saturated => Ok(()),
        SaturationCheck::Missing { column, vector, .. } => Err(CspError::Precondition(format!(
            "relation is not saturated: column {} has no image {vector:?}",
            column + 1
        ))),
    }
}

/// Value mask of position `j` of constraint `ci`.
fn proj(w: &Work, ci: usize, j: usize) -> ValueSet {
    w.rels[w.rel_of(ci)].1.value_set(j)
}

/// One merge round: finds a variable at 3-choice positions of two different
/// constraints over `r` and folds the second constraint into the first.
/// Returns false when there is nothing left to merge.
fn merge_once(w: &mut Work, main: usize, r: &Relation, index: &HashMap<[u8; 3], usize>) -> bool {
    let three: Vec<bool> = (0..r.arity()).map(|i| mask_of(col3(r, i)).count_ones() == 3).collect();
    let mut first: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut pair = None;
    'scan: for c in w.over(main) {
        for (i, &x) in w.args(c).iter().enumerate() {
            if !three[i] {
                continue;
            }
            match first.get(&x) {
                Some(&(c0, i0)) if c0 != c => {
                    pair = Some(((c0, i0), (c, i)));
                    break 'scan;
                }
                Some(_) => {}
                None => {
                    first.insert(x, (c, i));
                }
            }
        }
    }
    let Some(((c, i1), (c2, i2))) = pair else { return false };
    let t = r.tuples();
    // tau[row of c] = row of c2 agreeing on the shared variable.
    let matched: Vec<Option<usize>> = (0..3).map(|p| (0..3).find(|&s| t[s][i2] == t[p][i1])).collect();
    let Some(fallback) = matched.iter().flatten().next().copied() else {
        w.mark_unsat("a shared 3-choice variable has no common value");
        return true;
    };
    let tau: Vec<usize> = matched.iter().map(|m| m.unwrap_or(fallback)).collect();
    for j in 0..r.arity() {
        let image = [t[tau[0]][j], t[tau[1]][j], t[tau[2]][j]];
        let rho = index[&image];
        let z = w.args(c2)[j];
        let y = w.args(c)[rho];
        w.substitute(z, y);
    }
    w.remove(c2);
    true
}

fn dedup_work(w: &mut Work, main: usize, r: &Relation) {
    let index = column_index(r);
    while !w.unsat && merge_once(w, main, r, &index) {}
}

pub(super) fn setup(inst: &Instance, r: &Relation, what: &str) -> Result<(Work, usize, String)> {
    if r.len() != 3 || r.domain() != inst.domain() {
        return Err(CspError::Argument(format!("{what} needs a three-tuple relation over the instance domain")));
    }
    let mut w = Work::from_instance(inst);
    let name = name_in(inst, r, "R");
    let main = w.unify(&name, r)?;
    w.check_shape(&[main], what)?;
    Ok((w, main, name))
}

/// Rewrites an instance over a saturated three-tuple relation `r` (plus unary
/// constraints) so that every variable is 3-choice in at most one constraint.
pub fn dedup_3choice(inst: &Instance, r: &Relation) -> Result<Reduction> {
    need_saturated(r)?;
    let (mut w, main, _) = setup(inst, r, "dedup_3choice")?;
    dedup_work(&mut w, main, r);
    let (out, notes) = w.finish(r.arity());
    Ok(Reduction::new("dedup_3choice", inst, out, notes))
}

/// Rewrites an instance over `r` (saturated, no repeated columns) into one
/// over `r.project(kept)`, where every dropped position is 3-choice.
///
/// The output may also use constant relations.
pub fn drop_3choice_args(inst: &Instance, r: &Relation, kept: &[usize]) -> Result<Reduction> {
    need_saturated(r)?;
    if r.has_redundant_columns() {
        return Err(CspError::Precondition("relation has repeated columns".into()));
    }
    let target = r.project(kept)?;
    let dropped: Vec<usize> = (0..r.arity()).filter(|i| !kept.contains(i)).collect();
    if let Some(&i) = dropped.iter().find(|&&i| mask_of(col3(r, i)).count_ones() != 3) {
        return Err(CspError::Precondition(format!("dropped position {} is not 3-choice", i + 1)));
    }
    let (mut w, main, name) = setup(inst, r, "drop_3choice_args")?;
    let index = column_index(r);
    let t = r.tuples();
    loop {
        dedup_work(&mut w, main, r);
        if w.unsat {
            break;
        }
        let slot = w.over(main).into_iter().find_map(|c| {
            dropped.iter().find_map(|&i| {
                let x = w.args(c)[i];
                (w.occurrences(x).len() > 1).then_some((c, i, x))
            })
        });
        let Some((c, i, x)) = slot else { break };
        let mut live = [true; 3];
        for (c2, j) in w.occurrences(x) {
            if (c2, j) == (c, i) {
                continue;
            }
            for (p, ok) in live.iter_mut().enumerate() {
                *ok &= if c2 == c { t[p][j] == t[p][i] } else { proj(&w, c2, j) & (1 << t[p][i]) != 0 };
            }
        }
        let rows: Vec<usize> = (0..3).filter(|&p| live[p]).collect();
        match rows[..] {
            [] => w.mark_unsat("a dropped variable has no consistent row"),
            [p] => w.fix_to_row(c, &t[p])?,
            [p, q] => {
                let o = 3 - p - q;
                let mut cut = [0u8; 3];
                cut[p] = t[p][i];
                cut[q] = t[p][i];
                cut[o] = t[o][i];
                let sep = w.args(c)[index[&cut]];
                w.add_unary(sep, 1 << t[p][i])?;
                let mut same = [0u8; 3];
                same[p] = t[p][i];
                same[q] = t[q][i];
                same[o] = t[p][i];
                let y = w.args(c)[index[&same]];
                w.freshen(c, i);
                w.substitute(x, y);
            }
            _ => {
                for (c2, _) in w.occurrences(x) {
                    if c2 == c {
                        continue;
                    }
                    if !w.is_unary(c2) {
                        return Err(CspError::Internal("unconstrained dropped variable occurs in another constraint".into()));
                    }
                    w.remove(c2);
                }
            }
        }
    }
    w.retarget(main, &name, &target, kept)?;
    let (out, notes) = w.finish(target.arity());
    Ok(Reduction::new("drop_3choice_args", inst, out, notes))
}

struct Extra<'a> {
    t: &'a [Vec<u8>],
    a: u8,
    b: u8,
    kept_index: HashMap<[u8; 3], usize>,
}

impl Extra<'_> {
    /// Kept position whose column is `a` on the rows in `on` and `b` elsewhere.
    fn indicator(&self, on: [bool; 3]) -> usize {
        let v = on.map(|x| if x { self.a } else { self.b });
        self.kept_index[&v]
    }

    /// Restricts constraint `c` to the rows in `keep`.
    fn exclude(&self, w: &mut Work, c: usize, keep: [bool; 3]) -> Result<()> {
        match keep.iter().filter(|&&k| k).count() {
            3 => {}
            2 => {
                let v = w.args(c)[self.indicator(keep)];
                w.add_unary(v, 1 << self.a)?;
            }
            1 => {
                let p = keep.iter().position(|&k| k).expect("one row");
                w.fix_to_row(c, &self.t[p])?;
            }
            _ => w.mark_unsat("a constraint has no row left"),
        }
        Ok(())
    }
}

/// Rewrites an instance over `r_prime` into one over `r_prime.project(kept)`.
/// The dropped positions must have at most two values and the projection must
/// be an R^B-extension.
///
/// The output may also use constant relations.
pub fn add_2choice_args(inst: &Instance, r_prime: &Relation, kept: &[usize]) -> Result<Reduction> {
    let target = r_prime.project(kept)?;
    let Some(wit) = detect_rb_extension(&target) else {
        return Err(CspError::Precondition("kept positions do not form an R^B-extension".into()));
    };
    let extra: Vec<usize> = (0..r_prime.arity()).filter(|i| !kept.contains(i)).collect();
    if let Some(&i) = extra.iter().find(|&&i| r_prime.value_set(i).count_ones() > 2) {
        return Err(CspError::Precondition(format!("extra position {} has three values", i + 1)));
    }
    let (mut w, main, name) = setup(inst, r_prime, "add_2choice_args")?;
    let t = r_prime.tuples();
    let mut kept_index = HashMap::new();
    for &p in kept {
        kept_index.entry(col3(r_prime, p)).or_insert(p);
    }
    let ex = Extra { t, a: wit.a, b: wit.b, kept_index };
    let full = full_mask(inst.domain());
    while !w.unsat {
        let slot = w.over(main).into_iter().find_map(|c| {
            extra.iter().find_map(|&i| {
                let x = w.args(c)[i];
                (w.occurrences(x).len() > 1).then_some((c, i, x))
            })
        });
        let Some((c, i, x)) = slot else { break };
        let col = col3(r_prime, i);
        let values = mask_of(col);
        let args = w.args(c).to_vec();
        if let Some(j) = (0..args.len()).find(|&j| j != i && args[j] == x) {
            ex.exclude(&mut w, c, [0, 1, 2].map(|p| t[p][i] == t[p][j]))?;
            if w.cons[c].is_some() {
                w.freshen(c, i);
            }
            continue;
        }
        let other = w.occurrences(x).into_iter().find(|&(c2, _)| c2 != c && !w.is_unary(c2));
        if let Some((c2, j)) = other {
            let s = values & proj(&w, c2, j);
            match s.count_ones() {
                0 => w.mark_unsat("no common value for a shared variable"),
                1 => {
                    let v = s.trailing_zeros() as u8;
                    w.add_unary(x, s)?;
                    ex.exclude(&mut w, c, [0, 1, 2].map(|p| t[p][i] == v))?;
                    if w.cons[c].is_some() {
                        w.freshen(c, i);
                    }
                }
                _ => {
                    ex.exclude(&mut w, c2, [0, 1, 2].map(|p| s & (1 << t[p][j]) != 0))?;
                    if w.unsat || w.cons[c2].is_none() {
                        continue;
                    }
                    let u = s.trailing_zeros() as u8;
                    let l = ex.indicator([0, 1, 2].map(|p| t[p][i] == u));
                    let m = ex.indicator([0, 1, 2].map(|p| t[p][j] == u));
                    w.freshen(c, i);
                    let y = w.args(c)[l];
                    let z = w.args(c2)[m];
                    w.substitute(z, y);
                }
            }
            continue;
        }
        let unaries = w.unaries_of(x);
        let e = unaries.iter().fold(full, |acc, &(_, m)| acc & m);
        let v = e & values;
        if v == 0 {
            w.mark_unsat("unary disjoint from an extra column");
            continue;
        }
        if v != values {
            let s = v.trailing_zeros() as u8;
            ex.exclude(&mut w, c, [0, 1, 2].map(|p| t[p][i] == s))?;
        }
        for (cu, _) in unaries {
            w.remove(cu);
        }
    }
    w.retarget(main, &name, &target, kept)?;
    let (out, notes) = w.finish(target.arity());
    Ok(Reduction::new("add_2choice_args", inst, out, notes))
}
