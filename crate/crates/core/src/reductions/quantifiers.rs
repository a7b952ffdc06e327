//! Removing existential quantifiers from pp-definitions of two-tuple
//! relations and of R^B-extensions, over languages with every unary relation.

use crate::error::{CspError, Result};
use crate::extensions::{column_index, detect_rb_extension};
use crate::formula::{Atom, PPFormula};
use crate::language::ConstraintLanguage;
use crate::relation::{full_mask, mask_of, Relation, ValueSet};

fn unary_atom(gamma: &ConstraintLanguage, mask: ValueSet, var: usize) -> Result<Atom> {
    match gamma.find_unary(mask) {
        Some(name) => Ok(Atom::named(name, vec![var])),
        None => Err(CspError::Precondition(format!("language lacks the unary relation with mask {mask:#b}"))),
    }
}

/// Promotes the first bound variable to free; its index is unchanged.
fn promote(f: &mut PPFormula) -> usize {
    let y = f.bound.remove(0);
    f.free.push(y);
    f.free.len() - 1
}

/// For each tuple of `cur`, the values the last column of `ext` takes above it.
fn fibres(cur: &Relation, ext: &Relation) -> Vec<ValueSet> {
    let n = cur.arity();
    cur.tuples()
        .iter()
        .map(|t| mask_of(ext.tuples().iter().filter(|e| e[..n] == t[..]).map(|e| e[n])))
        .collect()
}

/// Turns a pp-definition of a two-tuple relation into a quantifier-free one
/// whose projection onto the original free variables is that relation and
/// which still has two tuples. Bound variables are made free one at a time;
/// a variable whose two value sets are disjoint gets a two-element unary
/// atom, otherwise a constant atom for a shared value.
pub fn eliminate_quantifiers_pair(phi: &PPFormula, gamma: &ConstraintLanguage) -> Result<PPFormula> {
    let mut cur = phi.evaluate(gamma)?;
    if cur.len() != 2 {
        return Err(CspError::Argument(format!("formula defines {} tuples, expected 2", cur.len())));
    }
    let mut f = phi.clone();
    while !f.bound.is_empty() {
        let y = promote(&mut f);
        let ext = f.evaluate(gamma)?;
        let s = fibres(&cur, &ext);
        let shared = s[0] & s[1];
        let mask = if shared == 0 {
            (1 << s[0].trailing_zeros()) | (1 << s[1].trailing_zeros())
        } else {
            1 << shared.trailing_zeros()
        };
        f.atoms.push(unary_atom(gamma, mask, y)?);
        cur = f.evaluate(gamma)?;
        if cur.len() != 2 {
            return Err(CspError::Internal(format!("promoting {} gave {} tuples", f.free[y], cur.len())));
        }
    }
    Ok(f)
}

fn fresh_name(f: &PPFormula, stem: &str) -> String {
    let taken = |n: &str| f.free.iter().chain(&f.bound).any(|x| x == n);
    (0..).map(|i| format!("{stem}{i}")).find(|n| !taken(n)).expect("unbounded")
}

struct Split {
    e0: ValueSet,
    e2: ValueSet,
    r: [usize; 3],
    /// Value of the selector column on `r[2]`: `a` or `b`.
    orient_a: bool,
}

fn find_split(s: &[ValueSet], k: usize) -> Option<Split> {
    let full = full_mask(k);
    let e0s = std::iter::once(full).chain(1..full);
    for e0 in e0s {
        let t: Vec<ValueSet> = s.iter().map(|x| x & e0).collect();
        if t.contains(&0) {
            continue;
        }
        for r in [[0, 1, 2], [0, 2, 1], [1, 2, 0]] {
            for e2 in 1..=full {
                let (h1, h2) = (t[r[0]] & e2, t[r[1]] & e2);
                if h1.count_ones() != 1 || h2.count_ones() != 1 || h1 == h2 {
                    continue;
                }
                for (orient_a, h) in [(true, h1), (false, h2)] {
                    if t[r[2]] & h != 0 {
                        return Some(Split { e0, e2, r, orient_a });
                    }
                }
            }
        }
    }
    None
}

/// Turns a pp-definition of an R^B-extension into a quantifier-free
/// definition of an R^B-extension.
///
/// Bound variables are made free one at a time. If the new variable's value
/// sets above the three tuples are singletons, nothing is added; if a unary
/// relation cuts each to one value, it is conjoined. Otherwise two tuples
/// `r1`, `r2` get distinct values `d1`, `d2` through a binary relation
/// `F = {(a, d1), (b, d2)}` read off a selector column, with the third tuple
/// excluded by a constant atom on a separator column while `F` is defined.
/// `F` is made quantifier-free and conjoined on fresh free variables.
pub fn qfpp_extension(phi: &PPFormula, gamma: &ConstraintLanguage) -> Result<PPFormula> {
    let k = gamma.domain();
    let first = phi.evaluate(gamma)?;
    if detect_rb_extension(&first).is_none() {
        return Err(CspError::Argument("formula does not define an R^B-extension".into()));
    }
    let mut f = phi.clone();
    let mut step = 0;
    while !f.bound.is_empty() {
        step += 1;
        let cur = f.evaluate(gamma)?;
        let wit = detect_rb_extension(&cur)
            .ok_or_else(|| CspError::Internal(format!("step {step} lost the R^B pattern")))?;
        let y = promote(&mut f);
        let ext = f.evaluate(gamma)?;
        let s = fibres(&cur, &ext);
        if s.iter().all(|m| m.count_ones() == 1) {
            continue;
        }
        if let Some(e) = (1..=full_mask(k)).find(|e| s.iter().all(|m| (m & e).count_ones() == 1)) {
            f.atoms.push(unary_atom(gamma, e, y)?);
        } else {
            let sp = find_split(&s, k)
                .ok_or_else(|| CspError::Internal(format!("step {step}: no way to pin variable {}", f.free[y])))?;
            f = pin_by_pair(f, y, &cur, wit.a, wit.b, &sp, gamma)?;
        }
        let after = f.evaluate(gamma)?;
        if after.len() != 3 || detect_rb_extension(&after).is_none() {
            return Err(CspError::Internal(format!("step {step} lost the R^B pattern")));
        }
    }
    Ok(f)
}

fn pin_by_pair(
    f: PPFormula,
    y: usize,
    cur: &Relation,
    a: u8,
    b: u8,
    sp: &Split,
    gamma: &ConstraintLanguage,
) -> Result<PPFormula> {
    let index = column_index(cur);
    let pick = |on: [bool; 3]| {
        let mut v = [0u8; 3];
        for (j, &row) in sp.r.iter().enumerate() {
            v[row] = if on[j] { a } else { b };
        }
        index[&v]
    };
    let sep = pick([true, true, false]);
    let sel = pick([true, false, sp.orient_a]);
    // F(sel, y): every other variable bound.
    let nv = f.num_vars();
    let mut order = vec![sel, y];
    order.extend((0..nv).filter(|&v| v != sel && v != y));
    let mut pos = vec![0; nv];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut atoms = f.remap_atoms(&pos);
    atoms.push(unary_atom(gamma, sp.e0, 1)?);
    atoms.push(unary_atom(gamma, sp.e2, 1)?);
    atoms.push(unary_atom(gamma, 1 << a, pos[sep])?);
    let names: Vec<String> = order.iter().map(|&v| if v < f.free.len() { &f.free[v] } else { &f.bound[v - f.free.len()] }.clone()).collect();
    let pair = PPFormula::new("pair", names[..2].to_vec(), names[2..].to_vec(), atoms)?;
    let pair = eliminate_quantifiers_pair(&pair, gamma)?;

    // Conjoin E0(y) and the quantifier-free pair definition on fresh free
    // variables, inserted before the remaining bound variables.
    let nfree = f.free.len();
    let extra = pair.num_vars() - 2;
    let shift = |v: usize| if v < nfree { v } else { v + extra };
    let mut free = f.free.clone();
    let mut g = f.clone();
    for _ in 0..extra {
        let z = fresh_name(&g, "z");
        g.free.push(z.clone());
        free.push(z);
    }
    let mut out_atoms: Vec<Atom> = f
        .atoms
        .iter()
        .map(|at| Atom { rel: at.rel.clone(), args: at.args.iter().map(|&v| shift(v)).collect() })
        .collect();
    out_atoms.push(unary_atom(gamma, sp.e0, y)?);
    for at in &pair.atoms {
        let args = at.args.iter().map(|&v| match v {
            0 => sel,
            1 => y,
            _ => nfree + v - 2,
        });
        out_atoms.push(Atom { rel: at.rel.clone(), args: args.collect() });
    }
    PPFormula::new(f.name.clone(), free, f.bound.clone(), out_atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::all_unary;
    use crate::relation::r_b;

    fn gamma3() -> ConstraintLanguage {
        let h = Relation::new(3, 3, [vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 0], vec![1, 0, 1]]).unwrap();
        let mut g = all_unary(3);
        g.insert("RB3", r_b().widen(3).unwrap()).unwrap();
        g.insert("H", h).unwrap();
        g.insert("P", Relation::new(3, 2, [vec![0, 1], vec![1, 2], vec![1, 0], vec![0, 0]]).unwrap()).unwrap();
        g
    }

    #[test]
    fn quantifier_free_pair_is_unchanged() {
        let g = gamma3();
        let f = PPFormula::with_counts("f", 2, 0, vec![Atom::named("P", vec![0, 1]), Atom::named("c0", vec![0])]).unwrap();
        assert_eq!(eliminate_quantifiers_pair(&f, &g).unwrap(), f);
    }

    #[test]
    fn pair_cases() {
        let g = gamma3();
        // x in {0, 1} with P(x, y): y ranges over {1, 0} above x=0 and {2, 0} above x=1.
        let f = PPFormula::with_counts("f", 1, 1, vec![Atom::named("u0_1", vec![0]), Atom::named("P", vec![0, 1])]).unwrap();
        let q = eliminate_quantifiers_pair(&f, &g).unwrap();
        assert!(q.classify().quantifier_free);
        assert_eq!(q.atoms.last().unwrap(), &Atom::named("c0", vec![1]));
        let r = q.evaluate(&g).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.project(&[0]).unwrap(), f.evaluate(&g).unwrap());

        // With y restricted to {1, 2}: {1} above x=0 and {2} above x=1.
        let f = PPFormula::with_counts(
            "f",
            1,
            1,
            vec![Atom::named("u0_1", vec![0]), Atom::named("P", vec![0, 1]), Atom::named("u1_2", vec![1])],
        )
        .unwrap();
        let q = eliminate_quantifiers_pair(&f, &g).unwrap();
        assert_eq!(q.atoms.last().unwrap(), &Atom::named("u1_2", vec![1]));
        assert_eq!(q.evaluate(&g).unwrap().len(), 2);

        let three = PPFormula::with_counts("f", 1, 0, vec![]).unwrap();
        assert!(eliminate_quantifiers_pair(&three, &g).is_err());
    }

    #[test]
    fn hard_case_for_extensions() {
        let g = gamma3();
        // Above the three tuples of R≠≠≠ the variable y takes {0}, {1}, {0, 1}.
        let mut atoms = vec![Atom::named("RB3", (0..8).collect())];
        atoms.push(Atom::named("H", vec![0, 1, 8]));
        let phi = PPFormula::with_counts("phi", 8, 1, atoms).unwrap();
        let want = phi.evaluate(&g).unwrap();
        let q = qfpp_extension(&phi, &g).unwrap();
        assert!(q.classify().quantifier_free);
        let got = q.evaluate(&g).unwrap();
        assert!(detect_rb_extension(&got).is_some());
        assert_eq!(got.project(&(0..8).collect::<Vec<_>>()).unwrap(), want);
        assert!(q.arity() > 9);
    }

    #[test]
    fn constant_case_promotes() {
        let g = gamma3();
        let atoms = vec![Atom::named("RB3", (0..8).collect()), Atom::named("c2", vec![8])];
        let phi = PPFormula::with_counts("phi", 8, 1, atoms.clone()).unwrap();
        let q = qfpp_extension(&phi, &g).unwrap();
        assert_eq!(q.atoms, atoms);
        assert_eq!(q.arity(), 9);
        let plain = PPFormula::atom_of("RB3", 8);
        assert_eq!(qfpp_extension(&plain, &g).unwrap(), plain);
    }
}
