use super::report::Reduction;
use super::work::Work;
use crate::error::Result;
use crate::extensions::{col3, column_index};
use crate::instance::Instance;
use crate::relation::{full_mask, make_rd, mask_of};

/// Name of the relation in `inst` equal to `r`, or `default`.
pub(crate) fn name_in(inst: &Instance, r: &crate::relation::Relation, default: &str) -> String {
    inst.relations().iter().find(|(_, x)| x == r).map_or_else(|| default.to_string(), |(n, _)| n.clone())
}

/// Removes every unary constraint from an instance over R_D and unary
/// relations.
///
/// The unary constraints on a variable `x` are intersected into `E`. If `x`
/// sits at position `i` of an R_D constraint and `E` cuts the column's value
/// set down to `A`, the variable at the position whose column agrees with
/// column `i` on rows with a value in `A` (and is `min A` elsewhere) is
/// identified with `x`, which excludes exactly the rows outside `A`.
pub fn eliminate_unary(inst: &Instance) -> Result<Reduction> {
    let k = inst.domain();
    let rd = make_rd(k)?;
    let mut w = Work::from_instance(inst);
    let main = w.unify(&name_in(inst, &rd, "RD"), &rd)?;
    w.check_shape(&[main], "eliminate_unary")?;
    let index = column_index(&rd);
    while !w.unsat {
        let Some(ci) = w.live().find(|&c| w.is_unary(c)) else { break };
        let x = w.args(ci)[0];
        let mut e = full_mask(k);
        for (cj, m) in w.unaries_of(x) {
            e &= m;
            w.remove(cj);
        }
        let Some(&(c, i)) = w.occurrences(x).first() else {
            if e == 0 {
                w.mark_unsat("empty unary on an isolated variable");
            }
            continue;
        };
        let col = col3(&rd, i);
        let proj = mask_of(col);
        let a = e & proj;
        if a == 0 {
            w.mark_unsat("unary disjoint from the column");
        } else if a != proj {
            let m = a.trailing_zeros() as u8;
            let target = col.map(|v| if a & (1 << v) != 0 { v } else { m });
            let z = w.args(c)[index[&target]];
            w.substitute(z, x);
        }
    }
    let (out, notes) = w.finish(rd.arity());
    Ok(Reduction::new("eliminate_unary", inst, out, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::unary_relation;
    use crate::solvers::{brute_force, SolverConfig};

    fn with_unary(k: usize, mask: u32, pos: usize) -> Instance {
        let rd = make_rd(k).unwrap();
        let n = rd.arity();
        let mut inst = Instance::new(k, n);
        let r = inst.add_relation("RD", rd).unwrap();
        inst.add_constraint(r, (0..n).collect()).unwrap();
        let u = inst.add_relation("U", unary_relation(k, mask).unwrap()).unwrap();
        inst.add_constraint(u, vec![pos]).unwrap();
        inst
    }

    #[test]
    fn disjoint_unary_is_unsat() {
        // Position 0 of R≠≠≠ takes values {0, 1}; {1} keeps it, {} kills it.
        let out = eliminate_unary(&with_unary(2, 0, 0)).unwrap();
        assert!(out.instance.has_empty_constraint());
        // Column 7 of R_D(3) is (0,2,1); value set {0,1,2}. With k=3 mask {} is unsat.
        let out = eliminate_unary(&with_unary(3, 0, 7)).unwrap();
        assert!(out.instance.has_empty_constraint());
    }

    #[test]
    fn covering_unary_is_dropped() {
        let inst = with_unary(2, 0b11, 0);
        let out = eliminate_unary(&inst).unwrap();
        assert_eq!(out.instance.constraints().len(), 1);
        assert_eq!(out.instance.num_vars(), 8);
    }

    #[test]
    fn restricting_unary_identifies() {
        let cfg = SolverConfig::default();
        for k in 2..=3 {
            let n = k * k * k;
            for pos in 0..n {
                for mask in 1..full_mask(k) {
                    let inst = with_unary(k, mask, pos);
                    let out = eliminate_unary(&inst).unwrap();
                    assert!(out.instance.constraints().iter().all(|c| c.args.len() == n));
                    assert!(out.instance.num_vars() <= inst.num_vars());
                    let a = crate::solvers::count_models(&inst, &cfg).unwrap();
                    let b = crate::solvers::count_models(&out.instance, &cfg).unwrap();
                    // Identification keeps one model per row that survives.
                    assert_eq!(a, b, "k={k} pos={pos} mask={mask}");
                    assert_eq!(brute_force(&inst, &cfg).unwrap().status, brute_force(&out.instance, &cfg).unwrap().status);
                }
            }
        }
    }
}
