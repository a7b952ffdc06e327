//! Seeded instance generators.

use crate::error::{arg, Result};
use crate::instance::Instance;
use crate::relation::{full_mask, make_rd, unary_name, unary_relation, Relation};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GeneratorConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    /// Maximum number of argument positions a variable may fill, which also
    /// bounds the number of constraints it occurs in.
    pub degree_bound: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    /// Uniformly random argument tuples.
    #[default]
    Uniform,
    /// A hidden assignment satisfies every constraint.
    Planted,
    /// Planted, then about a fifth of the arguments redrawn uniformly.
    Noisy,
}

const RETRIES: usize = 1000;

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of item `i` of a batch seeded with `seed`.
pub fn item_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn check(cfg: &GeneratorConfig, r: &Relation) -> Result<()> {
    if r.domain() != cfg.k {
        return arg(format!("relation domain {} differs from k = {}", r.domain(), cfg.k));
    }
    if cfg.n == 0 && cfg.m > 0 && r.arity() > 0 {
        return arg("constraints need at least one variable");
    }
    if let Some(b) = cfg.degree_bound {
        if cfg.m * r.arity() > cfg.n * b {
            return arg(format!("{} constraints of arity {} cannot fit {} variables of degree at most {b}", cfg.m, r.arity(), cfg.n));
        }
    }
    Ok(())
}

/// Draws one argument tuple position by position. `pick` proposes a
/// variable; with a degree bound, proposals the variable has no room for are
/// redrawn.
fn draw_args(
    rng: &mut ChaCha8Rng,
    arity: usize,
    deg: &mut [usize],
    bound: Option<usize>,
    mut pick: impl FnMut(&mut ChaCha8Rng, usize) -> usize,
) -> Result<Vec<usize>> {
    let mut args = Vec::with_capacity(arity);
    for p in 0..arity {
        let mut tries = 0;
        loop {
            let v = pick(rng, p);
            if bound.is_none_or(|b| deg[v] < b) {
                deg[v] += 1;
                args.push(v);
                break;
            }
            tries += 1;
            if tries > RETRIES {
                return arg("degree bound could not be met within the retry cap");
            }
        }
    }
    Ok(args)
}

/// `m` constraints over `r` with uniformly random argument tuples.
pub fn generate(cfg: &GeneratorConfig, r: &Relation) -> Result<Instance> {
    generate_kind(cfg, r, GenKind::Uniform)
}

pub fn generate_kind(cfg: &GeneratorConfig, r: &Relation, kind: GenKind) -> Result<Instance> {
    generate_over(cfg, &[("R".to_string(), r.clone())], kind)
}

/// Like [`generate_kind`], drawing the relation of each constraint uniformly
/// from `rels`. A planted assignment satisfies every constraint whose
/// relation has a row using only values the hidden assignment takes.
pub fn generate_over(cfg: &GeneratorConfig, rels: &[(String, Relation)], kind: GenKind) -> Result<Instance> {
    if rels.is_empty() {
        return arg("no relations to draw from");
    }
    for (_, r) in rels {
        check(cfg, r)?;
    }
    let mut rng = rng_for(cfg.seed);
    let mut inst = Instance::new(cfg.k, cfg.n);
    let idx: Vec<usize> = rels.iter().map(|(name, r)| inst.add_relation(name.clone(), r.clone())).collect::<Result<_>>()?;
    let mut hidden: Vec<u8> = (0..cfg.n).map(|_| rng.gen_range(0..cfg.k) as u8).collect();
    if cfg.n >= cfg.k {
        // Every value is taken, so every row can be planted.
        let spots = rand::seq::index::sample(&mut rng, cfg.n, cfg.k);
        for (d, v) in spots.into_iter().enumerate() {
            hidden[v] = d as u8;
        }
    }
    let mut by_value: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
    for (v, &x) in hidden.iter().enumerate() {
        by_value[x as usize].push(v);
    }
    let mut deg = vec![0; cfg.n];
    for _ in 0..cfg.m {
        let which = rng.gen_range(0..rels.len());
        let r = &rels[which].1;
        let fits: Vec<&Vec<u8>> = r.tuples().iter().filter(|t| t.iter().all(|&v| !by_value[v as usize].is_empty())).collect();
        let args = if kind == GenKind::Uniform || fits.is_empty() {
            draw_args(&mut rng, r.arity(), &mut deg, cfg.degree_bound, |g, _| g.gen_range(0..cfg.n))?
        } else {
            let row = fits[rng.gen_range(0..fits.len())].clone();
            let noisy = kind == GenKind::Noisy;
            draw_args(&mut rng, r.arity(), &mut deg, cfg.degree_bound, |g, p| {
                let pool = &by_value[row[p] as usize];
                if noisy && g.gen_bool(0.2) {
                    g.gen_range(0..cfg.n)
                } else {
                    pool[g.gen_range(0..pool.len())]
                }
            })?
        };
        inst.add_constraint(idx[which], args)?;
    }
    Ok(inst)
}

/// Adds, for each variable with probability `p`, a unary constraint with a
/// uniformly random non-empty value set (possibly full).
pub fn add_random_unaries(inst: &mut Instance, rng: &mut ChaCha8Rng, p: f64) -> Result<()> {
    let k = inst.domain();
    for v in 0..inst.num_vars() {
        if rng.gen_bool(p) {
            let mask = rng.gen_range(1..=full_mask(k));
            let idx = inst.add_relation(unary_name(mask), unary_relation(k, mask)?)?;
            inst.add_constraint(idx, vec![v])?;
        }
    }
    Ok(())
}

/// An instance over R_D on which the anchored branching algorithm has to
/// branch as much as its pruning allows, ending in a constraint no row of
/// which fits.
///
/// Each block is one constraint with two live rows: the positions are grouped
/// by their values in rows 1 and 2, the `k` groups with equal values share one
/// variable per value across all blocks, and each of the other `k² - k`
/// groups gets a fresh variable. Such a constraint fits rows 1 and 2 but not
/// row 3, and blocks share only the equal-value variables, so every
/// combination of choices is explored before the final constraint fails.
/// Blocks are added while variables last; the rest stay unconstrained.
pub fn adversarial_rd(k: usize, n: usize, seed: u64) -> Result<Instance> {
    let rd = make_rd(k)?;
    let t = rd.tuples();
    let per_block = k * k - k;
    if n < k + 1 {
        return arg(format!("adversarial instances need at least {} variables", k + 1));
    }
    let mut rng = rng_for(seed);
    let mut inst = Instance::new(k, n);
    let idx = inst.add_relation("RD", rd.clone())?;
    let shared: Vec<usize> = (0..k).collect();
    let blocks = (n - k - 1) / per_block;
    let mut next = k;
    for _ in 0..blocks {
        let mut fresh: Vec<usize> = (next..next + per_block).collect();
        fresh.shuffle(&mut rng);
        next += per_block;
        let mut slot = 0;
        let mut class_var = vec![usize::MAX; k * k];
        let args = (0..rd.arity())
            .map(|p| {
                let (a, b) = (t[0][p] as usize, t[1][p] as usize);
                if a == b {
                    return shared[a];
                }
                let c = a * k + b;
                if class_var[c] == usize::MAX {
                    class_var[c] = fresh[slot];
                    slot += 1;
                }
                class_var[c]
            })
            .collect();
        inst.add_constraint(idx, args)?;
    }
    // The last variable at every position: no row fits.
    inst.add_constraint(idx, vec![n - 1; rd.arity()])?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::r_neq2;

    fn cfg(m: usize, b: Option<usize>, seed: u64) -> GeneratorConfig {
        GeneratorConfig { k: 2, n: 12, m, degree_bound: b, seed }
    }

    #[test]
    fn empty_and_deterministic() {
        let r = r_neq2();
        let i = generate(&cfg(0, None, 1), &r).unwrap();
        assert_eq!((i.num_vars(), i.constraints().len()), (12, 0));
        for kind in [GenKind::Uniform, GenKind::Planted, GenKind::Noisy] {
            assert_eq!(generate_kind(&cfg(5, None, 9), &r, kind).unwrap(), generate_kind(&cfg(5, None, 9), &r, kind).unwrap());
        }
        assert_ne!(generate(&cfg(5, None, 9), &r).unwrap(), generate(&cfg(5, None, 10), &r).unwrap());
    }

    #[test]
    fn degree_bound_is_respected() {
        let r = r_neq2();
        for seed in 0..200 {
            let i = generate(&cfg(4, Some(2), seed), &r).unwrap();
            assert!(i.max_degree() <= 2 && i.max_occurrences() <= 2);
        }
        assert!(generate(&cfg(30, Some(2), 0), &r).is_err());
    }

    #[test]
    fn planted_is_satisfiable() {
        let rd = make_rd(3).unwrap();
        for seed in 0..20 {
            let c = GeneratorConfig { k: 3, n: 9, m: 3, degree_bound: None, seed };
            let i = generate_kind(&c, &rd, GenKind::Planted).unwrap();
            let s = crate::solvers::brute_force(&i, &Default::default()).unwrap();
            assert!(s.is_sat(), "seed {seed}");
        }
    }

    #[test]
    fn adversarial_shape() {
        let i = adversarial_rd(5, 26, 3).unwrap();
        assert_eq!(i.constraints().len(), 2);
        assert!(!crate::solvers::brute_force(&i, &Default::default()).unwrap().is_sat());
    }
}
