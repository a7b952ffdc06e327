//! Batch equisatisfiability checks for every reduction step.

use super::gen::{add_random_unaries, generate_over, item_seed, rng_for, GenKind, GeneratorConfig};
use crate::error::{arg, CspError, Result};
use crate::extensions::fixtures::{r_ex, r_ex_prime};
use crate::extensions::saturate;
use crate::formula::{canonical_qfpp, Atom, PPFormula};
use crate::instance::Instance;
use crate::language::{all_unary, ConstraintLanguage};
use crate::par::{self, Mode};
use crate::reductions::{self, samples, Interpretation, Reduction};
use crate::relation::{full_mask, make_rd, r_b, r_neq2, unary_name, Relation};
use crate::solvers::{brute_force, SolverConfig};
use crate::text::write_instance;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Identity,
    QfppInline,
    Dedup3Choice,
    Drop3ChoiceArgs,
    Add2ChoiceArgs,
    LiftRd,
    EliminateUnary,
    LvReduce3Sat,
    ReduceEasiest,
}

impl Step {
    /// Every reduction, without the identity.
    pub const REDUCTIONS: [Step; 8] = [
        Step::QfppInline,
        Step::Dedup3Choice,
        Step::Drop3ChoiceArgs,
        Step::Add2ChoiceArgs,
        Step::LiftRd,
        Step::EliminateUnary,
        Step::LvReduce3Sat,
        Step::ReduceEasiest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Identity => "identity",
            Step::QfppInline => "qfpp_inline",
            Step::Dedup3Choice => "dedup_3choice",
            Step::Drop3ChoiceArgs => "drop_3choice_args",
            Step::Add2ChoiceArgs => "add_2choice_args",
            Step::LiftRd => "lift_rd",
            Step::EliminateUnary => "eliminate_unary",
            Step::LvReduce3Sat => "lv_reduce_3sat",
            Step::ReduceEasiest => "reduce_easiest",
        }
    }

    /// Steps whose variable count may only grow by a constant.
    pub fn is_cv(self) -> bool {
        self != Step::LvReduce3Sat
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Step {
    type Err = CspError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        std::iter::once(Step::Identity)
            .chain(Step::REDUCTIONS)
            .find(|st| st.name() == norm)
            .ok_or_else(|| CspError::Argument(format!("unknown step {s}")))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BatchConfig {
    pub k: usize,
    /// Variables per input instance.
    pub n: usize,
    /// Constraints per input instance; drawn from a small range when unset.
    pub m: Option<usize>,
    pub count: usize,
    pub seed: u64,
    /// Compare satisfiability of input and output with the exhaustive solver.
    pub oracle: bool,
    pub oracle_nodes: u64,
    #[serde(skip)]
    pub mode: Mode,
}

impl BatchConfig {
    pub fn new(k: usize, n: usize, count: usize, seed: u64) -> Self {
        BatchConfig { k, n, m: None, count, seed, oracle: true, oracle_nodes: 20_000_000, mode: Mode::Auto }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureDump {
    pub item: usize,
    pub seed: u64,
    pub reason: String,
    pub input: String,
    pub output: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquisatReport {
    pub step: Step,
    pub k: usize,
    pub n: usize,
    pub count: usize,
    pub passed: usize,
    pub failed: usize,
    /// Items whose oracle run hit the node budget.
    pub undecided: usize,
    pub sat_inputs: usize,
    /// Largest `|V'| - |V|` over the batch.
    pub max_var_delta: i64,
    pub lv_stated_violations: usize,
    pub lv_corrected_violations: usize,
    pub lv_degree_violations: usize,
    pub failures: Vec<FailureDump>,
}

impl EquisatReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.undecided == 0 && self.passed == self.count
    }
}

const MAX_DUMPS: usize = 5;

enum Action {
    Identity,
    Inline(BTreeMap<String, PPFormula>, ConstraintLanguage),
    Dedup(Relation),
    Drop(Relation, Vec<usize>),
    Add(Relation, Vec<usize>),
    Lift(Relation),
    Unary,
    Lv(ConstraintLanguage, Box<Interpretation>),
    Easiest(ConstraintLanguage),
}

struct Variant {
    /// Domain of the input instances.
    k: usize,
    rels: Vec<(String, Relation)>,
    unary_prob: f64,
    degree_bound: Option<usize>,
    action: Action,
}

impl Variant {
    fn new(k: usize, rels: Vec<(String, Relation)>, action: Action) -> Self {
        Variant { k, rels, unary_prob: 0.0, degree_bound: None, action }
    }

    fn unaries(mut self, p: f64) -> Self {
        self.unary_prob = p;
        self
    }

    fn run(&self, inst: &Instance) -> Result<Reduction> {
        match &self.action {
            Action::Identity => Ok(Reduction::identity(inst)),
            Action::Inline(defs, gamma) => reductions::qfpp_inline(inst, defs, gamma),
            Action::Dedup(r) => reductions::dedup_3choice(inst, r),
            Action::Drop(r, kept) => reductions::drop_3choice_args(inst, r, kept),
            Action::Add(r, kept) => reductions::add_2choice_args(inst, r, kept),
            Action::Lift(r) => reductions::lift_rd(inst, r),
            Action::Unary => reductions::eliminate_unary(inst),
            Action::Lv(gamma, interp) => reductions::lv_reduce_3sat(inst, gamma, interp),
            Action::Easiest(gamma) => reductions::reduce_easiest(inst, gamma, None),
        }
    }
}

fn with_columns(r: &Relation, cols: Vec<Vec<u8>>) -> Result<Relation> {
    Relation::from_columns(r.domain(), r.len(), &cols)
}

fn permuted(r: &Relation, dup: usize) -> Result<Relation> {
    let mut cols = r.columns();
    cols.reverse();
    cols.insert(cols.len() / 2, r.column(dup));
    with_columns(r, cols)
}

fn appended(r: &Relation, extra: &[usize]) -> Result<Relation> {
    let mut cols = r.columns();
    cols.extend(extra.iter().map(|&i| r.column(i)));
    with_columns(r, cols)
}

/// The base three-tuple relation used at domain `k`.
fn base(k: usize) -> Result<Relation> {
    match k {
        2 => Ok(r_b()),
        3 => Ok(r_ex()),
        _ => arg(format!("equisat batches are defined for k in {{2, 3}}, got {k}")),
    }
}

/// Three quantifier-free relations over `{R} ∪ unaries`, each given by its
/// canonical definition.
fn inline_variant(k: usize, seed: u64) -> Result<Variant> {
    let r = base(k)?;
    let mut gamma = all_unary(k);
    gamma.insert("R", r.clone())?;
    let mut rng = rng_for(seed);
    let mut rels = Vec::new();
    let mut defs = BTreeMap::new();
    let free = 4;
    for j in 0..3 {
        let mut best = None;
        for _ in 0..20 {
            // Each R-atom reads one row of R through an injective map from
            // values to variables, so that row alone never rules it out.
            let mut atoms = Vec::new();
            for _ in 0..rng.gen_range(1..=2) {
                let row = &r.tuples()[rng.gen_range(0..r.len())];
                let mut vars: Vec<usize> = (0..free).collect();
                vars.shuffle(&mut rng);
                atoms.push(Atom::named("R", row.iter().map(|&v| vars[v as usize]).collect()));
            }
            if rng.gen_bool(0.5) {
                let mask = rng.gen_range(1..full_mask(k));
                atoms.push(Atom::named(unary_name(mask), vec![rng.gen_range(0..free)]));
            }
            let phi = PPFormula::with_counts("D", free, 0, atoms)?;
            let rel = phi.evaluate(&gamma)?;
            let good = !rel.is_empty();
            best = Some(rel);
            if good {
                break;
            }
        }
        let rel = best.expect("at least one attempt");
        let name = format!("D{j}");
        defs.insert(name.clone(), canonical_qfpp(&rel, &gamma)?);
        rels.push((name, rel));
    }
    Ok(Variant::new(k, rels, Action::Inline(defs, gamma)))
}

fn variants(step: Step, k: usize, seed: u64) -> Result<Vec<Variant>> {
    let rd = make_rd(k)?;
    let over = |name: &str, r: &Relation| vec![(name.to_string(), r.clone())];
    let v = match (step, k) {
        (_, k) if !(2..=3).contains(&k) => return arg(format!("equisat batches are defined for k in {{2, 3}}, got {k}")),
        (Step::Identity, _) => vec![Variant::new(k, over("R", &rd), Action::Identity).unaries(0.2)],
        (Step::QfppInline, _) => vec![inline_variant(k, seed)?],
        (Step::Dedup3Choice, 2) => vec![Variant::new(2, over("R", &rd), Action::Dedup(rd.clone())).unaries(0.1)],
        (Step::Dedup3Choice, _) => {
            let (s, _) = saturate(&r_ex_prime())?;
            vec![
                Variant::new(3, over("S", &s), Action::Dedup(s.clone())).unaries(0.1),
                Variant::new(3, over("RD", &rd), Action::Dedup(rd.clone())),
            ]
        }
        (Step::Drop3ChoiceArgs, 2) => {
            let all: Vec<usize> = (0..8).collect();
            vec![Variant::new(2, over("R", &rd), Action::Drop(rd.clone(), all)).unaries(0.1)]
        }
        (Step::Drop3ChoiceArgs, _) => {
            let three = crate::extensions::three_choice_positions(&rd);
            let drop_one: Vec<usize> = (0..rd.arity()).filter(|&i| i != three[0]).collect();
            let drop_all: Vec<usize> = (0..rd.arity()).filter(|i| !three.contains(i)).collect();
            vec![
                Variant::new(3, over("RD", &rd), Action::Drop(rd.clone(), drop_one)).unaries(0.1),
                Variant::new(3, over("RD", &rd), Action::Drop(rd.clone(), drop_all)),
            ]
        }
        (Step::Add2ChoiceArgs, 2) => {
            let kept: Vec<usize> = (0..8).collect();
            let one = appended(&rd, &[0])?;
            let three = appended(&rd, &[3, 6, 5])?;
            vec![
                Variant::new(2, over("R", &one), Action::Add(one.clone(), kept.clone())).unaries(0.1),
                Variant::new(2, over("R", &three), Action::Add(three.clone(), kept)),
            ]
        }
        (Step::Add2ChoiceArgs, _) => {
            let (s, _) = saturate(&r_ex())?;
            let ex = r_ex();
            let without_seventh: Vec<usize> = (0..10).filter(|&i| i != 6).collect();
            vec![
                Variant::new(3, over("S", &s), Action::Add(s.clone(), (0..10).collect())).unaries(0.1),
                Variant::new(3, over("R", &ex), Action::Add(ex.clone(), without_seventh)),
            ]
        }
        (Step::LiftRd, 2) => vec![
            Variant::new(2, over("RD", &rd), Action::Lift(permuted(&rd, 2)?)).unaries(0.1),
            Variant::new(2, over("RD", &rd), Action::Lift(rd.clone())),
        ],
        (Step::LiftRd, _) => {
            let (s, _) = saturate(&r_ex_prime())?;
            vec![
                Variant::new(3, over("RD", &rd), Action::Lift(permuted(&s, 0)?)).unaries(0.1),
                Variant::new(3, over("RD", &rd), Action::Lift(s)),
            ]
        }
        (Step::EliminateUnary, _) => vec![Variant::new(k, over("RD", &rd), Action::Unary).unaries(0.5)],
        (Step::LvReduce3Sat, _) => {
            let pairs: Vec<(ConstraintLanguage, Interpretation)> = if k == 2 {
                vec![samples::identity()]
            } else {
                vec![samples::blocks_of_two(0, false), samples::blocks_of_two(1, false), samples::blocks_of_two(0, true)]
            };
            pairs
                .into_iter()
                .map(|(gamma, interp)| Variant {
                    k: 2,
                    rels: over("Rnn", &r_neq2()),
                    unary_prob: 0.0,
                    degree_bound: Some(2),
                    action: Action::Lv(gamma, Box::new(interp)),
                })
                .collect()
        }
        (Step::ReduceEasiest, 2) => {
            let mut gamma = all_unary(2);
            gamma.insert("R", r_b())?;
            vec![Variant::new(2, over("RD", &rd), Action::Easiest(gamma)).unaries(0.3)]
        }
        (Step::ReduceEasiest, _) => [r_ex(), r_ex_prime()]
            .into_iter()
            .map(|r| {
                let mut gamma = all_unary(3);
                gamma.insert("R", r)?;
                Ok(Variant::new(3, over("RD", &rd), Action::Easiest(gamma)).unaries(0.3))
            })
            .collect::<Result<_>>()?,
    };
    Ok(v)
}

/// Builds input instance `i` of a batch: uniform, planted or noisy in turn.
fn input(variant: &Variant, cfg: &BatchConfig, i: usize) -> Result<Instance> {
    let seed = item_seed(cfg.seed, i);
    let mut rng = rng_for(seed ^ 0x5555);
    let max_arity = variant.rels.iter().map(|(_, r)| r.arity()).max().unwrap_or(1);
    let m = match (cfg.m, variant.degree_bound) {
        (Some(m), _) => m,
        (None, Some(b)) => rng.gen_range(1..=(cfg.n * b / max_arity).max(1)),
        (None, None) => rng.gen_range(1..=3),
    };
    let kind = [GenKind::Uniform, GenKind::Planted, GenKind::Noisy][(i / 2) % 3];
    let gcfg = GeneratorConfig { k: variant.k, n: cfg.n, m, degree_bound: variant.degree_bound, seed };
    let mut inst = match generate_over(&gcfg, &variant.rels, kind) {
        Ok(x) => x,
        Err(_) if kind != GenKind::Uniform => generate_over(&gcfg, &variant.rels, GenKind::Uniform)?,
        Err(e) => return Err(e),
    };
    if variant.unary_prob > 0.0 {
        add_random_unaries(&mut inst, &mut rng, variant.unary_prob)?;
    }
    Ok(inst)
}

enum Outcome {
    Pass { delta: i64, sat: bool, lv: [bool; 3] },
    Fail(FailureDump),
    Undecided,
}

fn check_item(variant: &Variant, cfg: &BatchConfig, i: usize) -> Outcome {
    let seed = item_seed(cfg.seed, i);
    let fail = |reason: String, input: &Instance, output: Option<&Instance>| {
        Outcome::Fail(FailureDump {
            item: i,
            seed,
            reason,
            input: write_instance(input),
            output: output.map(write_instance),
        })
    };
    let inst = match input(variant, cfg, i) {
        Ok(x) => x,
        Err(e) => {
            return Outcome::Fail(FailureDump { item: i, seed, reason: format!("generator: {e}"), input: String::new(), output: None })
        }
    };
    let red = match variant.run(&inst) {
        Ok(r) => r,
        Err(e) => return fail(format!("reduction error: {e}"), &inst, None),
    };
    let out = &red.instance;
    let lv = match &red.report.lv {
        Some(p) => [
            out.num_vars() > p.bound_stated,
            out.num_vars() > p.bound_corrected,
            p.efpp && p.max_degree_out > 3 * p.l,
        ],
        None => [false; 3],
    };
    let mut sat = false;
    if cfg.oracle {
        let sc = SolverConfig { max_nodes: cfg.oracle_nodes, time_limit: None };
        let (a, b) = match (brute_force(&inst, &sc), brute_force(out, &sc)) {
            (Ok(a), Ok(b)) => (a.status, b.status),
            (Err(CspError::Budget(_)), _) | (_, Err(CspError::Budget(_))) => return Outcome::Undecided,
            (Err(e), _) | (_, Err(e)) => return fail(format!("oracle error: {e}"), &inst, Some(out)),
        };
        if a != b {
            return fail(format!("input is {a:?}, output is {b:?}"), &inst, Some(out));
        }
        sat = a == crate::solvers::Status::Sat;
    }
    Outcome::Pass { delta: red.report.var_delta(), sat, lv }
}

/// Runs `step` on `cfg.count` generated instances and compares the
/// satisfiability of every input with that of its output.
pub fn check_equisat(step: Step, cfg: &BatchConfig) -> Result<EquisatReport> {
    let variants = variants(step, cfg.k, cfg.seed)?;
    let items: Vec<usize> = (0..cfg.count).collect();
    let outcomes = par::map(cfg.mode, &items, |&i| check_item(&variants[i % variants.len()], cfg, i));
    let mut rep = EquisatReport {
        step,
        k: cfg.k,
        n: cfg.n,
        count: cfg.count,
        passed: 0,
        failed: 0,
        undecided: 0,
        sat_inputs: 0,
        max_var_delta: i64::MIN,
        lv_stated_violations: 0,
        lv_corrected_violations: 0,
        lv_degree_violations: 0,
        failures: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Pass { delta, sat, lv } => {
                rep.passed += 1;
                rep.sat_inputs += usize::from(sat);
                rep.max_var_delta = rep.max_var_delta.max(delta);
                rep.lv_stated_violations += usize::from(lv[0]);
                rep.lv_corrected_violations += usize::from(lv[1]);
                rep.lv_degree_violations += usize::from(lv[2]);
            }
            Outcome::Fail(dump) => {
                rep.failed += 1;
                if rep.failures.len() < MAX_DUMPS {
                    rep.failures.push(dump);
                }
            }
            Outcome::Undecided => rep.undecided += 1,
        }
    }
    if rep.passed == 0 {
        rep.max_var_delta = 0;
    }
    Ok(rep)
}

/// Largest `max(0, |V'| - |V|)` of `step` at `n` and at `2n`, computed
/// without the oracle.
pub fn cv_growth(step: Step, k: usize, n: usize, count: usize, seed: u64, mode: Mode) -> Result<(i64, i64)> {
    let mut cfg = BatchConfig::new(k, n, count, seed);
    cfg.oracle = false;
    cfg.mode = mode;
    let small = check_equisat(step, &cfg)?;
    cfg.n = 2 * n;
    let large = check_equisat(step, &cfg)?;
    if small.failed + large.failed > 0 {
        return Err(CspError::Internal(format!("{step} failed while measuring growth")));
    }
    Ok((small.max_var_delta.max(0), large.max_var_delta.max(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_names_round_trip() {
        for s in std::iter::once(Step::Identity).chain(Step::REDUCTIONS) {
            assert_eq!(s.name().parse::<Step>().unwrap(), s);
        }
        assert_eq!("lift-rd".parse::<Step>().unwrap(), Step::LiftRd);
        assert!("nope".parse::<Step>().is_err());
    }

    #[test]
    fn identity_passes() {
        for k in [2, 3] {
            let rep = check_equisat(Step::Identity, &BatchConfig::new(k, 6, 30, 1)).unwrap();
            assert!(rep.all_passed(), "{rep:?}");
            assert_eq!(rep.max_var_delta, 0);
        }
    }

    #[test]
    fn small_batches_pass() {
        for step in Step::REDUCTIONS {
            for k in [2, 3] {
                let rep = check_equisat(step, &BatchConfig::new(k, 6, 24, 7)).unwrap();
                assert!(rep.all_passed(), "{step} k={k}: {:?}", rep.failures.first());
            }
        }
    }

    #[test]
    fn modes_agree() {
        let mut cfg = BatchConfig::new(3, 6, 20, 3);
        let a = check_equisat(Step::EliminateUnary, &cfg).unwrap();
        cfg.mode = Mode::Sequential;
        let b = check_equisat(Step::EliminateUnary, &cfg).unwrap();
        assert_eq!((a.passed, a.sat_inputs, a.max_var_delta), (b.passed, b.sat_inputs, b.max_var_delta));
    }

    #[test]
    fn other_domains_are_rejected() {
        assert!(check_equisat(Step::LiftRd, &BatchConfig::new(4, 6, 1, 0)).is_err());
    }
}
