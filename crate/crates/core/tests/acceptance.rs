//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero when a criterion
//! other than the scaling comparison fails.

use galois_csp::clones::violating_partial_op_with;
use galois_csp::extensions::fixtures::{r_ex, r_ex_prime, saturated_ex};
use galois_csp::extensions::{columns3, is_saturated, rb_pattern, saturate, SaturationCheck};
use galois_csp::formula::canonical_qfpp;
use galois_csp::harness::{
    bench_scaling, check_equisat, cv_growth, generate_over, BatchConfig, GenKind, GeneratorConfig, ScalingConfig, Step,
};
use galois_csp::language::ConstraintLanguage;
use galois_csp::par::{self, Mode};
use galois_csp::relation::{all_tuples, make_rd, r_b, unary_name, unary_relation};
use galois_csp::solvers::{branch_generic, branch_rd, brute_force, SolverConfig};
use galois_csp::{CspError, Relation};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, start: Instant, o: &Outcome) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({title}): {verdict} [{:.1}s] {}", start.elapsed().as_secs_f64(), o.detail);
}

fn sorted_columns(r: &Relation) -> Vec<[u8; 3]> {
    let mut c = columns3(r);
    c.sort();
    c
}

fn fixtures() -> Outcome {
    let mut bad = Vec::new();
    if make_rd(2).unwrap() != r_b() {
        bad.push("make_rd(2) differs from R≠≠≠".to_string());
    }
    if make_rd(3).unwrap().arity() != 27 {
        bad.push("make_rd(3) does not have arity 27".into());
    }
    let (s, _) = saturate(&r_ex()).unwrap();
    if sorted_columns(&s) != sorted_columns(&saturated_ex()) || s.arity() != 15 {
        bad.push("saturation of the first example differs from the 15-column matrix".into());
    }
    match is_saturated(&r_ex()).unwrap() {
        SaturationCheck::Missing { vector: [0, 2, 0], .. } => {}
        other => bad.push(format!("first example: expected missing (0,2,0), got {other:?}")),
    }
    match is_saturated(&r_ex_prime()).unwrap() {
        SaturationCheck::Missing { column: 6, .. } => {}
        other => bad.push(format!("second example: expected a gap at position 7, got {other:?}")),
    }
    Outcome { pass: bad.is_empty(), detail: if bad.is_empty() { "all fixtures match".into() } else { bad.join("; ") } }
}

/// Boolean relations with at most three tuples and arity 1..=4, one per
/// class under permutation of coordinates.
fn small_boolean_relations() -> Vec<Relation> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in 1..=4usize {
        let tuples: Vec<Vec<u8>> = all_tuples(2, a).collect();
        let perms = permutations(a);
        let mut subsets: Vec<Vec<usize>> = vec![vec![]];
        for i in 0..tuples.len() {
            subsets.push(vec![i]);
            for j in i + 1..tuples.len() {
                subsets.push(vec![i, j]);
                for l in j + 1..tuples.len() {
                    subsets.push(vec![i, j, l]);
                }
            }
        }
        for s in subsets {
            let key = perms
                .iter()
                .map(|p| {
                    let mut rows: Vec<Vec<u8>> = s.iter().map(|&i| p.iter().map(|&q| tuples[i][q]).collect()).collect();
                    rows.sort();
                    rows
                })
                .min()
                .unwrap();
            if seen.insert((a, key.clone())) {
                out.push(Relation::new(2, a, key).unwrap());
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn galois() -> Outcome {
    let rels = small_boolean_relations();
    let mut langs: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..rels.len() {
        langs.push(vec![i]);
        for j in i + 1..rels.len() {
            langs.push(vec![i, j]);
        }
    }
    let counts = par::map(Mode::Auto, &langs, |members| {
        let gamma = ConstraintLanguage::from_relations(
            2,
            members.iter().enumerate().map(|(i, &m)| (format!("G{i}"), rels[m].clone())),
        )
        .unwrap();
        let (mut discrepancies, mut undecided, mut first) = (0usize, 0usize, None);
        for r in &rels {
            let w = match violating_partial_op_with(r, &gamma, Mode::Sequential, 1_000_000) {
                Ok(w) => w,
                Err(CspError::Budget(_)) => {
                    undecided += 1;
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            let defined = canonical_qfpp(r, &gamma).unwrap().evaluate(&gamma).unwrap() == *r;
            let sound = w.as_ref().is_none_or(|w| w.replays(r));
            if w.is_none() != defined || !sound {
                discrepancies += 1;
                first.get_or_insert_with(|| format!("R = {:?}, Γ = {:?}", r.tuples(), members));
            }
        }
        (discrepancies, undecided, first)
    });
    let discrepancies: usize = counts.iter().map(|c| c.0).sum();
    let undecided: usize = counts.iter().map(|c| c.1).sum();
    let first = counts.iter().find_map(|c| c.2.clone());
    Outcome {
        pass: discrepancies == 0 && undecided == 0,
        detail: format!(
            "{} relation classes, {} languages, {} pairs; {discrepancies} discrepancies, {undecided} undecided{}",
            rels.len(),
            langs.len(),
            rels.len() * langs.len(),
            first.map_or(String::new(), |f| format!("; first: {f}"))
        ),
    }
}

/// A random R^B-extension over `k`: the eight pattern columns for a random
/// pair of values and row order, plus up to six random columns, shuffled.
fn random_extension(rng: &mut ChaCha8Rng, k: usize) -> Relation {
    let a = rng.gen_range(0..k as u8);
    let b = (a + rng.gen_range(1..k as u8)) % k as u8;
    let mut order = [0usize, 1, 2];
    order.shuffle(rng);
    let mut cols: Vec<Vec<u8>> = rb_pattern(a, b)
        .iter()
        .map(|p| {
            let mut c = vec![0; 3];
            for j in 0..3 {
                c[order[j]] = p[j];
            }
            c
        })
        .collect();
    for _ in 0..rng.gen_range(0..=6) {
        cols.push((0..3).map(|_| rng.gen_range(0..k as u8)).collect());
    }
    cols.shuffle(rng);
    Relation::from_columns(k, 3, &cols).unwrap()
}

fn witnesses(cases: &[Relation]) -> usize {
    let hits = par::map(Mode::Auto, cases, |r| {
        let (s, _) = saturate(r).unwrap();
        let gamma = ConstraintLanguage::from_relations(r.domain(), [("R".to_string(), r.clone())]).unwrap();
        violating_partial_op_with(&s, &gamma, Mode::Sequential, 10_000_000).unwrap().is_some()
    });
    hits.into_iter().filter(|&h| h).count()
}

fn saturation_preserved() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut boolean = vec![r_ex()];
    boolean.extend((0..100).map(|_| random_extension(&mut rng, 2)));
    let ternary: Vec<Relation> = (0..100).map(|_| random_extension(&mut rng, 3)).collect();
    let mut arbitrary = Vec::new();
    while arbitrary.len() < 100 {
        let a = rng.gen_range(1..=8);
        let rows: BTreeSet<Vec<u8>> = (0..3).map(|_| (0..a).map(|_| rng.gen_range(0..2u8)).collect()).collect();
        if rows.len() == 3 {
            arbitrary.push(Relation::new(2, a, rows).unwrap());
        }
    }
    let (wb, wt) = (witnesses(&boolean), witnesses(&ternary));
    let grew = ternary.iter().filter(|r| saturate(r).unwrap().0.arity() > r.arity()).count();
    Outcome {
        pass: wb + wt == 0,
        detail: format!(
            "example plus 100 random Boolean R^B-extensions: {wb} witnesses; 100 random extensions over {{0,1,2}} \
             ({grew} not yet saturated): {wt} witnesses; for reference, 100 random Boolean 3-tuple relations without \
             the R^B pattern requirement give {} witnesses",
            witnesses(&arbitrary)
        ),
    }
}

fn soundness(reports: &mut Vec<galois_csp::harness::EquisatReport>) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for step in Step::REDUCTIONS {
        for k in [2, 3] {
            let rep = check_equisat(step, &BatchConfig::new(k, 10, 1000, 0xACCE97)).unwrap();
            if !rep.all_passed() {
                pass = false;
                lines.push(format!(
                    "{step} k={k}: {} failed, {} undecided{}",
                    rep.failed,
                    rep.undecided,
                    rep.failures.first().map_or(String::new(), |f| format!(" ({})", f.reason))
                ));
            }
            reports.push(rep);
        }
    }
    let sat: usize = reports.iter().map(|r| r.sat_inputs).sum();
    let total: usize = reports.iter().map(|r| r.count).sum();
    let mut detail = format!("{} batches of 1000 at n = 10, {sat}/{total} satisfiable inputs", reports.len());
    if !lines.is_empty() {
        detail.push_str("; ");
        detail.push_str(&lines.join("; "));
    }
    Outcome { pass, detail }
}

fn accounting(reports: &[galois_csp::harness::EquisatReport]) -> Outcome {
    let mut bad = Vec::new();
    let mut growth = Vec::new();
    for step in Step::REDUCTIONS.into_iter().filter(|s| s.is_cv()) {
        for k in [2, 3] {
            let (small, large) = cv_growth(step, k, 8, 500, 0xC0 + k as u64, Mode::Auto).unwrap();
            growth.push(small.max(large));
            if small != large {
                bad.push(format!("{step} k={k}: {small} at n=8, {large} at n=16"));
            }
        }
    }
    let lv = |f: fn(&galois_csp::harness::EquisatReport) -> usize| -> usize {
        reports.iter().filter(|r| r.step == Step::LvReduce3Sat).map(f).sum()
    };
    let (stated, corrected, degree) = (lv(|r| r.lv_stated_violations), lv(|r| r.lv_corrected_violations), lv(|r| r.lv_degree_violations));
    if stated + degree > 0 {
        bad.push(format!("lv_reduce_3sat: {stated} bound violations, {degree} degree violations"));
    }
    let detail = format!(
        "CV constants max {} (n and 2n agree on {} step/domain pairs); LV: {stated} stated-bound, {corrected} corrected-bound, {degree} degree violations",
        growth.iter().max().copied().unwrap_or(0),
        growth.len() - bad.iter().filter(|b| b.contains(" at n=")).count(),
    );
    Outcome { pass: bad.is_empty(), detail: if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join("; ")) } }
}

fn solver_agreement() -> Outcome {
    let mut bad = Vec::new();
    let mut sat_total = 0;
    for (k, n) in [(2usize, 12usize), (3, 12), (5, 12)] {
        let rd = make_rd(k).unwrap();
        let items: Vec<u64> = (0..1000).collect();
        let results = par::map(Mode::Auto, &items, |&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50_1E);
            let kind = [GenKind::Uniform, GenKind::Planted, GenKind::Noisy][seed as usize % 3];
            let cfg = GeneratorConfig { k, n, m: rng.gen_range(1..=4), degree_bound: None, seed };
            let mut inst = generate_over(&cfg, &[("RD".to_string(), rd.clone())], kind).unwrap();
            for v in 0..n {
                if rng.gen_bool(0.15) {
                    let mask = rng.gen_range(1..(1u32 << k));
                    let idx = inst.add_relation(unary_name(mask), unary_relation(k, mask).unwrap()).unwrap();
                    inst.add_constraint(idx, vec![v]).unwrap();
                }
            }
            let cfg = SolverConfig::default();
            let oracle = brute_force(&inst, &cfg).unwrap().status;
            let generic = branch_generic(&inst, &cfg).unwrap().status;
            let anchored = branch_rd(&inst, &cfg).unwrap().status;
            (oracle == generic && oracle == anchored, oracle == galois_csp::solvers::Status::Sat, seed)
        });
        let wrong: Vec<u64> = results.iter().filter(|r| !r.0).map(|r| r.2).collect();
        sat_total += results.iter().filter(|r| r.1).count();
        if !wrong.is_empty() {
            bad.push(format!("k={k}: {} disagreements (first seed {})", wrong.len(), wrong[0]));
        }
    }
    let detail = format!("3 x 1000 instances over R_D(k) with unaries, {sat_total} satisfiable");
    Outcome { pass: bad.is_empty(), detail: if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join("; ")) } }
}

fn scaling() -> Outcome {
    let fit = |ns: Vec<usize>| {
        let cfg = ScalingConfig { ks: vec![5, 6], ns, seeds: (0..3).collect(), max_nodes: 50_000_000, time_limit: None, mode: Mode::Auto };
        bench_scaling(&cfg).unwrap().1
    };
    let fits = fit((10..=24).step_by(2).collect());
    let (f5, f6) = (&fits[0], &fits[1]);
    let bits5 = f5.slope_bits.unwrap();
    let bits6 = f6.slope_bits.unwrap();
    let bound_bits = 0.5 * 3f64.log2();
    let under_bound = bits5 <= bound_bits + 0.05;
    let ordered = bits6 < bits5 - 0.02;
    let wide = fit((26..=146).step_by(20).collect());
    Outcome {
        pass: under_bound && ordered,
        detail: format!(
            "n in 10..24: k=5 slope {bits5:.4} bits/var (bound {bound_bits:.4}, C = {:.3e}), k=6 slope {bits6:.4}; \
             within bound: {under_bound}; k=6 below k=5 - 0.02: {ordered}. \
             n in 26..146: k=5 {:.4}, k=6 {:.4} bits/var. Adversarial growth for this algorithm is \
             1/(k^2-k) bits per variable (two live rows need k^2-k fresh variables), so the gap is at most 1/20 - 1/30 = 0.0167 < 0.02",
            f5.c.unwrap(),
            wide[0].slope_bits.unwrap(),
            wide[1].slope_bits.unwrap(),
        ),
    }
}

fn main() {
    // Filter flags from `cargo test -- <filter>` are accepted and ignored.
    let mut hard_failures = 0;
    let mut run = |n: usize, title: &str, hard: bool, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        report(n, title, start, &o);
        if hard && !o.pass {
            hard_failures += 1;
        }
    };
    let mut reports = Vec::new();
    run(1, "fixture fidelity", true, &mut fixtures);
    run(2, "Galois consistency", true, &mut galois);
    run(3, "saturation keeps pPol", true, &mut saturation_preserved);
    run(4, "reduction soundness", true, &mut || soundness(&mut reports));
    run(5, "CV/LV accounting", true, &mut || accounting(&reports));
    run(6, "solver agreement", true, &mut solver_agreement);
    run(7, "scaling", false, &mut scaling);
    if hard_failures > 0 {
        eprintln!("{hard_failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
