use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use galois_csp::clones::violating_partial_op;
use galois_csp::extensions::{detect_rb_extension, is_saturated, saturate, three_choice_positions, SaturationCheck};
use galois_csp::formula::canonical_qfpp;
use galois_csp::harness::bench::write_rows_csv;
use galois_csp::harness::{
    adversarial_rd, bench_scaling, check_equisat, generate_kind, BatchConfig, GenKind, GeneratorConfig, ScalingConfig, Step,
};
use galois_csp::language::ConstraintLanguage;
use galois_csp::par::{self, Mode};
use galois_csp::reductions::{self, samples, Reduction};
use galois_csp::relation::{make_rd, r_b, r_neq2};
use galois_csp::solvers::{branch_generic, branch_rd, brute_force, SolveResult, SolverConfig};
use galois_csp::text::{
    parse_formulas, parse_instance, parse_language, parse_relations, write_formula, write_instance, write_relation, write_saturation_map,
    write_witness,
};
use galois_csp::{Instance, PPFormula, Relation};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser)]
#[command(name = "galois-csp", version, about = "Finite-domain CSP reductions, solvers and checks")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget per solve, in milliseconds.
    #[arg(long, global = true)]
    budget_ms: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Run batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Decide an instance.
    Solve(SolveArgs),
    /// Apply one reduction step to an instance.
    Reduce(ReduceArgs),
    /// Saturate a three-tuple relation.
    Saturate(RelArgs),
    /// Look for an R^B pattern and report saturation.
    Detect(RelArgs),
    /// Decide quantifier-free definability of a relation over a language.
    QfppCheck(QfppArgs),
    /// Run a batch equisatisfiability check.
    CheckEquisat(EquisatArgs),
    /// Node-count scaling of the R_D branching algorithm.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    /// R_D(k).
    Rd,
    /// The Boolean R≠≠≠.
    Rb,
    /// The Boolean R≠≠.
    Rnn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Uniform,
    Planted,
    Noisy,
    Adversarial,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Kind::Uniform)]
    kind: Kind,
    /// Relation file; its first relation is used.
    #[arg(long, conflicts_with = "builtin")]
    rel: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    #[arg(short, long, default_value_t = 3)]
    k: usize,
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(short, long, default_value_t = 3)]
    m: usize,
    /// Maximum number of argument positions per variable.
    #[arg(long)]
    degree_bound: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Oracle,
    Generic,
    Rd,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = SolverKind::Oracle)]
    solver: SolverKind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 200_000_000)]
    max_nodes: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpKind {
    Identity,
    Blocks,
    BlocksBound,
    BlocksEq,
}

#[derive(Args)]
struct ReduceArgs {
    /// Step name, e.g. lift_rd or eliminate-unary.
    #[arg(long)]
    step: String,
    #[arg(long = "in")]
    input: PathBuf,
    /// Relation or language file the step needs.
    #[arg(long)]
    rel: Option<PathBuf>,
    /// Formula file (definitions for qfpp_inline, an R^B definition for reduce_easiest).
    #[arg(long)]
    defs: Option<PathBuf>,
    /// 1-based kept positions for drop_3choice_args and add_2choice_args.
    #[arg(long, value_delimiter = ',')]
    keep: Vec<usize>,
    /// Interpretation for lv_reduce_3sat.
    #[arg(long, value_enum, default_value_t = InterpKind::Identity)]
    interp: InterpKind,
    /// Where to write the report; standard error when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RelArgs {
    #[arg(long)]
    rel: PathBuf,
    /// Where to write the saturation map.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Args)]
struct QfppArgs {
    #[arg(long)]
    rel: PathBuf,
    #[arg(long)]
    lang: PathBuf,
}

#[derive(Args)]
struct EquisatArgs {
    #[arg(long)]
    step: String,
    #[arg(short, long, default_value_t = 2)]
    k: usize,
    #[arg(short, long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Skip the oracle and only measure variable counts.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [5, 6])]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [26, 46, 66, 86, 106, 126])]
    ns: Vec<usize>,
    /// Number of seeds per (k, n), starting at --seed.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 50_000_000)]
    max_nodes: u64,
    /// Leave timings out of the CSV so reruns are byte-identical.
    #[arg(long)]
    no_time: bool,
    /// Where to write the fitted exponents as JSON.
    #[arg(long)]
    fits: Option<PathBuf>,
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn load_instance(p: &Path) -> Result<Instance> {
    Ok(parse_instance(&read(p)?, p.parent())?)
}

fn load_language(p: &Path) -> Result<ConstraintLanguage> {
    Ok(parse_language(&read(p)?)?)
}

fn first_relation(p: &Path) -> Result<(String, Relation)> {
    let rels = parse_relations(&read(p)?)?;
    rels.into_iter().next().with_context(|| format!("{} has no relation", p.display()))
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(v)?))
}

/// Writes `v` as JSON, or as a one-row CSV of its scalar fields.
fn emit_record(cli: &Cli, v: &Value) -> Result<()> {
    if cli.format == Format::Json {
        return emit_json(&cli.out, v);
    }
    let obj = v.as_object().context("record is not an object")?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fields: Vec<(&String, &Value)> = obj.iter().filter(|(_, x)| !x.is_array() && !x.is_object()).collect();
    w.write_record(fields.iter().map(|(k, _)| k.as_str()))?;
    w.write_record(fields.iter().map(|(_, x)| match x {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }))?;
    emit(&cli.out, &String::from_utf8(w.into_inner()?)?)
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let inst = match a.kind {
        Kind::Adversarial => adversarial_rd(a.k, a.n, cli.seed)?,
        kind => {
            let r = match (&a.rel, a.builtin) {
                (Some(p), _) => first_relation(p)?.1,
                (None, Some(Builtin::Rb)) => r_b(),
                (None, Some(Builtin::Rnn)) => r_neq2(),
                (None, Some(Builtin::Rd) | None) => make_rd(a.k)?,
            };
            let kind = match kind {
                Kind::Planted => GenKind::Planted,
                Kind::Noisy => GenKind::Noisy,
                _ => GenKind::Uniform,
            };
            let cfg = GeneratorConfig { k: r.domain(), n: a.n, m: a.m, degree_bound: a.degree_bound, seed: cli.seed };
            generate_kind(&cfg, &r, kind)?
        }
    };
    emit(&cli.out, &write_instance(&inst))
}

fn solve_json(res: &SolveResult) -> Value {
    json!({
        "status": res.status,
        "node_count": res.node_count,
        "time_ms": res.wall_time.as_secs_f64() * 1e3,
        "model": res.model.as_ref().map(|m| m.iter().map(|&v| v as u64).collect::<Vec<_>>()),
        "warnings": res.warnings,
    })
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> Result<()> {
    let inst = load_instance(&a.input)?;
    let cfg = SolverConfig { max_nodes: a.max_nodes, time_limit: cli.budget_ms.map(Duration::from_millis) };
    let res = match a.solver {
        SolverKind::Oracle => brute_force(&inst, &cfg)?,
        SolverKind::Generic => branch_generic(&inst, &cfg)?,
        SolverKind::Rd => branch_rd(&inst, &cfg)?,
    };
    emit_record(cli, &solve_json(&res))
}

fn zero_based(keep: &[usize]) -> Result<Vec<usize>> {
    keep.iter().map(|&p| if p == 0 { bail!("positions are 1-based") } else { Ok(p - 1) }).collect()
}

fn cmd_reduce(cli: &Cli, a: &ReduceArgs) -> Result<()> {
    let step: Step = a.step.parse()?;
    let inst = load_instance(&a.input)?;
    let need_rel = || -> Result<(String, Relation)> {
        let p = a.rel.as_ref().with_context(|| format!("{step} needs --rel"))?;
        first_relation(p)
    };
    let defs = |p: &Option<PathBuf>| -> Result<Vec<PPFormula>> {
        match p {
            Some(p) => Ok(parse_formulas(&read(p)?)?),
            None => Ok(Vec::new()),
        }
    };
    let red: Reduction = match step {
        Step::Identity => Reduction::identity(&inst),
        Step::QfppInline => {
            let gamma = load_language(a.rel.as_ref().context("qfpp_inline needs --rel with the language")?)?;
            let map: BTreeMap<String, PPFormula> = defs(&a.defs)?.into_iter().map(|f| (f.name.clone(), f)).collect();
            reductions::qfpp_inline(&inst, &map, &gamma)?
        }
        Step::Dedup3Choice => reductions::dedup_3choice(&inst, &need_rel()?.1)?,
        Step::Drop3ChoiceArgs => {
            let r = need_rel()?.1;
            let kept = if a.keep.is_empty() {
                let three = three_choice_positions(&r);
                (0..r.arity()).filter(|i| !three.contains(i)).collect()
            } else {
                zero_based(&a.keep)?
            };
            reductions::drop_3choice_args(&inst, &r, &kept)?
        }
        Step::Add2ChoiceArgs => {
            if a.keep.is_empty() {
                bail!("add_2choice_args needs --keep");
            }
            reductions::add_2choice_args(&inst, &need_rel()?.1, &zero_based(&a.keep)?)?
        }
        Step::LiftRd => reductions::lift_rd(&inst, &need_rel()?.1)?,
        Step::EliminateUnary => reductions::eliminate_unary(&inst)?,
        Step::LvReduce3Sat => {
            let (gamma, interp) = match a.interp {
                InterpKind::Identity => samples::identity(),
                InterpKind::Blocks => samples::blocks_of_two(0, false),
                InterpKind::BlocksBound => samples::blocks_of_two(1, false),
                InterpKind::BlocksEq => samples::blocks_of_two(0, true),
            };
            reductions::lv_reduce_3sat(&inst, &gamma, &interp)?
        }
        Step::ReduceEasiest => {
            let gamma = load_language(a.rel.as_ref().context("reduce_easiest needs --rel with the language")?)?.with_all_unary();
            let phi = defs(&a.defs)?.into_iter().next();
            reductions::reduce_easiest(&inst, &gamma, phi.as_ref())?
        }
    };
    emit(&cli.out, &write_instance(&red.instance))?;
    let report = serde_json::to_string_pretty(&red.report)?;
    match &a.report {
        Some(p) => std::fs::write(p, format!("{report}\n")).with_context(|| format!("cannot write {}", p.display()))?,
        None => eprintln!("{report}"),
    }
    Ok(())
}

fn cmd_saturate(cli: &Cli, a: &RelArgs) -> Result<()> {
    let (name, r) = first_relation(&a.rel)?;
    let (s, map) = saturate(&r)?;
    emit(&cli.out, &write_relation(&format!("{name}_sat"), &s))?;
    if let Some(p) = &a.map {
        std::fs::write(p, write_saturation_map(&map))?;
    }
    Ok(())
}

fn cmd_detect(cli: &Cli, a: &RelArgs) -> Result<()> {
    let (name, r) = first_relation(&a.rel)?;
    let witness = detect_rb_extension(&r);
    let saturation = if r.len() == 3 {
        match is_saturated(&r)? {
            SaturationCheck::Saturated => json!({ "saturated": true }),
            SaturationCheck::Missing { column, tau, vector } => json!({
                "saturated": false,
                "column": column + 1,
                "tau": tau.map(|t| t + 1),
                "missing": vector,
            }),
        }
    } else {
        Value::Null
    };
    let v = json!({
        "relation": name,
        "rb_extension": witness.as_ref().map(|w| json!({
            "a": w.a,
            "b": w.b,
            "rows": w.rows.map(|x| x + 1),
            "positions": w.indices.map(|x| x + 1),
        })),
        "saturation": saturation,
        "three_choice_positions": three_choice_positions_safe(&r),
    });
    emit_json(&cli.out, &v)
}

fn three_choice_positions_safe(r: &Relation) -> Vec<usize> {
    if r.len() == 3 {
        three_choice_positions(r).into_iter().map(|i| i + 1).collect()
    } else {
        Vec::new()
    }
}

fn cmd_qfpp(cli: &Cli, a: &QfppArgs) -> Result<()> {
    let (name, r) = first_relation(&a.rel)?;
    let lang = load_language(&a.lang)?;
    let witness = violating_partial_op(&r, &lang)?;
    let formula = canonical_qfpp(&r, &lang)?;
    let defines = formula.evaluate(&lang)? == r;
    let v = json!({
        "relation": name,
        "qfpp_definable": witness.is_none(),
        "canonical_defines": defines,
        "formula": write_formula(&formula).trim_end(),
        "witness": witness.as_ref().map(write_witness),
    });
    emit_record(cli, &v)
}

fn cmd_equisat(cli: &Cli, a: &EquisatArgs) -> Result<()> {
    let step: Step = a.step.parse()?;
    let mut cfg = BatchConfig::new(a.k, a.n, a.count, cli.seed);
    cfg.oracle = !a.no_oracle;
    cfg.mode = if cli.sequential { Mode::Sequential } else { Mode::Auto };
    let rep = check_equisat(step, &cfg)?;
    emit_record(cli, &serde_json::to_value(&rep)?)?;
    if !rep.all_passed() {
        bail!("{} of {} items failed, {} undecided", rep.failed, rep.count, rep.undecided);
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let cfg = ScalingConfig {
        ks: a.ks.clone(),
        ns: a.ns.clone(),
        seeds: (cli.seed..cli.seed + a.seeds).collect(),
        max_nodes: a.max_nodes,
        time_limit: cli.budget_ms.map(Duration::from_millis),
        mode: if cli.sequential { Mode::Sequential } else { Mode::Auto },
    };
    let (rows, fits) = bench_scaling(&cfg)?;
    match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_rows_csv(&rows, !a.no_time, &mut buf)?;
            emit(&cli.out, &String::from_utf8(buf)?)?;
        }
        Format::Json => emit_json(&cli.out, &json!({ "rows": rows, "fits": fits }))?,
    }
    if let Some(p) = &a.fits {
        std::fs::write(p, serde_json::to_string_pretty(&fits)?)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    par::init_threads_from_env();
    match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(&cli, a),
        Cmd::Solve(a) => cmd_solve(&cli, a),
        Cmd::Reduce(a) => cmd_reduce(&cli, a),
        Cmd::Saturate(a) => cmd_saturate(&cli, a),
        Cmd::Detect(a) => cmd_detect(&cli, a),
        Cmd::QfppCheck(a) => cmd_qfpp(&cli, a),
        Cmd::CheckEquisat(a) => cmd_equisat(&cli, a),
        Cmd::Bench(a) => cmd_bench(&cli, a),
    }
}
