//! Node-count scaling of the anchored branching algorithm.

use super::gen::adversarial_rd;
use crate::error::{CspError, Result};
use crate::par::{self, Mode};
use crate::solvers::{branch_rd, SolverConfig, Status};
use serde::Serialize;
use std::time::Duration;

#[derive(Clone, Debug)]
pub struct ScalingConfig {
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub nodes: u64,
    /// `sat`, `unsat` or `timeout`.
    pub status: String,
    pub time_ms: f64,
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub k: usize,
    /// `(n, largest node count over the seeds)` for every uncensored `n`.
    pub points: Vec<(usize, u64)>,
    /// Least-squares slope of `log3(nodes)` against `n`; `None` with fewer
    /// than four points.
    pub slope_log3: Option<f64>,
    /// The same slope in bits per variable.
    pub slope_bits: Option<f64>,
    pub intercept_log3: Option<f64>,
    /// `k² / (k(k-1)(k-2))`.
    pub predicted_unfloored: f64,
    /// `floor(k(k-1)(k-2) / k²)`, the variables the recurrence removes per branch.
    pub removal: usize,
    /// `1 / removal` in log3 units per variable; `None` when `removal` is 0.
    pub bound_exponent: Option<f64>,
    /// Smallest `C` with `nodes <= C * 3^(n * bound_exponent)` on every point.
    pub c: Option<f64>,
}

/// Runs `branch_rd` on adversarial instances for every `(k, n, seed)`.
/// Entries that exceed the budget are kept as censored rows.
pub fn bench_scaling(cfg: &ScalingConfig) -> Result<(Vec<BenchRow>, Vec<ExponentFit>)> {
    let mut items = Vec::new();
    for &k in &cfg.ks {
        for &n in &cfg.ns {
            for &seed in &cfg.seeds {
                items.push((k, n, seed));
            }
        }
    }
    let solver = SolverConfig { max_nodes: cfg.max_nodes, time_limit: cfg.time_limit };
    let rows = par::map(cfg.mode, &items, |&(k, n, seed)| -> Result<BenchRow> {
        let inst = adversarial_rd(k, n, seed)?;
        let start = std::time::Instant::now();
        let row = |nodes, status: &str, censored| BenchRow {
            k,
            n,
            seed,
            nodes,
            status: status.into(),
            time_ms: start.elapsed().as_secs_f64() * 1e3,
            censored,
        };
        match branch_rd(&inst, &solver) {
            Ok(res) => Ok(row(res.node_count, if res.status == Status::Sat { "sat" } else { "unsat" }, false)),
            Err(CspError::Budget(_)) => Ok(row(cfg.max_nodes, "timeout", true)),
            Err(e) => Err(e),
        }
    });
    let rows: Vec<BenchRow> = rows.into_iter().collect::<Result<_>>()?;
    let fits = cfg.ks.iter().map(|&k| fit_exponent(k, &rows)).collect();
    Ok((rows, fits))
}

/// Fits the rows of domain `k`, ignoring censored ones.
pub fn fit_exponent(k: usize, rows: &[BenchRow]) -> ExponentFit {
    let mut points: Vec<(usize, u64)> = Vec::new();
    for r in rows.iter().filter(|r| r.k == k && !r.censored) {
        match points.iter_mut().find(|(n, _)| *n == r.n) {
            Some(p) => p.1 = p.1.max(r.nodes),
            None => points.push((r.n, r.nodes)),
        }
    }
    points.sort_unstable();
    let removal = if k >= 2 { k * (k - 1) * (k - 2) / (k * k) } else { 0 };
    let bound_exponent = (removal > 0).then(|| 1.0 / removal as f64);
    let (slope, intercept) = if points.len() >= 4 {
        let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = points.iter().map(|p| (p.1.max(1) as f64).log(3.0)).collect();
        let (a, b) = least_squares(&xs, &ys);
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    let c = bound_exponent.map(|e| points.iter().map(|&(n, nodes)| nodes as f64 / 3f64.powf(n as f64 * e)).fold(0.0, f64::max));
    ExponentFit {
        k,
        points,
        slope_log3: slope,
        slope_bits: slope.map(|s| s * 3f64.log2()),
        intercept_log3: intercept,
        predicted_unfloored: if k >= 3 { (k * k) as f64 / (k * (k - 1) * (k - 2)) as f64 } else { f64::INFINITY },
        removal,
        bound_exponent,
        c,
    }
}

/// Slope and intercept of the least-squares line through `(xs, ys)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Writes the rows as CSV. Without `with_time` the output depends only on
/// the configuration, so reruns are byte-identical.
pub fn write_rows_csv<W: std::io::Write>(rows: &[BenchRow], with_time: bool, out: W) -> Result<()> {
    let io = |e: csv::Error| CspError::Argument(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k", "n", "seed", "nodes", "status"];
    if with_time {
        header.push("time_ms");
    }
    header.push("censored");
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![r.k.to_string(), r.n.to_string(), r.seed.to_string(), r.nodes.to_string(), r.status.clone()];
        if with_time {
            rec.push(format!("{:.3}", r.time_ms));
        }
        rec.push(r.censored.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CspError::Argument(format!("csv: {e}")))?;
    Ok(())
}
