//! Experiment drivers: convergence traces, per-user SE distributions,
//! antenna/AP sweeps and run-time benchmarks, each written as CSV.
//!
//! Realization `r` of any experiment is drawn with seed `sim.seed + r`, and
//! realizations are solved on a pool of `exp.workers` threads. Results are
//! collected in realization order, so the worker count only changes wall
//! time. Every CSV starts with a `#` line holding the resolved config.

mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ConfigMap, ExperimentConfig, ExperimentKind, KEYS};

use crate::csvio::{fmt_f64, CsvFile};
use crate::network::{Network, SimParams};
use crate::sinr::build_sinr_terms;
use crate::solver::{alternating_solve, PowerSolver, SolveConfig, SolveResult};
use crate::{Error, Result};

/// Builds the network for `params` and runs the alternating solve.
pub fn solve_realization(params: &SimParams, solve: &SolveConfig) -> Result<SolveResult> {
    let net = Network::generate(params)?;
    let terms = build_sinr_terms(&net.stats, &net.model.beta, &net.pilots, params.antennas)?;
    alternating_solve(&terms, params.zeta_u_watt, solve)
}

/// Runs `job(0..n)` on `workers` threads and returns results in index order.
fn par_map<T, F>(workers: usize, n: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(job).collect())
}

fn header(cfg: &ExperimentConfig) -> String {
    format!("# cellfree {}", cfg.resolved())
}

fn open(cfg: &ExperimentConfig, path: &Path, columns: &[&str]) -> Result<CsvFile> {
    let mut f = CsvFile::create(path)?;
    f.line(&header(cfg))?;
    f.row(columns)?;
    Ok(f)
}

fn prepare(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

fn solve_with(cfg: &ExperimentConfig, solver: PowerSolver) -> SolveConfig {
    cfg.solve.clone().with_solver(solver)
}

/// Files written by an experiment and how many solves hit an iteration cap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub solves: usize,
    pub unconverged: usize,
}

impl RunReport {
    fn count(&mut self, r: &SolveResult) {
        self.solves += 1;
        if !r.converged {
            self.unconverged += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRun {
    pub index: usize,
    pub seed: u64,
    pub apg: SolveResult,
    pub oracle: SolveResult,
}

/// One trace file per realization with the outer-iteration history of the
/// APG and oracle solves, plus `trace_summary.csv`.
///
/// Row 0 of each method is the starting point (full power, first receiver
/// update). Timings are left out so the files are reproducible byte for byte.
pub fn run_trace(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunReport, Vec<TraceRun>)> {
    prepare(out_dir)?;
    let runs = par_map(cfg.workers, cfg.n_realizations, |r| {
        let params = cfg.realization_params(cfg.sim.aps, cfg.sim.antennas, r);
        Ok(TraceRun {
            index: r,
            seed: params.seed,
            apg: solve_realization(&params, &solve_with(cfg, PowerSolver::Apg))?,
            oracle: solve_realization(&params, &solve_with(cfg, PowerSolver::Oracle))?,
        })
    })?;

    let mut report = RunReport::default();
    for run in &runs {
        let path = out_dir.join(format!("trace_r{:03}.csv", run.index));
        let mut f = open(
            cfg,
            &path,
            &[
                "method",
                "outer_iter",
                "min_se",
                "min_sinr",
                "f_true",
                "power_iters",
            ],
        )?;
        for (method, res) in [("apg", &run.apg), ("oracle", &run.oracle)] {
            report.count(res);
            f.row(&[
                method.to_owned(),
                "0".into(),
                fmt_f64(res.initial_min_se),
                fmt_f64(res.initial_min_sinr),
                fmt_f64(1.0 / res.initial_min_sinr),
                "0".into(),
            ])?;
            for h in &res.history {
                f.row(&[
                    method.to_owned(),
                    h.iter.to_string(),
                    fmt_f64(h.min_se),
                    fmt_f64(h.min_sinr),
                    fmt_f64(1.0 / h.min_sinr),
                    h.power_iters.to_string(),
                ])?;
            }
        }
        f.finish()?;
        report.files.push(path);
    }

    let path = out_dir.join("trace_summary.csv");
    let mut f = open(
        cfg,
        &path,
        &[
            "realization",
            "seed",
            "method",
            "min_se",
            "outer_iters",
            "power_iters",
            "converged",
        ],
    )?;
    for run in &runs {
        for (method, res) in [("apg", &run.apg), ("oracle", &run.oracle)] {
            f.row(&[
                run.index.to_string(),
                run.seed.to_string(),
                method.to_owned(),
                fmt_f64(res.min_se),
                res.outer_iters.to_string(),
                res.total_apg_iters.to_string(),
                res.converged.to_string(),
            ])?;
        }
    }
    f.finish()?;
    report.files.push(path);
    Ok((report, runs))
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    pub samples: usize,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    /// Median over realizations of `max_k SE_k - min_k SE_k`.
    pub median_spread: f64,
    pub spreads: Vec<f64>,
}

/// Per-user SE samples over realizations: `cdf_samples.csv`,
/// `cdf_spread.csv` and `cdf_summary.csv`.
pub fn run_cdf(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunReport, CdfSummary)> {
    prepare(out_dir)?;
    let results = par_map(cfg.workers, cfg.n_realizations, |r| {
        let params = cfg.realization_params(cfg.sim.aps, cfg.sim.antennas, r);
        Ok((params.seed, solve_realization(&params, &cfg.solve)?))
    })?;

    let mut report = RunReport::default();
    let samples_path = out_dir.join("cdf_samples.csv");
    let spread_path = out_dir.join("cdf_spread.csv");
    let mut samples_f = open(cfg, &samples_path, &["realization", "seed", "user", "se"])?;
    let mut spread_f = open(
        cfg,
        &spread_path,
        &["realization", "seed", "min_se", "max_se", "spread"],
    )?;
    let mut all = Vec::new();
    let mut spreads = Vec::new();
    for (r, (seed, res)) in results.iter().enumerate() {
        report.count(res);
        for (k, &se) in res.se_per_user.iter().enumerate() {
            samples_f.row(&[r.to_string(), seed.to_string(), k.to_string(), fmt_f64(se)])?;
            all.push(se);
        }
        let lo = res.se_per_user.fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = res.se_per_user.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        spread_f.row(&[
            r.to_string(),
            seed.to_string(),
            fmt_f64(lo),
            fmt_f64(hi),
            fmt_f64(hi - lo),
        ])?;
        spreads.push(hi - lo);
    }
    samples_f.finish()?;
    spread_f.finish()?;

    all.sort_by(f64::total_cmp);
    let mut sorted_spreads = spreads.clone();
    sorted_spreads.sort_by(f64::total_cmp);
    let summary = CdfSummary {
        samples: all.len(),
        p5: percentile(&all, 5.0),
        p50: percentile(&all, 50.0),
        p95: percentile(&all, 95.0),
        median_spread: percentile(&sorted_spreads, 50.0),
        spreads,
    };
    let summary_path = out_dir.join("cdf_summary.csv");
    let mut f = open(
        cfg,
        &summary_path,
        &["samples", "p5", "p50", "p95", "median_spread"],
    )?;
    f.row(&[
        summary.samples.to_string(),
        fmt_f64(summary.p5),
        fmt_f64(summary.p50),
        fmt_f64(summary.p95),
        fmt_f64(summary.median_spread),
    ])?;
    f.finish()?;
    report
        .files
        .extend([samples_path, spread_path, summary_path]);
    Ok((report, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub aps: usize,
    pub antennas: usize,
    /// Converged min-SE of every realization, in seed order.
    pub min_se: Vec<f64>,
}

impl SweepCell {
    pub fn mean(&self) -> f64 {
        self.min_se.iter().sum::<f64>() / self.min_se.len() as f64
    }

    /// Sample standard deviation (zero for a single realization).
    pub fn std(&self) -> f64 {
        let n = self.min_se.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.min_se.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// Mean converged min-SE over the `(M, L)` grid at fixed K, `sweep.csv`.
/// Realization `r` uses the same seed at every grid point.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunReport, Vec<SweepCell>)> {
    prepare(out_dir)?;
    let grid: Vec<(usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| cfg.l_list.iter().map(move |&l| (m, l)))
        .collect();
    let n = cfg.n_realizations;
    let results = par_map(cfg.workers, grid.len() * n, |job| {
        let (m, l) = grid[job / n];
        solve_realization(&cfg.realization_params(m, l, job % n), &cfg.solve)
    })?;

    let mut report = RunReport::default();
    let cells: Vec<SweepCell> = grid
        .iter()
        .enumerate()
        .map(|(g, &(aps, antennas))| SweepCell {
            aps,
            antennas,
            min_se: results[g * n..(g + 1) * n]
                .iter()
                .map(|r| r.min_se)
                .collect(),
        })
        .collect();
    results.iter().for_each(|r| report.count(r));

    let path = out_dir.join("sweep.csv");
    let mut f = open(
        cfg,
        &path,
        &["M", "L", "K", "n", "mean_min_se", "std_min_se"],
    )?;
    for c in &cells {
        f.row(&[
            c.aps.to_string(),
            c.antennas.to_string(),
            cfg.sim.users.to_string(),
            n.to_string(),
            fmt_f64(c.mean()),
            fmt_f64(c.std()),
        ])?;
    }
    f.finish()?;
    report.files.push(path);
    Ok((report, cells))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub aps: usize,
    pub realization: usize,
    pub seed: u64,
    pub method: PowerSolver,
    pub wall_time_s: f64,
    pub outer_iters: usize,
    pub power_iters: usize,
    pub min_se: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub aps: usize,
    pub method: PowerSolver,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub mean_outer_iters: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
    /// Log-log slope of the mean APG time against M.
    pub apg_slope: f64,
    pub oracle_slope: f64,
}

/// Wall time of the full alternating solve with each power solver at every
/// M of `exp.M_list`: `bench.csv`, `bench_summary.csv` and `bench_fit.csv`.
///
/// Timings are only comparable when `exp.workers = 1`.
pub fn run_bench(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunReport, BenchReport)> {
    prepare(out_dir)?;
    let n = cfg.n_realizations;
    let methods = [PowerSolver::Apg, PowerSolver::Oracle];
    let jobs: Vec<(usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| (0..n).map(move |r| (m, r)))
        .collect();
    let per_job = par_map(cfg.workers, jobs.len(), |j| {
        let (m, r) = jobs[j];
        let params = cfg.realization_params(m, cfg.sim.antennas, r);
        let net = Network::generate(&params)?;
        let terms = build_sinr_terms(&net.stats, &net.model.beta, &net.pilots, params.antennas)?;
        methods
            .iter()
            .map(|&method| {
                let res = alternating_solve(&terms, params.zeta_u_watt, &solve_with(cfg, method))?;
                Ok(BenchRow {
                    aps: m,
                    realization: r,
                    seed: params.seed,
                    method,
                    wall_time_s: res.wall_time_s,
                    outer_iters: res.outer_iters,
                    power_iters: res.total_apg_iters,
                    min_se: res.min_se,
                    converged: res.converged,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<BenchRow> = per_job.into_iter().flatten().collect();

    let mut report = RunReport::default();
    let path = out_dir.join("bench.csv");
    let mut f = open(
        cfg,
        &path,
        &[
            "M",
            "realization",
            "seed",
            "method",
            "wall_time_s",
            "outer_iters",
            "power_iters",
            "min_se",
            "converged",
        ],
    )?;
    for row in &rows {
        report.solves += 1;
        if !row.converged {
            report.unconverged += 1;
        }
        f.row(&[
            row.aps.to_string(),
            row.realization.to_string(),
            row.seed.to_string(),
            row.method.to_string(),
            fmt_f64(row.wall_time_s),
            row.outer_iters.to_string(),
            row.power_iters.to_string(),
            fmt_f64(row.min_se),
            row.converged.to_string(),
        ])?;
    }
    f.finish()?;
    report.files.push(path);

    let mut summary = Vec::new();
    for &m in &cfg.m_list {
        for method in methods {
            let sel: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.aps == m && r.method == method)
                .collect();
            let mut times: Vec<f64> = sel.iter().map(|r| r.wall_time_s).collect();
            times.sort_by(f64::total_cmp);
            summary.push(BenchSummary {
                aps: m,
                method,
                mean_time_s: times.iter().sum::<f64>() / times.len() as f64,
                median_time_s: percentile(&times, 50.0),
                mean_outer_iters: sel.iter().map(|r| r.outer_iters as f64).sum::<f64>()
                    / sel.len() as f64,
            });
        }
    }
    let path = out_dir.join("bench_summary.csv");
    let mut f = open(
        cfg,
        &path,
        &[
            "M",
            "method",
            "n",
            "mean_time_s",
            "median_time_s",
            "mean_outer_iters",
        ],
    )?;
    for s in &summary {
        f.row(&[
            s.aps.to_string(),
            s.method.to_string(),
            n.to_string(),
            fmt_f64(s.mean_time_s),
            fmt_f64(s.median_time_s),
            fmt_f64(s.mean_outer_iters),
        ])?;
    }
    f.finish()?;
    report.files.push(path);

    let slope = |method: PowerSolver| {
        let pts: Vec<(f64, f64)> = summary
            .iter()
            .filter(|s| s.method == method)
            .map(|s| (s.aps as f64, s.mean_time_s))
            .collect();
        if pts.len() < 2 {
            f64::NAN
        } else {
            loglog_slope(&pts)
        }
    };
    let (apg_slope, oracle_slope) = (slope(PowerSolver::Apg), slope(PowerSolver::Oracle));
    let path = out_dir.join("bench_fit.csv");
    let mut f = open(cfg, &path, &["method", "loglog_slope"])?;
    f.row(&["apg".to_owned(), fmt_f64(apg_slope)])?;
    f.row(&["oracle".to_owned(), fmt_f64(oracle_slope)])?;
    f.finish()?;
    report.files.push(path);

    Ok((
        report,
        BenchReport {
            rows,
            summary,
            apg_slope,
            oracle_slope,
        },
    ))
}
