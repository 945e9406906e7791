//! `cellfree`: run max-min power-control experiments and write CSV output.
//!
//! ```text
//! cellfree <trace|cdf|sweep|bench> [--config FILE] [--out DIR] [--strict] [--sim.M 150 ...]
//! ```
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration, 3 a solve hit
//! its iteration cap under `--strict`.

use std::path::PathBuf;
use std::process::ExitCode;

use cellfree_maxmin::harness::{
    run_bench, run_cdf, run_sweep, run_trace, ConfigMap, ExperimentConfig, ExperimentKind,
    RunReport,
};
use cellfree_maxmin::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "cellfree",
    version,
    about = "Max-min fairness power control for uplink cell-free massive MIMO",
    after_help = "Any config key can be overridden as --key value or --key=value, e.g. --sim.M 100 --apg.tol 1e-6."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Outer-iteration traces of the APG and oracle solves per realization.
    Trace(Common),
    /// Per-user SE samples and spread over realizations.
    Cdf(Common),
    /// Mean min-SE over an (M, L) grid.
    Sweep(Common),
    /// Run time of APG vs oracle solves over M.
    Bench(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit with status 3 if any solve stops at its iteration cap.
    #[arg(long)]
    strict: bool,
}

/// Pulls `--key value` / `--key=value` pairs with dotted keys out of the
/// argument list, leaving the rest for clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, ConfigMap), Error> {
    let mut rest = Vec::new();
    let mut overrides = ConfigMap::default();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--").filter(|b| b.contains('.')) else {
            rest.push(arg);
            continue;
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("--{body} needs a value")))?;
                (body.to_owned(), v)
            }
        };
        overrides.set(&key, &value)?;
    }
    Ok((rest, overrides))
}

fn run() -> Result<RunReport, (Error, bool)> {
    let (args, overrides) = split_overrides(std::env::args().collect()).map_err(|e| (e, false))?;
    let cli = Cli::parse_from(args);
    let (kind, common) = match cli.command {
        Command::Trace(c) => (ExperimentKind::Trace, c),
        Command::Cdf(c) => (ExperimentKind::Cdf, c),
        Command::Sweep(c) => (ExperimentKind::Sweep, c),
        Command::Bench(c) => (ExperimentKind::Bench, c),
    };
    let mut map = match &common.config {
        Some(path) => ConfigMap::load(path).map_err(|e| (e, false))?,
        None => ConfigMap::default(),
    };
    map.merge(&overrides);
    let cfg = ExperimentConfig::from_map(kind, &map).map_err(|e| (e, false))?;

    let out = &common.out;
    let report = match kind {
        ExperimentKind::Trace => run_trace(&cfg, out).map(|(r, runs)| {
            for run in &runs {
                println!(
                    "realization {} (seed {}): min-SE apg {:.6} oracle {:.6}",
                    run.index, run.seed, run.apg.min_se, run.oracle.min_se
                );
            }
            r
        }),
        ExperimentKind::Cdf => run_cdf(&cfg, out).map(|(r, s)| {
            println!(
                "{} samples: p5 {:.4} p50 {:.4} p95 {:.4}, median spread {:.4}",
                s.samples, s.p5, s.p50, s.p95, s.median_spread
            );
            r
        }),
        ExperimentKind::Sweep => run_sweep(&cfg, out).map(|(r, cells)| {
            for c in &cells {
                println!(
                    "M={} L={}: mean min-SE {:.4} (std {:.4})",
                    c.aps,
                    c.antennas,
                    c.mean(),
                    c.std()
                );
            }
            r
        }),
        ExperimentKind::Bench => run_bench(&cfg, out).map(|(r, b)| {
            for s in &b.summary {
                println!(
                    "M={} {}: mean {:.4e} s, {:.1} outer iterations",
                    s.aps, s.method, s.mean_time_s, s.mean_outer_iters
                );
            }
            println!(
                "log-log slope in M: apg {:.3}, oracle {:.3}",
                b.apg_slope, b.oracle_slope
            );
            r
        }),
    }
    .map_err(|e| (e, false))?;

    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if common.strict && report.unconverged > 0 {
        return Err((
            Error::Config(format!(
                "{} of {} solves stopped at the iteration cap",
                report.unconverged, report.solves
            )),
            true,
        ));
    }
    Ok(report)
}

fn main() -> ExitCode {
    match run() {
        Ok(_) => ExitCode::SUCCESS,
        Err((e, nonconvergence)) => {
            eprintln!("error: {e}");
            let code = if nonconvergence {
                3
            } else {
                match e {
                    Error::Io { .. } | Error::Csv { .. } => 1,
                    _ => 2,
                }
            };
            ExitCode::from(code)
        }
    }
}
