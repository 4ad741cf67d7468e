//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::testbed::{benchmark, reference, BenchmarkOptions};

use super::config::{RunConfig, Strategy};
use super::report::write_report;
use super::run::{run_replicated, write_csv_atomic, Experiment};
use super::verify::verify_bounds;

#[derive(Debug, Parser)]
#[command(name = "activegsa", version, about = "Active learning of GP surrogates for global sensitivity analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for replicates
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run one configuration (all its replicates)
    Run {
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        /// Enrichment strategy, e.g. GlobalGradVarRed or random_sobol
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Run a matrix of benchmarks × strategies
    Bench {
        config: PathBuf,
        /// Comma-separated benchmark ids (default: the config's [bench] list)
        #[arg(long, value_delimiter = ',')]
        benchmarks: Vec<String>,
        /// Comma-separated strategies
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Check chunked-variance certificates on random instances
    VerifyBounds {
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
    /// Build or refresh cached reference indices
    Refs {
        /// Benchmark ids
        #[arg(required = true)]
        benchmarks: Vec<String>,
        #[arg(long, default_value_t = 1 << 18)]
        mc: usize,
    },
    /// Aggregate run directories into per-metric plot-data tables
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Error::Config(msg)) => {
            eprintln!("{msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn jobs(common: &Common) -> usize {
    common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn default_out(cfg: &RunConfig) -> PathBuf {
    let name = cfg.name.clone().unwrap_or_else(|| cfg.benchmark.id.clone());
    PathBuf::from("runs").join(name)
}

fn run_one(cfg: RunConfig, out: &Path, jobs: usize) -> Result<()> {
    let exp = Experiment::prepare(cfg, Some(&out.join("refs")))?;
    eprintln!(
        "{}: {} replicate(s), {} initial points, budget {}, strategy {}",
        exp.benchmark,
        exp.config.replicates,
        exp.initial_count,
        exp.budget,
        exp.strategy.name()
    );
    let (_, summary) = run_replicated(&exp, Some(out), jobs)?;
    for (seed, e) in &summary.failed {
        eprintln!("warning: replicate with seed {seed} failed: {e}");
    }
    for metric in ["rmse_dgsm", "rmse_sobol", "q2"] {
        if let Some(v) = summary.final_median(metric) {
            eprintln!("final median {metric} = {v:.6}");
        }
    }
    eprintln!("results in {}", out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let Cli { common, command } = cli;
    match command {
        Cmd::Run {
            config,
            replicates,
            strategy,
            budget,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(s) = strategy {
                cfg.strategy.kind = s;
            }
            if let Some(b) = budget {
                cfg.design.budget = Some(b);
            }
            cfg.validate()?;
            let out = common.out.clone().unwrap_or_else(|| default_out(&cfg));
            run_one(cfg, &out, jobs(&common))
        }
        Cmd::Bench {
            config,
            benchmarks,
            strategies,
        } => {
            let mut base = RunConfig::load(&config)?;
            if let Some(s) = common.seed {
                base.seed = s;
            }
            let from_cfg = base.bench.clone();
            let benchmarks = if benchmarks.is_empty() {
                from_cfg.as_ref().map(|b| b.benchmarks.clone()).unwrap_or_else(|| vec![base.benchmark.id.clone()])
            } else {
                benchmarks
            };
            let strategies = if strategies.is_empty() {
                from_cfg.as_ref().map(|b| b.strategies.clone()).unwrap_or_else(|| vec![base.strategy.kind.clone()])
            } else {
                strategies
            };
            for s in &strategies {
                if Strategy::parse(s).is_none() {
                    return Err(Error::Config(format!("unknown strategy {s:?}")));
                }
            }
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join("bench"));
            let mut rows = Vec::new();
            for b in &benchmarks {
                for s in &strategies {
                    let mut cfg = base.clone();
                    cfg.benchmark.id = b.clone();
                    cfg.strategy.kind = s.clone();
                    if b != &base.benchmark.id {
                        // sizes default to the benchmark's dimension
                        cfg.design.initial_count = None;
                        cfg.design.budget = None;
                        cfg.inputs = None;
                        cfg.penalty = None;
                    }
                    cfg.validate()?;
                    let dir = out.join(b).join(Strategy::parse(s).expect("checked").name());
                    let exp = Experiment::prepare(cfg, Some(&out.join("refs")))?;
                    eprintln!("{} × {}", exp.benchmark, exp.strategy.name());
                    let (_, summary) = run_replicated(&exp, Some(&dir), jobs(&common))?;
                    let fm = |m: &str| summary.final_median(m).map(|v| v.to_string()).unwrap_or_default();
                    rows.push(vec![b.clone(), s.clone(), fm("rmse_dgsm"), fm("rmse_sobol"), fm("q2")]);
                }
            }
            let header: Vec<String> = ["benchmark", "strategy", "final_rmse_dgsm", "final_rmse_sobol", "final_q2"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            write_csv_atomic(&out.join("bench_summary.csv"), &header, rows)?;
            eprintln!("results in {}", out.display());
            Ok(())
        }
        Cmd::VerifyBounds { instances } => {
            let rows = verify_bounds(instances, common.seed.unwrap_or(0))?;
            println!("{:>8} {:>3} {:>5} {:>6} {:>8} {:>12} {:>12} {:>8}", "instance", "d", "N", "chunks", "balanced", "|V-V~|", "bound", "ratio");
            for r in &rows {
                println!(
                    "{:>8} {:>3} {:>5} {:>6} {:>8} {:>12.4e} {:>12.4e} {:>8.4}",
                    r.instance, r.dim, r.sites, r.chunks, r.balanced, r.error, r.bound, r.ratio
                );
            }
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
                let header: Vec<String> = ["instance", "dim", "sites", "chunks", "balanced", "exact", "chunked", "error", "bound", "pairwise_bound", "ratio"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                let body = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.instance.to_string(),
                            r.dim.to_string(),
                            r.sites.to_string(),
                            r.chunks.to_string(),
                            r.balanced.to_string(),
                            r.exact.to_string(),
                            r.chunked.to_string(),
                            r.error.to_string(),
                            r.bound.to_string(),
                            r.pairwise_bound.to_string(),
                            r.ratio.to_string(),
                        ]
                    })
                    .collect();
                write_csv_atomic(&out.join("bounds.csv"), &header, body)?;
            }
            let violations = rows.iter().filter(|r| r.ratio > 1.0).count();
            if violations > 0 {
                return Err(Error::Evaluation(format!("{violations} of {} instances exceed their bound", rows.len())));
            }
            println!("all {} ratios ≤ 1", rows.len());
            Ok(())
        }
        Cmd::Refs { benchmarks, mc } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join("refs"));
            let seed = common.seed.unwrap_or(0);
            for id in &benchmarks {
                let b = benchmark(id, &BenchmarkOptions::default())?;
                let r = reference(&b, Some(&out), mc, seed)?;
                println!("{id}: {:?} reference, dgsm = {:?}", r.source, r.dgsm);
            }
            eprintln!("references in {}", out.display());
            Ok(())
        }
        Cmd::Report { dirs } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join("report"));
            for p in write_report(&dirs, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}
