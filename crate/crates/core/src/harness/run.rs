//! The active-learning loop, replication driver and persistence.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::acquisition::{Acquisition, AcquisitionSpec};
use crate::error::{Error, Result};
use crate::gp::{fit, Dataset, GpModel};
use crate::gradient::DEFAULT_MEMORY_CAP;
use crate::inputs::{initial_design, DesignGenerator, DesignKind};
use crate::optimize::{maximize, OptimConfig};
use crate::sensitivity::{dgsm_plugin, q2, rmse, sobol_plugin};
use crate::support::{fit_support, read_samples_csv, SupportModel};
use crate::testbed::{benchmark, reference, write_json_atomic, Benchmark, ExternalSimulator, ReferenceIndices};

use super::config::{RunConfig, Strategy};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_FIT: u64 = 1;
const STREAM_DGSM: u64 = 2;
const STREAM_SOBOL: u64 = 3;
const STREAM_SITES: u64 = 4;
const STREAM_FANTASY: u64 = 5;
const STREAM_OPTIM: u64 = 6;
const STREAM_TEST: u64 = 7;
const STREAM_SUPPORT: u64 = 8;
const STREAM_REFERENCE: u64 = 9;

/// Everything shared by the replicates of one configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub benchmark: Benchmark,
    pub strategy: Strategy,
    pub penalty: Option<Arc<SupportModel>>,
    pub reference: Option<ReferenceIndices>,
    pub test_points: Vec<Vec<f64>>,
    pub test_values: Vec<f64>,
    pub initial_count: usize,
    pub budget: usize,
}

impl Experiment {
    /// Builds the benchmark, support penalty, reference values (cached under
    /// `refs_dir` when given) and the test set.
    pub fn prepare(config: RunConfig, refs_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let b = &config.benchmark;
        let mut bench = if b.is_external() {
            let mut sim = ExternalSimulator::new(b.command.clone().unwrap_or_default(), b.timeout_secs.unwrap_or(60.0))?;
            if let Some(dir) = &b.working_dir {
                sim = sim.in_dir(dir);
            }
            let inputs = config
                .inputs
                .as_ref()
                .ok_or_else(|| Error::Config("an external benchmark needs an [inputs] section".into()))?
                .build()?;
            Benchmark::external(config.name.as_deref().unwrap_or("external"), sim, inputs)
        } else {
            benchmark(&b.id, &b.options())?
        };
        if let (false, Some(inputs)) = (b.is_external(), &config.inputs) {
            bench = bench.with_inputs(inputs.build()?)?;
        }
        let d = bench.dim();
        let strategy = config.strategy.strategy()?;

        let penalty = match &config.penalty {
            None => None,
            Some(p) => {
                if p.group.iter().any(|&i| i >= d) {
                    return Err(Error::Config(format!("penalty group {:?} exceeds dimension {d}", p.group)));
                }
                let samples = match &p.samples_csv {
                    Some(path) => read_samples_csv(path)?,
                    None => bench
                        .inputs()
                        .sample(p.sample_count, derive_seed(config.seed, STREAM_SUPPORT, 0))
                        .into_iter()
                        .map(|x| p.group.iter().map(|&i| x[i]).collect())
                        .collect(),
                };
                if samples.iter().any(|s: &Vec<f64>| s.len() != p.group.len()) {
                    return Err(Error::Config(format!(
                        "penalty samples must have {} columns",
                        p.group.len()
                    )));
                }
                let model = fit_support(p.group.clone(), &samples, &p.fit_settings(), derive_seed(config.seed, STREAM_SUPPORT, 1))?;
                Some(Arc::new(model))
            }
        };

        let reference = if b.is_external() {
            None
        } else {
            Some(reference(
                &bench,
                refs_dir,
                config.metrics.reference_mc,
                derive_seed(0, STREAM_REFERENCE, 0),
            )?)
        };

        let test_gen = DesignGenerator {
            kind: DesignKind::SobolSequence,
            seed: derive_seed(config.seed, STREAM_TEST, 0),
            scrambled: true,
        };
        let test_points = test_gen.points(bench.inputs(), 0, config.metrics.test_size)?;
        let test_values = test_points
            .par_iter()
            .map(|x| bench.evaluate(x))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            initial_count: config.design.initial_count.unwrap_or(5 * d),
            budget: config.design.budget.unwrap_or(10 * d),
            config,
            benchmark: bench,
            strategy,
            penalty,
            reference,
            test_points,
            test_values,
        })
    }

    pub fn dim(&self) -> usize {
        self.benchmark.dim()
    }

    pub fn has_sobol(&self) -> bool {
        self.benchmark.inputs().is_independent()
    }

    fn generator(&self, seed: u64) -> DesignGenerator {
        DesignGenerator {
            kind: self.config.design.kind,
            seed,
            scrambled: self.config.design.scrambled,
        }
    }

    fn acquisition_spec(&self, kind: crate::acquisition::AcquisitionKind, seed: u64) -> AcquisitionSpec {
        let s = &self.config.strategy;
        AcquisitionSpec {
            kind,
            fantasy_count: s.fantasy_count,
            site_count: s.site_count,
            chunk_count: s.chunk_count,
            balanced: s.balanced,
            penalty: self.penalty.clone(),
            memory_cap: s.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP),
            seed,
        }
    }

    /// Writes the test set as `test_set.csv`.
    pub fn write_test_set(&self, dir: &Path) -> Result<()> {
        let d = self.dim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        let rows = self
            .test_points
            .iter()
            .zip(&self.test_values)
            .map(|(x, y)| x.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect())
            .collect();
        write_csv_atomic(&dir.join("test_set.csv"), &header, rows)
    }
}

/// Metrics of the surrogate fitted after `n` evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub n: usize,
    pub output_scale: f64,
    pub lengthscales: Vec<f64>,
    pub dgsm: Vec<f64>,
    pub sobol_total: Option<Vec<f64>>,
    pub rmse_dgsm: Option<f64>,
    pub rmse_sobol: Option<f64>,
    pub q2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub design: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    /// Iteration that added each design point (0 for the initial design).
    pub added_at: Vec<usize>,
    /// Acquisition value of each enrichment point, `None` for the baseline.
    pub acquisition_values: Vec<Option<f64>>,
    pub metrics: Vec<IterationMetrics>,
    pub wall_secs: Vec<f64>,
    /// False when the wall-clock cap stopped the loop.
    pub completed: bool,
}

impl RunRecord {
    pub fn final_metrics(&self) -> &IterationMetrics {
        self.metrics.last().expect("at least the initial metrics")
    }

    /// Writes `design.csv`, `metrics.csv` and `timing.csv` into `dir`.
    pub fn persist(&self, dir: &Path, has_reference: bool, has_sobol: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let d = self.design.first().map_or(0, Vec::len);
        let mut header = vec!["index".to_string(), "iteration".to_string()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        header.push("y".into());
        header.push("acquisition".into());
        let n0 = self.added_at.iter().filter(|&&t| t == 0).count();
        let rows = (0..self.design.len())
            .map(|i| {
                let mut r = vec![i.to_string(), self.added_at[i].to_string()];
                r.extend(self.design[i].iter().map(|v| v.to_string()));
                r.push(self.outputs[i].to_string());
                let acq = if i >= n0 { self.acquisition_values[i - n0] } else { None };
                r.push(acq.map(|v| v.to_string()).unwrap_or_default());
                r
            })
            .collect();
        write_csv_atomic(&dir.join("design.csv"), &header, rows)?;

        let (header, rows) = metrics_table(&self.metrics, d, has_reference, has_sobol);
        write_csv_atomic(&dir.join("metrics.csv"), &header, rows)?;

        let rows = self
            .wall_secs
            .iter()
            .enumerate()
            .map(|(t, s)| vec![t.to_string(), format!("{s:.3}")])
            .collect();
        write_csv_atomic(&dir.join("timing.csv"), &["iteration".into(), "wall_secs".into()], rows)
    }
}

fn metrics_table(rows: &[IterationMetrics], d: usize, has_reference: bool, has_sobol: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["iteration".to_string(), "n".to_string()];
    if has_reference {
        header.push("rmse_dgsm".into());
        if has_sobol {
            header.push("rmse_sobol".into());
        }
    }
    header.push("q2".into());
    header.push("output_scale".into());
    header.extend((1..=d).map(|j| format!("lengthscale_{j}")));
    header.extend((1..=d).map(|j| format!("dgsm_{j}")));
    if has_sobol {
        header.extend((1..=d).map(|j| format!("sobol_total_{j}")));
    }
    let body = rows
        .iter()
        .map(|m| {
            let mut r = vec![m.iteration.to_string(), m.n.to_string()];
            if has_reference {
                r.push(m.rmse_dgsm.map(|v| v.to_string()).unwrap_or_default());
                if has_sobol {
                    r.push(m.rmse_sobol.map(|v| v.to_string()).unwrap_or_default());
                }
            }
            r.push(m.q2.to_string());
            r.push(m.output_scale.to_string());
            r.extend(m.lengthscales.iter().map(|v| v.to_string()));
            r.extend(m.dgsm.iter().map(|v| v.to_string()));
            if has_sobol {
                if let Some(s) = &m.sobol_total {
                    r.extend(s.iter().map(|v| v.to_string()));
                }
            }
            r
        })
        .collect();
    (header, body)
}

/// Writes a CSV file through a temporary file and a rename, so an
/// interrupted run never leaves a truncated table behind.
pub fn write_csv_atomic(path: &Path, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn compute_metrics(exp: &Experiment, model: &GpModel, iteration: usize, seed: u64) -> Result<IterationMetrics> {
    let inputs = exp.benchmark.inputs();
    let mc = &exp.config.metrics;
    let dgsm = dgsm_plugin(model, inputs, mc.dgsm_mc, derive_seed(seed, STREAM_DGSM, 0))?;
    let sobol = if exp.has_sobol() {
        Some(sobol_plugin(model, inputs, mc.sobol_mc, derive_seed(seed, STREAM_SOBOL, 0))?.total)
    } else {
        None
    };
    let predicted: Vec<f64> = exp.test_points.par_iter().map(|x| model.predict_mean(x)).collect::<Result<_>>()?;
    let (rmse_dgsm, rmse_sobol) = match &exp.reference {
        Some(r) => (
            Some(rmse(&dgsm, &r.dgsm)?),
            match (&sobol, &r.sobol_total) {
                (Some(s), Some(t)) => Some(rmse(s, t)?),
                _ => None,
            },
        ),
        None => (None, None),
    };
    Ok(IterationMetrics {
        iteration,
        n: model.dataset().len(),
        output_scale: model.kernel().output_scale(),
        lengthscales: model.kernel().lengthscales().to_vec(),
        dgsm,
        sobol_total: sobol,
        rmse_dgsm,
        rmse_sobol,
        q2: q2(&exp.test_values, &predicted)?,
    })
}

/// One replicate of the loop: initial design, then `budget` rounds of
/// fit, select, evaluate, append. Files in `dir` are rewritten after every
/// round; on an evaluation error they hold the rounds completed so far.
pub fn run_active_learning(exp: &Experiment, seed: u64, dir: Option<&Path>) -> Result<RunRecord> {
    let bench = &exp.benchmark;
    let inputs = bench.inputs();
    let generator = exp.generator(seed);
    let design = initial_design(inputs, exp.initial_count, &generator)?;
    let outputs = design.iter().map(|x| bench.evaluate(x)).collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::new(design, outputs, inputs.bounds().clone())?;
    let mut record = RunRecord {
        seed,
        design: data.points().to_vec(),
        outputs: data.outputs().to_vec(),
        added_at: vec![0; data.len()],
        acquisition_values: Vec::new(),
        metrics: Vec::new(),
        wall_secs: Vec::new(),
        completed: true,
    };
    let persist = |r: &RunRecord| match dir {
        Some(d) => r.persist(d, exp.reference.is_some(), exp.has_sobol()),
        None => Ok(()),
    };
    let start = Instant::now();
    let mut clock = Instant::now();
    for t in 0..=exp.budget {
        let model = fit(&data, derive_seed(seed, STREAM_FIT, t as u64), &exp.config.fit)?;
        record.metrics.push(compute_metrics(exp, &model, t, seed)?);
        record.wall_secs.push(clock.elapsed().as_secs_f64());
        clock = Instant::now();
        persist(&record)?;
        if t == exp.budget {
            break;
        }
        if let Some(cap) = exp.config.max_wall_secs {
            if start.elapsed().as_secs_f64() > cap {
                record.completed = false;
                break;
            }
        }

        let (x, acq_value) = match exp.strategy {
            Strategy::RandomSobol => {
                let next = generator.points(inputs, exp.initial_count + t, 1)?;
                (next.into_iter().next().expect("one point"), None)
            }
            Strategy::Acquisition(kind) => {
                let spec = exp.acquisition_spec(kind, derive_seed(seed, STREAM_FANTASY, t as u64));
                let sites = if kind.uses_sites() {
                    let round = if exp.config.strategy.resample_sites { t as u64 } else { 0 };
                    inputs.sample(spec.sites_for(inputs.dim()), derive_seed(seed, STREAM_SITES, round))
                } else {
                    Vec::new()
                };
                let acq = Acquisition::new(&spec, &model, &sites)?;
                let optim = OptimConfig {
                    seed: derive_seed(seed, STREAM_OPTIM, t as u64),
                    ..exp.config.optimizer.clone()
                };
                let best = maximize(|x| acq.evaluate(x), inputs.bounds(), data.points(), &optim)?;
                (best.x, Some(best.value))
            }
        };
        let y = match bench.evaluate(&x) {
            Ok(y) => y,
            Err(e) => {
                persist(&record)?;
                return Err(e);
            }
        };
        data = data.with_point(x.clone(), y)?;
        record.design.push(x);
        record.outputs.push(y);
        record.added_at.push(t + 1);
        record.acquisition_values.push(acq_value);
    }
    Ok(record)
}

/// Aggregated per-iteration statistics of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub metric: String,
    pub replicates: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub failed: Vec<(u64, String)>,
}

impl Summary {
    pub fn get(&self, iteration: usize, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.iteration == iteration && r.metric == metric)
    }

    /// Median of `metric` at the last iteration reached by any replicate.
    pub fn final_median(&self, metric: &str) -> Option<f64> {
        self.rows.iter().filter(|r| r.metric == metric).max_by_key(|r| r.iteration).map(|r| r.median)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let warning = if self.failed.is_empty() {
            String::new()
        } else {
            format!("{} replicate(s) failed", self.failed.len())
        };
        let header: Vec<String> = ["iteration", "metric", "replicates", "median", "q25", "q75", "warning"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    r.metric.clone(),
                    r.replicates.to_string(),
                    r.median.to_string(),
                    r.q25.to_string(),
                    r.q75.to_string(),
                    warning.clone(),
                ]
            })
            .collect();
        write_csv_atomic(path, &header, rows)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Scalar metrics of a row by name.
pub fn metric_values(m: &IterationMetrics) -> Vec<(String, f64)> {
    let mut v = Vec::new();
    if let Some(r) = m.rmse_dgsm {
        v.push(("rmse_dgsm".to_string(), r));
    }
    if let Some(r) = m.rmse_sobol {
        v.push(("rmse_sobol".to_string(), r));
    }
    v.push(("q2".to_string(), m.q2));
    for (j, x) in m.dgsm.iter().enumerate() {
        v.push((format!("dgsm_{}", j + 1), *x));
    }
    if let Some(s) = &m.sobol_total {
        for (j, x) in s.iter().enumerate() {
            v.push((format!("sobol_total_{}", j + 1), *x));
        }
    }
    v
}

/// Median and quartiles across `records`, per iteration and metric.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    // (iteration, metric) -> values, in first-seen order
    let mut keys: Vec<(usize, String)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in records {
        for m in &r.metrics {
            for (name, v) in metric_values(m) {
                let key = (m.iteration, name);
                match keys.iter().position(|k| *k == key) {
                    Some(i) => values[i].push(v),
                    None => {
                        keys.push(key);
                        values.push(vec![v]);
                    }
                }
            }
        }
    }
    keys.into_iter()
        .zip(values)
        .map(|((iteration, metric), mut v)| {
            v.sort_by(f64::total_cmp);
            SummaryRow {
                iteration,
                metric,
                replicates: v.len(),
                median: quantile_sorted(&v, 0.5),
                q25: quantile_sorted(&v, 0.25),
                q75: quantile_sorted(&v, 0.75),
            }
        })
        .collect()
}

/// Directory of replicate `r` under `out` (the run directory itself when
/// there is a single replicate).
pub fn replicate_dir(out: &Path, replicates: usize, r: usize) -> PathBuf {
    if replicates == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("rep_{r:03}"))
    }
}

/// Runs `replicates` independent loops with seeds `seed + r` on up to
/// `jobs` threads and writes the run directory.
pub fn run_replicated(exp: &Experiment, out: Option<&Path>, jobs: usize) -> Result<(Vec<RunRecord>, Summary)> {
    let reps = exp.config.replicates;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json_atomic(&dir.join("config.snapshot.json"), &exp.config)?;
        exp.write_test_set(dir)?;
        if let Some(r) = &exp.reference {
            write_json_atomic(&dir.join("refs").join(format!("{}.json", exp.benchmark.id())), r)?;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let seed = exp.config.seed.wrapping_add(r as u64);
                let dir = out.map(|o| replicate_dir(o, reps, r));
                run_active_learning(exp, seed, dir.as_deref())
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failed.push((exp.config.seed.wrapping_add(r as u64), e.to_string()));
                first_error.get_or_insert(e);
            }
        }
    }
    if records.is_empty() {
        return Err(first_error.expect("at least one replicate"));
    }
    let summary = Summary {
        rows: summarize(&records),
        failed,
    };
    if let Some(dir) = out {
        summary.write(&dir.join("summary.csv"))?;
    }
    Ok((records, summary))
}
