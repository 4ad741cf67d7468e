//! Benchmark functions with reference sensitivity values, a fixed GP sample
//! path, and an adapter for external simulators speaking line-delimited JSON.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::inputs::{DependentGroup, InputModel};
use crate::kernel::KernelSpec;
use crate::linalg::CholFactor;
use crate::sensitivity::{dgsm, sobol_pickfreeze};
use crate::support::GaussianMixture;

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.05;

pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

pub fn ishigami_gradient(x: &[f64], a: f64, b: f64) -> Vec<f64> {
    vec![
        x[0].cos() * (1.0 + b * x[2].powi(4)),
        2.0 * a * x[1].sin() * x[1].cos(),
        4.0 * b * x[2].powi(3) * x[0].sin(),
    ]
}

/// `(D, S, Sᵀ, V)` in closed form.
pub fn ishigami_reference(a: f64, b: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let pi4 = PI.powi(4);
    let pi8 = pi4 * pi4;
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = 8.0 * b * b * pi8 / 225.0;
    let v = v1 + v2 + v13;
    let dg = vec![
        0.5 * (1.0 + 2.0 * b * pi4 / 5.0 + b * b * pi8 / 9.0),
        a * a / 2.0,
        8.0 * b * b * PI.powi(6) / 7.0,
    ];
    (dg, vec![v1 / v, v2 / v, 0.0], vec![(v1 + v13) / v, v2 / v, v13 / v], v)
}

/// Default coefficients: `(0, 1, 4.5, 9)` followed by 99s.
pub fn gsobol_default_a(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| [0.0, 1.0, 4.5, 9.0].get(i).copied().unwrap_or(99.0)).collect()
}

pub fn gsobol(x: &[f64], a: &[f64]) -> f64 {
    x.iter().zip(a).map(|(x, a)| ((4.0 * x - 2.0).abs() + a) / (1.0 + a)).product()
}

pub fn gsobol_gradient(x: &[f64], a: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = x.iter().zip(a).map(|(x, a)| ((4.0 * x - 2.0).abs() + a) / (1.0 + a)).collect();
    (0..x.len())
        .map(|i| {
            let others: f64 = g.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).product();
            4.0 * (4.0 * x[i] - 2.0).signum() / (1.0 + a[i]) * others
        })
        .collect()
}

/// Partial variances `V_j = 1/(3(1 + a_j)²)`.
pub fn gsobol_partial_variances(a: &[f64]) -> Vec<f64> {
    a.iter().map(|a| 1.0 / (3.0 * (1.0 + a).powi(2))).collect()
}

pub fn gsobol_reference(a: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let vj = gsobol_partial_variances(a);
    let prod: f64 = vj.iter().map(|v| 1.0 + v).product();
    let v = prod - 1.0;
    let first = vj.iter().map(|x| x / v).collect();
    let total = vj.iter().map(|x| x * prod / (1.0 + x) / v).collect();
    let dg = a
        .iter()
        .zip(&vj)
        .map(|(ai, x)| 16.0 / (1.0 + ai).powi(2) * prod / (1.0 + x))
        .collect();
    (dg, first, total, v)
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 4]; 4] = [
    [10.0, 3.0, 17.0, 3.5],
    [0.05, 10.0, 17.0, 0.1],
    [3.0, 3.5, 1.7, 10.0],
    [17.0, 8.0, 0.05, 10.0],
];
const HARTMANN_P: [[f64; 4]; 4] = [
    [1312.0, 1696.0, 5569.0, 124.0],
    [2329.0, 4135.0, 8307.0, 3736.0],
    [2348.0, 1451.0, 3522.0, 2883.0],
    [4047.0, 8828.0, 8732.0, 5743.0],
];

fn hartmann_terms(x: &[f64]) -> [f64; 4] {
    let mut t = [0.0; 4];
    for i in 0..4 {
        let q: f64 = (0..4).map(|j| HARTMANN_A[i][j] * (x[j] - 1e-4 * HARTMANN_P[i][j]).powi(2)).sum();
        t[i] = HARTMANN_ALPHA[i] * (-q).exp();
    }
    t
}

pub fn hartmann4(x: &[f64]) -> f64 {
    (1.1 - hartmann_terms(x).iter().sum::<f64>()) / 0.839
}

pub fn hartmann4_gradient(x: &[f64]) -> Vec<f64> {
    let t = hartmann_terms(x);
    (0..4)
        .map(|j| {
            (0..4)
                .map(|i| t[i] * 2.0 * HARTMANN_A[i][j] * (x[j] - 1e-4 * HARTMANN_P[i][j]))
                .sum::<f64>()
                / 0.839
        })
        .collect()
}

/// Row `i` of the Hartmann location matrix.
pub fn hartmann4_location(i: usize) -> [f64; 4] {
    HARTMANN_P[i].map(|p| 1e-4 * p)
}

pub const MORRIS_DIM: usize = 20;

// 1-based coefficient rules
fn morris_b1(i: usize) -> f64 {
    if i <= 10 {
        20.0
    } else if (i + 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn morris_b2(i: usize, j: usize) -> f64 {
    if i <= 6 || j <= 6 {
        -15.0
    } else if (i + j) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn morris_b3(i: usize, j: usize, k: usize) -> f64 {
    if i.min(j).min(k) <= 5 {
        -10.0
    } else {
        0.0
    }
}

fn morris_w(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut w = vec![0.0; MORRIS_DIM];
    let mut dw = vec![0.0; MORRIS_DIM];
    for i in 0..MORRIS_DIM {
        if [3, 5, 7].contains(&(i + 1)) {
            w[i] = 2.0 * (1.1 * x[i] / (x[i] + 0.1) - 0.5);
            dw[i] = 2.0 * 0.11 / (x[i] + 0.1).powi(2);
        } else {
            w[i] = 2.0 * (x[i] - 0.5);
            dw[i] = 2.0;
        }
    }
    (w, dw)
}

pub fn morris(x: &[f64]) -> f64 {
    let (w, _) = morris_w(x);
    let mut f = 0.0;
    for i in 0..MORRIS_DIM {
        f += morris_b1(i + 1) * w[i];
        for j in i + 1..MORRIS_DIM {
            f += morris_b2(i + 1, j + 1) * w[i] * w[j];
            if i < 5 {
                for k in j + 1..MORRIS_DIM {
                    f += morris_b3(i + 1, j + 1, k + 1) * w[i] * w[j] * w[k];
                }
            }
        }
    }
    f
}

pub fn morris_gradient(x: &[f64]) -> Vec<f64> {
    let (w, dw) = morris_w(x);
    (0..MORRIS_DIM)
        .map(|l| {
            let mut s = morris_b1(l + 1);
            for j in (0..MORRIS_DIM).filter(|&j| j != l) {
                s += morris_b2((l + 1).min(j + 1), (l + 1).max(j + 1)) * w[j];
                for k in (j + 1..MORRIS_DIM).filter(|&k| k != l) {
                    s += morris_b3(l + 1, j + 1, k + 1) * w[j] * w[k];
                }
            }
            s * dw[l]
        })
        .collect()
}

/// Grid resolution of the GP sample path.
pub const GP_PATH_GRID: usize = 33;

/// One prior draw of a Matérn-5/2 GP (`σ² = 1`, lengthscales 0.3) on a 33×33
/// grid of `[0,1]²`, returned as the posterior mean interpolating it.
pub fn gp_path_function(seed: u64) -> Result<(GpModel, Vec<f64>)> {
    let kernel = KernelSpec::isotropic(1.0, 0.3, 2)?;
    let m = GP_PATH_GRID;
    let grid: Vec<Vec<f64>> = (0..m * m)
        .map(|k| vec![(k / m) as f64 / (m - 1) as f64, (k % m) as f64 / (m - 1) as f64])
        .collect();
    let n = grid.len();
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.value_unchecked(&grid[i], &grid[j]));
    let chol = CholFactor::with_jitter(&gram, 0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    let values: Vec<f64> = (chol.l() * z).iter().copied().collect();
    let data = Dataset::new(grid, values.clone(), Bounds::unit(2))?;
    Ok((GpModel::new(data, kernel, 0.0, 0.0)?, values))
}

/// Input model of the support demo: `(x₀, x₁)` from a two-component mixture
/// restricted to the unit square, `x₂ ~ U(0, 1)`.
pub fn support_demo_inputs() -> Result<InputModel> {
    let mixture = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![DVector::from_vec(vec![0.3, 0.3]), DVector::from_vec(vec![0.7, 0.65])],
        vec![
            DMatrix::from_row_slice(2, 2, &[0.006, 0.003, 0.003, 0.006]),
            DMatrix::from_row_slice(2, 2, &[0.005, -0.002, -0.002, 0.004]),
        ],
    )?;
    InputModel::uniform_box(&Bounds::unit(3))?.with_group(DependentGroup {
        indices: vec![0, 1],
        mixture,
        bounds: Bounds::unit(2),
    })
}

pub fn support_demo(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + 2.0 * x[1] * x[1] + x[0] * x[2]
}

pub fn support_demo_gradient(x: &[f64]) -> Vec<f64> {
    vec![3.0 * (3.0 * x[0]).cos() + x[2], 4.0 * x[1], x[0]]
}

/// A user simulator run as `command[0] command[1..]`: one JSON line
/// `{"x": [...]}` on stdin, one line `{"y": value}` expected on stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSimulator {
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Directory the command runs in; the caller's by default.
    #[serde(default)]
    pub working_dir: Option<PathBuf>,
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Deserialize)]
struct SimulatorReply {
    y: f64,
}

enum Attempt {
    Value(f64),
    Malformed(String),
}

impl ExternalSimulator {
    pub fn new(command: Vec<String>, timeout_secs: f64) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("external simulator command is empty".into()));
        }
        if !(timeout_secs > 0.0) {
            return Err(Error::Config(format!("timeout must be positive, got {timeout_secs}")));
        }
        Ok(Self {
            command,
            timeout_secs,
            working_dir: None,
        })
    }

    pub fn in_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.working_dir = Some(dir.into());
        self
    }

    fn attempt(&self, payload: &str) -> Result<Attempt> {
        let mut cmd = Command::new(&self.command[0]);
        if let Some(dir) = &self.working_dir {
            cmd.current_dir(dir);
        }
        let mut child = cmd
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("cannot start {:?}: {e}", self.command[0])))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            // a simulator that exits without reading is reported through its status
            let _ = stdin.write_all(payload.as_bytes()).and_then(|_| stdin.write_all(b"\n"));
        }
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut line = String::new();
            let r = BufReader::new(stdout).read_line(&mut line).map(|_| line);
            let _ = tx.send(r);
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let line = match rx.recv_timeout(Duration::from_secs_f64(self.timeout_secs)) {
            Ok(r) => r.map_err(|e| Error::Evaluation(format!("reading simulator output: {e}")))?,
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Evaluation(format!(
                    "simulator timed out after {} s on input {payload}",
                    self.timeout_secs
                )));
            }
        };
        let status = child
            .wait()
            .map_err(|e| Error::Evaluation(format!("waiting for simulator: {e}")))?;
        let err_text = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::Evaluation(format!(
                "simulator exited with {status} on input {payload}: {}",
                err_text.trim()
            )));
        }
        Ok(match serde_json::from_str::<SimulatorReply>(line.trim()) {
            Ok(r) if r.y.is_finite() => Attempt::Value(r.y),
            _ => Attempt::Malformed(line.trim().to_string()),
        })
    }

    /// Evaluates one point, retrying once on malformed output.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let payload = serde_json::json!({ "x": x }).to_string();
        let mut last = String::new();
        for _ in 0..2 {
            match self.attempt(&payload)? {
                Attempt::Value(y) => return Ok(y),
                Attempt::Malformed(s) => last = s,
            }
        }
        Err(Error::Evaluation(format!(
            "simulator returned malformed output {last:?} on input {payload}"
        )))
    }
}

#[derive(Debug, Clone)]
pub enum Function {
    Ishigami { a: f64, b: f64 },
    GSobol { a: Vec<f64> },
    Hartmann4,
    Morris,
    GpPath(Arc<GpModel>),
    SupportDemo,
    External(ExternalSimulator),
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    id: String,
    function: Function,
    inputs: InputModel,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d = {})", self.id, self.dim())
    }
}

/// Options for [`benchmark`]; unused fields are ignored by benchmarks that
/// take no parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkOptions {
    pub dim: Option<usize>,
    pub a: Option<Vec<f64>>,
    pub b: Option<f64>,
    pub path_seed: u64,
}

pub const BENCHMARK_IDS: [&str; 8] = [
    "ishigami",
    "gsobol",
    "gsobol6",
    "gsobol15",
    "hartmann4",
    "morris",
    "gp_path",
    "support_demo",
];

/// Looks up a benchmark by id.
pub fn benchmark(id: &str, options: &BenchmarkOptions) -> Result<Benchmark> {
    let (function, inputs) = match id {
        "ishigami" => (
            Function::Ishigami {
                a: options.a.as_ref().and_then(|a| a.first().copied()).unwrap_or(ISHIGAMI_A),
                b: options.b.unwrap_or(ISHIGAMI_B),
            },
            InputModel::uniform_box(&Bounds::new(vec![-PI; 3], vec![PI; 3])?)?,
        ),
        "gsobol" | "gsobol6" | "gsobol15" => {
            let dim = match id {
                "gsobol6" => 6,
                "gsobol15" => 15,
                _ => options.dim.or(options.a.as_ref().map(Vec::len)).unwrap_or(6),
            };
            let a = options.a.clone().unwrap_or_else(|| gsobol_default_a(dim));
            if a.len() != dim || a.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config(format!(
                    "gsobol needs {dim} nonnegative coefficients, got {a:?}"
                )));
            }
            (Function::GSobol { a }, InputModel::uniform_box(&Bounds::unit(dim))?)
        }
        "hartmann4" => (Function::Hartmann4, InputModel::uniform_box(&Bounds::unit(4))?),
        "morris" => (Function::Morris, InputModel::uniform_box(&Bounds::unit(MORRIS_DIM))?),
        "gp_path" => (
            Function::GpPath(Arc::new(gp_path_function(options.path_seed)?.0)),
            InputModel::uniform_box(&Bounds::unit(2))?,
        ),
        "support_demo" => (Function::SupportDemo, support_demo_inputs()?),
        _ => {
            return Err(Error::Config(format!(
                "unknown benchmark {id:?}; known ids are {}",
                BENCHMARK_IDS.join(", ")
            )))
        }
    };
    Ok(Benchmark {
        id: id.to_string(),
        function,
        inputs,
    })
}

impl Benchmark {
    /// Wraps an external simulator with the given input model.
    pub fn external(id: &str, simulator: ExternalSimulator, inputs: InputModel) -> Self {
        Self {
            id: id.to_string(),
            function: Function::External(simulator),
            inputs,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn inputs(&self) -> &InputModel {
        &self.inputs
    }

    /// Replaces the input distribution (its dimension must match).
    pub fn with_inputs(mut self, inputs: InputModel) -> Result<Self> {
        if inputs.dim() != self.dim() {
            return Err(Error::Config(format!(
                "input model has dimension {}, benchmark {} needs {}",
                inputs.dim(),
                self.id,
                self.dim()
            )));
        }
        self.inputs = inputs;
        Ok(self)
    }

    pub fn bounds(&self) -> &Bounds {
        self.inputs.bounds()
    }

    pub fn function(&self) -> &Function {
        &self.function
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("{} expects {} inputs, got {}", self.id, self.dim(), x.len())));
        }
        Ok(match &self.function {
            Function::Ishigami { a, b } => ishigami(x, *a, *b),
            Function::GSobol { a } => gsobol(x, a),
            Function::Hartmann4 => hartmann4(x),
            Function::Morris => morris(x),
            Function::GpPath(m) => m.mean_unchecked(x),
            Function::SupportDemo => support_demo(x),
            Function::External(s) => return s.evaluate(x),
        })
    }

    /// Analytic gradient; central differences for external simulators.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("{} expects {} inputs, got {}", self.id, self.dim(), x.len())));
        }
        Ok(match &self.function {
            Function::Ishigami { a, b } => ishigami_gradient(x, *a, *b),
            Function::GSobol { a } => gsobol_gradient(x, a),
            Function::Hartmann4 => hartmann4_gradient(x),
            Function::Morris => morris_gradient(x),
            Function::GpPath(m) => m.mean_gradient(x)?.as_slice().to_vec(),
            Function::SupportDemo => support_demo_gradient(x),
            Function::External(s) => {
                let mut g = vec![0.0; x.len()];
                for j in 0..x.len() {
                    let h = 1e-5 * self.bounds().width(j);
                    let mut p = x.to_vec();
                    let mut m = x.to_vec();
                    p[j] += h;
                    m[j] -= h;
                    g[j] = (s.evaluate(&p)? - s.evaluate(&m)?) / (2.0 * h);
                }
                g
            }
        })
    }

    /// Closed-form indices when available.
    pub fn analytic_reference(&self) -> Option<ReferenceIndices> {
        let (dg, first, total, v) = match &self.function {
            Function::Ishigami { a, b } if self.inputs.bounds() == &Bounds::new(vec![-PI; 3], vec![PI; 3]).ok()? => {
                ishigami_reference(*a, *b)
            }
            Function::GSobol { a } if self.inputs.bounds() == &Bounds::unit(a.len()) => gsobol_reference(a),
            _ => return None,
        };
        if !self.inputs.is_independent() {
            return None;
        }
        Some(ReferenceIndices {
            benchmark: self.id.clone(),
            dgsm: dg,
            sobol_first: Some(first),
            sobol_total: Some(total),
            variance: Some(v),
            source: ReferenceSource::Analytic,
            mc_size: 0,
            seed: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Analytic,
    MonteCarlo,
}

/// Reference sensitivity values; Sobol' entries are absent under dependent inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceIndices {
    pub benchmark: String,
    pub dgsm: Vec<f64>,
    pub sobol_first: Option<Vec<f64>>,
    pub sobol_total: Option<Vec<f64>>,
    pub variance: Option<f64>,
    pub source: ReferenceSource,
    pub mc_size: usize,
    pub seed: u64,
}

/// Monte Carlo reference on the true function and gradient.
pub fn monte_carlo_reference(bench: &Benchmark, mc_size: usize, seed: u64) -> Result<ReferenceIndices> {
    let dg = dgsm(|x| bench.gradient(x), bench.inputs(), mc_size, seed)?;
    let sob = if bench.inputs().is_independent() {
        let f = |x: &[f64]| bench.evaluate(x).unwrap_or(f64::NAN);
        let s = sobol_pickfreeze(f, bench.inputs(), mc_size, seed.wrapping_add(1))?;
        if !s.variance.is_finite() || s.first.iter().chain(&s.total).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("{} failed during the reference computation", bench.id)));
        }
        Some(s)
    } else {
        None
    };
    Ok(ReferenceIndices {
        benchmark: bench.id.clone(),
        dgsm: dg,
        sobol_first: sob.as_ref().map(|s| s.first.clone()),
        sobol_total: sob.as_ref().map(|s| s.total.clone()),
        variance: sob.map(|s| s.variance),
        source: ReferenceSource::MonteCarlo,
        mc_size,
        seed,
    })
}

/// Analytic reference if available, else a Monte Carlo one, cached as
/// `<dir>/<id>.json` and reused when the size and seed match.
pub fn reference(bench: &Benchmark, cache_dir: Option<&Path>, mc_size: usize, seed: u64) -> Result<ReferenceIndices> {
    if let Some(r) = bench.analytic_reference() {
        if let Some(dir) = cache_dir {
            write_json_atomic(&dir.join(format!("{}.json", bench.id)), &r)?;
        }
        return Ok(r);
    }
    let path = cache_dir.map(|d| d.join(format!("{}.json", bench.id)));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        if let Ok(r) = serde_json::from_str::<ReferenceIndices>(&text) {
            if r.benchmark == bench.id && r.mc_size == mc_size && r.seed == seed && r.dgsm.len() == bench.dim() {
                return Ok(r);
            }
        }
    }
    let r = monte_carlo_reference(bench, mc_size, seed)?;
    if let Some(p) = path {
        write_json_atomic(&p, &r)?;
    }
    Ok(r)
}

/// Writes pretty JSON through a temporary file and a rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fd(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let h = 1e-6;
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[j] += h;
                m[j] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn ishigami_values() {
        assert_eq!(ishigami(&[0.0; 3], 7.0, 0.05), 0.0);
        assert!((ishigami(&[PI / 2.0, 0.0, 0.0], 7.0, 0.05) - 1.0).abs() < 1e-15);
        let v = ishigami(&[PI / 2.0, PI / 2.0, PI], 7.0, 0.05);
        assert!((v - (8.0 + 0.05 * PI.powi(4))).abs() < 1e-12 && (v - 12.8705).abs() < 1e-4);
        let (dg, _, _, _) = ishigami_reference(7.0, 0.05);
        for (a, b) in dg.iter().zip([2.7919, 24.5, 2.7468]) {
            assert!((a - b).abs() < 1e-4, "{dg:?}");
        }
    }

    #[test]
    fn gsobol_values() {
        let a = gsobol_default_a(6);
        assert_eq!(a, vec![0.0, 1.0, 4.5, 9.0, 99.0, 99.0]);
        assert_eq!(gsobol(&[0.5; 6], &a), 0.0);
        let expect: f64 = a.iter().map(|a| (2.0 + a) / (1.0 + a)).product();
        assert!((gsobol(&[1.0; 6], &a) - expect).abs() < 1e-12);
        assert!((gsobol(&[0.0; 6], &a) - expect).abs() < 1e-12);
        let (_, s, st, v) = gsobol_reference(&[0.0, 0.0]);
        assert!((s[0] - 3.0 / 7.0).abs() < 1e-14 && (st[0] - 4.0 / 7.0).abs() < 1e-14);
        assert!((v - 7.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x3: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let x4: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let x20: Vec<f64> = (0..20).map(|_| rng.random()).collect();
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![
                (ishigami_gradient(&x3, 7.0, 0.05), fd(|x| ishigami(x, 7.0, 0.05), &x3)),
                (hartmann4_gradient(&x4), fd(hartmann4, &x4)),
                (morris_gradient(&x20), fd(morris, &x20)),
                (support_demo_gradient(&x3), fd(support_demo, &x3)),
                (gsobol_gradient(&x4, &[0.0, 1.0, 4.5, 9.0]), fd(|x| gsobol(x, &[0.0, 1.0, 4.5, 9.0]), &x4)),
            ];
            for (g, f) in pairs {
                for (a, b) in g.iter().zip(&f) {
                    assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{g:?} vs {f:?}");
                }
            }
        }
    }

    #[test]
    fn hartmann_at_location() {
        let p = hartmann4_location(3);
        let eps: f64 = (0..3)
            .map(|i| {
                let q: f64 = (0..4).map(|j| HARTMANN_A[i][j] * (p[j] - 1e-4 * HARTMANN_P[i][j]).powi(2)).sum();
                HARTMANN_ALPHA[i] * (-q).exp()
            })
            .sum();
        assert!(eps > 0.0);
        assert!((hartmann4(&p) - (1.1 - 3.2 - eps) / 0.839).abs() < 1e-12);
    }

    #[test]
    fn morris_center_value() {
        assert!((morris(&[0.5; 20]) - 12.962962962962962).abs() < 1e-9, "{}", morris(&[0.5; 20]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let mut y = x.clone();
        y.swap(10, 11);
        assert!((morris(&x) - morris(&y)).abs() > 1e-6);
        // same parity and both beyond the first six: coordinates 11 and 13 are exchangeable
        let mut z = x.clone();
        z.swap(10, 12);
        assert!((morris(&x) - morris(&z)).abs() < 1e-10);
    }

    #[test]
    fn gp_path_interpolates_grid() {
        let (m, values) = gp_path_function(11).unwrap();
        let mut worst = 0.0f64;
        for (p, v) in m.dataset().points().iter().zip(&values) {
            worst = worst.max((m.mean_unchecked(p) - v).abs());
        }
        assert!(worst <= 1e-8, "max node error {worst:e}");
        let (m2, _) = gp_path_function(11).unwrap();
        assert_eq!(m.mean_unchecked(&[0.123, 0.456]), m2.mean_unchecked(&[0.123, 0.456]));
        let (m3, _) = gp_path_function(12).unwrap();
        assert_ne!(m.mean_unchecked(&[0.123, 0.456]), m3.mean_unchecked(&[0.123, 0.456]));
    }

    #[test]
    fn registry_and_cache() {
        assert!(matches!(benchmark("nope", &BenchmarkOptions::default()), Err(Error::Config(_))));
        let h = benchmark("hartmann4", &BenchmarkOptions::default()).unwrap();
        assert!(h.analytic_reference().is_none());
        let dir = tempfile::tempdir().unwrap();
        let r1 = reference(&h, Some(dir.path()), 2048, 3).unwrap();
        assert!(dir.path().join("hartmann4.json").exists());
        let r2 = reference(&h, Some(dir.path()), 2048, 3).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.source, ReferenceSource::MonteCarlo);
        let g = benchmark("gsobol15", &BenchmarkOptions::default()).unwrap();
        assert_eq!(g.dim(), 15);
        assert_eq!(g.analytic_reference().unwrap().source, ReferenceSource::Analytic);
        let s = benchmark("support_demo", &BenchmarkOptions::default()).unwrap();
        let r = reference(&s, None, 1024, 0).unwrap();
        assert!(r.sobol_total.is_none() && r.dgsm.len() == 3);
    }

    #[test]
    fn ishigami_reference_matches_monte_carlo() {
        let b = benchmark("ishigami", &BenchmarkOptions::default()).unwrap();
        let exact = b.analytic_reference().unwrap();
        let mc = monte_carlo_reference(&b, 1 << 16, 0).unwrap();
        for k in 0..3 {
            assert!((mc.dgsm[k] - exact.dgsm[k]).abs() < 0.03 * exact.dgsm[k], "{mc:?}");
            assert!((mc.sobol_total.as_ref().unwrap()[k] - exact.sobol_total.as_ref().unwrap()[k]).abs() < 0.02);
        }
    }
}
