//! Gaussian-process regression with a constant mean and a Matérn-5/2 ARD
//! kernel: maximum-likelihood fitting, posterior prediction and fantasy
//! (look-ahead) conditioning.
//!
//! Hyperparameters are optimized on inputs mapped to the unit box and on
//! standardized outputs; the fitted model is then expressed and factorized in
//! natural units, so every public quantity (including gradients) is in the
//! units of the data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{CholFactor, JITTER_LADDER};
use crate::qn::{minimize_box, QnConfig};
use crate::sobol::SobolSequence;

/// Default minimum separation between design points, in unit-box coordinates.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-9;

/// Training inputs and outputs together with the box used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    bounds: Bounds,
    min_separation: f64,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, outputs: Vec<f64>, bounds: Bounds) -> Result<Self> {
        Self::with_min_separation(points, outputs, bounds, DEFAULT_MIN_SEPARATION)
    }

    pub fn with_min_separation(
        points: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        bounds: Bounds,
        min_separation: f64,
    ) -> Result<Self> {
        if points.len() != outputs.len() {
            return Err(Error::Shape(format!(
                "{} points but {} outputs",
                points.len(),
                outputs.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::Parameter(format!(
                "a dataset needs at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != bounds.dim()) {
            return Err(Error::Shape(format!(
                "point of length {} in a {}-dimensional dataset",
                p.len(),
                bounds.dim()
            )));
        }
        if outputs.iter().any(|y| !y.is_finite()) {
            return Err(Error::Parameter("outputs must be finite".into()));
        }
        let ds = Self {
            points,
            outputs,
            bounds,
            min_separation,
        };
        if let Some((i, j, dist)) = ds.closest_pair() {
            if dist < min_separation {
                return Err(Error::Rejected(format!(
                    "design points {i} and {j} are {dist:e} apart (minimum separation {min_separation:e})"
                )));
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Distance (unit-box coordinates) from `x` to the nearest design point.
    pub fn distance_to_design(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| self.bounds.unit_distance(p, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Returns a copy with `(x, y)` appended.
    pub fn with_point(&self, x: Vec<f64>, y: f64) -> Result<Self> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point of length {} in a {}-dimensional dataset",
                x.len(),
                self.dim()
            )));
        }
        let dist = self.distance_to_design(&x);
        if dist < self.min_separation {
            return Err(Error::Rejected(format!(
                "point {x:?} is {dist:e} from the design (minimum separation {:e})",
                self.min_separation
            )));
        }
        let mut next = self.clone();
        next.points.push(x);
        next.outputs.push(y);
        Ok(next)
    }

    fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = self.bounds.unit_distance(&self.points[i], &self.points[j]);
                if best.map_or(true, |b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

/// Settings for maximum-likelihood hyperparameter fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Lengthscale bounds in unit-box coordinates.
    pub lengthscale_bounds: (f64, f64),
    /// Output-scale bounds for standardized outputs.
    pub output_scale_bounds: (f64, f64),
    /// Observation noise in natural output units; `None` means noise-free
    /// with adaptive jitter.
    pub noise_variance: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 100,
            lengthscale_bounds: (1e-2, 1e2),
            output_scale_bounds: (1e-2, 1e2),
            noise_variance: None,
        }
    }
}

/// A fitted GP surrogate. Immutable; cheap to clone (the factor is shared).
#[derive(Debug, Clone)]
pub struct GpModel {
    dataset: Dataset,
    kernel: KernelSpec,
    mean_constant: f64,
    noise_variance: f64,
    chol: Arc<CholFactor>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `dataset`.
    pub fn new(
        dataset: Dataset,
        kernel: KernelSpec,
        mean_constant: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        Self::with_jitter_start(dataset, kernel, mean_constant, noise_variance, 0)
    }

    /// Like [`GpModel::new`] but starts the jitter ladder at rung `start`.
    pub fn with_jitter_start(
        dataset: Dataset,
        kernel: KernelSpec,
        mean_constant: f64,
        noise_variance: f64,
        start: usize,
    ) -> Result<Self> {
        if kernel.dim() != dataset.dim() {
            return Err(Error::Shape(format!(
                "kernel of dimension {} for a {}-dimensional dataset",
                kernel.dim(),
                dataset.dim()
            )));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise variance must be nonnegative, got {noise_variance}"
            )));
        }
        let k = gram(&kernel, dataset.points());
        let chol = CholFactor::with_jitter_from(&k, noise_variance, kernel.output_scale(), start)
            .map_err(|e| match (e, dataset.closest_pair()) {
                (Error::Conditioning(msg), Some((i, j, dist))) => Error::Conditioning(format!(
                    "{msg}; closest design points are #{i} {:?} and #{j} {:?} ({dist:e} apart in unit coordinates)",
                    dataset.points[i], dataset.points[j]
                )),
                (e, _) => e,
            })?;
        let resid = DVector::from_iterator(
            dataset.len(),
            dataset.outputs().iter().map(|y| y - mean_constant),
        );
        let alpha = chol.solve(&resid);
        Ok(Self {
            dataset,
            kernel,
            mean_constant,
            noise_variance,
            chol: Arc::new(chol),
            alpha,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn mean_constant(&self) -> f64 {
        self.mean_constant
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Diagonal term added to the kernel matrix before factorizing (noise + jitter).
    pub fn diagonal_term(&self) -> f64 {
        self.chol.jitter()
    }

    /// Diagonal term for a new look-ahead observation: the model's own term,
    /// but never below the first jitter rung so near-duplicates stay benign.
    pub fn lookahead_diagonal(&self) -> f64 {
        self.chol
            .jitter()
            .max(JITTER_LADDER[0] * self.kernel.output_scale())
    }

    pub fn chol(&self) -> &CholFactor {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point of length {} for a {}-dimensional model",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `k(X, x)` against every training point.
    pub fn cross_covariance(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dataset.len(),
            self.dataset
                .points()
                .iter()
                .map(|p| self.kernel.value_unchecked(p, x)),
        )
    }

    /// Posterior mean and (latent, nonnegative) variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let k = self.cross_covariance(x);
        let mean = self.mean_constant + k.dot(&self.alpha);
        let v = self.chol.solve_lower(&k);
        let var = (self.kernel.output_scale() - v.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.mean_unchecked(x))
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        self.mean_constant
            + self
                .dataset
                .points()
                .iter()
                .zip(self.alpha.iter())
                .map(|(p, a)| a * self.kernel.value_unchecked(x, p))
                .sum::<f64>()
    }

    /// Posterior covariance between `η(a)` and `η(b)`.
    pub fn covariance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        let va = self.chol.solve_lower(&self.cross_covariance(a));
        let vb = self.chol.solve_lower(&self.cross_covariance(b));
        Ok(self.kernel.value_unchecked(a, b) - va.dot(&vb))
    }

    /// Analytic gradient of the posterior mean at `x`.
    pub fn mean_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let mut out = DVector::zeros(self.dim());
        self.mean_gradient_into(x, out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn mean_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; d];
        for (p, a) in self.dataset.points().iter().zip(self.alpha.iter()) {
            self.kernel.grad_x_into(x, p, &mut g);
            for j in 0..d {
                out[j] += a * g[j];
            }
        }
    }

    /// Log marginal likelihood of the training outputs under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let resid = DVector::from_iterator(
            self.dataset.len(),
            self.dataset.outputs().iter().map(|y| y - self.mean_constant),
        );
        let n = self.dataset.len() as f64;
        -0.5 * resid.dot(&self.alpha)
            - 0.5 * self.chol.log_det()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Draws `count` hypothetical observations at `x` from the predictive
    /// distribution and prepares the shared augmented factorization.
    pub fn make_fantasies(&self, x: &[f64], count: usize, seed: u64) -> Result<FantasyBatch<'_>> {
        self.check_point(x)?;
        if count == 0 {
            return Err(Error::Parameter("fantasy count must be at least 1".into()));
        }
        let dist = self.dataset.distance_to_design(x);
        if dist < self.dataset.min_separation() {
            return Err(Error::Rejected(format!(
                "candidate {x:?} is {dist:e} from the design and adds no information"
            )));
        }
        let (mean, var) = self.predict(x)?;
        let sd = (var + self.noise_variance).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sd * z
            })
            .collect();
        let cross = self.cross_covariance(x);
        let corner = self.kernel.output_scale() + self.lookahead_diagonal() - self.chol.jitter();
        let lookahead = self.chol.extend(&cross, corner)?;
        Ok(FantasyBatch {
            base: self,
            candidate: x.to_vec(),
            draws,
            lookahead: Arc::new(lookahead),
        })
    }
}

/// `N_f` fantasy models sharing one augmented factorization; only their
/// outputs (and therefore posterior means) differ.
#[derive(Debug, Clone)]
pub struct FantasyBatch<'a> {
    base: &'a GpModel,
    candidate: Vec<f64>,
    draws: Vec<f64>,
    lookahead: Arc<CholFactor>,
}

impl<'a> FantasyBatch<'a> {
    pub fn base(&self) -> &GpModel {
        self.base
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn lookahead_factor(&self) -> &CholFactor {
        &self.lookahead
    }

    /// The GP conditioned on `D ∪ {(x, y_m)}` with the base hyperparameters.
    pub fn model(&self, m: usize) -> Result<GpModel> {
        let y = *self.draws.get(m).ok_or_else(|| {
            Error::Parameter(format!("fantasy index {m} out of range ({})", self.draws.len()))
        })?;
        let base = self.base;
        let dataset = base.dataset.with_point(self.candidate.clone(), y)?;
        let resid = DVector::from_iterator(
            dataset.len(),
            dataset.outputs().iter().map(|v| v - base.mean_constant),
        );
        let alpha = self.lookahead.solve(&resid);
        Ok(GpModel {
            dataset,
            kernel: base.kernel.clone(),
            mean_constant: base.mean_constant,
            noise_variance: base.noise_variance,
            chol: Arc::clone(&self.lookahead),
            alpha,
        })
    }
}

fn gram(kernel: &KernelSpec, points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.value_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Negative log marginal likelihood and its gradient in
/// `[log σ², log θ_1, …]`, for unit-box inputs and standardized outputs.
fn neg_log_likelihood(
    log_params: &[f64],
    points: &[Vec<f64>],
    z: &DVector<f64>,
    noise: f64,
) -> (f64, Vec<f64>) {
    let fail = (f64::INFINITY, vec![0.0; log_params.len()]);
    let Ok(kernel) = KernelSpec::from_log(log_params) else {
        return fail;
    };
    let n = points.len();
    let d = kernel.dim();
    let k = gram(&kernel, points);
    let Ok(chol) = CholFactor::with_jitter(&k, noise, kernel.output_scale()) else {
        return fail;
    };
    let alpha = chol.solve(z);
    let nll = 0.5 * z.dot(&alpha)
        + 0.5 * chol.log_det()
        + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !nll.is_finite() {
        return fail;
    }
    // ∂nll/∂p = ½ tr((K⁻¹ − ααᵀ) ∂K/∂p)
    let mut w = chol.inverse();
    w.ger(-1.0, &alpha, &alpha, 1.0);
    let mut grad = vec![0.0; d + 1];
    let mut dl = vec![0.0; d];
    for i in 0..n {
        for j in 0..=i {
            let factor = if i == j { 0.5 } else { 1.0 } * w[(i, j)];
            grad[0] += factor * k[(i, j)];
            if i != j {
                kernel.log_lengthscale_derivatives(&points[i], &points[j], &mut dl);
                for l in 0..d {
                    grad[l + 1] += factor * dl[l];
                }
            }
        }
    }
    (nll, grad)
}

/// Fits hyperparameters by multi-start maximization of the log marginal
/// likelihood. Deterministic given `seed`.
pub fn fit(dataset: &Dataset, seed: u64, config: &FitConfig) -> Result<GpModel> {
    let n = dataset.len();
    let d = dataset.dim();
    let bounds = dataset.bounds();
    let unit: Vec<Vec<f64>> = dataset.points().iter().map(|p| bounds.to_unit(p)).collect();

    let mean = dataset.outputs().iter().sum::<f64>() / n as f64;
    let var = dataset
        .outputs()
        .iter()
        .map(|y| (y - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let mut scale = var.sqrt();
    if !(scale > 1e-12 * mean.abs().max(1.0)) {
        scale = 1.0;
    }
    let z = DVector::from_iterator(n, dataset.outputs().iter().map(|y| (y - mean) / scale));
    let noise_nat = config.noise_variance.unwrap_or(0.0);
    if !(noise_nat >= 0.0) {
        return Err(Error::Parameter(format!(
            "noise variance must be nonnegative, got {noise_nat}"
        )));
    }
    let noise_std = noise_nat / (scale * scale);

    let (ls_lo, ls_hi) = config.lengthscale_bounds;
    let (os_lo, os_hi) = config.output_scale_bounds;
    if !(ls_lo > 0.0 && ls_lo < ls_hi && os_lo > 0.0 && os_lo < os_hi) {
        return Err(Error::Parameter("invalid hyperparameter bounds".into()));
    }
    let mut lo = vec![os_lo.ln()];
    let mut hi = vec![os_hi.ln()];
    lo.extend(std::iter::repeat(ls_lo.ln()).take(d));
    hi.extend(std::iter::repeat(ls_hi.ln()).take(d));

    let mut starts = vec![{
        let mut s = vec![0.0];
        s.extend(std::iter::repeat((0.5f64).ln().clamp(lo[1], hi[1])).take(d));
        s
    }];
    let seq = SobolSequence::scrambled(d + 1, seed)?;
    starts.extend((0..config.restarts).map(|i| {
        seq.point(i as u64 + 1)
            .iter()
            .enumerate()
            .map(|(j, u)| lo[j] + u * (hi[j] - lo[j]))
            .collect::<Vec<f64>>()
    }));

    let qn = QnConfig {
        max_iters: config.max_iters,
        grad_tol: 1e-6,
        rel_tol: 1e-10,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let res = minimize_box(
            |p| neg_log_likelihood(p, &unit, &z, noise_std),
            start,
            &lo,
            &hi,
            qn,
        );
        if res.value.is_finite() && best.as_ref().map_or(true, |b| res.value < b.0) {
            best = Some((res.value, res.x));
        }
    }
    let (_, params) = best.ok_or_else(|| {
        Error::Conditioning(format!(
            "no restart produced a factorizable kernel matrix for {n} design points"
        ))
    })?;

    let unit_kernel = KernelSpec::from_log(&params)?;
    let kernel = KernelSpec::new(
        unit_kernel.output_scale() * scale * scale,
        unit_kernel
            .lengthscales()
            .iter()
            .enumerate()
            .map(|(j, t)| t * bounds.width(j))
            .collect(),
    )?;
    GpModel::new(dataset.clone(), kernel, mean, noise_nat)
}
