//! Smooth penalty for a dependent input group living on a constrained
//! support: a Gaussian mixture fitted by EM, one Mahalanobis ellipsoid per
//! component, a log-sum-exp soft minimum of the signed distances and a
//! sigmoid gate.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

const EM_MAX_ITERS: usize = 500;
const EM_TOL: f64 = 1e-9;
/// Relative covariance floor used when a component collapses.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Weighted Gaussian mixture with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    chols: Vec<Cholesky<f64, Dyn>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<DVector<f64>>, covs: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covs.len() != k {
            return Err(Error::Shape(format!(
                "mixture needs matching weights/means/covariances, got {}/{}/{}",
                k,
                means.len(),
                covs.len()
            )));
        }
        let s = means[0].len();
        if s == 0 || means.iter().any(|m| m.len() != s) || covs.iter().any(|c| c.shape() != (s, s)) {
            return Err(Error::Shape("inconsistent mixture component dimensions".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Parameter("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        let chols = covs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.clone().cholesky().ok_or_else(|| {
                    Error::Parameter(format!("covariance of component {i} is not positive definite"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights,
            means,
            covs,
            chols,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covs
    }

    /// Mahalanobis distance from `z` to component `i`.
    pub fn mahalanobis(&self, i: usize, z: &[f64]) -> f64 {
        let mut diff = DVector::from_iterator(z.len(), z.iter().zip(self.means[i].iter()).map(|(a, b)| a - b));
        self.chols[i].l_dirty().solve_lower_triangular_mut(&mut diff);
        diff.norm()
    }

    fn log_density(&self, i: usize, z: &[f64]) -> f64 {
        let s = self.dim() as f64;
        let m = self.mahalanobis(i, z);
        let log_det: f64 = 2.0 * self.chols[i].l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * (m * m + log_det + s * (2.0 * std::f64::consts::PI).ln())
    }

    pub fn log_likelihood(&self, samples: &[Vec<f64>]) -> f64 {
        samples
            .iter()
            .map(|z| {
                let terms: Vec<f64> = (0..self.components())
                    .map(|i| self.weights[i].ln() + self.log_density(i, z))
                    .collect();
                log_sum_exp(&terms)
            })
            .sum()
    }

    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut i = self.components() - 1;
                for (k, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        i = k;
                        break;
                    }
                }
                let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
                let x = &self.means[i] + self.chols[i].l_dirty().lower_triangle() * z;
                x.iter().copied().collect()
            })
            .collect()
    }

    fn responsibilities(&self, samples: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let mut ll = 0.0;
        let resp = samples
            .iter()
            .map(|z| {
                let terms: Vec<f64> = (0..self.components())
                    .map(|i| self.weights[i].ln() + self.log_density(i, z))
                    .collect();
                let norm = log_sum_exp(&terms);
                ll += norm;
                terms.iter().map(|t| (t - norm).exp()).collect()
            })
            .collect();
        (resp, ll)
    }

    /// Index of the most responsible component for `z` (lowest index on ties).
    pub fn assign(&self, z: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.components() {
            let v = self.weights[i].ln() + self.log_density(i, z);
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    }

    fn parameter_count(&self) -> usize {
        let k = self.components();
        let s = self.dim();
        k - 1 + k * s + k * s * (s + 1) / 2
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Orientation of the sigmoid gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// `σ(a(S + b))`: close to 1 inside the support, 0 far outside.
    #[default]
    Corrected,
    /// `σ(a(b − S))`, which is close to 0 inside the support.
    Literal,
}

#[derive(Debug, Clone)]
pub struct SupportModel {
    group: Vec<usize>,
    mixture: GaussianMixture,
    radii: Vec<f64>,
    sharpness: f64,
    dilation: f64,
    mode: GateMode,
}

impl SupportModel {
    pub fn new(
        group: Vec<usize>,
        mixture: GaussianMixture,
        radii: Vec<f64>,
        sharpness: f64,
        dilation: f64,
    ) -> Result<Self> {
        if group.len() != mixture.dim() {
            return Err(Error::Shape(format!(
                "group of {} coordinates for a {}-dimensional mixture",
                group.len(),
                mixture.dim()
            )));
        }
        let mut sorted = group.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != group.len() {
            return Err(Error::Parameter("group indices must be distinct".into()));
        }
        if radii.len() != mixture.components() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Parameter("one positive radius per component is required".into()));
        }
        if !(sharpness > 0.0) || !(dilation >= 0.0) {
            return Err(Error::Parameter(format!(
                "need sharpness > 0 and dilation ≥ 0, got {sharpness} and {dilation}"
            )));
        }
        Ok(Self {
            group,
            mixture,
            radii,
            sharpness,
            dilation,
            mode: GateMode::Corrected,
        })
    }

    pub fn with_mode(mut self, mode: GateMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_gate(mut self, sharpness: f64, dilation: f64) -> Result<Self> {
        if !(sharpness > 0.0) || !(dilation >= 0.0) {
            return Err(Error::Parameter(format!(
                "need sharpness > 0 and dilation ≥ 0, got {sharpness} and {dilation}"
            )));
        }
        self.sharpness = sharpness;
        self.dilation = dilation;
        Ok(self)
    }

    pub fn group(&self) -> &[usize] {
        &self.group
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    pub fn mode(&self) -> GateMode {
        self.mode
    }

    /// Signed distances `s_i(z) = d_i(z) − R_i`.
    pub fn signed_distances(&self, z: &[f64]) -> Vec<f64> {
        (0..self.radii.len())
            .map(|i| self.mixture.mahalanobis(i, z) - self.radii[i])
            .collect()
    }

    /// `S(z) = log Σ exp(−s_i(z))`.
    pub fn soft_min_field(&self, z: &[f64]) -> f64 {
        let neg: Vec<f64> = self.signed_distances(z).iter().map(|s| -s).collect();
        log_sum_exp(&neg)
    }

    /// Gate value for the group coordinates `z`.
    pub fn penalty_group(&self, z: &[f64]) -> f64 {
        let s = self.soft_min_field(z);
        let arg = match self.mode {
            GateMode::Corrected => self.sharpness * (s + self.dilation),
            GateMode::Literal => self.sharpness * (self.dilation - s),
        };
        sigmoid(arg)
    }

    /// Gate value for a full input point.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        self.penalty_group(&self.extract(x))
    }

    pub fn extract(&self, x: &[f64]) -> Vec<f64> {
        self.group.iter().map(|&i| x[i]).collect()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Settings for fitting a support model from samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportFit {
    /// Number of mixture components; chosen by BIC over 1..=5 when `None`.
    pub components: Option<usize>,
    pub radius_quantile: f64,
    pub sharpness: f64,
    pub dilation: f64,
    pub mode: GateMode,
}

impl Default for SupportFit {
    fn default() -> Self {
        Self {
            components: None,
            radius_quantile: 0.99,
            sharpness: 10.0,
            dilation: 0.0,
            mode: GateMode::Corrected,
        }
    }
}

/// Fits a `k`-component mixture by EM (k-means++ start). Deterministic given `seed`.
pub fn fit_mixture(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<GaussianMixture> {
    let m = samples.len();
    if k == 0 {
        return Err(Error::Parameter("mixture needs at least one component".into()));
    }
    if m < 10 * k {
        return Err(Error::Parameter(format!(
            "{m} samples are too few for {k} components (need at least {})",
            10 * k
        )));
    }
    let s = samples[0].len();
    if s == 0 || samples.iter().any(|z| z.len() != s) {
        return Err(Error::Shape("samples must share a nonzero dimension".into()));
    }
    match em(samples, k, seed, 0.0) {
        Ok(g) => Ok(g),
        Err(_) => {
            let mean_var = (0..s)
                .map(|j| {
                    let mu = samples.iter().map(|z| z[j]).sum::<f64>() / m as f64;
                    samples.iter().map(|z| (z[j] - mu).powi(2)).sum::<f64>() / m as f64
                })
                .sum::<f64>()
                / s as f64;
            let floor = COVARIANCE_FLOOR * if mean_var > 0.0 { mean_var } else { 1.0 };
            em(samples, k, seed, floor)
        }
    }
}

fn em(samples: &[Vec<f64>], k: usize, seed: u64, floor: f64) -> Result<GaussianMixture> {
    let m = samples.len();
    let s = samples[0].len();
    let collapse = || Error::Parameter(format!("EM for {k} components collapsed (covariance floor {floor:e})"));

    // k-means++ seeding for the means, shared data covariance to start
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = vec![DVector::from_column_slice(&samples[rng.random_range(0..m)])];
    let dist = |a: &[f64], b: &DVector<f64>| a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    while means.len() < k {
        let w: Vec<f64> = samples
            .iter()
            .map(|z| means.iter().map(|c| dist(z, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = w.iter().sum();
        let mut pick = rng.random_range(0..m);
        if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            for (i, wi) in w.iter().enumerate() {
                if u < *wi {
                    pick = i;
                    break;
                }
                u -= wi;
            }
        }
        means.push(DVector::from_column_slice(&samples[pick]));
    }
    let centered_cov = |weights: &[f64], mean: &DVector<f64>| {
        let total: f64 = weights.iter().sum();
        let mut c = DMatrix::zeros(s, s);
        for (z, w) in samples.iter().zip(weights) {
            let d = DVector::from_iterator(s, z.iter().zip(mean.iter()).map(|(a, b)| a - b));
            c.ger(*w / total, &d, &d, 1.0);
        }
        for j in 0..s {
            c[(j, j)] += floor;
        }
        c
    };
    let global_mean = DVector::from_fn(s, |j, _| samples.iter().map(|z| z[j]).sum::<f64>() / m as f64);
    let start_cov = centered_cov(&vec![1.0; m], &global_mean);
    let mut gmm = GaussianMixture::new(vec![1.0; k], means, vec![start_cov; k]).map_err(|_| collapse())?;

    let mut last = f64::NEG_INFINITY;
    for _ in 0..EM_MAX_ITERS {
        let (resp, ll) = gmm.responsibilities(samples);
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut covs = Vec::with_capacity(k);
        for i in 0..k {
            let r: Vec<f64> = resp.iter().map(|row| row[i]).collect();
            let nk: f64 = r.iter().sum();
            if !(nk > 1e-8 * m as f64) {
                return Err(collapse());
            }
            let mean = DVector::from_fn(s, |j, _| samples.iter().zip(&r).map(|(z, w)| w * z[j]).sum::<f64>() / nk);
            covs.push(centered_cov(&r, &mean));
            means.push(mean);
            weights.push(nk / m as f64);
        }
        gmm = GaussianMixture::new(weights, means, covs).map_err(|_| collapse())?;
        let min_eig = gmm
            .covs
            .iter()
            .map(|c| c.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min);
        let scale = gmm.covs.iter().map(|c| c.trace()).fold(0.0, f64::max) / s as f64;
        if floor == 0.0 && !(min_eig > 1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return Err(collapse());
        }
        if (ll - last).abs() <= EM_TOL * ll.abs().max(1.0) {
            break;
        }
        last = ll;
    }
    Ok(gmm)
}

/// Radii: the `quantile` of the Mahalanobis distances of the samples each
/// component is most responsible for. Components without samples (or whose
/// samples all coincide with the mean) fall back to the χ quantile.
pub fn quantile_radii(mixture: &GaussianMixture, samples: &[Vec<f64>], quantile: f64) -> Result<Vec<f64>> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::Parameter(format!("radius quantile must lie in (0, 1), got {quantile}")));
    }
    let chi = ChiSquared::new(mixture.dim() as f64)
        .map_err(|e| Error::Parameter(e.to_string()))?
        .inverse_cdf(quantile)
        .sqrt();
    let mut dists = vec![Vec::new(); mixture.components()];
    for z in samples {
        let i = mixture.assign(z);
        dists[i].push(mixture.mahalanobis(i, z));
    }
    Ok(dists
        .into_iter()
        .map(|mut d| {
            if d.is_empty() {
                return chi;
            }
            d.sort_by(f64::total_cmp);
            let r = empirical_quantile(&d, quantile);
            if r > 0.0 {
                r
            } else {
                chi
            }
        })
        .collect())
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Chooses the component count by BIC over `1..=5` (limited by the sample size).
pub fn select_components(samples: &[Vec<f64>], seed: u64) -> Result<usize> {
    let m = samples.len();
    let mut best: Option<(f64, usize)> = None;
    for k in 1..=5usize.min(m / 10) {
        let Ok(g) = fit_mixture(samples, k, seed) else {
            continue;
        };
        let bic = -2.0 * g.log_likelihood(samples) + g.parameter_count() as f64 * (m as f64).ln();
        if best.map_or(true, |b| bic < b.0) {
            best = Some((bic, k));
        }
    }
    best.map(|b| b.1).ok_or_else(|| {
        Error::Parameter(format!("no mixture could be fitted to {m} samples"))
    })
}

/// Fits the support model of the coordinates `group` from samples of those coordinates.
pub fn fit_support(group: Vec<usize>, samples: &[Vec<f64>], settings: &SupportFit, seed: u64) -> Result<SupportModel> {
    let k = match settings.components {
        Some(k) => k,
        None => select_components(samples, seed)?,
    };
    let mixture = fit_mixture(samples, k, seed)?;
    let radii = quantile_radii(&mixture, samples, settings.radius_quantile)?;
    Ok(SupportModel::new(group, mixture, radii, settings.sharpness, settings.dilation)?.with_mode(settings.mode))
}

/// Reads samples of the dependent group: one row per observation, numeric
/// columns, an optional header row.
pub fn read_samples_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Config(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no samples", path.display())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Normal;

    fn single(radius: f64) -> SupportModel {
        let g = GaussianMixture::new(
            vec![1.0],
            vec![DVector::from_vec(vec![1.0, -1.0])],
            vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5])],
        )
        .unwrap();
        SupportModel::new(vec![0, 2], g, vec![radius], 10.0, 0.0).unwrap()
    }

    /// Point at Mahalanobis distance `d` from the mean of `single`.
    fn at_distance(m: &SupportModel, d: f64) -> Vec<f64> {
        let l = m.mixture().chols[0].l();
        let z = &m.mixture().means()[0] + l * DVector::from_vec(vec![d, 0.0]);
        z.iter().copied().collect()
    }

    #[test]
    fn soft_min_reference_points() {
        let m = single(3.0);
        assert!((m.soft_min_field(&[1.0, -1.0]) - 3.0).abs() < 1e-12);
        assert!(m.soft_min_field(&at_distance(&m, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn soft_min_of_distant_components_is_hard_min() {
        let g = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![100.0])],
            vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
        )
        .unwrap();
        let m = SupportModel::new(vec![0], g, vec![1.0, 2.0], 10.0, 0.0).unwrap();
        for z in [0.5, 3.0, -4.0] {
            let s = m.signed_distances(&[z]);
            let hard = -s.iter().copied().fold(f64::INFINITY, f64::min);
            assert!((m.soft_min_field(&[z]) - hard).abs() < 1e-6);
        }
    }

    #[test]
    fn gate_values() {
        let m = single(3.0);
        assert!(m.penalty(&[1.0, 9.0, -1.0]) >= 1.0 - 1e-9);
        let z = at_distance(&m, 3.0);
        assert_eq!(m.penalty_group(&z), 0.5);
        let m = single(3.0).with_gate(10.0, 0.5).unwrap();
        let z = at_distance(&m, 3.0 + 0.5 + 1.0);
        let want = 1.0 / (1.0 + 10f64.exp());
        assert!((m.penalty_group(&z) - want).abs() < 1e-15);
        assert!((want - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn literal_mode_is_reversed() {
        let m = single(3.0).with_mode(GateMode::Literal);
        assert!(m.penalty_group(&[1.0, -1.0]) < 1e-9);
        assert!(m.penalty_group(&at_distance(&m, 10.0)) > 1.0 - 1e-9);
    }

    #[test]
    fn gate_is_monotone_along_rays() {
        let m = single(2.0);
        let mut last = 1.0;
        for i in 0..500 {
            let v = m.penalty_group(&at_distance(&m, i as f64 * 0.02));
            assert!(v > 0.0 && v < 1.0 && v <= last);
            last = v;
        }
    }

    #[test]
    fn radius_of_isotropic_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 1.5).unwrap();
        let samples: Vec<Vec<f64>> = (0..4000).map(|_| vec![n.sample(&mut rng), n.sample(&mut rng)]).collect();
        let model = fit_support(vec![0, 1], &samples, &SupportFit { components: Some(1), ..Default::default() }, 0).unwrap();
        let chi = (-2.0 * 0.01f64.ln()).sqrt(); // χ_2 quantile in closed form
        assert!((model.radii()[0] / chi - 1.0).abs() < 0.1, "{}", model.radii()[0]);
    }

    #[test]
    fn identical_samples_get_floor_covariance() {
        let samples = vec![vec![2.0, 3.0]; 20];
        let g = fit_mixture(&samples, 1, 0).unwrap();
        let want = DMatrix::<f64>::identity(2, 2) * COVARIANCE_FLOOR;
        assert!((&g.covariances()[0] - want).abs().max() < 1e-18);
        let radii = quantile_radii(&g, &samples, 0.99).unwrap();
        assert!(radii[0] > 0.0);
    }

    #[test]
    fn recovers_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = Normal::new(0.0, 0.05).unwrap();
        let centers = [[0.25, 0.3], [0.7, 0.8]];
        let samples: Vec<Vec<f64>> = (0..600)
            .map(|i| {
                let c = centers[i % 2];
                vec![c[0] + n.sample(&mut rng), c[1] + n.sample(&mut rng)]
            })
            .collect();
        let g = fit_mixture(&samples, 2, 1).unwrap();
        for c in centers {
            let close = g
                .means()
                .iter()
                .any(|m| ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt() < 0.1);
            assert!(close);
        }
        assert_eq!(select_components(&samples, 1).unwrap(), 2);
    }

    #[test]
    fn too_few_samples() {
        let samples = vec![vec![0.0]; 15];
        assert!(fit_mixture(&samples, 2, 0).is_err());
    }

    #[test]
    fn reads_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        std::fs::write(&p, "a,b\n1,2\n3.5, 4\n").unwrap();
        assert_eq!(read_samples_csv(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.5, 4.0]]);
        std::fs::write(&p, "1,2\nx,4\n").unwrap();
        assert!(read_samples_csv(&p).is_err());
    }
}
