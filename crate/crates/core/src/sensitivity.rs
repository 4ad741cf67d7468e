//! DGSM and Sobol' index estimation, Poincaré constants and the accuracy
//! metrics used to score an estimate against a reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::inputs::{InputModel, Marginal};

/// Monte Carlo estimate of `E[(∂f/∂x_k)²]` from a gradient oracle.
pub fn dgsm<G>(gradient: G, inputs: &InputModel, mc_size: usize, seed: u64) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if mc_size < 2 {
        return Err(Error::Parameter(format!("mc_size must be at least 2, got {mc_size}")));
    }
    let d = inputs.dim();
    let sample = inputs.sample(mc_size, seed);
    let grads = sample.par_iter().map(|x| gradient(x)).collect::<Result<Vec<_>>>()?;
    // summed in sample order so results do not depend on the thread count
    let mut sums = vec![0.0; d];
    for g in &grads {
        sums.iter_mut().zip(g).for_each(|(s, v)| *s += v * v);
    }
    Ok(sums.into_iter().map(|s| s / mc_size as f64).collect())
}

/// Plug-in DGSM: the analytic gradient of the posterior mean in place of `∇f`.
pub fn dgsm_plugin(model: &GpModel, inputs: &InputModel, mc_size: usize, seed: u64) -> Result<Vec<f64>> {
    if inputs.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "input model has dimension {}, surrogate {}",
            inputs.dim(),
            model.dim()
        )));
    }
    dgsm(|x| Ok(model.mean_gradient(x)?.as_slice().to_vec()), inputs, mc_size, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolEstimate {
    pub first: Vec<f64>,
    pub total: Vec<f64>,
    pub first_std: Vec<f64>,
    pub total_std: Vec<f64>,
    pub variance: f64,
    pub mc_size: usize,
    pub seed: u64,
}

fn mean_std(terms: &[f64]) -> (f64, f64) {
    let n = terms.len() as f64;
    let m = terms.iter().sum::<f64>() / n;
    let v = terms.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Pick-freeze estimates with the A/B/AB_k scheme: first-order indices by
/// `mean((f(B) − f̄)(f(AB_k) − f(A)))/V` and total indices by Jansen's formula.
pub fn sobol_pickfreeze<F>(f: F, inputs: &InputModel, mc_size: usize, seed: u64) -> Result<SobolEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !inputs.is_independent() {
        return Err(Error::Unsupported(
            "Sobol' indices are only estimated for independent inputs".into(),
        ));
    }
    if mc_size < 2 {
        return Err(Error::Parameter(format!("mc_size must be at least 2, got {mc_size}")));
    }
    let d = inputs.dim();
    let sample = inputs.sample(2 * mc_size, seed);
    let (a, b) = sample.split_at(mc_size);
    let fa: Vec<f64> = a.par_iter().map(|x| f(x)).collect();
    let fb: Vec<f64> = b.par_iter().map(|x| f(x)).collect();
    let all: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let variance = all.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (all.len() - 1) as f64;

    let mut est = SobolEstimate {
        first: vec![0.0; d],
        total: vec![0.0; d],
        first_std: vec![0.0; d],
        total_std: vec![0.0; d],
        variance: variance.max(0.0),
        mc_size,
        seed,
    };
    if !(variance > 0.0) {
        return Ok(est);
    }
    for k in 0..d {
        let fab: Vec<f64> = a
            .par_iter()
            .zip(b.par_iter())
            .map(|(xa, xb)| {
                let mut x = xa.clone();
                x[k] = xb[k];
                f(&x)
            })
            .collect();
        let first: Vec<f64> = (0..mc_size).map(|i| (fb[i] - mean) * (fab[i] - fa[i])).collect();
        let total: Vec<f64> = (0..mc_size).map(|i| 0.5 * (fa[i] - fab[i]).powi(2)).collect();
        let (m1, s1) = mean_std(&first);
        let (mt, st) = mean_std(&total);
        est.first[k] = m1 / variance;
        est.first_std[k] = s1 / variance;
        est.total[k] = mt / variance;
        est.total_std[k] = st / variance;
    }
    Ok(est)
}

/// Pick-freeze indices of the posterior mean.
pub fn sobol_plugin(model: &GpModel, inputs: &InputModel, mc_size: usize, seed: u64) -> Result<SobolEstimate> {
    if inputs.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "input model has dimension {}, surrogate {}",
            inputs.dim(),
            model.dim()
        )));
    }
    sobol_pickfreeze(|x| model.mean_unchecked(x), inputs, mc_size, seed)
}

/// `4 [sup_x min(F, 1 − F)/ρ]²` in closed form.
pub fn poincare_constant(marginal: &Marginal) -> Result<f64> {
    marginal.validate()?;
    match *marginal {
        Marginal::Uniform { lower, upper } => Ok((upper - lower).powi(2)),
        Marginal::Normal { std, .. } => Ok(2.0 * std::f64::consts::PI * std * std),
        Marginal::Fixed { .. } => Ok(0.0),
    }
}

/// Same constant with the supremum taken over `points` grid nodes of
/// `[lower, upper]` for a user-supplied CDF and density.
pub fn poincare_constant_grid<C, P>(cdf: C, pdf: P, lower: f64, upper: f64, points: usize) -> Result<f64>
where
    C: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    if !(lower < upper) || points < 2 {
        return Err(Error::Parameter("grid needs lower < upper and at least 2 points".into()));
    }
    let mut sup = 0.0f64;
    for i in 0..points {
        let x = lower + (upper - lower) * i as f64 / (points - 1) as f64;
        let tail = cdf(x).min(1.0 - cdf(x));
        if tail <= 0.0 {
            continue;
        }
        let ratio = tail / pdf(x);
        if !ratio.is_finite() {
            return Err(Error::Domain(format!(
                "min(F, 1 - F)/ρ is unbounded near x = {x}; supply the constant analytically"
            )));
        }
        sup = sup.max(ratio);
    }
    Ok(4.0 * sup * sup)
}

/// Best constant of the one-dimensional Poincaré inequality, for which the
/// bound on the total index is attained by linear functions of Gaussian inputs.
pub fn optimal_poincare_constant(marginal: &Marginal) -> Result<f64> {
    marginal.validate()?;
    match *marginal {
        Marginal::Uniform { lower, upper } => Ok(((upper - lower) / std::f64::consts::PI).powi(2)),
        Marginal::Normal { std, .. } => Ok(std * std),
        Marginal::Fixed { .. } => Ok(0.0),
    }
}

/// Upper bounds `C_k D_k / V` on the total indices.
pub fn dgsm_sobol_bound(dgsm: &[f64], constants: &[f64], variance: f64) -> Result<Vec<f64>> {
    if dgsm.len() != constants.len() {
        return Err(Error::Shape("dgsm and constants differ in length".into()));
    }
    if !(variance > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {variance}")));
    }
    Ok(dgsm.iter().zip(constants).map(|(dk, ck)| ck * dk / variance).collect())
}

/// Root mean squared error over coordinates.
pub fn rmse(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() || estimate.is_empty() {
        return Err(Error::Shape("estimate and reference must have the same nonzero length".into()));
    }
    let s: f64 = estimate.iter().zip(reference).map(|(e, r)| (e - r) * (e - r)).sum();
    Ok((s / estimate.len() as f64).sqrt())
}

/// `1 − Σ(y − ŷ)² / Σ(y − ȳ)²`.
pub fn q2(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.len() < 2 {
        return Err(Error::Shape("q2 needs two equally long vectors of length ≥ 2".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(sst > 0.0) {
        return Err(Error::Domain("test outputs are constant; q2 is undefined".into()));
    }
    let sse: f64 = truth.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - sse / sst)
}

/// Standard normal quantities for the grid-mode constant.
pub fn standard_normal_cdf_pdf() -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    (move |x| n.cdf(x), move |x| n.pdf(x))
}
