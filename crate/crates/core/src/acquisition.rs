//! Acquisition criteria built on the gradient posterior.
//!
//! Look-ahead criteria condition on one hypothetical observation at the
//! candidate `x`. The conditioned gradient covariance is a rank-one downdate
//! `Σ' = Σ − ccᵀ/s²` with `c = Cov(∇η(X_s), η(x))` and `s²` the predictive
//! variance at `x`; the fantasy means differ only through the draw. Every
//! quantity is therefore computed from `Σc`, `cᵀc`, `cᵀμ` and `cᵀΣμ` without
//! refactorizing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::cluster_sites;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::gradient::{quad_form_variance_of, site_cross, GradientPosterior, DEFAULT_MEMORY_CAP};
use crate::support::SupportModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcquisitionKind {
    PartialMaxVar,
    PartialRedVar,
    GradMaxVar,
    GradVarRed,
    GlobalGradVarRed,
    GlobalGradVarRedKmeans,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 6] = [
        AcquisitionKind::PartialMaxVar,
        AcquisitionKind::PartialRedVar,
        AcquisitionKind::GradMaxVar,
        AcquisitionKind::GradVarRed,
        AcquisitionKind::GlobalGradVarRed,
        AcquisitionKind::GlobalGradVarRedKmeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::PartialMaxVar => "PartialMaxVar",
            AcquisitionKind::PartialRedVar => "PartialRedVar",
            AcquisitionKind::GradMaxVar => "GradMaxVar",
            AcquisitionKind::GradVarRed => "GradVarRed",
            AcquisitionKind::GlobalGradVarRed => "GlobalGradVarRed",
            AcquisitionKind::GlobalGradVarRedKmeans => "GlobalGradVarRedKmeans",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Whether the criterion needs a set of gradient sites drawn from the inputs.
    pub fn uses_sites(self) -> bool {
        matches!(
            self,
            AcquisitionKind::GlobalGradVarRed | AcquisitionKind::GlobalGradVarRedKmeans
        )
    }

    pub fn uses_fantasies(self) -> bool {
        matches!(
            self,
            AcquisitionKind::GradVarRed
                | AcquisitionKind::GlobalGradVarRed
                | AcquisitionKind::GlobalGradVarRedKmeans
        )
    }
}

impl std::fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub fantasy_count: usize,
    /// Gradient-site count; `None` means `50 d`.
    pub site_count: Option<usize>,
    pub chunk_count: Option<usize>,
    pub balanced: bool,
    pub penalty: Option<Arc<SupportModel>>,
    pub memory_cap: usize,
    pub seed: u64,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self {
            kind,
            fantasy_count: 8,
            site_count: None,
            chunk_count: None,
            balanced: true,
            penalty: None,
            memory_cap: DEFAULT_MEMORY_CAP,
            seed: 0,
        }
    }

    pub fn sites_for(&self, dim: usize) -> usize {
        self.site_count.unwrap_or(50 * dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_fantasies() && self.fantasy_count == 0 {
            return Err(Error::Parameter(format!(
                "{} needs at least one fantasy",
                self.kind
            )));
        }
        if self.kind == AcquisitionKind::GlobalGradVarRedKmeans && !matches!(self.chunk_count, Some(c) if c >= 1) {
            return Err(Error::Parameter(
                "GlobalGradVarRedKmeans needs a chunk count of at least 1".into(),
            ));
        }
        if self.site_count == Some(0) {
            return Err(Error::Parameter("site count must be positive".into()));
        }
        Ok(())
    }
}

/// `Var(W²)` summed over coordinates for independent `W_j ~ N(μ_j, v_j)`.
pub fn independent_square_variance(mean: &[f64], var: &[f64]) -> f64 {
    mean.iter()
        .zip(var)
        .map(|(m, v)| 2.0 * (v * v + 2.0 * m * m * v))
        .sum()
}

/// Standard-normal fantasy draws; `GpModel::make_fantasies` with the same
/// seed uses the same sequence.
fn fantasy_normals(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Covariance and mean pieces of a conditioned quadratic form.
struct BlockState {
    members: Vec<usize>,
    cov: DMatrix<f64>,
    cross: DMatrix<f64>,
    mean: DVector<f64>,
    cov_mean: DVector<f64>,
}

impl BlockState {
    fn variance(&self) -> f64 {
        2.0 * self.cov.norm_squared() + 4.0 * self.cov_mean.dot(&self.mean)
    }
}

/// Look-ahead quantities at `x` common to every block.
struct Probe {
    v: DVector<f64>,
    s2: f64,
    // predictive standard deviation of a fantasy observation
    sd: f64,
}

fn probe(model: &GpModel, x: &[f64]) -> Result<Probe> {
    let dist = model.dataset().distance_to_design(x);
    if dist < model.dataset().min_separation() {
        return Err(Error::Rejected(format!(
            "candidate {x:?} is {dist:e} from the design and adds no information"
        )));
    }
    let v = model.chol().solve_lower(&model.cross_covariance(x));
    let latent = (model.kernel().output_scale() - v.norm_squared()).max(0.0);
    Ok(Probe {
        v,
        s2: latent + model.lookahead_diagonal(),
        sd: (latent + model.noise_variance()).sqrt(),
    })
}

/// `Cov(∇η(sites), η(x) | D)` for the listed sites.
fn conditioned_cross(model: &GpModel, sites: &[Vec<f64>], members: &[usize], cross: &DMatrix<f64>, p: &Probe, x: &[f64]) -> DVector<f64> {
    let d = model.dim();
    let mut c = cross.tr_mul(&p.v);
    c.neg_mut();
    let mut g = vec![0.0; d];
    for (a, &m) in members.iter().enumerate() {
        model.kernel().grad_x_into(&sites[m], x, &mut g);
        for j in 0..d {
            c[a * d + j] += g[j];
        }
    }
    c
}

/// Average reduction of `2‖Σ‖²_F + 4μᵀΣμ` over the fantasy steps `t_m`.
fn block_reduction(block: &BlockState, c: &DVector<f64>, s2: f64, steps: &[f64]) -> f64 {
    let sc = &block.cov * c;
    let c_sc = c.dot(&sc);
    let cc = c.dot(c);
    let c_mu = c.dot(&block.mean);
    let c_smu = c.dot(&block.cov_mean);
    let frob = 2.0 * c_sc / s2 - cc * cc / (s2 * s2);
    let quad: f64 = steps
        .iter()
        .map(|t| {
            let shifted = c_mu + t * cc;
            -2.0 * t * c_smu - t * t * c_sc + shifted * shifted / s2
        })
        .sum::<f64>()
        / steps.len() as f64;
    2.0 * frob + 4.0 * quad
}

fn local_block(model: &GpModel, x: &[f64]) -> BlockState {
    let sites = [x.to_vec()];
    let cross = site_cross(model, &sites, &[0]);
    let mut cov = model.kernel().prior_gradient_covariance();
    cov.gemm_tr(-1.0, &cross, &cross, 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let mut mean = DVector::zeros(model.dim());
    model.mean_gradient_into(x, mean.as_mut_slice());
    let cov_mean = &cov * &mean;
    BlockState {
        members: vec![0],
        cov,
        cross,
        mean,
        cov_mean,
    }
}

/// Marginal-variance criterion ignoring gradient correlations.
pub fn partial_max_var(model: &GpModel, x: &[f64]) -> Result<f64> {
    check(model, x)?;
    let b = local_block(model, x);
    let var: Vec<f64> = b.cov.diagonal().iter().map(|v| v.max(0.0)).collect();
    Ok(independent_square_variance(b.mean.as_slice(), &var))
}

/// One-step reduction of the marginal criterion with the gradient mean frozen.
pub fn partial_red_var(model: &GpModel, x: &[f64]) -> Result<f64> {
    check(model, x)?;
    let p = probe(model, x)?;
    let b = local_block(model, x);
    let c = conditioned_cross(model, &[x.to_vec()], &[0], &b.cross, &p, x);
    let mut total = 0.0;
    for j in 0..model.dim() {
        let v = b.cov[(j, j)].max(0.0);
        let v_next = (v - c[j] * c[j] / p.s2).max(0.0);
        let m2 = b.mean[j] * b.mean[j];
        total += 2.0 * (v * v - v_next * v_next) + 4.0 * m2 * (v - v_next);
    }
    Ok(total)
}

/// `Var(‖∇η(x)‖²)` under the joint gradient posterior at `x`.
pub fn grad_max_var(model: &GpModel, x: &[f64]) -> Result<f64> {
    check(model, x)?;
    Ok(local_block(model, x).variance())
}

/// Expected reduction of `Var(‖∇η(x)‖²)` after observing `η(x)`.
pub fn grad_var_red(model: &GpModel, x: &[f64], fantasies: usize, seed: u64) -> Result<f64> {
    check(model, x)?;
    if fantasies == 0 {
        return Err(Error::Parameter("fantasy count must be at least 1".into()));
    }
    let p = probe(model, x)?;
    let b = local_block(model, x);
    let c = conditioned_cross(model, &[x.to_vec()], &[0], &b.cross, &p, x);
    let steps: Vec<f64> = fantasy_normals(fantasies, seed).iter().map(|z| z * p.sd / p.s2).collect();
    Ok(block_reduction(&b, &c, p.s2, &steps))
}

fn check(model: &GpModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::Shape(format!(
            "candidate of length {} for a {}-dimensional model",
            x.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// Precomputed state for the global criteria: the gradient posterior at the
/// sites (exact or block-diagonal), shared by every candidate.
pub struct GlobalState {
    sites: Vec<Vec<f64>>,
    blocks: Vec<BlockState>,
    variance: f64,
}

impl GlobalState {
    pub fn new(sites: &[Vec<f64>], posterior: &GradientPosterior) -> Self {
        let blocks: Vec<BlockState> = posterior
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mean = posterior.block_mean(i);
                let cov = b.covariance().clone();
                let cov_mean = &cov * &mean;
                BlockState {
                    members: b.members().to_vec(),
                    cross: b.cross().clone(),
                    cov,
                    mean,
                    cov_mean,
                }
            })
            .collect();
        let variance = blocks.iter().map(|b| b.variance()).sum();
        Self {
            sites: sites.to_vec(),
            blocks,
            variance,
        }
    }

    /// Current (possibly chunked) `Var(‖∇η(X_s)‖²)`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    /// Fantasy-averaged variance reduction at `x`.
    pub fn reduction(&self, model: &GpModel, x: &[f64], normals: &[f64]) -> Result<f64> {
        check(model, x)?;
        let p = probe(model, x)?;
        let steps: Vec<f64> = normals.iter().map(|z| z * p.sd / p.s2).collect();
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                let c = conditioned_cross(model, &self.sites, &b.members, &b.cross, &p, x);
                block_reduction(b, &c, p.s2, &steps)
            })
            .sum())
    }
}

/// Expected reduction of `Var(‖∇η(X_s)‖²)` from observing `η(x)`; exact
/// covariance unless a clustering is given.
pub fn global_grad_var_red(
    model: &GpModel,
    x: &[f64],
    sites: &[Vec<f64>],
    fantasies: usize,
    seed: u64,
    chunks: Option<(usize, bool)>,
) -> Result<f64> {
    let mut spec = AcquisitionSpec::new(match chunks {
        Some(_) => AcquisitionKind::GlobalGradVarRedKmeans,
        None => AcquisitionKind::GlobalGradVarRed,
    });
    spec.fantasy_count = fantasies;
    spec.seed = seed;
    if let Some((c, balanced)) = chunks {
        spec.chunk_count = Some(c);
        spec.balanced = balanced;
    }
    Acquisition::new(&spec, model, sites)?.evaluate_raw(x)
}

/// A criterion bound to one model (and, for global kinds, one site set).
pub struct Acquisition<'a> {
    spec: AcquisitionSpec,
    model: &'a GpModel,
    global: Option<GlobalState>,
    normals: Vec<f64>,
}

impl<'a> Acquisition<'a> {
    /// `sites` is ignored by the local criteria.
    pub fn new(spec: &AcquisitionSpec, model: &'a GpModel, sites: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        let global = match spec.kind {
            AcquisitionKind::GlobalGradVarRed => {
                let post = GradientPosterior::exact_with_cap(model, sites, spec.memory_cap)?;
                Some(GlobalState::new(sites, &post))
            }
            AcquisitionKind::GlobalGradVarRedKmeans => {
                let c = spec.chunk_count.unwrap_or(1).min(sites.len().max(1));
                let clustering = cluster_sites(sites, c, spec.balanced, model.kernel(), spec.seed)?;
                let post = GradientPosterior::chunked(model, sites, &clustering)?;
                Some(GlobalState::new(sites, &post))
            }
            _ => None,
        };
        Ok(Self {
            normals: fantasy_normals(spec.fantasy_count.max(1), spec.seed),
            spec: spec.clone(),
            model,
            global,
        })
    }

    pub fn spec(&self) -> &AcquisitionSpec {
        &self.spec
    }

    pub fn global(&self) -> Option<&GlobalState> {
        self.global.as_ref()
    }

    /// Criterion value without the support penalty.
    pub fn evaluate_raw(&self, x: &[f64]) -> Result<f64> {
        let m = self.model;
        match self.spec.kind {
            AcquisitionKind::PartialMaxVar => partial_max_var(m, x),
            AcquisitionKind::PartialRedVar => partial_red_var(m, x),
            AcquisitionKind::GradMaxVar => grad_max_var(m, x),
            AcquisitionKind::GradVarRed => grad_var_red(m, x, self.spec.fantasy_count, self.spec.seed),
            AcquisitionKind::GlobalGradVarRed | AcquisitionKind::GlobalGradVarRedKmeans => self
                .global
                .as_ref()
                .expect("global state prepared")
                .reduction(m, x, &self.normals),
        }
    }

    /// `ρ(x)·α(x)`, or `α(x)` without a penalty.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let rho = match &self.spec.penalty {
            Some(p) => p.penalty(x),
            None => 1.0,
        };
        if rho == 0.0 {
            return Ok(0.0);
        }
        Ok(rho * self.evaluate_raw(x)?)
    }
}

/// One-shot dispatch: prepares the criterion and evaluates it at `x`.
pub fn evaluate(spec: &AcquisitionSpec, model: &GpModel, sites: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    Acquisition::new(spec, model, sites)?.evaluate(x)
}

/// Reference value of the global criterion computed by explicitly
/// conditioning one GP per fantasy draw (slow; for checks).
pub fn global_grad_var_red_by_refit(
    model: &GpModel,
    x: &[f64],
    sites: &[Vec<f64>],
    fantasies: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let before = GradientPosterior::exact(model, sites)?.quad_form_variance()?;
    let batch = model.make_fantasies(x, fantasies, seed)?;
    let after = (0..batch.len())
        .map(|m| {
            let fm = batch.model(m)?;
            let post = GradientPosterior::exact(&fm, sites)?;
            Ok(quad_form_variance_of(post.mean(), post.covariance().unwrap()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let avg = after.iter().sum::<f64>() / after.len() as f64;
    Ok((before - avg, after.iter().map(|v| before - v).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Bounds;
    use crate::gp::Dataset;
    use crate::kernel::KernelSpec;
    use rand::Rng;

    fn model(d: usize, n: usize, seed: u64) -> GpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys = pts
            .iter()
            .map(|p| p.iter().enumerate().map(|(j, v)| ((j + 2) as f64 * v).sin() * (j as f64 + 1.0)).sum())
            .collect();
        let ls = (0..d).map(|_| 0.25 + 0.5 * rng.random::<f64>()).collect();
        let ds = Dataset::new(pts, ys, Bounds::unit(d)).unwrap();
        GpModel::new(ds, KernelSpec::new(1.5, ls).unwrap(), 0.0, 0.0).unwrap()
    }

    fn sites(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect()
    }

    #[test]
    fn square_variance_reference() {
        assert_eq!(independent_square_variance(&[3.0], &[1.0]), 38.0);
        assert_eq!(independent_square_variance(&[0.0; 4], &[1.0; 4]), 8.0);
    }

    #[test]
    fn grad_max_var_matches_partial_on_diagonal_covariance() {
        // in 1-D the gradient covariance is a scalar
        let m = model(1, 6, 1);
        for x in [0.13, 0.5, 0.91] {
            let a = grad_max_var(&m, &[x]).unwrap();
            let b = partial_max_var(&m, &[x]).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn global_matches_explicit_fantasy_refits() {
        let m = model(2, 8, 2);
        let s = sites(2, 25, 3);
        let x = [0.37, 0.64];
        let fast = global_grad_var_red(&m, &x, &s, 6, 11, None).unwrap();
        let (slow, _) = global_grad_var_red_by_refit(&m, &x, &s, 6, 11).unwrap();
        assert!((fast - slow).abs() <= 1e-6 * slow.abs().max(1.0), "{fast} vs {slow}");
    }

    #[test]
    fn local_var_red_matches_explicit_fantasies() {
        let m = model(3, 12, 4);
        let x = [0.2, 0.7, 0.45];
        let fast = grad_var_red(&m, &x, 5, 9).unwrap();
        let before = grad_max_var(&m, &x).unwrap();
        let batch = m.make_fantasies(&x, 5, 9).unwrap();
        let after: f64 = (0..5)
            .map(|k| grad_max_var(&batch.model(k).unwrap(), &x).unwrap())
            .sum::<f64>()
            / 5.0;
        assert!((fast - (before - after)).abs() <= 1e-6 * before.max(1.0));
    }

    #[test]
    fn single_chunk_equals_exact() {
        let m = model(2, 10, 5);
        let s = sites(2, 30, 6);
        for x in [[0.1, 0.2], [0.77, 0.4]] {
            let exact = global_grad_var_red(&m, &x, &s, 4, 1, None).unwrap();
            let chunked = global_grad_var_red(&m, &x, &s, 4, 1, Some((1, true))).unwrap();
            assert!((exact - chunked).abs() <= 1e-10 * exact.abs().max(1e-300));
        }
    }

    #[test]
    fn first_term_is_the_gradient_quadratic_form() {
        let m = model(2, 10, 7);
        let s = sites(2, 20, 8);
        let spec = AcquisitionSpec::new(AcquisitionKind::GlobalGradVarRed);
        let acq = Acquisition::new(&spec, &m, &s).unwrap();
        let direct = GradientPosterior::exact(&m, &s).unwrap().quad_form_variance().unwrap();
        assert!((acq.global().unwrap().variance() - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn near_duplicates_carry_no_information() {
        let m = model(2, 10, 9);
        let s = sites(2, 20, 10);
        let mut x = m.dataset().points()[3].clone();
        x[0] += 2.0 * m.dataset().min_separation();
        assert!(partial_red_var(&m, &x).unwrap() <= 1e-6);
        assert!(global_grad_var_red(&m, &x, &s, 4, 0, None).unwrap() <= 1e-6);
        assert!(grad_var_red(&m, &x, 4, 0).unwrap() <= 1e-6);
        let dup = m.dataset().points()[3].clone();
        assert!(matches!(partial_red_var(&m, &dup), Err(Error::Rejected(_))));
    }

    #[test]
    fn partial_red_var_nonnegative_and_symmetric_under_prior() {
        let m = model(2, 10, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let x = [rng.random(), rng.random()];
            assert!(partial_red_var(&m, &x).unwrap() >= -1e-8);
        }
        // a two-point design symmetric about the center acts like a symmetric prior
        let ds = Dataset::new(vec![vec![0.2, 0.5], vec![0.8, 0.5]], vec![0.0, 0.0], Bounds::unit(2)).unwrap();
        let m = GpModel::new(ds, KernelSpec::new(1.0, vec![0.3, 0.4]).unwrap(), 0.0, 0.0).unwrap();
        for x in [[0.1, 0.3], [0.33, 0.9], [0.6, 0.45]] {
            let a = partial_red_var(&m, &x).unwrap();
            let b = partial_red_var(&m, &[1.0 - x[0], 1.0 - x[1]]).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn fantasy_count_irrelevant_with_zero_mean() {
        let ds = Dataset::new(vec![vec![0.1], vec![0.9]], vec![0.0, 0.0], Bounds::unit(1)).unwrap();
        let m = GpModel::new(ds, KernelSpec::new(1.0, vec![0.2]).unwrap(), 0.0, 0.0).unwrap();
        let x = [0.5];
        // at the midpoint of a symmetric design the value and the gradient are
        // uncorrelated, so no draw moves the gradient mean
        let a = grad_var_red(&m, &x, 1, 0).unwrap();
        let b = grad_var_red(&m, &x, 100, 5).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn penalty_scales_and_zeroes() {
        use crate::support::{GaussianMixture, SupportModel};
        let m = model(2, 8, 13);
        let g = GaussianMixture::new(
            vec![1.0],
            vec![DVector::from_vec(vec![0.5])],
            vec![DMatrix::from_element(1, 1, 0.01)],
        )
        .unwrap();
        let support = SupportModel::new(vec![1], g, vec![1.0], 10.0, 0.0).unwrap();
        let mut spec = AcquisitionSpec::new(AcquisitionKind::GradMaxVar);
        let raw = Acquisition::new(&spec, &m, &[]).unwrap();
        spec.penalty = Some(Arc::new(support.clone()));
        let pen = Acquisition::new(&spec, &m, &[]).unwrap();
        for x in [[0.3, 0.5], [0.3, 0.58], [0.3, 0.99]] {
            let want = support.penalty(&x) * raw.evaluate(&x).unwrap();
            assert!((pen.evaluate(&x).unwrap() - want).abs() <= 1e-14 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = model(2, 8, 14);
        let s = sites(2, 20, 15);
        let a = global_grad_var_red(&m, &[0.3, 0.3], &s, 8, 3, Some((4, true))).unwrap();
        let b = global_grad_var_red(&m, &[0.3, 0.3], &s, 8, 3, Some((4, true))).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn spec_validation() {
        let mut spec = AcquisitionSpec::new(AcquisitionKind::GlobalGradVarRedKmeans);
        assert!(spec.validate().is_err());
        spec.chunk_count = Some(3);
        assert!(spec.validate().is_ok());
        spec.fantasy_count = 0;
        assert!(spec.validate().is_err());
        assert_eq!(AcquisitionKind::parse("gradvarred"), Some(AcquisitionKind::GradVarRed));
    }
}
