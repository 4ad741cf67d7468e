//! Joint posterior of the GP gradient over a set of sites, the variance of
//! its squared norm, the block-diagonal (chunked) approximation and the
//! bounds on the error that approximation introduces.
//!
//! The stacked gradient is site-major: entry `ℓ·d + j` is `∂η/∂x_j` at site `ℓ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cluster::{cluster_sites, Clustering};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::KernelSpec;

/// Default cap on stored covariance entries (`2^26`, 512 MiB of `f64`).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

/// One diagonal block of the gradient covariance.
#[derive(Debug, Clone)]
pub struct CovBlock {
    members: Vec<usize>,
    cov: DMatrix<f64>,
    // L⁻¹ ∇k(X, sites)ᵀ, n × (n_i d); reused by look-ahead updates
    cross: DMatrix<f64>,
}

impl CovBlock {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub(crate) fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }
}

#[derive(Debug, Clone)]
pub struct GradientPosterior {
    sites: Vec<Vec<f64>>,
    dim: usize,
    mean: DVector<f64>,
    blocks: Vec<CovBlock>,
    exact: bool,
}

impl GradientPosterior {
    /// Exact joint posterior with the default memory cap.
    pub fn exact(model: &GpModel, sites: &[Vec<f64>]) -> Result<Self> {
        Self::exact_with_cap(model, sites, DEFAULT_MEMORY_CAP)
    }

    pub fn exact_with_cap(model: &GpModel, sites: &[Vec<f64>], cap: usize) -> Result<Self> {
        check_sites(model, sites)?;
        let nd = sites.len() * model.dim();
        let entries = nd.saturating_mul(nd);
        if entries > cap {
            return Err(Error::MemoryCap(format!(
                "{nd}×{nd} gradient covariance needs {entries} entries (cap {cap}); \
                 use the chunked posterior (GlobalGradVarRedKmeans) instead"
            )));
        }
        let members: Vec<usize> = (0..sites.len()).collect();
        let block = build_block(model, sites, members);
        Ok(Self {
            sites: sites.to_vec(),
            dim: model.dim(),
            mean: stacked_mean(model, sites),
            blocks: vec![block],
            exact: true,
        })
    }

    /// Block-diagonal posterior: only within-cluster covariances are formed.
    pub fn chunked(model: &GpModel, sites: &[Vec<f64>], clustering: &Clustering) -> Result<Self> {
        check_sites(model, sites)?;
        if clustering.total() != sites.len() {
            return Err(Error::Shape(format!(
                "clustering of {} sites applied to {} sites",
                clustering.total(),
                sites.len()
            )));
        }
        let blocks: Vec<CovBlock> = clustering
            .members()
            .into_par_iter()
            .map(|m| build_block(model, sites, m))
            .collect();
        Ok(Self {
            sites: sites.to_vec(),
            dim: model.dim(),
            mean: stacked_mean(model, sites),
            exact: blocks.len() == 1,
            blocks,
        })
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stacked gradient mean `μ∇` (length `N d`).
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// The full covariance when it was formed.
    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.exact.then(|| &self.blocks[0].cov)
    }

    pub fn blocks(&self) -> &[CovBlock] {
        &self.blocks
    }

    /// Number of covariance entries held in memory.
    pub fn stored_entries(&self) -> usize {
        self.blocks.iter().map(|b| b.cov.len()).sum()
    }

    /// Mean entries belonging to block `i`, in block order.
    pub fn block_mean(&self, i: usize) -> DVector<f64> {
        gather(&self.mean, &self.blocks[i].members, self.dim)
    }

    /// `Var(ZᵀZ) = 2 tr(Σ²) + 4 μᵀΣμ`; requires the exact covariance.
    pub fn quad_form_variance(&self) -> Result<f64> {
        match self.covariance() {
            Some(cov) => Ok(quad_form_variance_of(&self.mean, cov)),
            None => Err(Error::Unsupported(
                "block-only posterior: use chunked_quad_form_variance".into(),
            )),
        }
    }

    /// Sum of the block-wise quadratic-form variances.
    pub fn chunked_quad_form_variance(&self) -> f64 {
        (0..self.blocks.len())
            .map(|i| quad_form_variance_of(&self.block_mean(i), &self.blocks[i].cov))
            .sum()
    }
}

/// Variance of `ZᵀZ` for `Z ~ N(μ, Σ)`: `2 tr(Σ²) + 4 μᵀΣμ`.
pub fn quad_form_variance_of(mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let frob = cov.norm_squared();
    let q = (cov * mean).dot(mean);
    2.0 * frob + 4.0 * q
}

fn check_sites(model: &GpModel, sites: &[Vec<f64>]) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::Parameter("at least one gradient site is required".into()));
    }
    if let Some(s) = sites.iter().find(|s| s.len() != model.dim()) {
        return Err(Error::Shape(format!(
            "site of length {} for a {}-dimensional model",
            s.len(),
            model.dim()
        )));
    }
    Ok(())
}

fn gather(v: &DVector<f64>, members: &[usize], d: usize) -> DVector<f64> {
    DVector::from_iterator(
        members.len() * d,
        members.iter().flat_map(|&m| (0..d).map(move |j| v[m * d + j])),
    )
}

fn stacked_mean(model: &GpModel, sites: &[Vec<f64>]) -> DVector<f64> {
    let d = model.dim();
    let mut mean = DVector::zeros(sites.len() * d);
    for (l, s) in sites.iter().enumerate() {
        model.mean_gradient_into(s, &mut mean.as_mut_slice()[l * d..(l + 1) * d]);
    }
    mean
}

/// `L⁻¹ ∇k(X, sites)ᵀ` for the given site subset.
pub(crate) fn site_cross(model: &GpModel, sites: &[Vec<f64>], members: &[usize]) -> DMatrix<f64> {
    let d = model.dim();
    let design = model.dataset().points();
    let mut gt = DMatrix::zeros(design.len(), members.len() * d);
    let mut g = vec![0.0; d];
    for (a, &m) in members.iter().enumerate() {
        for (i, p) in design.iter().enumerate() {
            model.kernel().grad_x_into(&sites[m], p, &mut g);
            for j in 0..d {
                gt[(i, a * d + j)] = g[j];
            }
        }
    }
    model.chol().solve_lower_matrix(&gt)
}

fn build_block(model: &GpModel, sites: &[Vec<f64>], members: Vec<usize>) -> CovBlock {
    let d = model.dim();
    let m = members.len();
    let kernel = model.kernel();
    let cross = site_cross(model, sites, &members);
    let mut cov = DMatrix::zeros(m * d, m * d);
    for a in 0..m {
        for b in 0..=a {
            kernel.cross_hessian_into(&sites[members[a]], &sites[members[b]], &mut cov, a * d, b * d);
        }
    }
    for a in 0..m * d {
        for b in a + 1..m * d {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    cov.gemm_tr(-1.0, &cross, &cross, 1.0);
    // exact symmetry despite round-off in the rank update
    for a in 0..m * d {
        for b in a + 1..m * d {
            let v = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    CovBlock { members, cov, cross }
}

/// Bounds on the discrepancy between exact and chunked variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCertificate {
    /// Bound on `‖E‖²_F` from the global separation `Δ`.
    pub frob_bound: f64,
    /// Bound on `‖E‖₂` from `Δ`.
    pub spec_bound: f64,
    /// `2·frob_bound + 4‖μ‖²·spec_bound`.
    pub total_bound: f64,
    /// `Σ_{i≠j} n_i n_j h(Δ_ij)`.
    pub pairwise_frob_bound: f64,
    /// `max_i Σ_{j≠i} √(n_i n_j h(Δ_ij))`.
    pub pairwise_spec_bound: f64,
    pub pairwise_total_bound: f64,
    /// Measured `|V − Ṽ|` when the exact variance was computed.
    pub exact_error: Option<f64>,
}

impl BoundCertificate {
    pub fn with_exact_error(mut self, error: f64) -> Self {
        self.exact_error = Some(error);
        self
    }

    /// `exact_error / total_bound` (0 when both vanish).
    pub fn ratio(&self) -> Option<f64> {
        self.exact_error.map(|e| {
            if self.total_bound > 0.0 {
                e / self.total_bound
            } else if e == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Certificate for a clustering, given `‖μ∇‖²`.
pub fn error_certificate(
    kernel: &KernelSpec,
    clustering: &Clustering,
    mean_norm_sq: f64,
) -> Result<BoundCertificate> {
    let c = clustering.count();
    if c == 1 {
        return Ok(BoundCertificate {
            frob_bound: 0.0,
            spec_bound: 0.0,
            total_bound: 0.0,
            pairwise_frob_bound: 0.0,
            pairwise_spec_bound: 0.0,
            pairwise_total_bound: 0.0,
            exact_error: None,
        });
    }
    let sizes = clustering.sizes();
    let n = clustering.total() as f64;
    let h = kernel.frobenius_envelope(clustering.delta())?;
    let sum_sq: f64 = sizes.iter().map(|s| (*s as f64).powi(2)).sum();
    let frob = (n * n - sum_sq) * h;
    let equal = sizes.iter().all(|s| *s == sizes[0]);
    let b = if equal {
        n * (1.0 - 1.0 / c as f64)
    } else {
        let n_max = *sizes.iter().max().unwrap() as f64;
        (n + (c as f64 - 2.0) * n_max) / 2.0
    };
    let spec = b * h.sqrt();

    let pairs = clustering.delta_pairs();
    let mut pair_frob = 0.0;
    let mut pair_spec: f64 = 0.0;
    for i in 0..c {
        let mut row = 0.0;
        for j in 0..c {
            if i != j {
                let hij = kernel.frobenius_envelope(pairs[(i, j)])?;
                let w = (sizes[i] * sizes[j]) as f64;
                pair_frob += w * hij;
                row += (w * hij).sqrt();
            }
        }
        pair_spec = pair_spec.max(row);
    }
    Ok(BoundCertificate {
        frob_bound: frob,
        spec_bound: spec,
        total_bound: 2.0 * frob + 4.0 * mean_norm_sq * spec,
        pairwise_frob_bound: pair_frob,
        pairwise_spec_bound: pair_spec,
        pairwise_total_bound: 2.0 * pair_frob + 4.0 * mean_norm_sq * pair_spec,
        exact_error: None,
    })
}

/// Exact variance, chunked variance and the certificate with the measured error.
#[derive(Debug, Clone)]
pub struct ChunkingCheck {
    pub exact: f64,
    pub chunked: f64,
    pub certificate: BoundCertificate,
}

pub fn certify_chunking(
    model: &GpModel,
    sites: &[Vec<f64>],
    clustering: &Clustering,
) -> Result<ChunkingCheck> {
    let full = GradientPosterior::exact(model, sites)?;
    let exact = full.quad_form_variance()?;
    let chunked = GradientPosterior::chunked(model, sites, clustering)?.chunked_quad_form_variance();
    let cert = error_certificate(model.kernel(), clustering, full.mean().norm_squared())?
        .with_exact_error((exact - chunked).abs());
    Ok(ChunkingCheck {
        exact,
        chunked,
        certificate: cert,
    })
}

/// Entries stored by `C` balanced blocks of `N` sites in dimension `d`.
pub fn balanced_block_entries(n: usize, d: usize, c: usize) -> usize {
    let q = n / c;
    let r = n % c;
    let big = (q + 1) * d;
    let small = q * d;
    r * big * big + (c - r) * small * small
}

/// Smallest `C` whose balanced blocks fit in `cap` entries.
pub fn chunk_count_for_cap(cap: usize, n: usize, d: usize) -> Result<usize> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter("need at least one site and one dimension".into()));
    }
    (1..=n)
        .find(|c| balanced_block_entries(n, d, *c) <= cap)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "memory cap {cap} is below {} entries, the footprint of singleton blocks",
                n * d * d
            ))
        })
}

#[derive(Debug, Clone)]
pub struct ChunkAdvice {
    pub count: usize,
    pub clustering: Clustering,
    /// Advisory only: chunk counts chosen from memory are a heuristic.
    pub certificate: BoundCertificate,
}

/// Picks the smallest balanced chunk count fitting `cap` and reports the
/// certificate of the resulting clustering.
pub fn suggest_chunks(
    cap: usize,
    kernel: &KernelSpec,
    sites: &[Vec<f64>],
    mean_norm_sq: f64,
    seed: u64,
) -> Result<ChunkAdvice> {
    let count = chunk_count_for_cap(cap, sites.len(), kernel.dim())?;
    let clustering = cluster_sites(sites, count, true, kernel, seed)?;
    let certificate = error_certificate(kernel, &clustering, mean_norm_sq)?;
    Ok(ChunkAdvice {
        count,
        clustering,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Bounds;
    use crate::gp::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(d: usize, n: usize, seed: u64) -> GpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys = pts.iter().map(|p| p.iter().enumerate().map(|(j, v)| ((j + 1) as f64 * v).sin()).sum()).collect();
        let ls = (0..d).map(|_| 0.2 + 0.6 * rng.random::<f64>()).collect();
        let ds = Dataset::new(pts, ys, Bounds::unit(d)).unwrap();
        GpModel::new(ds, KernelSpec::new(1.0 + rng.random::<f64>(), ls).unwrap(), 0.1, 0.0).unwrap()
    }

    fn random_sites(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect()
    }

    #[test]
    fn prior_gradient_covariance_far_from_data() {
        let model = random_model(2, 6, 1);
        let post = GradientPosterior::exact(&model, &[vec![40.0, -35.0]]).unwrap();
        let prior = model.kernel().prior_gradient_covariance();
        assert!((post.covariance().unwrap() - prior).abs().max() < 1e-6);
    }

    #[test]
    fn mean_matches_finite_differences() {
        let model = random_model(3, 15, 2);
        let sites = random_sites(3, 50, 3);
        let post = GradientPosterior::exact(&model, &sites).unwrap();
        for (l, s) in sites.iter().enumerate() {
            for j in 0..3 {
                let mut a = s.clone();
                let mut b = s.clone();
                a[j] += 1e-5;
                b[j] -= 1e-5;
                let fd = (model.predict_mean(&a).unwrap() - model.predict_mean(&b).unwrap()) / 2e-5;
                let an = post.mean()[l * 3 + j];
                assert!((an - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{an} vs {fd}");
            }
        }
    }

    #[test]
    fn conditioning_reduces_gradient_variance() {
        let pts = vec![vec![0.0], vec![0.3], vec![0.55], vec![1.0]];
        let ys = vec![0.0, 0.4, -0.2, 0.3];
        let k = KernelSpec::new(1.2, vec![0.4]).unwrap();
        let model = GpModel::new(Dataset::new(pts, ys, Bounds::unit(1)).unwrap(), k, 0.0, 0.0).unwrap();
        let prior = 5.0 * 1.2 / (3.0 * 0.16);
        let v = GradientPosterior::exact(&model, &[vec![0.3]]).unwrap().covariance().unwrap()[(0, 0)];
        assert!(v >= 0.0 && v < prior);
    }

    #[test]
    fn quad_form_trivial_cases() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(quad_form_variance_of(&DVector::zeros(3), &i3), 6.0);
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(quad_form_variance_of(&DVector::from_vec(vec![1.0, 0.0]), &i2), 8.0);
    }

    #[test]
    fn memory_cap_enforced() {
        let model = random_model(2, 5, 4);
        let sites = random_sites(2, 10, 5);
        assert!(matches!(
            GradientPosterior::exact_with_cap(&model, &sites, 399),
            Err(Error::MemoryCap(_))
        ));
        assert!(GradientPosterior::exact_with_cap(&model, &sites, 400).is_ok());
    }

    #[test]
    fn single_chunk_equals_exact() {
        let model = random_model(2, 8, 6);
        let sites = random_sites(2, 30, 7);
        let exact = GradientPosterior::exact(&model, &sites).unwrap();
        let cl = cluster_sites(&sites, 1, true, model.kernel(), 0).unwrap();
        let chunked = GradientPosterior::chunked(&model, &sites, &cl).unwrap();
        assert!((exact.covariance().unwrap() - chunked.blocks()[0].covariance()).abs().max() < 1e-12);
        let v = exact.quad_form_variance().unwrap();
        assert!((chunked.chunked_quad_form_variance() - v).abs() <= 1e-10 * v);
        assert_eq!(error_certificate(model.kernel(), &cl, 1.0).unwrap().total_bound, 0.0);
    }

    #[test]
    fn blocks_match_exact_sub_blocks() {
        let model = random_model(2, 10, 8);
        let sites = random_sites(2, 60, 9);
        let exact = GradientPosterior::exact(&model, &sites).unwrap();
        let full = exact.covariance().unwrap();
        let cl = cluster_sites(&sites, 6, false, model.kernel(), 1).unwrap();
        let chunked = GradientPosterior::chunked(&model, &sites, &cl).unwrap();
        let budget: usize = cl.sizes().iter().map(|s| (s * 2) * (s * 2)).sum();
        assert_eq!(chunked.stored_entries(), budget);
        assert!(chunked.quad_form_variance().is_err());
        for b in chunked.blocks() {
            let m = b.members();
            for (a, &ma) in m.iter().enumerate() {
                for (c, &mc) in m.iter().enumerate() {
                    for i in 0..2 {
                        for j in 0..2 {
                            let got = b.covariance()[(a * 2 + i, c * 2 + j)];
                            let want = full[(ma * 2 + i, mc * 2 + j)];
                            assert!((got - want).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_covariance_makes_chunking_exact() {
        // blocks of a diagonal matrix lose nothing
        let mean = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 2.0, 0.1]));
        let whole = quad_form_variance_of(&mean, &cov);
        let parts = quad_form_variance_of(&mean.rows(0, 2).into_owned(), &cov.view((0, 0), (2, 2)).into_owned())
            + quad_form_variance_of(&mean.rows(2, 2).into_owned(), &cov.view((2, 2), (2, 2)).into_owned());
        assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn certificate_arithmetic() {
        let k = KernelSpec::isotropic(1.0, 0.5, 1).unwrap();
        let sites: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = (0..10).map(|i| usize::from(i >= 5)).collect();
        let cl = Clustering::from_assignment(&sites, labels, &k).unwrap();
        let h = k.frobenius_envelope(cl.delta()).unwrap();
        let cert = error_certificate(&k, &cl, 2.0).unwrap();
        assert_eq!(cl.delta(), 2.0);
        assert!((cert.frob_bound - 50.0 * h).abs() < 1e-12 * cert.frob_bound);
        assert!((cert.spec_bound - 5.0 * h.sqrt()).abs() < 1e-12 * cert.spec_bound);
        assert!((cert.total_bound - (100.0 * h + 40.0 * h.sqrt())).abs() < 1e-12 * cert.total_bound);

        let labels = (0..10).map(|i| usize::from(i >= 7)).collect();
        let cl = Clustering::from_assignment(&sites, labels, &k).unwrap();
        let cert = error_certificate(&k, &cl, 0.0).unwrap();
        // imbalanced B = (N + (C-2) n_max)/2 = 5
        assert!((cert.spec_bound - 5.0 * h.sqrt()).abs() < 1e-12);
        assert!((cert.frob_bound - 42.0 * h).abs() < 1e-12 * cert.frob_bound);
        assert!(cert.pairwise_frob_bound <= cert.frob_bound);
    }

    #[test]
    fn chunked_error_within_certificate() {
        let model = random_model(3, 12, 10);
        let sites = random_sites(3, 40, 11);
        let cl = cluster_sites(&sites, 4, true, model.kernel(), 2).unwrap();
        let check = certify_chunking(&model, &sites, &cl).unwrap();
        let c = check.certificate;
        assert!(c.exact_error.unwrap() <= c.total_bound);
        assert!(c.ratio().unwrap() <= 1.0);
    }

    #[test]
    fn chunk_count_by_enumeration() {
        assert_eq!(chunk_count_for_cap(2_500_000_000, 500, 10).unwrap(), 1);
        assert_eq!(chunk_count_for_cap(25_000_000, 500, 10).unwrap(), 1);
        assert_eq!(chunk_count_for_cap(500 * 100, 500, 10).unwrap(), 500);
        assert!(chunk_count_for_cap(500 * 100 - 1, 500, 10).is_err());
        let cap = 2_000_000;
        let c = chunk_count_for_cap(cap, 500, 10).unwrap();
        // brute-force enumeration of block sizes
        let storage = |c: usize| -> usize {
            let mut sizes = vec![500 / c; c];
            for s in sizes.iter_mut().take(500 % c) {
                *s += 1;
            }
            sizes.iter().map(|s| (s * 10) * (s * 10)).sum()
        };
        assert!(storage(c) <= cap);
        assert!(storage(c - 1) > cap);
    }

    #[test]
    fn suggested_chunks_fit_cap() {
        let k = KernelSpec::isotropic(1.0, 0.3, 2).unwrap();
        let sites = random_sites(2, 50, 12);
        let advice = suggest_chunks(1000, &k, &sites, 1.0, 0).unwrap();
        let stored: usize = advice.clustering.sizes().iter().map(|s| (s * 2).pow(2)).sum();
        assert!(stored <= 1000);
        assert_eq!(advice.count, advice.clustering.count());
    }
}
