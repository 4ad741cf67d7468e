//! Sweep of chunking certificates over random posterior instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::Bounds;
use crate::cluster::cluster_sites;
use crate::error::Result;
use crate::gp::{Dataset, GpModel};
use crate::gradient::certify_chunking;
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckRow {
    pub instance: usize,
    pub dim: usize,
    pub sites: usize,
    pub chunks: usize,
    pub balanced: bool,
    pub exact: f64,
    pub chunked: f64,
    pub error: f64,
    pub bound: f64,
    pub pairwise_bound: f64,
    pub ratio: f64,
}

/// A GP posterior on a small random design with random hyperparameters,
/// plus `N` sites drawn uniformly from the unit box.
pub fn random_instance(rng: &mut ChaCha8Rng, max_dim: usize, max_sites: usize) -> Result<(GpModel, Vec<Vec<f64>>)> {
    let d = rng.random_range(1..=max_dim);
    let n = rng.random_range(4..=12);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let freq: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..4.0)).collect();
    let outputs = points
        .iter()
        .map(|p| p.iter().zip(&freq).map(|(x, w)| (w * x).sin()).sum::<f64>())
        .collect();
    let kernel = KernelSpec::new(
        rng.random_range(0.5..2.0),
        (0..d).map(|_| rng.random_range(0.1..0.6)).collect(),
    )?;
    let model = GpModel::new(Dataset::new(points, outputs, Bounds::unit(d))?, kernel, 0.0, 0.0)?;
    let m = rng.random_range(8..=max_sites);
    let sites = (0..m).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    Ok((model, sites))
}

/// Measures `|V − Ṽ|` against the certificate on `instances` random cases
/// with `C ∈ {2, …, 8}`, alternating balanced and free clustering.
pub fn verify_bounds(instances: usize, seed: u64) -> Result<Vec<BoundCheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(instances);
    for i in 0..instances {
        let (model, sites) = random_instance(&mut rng, 4, 40)?;
        let c = rng.random_range(2..=8usize).min(sites.len());
        let balanced = i % 2 == 0;
        let clustering = cluster_sites(&sites, c, balanced, model.kernel(), rng.random())?;
        let check = certify_chunking(&model, &sites, &clustering)?;
        let cert = check.certificate;
        rows.push(BoundCheckRow {
            instance: i,
            dim: model.dim(),
            sites: sites.len(),
            chunks: c,
            balanced,
            exact: check.exact,
            chunked: check.chunked,
            error: cert.exact_error.unwrap_or(0.0),
            bound: cert.total_bound,
            pairwise_bound: cert.pairwise_total_bound,
            ratio: cert.ratio().unwrap_or(0.0),
        });
    }
    Ok(rows)
}
