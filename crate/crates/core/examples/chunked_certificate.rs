//! Block-diagonal approximation of the gradient covariance and its error
//! certificate, across chunk counts.

use activegsa::cluster::cluster_sites;
use activegsa::gradient::{certify_chunking, suggest_chunks, GradientPosterior};
use activegsa::harness::verify::random_instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> activegsa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (model, sites) = random_instance(&mut rng, 3, 40)?;
    println!("d = {}, {} sites", model.dim(), sites.len());
    println!("{:>3} {:>9} {:>12} {:>12} {:>12} {:>8}", "C", "balanced", "|V - V~|", "bound", "pairwise", "ratio");
    for c in [1, 2, 4, 8] {
        for balanced in [true, false] {
            let clustering = cluster_sites(&sites, c, balanced, model.kernel(), 0)?;
            let check = certify_chunking(&model, &sites, &clustering)?;
            let cert = check.certificate;
            println!(
                "{c:>3} {balanced:>9} {:>12.4e} {:>12.4e} {:>12.4e} {:>8.4}",
                cert.exact_error.unwrap_or(0.0),
                cert.total_bound,
                cert.pairwise_total_bound,
                cert.ratio().unwrap_or(0.0)
            );
        }
    }
    let mean_norm = GradientPosterior::exact(&model, &sites)?.mean().norm_squared();
    let advice = suggest_chunks(150, model.kernel(), &sites, mean_norm, 0)?;
    println!("memory cap of 150 entries -> C = {}, certified bound {:.4e}", advice.count, advice.certificate.total_bound);
    Ok(())
}
