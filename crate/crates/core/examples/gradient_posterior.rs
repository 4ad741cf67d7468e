//! Fit a GP to a toy function and inspect the joint gradient posterior.

use activegsa::bounds::Bounds;
use activegsa::gp::{fit, Dataset, FitConfig};
use activegsa::gradient::GradientPosterior;
use activegsa::sobol::SobolSequence;

fn f(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + x[1] * x[1] + 0.5 * x[0] * x[1]
}

fn main() -> activegsa::Result<()> {
    let points = SobolSequence::scrambled(2, 1)?.points(1, 20);
    let outputs = points.iter().map(|p| f(p)).collect();
    let model = fit(&Dataset::new(points, outputs, Bounds::unit(2))?, 1, &FitConfig::default())?;
    println!("output scale {:.4}, lengthscales {:.4?}", model.kernel().output_scale(), model.kernel().lengthscales());

    let sites = vec![vec![0.25, 0.25], vec![0.5, 0.75], vec![0.9, 0.1]];
    let post = GradientPosterior::exact(&model, &sites)?;
    for (i, s) in sites.iter().enumerate() {
        let true_grad = [3.0 * (3.0 * s[0]).cos() + 0.5 * s[1], 2.0 * s[1] + 0.5 * s[0]];
        println!("site {s:?}: mean gradient {:.4?}, truth {true_grad:.4?}", &post.mean().as_slice()[2 * i..2 * i + 2]);
    }
    println!("gradient covariance:{:.2e}", post.covariance().unwrap());
    println!("Var(|grad|^2 at sites) = {:.4e}", post.quad_form_variance()?);
    Ok(())
}
