//! Fit a mixture support model to samples of a dependent pair and print the
//! gate along a line crossing the support.

use activegsa::support::{fit_support, SupportFit};
use activegsa::testbed::support_demo_inputs;

fn main() -> activegsa::Result<()> {
    let inputs = support_demo_inputs()?;
    let samples: Vec<Vec<f64>> = inputs.sample(2000, 1).into_iter().map(|x| vec![x[0], x[1]]).collect();
    let support = fit_support(vec![0, 1], &samples, &SupportFit::default(), 1)?;
    println!("{} components, radii {:.3?}", support.mixture().components(), support.radii());
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let z = [t, t];
        let s = support.signed_distances(&z);
        println!("z = ({t:.1}, {t:.1})  min s_i = {:>8.3}  gate = {:.4}", s.iter().copied().fold(f64::INFINITY, f64::min), support.penalty_group(&z));
    }
    Ok(())
}
