//! DGSM, Sobol' indices and the Poincaré bound on the Ishigami function.

use activegsa::sensitivity::{dgsm, dgsm_sobol_bound, poincare_constant, sobol_pickfreeze};
use activegsa::testbed::{benchmark, BenchmarkOptions};

fn main() -> activegsa::Result<()> {
    let b = benchmark("ishigami", &BenchmarkOptions::default())?;
    let exact = b.analytic_reference().expect("closed form");
    let d = dgsm(|x| b.gradient(x), b.inputs(), 1 << 16, 0)?;
    let s = sobol_pickfreeze(|x| b.evaluate(x).unwrap(), b.inputs(), 1 << 14, 0)?;
    let constants: Vec<f64> = (0..3).map(|k| poincare_constant(b.inputs().marginal(k).unwrap())).collect::<Result<_, _>>()?;
    let bound = dgsm_sobol_bound(&d, &constants, s.variance)?;
    println!("{:>3} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "k", "DGSM", "exact", "S", "S_T", "exact S_T", "bound");
    for k in 0..3 {
        println!(
            "{:>3} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            k + 1,
            d[k],
            exact.dgsm[k],
            s.first[k],
            s.total[k],
            exact.sobol_total.as_ref().unwrap()[k],
            bound[k]
        );
    }
    Ok(())
}
