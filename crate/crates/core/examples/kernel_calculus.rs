//! Matérn-5/2 value, gradient and cross-Hessian, plus the envelope `h(r)`.

use activegsa::kernel::KernelSpec;

fn main() -> activegsa::Result<()> {
    let k = KernelSpec::new(1.0, vec![0.5, 1.0])?;
    let (x, xp) = ([0.2, 0.4], [0.6, 0.1]);
    println!("k(x, x')          = {:.6}", k.value(&x, &xp)?);
    println!("grad_x k          = {:.6}", k.grad_x(&x, &xp)?.transpose());
    println!("cross-Hessian     = {:.6}", k.cross_hessian(&x, &xp)?);
    println!("prior grad cov    = {:.6}", k.prior_gradient_covariance());
    for r in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("h({r:>3}) = {:.6e}", k.frobenius_envelope(r)?);
    }
    Ok(())
}
