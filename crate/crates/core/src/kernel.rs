//! Matérn-5/2 kernel with automatic relevance determination.
//!
//! With scaled distance `r = sqrt(Σ (x_i - x'_i)² / θ_i²)` the kernel reads
//! `k(x, x') = σ² (1 + √5 r + 5r²/3) exp(-√5 r)`. Its gradient and mixed
//! second derivatives have closed forms that stay bounded at `r = 0`, which is
//! what the gradient-field machinery builds on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Below this scaled distance the analytic `r = 0` limits are used.
const ZERO_DISTANCE: f64 = 1e-12;

/// Hyperparameters of an ARD Matérn-5/2 kernel, in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    output_scale: f64,
    lengthscales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(output_scale: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "output scale must be positive, got {output_scale}"
            )));
        }
        if lengthscales.is_empty() {
            return Err(Error::Parameter("kernel needs at least one lengthscale".into()));
        }
        if let Some(bad) = lengthscales.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Parameter(format!(
                "lengthscales must be positive, got {bad}"
            )));
        }
        Ok(Self {
            output_scale,
            lengthscales,
        })
    }

    pub fn isotropic(output_scale: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(output_scale, vec![lengthscale; dim])
    }

    /// Builds a spec from `[log σ², log θ_1, …, log θ_d]`.
    pub fn from_log(params: &[f64]) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::Shape(format!(
                "log-parameter vector needs at least 2 entries, got {}",
                params.len()
            )));
        }
        Self::new(
            params[0].exp(),
            params[1..].iter().map(|p| p.exp()).collect(),
        )
    }

    pub fn to_log(&self) -> Vec<f64> {
        std::iter::once(self.output_scale.ln())
            .chain(self.lengthscales.iter().map(|t| t.ln()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    fn check(&self, x: &[f64], xp: &[f64]) -> Result<()> {
        if x.len() != self.dim() || xp.len() != self.dim() {
            return Err(Error::Shape(format!(
                "kernel of dimension {} evaluated at points of length {} and {}",
                self.dim(),
                x.len(),
                xp.len()
            )));
        }
        Ok(())
    }

    pub fn scaled_distance(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        self.check(x, xp)?;
        Ok(self.r(x, xp))
    }

    pub fn value(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        self.check(x, xp)?;
        Ok(self.value_unchecked(x, xp))
    }

    /// Gradient of `k(x, x')` with respect to its first argument.
    pub fn grad_x(&self, x: &[f64], xp: &[f64]) -> Result<DVector<f64>> {
        self.check(x, xp)?;
        let mut out = DVector::zeros(self.dim());
        self.grad_x_into(x, xp, out.as_mut_slice());
        Ok(out)
    }

    /// Mixed second derivative `∇_x ∇_{x'} k(x, x')` as a `d × d` matrix.
    pub fn cross_hessian(&self, x: &[f64], xp: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, xp)?;
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        self.cross_hessian_into(x, xp, &mut out, 0, 0);
        Ok(out)
    }

    /// Covariance of the prior gradient at a single point, `(5σ²/3) Λ⁻²`.
    pub fn prior_gradient_covariance(&self) -> DMatrix<f64> {
        let a = 5.0 * self.output_scale / 3.0;
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.lengthscales.iter().map(|t| a / (t * t)),
        ))
    }

    /// The constants `(A, θ_min, L²)` entering the cross-Hessian envelope.
    pub fn envelope_constants(&self) -> (f64, f64, f64) {
        let a = 5.0 * self.output_scale / 3.0;
        let theta_min = self
            .lengthscales
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let l2 = self.lengthscales.iter().map(|t| t.powi(-4)).sum();
        (a, theta_min, l2)
    }

    /// Upper envelope `h(r)` on the squared Frobenius norm of the cross-Hessian
    /// at scaled distance `r`. Non-increasing in `r`.
    pub fn frobenius_envelope(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!(
                "envelope needs a nonnegative distance, got {r}"
            )));
        }
        if r.is_infinite() {
            return Ok(0.0);
        }
        let (a, theta_min, l2) = self.envelope_constants();
        let lin = 1.0 + SQRT5 * r;
        let poly = 25.0 * r.powi(4) / theta_min.powi(4) + lin * lin * l2;
        Ok(2.0 * a * a * (-2.0 * SQRT5 * r).exp() * poly)
    }

    #[inline]
    pub(crate) fn r(&self, x: &[f64], xp: &[f64]) -> f64 {
        x.iter()
            .zip(xp)
            .zip(&self.lengthscales)
            .map(|((a, b), t)| {
                let z = (a - b) / t;
                z * z
            })
            .sum::<f64>()
            .sqrt()
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, x: &[f64], xp: &[f64]) -> f64 {
        let r = self.r(x, xp);
        self.output_scale * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
    }

    pub(crate) fn grad_x_into(&self, x: &[f64], xp: &[f64], out: &mut [f64]) {
        let r = self.r(x, xp);
        if r < ZERO_DISTANCE {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let c = -5.0 * self.output_scale / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
        for (((o, a), b), t) in out.iter_mut().zip(x).zip(xp).zip(&self.lengthscales) {
            *o = c * (a - b) / (t * t);
        }
    }

    /// Writes the `d × d` cross-Hessian into `out` at offset `(row, col)`.
    pub(crate) fn cross_hessian_into(
        &self,
        x: &[f64],
        xp: &[f64],
        out: &mut DMatrix<f64>,
        row: usize,
        col: usize,
    ) {
        let d = self.dim();
        let a = 5.0 * self.output_scale / 3.0;
        let r = self.r(x, xp);
        if r < ZERO_DISTANCE {
            for i in 0..d {
                for j in 0..d {
                    out[(row + i, col + j)] = if i == j {
                        a / (self.lengthscales[i] * self.lengthscales[i])
                    } else {
                        0.0
                    };
                }
            }
            return;
        }
        let e = (-SQRT5 * r).exp();
        let lin = 1.0 + SQRT5 * r;
        let mut stack = [0.0f64; 64];
        let mut heap = Vec::new();
        let scaled: &mut [f64] = if d <= stack.len() {
            &mut stack[..d]
        } else {
            heap.resize(d, 0.0);
            &mut heap
        };
        for i in 0..d {
            let t2 = self.lengthscales[i] * self.lengthscales[i];
            scaled[i] = (x[i] - xp[i]) / t2;
        }
        for i in 0..d {
            let inv_t2 = 1.0 / (self.lengthscales[i] * self.lengthscales[i]);
            for j in 0..d {
                let diag = if i == j { lin * inv_t2 } else { 0.0 };
                out[(row + i, col + j)] = a * e * (diag - 5.0 * scaled[i] * scaled[j]);
            }
        }
    }

    /// `∂k/∂ log θ_j` for every `j`, used by the marginal-likelihood gradient.
    pub(crate) fn log_lengthscale_derivatives(&self, x: &[f64], xp: &[f64], out: &mut [f64]) {
        let r = self.r(x, xp);
        let c = 5.0 * self.output_scale / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
        for (((o, a), b), t) in out.iter_mut().zip(x).zip(xp).zip(&self.lengthscales) {
            let z = (a - b) / t;
            *o = c * z * z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(k: &KernelSpec, x: &[f64], xp: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[j] += h;
                b[j] -= h;
                (k.value(&a, xp).unwrap() - k.value(&b, xp).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn value_at_zero_distance_is_output_scale() {
        let k = KernelSpec::isotropic(1.0, 1.0, 1).unwrap();
        assert_eq!(k.value(&[0.0], &[0.0]).unwrap(), 1.0);
        let k = KernelSpec::new(2.0, vec![0.3, 4.0]).unwrap();
        assert_eq!(k.value(&[0.7, -1.0], &[0.7, -1.0]).unwrap(), 2.0);
    }

    #[test]
    fn value_at_unit_distance() {
        // (1 + √5 + 5/3) e^{-√5} evaluated independently with 30-digit arithmetic
        let k = KernelSpec::isotropic(1.0, 1.0, 1).unwrap();
        let v = k.value(&[0.0], &[1.0]).unwrap();
        assert!((v - 0.523_994_108_831_820_3).abs() < 1e-14, "{v}");
    }

    #[test]
    fn gradient_vanishes_on_the_diagonal_and_is_antisymmetric() {
        let k = KernelSpec::new(1.3, vec![0.4, 2.0, 0.9]).unwrap();
        let x = [0.1, 0.5, -0.2];
        assert!(k.grad_x(&x, &x).unwrap().iter().all(|g| *g == 0.0));
        let xp = [0.3, -0.1, 0.4];
        let g1 = k.grad_x(&x, &xp).unwrap();
        let g2 = k.grad_x(&xp, &x).unwrap();
        assert_eq!(g1, -g2);
    }

    #[test]
    fn gradient_matches_finite_differences_in_1d() {
        let k = KernelSpec::isotropic(1.0, 1.0, 1).unwrap();
        let g = k.grad_x(&[1.0], &[0.0]).unwrap()[0];
        let fd = fd_grad(&k, &[1.0], &[0.0], 1e-5)[0];
        assert!(((g - fd) / fd).abs() < 1e-6, "{g} vs {fd}");
    }

    #[test]
    fn cross_hessian_on_the_diagonal() {
        let k = KernelSpec::isotropic(1.0, 1.0, 1).unwrap();
        let h = k.cross_hessian(&[0.2], &[0.2]).unwrap();
        assert!((h[(0, 0)] - 5.0 / 3.0).abs() < 1e-15);

        let k = KernelSpec::new(3.0, vec![1.0, 2.0]).unwrap();
        let h = k.cross_hessian(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((h[(0, 0)] - 5.0).abs() < 1e-14);
        assert!((h[(1, 1)] - 1.25).abs() < 1e-14);
        assert_eq!(h[(0, 1)], 0.0);
        assert_eq!(h, k.prior_gradient_covariance());
    }

    #[test]
    fn cross_hessian_matches_second_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = KernelSpec::new(1.7, vec![0.6, 1.1, 0.8]).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xp: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = k.cross_hessian(&x, &xp).unwrap();
        let step = 1e-4;
        for i in 0..3 {
            for j in 0..3 {
                let eval = |si: f64, sj: f64| {
                    let mut a = x.clone();
                    let mut b = xp.clone();
                    a[i] += si;
                    b[j] += sj;
                    k.value(&a, &b).unwrap()
                };
                let fd = (eval(step, step) - eval(step, -step) - eval(-step, step)
                    + eval(-step, -step))
                    / (4.0 * step * step);
                let scale = h[(i, j)].abs().max(1e-3);
                assert!((h[(i, j)] - fd).abs() / scale < 1e-5, "({i},{j}) {} vs {fd}", h[(i, j)]);
            }
        }
        assert!((h.clone() - h.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn envelope_values() {
        let k = KernelSpec::isotropic(1.0, 1.0, 2).unwrap();
        // h(0) = 2 A² L² with A = 5/3, L² = 2
        assert!((k.frobenius_envelope(0.0).unwrap() - 100.0 / 9.0).abs() < 1e-12);
        assert!(k.frobenius_envelope(20.0).unwrap() < 1e-12);
        assert!(matches!(k.frobenius_envelope(-0.1), Err(Error::Domain(_))));
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let h = k.frobenius_envelope(i as f64 * 0.01).unwrap();
            assert!(h <= prev);
            prev = h;
        }
    }

    #[test]
    fn envelope_dominates_cross_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.random_range(1..=5);
            let k = KernelSpec::new(
                rng.random_range(0.1..5.0),
                (0..d).map(|_| rng.random_range(0.05..3.0)).collect(),
            )
            .unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xp: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = k.cross_hessian(&x, &xp).unwrap();
            let r = k.scaled_distance(&x, &xp).unwrap();
            assert!(h.norm_squared() <= k.frobenius_envelope(r).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let k = KernelSpec::isotropic(1.0, 1.0, 2).unwrap();
        assert!(matches!(k.value(&[0.0], &[0.0, 1.0]), Err(Error::Shape(_))));
        assert!(matches!(k.grad_x(&[0.0, 0.0], &[0.0]), Err(Error::Shape(_))));
        assert!(matches!(k.cross_hessian(&[0.0], &[0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(KernelSpec::new(0.0, vec![1.0]).is_err());
        assert!(KernelSpec::new(1.0, vec![]).is_err());
        assert!(KernelSpec::new(1.0, vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn log_round_trip() {
        let k = KernelSpec::new(2.5, vec![0.1, 7.0]).unwrap();
        let back = KernelSpec::from_log(&k.to_log()).unwrap();
        assert!((back.output_scale() - 2.5).abs() < 1e-14);
        assert!((back.lengthscales()[1] - 7.0).abs() < 1e-13);
    }
}
