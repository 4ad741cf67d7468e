//! Box-constrained quasi-Newton minimization (projected BFGS with a
//! backtracking Armijo search along the projected path).

#[derive(Debug, Clone, Copy)]
pub struct QnConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
}

impl Default for QnConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-8,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QnResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lo, hi]`. `f` returns the value and gradient;
/// non-finite values are treated as `+∞`. The returned value never exceeds the
/// value at the (projected) start point.
pub fn minimize_box<F>(mut f: F, start: &[f64], lo: &[f64], hi: &[f64], cfg: QnConfig) -> QnResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = start.len();
    let mut x = start.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return QnResult {
            x,
            value: f64::INFINITY,
            iterations: 0,
        };
    }
    // inverse Hessian approximation, row-major
    let mut h = identity(n);
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..n)
            .filter(|i| free[*i])
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        if pg_norm < cfg.grad_tol || !g.iter().all(|v| v.is_finite()) {
            break;
        }

        let mut p = vec![0.0; n];
        for i in (0..n).filter(|i| free[*i]) {
            p[i] = -(0..n).filter(|j| free[*j]).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        if dot(&p, &g) >= 0.0 {
            h = identity(n);
            for i in 0..n {
                p[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            project(&mut trial, lo, hi);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && ft <= fx {
                accepted = Some((trial, ft, gt, moved));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn, s)) = accepted else {
            if h != identity(n) {
                h = identity(n);
                continue;
            }
            break;
        };

        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            bfgs_update(&mut h, &s, &y, sy);
        }

        let rel = (fx - fnew).abs() / fx.abs().max(fnew.abs()).max(1e-300);
        x = xn;
        fx = fnew;
        g = gn;
        if rel < cfg.rel_tol {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    QnResult {
        x,
        value: fx,
        iterations,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Central finite-difference gradient, one-sided where the stencil would
/// leave the box.
pub fn fd_gradient<F>(f: &mut F, x: &[f64], fx: f64, step: f64, lo: &[f64], hi: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let up = (x[i] + step).min(hi[i]);
        let down = (x[i] - step).max(lo[i]);
        let f_up = if up > x[i] {
            probe[i] = up;
            f(&probe)
        } else {
            fx
        };
        let f_down = if down < x[i] {
            probe[i] = down;
            f(&probe)
        } else {
            fx
        };
        probe[i] = x[i];
        let width = up - down;
        g[i] = if width > 0.0 { (f_up - f_down) / width } else { 0.0 };
    }
    g
}
