//! Multi-start maximization of an acquisition function over a box: a
//! scrambled Sobol' raw candidate set followed by projected quasi-Newton
//! refinement of the best candidates with finite-difference gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::qn::{fd_gradient, minimize_box, QnConfig};
use crate::sobol::SobolSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    /// Raw candidate count; `None` means `512 d`.
    pub raw_candidates: Option<usize>,
    pub refine_starts: usize,
    pub max_refine_iters: usize,
    /// Minimum distance to the design, in unit-box coordinates.
    pub min_separation: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            raw_candidates: None,
            refine_starts: 8,
            max_refine_iters: 60,
            min_separation: 1e-6,
            fd_step: 1e-6,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn raw_count(&self, dim: usize) -> usize {
        self.raw_candidates.unwrap_or(512 * dim)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.raw_count(dim) == 0 || self.refine_starts > self.raw_count(dim) {
            return Err(Error::Parameter(format!(
                "need 0 < refine_starts ≤ raw_candidates, got {} and {}",
                self.refine_starts,
                self.raw_count(dim)
            )));
        }
        if !(self.min_separation > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::Parameter("min_separation and fd_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    /// Maximizer in natural units.
    pub x: Vec<f64>,
    pub value: f64,
    /// Best raw-candidate value before refinement.
    pub raw_value: f64,
    pub evaluations: usize,
}

/// Maximizes `acq` over `bounds`, never returning a point closer than
/// `min_separation` to `design`. Errors from `acq` count as `-∞`.
pub fn maximize<F>(acq: F, bounds: &Bounds, design: &[Vec<f64>], config: &OptimConfig) -> Result<Maximum>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let d = bounds.dim();
    config.validate(d)?;
    let design_unit: Vec<Vec<f64>> = design.iter().map(|p| bounds.to_unit(p)).collect();
    let admissible = |u: &[f64]| {
        design_unit.iter().all(|p| {
            p.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= config.min_separation
        })
    };
    let value = |u: &[f64]| match acq(&bounds.from_unit(u)) {
        Ok(v) if v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    };

    let seq = SobolSequence::scrambled(d, config.seed)?;
    let mut count = config.raw_count(d);
    let mut start = 1u64;
    let mut raw: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for attempt in 0..2 {
        let fresh: Vec<(usize, Vec<f64>, f64)> = seq
            .points(start, count)
            .into_par_iter()
            .enumerate()
            .map(|(i, u)| {
                let v = if admissible(&u) { value(&u) } else { f64::NEG_INFINITY };
                (raw.len() + i, u, v)
            })
            .collect();
        start += count as u64;
        raw.extend(fresh);
        if raw.iter().any(|c| c.2 > f64::NEG_INFINITY) {
            break;
        }
        if attempt == 1 {
            return Err(Error::Rejected(format!(
                "all {} raw candidates were too close to the design or failed to evaluate",
                raw.len()
            )));
        }
        count *= 2;
    }
    let evaluations = raw.len();

    let mut ranked: Vec<&(usize, Vec<f64>, f64)> = raw.iter().filter(|c| c.2 > f64::NEG_INFINITY).collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let raw_value = ranked[0].2;
    let starts: Vec<&(usize, Vec<f64>, f64)> = ranked.into_iter().take(config.refine_starts).collect();

    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    let qn = QnConfig {
        max_iters: config.max_refine_iters,
        grad_tol: 1e-10,
        rel_tol: 1e-12,
    };
    let refined: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|(_, u0, v0)| {
            let objective = |u: &[f64]| {
                let f = if admissible(u) { -value(u) } else { f64::INFINITY };
                if !f.is_finite() {
                    return (f64::INFINITY, vec![0.0; d]);
                }
                let mut neg = |p: &[f64]| -value(p);
                let g = fd_gradient(&mut neg, u, f, config.fd_step, &lo, &hi);
                (f, g)
            };
            let res = minimize_box(objective, u0, &lo, &hi, qn);
            if res.value.is_finite() && -res.value >= *v0 && admissible(&res.x) {
                (res.x, -res.value)
            } else {
                (u0.clone(), *v0)
            }
        })
        .collect();

    // first start wins ties, i.e. the lowest raw index among equal values
    let mut best = 0;
    for (i, r) in refined.iter().enumerate() {
        if r.1 > refined[best].1 {
            best = i;
        }
    }
    let (u, v) = refined[best].clone();
    Ok(Maximum {
        x: bounds.from_unit(&u),
        value: v,
        raw_value,
        evaluations,
    })
}
