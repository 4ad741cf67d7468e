//! Input distributions (independent marginals plus at most one dependent
//! group drawn from a Gaussian mixture) and design generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::sobol::{SobolSequence, MAX_DIM};
use crate::support::GaussianMixture;

/// Normal marginals are truncated to `μ ± 6σ`.
pub const NORMAL_TRUNCATION: f64 = 6.0;
const GROUP_REJECTION_TRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, std: f64 },
    Fixed { value: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Marginal::Normal { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            Marginal::Fixed { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid marginal {self:?}")))
        }
    }

    /// Support interval (normals truncated).
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lower, upper } => (lower, upper),
            Marginal::Normal { mean, std } => (mean - NORMAL_TRUNCATION * std, mean + NORMAL_TRUNCATION * std),
            Marginal::Fixed { value } => (value, value),
        }
    }

    /// Inverse CDF; `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => lower + u * (upper - lower),
            Marginal::Normal { mean, std } => {
                let n = Normal::new(mean, std).expect("validated normal");
                let lo = n.cdf(mean - NORMAL_TRUNCATION * std);
                let hi = n.cdf(mean + NORMAL_TRUNCATION * std);
                n.inverse_cdf(lo + u * (hi - lo)).clamp(self.range().0, self.range().1)
            }
            Marginal::Fixed { value } => value,
        }
    }
}

/// Coordinates jointly distributed as a Gaussian mixture, restricted to a box
/// by rejection.
#[derive(Debug, Clone)]
pub struct DependentGroup {
    pub indices: Vec<usize>,
    pub mixture: GaussianMixture,
    pub bounds: Bounds,
}

impl DependentGroup {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        for _ in 0..GROUP_REJECTION_TRIES {
            let z = self.mixture.sample(1, rng).pop().expect("one sample");
            if self.bounds.contains(&z) {
                return z;
            }
        }
        let z = self.mixture.sample(1, rng).pop().expect("one sample");
        z.iter()
            .enumerate()
            .map(|(j, v)| v.clamp(self.bounds.lower()[j], self.bounds.upper()[j]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct InputModel {
    marginals: Vec<Option<Marginal>>,
    group: Option<DependentGroup>,
    bounds: Bounds,
}

impl InputModel {
    pub fn independent(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() || marginals.len() > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "input dimension must lie in 1..={MAX_DIM}, got {}",
                marginals.len()
            )));
        }
        for m in &marginals {
            m.validate()?;
        }
        let bounds = Bounds::from_pairs(&marginals.iter().map(|m| m.range()).collect::<Vec<_>>())?;
        Ok(Self {
            marginals: marginals.into_iter().map(Some).collect(),
            group: None,
            bounds,
        })
    }

    pub fn uniform_box(bounds: &Bounds) -> Result<Self> {
        Self::independent(
            bounds
                .lower()
                .iter()
                .zip(bounds.upper())
                .map(|(l, u)| Marginal::Uniform { lower: *l, upper: *u })
                .collect(),
        )
    }

    /// Replaces the marginals at `group.indices` by the dependent group.
    pub fn with_group(mut self, group: DependentGroup) -> Result<Self> {
        let d = self.dim();
        if group.indices.len() != group.mixture.dim() || group.bounds.dim() != group.indices.len() {
            return Err(Error::Shape("dependent group indices, mixture and bounds disagree".into()));
        }
        let mut seen = vec![false; d];
        for &i in &group.indices {
            if i >= d || seen[i] {
                return Err(Error::Parameter(format!(
                    "dependent group index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        let mut lower = self.bounds.lower().to_vec();
        let mut upper = self.bounds.upper().to_vec();
        for (k, &i) in group.indices.iter().enumerate() {
            self.marginals[i] = None;
            lower[i] = group.bounds.lower()[k];
            upper[i] = group.bounds.upper()[k];
        }
        self.bounds = Bounds::new(lower, upper)?;
        self.group = Some(group);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// The independent marginal of coordinate `j`, if any.
    pub fn marginal(&self, j: usize) -> Option<&Marginal> {
        self.marginals[j].as_ref()
    }

    pub fn group(&self) -> Option<&DependentGroup> {
        self.group.as_ref()
    }

    pub fn is_independent(&self) -> bool {
        self.group.is_none()
    }

    fn fill_group(&self, x: &mut [f64], rng: &mut ChaCha8Rng) {
        if let Some(g) = &self.group {
            let z = g.sample(rng);
            for (k, &i) in g.indices.iter().enumerate() {
                x[i] = z[k];
            }
        }
    }

    /// Maps a point of `[0,1]^d` through the marginal quantiles (group
    /// coordinates are left untouched).
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.marginals)
            .map(|(v, m)| m.map_or(*v, |m| m.quantile(*v)))
            .collect()
    }

    /// I.i.d. pseudo-random sample.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let u: Vec<f64> = (0..self.dim()).map(|_| rng.random()).collect();
                let mut x = self.map_unit(&u);
                self.fill_group(&mut x, &mut rng);
                x
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    #[default]
    SobolSequence,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignGenerator {
    pub kind: DesignKind,
    pub seed: u64,
    pub scrambled: bool,
}

impl Default for DesignGenerator {
    fn default() -> Self {
        Self {
            kind: DesignKind::SobolSequence,
            seed: 0,
            scrambled: false,
        }
    }
}

impl DesignGenerator {
    /// Design points `start .. start + count` of the generator's sequence
    /// (index 0 of the Sobol' sequence is never used).
    pub fn points(&self, inputs: &InputModel, start: usize, count: usize) -> Result<Vec<Vec<f64>>> {
        let d = inputs.dim();
        match self.kind {
            DesignKind::SobolSequence => {
                let seq = if self.scrambled {
                    SobolSequence::scrambled(d, self.seed)?
                } else {
                    SobolSequence::new(d)?
                };
                Ok((start..start + count)
                    .map(|i| {
                        let mut x = inputs.map_unit(&seq.point(i as u64 + 1));
                        // group values depend only on the point index
                        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        inputs.fill_group(&mut x, &mut rng);
                        x
                    })
                    .collect())
            }
            DesignKind::UniformRandom => {
                let all = inputs.sample(start + count, self.seed);
                Ok(all[start..].to_vec())
            }
        }
    }
}

/// The first `count` points of the generator.
pub fn initial_design(inputs: &InputModel, count: usize, generator: &DesignGenerator) -> Result<Vec<Vec<f64>>> {
    if count < 2 {
        return Err(Error::Parameter(format!("initial design needs at least 2 points, got {count}")));
    }
    generator.points(inputs, 0, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Warnock's closed form for the squared L2-star discrepancy.
    fn l2_star(points: &[Vec<f64>]) -> f64 {
        let n = points.len() as f64;
        let d = points[0].len() as i32;
        let mut a = 0.0;
        for p in points {
            a += p.iter().map(|x| 1.0 - x * x).product::<f64>();
        }
        let mut b = 0.0;
        for p in points {
            for q in points {
                b += p.iter().zip(q).map(|(x, y)| 1.0 - x.max(*y)).product::<f64>();
            }
        }
        3f64.powi(-d) - 2f64.powi(1 - d) / n * a + b / (n * n)
    }

    fn unit(d: usize) -> InputModel {
        InputModel::uniform_box(&Bounds::unit(d)).unwrap()
    }

    #[test]
    fn first_points_are_radical_inverse() {
        let x = initial_design(&unit(1), 4, &DesignGenerator::default()).unwrap();
        assert_eq!(x, vec![vec![0.5], vec![0.25], vec![0.75], vec![0.125]]);
    }

    #[test]
    fn fixed_marginal_gives_constant_column() {
        let m = InputModel::independent(vec![
            Marginal::Uniform { lower: -1.0, upper: 1.0 },
            Marginal::Fixed { value: 2.5 },
        ])
        .unwrap();
        for x in initial_design(&m, 16, &DesignGenerator::default()).unwrap() {
            assert_eq!(x[1], 2.5);
        }
        assert!(m.sample(10, 0).iter().all(|x| x[1] == 2.5));
    }

    #[test]
    fn sobol_beats_random_discrepancy() {
        let sob = initial_design(&unit(2), 128, &DesignGenerator::default()).unwrap();
        let mut rnd: Vec<f64> = (0..20)
            .map(|s| {
                let g = DesignGenerator {
                    kind: DesignKind::UniformRandom,
                    seed: s,
                    scrambled: false,
                };
                l2_star(&initial_design(&unit(2), 128, &g).unwrap())
            })
            .collect();
        rnd.sort_by(f64::total_cmp);
        assert!(l2_star(&sob) < rnd[10]);
    }

    #[test]
    fn sample_mean_of_uniforms() {
        let m = InputModel::independent(vec![Marginal::Uniform { lower: 2.0, upper: 4.0 }; 3]).unwrap();
        let n = 4000;
        let xs = m.sample(n, 1);
        let sd = 2.0 / 12f64.sqrt();
        for j in 0..3 {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            assert!((mean - 3.0).abs() < 3.0 * sd / (n as f64).sqrt());
        }
        assert_eq!(xs, m.sample(n, 1));
    }

    #[test]
    fn dependent_group_mean() {
        let g = GaussianMixture::new(
            vec![1.0],
            vec![DVector::from_vec(vec![0.4, 0.6])],
            vec![DMatrix::from_row_slice(2, 2, &[0.01, 0.004, 0.004, 0.01])],
        )
        .unwrap();
        let m = unit(3)
            .with_group(DependentGroup {
                indices: vec![0, 2],
                mixture: g,
                bounds: Bounds::from_pairs(&[(-1.0, 2.0), (-1.0, 2.0)]).unwrap(),
            })
            .unwrap();
        let n = 5000;
        let xs = m.sample(n, 3);
        for (j, mu) in [(0, 0.4), (2, 0.6)] {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            assert!((mean - mu).abs() < 3.0 * 0.1 / (n as f64).sqrt());
        }
        assert!(xs.iter().all(|x| m.bounds().contains(x)));
        let design = initial_design(&m, 40, &DesignGenerator::default()).unwrap();
        assert!(design.iter().all(|x| m.bounds().contains(x)));
    }

    #[test]
    fn normal_marginals_are_truncated() {
        let m = InputModel::independent(vec![Marginal::Normal { mean: 1.0, std: 2.0 }]).unwrap();
        assert_eq!(m.bounds().lower(), &[-11.0]);
        let xs = m.sample(1000, 0);
        assert!(xs.iter().all(|x| m.bounds().contains(x)));
        assert!((Marginal::Normal { mean: 1.0, std: 2.0 }.quantile(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prefix_property() {
        let m = unit(4);
        for g in [
            DesignGenerator::default(),
            DesignGenerator { kind: DesignKind::SobolSequence, seed: 9, scrambled: true },
            DesignGenerator { kind: DesignKind::UniformRandom, seed: 9, scrambled: false },
        ] {
            let long = initial_design(&m, 50, &g).unwrap();
            let short = initial_design(&m, 20, &g).unwrap();
            assert_eq!(&long[..20], &short[..]);
            assert_eq!(g.points(&m, 20, 30).unwrap(), long[20..].to_vec());
        }
    }

    #[test]
    fn unsupported_dimension() {
        assert!(InputModel::independent(vec![Marginal::Uniform { lower: 0.0, upper: 1.0 }; 65]).is_err());
        assert!(initial_design(&unit(2), 1, &DesignGenerator::default()).is_err());
    }
}
