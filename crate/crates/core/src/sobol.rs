//! Sobol' low-discrepancy sequence in natural (non-Gray-code) order.
//!
//! Point `i` is the XOR of the direction numbers selected by the binary digits
//! of `i`. Direction numbers for dimensions 2–64 come from the Joe–Kuo
//! `new-joe-kuo-6.21201` table (see `assets/JOE_KUO_LICENSE.txt`).

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;
const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;

static TABLE: &str = include_str!("../assets/new-joe-kuo-6.64.txt");

fn directions() -> &'static [[u32; BITS]] {
    static DIRS: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut out = Vec::with_capacity(MAX_DIM);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        out.push(first);
        for line in TABLE.lines().skip(1) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|f| f.parse().expect("malformed direction-number table"))
                .collect();
            if fields.is_empty() {
                continue;
            }
            let (s, a) = (fields[1] as usize, fields[2]);
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                v[k] = v[k - s] ^ (v[k - s] >> s);
                for l in 1..s {
                    if (a >> (s - 1 - l)) & 1 == 1 {
                        v[k] ^= v[k - l];
                    }
                }
            }
            out.push(v);
        }
        assert_eq!(out.len(), MAX_DIM);
        out
    })
}

/// Generator for the first `dim` coordinates of the Sobol' sequence, with an
/// optional random digital shift.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    shift: Vec<u32>,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "Sobol' sequence supports 1..={MAX_DIM} dimensions, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            shift: vec![0; dim],
        })
    }

    /// Scrambled variant: every coordinate is XOR-ed with a seeded random word.
    /// This preserves the digital-net structure of the sequence.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut seq = Self::new(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seq.shift = (0..dim).map(|_| rng.random::<u32>()).collect();
        Ok(seq)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `index`-th point in `[0, 1)^dim`. Index 0 is the origin (before shift).
    pub fn point(&self, index: u64) -> Vec<f64> {
        let dirs = directions();
        (0..self.dim)
            .map(|j| {
                let mut word = self.shift[j];
                let mut i = index;
                let mut k = 0;
                while i != 0 && k < BITS {
                    if i & 1 == 1 {
                        word ^= dirs[j][k];
                    }
                    i >>= 1;
                    k += 1;
                }
                word as f64 * SCALE
            })
            .collect()
    }

    /// Points `start, start+1, …, start+count-1`.
    pub fn points(&self, start: u64, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64).map(|i| self.point(start + i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radical_inverse(mut i: u64) -> f64 {
        let mut f = 0.5;
        let mut out = 0.0;
        while i > 0 {
            if i & 1 == 1 {
                out += f;
            }
            f *= 0.5;
            i >>= 1;
        }
        out
    }

    /// Gray-code Sobol' generator written independently of `point`.
    fn gray_code_points(dim: usize, count: usize) -> Vec<Vec<u32>> {
        let dirs = directions();
        let mut x = vec![0u32; dim];
        let mut out = vec![x.clone()];
        for i in 1..count as u32 {
            let c = (i - 1).trailing_ones() as usize;
            for j in 0..dim {
                x[j] ^= dirs[j][c];
            }
            out.push(x.clone());
        }
        out
    }

    #[test]
    fn first_dimension_is_van_der_corput() {
        let s = SobolSequence::new(1).unwrap();
        let got: Vec<f64> = s.points(1, 4).into_iter().map(|p| p[0]).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
        for i in 0..1000u64 {
            assert_eq!(s.point(i)[0], radical_inverse(i));
        }
    }

    #[test]
    fn power_of_two_blocks_match_gray_code_ordering() {
        let dim = MAX_DIM;
        let s = SobolSequence::new(dim).unwrap();
        for m in [4usize, 7, 10] {
            let count = 1 << m;
            let mut natural: Vec<Vec<u32>> = s
                .points(0, count)
                .into_iter()
                .map(|p| p.iter().map(|v| (v / SCALE) as u32).collect())
                .collect();
            let mut gray = gray_code_points(dim, count);
            natural.sort();
            gray.sort();
            assert_eq!(natural, gray);
        }
    }

    #[test]
    fn second_dimension_values() {
        let s = SobolSequence::new(2).unwrap();
        let pts = s.points(1, 3);
        assert_eq!(pts[0], vec![0.5, 0.5]);
        assert_eq!(pts[1], vec![0.25, 0.75]);
        assert_eq!(pts[2], vec![0.75, 0.25]);
    }

    #[test]
    fn every_dimension_is_stratified() {
        // each 1-D projection of 2^m points is a permutation of k/2^m
        let s = SobolSequence::new(MAX_DIM).unwrap();
        let pts = s.points(0, 256);
        for j in 0..MAX_DIM {
            let mut col: Vec<u32> = pts.iter().map(|p| (p[j] * 256.0) as u32).collect();
            col.sort();
            assert_eq!(col, (0..256).collect::<Vec<_>>(), "dimension {j}");
        }
    }

    #[test]
    fn scrambling_is_seeded() {
        let a = SobolSequence::scrambled(3, 5).unwrap();
        let b = SobolSequence::scrambled(3, 5).unwrap();
        let c = SobolSequence::scrambled(3, 6).unwrap();
        assert_eq!(a.point(17), b.point(17));
        assert_ne!(a.point(17), c.point(17));
    }

    #[test]
    fn unsupported_dimension() {
        assert!(SobolSequence::new(0).is_err());
        assert!(SobolSequence::new(65).is_err());
    }
}
