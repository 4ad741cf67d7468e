//! KMeans partition of gradient sites, optionally with near-equal cluster
//! sizes, and the inter-cluster separations that enter the chunking bounds.
//!
//! Distances are measured in the kernel's scaled metric `r(x, x')`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

const LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    delta: f64,
    delta_pairs: DMatrix<f64>,
}

impl Clustering {
    /// Builds a clustering from an explicit assignment (`0..C` labels, every
    /// label used) and computes the separations by brute force.
    pub fn from_assignment(sites: &[Vec<f64>], assignment: Vec<usize>, kernel: &KernelSpec) -> Result<Self> {
        if sites.len() != assignment.len() {
            return Err(Error::Shape(format!(
                "{} sites but {} labels",
                sites.len(),
                assignment.len()
            )));
        }
        let c = assignment.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; c];
        for &a in &assignment {
            sizes[a] += 1;
        }
        if sizes.iter().any(|s| *s == 0) {
            return Err(Error::Parameter("cluster labels must be contiguous and nonempty".into()));
        }
        let mut pairs = DMatrix::from_element(c, c, f64::INFINITY);
        for a in 0..sites.len() {
            for b in a + 1..sites.len() {
                let (i, j) = (assignment[a], assignment[b]);
                if i != j {
                    let r = kernel.r(&sites[a], &sites[b]);
                    if r < pairs[(i, j)] {
                        pairs[(i, j)] = r;
                        pairs[(j, i)] = r;
                    }
                }
            }
        }
        let delta = pairs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            assignment,
            sizes,
            delta,
            delta_pairs: pairs,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.assignment.len()
    }

    /// Minimum scaled distance between points of different clusters; `+∞` for one cluster.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Δ_ij` for every pair of clusters (`+∞` on the diagonal).
    pub fn delta_pairs(&self) -> &DMatrix<f64> {
        &self.delta_pairs
    }

    /// Site indices of each cluster, in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (idx, &a) in self.assignment.iter().enumerate() {
            out[a].push(idx);
        }
        out
    }

    pub fn is_balanced(&self) -> bool {
        let max = self.sizes.iter().max().copied().unwrap_or(0);
        let min = self.sizes.iter().min().copied().unwrap_or(0);
        max - min <= 1
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Partitions `sites` into `count` clusters with Lloyd iterations seeded by
/// k-means++. In balanced mode every size is `⌊N/C⌋` or `⌈N/C⌉`.
pub fn cluster_sites(
    sites: &[Vec<f64>],
    count: usize,
    balanced: bool,
    kernel: &KernelSpec,
    seed: u64,
) -> Result<Clustering> {
    let n = sites.len();
    if count == 0 || count > n {
        return Err(Error::Parameter(format!(
            "cluster count must lie in 1..={n}, got {count}"
        )));
    }
    if count == 1 {
        return Clustering::from_assignment(sites, vec![0; n], kernel);
    }
    if count == n {
        return Clustering::from_assignment(sites, (0..n).collect(), kernel);
    }
    let scaled: Vec<Vec<f64>> = sites
        .iter()
        .map(|x| x.iter().zip(kernel.lengthscales()).map(|(v, t)| v / t).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![scaled[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = scaled.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < count {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut k = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if u < *w {
                    k = i;
                    break;
                }
                u -= w;
            }
            k
        } else {
            centers.len()
        };
        centers.push(scaled[pick].clone());
        for (i, p) in scaled.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let capacity: Vec<usize> = (0..count)
        .map(|c| n / count + usize::from(c < n % count))
        .collect();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..LLOYD_ITERS {
        let next = if balanced {
            assign_balanced(&scaled, &centers, &capacity)
        } else {
            assign_nearest(&scaled, &mut centers)
        };
        if next == assignment {
            break;
        }
        assignment = next;
        let dim = scaled[0].len();
        let mut sums = vec![vec![0.0; dim]; count];
        let mut counts = vec![0usize; count];
        for (p, &a) in scaled.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..count {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Clustering::from_assignment(sites, relabel(assignment), kernel)
}

/// Nearest-center assignment; an empty cluster is re-seeded with the point
/// farthest from its own center.
fn assign_nearest(points: &[Vec<f64>], centers: &mut [Vec<f64>]) -> Vec<usize> {
    let nearest = |p: &[f64], centers: &[Vec<f64>]| {
        let mut best = (0, f64::INFINITY);
        for (c, ctr) in centers.iter().enumerate() {
            let d = sq_dist(p, ctr);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    };
    let mut out: Vec<usize> = points.iter().map(|p| nearest(p, centers).0).collect();
    for c in 0..centers.len() {
        if out.iter().any(|a| *a == c) {
            continue;
        }
        let mut counts = vec![0usize; centers.len()];
        for a in &out {
            counts[*a] += 1;
        }
        let far = (0..points.len())
            .filter(|i| counts[out[*i]] > 1)
            .max_by(|a, b| {
                let da = sq_dist(&points[*a], &centers[out[*a]]);
                let db = sq_dist(&points[*b], &centers[out[*b]]);
                da.total_cmp(&db).then(b.cmp(a))
            });
        if let Some(i) = far {
            centers[c] = points[i].clone();
            out[i] = c;
        }
    }
    out
}

/// Greedy capacity-constrained assignment: points with the largest margin
/// between their best and second-best center choose first.
fn assign_balanced(points: &[Vec<f64>], centers: &[Vec<f64>], capacity: &[usize]) -> Vec<usize> {
    let c = centers.len();
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| centers.iter().map(|ctr| sq_dist(p, ctr)).collect())
        .collect();
    let margin = |row: &[f64]| {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for &v in row {
            if v < best {
                second = best;
                best = v;
            } else if v < second {
                second = v;
            }
        }
        second - best
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|a, b| margin(&dist[*b]).total_cmp(&margin(&dist[*a])).then(a.cmp(b)));
    let mut left = capacity.to_vec();
    let mut out = vec![0; points.len()];
    for i in order {
        let pick = (0..c)
            .filter(|k| left[*k] > 0)
            .min_by(|a, b| dist[i][*a].total_cmp(&dist[i][*b]).then(a.cmp(b)))
            .expect("capacities cover every point");
        left[pick] -= 1;
        out[i] = pick;
    }
    out
}

/// Renumbers labels by first appearance and drops unused ones.
fn relabel(assignment: Vec<usize>) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    assignment
        .into_iter()
        .map(|a| {
            let next = map.len();
            *map.entry(a).or_insert(next)
        })
        .collect()
}
