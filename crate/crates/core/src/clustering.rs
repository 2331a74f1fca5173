//! Spherical k-means over performance vectors, silhouette-based selection of
//! the cluster count, medoid extraction, and the observed-vs-permuted
//! clustering comparison.
//!
//! Vectors are normalized to unit length; assignment maximizes cosine
//! similarity to the centroid and the centroid update is the normalized mean
//! of the members. All-zero rows (a prompt every model failed, in binary
//! matrices) have no direction: they are parked in the cluster whose
//! pre-normalization mean has the smallest norm and excluded from centroid
//! means. For distance purposes two all-zero rows coincide (distance 0) and
//! an all-zero row is maximally far (distance 1) from everything else.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::PerformanceMatrix;
use crate::parallel;
use crate::seed::derive_index_seed;
use crate::stats::permute_matrix;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 10;

/// A converged spherical k-means run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Clustering {
    pub k: usize,
    /// Cluster index of every point.
    pub assignments: Vec<usize>,
    /// Unit-norm centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Per cluster, the member minimizing the summed cosine distance to the
    /// other members — the cluster's representative point.
    pub medoid_indices: Vec<usize>,
    /// Mean silhouette over all points, cosine distance.
    pub silhouette: f64,
    pub cluster_sizes: Vec<usize>,
}

/// Observed vs. permuted clustering quality (same k-range and seed policy on
/// both sides).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClusteringComparison {
    pub observed: Clustering,
    pub permuted: Clustering,
}

/// Unit-normalized copies of the input rows plus zero-row bookkeeping.
pub(crate) struct Normalized {
    unit: Vec<f64>,
    dim: usize,
    pub zero: Vec<bool>,
    nonzero_count: usize,
}

impl Normalized {
    pub fn build(vectors: &[Vec<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput);
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        let n = vectors.len();
        let mut unit = vec![0.0; n * dim];
        let mut zero = vec![false; n];
        let mut nonzero_count = 0;
        for (i, row) in vectors.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::LengthMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            let norm_sq: f64 = row.iter().map(|v| v * v).sum();
            if norm_sq == 0.0 {
                zero[i] = true;
            } else {
                nonzero_count += 1;
                let norm = math::sqrt(norm_sq);
                for (d, &v) in row.iter().enumerate() {
                    unit[i * dim + d] = v / norm;
                }
            }
        }
        Ok(Self {
            unit,
            dim,
            zero,
            nonzero_count,
        })
    }

    fn len(&self) -> usize {
        self.zero.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// Cosine distance with the zero-row conventions.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match (self.zero[i], self.zero[j]) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 1.0,
            (false, false) => {
                let d: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                1.0 - d.clamp(-1.0, 1.0)
            }
        }
    }
}

/// Full pairwise distance matrix, shared across restarts and k values.
struct DistanceCache {
    values: Vec<f64>,
    n: usize,
}

impl DistanceCache {
    fn build(norm: &Normalized) -> Self {
        let n = norm.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = norm.distance(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { values, n }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct KmeansState {
    /// Unit-norm centroid directions.
    centroids: Vec<Vec<f64>>,
    /// Norm of each centroid's pre-normalization mean; zero rows are parked
    /// at the argmin.
    mean_norms: Vec<f64>,
}

fn assign_points(
    norm: &Normalized,
    state: &KmeansState,
    previous: Option<&[usize]>,
) -> (Vec<usize>, f64) {
    let n = norm.len();
    let k = state.centroids.len();
    let mut assignments = vec![0usize; n];
    let mut objective = 0.0;
    let lowest_norm_cluster = state
        .mean_norms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
        .unwrap_or(0);
    for i in 0..n {
        if norm.zero[i] {
            assignments[i] = lowest_norm_cluster;
            continue;
        }
        let row = norm.row(i);
        let mut best_j = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (j, centroid) in state.centroids.iter().enumerate() {
            let d = dot(row, centroid);
            if d > best_dot {
                best_dot = d;
                best_j = j;
            }
        }
        // Stability on exact ties: keep the previous assignment when it is
        // among the maximizers, so tie oscillation cannot starve a cluster.
        if let Some(prev) = previous {
            let pj = prev[i];
            if pj < k && dot(row, &state.centroids[pj]) == best_dot {
                best_j = pj;
            }
        }
        assignments[i] = best_j;
        objective += best_dot;
    }
    (assignments, objective)
}

fn update_centroids(
    norm: &Normalized,
    assignments: &mut [usize],
    state: &mut KmeansState,
) -> f64 {
    let k = state.centroids.len();
    let dim = norm.dim;
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        if norm.zero[i] {
            continue;
        }
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(norm.row(i)) {
            *s += v;
        }
    }

    // Empty-cluster repair: seed with the point farthest (cosine) from its
    // assigned centroid; smallest index on ties.
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut farthest: Option<(usize, f64)> = None;
        for i in 0..norm.len() {
            if norm.zero[i] {
                continue;
            }
            let a = assignments[i];
            if counts[a] <= 1 {
                continue; // do not empty another cluster
            }
            let d = 1.0 - dot(norm.row(i), &state.centroids[a]);
            if farthest.map_or(true, |(_, best)| d > best) {
                farthest = Some((i, d));
            }
        }
        if let Some((i, _)) = farthest {
            let old = assignments[i];
            counts[old] -= 1;
            for (s, &v) in sums[old].iter_mut().zip(norm.row(i)) {
                *s -= v;
            }
            assignments[i] = j;
            counts[j] = 1;
            sums[j] = norm.row(i).to_vec();
        }
    }

    let mut max_movement = 0.0f64;
    for j in 0..k {
        if counts[j] == 0 {
            // Unrepairable (every other cluster is a singleton); keep the
            // old direction so the state stays well-formed.
            state.mean_norms[j] = 0.0;
            continue;
        }
        let mean: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        let norm_sq: f64 = mean.iter().map(|v| v * v).sum();
        let mean_norm = math::sqrt(norm_sq);
        state.mean_norms[j] = mean_norm;
        if mean_norm > 0.0 {
            let new: Vec<f64> = mean.iter().map(|v| v / mean_norm).collect();
            let movement = 1.0 - dot(&new, &state.centroids[j]).clamp(-1.0, 1.0);
            max_movement = max_movement.max(movement);
            state.centroids[j] = new;
        }
    }
    max_movement
}

fn silhouette_with_cache(cache: &DistanceCache, assignments: &[usize], k: usize) -> f64 {
    let n = assignments.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0f64; k];
    for i in 0..n {
        for s in sums.iter_mut() {
            *s = 0.0;
        }
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += cache.get(i, j);
            }
        }
        let own = assignments[i];
        if sizes[own] <= 1 {
            // Singleton clusters contribute 0 by convention.
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for j in 0..k {
            if j != own && sizes[j] > 0 {
                b = b.min(sums[j] / sizes[j] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
        // 0/0 (coincident points): contributes 0.
    }
    total / n as f64
}

fn medoids_with_cache(cache: &DistanceCache, assignments: &[usize], k: usize) -> Vec<usize> {
    let n = assignments.len();
    let mut medoids = vec![usize::MAX; k];
    let mut best_cost = vec![f64::INFINITY; k];
    for i in 0..n {
        let cluster = assignments[i];
        let cost: f64 = (0..n)
            .filter(|&j| j != i && assignments[j] == cluster)
            .map(|j| cache.get(i, j))
            .sum();
        if cost < best_cost[cluster] {
            best_cost[cluster] = cost;
            medoids[cluster] = i;
        }
    }
    medoids
}

fn kmeans_with_cache(
    norm: &Normalized,
    cache: &DistanceCache,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(Clustering, Vec<f64>)> {
    let n = norm.len();
    if k < 2 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if norm.nonzero_count < k {
        return Err(Error::DegenerateInput {
            reason: "fewer nonzero rows than clusters",
        });
    }

    // Initialization: k distinct nonzero rows chosen uniformly.
    let nonzero_indices: Vec<usize> = (0..n).filter(|&i| !norm.zero[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, nonzero_indices.len(), k);
    let centroids: Vec<Vec<f64>> = chosen
        .iter()
        .map(|idx| norm.row(nonzero_indices[idx]).to_vec())
        .collect();
    let mut state = KmeansState {
        centroids,
        mean_norms: vec![1.0; k],
    };

    let mut assignments: Vec<usize> = Vec::new();
    let mut objective_trace = Vec::new();
    for _ in 0..max_iter {
        let (new_assignments, objective) = if assignments.is_empty() {
            assign_points(norm, &state, None)
        } else {
            assign_points(norm, &state, Some(&assignments))
        };
        objective_trace.push(objective);
        let stable = !assignments.is_empty() && assignments == new_assignments;
        assignments = new_assignments;
        if stable {
            break;
        }
        let movement = update_centroids(norm, &mut assignments, &mut state);
        let _ = movement <= tol; // movement below tol: next pass confirms the fixed point
    }

    let mut cluster_sizes = vec![0usize; k];
    for &a in &assignments {
        cluster_sizes[a] += 1;
    }
    if cluster_sizes.iter().any(|&s| s == 0) {
        return Err(Error::DegenerateInput {
            reason: "could not keep every cluster nonempty",
        });
    }
    let silhouette = silhouette_with_cache(cache, &assignments, k);
    let medoid_indices = medoids_with_cache(cache, &assignments, k);
    Ok((
        Clustering {
            k,
            assignments,
            centroids: state.centroids,
            medoid_indices,
            silhouette,
            cluster_sizes,
        },
        objective_trace,
    ))
}

/// One spherical k-means run (uniform random initialization from the data
/// rows, deterministic in `seed`).
pub fn spherical_kmeans(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering> {
    let norm = Normalized::build(vectors)?;
    let cache = DistanceCache::build(&norm);
    kmeans_with_cache(&norm, &cache, k, seed, max_iter, tol).map(|(c, _)| c)
}

#[cfg(test)]
pub(crate) fn spherical_kmeans_traced(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(Clustering, Vec<f64>)> {
    let norm = Normalized::build(vectors)?;
    let cache = DistanceCache::build(&norm);
    kmeans_with_cache(&norm, &cache, k, seed, max_iter, tol)
}

/// Mean silhouette of an arbitrary assignment under cosine distance.
///
/// For each point, `a` is the mean distance to its own cluster (excluding
/// itself) and `b` the smallest mean distance to another cluster; the score
/// is `(b - a) / max(a, b)`, with coincident points (0/0) and singleton
/// clusters scoring 0.
pub fn silhouette_score(vectors: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    let norm = Normalized::build(vectors)?;
    if assignments.len() != vectors.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: vectors.len(),
        });
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let cache = DistanceCache::build(&norm);
    Ok(silhouette_with_cache(&cache, assignments, k))
}

/// Run spherical k-means for every k in `[k_lo, k_hi]` (best of `restarts`
/// seeded restarts per k) and return the clustering with the highest
/// silhouette; ties break toward smaller k, then the earlier restart.
pub fn select_k(
    vectors: &[Vec<f64>],
    k_lo: usize,
    k_hi: usize,
    seed: u64,
    restarts: usize,
) -> Result<Clustering> {
    let n = vectors.len();
    if k_lo < 2 || k_hi >= n || k_lo > k_hi {
        return Err(Error::InvalidK {
            k: if k_lo < 2 { k_lo } else { k_hi },
            n,
        });
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig {
            reason: "need at least one restart".into(),
        });
    }
    let norm = Normalized::build(vectors)?;
    let cache = DistanceCache::build(&norm);

    let ks: Vec<usize> = (k_lo..=k_hi).collect();
    let runs: Vec<Result<Clustering>> = parallel::map_indexed(ks.len() * restarts, |task| {
        let k = ks[task / restarts];
        let restart = task % restarts;
        let run_seed = derive_index_seed(derive_index_seed(seed, k as u64), restart as u64);
        kmeans_with_cache(&norm, &cache, k, run_seed, DEFAULT_MAX_ITER, DEFAULT_TOL)
            .map(|(c, _)| c)
    });

    let mut best: Option<Clustering> = None;
    for run in runs {
        let candidate = run?;
        let better = match &best {
            None => true,
            Some(current) => {
                candidate.silhouette > current.silhouette
                    || (candidate.silhouette == current.silhouette && candidate.k < current.k)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.unwrap())
}

/// Cluster the observed performance vectors and one column-permuted copy
/// with the same k-range and restart policy; the permuted silhouette is the
/// no-structure baseline.
pub fn clustering_comparison(
    perf: &PerformanceMatrix,
    k_lo: usize,
    k_hi: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringComparison> {
    let rows: Vec<Vec<f64>> = (0..perf.n_prompts()).map(|i| perf.row(i).to_vec()).collect();
    let observed = select_k(&rows, k_lo, k_hi, derive_index_seed(seed, 0), restarts)?;
    let permuted_matrix = permute_matrix(perf, derive_index_seed(seed, 1));
    let permuted_rows: Vec<Vec<f64>> = (0..permuted_matrix.n_prompts())
        .map(|i| permuted_matrix.row(i).to_vec())
        .collect();
    let permuted = select_k(
        &permuted_rows,
        k_lo,
        k_hi,
        derive_index_seed(seed, 2),
        restarts,
    )?;
    Ok(ClusteringComparison { observed, permuted })
}
