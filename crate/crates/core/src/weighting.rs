//! Cluster-based evaluation variants: medoid-only scoring, distance-based
//! and inverse-distance prompt weights, weighted aggregate performance,
//! model rankings, and rank-change reports.
//!
//! Both weight schemes share the same structure: a within-cluster weight
//! (normalized over the cluster) times the cluster's mass `|C_j| / n`.
//! Distance-based weights emphasize prompts far from their cluster's
//! representative (benchmark diversity); inverse-distance weights emphasize
//! prompts close to it (smoothed version of keeping only representatives).
//! Distances are cosine distances between performance vectors — the same
//! space the clustering ran in.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::clustering::{Clustering, Normalized};
use crate::error::{Error, Result};
use crate::matrix::{PerformanceMatrix, WeightVector};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Fraction of the mean positive within-cluster distance used to regularize
/// inverse-distance weights (the representative itself has distance 0).
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.01;

/// Model scores and ranks under one weighting scheme, with rank changes
/// against the uniform baseline.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RankingReport {
    pub scheme: String,
    /// Weighted score per model, matrix column order.
    pub scores: Vec<f64>,
    /// Competition ranks, 1 = best; exact ties share the better rank.
    pub ranks: Vec<usize>,
    /// Baseline (uniform) rank minus this scheme's rank; positive means the
    /// model moved up.
    pub rank_delta: Vec<i64>,
    /// Clusters where the weight formula degenerated (all members coincide
    /// with the representative) and fell back to uniform within the cluster.
    pub fallback_clusters: Vec<usize>,
}

/// A cluster-derived weight vector plus the clusters where the formula fell
/// back to uniform.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClusterWeights {
    pub weights: WeightVector,
    pub fallback_clusters: Vec<usize>,
}

/// `score_j = sum_i w_i * Q[i, j]`.
pub fn weighted_performance(perf: &PerformanceMatrix, w: &WeightVector) -> Result<Vec<f64>> {
    let (n, k) = (perf.n_prompts(), perf.n_models());
    if w.len() != n {
        return Err(Error::LengthMismatch {
            left: w.len(),
            right: n,
        });
    }
    let mut scores = vec![0.0; k];
    for (i, &wi) in w.weights().iter().enumerate() {
        let row = perf.row(i);
        for (s, &v) in scores.iter_mut().zip(row) {
            *s += wi * v;
        }
    }
    Ok(scores)
}

/// Unweighted mean of the matrix rows restricted to the cluster
/// representatives (shrinks the benchmark to one prompt per cluster).
pub fn medoid_subset_performance(perf: &PerformanceMatrix, clustering: &Clustering) -> Vec<f64> {
    let k = perf.n_models();
    let mut scores = vec![0.0; k];
    for &medoid in &clustering.medoid_indices {
        for (s, &v) in scores.iter_mut().zip(perf.row(medoid)) {
            *s += v;
        }
    }
    let count = clustering.medoid_indices.len() as f64;
    for s in &mut scores {
        *s /= count;
    }
    scores
}

/// Cosine distance of every prompt's performance vector to its cluster's
/// medoid vector.
pub fn medoid_distances(perf: &PerformanceMatrix, clustering: &Clustering) -> Result<Vec<f64>> {
    let n = perf.n_prompts();
    if clustering.assignments.len() != n {
        return Err(Error::LengthMismatch {
            left: clustering.assignments.len(),
            right: n,
        });
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| perf.row(i).to_vec()).collect();
    let norm = Normalized::build(&rows)?;
    Ok((0..n)
        .map(|i| {
            let medoid = clustering.medoid_indices[clustering.assignments[i]];
            if i == medoid {
                0.0
            } else {
                norm.distance(i, medoid)
            }
        })
        .collect())
}

fn cluster_members(clustering: &Clustering) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); clustering.k];
    for (i, &a) in clustering.assignments.iter().enumerate() {
        members[a].push(i);
    }
    members
}

/// Distance-based weights: within cluster `j`, prompt `i` gets
/// `d(i, medoid_j) / sum_cluster d` of the cluster mass `|C_j| / n`.
/// Representatives get weight 0. A cluster whose members all coincide with
/// the representative falls back to uniform weights within the cluster and
/// is listed in `fallback_clusters`.
pub fn distance_weights(
    clustering: &Clustering,
    distances: &[f64],
) -> Result<ClusterWeights> {
    let n = clustering.assignments.len();
    if distances.len() != n {
        return Err(Error::LengthMismatch {
            left: distances.len(),
            right: n,
        });
    }
    if distances.iter().any(|&d| !d.is_finite() || d < 0.0) {
        return Err(Error::InvalidWeights {
            reason: "distances must be finite and nonnegative",
        });
    }
    let members = cluster_members(clustering);
    let mut weights = vec![0.0; n];
    let mut fallback_clusters = Vec::new();
    for (j, cluster) in members.iter().enumerate() {
        let mass = cluster.len() as f64 / n as f64;
        let sum: f64 = cluster.iter().map(|&i| distances[i]).sum();
        if sum == 0.0 {
            fallback_clusters.push(j);
            for &i in cluster {
                weights[i] = mass / cluster.len() as f64;
            }
        } else {
            for &i in cluster {
                weights[i] = distances[i] / sum * mass;
            }
        }
    }
    Ok(ClusterWeights {
        weights: WeightVector::new(weights, "distance")?,
        fallback_clusters,
    })
}

/// Inverse-distance weights: within cluster `j`, prompt `i` gets weight
/// proportional to `1 / (d + eps)` with `eps = epsilon_fraction *` (mean
/// positive within-cluster distance), times the cluster mass. Clusters with
/// no positive distances are uniform within (no singularity to regularize).
pub fn inverse_distance_weights(
    clustering: &Clustering,
    distances: &[f64],
    epsilon_fraction: f64,
) -> Result<ClusterWeights> {
    let n = clustering.assignments.len();
    if distances.len() != n {
        return Err(Error::LengthMismatch {
            left: distances.len(),
            right: n,
        });
    }
    if distances.iter().any(|&d| !d.is_finite() || d < 0.0) {
        return Err(Error::InvalidWeights {
            reason: "distances must be finite and nonnegative",
        });
    }
    if !(epsilon_fraction > 0.0) {
        return Err(Error::InvalidConfig {
            reason: "epsilon fraction must be positive".into(),
        });
    }
    let members = cluster_members(clustering);
    let mut weights = vec![0.0; n];
    let mut fallback_clusters = Vec::new();
    for (j, cluster) in members.iter().enumerate() {
        let mass = cluster.len() as f64 / n as f64;
        let positive: Vec<f64> = cluster
            .iter()
            .map(|&i| distances[i])
            .filter(|&d| d > 0.0)
            .collect();
        if positive.is_empty() {
            fallback_clusters.push(j);
            for &i in cluster {
                weights[i] = mass / cluster.len() as f64;
            }
            continue;
        }
        let eps = epsilon_fraction * positive.iter().sum::<f64>() / positive.len() as f64;
        let unnormalized: Vec<f64> = cluster.iter().map(|&i| 1.0 / (distances[i] + eps)).collect();
        let sum: f64 = unnormalized.iter().sum();
        for (&i, u) in cluster.iter().zip(unnormalized) {
            weights[i] = u / sum * mass;
        }
    }
    Ok(ClusterWeights {
        weights: WeightVector::new(weights, "inverse-distance")?,
        fallback_clusters,
    })
}

/// Competition ranking, higher score = better (rank 1). Exact ties share the
/// smaller rank.
pub fn rank_models(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| 1 + scores.iter().filter(|&&o| o > s).count())
        .collect()
}

/// Baseline (uniform) ranking plus one report per cluster-based scheme, each
/// with rank changes against the baseline.
pub fn rank_change_report(
    perf: &PerformanceMatrix,
    clustering: &Clustering,
) -> Result<Vec<RankingReport>> {
    let n = perf.n_prompts();
    let uniform = WeightVector::uniform(n)?;
    let baseline_scores = weighted_performance(perf, &uniform)?;
    let baseline_ranks = rank_models(&baseline_scores);

    let report = |scheme: &str, scores: Vec<f64>, fallback: Vec<usize>| {
        let ranks = rank_models(&scores);
        let rank_delta = baseline_ranks
            .iter()
            .zip(&ranks)
            .map(|(&b, &r)| b as i64 - r as i64)
            .collect();
        RankingReport {
            scheme: scheme.into(),
            scores,
            ranks,
            rank_delta,
            fallback_clusters: fallback,
        }
    };

    let distances = medoid_distances(perf, clustering)?;
    let dist = distance_weights(clustering, &distances)?;
    let inv = inverse_distance_weights(clustering, &distances, DEFAULT_EPSILON_FRACTION)?;

    Ok(vec![
        report("uniform", baseline_scores.clone(), Vec::new()),
        report(
            "medoid-only",
            medoid_subset_performance(perf, clustering),
            Vec::new(),
        ),
        report(
            "distance",
            weighted_performance(perf, &dist.weights)?,
            dist.fallback_clusters,
        ),
        report(
            "inverse-distance",
            weighted_performance(perf, &inv.weights)?,
            inv.fallback_clusters,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{spherical_kmeans, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use alloc::format;
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;

    fn perf_from_rows(rows: Vec<Vec<f64>>) -> PerformanceMatrix {
        let k = rows[0].len();
        PerformanceMatrix::from_rows(
            (0..rows.len()).map(|i| format!("p{i}")).collect(),
            (0..k).map(|j| format!("m{j}")).collect(),
            rows,
        )
        .unwrap()
    }

    /// Hand-built clustering for weight-formula tests.
    fn manual_clustering(n: usize, assignments: Vec<usize>, medoids: Vec<usize>) -> Clustering {
        assert_eq!(assignments.len(), n);
        let k = medoids.len();
        let mut cluster_sizes = vec![0usize; k];
        for &a in &assignments {
            cluster_sizes[a] += 1;
        }
        Clustering {
            k,
            assignments,
            centroids: vec![vec![1.0]; k],
            medoid_indices: medoids,
            silhouette: 0.0,
            cluster_sizes,
        }
    }

    #[test]
    fn weighted_performance_examples() {
        let perf = perf_from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = WeightVector::new(vec![1.0, 0.0], "selector").unwrap();
        assert_eq!(weighted_performance(&perf, &w).unwrap(), vec![1.0, 0.0]);

        let w = WeightVector::new(vec![0.25, 0.75], "w").unwrap();
        assert_eq!(weighted_performance(&perf, &w).unwrap(), vec![0.25, 0.75]);

        let uniform = WeightVector::uniform(2).unwrap();
        let scores = weighted_performance(&perf, &uniform).unwrap();
        for (s, m) in scores.iter().zip(perf.column_means()) {
            assert_abs_diff_eq!(*s, m, epsilon = 1e-12);
        }

        let w = WeightVector::new(vec![0.5, 0.5, 0.0], "bad").unwrap();
        assert!(matches!(
            weighted_performance(&perf, &w),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn medoid_subset_examples() {
        // two medoid rows (1,0), (0,1) -> (0.5, 0.5)
        let perf = perf_from_rows(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ]);
        let clustering = manual_clustering(4, vec![0, 0, 1, 1], vec![0, 2]);
        assert_eq!(
            medoid_subset_performance(&perf, &clustering),
            vec![0.5, 0.5]
        );

        // three medoid rows summing per-column to (2, 1) -> (2/3, 1/3)
        let perf = perf_from_rows(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ]);
        let clustering = manual_clustering(4, vec![0, 0, 1, 2], vec![0, 2, 3]);
        let scores = medoid_subset_performance(&perf, &clustering);
        assert_abs_diff_eq!(scores[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scores[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn distance_weights_hand_cases() {
        // one cluster {medoid, d=1, d=3} -> [0, 0.25, 0.75]
        let clustering = manual_clustering(3, vec![0, 0, 0], vec![0]);
        let w = distance_weights(&clustering, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(w.weights.weights(), &[0.0, 0.25, 0.75]);
        assert!(w.fallback_clusters.is_empty());

        // two clusters {medoid, d=1} each, n=4 -> [0, 0.5, 0, 0.5]
        let clustering = manual_clustering(4, vec![0, 0, 1, 1], vec![0, 2]);
        let w = distance_weights(&clustering, &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.weights.weights(), &[0.0, 0.5, 0.0, 0.5]);

        // all prompts are medoids (k = n) -> fallback to uniform
        let clustering = manual_clustering(2, vec![0, 1], vec![0, 1]);
        let w = distance_weights(&clustering, &[0.0, 0.0]).unwrap();
        assert_eq!(w.weights.weights(), &[0.5, 0.5]);
        assert_eq!(w.fallback_clusters, vec![0, 1]);
    }

    #[test]
    fn inverse_distance_weights_hand_case() {
        // cluster {d=0, 0.5, 1.0}: eps = 0.01 * 0.75 = 0.0075
        let clustering = manual_clustering(3, vec![0, 0, 0], vec![0]);
        let w = inverse_distance_weights(&clustering, &[0.0, 0.5, 1.0], 0.01).unwrap();
        let eps = 0.0075;
        let u = [1.0 / eps, 1.0 / (0.5 + eps), 1.0 / (1.0 + eps)];
        let sum: f64 = u.iter().sum();
        for (got, expect) in w.weights.weights().iter().zip(u.iter().map(|v| v / sum)) {
            assert_abs_diff_eq!(*got, expect, epsilon = 1e-15);
        }
        // spec-stated rounded values
        assert_abs_diff_eq!(w.weights.weights()[0], 0.97825, epsilon = 1e-4);
        assert_abs_diff_eq!(w.weights.weights()[1], 0.014459, epsilon = 1e-5);
        assert_abs_diff_eq!(w.weights.weights()[2], 0.0072838, epsilon = 1e-6);

        // identical points -> uniform within cluster
        let w = inverse_distance_weights(&clustering, &[0.0, 0.0, 0.0], 0.01).unwrap();
        for v in w.weights.weights() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(w.fallback_clusters, vec![0]);

        // two singleton clusters -> 0.5 each
        let clustering = manual_clustering(2, vec![0, 1], vec![0, 1]);
        let w = inverse_distance_weights(&clustering, &[0.0, 0.0], 0.01).unwrap();
        assert_eq!(w.weights.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rank_models_examples() {
        assert_eq!(rank_models(&[0.9, 0.5, 0.7]), vec![1, 3, 2]);
        assert_eq!(rank_models(&[0.5, 0.5]), vec![1, 1]);
        assert_eq!(rank_models(&[0.3, 0.9, 0.9, 0.1]), vec![3, 1, 1, 4]);
    }

    #[test]
    fn rank_change_baseline_is_zero_delta() {
        let perf = crate::fixtures::planted_block_matrix(20, 5, 4, 0.05, 3).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| perf.row(i).to_vec()).collect();
        let clustering = spherical_kmeans(&rows, 4, 1, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let reports = rank_change_report(&perf, &clustering).unwrap();
        assert_eq!(reports.len(), 4);
        assert_eq!(reports[0].scheme, "uniform");
        assert!(reports[0].rank_delta.iter().all(|&d| d == 0));
    }

    #[test]
    fn medoid_scheme_can_invert_a_ranking() {
        let perf = perf_from_rows(vec![
            vec![0.2, 0.8],
            vec![0.9, 0.1],
            vec![0.3, 0.7],
            vec![1.0, 0.0],
        ]);
        let clustering = manual_clustering(4, vec![0, 1, 0, 1], vec![0, 1]);
        // uniform means: m0 = 0.6, m1 = 0.4 -> ranks [1, 2]
        // medoid rows 0 and 1: m0 = (0.2+0.9)/2 = 0.55, m1 = (0.8+0.1)/2 = 0.45
        // no inversion there; use medoids {0, 2} instead:
        let clustering2 = manual_clustering(4, vec![0, 1, 0, 1], vec![0, 3]);
        let _ = clustering;
        let reports = rank_change_report(&perf, &clustering2).unwrap();
        let medoid_report = &reports[1];
        assert_eq!(medoid_report.scheme, "medoid-only");
        // medoid rows 0 and 3: m0 = 0.6, m1 = 0.4 -> same ranks, delta zero
        assert!(medoid_report.rank_delta.iter().all(|&d| d == 0));

        // medoids {0, 2}: m0 = 0.25, m1 = 0.75 -> ranks flip
        let clustering3 = manual_clustering(4, vec![0, 1, 0, 1], vec![0, 2]);
        let reports = rank_change_report(&perf, &clustering3).unwrap();
        let medoid_report = &reports[1];
        assert_eq!(medoid_report.rank_delta, vec![-1, 1]);
    }

    #[test]
    fn weight_schemes_preserve_cluster_mass() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        for trial in 0..10 {
            let n = 24;
            let k_models = 6;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..k_models)
                        .map(|_| f64::from(u8::from(rng.gen_bool(0.5))))
                        .collect()
                })
                .collect();
            if rows.iter().filter(|r| r.iter().any(|&v| v != 0.0)).count() < 4 {
                continue;
            }
            let clustering =
                match spherical_kmeans(&rows, 4, trial, DEFAULT_MAX_ITER, DEFAULT_TOL) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
            let perf = perf_from_rows(rows);
            let distances = medoid_distances(&perf, &clustering).unwrap();
            for scheme in [
                distance_weights(&clustering, &distances).unwrap(),
                inverse_distance_weights(&clustering, &distances, DEFAULT_EPSILON_FRACTION)
                    .unwrap(),
            ] {
                let weights = scheme.weights.weights();
                assert!(weights.iter().all(|&w| w >= 0.0));
                assert_abs_diff_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
                for (j, &size) in clustering.cluster_sizes.iter().enumerate() {
                    let mass: f64 = (0..n)
                        .filter(|&i| clustering.assignments[i] == j)
                        .map(|i| weights[i])
                        .sum();
                    assert_abs_diff_eq!(mass, size as f64 / n as f64, epsilon = 1e-9);
                }
            }
            // medoids get exactly zero under distance weights (no fallback)
            let dist = distance_weights(&clustering, &distances).unwrap();
            for (j, &medoid) in clustering.medoid_indices.iter().enumerate() {
                if !dist.fallback_clusters.contains(&j) {
                    assert_eq!(dist.weights.weights()[medoid], 0.0);
                }
            }
        }
    }
}
