//! Benchmark-size curves: running average performance as prompts are added
//! one at a time, either greedily (most semantically informative next) or in
//! random order.
//!
//! "Most informative" picks the unselected prompt with the largest mean
//! cosine distance (on embeddings) to everything already selected — growing
//! a benchmark that stays semantically diverse. Running means are recomputed
//! exactly at every step for n up to 2000 so the curve carries no
//! accumulated floating-point drift, and the final row is computed as the
//! canonical uniform column means so it matches them bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{EmbeddingMatrix, PerformanceMatrix};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Steps at which running means are recomputed from scratch when n exceeds
/// the recompute-every-step limit.
const EXACT_RECOMPUTE_EVERY: usize = 512;
const RECOMPUTE_ALL_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum GrowthMethod {
    MostInformative,
    Random,
}

impl GrowthMethod {
    pub fn name(self) -> &'static str {
        match self {
            GrowthMethod::MostInformative => "most-informative",
            GrowthMethod::Random => "random",
        }
    }
}

/// Selection order plus the running per-model mean after each addition.
/// `running_scores[t]` is the mean over the first `t + 1` selected prompts;
/// the final row equals the uniform column means exactly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GrowthCurve {
    pub method: GrowthMethod,
    pub selection_order: Vec<usize>,
    pub running_scores: Vec<Vec<f64>>,
    pub seed: u64,
}

fn running_scores(perf: &PerformanceMatrix, order: &[usize]) -> Vec<Vec<f64>> {
    let (n, k) = (perf.n_prompts(), perf.n_models());
    let mut scores = Vec::with_capacity(n);
    let mut sums = vec![0.0f64; k];
    for (t, &idx) in order.iter().enumerate() {
        for (s, &v) in sums.iter_mut().zip(perf.row(idx)) {
            *s += v;
        }
        let row = if t + 1 == n {
            // Final step: canonical column means, bit-exact.
            perf.column_means()
        } else if n <= RECOMPUTE_ALL_LIMIT || (t + 1) % EXACT_RECOMPUTE_EVERY == 0 {
            let mut exact = vec![0.0f64; k];
            for &sel in &order[..=t] {
                for (s, &v) in exact.iter_mut().zip(perf.row(sel)) {
                    *s += v;
                }
            }
            sums.clone_from(&exact);
            exact.iter().map(|s| s / (t + 1) as f64).collect()
        } else {
            sums.iter().map(|s| s / (t + 1) as f64).collect()
        };
        scores.push(row);
    }
    scores
}

/// Random-order curve: the selection order is a uniform random permutation.
pub fn growth_curve_random(perf: &PerformanceMatrix, seed: u64) -> GrowthCurve {
    let mut order: Vec<usize> = (0..perf.n_prompts()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    GrowthCurve {
        method: GrowthMethod::Random,
        running_scores: running_scores(perf, &order),
        selection_order: order,
        seed,
    }
}

/// Greedy diversity curve: start from a uniformly chosen prompt, then
/// repeatedly add the prompt with the largest mean cosine distance (on the
/// embeddings) to everything selected so far; ties break to the smaller
/// index.
pub fn growth_curve_informative(
    perf: &PerformanceMatrix,
    emb: &EmbeddingMatrix,
    seed: u64,
) -> Result<GrowthCurve> {
    if perf.prompt_ids() != emb.prompt_ids() {
        let missing_in_embeddings = perf
            .prompt_ids()
            .iter()
            .filter(|id| !emb.prompt_ids().contains(id))
            .cloned()
            .collect();
        let missing_in_performance = emb
            .prompt_ids()
            .iter()
            .filter(|id| !perf.prompt_ids().contains(id))
            .cloned()
            .collect();
        return Err(Error::MismatchedPrompts {
            missing_in_performance,
            missing_in_embeddings,
        });
    }
    let n = perf.n_prompts();
    let dim = emb.dim();

    // Unit-normalized embeddings; the matrix invariant rules out zero rows.
    let mut unit = vec![0.0; n * dim];
    for i in 0..n {
        let row = emb.row(i);
        let norm = math::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        for (d, &v) in row.iter().enumerate() {
            unit[i * dim + d] = v / norm;
        }
    }
    let unit_row = |i: usize| &unit[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);

    let mut selected = vec![false; n];
    let mut dist_sums = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);

    let mut add = |idx: usize, selected: &mut [bool], dist_sums: &mut [f64]| {
        selected[idx] = true;
        let new_row = unit_row(idx);
        for i in 0..n {
            if !selected[i] {
                let dot: f64 = unit_row(i).iter().zip(new_row).map(|(a, b)| a * b).sum();
                dist_sums[i] += 1.0 - dot;
            }
        }
    };

    add(first, &mut selected, &mut dist_sums);
    order.push(first);
    for _ in 1..n {
        // argmax of the distance sum (same argmax as the mean); strict
        // comparison gives the smaller index on ties.
        let mut best = usize::MAX;
        let mut best_sum = f64::NEG_INFINITY;
        for i in 0..n {
            if !selected[i] && dist_sums[i] > best_sum {
                best_sum = dist_sums[i];
                best = i;
            }
        }
        add(best, &mut selected, &mut dist_sums);
        order.push(best);
    }

    Ok(GrowthCurve {
        method: GrowthMethod::MostInformative,
        running_scores: running_scores(perf, &order),
        selection_order: order,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    fn ids(prefix: &str, count: usize) -> Vec<String> {
        (0..count).map(|i| format!("{prefix}{i}")).collect()
    }

    fn angle_embedding(angles_deg: &[f64]) -> EmbeddingMatrix {
        let rows = angles_deg
            .iter()
            .map(|a| {
                let t = a.to_radians();
                vec![t.cos(), t.sin()]
            })
            .collect();
        EmbeddingMatrix::from_rows(ids("p", angles_deg.len()), rows).unwrap()
    }

    fn small_perf(n: usize) -> PerformanceMatrix {
        crate::fixtures::planted_block_matrix(n, 4, 2, 0.1, 7).unwrap()
    }

    #[test]
    fn final_row_equals_uniform_means_bit_exactly() {
        let perf = crate::fixtures::null_bernoulli_matrix(37, 6, 5).unwrap();
        let curve = growth_curve_random(&perf, 11);
        assert_eq!(curve.running_scores.last().unwrap(), &perf.column_means());

        let emb = crate::fixtures::grouped_embeddings(37, 5, 4, 0.2, 9).unwrap().0;
        let curve = growth_curve_informative(&perf, &emb, 3).unwrap();
        assert_eq!(curve.running_scores.last().unwrap(), &perf.column_means());
    }

    #[test]
    fn selection_order_is_a_permutation() {
        let perf = small_perf(20);
        let emb = crate::fixtures::grouped_embeddings(20, 6, 3, 0.2, 2).unwrap().0;
        for seed in 0..5 {
            for curve in [
                growth_curve_random(&perf, seed),
                growth_curve_informative(&perf, &emb, seed).unwrap(),
            ] {
                let mut sorted = curve.selection_order.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..20).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn hand_fixture_order() {
        // Embeddings at 0°, 90°, 5°. From each possible start the greedy
        // mean-distance rule gives a unique hand-derived order.
        let perf = PerformanceMatrix::from_rows(
            ids("p", 3),
            ids("m", 2),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let emb = angle_embedding(&[0.0, 90.0, 5.0]);
        let expected_after = |start: usize| match start {
            0 => vec![0, 1, 2], // d(1)=1 beats d(2)=1-cos5
            1 => vec![1, 0, 2], // d(0)=1 beats d(2)=1-cos85
            2 => vec![2, 1, 0], // d(1)=1-cos85 beats d(0)=1-cos5
            _ => unreachable!(),
        };
        let mut starts_seen = [false; 3];
        for seed in 0..64 {
            let curve = growth_curve_informative(&perf, &emb, seed).unwrap();
            let start = curve.selection_order[0];
            starts_seen[start] = true;
            assert_eq!(curve.selection_order, expected_after(start), "seed {seed}");
        }
        assert!(starts_seen.iter().all(|&s| s), "some start never sampled");
    }

    #[test]
    fn n_two_is_forced() {
        let perf = PerformanceMatrix::from_rows(
            ids("p", 2),
            ids("m", 2),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let emb = angle_embedding(&[0.0, 90.0]);
        let curve = growth_curve_informative(&perf, &emb, 4).unwrap();
        let first = curve.selection_order[0];
        assert_eq!(curve.selection_order, vec![first, 1 - first]);
        assert_eq!(curve.running_scores.last().unwrap(), &perf.column_means());
    }

    #[test]
    fn same_seed_same_curve() {
        let perf = small_perf(15);
        assert_eq!(growth_curve_random(&perf, 3), growth_curve_random(&perf, 3));
    }

    #[test]
    fn random_order_is_uniform_over_permutations() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let perf = PerformanceMatrix::from_rows(
            ids("p", 3),
            ids("m", 2),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let mut counts = [0u64; 6];
        let draws = 10_000;
        for seed in 0..draws {
            let order = growth_curve_random(&perf, seed).selection_order;
            let code = order[0] * 2 + usize::from(order[1] > order[2]);
            counts[code] += 1;
        }
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new(5.0).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "chi2={chi2} critical={critical}");
    }

    #[test]
    fn binary_running_means_move_slowly() {
        let perf = crate::fixtures::planted_block_matrix(30, 5, 3, 0.05, 13).unwrap();
        let curve = growth_curve_random(&perf, 21);
        for t in 1..30 {
            for j in 0..5 {
                let delta =
                    (curve.running_scores[t][j] - curve.running_scores[t - 1][j]).abs();
                assert!(delta <= 1.0 / t as f64 + 1e-12, "step {t} model {j}");
            }
        }
    }

    #[test]
    fn mismatched_ids_is_an_error() {
        let perf = small_perf(4);
        let emb = EmbeddingMatrix::from_rows(
            ids("q", 4),
            vec![vec![1.0, 0.0]; 4],
        )
        .unwrap();
        assert!(matches!(
            growth_curve_informative(&perf, &emb, 0),
            Err(Error::MismatchedPrompts { .. })
        ));
    }
}
