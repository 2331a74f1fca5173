//! Synthetic fixture generators.
//!
//! Benchmark-scale inputs (real model scores on real benchmark prompts) are
//! not something this crate can ship; these generators produce matrices with
//! known planted structure — or known absence of structure — for tests,
//! calibration runs, and demos. All are deterministic in the seed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::math;
use crate::matrix::{EmbeddingMatrix, PerformanceMatrix};

fn prompt_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:04}")).collect()
}

fn model_ids(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("m{j:02}")).collect()
}

/// Null matrix: every column is iid Bernoulli with its own rate drawn
/// uniformly from `[0.2, 0.8]`. No structure across prompts by construction.
pub fn null_bernoulli_matrix(n: usize, k: usize, seed: u64) -> Result<PerformanceMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..0.8)).collect();
    let mut values = Vec::with_capacity(n * k);
    for _ in 0..n {
        for &rate in &rates {
            values.push(f64::from(u8::from(rng.gen_bool(rate))));
        }
    }
    PerformanceMatrix::new(prompt_ids(n), model_ids(k), values)
}

/// Planted-structure matrix: `blocks` random binary prototype rows, each
/// duplicated to fill `n` rows, then every cell flipped with probability
/// `flip_prob`. Rows within a block stay nearly identical, which a
/// correlation test should detect.
pub fn planted_block_matrix(
    n: usize,
    k: usize,
    blocks: usize,
    flip_prob: f64,
    seed: u64,
) -> Result<PerformanceMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<f64>> = (0..blocks)
        .map(|_| (0..k).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect())
        .collect();
    let mut values = Vec::with_capacity(n * k);
    for i in 0..n {
        let proto = &prototypes[i * blocks / n];
        for &v in proto {
            let flipped = if rng.gen_bool(flip_prob) { 1.0 - v } else { v };
            values.push(flipped);
        }
    }
    PerformanceMatrix::new(prompt_ids(n), model_ids(k), values)
}

/// Embeddings in `groups` tight directional clusters: each group gets a
/// random center on the unit sphere, members are the center plus small
/// uniform noise. Returns the matrix and each prompt's group index.
pub fn grouped_embeddings(
    n: usize,
    dim: usize,
    groups: usize,
    noise: f64,
    seed: u64,
) -> Result<(EmbeddingMatrix, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..groups)
        .map(|_| {
            let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = math::sqrt(raw.iter().map(|v| v * v).sum::<f64>()).max(1e-9);
            raw.iter().map(|v| v / norm).collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut assignment = Vec::with_capacity(n);
    for i in 0..n {
        let g = i * groups / n;
        assignment.push(g);
        let row: Vec<f64> = centers[g]
            .iter()
            .map(|&c| c + rng.gen_range(-noise..noise))
            .collect();
        rows.push(row);
    }
    let emb = EmbeddingMatrix::from_rows(prompt_ids(n), rows)?;
    Ok((emb, assignment))
}

/// A coupled pair: prompts fall into semantic groups (tight embedding
/// clusters) and prompts in the same group share a noisy copy of the same
/// performance prototype. Performance similarity is therefore explained by
/// semantic similarity, which the regression pipeline should detect.
pub fn semantic_coupled_fixture(
    n: usize,
    k: usize,
    dim: usize,
    groups: usize,
    flip_prob: f64,
    emb_noise: f64,
    seed: u64,
) -> Result<(PerformanceMatrix, EmbeddingMatrix)> {
    let (emb, assignment) = grouped_embeddings(n, dim, groups, emb_noise, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let prototypes: Vec<Vec<f64>> = (0..groups)
        .map(|_| (0..k).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect())
        .collect();
    let mut values = Vec::with_capacity(n * k);
    for &g in &assignment {
        for &v in &prototypes[g] {
            let flipped = if rng.gen_bool(flip_prob) { 1.0 - v } else { v };
            values.push(flipped);
        }
    }
    let perf = PerformanceMatrix::new(prompt_ids(n), model_ids(k), values)?;
    Ok((perf, emb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixKind;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            null_bernoulli_matrix(10, 4, 3).unwrap(),
            null_bernoulli_matrix(10, 4, 3).unwrap()
        );
        assert_eq!(
            planted_block_matrix(20, 6, 4, 0.02, 3).unwrap(),
            planted_block_matrix(20, 6, 4, 0.02, 3).unwrap()
        );
    }

    #[test]
    fn planted_matrix_is_binary_with_expected_shape() {
        let m = planted_block_matrix(50, 10, 5, 0.02, 1).unwrap();
        assert_eq!(m.kind(), MatrixKind::Binary);
        assert_eq!(m.n_prompts(), 50);
        assert_eq!(m.n_models(), 10);
    }

    #[test]
    fn grouped_embeddings_cover_all_groups() {
        let (emb, groups) = grouped_embeddings(30, 8, 3, 0.05, 9).unwrap();
        assert_eq!(emb.n_prompts(), 30);
        assert_eq!(groups.iter().max(), Some(&2));
    }
}
