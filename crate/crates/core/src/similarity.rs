//! Pairwise similarity between performance vectors and between embeddings,
//! plus full similarity-matrix construction.
//!
//! Two layers:
//!
//! * [`pairwise_similarity`] is the strict scalar operation: zero-vector
//!   cosine and 0/0 Jaccard are errors, because silently guessing a value
//!   would bias downstream tests.
//! * Matrix construction is total. Permuted copies of a valid matrix can
//!   align zeros into rows the original never had, so the matrix level pins
//!   conventions instead of failing mid-permutation-test: identical all-zero
//!   rows count as similarity 1 (they are equal vectors), cosine against a
//!   single all-zero row counts as 0, and the diagonal is 1 by definition.
//!
//! For binary matrices with at most 64 models, rows are packed into `u64`
//! bitmasks; similarity then reduces to popcounts. The packed path produces
//! bit-identical values to the dense path (same floating-point expression
//! trees), it is just much faster — the permutation engine leans on this.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{EmbeddingMatrix, MatrixKind, PerformanceMatrix, SimilarityMatrix};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// The similarity functions used to compare prompt vectors.
///
/// Hamming and Jaccard are defined on binary vectors only; cosine applies to
/// any nonzero vectors. All three are similarities (larger = more alike):
/// Hamming here is the fraction of agreeing positions, not a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum SimilarityMeasure {
    Cosine,
    Hamming,
    Jaccard,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 3] = [
        SimilarityMeasure::Cosine,
        SimilarityMeasure::Hamming,
        SimilarityMeasure::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMeasure::Cosine => "cosine",
            SimilarityMeasure::Hamming => "hamming",
            SimilarityMeasure::Jaccard => "jaccard",
        }
    }

    /// Valid value range.
    pub fn range(self) -> (f64, f64) {
        match self {
            SimilarityMeasure::Cosine => (-1.0, 1.0),
            SimilarityMeasure::Hamming | SimilarityMeasure::Jaccard => (0.0, 1.0),
        }
    }

    /// Whether the measure applies to a matrix of the given kind.
    pub fn supports(self, kind: MatrixKind) -> bool {
        match self {
            SimilarityMeasure::Cosine => true,
            SimilarityMeasure::Hamming | SimilarityMeasure::Jaccard => {
                kind == MatrixKind::Binary
            }
        }
    }
}

fn require_binary(v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::NonBinaryInput);
    }
    Ok(())
}

/// Similarity between two vectors under the given measure.
///
/// Cosine is `dot(u,v) / sqrt(|u|^2 |v|^2)`, Hamming the fraction of equal
/// positions, Jaccard `|u AND v| / |u OR v|` on 0/1 vectors.
pub fn pairwise_similarity(u: &[f64], v: &[f64], measure: SimilarityMeasure) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    match measure {
        SimilarityMeasure::Cosine => {
            let mut dot = 0.0;
            let mut nu = 0.0;
            let mut nv = 0.0;
            for (&a, &b) in u.iter().zip(v) {
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::UndefinedSimilarity {
                    reason: "cosine with an all-zero vector",
                });
            }
            Ok(dot / math::sqrt(nu * nv))
        }
        SimilarityMeasure::Hamming => {
            require_binary(u)?;
            require_binary(v)?;
            let matches = u.iter().zip(v).filter(|(a, b)| a == b).count();
            Ok(matches as f64 / u.len() as f64)
        }
        SimilarityMeasure::Jaccard => {
            require_binary(u)?;
            require_binary(v)?;
            let mut both = 0usize;
            let mut either = 0usize;
            for (&a, &b) in u.iter().zip(v) {
                if a == 1.0 && b == 1.0 {
                    both += 1;
                }
                if a == 1.0 || b == 1.0 {
                    either += 1;
                }
            }
            if either == 0 {
                return Err(Error::UndefinedSimilarity {
                    reason: "Jaccard of two all-zero vectors",
                });
            }
            Ok(both as f64 / either as f64)
        }
    }
}

/// Pair value with the matrix-level zero conventions, dense rows.
pub(crate) fn matrix_pair_value(u: &[f64], v: &[f64], measure: SimilarityMeasure) -> f64 {
    match measure {
        SimilarityMeasure::Cosine => {
            let mut dot = 0.0;
            let mut nu = 0.0;
            let mut nv = 0.0;
            for (&a, &b) in u.iter().zip(v) {
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu == 0.0 && nv == 0.0 {
                1.0
            } else if nu == 0.0 || nv == 0.0 {
                0.0
            } else {
                (dot / math::sqrt(nu * nv)).clamp(-1.0, 1.0)
            }
        }
        SimilarityMeasure::Hamming => {
            let matches = u.iter().zip(v).filter(|(a, b)| a == b).count();
            matches as f64 / u.len() as f64
        }
        SimilarityMeasure::Jaccard => {
            let mut both = 0usize;
            let mut either = 0usize;
            for (&a, &b) in u.iter().zip(v) {
                if a == 1.0 && b == 1.0 {
                    both += 1;
                }
                if a == 1.0 || b == 1.0 {
                    either += 1;
                }
            }
            if either == 0 {
                1.0
            } else {
                both as f64 / either as f64
            }
        }
    }
}

/// Binary rows packed into bitmasks. Only built when every value is 0/1 and
/// there are at most 64 columns.
pub(crate) struct PackedRows {
    pub masks: Vec<u64>,
    pub counts: Vec<u32>,
    pub width: u32,
}

impl PackedRows {
    pub fn from_matrix(perf: &PerformanceMatrix) -> Option<Self> {
        if perf.kind() != MatrixKind::Binary || perf.n_models() > 64 {
            return None;
        }
        let k = perf.n_models();
        let masks: Vec<u64> = (0..perf.n_prompts())
            .map(|i| {
                perf.row(i)
                    .iter()
                    .enumerate()
                    .fold(0u64, |m, (j, &v)| if v == 1.0 { m | (1 << j) } else { m })
            })
            .collect();
        let counts = masks.iter().map(|m| m.count_ones()).collect();
        Some(Self {
            masks,
            counts,
            width: k as u32,
        })
    }

    /// Rebuild from shuffled column-major values (the permutation engine's
    /// working layout).
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns[0].len();
        let masks: Vec<u64> = (0..n)
            .map(|i| {
                columns
                    .iter()
                    .enumerate()
                    .fold(0u64, |m, (j, col)| if col[i] == 1.0 { m | (1 << j) } else { m })
            })
            .collect();
        let counts = masks.iter().map(|m| m.count_ones()).collect();
        Self {
            masks,
            counts,
            width: columns.len() as u32,
        }
    }

    /// Similarity of rows i, j; bit-identical to [`matrix_pair_value`] on the
    /// unpacked rows.
    #[inline]
    pub fn pair_value(&self, i: usize, j: usize, measure: SimilarityMeasure) -> f64 {
        let (a, b) = (self.masks[i], self.masks[j]);
        let (ca, cb) = (self.counts[i], self.counts[j]);
        match measure {
            SimilarityMeasure::Cosine => {
                if ca == 0 && cb == 0 {
                    1.0
                } else if ca == 0 || cb == 0 {
                    0.0
                } else {
                    let dot = (a & b).count_ones() as f64;
                    (dot / math::sqrt((ca * cb) as f64)).clamp(-1.0, 1.0)
                }
            }
            SimilarityMeasure::Hamming => {
                let matches = self.width - (a ^ b).count_ones();
                matches as f64 / self.width as f64
            }
            SimilarityMeasure::Jaccard => {
                let either = (a | b).count_ones();
                if either == 0 {
                    1.0
                } else {
                    (a & b).count_ones() as f64 / either as f64
                }
            }
        }
    }

    /// Histogram bucket of the pair (see [`ValueGrid`]).
    #[inline]
    pub fn pair_key(&self, i: usize, j: usize, measure: SimilarityMeasure) -> u32 {
        let (a, b) = (self.masks[i], self.masks[j]);
        let w = self.width + 1;
        match measure {
            SimilarityMeasure::Cosine => {
                let both = (a & b).count_ones();
                (both * w + self.counts[i]) * w + self.counts[j]
            }
            SimilarityMeasure::Hamming => self.width - (a ^ b).count_ones(),
            SimilarityMeasure::Jaccard => (a & b).count_ones() * w + (a | b).count_ones(),
        }
    }
}

/// Enumeration of every similarity value a packed pair can take, used to
/// replace per-permutation sorting with counting.
///
/// `key_value` maps a bucket key back to the similarity value; it is the same
/// expression as [`PackedRows::pair_value`], so histogram statistics agree
/// bit-for-bit with statistics over the raw values.
pub(crate) struct ValueGrid {
    /// Distinct values, ascending.
    pub values: Vec<f64>,
    /// Bucket key -> index into `values` (dense lookup table).
    pub key_to_group: Vec<u32>,
}

impl ValueGrid {
    pub fn new(width: u32, measure: SimilarityMeasure) -> Self {
        let w = width + 1;
        let space = match measure {
            SimilarityMeasure::Cosine => (w * w * w) as usize,
            SimilarityMeasure::Jaccard => (w * w) as usize,
            SimilarityMeasure::Hamming => w as usize,
        };
        let mut entries: Vec<(f64, u32)> = Vec::new();
        for key in 0..space as u32 {
            if let Some(v) = key_value(key, width, measure) {
                entries.push((v, key));
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut values = Vec::new();
        let mut key_to_group = alloc::vec![u32::MAX; space];
        for (v, key) in entries {
            if values.last() != Some(&v) {
                values.push(v);
            }
            key_to_group[key as usize] = (values.len() - 1) as u32;
        }
        Self {
            values,
            key_to_group,
        }
    }

    pub fn group_count(&self) -> usize {
        self.values.len()
    }
}

/// Value of a bucket key, or `None` for impossible keys (e.g. intersection
/// larger than either count).
fn key_value(key: u32, width: u32, measure: SimilarityMeasure) -> Option<f64> {
    let w = width + 1;
    match measure {
        SimilarityMeasure::Hamming => {
            (key <= width).then(|| key as f64 / width as f64)
        }
        SimilarityMeasure::Jaccard => {
            let both = key / w;
            let either = key % w;
            if both > either || either > width {
                return None;
            }
            Some(if either == 0 {
                1.0
            } else {
                both as f64 / either as f64
            })
        }
        SimilarityMeasure::Cosine => {
            let both = key / (w * w);
            let ca = (key / w) % w;
            let cb = key % w;
            if both > ca.min(cb) || ca > width || cb > width {
                return None;
            }
            Some(if ca == 0 && cb == 0 {
                1.0
            } else if ca == 0 || cb == 0 {
                0.0
            } else {
                (both as f64 / math::sqrt((ca * cb) as f64)).clamp(-1.0, 1.0)
            })
        }
    }
}

fn build_matrix(
    prompt_ids: Vec<alloc::string::String>,
    n: usize,
    pair: impl Fn(usize, usize) -> f64,
    measure: SimilarityMeasure,
) -> Result<SimilarityMatrix> {
    let mut values = alloc::vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = pair(i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::new(prompt_ids, values, measure)
}

/// Full n×n similarity matrix over the performance vectors.
pub fn performance_similarity_matrix(
    perf: &PerformanceMatrix,
    measure: SimilarityMeasure,
) -> Result<SimilarityMatrix> {
    if !measure.supports(perf.kind()) {
        return Err(Error::NonBinaryInput);
    }
    let n = perf.n_prompts();
    if let Some(packed) = PackedRows::from_matrix(perf) {
        build_matrix(
            perf.prompt_ids().to_vec(),
            n,
            |i, j| packed.pair_value(i, j, measure),
            measure,
        )
    } else {
        build_matrix(
            perf.prompt_ids().to_vec(),
            n,
            |i, j| matrix_pair_value(perf.row(i), perf.row(j), measure),
            measure,
        )
    }
}

/// Cosine similarity matrix over embedding rows (the semantic similarity).
pub fn semantic_similarity_matrix(emb: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    build_matrix(
        emb.prompt_ids().to_vec(),
        emb.n_prompts(),
        |i, j| matrix_pair_value(emb.row(i), emb.row(j), SimilarityMeasure::Cosine),
        SimilarityMeasure::Cosine,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::PerformanceMatrix;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn ids(names: &[&str]) -> Vec<alloc::string::String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_vectors_have_similarity_one() {
        let u = [1.0, 0.0, 1.0, 0.0];
        for m in SimilarityMeasure::ALL {
            assert_eq!(pairwise_similarity(&u, &u, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn orthogonal_binary_vectors() {
        let u = [1.0, 1.0, 0.0, 0.0];
        let v = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(
            pairwise_similarity(&u, &v, SimilarityMeasure::Cosine).unwrap(),
            0.0
        );
    }

    #[test]
    fn hand_evaluated_jaccard_and_hamming() {
        // intersection 1, union 3; 2 of 4 positions agree
        let u = [1.0, 1.0, 0.0, 0.0];
        let v = [1.0, 0.0, 1.0, 0.0];
        assert_abs_diff_eq!(
            pairwise_similarity(&u, &v, SimilarityMeasure::Jaccard).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(
            pairwise_similarity(&u, &v, SimilarityMeasure::Hamming).unwrap(),
            0.5
        );
    }

    #[test]
    fn scalar_errors() {
        let u = [1.0, 0.0];
        let v = [1.0, 0.0, 1.0];
        assert!(matches!(
            pairwise_similarity(&u, &v, SimilarityMeasure::Cosine),
            Err(Error::LengthMismatch { .. })
        ));
        let z = [0.0, 0.0];
        assert!(matches!(
            pairwise_similarity(&u, &z, SimilarityMeasure::Cosine),
            Err(Error::UndefinedSimilarity { .. })
        ));
        assert!(matches!(
            pairwise_similarity(&z, &z, SimilarityMeasure::Jaccard),
            Err(Error::UndefinedSimilarity { .. })
        ));
        let c = [0.5, 0.5];
        assert!(matches!(
            pairwise_similarity(&c, &u, SimilarityMeasure::Hamming),
            Err(Error::NonBinaryInput)
        ));
    }

    #[test]
    fn symmetry_holds_exactly() {
        let u = [0.13, 0.87, 0.44, 0.9];
        let v = [0.7, 0.01, 0.33, 0.2];
        let a = pairwise_similarity(&u, &v, SimilarityMeasure::Cosine).unwrap();
        let b = pairwise_similarity(&v, &u, SimilarityMeasure::Cosine).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_rows_give_all_ones_matrix() {
        let perf = PerformanceMatrix::new(
            ids(&["a", "b"]),
            ids(&["m1", "m2", "m3"]),
            vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        for m in SimilarityMeasure::ALL {
            let t = performance_similarity_matrix(&perf, m).unwrap();
            assert_eq!(t.values(), &[1.0, 1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn jaccard_on_continuous_matrix_is_rejected() {
        let perf = PerformanceMatrix::new(
            ids(&["a", "b"]),
            ids(&["m1", "m2"]),
            vec![0.4, 0.2, 0.1, 0.9],
        )
        .unwrap();
        assert!(matches!(
            performance_similarity_matrix(&perf, SimilarityMeasure::Jaccard),
            Err(Error::NonBinaryInput)
        ));
    }

    #[test]
    fn hamming_hand_case_in_matrix() {
        let perf = PerformanceMatrix::new(
            ids(&["a", "b"]),
            ids(&["m1", "m2", "m3", "m4"]),
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let t = performance_similarity_matrix(&perf, SimilarityMeasure::Hamming).unwrap();
        assert_eq!(t.value(0, 1), 0.5);
    }

    #[test]
    fn semantic_matrix_hand_cases() {
        let emb = EmbeddingMatrix::from_rows(
            ids(&["a", "b"]),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let t = semantic_similarity_matrix(&emb).unwrap();
        assert_eq!(t.value(0, 1), 0.0);

        let emb = EmbeddingMatrix::from_rows(
            ids(&["a", "b"]),
            vec![vec![0.6, 0.8], vec![0.6, 0.8]],
        )
        .unwrap();
        let t = semantic_similarity_matrix(&emb).unwrap();
        assert_abs_diff_eq!(t.value(0, 1), 1.0, epsilon = 1e-12);

        let s = core::f64::consts::FRAC_1_SQRT_2;
        let emb = EmbeddingMatrix::from_rows(
            ids(&["a", "b"]),
            vec![vec![1.0, 0.0], vec![s, s]],
        )
        .unwrap();
        let t = semantic_similarity_matrix(&emb).unwrap();
        assert_abs_diff_eq!(t.value(0, 1), s, epsilon = 1e-12);
    }

    #[test]
    fn packed_path_matches_scalar_op_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 12;
            let k = rng.gen_range(2..=9);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| f64::from(rng.gen_range(0..=1))).collect())
                .collect();
            let perf = PerformanceMatrix::from_rows(
                (0..n).map(|i| alloc::format!("p{i}")).collect(),
                (0..k).map(|j| alloc::format!("m{j}")).collect(),
                rows.clone(),
            )
            .unwrap();
            let packed = PackedRows::from_matrix(&perf).unwrap();
            for m in SimilarityMeasure::ALL {
                for i in 0..n {
                    for j in 0..n {
                        let dense = matrix_pair_value(&rows[i], &rows[j], m);
                        let fast = packed.pair_value(i, j, m);
                        assert_eq!(dense, fast, "measure {m:?} rows {i},{j}");
                        if let Ok(strict) = pairwise_similarity(&rows[i], &rows[j], m) {
                            assert_eq!(strict.clamp(-1.0, 1.0), fast);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn value_grid_covers_every_key() {
        for m in SimilarityMeasure::ALL {
            let grid = ValueGrid::new(5, m);
            // every value strictly ascending
            for w in grid.values.windows(2) {
                assert!(w[0] < w[1]);
            }
            // round trip: key -> group -> value equals key_value
            for (key, &group) in grid.key_to_group.iter().enumerate() {
                if group != u32::MAX {
                    let v = key_value(key as u32, 5, m).unwrap();
                    assert_eq!(grid.values[group as usize], v);
                }
            }
        }
    }

    #[test]
    fn matrix_agrees_with_scalar_on_random_continuous_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 20;
        let k = 5;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(0.01..1.0)).collect())
            .collect();
        let perf = PerformanceMatrix::from_rows(
            (0..n).map(|i| alloc::format!("p{i}")).collect(),
            (0..k).map(|j| alloc::format!("m{j}")).collect(),
            rows.clone(),
        )
        .unwrap();
        let t = performance_similarity_matrix(&perf, SimilarityMeasure::Cosine).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let s = pairwise_similarity(&rows[i], &rows[j], SimilarityMeasure::Cosine)
                        .unwrap();
                    assert_abs_diff_eq!(t.value(i, j), s, epsilon = 1e-15);
                }
            }
        }
    }
}
