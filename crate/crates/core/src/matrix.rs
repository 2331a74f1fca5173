//! Core typed containers: the prompt×model performance matrix, prompt
//! embeddings, pairwise similarity matrices, and prompt weight vectors.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they can be shared freely across concurrent readers.
//! Prompt and model identifiers travel with every structure; derived reports
//! always reference ids, never bare indices.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Whether a performance matrix holds 0/1 correctness or continuous scores.
///
/// Binary is a validation flag, not a storage format: values are kept as
/// `f64` either way so accuracy- and ROUGE-style matrices share one code
/// path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum MatrixKind {
    Binary,
    Continuous,
}

/// n×k matrix of per-prompt, per-model scores in `[0, 1]`.
///
/// Row `i` is the performance vector of prompt `i` across all models.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PerformanceMatrix {
    prompt_ids: Vec<String>,
    model_ids: Vec<String>,
    values: Vec<f64>,
    kind: MatrixKind,
}

fn check_unique(ids: &[String]) -> Result<()> {
    // Quadratic, but id lists are small and this avoids a hash dependency.
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(Error::DuplicateId { id: id.clone() });
        }
    }
    Ok(())
}

fn is_binary_value(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

impl PerformanceMatrix {
    /// Build from flat row-major values, auto-detecting the kind
    /// (`Binary` iff every value is exactly 0 or 1).
    pub fn new(
        prompt_ids: Vec<String>,
        model_ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let kind = if values.iter().all(|&v| is_binary_value(v)) {
            MatrixKind::Binary
        } else {
            MatrixKind::Continuous
        };
        Self::with_kind(prompt_ids, model_ids, values, kind)
    }

    /// Build with an explicit kind; `Binary` rejects any value not in {0, 1}.
    pub fn with_kind(
        prompt_ids: Vec<String>,
        model_ids: Vec<String>,
        values: Vec<f64>,
        kind: MatrixKind,
    ) -> Result<Self> {
        let n = prompt_ids.len();
        let k = model_ids.len();
        if n < 2 {
            return Err(Error::TooFewRows { rows: n, min: 2 });
        }
        if k < 2 {
            return Err(Error::TooFewColumns { cols: k, min: 2 });
        }
        if values.len() != n * k {
            return Err(Error::RaggedRows {
                row: values.len() / k.max(1),
                expected: k,
                found: values.len() % k.max(1),
            });
        }
        check_unique(&prompt_ids)?;
        check_unique(&model_ids)?;
        for (idx, &v) in values.iter().enumerate() {
            let (row, col) = (idx / k, idx % k);
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange { row, col, value: v });
            }
            if kind == MatrixKind::Binary && !is_binary_value(v) {
                return Err(Error::NonBinaryValue { row, col, value: v });
            }
        }
        Ok(Self {
            prompt_ids,
            model_ids,
            values,
            kind,
        })
    }

    /// Build from per-prompt rows.
    pub fn from_rows(
        prompt_ids: Vec<String>,
        model_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = model_ids.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: k,
                    found: row.len(),
                });
            }
        }
        let values = rows.into_iter().flatten().collect();
        Self::new(prompt_ids, model_ids, values)
    }

    pub fn n_prompts(&self) -> usize {
        self.prompt_ids.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn prompt_ids(&self) -> &[String] {
        &self.prompt_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Flat row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Performance vector of prompt `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_models();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_models() + j]
    }

    /// Uniform-average score per model (the standard benchmark aggregate).
    pub fn column_means(&self) -> Vec<f64> {
        let (n, k) = (self.n_prompts(), self.n_models());
        let mut sums = alloc::vec![0.0; k];
        for i in 0..n {
            let row = self.row(i);
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        for s in &mut sums {
            *s /= n as f64;
        }
        sums
    }

    /// Same ids and kind, different values. Used by the permutation engine;
    /// values must already satisfy the matrix invariants (a permutation of
    /// valid values always does).
    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            prompt_ids: self.prompt_ids.clone(),
            model_ids: self.model_ids.clone(),
            values,
            kind: self.kind,
        }
    }
}

/// n×s matrix of prompt embeddings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EmbeddingMatrix {
    prompt_ids: Vec<String>,
    vectors: Vec<f64>,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn from_rows(prompt_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if prompt_ids.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: prompt_ids.len(),
                right: rows.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_unique(&prompt_ids)?;
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                row: 0,
                expected: 1,
                found: 0,
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: i,
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroVector { row: i });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateInput {
                    reason: "non-finite embedding value",
                });
            }
        }
        let vectors = rows.into_iter().flatten().collect();
        Ok(Self {
            prompt_ids,
            vectors,
            dim,
        })
    }

    pub fn n_prompts(&self) -> usize {
        self.prompt_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prompt_ids(&self) -> &[String] {
        &self.prompt_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

use crate::similarity::SimilarityMeasure;

/// Symmetric n×n matrix of pairwise prompt similarities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimilarityMatrix {
    prompt_ids: Vec<String>,
    values: Vec<f64>,
    measure: SimilarityMeasure,
}

impl SimilarityMatrix {
    /// Validates symmetry (exact), unit diagonal, and the measure's range.
    pub fn new(
        prompt_ids: Vec<String>,
        values: Vec<f64>,
        measure: SimilarityMeasure,
    ) -> Result<Self> {
        let n = prompt_ids.len();
        if values.len() != n * n {
            return Err(Error::RaggedRows {
                row: 0,
                expected: n * n,
                found: values.len(),
            });
        }
        check_unique(&prompt_ids)?;
        let (lo, hi) = measure.range();
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::DegenerateInput {
                    reason: "similarity diagonal must be 1",
                });
            }
            for j in 0..i {
                let v = values[i * n + j];
                if v != values[j * n + i] {
                    return Err(Error::DegenerateInput {
                        reason: "similarity matrix must be exactly symmetric",
                    });
                }
                if !v.is_finite() || v < lo || v > hi {
                    return Err(Error::ValueOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            prompt_ids,
            values,
            measure,
        })
    }

    pub fn n_prompts(&self) -> usize {
        self.prompt_ids.len()
    }

    pub fn prompt_ids(&self) -> &[String] {
        &self.prompt_ids
    }

    pub fn measure(&self) -> SimilarityMeasure {
        self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_prompts() + j]
    }
}

/// Nonnegative prompt weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WeightVector {
    weights: Vec<f64>,
    label: String,
}

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidWeights {
                reason: "weights must be finite and nonnegative",
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidWeights {
                reason: "weights must sum to 1",
            });
        }
        Ok(Self {
            weights,
            label: label.into(),
        })
    }

    /// The uniform weighting (the standard benchmark assumption).
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Self::new(alloc::vec![1.0 / n as f64; n], "uniform")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Distance between prompt vectors; cosine distance is the only measure the
/// analyses use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum DistanceMeasure {
    #[default]
    CosineDistance,
}

impl DistanceMeasure {
    /// `1 - cosine(u, v)`. Panics on mismatched lengths; undefined (returns
    /// an error) on zero vectors via the similarity module — this low-level
    /// helper assumes nonzero inputs.
    pub fn distance(self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        let mut dot = 0.0;
        let mut nu = 0.0;
        let mut nv = 0.0;
        for (&a, &b) in u.iter().zip(v) {
            dot += a * b;
            nu += a * a;
            nv += b * b;
        }
        1.0 - dot / (math::sqrt(nu) * math::sqrt(nv))
    }
}

/// Reorder `perf` and `emb` so their prompt ids agree positionally
/// (performance order wins). Prompts missing from either side are an error.
pub fn validate_alignment(
    perf: &PerformanceMatrix,
    emb: &EmbeddingMatrix,
) -> Result<(PerformanceMatrix, EmbeddingMatrix)> {
    let missing_in_embeddings: Vec<String> = perf
        .prompt_ids()
        .iter()
        .filter(|id| !emb.prompt_ids().contains(id))
        .cloned()
        .collect();
    let missing_in_performance: Vec<String> = emb
        .prompt_ids()
        .iter()
        .filter(|id| !perf.prompt_ids().contains(id))
        .cloned()
        .collect();
    if !missing_in_embeddings.is_empty() || !missing_in_performance.is_empty() {
        return Err(Error::MismatchedPrompts {
            missing_in_performance,
            missing_in_embeddings,
        });
    }
    let rows: Vec<Vec<f64>> = perf
        .prompt_ids()
        .iter()
        .map(|id| {
            let pos = emb.prompt_ids().iter().position(|e| e == id).unwrap();
            emb.row(pos).to_vec()
        })
        .collect();
    let emb_aligned = EmbeddingMatrix::from_rows(perf.prompt_ids().to_vec(), rows)?;
    Ok((perf.clone(), emb_aligned))
}
