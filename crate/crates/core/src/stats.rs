//! Permutation engine, summary statistics, permutation p-values, the
//! two-sample KS test, and Benjamini–Hochberg FDR adjustment.
//!
//! The central procedure is [`run_prompt_correlation_test`]: build the
//! observed similarity matrix, rebuild it for `B` column-permuted copies of
//! the performance matrix (each permutation shuffles every column
//! independently, preserving each model's score multiset), and compare the
//! observed off-diagonal value distribution against the permuted ones — via
//! summary statistics (permutation p-values) and via a KS test against the
//! values pooled across all permutations.
//!
//! Permutation `b` always uses the sub-seed `derive_index_seed(seed, b)`, so
//! results are independent of execution order and parallelism.
//!
//! On binary matrices with at most 64 models the engine never materializes
//! or sorts per-permutation value vectors: every possible similarity value is
//! enumerated up front ([`similarity::ValueGrid`]) and permutations are
//! reduced to histogram counts. The pooled KS sample in particular is never
//! held in memory (at paper scale it would be billions of values).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{PerformanceMatrix, SimilarityMatrix};
use crate::parallel;
use crate::seed::derive_index_seed;
use crate::similarity::{self, PackedRows, SimilarityMeasure, ValueGrid};
use crate::special::kolmogorov_survival;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How a distribution of similarity values is summarized for the
/// permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum SummaryStatistic {
    Mean,
    P75,
    P95,
}

impl SummaryStatistic {
    pub const ALL: [SummaryStatistic; 3] = [
        SummaryStatistic::Mean,
        SummaryStatistic::P75,
        SummaryStatistic::P95,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SummaryStatistic::Mean => "mean",
            SummaryStatistic::P75 => "p75",
            SummaryStatistic::P95 => "p95",
        }
    }

    fn fraction(self) -> Option<f64> {
        match self {
            SummaryStatistic::Mean => None,
            SummaryStatistic::P75 => Some(0.75),
            SummaryStatistic::P95 => Some(0.95),
        }
    }
}

/// Outcome of one permutation test (one measure, one statistic).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PermutationTestReport {
    pub measure: SimilarityMeasure,
    pub statistic: SummaryStatistic,
    pub observed: f64,
    /// Statistic of each permuted table, in permutation order.
    pub permuted: Vec<f64>,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// Two-sample Kolmogorov–Smirnov test result.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KsReport {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value (effective size `mn/(m+n)`), floored at the
    /// smallest positive normal float.
    pub p_value: f64,
    pub m: usize,
    pub n: usize,
    /// Set when `min(m, n) < 50`: the asymptotic p-value is a rough
    /// approximation at such sizes.
    pub approximate: bool,
}

/// All permutation-test outputs for one similarity measure.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CorrelationTestReport {
    pub measure: SimilarityMeasure,
    pub permutation_reports: Vec<PermutationTestReport>,
    /// Observed off-diagonal values vs. the values pooled across all
    /// permuted tables.
    pub ks: KsReport,
    pub permutations: usize,
    pub seed: u64,
}

fn to_columns(perf: &PerformanceMatrix) -> Vec<Vec<f64>> {
    let (n, k) = (perf.n_prompts(), perf.n_models());
    (0..k)
        .map(|j| (0..n).map(|i| perf.value(i, j)).collect())
        .collect()
}

fn shuffle_columns(columns: &mut [Vec<f64>], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for col in columns.iter_mut() {
        col.shuffle(&mut rng);
    }
}

fn columns_to_row_major(columns: &[Vec<f64>]) -> Vec<f64> {
    let k = columns.len();
    let n = columns[0].len();
    let mut values = vec![0.0; n * k];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[i * k + j] = v;
        }
    }
    values
}

/// Independently shuffle every column of the matrix (uniform permutations,
/// deterministic in `seed`). Column multisets — hence every model's overall
/// score — are preserved exactly.
pub fn permute_matrix(perf: &PerformanceMatrix, seed: u64) -> PerformanceMatrix {
    let mut columns = to_columns(perf);
    shuffle_columns(&mut columns, seed);
    perf.with_values_unchecked(columns_to_row_major(&columns))
}

/// The `n(n-1)/2` strictly-upper-triangle values in row-major order.
pub fn offdiagonal_values(t: &SimilarityMatrix) -> Vec<f64> {
    let n = t.n_prompts();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(t.value(i, j));
        }
    }
    out
}

/// Percentile by linear interpolation between order statistics: the value at
/// zero-based rank position `fraction * (len - 1)` of the sorted input.
pub fn percentile_of_sorted(sorted: &[f64], fraction: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pos = fraction * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Mean or interpolated percentile of the values.
pub fn summary_statistic(values: &[f64], kind: SummaryStatistic) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    match kind.fraction() {
        None => Ok(values.iter().sum::<f64>() / values.len() as f64),
        Some(q) => {
            let mut sorted = values.to_vec();
            sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            percentile_of_sorted(&sorted, q)
        }
    }
}

/// Add-one permutation p-value `(#{permuted >= observed} + 1) / (B + 1)`.
/// Ties count against significance; the result is always in
/// `[1/(B+1), 1]`.
pub fn permutation_pvalue(observed: f64, permuted: &[f64]) -> f64 {
    assert!(!permuted.is_empty(), "need at least one permuted statistic");
    let geq = permuted.iter().filter(|&&v| v >= observed).count();
    (geq + 1) as f64 / (permuted.len() + 1) as f64
}

fn ks_p_value(d: f64, m: usize, n: usize) -> f64 {
    let m_f = m as f64;
    let n_f = n as f64;
    let effective = m_f * n_f / (m_f + n_f);
    kolmogorov_survival(math::sqrt(effective) * d).max(f64::MIN_POSITIVE)
}

/// Two-sample KS test: `D = sup_x |ECDF_a(x) - ECDF_b(x)|` with the
/// asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a_sorted = a.to_vec();
    let mut b_sorted = b.to_vec();
    a_sorted.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    b_sorted.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());

    let (m, n) = (a_sorted.len(), b_sorted.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < m || j < n {
        // Next distinct merged value; consume every duplicate on both sides
        // before evaluating, so ties contribute their full ECDF jumps.
        let x = match (a_sorted.get(i), b_sorted.get(j)) {
            (Some(&av), Some(&bv)) => av.min(bv),
            (Some(&av), None) => av,
            (None, Some(&bv)) => bv,
            (None, None) => break,
        };
        while i < m && a_sorted[i] == x {
            i += 1;
        }
        while j < n && b_sorted[j] == x {
            j += 1;
        }
        let diff = (i as f64 / m as f64 - j as f64 / n as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    Ok(KsReport {
        statistic: d,
        p_value: ks_p_value(d, m, n),
        m,
        n,
        approximate: m.min(n) < 50,
    })
}

/// Benjamini–Hochberg step-up adjustment. Input order is preserved; outputs
/// are capped at 1.
pub fn bh_fdr(pvalues: &[f64]) -> Result<Vec<f64>> {
    for (index, &p) in pvalues.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange { index, value: p });
        }
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].partial_cmp(&pvalues[b]).unwrap());
    let mut adjusted = vec![0.0; m];
    let mut running_min = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        let q = (pvalues[idx] * m as f64 / (rank + 1) as f64).min(1.0);
        running_min = running_min.min(q);
        adjusted[idx] = running_min;
    }
    Ok(adjusted)
}

// ---------------------------------------------------------------------------
// Permutation engine
// ---------------------------------------------------------------------------

/// Permutations processed per unit of (potentially parallel) work. Fixed so
/// that chunk boundaries — and therefore merge order — never depend on the
/// thread count.
const PERM_CHUNK: usize = 16;

struct HistogramEngine {
    grid: ValueGrid,
    observed: Vec<u64>,
    total: u64,
}

impl HistogramEngine {
    fn count(grid: &ValueGrid, packed: &PackedRows, measure: SimilarityMeasure) -> Vec<u64> {
        let n = packed.masks.len();
        let mut counts = vec![0u64; grid.group_count()];
        for i in 0..n {
            for j in (i + 1)..n {
                let key = packed.pair_key(i, j, measure);
                counts[grid.key_to_group[key as usize] as usize] += 1;
            }
        }
        counts
    }

    fn mean(&self, counts: &[u64]) -> f64 {
        let mut sum = 0.0;
        for (v, &c) in self.grid.values.iter().zip(counts) {
            sum += v * c as f64;
        }
        sum / self.total as f64
    }

    /// Value at zero-based order-statistic index `idx` of the expansion.
    fn order_stat(&self, counts: &[u64], idx: u64) -> f64 {
        let mut cum = 0u64;
        for (v, &c) in self.grid.values.iter().zip(counts) {
            cum += c;
            if cum > idx {
                return *v;
            }
        }
        *self.grid.values.last().unwrap()
    }

    fn statistic(&self, counts: &[u64], kind: SummaryStatistic) -> f64 {
        match kind.fraction() {
            None => self.mean(counts),
            Some(q) => {
                let pos = q * (self.total - 1) as f64;
                let lo = math::floor(pos) as u64;
                let hi = (lo + 1).min(self.total - 1);
                let frac = pos - lo as f64;
                let v_lo = self.order_stat(counts, lo);
                let v_hi = self.order_stat(counts, hi);
                v_lo + frac * (v_hi - v_lo)
            }
        }
    }

    /// KS distance between the observed histogram and a pooled histogram
    /// over the same value grid.
    fn ks_statistic(&self, pooled: &[u64], pooled_total: u64) -> f64 {
        let m = self.total as f64;
        let n = pooled_total as f64;
        let mut cum_obs = 0u64;
        let mut cum_pool = 0u64;
        let mut d: f64 = 0.0;
        for (idx, &c_obs) in self.observed.iter().enumerate() {
            cum_obs += c_obs;
            cum_pool += pooled[idx];
            let diff = (cum_obs as f64 / m - cum_pool as f64 / n).abs();
            if diff > d {
                d = diff;
            }
        }
        d
    }
}

struct DenseEngine {
    /// Observed values in pair order (for the mean) and sorted (for
    /// percentiles and the pooled-KS breakpoints).
    observed_raw: Vec<f64>,
    observed_sorted: Vec<f64>,
}

impl DenseEngine {
    fn values(rows: &[f64], n: usize, k: usize, measure: SimilarityMeasure) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(similarity::matrix_pair_value(
                    &rows[i * k..(i + 1) * k],
                    &rows[j * k..(j + 1) * k],
                    measure,
                ));
            }
        }
        out
    }

    fn statistic_of(raw: &[f64], sorted: &[f64], kind: SummaryStatistic) -> f64 {
        match kind.fraction() {
            None => raw.iter().sum::<f64>() / raw.len() as f64,
            Some(q) => percentile_of_sorted(sorted, q).unwrap(),
        }
    }

    /// Merge a sorted permuted sample into per-breakpoint counts:
    /// `le[i] += #{v <= observed_sorted[i]}`, `lt[i] += #{v < ...}`.
    fn accumulate_counts(&self, perm_sorted: &[f64], le: &mut [u64], lt: &mut [u64]) {
        let mut p_lt = 0usize;
        let mut p_le = 0usize;
        for (i, &x) in self.observed_sorted.iter().enumerate() {
            while p_lt < perm_sorted.len() && perm_sorted[p_lt] < x {
                p_lt += 1;
            }
            while p_le < perm_sorted.len() && perm_sorted[p_le] <= x {
                p_le += 1;
            }
            lt[i] += p_lt as u64;
            le[i] += p_le as u64;
        }
    }

    /// Exact `sup |ECDF_obs - ECDF_pool|` from the accumulated counts. Both
    /// ECDFs jump atomically at a shared value, so candidates are evaluated
    /// once per run of duplicated observed values (post-jump pair and
    /// pre-jump pair); the sup over a gap between observed breakpoints is
    /// attained at one of the adjacent evaluations.
    fn ks_statistic(&self, le: &[u64], lt: &[u64], pooled_total: u64) -> f64 {
        let len = self.observed_sorted.len();
        let m = len as f64;
        let n = pooled_total as f64;
        let mut d: f64 = 0.0;
        let mut start = 0;
        while start < len {
            let mut end = start;
            while end + 1 < len && self.observed_sorted[end + 1] == self.observed_sorted[start] {
                end += 1;
            }
            let right = ((end + 1) as f64 / m - le[start] as f64 / n).abs();
            let left = (start as f64 / m - lt[start] as f64 / n).abs();
            d = d.max(right).max(left);
            start = end + 1;
        }
        d
    }
}

enum MeasureEngine {
    Histogram(HistogramEngine),
    Dense(DenseEngine),
}

enum MeasureAccumulator {
    /// Pooled histogram counts.
    Histogram(Vec<u64>),
    /// Pooled `le`/`lt` counts at the observed breakpoints.
    Dense { le: Vec<u64>, lt: Vec<u64> },
}

/// Full §-style prompt-correlation procedure for each requested measure:
/// permutation tests for each summary statistic plus a KS test of the
/// observed off-diagonal values against the values pooled across all `B`
/// permutations.
pub fn run_prompt_correlation_test(
    perf: &PerformanceMatrix,
    measures: &[SimilarityMeasure],
    statistics: &[SummaryStatistic],
    permutations: usize,
    seed: u64,
) -> Result<Vec<CorrelationTestReport>> {
    if permutations == 0 {
        return Err(Error::InvalidConfig {
            reason: "permutation count must be at least 1".into(),
        });
    }
    if measures.is_empty() || statistics.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &m in measures {
        if !m.supports(perf.kind()) {
            return Err(Error::NonBinaryInput);
        }
    }

    let n = perf.n_prompts();
    let k = perf.n_models();
    let pair_count = (n * (n - 1) / 2) as u64;
    let packed = PackedRows::from_matrix(perf);
    let base_columns = to_columns(perf);

    // Observed side of each measure.
    let engines: Vec<MeasureEngine> = measures
        .iter()
        .map(|&measure| match &packed {
            Some(p) => {
                let grid = ValueGrid::new(k as u32, measure);
                let observed = HistogramEngine::count(&grid, p, measure);
                MeasureEngine::Histogram(HistogramEngine {
                    grid,
                    observed,
                    total: pair_count,
                })
            }
            None => {
                let raw = DenseEngine::values(perf.values(), n, k, measure);
                let mut sorted = raw.clone();
                sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                MeasureEngine::Dense(DenseEngine {
                    observed_raw: raw,
                    observed_sorted: sorted,
                })
            }
        })
        .collect();

    // One chunk = PERM_CHUNK permutations; each permutation derives its seed
    // from its global index, so chunking is invisible in the output.
    let chunk_count = permutations.div_ceil(PERM_CHUNK);
    type ChunkResult = (Vec<Vec<f64>>, Vec<MeasureAccumulator>);
    let chunks: Vec<ChunkResult> = parallel::map_indexed(chunk_count, |chunk_idx| {
        let start = chunk_idx * PERM_CHUNK;
        let end = (start + PERM_CHUNK).min(permutations);
        // Per-measure, per-statistic values for this chunk's permutations.
        let mut stat_values: Vec<Vec<f64>> = (0..measures.len() * statistics.len())
            .map(|_| Vec::with_capacity(end - start))
            .collect();
        let mut accumulators: Vec<MeasureAccumulator> = engines
            .iter()
            .map(|engine| match engine {
                MeasureEngine::Histogram(h) => {
                    MeasureAccumulator::Histogram(vec![0u64; h.grid.group_count()])
                }
                MeasureEngine::Dense(d) => MeasureAccumulator::Dense {
                    le: vec![0u64; d.observed_sorted.len()],
                    lt: vec![0u64; d.observed_sorted.len()],
                },
            })
            .collect();

        let mut columns = base_columns.clone();
        for b in start..end {
            columns.clone_from(&base_columns);
            shuffle_columns(&mut columns, derive_index_seed(seed, b as u64));
            let perm_packed = packed.as_ref().map(|_| PackedRows::from_columns(&columns));
            let perm_rows = if packed.is_none() {
                columns_to_row_major(&columns)
            } else {
                Vec::new()
            };

            for (mi, engine) in engines.iter().enumerate() {
                match (engine, &mut accumulators[mi]) {
                    (MeasureEngine::Histogram(h), MeasureAccumulator::Histogram(pooled)) => {
                        let counts = HistogramEngine::count(
                            &h.grid,
                            perm_packed.as_ref().unwrap(),
                            measures[mi],
                        );
                        for (si, &stat) in statistics.iter().enumerate() {
                            stat_values[mi * statistics.len() + si].push(h.statistic(&counts, stat));
                        }
                        for (p, c) in pooled.iter_mut().zip(&counts) {
                            *p += c;
                        }
                    }
                    (MeasureEngine::Dense(d), MeasureAccumulator::Dense { le, lt }) => {
                        let raw = DenseEngine::values(&perm_rows, n, k, measures[mi]);
                        let mut sorted = raw.clone();
                        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                        for (si, &stat) in statistics.iter().enumerate() {
                            stat_values[mi * statistics.len() + si]
                                .push(DenseEngine::statistic_of(&raw, &sorted, stat));
                        }
                        d.accumulate_counts(&sorted, le, lt);
                    }
                    _ => unreachable!("engine/accumulator kinds always match"),
                }
            }
        }
        (stat_values, accumulators)
    });

    // Merge chunks in index order.
    let mut merged_stats: Vec<Vec<f64>> = vec![Vec::new(); measures.len() * statistics.len()];
    let mut merged_acc: Vec<Option<MeasureAccumulator>> =
        measures.iter().map(|_| None).collect();
    for (stat_values, accumulators) in chunks {
        for (slot, values) in merged_stats.iter_mut().zip(stat_values) {
            slot.extend(values);
        }
        for (slot, acc) in merged_acc.iter_mut().zip(accumulators) {
            match (slot.as_mut(), acc) {
                (None, acc) => *slot = Some(acc),
                (Some(MeasureAccumulator::Histogram(total)), MeasureAccumulator::Histogram(part)) => {
                    for (t, p) in total.iter_mut().zip(part) {
                        *t += p;
                    }
                }
                (
                    Some(MeasureAccumulator::Dense { le, lt }),
                    MeasureAccumulator::Dense { le: ple, lt: plt },
                ) => {
                    for (t, p) in le.iter_mut().zip(ple) {
                        *t += p;
                    }
                    for (t, p) in lt.iter_mut().zip(plt) {
                        *t += p;
                    }
                }
                _ => unreachable!("accumulator kinds are per-measure constants"),
            }
        }
    }

    let pooled_total = pair_count * permutations as u64;
    let reports = measures
        .iter()
        .enumerate()
        .map(|(mi, &measure)| {
            let engine = &engines[mi];
            let permutation_reports = statistics
                .iter()
                .enumerate()
                .map(|(si, &stat)| {
                    let observed = match engine {
                        MeasureEngine::Histogram(h) => h.statistic(&h.observed, stat),
                        MeasureEngine::Dense(d) => {
                            DenseEngine::statistic_of(&d.observed_raw, &d.observed_sorted, stat)
                        }
                    };
                    let permuted = merged_stats[mi * statistics.len() + si].clone();
                    let p_value = permutation_pvalue(observed, &permuted);
                    PermutationTestReport {
                        measure,
                        statistic: stat,
                        observed,
                        permuted,
                        p_value,
                        permutations,
                        seed,
                    }
                })
                .collect();
            let d = match (engine, merged_acc[mi].as_ref().unwrap()) {
                (MeasureEngine::Histogram(h), MeasureAccumulator::Histogram(pooled)) => {
                    h.ks_statistic(pooled, pooled_total)
                }
                (MeasureEngine::Dense(dense), MeasureAccumulator::Dense { le, lt }) => {
                    dense.ks_statistic(le, lt, pooled_total)
                }
                _ => unreachable!(),
            };
            let m_size = pair_count as usize;
            let n_size = pooled_total as usize;
            CorrelationTestReport {
                measure,
                permutation_reports,
                ks: KsReport {
                    statistic: d,
                    p_value: ks_p_value(d, m_size, n_size),
                    m: m_size,
                    n: n_size,
                    approximate: m_size.min(n_size) < 50,
                },
                permutations,
                seed,
            }
        })
        .collect();
    Ok(reports)
}
