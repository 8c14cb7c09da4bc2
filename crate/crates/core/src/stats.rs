//! Resampling statistics: the ARSD convergence diagnostic, empirical
//! p-values, Westfall-Young adjusted critical values, and per-sample
//! statistic extraction.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, SequenceDataset, TransactionalDataset};
use crate::error::{Error, Result};
use crate::mining::{
    mine_frequent_itemsets, mine_frequent_sequences, pattern_length_histogram, sequence_contains,
    SupportCounter, Threshold,
};
use crate::samplers::{ChainOptions, MatrixChain, SamplerId, SequenceChain};

/// Which tail counts as "more extreme" for a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Greater,
    Less,
}

impl Direction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Direction::Greater),
            "less" => Ok(Direction::Less),
            other => Err(Error::InvalidParameter(format!("unknown direction '{other}'"))),
        }
    }

    fn is_extreme(&self, sample: f64, observed: f64) -> bool {
        match self {
            Direction::Greater => sample >= observed,
            Direction::Less => sample <= observed,
        }
    }
}

/// Empirical p-value report: `p_hat = (1 + count_extreme) / (1 + T)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvalueReport {
    pub observed: f64,
    pub num_samples: usize,
    pub count_extreme: usize,
    pub p_hat: f64,
}

pub fn empirical_pvalue(observed: f64, sample_stats: &[f64], direction: Direction) -> PvalueReport {
    let count_extreme =
        sample_stats.iter().filter(|&&s| direction.is_extreme(s, observed)).count();
    PvalueReport {
        observed,
        num_samples: sample_stats.len(),
        count_extreme,
        p_hat: (1 + count_extreme) as f64 / (1 + sample_stats.len()) as f64,
    }
}

/// Largest critical value alpha such that the fraction of datasets whose
/// minimum p-value is at most alpha stays within the FWER target. Reported
/// as an attained p-value grid point: the largest minimum p-value strictly
/// below the `(floor(delta * T') + 1)`-th smallest one, or a value below
/// the smallest when the budget admits none.
pub fn wy_adjusted_critical_value(min_pvalues: &[f64], delta: f64) -> Result<f64> {
    if min_pvalues.is_empty() {
        return Err(Error::InvalidParameter("need at least one minimum p-value".to_string()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    if min_pvalues.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidParameter("min p-values must lie in (0, 1]".to_string()));
    }
    let mut sorted = min_pvalues.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let budget = (delta * sorted.len() as f64).floor() as usize;
    let boundary = sorted[budget.min(sorted.len() - 1)];
    match sorted.iter().rev().find(|&&p| p < boundary) {
        Some(&alpha) if budget >= 1 => Ok(alpha),
        _ => Ok(prev_f64(sorted[0])),
    }
}

fn prev_f64(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Minimum per-hypothesis empirical p-value for each outer dataset, with the
/// inner estimates drawn from a shared pool of sampled statistics.
/// `outer[i][h]` and `inner[j][h]` hold the statistic of hypothesis `h` on
/// the i-th outer and j-th inner dataset.
pub fn wy_min_pvalues(outer: &[Vec<f64>], inner: &[Vec<f64>], direction: Direction) -> Vec<f64> {
    outer
        .iter()
        .map(|stats| {
            stats
                .iter()
                .enumerate()
                .map(|(h, &observed)| {
                    let column: Vec<f64> = inner.iter().map(|row| row[h]).collect();
                    empirical_pvalue(observed, &column, direction).p_hat
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Average Relative Support Difference of the observed frequent itemsets in
/// a sampled dataset.
pub fn arsd(observed_fis: &[(Vec<ItemId>, u64)], sample: &TransactionalDataset) -> Result<f64> {
    if observed_fis.is_empty() {
        return Err(Error::InvalidParameter("ARSD needs a non-empty itemset list".to_string()));
    }
    let counter = SupportCounter::new(sample);
    let mut total = 0.0f64;
    for (items, observed_support) in observed_fis {
        debug_assert!(*observed_support > 0);
        let sampled = counter.support(items) as f64;
        total += (*observed_support as f64 - sampled).abs() / *observed_support as f64;
    }
    Ok(total / observed_fis.len() as f64)
}

fn arsd_sequences(
    observed: &[(Vec<Vec<ItemId>>, u64)],
    sample: &SequenceDataset,
) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::InvalidParameter("ARSD needs a non-empty pattern list".to_string()));
    }
    let resolved: Vec<Vec<&[ItemId]>> = sample
        .sequences()
        .iter()
        .map(|s| s.iter().map(|&id| sample.dictionary().content(id)).collect())
        .collect();
    let mut total = 0.0f64;
    for (pattern, observed_support) in observed {
        let sampled =
            resolved.iter().filter(|s| sequence_contains(s, pattern)).count() as f64;
        total += (*observed_support as f64 - sampled).abs() / *observed_support as f64;
    }
    Ok(total / observed.len() as f64)
}

/// One checkpoint of a convergence run: the chain state after
/// `floor(k * w)` steps.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub k: f64,
    pub steps: u64,
    pub arsd: f64,
    pub seconds: f64,
}

/// The step-multiplier grid used for convergence studies: 0 to just under 2
/// in steps of 0.15, then the integers up to 6.
pub fn default_k_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..14).map(|i| i as f64 * 0.15).collect();
    grid.extend((2..=6).map(|k| k as f64));
    grid
}

/// Runs one continuous chain, recording the ARSD of the observed frequent
/// itemsets every time the step count crosses `floor(k * w)`.
pub fn convergence_trace(
    observed: &TransactionalDataset,
    sampler: SamplerId,
    k_grid: &[f64],
    theta: Threshold,
    seed: u64,
    options: &ChainOptions,
) -> Result<Vec<ConvergencePoint>> {
    if k_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("k grid must be non-decreasing".to_string()));
    }
    let observed_fis: Vec<(Vec<ItemId>, u64)> = mine_frequent_itemsets(observed, theta)?
        .into_iter()
        .map(|p| (p.items, p.support))
        .collect();
    if observed_fis.is_empty() {
        return Err(Error::InvalidParameter(
            "no frequent itemsets at this threshold".to_string(),
        ));
    }
    let w = crate::samplers::chain_weight_transactional(observed);
    let mut chain = MatrixChain::new(observed, sampler, seed, options.clone())?;
    let start = Instant::now();
    let mut trace = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let target = (k * w as f64).floor() as u64;
        while chain.steps() < target {
            chain.step()?;
        }
        trace.push(ConvergencePoint {
            k,
            steps: chain.steps(),
            arsd: arsd(&observed_fis, &chain.dataset())?,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(trace)
}

/// Sequence-dataset counterpart of [`convergence_trace`], with ARSD over the
/// observed frequent sequential patterns and `w = |E|`.
pub fn convergence_trace_sequences(
    observed: &SequenceDataset,
    sampler: SamplerId,
    k_grid: &[f64],
    theta: f64,
    seed: u64,
    options: &ChainOptions,
) -> Result<Vec<ConvergencePoint>> {
    if k_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("k grid must be non-decreasing".to_string()));
    }
    let observed_patterns: Vec<(Vec<Vec<ItemId>>, u64)> =
        mine_frequent_sequences(observed, theta)?
            .into_iter()
            .map(|p| (p.itemsets, p.support))
            .collect();
    if observed_patterns.is_empty() {
        return Err(Error::InvalidParameter(
            "no frequent sequential patterns at this threshold".to_string(),
        ));
    }
    let w = crate::samplers::chain_weight_sequence(observed);
    let mut chain = SequenceChain::new(observed, sampler, seed, options.clone())?;
    let start = Instant::now();
    let mut trace = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let target = (k * w as f64).floor() as u64;
        while chain.steps() < target {
            chain.step()?;
        }
        trace.push(ConvergencePoint {
            k,
            steps: chain.steps(),
            arsd: arsd_sequences(&observed_patterns, &chain.dataset())?,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(trace)
}

/// A statistic extracted from one dataset.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum StatisticValue {
    Scalar(f64),
    Histogram(BTreeMap<usize, u64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct StatisticResult {
    pub statistic: String,
    pub sample_index: usize,
    pub value: StatisticValue,
}

/// Pluggable per-dataset statistic extraction.
pub trait Statistic: Send + Sync {
    fn id(&self) -> &str;
    fn compute(&self, dataset: &TransactionalDataset) -> Result<StatisticValue>;
}

/// Number of frequent itemsets at a threshold.
pub struct FiCount(pub Threshold);

impl Statistic for FiCount {
    fn id(&self) -> &str {
        "fi-count"
    }

    fn compute(&self, dataset: &TransactionalDataset) -> Result<StatisticValue> {
        Ok(StatisticValue::Scalar(mine_frequent_itemsets(dataset, self.0)?.len() as f64))
    }
}

/// Frequent-itemset counts per pattern length.
pub struct FiHistogram(pub Threshold);

impl Statistic for FiHistogram {
    fn id(&self) -> &str {
        "fi-histogram"
    }

    fn compute(&self, dataset: &TransactionalDataset) -> Result<StatisticValue> {
        let patterns = mine_frequent_itemsets(dataset, self.0)?;
        Ok(StatisticValue::Histogram(pattern_length_histogram(&patterns)))
    }
}

/// Supports of a fixed list of itemsets.
pub struct SupportVector(pub Vec<Vec<ItemId>>);

impl Statistic for SupportVector {
    fn id(&self) -> &str {
        "support-vector"
    }

    fn compute(&self, dataset: &TransactionalDataset) -> Result<StatisticValue> {
        let counter = SupportCounter::new(dataset);
        let hist: BTreeMap<usize, u64> =
            self.0.iter().enumerate().map(|(i, s)| (i, counter.support(s))).collect();
        Ok(StatisticValue::Histogram(hist))
    }
}

/// CSV rows `(sample_index, statistic, value)`; histogram entries flatten to
/// `statistic:key`.
pub fn statistics_to_csv(results: &[StatisticResult]) -> String {
    let mut out = String::from("sample_index,statistic,value\n");
    for r in results {
        match &r.value {
            StatisticValue::Scalar(v) => {
                out.push_str(&format!("{},{},{}\n", r.sample_index, r.statistic, v));
            }
            StatisticValue::Histogram(h) => {
                for (k, v) in h {
                    out.push_str(&format!("{},{}:{},{}\n", r.sample_index, r.statistic, k, v));
                }
            }
        }
    }
    out
}
