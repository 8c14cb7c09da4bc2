//! Frequent pattern mining: itemsets over transactional datasets (depth-first
//! tidset intersection on bit vectors) and sequential patterns over sequence
//! datasets (canonical DFS with containment counting).
//!
//! Output order is canonical — by length, then lexicographically — so that
//! downstream statistics are reproducible.

use std::collections::BTreeMap;

use crate::dataset::{ItemId, SequenceDataset, TransactionalDataset};
use crate::error::{Error, Result};

/// A frequent itemset with its exact support count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub items: Vec<ItemId>,
    pub support: u64,
}

/// A frequent sequential pattern: ordered itemsets with a seq-transaction
/// support count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePattern {
    pub itemsets: Vec<Vec<ItemId>>,
    pub support: u64,
}

/// Minimum support, either an absolute count or a fraction of `|D|`.
/// Fractions convert with ceiling, matching the `support >= theta`
/// convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Absolute(u64),
    Fraction(f64),
}

impl Threshold {
    pub fn to_absolute(self, num_transactions: usize) -> Result<u64> {
        match self {
            Threshold::Absolute(0) => {
                Err(Error::InvalidParameter("threshold must be positive".to_string()))
            }
            Threshold::Absolute(t) if t as usize > num_transactions => Err(Error::InvalidParameter(
                format!("threshold {t} exceeds dataset size {num_transactions}"),
            )),
            Threshold::Absolute(t) => Ok(t),
            Threshold::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(((f * num_transactions as f64).ceil() as u64).max(1))
            }
            Threshold::Fraction(f) => Err(Error::InvalidParameter(format!(
                "fractional threshold {f} outside (0, 1]"
            ))),
        }
    }

    /// `--theta` convention: values in (0, 1] are fractions; larger values
    /// must be integral absolute counts.
    pub fn from_cli_value(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta <= 1.0 {
            Ok(Threshold::Fraction(theta))
        } else if theta > 1.0 && theta.fract() == 0.0 {
            Ok(Threshold::Absolute(theta as u64))
        } else {
            Err(Error::InvalidParameter(format!(
                "theta {theta} is neither a fraction in (0, 1] nor an integer count"
            )))
        }
    }
}

/// Per-item transaction bitsets; supports exact recounting of arbitrary
/// itemsets in one intersection pass.
pub struct SupportCounter {
    tidsets: Vec<Vec<u64>>,
    words: usize,
    num_transactions: usize,
}

impl SupportCounter {
    pub fn new(dataset: &TransactionalDataset) -> Self {
        let words = dataset.len().div_ceil(64);
        let mut tidsets = vec![vec![0u64; words]; dataset.num_items()];
        for (tid, t) in dataset.transactions().iter().enumerate() {
            for &i in t {
                tidsets[i as usize][tid / 64] |= 1u64 << (tid % 64);
            }
        }
        Self { tidsets, words, num_transactions: dataset.len() }
    }

    pub fn num_transactions(&self) -> usize {
        self.num_transactions
    }

    /// `|{t in D : itemset subset of t}|`.
    pub fn support(&self, itemset: &[ItemId]) -> u64 {
        match itemset {
            [] => self.num_transactions as u64,
            [single] => popcount(&self.tidsets[*single as usize]),
            [first, rest @ ..] => {
                let mut acc = self.tidsets[*first as usize].clone();
                for &i in rest {
                    let other = &self.tidsets[i as usize];
                    for w in 0..self.words {
                        acc[w] &= other[w];
                    }
                }
                popcount(&acc)
            }
        }
    }
}

fn popcount(words: &[u64]) -> u64 {
    words.iter().map(|w| w.count_ones() as u64).sum()
}

/// Support of a single itemset by direct recount.
pub fn support(dataset: &TransactionalDataset, itemset: &[ItemId]) -> u64 {
    dataset
        .transactions()
        .iter()
        .filter(|t| itemset.iter().all(|i| t.binary_search(i).is_ok()))
        .count() as u64
}

/// All itemsets with support at least the threshold, each with its exact
/// support, in canonical order.
pub fn mine_frequent_itemsets(
    dataset: &TransactionalDataset,
    threshold: Threshold,
) -> Result<Vec<Pattern>> {
    let min_support = threshold.to_absolute(dataset.len())?;
    let counter = SupportCounter::new(dataset);
    let frequent_items: Vec<(ItemId, u64, &Vec<u64>)> = (0..dataset.num_items() as u32)
        .filter_map(|i| {
            let s = popcount(&counter.tidsets[i as usize]);
            (s >= min_support).then_some((i, s, &counter.tidsets[i as usize]))
        })
        .collect();

    let mut out = Vec::new();
    for (idx, &(item, sup, tidset)) in frequent_items.iter().enumerate() {
        out.push(Pattern { items: vec![item], support: sup });
        extend(
            &mut vec![item],
            tidset,
            &frequent_items[idx + 1..],
            min_support,
            &mut out,
        );
    }
    out.sort_unstable_by(|a, b| (a.items.len(), &a.items).cmp(&(b.items.len(), &b.items)));
    Ok(out)
}

fn extend(
    prefix: &mut Vec<ItemId>,
    prefix_tids: &[u64],
    candidates: &[(ItemId, u64, &Vec<u64>)],
    min_support: u64,
    out: &mut Vec<Pattern>,
) {
    for (idx, &(item, _, tidset)) in candidates.iter().enumerate() {
        let mut joined = prefix_tids.to_vec();
        for w in 0..joined.len() {
            joined[w] &= tidset[w];
        }
        let sup = popcount(&joined);
        if sup < min_support {
            continue;
        }
        prefix.push(item);
        out.push(Pattern { items: prefix.clone(), support: sup });
        extend(prefix, &joined, &candidates[idx + 1..], min_support, out);
        prefix.pop();
    }
}

/// Histogram of pattern lengths (number of items for itemsets).
pub fn pattern_length_histogram(patterns: &[Pattern]) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for p in patterns {
        *hist.entry(p.items.len()).or_insert(0) += 1;
    }
    hist
}

/// Histogram of sequential pattern lengths (number of itemsets).
pub fn sequence_length_histogram(patterns: &[SequencePattern]) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for p in patterns {
        *hist.entry(p.itemsets.len()).or_insert(0) += 1;
    }
    hist
}

/// Does the pattern occur in the sequence? `<A_1..A_k>` occurs in
/// `<B_1..B_m>` iff there are positions `i_1 < ... < i_k` with
/// `A_j subset of B_{i_j}`. Greedy earliest embedding decides existence.
pub fn sequence_contains(sequence: &[&[ItemId]], pattern: &[Vec<ItemId>]) -> bool {
    let mut pos = 0usize;
    for a in pattern {
        loop {
            if pos >= sequence.len() {
                return false;
            }
            let b = sequence[pos];
            pos += 1;
            if a.iter().all(|i| b.binary_search(i).is_ok()) {
                break;
            }
        }
    }
    true
}

/// All sequential patterns with support at least `ceil(theta * |D|)`;
/// support counts seq-transactions, not occurrences. Patterns are grown in
/// canonical form (items ascending within an itemset), so each is
/// enumerated exactly once, and anti-monotonicity prunes the search.
pub fn mine_frequent_sequences(
    dataset: &SequenceDataset,
    theta: f64,
) -> Result<Vec<SequencePattern>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional threshold {theta} outside (0, 1]"
        )));
    }
    let min_support = ((theta * dataset.len() as f64).ceil() as u64).max(1);
    let resolved: Vec<Vec<&[ItemId]>> = dataset
        .sequences()
        .iter()
        .map(|s| s.iter().map(|&id| dataset.dictionary().content(id)).collect())
        .collect();

    // Frequent single items (by seq-transaction support).
    let mut item_support: BTreeMap<ItemId, u64> = BTreeMap::new();
    for seq in &resolved {
        let mut seen: Vec<ItemId> = seq.iter().flat_map(|b| b.iter().copied()).collect();
        seen.sort_unstable();
        seen.dedup();
        for i in seen {
            *item_support.entry(i).or_insert(0) += 1;
        }
    }
    let frequent_items: Vec<ItemId> =
        item_support.iter().filter(|(_, &s)| s >= min_support).map(|(&i, _)| i).collect();

    let mut out: Vec<SequencePattern> = Vec::new();
    let mut pattern: Vec<Vec<ItemId>> = Vec::new();
    let all_tids: Vec<u32> = (0..resolved.len() as u32).collect();
    grow_sequence(&resolved, &frequent_items, min_support, &mut pattern, &all_tids, &mut out);
    out.sort_unstable_by(|a, b| {
        (a.itemsets.len(), &a.itemsets).cmp(&(b.itemsets.len(), &b.itemsets))
    });
    Ok(out)
}

fn grow_sequence(
    db: &[Vec<&[ItemId]>],
    frequent_items: &[ItemId],
    min_support: u64,
    pattern: &mut Vec<Vec<ItemId>>,
    parent_tids: &[u32],
    out: &mut Vec<SequencePattern>,
) {
    // s-extensions: a new singleton itemset after the current pattern.
    for &item in frequent_items {
        pattern.push(vec![item]);
        try_extension(db, frequent_items, min_support, pattern, parent_tids, out);
        pattern.pop();
    }
    // i-extensions: enlarge the last itemset with a larger item.
    if let Some(last) = pattern.last().cloned() {
        let floor = *last.last().unwrap();
        for &item in frequent_items.iter().filter(|&&i| i > floor) {
            pattern.last_mut().unwrap().push(item);
            try_extension(db, frequent_items, min_support, pattern, parent_tids, out);
            pattern.last_mut().unwrap().pop();
        }
    }
}

fn try_extension(
    db: &[Vec<&[ItemId]>],
    frequent_items: &[ItemId],
    min_support: u64,
    pattern: &mut Vec<Vec<ItemId>>,
    parent_tids: &[u32],
    out: &mut Vec<SequencePattern>,
) {
    let tids: Vec<u32> = parent_tids
        .iter()
        .copied()
        .filter(|&t| sequence_contains(&db[t as usize], pattern))
        .collect();
    if (tids.len() as u64) < min_support {
        return;
    }
    out.push(SequencePattern { itemsets: pattern.clone(), support: tids.len() as u64 });
    grow_sequence(db, frequent_items, min_support, pattern, &tids, out);
}

/// SPMF-style pattern export: items space-separated, itemsets joined by
/// " -1 ", then "#SUP: n".
pub fn write_patterns(patterns: &[Pattern], labels: &[String]) -> String {
    let mut out = String::new();
    for p in patterns {
        let toks: Vec<&str> = p.items.iter().map(|&i| labels[i as usize].as_str()).collect();
        out.push_str(&toks.join(" "));
        out.push_str(&format!(" #SUP: {}\n", p.support));
    }
    out
}

pub fn write_sequence_patterns(patterns: &[SequencePattern], labels: &[String]) -> String {
    let mut out = String::new();
    for p in patterns {
        let sets: Vec<String> = p
            .itemsets
            .iter()
            .map(|set| {
                set.iter().map(|&i| labels[i as usize].as_str()).collect::<Vec<_>>().join(" ")
            })
            .collect();
        out.push_str(&sets.join(" -1 "));
        out.push_str(&format!(" #SUP: {}\n", p.support));
    }
    out
}
