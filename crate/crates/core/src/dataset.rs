//! Dataset I/O: parsing, writing, and synthesis of transactional and
//! sequence datasets.
//!
//! Transactional files follow the FIMI convention (one transaction per line,
//! whitespace-separated tokens). Sequence files follow the SPMF convention
//! (`-1` ends an itemset, `-2` ends a sequence). Item tokens may be arbitrary
//! strings; they are renumbered densely to `0..num_items` on parse and the
//! original labels are kept in a side dictionary so that writing restores
//! them.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Dense item identifier, `0..num_items`.
pub type ItemId = u32;
/// Dense identifier of a canonical itemset registered in an [`ItemsetDictionary`].
pub type ItemsetId = u32;

/// A bag of itemsets ("transactions"), each a sorted duplicate-free list of
/// dense item ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionalDataset {
    transactions: Vec<Vec<ItemId>>,
    item_labels: Vec<String>,
}

impl TransactionalDataset {
    /// Builds a dataset from pre-renumbered transactions. Items must be
    /// `< num_items`; labels default to the decimal id plus one (FIMI style).
    pub fn from_transactions(transactions: Vec<Vec<ItemId>>, num_items: usize) -> Self {
        let mut transactions = transactions;
        for t in &mut transactions {
            t.sort_unstable();
            t.dedup();
            assert!(!t.is_empty(), "empty transaction");
            assert!((*t.last().unwrap() as usize) < num_items, "item id out of range");
        }
        let item_labels = (0..num_items).map(|i| (i + 1).to_string()).collect();
        Self { transactions, item_labels }
    }

    /// Same transactions with an explicit label dictionary.
    pub fn with_labels(transactions: Vec<Vec<ItemId>>, item_labels: Vec<String>) -> Self {
        Self { transactions, item_labels }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_transactional(text)
    }

    /// Number of transactions `|D|`.
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn num_items(&self) -> usize {
        self.item_labels.len()
    }

    pub fn transactions(&self) -> &[Vec<ItemId>] {
        &self.transactions
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    pub fn item_label(&self, item: ItemId) -> &str {
        &self.item_labels[item as usize]
    }

    /// Sum of transaction lengths (the number of 1-entries of the
    /// biadjacency matrix).
    pub fn total_items(&self) -> u64 {
        self.transactions.iter().map(|t| t.len() as u64).sum()
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        for t in &self.transactions {
            let mut first = true;
            for &i in t {
                if !first {
                    out.push(' ');
                }
                out.push_str(&self.item_labels[i as usize]);
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Bijection between canonical itemset contents (sorted item lists) and
/// dense [`ItemsetId`]s.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemsetDictionary {
    contents: Vec<Vec<ItemId>>,
    index: HashMap<Vec<ItemId>, ItemsetId>,
}

impl ItemsetDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a canonical (sorted, duplicate-free) itemset, returning its
    /// id. Re-registering the same content returns the existing id.
    pub fn intern(&mut self, itemset: Vec<ItemId>) -> ItemsetId {
        debug_assert!(itemset.windows(2).all(|w| w[0] < w[1]), "itemset not canonical");
        if let Some(&id) = self.index.get(&itemset) {
            return id;
        }
        let id = self.contents.len() as ItemsetId;
        self.index.insert(itemset.clone(), id);
        self.contents.push(itemset);
        id
    }

    pub fn content(&self, id: ItemsetId) -> &[ItemId] {
        &self.contents[id as usize]
    }

    pub fn lookup(&self, itemset: &[ItemId]) -> Option<ItemsetId> {
        self.index.get(itemset).copied()
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }
}

/// A bag of sequences, each an ordered list of itemset ids. Itemsets may
/// repeat within a sequence; identity of an itemset is its canonical content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDataset {
    sequences: Vec<Vec<ItemsetId>>,
    dictionary: ItemsetDictionary,
    item_labels: Vec<String>,
}

impl SequenceDataset {
    pub fn new(
        sequences: Vec<Vec<ItemsetId>>,
        dictionary: ItemsetDictionary,
        item_labels: Vec<String>,
    ) -> Self {
        Self { sequences, dictionary, item_labels }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_sequential(text)
    }

    /// Number of sequences `|D|`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[Vec<ItemsetId>] {
        &self.sequences
    }

    pub fn dictionary(&self) -> &ItemsetDictionary {
        &self.dictionary
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    pub fn num_items(&self) -> usize {
        self.item_labels.len()
    }

    /// Sum of sequence lengths, i.e. the number of edges of the bipartite
    /// multigraph representation.
    pub fn total_itemsets(&self) -> u64 {
        self.sequences.iter().map(|s| s.len() as u64).sum()
    }

    /// Number of sequences in which the itemset participates at least once.
    pub fn support_of_itemset(&self, id: ItemsetId) -> u64 {
        self.sequences.iter().filter(|s| s.contains(&id)).count() as u64
    }

    /// Total number of participations, counting repeats within a sequence.
    pub fn multi_support_of_itemset(&self, id: ItemsetId) -> u64 {
        self.sequences
            .iter()
            .map(|s| s.iter().filter(|&&x| x == id).count() as u64)
            .sum()
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        for seq in &self.sequences {
            for &is in seq {
                for &item in self.dictionary.content(is) {
                    let _ = write!(out, "{} ", self.item_labels[item as usize]);
                }
                out.push_str("-1 ");
            }
            out.push_str("-2\n");
        }
        out
    }
}

/// Assigns dense ids in order of first appearance.
#[derive(Default)]
struct Renumbering {
    ids: HashMap<String, ItemId>,
    labels: Vec<String>,
}

impl Renumbering {
    fn id_of(&mut self, token: &str) -> ItemId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.labels.len() as ItemId;
        self.ids.insert(token.to_string(), id);
        self.labels.push(token.to_string());
        id
    }
}

/// Parses a FIMI-style transactional file. Duplicate tokens within a line
/// collapse to one item; line order is preserved.
pub fn parse_transactional(text: &str) -> Result<TransactionalDataset> {
    let mut renum = Renumbering::default();
    let mut transactions = Vec::new();
    let mut saw_line = false;
    for (lineno, line) in text.lines().enumerate() {
        saw_line = true;
        let mut items: Vec<ItemId> = line.split_whitespace().map(|tok| renum.id_of(tok)).collect();
        if items.is_empty() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "transaction with zero tokens".to_string(),
            });
        }
        items.sort_unstable();
        items.dedup();
        transactions.push(items);
    }
    if !saw_line {
        return Err(Error::EmptyInput("transactional file has no lines".to_string()));
    }
    Ok(TransactionalDataset { transactions, item_labels: renum.labels })
}

/// Parses an SPMF-style sequence file: `-1` closes an itemset, `-2` closes a
/// sequence. Every maximal run of item tokens between markers becomes a
/// canonical itemset registered in the dictionary; ports are implied by
/// position.
pub fn parse_sequential(text: &str) -> Result<SequenceDataset> {
    let mut renum = Renumbering::default();
    let mut dictionary = ItemsetDictionary::new();
    let mut sequences = Vec::new();
    let mut saw_token = false;

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut current_itemset: Vec<ItemId> = Vec::new();
        let mut current_sequence: Vec<ItemsetId> = Vec::new();
        for tok in line.split_whitespace() {
            saw_token = true;
            match tok {
                "-1" => {
                    if current_itemset.is_empty() {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: "itemset with zero items before -1".to_string(),
                        });
                    }
                    current_itemset.sort_unstable();
                    current_itemset.dedup();
                    let id = dictionary.intern(std::mem::take(&mut current_itemset));
                    current_sequence.push(id);
                }
                "-2" => {
                    if !current_itemset.is_empty() {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: "itemset not closed by -1 before -2".to_string(),
                        });
                    }
                    if current_sequence.is_empty() {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: "sequence with no itemset before -2".to_string(),
                        });
                    }
                    sequences.push(std::mem::take(&mut current_sequence));
                }
                item => current_itemset.push(renum.id_of(item)),
            }
        }
        if !current_itemset.is_empty() || !current_sequence.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "sequence not terminated by -2".to_string(),
            });
        }
    }
    if !saw_token {
        return Err(Error::EmptyInput("sequence file has no tokens".to_string()));
    }
    Ok(SequenceDataset { sequences, dictionary, item_labels: renum.labels })
}

pub fn write_transactional(dataset: &TransactionalDataset) -> String {
    dataset.write()
}

pub fn write_sequential(dataset: &SequenceDataset) -> String {
    dataset.write()
}

/// Generates a synthetic transactional dataset: transaction lengths are
/// Poisson with the requested mean, clipped to `[1, num_items]`, and items
/// are drawn without replacement under a Zipf-like popularity
/// (`weight(rank) = 1/rank`). Deterministic given the seed.
pub fn generate_synthetic(
    num_transactions: usize,
    num_items: usize,
    avg_length: f64,
    seed: u64,
) -> Result<TransactionalDataset> {
    if num_transactions < 1 || num_items < 1 {
        return Err(Error::InvalidParameter(
            "num_transactions and num_items must be at least 1".to_string(),
        ));
    }
    if avg_length.is_nan() || avg_length < 1.0 {
        return Err(Error::InvalidParameter("avg_length must be at least 1".to_string()));
    }
    if avg_length > num_items as f64 {
        return Err(Error::InvalidParameter(format!(
            "avg_length {avg_length} exceeds num_items {num_items}"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let weights: Vec<f64> = (0..num_items).map(|i| 1.0 / (i + 1) as f64).collect();
    let mut transactions = Vec::with_capacity(num_transactions);
    let mut keys: Vec<(f64, u32)> = Vec::with_capacity(num_items);
    for _ in 0..num_transactions {
        let len = sample_poisson(&mut rng, avg_length).clamp(1, num_items as u64) as usize;
        // Weighted sampling without replacement: exponential keys, top-k.
        keys.clear();
        for (i, &w) in weights.iter().enumerate() {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            keys.push((-u.ln() / w, i as u32));
        }
        keys.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut items: Vec<ItemId> = keys[..len].iter().map(|&(_, i)| i).collect();
        items.sort_unstable();
        transactions.push(items);
    }
    Ok(TransactionalDataset::from_transactions(transactions, num_items))
}

/// Synthetic sequence dataset built on the same length/popularity model:
/// each sequence is an ordered list of singleton itemsets drawn with
/// replacement under the skewed popularity.
pub fn generate_synthetic_sequences(
    num_sequences: usize,
    num_items: usize,
    avg_length: f64,
    seed: u64,
) -> Result<SequenceDataset> {
    if num_sequences < 1 || num_items < 1 {
        return Err(Error::InvalidParameter(
            "num_sequences and num_items must be at least 1".to_string(),
        ));
    }
    if avg_length.is_nan() || avg_length < 1.0 {
        return Err(Error::InvalidParameter("avg_length must be at least 1".to_string()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let cumulative: Vec<f64> = {
        let mut acc = 0.0;
        (0..num_items)
            .map(|i| {
                acc += 1.0 / (i + 1) as f64;
                acc
            })
            .collect()
    };
    let total = *cumulative.last().unwrap();
    // Items are renumbered by first appearance so that both id spaces stay
    // dense even when the popularity tail goes undrawn.
    let mut dictionary = ItemsetDictionary::new();
    let mut item_ids: Vec<Option<ItemId>> = vec![None; num_items];
    let mut item_labels: Vec<String> = Vec::new();
    let mut sequences = Vec::with_capacity(num_sequences);
    for _ in 0..num_sequences {
        let len = sample_poisson(&mut rng, avg_length).max(1) as usize;
        let seq: Vec<ItemsetId> = (0..len)
            .map(|_| {
                let x = rng.gen_range(0.0..total);
                let pick = cumulative.partition_point(|&c| c <= x).min(num_items - 1);
                let item = *item_ids[pick].get_or_insert_with(|| {
                    item_labels.push((pick + 1).to_string());
                    item_labels.len() as ItemId - 1
                });
                dictionary.intern(vec![item])
            })
            .collect();
        sequences.push(seq);
    }
    Ok(SequenceDataset { sequences, dictionary, item_labels })
}

fn sample_poisson(rng: &mut Xoshiro256PlusPlus, lambda: f64) -> u64 {
    if lambda < 30.0 {
        // Knuth's product method.
        let l = (-lambda).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= rng.gen_range(0.0f64..1.0);
            if p <= l {
                return k;
            }
            k += 1;
        }
    }
    // Normal approximation for large means.
    let (u1, u2): (f64, f64) = (rng.gen_range(f64::MIN_POSITIVE..1.0), rng.gen_range(0.0..1.0));
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    (lambda + lambda.sqrt() * z).round().max(0.0) as u64
}
