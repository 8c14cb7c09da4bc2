//! Multiplicity bookkeeping: how many distinct matrices (or port-labeled
//! multigraphs) represent a dataset, and the exact acceptance ratio between
//! the current dataset and a proposed one.
//!
//! Within each transaction-length class, the number of row orderings is the
//! multinomial `|T_len|! / prod over duplicate groups of n_g!`, and the
//! total is the product over lengths. Only the duplicate-group counts change
//! along a chain (row and column sums are preserved), so the ratio between
//! two adjacent datasets reduces to a short product of group counts.
//!
//! The same contract covers sequence datasets with fingerprints over ordered
//! itemset-id lists.

use std::collections::HashMap;

/// Canonical row content: sorted item ids for a transaction, ordered itemset
/// ids for a sequence. The length class is `content.len()` in both cases.
pub type Fingerprint = Box<[u32]>;

pub fn fingerprint_of(content: &[u32]) -> Fingerprint {
    content.to_vec().into_boxed_slice()
}

/// Per-length duplicate counts: maps each distinct row content to its number
/// of occurrences, with per-length totals kept separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateGroups {
    counts: HashMap<Fingerprint, u64>,
    length_totals: HashMap<usize, u64>,
}

impl DuplicateGroups {
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [u32]>) -> Self {
        let mut counts: HashMap<Fingerprint, u64> = HashMap::new();
        let mut length_totals: HashMap<usize, u64> = HashMap::new();
        for row in rows {
            *counts.entry(fingerprint_of(row)).or_insert(0) += 1;
            *length_totals.entry(row.len()).or_insert(0) += 1;
        }
        Self { counts, length_totals }
    }

    pub fn count_of(&self, f: &[u32]) -> u64 {
        self.counts.get(f).copied().unwrap_or(0)
    }

    pub fn num_groups(&self) -> usize {
        self.counts.len()
    }

    pub fn num_rows(&self) -> u64 {
        self.length_totals.values().sum()
    }

    /// Natural log of the number of matrices representing the dataset.
    pub fn log_num_matrices(&self) -> f64 {
        let mut log = 0.0f64;
        for &total in self.length_totals.values() {
            log += ln_factorial(total);
        }
        for &n in self.counts.values() {
            log -= ln_factorial(n);
        }
        log
    }

    /// Exact count for small datasets; `None` once any factorial leaves
    /// u128 range (safe for `num_rows() <= 20` and far beyond).
    pub fn num_matrices_exact(&self) -> Option<u128> {
        let mut num = 1u128;
        for &total in self.length_totals.values() {
            num = num.checked_mul(factorial_u128(total)?)?;
        }
        let mut den = 1u128;
        for &n in self.counts.values() {
            den = den.checked_mul(factorial_u128(n)?)?;
        }
        debug_assert_eq!(num % den, 0);
        Some(num / den)
    }

    /// Ratio `Q(current) / Q(proposed)` where the proposal removes the rows
    /// in `removed` and adds the rows in `added`. Counts are walked on a
    /// scratch overlay; `self` is not mutated, so rejected proposals cost no
    /// rollback.
    ///
    /// Removing a fingerprint that is not present (with multiplicity) is a
    /// contract violation and panics.
    pub fn transition_ratio(&self, removed: &[Fingerprint], added: &[Fingerprint]) -> TransitionRatio {
        debug_assert!(lengths_pair_up(removed, added), "row sums must be invariant");
        let mut overlay: HashMap<&[u32], i64> = HashMap::with_capacity(removed.len() + added.len());
        let mut ratio = TransitionRatio::one();
        for f in removed {
            let delta = overlay.entry(f.as_ref()).or_insert(0);
            let current = self.count_of(f) as i64 + *delta;
            assert!(current >= 1, "removal of absent fingerprint (contract violation)");
            ratio.mul_den(current as u64);
            *delta -= 1;
        }
        for f in added {
            let delta = overlay.entry(f.as_ref()).or_insert(0);
            let current = self.count_of(f) as i64 + *delta;
            debug_assert!(current >= 0);
            ratio.mul_num(current as u64 + 1);
            *delta += 1;
        }
        ratio
    }

    /// Commits a proposal's fingerprint changes. Per-length totals are
    /// unaffected because removed and added lengths pair up.
    pub fn apply_update(&mut self, removed: &[Fingerprint], added: &[Fingerprint]) {
        debug_assert!(lengths_pair_up(removed, added), "row sums must be invariant");
        for f in removed {
            match self.counts.get_mut(f.as_ref()) {
                Some(n) if *n > 1 => *n -= 1,
                Some(_) => {
                    self.counts.remove(f.as_ref());
                }
                None => panic!("removal of absent fingerprint (contract violation)"),
            }
        }
        for f in added {
            *self.counts.entry(f.clone()).or_insert(0) += 1;
        }
    }
}

fn lengths_pair_up(removed: &[Fingerprint], added: &[Fingerprint]) -> bool {
    let mut r: Vec<usize> = removed.iter().map(|f| f.len()).collect();
    let mut a: Vec<usize> = added.iter().map(|f| f.len()).collect();
    r.sort_unstable();
    a.sort_unstable();
    r == a
}

/// Exact rational ratio of small integer products, falling back to log
/// space once either side outgrows `10^15`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransitionRatio {
    Exact { num: u64, den: u64 },
    Log(f64),
}

const EXACT_LIMIT: u64 = 1_000_000_000_000_000;

impl TransitionRatio {
    pub fn one() -> Self {
        TransitionRatio::Exact { num: 1, den: 1 }
    }

    fn mul_num(&mut self, x: u64) {
        match self {
            TransitionRatio::Exact { num, den } => {
                if let Some(n) = num.checked_mul(x) {
                    if n <= EXACT_LIMIT {
                        *num = n;
                        return;
                    }
                }
                *self = TransitionRatio::Log((*num as f64).ln() - (*den as f64).ln() + (x as f64).ln());
            }
            TransitionRatio::Log(l) => *l += (x as f64).ln(),
        }
    }

    fn mul_den(&mut self, x: u64) {
        match self {
            TransitionRatio::Exact { num, den } => {
                if let Some(d) = den.checked_mul(x) {
                    if d <= EXACT_LIMIT {
                        *den = d;
                        return;
                    }
                }
                *self = TransitionRatio::Log((*num as f64).ln() - (*den as f64).ln() - (x as f64).ln());
            }
            TransitionRatio::Log(l) => *l -= (x as f64).ln(),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            TransitionRatio::Exact { num, den } => num as f64 / den as f64,
            TransitionRatio::Log(l) => l.exp(),
        }
    }

    pub fn ln(&self) -> f64 {
        match *self {
            TransitionRatio::Exact { num, den } => (num as f64).ln() - (den as f64).ln(),
            TransitionRatio::Log(l) => l,
        }
    }
}

fn factorial_u128(n: u64) -> Option<u128> {
    let mut out = 1u128;
    for k in 2..=n as u128 {
        out = out.checked_mul(k)?;
    }
    Some(out)
}

/// `ln(n!)` by direct summation with a cached table for small arguments.
pub fn ln_factorial(n: u64) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0f64; 1 << 17];
        for i in 2..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if let Some(&v) = table.get(n as usize) {
        return v;
    }
    let mut v = *table.last().unwrap();
    for k in table.len() as u64..=n {
        v += (k as f64).ln();
    }
    v
}
