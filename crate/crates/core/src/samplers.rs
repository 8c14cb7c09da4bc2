//! MCMC samplers over the null models.
//!
//! The swap-restricted samplers walk the space of biadjacency matrices (or
//! port-labeled multigraphs) sharing the observed joint degree matrix, with
//! a Metropolis-Hastings correction by the matrix multiplicity so that the
//! chain targets a distribution over datasets rather than matrices. The
//! margin-preserving baselines walk the larger space constrained only by
//! row and column sums and accept every admissible swap.
//!
//! A chain is strictly sequential and owns its state; `sample_many` runs
//! independent chains with per-chain derived seeds, so results do not
//! depend on the degree of parallelism.

use std::sync::Arc;

use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::bipartite::{BiadjacencyState, BipartiteMultigraph, Bjdm, DegreeClasses};
use crate::dataset::{SequenceDataset, TransactionalDataset};
use crate::error::{Error, Result};
use crate::multiplicity::{fingerprint_of, DuplicateGroups, Fingerprint, TransitionRatio};

/// The available chain algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerId {
    /// Restricted swaps between equal-sum rows or columns.
    AliceA,
    /// Curveball-style binomial trades between equal-sum rows or columns.
    AliceB,
    /// Restricted swaps on the sequence multigraph.
    AliceS,
    /// Margin-preserving checkerboard swaps (transactional baseline).
    Gmmt,
    /// Degree-sequence-preserving edge swaps (sequence baseline).
    GmmtS,
    /// Naive uniform 4-tuple proposals, self-looping unless the tuple is a
    /// restricted swap. Convergence comparison only.
    SelfLoop,
}

impl SamplerId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alice-a" => Ok(SamplerId::AliceA),
            "alice-b" => Ok(SamplerId::AliceB),
            "alice-s" => Ok(SamplerId::AliceS),
            "gmmt" => Ok(SamplerId::Gmmt),
            "gmmt-s" => Ok(SamplerId::GmmtS),
            "selfloop" => Ok(SamplerId::SelfLoop),
            other => Err(Error::InvalidParameter(format!("unknown sampler '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerId::AliceA => "alice-a",
            SamplerId::AliceB => "alice-b",
            SamplerId::AliceS => "alice-s",
            SamplerId::Gmmt => "gmmt",
            SamplerId::GmmtS => "gmmt-s",
            SamplerId::SelfLoop => "selfloop",
        }
    }

    pub fn is_sequence_sampler(&self) -> bool {
        matches!(self, SamplerId::AliceS | SamplerId::GmmtS)
    }

    /// Whether acceptance applies the dataset-multiplicity ratio. The
    /// margin-preserving baselines target the uniform distribution over
    /// matrices (multigraphs) instead of over datasets.
    pub fn uses_multiplicity_correction(&self) -> bool {
        !matches!(self, SamplerId::Gmmt | SamplerId::GmmtS)
    }

    /// Default swap budget as a multiple of `w` (the number of 1-entries,
    /// or multigraph edges). Binomial trades mix in fewer steps.
    pub fn default_swap_multiplier(&self) -> f64 {
        match self {
            SamplerId::AliceB => 2.0,
            SamplerId::AliceA | SamplerId::AliceS | SamplerId::Gmmt => 4.0,
            SamplerId::GmmtS => 50.0,
            SamplerId::SelfLoop => 10.0,
        }
    }
}

impl std::fmt::Display for SamplerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional log-weight over row (or sequence) contents. The target
/// distribution over datasets is proportional to the product of row
/// weights; `None` means uniform.
pub trait RowWeight: Send + Sync {
    fn log_weight(&self, content: &[u32]) -> f64;
}

#[derive(Clone, Default)]
pub struct ChainOptions {
    /// Verify the joint degree matrix (and margins, caterpillars, group
    /// bookkeeping) after every accepted step. Slow path for audits.
    pub check_invariants: bool,
    pub weight: Option<Arc<dyn RowWeight>>,
}

impl std::fmt::Debug for ChainOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChainOptions")
            .field("check_invariants", &self.check_invariants)
            .field("weight", &self.weight.is_some())
            .finish()
    }
}

/// Samples a degree class proportionally to its number of candidate pairs.
/// Classes are immutable over a chain, so the cumulative weights are built
/// once.
struct ClassPairSampler {
    degrees: Vec<u32>,
    cumulative: Vec<u64>,
    total: u64,
}

impl ClassPairSampler {
    /// Weights `C(|class|, 2)`: pairs of distinct members.
    fn distinct(classes: &DegreeClasses) -> Self {
        Self::build(classes, |n| n * (n - 1) / 2)
    }

    /// Weights `C(|class| + 1, 2)`: unordered pairs with replacement.
    fn with_replacement(classes: &DegreeClasses) -> Self {
        Self::build(classes, |n| n * (n + 1) / 2)
    }

    fn build(classes: &DegreeClasses, weight: impl Fn(u64) -> u64) -> Self {
        let mut degrees = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0u64;
        for (degree, size) in classes.sizes() {
            if degree == 0 {
                continue;
            }
            let w = weight(size as u64);
            if w == 0 {
                continue;
            }
            total += w;
            degrees.push(degree as u32);
            cumulative.push(total);
        }
        Self { degrees, cumulative, total }
    }

    fn sample(&self, rng: &mut Xoshiro256PlusPlus) -> Option<u32> {
        if self.total == 0 {
            return None;
        }
        let t = rng.gen_range(0..self.total);
        let idx = self.cumulative.partition_point(|&c| c <= t);
        Some(self.degrees[idx])
    }
}

/// Uniform unordered pair of distinct indices from `0..n` (requires n >= 2).
fn distinct_pair(rng: &mut Xoshiro256PlusPlus, n: usize) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Uniform unordered pair from `0..n` with replacement: each of the
/// `n(n+1)/2` multiset pairs has equal probability. Uses the bijection with
/// distinct pairs from `0..n+1`.
fn with_replacement_pair(rng: &mut Xoshiro256PlusPlus, n: usize) -> (usize, usize) {
    let (x, y) = distinct_pair(rng, n + 1);
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    (lo, hi - 1)
}

/// Membership mask of a uniform `k`-subset of `pool`, drawn by reservoir
/// sampling in one pass.
fn reservoir_subset(rng: &mut Xoshiro256PlusPlus, pool: &[u32], k: usize) -> Vec<bool> {
    let mut chosen = vec![false; pool.len()];
    let mut slots: Vec<usize> = (0..k).collect();
    for i in k..pool.len() {
        let j = rng.gen_range(0..=i);
        if j < k {
            slots[j] = i;
        }
    }
    for &s in &slots {
        chosen[s] = true;
    }
    chosen
}

/// Sorted-set difference of two sorted slices: (a \ b, b \ a).
fn set_differences(a: &[u32], b: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut only_a = Vec::new();
    let mut only_b = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                only_a.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                only_b.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    only_a.extend_from_slice(&a[i..]);
    only_b.extend_from_slice(&b[j..]);
    (only_a, only_b)
}

/// Sorted content with one element replaced.
fn replaced_content(row: &[u32], old: u32, new: u32) -> Fingerprint {
    let mut out = Vec::with_capacity(row.len());
    let mut inserted = false;
    for &x in row {
        if x == old {
            continue;
        }
        if !inserted && new < x {
            out.push(new);
            inserted = true;
        }
        out.push(x);
    }
    if !inserted {
        out.push(new);
    }
    out.into_boxed_slice()
}

/// Sorted union of `keep = row \ drop` with `add`, all sorted inputs.
fn traded_content(row: &[u32], drop: &[u32], add: &[u32]) -> Fingerprint {
    let mut out = Vec::with_capacity(row.len());
    let mut di = 0;
    let mut ai = 0;
    for &x in row {
        if di < drop.len() && drop[di] == x {
            di += 1;
            continue;
        }
        while ai < add.len() && add[ai] < x {
            out.push(add[ai]);
            ai += 1;
        }
        out.push(x);
    }
    out.extend_from_slice(&add[ai..]);
    out.into_boxed_slice()
}

// ---------------------------------------------------------------------------
// Transactional chains
// ---------------------------------------------------------------------------

/// Structural edit of a biadjacency matrix proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixEdit {
    SelfLoop,
    /// `(a,c),(b,d) -> (a,d),(b,c)`.
    Swap { a: u32, b: u32, c: u32, d: u32 },
    /// Row binomial trade: columns `to_b` leave row `a`, columns `to_a`
    /// leave row `b`.
    RowTrade { a: u32, b: u32, to_b: Vec<u32>, to_a: Vec<u32> },
    /// Column binomial trade: rows `to_d` exchange item `c` for `d`, rows
    /// `to_c` the opposite.
    ColTrade { c: u32, d: u32, to_d: Vec<u32>, to_c: Vec<u32> },
}

impl MatrixEdit {
    /// The edit that undoes this one.
    pub fn inverse(&self) -> MatrixEdit {
        match self.clone() {
            MatrixEdit::SelfLoop => MatrixEdit::SelfLoop,
            MatrixEdit::Swap { a, b, c, d } => MatrixEdit::Swap { a, b, c: d, d: c },
            MatrixEdit::RowTrade { a, b, to_b, to_a } => {
                MatrixEdit::RowTrade { a, b, to_b: to_a, to_a: to_b }
            }
            MatrixEdit::ColTrade { c, d, to_d, to_c } => {
                MatrixEdit::ColTrade { c, d, to_d: to_c, to_c: to_d }
            }
        }
    }
}

/// A proposed move plus the duplicate-group changes it would cause.
#[derive(Debug, Clone)]
pub struct MatrixProposal {
    pub edit: MatrixEdit,
    pub removed: Vec<Fingerprint>,
    pub added: Vec<Fingerprint>,
}

impl MatrixProposal {
    fn self_loop() -> Self {
        Self { edit: MatrixEdit::SelfLoop, removed: Vec::new(), added: Vec::new() }
    }

    pub fn is_self_loop(&self) -> bool {
        matches!(self.edit, MatrixEdit::SelfLoop)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub accepted: bool,
    pub self_loop: bool,
}

/// Invariants frozen at chain start for the slow checking path.
struct MatrixReference {
    bjdm: Bjdm,
    caterpillars: u64,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
}

/// A single Markov chain over biadjacency matrices.
pub struct MatrixChain {
    state: BiadjacencyState,
    groups: Option<DuplicateGroups>,
    rng: Xoshiro256PlusPlus,
    sampler: SamplerId,
    row_pairs: ClassPairSampler,
    col_pairs: ClassPairSampler,
    row_offsets: Vec<u64>,
    options: ChainOptions,
    reference: Option<MatrixReference>,
    scratch: Vec<u64>,
    labels: Vec<String>,
    steps: u64,
    accepted: u64,
}

impl MatrixChain {
    pub fn new(
        observed: &TransactionalDataset,
        sampler: SamplerId,
        seed: u64,
        options: ChainOptions,
    ) -> Result<Self> {
        if sampler.is_sequence_sampler() {
            return Err(Error::SamplerMismatch {
                sampler: sampler.name().to_string(),
                kind: "transactional".to_string(),
            });
        }
        let state = BiadjacencyState::from_dataset(observed);
        let groups = sampler
            .uses_multiplicity_correction()
            .then(|| DuplicateGroups::from_rows(observed.transactions().iter().map(Vec::as_slice)));
        let row_pairs = ClassPairSampler::distinct(state.row_classes());
        let col_pairs = ClassPairSampler::distinct(state.col_classes());
        let mut row_offsets = Vec::with_capacity(state.num_rows() + 1);
        let mut acc = 0u64;
        row_offsets.push(0);
        for r in 0..state.num_rows() as u32 {
            acc += state.row_sum(r) as u64;
            row_offsets.push(acc);
        }
        let reference = options.check_invariants.then(|| MatrixReference {
            bjdm: state.bjdm(),
            caterpillars: state.caterpillars_direct(),
            row_sums: (0..state.num_rows() as u32).map(|r| state.row_sum(r)).collect(),
            col_sums: (0..state.num_cols() as u32).map(|c| state.col_sum(c)).collect(),
        });
        Ok(Self {
            state,
            groups,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            sampler,
            row_pairs,
            col_pairs,
            row_offsets,
            options,
            reference,
            scratch: Vec::new(),
            labels: observed.item_labels().to_vec(),
            steps: 0,
            accepted: 0,
        })
    }

    pub fn state(&self) -> &BiadjacencyState {
        &self.state
    }

    pub fn sampler(&self) -> SamplerId {
        self.sampler
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn bjdm(&self) -> Bjdm {
        self.state.bjdm()
    }

    pub fn dataset(&self) -> TransactionalDataset {
        self.state.to_dataset(&self.labels)
    }

    pub fn groups(&self) -> Option<&DuplicateGroups> {
        self.groups.as_ref()
    }

    /// Draws one proposal from the sampler's neighbor distribution without
    /// touching the state.
    pub fn propose(&mut self) -> MatrixProposal {
        match self.sampler {
            SamplerId::AliceA => self.propose_restricted_swap(),
            SamplerId::AliceB => self.propose_binomial_trade(),
            SamplerId::Gmmt => self.propose_margin_swap(),
            SamplerId::SelfLoop => self.propose_naive_tuple(),
            SamplerId::AliceS | SamplerId::GmmtS => unreachable!("sequence sampler on matrix chain"),
        }
    }

    /// Restricted swap: equal-sum row (or column) pair, then one column
    /// from each side of their symmetric difference.
    fn propose_restricted_swap(&mut self) -> MatrixProposal {
        if self.rng.gen_bool(0.5) {
            let Some(m) = self.row_pairs.sample(&mut self.rng) else {
                return MatrixProposal::self_loop();
            };
            let class = self.state.row_classes().members(m as usize);
            let (i, j) = distinct_pair(&mut self.rng, class.len());
            let (a, b) = (class[i], class[j]);
            let (za, zb) = set_differences(self.state.row(a), self.state.row(b));
            if za.is_empty() {
                return MatrixProposal::self_loop();
            }
            let c = za[self.rng.gen_range(0..za.len())];
            let d = zb[self.rng.gen_range(0..zb.len())];
            self.swap_proposal(a, b, c, d)
        } else {
            let Some(n) = self.col_pairs.sample(&mut self.rng) else {
                return MatrixProposal::self_loop();
            };
            let class = self.state.col_classes().members(n as usize);
            let (i, j) = distinct_pair(&mut self.rng, class.len());
            let (c, d) = (class[i], class[j]);
            let (zc, zd) = set_differences(self.state.col(c), self.state.col(d));
            if zc.is_empty() {
                return MatrixProposal::self_loop();
            }
            let a = zc[self.rng.gen_range(0..zc.len())];
            let b = zd[self.rng.gen_range(0..zd.len())];
            self.swap_proposal(a, b, c, d)
        }
    }

    fn swap_proposal(&self, a: u32, b: u32, c: u32, d: u32) -> MatrixProposal {
        let removed = vec![
            fingerprint_of(self.state.row(a)),
            fingerprint_of(self.state.row(b)),
        ];
        let added = vec![
            replaced_content(self.state.row(a), c, d),
            replaced_content(self.state.row(b), d, c),
        ];
        MatrixProposal { edit: MatrixEdit::Swap { a, b, c, d }, removed, added }
    }

    /// Binomial trade: redistribute the symmetric difference of an
    /// equal-sum pair, keeping the sums. The subset is reservoir-sampled.
    fn propose_binomial_trade(&mut self) -> MatrixProposal {
        if self.rng.gen_bool(0.5) {
            let Some(m) = self.row_pairs.sample(&mut self.rng) else {
                return MatrixProposal::self_loop();
            };
            let class = self.state.row_classes().members(m as usize);
            let (i, j) = distinct_pair(&mut self.rng, class.len());
            let (a, b) = (class[i], class[j]);
            let (za, zb) = set_differences(self.state.row(a), self.state.row(b));
            if za.is_empty() {
                return MatrixProposal::self_loop();
            }
            let pool: Vec<u32> = za.iter().chain(zb.iter()).copied().collect();
            let chosen = reservoir_subset(&mut self.rng, &pool, za.len());
            // Columns of Z_a not kept move to b; chosen columns of Z_b move to a.
            let to_b: Vec<u32> =
                za.iter().enumerate().filter(|&(k, _)| !chosen[k]).map(|(_, &c)| c).collect();
            let to_a: Vec<u32> = zb
                .iter()
                .enumerate()
                .filter(|&(k, _)| chosen[za.len() + k])
                .map(|(_, &c)| c)
                .collect();
            if to_b.is_empty() {
                return MatrixProposal::self_loop();
            }
            let mut sorted_to_b = to_b.clone();
            sorted_to_b.sort_unstable();
            let mut sorted_to_a = to_a.clone();
            sorted_to_a.sort_unstable();
            let removed = vec![
                fingerprint_of(self.state.row(a)),
                fingerprint_of(self.state.row(b)),
            ];
            let added = vec![
                traded_content(self.state.row(a), &sorted_to_b, &sorted_to_a),
                traded_content(self.state.row(b), &sorted_to_a, &sorted_to_b),
            ];
            MatrixProposal {
                edit: MatrixEdit::RowTrade { a, b, to_b: sorted_to_b, to_a: sorted_to_a },
                removed,
                added,
            }
        } else {
            let Some(n) = self.col_pairs.sample(&mut self.rng) else {
                return MatrixProposal::self_loop();
            };
            let class = self.state.col_classes().members(n as usize);
            let (i, j) = distinct_pair(&mut self.rng, class.len());
            let (c, d) = (class[i], class[j]);
            let (zc, zd) = set_differences(self.state.col(c), self.state.col(d));
            if zc.is_empty() {
                return MatrixProposal::self_loop();
            }
            let pool: Vec<u32> = zc.iter().chain(zd.iter()).copied().collect();
            let chosen = reservoir_subset(&mut self.rng, &pool, zc.len());
            let to_d: Vec<u32> =
                zc.iter().enumerate().filter(|&(k, _)| !chosen[k]).map(|(_, &r)| r).collect();
            let to_c: Vec<u32> = zd
                .iter()
                .enumerate()
                .filter(|&(k, _)| chosen[zc.len() + k])
                .map(|(_, &r)| r)
                .collect();
            if to_d.is_empty() {
                return MatrixProposal::self_loop();
            }
            let mut sorted_to_d = to_d.clone();
            sorted_to_d.sort_unstable();
            let mut sorted_to_c = to_c.clone();
            sorted_to_c.sort_unstable();
            let mut removed = Vec::with_capacity(sorted_to_d.len() + sorted_to_c.len());
            let mut added = Vec::with_capacity(removed.capacity());
            for &r in &sorted_to_d {
                removed.push(fingerprint_of(self.state.row(r)));
                added.push(replaced_content(self.state.row(r), c, d));
            }
            for &r in &sorted_to_c {
                removed.push(fingerprint_of(self.state.row(r)));
                added.push(replaced_content(self.state.row(r), d, c));
            }
            MatrixProposal {
                edit: MatrixEdit::ColTrade { c, d, to_d: sorted_to_d, to_c: sorted_to_c },
                removed,
                added,
            }
        }
    }

    fn uniform_edge(&mut self) -> (u32, u32) {
        let total = *self.row_offsets.last().unwrap();
        let t = self.rng.gen_range(0..total);
        let r = self.row_offsets.partition_point(|&o| o <= t) - 1;
        let offset = (t - self.row_offsets[r]) as usize;
        (r as u32, self.state.row(r as u32)[offset])
    }

    /// Classic margin-preserving swap: two 1-entries drawn uniformly; swap
    /// if the opposite corners are 0, regardless of degree classes.
    fn propose_margin_swap(&mut self) -> MatrixProposal {
        let (a, c) = self.uniform_edge();
        let (b, d) = self.uniform_edge();
        if a == b || c == d || self.state.contains(a, d) || self.state.contains(b, c) {
            return MatrixProposal::self_loop();
        }
        MatrixProposal {
            edit: MatrixEdit::Swap { a, b, c, d },
            removed: Vec::new(),
            added: Vec::new(),
        }
    }

    /// Uniform 4-tuple over rows^2 x columns^2, kept only when it forms a
    /// restricted swap.
    fn propose_naive_tuple(&mut self) -> MatrixProposal {
        let a = self.rng.gen_range(0..self.state.num_rows() as u32);
        let b = self.rng.gen_range(0..self.state.num_rows() as u32);
        let c = self.rng.gen_range(0..self.state.num_cols() as u32);
        let d = self.rng.gen_range(0..self.state.num_cols() as u32);
        if a == b || c == d {
            return MatrixProposal::self_loop();
        }
        if !(self.state.contains(a, c) && self.state.contains(b, d))
            || self.state.contains(a, d)
            || self.state.contains(b, c)
        {
            return MatrixProposal::self_loop();
        }
        if self.state.row_sum(a) != self.state.row_sum(b)
            && self.state.col_sum(c) != self.state.col_sum(d)
        {
            return MatrixProposal::self_loop();
        }
        self.swap_proposal(a, b, c, d)
    }

    /// Metropolis-Hastings accept/reject for a proposal drawn from this
    /// chain's matching proposer. Self-loops accept trivially.
    pub fn mh_step(&mut self, proposal: &MatrixProposal) -> Result<StepOutcome> {
        self.steps += 1;
        if proposal.is_self_loop() {
            return Ok(StepOutcome { accepted: true, self_loop: true });
        }
        let accepted = if let Some(groups) = &self.groups {
            let ratio = groups.transition_ratio(&proposal.removed, &proposal.added);
            metropolis_accept(
                &mut self.rng,
                &ratio,
                weight_delta(&self.options.weight, &proposal.removed, &proposal.added),
            )
        } else {
            true
        };
        if accepted {
            self.apply(&proposal.edit);
            if let Some(groups) = &mut self.groups {
                groups.apply_update(&proposal.removed, &proposal.added);
            }
            self.accepted += 1;
            self.check_invariants()?;
        }
        Ok(StepOutcome { accepted, self_loop: false })
    }

    fn apply(&mut self, edit: &MatrixEdit) {
        match edit {
            MatrixEdit::SelfLoop => {}
            MatrixEdit::Swap { a, b, c, d } => self.state.apply_swap(*a, *b, *c, *d),
            MatrixEdit::RowTrade { a, b, to_b, to_a } => {
                self.state.apply_row_trade(*a, *b, to_b, to_a)
            }
            MatrixEdit::ColTrade { c, d, to_d, to_c } => {
                self.state.apply_col_trade(*c, *d, to_d, to_c)
            }
        }
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let proposal = self.propose();
        self.mh_step(&proposal)
    }

    /// Per-step slow-path check: margins, the joint degree matrix, and the
    /// caterpillar sum. The structural audit and duplicate-group rebuild are
    /// heavier, so they run on a cadence plus at [`MatrixChain::final_audit`].
    fn check_invariants(&mut self) -> Result<()> {
        let Some(reference) = &self.reference else {
            return Ok(());
        };
        for (r, &expected) in reference.row_sums.iter().enumerate() {
            if self.state.row_sum(r as u32) != expected {
                return Err(self.violation(format!("row {r} sum drifted")));
            }
        }
        for (c, &expected) in reference.col_sums.iter().enumerate() {
            if self.state.col_sum(c as u32) != expected {
                return Err(self.violation(format!("column {c} sum drifted")));
            }
        }
        if self.sampler.uses_multiplicity_correction() {
            if !self.state.bjdm_equals(&reference.bjdm, &mut self.scratch) {
                return Err(self.violation("joint degree matrix drifted".to_string()));
            }
            if self.state.caterpillars_direct() != reference.caterpillars {
                return Err(self.violation("caterpillar count drifted".to_string()));
            }
        }
        if self.accepted.is_multiple_of(4096) {
            self.final_audit()?;
        }
        Ok(())
    }

    /// Full structural audit: transpose consistency plus a from-scratch
    /// duplicate-group rebuild. Run at chain end when invariant checking is
    /// on; cheap enough to call directly in tests.
    pub fn final_audit(&self) -> Result<()> {
        self.state.audit().map_err(|e| self.violation(format!("{e}")))?;
        if let Some(groups) = &self.groups {
            let fresh =
                DuplicateGroups::from_rows((0..self.state.num_rows() as u32).map(|r| self.state.row(r)));
            if &fresh != groups {
                return Err(self.violation("duplicate groups inconsistent".to_string()));
            }
        }
        Ok(())
    }

    fn violation(&self, msg: String) -> Error {
        Error::InvariantViolation { step: self.steps, msg }
    }
}

fn weight_delta(
    weight: &Option<Arc<dyn RowWeight>>,
    removed: &[Fingerprint],
    added: &[Fingerprint],
) -> f64 {
    let Some(w) = weight else { return 0.0 };
    let gain: f64 = added.iter().map(|f| w.log_weight(f)).sum();
    let loss: f64 = removed.iter().map(|f| w.log_weight(f)).sum();
    gain - loss
}

/// `min(1, ratio * exp(log_weight_delta))` as an accept decision.
pub(crate) fn metropolis_accept(
    rng: &mut Xoshiro256PlusPlus,
    ratio: &TransitionRatio,
    log_weight_delta: f64,
) -> bool {
    if log_weight_delta == 0.0 {
        if let TransitionRatio::Exact { num, den } = ratio {
            if num >= den {
                return true;
            }
            return rng.gen_range(0.0..1.0) < *num as f64 / *den as f64;
        }
    }
    let ln_acc = ratio.ln() + log_weight_delta;
    if ln_acc >= 0.0 {
        return true;
    }
    rng.gen_range(0.0f64..1.0).ln() < ln_acc
}

// ---------------------------------------------------------------------------
// Sequence chains
// ---------------------------------------------------------------------------

/// Structural edit of a multigraph proposal: the edge swap
/// `(a,x,c),(b,y,d) -> (a,x,d),(b,y,c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphEdit {
    SelfLoop,
    Swap { a: u32, x: u32, c: u32, b: u32, y: u32, d: u32 },
}

impl GraphEdit {
    pub fn inverse(&self) -> GraphEdit {
        match *self {
            GraphEdit::SelfLoop => GraphEdit::SelfLoop,
            GraphEdit::Swap { a, x, c, b, y, d } => GraphEdit::Swap { a, x, c: d, b, y, d: c },
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphProposal {
    pub edit: GraphEdit,
    pub removed: Vec<Fingerprint>,
    pub added: Vec<Fingerprint>,
}

impl GraphProposal {
    fn self_loop() -> Self {
        Self { edit: GraphEdit::SelfLoop, removed: Vec::new(), added: Vec::new() }
    }

    pub fn is_self_loop(&self) -> bool {
        matches!(self.edit, GraphEdit::SelfLoop)
    }
}

struct GraphReference {
    bjdm: Bjdm,
    left_degrees: Vec<usize>,
    right_degrees: Vec<usize>,
}

/// A single Markov chain over port-labeled bipartite multigraphs.
pub struct SequenceChain {
    graph: BipartiteMultigraph,
    groups: Option<DuplicateGroups>,
    rng: Xoshiro256PlusPlus,
    sampler: SamplerId,
    left_pairs: ClassPairSampler,
    right_pairs: ClassPairSampler,
    port_offsets: Vec<u64>,
    options: ChainOptions,
    reference: Option<GraphReference>,
    scratch: Vec<u64>,
    template: SequenceDataset,
    steps: u64,
    accepted: u64,
}

impl SequenceChain {
    pub fn new(
        observed: &SequenceDataset,
        sampler: SamplerId,
        seed: u64,
        options: ChainOptions,
    ) -> Result<Self> {
        if !sampler.is_sequence_sampler() {
            return Err(Error::SamplerMismatch {
                sampler: sampler.name().to_string(),
                kind: "sequence".to_string(),
            });
        }
        let graph = BipartiteMultigraph::from_dataset(observed);
        let groups = sampler
            .uses_multiplicity_correction()
            .then(|| DuplicateGroups::from_rows(observed.sequences().iter().map(Vec::as_slice)));
        // Left pairs may repeat a vertex (a sequence can swap two of its own
        // ports); right pairs must be distinct.
        let left_pairs = ClassPairSampler::with_replacement(graph.left_classes());
        let right_pairs = ClassPairSampler::distinct(graph.right_classes());
        let mut port_offsets = Vec::with_capacity(graph.num_left() + 1);
        let mut acc = 0u64;
        port_offsets.push(0);
        for v in 0..graph.num_left() as u32 {
            acc += graph.left_degree(v) as u64;
            port_offsets.push(acc);
        }
        let reference = options.check_invariants.then(|| GraphReference {
            bjdm: graph.bjdm(),
            left_degrees: (0..graph.num_left() as u32).map(|v| graph.left_degree(v)).collect(),
            right_degrees: (0..graph.num_right() as u32).map(|w| graph.right_degree(w)).collect(),
        });
        Ok(Self {
            graph,
            groups,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            sampler,
            left_pairs,
            right_pairs,
            port_offsets,
            options,
            reference,
            scratch: Vec::new(),
            template: observed.clone(),
            steps: 0,
            accepted: 0,
        })
    }

    pub fn graph(&self) -> &BipartiteMultigraph {
        &self.graph
    }

    pub fn sampler(&self) -> SamplerId {
        self.sampler
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn bjdm(&self) -> Bjdm {
        self.graph.bjdm()
    }

    pub fn dataset(&self) -> SequenceDataset {
        self.graph.to_dataset(&self.template)
    }

    pub fn propose(&mut self) -> GraphProposal {
        match self.sampler {
            SamplerId::AliceS => self.propose_restricted_swap(),
            SamplerId::GmmtS => self.propose_degree_swap(),
            _ => unreachable!("matrix sampler on sequence chain"),
        }
    }

    /// Heads: two not-necessarily-distinct left vertices of equal degree,
    /// then a uniform pair of their edges with different right endpoints.
    /// Tails: two distinct right vertices of equal degree, one uniform
    /// incident edge each.
    fn propose_restricted_swap(&mut self) -> GraphProposal {
        if self.rng.gen_bool(0.5) {
            let Some(m) = self.left_pairs.sample(&mut self.rng) else {
                return GraphProposal::self_loop();
            };
            let class = self.graph.left_classes().members(m as usize);
            let (i, j) = with_replacement_pair(&mut self.rng, class.len());
            let (a, b) = (class[i], class[j]);
            let Some((x, y)) = self.sample_differing_ports(a, b) else {
                return GraphProposal::self_loop();
            };
            let c = self.graph.ports(a)[x as usize];
            let d = self.graph.ports(b)[y as usize];
            self.swap_proposal(a, x, c, b, y, d)
        } else {
            let Some(n) = self.right_pairs.sample(&mut self.rng) else {
                return GraphProposal::self_loop();
            };
            let class = self.graph.right_classes().members(n as usize);
            let (i, j) = distinct_pair(&mut self.rng, class.len());
            let (c, d) = (class[i], class[j]);
            let inc_c = self.graph.incidence(c);
            let inc_d = self.graph.incidence(d);
            let (a, x) = inc_c[self.rng.gen_range(0..inc_c.len())];
            let (b, y) = inc_d[self.rng.gen_range(0..inc_d.len())];
            self.swap_proposal(a, x, c, b, y, d)
        }
    }

    /// Uniform member of `{(x, y) : ports(a)[x] != ports(b)[y]}`, or `None`
    /// when the set is empty. Rejection sampling with an exact enumeration
    /// fallback keeps the draw uniform and bounded.
    fn sample_differing_ports(&mut self, a: u32, b: u32) -> Option<(u32, u32)> {
        let pa = self.graph.ports(a);
        let pb = self.graph.ports(b);
        let mut counts: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
        for &w in pa {
            *counts.entry(w).or_insert(0) += 1;
        }
        let invalid: u64 = pb.iter().map(|w| counts.get(w).copied().unwrap_or(0)).sum();
        let total = pa.len() as u64 * pb.len() as u64;
        if invalid == total {
            return None;
        }
        for _ in 0..64 {
            let x = self.rng.gen_range(0..pa.len());
            let y = self.rng.gen_range(0..pb.len());
            if pa[x] != pb[y] {
                return Some((x as u32, y as u32));
            }
        }
        let valid: Vec<(u32, u32)> = (0..pa.len())
            .flat_map(|x| (0..pb.len()).map(move |y| (x as u32, y as u32)))
            .filter(|&(x, y)| pa[x as usize] != pb[y as usize])
            .collect();
        Some(valid[self.rng.gen_range(0..valid.len())])
    }

    fn swap_proposal(&self, a: u32, x: u32, c: u32, b: u32, y: u32, d: u32) -> GraphProposal {
        debug_assert_ne!(c, d);
        let (removed, added) = if a == b {
            let mut seq = self.graph.ports(a).to_vec();
            let before = fingerprint_of(&seq);
            seq[x as usize] = d;
            seq[y as usize] = c;
            (vec![before], vec![seq.into_boxed_slice()])
        } else {
            let mut sa = self.graph.ports(a).to_vec();
            let mut sb = self.graph.ports(b).to_vec();
            let before = vec![fingerprint_of(&sa), fingerprint_of(&sb)];
            sa[x as usize] = d;
            sb[y as usize] = c;
            (before, vec![sa.into_boxed_slice(), sb.into_boxed_slice()])
        };
        GraphProposal { edit: GraphEdit::Swap { a, x, c, b, y, d }, removed, added }
    }

    fn uniform_port(&mut self) -> (u32, u32) {
        let total = *self.port_offsets.last().unwrap();
        let t = self.rng.gen_range(0..total);
        let v = self.port_offsets.partition_point(|&o| o <= t) - 1;
        (v as u32, (t - self.port_offsets[v]) as u32)
    }

    /// Degree-sequence-preserving baseline: swap the endpoints of two
    /// uniform edges. Parallel edges are legal, so every draw with distinct
    /// right endpoints is admissible.
    fn propose_degree_swap(&mut self) -> GraphProposal {
        let (a, x) = self.uniform_port();
        let (b, y) = self.uniform_port();
        if a == b && x == y {
            return GraphProposal::self_loop();
        }
        let c = self.graph.ports(a)[x as usize];
        let d = self.graph.ports(b)[y as usize];
        if c == d {
            return GraphProposal::self_loop();
        }
        GraphProposal {
            edit: GraphEdit::Swap { a, x, c, b, y, d },
            removed: Vec::new(),
            added: Vec::new(),
        }
    }

    pub fn mh_step(&mut self, proposal: &GraphProposal) -> Result<StepOutcome> {
        self.steps += 1;
        if proposal.is_self_loop() {
            return Ok(StepOutcome { accepted: true, self_loop: true });
        }
        let accepted = if let Some(groups) = &self.groups {
            let ratio = groups.transition_ratio(&proposal.removed, &proposal.added);
            metropolis_accept(
                &mut self.rng,
                &ratio,
                weight_delta(&self.options.weight, &proposal.removed, &proposal.added),
            )
        } else {
            true
        };
        if accepted {
            if let GraphEdit::Swap { a, x, c, b, y, d } = proposal.edit {
                self.graph.apply_swap(a, x, c, b, y, d);
            }
            if let Some(groups) = &mut self.groups {
                groups.apply_update(&proposal.removed, &proposal.added);
            }
            self.accepted += 1;
            self.check_invariants()?;
        }
        Ok(StepOutcome { accepted, self_loop: false })
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let proposal = self.propose();
        self.mh_step(&proposal)
    }

    fn check_invariants(&mut self) -> Result<()> {
        let Some(reference) = &self.reference else {
            return Ok(());
        };
        for (v, &expected) in reference.left_degrees.iter().enumerate() {
            if self.graph.left_degree(v as u32) != expected {
                return Err(self.violation(format!("left degree of {v} drifted")));
            }
        }
        for (w, &expected) in reference.right_degrees.iter().enumerate() {
            if self.graph.right_degree(w as u32) != expected {
                return Err(self.violation(format!("right degree of {w} drifted")));
            }
        }
        if self.sampler.uses_multiplicity_correction()
            && !self.graph.bjdm_equals(&reference.bjdm, &mut self.scratch)
        {
            return Err(self.violation("joint degree matrix drifted".to_string()));
        }
        if self.accepted.is_multiple_of(4096) {
            self.final_audit()?;
        }
        Ok(())
    }

    pub fn final_audit(&self) -> Result<()> {
        self.graph.audit().map_err(|e| self.violation(format!("{e}")))?;
        if let Some(groups) = &self.groups {
            let fresh = DuplicateGroups::from_rows(
                (0..self.graph.num_left() as u32).map(|v| self.graph.ports(v)),
            );
            if &fresh != groups {
                return Err(self.violation("duplicate groups inconsistent".to_string()));
            }
        }
        Ok(())
    }

    fn violation(&self, msg: String) -> Error {
        Error::InvariantViolation { step: self.steps, msg }
    }
}

// ---------------------------------------------------------------------------
// Chain drivers
// ---------------------------------------------------------------------------

/// Per-chain seed derivation (splitmix64 over seed and chain index), so that
/// `sample_many` output is reproducible and independent of scheduling.
pub fn derive_chain_seed(seed: u64, chain_index: u64) -> u64 {
    let mut z = seed ^ chain_index.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Chain weight `w`: the number of 1-entries of the biadjacency matrix.
pub fn chain_weight_transactional(dataset: &TransactionalDataset) -> u64 {
    dataset.total_items()
}

/// Chain weight `w`: the number of edges of the multigraph.
pub fn chain_weight_sequence(dataset: &SequenceDataset) -> u64 {
    dataset.total_itemsets()
}

/// Runs one chain for `num_swaps` proposer invocations (self-loops count)
/// and converts the final state back to a dataset.
pub fn run_chain(
    observed: &TransactionalDataset,
    sampler: SamplerId,
    num_swaps: u64,
    seed: u64,
    options: &ChainOptions,
) -> Result<TransactionalDataset> {
    let mut chain = MatrixChain::new(observed, sampler, seed, options.clone())?;
    for _ in 0..num_swaps {
        chain.step()?;
    }
    if options.check_invariants {
        chain.final_audit()?;
    }
    Ok(chain.dataset())
}

pub fn run_sequence_chain(
    observed: &SequenceDataset,
    sampler: SamplerId,
    num_swaps: u64,
    seed: u64,
    options: &ChainOptions,
) -> Result<SequenceDataset> {
    let mut chain = SequenceChain::new(observed, sampler, seed, options.clone())?;
    for _ in 0..num_swaps {
        chain.step()?;
    }
    if options.check_invariants {
        chain.final_audit()?;
    }
    Ok(chain.dataset())
}

/// `num_samples` independent chains with derived seeds. Output order is the
/// chain index regardless of completion order; `parallelism = 0` uses the
/// global thread pool.
pub fn sample_many(
    observed: &TransactionalDataset,
    sampler: SamplerId,
    num_swaps: u64,
    num_samples: usize,
    seed: u64,
    parallelism: usize,
    options: &ChainOptions,
) -> Result<Vec<TransactionalDataset>> {
    run_parallel(num_samples, parallelism, |i| {
        run_chain(observed, sampler, num_swaps, derive_chain_seed(seed, i as u64), options)
    })
}

pub fn sample_many_sequences(
    observed: &SequenceDataset,
    sampler: SamplerId,
    num_swaps: u64,
    num_samples: usize,
    seed: u64,
    parallelism: usize,
    options: &ChainOptions,
) -> Result<Vec<SequenceDataset>> {
    run_parallel(num_samples, parallelism, |i| {
        run_sequence_chain(observed, sampler, num_swaps, derive_chain_seed(seed, i as u64), options)
    })
}

/// [`sample_many`] with per-chain wall times, for manifests.
pub fn sample_many_timed(
    observed: &TransactionalDataset,
    sampler: SamplerId,
    num_swaps: u64,
    num_samples: usize,
    seed: u64,
    parallelism: usize,
    options: &ChainOptions,
) -> Result<Vec<(TransactionalDataset, f64)>> {
    run_parallel(num_samples, parallelism, |i| {
        let start = std::time::Instant::now();
        let out = run_chain(observed, sampler, num_swaps, derive_chain_seed(seed, i as u64), options)?;
        Ok((out, start.elapsed().as_secs_f64()))
    })
}

/// [`sample_many_sequences`] with per-chain wall times.
pub fn sample_many_sequences_timed(
    observed: &SequenceDataset,
    sampler: SamplerId,
    num_swaps: u64,
    num_samples: usize,
    seed: u64,
    parallelism: usize,
    options: &ChainOptions,
) -> Result<Vec<(SequenceDataset, f64)>> {
    run_parallel(num_samples, parallelism, |i| {
        let start = std::time::Instant::now();
        let out =
            run_sequence_chain(observed, sampler, num_swaps, derive_chain_seed(seed, i as u64), options)?;
        Ok((out, start.elapsed().as_secs_f64()))
    })
}

fn run_parallel<T: Send>(
    n: usize,
    parallelism: usize,
    job: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("number of samples must be at least 1".to_string()));
    }
    if parallelism == 1 {
        return (0..n).map(&job).collect();
    }
    let run = || (0..n).into_par_iter().map(&job).collect::<Result<Vec<T>>>();
    if parallelism == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(run)
    }
}
