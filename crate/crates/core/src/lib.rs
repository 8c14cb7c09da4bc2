//! Null-model sampling for transactional and sequence datasets.
//!
//! The datasets in the null model preserve the bipartite joint degree
//! matrix of the observed dataset's bipartite (multi-)graph — and with it
//! the transaction-length distribution, the item supports (itemset
//! multi-supports for sequences), and the caterpillar count. Samples are
//! drawn by Markov chains over restricted swap operations with a
//! Metropolis-Hastings multiplicity correction, alongside the classic
//! margin-preserving baselines, and feed resampling-based hypothesis
//! testing of data-mining results.

pub mod bipartite;
pub mod dataset;
mod error;
pub mod mining;
pub mod multiplicity;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
