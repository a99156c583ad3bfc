//! Stateless keyed random streams.
//!
//! Every random draw in the repository and the simulator comes from a ChaCha8
//! stream whose key is `(seed, round, purpose, index)`, so a draw never depends
//! on how many other draws happened before it or on which thread made them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Which decomposition term the repository actualizes.
    Term = 1,
    /// An agent's measurement time.
    Timing = 2,
    /// An agent's own input choice.
    Input = 3,
    /// The value a forcing repository commits an agent's input to.
    ForcedInput = 4,
}

pub fn stream(seed: u64, round: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, round, purpose as u64, index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// One uniform draw in `[0, 1)` from a keyed stream.
pub fn uniform(seed: u64, round: u64, purpose: Purpose, index: u64) -> f64 {
    stream(seed, round, purpose, index).random::<f64>()
}

/// Inverse-CDF sample from a cumulative weight vector.
pub fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    let total = cumulative.last().copied().unwrap_or(0.0);
    let target = u * total;
    cumulative
        .partition_point(|&c| c <= target)
        .min(cumulative.len().saturating_sub(1))
}

/// Sample an index from a probability vector.
pub fn sample_discrete(probs: &[f64], u: f64) -> usize {
    let cumulative: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    sample_cumulative(&cumulative, u)
}
