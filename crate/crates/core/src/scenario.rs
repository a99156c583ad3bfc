//! Measurement scenarios and the mixed-radix indexing shared by every table.
//!
//! Joint inputs and joint outputs are flattened lexicographically with party 0
//! as the most significant digit. Labels are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on any enumerated object count (tables, strategy spaces).
pub const MAX_ENUMERATED: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    input_cards: Vec<usize>,
    output_cards: Vec<usize>,
}

impl Scenario {
    pub fn new(input_cards: Vec<usize>, output_cards: Vec<usize>) -> Result<Self> {
        if input_cards.is_empty() {
            return Err(Error::InvalidScenario("at least one party is required".into()));
        }
        if input_cards.len() != output_cards.len() {
            return Err(Error::InvalidScenario(format!(
                "{} input cardinalities but {} output cardinalities",
                input_cards.len(),
                output_cards.len()
            )));
        }
        if input_cards.iter().chain(&output_cards).any(|&c| c == 0) {
            return Err(Error::InvalidScenario("cardinalities must be positive".into()));
        }
        let scenario = Self {
            input_cards,
            output_cards,
        };
        let table = checked_product(&scenario.input_cards)
            .zip(checked_product(&scenario.output_cards))
            .and_then(|(m, d)| m.checked_mul(d));
        match table {
            Some(n) if n <= MAX_ENUMERATED => Ok(scenario),
            Some(n) => Err(Error::ScenarioTooLarge {
                what: "probability table",
                count: n,
                limit: MAX_ENUMERATED,
            }),
            None => Err(Error::ScenarioTooLarge {
                what: "probability table",
                count: u128::MAX,
                limit: MAX_ENUMERATED,
            }),
        }
    }

    /// `n` parties, each with binary inputs and outputs.
    pub fn binary(n: usize) -> Self {
        Self::new(vec![2; n], vec![2; n]).expect("binary scenario")
    }

    pub fn n_parties(&self) -> usize {
        self.input_cards.len()
    }

    pub fn input_cards(&self) -> &[usize] {
        &self.input_cards
    }

    pub fn output_cards(&self) -> &[usize] {
        &self.output_cards
    }

    pub fn n_joint_inputs(&self) -> usize {
        self.input_cards.iter().product()
    }

    pub fn n_joint_outputs(&self) -> usize {
        self.output_cards.iter().product()
    }

    /// True for two parties with binary inputs and outputs.
    pub fn is_2222(&self) -> bool {
        self.input_cards == [2, 2] && self.output_cards == [2, 2]
    }

    pub fn encode_inputs(&self, inputs: &[usize]) -> usize {
        encode(&self.input_cards, inputs)
    }

    pub fn decode_inputs(&self, index: usize) -> Vec<usize> {
        decode(&self.input_cards, index)
    }

    pub fn encode_outputs(&self, outputs: &[usize]) -> usize {
        encode(&self.output_cards, outputs)
    }

    pub fn decode_outputs(&self, index: usize) -> Vec<usize> {
        decode(&self.output_cards, index)
    }

    /// Joint input index with party `party`'s digit replaced by `value`.
    pub fn with_input(&self, joint: usize, party: usize, value: usize) -> usize {
        let mut digits = self.decode_inputs(joint);
        digits[party] = value;
        self.encode_inputs(&digits)
    }

    pub fn describe(&self) -> String {
        format!("inputs {:?}, outputs {:?}", self.input_cards, self.output_cards)
    }
}

pub(crate) fn checked_product(cards: &[usize]) -> Option<u128> {
    cards.iter().try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
}

/// Mixed-radix encoding, first digit most significant.
pub fn encode(radices: &[usize], digits: &[usize]) -> usize {
    debug_assert_eq!(radices.len(), digits.len());
    radices.iter().zip(digits).fold(0, |acc, (&r, &d)| {
        debug_assert!(d < r);
        acc * r + d
    })
}

pub fn decode(radices: &[usize], mut index: usize) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (slot, &r) in digits.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
    digits
}

/// Party label used in human-readable output: 0 → `A`, 1 → `B`, ...
pub fn party_label(party: usize) -> String {
    if party < 26 {
        char::from(b'A' + party as u8).to_string()
    } else {
        format!("P{party}")
    }
}
