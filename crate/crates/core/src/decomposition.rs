//! Time-ordered decomposition of behaviors.
//!
//! Along an ordering `π`, a no-signaling behavior factors into chain
//! conditionals
//!
//! ```text
//! P(a⃗|x⃗) = Π_k P(a_πk | x_π1..x_πk, a_π1..a_π(k−1))
//! ```
//!
//! and each conditional is realized by a random response function of the
//! party's history. Sampling every response independently (one draw per
//! history) and substituting earlier outputs into later responses yields a
//! mixture of deterministic assignments in which the `k`-th party reads only
//! the inputs of the parties before it.

use serde::{Deserialize, Serialize};

use crate::assignment::{guard_response_space, ordered_domains, DeterministicAssignment};
use crate::behavior::{chsh_from_correlators, Behavior, EPS_NORM};
use crate::error::{Error, Result};
use crate::ordering::Ordering;
use crate::scenario::{decode, encode, party_label, Scenario};

/// Terms whose weight falls below this are dropped and the rest renormalized.
pub const PRUNE_WEIGHT: f64 = 1e-12;

/// Histories reached with probability at most this get the filler column.
const ZERO_REACH: f64 = 1e-15;

/// Conditional used where the conditioning history has zero probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filler {
    /// Point mass on output 0.
    #[default]
    PointZero,
    Uniform,
}

/// `P(a_πk | x_π1..x_πk, a_π1..a_π(k−1))` as a column-stochastic table.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFactor {
    party: usize,
    /// Digits of a history: inputs of the first `k` parties in order, then the
    /// outputs of the first `k − 1`.
    history_radices: Vec<usize>,
    n_outputs: usize,
    probs: Vec<f64>,
    filler: Vec<bool>,
}

impl ChainFactor {
    pub fn party(&self) -> usize {
        self.party
    }

    pub fn n_histories(&self) -> usize {
        self.filler.len()
    }

    pub fn history_radices(&self) -> &[usize] {
        &self.history_radices
    }

    pub fn encode_history(&self, history: &[usize]) -> usize {
        encode(&self.history_radices, history)
    }

    pub fn decode_history(&self, index: usize) -> Vec<usize> {
        decode(&self.history_radices, index)
    }

    /// Distribution of the party's output given a history index.
    pub fn conditional(&self, history: usize) -> &[f64] {
        &self.probs[history * self.n_outputs..(history + 1) * self.n_outputs]
    }

    pub fn is_filler(&self, history: usize) -> bool {
        self.filler[history]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFactors {
    order: Ordering,
    scenario: Scenario,
    factors: Vec<ChainFactor>,
}

impl ChainFactors {
    pub fn order(&self) -> &Ordering {
        &self.order
    }

    pub fn factors(&self) -> &[ChainFactor] {
        &self.factors
    }

    /// `(factor index, decoded history)` for every filler column.
    pub fn filler_mask(&self) -> Vec<(usize, Vec<usize>)> {
        self.factors
            .iter()
            .enumerate()
            .flat_map(|(k, f)| {
                (0..f.n_histories())
                    .filter(|&h| f.is_filler(h))
                    .map(move |h| (k, f.decode_history(h)))
            })
            .collect()
    }

    /// Product of the chain factors at one context.
    pub fn product(&self, inputs: &[usize], outputs: &[usize]) -> f64 {
        let parties = self.order.parties();
        let mut history = Vec::with_capacity(2 * parties.len());
        self.factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                history.clear();
                history.extend(parties[..=k].iter().map(|&p| inputs[p]));
                history.extend(parties[..k].iter().map(|&p| outputs[p]));
                f.conditional(f.encode_history(&history))[outputs[parties[k]]]
            })
            .product()
    }

    pub fn to_behavior(&self) -> Behavior {
        Behavior::from_fn(self.scenario.clone(), |x, a| self.product(x, a))
    }
}

/// Factors a no-signaling behavior along `order`.
pub fn chain_factors(behavior: &Behavior, order: &Ordering) -> Result<ChainFactors> {
    chain_factors_with_filler(behavior, order, Filler::PointZero)
}

pub fn chain_factors_with_filler(behavior: &Behavior, order: &Ordering, filler: Filler) -> Result<ChainFactors> {
    order.check_parties(behavior.scenario().n_parties())?;
    behavior.require_no_signaling(EPS_NORM)?;
    Ok(chain_factors_unchecked(behavior, order, filler))
}

/// Chain factors computed from prefix marginals with later inputs set to 0.
/// Only meaningful when prefix marginals ignore later inputs.
fn chain_factors_unchecked(behavior: &Behavior, order: &Ordering, filler: Filler) -> ChainFactors {
    let s = behavior.scenario();
    let parties = order.parties();
    let in_cards = s.input_cards();
    let out_cards = s.output_cards();
    let mut factors = Vec::with_capacity(parties.len());
    for k in 0..parties.len() {
        let prefix = &parties[..=k];
        let party = parties[k];
        let d = out_cards[party];
        let input_radices: Vec<usize> = prefix.iter().map(|&p| in_cards[p]).collect();
        let earlier_out_radices: Vec<usize> = prefix[..k].iter().map(|&p| out_cards[p]).collect();
        let n_prefix_inputs: usize = input_radices.iter().product();
        let n_earlier_outputs: usize = earlier_out_radices.iter().product();
        let n_hist = n_prefix_inputs * n_earlier_outputs;
        let mut probs = vec![0.0; n_hist * d];
        let mut filler_mask = vec![false; n_hist];
        let mut x = vec![0; s.n_parties()];
        for pi in 0..n_prefix_inputs {
            let prefix_inputs = decode(&input_radices, pi);
            x.iter_mut().for_each(|v| *v = 0);
            for (&p, &v) in prefix.iter().zip(&prefix_inputs) {
                x[p] = v;
            }
            // Marginal of the prefix outputs, earlier parties most significant
            // and the current party as the last digit.
            let marginal = behavior.marginal(prefix, s.encode_inputs(&x));
            for ei in 0..n_earlier_outputs {
                let h = pi * n_earlier_outputs + ei;
                let column = &marginal[ei * d..(ei + 1) * d];
                let reach: f64 = column.iter().map(|p| p.max(0.0)).sum();
                let slot = &mut probs[h * d..(h + 1) * d];
                if reach <= ZERO_REACH {
                    filler_mask[h] = true;
                    match filler {
                        Filler::PointZero => slot[0] = 1.0,
                        Filler::Uniform => slot.fill(1.0 / d as f64),
                    }
                } else {
                    for (dst, &p) in slot.iter_mut().zip(column) {
                        *dst = p.max(0.0) / reach;
                    }
                }
            }
        }
        factors.push(ChainFactor {
            party,
            history_radices: [input_radices, earlier_out_radices].concat(),
            n_outputs: d,
            probs,
            filler: filler_mask,
        });
    }
    ChainFactors {
        order: order.clone(),
        scenario: s.clone(),
        factors,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub weight: f64,
    pub assignment: DeterministicAssignment,
}

/// A mixture of deterministic assignments that all respect `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    order: Ordering,
    terms: Vec<DecompositionTerm>,
}

impl Decomposition {
    /// Checks positivity, normalization and order respect of every term.
    pub fn new(order: Ordering, terms: Vec<DecompositionTerm>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::WeightSum(0.0));
        };
        let scenario = first.assignment.scenario();
        order.check_parties(scenario.n_parties())?;
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > EPS_NORM {
            return Err(Error::WeightSum(total));
        }
        for t in &terms {
            if t.weight.is_nan() || t.weight <= 0.0 {
                return Err(Error::InvalidBehavior(format!("non-positive term weight {}", t.weight)));
            }
            if t.assignment.scenario() != scenario {
                return Err(Error::ScenarioMismatch("decomposition terms differ in scenario".into()));
            }
            if !t.assignment.respects_order(&order) {
                return Err(Error::InvalidAssignment(format!("term does not respect order {order}")));
            }
        }
        Ok(Self { order, terms })
    }

    pub fn order(&self) -> &Ordering {
        &self.order
    }

    pub fn terms(&self) -> &[DecompositionTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scenario(&self) -> &Scenario {
        self.terms[0].assignment.scenario()
    }

    /// Cumulative weights, for inverse-CDF sampling.
    pub fn cumulative_weights(&self) -> Vec<f64> {
        self.terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t.weight;
                Some(*acc)
            })
            .collect()
    }
}

/// Decomposes a no-signaling behavior into assignments respecting `order`.
pub fn decompose_ordered(behavior: &Behavior, order: &Ordering) -> Result<Decomposition> {
    decompose_ordered_with_filler(behavior, order, Filler::PointZero)
}

pub fn decompose_ordered_with_filler(behavior: &Behavior, order: &Ordering, filler: Filler) -> Result<Decomposition> {
    let s = behavior.scenario();
    order.check_parties(s.n_parties())?;
    guard_response_space(s, &ordered_domains(order), "ordered decomposition")?;
    let chain = chain_factors_with_filler(behavior, order, filler)?;
    Ok(couple(&chain))
}

/// One choice point of the product coupling: party `k` (in order) at a prefix
/// input tuple.
struct Slot {
    k: usize,
    /// Index of the prefix input tuple among the first `k + 1` parties.
    prefix_index: usize,
    prefix_inputs: Vec<usize>,
}

/// Product coupling, marginalized onto compiled assignments.
///
/// A compiled assignment only consults each response function at histories
/// consistent with its own earlier outputs, so its weight is the product of the
/// chain conditionals along those histories; the histories it never visits sum
/// out.
fn couple(chain: &ChainFactors) -> Decomposition {
    let s = &chain.scenario;
    let parties = chain.order.parties();
    let n = parties.len();
    let in_cards = s.input_cards();

    let mut slots = Vec::new();
    let mut prefix_radices = Vec::with_capacity(n);
    for (k, &p) in parties.iter().enumerate() {
        prefix_radices.push(in_cards[p]);
        let count: usize = prefix_radices.iter().product();
        for prefix_index in 0..count {
            slots.push(Slot {
                k,
                prefix_index,
                prefix_inputs: decode(&prefix_radices, prefix_index),
            });
        }
    }
    // responses[k][prefix_index] = output chosen for party k.
    let mut responses: Vec<Vec<usize>> = (0..n)
        .map(|k| {
            let count: usize = parties[..=k].iter().map(|&p| in_cards[p]).product();
            vec![0; count]
        })
        .collect();

    let mut terms = Vec::new();
    let mut history = Vec::with_capacity(2 * n);
    search(chain, &slots, 0, 1.0, &mut responses, &mut history, &mut terms);

    let total: f64 = terms.iter().map(|t: &DecompositionTerm| t.weight).sum();
    for t in &mut terms {
        t.weight /= total;
    }
    Decomposition {
        order: chain.order.clone(),
        terms,
    }
}

fn search(
    chain: &ChainFactors,
    slots: &[Slot],
    depth: usize,
    weight: f64,
    responses: &mut [Vec<usize>],
    history: &mut Vec<usize>,
    terms: &mut Vec<DecompositionTerm>,
) {
    let Some(slot) = slots.get(depth) else {
        terms.push(DecompositionTerm {
            weight,
            assignment: compile(chain, responses),
        });
        return;
    };
    let factor = &chain.factors[slot.k];
    history.clear();
    history.extend_from_slice(&slot.prefix_inputs);
    // Earlier parties' outputs on this prefix, from the responses already fixed.
    for j in 0..slot.k {
        history.push(responses[j][prefix_index_of(chain, j, &slot.prefix_inputs)]);
    }
    let column = factor.conditional(factor.encode_history(history)).to_vec();
    for (output, p) in column.into_iter().enumerate() {
        let w = weight * p;
        if w < PRUNE_WEIGHT {
            continue;
        }
        responses[slot.k][slot.prefix_index] = output;
        search(chain, slots, depth + 1, w, responses, history, terms);
    }
}

/// Index of the first `j + 1` entries of `prefix_inputs` as a prefix tuple.
fn prefix_index_of(chain: &ChainFactors, j: usize, prefix_inputs: &[usize]) -> usize {
    let in_cards = chain.scenario.input_cards();
    let parties = chain.order.parties();
    parties[..=j]
        .iter()
        .zip(prefix_inputs)
        .fold(0, |acc, (&p, &v)| acc * in_cards[p] + v)
}

fn compile(chain: &ChainFactors, responses: &[Vec<usize>]) -> DeterministicAssignment {
    let s = &chain.scenario;
    let parties = chain.order.parties();
    let in_cards = s.input_cards();
    let mut outputs = vec![0; parties.len()];
    let table = (0..s.n_joint_inputs())
        .map(|xi| {
            let x = s.decode_inputs(xi);
            let mut prefix = 0;
            for (k, &p) in parties.iter().enumerate() {
                prefix = prefix * in_cards[p] + x[p];
                outputs[p] = responses[k][prefix];
            }
            s.encode_outputs(&outputs)
        })
        .collect();
    DeterministicAssignment::new(s.clone(), table).expect("compiled table is total")
}

/// The mixture described by a decomposition.
pub fn reconstruct(decomposition: &Decomposition) -> Behavior {
    let s = decomposition.scenario().clone();
    let n_out = s.n_joint_outputs();
    let mut probs = vec![0.0; s.n_joint_inputs() * n_out];
    for t in &decomposition.terms {
        for (xi, &ai) in t.assignment.table().iter().enumerate() {
            probs[xi * n_out + ai] += t.weight;
        }
    }
    Behavior::new(s, probs).expect("reconstructed table matches scenario")
}

/// Largest change of a prefix marginal under a change of later inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMembership {
    pub holds: bool,
    pub worst_violation: f64,
    /// `(prefix parties, joint inputs compared)` for the worst violation.
    pub witness: Option<(Vec<usize>, Vec<usize>, Vec<usize>)>,
}

impl OrderedMembership {
    pub fn describe_witness(&self) -> Option<String> {
        self.witness.as_ref().map(|(prefix, x0, x1)| {
            let labels: Vec<String> = prefix.iter().map(|&p| party_label(p)).collect();
            format!(
                "marginal of {{{}}} changes by {:.3e} between inputs {:?} and {:?}",
                labels.join(","),
                self.worst_violation,
                x0,
                x1
            )
        })
    }
}

/// One-way no-signaling along `order`: every prefix's output marginal is
/// independent of the inputs of the parties after it.
pub fn ordered_membership(behavior: &Behavior, order: &Ordering, tol: f64) -> Result<OrderedMembership> {
    let s = behavior.scenario();
    order.check_parties(s.n_parties())?;
    behavior.require_valid(tol)?;
    let parties = order.parties();
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for k in 1..parties.len() {
        let prefix = &parties[..k];
        for xi in 0..s.n_joint_inputs() {
            let x = s.decode_inputs(xi);
            let mut base = x.clone();
            for &p in &parties[k..] {
                base[p] = 0;
            }
            if base == x {
                continue;
            }
            let m0 = behavior.marginal(prefix, s.encode_inputs(&base));
            let m1 = behavior.marginal(prefix, xi);
            let dev = m0.iter().zip(&m1).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            if dev > worst {
                worst = dev;
                witness = Some((prefix.to_vec(), base, x));
            }
        }
    }
    Ok(OrderedMembership {
        holds: worst <= tol,
        worst_violation: worst,
        witness,
    })
}

pub fn in_ordered_polytope(behavior: &Behavior, order: &Ordering, tol: f64) -> bool {
    ordered_membership(behavior, order, tol).is_ok_and(|m| m.holds)
}

/// Decomposes a behavior that is one-way no-signaling along `order` (it need not
/// be no-signaling in the other direction).
pub fn decompose_along_order(behavior: &Behavior, order: &Ordering) -> Result<Decomposition> {
    let s = behavior.scenario();
    let membership = ordered_membership(behavior, order, EPS_NORM)?;
    if !membership.holds {
        return Err(Error::InvalidBehavior(format!(
            "not one-way no-signaling along {order}: {}",
            membership.describe_witness().unwrap_or_default()
        )));
    }
    guard_response_space(s, &ordered_domains(order), "ordered decomposition")?;
    Ok(couple(&chain_factors_unchecked(behavior, order, Filler::PointZero)))
}

/// The eight CHSH expressions `Σ_xy E_xy − 2E_x'y'` and their negations, in the
/// order (minus-sign position `x'y'` = 00, 01, 10, 11) × (sign +, −).
pub fn chsh_facets(behavior: &Behavior) -> Result<[f64; 8]> {
    let e = behavior.correlators()?;
    let total: f64 = e.iter().flatten().sum();
    let mut out = [0.0; 8];
    for (i, (x, y)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let value = total - 2.0 * e[x][y];
        out[2 * i] = value;
        out[2 * i + 1] = -value;
    }
    debug_assert_eq!(out[6], chsh_from_correlators(&e));
    Ok(out)
}

/// Local-polytope membership in the two-party binary scenario: no-signaling
/// and all eight CHSH inequalities hold.
pub fn in_local_polytope_2222(behavior: &Behavior, tol: f64) -> Result<bool> {
    let facets = chsh_facets(behavior)?;
    let no_signaling = behavior.is_no_signaling(tol).is_ok_and(|r| r.holds);
    Ok(no_signaling && facets.iter().all(|&v| v <= 2.0 + tol))
}

/// On-disk representation of a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub order: Ordering,
    pub parties: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub terms: Vec<TermFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermFile {
    pub weight: f64,
    pub table: Vec<(Vec<usize>, Vec<usize>)>,
}

impl From<&Decomposition> for DecompositionFile {
    fn from(d: &Decomposition) -> Self {
        let s = d.scenario();
        Self {
            order: d.order.clone(),
            parties: s.n_parties(),
            inputs: s.input_cards().to_vec(),
            outputs: s.output_cards().to_vec(),
            terms: d
                .terms
                .iter()
                .map(|t| TermFile {
                    weight: t.weight,
                    table: crate::assignment::AssignmentFile::from(&t.assignment).table,
                })
                .collect(),
        }
    }
}

impl TryFrom<DecompositionFile> for Decomposition {
    type Error = Error;

    fn try_from(f: DecompositionFile) -> Result<Self> {
        let terms = f
            .terms
            .into_iter()
            .map(|t| {
                let assignment = DeterministicAssignment::try_from(crate::assignment::AssignmentFile {
                    parties: f.parties,
                    inputs: f.inputs.clone(),
                    outputs: f.outputs.clone(),
                    table: t.table,
                })?;
                Ok(DecompositionTerm {
                    weight: t.weight,
                    assignment,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Decomposition::new(f.order, terms)
    }
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = DecompositionFile::deserialize(deserializer)?;
        Decomposition::try_from(file).map_err(serde::de::Error::custom)
    }
}
