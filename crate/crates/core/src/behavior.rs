//! Conditional probability tables `P(a⃗|x⃗)`, their consistency checks, the CHSH
//! functional and the canonical generators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::DeterministicAssignment;
use crate::error::{Error, Result};
use crate::scenario::{encode, party_label, Scenario};

/// Default tolerance for normalization and consistency checks.
pub const EPS_NORM: f64 = 1e-9;

/// Local bound of the CHSH expression.
pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    /// Row-major: joint input outer, joint output inner.
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub normalized: bool,
    pub entries_in_range: bool,
    /// Largest `|Σ_a P(a|x) − 1|` over joint inputs.
    pub worst_deviation: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.normalized && self.entries_in_range
    }
}

/// Two joint inputs differing only in `changed_party`'s input, under which the
/// marginal of `observed_parties` differs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoSignalingWitness {
    pub changed_party: usize,
    pub observed_parties: Vec<usize>,
    pub inputs: (Vec<usize>, Vec<usize>),
    pub deviation: f64,
}

impl fmt::Display for NoSignalingWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let observed: Vec<String> = self.observed_parties.iter().map(|&p| party_label(p)).collect();
        write!(
            f,
            "marginal of {{{}}} changes by {:.3e} when {}'s input changes (inputs {:?} vs {:?})",
            observed.join(","),
            self.deviation,
            party_label(self.changed_party),
            self.inputs.0,
            self.inputs.1
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoSignalingReport {
    pub holds: bool,
    pub worst_violation: f64,
    /// Witness of the worst violation; `None` when the behavior never signals.
    pub witness: Option<NoSignalingWitness>,
}

impl Behavior {
    /// Wraps a table without checking normalization (see [`Behavior::validate`]).
    pub fn new(scenario: Scenario, probs: Vec<f64>) -> Result<Self> {
        let expected = scenario.n_joint_inputs() * scenario.n_joint_outputs();
        if probs.len() != expected {
            return Err(Error::InvalidBehavior(format!(
                "table has {} entries, scenario ({}) needs {expected}",
                probs.len(),
                scenario.describe()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidBehavior(format!("non-finite entry {p}")));
        }
        Ok(Self { scenario, probs })
    }

    /// Builds the table from `f(joint_inputs, joint_outputs)`.
    pub fn from_fn(scenario: Scenario, f: impl Fn(&[usize], &[usize]) -> f64) -> Self {
        let n_out = scenario.n_joint_outputs();
        let mut probs = Vec::with_capacity(scenario.n_joint_inputs() * n_out);
        for xi in 0..scenario.n_joint_inputs() {
            let x = scenario.decode_inputs(xi);
            for ai in 0..n_out {
                probs.push(f(&x, &scenario.decode_outputs(ai)));
            }
        }
        Self { scenario, probs }
    }

    /// Every output equally likely for every input.
    pub fn uniform(scenario: Scenario) -> Self {
        let p = 1.0 / scenario.n_joint_outputs() as f64;
        Self::from_fn(scenario, |_, _| p)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(a⃗|x⃗)` by flat indices.
    pub fn prob(&self, joint_input: usize, joint_output: usize) -> f64 {
        self.probs[joint_input * self.scenario.n_joint_outputs() + joint_output]
    }

    /// `P(a⃗|x⃗)` by per-party labels.
    pub fn get(&self, inputs: &[usize], outputs: &[usize]) -> f64 {
        self.prob(
            self.scenario.encode_inputs(inputs),
            self.scenario.encode_outputs(outputs),
        )
    }

    /// Output distribution for one joint input.
    pub fn row(&self, joint_input: usize) -> &[f64] {
        let n = self.scenario.n_joint_outputs();
        &self.probs[joint_input * n..(joint_input + 1) * n]
    }

    /// Marginal distribution of the outputs of `parties` (in that order, first
    /// most significant) at a joint input.
    pub fn marginal(&self, parties: &[usize], joint_input: usize) -> Vec<f64> {
        let out_cards = self.scenario.output_cards();
        let radices: Vec<usize> = parties.iter().map(|&p| out_cards[p]).collect();
        let mut marginal = vec![0.0; radices.iter().product()];
        let mut digits = Vec::with_capacity(parties.len());
        for (ai, &p) in self.row(joint_input).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let a = self.scenario.decode_outputs(ai);
            digits.clear();
            digits.extend(parties.iter().map(|&q| a[q]));
            marginal[encode(&radices, &digits)] += p;
        }
        marginal
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let n_out = self.scenario.n_joint_outputs();
        let mut worst: f64 = 0.0;
        let mut normalized = true;
        for row in self.probs.chunks(n_out) {
            let dev = (row.iter().sum::<f64>() - 1.0).abs();
            if dev.is_nan() || dev > tol {
                normalized = false;
            }
            worst = worst.max(dev);
        }
        let entries_in_range = self.probs.iter().all(|&p| p >= -tol && p <= 1.0 + tol);
        ValidationReport {
            normalized,
            entries_in_range,
            worst_deviation: worst,
        }
    }

    pub(crate) fn require_valid(&self, tol: f64) -> Result<()> {
        let report = self.validate(tol);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidBehavior(format!(
                "normalized: {}, entries in range: {}, worst row deviation {:.3e}",
                report.normalized, report.entries_in_range, report.worst_deviation
            )))
        }
    }

    /// Checks that, for every party, flipping its input leaves the joint
    /// marginal of all other parties unchanged.
    pub fn is_no_signaling(&self, tol: f64) -> Result<NoSignalingReport> {
        self.require_valid(tol)?;
        let s = &self.scenario;
        let n = s.n_parties();
        let mut worst: f64 = 0.0;
        let mut witness = None;
        for party in 0..n {
            let others: Vec<usize> = (0..n).filter(|&q| q != party).collect();
            if others.is_empty() {
                continue;
            }
            for xi in 0..s.n_joint_inputs() {
                let x = s.decode_inputs(xi);
                if x[party] == 0 {
                    continue;
                }
                let base = s.with_input(xi, party, 0);
                let dev = max_abs_diff(&self.marginal(&others, base), &self.marginal(&others, xi));
                if dev > worst {
                    worst = dev;
                    witness = Some(NoSignalingWitness {
                        changed_party: party,
                        observed_parties: others.clone(),
                        inputs: (s.decode_inputs(base), x),
                        deviation: dev,
                    });
                }
            }
        }
        let holds = worst <= tol;
        Ok(NoSignalingReport {
            holds,
            worst_violation: worst,
            witness: if holds && worst == 0.0 { None } else { witness },
        })
    }

    /// Fails with [`Error::NotNoSignaling`] unless the behavior is valid and
    /// no-signaling at `tol`.
    pub fn require_no_signaling(&self, tol: f64) -> Result<()> {
        let report = self.is_no_signaling(tol)?;
        match report {
            NoSignalingReport { holds: true, .. } => Ok(()),
            NoSignalingReport { witness: Some(w), .. } => Err(Error::NotNoSignaling(w)),
            NoSignalingReport { witness: None, .. } => unreachable!("violation without witness"),
        }
    }

    /// Correlator `E_xy = Σ_ab (−1)^(a+b) P(ab|xy)` in the 2222 scenario.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        self.require_2222()?;
        Ok(correlator_unchecked(self, x, y))
    }

    /// `S = Σ_xy (−1)^(xy) E_xy`.
    pub fn chsh_value(&self) -> Result<f64> {
        self.require_2222()?;
        Ok(chsh_from_correlators(&correlators_unchecked(self)))
    }

    /// All four correlators, indexed `[x][y]`.
    pub fn correlators(&self) -> Result<[[f64; 2]; 2]> {
        self.require_2222()?;
        Ok(correlators_unchecked(self))
    }

    pub(crate) fn require_2222(&self) -> Result<()> {
        if self.scenario.is_2222() {
            Ok(())
        } else {
            Err(Error::WrongScenario {
                expected: "two parties with binary inputs and outputs",
                found: self.scenario.describe(),
            })
        }
    }

    /// Independent composition: `self`'s parties first, then `other`'s.
    pub fn product(&self, other: &Behavior) -> Result<Behavior> {
        let cat = |a: &[usize], b: &[usize]| [a, b].concat();
        let scenario = Scenario::new(
            cat(self.scenario.input_cards(), other.scenario.input_cards()),
            cat(self.scenario.output_cards(), other.scenario.output_cards()),
        )?;
        let k = self.scenario.n_parties();
        Ok(Behavior::from_fn(scenario, |x, a| {
            self.get(&x[..k], &a[..k]) * other.get(&x[k..], &a[k..])
        }))
    }

    /// Relabels parties: party `j` of the result is party `perm[j]` of `self`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<Behavior> {
        let n = self.scenario.n_parties();
        crate::ordering::Ordering::new(perm.to_vec())?.check_parties(n)?;
        let pick = |cards: &[usize]| perm.iter().map(|&p| cards[p]).collect::<Vec<_>>();
        let scenario = Scenario::new(pick(self.scenario.input_cards()), pick(self.scenario.output_cards()))?;
        Ok(Behavior::from_fn(scenario, |x, a| {
            let (mut ox, mut oa) = (vec![0; n], vec![0; n]);
            for (j, &p) in perm.iter().enumerate() {
                ox[p] = x[j];
                oa[p] = a[j];
            }
            self.get(&ox, &oa)
        }))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn correlator_unchecked(b: &Behavior, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for bb in 0..2 {
            let sign = if (a + bb) % 2 == 0 { 1.0 } else { -1.0 };
            e += sign * b.get(&[x, y], &[a, bb]);
        }
    }
    e
}

fn correlators_unchecked(b: &Behavior) -> [[f64; 2]; 2] {
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, slot) in row.iter_mut().enumerate() {
            *slot = correlator_unchecked(b, x, y);
        }
    }
    e
}

pub(crate) fn chsh_from_correlators(e: &[[f64; 2]; 2]) -> f64 {
    e[0][0] + e[0][1] + e[1][0] - e[1][1]
}

/// Free-function form of [`Behavior::validate`].
pub fn validate(behavior: &Behavior, tol: f64) -> ValidationReport {
    behavior.validate(tol)
}

/// Free-function form of [`Behavior::is_no_signaling`].
pub fn is_no_signaling(behavior: &Behavior, tol: f64) -> Result<NoSignalingReport> {
    behavior.is_no_signaling(tol)
}

/// Free-function form of [`Behavior::chsh_value`].
pub fn chsh_value(behavior: &Behavior) -> Result<f64> {
    behavior.chsh_value()
}

/// `P(a,b|x,y) = 1/2` when `a ⊕ b = x·y`.
pub fn make_pr_box() -> Behavior {
    Behavior::from_fn(Scenario::binary(2), |x, a| {
        if (a[0] ^ a[1]) == (x[0] & x[1]) {
            0.5
        } else {
            0.0
        }
    })
}

/// One of the eight PR-box symmetries: `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
pub fn make_pr_box_variant(alpha: bool, beta: bool, gamma: bool) -> Behavior {
    let (al, be, ga) = (alpha as usize, beta as usize, gamma as usize);
    Behavior::from_fn(Scenario::binary(2), |x, a| {
        let target = (x[0] & x[1]) ^ (al & x[0]) ^ (be & x[1]) ^ ga;
        if (a[0] ^ a[1]) == target {
            0.5
        } else {
            0.0
        }
    })
}

/// Binary behavior with uniform marginals and the given correlators `[x][y]`.
pub fn from_correlators(e: [[f64; 2]; 2]) -> Behavior {
    Behavior::from_fn(Scenario::binary(2), |x, a| {
        let sign = if (a[0] ^ a[1]) == 0 { 1.0 } else { -1.0 };
        (1.0 + sign * e[x[0]][x[1]]) / 4.0
    })
}

/// Singlet statistics for coplanar spin measurements:
/// `E_xy = −cos(θ_A[x] − θ_B[y])`.
pub fn make_singlet_behavior(angles_a: [f64; 2], angles_b: [f64; 2]) -> Behavior {
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, slot) in row.iter_mut().enumerate() {
            *slot = -(angles_a[x] - angles_b[y]).cos();
        }
    }
    from_correlators(e)
}

/// Measurement angles `([θ_A0, θ_A1], [θ_B0, θ_B1])` at which the singlet
/// reaches `|S| = 2√2` (with `S = −2√2`).
pub const SINGLET_OPTIMAL_ANGLES: ([f64; 2], [f64; 2]) = (
    [0.0, std::f64::consts::FRAC_PI_2],
    [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4],
);

/// The CHSH-maximal quantum behavior: `S = 2√2`.
pub fn make_tsirelson() -> Behavior {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    from_correlators([[c, c], [c, -c]])
}

/// Point distribution on the assignment's output for every joint input.
pub fn behavior_from_assignment(assignment: &DeterministicAssignment) -> Behavior {
    let scenario = assignment.scenario().clone();
    let n_out = scenario.n_joint_outputs();
    let mut probs = vec![0.0; scenario.n_joint_inputs() * n_out];
    for (xi, &ai) in assignment.table().iter().enumerate() {
        probs[xi * n_out + ai] = 1.0;
    }
    Behavior { scenario, probs }
}

/// Convex combination of behaviors over a shared scenario.
pub fn mix(terms: &[(f64, &Behavior)]) -> Result<Behavior> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::WeightSum(0.0));
    };
    if let Some((w, _)) = terms.iter().find(|(w, _)| w.is_nan() || *w < 0.0) {
        return Err(Error::InvalidBehavior(format!("negative mixture weight {w}")));
    }
    let total: f64 = terms.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > EPS_NORM {
        return Err(Error::WeightSum(total));
    }
    let scenario = first.scenario.clone();
    let mut probs = vec![0.0; first.probs.len()];
    for (w, b) in terms {
        if b.scenario != scenario {
            return Err(Error::ScenarioMismatch(format!(
                "{} vs {}",
                scenario.describe(),
                b.scenario.describe()
            )));
        }
        for (acc, p) in probs.iter_mut().zip(&b.probs) {
            *acc += w * p;
        }
    }
    Ok(Behavior { scenario, probs })
}

/// On-disk representation of a behavior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BehaviorFile {
    pub parties: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub probs: Vec<f64>,
}

impl From<&Behavior> for BehaviorFile {
    fn from(b: &Behavior) -> Self {
        Self {
            parties: b.scenario.n_parties(),
            inputs: b.scenario.input_cards().to_vec(),
            outputs: b.scenario.output_cards().to_vec(),
            probs: b.probs.clone(),
        }
    }
}

impl TryFrom<BehaviorFile> for Behavior {
    type Error = Error;

    fn try_from(f: BehaviorFile) -> Result<Self> {
        if f.parties != f.inputs.len() || f.parties != f.outputs.len() {
            return Err(Error::Format(format!(
                "`parties` is {} but {} input and {} output cardinalities given",
                f.parties,
                f.inputs.len(),
                f.outputs.len()
            )));
        }
        Behavior::new(Scenario::new(f.inputs, f.outputs)?, f.probs)
    }
}

impl Serialize for Behavior {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BehaviorFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = BehaviorFile::deserialize(deserializer)?;
        Behavior::try_from(file).map_err(serde::de::Error::custom)
    }
}

impl Behavior {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("behavior serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
