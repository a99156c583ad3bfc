//! A per-round store of contextual deterministic assignments.
//!
//! In [`RepositoryMode::Upgraded`] the context includes the time ordering of the
//! agents: each ordering has its own decomposition of the behavior into
//! assignments respecting that ordering, and a round actualizes one term of the
//! decomposition for the ordering that actually occurs. The naive modes keep a
//! single object regardless of ordering, which lets earlier agents' outcomes
//! depend on inputs that later agents have not chosen yet.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::assignment::{AssignmentFile, DeterministicAssignment};
use crate::behavior::{Behavior, EPS_NORM};
use crate::decomposition::{decompose_ordered, Decomposition, DecompositionFile};
use crate::error::{Error, Result};
use crate::ordering::{all_orderings, Ordering};
use crate::rng::{sample_cumulative, uniform, Purpose};
use crate::scenario::decode;

/// Largest party count for which all orderings are precomputed.
pub const MAX_ORDERED_PARTIES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum RepositoryMode {
    /// One decomposition per ordering; the actual ordering selects it.
    Upgraded,
    /// The same assignment every round, whatever the ordering.
    NaiveAssignment(DeterministicAssignment),
    /// A single decomposition along a fixed ordering, used for every round.
    NaiveDecomposition(Ordering),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Upgraded,
    NaiveAssignment,
    NaiveDecomposition,
}

impl RepositoryMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            RepositoryMode::Upgraded => ModeKind::Upgraded,
            RepositoryMode::NaiveAssignment(_) => ModeKind::NaiveAssignment,
            RepositoryMode::NaiveDecomposition(_) => ModeKind::NaiveDecomposition,
        }
    }
}

/// The inputs known so far in a round and, when fixed, the time ordering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextKey {
    pub inputs: BTreeMap<usize, usize>,
    pub order: Option<Ordering>,
}

impl ContextKey {
    pub fn new(order: Option<Ordering>) -> Self {
        Self {
            inputs: BTreeMap::new(),
            order,
        }
    }

    pub fn with_input(mut self, party: usize, input: usize) -> Self {
        self.inputs.insert(party, input);
        self
    }
}

#[derive(Debug, Clone)]
struct Stored {
    decomposition: Decomposition,
    cumulative: Vec<f64>,
    assignments: Vec<Arc<DeterministicAssignment>>,
}

impl Stored {
    fn new(decomposition: Decomposition) -> Self {
        let cumulative = decomposition.cumulative_weights();
        let assignments = decomposition
            .terms()
            .iter()
            .map(|t| Arc::new(t.assignment.clone()))
            .collect();
        Self {
            decomposition,
            cumulative,
            assignments,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Repository {
    behavior: Behavior,
    mode: RepositoryMode,
    seed: u64,
    /// Upgraded: one entry per ordering. NaiveDecomposition: the fixed one.
    stored: BTreeMap<Ordering, Stored>,
    fixed: Option<Arc<DeterministicAssignment>>,
}

/// The assignment actualized for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundAssignment {
    pub round_id: u64,
    pub assignment: Arc<DeterministicAssignment>,
    /// Index of the actualized term in its decomposition (0 for a fixed
    /// assignment).
    pub term_index: usize,
    /// Ordering of the decomposition the term came from.
    pub origin_order: Option<Ordering>,
    pub mode: ModeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreeChoiceViolation {
    /// `party`'s output depends on inputs of `depends_on`, not chosen yet.
    InputRequired { party: usize, depends_on: Vec<usize> },
    /// The repository committed the inputs in `forced` to produce `outcome`.
    InputForced {
        party: usize,
        outcome: usize,
        forced: Vec<(usize, usize)>,
    },
    /// Blocking policy: the round is abandoned at `party`'s query.
    RoundAborted { party: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Outcome(usize),
    Violation(FreeChoiceViolation),
}

/// How a naive repository handles an outcome that depends on unchosen inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForcePolicy {
    Block,
    /// Presampled inputs, by party, to commit the unchosen parties to.
    Force(BTreeMap<usize, usize>),
}

pub fn build_repository(behavior: &Behavior, mode: RepositoryMode, seed: u64) -> Result<Repository> {
    let n = behavior.scenario().n_parties();
    let mut stored = BTreeMap::new();
    let mut fixed = None;
    match &mode {
        RepositoryMode::Upgraded => {
            if n > MAX_ORDERED_PARTIES {
                return Err(Error::TooManyOrders {
                    parties: n,
                    limit: MAX_ORDERED_PARTIES,
                });
            }
            behavior.require_no_signaling(EPS_NORM)?;
            for order in all_orderings(n) {
                let d = decompose_ordered(behavior, &order)?;
                stored.insert(order, Stored::new(d));
            }
        }
        RepositoryMode::NaiveDecomposition(order) => {
            let d = decompose_ordered(behavior, order)?;
            stored.insert(order.clone(), Stored::new(d));
        }
        RepositoryMode::NaiveAssignment(a) => {
            if a.scenario() != behavior.scenario() {
                return Err(Error::ScenarioMismatch(format!(
                    "assignment over {}, behavior over {}",
                    a.scenario().describe(),
                    behavior.scenario().describe()
                )));
            }
            fixed = Some(Arc::new(a.clone()));
        }
    }
    Ok(Repository {
        behavior: behavior.clone(),
        mode,
        seed,
        stored,
        fixed,
    })
}

impl Repository {
    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn mode(&self) -> &RepositoryMode {
        &self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn decomposition(&self, order: &Ordering) -> Option<&Decomposition> {
        self.stored.get(order).map(|s| &s.decomposition)
    }

    pub fn decompositions(&self) -> impl Iterator<Item = &Decomposition> {
        self.stored.values().map(|s| &s.decomposition)
    }

    /// Actualizes the round's assignment for the ordering that occurred.
    pub fn sample_round(&self, round_id: u64, order: &Ordering) -> Result<RoundAssignment> {
        order.check_parties(self.behavior.scenario().n_parties())?;
        let kind = self.mode.kind();
        let (stored, origin) = match &self.mode {
            RepositoryMode::NaiveAssignment(_) => {
                return Ok(RoundAssignment {
                    round_id,
                    assignment: Arc::clone(self.fixed.as_ref().expect("fixed assignment")),
                    term_index: 0,
                    origin_order: None,
                    mode: kind,
                });
            }
            RepositoryMode::Upgraded => (&self.stored[order], order),
            RepositoryMode::NaiveDecomposition(fixed) => (&self.stored[fixed], fixed),
        };
        let u = uniform(self.seed, round_id, Purpose::Term, origin.lex_index() as u64);
        let term_index = sample_cumulative(&stored.cumulative, u);
        Ok(RoundAssignment {
            round_id,
            assignment: Arc::clone(&stored.assignments[term_index]),
            term_index,
            origin_order: Some(origin.clone()),
            mode: kind,
        })
    }

    pub fn dump(&self) -> RepositoryDump {
        RepositoryDump {
            seed: self.seed,
            mode: self.mode.kind(),
            assignment: self.fixed.as_deref().map(AssignmentFile::from),
            decompositions: self.decompositions().map(DecompositionFile::from).collect(),
        }
    }
}

/// Audit record of a repository's contents.
#[derive(Debug, Clone, Serialize)]
pub struct RepositoryDump {
    pub seed: u64,
    pub mode: ModeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<AssignmentFile>,
    pub decompositions: Vec<DecompositionFile>,
}

/// Output of `party` at `input` given what is known so far.
pub fn query(round: &RoundAssignment, party: usize, input: usize, known: &ContextKey) -> Result<QueryResult> {
    let outcomes = completions(round, party, input, known)?;
    Ok(match outcomes.constant_output() {
        Some(out) => QueryResult::Outcome(out),
        None => QueryResult::Violation(FreeChoiceViolation::InputRequired {
            party,
            depends_on: outcomes.relevant_unknowns(),
        }),
    })
}

/// Applies a policy to a query whose outcome depends on unchosen inputs.
pub fn resolve_forced(
    round: &RoundAssignment,
    party: usize,
    input: usize,
    known: &ContextKey,
    policy: &ForcePolicy,
) -> Result<QueryResult> {
    if round.mode == ModeKind::Upgraded {
        return Err(Error::PolicyUnavailable);
    }
    let outcomes = completions(round, party, input, known)?;
    if let Some(out) = outcomes.constant_output() {
        return Ok(QueryResult::Outcome(out));
    }
    match policy {
        ForcePolicy::Block => Ok(QueryResult::Violation(FreeChoiceViolation::RoundAborted { party })),
        ForcePolicy::Force(presampled) => {
            let forced = outcomes
                .relevant_unknowns()
                .into_iter()
                .map(|p| {
                    presampled
                        .get(&p)
                        .map(|&v| (p, v))
                        .ok_or_else(|| Error::InvalidConfig(format!("no presampled input for party {p}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut committed = known.clone().with_input(party, input);
            for &(p, v) in &forced {
                committed.inputs.insert(p, v);
            }
            // The remaining unknowns never influence the output.
            let outcome = outcomes.output_at(&committed.inputs);
            Ok(QueryResult::Violation(FreeChoiceViolation::InputForced {
                party,
                outcome,
                forced,
            }))
        }
    }
}

/// The querying party's output over every completion of the unknown inputs.
struct Completions<'a> {
    round: &'a RoundAssignment,
    party: usize,
    unknown: Vec<usize>,
    unknown_radices: Vec<usize>,
    base: Vec<usize>,
}

fn completions<'a>(
    round: &'a RoundAssignment,
    party: usize,
    input: usize,
    known: &ContextKey,
) -> Result<Completions<'a>> {
    let s = round.assignment.scenario();
    let n = s.n_parties();
    if party >= n || input >= s.input_cards()[party] {
        return Err(Error::InvalidConfig(format!(
            "party {party} input {input} out of range"
        )));
    }
    if known.inputs.contains_key(&party) {
        return Err(Error::DuplicateQuery(party));
    }
    let mut base = vec![0; n];
    base[party] = input;
    for (&p, &v) in &known.inputs {
        if p >= n || v >= s.input_cards()[p] {
            return Err(Error::InvalidConfig(format!(
                "known input {v} for party {p} out of range"
            )));
        }
        base[p] = v;
    }
    let unknown: Vec<usize> = (0..n)
        .filter(|&p| p != party && !known.inputs.contains_key(&p))
        .collect();
    let unknown_radices = unknown.iter().map(|&p| s.input_cards()[p]).collect();
    Ok(Completions {
        round,
        party,
        unknown,
        unknown_radices,
        base,
    })
}

impl Completions<'_> {
    fn inputs(&self, code: usize) -> Vec<usize> {
        let mut x = self.base.clone();
        for (&p, v) in self.unknown.iter().zip(decode(&self.unknown_radices, code)) {
            x[p] = v;
        }
        x
    }

    fn output(&self, x: &[usize]) -> usize {
        let a = &self.round.assignment;
        a.party_output(a.scenario().encode_inputs(x), self.party)
    }

    fn output_at(&self, inputs: &BTreeMap<usize, usize>) -> usize {
        let mut x = self.base.clone();
        for (&p, &v) in inputs {
            x[p] = v;
        }
        self.output(&x)
    }

    fn count(&self) -> usize {
        self.unknown_radices.iter().product()
    }

    fn constant_output(&self) -> Option<usize> {
        let first = self.output(&self.inputs(0));
        (1..self.count())
            .all(|c| self.output(&self.inputs(c)) == first)
            .then_some(first)
    }

    /// Unknown parties whose input changes the output for some completion.
    fn relevant_unknowns(&self) -> Vec<usize> {
        let cards = self.round.assignment.scenario().input_cards();
        self.unknown
            .iter()
            .copied()
            .filter(|&p| {
                (0..self.count()).any(|c| {
                    let x = self.inputs(c);
                    let out = self.output(&x);
                    (0..cards[p]).any(|v| {
                        let mut y = x.clone();
                        y[p] = v;
                        self.output(&y) != out
                    })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::fixtures;
    use crate::behavior::{behavior_from_assignment, make_pr_box, make_tsirelson};

    fn ab() -> Ordering {
        Ordering::identity(2)
    }

    fn ba() -> Ordering {
        Ordering::new(vec![1, 0]).unwrap()
    }

    fn naive_one_way() -> Repository {
        let a = fixtures::one_way_signaling();
        build_repository(&behavior_from_assignment(&a), RepositoryMode::NaiveAssignment(a), 3).unwrap()
    }

    #[test]
    fn upgraded_precomputes_every_ordering() {
        let repo = build_repository(&make_tsirelson(), RepositoryMode::Upgraded, 7).unwrap();
        assert_eq!(repo.decompositions().count(), 2);
        let pr = build_repository(&make_pr_box(), RepositoryMode::Upgraded, 7).unwrap();
        assert_eq!(pr.decomposition(&ab()).unwrap().len(), 4);
        assert_eq!(pr.decomposition(&ba()).unwrap().len(), 4);
    }

    #[test]
    fn build_errors() {
        let signaling = behavior_from_assignment(&fixtures::one_way_signaling());
        assert!(matches!(
            build_repository(&signaling, RepositoryMode::Upgraded, 0),
            Err(Error::NotNoSignaling(_))
        ));
        assert!(matches!(
            build_repository(&signaling, RepositoryMode::NaiveDecomposition(ab()), 0),
            Err(Error::NotNoSignaling(_))
        ));
        let three = Behavior::uniform(crate::scenario::Scenario::binary(3));
        assert!(matches!(
            build_repository(
                &three,
                RepositoryMode::NaiveAssignment(fixtures::one_way_signaling()),
                0
            ),
            Err(Error::ScenarioMismatch(_))
        ));
        let seven = Behavior::uniform(crate::scenario::Scenario::new(vec![1; 7], vec![1; 7]).unwrap());
        assert!(matches!(
            build_repository(&seven, RepositoryMode::Upgraded, 0),
            Err(Error::TooManyOrders { .. })
        ));
    }

    #[test]
    fn naive_assignment_replays_the_table() {
        let repo = naive_one_way();
        for round in 0..10 {
            for order in [ab(), ba()] {
                let r = repo.sample_round(round, &order).unwrap();
                assert_eq!(*r.assignment, fixtures::one_way_signaling());
                assert_eq!(r.origin_order, None);
            }
        }
    }

    #[test]
    fn sampling_is_a_pure_function_of_its_key() {
        let repo = build_repository(&make_tsirelson(), RepositoryMode::Upgraded, 11).unwrap();
        for round in 0..50 {
            assert_eq!(
                repo.sample_round(round, &ba()).unwrap(),
                repo.sample_round(round, &ba()).unwrap()
            );
        }
    }

    #[test]
    fn upgraded_pr_term_frequencies() {
        let repo = build_repository(&make_pr_box(), RepositoryMode::Upgraded, 5).unwrap();
        let rounds = 100_000;
        let mut counts = [0usize; 4];
        for round in 0..rounds {
            let r = repo.sample_round(round, &ab()).unwrap();
            assert!(r.assignment.respects_order(&ab()));
            counts[r.term_index] += 1;
        }
        for c in counts {
            assert!((c as f64 / rounds as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn bob_first_queries_on_the_one_way_table() {
        let r = naive_one_way().sample_round(0, &ba()).unwrap();
        let nothing = ContextKey::new(Some(ba()));
        assert_eq!(query(&r, 1, 0, &nothing).unwrap(), QueryResult::Outcome(0));
        assert_eq!(
            query(&r, 1, 1, &nothing).unwrap(),
            QueryResult::Violation(FreeChoiceViolation::InputRequired {
                party: 1,
                depends_on: vec![0]
            })
        );
        // Alice's output is 0 on every row.
        assert_eq!(
            query(&r, 0, 1, &ContextKey::new(Some(ab()))).unwrap(),
            QueryResult::Outcome(0)
        );
        // Once x is known, Bob's y = 1 query is determined: b = x.
        let known = ContextKey::new(Some(ab())).with_input(0, 1);
        assert_eq!(query(&r, 1, 1, &known).unwrap(), QueryResult::Outcome(1));
        assert!(matches!(query(&r, 0, 1, &known), Err(Error::DuplicateQuery(0))));
    }

    #[test]
    fn forcing_and_blocking() {
        let r = naive_one_way().sample_round(0, &ba()).unwrap();
        let nothing = ContextKey::new(Some(ba()));
        let force = ForcePolicy::Force(BTreeMap::from([(0, 1)]));
        assert_eq!(
            resolve_forced(&r, 1, 1, &nothing, &force).unwrap(),
            QueryResult::Violation(FreeChoiceViolation::InputForced {
                party: 1,
                outcome: 1,
                forced: vec![(0, 1)]
            })
        );
        let force0 = ForcePolicy::Force(BTreeMap::from([(0, 0)]));
        assert!(matches!(
            resolve_forced(&r, 1, 1, &nothing, &force0).unwrap(),
            QueryResult::Violation(FreeChoiceViolation::InputForced { outcome: 0, .. })
        ));
        assert_eq!(
            resolve_forced(&r, 1, 1, &nothing, &ForcePolicy::Block).unwrap(),
            QueryResult::Violation(FreeChoiceViolation::RoundAborted { party: 1 })
        );
        // Nothing to force when the output is already determined.
        assert_eq!(
            resolve_forced(&r, 1, 0, &nothing, &force).unwrap(),
            QueryResult::Outcome(0)
        );
        assert!(matches!(
            resolve_forced(&r, 1, 1, &nothing, &ForcePolicy::Force(BTreeMap::new())),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn cyclic_table_forces_whoever_goes_first() {
        let a = fixtures::cyclic_signaling();
        let repo = build_repository(&behavior_from_assignment(&a), RepositoryMode::NaiveAssignment(a), 0).unwrap();
        let r = repo.sample_round(0, &ab()).unwrap();
        let presampled = ForcePolicy::Force(BTreeMap::from([(0, 1), (1, 0)]));
        for (first, order) in [(0, ab()), (1, ba())] {
            for input in 0..2 {
                let res = resolve_forced(&r, first, input, &ContextKey::new(Some(order.clone())), &presampled).unwrap();
                let QueryResult::Violation(FreeChoiceViolation::InputForced { forced, .. }) = res else {
                    panic!("{res:?}");
                };
                assert_eq!(forced.len(), 1);
                assert_eq!(forced[0].0, 1 - first);
            }
        }
    }

    #[test]
    fn upgraded_rounds_never_need_forcing() {
        let repo = build_repository(&make_tsirelson(), RepositoryMode::Upgraded, 9).unwrap();
        for round in 0..500 {
            for order in [ab(), ba()] {
                let r = repo.sample_round(round, &order).unwrap();
                for inputs in [[0, 0], [0, 1], [1, 0], [1, 1]] {
                    let mut known = ContextKey::new(Some(order.clone()));
                    for &p in order.parties() {
                        assert!(matches!(
                            query(&r, p, inputs[p], &known).unwrap(),
                            QueryResult::Outcome(_)
                        ));
                        known = known.with_input(p, inputs[p]);
                    }
                }
                assert!(matches!(
                    resolve_forced(&r, 0, 0, &ContextKey::default(), &ForcePolicy::Block),
                    Err(Error::PolicyUnavailable)
                ));
            }
        }
    }

    #[test]
    fn dump_lists_decompositions() {
        let repo = build_repository(&make_pr_box(), RepositoryMode::Upgraded, 42).unwrap();
        let v = serde_json::to_value(repo.dump()).unwrap();
        assert_eq!(v["seed"], 42);
        assert_eq!(v["mode"], "upgraded");
        assert_eq!(v["decompositions"].as_array().unwrap().len(), 2);
        let naive = serde_json::to_value(naive_one_way().dump()).unwrap();
        assert_eq!(naive["mode"], "naive-assignment");
        assert!(naive["assignment"]["table"].is_array());
    }
}
