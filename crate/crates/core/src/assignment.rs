//! Deterministic contextual assignments: which inputs each party's output
//! depends on, whether that dependency admits a temporal order, and the
//! families of local and order-respecting assignments.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::Ordering;
use crate::scenario::{checked_product, decode, encode, party_label, Scenario, MAX_ENUMERATED};

/// Cap on listed compatible orders (8!); longer lists are truncated and flagged.
pub const MAX_LISTED_ORDERS: usize = 40_320;

/// A total function from joint inputs to joint outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicAssignment {
    scenario: Scenario,
    /// Joint output index for each joint input index.
    table: Vec<usize>,
}

impl DeterministicAssignment {
    pub fn new(scenario: Scenario, table: Vec<usize>) -> Result<Self> {
        if table.len() != scenario.n_joint_inputs() {
            return Err(Error::InvalidAssignment(format!(
                "{} rows for {} joint inputs",
                table.len(),
                scenario.n_joint_inputs()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&a| a >= scenario.n_joint_outputs()) {
            return Err(Error::InvalidAssignment(format!(
                "joint output index {bad} out of range"
            )));
        }
        Ok(Self { scenario, table })
    }

    /// Builds the table from per-party outputs `f(x⃗)`.
    pub fn from_fn(scenario: Scenario, f: impl Fn(&[usize]) -> Vec<usize>) -> Result<Self> {
        let out_cards = scenario.output_cards().to_vec();
        let table = (0..scenario.n_joint_inputs())
            .map(|xi| {
                let a = f(&scenario.decode_inputs(xi));
                if a.len() != out_cards.len() || a.iter().zip(&out_cards).any(|(v, c)| v >= c) {
                    return Err(Error::InvalidAssignment(format!("output {a:?} out of range")));
                }
                Ok(scenario.encode_outputs(&a))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scenario, table })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Per-party outputs at a joint input index.
    pub fn outputs(&self, joint_input: usize) -> Vec<usize> {
        self.scenario.decode_outputs(self.table[joint_input])
    }

    pub fn outputs_for(&self, inputs: &[usize]) -> Vec<usize> {
        self.outputs(self.scenario.encode_inputs(inputs))
    }

    pub fn party_output(&self, joint_input: usize, party: usize) -> usize {
        self.outputs(joint_input)[party]
    }

    pub fn dependency_graph(&self) -> SignalingGraph {
        dependency_graph(self)
    }

    pub fn classify(&self) -> AssignmentClass {
        classify(self)
    }

    pub fn respects_order(&self, order: &Ordering) -> bool {
        respects_order(self, order)
    }
}

/// Edge `(i, j)`: party `j`'s output depends on party `i`'s input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalingGraph {
    n_parties: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SignalingGraph {
    pub fn new(n_parties: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        assert!(
            edges.iter().all(|&(i, j)| i != j && i < n_parties && j < n_parties),
            "edges must join distinct parties"
        );
        Self { n_parties, edges }
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn has_cycle(&self) -> bool {
        has_cycle(self)
    }

    /// All topological sorts in lexicographic order, capped at `limit`.
    /// The flag is set when more sorts exist than were returned.
    pub fn topological_sorts(&self, limit: usize) -> (Vec<Ordering>, bool) {
        let n = self.n_parties;
        let mut indegree = vec![0usize; n];
        for &(_, j) in &self.edges {
            indegree[j] += 1;
        }
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        let mut truncated = false;
        self.sorts_rec(
            &mut indegree,
            &mut placed,
            &mut current,
            &mut out,
            limit,
            &mut truncated,
        );
        (out, truncated)
    }

    fn sorts_rec(
        &self,
        indegree: &mut [usize],
        placed: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<Ordering>,
        limit: usize,
        truncated: &mut bool,
    ) {
        if *truncated {
            return;
        }
        if current.len() == self.n_parties {
            if out.len() == limit {
                *truncated = true;
            } else {
                out.push(Ordering::new(current.clone()).expect("permutation"));
            }
            return;
        }
        for p in 0..self.n_parties {
            if placed[p] || indegree[p] != 0 {
                continue;
            }
            placed[p] = true;
            current.push(p);
            let succ: Vec<usize> = self.successors(p).collect();
            for &j in &succ {
                indegree[j] -= 1;
            }
            self.sorts_rec(indegree, placed, current, out, limit, truncated);
            for &j in &succ {
                indegree[j] += 1;
            }
            current.pop();
            placed[p] = false;
        }
    }
}

impl fmt::Display for SignalingGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|&(i, j)| format!("{}->{}", party_label(i), party_label(j)))
            .collect();
        write!(f, "{}", edges.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentKind {
    Local,
    Ordered,
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentClass {
    pub kind: AssignmentKind,
    /// Topological sorts of the dependency graph, lexicographic.
    pub compatible_orders: Vec<Ordering>,
    /// Set when `compatible_orders` was cut at [`MAX_LISTED_ORDERS`].
    pub truncated: bool,
}

#[allow(clippy::needless_range_loop)]
pub fn dependency_graph(assignment: &DeterministicAssignment) -> SignalingGraph {
    let s = assignment.scenario();
    let n = s.n_parties();
    let mut edges = BTreeSet::new();
    for xi in 0..s.n_joint_inputs() {
        let x = s.decode_inputs(xi);
        let a = assignment.outputs(xi);
        for i in 0..n {
            // Compare against every larger value of party i's input; smaller ones
            // were covered when the loop visited them.
            for v in x[i] + 1..s.input_cards()[i] {
                let b = assignment.outputs(s.with_input(xi, i, v));
                for j in 0..n {
                    if j != i && a[j] != b[j] {
                        edges.insert((i, j));
                    }
                }
            }
        }
    }
    SignalingGraph { n_parties: n, edges }
}

pub fn has_cycle(graph: &SignalingGraph) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(g: &SignalingGraph, v: usize, marks: &mut [Mark]) -> bool {
        marks[v] = Mark::Active;
        for w in g.successors(v) {
            let mark = marks[w];
            if mark == Mark::Active || (mark == Mark::New && visit(g, w, marks)) {
                return true;
            }
        }
        marks[v] = Mark::Done;
        false
    }
    let mut marks = vec![Mark::New; graph.n_parties];
    (0..graph.n_parties).any(|v| marks[v] == Mark::New && visit(graph, v, &mut marks))
}

pub fn classify(assignment: &DeterministicAssignment) -> AssignmentClass {
    let graph = dependency_graph(assignment);
    if has_cycle(&graph) {
        return AssignmentClass {
            kind: AssignmentKind::Cyclic,
            compatible_orders: Vec::new(),
            truncated: false,
        };
    }
    let kind = if graph.is_empty() {
        AssignmentKind::Local
    } else {
        AssignmentKind::Ordered
    };
    let (compatible_orders, truncated) = graph.topological_sorts(MAX_LISTED_ORDERS);
    AssignmentClass {
        kind,
        compatible_orders,
        truncated,
    }
}

pub fn respects_order(assignment: &DeterministicAssignment, order: &Ordering) -> bool {
    if order.len() != assignment.scenario().n_parties() {
        return false;
    }
    dependency_graph(assignment)
        .edges
        .iter()
        .all(|&(i, j)| order.precedes(i, j))
}

/// For each party, the parties whose inputs its response function reads
/// (in the order their digits are encoded).
pub(crate) type ResponseDomains = Vec<(usize, Vec<usize>)>;

fn local_domains(scenario: &Scenario) -> ResponseDomains {
    (0..scenario.n_parties()).map(|p| (p, vec![p])).collect()
}

pub(crate) fn ordered_domains(order: &Ordering) -> ResponseDomains {
    let parties = order.parties();
    (0..parties.len())
        .map(|k| (parties[k], parties[..=k].to_vec()))
        .collect()
}

/// Number of assignments realizable by the given response domains.
pub(crate) fn response_space_size(scenario: &Scenario, domains: &ResponseDomains) -> Option<u128> {
    let mut total: u128 = 1;
    for (party, domain) in domains {
        let cards: Vec<usize> = domain.iter().map(|&q| scenario.input_cards()[q]).collect();
        let domain_size = u32::try_from(checked_product(&cards)?).ok()?;
        let count = (scenario.output_cards()[*party] as u128).checked_pow(domain_size)?;
        total = total.checked_mul(count)?;
    }
    Some(total)
}

pub(crate) fn guard_response_space(scenario: &Scenario, domains: &ResponseDomains, what: &'static str) -> Result<u128> {
    match response_space_size(scenario, domains) {
        Some(n) if n <= MAX_ENUMERATED => Ok(n),
        other => Err(Error::ScenarioTooLarge {
            what,
            count: other.unwrap_or(u128::MAX),
            limit: MAX_ENUMERATED,
        }),
    }
}

fn enumerate_responses(scenario: &Scenario, domains: &ResponseDomains) -> Vec<DeterministicAssignment> {
    let in_cards = scenario.input_cards();
    let out_cards = scenario.output_cards();
    // One digit per (party, domain point); party-major, domain point minor.
    let mut radices = Vec::new();
    let mut offsets = Vec::new();
    let mut domain_radices = Vec::new();
    for (party, domain) in domains {
        let dr: Vec<usize> = domain.iter().map(|&q| in_cards[q]).collect();
        offsets.push(radices.len());
        radices.extend(std::iter::repeat_n(out_cards[*party], dr.iter().product()));
        domain_radices.push(dr);
    }
    let total: usize = radices.iter().product();
    let joint_inputs: Vec<Vec<usize>> = (0..scenario.n_joint_inputs())
        .map(|xi| scenario.decode_inputs(xi))
        .collect();
    let mut out = Vec::with_capacity(total);
    let mut outputs = vec![0; scenario.n_parties()];
    let mut point = Vec::new();
    for code in 0..total {
        let digits = decode(&radices, code);
        let table = joint_inputs
            .iter()
            .map(|x| {
                for (k, (party, domain)) in domains.iter().enumerate() {
                    point.clear();
                    point.extend(domain.iter().map(|&q| x[q]));
                    outputs[*party] = digits[offsets[k] + encode(&domain_radices[k], &point)];
                }
                scenario.encode_outputs(&outputs)
            })
            .collect();
        out.push(DeterministicAssignment {
            scenario: scenario.clone(),
            table,
        });
    }
    out
}

/// Every assignment where each output depends only on its own party's input.
pub fn enumerate_local_assignments(scenario: &Scenario) -> Result<Vec<DeterministicAssignment>> {
    let domains = local_domains(scenario);
    guard_response_space(scenario, &domains, "local assignments")?;
    Ok(enumerate_responses(scenario, &domains))
}

/// Every assignment whose `k`-th party (in `order`) reads only the inputs of
/// the first `k` parties.
pub fn enumerate_ordered_strategies(scenario: &Scenario, order: &Ordering) -> Result<Vec<DeterministicAssignment>> {
    order.check_parties(scenario.n_parties())?;
    let domains = ordered_domains(order);
    guard_response_space(scenario, &domains, "ordered strategies")?;
    Ok(enumerate_responses(scenario, &domains))
}

/// On-disk representation: `table` lists `[x⃗, a⃗]` pairs by joint input index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub parties: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub table: Vec<(Vec<usize>, Vec<usize>)>,
}

impl From<&DeterministicAssignment> for AssignmentFile {
    fn from(a: &DeterministicAssignment) -> Self {
        let s = &a.scenario;
        Self {
            parties: s.n_parties(),
            inputs: s.input_cards().to_vec(),
            outputs: s.output_cards().to_vec(),
            table: (0..s.n_joint_inputs())
                .map(|xi| (s.decode_inputs(xi), a.outputs(xi)))
                .collect(),
        }
    }
}

impl TryFrom<AssignmentFile> for DeterministicAssignment {
    type Error = Error;

    fn try_from(f: AssignmentFile) -> Result<Self> {
        if f.parties != f.inputs.len() || f.parties != f.outputs.len() {
            return Err(Error::Format(format!(
                "`parties` is {} but {} input and {} output cardinalities given",
                f.parties,
                f.inputs.len(),
                f.outputs.len()
            )));
        }
        let scenario = Scenario::new(f.inputs, f.outputs)?;
        let mut table = vec![None; scenario.n_joint_inputs()];
        for (x, a) in f.table {
            let ok = |v: &[usize], cards: &[usize]| v.len() == cards.len() && v.iter().zip(cards).all(|(d, c)| d < c);
            if !ok(&x, scenario.input_cards()) || !ok(&a, scenario.output_cards()) {
                return Err(Error::Format(format!("row {x:?} -> {a:?} out of range")));
            }
            let slot = &mut table[scenario.encode_inputs(&x)];
            if slot.is_some() {
                return Err(Error::Format(format!("duplicate row for inputs {x:?}")));
            }
            *slot = Some(scenario.encode_outputs(&a));
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(xi, a)| {
                a.ok_or_else(|| Error::Format(format!("missing row for inputs {:?}", scenario.decode_inputs(xi))))
            })
            .collect::<Result<Vec<_>>>()?;
        DeterministicAssignment::new(scenario, table)
    }
}

impl Serialize for DeterministicAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AssignmentFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DeterministicAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = AssignmentFile::deserialize(deserializer)?;
        DeterministicAssignment::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// The two-party binary tables used throughout the examples and demos.
pub mod fixtures {
    use super::DeterministicAssignment;
    use crate::scenario::Scenario;

    fn binary(f: impl Fn(usize, usize) -> [usize; 2]) -> DeterministicAssignment {
        DeterministicAssignment::from_fn(Scenario::binary(2), |x| f(x[0], x[1]).to_vec()).expect("binary table")
    }

    /// `a = 0`, `b = x·y`: Bob's output reveals Alice's input when `y = 1`.
    pub fn one_way_signaling() -> DeterministicAssignment {
        binary(|x, y| [0, x & y])
    }

    /// `a = x·y`, `b = 0`: the same correlations, read out by Alice instead.
    pub fn one_way_signaling_reversed() -> DeterministicAssignment {
        binary(|x, y| [x & y, 0])
    }

    /// `a = y`, `b = x`: each party's output reveals the other's input.
    pub fn cyclic_signaling() -> DeterministicAssignment {
        binary(|x, y| [y, x])
    }

    /// `a = x`, `b = y`.
    pub fn local_identity() -> DeterministicAssignment {
        binary(|x, y| [x, y])
    }

    /// Every output 0.
    pub fn constant_zero() -> DeterministicAssignment {
        binary(|_, _| [0, 0])
    }
}
