//! Monte-Carlo simulation of multi-agent Bell-type experiments against a
//! [`Repository`].
//!
//! Each round: every agent gets a measurement time, the times fix the ordering,
//! the repository actualizes an assignment for that ordering, and the agents
//! query it in temporal order, each choosing its input just before its query.
//! All randomness is keyed by `(seed, round)`, so rounds are independent and
//! may be evaluated in any order or in parallel.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{chsh_from_correlators, Behavior, EPS_NORM};
use crate::error::{Error, Result};
use crate::ordering::Ordering;
use crate::repository::{
    build_repository, query, resolve_forced, ContextKey, ForcePolicy, FreeChoiceViolation, QueryResult, Repository,
    RepositoryMode,
};
use crate::rng::{sample_discrete, uniform, Purpose};
use crate::scenario::{party_label, Scenario};
use crate::stats::{chi_squared_independence, mutual_information_bits, IndependenceTest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimingDist {
    Fixed { t: f64 },
    Uniform { t_min: f64, t_max: f64 },
}

impl TimingDist {
    fn sample(&self, u: f64) -> f64 {
        match *self {
            TimingDist::Fixed { t } => t,
            TimingDist::Uniform { t_min, t_max } => t_min + u * (t_max - t_min),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            TimingDist::Fixed { t } if t.is_finite() => Ok(()),
            TimingDist::Uniform { t_min, t_max } if t_min.is_finite() && t_max.is_finite() && t_min <= t_max => Ok(()),
            _ => Err(Error::InvalidConfig(format!("bad timing distribution {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub party: usize,
    /// Probability of each of the party's inputs.
    pub input_dist: Vec<f64>,
    pub timing: TimingDist,
}

impl AgentSpec {
    /// Uniform input choice.
    pub fn uniform(party: usize, n_inputs: usize, timing: TimingDist) -> Self {
        Self {
            party,
            input_dist: vec![1.0 / n_inputs as f64; n_inputs],
            timing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Block,
    Force,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub behavior: Behavior,
    /// One per party, in party order.
    pub agents: Vec<AgentSpec>,
    pub rounds: u64,
    pub mode: RepositoryMode,
    pub policy: Policy,
    pub seed: u64,
    /// Evaluate rounds on the rayon pool; logs are identical either way.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.behavior.scenario();
        if self.agents.len() != s.n_parties() {
            return Err(Error::InvalidConfig(format!(
                "{} agents for {} parties",
                self.agents.len(),
                s.n_parties()
            )));
        }
        for (p, agent) in self.agents.iter().enumerate() {
            if agent.party != p {
                return Err(Error::InvalidConfig(format!(
                    "agent {p} is declared for party {}",
                    agent.party
                )));
            }
            if agent.input_dist.len() != s.input_cards()[p] {
                return Err(Error::InvalidConfig(format!(
                    "party {} has {} inputs but its input distribution has {} entries",
                    party_label(p),
                    s.input_cards()[p],
                    agent.input_dist.len()
                )));
            }
            let total: f64 = agent.input_dist.iter().sum();
            if agent.input_dist.iter().any(|&q| q.is_nan() || q < 0.0) || (total - 1.0).abs() > EPS_NORM {
                return Err(Error::InvalidConfig(format!(
                    "input distribution of party {} is not a probability vector",
                    party_label(p)
                )));
            }
            agent.timing.check()?;
        }
        Ok(())
    }
}

/// Everything observable (and the hidden term) about one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round_id: u64,
    pub timestamps: Vec<f64>,
    pub ordering: Ordering,
    /// Inputs actually used; `None` after an abort.
    pub inputs: Vec<Option<usize>>,
    /// Set when the party's input was committed by the repository.
    pub forced: Vec<bool>,
    /// Party whose query forced this party's input.
    pub forced_by: Vec<Option<usize>>,
    pub outcomes: Vec<Option<usize>>,
    /// Index of the actualized decomposition term.
    pub term_index: usize,
    /// Ordering of the decomposition the term came from.
    pub origin_order: Option<Ordering>,
    /// Some query depended on an input not chosen yet.
    pub violation: bool,
    pub aborted: bool,
}

impl RoundLog {
    /// Identity of the hidden variable: ordering of origin and term index.
    pub fn lambda(&self) -> u64 {
        let order = self.origin_order.as_ref().map_or(0, |o| o.lex_index() as u64 + 1);
        (order << 32) | self.term_index as u64
    }

    pub fn is_forced(&self) -> bool {
        self.forced.iter().any(|&f| f)
    }
}

/// Sorts parties by time; ties go to the lower party index.
pub fn derive_ordering(timestamps: &[f64]) -> Ordering {
    let mut parties: Vec<usize> = (0..timestamps.len()).collect();
    parties.sort_by(|&i, &j| timestamps[i].total_cmp(&timestamps[j]).then(i.cmp(&j)));
    Ordering::new(parties).expect("sorted indices form a permutation")
}

fn simulate_round(repo: &Repository, config: &ExperimentConfig, round_id: u64) -> Result<RoundLog> {
    let seed = config.seed;
    let n = config.agents.len();
    let timestamps: Vec<f64> = config
        .agents
        .iter()
        .map(|a| {
            a.timing
                .sample(uniform(seed, round_id, Purpose::Timing, a.party as u64))
        })
        .collect();
    let ordering = derive_ordering(&timestamps);
    let round = repo.sample_round(round_id, &ordering)?;

    let presampled: BTreeMap<usize, usize> = config
        .agents
        .iter()
        .map(|a| {
            let u = uniform(seed, round_id, Purpose::ForcedInput, a.party as u64);
            (a.party, sample_discrete(&a.input_dist, u))
        })
        .collect();
    let policy = match config.policy {
        Policy::Block => ForcePolicy::Block,
        Policy::Force => ForcePolicy::Force(presampled),
    };

    let mut log = RoundLog {
        round_id,
        timestamps,
        ordering: ordering.clone(),
        inputs: vec![None; n],
        forced: vec![false; n],
        forced_by: vec![None; n],
        outcomes: vec![None; n],
        term_index: round.term_index,
        origin_order: round.origin_order.clone(),
        violation: false,
        aborted: false,
    };
    let mut committed: Vec<Option<usize>> = vec![None; n];
    let mut known = ContextKey::new(Some(ordering.clone()));
    for &party in ordering.parties() {
        let input = committed[party].unwrap_or_else(|| {
            let u = uniform(seed, round_id, Purpose::Input, party as u64);
            sample_discrete(&config.agents[party].input_dist, u)
        });
        log.inputs[party] = Some(input);
        let outcome = match query(&round, party, input, &known)? {
            QueryResult::Outcome(out) => out,
            QueryResult::Violation(_) => {
                log.violation = true;
                match resolve_forced(&round, party, input, &known, &policy)? {
                    QueryResult::Outcome(out) => out,
                    QueryResult::Violation(FreeChoiceViolation::InputForced { outcome, forced, .. }) => {
                        for (q, v) in forced {
                            committed[q] = Some(v);
                            log.forced[q] = true;
                            log.forced_by[q] = Some(party);
                        }
                        outcome
                    }
                    QueryResult::Violation(_) => {
                        log.aborted = true;
                        log.inputs.iter_mut().for_each(|x| *x = None);
                        log.outcomes.iter_mut().for_each(|a| *a = None);
                        break;
                    }
                }
            }
        };
        log.outcomes[party] = Some(outcome);
        known.inputs.insert(party, input);
    }
    Ok(log)
}

/// Runs the configured experiment and summarizes it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<RoundLog>, StatsReport)> {
    config.validate()?;
    let repo = build_repository(&config.behavior, config.mode.clone(), config.seed)?;
    let logs = run_rounds(&repo, config)?;
    let report = summarize(&logs, config.behavior.scenario());
    Ok((logs, report))
}

/// Simulates rounds `0..config.rounds` against an already built repository.
pub fn run_rounds(repo: &Repository, config: &ExperimentConfig) -> Result<Vec<RoundLog>> {
    if config.parallel {
        (0..config.rounds)
            .into_par_iter()
            .map(|r| simulate_round(repo, config, r))
            .collect()
    } else {
        (0..config.rounds).map(|r| simulate_round(repo, config, r)).collect()
    }
}

/// A discrete quantity read off a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Input(usize),
    Output(usize),
    JointInputs,
    JointOutputs,
    /// The hidden term identity.
    Lambda,
    Ordering,
    Forced(usize),
}

impl Variable {
    fn check(&self, n_parties: usize) -> Result<()> {
        match *self {
            Variable::Input(p) | Variable::Output(p) | Variable::Forced(p) if p >= n_parties => {
                Err(Error::UnknownSelector(format!("{self:?} for {n_parties} parties")))
            }
            _ => Ok(()),
        }
    }

    /// `None` when the round did not produce the value.
    pub fn value(&self, log: &RoundLog) -> Option<u64> {
        let joint = |v: &[Option<usize>]| v.iter().try_fold(0u64, |acc, x| x.map(|x| acc * 1024 + x as u64));
        match *self {
            Variable::Input(p) => log.inputs.get(p).copied().flatten().map(|x| x as u64),
            Variable::Output(p) => log.outcomes.get(p).copied().flatten().map(|x| x as u64),
            Variable::JointInputs => joint(&log.inputs),
            Variable::JointOutputs => joint(&log.outcomes),
            Variable::Lambda => Some(log.lambda()),
            Variable::Ordering => Some(log.ordering.lex_index() as u64),
            Variable::Forced(p) => log.forced.get(p).map(|&f| f as u64),
        }
    }
}

/// Accepts `input:A`, `output:B`, `forced:A` (letters or indices), `inputs`,
/// `outputs`, `lambda` and `ordering`.
impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownSelector(s.to_string());
        let party = |p: &str| -> Result<usize> {
            match p.as_bytes() {
                [c @ b'A'..=b'Z'] => Ok((c - b'A') as usize),
                _ => p.parse().map_err(|_| unknown()),
            }
        };
        match s.split_once(':') {
            Some(("input", p)) => Ok(Variable::Input(party(p)?)),
            Some(("output", p)) => Ok(Variable::Output(party(p)?)),
            Some(("forced", p)) => Ok(Variable::Forced(party(p)?)),
            None => match s {
                "inputs" => Ok(Variable::JointInputs),
                "outputs" => Ok(Variable::JointOutputs),
                "lambda" => Ok(Variable::Lambda),
                "ordering" => Ok(Variable::Ordering),
                _ => Err(unknown()),
            },
            _ => Err(unknown()),
        }
    }
}

fn pairs(logs: &[RoundLog], lhs: Variable, rhs: Variable) -> Result<Vec<(u64, u64)>> {
    if let Some(first) = logs.first() {
        lhs.check(first.inputs.len())?;
        rhs.check(first.inputs.len())?;
    }
    Ok(logs
        .iter()
        .filter(|l| !l.aborted)
        .filter_map(|l| Some((lhs.value(l)?, rhs.value(l)?)))
        .collect())
}

/// Pearson chi-squared test of independence over non-aborted rounds.
pub fn independence_test(logs: &[RoundLog], lhs: Variable, rhs: Variable) -> Result<IndependenceTest> {
    Ok(chi_squared_independence(&pairs(logs, lhs, rhs)?))
}

/// Plug-in mutual information in bits over non-aborted rounds.
pub fn mutual_information(logs: &[RoundLog], lhs: Variable, rhs: Variable) -> Result<f64> {
    Ok(mutual_information_bits(&pairs(logs, lhs, rhs)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBehavior {
    /// Frequencies; unvisited contexts get a uniform row.
    pub behavior: Behavior,
    pub counts: Vec<u64>,
    pub unvisited: Vec<Vec<usize>>,
    /// Some context was never visited.
    pub flagged: bool,
}

/// Frequency estimate of `P(a⃗|x⃗)` over rounds that were neither aborted nor
/// forced.
pub fn empirical_behavior(logs: &[RoundLog], scenario: &Scenario) -> EmpiricalBehavior {
    let n_in = scenario.n_joint_inputs();
    let n_out = scenario.n_joint_outputs();
    let mut hits = vec![0u64; n_in * n_out];
    let mut counts = vec![0u64; n_in];
    let mut x = Vec::new();
    let mut a = Vec::new();
    for log in logs.iter().filter(|l| !l.aborted && !l.is_forced()) {
        x.clear();
        a.clear();
        x.extend(log.inputs.iter().map(|v| v.expect("completed round has inputs")));
        a.extend(log.outcomes.iter().map(|v| v.expect("completed round has outcomes")));
        let xi = scenario.encode_inputs(&x);
        hits[xi * n_out + scenario.encode_outputs(&a)] += 1;
        counts[xi] += 1;
    }
    let mut probs = vec![0.0; n_in * n_out];
    let mut unvisited = Vec::new();
    for xi in 0..n_in {
        let row = &mut probs[xi * n_out..(xi + 1) * n_out];
        if counts[xi] == 0 {
            row.fill(1.0 / n_out as f64);
            unvisited.push(scenario.decode_inputs(xi));
        } else {
            for (p, &h) in row.iter_mut().zip(&hits[xi * n_out..(xi + 1) * n_out]) {
                *p = h as f64 / counts[xi] as f64;
            }
        }
    }
    EmpiricalBehavior {
        behavior: Behavior::new(scenario.clone(), probs).expect("table size matches"),
        counts,
        flagged: !unvisited.is_empty(),
        unvisited,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `S` from per-context correlator estimates, with the binomial standard error
/// `sqrt(Σ (1 − E²)/n_xy)`.
pub fn chsh_estimate(empirical: &EmpiricalBehavior) -> Option<ChshEstimate> {
    let b = &empirical.behavior;
    if !b.scenario().is_2222() || empirical.flagged {
        return None;
    }
    let e = b.correlators().ok()?;
    let mut var = 0.0;
    for (x, row) in e.iter().enumerate() {
        for (y, exy) in row.iter().enumerate() {
            let n = empirical.counts[x * 2 + y] as f64;
            var += (1.0 - exy * exy) / n;
        }
    }
    Some(ChshEstimate {
        value: chsh_from_correlators(&e),
        stderr: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub rounds: u64,
    pub completed_rounds: u64,
    pub aborted_rounds: u64,
    /// No completed rounds to summarize.
    pub insufficient_data: bool,
    pub empirical: Option<EmpiricalBehavior>,
    pub chsh: Option<ChshEstimate>,
    pub inputs_vs_lambda: Option<IndependenceTest>,
    pub inputs_vs_ordering: Option<IndependenceTest>,
    pub violation_rounds: u64,
    pub violation_rate: f64,
    /// Fraction of rounds in which each party's input was forced.
    pub forced_rate: Vec<f64>,
    /// Mutual information between the forcing party's outcome and the forced
    /// input, over all forcing events.
    pub forced_mi_bits: Option<f64>,
}

pub fn summarize(logs: &[RoundLog], scenario: &Scenario) -> StatsReport {
    let n = scenario.n_parties();
    let rounds = logs.len() as u64;
    let aborted_rounds = logs.iter().filter(|l| l.aborted).count() as u64;
    let completed_rounds = rounds - aborted_rounds;
    let violation_rounds = logs.iter().filter(|l| l.violation).count() as u64;
    let rate = |k: u64| if rounds == 0 { 0.0 } else { k as f64 / rounds as f64 };
    let forced_rate = (0..n)
        .map(|p| rate(logs.iter().filter(|l| l.forced[p]).count() as u64))
        .collect();
    let forced_pairs: Vec<(u64, u64)> = logs
        .iter()
        .flat_map(|l| {
            (0..n).filter_map(move |q| {
                let p = l.forced_by[q]?;
                Some((l.outcomes[p]? as u64, l.inputs[q]? as u64))
            })
        })
        .collect();
    let insufficient_data = completed_rounds == 0;
    let (empirical, chsh, inputs_vs_lambda, inputs_vs_ordering) = if insufficient_data {
        (None, None, None, None)
    } else {
        let empirical = empirical_behavior(logs, scenario);
        let chsh = chsh_estimate(&empirical);
        let lam = independence_test(logs, Variable::JointInputs, Variable::Lambda).ok();
        let ord = independence_test(logs, Variable::JointInputs, Variable::Ordering).ok();
        (Some(empirical), chsh, lam, ord)
    };
    StatsReport {
        rounds,
        completed_rounds,
        aborted_rounds,
        insufficient_data,
        empirical,
        chsh,
        inputs_vs_lambda,
        inputs_vs_ordering,
        violation_rounds,
        violation_rate: rate(violation_rounds),
        forced_rate,
        forced_mi_bits: (!forced_pairs.is_empty()).then(|| mutual_information_bits(&forced_pairs)),
    }
}

impl StatsReport {
    /// One row per metric: `name,value,aux` where `aux` is a standard error or
    /// p-value when one applies.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value,aux\n");
        let mut row = |name: &str, value: String, aux: String| {
            let _ = writeln!(out, "{name},{value},{aux}");
        };
        row("rounds", self.rounds.to_string(), String::new());
        row("completed_rounds", self.completed_rounds.to_string(), String::new());
        row("aborted_rounds", self.aborted_rounds.to_string(), String::new());
        row(
            "insufficient_data",
            (self.insufficient_data as u8).to_string(),
            String::new(),
        );
        row("violation_rounds", self.violation_rounds.to_string(), String::new());
        row("violation_rate", self.violation_rate.to_string(), String::new());
        for (p, r) in self.forced_rate.iter().enumerate() {
            row(&format!("forced_rate_{}", party_label(p)), r.to_string(), String::new());
        }
        if let Some(mi) = self.forced_mi_bits {
            row("forced_mi_bits", mi.to_string(), String::new());
        }
        if let Some(c) = self.chsh {
            row("chsh", c.value.to_string(), c.stderr.to_string());
        }
        for (name, test) in [
            ("inputs_vs_lambda", &self.inputs_vs_lambda),
            ("inputs_vs_ordering", &self.inputs_vs_ordering),
        ] {
            if let Some(t) = test {
                row(&format!("chi2_{name}"), t.chi2.to_string(), t.p_value.to_string());
                row(&format!("dof_{name}"), t.dof.to_string(), String::new());
                row(
                    &format!("low_power_{name}"),
                    (t.low_power as u8).to_string(),
                    String::new(),
                );
            }
        }
        if let Some(e) = &self.empirical {
            row("unvisited_contexts", e.unvisited.len().to_string(), String::new());
        }
        out
    }
}

/// One JSON object per line, in round order.
pub fn logs_to_jsonl(logs: &[RoundLog]) -> String {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(log).expect("round log serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::fixtures;
    use crate::behavior::{behavior_from_assignment, make_pr_box, make_tsirelson};

    fn uniform_agents(timings: [TimingDist; 2]) -> Vec<AgentSpec> {
        let [ta, tb] = timings;
        vec![AgentSpec::uniform(0, 2, ta), AgentSpec::uniform(1, 2, tb)]
    }

    fn random_timings() -> [TimingDist; 2] {
        [
            TimingDist::Uniform { t_min: 0.0, t_max: 1.0 },
            TimingDist::Uniform { t_min: 0.0, t_max: 1.0 },
        ]
    }

    fn bob_first() -> [TimingDist; 2] {
        [TimingDist::Fixed { t: 2.0 }, TimingDist::Fixed { t: 1.0 }]
    }

    fn config(
        behavior: Behavior,
        mode: RepositoryMode,
        timings: [TimingDist; 2],
        rounds: u64,
        seed: u64,
    ) -> ExperimentConfig {
        ExperimentConfig {
            behavior,
            agents: uniform_agents(timings),
            rounds,
            mode,
            policy: Policy::Force,
            seed,
            parallel: true,
        }
    }

    fn naive_one_way(rounds: u64, seed: u64) -> ExperimentConfig {
        let a = fixtures::one_way_signaling();
        config(
            behavior_from_assignment(&a),
            RepositoryMode::NaiveAssignment(a),
            bob_first(),
            rounds,
            seed,
        )
    }

    #[test]
    fn ordering_from_timestamps() {
        assert_eq!(derive_ordering(&[1.0, 2.0]).parties(), &[0, 1]);
        assert_eq!(derive_ordering(&[2.0, 1.0]).parties(), &[1, 0]);
        assert_eq!(derive_ordering(&[1.0, 1.0]).parties(), &[0, 1]);
        assert_eq!(derive_ordering(&[3.0, 1.0, 1.0]).parties(), &[1, 2, 0]);
    }

    #[test]
    fn config_validation() {
        let mut c = config(make_pr_box(), RepositoryMode::Upgraded, random_timings(), 10, 0);
        assert!(c.validate().is_ok());
        c.agents[0].input_dist = vec![0.5, 0.6];
        assert!(c.validate().is_err());
        c.agents[0].input_dist = vec![1.0];
        assert!(c.validate().is_err());
        c.agents[0] = AgentSpec::uniform(0, 2, TimingDist::Uniform { t_min: 1.0, t_max: 0.0 });
        assert!(c.validate().is_err());
        c.agents.pop();
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn zero_rounds_flag_insufficient_data() {
        let (logs, report) = run_experiment(&config(
            make_tsirelson(),
            RepositoryMode::Upgraded,
            random_timings(),
            0,
            1,
        ))
        .unwrap();
        assert!(logs.is_empty());
        assert!(report.insufficient_data);
        assert!(report.chsh.is_none());
        assert!(report.to_csv().contains("insufficient_data,1,"));
    }

    #[test]
    fn naive_force_makes_alice_copy_bob() {
        let (logs, report) = run_experiment(&naive_one_way(20_000, 3)).unwrap();
        let mut y1 = 0;
        for log in &logs {
            assert_eq!(log.ordering.parties(), &[1, 0]);
            if log.inputs[1] == Some(1) {
                y1 += 1;
                assert!(log.violation && log.forced[0]);
                assert_eq!(log.inputs[0], log.outcomes[1]);
            } else {
                assert!(!log.violation && !log.forced[0]);
            }
        }
        assert_eq!(report.violation_rounds, y1);
        assert!((report.violation_rate - 0.5).abs() < 0.02);
        let restricted: Vec<RoundLog> = logs.into_iter().filter(|l| l.inputs[1] == Some(1)).collect();
        let mi = mutual_information(&restricted, Variable::Output(1), Variable::Input(0)).unwrap();
        assert!((mi - 1.0).abs() < 0.05, "{mi}");
        assert!((report.forced_mi_bits.unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn naive_block_aborts_the_y1_rounds() {
        let mut c = naive_one_way(10_000, 4);
        c.policy = Policy::Block;
        let (logs, report) = run_experiment(&c).unwrap();
        assert!(logs.iter().all(|l| l.aborted == l.violation));
        assert_eq!(report.aborted_rounds, report.violation_rounds);
        assert!((report.violation_rate - 0.5).abs() < 0.03);
        // Completed rounds all had y = 0.
        assert!(logs.iter().filter(|l| !l.aborted).all(|l| l.inputs[1] == Some(0)));
    }

    #[test]
    fn alice_first_needs_no_forcing() {
        let a = fixtures::one_way_signaling();
        let c = config(
            behavior_from_assignment(&a),
            RepositoryMode::NaiveAssignment(a),
            [TimingDist::Fixed { t: 0.0 }, TimingDist::Fixed { t: 1.0 }],
            2000,
            1,
        );
        let (_, report) = run_experiment(&c).unwrap();
        assert_eq!(report.violation_rounds, 0);
    }

    #[test]
    fn naive_decomposition_can_violate() {
        // The (A,B) decomposition of the PR box reads Alice's input into Bob's
        // output; with Bob first that input is not chosen yet.
        let c = config(
            make_pr_box(),
            RepositoryMode::NaiveDecomposition(Ordering::identity(2)),
            bob_first(),
            5000,
            2,
        );
        let (_, report) = run_experiment(&c).unwrap();
        assert!(report.violation_rounds > 0);
    }

    #[test]
    fn upgraded_pr_statistics() {
        let (logs, report) = run_experiment(&config(
            make_pr_box(),
            RepositoryMode::Upgraded,
            random_timings(),
            100_000,
            8,
        ))
        .unwrap();
        assert_eq!(report.violation_rounds, 0);
        assert!(logs.iter().all(|l| !l.is_forced()));
        let empirical = report.empirical.as_ref().unwrap();
        assert!(!empirical.flagged);
        let pr = make_pr_box();
        for xi in 0..4 {
            let tv: f64 = empirical
                .behavior
                .row(xi)
                .iter()
                .zip(pr.row(xi))
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.02, "context {xi}: {tv}");
        }
        let mi = mutual_information(&logs, Variable::Output(0), Variable::Input(1)).unwrap();
        assert!(mi <= 0.01);
    }

    #[test]
    fn upgraded_tsirelson_statistics() {
        let (logs, report) = run_experiment(&config(
            make_tsirelson(),
            RepositoryMode::Upgraded,
            random_timings(),
            100_000,
            12,
        ))
        .unwrap();
        assert_eq!(report.violation_rounds, 0);
        let chsh = report.chsh.unwrap();
        assert!((chsh.value - 2.0 * 2f64.sqrt()).abs() <= 3.0 * chsh.stderr, "{chsh:?}");
        let empirical = report.empirical.unwrap();
        assert!(empirical.behavior.is_no_signaling(0.02).unwrap().holds);
        // Marginal correctness at 3σ per entry.
        let t = make_tsirelson();
        for xi in 0..4 {
            let n = empirical.counts[xi] as f64;
            for (p_hat, p) in empirical.behavior.row(xi).iter().zip(t.row(xi)) {
                assert!((p_hat - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt() + 1e-12);
            }
        }
        assert!(report.inputs_vs_lambda.unwrap().p_value > 0.001);
        assert!(report.inputs_vs_ordering.unwrap().p_value > 0.001);
        // Earlier outcome vs later input, over both orderings.
        let earlier_later: Vec<(u64, u64)> = logs
            .iter()
            .map(|l| {
                let [first, second] = l.ordering.parties()[..] else {
                    unreachable!()
                };
                (l.outcomes[first].unwrap() as u64, l.inputs[second].unwrap() as u64)
            })
            .collect();
        assert!(mutual_information_bits(&earlier_later) <= 0.01);
    }

    #[test]
    fn parallel_and_sequential_logs_match() {
        let mut c = config(make_tsirelson(), RepositoryMode::Upgraded, random_timings(), 3000, 77);
        let (par, _) = run_experiment(&c).unwrap();
        c.parallel = false;
        let (seq, _) = run_experiment(&c).unwrap();
        assert_eq!(logs_to_jsonl(&par), logs_to_jsonl(&seq));
        c.seed = 78;
        let (other, _) = run_experiment(&c).unwrap();
        assert_ne!(logs_to_jsonl(&other), logs_to_jsonl(&seq));
    }

    #[test]
    fn selectors() {
        assert_eq!("input:A".parse::<Variable>().unwrap(), Variable::Input(0));
        assert_eq!("output:1".parse::<Variable>().unwrap(), Variable::Output(1));
        assert_eq!("lambda".parse::<Variable>().unwrap(), Variable::Lambda);
        assert!(matches!("weather".parse::<Variable>(), Err(Error::UnknownSelector(_))));
        assert!(matches!("input:?".parse::<Variable>(), Err(Error::UnknownSelector(_))));
        let (logs, _) = run_experiment(&naive_one_way(10, 0)).unwrap();
        assert!(matches!(
            independence_test(&logs, Variable::Input(5), Variable::Lambda),
            Err(Error::UnknownSelector(_))
        ));
    }

    #[test]
    fn copied_input_fails_independence() {
        let (mut logs, _) = run_experiment(&config(
            make_tsirelson(),
            RepositoryMode::Upgraded,
            random_timings(),
            10_000,
            5,
        ))
        .unwrap();
        for l in &mut logs {
            l.term_index = l.inputs[0].unwrap();
        }
        let t = independence_test(&logs, Variable::Input(0), Variable::Lambda).unwrap();
        assert!(t.p_value < 1e-6);
    }

    #[test]
    fn single_round_estimate_is_flagged() {
        let (logs, _) =
            run_experiment(&config(make_pr_box(), RepositoryMode::Upgraded, random_timings(), 1, 0)).unwrap();
        let e = empirical_behavior(&logs, &Scenario::binary(2));
        assert!(e.flagged);
        assert_eq!(e.unvisited.len(), 3);
        assert!(e.behavior.validate(1e-12).is_valid());
    }

    #[test]
    fn constant_variable_has_no_information() {
        let (logs, _) = run_experiment(&naive_one_way(1000, 0)).unwrap();
        // Alice's outcome is always 0 under the one-way table.
        assert_eq!(
            mutual_information(&logs, Variable::Output(0), Variable::Input(1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn jsonl_has_one_line_per_round() {
        let (logs, _) = run_experiment(&naive_one_way(25, 0)).unwrap();
        let text = logs_to_jsonl(&logs);
        assert_eq!(text.lines().count(), 25);
        let first: RoundLog = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, logs[0]);
    }
}
