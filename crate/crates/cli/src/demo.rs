//! Canned two-party experiments contrasting a fixed signaling table with a
//! repository whose context includes the time ordering.

use std::process::ExitCode;

use clap::ValueEnum;

use orderctx::assignment::fixtures;
use orderctx::sim::empirical_behavior;
use orderctx::stats::{chi_squared_independence, IndependenceTest};
use orderctx::{
    behavior_from_assignment, independence_test, make_pr_box, mutual_information, run_experiment, AgentSpec,
    ExperimentConfig, Policy, RepositoryMode, RoundLog, TimingDist, Variable,
};

use crate::table;

#[derive(Clone, Copy, ValueEnum)]
pub enum DemoName {
    /// One fixed table, Bob measures first: Alice's input gets forced.
    NaiveSignaling,
    /// Time ordering in the context: no forcing, inputs independent of the hidden term.
    UpgradedFix,
}

fn describe_test(name: &str, t: &IndependenceTest) {
    println!(
        "  {name}: chi2 = {:.3}, dof = {}, p = {:.4}{}",
        t.chi2,
        t.dof,
        t.p_value,
        if t.low_power { " (low power)" } else { "" }
    );
}

/// Rounds where Bob chose y = 1 and both outcomes exist.
fn bob_y1(logs: &[RoundLog]) -> Vec<RoundLog> {
    logs.iter()
        .filter(|l| !l.aborted && l.inputs[1] == Some(1))
        .cloned()
        .collect()
}

fn naive(rounds: u64, seed: u64) -> anyhow::Result<ExitCode> {
    let table = fixtures::one_way_signaling();
    println!(
        "Repository holds one table for every round:\n{}\n",
        table::render(&table)
    );
    println!("Bob measures first (t_B = 0 < t_A = 1), y uniform; forcing policy.");
    let config = ExperimentConfig {
        behavior: behavior_from_assignment(&table),
        agents: vec![
            AgentSpec::uniform(0, 2, TimingDist::Fixed { t: 1.0 }),
            AgentSpec::uniform(1, 2, TimingDist::Fixed { t: 0.0 }),
        ],
        rounds,
        mode: RepositoryMode::NaiveAssignment(table),
        policy: Policy::Force,
        seed,
        parallel: true,
    };
    let (logs, report) = run_experiment(&config)?;
    println!("rounds: {} (seed {seed})", report.rounds);
    if report.insufficient_data {
        println!("insufficient data: no completed rounds");
        return Ok(ExitCode::SUCCESS);
    }
    println!("rounds with a free-choice violation: {}", report.violation_rounds);
    println!("Alice's input forced in {:.4} of rounds", report.forced_rate[0]);
    let y1 = bob_y1(&logs);
    let matched = y1.iter().filter(|l| l.inputs[0] == l.outcomes[1]).count();
    println!(
        "rounds with y = 1: {}, Alice's input equals Bob's outcome in {matched}",
        y1.len()
    );
    if !y1.is_empty() {
        let mi = mutual_information(&y1, Variable::Output(1), Variable::Input(0))?;
        println!("MI(Bob's outcome; Alice's input | y = 1) = {mi:.4} bits");
        let pairs: Vec<(u64, u64)> = y1
            .iter()
            .filter_map(|l| Some((l.outcomes[1]? as u64, l.inputs[0]? as u64)))
            .collect();
        describe_test(
            "Bob's outcome vs Alice's input, y = 1",
            &chi_squared_independence(&pairs),
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn upgraded(rounds: u64, seed: u64) -> anyhow::Result<ExitCode> {
    let (first, second) = (fixtures::one_way_signaling(), fixtures::one_way_signaling_reversed());
    println!("Context includes the time ordering:");
    println!(
        "{}\n",
        table::render_by_order(&[("tA<=tB", &first), ("tA>tB", &second)])
    );
    println!("Repository: PR box decomposed along each ordering; the rows above are one of its four");
    println!("hidden terms. Timings uniform on [0, 1], inputs uniform.");
    let timing = TimingDist::Uniform { t_min: 0.0, t_max: 1.0 };
    let config = ExperimentConfig {
        behavior: make_pr_box(),
        agents: vec![
            AgentSpec::uniform(0, 2, timing.clone()),
            AgentSpec::uniform(1, 2, timing),
        ],
        rounds,
        mode: RepositoryMode::Upgraded,
        policy: Policy::Force,
        seed,
        parallel: true,
    };
    let (logs, report) = run_experiment(&config)?;
    println!("rounds: {} (seed {seed})", report.rounds);
    if report.insufficient_data {
        println!("insufficient data: no completed rounds");
        return Ok(ExitCode::SUCCESS);
    }
    println!("rounds with a free-choice violation: {}", report.violation_rounds);
    if let Some(c) = report.chsh {
        println!("CHSH = {:.4} ± {:.4}", c.value, c.stderr);
    }
    println!("independence of the joint inputs:");
    if let Some(t) = &report.inputs_vs_lambda {
        describe_test("vs hidden term", t);
    }
    if let Some(t) = &report.inputs_vs_ordering {
        describe_test("vs time ordering", t);
    }
    let bob_first: Vec<RoundLog> = bob_y1(&logs)
        .into_iter()
        .filter(|l| l.ordering.parties()[0] == 1)
        .collect();
    if !bob_first.is_empty() {
        let mi = mutual_information(&bob_first, Variable::Output(1), Variable::Input(0))?;
        println!("rounds with Bob first and y = 1: {}", bob_first.len());
        println!("MI(Bob's outcome; Alice's input | Bob first, y = 1) = {mi:.4} bits");
        describe_test(
            "Bob's outcome vs Alice's input",
            &independence_test(&bob_first, Variable::Output(1), Variable::Input(0))?,
        );
    }
    let empirical = empirical_behavior(&logs, config.behavior.scenario());
    if !empirical.flagged {
        let ns = empirical.behavior.is_no_signaling(1.0)?;
        println!("empirical no-signaling deviation: {:.4}", ns.worst_violation);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run(name: DemoName, rounds: u64, seed: u64) -> anyhow::Result<ExitCode> {
    match name {
        DemoName::NaiveSignaling => naive(rounds, seed),
        DemoName::UpgradedFix => upgraded(rounds, seed),
    }
}
