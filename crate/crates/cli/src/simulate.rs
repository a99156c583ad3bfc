//! `simulate`: experiment configs on disk, results to a directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::Deserialize;
use serde_json::Value;

use orderctx::repository::build_repository;
use orderctx::sim::{logs_to_jsonl, run_rounds, summarize};
use orderctx::{
    AgentSpec, Behavior, DeterministicAssignment, ExperimentConfig, Ordering, Policy, RepositoryMode, TimingDist,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Upgraded,
    NaiveAssignment,
    NaiveDecomposition,
}

/// Experiment description. `behavior` and `assignment` are either inline
/// objects or paths relative to the config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    behavior: Value,
    /// Defaults to uniform inputs and timings uniform on [0, 1].
    agents: Option<Vec<AgentSpec>>,
    mode: Option<ModeArg>,
    assignment: Option<Value>,
    /// `"B,A"` or `[1, 0]`.
    naive_order: Option<Value>,
    policy: Option<Policy>,
    rounds: Option<u64>,
    seed: Option<u64>,
}

pub struct Overrides {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub rounds: Option<u64>,
    pub mode: Option<ModeArg>,
    pub order: Option<Ordering>,
    pub sequential: bool,
    pub out: PathBuf,
}

fn inline_or_file<T: for<'de> Deserialize<'de>>(value: Value, base: &Path, what: &str) -> anyhow::Result<T> {
    match value {
        Value::String(rel) => {
            let path = base.join(rel);
            let text = fs::read_to_string(&path).with_context(|| format!("cannot read {what} {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not a valid {what}", path.display()))
        }
        v => serde_json::from_value(v).with_context(|| format!("inline {what} is invalid")),
    }
}

fn load(o: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(&o.config).with_context(|| format!("cannot read {}", o.config.display()))?;
    let file: ConfigFile =
        serde_json::from_str(&text).with_context(|| format!("{} is not a valid config", o.config.display()))?;
    let base = o.config.parent().unwrap_or(Path::new("."));
    let behavior: Behavior = inline_or_file(file.behavior, base, "behavior")?;
    let s = behavior.scenario();
    let agents = file.agents.unwrap_or_else(|| {
        (0..s.n_parties())
            .map(|p| AgentSpec::uniform(p, s.input_cards()[p], TimingDist::Uniform { t_min: 0.0, t_max: 1.0 }))
            .collect()
    });
    let mode = match o.mode.or(file.mode).unwrap_or(ModeArg::Upgraded) {
        ModeArg::Upgraded => RepositoryMode::Upgraded,
        ModeArg::NaiveAssignment => {
            let Some(a) = file.assignment else {
                bail!("naive-assignment mode needs an `assignment` in the config");
            };
            RepositoryMode::NaiveAssignment(inline_or_file::<DeterministicAssignment>(a, base, "assignment")?)
        }
        ModeArg::NaiveDecomposition => {
            let order = match (o.order.clone(), file.naive_order) {
                (Some(order), _) => order,
                (None, Some(Value::String(s))) => s.parse()?,
                (None, Some(v)) => serde_json::from_value(v).context("`naive_order` is invalid")?,
                (None, None) => bail!("naive-decomposition mode needs --order or `naive_order` in the config"),
            };
            RepositoryMode::NaiveDecomposition(order)
        }
    };
    let seed = match o.seed.or(file.seed) {
        Some(seed) => seed,
        None => crate::seed_or_default(None),
    };
    let config = ExperimentConfig {
        behavior,
        agents,
        rounds: o.rounds.or(file.rounds).unwrap_or(10_000),
        mode,
        policy: file.policy.unwrap_or(Policy::Force),
        seed,
        parallel: !o.sequential,
    };
    config.validate()?;
    Ok(config)
}

pub fn run(o: Overrides) -> anyhow::Result<ExitCode> {
    let config = load(&o)?;
    let repo = build_repository(&config.behavior, config.mode.clone(), config.seed)?;
    let logs = run_rounds(&repo, &config)?;
    let report = summarize(&logs, config.behavior.scenario());

    fs::create_dir_all(&o.out).with_context(|| format!("cannot create {}", o.out.display()))?;
    let write = |name: &str, contents: String| {
        let path = o.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    };
    write("stats.csv", report.to_csv())?;
    write("logs.jsonl", logs_to_jsonl(&logs))?;
    write("repository.json", serde_json::to_string_pretty(&repo.dump())?)?;

    println!(
        "{} rounds (seed {}, {:?} mode): {} completed, {} with violations",
        report.rounds,
        config.seed,
        repo.mode().kind(),
        report.completed_rounds,
        report.violation_rounds
    );
    if report.insufficient_data {
        println!("insufficient data: no completed rounds");
    }
    if let Some(c) = report.chsh {
        println!("CHSH = {:.4} ± {:.4}", c.value, c.stderr);
    }
    if let Some(t) = report.inputs_vs_lambda {
        println!(
            "inputs vs hidden term: chi2 = {:.3}, dof = {}, p = {:.4}",
            t.chi2, t.dof, t.p_value
        );
    }
    println!("wrote stats.csv, logs.jsonl and repository.json to {}", o.out.display());
    Ok(ExitCode::SUCCESS)
}
