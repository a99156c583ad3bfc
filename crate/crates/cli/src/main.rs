use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use orderctx::assignment::fixtures;
use orderctx::behavior::{from_correlators, SINGLET_OPTIMAL_ANGLES};
use orderctx::decomposition::{
    chsh_facets, decompose_along_order, decompose_ordered_with_filler, ordered_membership, Filler,
};
use orderctx::{
    behavior_from_assignment, classify, dependency_graph, in_local_polytope_2222, make_pr_box, make_singlet_behavior,
    make_tsirelson, Behavior, DeterministicAssignment, Ordering, EPS_NORM,
};

mod demo;
mod simulate;
mod table;

#[derive(Parser)]
#[command(
    name = "orderctx",
    version,
    about = "Behaviors, time-ordered decompositions and repository simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a behavior (or, with --table, an assignment table) as JSON.
    Gen {
        kind: GenKind,
        /// Measurement angles `a0,a1,b0,b1` in radians for `singlet`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        /// Assignment table to turn into a behavior, for `assignment`.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Write the deterministic table instead of its behavior (one-way, cyclic).
        #[arg(long)]
        table: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a property of a behavior file. Exits 1 when it fails.
    Check {
        file: PathBuf,
        what: CheckKind,
        /// Time ordering for `ordered`, e.g. `B,A`.
        #[arg(long)]
        order: Option<Ordering>,
        #[arg(long, default_value_t = EPS_NORM)]
        tol: f64,
    },
    /// Signaling structure of an assignment table.
    Classify { file: PathBuf },
    /// Decompose a behavior into assignments respecting an ordering.
    Decompose {
        file: PathBuf,
        #[arg(long)]
        order: Ordering,
        /// Conditional used for histories of probability zero.
        #[arg(long, value_enum, default_value_t = FillerArg::PointZero)]
        filler: FillerArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment against a repository and write stats, logs and the repository.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config; 0 when neither gives one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<simulate::ModeArg>,
        /// Ordering for naive-decomposition mode.
        #[arg(long)]
        order: Option<Ordering>,
        /// Evaluate rounds on one thread.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Canned experiments on the two-party example tables.
    Demo {
        name: demo::DemoName,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    /// PR box.
    Pr,
    /// Correlators ±1/√2, the quantum maximum of CHSH.
    Tsirelson,
    /// Singlet measured at --angles (default: CHSH-optimal angles).
    Singlet,
    /// Uniformly random outputs.
    Noise,
    /// Behavior of the deterministic table in --file.
    Assignment,
    /// a = 0, b = xy.
    OneWay,
    /// a = y, b = x.
    Cyclic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Normalized,
    NoSignaling,
    #[value(name = "local-2222")]
    Local2222,
    Ordered,
}

#[derive(Clone, Copy, ValueEnum)]
enum FillerArg {
    PointZero,
    Uniform,
}

/// Every error is the caller's: bad flags, unreadable or malformed input.
type CmdResult = anyhow::Result<ExitCode>;

pub(crate) fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("note: no --seed given, using seed 0");
        0
    })
}

pub(crate) fn read_behavior(path: &Path) -> anyhow::Result<Behavior> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Behavior::from_json(&text).with_context(|| format!("{} is not a behavior file", path.display()))
}

pub(crate) fn read_assignment(path: &Path) -> anyhow::Result<DeterministicAssignment> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not an assignment file", path.display()))
}

fn emit(out: Option<&Path>, json: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{json}\n")).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
            Ok(())
        }
    }
}

fn gen(kind: GenKind, angles: Option<Vec<f64>>, file: Option<PathBuf>, table: bool, out: Option<PathBuf>) -> CmdResult {
    if angles.is_some() && !matches!(kind, GenKind::Singlet) {
        bail!("--angles only applies to `singlet`");
    }
    if file.is_some() != matches!(kind, GenKind::Assignment) {
        bail!("--file is required by, and only accepted for, `assignment`");
    }
    if table && !matches!(kind, GenKind::OneWay | GenKind::Cyclic) {
        bail!("--table only applies to `one-way` and `cyclic`");
    }
    let behavior = match kind {
        GenKind::Pr => make_pr_box(),
        GenKind::Tsirelson => make_tsirelson(),
        GenKind::Singlet => {
            let (a, b) = match angles {
                Some(v) if v.len() == 4 => ([v[0], v[1]], [v[2], v[3]]),
                Some(v) => bail!("--angles takes 4 values a0,a1,b0,b1, got {}", v.len()),
                None => SINGLET_OPTIMAL_ANGLES,
            };
            make_singlet_behavior(a, b)
        }
        GenKind::Noise => from_correlators([[0.0; 2]; 2]),
        GenKind::Assignment => behavior_from_assignment(&read_assignment(file.as_deref().unwrap())?),
        GenKind::OneWay | GenKind::Cyclic => {
            let a = if matches!(kind, GenKind::OneWay) {
                fixtures::one_way_signaling()
            } else {
                fixtures::cyclic_signaling()
            };
            if table {
                emit(out.as_deref(), &serde_json::to_string(&a)?)?;
                eprintln!("{}", table::render(&a));
                return Ok(ExitCode::SUCCESS);
            }
            behavior_from_assignment(&a)
        }
    };
    emit(out.as_deref(), &behavior.to_json())?;
    if let Ok(s) = behavior.chsh_value() {
        // Keep stdout clean for the JSON when no --out is given.
        let line = format!("S = {s}");
        if out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict(holds: bool) -> ExitCode {
    if holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn check(file: &Path, what: CheckKind, order: Option<Ordering>, tol: f64) -> CmdResult {
    if order.is_some() != matches!(what, CheckKind::Ordered) {
        bail!("--order is required by, and only accepted for, `ordered`");
    }
    let behavior = read_behavior(file)?;
    let validity = behavior.validate(tol);
    if !validity.is_valid() || matches!(what, CheckKind::Normalized) {
        println!(
            "normalized: {} (rows sum to 1: {}, entries in [0,1]: {}, worst deviation {:.3e})",
            if validity.is_valid() { "holds" } else { "fails" },
            validity.normalized,
            validity.entries_in_range,
            validity.worst_deviation
        );
        return Ok(verdict(validity.is_valid()));
    }
    let holds = match what {
        CheckKind::Normalized => unreachable!(),
        CheckKind::NoSignaling => {
            let report = behavior.is_no_signaling(tol)?;
            if report.holds {
                println!("no-signaling: holds (worst deviation {:.3e})", report.worst_violation);
            } else {
                println!("no-signaling: fails");
                if let Some(w) = report.witness {
                    println!("witness: {w}");
                }
            }
            report.holds
        }
        CheckKind::Local2222 => {
            let facets = chsh_facets(&behavior)?;
            let holds = in_local_polytope_2222(&behavior, tol)?;
            let (worst, value) =
                facets.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
            if holds {
                println!("local-2222: holds (largest CHSH expression {value:.12} <= 2)");
            } else {
                println!("local-2222: fails");
                let ns = behavior.is_no_signaling(tol)?;
                if let Some(w) = ns.witness.filter(|_| !ns.holds) {
                    println!("witness: behavior is signaling, {w}");
                } else {
                    println!("witness: {} = {value:.12} > 2", chsh_expression(worst));
                }
            }
            holds
        }
        CheckKind::Ordered => {
            let order = order.unwrap();
            let m = ordered_membership(&behavior, &order, tol)?;
            if m.holds {
                println!("ordered ({order}): holds (worst deviation {:.3e})", m.worst_violation);
            } else {
                println!("ordered ({order}): fails");
                if let Some(w) = m.describe_witness() {
                    println!("witness: {w}");
                }
            }
            m.holds
        }
    };
    Ok(verdict(holds))
}

/// The CHSH expression behind facet `index` of `chsh_facets`.
fn chsh_expression(index: usize) -> String {
    let (minus, flip) = (index / 2, index % 2 == 1);
    let mut out = String::new();
    for ctx in 0..4 {
        let negative = (ctx == minus) != flip;
        if ctx == 0 {
            out.push_str(if negative { "-" } else { "" });
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        out.push_str(&format!("E{}{}", ctx / 2, ctx % 2));
    }
    out
}

fn classify_cmd(file: &Path) -> CmdResult {
    let assignment = read_assignment(file)?;
    let class = classify(&assignment);
    let graph = dependency_graph(&assignment);
    println!("{}", table::render(&assignment));
    println!("kind: {:?}", class.kind);
    println!(
        "edges: {}",
        if graph.is_empty() {
            "none".to_string()
        } else {
            graph.to_string()
        }
    );
    let orders: Vec<String> = class.compatible_orders.iter().map(|o| format!("({o})")).collect();
    println!(
        "compatible orders: {}{}",
        if orders.is_empty() {
            "none".to_string()
        } else {
            orders.join(" ")
        },
        if class.truncated { " (truncated)" } else { "" }
    );
    Ok(ExitCode::SUCCESS)
}

fn decompose(file: &Path, order: &Ordering, filler: FillerArg, out: Option<PathBuf>) -> CmdResult {
    let behavior = read_behavior(file)?;
    let filler = match filler {
        FillerArg::PointZero => Filler::PointZero,
        FillerArg::Uniform => Filler::Uniform,
    };
    let d = if behavior.is_no_signaling(EPS_NORM)?.holds {
        decompose_ordered_with_filler(&behavior, order, filler)?
    } else {
        decompose_along_order(&behavior, order)?
    };
    emit(out.as_deref(), &serde_json::to_string(&d)?)?;
    if out.is_some() {
        println!("{} terms along ({order})", d.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Gen {
            kind,
            angles,
            file,
            table,
            out,
        } => gen(kind, angles, file, table, out),
        Command::Check { file, what, order, tol } => check(&file, what, order, tol),
        Command::Classify { file } => classify_cmd(&file),
        Command::Decompose {
            file,
            order,
            filler,
            out,
        } => decompose(&file, &order, filler, out),
        Command::Simulate {
            config,
            seed,
            rounds,
            mode,
            order,
            sequential,
            out,
        } => simulate::run(simulate::Overrides {
            config,
            seed,
            rounds,
            mode,
            order,
            sequential,
            out,
        }),
        Command::Demo { name, rounds, seed } => demo::run(name, rounds, seed_or_default(seed)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
