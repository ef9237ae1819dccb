//! `noisy-rm`: run experiments, induce machines from example files, compare
//! machines and rebuild learning curves.
//!
//! Exit status: 0 ok, 1 bad config or input, 2 runtime failure, 3 induction
//! budget exhausted under `strict`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use noisy_rm::config::ExperimentConfig;
use noisy_rm::events::{parse_symbolic_traces, Alphabet};
use noisy_rm::examples::{consolidate, parse_pool};
use noisy_rm::harness::{self, Mode, Persist};
use noisy_rm::induction::{brute_force_induce, induce, EdgeCost, InductionTask};
use noisy_rm::machine::{agreement, RewardMachine};
use noisy_rm::Error;

#[derive(Parser)]
#[command(name = "noisy-rm", version, about = "Reward-machine learning under noisy sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the reward machine alongside the policy.
    Run(RunArgs),
    /// Same pipeline with the task's handcrafted machine fixed.
    Baseline(RunArgs),
    /// Learn a machine from an example file and print it.
    Induce(InduceArgs),
    /// Agreement of two machines on the outcome class of traces.
    EvalRm(EvalArgs),
    /// Rebuild aggregate.csv from a run directory's raw CSVs.
    Curves(CurvesArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seed list; repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Continue replicas from their checkpoints.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct InduceArgs {
    /// Pool file: `# alphabet:` header, then `OUTCOME;penalty;steps` lines.
    #[arg(long)]
    examples: PathBuf,
    #[arg(long, default_value_t = 1)]
    max_states: usize,
    /// Seconds; 0 searches to completion.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    #[arg(long, default_value = "edge+literals")]
    edge_cost: String,
    /// Use the exhaustive solver.
    #[arg(long)]
    exhaustive: bool,
    /// Write the machine here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    a: PathBuf,
    b: PathBuf,
    /// Classified trace file; its alphabet header, if any, is used for both
    /// machines.
    #[arg(long)]
    traces: PathBuf,
}

#[derive(Args)]
struct CurvesArgs {
    dir: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    err: Error,
}

fn input(err: Error) -> Failure {
    Failure { code: 1, err }
}

fn runtime(err: Error) -> Failure {
    let code = if matches!(err, Error::BudgetExhausted(_)) { 3 } else { 2 };
    Failure { code, err }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        input(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a, Mode::Learn),
        Command::Baseline(a) => run(a, Mode::Baseline),
        Command::Induce(a) => induce_cmd(a),
        Command::EvalRm(a) => eval_rm(a),
        Command::Curves(a) => curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("noisy-rm: {}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn run(args: RunArgs, mode: Mode) -> Result<(), Failure> {
    read(&args.config)?;
    let mut cfg = ExperimentConfig::load(&args.config).map_err(input)?;
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    let persist = Persist {
        out: Some(args.out.clone()),
        checkpoint_every: cfg.checkpoint_every,
        resume: args.resume,
    };
    let total = cfg.episodes * (cfg.seeds.len() * cfg.maps.count()) as u64;
    let progress = Arc::new(AtomicU64::new(0));
    let done = Arc::new(AtomicU64::new(0));
    let reporter = (!args.quiet).then(|| {
        let (progress, done) = (progress.clone(), done.clone());
        std::thread::spawn(move || {
            while done.load(Ordering::Relaxed) == 0 {
                std::thread::sleep(Duration::from_millis(500));
                eprint!("\r{}/{} episodes", progress.load(Ordering::Relaxed), total);
            }
            eprintln!();
        })
    });
    let summary = harness::run_experiment(&cfg, mode, &persist, &progress);
    done.store(1, Ordering::Relaxed);
    if let Some(r) = reporter {
        let _ = r.join();
    }
    let summary = summary.map_err(runtime)?;
    print!("{}", summary.report());
    println!("wrote {}", args.out.join("aggregate.csv").display());
    if cfg.strict && summary.suboptimal() > 0 {
        return Err(runtime(Error::BudgetExhausted(format!("{} relearns", summary.suboptimal()))));
    }
    Ok(())
}

fn induce_cmd(args: InduceArgs) -> Result<(), Failure> {
    let (alphabet, pool) = parse_pool(&read(&args.examples)?, None).map_err(input)?;
    let edge_cost: EdgeCost = args.edge_cost.parse().map_err(input)?;
    if !(args.budget >= 0.0 && args.budget.is_finite()) {
        return Err(input(Error::config("budget", "must be a non-negative number of seconds")));
    }
    let mut task = InductionTask::new(alphabet.clone(), consolidate(&pool), args.max_states);
    task.edge_cost = edge_cost;
    task.budget = (args.budget > 0.0).then(|| Duration::from_secs_f64(args.budget));
    let solver = if args.exhaustive { brute_force_induce } else { induce };
    let best = solver(&task).map_err(runtime)?;
    let text = best.machine.format(&alphabet);
    match &args.out {
        Some(p) => std::fs::write(p, &text).map_err(|e| runtime(e.into()))?,
        None => print!("{text}"),
    }
    eprintln!("{best}");
    Ok(())
}

fn eval_rm(args: EvalArgs) -> Result<(), Failure> {
    let text = read(&args.traces)?;
    let alphabet = match Alphabet::from_header(&text) {
        Some(a) => a.map_err(input)?,
        None => Alphabet::office_world(),
    };
    let load = |p: &Path| RewardMachine::parse(&read(p)?, &alphabet).map_err(input);
    let (a, b) = (load(&args.a)?, load(&args.b)?);
    let traces: Vec<_> = parse_symbolic_traces(&text, &alphabet)
        .map_err(input)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let share = agreement(&a, &b, &traces);
    let same = (share * traces.len() as f64).round() as usize;
    println!("agreement {:.2}% ({same}/{})", 100.0 * share, traces.len());
    Ok(())
}

fn curves(args: CurvesArgs) -> Result<(), Failure> {
    let rows = harness::curves(&args.dir).map_err(input)?;
    let text = harness::format_aggregate(&rows);
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(|e| runtime(e.into()))?,
        None => print!("{text}"),
    }
    Ok(())
}
