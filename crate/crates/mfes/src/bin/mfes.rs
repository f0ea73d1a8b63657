//! Command-line experiment runner for the merit-function ES solver.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mfes::bench::{self, StartKind};
use mfes::harness::{self, ExperimentPlan, OutputFormat};
use mfes::solver::DirectionMode;
use mfes::ViolationNorm;

/// Seed used when neither `--seed` nor the `MFES_SEED` environment variable
/// is given.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "mfes", version, about = "Constrained derivative-free optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment campaign over benchmark problems.
    Run(RunArgs),
    /// Dump the benchmark registry as a table or structured manifest.
    Registry(RegistryArgs),
    /// Evaluate every problem at its published optimum and report errors.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated registry names, or `all`.
    #[arg(long, value_delimiter = ',')]
    problems: Vec<String>,

    /// Declarative problem files (TOML) added to the campaign.
    #[arg(long = "problem-file")]
    problem_files: Vec<PathBuf>,

    /// Objective-evaluation budget per run.
    #[arg(long, default_value_t = 1000)]
    budget: usize,

    /// Runs per problem; seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 10)]
    runs: usize,

    /// Base seed (default: MFES_SEED environment variable, then 0).
    #[arg(long)]
    seed: Option<u64>,

    /// Starting point kind.
    #[arg(long, value_enum, default_value_t = StartArg::Midpoint)]
    start: StartArg,

    /// Unrelaxable-constraint handling.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,

    /// Constraint-violation norm.
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    norm: NormArg,

    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    output: FormatArg,

    /// Write the report here instead of stdout.
    #[arg(long = "out-path")]
    out_path: Option<PathBuf>,

    /// Dump per-run trace and summary files into this directory.
    #[arg(long = "trace-dir")]
    trace_dir: Option<PathBuf>,

    /// Preset: budget 1000, 10 runs.
    #[arg(long = "paper-small", conflicts_with = "paper_large")]
    paper_small: bool,

    /// Preset: budget 20000, 10 runs.
    #[arg(long = "paper-large")]
    paper_large: bool,
}

#[derive(Args)]
struct RegistryArgs {
    /// `table` for a summary, `json` for the full manifest.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    output: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Feasible,
    Infeasible,
    Midpoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Projection,
    Barrier,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2sq,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

fn env_seed() -> Option<u64> {
    std::env::var("MFES_SEED").ok().and_then(|v| v.parse().ok())
}

fn run(args: RunArgs) -> Result<bool> {
    let mut problems: Vec<String> = Vec::new();
    for name in &args.problems {
        if name.eq_ignore_ascii_case("all") {
            problems.extend(bench::names());
        } else {
            problems.push(name.clone());
        }
    }
    let mut file_problems = Vec::new();
    for path in &args.problem_files {
        file_problems.push(
            harness::load_problem_file(path)
                .with_context(|| format!("loading {}", path.display()))?,
        );
    }
    if problems.is_empty() && file_problems.is_empty() {
        bail!("no problems selected; pass --problems <names|all> or --problem-file <path>");
    }

    let (budget, runs) = if args.paper_small {
        (1000, 10)
    } else if args.paper_large {
        (20000, 10)
    } else {
        (args.budget, args.runs)
    };

    let plan = ExperimentPlan {
        problems,
        file_problems,
        budget,
        runs,
        base_seed: args.seed.or_else(env_seed).unwrap_or(DEFAULT_SEED),
        start_kind: match args.start {
            StartArg::Feasible => StartKind::Feasible,
            StartArg::Infeasible => StartKind::Infeasible,
            StartArg::Midpoint => StartKind::Midpoint,
        },
        mode: match args.mode {
            ModeArg::Auto => DirectionMode::Auto,
            ModeArg::Projection => DirectionMode::Projection,
            ModeArg::Barrier => DirectionMode::Barrier,
        },
        norm: match args.norm {
            NormArg::L1 => ViolationNorm::L1,
            NormArg::L2sq => ViolationNorm::L2Squared,
        },
        trace_dir: args.trace_dir.clone(),
        ..Default::default()
    };

    let result = harness::run_campaign(&plan)?;
    let rows = harness::aggregate(&result, &plan);
    for (name, runs) in &result.records {
        for (ri, run) in runs.iter().enumerate() {
            if let Err(message) = run {
                eprintln!("warning: {name} run {ri}: {message}");
            }
        }
    }

    let format = match args.output {
        FormatArg::Table => OutputFormat::Table,
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    match &args.out_path {
        Some(path) => {
            let mut file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            harness::write_structured(&rows, format, &mut file)?;
        }
        None => {
            let stdout = io::stdout();
            harness::write_structured(&rows, format, &mut stdout.lock())?;
        }
    }
    Ok(result.had_errors())
}

fn registry(args: RegistryArgs) -> Result<()> {
    match args.output {
        FormatArg::Json => {
            let manifest = bench::manifest();
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        _ => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<6} {:>3} {:>3} {:>12}  {}\n",
                "Name", "n", "m", "f_opt", "equalities"
            ));
            for e in bench::manifest() {
                out.push_str(&format!(
                    "{:<6} {:>3} {:>3} {:>12.6}  {:?}\n",
                    e.name, e.dimension, e.constraints, e.f_opt, e.equality_indices
                ));
            }
            print!("{out}");
        }
    }
    Ok(())
}

fn validate() -> Result<bool> {
    let report = bench::validate_registry();
    println!(
        "{:<6} {:>14} {:>14} {:>12} {:>12}  ok",
        "Name", "f_opt", "f(x_opt)", "|f-f_opt|", "g(x_opt)"
    );
    for e in &report.entries {
        println!(
            "{:<6} {:>14.6} {:>14.6} {:>12.3e} {:>12.3e}  {}",
            e.name,
            e.f_opt,
            e.f_at_optimum.unwrap_or(f64::NAN),
            e.f_error.unwrap_or(f64::NAN),
            e.violation_at_optimum.unwrap_or(f64::NAN),
            if e.ok { "yes" } else { "FLAGGED" },
        );
    }
    Ok(!report.all_ok())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let failed = match cli.command {
        Command::Run(args) => run(args),
        Command::Registry(args) => registry(args).map(|()| false),
        Command::Validate => validate(),
    };
    match failed {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::FAILURE,
        Err(err) => {
            let mut stderr = io::stderr();
            let _ = writeln!(stderr, "error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
