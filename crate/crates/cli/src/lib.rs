//! The `heis` command-line front end.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use heis_core::report::{Report, Status};
use heis_core::threehop::SearchBudget;
use heis_core::HeisError;
use serde_json::json;

use commands::{Ctx, Outcome};
use config::RunConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "heis", version, about = "Geometry of H-convex functions on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Report destination (stdout when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Bulk CSV destination.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config search budget.
    #[arg(long, global = true, value_enum)]
    budget: Option<BudgetPreset>,
    /// Worker threads; HEIS_JOBS takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Record per-stage wall-clock seconds (reports are then not reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sampled H-convexity check.
    Convexity,
    /// Radial boundary of an H-section.
    SectionH,
    /// Three-hop section membership, or its boundary profile on H¹.
    SectionHn,
    /// Extremes of the recentered function on horizontal spheres.
    #[command(name = "m-M")]
    MM,
    /// Engulfing constant estimate and violation search.
    Engulfing,
    /// Quasi-distances between configured points.
    Quasimetric,
    /// Three-hop decomposition of a target point.
    Decompose,
    /// Closed-form checks for x² + y² on H¹.
    ExampleVerify,
    /// Staged checks from convexity up to the quasi-triangle constant.
    Chain,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BudgetPreset {
    Quick,
    Default,
    Thorough,
}

impl BudgetPreset {
    fn budget(self) -> SearchBudget {
        match self {
            BudgetPreset::Quick => SearchBudget::quick(),
            BudgetPreset::Default => SearchBudget::default(),
            BudgetPreset::Thorough => SearchBudget::thorough(),
        }
    }
}

fn fail(code: i32, body: serde_json::Value) -> i32 {
    eprintln!("{}", serde_json::to_string(&body).expect("error serializes"));
    code
}

fn heis_failure(e: &HeisError) -> i32 {
    let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE };
    fail(code, json!({ "error": e.to_string(), "kind": if e.is_numerical() { "numerical" } else { "input" } }))
}

/// Exit code for a finished report: errors beat failures beat passes.
pub fn exit_code(report: &Report) -> i32 {
    if report.stages.iter().any(|s| s.status == Status::Error) {
        EXIT_NUMERICAL
    } else if report.all_passed() {
        EXIT_PASS
    } else {
        EXIT_VIOLATIONS
    }
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("HEIS_JOBS") {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| format!("HEIS_JOBS must be a count, got `{v}`")),
        Err(_) => Ok(flag),
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), i32> {
    std::fs::write(path, text)
        .map_err(|e| fail(EXIT_USAGE, json!({ "error": format!("cannot write {}: {e}", path.display()) })))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match jobs(cli.jobs) {
        Ok(Some(0)) => return fail(EXIT_USAGE, json!({ "error": "worker count must be positive" })),
        Ok(Some(n)) => {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(msg) => return fail(EXIT_USAGE, json!({ "error": msg })),
    }
    let cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_USAGE, json!({ "error": format!("cannot read {}: {e}", path.display()) })),
            };
            match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    return fail(EXIT_USAGE, json!({ "error": e.message, "line": e.line, "column": e.column }));
                }
            }
        }
    };
    let budget = match (cli.budget, &cfg.budgets) {
        (Some(p), _) => p.budget(),
        (None, Some(b)) => b.clone(),
        (None, None) => SearchBudget::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(cfg.seed),
        budget,
        timing: cli.timing,
        csv_path: cli.csv.as_ref().map(|p| p.to_string_lossy().into_owned()),
        cfg,
    };
    let result = match cli.command {
        Command::Convexity => commands::convexity(&ctx),
        Command::SectionH => commands::section_h(&ctx),
        Command::SectionHn => commands::section_hn(&ctx),
        Command::MM => commands::m_big_m(&ctx),
        Command::Engulfing => commands::engulfing(&ctx),
        Command::Quasimetric => commands::quasimetric(&ctx),
        Command::Decompose => commands::decompose(&ctx),
        Command::ExampleVerify => commands::example_verify(&ctx),
        Command::Chain => commands::chain(&ctx),
    };
    let Outcome { report, csv, extra } = match result {
        Ok(o) => o,
        Err(e) => return heis_failure(&e),
    };
    let json = report.to_json();
    let written = match &cli.out {
        Some(path) => write(path, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    };
    if let Err(code) = written {
        return code;
    }
    if let (Some(path), Some(text)) = (&cli.csv, csv) {
        if let Err(code) = write(path, &text) {
            return code;
        }
        for (p, text) in extra {
            if let Err(code) = write(&PathBuf::from(p), &text) {
                return code;
            }
        }
    }
    exit_code(&report)
}
