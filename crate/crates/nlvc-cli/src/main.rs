//! `nlvc` — config-driven runner for the nonlocal vector calculus library:
//! operator identity suites, the planar worked example, Helmholtz–Hodge
//! decompositions of analytic or file-loaded pair fields, vanishing-horizon
//! limit studies, and ball-moment quadrature tables.
//!
//! Every run reads one flat sectioned config file, writes its artifacts and
//! a machine-readable `summary.json` into the output directory, and exits
//! 0 (all checks passed), 2 (a tolerance check failed), or 1 (error).

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CommandKind;

#[derive(Parser)]
#[command(name = "nlvc", version, about = "Nonlocal vector calculus runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run config (flat `[section]` / `key = value` text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts (overrides `output.dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject unknown config keys instead of warning.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator identity suite (Gauss, Green, dualities, compositions).
    Identities(RunArgs),
    /// Refinement ladder of the planar worked example with analytic traces.
    Example32(RunArgs),
    /// Decompose a two-point field into gradient, curl, and residual parts.
    Decompose(RunArgs),
    /// Vanishing-horizon limit study of the scaled Laplacian or curl-curl.
    Converge(RunArgs),
    /// Ball-moment quadrature table and homogeneity probe.
    Moments(RunArgs),
}

fn thread_pool_from_env() {
    if let Ok(v) = std::env::var("NLVC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("NLVC_THREADS: could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("NLVC_THREADS: expected a positive integer, got {v:?}"),
        }
    }
}

fn run(kind: CommandKind, args: &RunArgs) -> ExitCode {
    match try_run(kind, args) {
        Ok(code) => code,
        Err((out_dir, msg)) => {
            eprintln!("error: {msg}");
            report::write_error_summary(&out_dir, kind.name(), &msg);
            ExitCode::from(1)
        }
    }
}

fn try_run(kind: CommandKind, args: &RunArgs) -> Result<ExitCode, (PathBuf, String)> {
    let mut out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        (out_dir.clone(), format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let raw = config::parse_config(&text).map_err(|e| (out_dir.clone(), e.to_string()))?;
    let unknown = config::unknown_paths(&raw);
    if !unknown.is_empty() {
        if args.strict {
            return Err((out_dir, format!("config: unknown entries: {}", unknown.join(", "))));
        }
        for path in &unknown {
            log::warn!("config: ignoring unknown entry {path}");
        }
    }
    // --out beats the config; the config echo stays path-free so identical
    // configs give byte-identical summaries regardless of where they land.
    if args.out.is_none() {
        if let Some(entry) = raw.sections.get("output").and_then(|s| s.get("dir")) {
            out_dir = PathBuf::from(&entry.value);
        }
    }

    let outcome =
        commands::run(kind, &raw, &out_dir).map_err(|e| (out_dir.clone(), e.to_string()))?;
    let path = report::write_summary(&out_dir, kind.name(), &outcome)
        .map_err(|e| (out_dir.clone(), format!("cannot write summary: {e}")))?;
    let status = if outcome.all_passed() { "pass" } else { "FAIL" };
    println!(
        "{}: {}/{} checks passed [{status}] -> {}",
        kind.name(),
        outcome.checks.iter().filter(|c| c.pass).count(),
        outcome.checks.len(),
        path.display()
    );
    Ok(ExitCode::from(commands::exit_code(&outcome) as u8))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    thread_pool_from_env();
    let cli = Cli::parse();
    match &cli.command {
        Command::Identities(a) => run(CommandKind::Identities, a),
        Command::Example32(a) => run(CommandKind::Example32, a),
        Command::Decompose(a) => run(CommandKind::Decompose, a),
        Command::Converge(a) => run(CommandKind::Converge, a),
        Command::Moments(a) => run(CommandKind::Moments, a),
    }
}
