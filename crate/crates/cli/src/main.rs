use std::path::PathBuf;
use std::process::ExitCode;

use accrete_cli::analytic_cmd::{analytic, AnalyticArgs};
use accrete_cli::config::{pool, resolve_threads, RunArgs};
use accrete_cli::error::{CliError, EXIT_GATE_FAILURE, EXIT_OK, EXIT_USAGE};
use accrete_cli::output::write_json;
use accrete_cli::simulate::{simulate, sweep};
use accrete_cli::validate::{run_suite, Scale, Suite};
use clap::{Args, Parser, Subcommand};

/// Brownian particles absorbed by an accreting boundary.
#[derive(Parser)]
#[command(name = "accrete", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one replica and write trajectory.csv, events.csv and meta.json
    Simulate(RunArgs),
    /// Run many replicas and write replicas.csv and aggregate.json
    Sweep(RunArgs),
    /// Evaluate a closed-form law
    Analytic(AnalyticArgs),
    /// Run acceptance gates on pinned seeds
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// reduced replica counts and looser tolerances
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// machine-readable report; defaults to validate_<suite>.json
    #[arg(long)]
    report: Option<PathBuf>,
}

fn validate(args: &ValidateArgs) -> Result<u8, CliError> {
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let threads = resolve_threads(args.threads)?;
    let report = pool(threads)?.install(|| run_suite(args.suite, scale, |g| println!("{}", g.summary())))?;
    let path = args.report.clone().unwrap_or_else(|| PathBuf::from(format!("validate_{}.json", args.suite.name())));
    write_json(&path, &report)?;
    for g in report.gates.iter().filter(|g| !g.passed) {
        for c in g.checks.iter().filter(|c| !c.passed) {
            eprintln!("gate {} failed: {} = {} not {} {}", g.gate, c.name, c.statistic, c.relation, c.threshold);
        }
    }
    println!("{} ({} gates); report at {}", if report.passed { "PASS" } else { "FAIL" }, report.gates.len(), path.display());
    Ok(if report.passed { EXIT_OK } else { EXIT_GATE_FAILURE })
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Simulate(a) => {
            let cfg = a.resolve()?;
            let (traj, written) = simulate(&cfg)?;
            println!(
                "{} events, N(T) = {}, truncation bound {:e}{}",
                traj.jump_log.len(),
                traj.final_n(),
                traj.truncation_bound,
                if traj.exploded { ", exploded" } else { "" }
            );
            for f in written.files {
                println!("wrote {}", f.display());
            }
            Ok(EXIT_OK)
        }
        Cmd::Sweep(a) => {
            let cfg = a.resolve()?;
            let (agg, written) = sweep(&cfg)?;
            println!(
                "{}/{} replicas succeeded; mean N(T) = {}{}",
                agg.succeeded,
                agg.replicas,
                agg.final_n.mean,
                if agg.degenerate_ci { " (degenerate CI)" } else { "" }
            );
            if let Some(s) = &agg.speed {
                println!("V_hat = {} ± {}", s.v_hat.mean, s.v_hat.stderr);
            }
            for f in written.files {
                println!("wrote {}", f.display());
            }
            Ok(EXIT_OK)
        }
        Cmd::Analytic(a) => {
            analytic(&a, &mut std::io::stdout().lock())?;
            Ok(EXIT_OK)
        }
        Cmd::Validate(a) => validate(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
