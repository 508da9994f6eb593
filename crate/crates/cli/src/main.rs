use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdgstokes_cli::{export_matrices, run_solve, run_study, run_verify, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "hdgstokes", version, about = "HDG Stokes solver with block-preconditioned Krylov methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write solve.json (plus solution.csv, mesh.txt).
    Solve(RunArgs),
    /// Iteration counts over refinement levels: study.json and study.csv.
    Study(RunArgs),
    /// Stability and structure checks over refinement levels: verify.json.
    Verify(RunArgs),
    /// Write the system matrices in Matrix Market format.
    ExportMatrices(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for mesh jitter and randomized estimates.
    #[arg(long)]
    seed: Option<u64>,
    /// Refinement level for solve and export-matrices; number of levels for
    /// study and verify.
    #[arg(long)]
    level: Option<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Solve(args) => {
            let mut cfg = load(&args)?;
            cfg.level = args.level.unwrap_or(cfg.level);
            let r = run_solve(&cfg, Some(&args.out))?;
            println!(
                "{} with {}: {} iterations, converged = {}, residual {:.3e}",
                r.solver.solver, r.solver.preconditioner, r.solver.iterations, r.solver.converged, r.solver.final_residual
            );
            Ok(r.passed())
        }
        Command::Study(args) => {
            let mut cfg = load(&args)?;
            cfg.study.levels = args.level.unwrap_or(cfg.study.levels);
            let r = run_study(&cfg, Some(&args.out))?;
            println!("{:>8} {}", "dofs", r.columns.iter().map(|c| format!("{c:>14}")).collect::<String>());
            for row in &r.rows {
                let cells: String = r.columns.iter().map(|c| format!("{:>14}", row.runs[c].iterations)).collect();
                println!("{:>8} {cells}", row.dofs);
            }
            Ok(r.passed())
        }
        Command::Verify(args) => {
            let mut cfg = load(&args)?;
            cfg.verify.levels = args.level.unwrap_or(cfg.verify.levels);
            let r = run_verify(&cfg, Some(&args.out))?;
            println!("{} of {} checks passed", r.checks.iter().filter(|c| c.passed).count(), r.checks.len());
            for f in &r.failures {
                eprintln!("FAILED: {f}");
            }
            Ok(r.passed())
        }
        Command::ExportMatrices(args) => {
            let mut cfg = load(&args)?;
            cfg.level = args.level.unwrap_or(cfg.level);
            let r = export_matrices(&cfg, &args.out)?;
            println!("wrote {} files to {}", r.files.len(), args.out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
