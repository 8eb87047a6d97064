use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use lensrig::{run, CliError, Command, Overrides, RunConfig};

/// Lens data, Jacobi frames and rigidity identities on surfaces.
#[derive(Debug, Parser)]
#[command(name = "lensrig", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    fan: Option<usize>,
    #[arg(long)]
    m0: Option<String>,
    #[arg(long)]
    m1: Option<String>,
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        tol: cli.tol,
        metric: cli.metric.clone(),
        fan: cli.fan,
        m0: cli.m0.clone(),
        m1: cli.m1.clone(),
    });
    let report = run(cli.command, &cfg)?;
    for c in &report.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} residual={:.3e} tol={:.1e}", c.name, c.residual, c.tolerance);
    }
    if report.flagged > 0 {
        println!("flagged {}", report.flagged);
    }
    println!("report {}", cfg.out_dir().join("report.json").display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("lensrig: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
