use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use rodflow_cli::{run, Command, Failure, RunConfig};

/// Numerical lab for the hyperelastic rod equation on the circle.
#[derive(Parser, Debug)]
#[command(name = "rodflow", version, about)]
struct Cli {
    /// Worker threads for independent experiment records.
    #[arg(long, global = true, env = "RODFLOW_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Integrate the Eulerian and/or Lagrangian formulation.
    Simulate(Common),
    /// Check the transported-momentum identity along the flow.
    VerifyConservation(Common),
    /// Run the non-uniform dependence experiment.
    Nonuniform(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Keep every k-th snapshot (overrides the config).
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Apply the 2/3 dealiasing rule to quadratic products.
    #[arg(long)]
    dealias: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::VerifyConservation(c) => (Command::VerifyConservation, c),
        Sub::Nonuniform(c) => (Command::Nonuniform, c),
    };
    match execute(command, &common, cli.threads) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("rodflow: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}

fn execute(command: Command, common: &Common, threads: Option<usize>) -> Result<i32, Failure> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(k) = common.snapshot_stride {
        cfg.snapshot_stride = k;
    }
    if common.dealias {
        cfg.dealias = true;
    }
    let outcome = run(command, &cfg, &common.out)?;
    if let Some(m) = &outcome.message {
        eprintln!("rodflow: {m}");
    }
    Ok(outcome.code())
}
