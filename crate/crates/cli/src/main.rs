mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::{Command, RunConfig};

/// Rotation-minimizing frames, variational curves and their reconstruction.
#[derive(Parser)]
#[command(name = "rmframe", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Frenet and rotation-minimizing frames of a curve, with invariants.
    Frame(Common),
    /// Euler-Lagrange system of a Lagrangian, integrated from initial data.
    Solve(Common),
    /// Curve and frame recovered from invariants and conservation constants.
    Reconstruct(Common),
    /// Tube mesh swept along a curve by a frame.
    Sweep(Common),
    /// Run the verification suites.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Input file (curve CSV/JSON, or trajectory CSV for reconstruct).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output directory; relative paths go under $RMFRAME_OUTPUT_ROOT.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Built-in curve, e.g. "helix a=1 b=1".
    #[arg(long)]
    curve: Option<String>,
    /// Built-in variational problem.
    #[arg(long)]
    fixture: Option<String>,
    /// Lagrangian text.
    #[arg(long)]
    lagrangian: Option<String>,
    /// rm, frenet or both.
    #[arg(long)]
    frame: Option<String>,
    #[arg(long)]
    ds: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Smaller verification runs.
    #[arg(long)]
    quick: bool,
    /// Run sequentially.
    #[arg(long)]
    sequential: bool,
    /// Inject a defect, e.g. adjoint-sign.
    #[arg(long)]
    fault: Option<String>,
}

fn build_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    put("input", c.input.as_ref().map(|p| p.display().to_string()));
    put("output", c.output.as_ref().map(|p| p.display().to_string()));
    put("curve", c.curve.clone());
    put("fixture", c.fixture.clone());
    put("lagrangian", c.lagrangian.clone());
    put("frame", c.frame.clone());
    put("ds", c.ds.clone());
    put("seed", c.seed.clone());
    put("fault", c.fault.clone());
    put("quick", c.quick.then(|| "true".into()));
    put("parallel", c.sequential.then(|| "false".into()));
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in pairs {
        cfg.set(&k, &v).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Frame(c) => (Command::Frame, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Reconstruct(c) => (Command::Reconstruct, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let result = build_config(common).and_then(|cfg| {
        let root = std::env::var_os("RMFRAME_OUTPUT_ROOT").map(PathBuf::from);
        let dir = cfg.output_dir(command, root.as_deref());
        commands::run(command, &cfg, &dir).map(|files| (dir, files))
    });
    match result {
        Ok((dir, files)) => {
            eprintln!("wrote {} files to {}", files.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Truncated { .. } => eprintln!("warning: {e}; partial output written"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
