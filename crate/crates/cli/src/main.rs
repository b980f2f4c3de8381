use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use quasirev_cli::{run, RunConfig};

/// Reconstruct a parabolic source or coefficient from boundary flux data.
#[derive(Debug, Parser)]
#[command(name = "quasirev", version)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Noise level, overrides `delta`.
    #[arg(long)]
    delta: Option<f64>,
    /// Noise seed, overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Regularization weight, overrides `epsilon`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Spatial intervals per axis, overrides `grid.nx`.
    #[arg(long)]
    nx: Option<usize>,
    /// Time steps, overrides `grid.nt`.
    #[arg(long)]
    nt: Option<usize>,
    /// Final time, overrides `grid.t_final`.
    #[arg(long)]
    t_final: Option<f64>,
    /// Output directory, overrides `output_dir`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// More log output; repeat for debug messages.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Print nothing but errors.
    #[arg(short, long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                error!("{}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(v) = cli.delta {
        cfg.delta = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = cli.nx {
        cfg.grid.nx = v;
    }
    if let Some(v) = cli.nt {
        cfg.grid.nt = v;
    }
    if let Some(v) = cli.t_final {
        cfg.grid.t_final = v;
    }
    if let Some(v) = cli.output {
        cfg.output_dir = v;
    }

    match run(&cfg) {
        Ok(_) if cli.quiet => ExitCode::SUCCESS,
        Ok(summary) => {
            for row in &summary.metrics {
                println!(
                    "{}: true {} computed {:.6} relative error {:.4}",
                    row.inclusion, row.extreme_true, row.extreme_comp, row.err_rel
                );
            }
            println!("relative L2 error {:.6}", summary.l2_error);
            println!("outputs in {}", summary.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
