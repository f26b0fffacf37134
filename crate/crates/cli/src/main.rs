use anyhow::Context;
use clap::{Parser, Subcommand};
use ddorm_cli::error::CliError;
use ddorm_cli::sweep::{describe_trend, parse_grid, run_sweep, SweepAxis};
use ddorm_cli::verify::{parse_fault, run_verify};
use ddorm_cli::{plot, run_experiment, ExperimentConfig};
use ddorm_core::verify::{VerifyOptions, DEFAULT_SEED};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ddorm", version, about = "DDO-RM vs DPO on a synthetic preference world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized property suite against its oracles.
    Verify {
        /// Deliberately break a component (negative control).
        #[arg(long, value_name = "FAULT")]
        inject_fault: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Train and evaluate both methods for every configured seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Repeat `run` over a grid of one reward-model or step-size setting.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// noise_std, scale, bias, distortion or eta.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Draw the figures for a finished run directory.
    Plot {
        #[arg(long)]
        run: PathBuf,
    },
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Verify { inject_fault, seed } => {
            let fault = inject_fault.as_deref().map(parse_fault).transpose()?;
            let options = VerifyOptions { seed, fault };
            run_verify(&options, &mut std::io::stdout().lock())?;
        }
        Command::Run { config, out, parallel } => {
            let experiment = ExperimentConfig::load(&config)?;
            let out = experiment.resolve_output(out.as_deref())?;
            let artifact = run_experiment(&experiment, &out, parallel)
                .with_context(|| format!("run into {}", out.display()))?;
            print!("{}", ddorm_cli::run::summary_csv(&artifact.runs, &artifact.means));
            println!("artifacts written to {}", out.display());
        }
        Command::Sweep { config, axis, grid, out, parallel } => {
            let experiment = ExperimentConfig::load(&config)?;
            let out = experiment.resolve_output(out.as_deref())?;
            let axis: SweepAxis = axis.parse()?;
            let grid = parse_grid(&grid)?;
            let points = run_sweep(&experiment, axis, &grid, &out, parallel)
                .with_context(|| format!("sweep into {}", out.display()))?;
            for method in ["ddorm", "dpo"] {
                println!("{}", describe_trend(&points, method));
            }
            println!("sweep table written to {}", out.join("sweep.csv").display());
        }
        Command::Plot { run } => {
            for path in plot::plot_run(&run)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
