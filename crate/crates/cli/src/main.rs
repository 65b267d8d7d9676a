use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use subradiance_cli::{run_experiment, CliError, Experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "subradiance", version, about = "Collective-emission experiments")]
struct Args {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write PSF profiles, image fields and atom dumps.
    #[arg(long)]
    emit_plots_data: bool,
}

fn run(args: &Args) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let run = run_experiment(args.experiment, &config, workers, args.emit_plots_data)?;
    run.write(&args.out)?;
    log::info!(
        "{} finished in {:.2} s, outputs digest {}",
        args.experiment.name(),
        run.manifest.total_seconds,
        run.manifest.outputs_digest
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
