//! `imager` — active-array imaging from intensity-only measurements.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use imager_cli::config::{load_config, validate, Overrides};
use imager_cli::{commands, experiment, CliError};

#[derive(Parser)]
#[command(
    name = "imager",
    about = "Synthesizes phaseless array data, recovers phase information \
             through controlled illuminations, and localizes scatterers with \
             MUSIC",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output directory (overrides the config's output.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<String>,

    /// Master noise seed (overrides noise.seed).
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Single noise strength in [0, 1) (overrides noise.epsilons).
    #[arg(long, value_name = "FLOAT")]
    epsilon: Option<f64>,

    /// Recovery protocol name (overrides protocol.name).
    #[arg(long, value_name = "NAME")]
    protocol: Option<String>,

    /// Output formats, comma separated: csv, pgm.
    #[arg(long, value_name = "FMT", value_delimiter = ',')]
    format: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the response matrix and an intensity dataset with its plan.
    Simulate(CommonArgs),

    /// Run a recovery protocol on live or imported data.
    Recover {
        #[command(flatten)]
        common: CommonArgs,

        /// Recorded intensity dataset to replay (needs --plan).
        #[arg(long, value_name = "PATH", requires = "plan")]
        data: Option<PathBuf>,

        /// Illumination plan file accompanying --data.
        #[arg(long, value_name = "PATH", requires = "data")]
        plan: Option<PathBuf>,
    },

    /// MUSIC imaging of a provided operator matrix.
    Image {
        #[command(flatten)]
        common: CommonArgs,

        /// Matrix file (row,col,re,im) to image from.
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
    },

    /// Run the full (L, epsilon, trial) sweep from the configuration.
    Experiment(CommonArgs),
}

fn main() -> ExitCode {
    configure_threads();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// `IMAGER_THREADS` caps the rayon pool used for pseudo-spectrum evaluation
/// and sweep cells.
fn configure_threads() {
    if let Ok(value) = std::env::var("IMAGER_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring unparsable IMAGER_THREADS={value}");
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(common) => {
            let plan = plan_from(&common)?;
            let files = commands::simulate(&plan)?;
            println!(
                "simulate: wrote {} file(s) under {}",
                files.len(),
                plan.out_dir
            );
            for f in files {
                println!("  {f}");
            }
            Ok(())
        }
        Command::Recover { common, data, plan } => {
            let run_plan = plan_from(&common)?;
            let imported = match (&data, &plan) {
                (Some(d), Some(p)) => Some((d.as_path(), p.as_path())),
                _ => None,
            };
            let files = commands::recover(&run_plan, imported)?;
            println!(
                "recover: wrote {} file(s) under {}",
                files.len(),
                run_plan.out_dir
            );
            for f in files {
                println!("  {f}");
            }
            Ok(())
        }
        Command::Image { common, matrix } => {
            let plan = plan_from(&common)?;
            let files = commands::image(&plan, &matrix)?;
            println!(
                "image: wrote {} file(s) under {}",
                files.len(),
                plan.out_dir
            );
            for f in files {
                println!("  {f}");
            }
            Ok(())
        }
        Command::Experiment(common) => {
            let plan = plan_from(&common)?;
            let manifest = experiment::run_experiment(&plan)?;
            println!(
                "experiment: {} cell(s), protocol {}, {:.1?} wall time",
                manifest.cells.len(),
                manifest.protocol,
                manifest.wall
            );
            for cell in &manifest.cells {
                println!(
                    "  {}: {}/{} illuminations, matched {} missed {} ghosts {}{}",
                    cell.name,
                    cell.illuminations,
                    cell.budget,
                    cell.matched,
                    cell.misses,
                    cell.ghosts,
                    if cell.exact { ", exact" } else { "" }
                );
            }
            println!("  manifest: {}/manifest.txt", plan.out_dir);
            Ok(())
        }
    }
}

fn plan_from(common: &CommonArgs) -> Result<imager_cli::config::RunPlan, CliError> {
    let (config, hash) = load_config(&common.config)?;
    let overrides = Overrides {
        seed: common.seed,
        epsilon: common.epsilon,
        protocol: common.protocol.clone(),
        out: common.out.clone(),
        formats: common.format.clone(),
    };
    validate(&config, hash, &overrides)
}
