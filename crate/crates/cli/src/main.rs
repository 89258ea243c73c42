use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use mvi_core::pipeline::{parse_stages, preset, RunConfig, Runner, Stage, PRESET_NAMES};
use mvi_core::Error;

/// Covariance-based multi-view imaging of extended targets.
#[derive(Debug, Parser)]
#[command(name = "mvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the scene and write per-receiver sample covariances.
    Simulate(RunArgs),
    /// Single-view imaging at every receiver.
    Image(RunArgs),
    /// Resample single-view images onto the common raster.
    Interp(RunArgs),
    /// Fuse the per-receiver rasters.
    Fuse(RunArgs),
    /// Score the images and write metrics.json.
    Score(RunArgs),
    /// Matched-filter reference images.
    Baseline(RunArgs),
    /// Run the configured stages (all default stages unless --stages is given).
    RunAll(RunArgs),
    /// Print a built-in preset as a config file.
    Preset {
        /// One of fig2, fig4, fig5, table1_col2.
        name: String,
        /// Write the config here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Start from a named preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated stages, e.g. `simulate,phase1`.
    #[arg(long)]
    stages: Option<String>,
    /// Threads for the per-receiver stages.
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn resolve(&self, only: Option<Stage>) -> Result<RunConfig, Error> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(Error::Config("pass --config FILE or --preset NAME".into()))
            }
        };
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(out) = &self.out {
            c.out = out.clone();
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        match (only, &self.stages) {
            (Some(stage), _) => c.stages = vec![stage],
            (None, Some(list)) => c.stages = parse_stages(list)?,
            (None, None) => {}
        }
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn execute(args: &RunArgs, only: Option<Stage>) -> Result<(), Error> {
    let config = args.resolve(only)?;
    let manifest = Runner::new(config)?.run()?;
    for path in manifest.artifacts() {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => execute(a, Some(Stage::Simulate)),
        Command::Image(a) => execute(a, Some(Stage::Phase1)),
        Command::Interp(a) => execute(a, Some(Stage::Interp)),
        Command::Fuse(a) => execute(a, Some(Stage::Fuse)),
        Command::Score(a) => execute(a, Some(Stage::Score)),
        Command::Baseline(a) => execute(a, Some(Stage::Baseline)),
        Command::RunAll(a) => execute(a, None),
        Command::Preset { name, out } => preset(name).and_then(|c| {
            let text = c.to_toml_string()?;
            match out {
                Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                }),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            if matches!(e, Error::Config(_)) && matches!(cli.command, Command::Preset { .. }) {
                eprintln!("available presets: {}", PRESET_NAMES.join(", "));
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
