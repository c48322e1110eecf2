//! `evident-motion`: moving object detection over lidar scan sequences.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::Tunables;

#[derive(Parser, Debug)]
#[command(
    name = "evident-motion",
    version,
    about = "Moving object detection in lidar scan sequences"
)]
struct Cli {
    /// TOML file of tunables keyed like the long flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label every point of a sequence as static, moving, ground or dropped.
    Detect {
        /// Sequence directory: velodyne/, poses.txt, calib.txt, image/.
        #[arg(long)]
        input: PathBuf,
        /// Receives labels/NNNNNN.bin and timing.csv.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        tunables: Tunables,
    },
    /// Per-frame precision and recall of a label directory.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Directory of NNNNNN.bin label files.
        #[arg(long)]
        labels: PathBuf,
        /// Receives metrics.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Truth::Auto)]
        truth: Truth,
    },
    /// Detection precision and recall over a grid of noise parameters.
    Roc {
        #[arg(long)]
        input: PathBuf,
        /// Receives roc.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Truth::Auto)]
        truth: Truth,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.1, 0.45])]
        sigma_r_range: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0035, 0.0088])]
        theta_range: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        sigma_r_steps: usize,
        #[arg(long, default_value_t = 3)]
        theta_steps: usize,
        #[command(flatten)]
        tunables: Tunables,
    },
    /// Write a ray-cast synthetic sequence with ground truth.
    Synth {
        #[arg(long, value_enum, default_value_t = Scene::Street)]
        scene: Scene,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render the dilated, normalized depth map of one frame as PGM.
    Depthmap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        frame: usize,
        /// Receives depth_NNNNNN.pgm.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        tunables: Tunables,
    },
}

/// Which ground truth `eval` and `roc` score against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Truth {
    /// Per-point labels when present, image masks otherwise.
    Auto,
    /// gt_labels/NNNNNN.bin
    Points,
    /// gt_mask/NNNNNN.pgm projected through calib.txt and poses.txt
    Mask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scene {
    /// Street with parked boxes and one moving box.
    Street,
    /// The street without the moving box.
    StreetStatic,
    /// Flat-colored static box and mover for image validation.
    Validation,
    /// The validation scene with checkered textures.
    ValidationChecker,
    /// Densely sampled room with a mover.
    DenseRoom,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("EVIDENT_MOTION_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("EVIDENT_MOTION_THREADS={raw:?} is not a count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
        log::debug!("worker threads capped at {n}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let file = cli.config.as_deref();
    match cli.command {
        Command::Detect {
            input,
            output,
            tunables,
        } => {
            let config = config::resolve(&tunables, file)?;
            commands::detect(&input, &output, &config)
        }
        Command::Eval {
            input,
            labels,
            output,
            truth,
        } => commands::eval(&input, &labels, &output, truth),
        Command::Roc {
            input,
            output,
            truth,
            sigma_r_range,
            theta_range,
            sigma_r_steps,
            theta_steps,
            tunables,
        } => {
            let config = config::resolve(&tunables, file)?;
            let spec = evident_motion::evaluation::SweepSpec {
                sigma_r_range: (sigma_r_range[0], sigma_r_range[1]),
                theta_range: (theta_range[0], theta_range[1]),
                sigma_r_steps,
                theta_steps,
            };
            commands::roc(&input, &output, &config, &spec, truth)
        }
        Command::Synth {
            scene,
            frames,
            seed,
            output,
        } => {
            if frames == 0 {
                bail!("--frames must be at least 1");
            }
            commands::synth(scene, frames, seed, &output)
        }
        Command::Depthmap {
            input,
            frame,
            output,
            tunables,
        } => {
            let config = config::resolve(&tunables, file)?;
            let params = config::validation_params(&tunables, file)?;
            commands::depthmap(&input, frame, &output, &config, &params)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
