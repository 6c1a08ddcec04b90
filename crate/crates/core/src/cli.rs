//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::encoders::EncoderParams;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Ablation};
use crate::io::{self, RunConfig};
use crate::metrics::Report;
use crate::reasoner::reason_scene;
use crate::scenegen::{gen_dataset, training_batches, GenConfig};
use crate::training::{mean_loss, train_toy, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "vlscene", version, about = "Zero-shot vision-language scene reasoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblateArg {
    Context,
    Alpha,
    Beta,
    None,
}

impl From<AblateArg> for Ablation {
    fn from(a: AblateArg) -> Self {
        match a {
            AblateArg::Context => Ablation::Context,
            AblateArg::Alpha => Ablation::Alpha,
            AblateArg::Beta => Ablation::Beta,
            AblateArg::None => Ablation::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Md,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenScenes {
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        scenes: usize,
        #[arg(long, default_value_t = 6)]
        objects: usize,
        #[arg(long, default_value_t = 0.3)]
        clutter: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.25)]
        novel_fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reason over one scene bundle against a prompt bundle.
    Reason {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every scene of a dataset and write a report.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "none")]
        ablate: AblateArg,
        /// Reason over scenes one at a time instead of in parallel.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the toy encoders on a dataset's non-novel scenes.
    TrainToy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0.07)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        vocab: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print a report as a parameter/value table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: TableFormat,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("usage error");
            eprintln!("{line}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::json("output", e))?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenScenes {
            classes,
            dim,
            scenes,
            objects,
            clutter,
            noise,
            novel_fraction,
            seed,
            out,
        } => {
            let cfg = GenConfig {
                classes,
                dim,
                scenes,
                objects_per_scene: objects,
                clutter,
                noise,
                novel_fraction,
                seed,
            };
            let ds = gen_dataset(&cfg)?;
            io::write_dataset(&out, &ds)?;
            println!("wrote {} scenes to {}", ds.scenes.len(), out.display());
            Ok(())
        }
        Command::Reason {
            scene,
            prompts,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?.reason_config()?;
            let scene = io::read_scene(&scene)?;
            let prompts = io::read_prompts(&prompts)?;
            let result = reason_scene(&scene, &prompts, &cfg)?;
            emit(out.as_deref(), &to_json(&result)?)
        }
        Command::Evaluate {
            dataset,
            config,
            ablate,
            sequential,
            out,
        } => {
            let cfg = load_config(config.as_deref())?.reason_config()?;
            let ds = io::read_dataset(&dataset)?;
            let report = evaluate(&ds.scenes, &ds.prompts, &cfg, ablate.into(), !sequential)?;
            emit(out.as_deref(), &to_json(&report)?)
        }
        Command::TrainToy {
            dataset,
            steps,
            lr,
            tau,
            seed,
            vocab,
            out,
            trace,
        } => {
            let ds = io::read_dataset(&dataset)?;
            let dim = ds.config.dim;
            let params = EncoderParams::init(dim, dim, vocab, seed)?;
            let batches = training_batches(&ds, vocab)?;
            let cfg = TrainConfig { steps, lr, tau, seed };
            let before = mean_loss(&params, &batches, tau)?;
            let (trained, losses) = train_toy(&params, &batches, &cfg)?;
            let after = mean_loss(&trained, &batches, tau)?;
            io::write_params(&out, &trained)?;
            if let Some(path) = trace {
                io::write_atomic(&path, losses.to_csv().as_bytes())?;
            }
            println!("initial_loss={before:.6} final_loss={after:.6} steps={steps}");
            Ok(())
        }
        Command::Report { input, format } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let report: Report =
                serde_json::from_str(&text).map_err(|e| Error::json(input.display().to_string(), e))?;
            let table = match format {
                TableFormat::Md => report.to_markdown(),
                TableFormat::Csv => report.to_csv(),
            };
            print!("{table}");
            Ok(())
        }
    }
}
