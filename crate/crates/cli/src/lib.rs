//! Experiment commands for interaction descriptor spaces.

pub mod commands;
pub mod config;
pub mod eval;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, Profile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "idspace", version, about = "Interaction descriptor space experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render training, test and negative datasets.
    Generate(Common),
    /// Train the sparse autoencoder at the configured lambda.
    TrainCae(Common),
    /// Train the inference model on the trained encoder's descriptors.
    TrainInference(Common),
    /// Evaluate trained models: purity, PSNR, likelihood and cluster maps.
    Eval(Common),
    /// Train one autoencoder per lambda and tabulate the descriptor spaces.
    SweepLambda(Common),
    /// Infer a descriptor, decoded interaction image and likelihood for one
    /// object image.
    Infer(InferArgs),
}

/// Options shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// Output directory; later commands read earlier outputs from here.
    #[arg(long)]
    pub out: PathBuf,
    /// Flat TOML config file. Defaults to `<out>/config.toml` when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in profile used when no config file is found.
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub cae_epochs: Option<usize>,
    #[arg(long)]
    pub inference_epochs: Option<usize>,
    #[arg(long)]
    pub descriptor_dim: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    /// 32x32 binary PGM holding the masked object appearance.
    #[arg(long, conflicts_with = "dataset")]
    pub image: Option<PathBuf>,
    /// Dataset file to take an object image from.
    #[arg(long, requires = "index")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<usize>,
    /// Search over rotations of the input and keep the most likely one.
    #[arg(long)]
    pub rotate: bool,
}

/// Maps an error chain onto the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<idspace::Error>() {
            return match e {
                idspace::Error::NumericalAbort { .. } => EXIT_NUMERICAL,
                idspace::Error::Io(_) | idspace::Error::Format(_) | idspace::Error::UnsupportedVersion { .. } => {
                    EXIT_IO
                }
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(c) => commands::generate(&c),
        Command::TrainCae(c) => commands::train_cae(&c),
        Command::TrainInference(c) => commands::train_inference(&c),
        Command::Eval(c) => commands::eval(&c),
        Command::SweepLambda(c) => commands::sweep_lambda(&c),
        Command::Infer(a) => commands::infer(&a),
    }
}
