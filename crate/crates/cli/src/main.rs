//! `genfield`: scriptable reports over generative fields, style-space masks,
//! control-signal sparsity, the style regularizer and the editing losses.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 check failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::Format;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_220_117;

#[derive(Parser, Debug)]
#[command(
    name = "genfield",
    version,
    about = "Generative-field and style-space analysis reports"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct ArchSource {
    /// Built-in architecture, e.g. `stylegan2-256`.
    #[arg(long)]
    pub preset: Option<String>,

    /// Architecture description file (TOML).
    #[arg(long)]
    pub arch: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generative field of every layer.
    Fields {
        #[command(flatten)]
        source: ArchSource,
    },

    /// Compare analytic fields against simulated impulse footprints.
    Verify {
        #[command(flatten)]
        source: ArchSource,

        /// Upsampling semantics: `zero-insert` or `nearest`.
        #[arg(long, default_value = "zero-insert-transposed")]
        semantics: String,

        /// Side of the simulated base map. Defaults to a size that keeps the
        /// whole field of every layer inside the output.
        #[arg(long)]
        sim_base: Option<u32>,

        /// Only report layers `FIRST..LAST` (ids, inclusive).
        #[arg(long, value_name = "FIRST..LAST")]
        layers: Option<String>,

        /// Simulate 1D or 2D maps.
        #[arg(long, value_enum, default_value_t = DimsArg::OneD)]
        dims: DimsArg,

        /// Also run the numeric executor and require agreement.
        #[arg(long)]
        numeric: bool,
    },

    /// Control-unit mask over the style space.
    Plan {
        #[command(flatten)]
        source: ArchSource,

        #[command(flatten)]
        selection: PlanSelection,
    },

    /// Sparsity histogram and top-k reuse of control signals.
    Analyze {
        /// CSV with one control signal per row.
        deltas: PathBuf,

        #[arg(long, default_value_t = genfield::sparsity::DEFAULT_TOP_K)]
        top_k: usize,

        #[arg(long, default_value_t = genfield::sparsity::DEFAULT_BINS)]
        bins: usize,

        /// Write the test-by-dimension membership matrix here.
        #[arg(long)]
        membership: Option<PathBuf>,
    },

    /// Per-channel mean and deviation of sampled style vectors.
    Stats {
        /// CSV with one style vector per row.
        styles: PathBuf,

        #[arg(long, default_value_t = genfield::regularizer::DEFAULT_EPSILON_FLOOR)]
        epsilon: f64,
    },

    /// Style log-likelihood of samples under saved channel statistics.
    Loglik {
        /// File written by `stats`.
        #[arg(long)]
        stats: PathBuf,

        /// CSV with one style vector per row.
        samples: PathBuf,

        /// Report the gradient of every sample.
        #[arg(long)]
        grad: bool,

        /// Compare the gradient against central differences.
        #[arg(long)]
        fd_check: bool,

        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,

        /// Regularizer weight; with `--base-loss` also reports the
        /// regularized objective.
        #[arg(long, requires = "base_loss")]
        weight: Option<f64>,

        #[arg(long, requires = "weight")]
        base_loss: Option<f64>,

        #[arg(long, default_value_t = genfield::regularizer::DEFAULT_EPSILON_FLOOR)]
        epsilon: f64,
    },

    /// Editing loss components and their weighted total.
    Losses(LossArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = true)]
pub struct PlanSelection {
    /// Named control-unit configuration 1..5.
    #[arg(long, conflicts_with_all = ["min_gf", "max_gf", "layers"])]
    pub config: Option<usize>,

    #[arg(long, requires = "max_gf", conflicts_with = "layers")]
    pub min_gf: Option<u64>,

    #[arg(long, requires = "min_gf", conflicts_with = "layers")]
    pub max_gf: Option<u64>,

    /// Layer range `FIRST..LAST` (ids, inclusive).
    #[arg(long, value_name = "FIRST..LAST")]
    pub layers: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct LossArgs {
    #[arg(long)]
    pub id_embedding: Option<PathBuf>,
    #[arg(long)]
    pub out_embedding: Option<PathBuf>,
    #[arg(long)]
    pub attr_landmarks: Option<PathBuf>,
    #[arg(long)]
    pub out_landmarks: Option<PathBuf>,
    #[arg(long)]
    pub attr_pose: Option<PathBuf>,
    #[arg(long)]
    pub out_pose: Option<PathBuf>,
    #[arg(long)]
    pub attr_image: Option<PathBuf>,
    #[arg(long)]
    pub out_image: Option<PathBuf>,

    /// The identity and attribute inputs are the same image, which enables
    /// the reconstruction term.
    #[arg(long)]
    pub same_inputs: bool,

    /// Use all 68 landmarks instead of the inner 51.
    #[arg(long)]
    pub all_landmarks: bool,

    /// Precomputed `identity,attribute,reconstruction` values; skips inputs.
    #[arg(long, value_delimiter = ',', conflicts_with_all = [
        "id_embedding", "out_embedding", "attr_landmarks", "out_landmarks",
        "attr_pose", "out_pose", "attr_image", "out_image",
    ])]
    pub components: Option<Vec<f64>>,

    #[arg(long, default_value_t = genfield::losses::DEFAULT_ALPHA)]
    pub alpha: f64,

    #[arg(long, value_delimiter = ',', default_values_t = genfield::losses::DEFAULT_LAMBDAS)]
    pub lambdas: Vec<f64>,

    /// Also report evaluation metrics at this image resolution (needs every
    /// embedding, landmark and pose input).
    #[arg(long)]
    pub resolution: Option<u32>,

    /// Show pose quantities in degrees.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimsArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

/// Result of a subcommand that ran to completion.
pub enum Outcome {
    Pass,
    CheckFailed(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
