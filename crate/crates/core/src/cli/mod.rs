//! Command-line front end. Every subcommand reads and writes files only, so
//! runs can be replayed and compared byte for byte.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;

pub use commands::{ModelBundle, SCORES_HEADER};

#[derive(Debug, Parser)]
#[command(name = "trustscore", version, about = "Trust scores for classifier predictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a trust model on labeled training data.
    Fit(FitArgs),
    /// Train a built-in classifier and write its predictions for a test set.
    Predict(PredictArgs),
    /// Score test predictions with a fitted trust model.
    Score(ScoreArgs),
    /// Turn score files into precision curves.
    Eval(EvalArgs),
    /// Choose alpha by stratified cross-validation.
    CvAlpha(CvArgs),
    /// Run a level-set or Bayes-agreement experiment on synthetic data.
    SynthValidate(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Filtering {
    None,
    Density,
    Disagreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Softmax,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Convergence,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// Standard 2D Gaussian.
    Gaussian,
    /// Uniform annulus with radii 1 and 2.
    Annulus,
    /// Unit circle in R^D plus uniform box noise.
    Circle,
    /// N(0, 1) and N(--separation, 1) in one dimension, equal priors.
    GaussianPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HypothesisArg {
    Constant,
    Bayes,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Column holding class labels.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Scale features to zero mean and unit variance before anything else.
    #[arg(long)]
    pub standardize: bool,
    /// Project onto this many principal components.
    #[arg(long)]
    pub pca_dims: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifierArgs {
    #[arg(long, value_enum, default_value_t = ClassifierKind::Softmax)]
    pub classifier: ClassifierKind,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Neighbors voting in the k-NN classifier.
    #[arg(long, default_value_t = 10)]
    pub knn_k: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 0.0625)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Filtering::Density)]
    pub filtering: Filtering,
    /// Minimum fraction of neighbors that must share a point's label.
    #[arg(long, default_value_t = crate::trust::DEFAULT_DISAGREEMENT_THRESHOLD)]
    pub disagreement_threshold: f64,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// CSV with columns `predicted` and `confidence`, one row per test row.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores file; repeat for a multi-run aggregate.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Labeled test CSV; give one, or one per scores file.
    #[arg(long, required = true)]
    pub test: Vec<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated alphas; defaults to 0 and 2^-1 .. 2^-10.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Experiment::Convergence)]
    pub experiment: Experiment,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    /// JSON synthetic spec; overrides --family.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Fixed k; defaults to round(sqrt(n)) for convergence and 10 for bayes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Use k = round(n^exponent) in convergence runs.
    #[arg(long, conflicts_with = "k")]
    pub k_exponent: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "500,2000,8000")]
    pub n_grid: Vec<usize>,
    /// Training size for bayes runs.
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = HypothesisArg::Constant)]
    pub hypothesis: HypothesisArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Machine-readable error body written to standard error.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut body = json!({ "error": err.kind(), "message": err.to_string() });
    if let Error::MissingFile { path } | Error::Io { path, .. } = err {
        body["path"] = json!(path.display().to_string());
    }
    body
}

/// Parses `args`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 when a computation fails, 2 on bad input.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Score(a) => commands::score(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::CvAlpha(a) => commands::cv_alpha(&a),
        Command::SynthValidate(a) => commands::synth_validate(&a),
    };
    match result {
        Ok(summary) => {
            if let Some(s) = summary {
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "{s}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            if e.is_computation_failure() {
                1
            } else {
                2
            }
        }
    }
}
