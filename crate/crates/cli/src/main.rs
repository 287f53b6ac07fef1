//! `revmatch`: generate corpora, predict suitabilities, match papers to
//! reviewers and run the evaluation experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use revmatch::evaluator::Method;
use revmatch::{PenaltyShape, TransformSpec};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "revmatch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Write a synthetic corpus with its ground truth.
    Gen(GenArgs),
    /// Predict missing scores with one method and solve the assignment.
    Match(MatchArgs),
    /// Run an elicitation curve or a lambda sweep.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Score an existing assignment against observed and true scores.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum ExperimentCommand {
    /// Match quality and RMSE as the per-reviewer training budget grows.
    Curve(CurveArgs),
    /// Balance objective at each lambda on one predicted matrix.
    Lambda(LambdaArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    reviewers: usize,
    #[arg(long)]
    papers: usize,
    #[arg(long, default_value_t = 10)]
    topics: usize,
    /// Observed scores revealed per reviewer.
    #[arg(long, default_value_t = 40)]
    obs: usize,
    #[arg(long, default_value_t = 1)]
    coi_per_reviewer: usize,
    #[arg(long, default_value_t = revmatch::Vocabulary::DEFAULT_SIZE)]
    vocab_size: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Where the corpus files live. Individual paths override `--data`.
#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// Directory holding scores.csv, papers.jsonl, reviewers.jsonl and
    /// optionally coi.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    papers: Option<PathBuf>,
    #[arg(long)]
    reviewers: Option<PathBuf>,
    #[arg(long)]
    coi: Option<PathBuf>,
    #[arg(long, default_value_t = revmatch::Vocabulary::DEFAULT_SIZE)]
    vocab_size: usize,
}

#[derive(Debug, Args, Serialize)]
struct MatcherArgs {
    #[arg(long, default_value_t = 1)]
    r_target: usize,
    #[arg(long, default_value_t = 20)]
    pmin: usize,
    #[arg(long, default_value_t = 30)]
    pmax: usize,
    /// Score assumed for cells that are neither observed nor predicted.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value = "abs")]
    penalty: PenaltyShape,
}

#[derive(Debug, Args, Serialize)]
struct PredictorArgs {
    /// Sigmoid steepness for lr-tfm and the transformed objective.
    #[arg(long, default_value_t = TransformSpec::DEFAULT_BETA)]
    beta: f64,
    /// Dirichlet smoothing strength of the language model.
    #[arg(long, default_value_t = revmatch::lm::DEFAULT_MU)]
    mu: f64,
    /// Ridge strength of the regression.
    #[arg(long, default_value_t = revmatch::lr::DEFAULT_REGULARIZATION)]
    ridge: f64,
    /// Latent dimension of the factorization.
    #[arg(long, default_value_t = 10)]
    rank: usize,
    #[arg(long, default_value_t = 330)]
    samples: usize,
    #[arg(long, default_value_t = 30)]
    burnin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TransformArg {
    Identity,
    Sigmoid,
}

#[derive(Debug, Args, Serialize)]
struct MatchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    #[arg(long, value_enum, default_value = "identity")]
    transform: TransformArg,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    predictors: PredictorArgs,
    /// Required by the randomized methods (bpmf, bpmf-map).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ground-truth scores for the histograms; defaults to truth.csv in
    /// `--data` when present.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: String,
    /// Comma-separated training budgets per reviewer, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    splits: usize,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    predictors: PredictorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct LambdaArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated lambdas, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, default_value = "lr")]
    method: Method,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    predictors: PredictorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `paper_id,reviewer_id` CSV as written by `match`.
    #[arg(long)]
    assignment: PathBuf,
    /// Ground-truth scores; defaults to truth.csv in `--data` when present.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[arg(long, default_value_t = TransformSpec::DEFAULT_BETA)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
