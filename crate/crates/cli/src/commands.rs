use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::CommandFactory;
use revmatch::corpus::{
    generate_synthetic, load_corpus, load_scores_indexed, write_coi, write_documents, write_scores,
    CorpusFiles, SyntheticConfig,
};
use revmatch::evaluator::{
    assemble_for_matching, evaluate_match, evaluate_match_tfm, load_variance, matching_matrix,
    run_elicitation_curve, run_lambda_sweep, score_histogram, CurveConfig, Estimates,
    ImputationPolicy, MatcherConfig, Method, PredictorConfig,
};
use revmatch::io::write_atomic;
use revmatch::matcher::{self, verify, write_assignment_csv, MatchSummary};
use revmatch::seed::SeedStream;
use revmatch::{
    Assignment, Corpus, Key, ScoreMatrix, ScoreRange, TransformSpec,
};
use serde::{Deserialize, Serialize};

use crate::{
    Cli, Command, CurveArgs, DataArgs, EvalArgs, ExperimentCommand, GenArgs, LambdaArgs,
    MatchArgs, MatcherArgs, PredictorArgs, TransformArg,
};

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Gen(args) => gen(args, command),
        Command::Match(args) => run_match(args, command),
        Command::Experiment(ExperimentCommand::Curve(args)) => curve(args, command),
        Command::Experiment(ExperimentCommand::Lambda(args)) => lambda(args, command),
        Command::Eval(args) => eval(args, command),
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    version: &'static str,
    command: &'a Command,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

fn prepare_out(out: &Path, command: &Command) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let snapshot = Snapshot {
        version: env!("CARGO_PKG_VERSION"),
        command,
    };
    write_json(&out.join("config.json"), &snapshot)
}

fn gen(args: &GenArgs, command: &Command) -> Result<()> {
    let mut cfg = SyntheticConfig::new(args.reviewers, args.papers, args.topics, args.obs, args.seed);
    cfg.coi_per_reviewer = args.coi_per_reviewer;
    cfg.vocab_size = args.vocab_size;
    let syn = generate_synthetic(&cfg)?;
    prepare_out(&args.out, command)?;
    let c = &syn.corpus;
    let dir = &args.out;
    write_scores(&dir.join(CorpusFiles::SCORES), &c.scores, &c.reviewer_ids, &c.paper_ids)?;
    write_scores(&dir.join(CorpusFiles::TRUTH), &syn.truth, &c.reviewer_ids, &c.paper_ids)?;
    write_documents(&dir.join(CorpusFiles::PAPERS), &syn.raw_papers)?;
    write_documents(&dir.join(CorpusFiles::REVIEWERS), &syn.raw_archives)?;
    write_coi(&dir.join(CorpusFiles::COI), &c.coi, &c.reviewer_ids, &c.paper_ids)?;
    Ok(())
}

impl DataArgs {
    fn files(&self) -> Result<CorpusFiles> {
        let pick = |explicit: &Option<PathBuf>, name: &str, flag: &str| -> Result<PathBuf> {
            match (explicit, &self.data) {
                (Some(p), _) => Ok(p.clone()),
                (None, Some(dir)) => Ok(dir.join(name)),
                (None, None) => Err(anyhow!("either --data or --{flag} is required")),
            }
        };
        let coi = match (&self.coi, &self.data) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join(CorpusFiles::COI)).filter(|p| p.exists()),
            (None, None) => None,
        };
        Ok(CorpusFiles {
            scores: pick(&self.scores, CorpusFiles::SCORES, "scores")?,
            papers: pick(&self.papers, CorpusFiles::PAPERS, "papers")?,
            reviewers: pick(&self.reviewers, CorpusFiles::REVIEWERS, "reviewers")?,
            coi,
        })
    }

    fn load(&self) -> Result<Corpus> {
        Ok(load_corpus(&self.files()?, self.vocab_size, ScoreRange::default())?)
    }

    /// `explicit`, else truth.csv next to the corpus when it exists.
    fn truth_path(&self, explicit: &Option<PathBuf>) -> Option<PathBuf> {
        explicit.clone().or_else(|| {
            let p = self.data.as_ref()?.join(CorpusFiles::TRUTH);
            p.exists().then_some(p)
        })
    }
}

fn load_truth(path: &Path, corpus: &Corpus) -> Result<ScoreMatrix> {
    let mut reviewers = corpus.reviewer_ids.clone();
    let truth = load_scores_indexed(path, corpus.scores.range(), &mut reviewers, &corpus.paper_ids)?;
    if reviewers.len() != corpus.n_reviewers() {
        bail!(
            "{}: unknown reviewer id {:?}",
            path.display(),
            reviewers.name(corpus.n_reviewers())
        );
    }
    Ok(truth)
}

impl MatcherArgs {
    fn config(&self) -> MatcherConfig {
        MatcherConfig {
            r_target: self.r_target,
            p_min: self.pmin,
            p_max: self.pmax,
            tau: self.tau,
            lambda: self.lambda,
            penalty: self.penalty,
        }
    }

    fn policy(&self) -> Result<ImputationPolicy> {
        Ok(ImputationPolicy::new(self.tau, ScoreRange::default())?)
    }
}

impl PredictorArgs {
    fn config(&self) -> PredictorConfig {
        let mut c = PredictorConfig {
            lm_mu: self.mu,
            lr_regularization: self.ridge,
            beta: self.beta,
            ..PredictorConfig::default()
        };
        c.bpmf.rank = self.rank;
        c.bpmf.n_samples = self.samples;
        c.bpmf.n_burnin = self.burnin;
        c
    }
}

/// Every cell that is neither observed nor conflicted.
fn unobserved(corpus: &Corpus) -> BTreeSet<Key> {
    (0..corpus.n_reviewers())
        .flat_map(|r| (0..corpus.n_papers()).map(move |p| (r, p)))
        .filter(|&k| !corpus.scores.contains(k) && !corpus.coi.contains(&k))
        .collect()
}

fn is_randomized(method: Method) -> bool {
    matches!(method, Method::Bpmf | Method::BpmfMap)
}

#[derive(Serialize)]
struct MatchReport {
    method: Method,
    /// Scale of the matrix the matcher optimized.
    scale: &'static str,
    #[serde(flatten)]
    summary: MatchSummary,
}

fn run_match(args: &MatchArgs, command: &Command) -> Result<()> {
    let method = args.method;
    let sigmoid = args.transform == TransformArg::Sigmoid;
    if sigmoid && matches!(method, Method::LrTfm | Method::Lm) {
        bail!("--transform sigmoid cannot be combined with method {method}");
    }
    let seed = match (args.seed, is_randomized(method)) {
        (Some(s), _) => s,
        (None, false) => 0,
        (None, true) => bail!("--seed is required for method {method}"),
    };
    let corpus = args.data.load()?;
    let policy = args.matcher.policy()?;
    let predictors = args.predictors.config();
    let preds = matching_matrix(
        method,
        &corpus,
        &corpus.scores,
        &unobserved(&corpus),
        policy,
        &predictors,
        SeedStream::new(seed).derive("fit").value(),
    )?;

    let mut problem = args.matcher.config().problem(preds.matrix, &corpus.coi);
    if sigmoid {
        problem = problem.with_transform(predictors.sigmoid());
    }
    let assignment = matcher::solve(&problem).context("matching failed")?;
    let diagnostics = verify(&assignment, &problem);

    let mut summary = MatchSummary::new(&assignment, &problem);
    let scale = if method == Method::Lm {
        "log-likelihood"
    } else if preds.transform.is_some() || sigmoid {
        summary.transform = summary.transform.or(preds.transform);
        "transformed"
    } else {
        "score"
    };

    prepare_out(&args.out, command)?;
    write_assignment_csv(
        &args.out.join("assignment.csv"),
        &assignment,
        &corpus.reviewer_ids,
        &corpus.paper_ids,
    )?;
    write_json(
        &args.out.join("summary.json"),
        &MatchReport {
            method,
            scale,
            summary,
        },
    )?;
    write_json(&args.out.join("diagnostics.json"), &diagnostics)?;
    if !diagnostics.passed {
        bail!(
            "verifier found {} violation(s); see {}",
            diagnostics.violations.len(),
            args.out.join("diagnostics.json").display()
        );
    }
    Ok(())
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        Cli::command()
            .error(ErrorKind::InvalidValue, "--methods needs at least one method")
            .exit();
    }
    names
        .into_iter()
        .map(|n| n.parse::<Method>().map_err(|e| anyhow!(e)))
        .collect()
}

fn curve(args: &CurveArgs, command: &Command) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    let corpus = args.data.load()?;
    let truth = match args.data.truth_path(&args.truth) {
        Some(p) => Some(load_truth(&p, &corpus)?),
        None => None,
    };
    let config = CurveConfig {
        methods,
        budgets: args.budgets.clone(),
        n_splits: args.splits,
        seed: args.seed,
        matcher: args.matcher.config(),
        predictors: args.predictors.config(),
    };
    let report = run_elicitation_curve(&corpus, truth.as_ref(), &config)?;
    prepare_out(&args.out, command)?;
    report.write_json(&args.out.join("report.json"))?;
    report.write_csv(&args.out.join("report.csv"))?;
    Ok(())
}

fn lambda(args: &LambdaArgs, command: &Command) -> Result<()> {
    let corpus = args.data.load()?;
    let preds = matching_matrix(
        args.method,
        &corpus,
        &corpus.scores,
        &unobserved(&corpus),
        args.matcher.policy()?,
        &args.predictors.config(),
        SeedStream::new(args.seed).derive("fit").value(),
    )?;
    let report = run_lambda_sweep(&preds.matrix, &corpus.coi, &args.grid, &args.matcher.config())?;
    prepare_out(&args.out, command)?;
    report.write_json(&args.out.join("report.json"))?;
    report.write_csv(&args.out.join("report.csv"))?;
    Ok(())
}

#[derive(Deserialize)]
struct AssignmentRow {
    paper_id: String,
    reviewer_id: String,
}

fn read_assignment(path: &Path, corpus: &Corpus) -> Result<BTreeSet<Key>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut pairs = BTreeSet::new();
    for (i, row) in reader.deserialize::<AssignmentRow>().enumerate() {
        let line = i + 2;
        let row = row.with_context(|| format!("{}:{line}", path.display()))?;
        let r = corpus.reviewer_ids.get(&row.reviewer_id).ok_or_else(|| {
            anyhow!("{}:{line}: unknown reviewer id {:?}", path.display(), row.reviewer_id)
        })?;
        let p = corpus.paper_ids.get(&row.paper_id).ok_or_else(|| {
            anyhow!("{}:{line}: unknown paper id {:?}", path.display(), row.paper_id)
        })?;
        if !pairs.insert((r, p)) {
            bail!("{}:{line}: duplicate pair", path.display());
        }
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct Evaluation {
    match_quality: f64,
    match_quality_tfm: f64,
    transform: TransformSpec,
    load_variance: f64,
    loads: Vec<usize>,
    n_pairs: usize,
    /// Assigned pairs whose value came from the imputation constant.
    n_imputed: usize,
    histogram: revmatch::evaluator::Histogram,
    diagnostics: matcher::Diagnostics,
}

fn eval(args: &EvalArgs, command: &Command) -> Result<()> {
    let corpus = args.data.load()?;
    let pairs = read_assignment(&args.assignment, &corpus)?;
    let policy = args.matcher.policy()?;
    let train = &corpus.scores;
    let held_out = match args.data.truth_path(&args.truth) {
        Some(p) => {
            let truth = load_truth(&p, &corpus)?;
            let keys: Vec<Key> = truth.keys().filter(|&k| !train.contains(k)).collect();
            truth.restrict(&keys)
        }
        None => ScoreMatrix::new(corpus.n_reviewers(), corpus.n_papers(), train.range()),
    };
    let known: Estimates = held_out.observations().map(|o| (o.key(), o.score)).collect();
    let matrix = assemble_for_matching(train, &known, policy)?;
    let problem = args.matcher.config().problem(matrix, &corpus.coi);
    let assignment = Assignment::from_pairs(&problem, pairs);
    let diagnostics = verify(&assignment, &problem);

    let g = TransformSpec::sigmoid(args.beta);
    let mut truth_for_hist = train.clone();
    for o in held_out.observations() {
        truth_for_hist.insert(o.reviewer, o.paper, o.score)?;
    }
    let n_imputed = assignment
        .pairs
        .iter()
        .filter(|&&k| !truth_for_hist.contains(k))
        .count();
    let report = Evaluation {
        match_quality: evaluate_match(&assignment, train, &held_out, policy),
        match_quality_tfm: evaluate_match_tfm(&assignment, train, &held_out, policy, &g),
        transform: g,
        load_variance: load_variance(&assignment, args.matcher.r_target),
        loads: assignment.loads.clone(),
        n_pairs: assignment.pairs.len(),
        n_imputed,
        histogram: score_histogram(&assignment, &truth_for_hist, policy),
        diagnostics,
    };
    prepare_out(&args.out, command)?;
    write_json(&args.out.join("evaluation.json"), &report)?;
    if !report.diagnostics.passed {
        bail!(
            "assignment violates the constraints ({} violation(s)); see {}",
            report.diagnostics.violations.len(),
            args.out.join("evaluation.json").display()
        );
    }
    Ok(())
}
