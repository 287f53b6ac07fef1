//! Elicitation curves and the lambda sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate_match, evaluate_match_tfm, load_variance, matching_matrix, mean_and_se, rmse,
    rmse_with, score_histogram, EvalError, Histogram, ImputationPolicy, Method, PredictorConfig,
};
use crate::corpus::{make_splits, subsample_train, Corpus, Key, ScoreMatrix};
use crate::io::{write_atomic, WriteError};
use crate::matcher::{self, solve_balance, solve_basic, MatchProblem, PenaltyShape};
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub r_target: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub tau: f64,
    pub lambda: f64,
    pub penalty: PenaltyShape,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            r_target: 1,
            p_min: 20,
            p_max: 30,
            tau: 1.0,
            lambda: 0.0,
            penalty: PenaltyShape::Abs,
        }
    }
}

impl MatcherConfig {
    pub fn problem(&self, suitability: DMatrix<f64>, coi: &BTreeSet<Key>) -> MatchProblem {
        MatchProblem::new(suitability, self.r_target, self.p_min, self.p_max)
            .with_lambda(self.lambda, self.penalty)
            .with_coi(coi.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub methods: Vec<Method>,
    /// Training scores kept per reviewer, ascending.
    pub budgets: Vec<usize>,
    pub n_splits: usize,
    pub seed: u64,
    pub matcher: MatcherConfig,
    pub predictors: PredictorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Curve,
    Lambda,
}

/// One split x budget x method evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub split: usize,
    pub budget: usize,
    pub method: Method,
    /// Test-fold RMSE on the method's own scale; `None` for lm.
    pub rmse: Option<f64>,
    pub match_quality: f64,
    pub match_quality_tfm: f64,
    pub load_variance: f64,
    pub n_train: usize,
    pub n_held_out: usize,
    pub histogram: Histogram,
}

/// Mean and standard error over splits for one method and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub budget: usize,
    pub rmse_mean: Option<f64>,
    pub rmse_se: Option<f64>,
    pub match_quality_mean: f64,
    pub match_quality_se: f64,
    pub match_quality_tfm_mean: f64,
    pub match_quality_tfm_se: f64,
    /// Summed over splits.
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    /// `sum s_rp` over assigned pairs.
    pub raw_objective: f64,
    pub penalized_objective: f64,
    pub penalty: f64,
    pub load_variance: f64,
    pub loads: Vec<usize>,
    /// Number of reviewers at each load.
    pub load_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub splits: Vec<usize>,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    pub lambda_rows: Vec<LambdaRow>,
    pub config: serde_json::Value,
}

impl ExperimentReport {
    pub fn cell(&self, split: usize, budget: usize, method: Method) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.split == split && c.budget == budget && c.method == method)
    }

    pub fn summary_row(&self, method: Method, budget: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.budget == budget)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), WriteError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    /// Flat CSV, one row per cell (curve) or per lambda (sweep).
    pub fn write_csv(&self, path: &Path) -> Result<(), WriteError> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        match self.kind {
            ExperimentKind::Curve => {
                w.write_record([
                    "split",
                    "budget",
                    "method",
                    "rmse",
                    "match_quality",
                    "match_quality_tfm",
                    "load_variance",
                    "n_train",
                    "n_held_out",
                ])
                .expect("in-memory write");
                for c in &self.cells {
                    w.write_record([
                        c.split.to_string(),
                        c.budget.to_string(),
                        c.method.to_string(),
                        opt(c.rmse),
                        c.match_quality.to_string(),
                        c.match_quality_tfm.to_string(),
                        c.load_variance.to_string(),
                        c.n_train.to_string(),
                        c.n_held_out.to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
            ExperimentKind::Lambda => {
                w.write_record([
                    "lambda",
                    "raw_objective",
                    "penalized_objective",
                    "penalty",
                    "load_variance",
                    "loads",
                ])
                .expect("in-memory write");
                for row in &self.lambda_rows {
                    let loads: Vec<String> = row.loads.iter().map(|l| l.to_string()).collect();
                    w.write_record([
                        row.lambda.to_string(),
                        row.raw_objective.to_string(),
                        row.penalized_objective.to_string(),
                        row.penalty.to_string(),
                        row.load_variance.to_string(),
                        loads.join(";"),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn check_curve_config(corpus: &Corpus, config: &CurveConfig) -> Result<ImputationPolicy, EvalError> {
    if config.methods.is_empty() {
        return Err(EvalError::InvalidConfig("no methods given".into()));
    }
    if config.budgets.is_empty() {
        return Err(EvalError::InvalidConfig("no budgets given".into()));
    }
    if config.budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidConfig(format!(
            "budgets must be strictly ascending, got {:?}",
            config.budgets
        )));
    }
    let distinct: BTreeSet<_> = config.methods.iter().collect();
    if distinct.len() != config.methods.len() {
        return Err(EvalError::InvalidConfig("duplicate method".into()));
    }
    ImputationPolicy::new(config.matcher.tau, corpus.scores.range())
}

/// For each split x budget x method: subsample the training fold to the
/// budget, fit, predict every held-out observed key, match on the assembled
/// matrix, and score the assignment.
///
/// Held-out keys are all observed keys outside the subsampled training set.
/// RMSE is measured on the split's test fold only. The subsample depends on
/// the split and budget but not the method, and subsets are nested across
/// budgets. `truth`, when given, feeds the score histograms; otherwise they
/// use observed scores and `tau`.
pub fn run_elicitation_curve(
    corpus: &Corpus,
    truth: Option<&ScoreMatrix>,
    config: &CurveConfig,
) -> Result<ExperimentReport, EvalError> {
    let policy = check_curve_config(corpus, config)?;
    let scores = &corpus.scores;
    let splits = make_splits(scores, config.n_splits, config.seed)?;
    let stream = SeedStream::new(config.seed);
    let g = config.predictors.sigmoid();
    let observed = scores.key_set();

    let mut jobs = Vec::new();
    for split in &splits {
        for &budget in &config.budgets {
            for &method in &config.methods {
                jobs.push((split, budget, method));
            }
        }
    }

    let run_cell = |split: &crate::corpus::DatasetSplit,
                    budget: usize,
                    method: Method|
     -> Result<CellResult, EvalError> {
        let s = split.split_id;
        let sub_seed = stream.derive_index("split", s as u64).value();
        let kept = subsample_train(split, budget, sub_seed);
        let train = scores.restrict(&kept.train);
        let held_out_keys: BTreeSet<Key> = observed.difference(&kept.train).copied().collect();
        let held_out = scores.restrict(&held_out_keys);
        let fit_seed = stream
            .derive("fit")
            .derive_index("split", s as u64)
            .derive_index("budget", budget as u64)
            .value();
        let preds = matching_matrix(
            method,
            corpus,
            &train,
            &held_out_keys,
            policy,
            &config.predictors,
            fit_seed,
        )?;
        let rmse = match (&preds.rmse_estimates, preds.transform) {
            (None, _) => None,
            (Some(est), None) => Some(rmse(est, scores, &split.test)?),
            (Some(est), Some(t)) => Some(rmse_with(est, scores, &split.test, |x| t.apply(x))?),
        };
        let problem = config.matcher.problem(preds.matrix, &corpus.coi);
        let assignment = solve_basic(&problem)?;
        let histogram = match truth {
            Some(t) => score_histogram(&assignment, t, policy),
            None => score_histogram(&assignment, scores, policy),
        };
        Ok(CellResult {
            split: s,
            budget,
            method,
            rmse,
            match_quality: evaluate_match(&assignment, &train, &held_out, policy),
            match_quality_tfm: evaluate_match_tfm(&assignment, &train, &held_out, policy, &g),
            load_variance: load_variance(&assignment, config.matcher.r_target),
            n_train: train.len(),
            n_held_out: held_out.len(),
            histogram,
        })
    };

    let cells = jobs
        .par_iter()
        .map(|&(split, budget, method)| {
            run_cell(split, budget, method).map_err(|e| EvalError::Cell {
                split: split.split_id,
                budget,
                method,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = Vec::new();
    for &method in &config.methods {
        for &budget in &config.budgets {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.method == method && c.budget == budget)
                .collect();
            let q: Vec<f64> = group.iter().map(|c| c.match_quality).collect();
            let qt: Vec<f64> = group.iter().map(|c| c.match_quality_tfm).collect();
            let r: Option<Vec<f64>> = group.iter().map(|c| c.rmse).collect();
            let (rmse_mean, rmse_se) = match r {
                Some(r) => {
                    let (m, se) = mean_and_se(&r);
                    (Some(m), Some(se))
                }
                None => (None, None),
            };
            let (qm, qse) = mean_and_se(&q);
            let (qtm, qtse) = mean_and_se(&qt);
            let mut histogram = Histogram::empty(scores.range());
            for c in &group {
                histogram.merge(&c.histogram);
            }
            summary.push(SummaryRow {
                method,
                budget,
                rmse_mean,
                rmse_se,
                match_quality_mean: qm,
                match_quality_se: qse,
                match_quality_tfm_mean: qtm,
                match_quality_tfm_se: qtse,
                histogram,
            });
        }
    }

    Ok(ExperimentReport {
        kind: ExperimentKind::Curve,
        seed: Some(config.seed),
        methods: config.methods.clone(),
        budgets: config.budgets.clone(),
        splits: splits.iter().map(|s| s.split_id).collect(),
        cells,
        summary,
        lambda_rows: Vec::new(),
        config: serde_json::to_value(config).expect("config serializes"),
    })
}

/// Solves the balance program at every `lambda` on a fixed matrix.
pub fn run_lambda_sweep(
    suitability: &DMatrix<f64>,
    coi: &BTreeSet<Key>,
    lambdas: &[f64],
    matcher_config: &MatcherConfig,
) -> Result<ExperimentReport, EvalError> {
    if lambdas.is_empty() {
        return Err(EvalError::InvalidConfig("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) || !(lambdas[0] >= 0.0) {
        return Err(EvalError::InvalidConfig(format!(
            "lambdas must be >= 0 and strictly ascending, got {lambdas:?}"
        )));
    }
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let problem = MatcherConfig {
                lambda,
                ..*matcher_config
            }
            .problem(suitability.clone(), coi);
            let a = if lambda == 0.0 {
                solve_basic(&problem)
            } else {
                solve_balance(&problem)
            }
            .map_err(|source| EvalError::Lambda { lambda, source })?;
            let mut load_histogram = BTreeMap::new();
            for &l in &a.loads {
                *load_histogram.entry(l).or_insert(0) += 1;
            }
            Ok(LambdaRow {
                lambda,
                raw_objective: a.raw_suitability_sum,
                penalized_objective: a.objective_value,
                penalty: a.penalty,
                load_variance: matcher::load_variance(&a.loads, problem.mean_load()),
                loads: a.loads,
                load_histogram,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(ExperimentReport {
        kind: ExperimentKind::Lambda,
        seed: None,
        methods: Vec::new(),
        budgets: Vec::new(),
        splits: Vec::new(),
        cells: Vec::new(),
        summary: Vec::new(),
        lambda_rows: rows,
        config: serde_json::json!({ "lambdas": lambdas, "matcher": matcher_config }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_sweep_shape_and_trend() {
        let s = DMatrix::from_row_slice(2, 4, &[3.0, 3.0, 3.0, 3.0, 1.0, 1.0, 1.0, 1.0]);
        let cfg = MatcherConfig {
            p_min: 0,
            p_max: 4,
            ..MatcherConfig::default()
        };
        let grid = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 2.0];
        let report = run_lambda_sweep(&s, &BTreeSet::new(), &grid, &cfg).unwrap();
        assert_eq!(report.lambda_rows.len(), grid.len());
        assert_eq!(report.lambda_rows[0].loads, vec![4, 0]);
        assert_eq!(report.lambda_rows[0].load_variance, 4.0);
        for w in report.lambda_rows.windows(2) {
            assert!(w[1].raw_objective <= w[0].raw_objective);
            assert!(w[1].load_variance <= w[0].load_variance);
        }
        assert_eq!(report.lambda_rows.last().unwrap().loads, vec![2, 2]);
        let csv = report.to_csv();
        assert!(csv.starts_with("lambda,raw_objective,penalized_objective,penalty,load_variance,loads\n0,12,12,0,4,4;0\n"));
    }

    #[test]
    fn lambda_grid_validation() {
        let s = DMatrix::from_element(1, 1, 1.0);
        let cfg = MatcherConfig {
            p_min: 0,
            p_max: 1,
            ..MatcherConfig::default()
        };
        assert!(run_lambda_sweep(&s, &BTreeSet::new(), &[], &cfg).is_err());
        assert!(run_lambda_sweep(&s, &BTreeSet::new(), &[0.5, 0.1], &cfg).is_err());
        assert!(run_lambda_sweep(&s, &BTreeSet::new(), &[-1.0], &cfg).is_err());
    }
}
