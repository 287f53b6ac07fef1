//! Metrics and experiment protocols.
//!
//! Match quality follows one rule everywhere: an assigned pair is worth its
//! true training score if it was observed in training, else its true
//! held-out score if that is known, else the imputation constant `tau`.

mod experiment;
mod predict;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Key, ScoreMatrix, ScoreRange};
use crate::matcher::{Assignment, MatchError};
use crate::transform::TransformSpec;

pub use experiment::{
    run_elicitation_curve, run_lambda_sweep, CellResult, CurveConfig, ExperimentKind,
    ExperimentReport, LambdaRow, MatcherConfig, SummaryRow,
};
pub use predict::{matching_matrix, Method, PredictorConfig, Predictions};

/// Sparse estimates keyed by `(reviewer, paper)`.
pub type Estimates = BTreeMap<Key, f64>;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("key set is empty")]
    EmptyKeys,
    #[error("key ({0}, {1}) missing from estimates or truth")]
    MissingKey(usize, usize),
    #[error("key ({0}, {1}) is both a training key and an estimate")]
    OverlappingKeys(usize, usize),
    #[error("tau {tau} lies outside the score range [{min}, {max}]")]
    TauOutOfRange { tau: f64, min: f64, max: f64 },
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("split {split}, budget {budget}, method {method}: {source}")]
    Cell {
        split: usize,
        budget: usize,
        method: Method,
        #[source]
        source: Box<EvalError>,
    },
    #[error("lambda {lambda}: {source}")]
    Lambda {
        lambda: f64,
        #[source]
        source: MatchError,
    },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lm(#[from] crate::lm::LmError),
    #[error(transparent)]
    Lr(#[from] crate::lr::LrError),
    #[error(transparent)]
    Bpmf(#[from] crate::bpmf::BpmfError),
}

/// Constant imputation for scores that are neither known nor predicted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationPolicy {
    pub tau: f64,
}

impl Default for ImputationPolicy {
    fn default() -> Self {
        ImputationPolicy { tau: 1.0 }
    }
}

impl ImputationPolicy {
    pub fn new(tau: f64, range: ScoreRange) -> Result<Self, EvalError> {
        if !range.contains(tau) {
            return Err(EvalError::TauOutOfRange {
                tau,
                min: range.min,
                max: range.max,
            });
        }
        Ok(ImputationPolicy { tau })
    }
}

/// Root mean squared error over exactly `keys`.
pub fn rmse(estimates: &Estimates, truth: &ScoreMatrix, keys: &BTreeSet<Key>) -> Result<f64, EvalError> {
    rmse_with(estimates, truth, keys, |s| s)
}

/// RMSE against `label(truth)`, e.g. transformed labels.
pub fn rmse_with<F: Fn(f64) -> f64>(
    estimates: &Estimates,
    truth: &ScoreMatrix,
    keys: &BTreeSet<Key>,
    label: F,
) -> Result<f64, EvalError> {
    if keys.is_empty() {
        return Err(EvalError::EmptyKeys);
    }
    let mut sse = 0.0;
    for &(r, p) in keys {
        let (Some(e), Some(t)) = (estimates.get(&(r, p)), truth.get(r, p)) else {
            return Err(EvalError::MissingKey(r, p));
        };
        sse += (e - label(t)).powi(2);
    }
    Ok((sse / keys.len() as f64).sqrt())
}

/// Dense matrix: training keys carry their true scores, estimated keys their
/// estimates, everything else `tau`.
pub fn assemble_for_matching(
    train: &ScoreMatrix,
    estimates: &Estimates,
    policy: ImputationPolicy,
) -> Result<DMatrix<f64>, EvalError> {
    let mut s = train.to_dense(policy.tau);
    for (&(r, p), &e) in estimates {
        if train.contains((r, p)) {
            return Err(EvalError::OverlappingKeys(r, p));
        }
        if r >= s.nrows() || p >= s.ncols() {
            return Err(EvalError::MissingKey(r, p));
        }
        s[(r, p)] = e;
    }
    Ok(s)
}

fn lookup(train: &ScoreMatrix, held_out: &ScoreMatrix, policy: ImputationPolicy, key: Key) -> f64 {
    train
        .get(key.0, key.1)
        .or_else(|| held_out.get(key.0, key.1))
        .unwrap_or(policy.tau)
}

/// Match quality of an assignment, summed over its pairs in sorted order.
pub fn evaluate_match(
    assignment: &Assignment,
    train: &ScoreMatrix,
    held_out: &ScoreMatrix,
    policy: ImputationPolicy,
) -> f64 {
    assignment
        .pairs
        .iter()
        .map(|&k| lookup(train, held_out, policy, k))
        .sum()
}

/// [`evaluate_match`] with every pair's value passed through `g`.
pub fn evaluate_match_tfm(
    assignment: &Assignment,
    train: &ScoreMatrix,
    held_out: &ScoreMatrix,
    policy: ImputationPolicy,
    transform: &TransformSpec,
) -> f64 {
    assignment
        .pairs
        .iter()
        .map(|&k| transform.apply(lookup(train, held_out, policy, k)))
        .sum()
}

/// Baseline: `tau` for every target key.
pub fn baseline_estimates<'a, I: IntoIterator<Item = &'a Key>>(
    keys: I,
    policy: ImputationPolicy,
) -> Estimates {
    keys.into_iter().map(|&k| (k, policy.tau)).collect()
}

/// Counts of assigned pairs per integer score bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin labels `ceil(min)..=floor(max)`.
    pub bins: Vec<i64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn empty(range: ScoreRange) -> Self {
        let bins: Vec<i64> = (range.min.ceil() as i64..=range.max.floor() as i64).collect();
        let counts = vec![0; bins.len()];
        Histogram { bins, counts }
    }

    /// Adds one value, rounding half up and clamping into the outer bins.
    pub fn add(&mut self, value: f64) {
        if self.bins.is_empty() {
            return;
        }
        let b = (value + 0.5).floor() as i64;
        let i = (b - self.bins[0]).clamp(0, self.bins.len() as i64 - 1) as usize;
        self.counts[i] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, bin: i64) -> usize {
        self.bins
            .iter()
            .position(|&b| b == bin)
            .map_or(0, |i| self.counts[i])
    }
}

/// Histogram of the true scores of assigned pairs; pairs without a known
/// truth count as `tau`.
pub fn score_histogram(
    assignment: &Assignment,
    truth: &ScoreMatrix,
    policy: ImputationPolicy,
) -> Histogram {
    let mut h = Histogram::empty(truth.range());
    for &(r, p) in &assignment.pairs {
        h.add(truth.get(r, p).unwrap_or(policy.tau));
    }
    h
}

/// `sum_r (L_r - x̄)^2 / N` with `x̄ = M * r_target / N`.
pub fn load_variance(assignment: &Assignment, r_target: usize) -> f64 {
    let n = assignment.loads.len();
    if n == 0 {
        return 0.0;
    }
    let xbar = (assignment.n_papers * r_target) as f64 / n as f64;
    crate::matcher::load_variance(&assignment.loads, xbar)
}

/// Sample mean and standard error `stddev / sqrt(n)`; the error is 0 for a
/// single value.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Observation;

    fn scores(n: usize, m: usize, obs: &[(usize, usize, f64)]) -> ScoreMatrix {
        ScoreMatrix::from_observations(
            n,
            m,
            ScoreRange::default(),
            obs.iter().map(|&(reviewer, paper, score)| Observation {
                reviewer,
                paper,
                score,
            }),
        )
        .unwrap()
    }

    fn assignment(pairs: &[Key], n: usize, m: usize) -> Assignment {
        let pairs: BTreeSet<Key> = pairs.iter().copied().collect();
        let mut loads = vec![0; n];
        for &(r, _) in &pairs {
            loads[r] += 1;
        }
        Assignment {
            pairs,
            objective_value: 0.0,
            raw_suitability_sum: 0.0,
            penalty: 0.0,
            loads,
            n_papers: m,
        }
    }

    #[test]
    fn rmse_cases() {
        let truth = scores(1, 2, &[(0, 0, 0.0), (0, 1, 3.0)]);
        let keys = BTreeSet::from([(0, 0), (0, 1)]);
        let exact: Estimates = [((0, 0), 0.0), ((0, 1), 3.0)].into();
        assert_eq!(rmse(&exact, &truth, &keys).unwrap(), 0.0);
        // errors 3 and 4: truth (0, 3), estimates (3, -1)
        let off: Estimates = [((0, 0), 3.0), ((0, 1), -1.0)].into();
        let v = rmse(&off, &truth, &keys).unwrap();
        assert!((v - 3.5355339).abs() < 1e-6);
        assert_eq!(v, (12.5f64).sqrt());
        let mean: Estimates = [((0, 0), 1.5), ((0, 1), 1.5)].into();
        assert_eq!(rmse(&mean, &truth, &keys).unwrap(), 1.5);
        assert!(matches!(rmse(&exact, &truth, &BTreeSet::new()), Err(EvalError::EmptyKeys)));
        let missing = BTreeSet::from([(0, 0), (0, 2)]);
        assert!(matches!(rmse(&exact, &truth, &missing), Err(EvalError::MissingKey(0, 2))));
    }

    #[test]
    fn assembly_union_rule() {
        let policy = ImputationPolicy::default();
        let empty = scores(2, 2, &[]);
        let s = assemble_for_matching(&empty, &Estimates::new(), policy).unwrap();
        assert!(s.iter().all(|&x| x == 1.0));

        let train = scores(2, 2, &[(0, 0, 3.0)]);
        let est: Estimates = [((1, 1), 2.5)].into();
        let s = assemble_for_matching(&train, &est, policy).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.5]));

        let full = scores(1, 2, &[(0, 0, 2.0), (0, 1, 0.0)]);
        let s = assemble_for_matching(&full, &Estimates::new(), policy).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(1, 2, &[2.0, 0.0]));

        let clash: Estimates = [((0, 0), 1.0)].into();
        assert!(matches!(
            assemble_for_matching(&train, &clash, policy),
            Err(EvalError::OverlappingKeys(0, 0))
        ));
    }

    #[test]
    fn match_quality_lookup() {
        let policy = ImputationPolicy::default();
        let train = scores(3, 3, &[(0, 0, 3.0)]);
        let test = scores(3, 3, &[(1, 1, 2.0)]);
        let a = assignment(&[(0, 0), (1, 1), (2, 2)], 3, 3);
        assert_eq!(evaluate_match(&a, &train, &test, policy), 6.0);

        let none = scores(3, 3, &[]);
        assert_eq!(evaluate_match(&a, &none, &none, policy), 3.0);

        // tau never matters when every pair is known
        let b = assignment(&[(0, 0), (1, 1)], 3, 3);
        let other = ImputationPolicy { tau: 2.5 };
        assert_eq!(
            evaluate_match(&b, &train, &test, policy),
            evaluate_match(&b, &train, &test, other)
        );
        // train wins over a conflicting held-out value
        let shadow = scores(3, 3, &[(0, 0, 0.0)]);
        assert_eq!(evaluate_match(&b, &train, &shadow, policy), 4.0);
    }

    #[test]
    fn baseline_is_constant() {
        let keys = BTreeSet::from([(0, 1), (2, 3)]);
        let e = baseline_estimates(&keys, ImputationPolicy::default());
        assert!(e.values().all(|&v| v == 1.0));
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn histogram_counts() {
        let policy = ImputationPolicy::default();
        let truth = scores(3, 3, &[(0, 0, 3.0), (1, 1, 3.0), (2, 2, 0.0)]);
        let a = assignment(&[(0, 0), (1, 1), (2, 2)], 3, 3);
        let h = score_histogram(&a, &truth, policy);
        assert_eq!(h.bins, vec![0, 1, 2, 3]);
        assert_eq!(h.counts, vec![1, 0, 0, 2]);
        assert_eq!(h.total(), 3);

        let h = score_histogram(&a, &scores(3, 3, &[]), policy);
        assert_eq!(h.counts, vec![0, 3, 0, 0]);

        let mut h = Histogram::empty(ScoreRange::default());
        h.add(1.5);
        h.add(2.49);
        h.add(0.5);
        assert_eq!(h.counts, vec![0, 1, 2, 0]);
    }

    #[test]
    fn load_variance_cases() {
        let balanced = assignment(&[(0, 0), (1, 1)], 2, 2);
        assert_eq!(load_variance(&balanced, 1), 0.0);
        let skewed = assignment(&[(0, 0), (0, 1), (0, 2), (0, 3)], 2, 4);
        assert_eq!(load_variance(&skewed, 1), 4.0);
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((se - sd / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn tau_must_be_in_range() {
        assert!(ImputationPolicy::new(1.0, ScoreRange::default()).is_ok());
        assert!(ImputationPolicy::new(4.0, ScoreRange::default()).is_err());
    }
}
