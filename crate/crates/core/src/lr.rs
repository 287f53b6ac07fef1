//! Per-reviewer ridge regression on paper word counts.
//!
//! Each reviewer's problem `min ||X theta - y||^2 + eps ||theta||^2` is solved
//! exactly and independently. With more examples than features the primal
//! normal equations are used; otherwise the dual `theta = X^T (X X^T + eps
//! I)^-1 y`, which costs `O(n^2 d)` instead of `O(d^3)`. The bias feature
//! (when enabled) is an extra constant column and is regularized with the
//! rest.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::corpus::{DocumentVector, Observation, ScoreRange};
use crate::transform::TransformSpec;

pub const DEFAULT_REGULARIZATION: f64 = 1.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LrError {
    #[error("normal equations for reviewer {reviewer} are singular; use a regularization > 0")]
    Singular { reviewer: usize },
    #[error("regularization must be finite and >= 0, got {0}")]
    InvalidRegularization(f64),
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("observation ({reviewer}, {paper}) outside the model")]
    OutOfRange { reviewer: usize, paper: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrConfig {
    pub regularization: f64,
    /// Train on `g(s)` instead of `s`; predictions then live on the
    /// transformed scale.
    pub transform: Option<TransformSpec>,
    pub fit_bias: bool,
    pub score_range: ScoreRange,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            regularization: DEFAULT_REGULARIZATION,
            transform: None,
            fit_bias: true,
            score_range: ScoreRange::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReviewerFit {
    Linear { weights: DVector<f64>, bias: f64 },
    /// No training rows: constant global training mean.
    Fallback(f64),
}

#[derive(Debug, Clone)]
pub struct LrModel {
    fits: Vec<ReviewerFit>,
    n_features: usize,
    config: LrConfig,
}

fn label(cfg: &LrConfig, s: f64) -> f64 {
    match &cfg.transform {
        Some(g) => g.apply(s),
        None => s,
    }
}

fn design_row(doc: &DocumentVector, n_features: usize, bias: bool, row: &mut [f64]) {
    row.iter_mut().for_each(|x| *x = 0.0);
    for (t, c) in doc.iter() {
        if t < n_features {
            row[t] = c as f64;
        }
    }
    if bias {
        row[n_features] = 1.0;
    }
}

fn solve_reviewer(
    reviewer: usize,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    eps: f64,
) -> Result<DVector<f64>, LrError> {
    let (n, d) = x.shape();
    if eps == 0.0 {
        if n < d {
            return Err(LrError::Singular { reviewer });
        }
        let svd = x.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > smax * 1e-12) {
            return Err(LrError::Singular { reviewer });
        }
        return svd.solve(y, 0.0).map_err(|_| LrError::Singular { reviewer });
    }
    if n >= d {
        let mut gram = x.tr_mul(x);
        for i in 0..d {
            gram[(i, i)] += eps;
        }
        let rhs = x.tr_mul(y);
        let chol = gram.cholesky().ok_or(LrError::Singular { reviewer })?;
        Ok(chol.solve(&rhs))
    } else {
        let mut k = x * x.transpose();
        for i in 0..n {
            k[(i, i)] += eps;
        }
        let chol = k.cholesky().ok_or(LrError::Singular { reviewer })?;
        let alpha = chol.solve(y);
        Ok(x.tr_mul(&alpha))
    }
}

/// Fits one regression per reviewer. `n_features` is the vocabulary size;
/// term indices at or beyond it are ignored.
pub fn fit(
    train: &[Observation],
    paper_docs: &[DocumentVector],
    n_reviewers: usize,
    n_features: usize,
    config: LrConfig,
) -> Result<LrModel, LrError> {
    let eps = config.regularization;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(LrError::InvalidRegularization(eps));
    }
    let mut rows: Vec<Vec<&Observation>> = vec![Vec::new(); n_reviewers];
    for o in train {
        if o.reviewer >= n_reviewers || o.paper >= paper_docs.len() {
            return Err(LrError::OutOfRange {
                reviewer: o.reviewer,
                paper: o.paper,
            });
        }
        rows[o.reviewer].push(o);
    }
    let global_mean = if train.is_empty() {
        label(&config, 0.5 * (config.score_range.min + config.score_range.max))
    } else {
        train.iter().map(|o| label(&config, o.score)).sum::<f64>() / train.len() as f64
    };

    let d = n_features + usize::from(config.fit_bias);
    let fits = rows
        .par_iter()
        .enumerate()
        .map(|(r, obs)| {
            if obs.is_empty() {
                return Ok(ReviewerFit::Fallback(global_mean));
            }
            let mut x = DMatrix::zeros(obs.len(), d);
            let mut buf = vec![0.0; d];
            for (i, o) in obs.iter().enumerate() {
                design_row(&paper_docs[o.paper], n_features, config.fit_bias, &mut buf);
                for (j, v) in buf.iter().enumerate() {
                    x[(i, j)] = *v;
                }
            }
            let y = DVector::from_iterator(obs.len(), obs.iter().map(|o| label(&config, o.score)));
            let theta = solve_reviewer(r, &x, &y, eps)?;
            let bias = if config.fit_bias { theta[n_features] } else { 0.0 };
            Ok(ReviewerFit::Linear {
                weights: theta.rows(0, n_features).into_owned(),
                bias,
            })
        })
        .collect::<Result<Vec<_>, LrError>>()?;
    Ok(LrModel {
        fits,
        n_features,
        config,
    })
}

impl LrModel {
    pub fn from_fits(fits: Vec<ReviewerFit>, n_features: usize, config: LrConfig) -> Self {
        LrModel {
            fits,
            n_features,
            config,
        }
    }

    pub fn fit_for(&self, reviewer: usize) -> &ReviewerFit {
        &self.fits[reviewer]
    }

    pub fn is_fallback(&self, reviewer: usize) -> bool {
        matches!(self.fits[reviewer], ReviewerFit::Fallback(_))
    }

    pub fn config(&self) -> &LrConfig {
        &self.config
    }

    pub fn transform(&self) -> Option<&TransformSpec> {
        self.config.transform.as_ref()
    }

    /// The unclipped linear response.
    pub fn raw_predict(&self, reviewer: usize, paper_doc: &DocumentVector) -> f64 {
        match &self.fits[reviewer] {
            ReviewerFit::Fallback(c) => *c,
            ReviewerFit::Linear { weights, bias } => {
                bias + paper_doc
                    .iter()
                    .filter(|&(t, _)| t < self.n_features)
                    .map(|(t, c)| weights[t] * c as f64)
                    .sum::<f64>()
            }
        }
    }

    /// Prediction clipped to `[0, 1]` for transformed models, else to the
    /// score range.
    pub fn predict(&self, reviewer: usize, paper_doc: &DocumentVector) -> f64 {
        let raw = self.raw_predict(reviewer, paper_doc);
        let r = self.config.score_range;
        let (lo, hi) = match &self.config.transform {
            Some(g) => g.output_range(r.min, r.max),
            None => (r.min, r.max),
        };
        raw.clamp(lo, hi)
    }

    /// Mean squared error on the model's own (possibly transformed) scale.
    pub fn mse(&self, eval_set: &[Observation], paper_docs: &[DocumentVector]) -> Result<f64, LrError> {
        if eval_set.is_empty() {
            return Err(LrError::EmptyEvalSet);
        }
        let sse: f64 = eval_set
            .iter()
            .map(|o| {
                let e = self.predict(o.reviewer, &paper_docs[o.paper]) - label(&self.config, o.score);
                e * e
            })
            .sum();
        Ok(sse / eval_set.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(r: usize, p: usize, s: f64) -> Observation {
        Observation {
            reviewer: r,
            paper: p,
            score: s,
        }
    }

    fn no_bias(eps: f64) -> LrConfig {
        LrConfig {
            regularization: eps,
            fit_bias: false,
            ..LrConfig::default()
        }
    }

    #[test]
    fn one_feature_closed_form() {
        let docs = vec![
            DocumentVector::from_counts([(0, 1)]),
            DocumentVector::from_counts([(0, 2)]),
        ];
        let m = fit(&[obs(0, 0, 2.0), obs(0, 1, 4.0)], &docs, 1, 1, no_bias(0.0)).unwrap();
        match m.fit_for(0) {
            ReviewerFit::Linear { weights, .. } => assert!((weights[0] - 2.0).abs() < 1e-12),
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn singular_without_regularization() {
        let docs = vec![DocumentVector::from_counts([(0, 1), (1, 1)])];
        let err = fit(&[obs(0, 0, 1.0)], &docs, 1, 2, no_bias(0.0)).unwrap_err();
        assert_eq!(err, LrError::Singular { reviewer: 0 });
        assert!(err.to_string().contains("regularization > 0"));
        assert!(fit(&[obs(0, 0, 1.0)], &docs, 1, 2, no_bias(1.0)).is_ok());
    }

    #[test]
    fn reviewer_without_rows_uses_global_mean() {
        let docs = vec![DocumentVector::from_counts([(0, 1)]); 3];
        let train = [obs(0, 0, 1.0), obs(0, 1, 3.0)];
        let m = fit(&train, &docs, 2, 1, LrConfig::default()).unwrap();
        assert!(m.is_fallback(1));
        assert!(!m.is_fallback(0));
        assert_eq!(m.predict(1, &docs[2]), 2.0);
    }

    #[test]
    fn transformed_labels() {
        let g = TransformSpec::sigmoid(4.5);
        let docs = vec![DocumentVector::from_counts([(0, 1)]); 2];
        let cfg = LrConfig {
            transform: Some(g),
            ..LrConfig::default()
        };
        // bias-only target: both labels are 3, so the fit aims at g(3) ~ 1.0
        let m = fit(&[obs(0, 0, 3.0), obs(0, 1, 3.0)], &docs, 1, 0, LrConfig { regularization: 1e-9, ..cfg })
            .unwrap();
        assert!((m.predict(0, &docs[0]) - g.apply(3.0)).abs() < 1e-6);
        assert!((g.apply(3.0) - 1.0).abs() < 0.005);
        assert!(m.predict(0, &docs[0]) <= 1.0);
    }

    #[test]
    fn clipping_and_constant_models() {
        let cfg = LrConfig::default();
        let m = LrModel::from_fits(
            vec![
                ReviewerFit::Linear {
                    weights: DVector::from_vec(vec![2.0]),
                    bias: 0.0,
                },
                ReviewerFit::Linear {
                    weights: DVector::from_vec(vec![0.0]),
                    bias: 1.5,
                },
            ],
            1,
            cfg,
        );
        let doc = DocumentVector::from_counts([(0, 3)]);
        assert_eq!(m.raw_predict(0, &doc), 6.0);
        assert_eq!(m.predict(0, &doc), 3.0);
        assert_eq!(m.predict(1, &doc), 1.5);
        assert_eq!(m.predict(1, &DocumentVector::default()), 1.5);
    }

    #[test]
    fn mse_cases() {
        let docs = vec![DocumentVector::default(); 2];
        let constant = |c: f64| {
            LrModel::from_fits(
                vec![ReviewerFit::Linear {
                    weights: DVector::zeros(0),
                    bias: c,
                }],
                0,
                LrConfig::default(),
            )
        };
        // errors 1 and 3
        let m = constant(0.0);
        assert_eq!(m.mse(&[obs(0, 0, 1.0), obs(0, 1, 3.0)], &docs).unwrap(), 5.0);
        // perfect predictions
        assert_eq!(constant(2.0).mse(&[obs(0, 0, 2.0)], &docs).unwrap(), 0.0);
        // constant at the label mean gives the label variance
        let labels = [obs(0, 0, 0.0), obs(0, 1, 1.0), obs(0, 0, 2.0), obs(0, 1, 3.0)];
        assert!((constant(1.5).mse(&labels, &docs).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(m.mse(&[], &docs), Err(LrError::EmptyEvalSet));
    }
}
