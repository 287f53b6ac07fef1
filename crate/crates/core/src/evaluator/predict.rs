//! Per-method estimates and the matrix each method hands to the matcher.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{assemble_for_matching, baseline_estimates, EvalError, Estimates, ImputationPolicy};
use crate::bpmf::{fit_bayes, fit_map, BpmfConfig};
use crate::corpus::{Corpus, Key, Observation, ScoreMatrix};
use crate::lm::{self, DEFAULT_MU};
use crate::lr::{self, LrConfig, DEFAULT_REGULARIZATION};
use crate::transform::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lm,
    Lr,
    LrTfm,
    BpmfMap,
    Bpmf,
    Baseline,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Lm,
        Method::Lr,
        Method::LrTfm,
        Method::BpmfMap,
        Method::Bpmf,
        Method::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lm => "lm",
            Method::Lr => "lr",
            Method::LrTfm => "lr-tfm",
            Method::BpmfMap => "bpmf-map",
            Method::Bpmf => "bpmf",
            Method::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub lm_mu: f64,
    pub lr_regularization: f64,
    /// Sigmoid steepness for lr-tfm and transformed match quality.
    pub beta: f64,
    pub bpmf: BpmfConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            lm_mu: DEFAULT_MU,
            lr_regularization: DEFAULT_REGULARIZATION,
            beta: TransformSpec::DEFAULT_BETA,
            bpmf: BpmfConfig::default(),
        }
    }
}

impl PredictorConfig {
    pub fn sigmoid(&self) -> TransformSpec {
        TransformSpec::sigmoid(self.beta)
    }
}

#[derive(Debug, Clone)]
pub struct Predictions {
    /// Dense matrix for the matcher: log-likelihoods for lm, transformed
    /// scores for lr-tfm, scores otherwise.
    pub matrix: DMatrix<f64>,
    /// What the matcher saw on the target keys. `None` for lm.
    pub estimates: Option<Estimates>,
    /// Estimates used for RMSE. Differs from `estimates` only for the
    /// baseline, which is scored as the training mean.
    pub rmse_estimates: Option<Estimates>,
    /// Scale of `estimates`: `Some` means transformed.
    pub transform: Option<TransformSpec>,
}

/// Fits `method` on `train` and builds its matching matrix, predicting
/// every key in `targets`. All other unobserved cells get `tau`.
pub fn matching_matrix(
    method: Method,
    corpus: &Corpus,
    train: &ScoreMatrix,
    targets: &BTreeSet<Key>,
    policy: ImputationPolicy,
    config: &PredictorConfig,
    seed: u64,
) -> Result<Predictions, EvalError> {
    let (n, m) = (corpus.n_reviewers(), corpus.n_papers());
    let range = train.range();
    let observations: Vec<Observation> = train.observations().collect();

    let plain = |estimates: Estimates, rmse_estimates: Estimates| -> Result<Predictions, EvalError> {
        Ok(Predictions {
            matrix: assemble_for_matching(train, &estimates, policy)?,
            estimates: Some(estimates),
            rmse_estimates: Some(rmse_estimates),
            transform: None,
        })
    };

    match method {
        Method::Baseline => {
            let mean = train.mean().unwrap_or(0.5 * (range.min + range.max));
            let rmse: Estimates = targets.iter().map(|&k| (k, mean)).collect();
            plain(baseline_estimates(targets, policy), rmse)
        }
        Method::Lm => {
            let model = lm::build_model(corpus, config.lm_mu, Some(&observations))?;
            Ok(Predictions {
                matrix: lm::rank_for_matching(&model, corpus),
                estimates: None,
                rmse_estimates: None,
                transform: None,
            })
        }
        Method::Lr | Method::LrTfm => {
            let transform = (method == Method::LrTfm).then(|| config.sigmoid());
            let lr_config = LrConfig {
                regularization: config.lr_regularization,
                transform,
                score_range: range,
                ..LrConfig::default()
            };
            let model = lr::fit(
                &observations,
                &corpus.paper_docs,
                n,
                corpus.vocabulary.len(),
                lr_config,
            )?;
            let estimates: Estimates = targets
                .iter()
                .map(|&(r, p)| ((r, p), model.predict(r, &corpus.paper_docs[p])))
                .collect();
            match transform {
                None => plain(estimates.clone(), estimates),
                Some(g) => {
                    let mut matrix =
                        assemble_for_matching(train, &Estimates::new(), policy)?.map(|s| g.apply(s));
                    for (&(r, p), &e) in &estimates {
                        if train.contains((r, p)) {
                            return Err(EvalError::OverlappingKeys(r, p));
                        }
                        matrix[(r, p)] = e;
                    }
                    Ok(Predictions {
                        matrix,
                        estimates: Some(estimates.clone()),
                        rmse_estimates: Some(estimates),
                        transform,
                    })
                }
            }
        }
        Method::BpmfMap | Method::Bpmf => {
            let bpmf_config = BpmfConfig {
                score_range: range,
                ..config.bpmf
            };
            let model = if method == Method::Bpmf {
                fit_bayes(&observations, n, m, &bpmf_config, seed)?
            } else {
                fit_map(&observations, n, m, &bpmf_config, seed)?
            };
            let full = model.predict_matrix();
            let estimates: Estimates = targets.iter().map(|&(r, p)| ((r, p), full[(r, p)])).collect();
            plain(estimates.clone(), estimates)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("svm".parse::<Method>().is_err());
    }
}
