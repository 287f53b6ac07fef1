//! Dirichlet-smoothed language model.
//!
//! Each reviewer is summarised by the mean of their archive count vectors,
//! `d_r`. A word's probability under `d_r` interpolates the maximum
//! likelihood estimate with the corpus background:
//!
//! ```text
//! Pr(w|d) = T_d/(T_d+mu) * c(w,d)/T_d + mu/(T_d+mu) * Pr(w)
//! ```
//!
//! and a paper is scored by its log-likelihood `sum_w c(w,p) ln Pr(w|d_r)`.
//! Scores are on the log scale and are never mapped into the score range.

use nalgebra::DMatrix;

use crate::corpus::{Corpus, DocumentVector, Observation};

pub const DEFAULT_MU: f64 = 1000.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LmError {
    #[error("smoothing parameter must be finite and > 0, got {0}")]
    InvalidMu(f64),
    #[error("augmentation key ({reviewer}, {paper}) outside the corpus")]
    BadAugmentation { reviewer: usize, paper: usize },
}

#[derive(Debug, Clone)]
pub struct LmModel {
    /// Dense `d_r` per reviewer (mean counts, possibly fractional).
    reviewer_docs: Vec<Vec<f64>>,
    reviewer_totals: Vec<f64>,
    background: Vec<f64>,
    mu: f64,
}

/// Builds the model. With `augment_from`, every training observation at the
/// top of the score range adds that paper to the reviewer's archive before
/// averaging.
pub fn build_model(
    corpus: &Corpus,
    mu: f64,
    augment_from: Option<&[Observation]>,
) -> Result<LmModel, LmError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(LmError::InvalidMu(mu));
    }
    let v = corpus.vocabulary.len();
    let n = corpus.n_reviewers();
    let s_max = corpus.scores.range().max;

    let mut extra: Vec<Vec<&DocumentVector>> = vec![Vec::new(); n];
    for o in augment_from.unwrap_or(&[]) {
        if o.reviewer >= n || o.paper >= corpus.n_papers() {
            return Err(LmError::BadAugmentation {
                reviewer: o.reviewer,
                paper: o.paper,
            });
        }
        if o.score == s_max {
            extra[o.reviewer].push(&corpus.paper_docs[o.paper]);
        }
    }

    let mut reviewer_docs = Vec::with_capacity(n);
    let mut reviewer_totals = Vec::with_capacity(n);
    for (archive, extra) in corpus.reviewer_archives.iter().zip(&extra) {
        let mut d = vec![0.0; v];
        let n_docs = archive.len() + extra.len();
        for doc in archive.iter().chain(extra.iter().copied()) {
            for (t, c) in doc.iter() {
                d[t] += c as f64;
            }
        }
        if n_docs > 0 {
            d.iter_mut().for_each(|x| *x /= n_docs as f64);
        }
        reviewer_totals.push(d.iter().sum());
        reviewer_docs.push(d);
    }

    let mut background = vec![0.0; v];
    for doc in corpus.paper_docs.iter().chain(corpus.reviewer_archives.iter().flatten()) {
        for (t, c) in doc.iter() {
            background[t] += c as f64;
        }
    }
    let total: f64 = background.iter().sum();
    if total > 0.0 {
        background.iter_mut().for_each(|x| *x /= total);
    } else if v > 0 {
        background.iter_mut().for_each(|x| *x = 1.0 / v as f64);
    }

    Ok(LmModel {
        reviewer_docs,
        reviewer_totals,
        background,
        mu,
    })
}

impl LmModel {
    /// Builds a model directly from its parts; `reviewer_docs` rows must all
    /// have the background's length.
    pub fn from_parts(reviewer_docs: Vec<Vec<f64>>, background: Vec<f64>, mu: f64) -> Result<Self, LmError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(LmError::InvalidMu(mu));
        }
        assert!(reviewer_docs.iter().all(|d| d.len() == background.len()));
        let reviewer_totals = reviewer_docs.iter().map(|d| d.iter().sum()).collect();
        Ok(LmModel {
            reviewer_docs,
            reviewer_totals,
            background,
            mu,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_reviewers(&self) -> usize {
        self.reviewer_docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.background.len()
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn reviewer_doc(&self, reviewer: usize) -> &[f64] {
        &self.reviewer_docs[reviewer]
    }

    /// Smoothed `Pr(w | d_r)`.
    pub fn word_prob(&self, reviewer: usize, term: usize) -> f64 {
        let t_d = self.reviewer_totals[reviewer];
        let bg = self.background[term];
        if t_d == 0.0 {
            return bg;
        }
        let c = self.reviewer_docs[reviewer][term];
        (c + self.mu * bg) / (t_d + self.mu)
    }

    /// `sum_w c(w,p) ln Pr(w|d_r)`; zero for an empty paper.
    pub fn predict(&self, reviewer: usize, paper_doc: &DocumentVector) -> f64 {
        paper_doc
            .iter()
            .map(|(t, c)| c as f64 * self.word_prob(reviewer, t).ln())
            .sum()
    }

    fn log_probs(&self, reviewer: usize) -> Vec<f64> {
        (0..self.vocab_size())
            .map(|t| self.word_prob(reviewer, t).ln())
            .collect()
    }
}

/// Full `N x M` matrix of log-likelihood estimates.
pub fn rank_for_matching(model: &LmModel, corpus: &Corpus) -> DMatrix<f64> {
    let n = corpus.n_reviewers();
    let m = corpus.n_papers();
    let mut out = DMatrix::zeros(n, m);
    for r in 0..n {
        let logp = model.log_probs(r);
        for (p, doc) in corpus.paper_docs.iter().enumerate() {
            out[(r, p)] = doc.iter().map(|(t, c)| c as f64 * logp[t]).sum();
        }
    }
    out
}
