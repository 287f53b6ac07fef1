//! Data model, file ingestion, vocabulary construction, dataset splitting and
//! synthetic corpus generation.

mod files;
mod scores;
mod split;
pub mod synthetic;
mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use files::{
    load_coi, load_corpus, load_documents, load_scores, load_scores_indexed, write_coi,
    write_documents, write_scores, CorpusFiles, LoadedScores,
};
pub use scores::ScoreMatrix;
pub use split::{make_splits, subsample_train, DatasetSplit};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};
pub use vocab::{build_vocabulary, project_documents, Vocabulary};

/// A `(reviewer, paper)` index pair.
pub type Key = (usize, usize);

/// One known suitability score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub reviewer: usize,
    pub paper: usize,
    pub score: f64,
}

impl Observation {
    pub fn key(&self) -> Key {
        (self.reviewer, self.paper)
    }
}

/// Closed interval of admissible scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

impl Default for ScoreRange {
    fn default() -> Self {
        ScoreRange { min: 0.0, max: 3.0 }
    }
}

impl ScoreRange {
    pub fn new(min: f64, max: f64) -> Result<Self, CorpusError> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(CorpusError::InvalidArgument(format!(
                "invalid score range ({min}, {max})"
            )));
        }
        Ok(ScoreRange { min, max })
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.min && s <= self.max
    }

    pub fn clip(&self, s: f64) -> f64 {
        s.clamp(self.min, self.max)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("line {line}: duplicate score for ({reviewer}, {paper})")]
    Duplicate {
        line: u64,
        reviewer: String,
        paper: String,
    },
    #[error("line {line}: score out of range: {score} not in [{min}, {max}]")]
    OutOfRange {
        line: u64,
        score: f64,
        min: f64,
        max: f64,
    },
    #[error("line {line}: unknown {kind} id {id:?}")]
    UnknownId {
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("reviewer {reviewer} has {observed} observed scores; at least {required} are needed")]
    TooFewObservations {
        reviewer: usize,
        observed: usize,
        required: usize,
    },
    #[error("{0}")]
    InvalidArgument(String),
}

/// Bidirectional map between external string ids and dense 0-based indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Self {
        let mut m = IdMap::new();
        for n in names {
            m.intern(&n);
        }
        m
    }

    /// Returns the index for `name`, allocating the next one when unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Sparse term-count vector over a fixed vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentVector {
    counts: BTreeMap<usize, u64>,
    total: u64,
}

impl DocumentVector {
    /// Builds a vector from `(term_index, count)` pairs; repeated terms
    /// accumulate and zero counts are dropped.
    pub fn from_counts<I: IntoIterator<Item = (usize, u64)>>(pairs: I) -> Self {
        let mut counts = BTreeMap::new();
        for (t, c) in pairs {
            if c > 0 {
                *counts.entry(t).or_insert(0) += c;
            }
        }
        let total = counts.values().sum();
        DocumentVector { counts, total }
    }

    pub fn count(&self, term: usize) -> u64 {
        self.counts.get(&term).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    /// `T_d`, the number of tokens.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn max_term(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        DocumentVector::from_counts(self.iter().map(|(t, c)| (t, c * factor)))
    }
}

/// A raw document as it appears in the JSON Lines files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub counts: BTreeMap<String, u64>,
}

/// Papers, reviewer archives, observed scores and conflicts, all indexed
/// densely.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub paper_docs: Vec<DocumentVector>,
    /// Each reviewer's archive, one vector per authored document.
    pub reviewer_archives: Vec<Vec<DocumentVector>>,
    pub scores: ScoreMatrix,
    pub coi: BTreeSet<Key>,
    pub reviewer_ids: IdMap,
    pub paper_ids: IdMap,
}

impl Corpus {
    pub fn new(
        vocabulary: Vocabulary,
        paper_docs: Vec<DocumentVector>,
        reviewer_archives: Vec<Vec<DocumentVector>>,
        scores: ScoreMatrix,
        coi: BTreeSet<Key>,
        reviewer_ids: IdMap,
        paper_ids: IdMap,
    ) -> Result<Self, CorpusError> {
        let n = scores.n_reviewers();
        let m = scores.n_papers();
        if paper_docs.len() != m || paper_ids.len() != m {
            return Err(CorpusError::InvalidArgument(format!(
                "expected {m} papers, got {} documents and {} ids",
                paper_docs.len(),
                paper_ids.len()
            )));
        }
        if reviewer_archives.len() != n || reviewer_ids.len() != n {
            return Err(CorpusError::InvalidArgument(format!(
                "expected {n} reviewers, got {} archives and {} ids",
                reviewer_archives.len(),
                reviewer_ids.len()
            )));
        }
        let v = vocabulary.len();
        let docs = paper_docs.iter().chain(reviewer_archives.iter().flatten());
        for d in docs {
            if d.max_term().is_some_and(|t| t >= v) {
                return Err(CorpusError::InvalidArgument(
                    "document term index exceeds vocabulary size".into(),
                ));
            }
        }
        if let Some(&(r, p)) = coi.iter().find(|&&(r, p)| r >= n || p >= m) {
            return Err(CorpusError::InvalidArgument(format!(
                "conflict ({r}, {p}) outside {n}x{m}"
            )));
        }
        Ok(Corpus {
            vocabulary,
            paper_docs,
            reviewer_archives,
            scores,
            coi,
            reviewer_ids,
            paper_ids,
        })
    }

    pub fn n_reviewers(&self) -> usize {
        self.scores.n_reviewers()
    }

    pub fn n_papers(&self) -> usize {
        self.scores.n_papers()
    }
}
