use std::collections::{BTreeMap, HashMap};

use super::{CorpusError, DocumentVector};

/// The retained terms, ordered by descending tf·idf (ties lexicographic).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    tfidf: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const DEFAULT_SIZE: usize = 1000;

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn tfidf_scores(&self) -> &[f64] {
        &self.tfidf
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Keeps the `size` terms with the largest `tf(w) · ln(D / df(w))`, where
/// `tf` is the total count of `w` over all documents and `df` the number of
/// documents containing it.
pub fn build_vocabulary(
    raw_docs: &[BTreeMap<String, u64>],
    size: usize,
) -> Result<Vocabulary, CorpusError> {
    if size == 0 {
        return Err(CorpusError::InvalidArgument("vocabulary size must be >= 1".into()));
    }
    if raw_docs.is_empty() {
        return Err(CorpusError::InvalidArgument(
            "vocabulary needs at least one document".into(),
        ));
    }
    let mut stats: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for doc in raw_docs {
        for (term, &c) in doc {
            if c == 0 {
                continue;
            }
            let e = stats.entry(term.as_str()).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    let n_docs = raw_docs.len() as f64;
    let mut scored: Vec<(&str, f64)> = stats
        .into_iter()
        .map(|(t, (tf, df))| (t, tf as f64 * (n_docs / df as f64).ln()))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(size);

    let terms: Vec<String> = scored.iter().map(|(t, _)| t.to_string()).collect();
    let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        terms,
        tfidf: scored.iter().map(|&(_, s)| s).collect(),
        index,
    })
}

/// Restricts each raw document to the vocabulary, dropping unknown terms.
pub fn project_documents(
    raw_docs: &[BTreeMap<String, u64>],
    vocabulary: &Vocabulary,
) -> Vec<DocumentVector> {
    raw_docs
        .iter()
        .map(|doc| {
            DocumentVector::from_counts(
                doc.iter()
                    .filter_map(|(t, &c)| vocabulary.index_of(t).map(|i| (i, c))),
            )
        })
        .collect()
}
