use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use super::{CorpusError, Key, Observation, ScoreRange};

/// Sparse reviewer × paper suitability scores. Stored keys are the observed
/// set; every other cell is unobserved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_reviewers: usize,
    n_papers: usize,
    entries: BTreeMap<Key, f64>,
    range: ScoreRange,
}

impl ScoreMatrix {
    pub fn new(n_reviewers: usize, n_papers: usize, range: ScoreRange) -> Self {
        ScoreMatrix {
            n_reviewers,
            n_papers,
            entries: BTreeMap::new(),
            range,
        }
    }

    pub fn from_observations<I: IntoIterator<Item = Observation>>(
        n_reviewers: usize,
        n_papers: usize,
        range: ScoreRange,
        observations: I,
    ) -> Result<Self, CorpusError> {
        let mut m = ScoreMatrix::new(n_reviewers, n_papers, range);
        for o in observations {
            m.insert(o.reviewer, o.paper, o.score)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, reviewer: usize, paper: usize, score: f64) -> Result<(), CorpusError> {
        if reviewer >= self.n_reviewers || paper >= self.n_papers {
            return Err(CorpusError::InvalidArgument(format!(
                "({reviewer}, {paper}) outside {}x{}",
                self.n_reviewers, self.n_papers
            )));
        }
        if !self.range.contains(score) {
            return Err(CorpusError::OutOfRange {
                line: 0,
                score,
                min: self.range.min,
                max: self.range.max,
            });
        }
        if self.entries.insert((reviewer, paper), score).is_some() {
            return Err(CorpusError::Duplicate {
                line: 0,
                reviewer: reviewer.to_string(),
                paper: paper.to_string(),
            });
        }
        Ok(())
    }

    pub(crate) fn grow(&mut self, n_reviewers: usize, n_papers: usize) {
        self.n_reviewers = self.n_reviewers.max(n_reviewers);
        self.n_papers = self.n_papers.max(n_papers);
    }

    pub fn n_reviewers(&self) -> usize {
        self.n_reviewers
    }

    pub fn n_papers(&self) -> usize {
        self.n_papers
    }

    pub fn range(&self) -> ScoreRange {
        self.range
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, reviewer: usize, paper: usize) -> Option<f64> {
        self.entries.get(&(reviewer, paper)).copied()
    }

    pub fn contains(&self, key: Key) -> bool {
        self.entries.contains_key(&key)
    }

    /// Observed keys in `(reviewer, paper)` order.
    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        self.entries.keys().copied()
    }

    pub fn key_set(&self) -> BTreeSet<Key> {
        self.entries.keys().copied().collect()
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.entries.iter().map(|(&(reviewer, paper), &score)| Observation {
            reviewer,
            paper,
            score,
        })
    }

    pub fn reviewer_entries(&self, reviewer: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries
            .range((reviewer, 0)..(reviewer + 1, 0))
            .map(|(&(_, p), &s)| (p, s))
    }

    pub fn reviewer_count(&self, reviewer: usize) -> usize {
        self.reviewer_entries(reviewer).count()
    }

    /// The sub-matrix holding only `keys` (keys not present are ignored).
    pub fn restrict<'a, I: IntoIterator<Item = &'a Key>>(&self, keys: I) -> ScoreMatrix {
        let entries = keys
            .into_iter()
            .filter_map(|k| self.entries.get(k).map(|&s| (*k, s)))
            .collect();
        ScoreMatrix {
            n_reviewers: self.n_reviewers,
            n_papers: self.n_papers,
            entries,
            range: self.range,
        }
    }

    /// Dense copy with `fill` in every unobserved cell.
    pub fn to_dense(&self, fill: f64) -> DMatrix<f64> {
        let mut m = DMatrix::from_element(self.n_reviewers, self.n_papers, fill);
        for (&(r, p), &s) in &self.entries {
            m[(r, p)] = s;
        }
        m
    }

    pub fn mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.values().sum::<f64>() / self.entries.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_validates() {
        let mut m = ScoreMatrix::new(2, 2, ScoreRange::default());
        m.insert(0, 1, 2.0).unwrap();
        assert!(matches!(m.insert(0, 1, 1.0), Err(CorpusError::Duplicate { .. })));
        assert!(matches!(m.insert(1, 1, 4.0), Err(CorpusError::OutOfRange { .. })));
        assert!(m.insert(2, 0, 1.0).is_err());
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn reviewer_entries_and_dense() {
        let obs = [(0, 0, 3.0), (1, 0, 2.0), (1, 2, 1.0)].map(|(r, p, s)| Observation {
            reviewer: r,
            paper: p,
            score: s,
        });
        let m = ScoreMatrix::from_observations(2, 3, ScoreRange::default(), obs).unwrap();
        assert_eq!(m.reviewer_entries(1).collect::<Vec<_>>(), vec![(0, 2.0), (2, 1.0)]);
        let d = m.to_dense(-1.0);
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(0, 1)], -1.0);
        assert_eq!(m.mean(), Some(2.0));
        let r = m.restrict(&[(1, 2), (0, 2)]);
        assert_eq!(r.len(), 1);
    }
}
