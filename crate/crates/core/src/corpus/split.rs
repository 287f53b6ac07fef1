use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Key, ScoreMatrix};
use crate::seed::SeedStream;

/// One train / validation / test partition of the observed keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub split_id: usize,
    pub train: BTreeSet<Key>,
    pub validation: BTreeSet<Key>,
    pub test: BTreeSet<Key>,
}

impl DatasetSplit {
    pub fn train_count(&self, reviewer: usize) -> usize {
        self.train.range((reviewer, 0)..(reviewer + 1, 0)).count()
    }
}

// One key in four of the non-test remainder goes to validation.
const VALIDATION_STRIDE: usize = 4;

/// Partitions the observed keys into `n_splits` disjoint test folds,
/// stratified per reviewer, and carves a quarter of each split's remainder
/// into validation.
///
/// Fold assignment walks every reviewer's shuffled keys with one running
/// counter, so each reviewer lands `⌊c/n⌋` or `⌈c/n⌉` keys in every fold and
/// global fold sizes differ by at most one.
pub fn make_splits(
    scores: &ScoreMatrix,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<DatasetSplit>, CorpusError> {
    if n_splits < 2 {
        return Err(CorpusError::InvalidArgument(format!(
            "need at least 2 splits, got {n_splits}"
        )));
    }
    let mut rng = SeedStream::new(seed).derive("splits").rng();
    let mut per_reviewer: Vec<Vec<Key>> = Vec::with_capacity(scores.n_reviewers());
    for r in 0..scores.n_reviewers() {
        let mut keys: Vec<Key> = scores.reviewer_entries(r).map(|(p, _)| (r, p)).collect();
        if !keys.is_empty() && keys.len() < n_splits {
            return Err(CorpusError::TooFewObservations {
                reviewer: r,
                observed: keys.len(),
                required: n_splits,
            });
        }
        keys.shuffle(&mut rng);
        per_reviewer.push(keys);
    }

    let mut fold_of: BTreeMap<Key, usize> = BTreeMap::new();
    let mut counter = 0usize;
    for keys in &per_reviewer {
        for &k in keys {
            fold_of.insert(k, counter % n_splits);
            counter += 1;
        }
    }

    let splits = (0..n_splits)
        .map(|s| {
            let mut split = DatasetSplit {
                split_id: s,
                train: BTreeSet::new(),
                validation: BTreeSet::new(),
                test: BTreeSet::new(),
            };
            let mut rest = 0usize;
            for keys in &per_reviewer {
                for &k in keys {
                    if fold_of[&k] == s {
                        split.test.insert(k);
                    } else {
                        if rest % VALIDATION_STRIDE == VALIDATION_STRIDE - 1 {
                            split.validation.insert(k);
                        } else {
                            split.train.insert(k);
                        }
                        rest += 1;
                    }
                }
            }
            split
        })
        .collect();
    Ok(splits)
}

/// Keeps at most `k_per_reviewer` uniformly chosen training keys per
/// reviewer. Each reviewer's keys are shuffled independently of `k`, so the
/// kept sets are nested as the budget grows. Validation and test are
/// untouched.
pub fn subsample_train(split: &DatasetSplit, k_per_reviewer: usize, seed: u64) -> DatasetSplit {
    let mut by_reviewer: BTreeMap<usize, Vec<Key>> = BTreeMap::new();
    for &k in &split.train {
        by_reviewer.entry(k.0).or_default().push(k);
    }
    let stream = SeedStream::new(seed).derive("subsample");
    let mut train = BTreeSet::new();
    for (r, mut keys) in by_reviewer {
        keys.shuffle(&mut stream.derive_index("reviewer", r as u64).rng());
        train.extend(keys.into_iter().take(k_per_reviewer));
    }
    DatasetSplit {
        split_id: split.split_id,
        train,
        validation: split.validation.clone(),
        test: split.test.clone(),
    }
}
