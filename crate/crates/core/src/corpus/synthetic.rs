//! Planted topic-mixture corpus generator.
//!
//! Every reviewer and paper draws a mixture over topics; the true
//! suitability is the cosine affinity of the two mixtures scaled to the score
//! range and rounded. Documents are bags of words sampled from the
//! topic-specific word distributions, so word features carry real (noisy)
//! signal about suitability.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Exp1, Gamma};

use super::{
    build_vocabulary, project_documents, Corpus, CorpusError, IdMap, Key, RawDocument,
    ScoreMatrix, ScoreRange, Vocabulary,
};
use crate::seed::SeedStream;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_reviewers: usize,
    pub n_papers: usize,
    pub n_topics: usize,
    pub obs_per_reviewer: usize,
    pub seed: u64,
    /// Dirichlet concentration of the reviewer and paper topic mixtures.
    pub concentration: f64,
    pub words_per_topic: usize,
    pub common_words: usize,
    /// Probability that a token comes from its topic's own words rather
    /// than the shared pool.
    pub topic_word_share: f64,
    pub paper_length: usize,
    pub archive_docs: usize,
    pub archive_length: usize,
    pub coi_per_reviewer: usize,
    pub vocab_size: usize,
    pub score_range: ScoreRange,
}

impl SyntheticConfig {
    pub fn new(
        n_reviewers: usize,
        n_papers: usize,
        n_topics: usize,
        obs_per_reviewer: usize,
        seed: u64,
    ) -> Self {
        SyntheticConfig {
            n_reviewers,
            n_papers,
            n_topics,
            obs_per_reviewer,
            seed,
            concentration: 0.3,
            words_per_topic: 30,
            common_words: 150,
            topic_word_share: 0.7,
            paper_length: 150,
            archive_docs: 3,
            archive_length: 150,
            coi_per_reviewer: 1,
            vocab_size: Vocabulary::DEFAULT_SIZE,
            score_range: ScoreRange::default(),
        }
    }
}

/// Topic-specific word distributions.
#[derive(Debug, Clone)]
pub struct TopicModel {
    words: Vec<String>,
    n_topics: usize,
    words_per_topic: usize,
    common_words: usize,
    topic_word_share: f64,
    topic_weights: Vec<WeightedIndex<f64>>,
}

impl TopicModel {
    pub fn new(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut words = Vec::new();
        for t in 0..cfg.n_topics {
            for j in 0..cfg.words_per_topic {
                words.push(format!("t{t}w{j}"));
            }
        }
        for j in 0..cfg.common_words {
            words.push(format!("c{j}"));
        }
        let topic_weights = (0..cfg.n_topics)
            .map(|_| {
                let w: Vec<f64> = (0..cfg.words_per_topic)
                    .map(|_| {
                        let e: f64 = Exp1.sample(rng);
                        e + 1e-3
                    })
                    .collect();
                WeightedIndex::new(w).expect("positive weights")
            })
            .collect();
        TopicModel {
            words,
            n_topics: cfg.n_topics,
            words_per_topic: cfg.words_per_topic,
            common_words: cfg.common_words,
            topic_word_share: cfg.topic_word_share,
            topic_weights,
        }
    }

    pub fn n_topics(&self) -> usize {
        self.n_topics
    }

    /// Samples `length` tokens: topic from `mixture`, then a word.
    pub fn sample_document<R: Rng>(
        &self,
        mixture: &[f64],
        length: usize,
        rng: &mut R,
    ) -> BTreeMap<String, u64> {
        let topic_pick = WeightedIndex::new(mixture).expect("valid mixture");
        let mut counts = BTreeMap::new();
        for _ in 0..length {
            let t = topic_pick.sample(rng);
            let use_topic = self.common_words == 0
                || (self.words_per_topic > 0 && rng.random::<f64>() < self.topic_word_share);
            let w = if use_topic {
                t * self.words_per_topic + self.topic_weights[t].sample(rng)
            } else {
                self.n_topics * self.words_per_topic + rng.random_range(0..self.common_words)
            };
            *counts.entry(self.words[w].clone()).or_insert(0) += 1;
        }
        counts
    }
}

/// A generated corpus plus everything hidden from the learners.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Complete ground-truth matrix (every cell stored).
    pub truth: ScoreMatrix,
    pub raw_papers: Vec<RawDocument>,
    pub raw_archives: Vec<RawDocument>,
    pub reviewer_mixtures: Vec<Vec<f64>>,
    pub paper_mixtures: Vec<Vec<f64>>,
    pub topic_model: TopicModel,
}

fn sample_mixture(n_topics: usize, concentration: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut m: Vec<f64> = (0..n_topics).map(|_| gamma.sample(rng)).collect();
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        // every draw underflowed: fall back to a single random topic
        m.iter_mut().for_each(|x| *x = 0.0);
        m[rng.random_range(0..n_topics)] = 1.0;
        return m;
    }
    m.iter_mut().for_each(|x| *x /= total);
    m
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// True suitability of two mixtures.
pub fn planted_score(reviewer: &[f64], paper: &[f64], range: ScoreRange) -> f64 {
    let s = range.min + (range.max - range.min) * cosine(reviewer, paper);
    range.clip(s.round())
}

fn varied_length(base: usize, rng: &mut ChaCha8Rng) -> usize {
    if base == 0 {
        return 0;
    }
    base / 2 + rng.random_range(0..=base)
}

/// Builds a corpus from raw documents: vocabulary over every document, then
/// projection. Archive documents are grouped by reviewer id.
pub fn corpus_from_raw(
    raw_papers: &[RawDocument],
    raw_archives: &[RawDocument],
    scores: ScoreMatrix,
    coi: BTreeSet<Key>,
    reviewer_ids: IdMap,
    paper_ids: IdMap,
    vocab_size: usize,
) -> Result<Corpus, CorpusError> {
    let all: Vec<_> = raw_papers
        .iter()
        .chain(raw_archives)
        .map(|d| d.counts.clone())
        .collect();
    let vocabulary = if all.is_empty() {
        Vocabulary::default()
    } else {
        build_vocabulary(&all, vocab_size)?
    };
    let paper_docs = project_documents(&all[..raw_papers.len()], &vocabulary);
    let mut reviewer_archives = vec![Vec::new(); reviewer_ids.len()];
    let projected = project_documents(&all[raw_papers.len()..], &vocabulary);
    for (raw, doc) in raw_archives.iter().zip(projected) {
        let r = reviewer_ids.get(&raw.id).ok_or_else(|| {
            CorpusError::InvalidArgument(format!("archive for unknown reviewer {:?}", raw.id))
        })?;
        reviewer_archives[r].push(doc);
    }
    Corpus::new(
        vocabulary,
        paper_docs,
        reviewer_archives,
        scores,
        coi,
        reviewer_ids,
        paper_ids,
    )
}

pub fn reviewer_id(r: usize) -> String {
    format!("r{r:03}")
}

pub fn paper_id(p: usize) -> String {
    format!("p{p:04}")
}

/// Generates a planted corpus. Deterministic in `cfg.seed`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticCorpus, CorpusError> {
    if cfg.n_reviewers == 0 || cfg.n_papers == 0 || cfg.n_topics == 0 || cfg.obs_per_reviewer == 0
    {
        return Err(CorpusError::InvalidArgument(
            "synthetic corpus sizes must all be >= 1".into(),
        ));
    }
    if !(cfg.concentration > 0.0) {
        return Err(CorpusError::InvalidArgument("concentration must be > 0".into()));
    }
    if cfg.words_per_topic + cfg.common_words == 0 {
        return Err(CorpusError::InvalidArgument("empty word pool".into()));
    }
    let root = SeedStream::new(cfg.seed).derive("synthetic");
    let topic_model = TopicModel::new(cfg, &mut root.derive("topics").rng());

    let mut mix_rng = root.derive("mixtures").rng();
    let reviewer_mixtures: Vec<Vec<f64>> = (0..cfg.n_reviewers)
        .map(|_| sample_mixture(cfg.n_topics, cfg.concentration, &mut mix_rng))
        .collect();
    let paper_mixtures: Vec<Vec<f64>> = (0..cfg.n_papers)
        .map(|_| sample_mixture(cfg.n_topics, cfg.concentration, &mut mix_rng))
        .collect();

    let range = cfg.score_range;
    let mut truth = ScoreMatrix::new(cfg.n_reviewers, cfg.n_papers, range);
    for (r, rm) in reviewer_mixtures.iter().enumerate() {
        for (p, pm) in paper_mixtures.iter().enumerate() {
            truth.insert(r, p, planted_score(rm, pm, range))?;
        }
    }

    let mut coi = BTreeSet::new();
    if cfg.n_reviewers >= 2 {
        let mut rng = root.derive("coi").rng();
        let k = cfg.coi_per_reviewer.min(cfg.n_papers);
        for r in 0..cfg.n_reviewers {
            for p in sample(&mut rng, cfg.n_papers, k) {
                coi.insert((r, p));
            }
        }
    }

    let mut scores = ScoreMatrix::new(cfg.n_reviewers, cfg.n_papers, range);
    let mut obs_rng = root.derive("observed").rng();
    for r in 0..cfg.n_reviewers {
        let candidates: Vec<usize> = (0..cfg.n_papers).filter(|&p| !coi.contains(&(r, p))).collect();
        let k = cfg.obs_per_reviewer.min(candidates.len());
        let mut chosen: Vec<usize> = sample(&mut obs_rng, candidates.len(), k)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        chosen.sort_unstable();
        for p in chosen {
            scores.insert(r, p, truth.get(r, p).expect("dense truth"))?;
        }
    }

    let mut doc_rng = root.derive("documents").rng();
    let raw_papers: Vec<RawDocument> = paper_mixtures
        .iter()
        .enumerate()
        .map(|(p, m)| {
            let len = varied_length(cfg.paper_length, &mut doc_rng);
            RawDocument {
                id: paper_id(p),
                counts: topic_model.sample_document(m, len, &mut doc_rng),
            }
        })
        .collect();
    let mut raw_archives = Vec::new();
    for (r, m) in reviewer_mixtures.iter().enumerate() {
        for _ in 0..cfg.archive_docs {
            let len = varied_length(cfg.archive_length, &mut doc_rng);
            raw_archives.push(RawDocument {
                id: reviewer_id(r),
                counts: topic_model.sample_document(m, len, &mut doc_rng),
            });
        }
    }

    let reviewer_ids = IdMap::from_names((0..cfg.n_reviewers).map(reviewer_id));
    let paper_ids = IdMap::from_names((0..cfg.n_papers).map(paper_id));
    let corpus = corpus_from_raw(
        &raw_papers,
        &raw_archives,
        scores,
        coi,
        reviewer_ids,
        paper_ids,
        cfg.vocab_size,
    )?;
    Ok(SyntheticCorpus {
        corpus,
        truth,
        raw_papers,
        raw_archives,
        reviewer_mixtures,
        paper_mixtures,
        topic_model,
    })
}
