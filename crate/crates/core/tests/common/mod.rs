//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use revmatch::corpus::{DocumentVector, Observation};
use revmatch::{Key, MatchProblem, PenaltyShape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores on a quarter grid in `[0, 3]`, so sums are exact in binary.
pub fn dyadic_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.random_range(0..=12) as f64 * 0.25)
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn penalty(shape: PenaltyShape, x: f64) -> f64 {
    match shape {
        PenaltyShape::Abs => x.abs(),
        PenaltyShape::Square => x * x,
    }
}

/// Objective written out from the program's definition: utilities summed
/// over pairs in sorted order, minus lambda times the sorted penalty terms.
pub fn oracle_objective(problem: &MatchProblem, pairs: &BTreeSet<Key>) -> f64 {
    let n = problem.suitability.nrows();
    let m = problem.suitability.ncols();
    let mut gain = 0.0;
    for &(r, p) in pairs {
        let s = problem.suitability[(r, p)];
        gain += match &problem.transform {
            Some(t) => t.apply(s),
            None => s,
        };
    }
    if problem.lambda == 0.0 {
        return gain;
    }
    let xbar = (m * problem.r_target) as f64 / n as f64;
    let mut loads = vec![0usize; n];
    for &(r, _) in pairs {
        loads[r] += 1;
    }
    let mut terms: Vec<f64> = loads
        .iter()
        .map(|&l| penalty(problem.penalty, l as f64 - xbar))
        .collect();
    terms.sort_by(f64::total_cmp);
    gain - problem.lambda * terms.iter().sum::<f64>()
}

/// Every feasible pair set of the problem.
pub fn feasible_assignments(problem: &MatchProblem) -> Vec<BTreeSet<Key>> {
    let n = problem.suitability.nrows();
    let m = problem.suitability.ncols();
    let options: Vec<Vec<Vec<usize>>> = (0..m)
        .map(|p| {
            let allowed: Vec<usize> = (0..n)
                .filter(|&r| {
                    problem.suitability[(r, p)] != f64::NEG_INFINITY
                        && !problem.coi.contains(&(r, p))
                })
                .collect();
            combinations(&allowed, problem.r_target)
        })
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; m];
    if options.iter().any(|o| o.is_empty()) {
        return out;
    }
    loop {
        let mut loads = vec![0usize; n];
        let mut pairs = BTreeSet::new();
        for p in 0..m {
            for &r in &options[p][choice[p]] {
                loads[r] += 1;
                pairs.insert((r, p));
            }
        }
        if loads
            .iter()
            .all(|&l| l >= problem.p_min && l <= problem.p_max)
        {
            out.push(pairs);
        }
        let mut i = 0;
        loop {
            if i == m {
                return out;
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Best objective by exhaustive enumeration, with every optimal pair set.
pub fn brute_force(problem: &MatchProblem) -> Option<(f64, Vec<BTreeSet<Key>>)> {
    let all = feasible_assignments(problem);
    let best = all
        .iter()
        .map(|a| oracle_objective(problem, a))
        .fold(f64::NEG_INFINITY, f64::max);
    if all.is_empty() {
        return None;
    }
    let winners = all
        .into_iter()
        .filter(|a| oracle_objective(problem, a) == best)
        .collect();
    Some((best, winners))
}

/// Random small instance with `r_target = 1` and load bounds that satisfy
/// the arithmetic condition.
pub fn random_instance(rng: &mut ChaCha8Rng, n_range: (usize, usize), m_range: (usize, usize)) -> MatchProblem {
    let n = rng.random_range(n_range.0..=n_range.1);
    let m = rng.random_range(m_range.0..=m_range.1);
    let s = dyadic_matrix(rng, n, m);
    let lo = m / n;
    let hi = m.div_ceil(n);
    let p_min = rng.random_range(0..=lo);
    let p_max = rng.random_range(hi..=m);
    MatchProblem::new(s, 1, p_min, p_max)
}

/// Per-reviewer planted linear data over sparse random counts,
/// `s = theta . x + 1.5 + noise`, labels left unclipped. Every reviewer
/// gets its own papers.
pub struct PlantedLinear {
    pub docs: Vec<DocumentVector>,
    pub train: Vec<Observation>,
    pub test: Vec<Observation>,
    pub n_features: usize,
}

pub fn planted_linear(
    seed: u64,
    n_reviewers: usize,
    n_features: usize,
    n_train: usize,
    n_test: usize,
    noise: f64,
) -> PlantedLinear {
    let mut rng = rng(seed);
    let n_docs = n_reviewers * (n_train + n_test);
    let docs: Vec<DocumentVector> = (0..n_docs)
        .map(|_| {
            let mut counts = Vec::new();
            for t in 0..n_features {
                if rng.random_bool(0.3) {
                    counts.push((t, rng.random_range(1..=4)));
                }
            }
            DocumentVector::from_counts(counts)
        })
        .collect();
    let noise = (noise > 0.0).then(|| Normal::new(0.0, noise).unwrap());
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut next_doc = 0;
    for r in 0..n_reviewers {
        // keep responses well inside [0, 3] so clipping never bites
        let theta: Vec<f64> = (0..n_features)
            .map(|_| rng.random_range(-0.02..0.02))
            .collect();
        let bias = 1.5;
        for i in 0..(n_train + n_test) {
            let p = next_doc;
            next_doc += 1;
            let clean: f64 = bias
                + docs[p]
                    .iter()
                    .map(|(t, c)| theta[t] * c as f64)
                    .sum::<f64>();
            let eps = noise.map_or(0.0, |z| z.sample(&mut rng));
            let o = Observation {
                reviewer: r,
                paper: p,
                score: clean + eps,
            };
            if i < n_train {
                train.push(o);
            } else {
                test.push(o);
            }
        }
    }
    PlantedLinear {
        docs,
        train,
        test,
        n_features,
    }
}

/// Planted low-rank scores `a_r . b_p` plus Gaussian noise, clipped to
/// `[0, 3]`, with roughly `frac` of the cells observed.
pub struct PlantedLowRank {
    pub n: usize,
    pub m: usize,
    pub observed: Vec<Observation>,
    pub hidden: Vec<Observation>,
}

pub fn planted_low_rank(seed: u64, n: usize, m: usize, k: usize, noise: f64, frac: f64) -> PlantedLowRank {
    let mut rng = rng(seed);
    let a = DMatrix::from_fn(k, n, |_, _| rng.random_range(0.3..1.2));
    let b = DMatrix::from_fn(k, m, |_, _| rng.random_range(0.0..1.5));
    let z = Normal::new(0.0, noise).unwrap();
    let mut observed = Vec::new();
    let mut hidden = Vec::new();
    for r in 0..n {
        for p in 0..m {
            let clean = a.column(r).dot(&b.column(p));
            let s = (clean + z.sample(&mut rng)).clamp(0.0, 3.0);
            let o = Observation {
                reviewer: r,
                paper: p,
                score: s,
            };
            if rng.random_bool(frac) {
                observed.push(o);
            } else {
                hidden.push(o);
            }
        }
    }
    PlantedLowRank {
        n,
        m,
        observed,
        hidden,
    }
}
