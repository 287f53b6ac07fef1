//! Probabilistic matrix factorization `S ~ U^T V`.
//!
//! [`fit_map`] finds the MAP factors by alternating exact ridge solves;
//! [`fit_bayes`] starts there and runs the Gibbs sampler with
//! Gaussian–Wishart hyperpriors on the factor means and precisions,
//! keeping every post-burn-in draw.

mod sampling;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Observation, ScoreRange};
use crate::seed::SeedStream;

pub use sampling::{mvn_from_precision_chol, wishart};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BpmfError {
    #[error("latent rank must satisfy 1 <= K <= min(N, M) = {limit}, got {rank}")]
    InvalidRank { rank: usize, limit: usize },
    #[error("variances must be finite and > 0")]
    InvalidVariance,
    #[error("need n_samples > n_burnin, got {n_samples} samples and {n_burnin} burn-in")]
    InvalidSampleCounts { n_samples: usize, n_burnin: usize },
    #[error("invalid Gaussian-Wishart prior: {0}")]
    InvalidPrior(String),
    #[error("observation ({reviewer}, {paper}) outside {n_reviewers}x{n_papers}")]
    OutOfRange {
        reviewer: usize,
        paper: usize,
        n_reviewers: usize,
        n_papers: usize,
    },
    #[error("posterior precision lost positive definiteness")]
    NotPositiveDefinite,
}

/// Gaussian–Wishart hyperprior on one side's factor mean and precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWishart {
    /// Every component of `mu0`.
    pub mu0: f64,
    pub beta0: f64,
    /// `W0 = w0_scale * I`.
    pub w0_scale: f64,
    /// Degrees of freedom; `None` means `K`.
    pub nu0: Option<f64>,
}

impl Default for GaussianWishart {
    fn default() -> Self {
        GaussianWishart {
            mu0: 0.0,
            beta0: 2.0,
            w0_scale: 1.0,
            nu0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpmfConfig {
    pub rank: usize,
    /// Observation noise variance; the sampler uses precision `1 / sigma2`.
    pub sigma2: f64,
    pub sigma_u2: f64,
    pub sigma_v2: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
    pub init_scale: f64,
    pub n_samples: usize,
    pub n_burnin: usize,
    pub prior_u: GaussianWishart,
    pub prior_v: GaussianWishart,
    pub score_range: ScoreRange,
}

impl Default for BpmfConfig {
    fn default() -> Self {
        BpmfConfig {
            rank: 10,
            sigma2: 0.5,
            sigma_u2: 1.0,
            sigma_v2: 1.0,
            max_sweeps: 200,
            tolerance: 1e-8,
            init_scale: 0.1,
            n_samples: 330,
            n_burnin: 30,
            prior_u: GaussianWishart::default(),
            prior_v: GaussianWishart::default(),
            score_range: ScoreRange::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Variant {
    Map,
    Bayes { samples: Vec<(DMatrix<f64>, DMatrix<f64>)> },
}

#[derive(Debug, Clone)]
pub struct BpmfModel {
    /// `K x N` reviewer factors (MAP solution, or the last Gibbs state).
    pub u: DMatrix<f64>,
    /// `K x M` paper factors.
    pub v: DMatrix<f64>,
    pub variant: Variant,
    /// MAP objective before the first sweep and after every sweep.
    pub objective_trace: Vec<f64>,
    pub config: BpmfConfig,
}

struct Observed {
    by_reviewer: Vec<Vec<(usize, f64)>>,
    by_paper: Vec<Vec<(usize, f64)>>,
}

fn index_observations(
    train: &[Observation],
    n_reviewers: usize,
    n_papers: usize,
) -> Result<Observed, BpmfError> {
    let mut by_reviewer = vec![Vec::new(); n_reviewers];
    let mut by_paper = vec![Vec::new(); n_papers];
    for o in train {
        if o.reviewer >= n_reviewers || o.paper >= n_papers {
            return Err(BpmfError::OutOfRange {
                reviewer: o.reviewer,
                paper: o.paper,
                n_reviewers,
                n_papers,
            });
        }
        by_reviewer[o.reviewer].push((o.paper, o.score));
        by_paper[o.paper].push((o.reviewer, o.score));
    }
    Ok(Observed {
        by_reviewer,
        by_paper,
    })
}

fn check_config(cfg: &BpmfConfig, n_reviewers: usize, n_papers: usize) -> Result<(), BpmfError> {
    let limit = n_reviewers.min(n_papers);
    if cfg.rank == 0 || (limit > 0 && cfg.rank > limit) {
        return Err(BpmfError::InvalidRank {
            rank: cfg.rank,
            limit,
        });
    }
    let ok = |x: f64| x.is_finite() && x > 0.0;
    if !(ok(cfg.sigma2) && ok(cfg.sigma_u2) && ok(cfg.sigma_v2)) {
        return Err(BpmfError::InvalidVariance);
    }
    Ok(())
}

/// Ridge solve of one factor column against the fixed other side.
fn ridge_column(
    other: &DMatrix<f64>,
    entries: &[(usize, f64)],
    reg: f64,
) -> DVector<f64> {
    let k = other.nrows();
    let mut a = DMatrix::<f64>::identity(k, k) * reg;
    let mut b = DVector::<f64>::zeros(k);
    for &(j, s) in entries {
        let col = other.column(j);
        a.ger(1.0, &col, &col, 1.0);
        b.axpy(s, &col, 1.0);
    }
    a.cholesky()
        .expect("ridge system is positive definite")
        .solve(&b)
}

fn map_objective(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    obs: &Observed,
    reg_u: f64,
    reg_v: f64,
) -> f64 {
    let mut sse = 0.0;
    for (r, entries) in obs.by_reviewer.iter().enumerate() {
        for &(p, s) in entries {
            let e = u.column(r).dot(&v.column(p)) - s;
            sse += e * e;
        }
    }
    sse + reg_u * u.norm_squared() + reg_v * v.norm_squared()
}

/// MAP factors by alternating ridge regression.
///
/// Minimises `sum (U_r.V_p - s)^2 + (s2/su2)|U|^2 + (s2/sv2)|V|^2`. Paper
/// factors start at `N(0, init_scale^2)`; reviewer factors are solved first,
/// so their initial value never matters. Each half-sweep is an exact
/// minimisation, so the objective never increases.
pub fn fit_map(
    train: &[Observation],
    n_reviewers: usize,
    n_papers: usize,
    config: &BpmfConfig,
    seed: u64,
) -> Result<BpmfModel, BpmfError> {
    check_config(config, n_reviewers, n_papers)?;
    let obs = index_observations(train, n_reviewers, n_papers)?;
    let k = config.rank;
    let reg_u = config.sigma2 / config.sigma_u2;
    let reg_v = config.sigma2 / config.sigma_v2;

    let mut rng = SeedStream::new(seed).derive("bpmf/init").rng();
    let mut v = DMatrix::from_fn(k, n_papers, |_, _| {
        config.init_scale * rng.sample::<f64, _>(StandardNormal)
    });
    let mut u = DMatrix::zeros(k, n_reviewers);

    let mut trace = vec![map_objective(&u, &v, &obs, reg_u, reg_v)];
    for _ in 0..config.max_sweeps {
        for r in 0..n_reviewers {
            let col = ridge_column(&v, &obs.by_reviewer[r], reg_u);
            u.set_column(r, &col);
        }
        for p in 0..n_papers {
            let col = ridge_column(&u, &obs.by_paper[p], reg_v);
            v.set_column(p, &col);
        }
        let f = map_objective(&u, &v, &obs, reg_u, reg_v);
        let prev = *trace.last().expect("non-empty trace");
        trace.push(f);
        if prev - f < config.tolerance {
            break;
        }
    }
    Ok(BpmfModel {
        u,
        v,
        variant: Variant::Map,
        objective_trace: trace,
        config: *config,
    })
}

/// Draws `(mu, Lambda)` for one side given its current factor columns.
fn sample_hyper<R: Rng>(
    factors: &DMatrix<f64>,
    prior: &GaussianWishart,
    rng: &mut R,
) -> Result<(DVector<f64>, DMatrix<f64>), BpmfError> {
    let (k, c) = factors.shape();
    let mu0 = DVector::from_element(k, prior.mu0);
    let nu0 = prior.nu0.unwrap_or(k as f64);
    let w0_inv = DMatrix::<f64>::identity(k, k) / prior.w0_scale;
    let cf = c as f64;

    let mean: DVector<f64> = if c > 0 {
        factors.column_sum() / cf
    } else {
        DVector::zeros(k)
    };
    let mut scatter = DMatrix::<f64>::zeros(k, k);
    for j in 0..c {
        let d = factors.column(j) - &mean;
        scatter.ger(1.0, &d, &d, 1.0);
    }
    let beta_n = prior.beta0 + cf;
    let nu_n = nu0 + cf;
    let mu_n = (&mu0 * prior.beta0 + &mean * cf) / beta_n;
    let diff = &mu0 - &mean;
    let w_n_inv = w0_inv + scatter + (&diff * diff.transpose()) * (prior.beta0 * cf / beta_n);
    let w_n_inv = (&w_n_inv + w_n_inv.transpose()) * 0.5;
    let w_n = w_n_inv
        .try_inverse()
        .ok_or(BpmfError::NotPositiveDefinite)?;
    let lambda = wishart(&w_n, nu_n, rng).ok_or(BpmfError::NotPositiveDefinite)?;
    let prec_mu = &lambda * beta_n;
    let l = prec_mu
        .cholesky()
        .ok_or(BpmfError::NotPositiveDefinite)?
        .unpack();
    let mu = mvn_from_precision_chol(&mu_n, &l, rng);
    Ok((mu, lambda))
}

/// Draws every column of `target` from its Gaussian conditional.
fn sample_side<R: Rng>(
    target: &mut DMatrix<f64>,
    other: &DMatrix<f64>,
    entries: &[Vec<(usize, f64)>],
    mu: &DVector<f64>,
    lambda: &DMatrix<f64>,
    alpha: f64,
    rng: &mut R,
) -> Result<(), BpmfError> {
    let prior_term = lambda * mu;
    for (i, list) in entries.iter().enumerate() {
        let mut prec = lambda.clone();
        let mut b = prior_term.clone();
        for &(j, s) in list {
            let col = other.column(j);
            prec.ger(alpha, &col, &col, 1.0);
            b.axpy(alpha * s, &col, 1.0);
        }
        let chol = prec.cholesky().ok_or(BpmfError::NotPositiveDefinite)?;
        let mean = chol.solve(&b);
        let draw = mvn_from_precision_chol(&mean, &chol.unpack(), rng);
        target.set_column(i, &draw);
    }
    Ok(())
}

/// Gibbs sampler initialised from [`fit_map`]. `n_samples` counts every
/// sweep including the `n_burnin` discarded ones.
pub fn fit_bayes(
    train: &[Observation],
    n_reviewers: usize,
    n_papers: usize,
    config: &BpmfConfig,
    seed: u64,
) -> Result<BpmfModel, BpmfError> {
    if config.n_samples <= config.n_burnin {
        return Err(BpmfError::InvalidSampleCounts {
            n_samples: config.n_samples,
            n_burnin: config.n_burnin,
        });
    }
    for p in [&config.prior_u, &config.prior_v] {
        let nu0 = p.nu0.unwrap_or(config.rank as f64);
        if !(p.beta0 > 0.0 && p.w0_scale > 0.0 && nu0 > config.rank as f64 - 1.0) {
            return Err(BpmfError::InvalidPrior(format!(
                "beta0={}, w0_scale={}, nu0={nu0} for K={}",
                p.beta0, p.w0_scale, config.rank
            )));
        }
    }
    let map = fit_map(train, n_reviewers, n_papers, config, seed)?;
    let obs = index_observations(train, n_reviewers, n_papers)?;
    let alpha = 1.0 / config.sigma2;
    let mut rng = SeedStream::new(seed).derive("bpmf/gibbs").rng();

    let mut u = map.u.clone();
    let mut v = map.v.clone();
    let mut samples = Vec::with_capacity(config.n_samples - config.n_burnin);
    for t in 0..config.n_samples {
        let (mu_u, lambda_u) = sample_hyper(&u, &config.prior_u, &mut rng)?;
        let (mu_v, lambda_v) = sample_hyper(&v, &config.prior_v, &mut rng)?;
        sample_side(&mut u, &v, &obs.by_reviewer, &mu_u, &lambda_u, alpha, &mut rng)?;
        sample_side(&mut v, &u, &obs.by_paper, &mu_v, &lambda_v, alpha, &mut rng)?;
        if t >= config.n_burnin {
            samples.push((u.clone(), v.clone()));
        }
    }
    Ok(BpmfModel {
        u,
        v,
        variant: Variant::Bayes { samples },
        objective_trace: map.objective_trace,
        config: *config,
    })
}

impl BpmfModel {
    pub fn n_reviewers(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_papers(&self) -> usize {
        self.v.ncols()
    }

    pub fn samples(&self) -> &[(DMatrix<f64>, DMatrix<f64>)] {
        match &self.variant {
            Variant::Map => &[],
            Variant::Bayes { samples } => samples,
        }
    }

    /// MAP: `clip(U_r . V_p)`. Bayes: mean over retained draws of the clipped
    /// per-draw product.
    pub fn predict(&self, reviewer: usize, paper: usize) -> f64 {
        let range = self.config.score_range;
        match &self.variant {
            Variant::Map => range.clip(self.u.column(reviewer).dot(&self.v.column(paper))),
            Variant::Bayes { samples } => {
                samples
                    .iter()
                    .map(|(u, v)| range.clip(u.column(reviewer).dot(&v.column(paper))))
                    .sum::<f64>()
                    / samples.len() as f64
            }
        }
    }

    /// All predictions as an `N x M` matrix.
    pub fn predict_matrix(&self) -> DMatrix<f64> {
        let range = self.config.score_range;
        match &self.variant {
            Variant::Map => (self.u.tr_mul(&self.v)).map(|x| range.clip(x)),
            Variant::Bayes { samples } => {
                let mut acc = DMatrix::zeros(self.n_reviewers(), self.n_papers());
                for (u, v) in samples {
                    acc += u.tr_mul(v).map(|x| range.clip(x));
                }
                acc / samples.len() as f64
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(u: DMatrix<f64>, v: DMatrix<f64>, variant: Variant) -> BpmfModel {
        BpmfModel {
            u,
            v,
            variant,
            objective_trace: vec![],
            config: BpmfConfig::default(),
        }
    }

    #[test]
    fn dot_product_and_clip() {
        let m = model_with(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_column_slice(2, 2, &[2.0, 5.0, 7.0, 0.0]),
            Variant::Map,
        );
        assert_eq!(m.predict(0, 0), 2.0);
        assert_eq!(m.predict(0, 1), 3.0);
        assert_eq!(m.predict_matrix()[(0, 1)], 3.0);
    }

    #[test]
    fn bayes_prediction_is_mean_of_clipped_draws() {
        let u = DMatrix::from_element(1, 1, 1.0);
        let samples = vec![
            (u.clone(), DMatrix::from_element(1, 1, 1.0)),
            (u.clone(), DMatrix::from_element(1, 1, 2.0)),
        ];
        let m = model_with(u.clone(), u, Variant::Bayes { samples });
        assert_eq!(m.predict(0, 0), 1.5);
        let samples = vec![
            (DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 9.0)),
            (DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, -4.0)),
        ];
        let m = model_with(samples[0].0.clone(), samples[0].1.clone(), Variant::Bayes { samples });
        // clip(9) = 3 and clip(-4) = 0, not clip(2.5)
        assert_eq!(m.predict(0, 0), 1.5);
    }

    #[test]
    fn no_observations_shrinks_to_zero() {
        let cfg = BpmfConfig {
            rank: 2,
            ..BpmfConfig::default()
        };
        let m = fit_map(&[], 3, 4, &cfg, 1).unwrap();
        assert_eq!(m.u.amax(), 0.0);
        assert_eq!(m.v.amax(), 0.0);
        assert!(m.predict_matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        let bad_rank = BpmfConfig {
            rank: 0,
            ..BpmfConfig::default()
        };
        assert!(matches!(fit_map(&[], 3, 3, &bad_rank, 0), Err(BpmfError::InvalidRank { .. })));
        let too_big = BpmfConfig {
            rank: 4,
            ..BpmfConfig::default()
        };
        assert!(fit_map(&[], 3, 9, &too_big, 0).is_err());
        let bad_var = BpmfConfig {
            rank: 1,
            sigma2: 0.0,
            ..BpmfConfig::default()
        };
        assert_eq!(fit_map(&[], 3, 3, &bad_var, 0).unwrap_err(), BpmfError::InvalidVariance);
        let bad_samples = BpmfConfig {
            rank: 1,
            n_samples: 5,
            n_burnin: 5,
            ..BpmfConfig::default()
        };
        assert!(matches!(
            fit_bayes(&[], 3, 3, &bad_samples, 0),
            Err(BpmfError::InvalidSampleCounts { .. })
        ));
    }

    #[test]
    fn default_sample_counts() {
        let c = BpmfConfig::default();
        assert_eq!((c.n_samples, c.n_burnin), (330, 30));
    }
}
