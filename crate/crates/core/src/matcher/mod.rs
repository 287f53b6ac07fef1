//! Exact assignment of papers to reviewers.
//!
//! Both programs reduce to a min-cost flow:
//!
//! ```text
//! SS --(F - N*p_min)--> S --(load arcs)--> r --(1, -g(s_rp))--> p --(r_target)--> T
//! SS --(p_min)--------------------------> r
//! ```
//!
//! where `F = M * r_target`. Forcing all `F` units through the network
//! saturates every `SS -> r` arc, which enforces the lower load bound. The
//! load arcs carry the balance penalty: with `lambda > 0` each extra unit of
//! load above `p_min` gets its own unit arc priced at the marginal penalty,
//! which is nondecreasing because `f` is convex. Since the constraint matrix
//! is totally unimodular the flow is integral and optimal for the IP.

mod flow;
mod output;
mod verify;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::Key;
use crate::transform::TransformSpec;

pub use flow::FlowGraph;
pub use output::{write_assignment_csv, write_summary, MatchSummary};
pub use verify::{verify, Diagnostics, Violation};

/// Load penalty `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyShape {
    #[default]
    Abs,
    Square,
}

impl PenaltyShape {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            PenaltyShape::Abs => x.abs(),
            PenaltyShape::Square => x * x,
        }
    }
}

impl std::str::FromStr for PenaltyShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abs" => Ok(PenaltyShape::Abs),
            "square" => Ok(PenaltyShape::Square),
            other => Err(format!("unknown penalty shape '{other}' (expected abs or square)")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MatchError {
    #[error("p_min {p_min} exceeds p_max {p_max}")]
    InvalidBounds { p_min: usize, p_max: usize },
    #[error(
        "load bounds cannot cover demand: need N*p_min <= M*r_target <= N*p_max, \
         got {n_reviewers}*{p_min} <= {demand} <= {n_reviewers}*{p_max}"
    )]
    LoadArithmetic {
        n_reviewers: usize,
        p_min: usize,
        p_max: usize,
        demand: usize,
    },
    #[error("paper {paper} has {available} assignable reviewers but needs {required}")]
    StarvedPaper {
        paper: usize,
        available: usize,
        required: usize,
    },
    #[error("reviewer {reviewer} can take at most {available} papers but p_min is {p_min}")]
    StarvedReviewer {
        reviewer: usize,
        available: usize,
        p_min: usize,
    },
    #[error("no feasible assignment: reviewer {reviewer} cannot reach p_min {p_min}")]
    UnmetMinimum { reviewer: usize, p_min: usize },
    #[error("no feasible assignment: paper {paper} cannot receive {required} reviewers")]
    UncoveredPaper { paper: usize, required: usize },
    #[error("suitability ({reviewer}, {paper}) is {value}; only finite values or -inf are allowed")]
    InvalidScore {
        reviewer: usize,
        paper: usize,
        value: f64,
    },
    #[error("lambda must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error("conflict ({reviewer}, {paper}) is outside the {n_reviewers}x{n_papers} matrix")]
    CoiOutOfRange {
        reviewer: usize,
        paper: usize,
        n_reviewers: usize,
        n_papers: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchProblem {
    /// Untransformed `N x M` scores; `-inf` marks a forbidden pair.
    pub suitability: DMatrix<f64>,
    pub r_target: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub lambda: f64,
    pub penalty: PenaltyShape,
    pub transform: Option<TransformSpec>,
    pub coi: BTreeSet<Key>,
}

impl MatchProblem {
    pub fn new(suitability: DMatrix<f64>, r_target: usize, p_min: usize, p_max: usize) -> Self {
        MatchProblem {
            suitability,
            r_target,
            p_min,
            p_max,
            lambda: 0.0,
            penalty: PenaltyShape::Abs,
            transform: None,
            coi: BTreeSet::new(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64, penalty: PenaltyShape) -> Self {
        self.lambda = lambda;
        self.penalty = penalty;
        self
    }

    pub fn with_transform(mut self, transform: TransformSpec) -> Self {
        self.transform = if transform.is_identity() {
            None
        } else {
            Some(transform)
        };
        self
    }

    pub fn with_coi(mut self, coi: BTreeSet<Key>) -> Self {
        self.coi = coi;
        self
    }

    pub fn n_reviewers(&self) -> usize {
        self.suitability.nrows()
    }

    pub fn n_papers(&self) -> usize {
        self.suitability.ncols()
    }

    /// `x̄ = M * r_target / N`.
    pub fn mean_load(&self) -> f64 {
        if self.n_reviewers() == 0 {
            return 0.0;
        }
        (self.n_papers() * self.r_target) as f64 / self.n_reviewers() as f64
    }

    /// `g(s_rp)` the quantity the solver maximizes.
    pub fn utility(&self, reviewer: usize, paper: usize) -> f64 {
        let s = self.suitability[(reviewer, paper)];
        match &self.transform {
            Some(t) => t.apply(s),
            None => s,
        }
    }

    pub fn is_assignable(&self, reviewer: usize, paper: usize) -> bool {
        self.suitability[(reviewer, paper)] != f64::NEG_INFINITY
            && !self.coi.contains(&(reviewer, paper))
    }

    /// `lambda * sum_r f(L_r - x̄)`, terms summed in ascending order.
    pub fn penalty_value(&self, loads: &[usize]) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let xbar = self.mean_load();
        let mut terms: Vec<f64> = loads
            .iter()
            .map(|&l| self.penalty.eval(l as f64 - xbar))
            .collect();
        terms.sort_by(f64::total_cmp);
        self.lambda * terms.iter().sum::<f64>()
    }

    /// Objective of an arbitrary pair set, computed in canonical order:
    /// utilities over sorted pairs, minus the penalty.
    pub fn objective_of(&self, pairs: &BTreeSet<Key>) -> f64 {
        let gain: f64 = pairs.iter().map(|&(r, p)| self.utility(r, p)).sum();
        let loads = loads_of(pairs, self.n_reviewers());
        gain - self.penalty_value(&loads)
    }

    fn validate(&self) -> Result<(), MatchError> {
        let (n, m) = (self.n_reviewers(), self.n_papers());
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(MatchError::InvalidLambda(self.lambda));
        }
        if self.p_min > self.p_max {
            return Err(MatchError::InvalidBounds {
                p_min: self.p_min,
                p_max: self.p_max,
            });
        }
        let demand = m * self.r_target;
        if n * self.p_min > demand || demand > n * self.p_max {
            return Err(MatchError::LoadArithmetic {
                n_reviewers: n,
                p_min: self.p_min,
                p_max: self.p_max,
                demand,
            });
        }
        for &(r, p) in &self.coi {
            if r >= n || p >= m {
                return Err(MatchError::CoiOutOfRange {
                    reviewer: r,
                    paper: p,
                    n_reviewers: n,
                    n_papers: m,
                });
            }
        }
        for p in 0..m {
            for r in 0..n {
                let v = self.suitability[(r, p)];
                if v.is_nan() || v == f64::INFINITY {
                    return Err(MatchError::InvalidScore {
                        reviewer: r,
                        paper: p,
                        value: v,
                    });
                }
            }
        }
        for p in 0..m {
            let available = (0..n).filter(|&r| self.is_assignable(r, p)).count();
            if available < self.r_target {
                return Err(MatchError::StarvedPaper {
                    paper: p,
                    available,
                    required: self.r_target,
                });
            }
        }
        for r in 0..n {
            let available = (0..m).filter(|&p| self.is_assignable(r, p)).count();
            if available < self.p_min {
                return Err(MatchError::StarvedReviewer {
                    reviewer: r,
                    available,
                    p_min: self.p_min,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn loads_of(pairs: &BTreeSet<Key>, n_reviewers: usize) -> Vec<usize> {
    let mut loads = vec![0; n_reviewers];
    for &(r, _) in pairs {
        if r < n_reviewers {
            loads[r] += 1;
        }
    }
    loads
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted `(reviewer, paper)` pairs.
    pub pairs: BTreeSet<Key>,
    /// Penalized objective in utility (possibly transformed) space.
    pub objective_value: f64,
    /// `sum s_rp` over pairs, untransformed.
    pub raw_suitability_sum: f64,
    /// `lambda * sum_r f(L_r - x̄)`.
    pub penalty: f64,
    pub loads: Vec<usize>,
    pub n_papers: usize,
}

impl Assignment {
    /// Scores an arbitrary pair set against `problem` without checking
    /// feasibility; pair with [`verify`] for that.
    pub fn from_pairs(problem: &MatchProblem, pairs: BTreeSet<Key>) -> Self {
        let loads = loads_of(&pairs, problem.n_reviewers());
        Assignment {
            objective_value: problem.objective_of(&pairs),
            raw_suitability_sum: pairs
                .iter()
                .map(|&(r, p)| problem.suitability[(r, p)])
                .sum(),
            penalty: problem.penalty_value(&loads),
            loads,
            n_papers: problem.n_papers(),
            pairs,
        }
    }

    /// Dense `x_rp` decisions.
    pub fn decisions(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.loads.len(), self.n_papers);
        for &(r, p) in &self.pairs {
            x[(r, p)] = 1.0;
        }
        x
    }

    /// Reviewers of each paper, in reviewer order.
    pub fn by_paper(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_papers];
        for &(r, p) in &self.pairs {
            out[p].push(r);
        }
        out
    }
}

/// `sum_r (L_r - x̄)^2 / N` with `x̄ = M * r_target / N`.
pub fn load_variance(loads: &[usize], mean_load: f64) -> f64 {
    if loads.is_empty() {
        return 0.0;
    }
    loads
        .iter()
        .map(|&l| (l as f64 - mean_load).powi(2))
        .sum::<f64>()
        / loads.len() as f64
}

/// Basic program: maximize `sum g(s_rp) x_rp` under coverage and load
/// bounds. Any `lambda` on the problem is ignored.
pub fn solve_basic(problem: &MatchProblem) -> Result<Assignment, MatchError> {
    solve_with_lambda(problem, 0.0)
}

/// Balance program: maximize `sum g(s_rp) x_rp - lambda sum_r f(L_r - x̄)`
/// under the same hard constraints.
pub fn solve_balance(problem: &MatchProblem) -> Result<Assignment, MatchError> {
    solve_with_lambda(problem, problem.lambda)
}

/// Dispatches on `problem.lambda`.
pub fn solve(problem: &MatchProblem) -> Result<Assignment, MatchError> {
    if problem.lambda == 0.0 {
        solve_basic(problem)
    } else {
        solve_balance(problem)
    }
}

fn solve_with_lambda(problem: &MatchProblem, lambda: f64) -> Result<Assignment, MatchError> {
    let problem = if lambda == problem.lambda {
        std::borrow::Cow::Borrowed(problem)
    } else {
        let mut p = problem.clone();
        p.lambda = lambda;
        std::borrow::Cow::Owned(p)
    };
    let problem = problem.as_ref();
    problem.validate()?;

    let (n, m) = (problem.n_reviewers(), problem.n_papers());
    let demand = m * problem.r_target;
    let super_source = 0;
    let spare = 1;
    let reviewer_node = |r: usize| 2 + r;
    let paper_node = |p: usize| 2 + n + p;
    let sink = 2 + n + m;
    let mut g = FlowGraph::new(sink + 1);

    let extra = demand - n * problem.p_min;
    if extra > 0 {
        g.add_arc(super_source, spare, extra as i64, 0.0);
    }
    let xbar = problem.mean_load();
    for r in 0..n {
        if problem.p_min > 0 {
            g.add_arc(super_source, reviewer_node(r), problem.p_min as i64, 0.0);
        }
        let room = problem.p_max - problem.p_min;
        if room == 0 {
            continue;
        }
        if lambda == 0.0 {
            g.add_arc(spare, reviewer_node(r), room as i64, 0.0);
        } else {
            for k in problem.p_min..problem.p_max {
                let k = k as f64;
                let marginal = problem.penalty.eval(k + 1.0 - xbar) - problem.penalty.eval(k - xbar);
                g.add_arc(spare, reviewer_node(r), 1, lambda * marginal);
            }
        }
    }
    let mut pair_arcs = Vec::new();
    for r in 0..n {
        for p in 0..m {
            if problem.is_assignable(r, p) {
                let id = g.add_arc(reviewer_node(r), paper_node(p), 1, -problem.utility(r, p));
                pair_arcs.push((id, (r, p)));
            }
        }
    }
    for p in 0..m {
        g.add_arc(paper_node(p), sink, problem.r_target as i64, 0.0);
    }

    let sent = g.min_cost_flow(super_source, sink, demand as i64);
    let pairs: BTreeSet<Key> = pair_arcs
        .iter()
        .filter(|(id, _)| g.flow(*id) == 1)
        .map(|&(_, key)| key)
        .collect();
    let loads = loads_of(&pairs, n);
    if sent < demand as i64 {
        if let Some(r) = (0..n).find(|&r| loads[r] < problem.p_min) {
            return Err(MatchError::UnmetMinimum {
                reviewer: r,
                p_min: problem.p_min,
            });
        }
        let mut cover = vec![0; m];
        for &(_, p) in &pairs {
            cover[p] += 1;
        }
        let paper = (0..m)
            .find(|&p| cover[p] < problem.r_target)
            .expect("a short flow leaves some paper uncovered");
        return Err(MatchError::UncoveredPaper {
            paper,
            required: problem.r_target,
        });
    }

    Ok(Assignment::from_pairs(problem, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn single_reviewer_takes_everything() {
        let p = MatchProblem::new(m(1, 3, &[2.0, 0.0, 1.0]), 1, 0, 3);
        let a = solve_basic(&p).unwrap();
        assert_eq!(a.pairs.len(), 3);
        assert_eq!(a.objective_value, 3.0);
        assert_eq!(a.loads, vec![3]);
    }

    #[test]
    fn diagonal_unique_optimum() {
        let p = MatchProblem::new(m(2, 2, &[3.0, 0.0, 0.0, 3.0]), 1, 1, 1);
        let a = solve_basic(&p).unwrap();
        assert_eq!(a.pairs, BTreeSet::from([(0, 0), (1, 1)]));
        assert_eq!(a.objective_value, 6.0);
    }

    #[test]
    fn balance_crossover() {
        let s = m(2, 4, &[3.0, 3.0, 3.0, 3.0, 1.0, 1.0, 1.0, 1.0]);
        let base = MatchProblem::new(s, 1, 0, 4);
        let a0 = solve_balance(&base.clone().with_lambda(0.0, PenaltyShape::Abs)).unwrap();
        assert_eq!(a0.loads, vec![4, 0]);
        let big = solve_balance(&base.with_lambda(10.0, PenaltyShape::Abs)).unwrap();
        assert_eq!(big.loads, vec![2, 2]);
        assert_eq!(big.raw_suitability_sum, 8.0);
        assert_eq!(big.penalty, 0.0);
    }

    #[test]
    fn balance_uses_fractional_mean() {
        // x̄ = 3/2; with f = square loads (2,1) and (1,2) cost the same
        // penalty 0.5 * lambda, while (3,0) costs 4.5 * lambda.
        let s = m(2, 3, &[2.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        let p = MatchProblem::new(s, 1, 0, 3).with_lambda(1.0, PenaltyShape::Square);
        let a = solve(&p).unwrap();
        assert_eq!(a.loads, vec![2, 1]);
        assert_eq!(a.penalty, 0.5);
        assert_eq!(a.objective_value, 4.0 - 0.5);
    }

    #[test]
    fn coi_and_forbidden_cells_are_never_used() {
        let s = m(2, 2, &[3.0, f64::NEG_INFINITY, 3.0, 0.0]);
        let p = MatchProblem::new(s, 1, 0, 2).with_coi(BTreeSet::from([(1, 0)]));
        let a = solve_basic(&p).unwrap();
        assert_eq!(a.pairs, BTreeSet::from([(0, 0), (1, 1)]));
    }

    #[test]
    fn infeasibility_reports() {
        let s = m(2, 2, &[1.0; 4]);
        let err = solve_basic(&MatchProblem::new(s.clone(), 1, 2, 2)).unwrap_err();
        assert!(matches!(err, MatchError::LoadArithmetic { .. }));
        let err = solve_basic(&MatchProblem::new(s.clone(), 1, 3, 1)).unwrap_err();
        assert!(matches!(err, MatchError::InvalidBounds { .. }));
        let coi = BTreeSet::from([(0, 1), (1, 1)]);
        let err = solve_basic(&MatchProblem::new(s.clone(), 1, 0, 2).with_coi(coi)).unwrap_err();
        assert_eq!(
            err,
            MatchError::StarvedPaper {
                paper: 1,
                available: 0,
                required: 1
            }
        );
        // Hall violation: papers 0 and 1 may only go to reviewer 0, whose
        // p_max is 1.
        let ninf = f64::NEG_INFINITY;
        let s3 = m(3, 3, &[1.0, 1.0, 1.0, ninf, ninf, 1.0, ninf, ninf, 1.0]);
        let err = solve_basic(&MatchProblem::new(s3, 1, 0, 1)).unwrap_err();
        assert!(matches!(err, MatchError::UncoveredPaper { required: 1, .. }), "{err}");
        let mut bad = s;
        bad[(1, 1)] = f64::NAN;
        let err = solve_basic(&MatchProblem::new(bad, 1, 0, 2)).unwrap_err();
        assert!(matches!(err, MatchError::InvalidScore { reviewer: 1, paper: 1, .. }));
    }

    #[test]
    fn transform_changes_the_argmax() {
        // identity: 1.25 + 1.25 beats 2 + 0; sigmoid: 2 g(1.25) < g(2) + g(0)
        let s = m(2, 2, &[1.25, 2.0, 0.0, 1.25]);
        let id = solve_basic(&MatchProblem::new(s.clone(), 1, 1, 1)).unwrap();
        assert_eq!(id.pairs, BTreeSet::from([(0, 0), (1, 1)]));
        assert_eq!(id.objective_value, 2.5);
        let tf = MatchProblem::new(s, 1, 1, 1).with_transform(TransformSpec::sigmoid(4.5));
        let a = solve_basic(&tf).unwrap();
        assert_eq!(a.pairs, BTreeSet::from([(0, 1), (1, 0)]));
        assert_eq!(a.raw_suitability_sum, 2.0);
        assert_eq!(a.objective_value, tf.utility(0, 1) + tf.utility(1, 0));
    }

    #[test]
    fn load_variance_examples() {
        assert_eq!(load_variance(&[2, 2, 2], 2.0), 0.0);
        assert_eq!(load_variance(&[4, 0], 2.0), 4.0);
    }

    #[test]
    fn decisions_are_binary() {
        let s = m(2, 3, &[1.0, 2.0, 0.5, 0.0, 3.0, 1.5]);
        let a = solve_basic(&MatchProblem::new(s, 1, 1, 2)).unwrap();
        let x = a.decisions();
        assert!(x.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(x.sum(), 3.0);
    }
}
