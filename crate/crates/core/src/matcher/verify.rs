//! Independent re-check of an assignment against its problem.

use std::fmt;

use serde::Serialize;

use super::{loads_of, Assignment, MatchProblem};

const OBJECTIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    PairOutOfRange { reviewer: usize, paper: usize },
    ConflictOfInterest { reviewer: usize, paper: usize },
    ForbiddenScore { reviewer: usize, paper: usize },
    Coverage { paper: usize, count: usize, required: usize },
    Load { reviewer: usize, load: usize, p_min: usize, p_max: usize },
    LoadMismatch { reviewer: usize, reported: usize, actual: usize },
    NonIntegral { reviewer: usize, paper: usize, value: f64 },
    ObjectiveMismatch { reported: f64, recomputed: f64 },
    RawSumMismatch { reported: f64, recomputed: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PairOutOfRange { reviewer, paper } => {
                write!(f, "pair ({reviewer}, {paper}) is outside the matrix")
            }
            Violation::ConflictOfInterest { reviewer, paper } => {
                write!(f, "pair ({reviewer}, {paper}) is a conflict of interest")
            }
            Violation::ForbiddenScore { reviewer, paper } => {
                write!(f, "pair ({reviewer}, {paper}) has a forbidden score")
            }
            Violation::Coverage { paper, count, required } => {
                write!(f, "paper {paper} has {count} reviewers, needs {required}")
            }
            Violation::Load { reviewer, load, p_min, p_max } => {
                write!(f, "reviewer {reviewer} load {load} outside [{p_min}, {p_max}]")
            }
            Violation::LoadMismatch { reviewer, reported, actual } => {
                write!(f, "reviewer {reviewer} reported load {reported}, actual {actual}")
            }
            Violation::NonIntegral { reviewer, paper, value } => {
                write!(f, "x[{reviewer}, {paper}] = {value} is not 0 or 1")
            }
            Violation::ObjectiveMismatch { reported, recomputed } => {
                write!(f, "objective {reported} differs from recomputed {recomputed}")
            }
            Violation::RawSumMismatch { reported, recomputed } => {
                write!(f, "raw suitability sum {reported} differs from recomputed {recomputed}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub recomputed_objective: Option<f64>,
    pub recomputed_raw_sum: Option<f64>,
}

/// Re-checks coverage, loads, conflicts, integrality and the reported
/// objective. Never fails; problems are listed in the result.
pub fn verify(assignment: &Assignment, problem: &MatchProblem) -> Diagnostics {
    let (n, m) = (problem.n_reviewers(), problem.n_papers());
    let mut violations = Vec::new();
    let mut in_range = true;

    for &(r, p) in &assignment.pairs {
        if r >= n || p >= m {
            violations.push(Violation::PairOutOfRange { reviewer: r, paper: p });
            in_range = false;
            continue;
        }
        if problem.coi.contains(&(r, p)) {
            violations.push(Violation::ConflictOfInterest { reviewer: r, paper: p });
        }
        if problem.suitability[(r, p)] == f64::NEG_INFINITY {
            violations.push(Violation::ForbiddenScore { reviewer: r, paper: p });
        }
    }

    let mut cover = vec![0usize; m];
    for &(_, p) in &assignment.pairs {
        if p < m {
            cover[p] += 1;
        }
    }
    for (p, &count) in cover.iter().enumerate() {
        if count != problem.r_target {
            violations.push(Violation::Coverage {
                paper: p,
                count,
                required: problem.r_target,
            });
        }
    }

    let loads = loads_of(&assignment.pairs, n);
    for (r, &load) in loads.iter().enumerate() {
        if load < problem.p_min || load > problem.p_max {
            violations.push(Violation::Load {
                reviewer: r,
                load,
                p_min: problem.p_min,
                p_max: problem.p_max,
            });
        }
        let reported = assignment.loads.get(r).copied().unwrap_or(0);
        if reported != load {
            violations.push(Violation::LoadMismatch {
                reviewer: r,
                reported,
                actual: load,
            });
        }
    }

    if in_range && assignment.loads.len() == n && assignment.n_papers == m {
        let x = assignment.decisions();
        for r in 0..n {
            for p in 0..m {
                let v = x[(r, p)];
                if v != 0.0 && v != 1.0 {
                    violations.push(Violation::NonIntegral { reviewer: r, paper: p, value: v });
                }
            }
        }
    }

    let (mut recomputed_objective, mut recomputed_raw_sum) = (None, None);
    if in_range {
        let objective = problem.objective_of(&assignment.pairs);
        let raw: f64 = assignment
            .pairs
            .iter()
            .map(|&(r, p)| problem.suitability[(r, p)])
            .sum();
        if !((objective - assignment.objective_value).abs() <= OBJECTIVE_TOLERANCE) {
            violations.push(Violation::ObjectiveMismatch {
                reported: assignment.objective_value,
                recomputed: objective,
            });
        }
        if !((raw - assignment.raw_suitability_sum).abs() <= OBJECTIVE_TOLERANCE) {
            violations.push(Violation::RawSumMismatch {
                reported: assignment.raw_suitability_sum,
                recomputed: raw,
            });
        }
        recomputed_objective = Some(objective);
        recomputed_raw_sum = Some(raw);
    }

    Diagnostics {
        passed: violations.is_empty(),
        violations,
        recomputed_objective,
        recomputed_raw_sum,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use nalgebra::DMatrix;

    use super::*;
    use crate::matcher::solve_basic;

    fn problem() -> MatchProblem {
        let s = DMatrix::from_row_slice(2, 3, &[3.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        MatchProblem::new(s, 1, 1, 2).with_coi(BTreeSet::from([(0, 2)]))
    }

    #[test]
    fn solver_output_passes() {
        let p = problem();
        let a = solve_basic(&p).unwrap();
        let d = verify(&a, &p);
        assert!(d.passed, "{:?}", d.violations);
        assert_eq!(d.recomputed_objective, Some(7.0));
    }

    #[test]
    fn injected_coi_is_named() {
        let p = problem();
        let mut a = solve_basic(&p).unwrap();
        a.pairs.remove(&(1, 2));
        a.pairs.insert((0, 2));
        let d = verify(&a, &p);
        assert!(!d.passed);
        assert!(d
            .violations
            .contains(&Violation::ConflictOfInterest { reviewer: 0, paper: 2 }));
    }

    #[test]
    fn objective_drift_fails() {
        let p = problem();
        let mut a = solve_basic(&p).unwrap();
        a.objective_value += 2e-6;
        let d = verify(&a, &p);
        assert!(matches!(d.violations[..], [Violation::ObjectiveMismatch { .. }]));
        a.objective_value -= 1.5e-6;
        assert!(verify(&a, &p).passed);
    }

    #[test]
    fn coverage_and_load_violations() {
        let p = problem();
        let mut a = solve_basic(&p).unwrap();
        a.pairs.remove(&(0, 0));
        let d = verify(&a, &p);
        assert!(d.violations.iter().any(|v| matches!(v, Violation::Coverage { paper: 0, .. })));
        assert!(d.violations.iter().any(|v| matches!(v, Violation::LoadMismatch { reviewer: 0, .. })));
    }
}
