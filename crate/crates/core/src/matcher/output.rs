//! Assignment CSV and JSON summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Assignment, MatchProblem, PenaltyShape};
use crate::corpus::IdMap;
use crate::io::{write_atomic, WriteError};
use crate::transform::TransformSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub objective: f64,
    pub raw_suitability_sum: f64,
    pub penalty: f64,
    pub loads: Vec<usize>,
    pub load_variance: f64,
    pub lambda: f64,
    pub penalty_shape: PenaltyShape,
    pub transform: Option<TransformSpec>,
    pub r_target: usize,
    pub p_min: usize,
    pub p_max: usize,
}

impl MatchSummary {
    pub fn new(assignment: &Assignment, problem: &MatchProblem) -> Self {
        MatchSummary {
            objective: assignment.objective_value,
            raw_suitability_sum: assignment.raw_suitability_sum,
            penalty: assignment.penalty,
            loads: assignment.loads.clone(),
            load_variance: super::load_variance(&assignment.loads, problem.mean_load()),
            lambda: problem.lambda,
            penalty_shape: problem.penalty,
            transform: problem.transform,
            r_target: problem.r_target,
            p_min: problem.p_min,
            p_max: problem.p_max,
        }
    }
}

/// `paper_id,reviewer_id`, one row per pair, ordered by paper then reviewer.
pub fn write_assignment_csv(
    path: &Path,
    assignment: &Assignment,
    reviewers: &IdMap,
    papers: &IdMap,
) -> Result<(), WriteError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| WriteError {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    w.write_record(["paper_id", "reviewer_id"]).map_err(wrap)?;
    for (p, rs) in assignment.by_paper().iter().enumerate() {
        for &r in rs {
            w.write_record([papers.name(p), reviewers.name(r)]).map_err(wrap)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| wrap(e.into_error().into()))?;
    write_atomic(path, &bytes)
}

pub fn write_summary(path: &Path, summary: &MatchSummary) -> Result<(), WriteError> {
    let mut bytes = serde_json::to_vec_pretty(summary).expect("summary serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
