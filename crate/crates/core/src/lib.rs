//! Suitability prediction and optimal paper-to-reviewer assignment.
//!
//! The crate is split along the pipeline:
//!
//! * [`corpus`]: score matrices, documents, vocabulary, splits and the
//!   synthetic corpus generator.
//! * [`lm`], [`lr`], [`bpmf`]: predictors for unobserved suitabilities.
//! * [`matcher`]: exact solvers for the assignment programs, reduced to
//!   min-cost flow.
//! * [`evaluator`]: metrics and experiment protocols.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bpmf;
pub mod corpus;
pub mod evaluator;
pub mod io;
pub mod lm;
pub mod lr;
pub mod matcher;
pub mod seed;
pub mod transform;

pub use corpus::{
    Corpus, DatasetSplit, DocumentVector, IdMap, Key, Observation, ScoreMatrix, ScoreRange,
    Vocabulary,
};

pub use matcher::{Assignment, MatchError, MatchProblem, PenaltyShape};
pub use transform::{TransformKind, TransformSpec};
