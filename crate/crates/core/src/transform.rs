//! Score transformations used by the transformed matching objective and the
//! transformed regression labels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Identity,
    Sigmoid,
}

/// `g(s)`: either the identity or `1 / (1 + exp(-(s - midpoint) * beta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub beta: f64,
    pub midpoint: f64,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self::identity()
    }
}

impl TransformSpec {
    pub const DEFAULT_BETA: f64 = 4.5;
    pub const DEFAULT_MIDPOINT: f64 = 1.5;

    pub fn identity() -> Self {
        TransformSpec {
            kind: TransformKind::Identity,
            beta: Self::DEFAULT_BETA,
            midpoint: Self::DEFAULT_MIDPOINT,
        }
    }

    pub fn sigmoid(beta: f64) -> Self {
        TransformSpec {
            kind: TransformKind::Sigmoid,
            beta,
            midpoint: Self::DEFAULT_MIDPOINT,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == TransformKind::Identity
    }

    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        match self.kind {
            TransformKind::Identity => s,
            TransformKind::Sigmoid => {
                if s == f64::NEG_INFINITY {
                    // Forbidden cells stay forbidden.
                    return s;
                }
                1.0 / (1.0 + (-(s - self.midpoint) * self.beta).exp())
            }
        }
    }

    /// Range of transformed values for inputs in `[lo, hi]`.
    pub fn output_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self.kind {
            TransformKind::Identity => (lo, hi),
            TransformKind::Sigmoid => (0.0, 1.0),
        }
    }
}

/// Element-wise `g(s)` over a suitability matrix.
pub fn apply_transform(spec: &TransformSpec, suitability: &DMatrix<f64>) -> DMatrix<f64> {
    if spec.is_identity() {
        return suitability.clone();
    }
    suitability.map(|s| spec.apply(s))
}
