//! Identity residuals with refinement traces.

use serde::{Deserialize, Serialize};

use crate::quaternion::CQuaternion;

/// One level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub level: usize,
    pub residual: f64,
    pub order: usize,
    pub epsilon: f64,
    /// Fraction of quadrature measure skipped at this level.
    pub skipped_fraction: f64,
}

/// Max-norm mismatch of an identity, with the last level's sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    #[serde(skip)]
    pub lhs: CQuaternion,
    #[serde(skip)]
    pub rhs: CQuaternion,
    pub trace: Vec<TracePoint>,
}

impl Residual {
    /// Single evaluation without a refinement study.
    pub fn single(lhs: CQuaternion, rhs: CQuaternion) -> Self {
        let value = (lhs - rhs).max_abs();
        Residual {
            value,
            lhs,
            rhs,
            trace: vec![TracePoint { level: 0, residual: value, order: 0, epsilon: 0.0, skipped_fraction: 0.0 }],
        }
    }

    /// Builds from per-level `(point, lhs, rhs)`; the reported value is the finest level's.
    pub fn from_levels(levels: Vec<(TracePoint, CQuaternion, CQuaternion)>) -> Self {
        let mut trace = Vec::with_capacity(levels.len());
        let mut lhs = CQuaternion::ZERO;
        let mut rhs = CQuaternion::ZERO;
        for (mut p, l, r) in levels {
            p.residual = (l - r).max_abs();
            trace.push(p);
            lhs = l;
            rhs = r;
        }
        Residual { value: trace.last().map_or(0.0, |p| p.residual), lhs, rhs, trace }
    }

    /// Worst of several residuals, keeping the sides and trace of the worst.
    pub fn worst(items: impl IntoIterator<Item = Residual>) -> Option<Residual> {
        items.into_iter().reduce(|a, b| if b.value > a.value { b } else { a })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].residual < w[0].residual)
    }

    pub fn skipped_fraction(&self) -> f64 {
        self.trace.last().map_or(0.0, |p| p.skipped_fraction)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.value.is_finite() && self.value <= tol
    }
}
