//! Problem parameters and points of the closed upper half-space.

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};

/// The pair (n, s): ambient dimension of the boundary space and the
/// fractional order. Every computation in the crate is parameterized by
/// one of these.
///
/// Invariants enforced at construction: `n >= 1` and `0 < s < 1`
/// strictly. Deterministic quadrature additionally requires `n <= 3`;
/// that restriction is checked per operation, not here, because the
/// Monte Carlo estimators accept any dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    n: usize,
    s: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(FracError::InvalidInput("dimension n must be >= 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(FracError::InvalidInput(format!(
                "fractional order s must lie strictly in (0, 1), got {s}"
            )));
        }
        Ok(Self { n, s })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Guard for the deterministic-quadrature operations.
    pub(crate) fn require_low_dim(&self, op: &str) -> Result<()> {
        if self.n > 3 {
            return Err(FracError::InvalidInput(format!(
                "{op} supports n <= 3 (got n = {}); use the Monte Carlo route for higher n",
                self.n
            )));
        }
        Ok(())
    }
}

/// A point (x, y) of the closed upper half-space: x in R^n, y >= 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePoint {
    x: Vec<f64>,
    y: f64,
}

impl HalfSpacePoint {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(FracError::InvalidInput(
                "half-space point coordinates must be finite".into(),
            ));
        }
        if y < 0.0 {
            return Err(FracError::InvalidInput(format!(
                "half-space point requires y >= 0, got y = {y}"
            )));
        }
        Ok(Self { x, y })
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Checks the horizontal dimension against the parameters and, when
    /// `interior` is set, that the point lies strictly inside.
    pub(crate) fn check(&self, p: &FracParams, interior: bool, op: &str) -> Result<()> {
        if self.x.len() != p.n() {
            return Err(FracError::InvalidInput(format!(
                "{op}: point has {} horizontal coordinates but n = {}",
                self.x.len(),
                p.n()
            )));
        }
        if interior && self.y <= 0.0 {
            return Err(FracError::InvalidInput(format!(
                "{op} requires an interior point (y > 0), got y = {}",
                self.y
            )));
        }
        Ok(())
    }
}
