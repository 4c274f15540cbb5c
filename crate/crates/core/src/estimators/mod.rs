//! Entropy estimators built on the cover engine.

mod critical;
mod katok;
mod local;
mod spanning;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Precision;
use crate::symbolic::BallKind;

pub use critical::{
    critical_exponent, critical_exponent_with_schedule, neutralized_bowen_entropy, CriticalEstimate, CriticalStatus,
    EntropyTable,
};
pub use katok::{exact_partial_cover, EXACT_MAX_DEPTH, GAP_THRESHOLD, katok_critical, katok_entropy, partial_cover_bounds, KatokEstimate, KatokTable, PartialCoverBounds};
pub use local::{brin_katok_entropy, brin_katok_pointwise, BkMode, LocalEntropyReport, PointwiseReport};
pub use spanning::{min_spanning_count, spanning_entropy, SpanningRow, SpanningTable};
pub use verify::{DEFAULT_DELTAS, variational_sandwich, verify_local_katok_bound, LocalKatokReport, SandwichOptions, SandwichReport};

/// Truncation and accuracy settings shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationParams {
    pub n_min: usize,
    pub n_max: usize,
    /// Bisection tolerance on the exponent.
    pub tol: f64,
    pub kind: BallKind,
    pub precision: Precision,
}

impl Default for TruncationParams {
    fn default() -> Self {
        TruncationParams { n_min: 50, n_max: 400, tol: 1e-3, kind: BallKind::Open, precision: Precision::Double }
    }
}

impl TruncationParams {
    pub fn new(n_min: usize, n_max: usize) -> Self {
        TruncationParams { n_min, n_max, ..Default::default() }
    }

    pub fn with_kind(mut self, kind: BallKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::Config(format!("need 1 <= n_min <= n_max, got {}..{}", self.n_min, self.n_max)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// About `count` geometrically spaced integers from `lo` to `hi`, deduplicated.
pub fn geometric_schedule(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 || lo >= hi {
        return vec![hi.max(lo)];
    }
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (count - 1) as f64);
    let mut out: Vec<usize> = (0..count)
        .map(|k| ((lo as f64) * ratio.powi(k as i32)).round() as usize)
        .map(|n| n.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

/// Default order schedule for pointwise limits: 50 to 400, geometric.
pub fn default_order_schedule() -> Vec<usize> {
    geometric_schedule(50, 400, 16)
}

/// Minimum over the last half of a sequence (the finite stand-in for liminf).
pub fn tail_infimum(values: &[f64]) -> f64 {
    let start = values.len() / 2;
    values[start..].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Maximum over the last half of a sequence (the finite stand-in for limsup).
pub fn tail_supremum(values: &[f64]) -> f64 {
    let start = values.len() / 2;
    values[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares line `y = intercept + slope * x` with residual diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub intercept: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

/// Fits a line through `(x, y)` and reads off the value at `x = 0`. `None` with fewer than two points.
pub fn linear_extrapolation(xs: &[f64], ys: &[f64]) -> Option<Extrapolation> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Some(Extrapolation { intercept, slope, residuals, rms_residual })
}

pub(crate) fn check_decreasing(schedule: &[f64], what: &str) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Config(format!("{what} schedule is empty")));
    }
    if schedule.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(Error::Config(format!("{what} values must be finite and > 0")));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("{what} schedule must be strictly decreasing")));
    }
    Ok(())
}
