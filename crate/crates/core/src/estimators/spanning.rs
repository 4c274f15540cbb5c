//! Minimal `(n, eps)`-spanning sets under closed neutralized balls.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{check_decreasing, linear_extrapolation, tail_supremum, Extrapolation};
use crate::error::{Error, Result};
use crate::scalar::ln_biguint;
use crate::symbolic::{ball_cylinder_length, BallKind, ShiftSpec};

/// `r_n(X, eps)`: each closed ball is one cylinder of length `D_closed(n, eps)`,
/// and distinct cylinders need distinct centers, so the count of admissible words is exact.
pub fn min_spanning_count(shift: &ShiftSpec, n: usize, epsilon: f64) -> Result<BigUint> {
    if n == 0 || !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("need n >= 1 and eps > 0, got n={n}, eps={epsilon}")));
    }
    Ok(shift.count_words(ball_cylinder_length(n, epsilon, shift.alphabet_size(), BallKind::Closed)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanningRow {
    pub epsilon: f64,
    /// `(n, (1/n) ln r_n)`
    pub rates: Vec<(usize, f64)>,
    /// Maximum over the tail half of the schedule.
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanningTable {
    pub rows: Vec<SpanningRow>,
    pub extrapolation: Option<Extrapolation>,
}

pub fn spanning_entropy(shift: &ShiftSpec, epsilons: &[f64], orders: &[usize]) -> Result<SpanningTable> {
    check_decreasing(epsilons, "epsilon")?;
    if orders.is_empty() || orders.contains(&0) {
        return Err(Error::Config("order schedule must be non-empty with entries >= 1".into()));
    }
    let rows: Vec<SpanningRow> = epsilons
        .iter()
        .map(|&eps| {
            let rates: Vec<(usize, f64)> = orders
                .iter()
                .map(|&n| min_spanning_count(shift, n, eps).map(|r| (n, ln_biguint(&r) / n as f64)))
                .collect::<Result<_>>()?;
            let values: Vec<f64> = rates.iter().map(|p| p.1).collect();
            Ok(SpanningRow { epsilon: eps, r: tail_supremum(&values), rates })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.r).collect();
    Ok(SpanningTable { extrapolation: linear_extrapolation(&xs, &ys), rows })
}
