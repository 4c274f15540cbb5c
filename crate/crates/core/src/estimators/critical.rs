//! Critical exponents of cover costs by bisection on `cost(s) = 1`.

use serde::{Deserialize, Serialize};

use super::{check_decreasing, linear_extrapolation, Extrapolation, TruncationParams};
use crate::cover::CoverGeometry;
use crate::error::Result;
use crate::scalar::{CostScalar, HighPrecision, LogF64, Precision};
use crate::subset::{SubsetSpec, Target};
use crate::symbolic::ShiftSpec;

const MAX_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalStatus {
    Converged,
    /// No exponent brought the cost below 1 within the doubling budget.
    NotConverged,
    /// The cost is already at most 1 at `s = 0`.
    ZeroCrossing,
    /// The cost is identically zero.
    EmptySet,
}

/// A critical exponent with its bracket and truncation provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub s_star: f64,
    pub bracket: (f64, f64),
    pub epsilon: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub d_max: usize,
    /// Natural logs of the cost at the two bracket ends.
    pub log_cost_at_bracket: (f64, f64),
    pub converged: bool,
    pub status: CriticalStatus,
    pub evaluations: usize,
    /// `(n_min, s_star)` for each entry of an `n_min` schedule.
    pub schedule: Vec<(usize, f64)>,
}

pub(crate) struct Bisection {
    pub s_star: f64,
    pub bracket: (f64, f64),
    pub log_cost: (f64, f64),
    pub status: CriticalStatus,
    pub evaluations: usize,
}

/// Bisection for the crossing of a non-increasing `log_cost` through 0.
pub(crate) fn bisect_unit_crossing<F>(mut log_cost: F, s_hi: f64, tol: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut evaluations = 1;
    let c0 = log_cost(0.0)?;
    if c0 == f64::NEG_INFINITY {
        return Ok(Bisection { s_star: 0.0, bracket: (0.0, 0.0), log_cost: (c0, c0), status: CriticalStatus::EmptySet, evaluations });
    }
    if c0 <= 0.0 {
        return Ok(Bisection { s_star: 0.0, bracket: (0.0, 0.0), log_cost: (c0, c0), status: CriticalStatus::ZeroCrossing, evaluations });
    }
    let (mut lo, mut c_lo) = (0.0, c0);
    let mut hi = s_hi;
    let mut c_hi = log_cost(hi)?;
    evaluations += 1;
    let mut doublings = 0;
    while c_hi > 0.0 {
        if doublings == MAX_DOUBLINGS {
            return Ok(Bisection { s_star: hi, bracket: (lo, hi), log_cost: (c_lo, c_hi), status: CriticalStatus::NotConverged, evaluations });
        }
        lo = hi;
        c_lo = c_hi;
        hi *= 2.0;
        c_hi = log_cost(hi)?;
        evaluations += 1;
        doublings += 1;
    }
    let mut steps = 0;
    while hi - lo > tol && steps < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let c = log_cost(mid)?;
        evaluations += 1;
        if c > 0.0 {
            lo = mid;
            c_lo = c;
        } else {
            hi = mid;
            c_hi = c;
        }
        steps += 1;
    }
    let status = if hi - lo <= tol { CriticalStatus::Converged } else { CriticalStatus::NotConverged };
    Ok(Bisection { s_star: 0.5 * (lo + hi), bracket: (lo, hi), log_cost: (c_lo, c_hi), status, evaluations })
}

pub(crate) fn initial_upper(alphabet: usize, epsilon: f64) -> f64 {
    (alphabet as f64).ln() + epsilon + 1.0
}

fn log_cost(geometry: &CoverGeometry, s: f64, precision: Precision) -> f64 {
    match precision {
        Precision::Double => geometry.integral_cost::<LogF64>(s).ln(),
        Precision::High => geometry.integral_cost::<HighPrecision>(s).ln(),
    }
}

/// `s*` with `M^{s*}_{N,eps}(Z) = 1` at the given truncation.
pub fn critical_exponent(
    shift: &ShiftSpec,
    subset: &SubsetSpec,
    epsilon: f64,
    params: &TruncationParams,
) -> Result<CriticalEstimate> {
    params.validate()?;
    subset.validate(shift)?;
    let geometry =
        CoverGeometry::new(shift, &Target::Indicator(subset.clone()), epsilon, params.n_min, params.n_max, params.kind)?;
    let b = bisect_unit_crossing(
        |s| Ok(log_cost(&geometry, s, params.precision)),
        initial_upper(shift.alphabet_size(), epsilon),
        params.tol,
    )?;
    Ok(CriticalEstimate {
        s_star: b.s_star,
        bracket: b.bracket,
        epsilon,
        n_min: params.n_min,
        n_max: params.n_max,
        d_max: geometry.max_depth(),
        log_cost_at_bracket: b.log_cost,
        converged: b.status == CriticalStatus::Converged,
        status: b.status,
        evaluations: b.evaluations,
        schedule: vec![(params.n_min, b.s_star)],
    })
}

/// As [`critical_exponent`], also recording `s*` for each `n_min` in `schedule`
/// (each capped at `n_max`) to expose the finite-scale bias.
pub fn critical_exponent_with_schedule(
    shift: &ShiftSpec,
    subset: &SubsetSpec,
    epsilon: f64,
    params: &TruncationParams,
    schedule: &[usize],
) -> Result<CriticalEstimate> {
    let mut est = critical_exponent(shift, subset, epsilon, params)?;
    est.schedule.clear();
    for &n_min in schedule {
        let p = TruncationParams { n_min: n_min.min(params.n_max), ..params.clone() };
        let e = critical_exponent(shift, subset, epsilon, &p)?;
        est.schedule.push((p.n_min, e.s_star));
    }
    Ok(est)
}

/// Critical exponents over a decreasing `epsilon` schedule and their extrapolation to `epsilon = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub rows: Vec<CriticalEstimate>,
    /// Linear fit in `epsilon`; an estimate of the limit, not the limit itself.
    pub extrapolation: Option<Extrapolation>,
    /// `s*` is non-increasing as `epsilon` decreases, within the bisection tolerance.
    pub monotone: bool,
}

pub fn neutralized_bowen_entropy(
    shift: &ShiftSpec,
    subset: &SubsetSpec,
    epsilons: &[f64],
    params: &TruncationParams,
) -> Result<EntropyTable> {
    check_decreasing(epsilons, "epsilon")?;
    let rows: Vec<CriticalEstimate> = epsilons
        .iter()
        .map(|&e| critical_exponent(shift, subset, e, params))
        .collect::<Result<_>>()?;
    let monotone = rows.windows(2).all(|w| w[1].s_star <= w[0].s_star + 2.0 * params.tol);
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.s_star).collect();
    Ok(EntropyTable { extrapolation: linear_extrapolation(&xs, &ys), rows, monotone })
}
