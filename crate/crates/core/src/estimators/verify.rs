//! Numerical checks of the inequalities linking the entropies.

use serde::{Deserialize, Serialize};

use super::critical::{critical_exponent, CriticalEstimate, CriticalStatus};
use super::katok::{katok_entropy, KatokTable};
use super::local::{brin_katok_entropy, BkMode, LocalEntropyReport};
use super::{geometric_schedule, TruncationParams};
use crate::cover::CoverGeometry;
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::scalar::LogF64;
use crate::subset::{SubsetSpec, Target};
use crate::symbolic::ShiftSpec;

/// Default `delta` schedule for Katok limits.
pub const DEFAULT_DELTAS: [f64; 3] = [0.1, 0.01, 0.001];

/// `BK(eps/2) <= Katok(eps)` at finite truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalKatokReport {
    pub epsilon: f64,
    pub bk_half: f64,
    pub katok: f64,
    /// `katok - bk_half`
    pub slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub bk: LocalEntropyReport,
    pub katok_table: KatokTable,
}

/// Compares the exact-expectation Brin-Katok entropy at `eps/2` (tail infimum over
/// orders in `[n_min, n_max]`) with the Katok exponent at `eps` and the smallest `delta`.
pub fn verify_local_katok_bound(
    shift: &ShiftSpec,
    mu: &MeasureSpec,
    epsilon: f64,
    params: &TruncationParams,
    deltas: &[f64],
    tolerance: f64,
) -> Result<LocalKatokReport> {
    params.validate()?;
    let orders = geometric_schedule(params.n_min, params.n_max, 16);
    let bk = brin_katok_entropy(
        mu,
        epsilon / 2.0,
        &orders,
        params.kind,
        BkMode::ExactExpectation,
        0.95,
        Some(mu.entropy_rate()),
    )?;
    let katok_table = katok_entropy(shift, mu, epsilon, deltas, params)?;
    let bk_half = bk.integral_estimate;
    let katok = katok_table.value;
    let slack = katok - bk_half;
    Ok(LocalKatokReport { epsilon, bk_half, katok, slack, tolerance, holds: slack >= -tolerance, bk, katok_table })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichOptions {
    /// Measure carried by `K` for the Katok side; a default is chosen when absent.
    pub katok_measure: Option<MeasureSpec>,
    pub deltas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub orders: Option<Vec<usize>>,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions {
            katok_measure: None,
            deltas: DEFAULT_DELTAS.to_vec(),
            samples: 64,
            seed: 0,
            tolerance: 0.05,
            orders: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub epsilon: f64,
    pub critical: CriticalEstimate,
    /// Exponent at which the Frostman measure was built (cost there exceeds 1).
    pub frostman_exponent: f64,
    pub frostman_log_mass: f64,
    pub bk_frostman: LocalEntropyReport,
    pub katok: Option<KatokTable>,
    pub tolerance: f64,
    /// `s*(eps) <= BK_mu(2 eps) + tol` for the Frostman measure `mu`.
    pub lower_holds: bool,
    /// `Katok(eps) <= s*(eps) + tol` for the supplied (or default) measure.
    pub upper_holds: bool,
}

/// The natural measure of maximal entropy on `K`, when there is one.
fn default_measure(shift: &ShiftSpec, k: &SubsetSpec) -> Result<Option<MeasureSpec>> {
    match (k, shift.transitions()) {
        (SubsetSpec::WholeSpace, None) => Ok(Some(MeasureSpec::uniform(shift.alphabet_size())?)),
        (SubsetSpec::WholeSpace, Some(t)) => Ok(Some(MeasureSpec::parry(t)?)),
        (SubsetSpec::SftSubsystem { transitions }, _) => Ok(Some(MeasureSpec::parry(transitions)?)),
        _ => Ok(None),
    }
}

pub fn variational_sandwich(
    shift: &ShiftSpec,
    k: &SubsetSpec,
    epsilon: f64,
    params: &TruncationParams,
    options: &SandwichOptions,
) -> Result<SandwichReport> {
    let critical = critical_exponent(shift, k, epsilon, params)?;
    if critical.status == CriticalStatus::EmptySet {
        return Err(Error::Infeasible("K is empty".into()));
    }
    let s = critical.bracket.0;
    let geometry = CoverGeometry::new(shift, &Target::Indicator(k.clone()), 2.0 * epsilon, params.n_min, params.n_max, params.kind)?;
    let frostman = geometry.frostman::<LogF64>(s).map_err(|e| match e {
        Error::Degenerate(m) => Error::Infeasible(format!("Frostman measure: {m}")),
        other => other,
    })?;
    let orders = options.orders.clone().unwrap_or_else(|| geometric_schedule(params.n_min, params.n_max, 8));
    let bk_frostman = brin_katok_entropy(
        &frostman.measure,
        2.0 * epsilon,
        &orders,
        params.kind,
        BkMode::MonteCarlo { samples: options.samples, seed: options.seed },
        0.95,
        None,
    )?;
    let measure = match &options.katok_measure {
        Some(m) => Some(m.clone()),
        None => default_measure(shift, k)?,
    };
    let katok = measure.map(|m| katok_entropy(shift, &m, epsilon, &options.deltas, params)).transpose()?;
    let lower_holds = critical.s_star <= bk_frostman.integral_estimate + options.tolerance;
    let upper_holds = katok.as_ref().is_none_or(|t| t.value <= critical.s_star + options.tolerance);
    Ok(SandwichReport {
        epsilon,
        frostman_exponent: s,
        frostman_log_mass: frostman.total_mass.0,
        critical,
        bk_frostman,
        katok,
        tolerance: options.tolerance,
        lower_holds,
        upper_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_measure_local_katok_bound() {
        let shift = ShiftSpec::full(2).unwrap();
        let mu = MeasureSpec::bernoulli(vec![1.0, 0.0]).unwrap();
        let r = verify_local_katok_bound(&shift, &mu, 0.4, &TruncationParams::new(10, 60), &DEFAULT_DELTAS, 0.02).unwrap();
        assert_eq!(r.bk_half, 0.0);
        assert_eq!(r.katok, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn single_cylinder_sandwich() {
        let shift = ShiftSpec::full(2).unwrap();
        let params = TruncationParams::new(10, 60);
        let d = crate::symbolic::ball_cylinder_length(10, 0.2, 2, params.kind);
        let k = SubsetSpec::cylinders(vec![crate::symbolic::Word::new(vec![1; d])]).unwrap();
        let r = variational_sandwich(&shift, &k, 0.2, &params, &SandwichOptions::default()).unwrap();
        assert_eq!(r.critical.s_star, 0.0);
        assert!(r.bk_frostman.integral_estimate >= 0.0);
        assert!(r.lower_holds && r.upper_holds);
        assert!(r.katok.is_none());
    }
}
