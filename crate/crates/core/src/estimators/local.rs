//! Lower neutralized Brin-Katok local entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::tail_infimum;
use crate::error::{Error, Result};
use crate::measures::CylinderMeasure;
use crate::symbolic::{ball_cylinder_length, BallKind, Word};

/// `-(1/n) ln mu(B_n(x, e^{-n eps}))` along an order schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub epsilon: f64,
    pub orders: Vec<usize>,
    pub depths: Vec<usize>,
    /// `+inf` where the ball has zero mass.
    pub values: Vec<f64>,
    /// Minimum over the tail half of the schedule.
    pub liminf: f64,
}

fn check_schedule(orders: &[usize]) -> Result<()> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(Error::Config("order schedule must be non-empty with entries >= 1".into()));
    }
    if orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("order schedule must be strictly increasing".into()));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    Ok(())
}

pub fn brin_katok_pointwise<M: CylinderMeasure + ?Sized>(
    mu: &M,
    x: &Word,
    epsilon: f64,
    orders: &[usize],
    kind: BallKind,
) -> Result<PointwiseReport> {
    check_epsilon(epsilon)?;
    check_schedule(orders)?;
    let alphabet = mu.alphabet();
    let depths: Vec<usize> = orders.iter().map(|&n| ball_cylinder_length(n, epsilon, alphabet, kind)).collect();
    let need = *depths.last().expect("non-empty");
    if x.len() < need {
        return Err(Error::InsufficientLength { needed: need, available: x.len() });
    }
    let values: Vec<f64> = orders
        .iter()
        .zip(&depths)
        .map(|(&n, &d)| mu.log_mass(&x.prefix(d)).map(|lm| -lm / n as f64))
        .collect::<Result<_>>()?;
    Ok(PointwiseReport { epsilon, liminf: tail_infimum(&values), orders: orders.to_vec(), depths, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BkMode {
    MonteCarlo { samples: usize, seed: u64 },
    ExactExpectation,
}

/// The integral of the pointwise liminf, estimated or evaluated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropyReport {
    pub epsilon: f64,
    pub kind: BallKind,
    pub orders: Vec<usize>,
    /// Mean pointwise value at each order (exact expectation in exact mode).
    pub per_order: Vec<f64>,
    /// Mean of the per-point tail infima (Monte Carlo) or tail infimum of `per_order` (exact).
    pub integral_estimate: f64,
    /// Large-`n` limit of the exact expectation, when available.
    pub exact_limit: Option<f64>,
    pub ci: (f64, f64),
    pub confidence: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Brin-Katok entropy at `epsilon`. `confidence` sets the normal-approximation interval.
pub fn brin_katok_entropy<M: CylinderMeasure + Sync + ?Sized>(
    mu: &M,
    epsilon: f64,
    orders: &[usize],
    kind: BallKind,
    mode: BkMode,
    confidence: f64,
    entropy_rate: Option<f64>,
) -> Result<LocalEntropyReport> {
    check_epsilon(epsilon)?;
    check_schedule(orders)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let alphabet = mu.alphabet();
    let depths: Vec<usize> = orders.iter().map(|&n| ball_cylinder_length(n, epsilon, alphabet, kind)).collect();
    let exact_limit = entropy_rate.map(|h| (1.0 + epsilon / (alphabet as f64).ln()) * h);
    match mode {
        BkMode::ExactExpectation => {
            let per_order: Vec<f64> = orders
                .iter()
                .zip(&depths)
                .map(|(&n, &d)| {
                    mu.expected_neg_log_mass(d)
                        .map(|e| e / n as f64)
                        .ok_or_else(|| Error::Config("exact expectation needs a Bernoulli or Markov measure".into()))
                })
                .collect::<Result<_>>()?;
            let v = tail_infimum(&per_order);
            Ok(LocalEntropyReport {
                epsilon,
                kind,
                orders: orders.to_vec(),
                per_order,
                integral_estimate: v,
                exact_limit,
                ci: (v, v),
                confidence,
                std_error: 0.0,
                samples: 0,
            })
        }
        BkMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Config("Monte Carlo needs at least one sample".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seeds: Vec<u64> = (0..samples).map(|_| rng.random()).collect();
            let len = *depths.last().expect("non-empty");
            let reports: Vec<PointwiseReport> = seeds
                .iter()
                .map(|&sd| brin_katok_pointwise(mu, &mu.sample(len, sd), epsilon, orders, kind))
                .collect::<Result<_>>()?;
            let k = samples as f64;
            let per_order: Vec<f64> =
                (0..orders.len()).map(|j| reports.iter().map(|r| r.values[j]).sum::<f64>() / k).collect();
            let lims: Vec<f64> = reports.iter().map(|r| r.liminf).collect();
            let mean = lims.iter().sum::<f64>() / k;
            let var = if samples > 1 { lims.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
            let std_error = (var / k).sqrt();
            let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
            Ok(LocalEntropyReport {
                epsilon,
                kind,
                orders: orders.to_vec(),
                per_order,
                integral_estimate: mean,
                exact_limit,
                ci: (mean - z * std_error, mean + z * std_error),
                confidence,
                std_error,
                samples,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;

    #[test]
    fn uniform_pointwise_is_exact() {
        let mu = MeasureSpec::uniform(3).unwrap();
        let orders = [10, 20, 40, 80];
        let x = mu.sample_word(200, 5);
        let r = brin_katok_pointwise(&mu, &x, 0.25, &orders, BallKind::Closed).unwrap();
        for (i, &n) in orders.iter().enumerate() {
            let d = ball_cylinder_length(n, 0.25, 3, BallKind::Closed);
            assert_eq!(r.values[i], d as f64 * 3f64.ln() / n as f64);
        }
        assert!(brin_katok_pointwise(&mu, &x.prefix(10), 0.25, &orders, BallKind::Closed).is_err());
    }

    #[test]
    fn null_ball_is_infinite() {
        let mu = MeasureSpec::bernoulli(vec![1.0, 0.0]).unwrap();
        let x = Word::new(vec![1; 30]);
        let r = brin_katok_pointwise(&mu, &x, 0.3, &[5, 10], BallKind::Open).unwrap();
        assert!(r.values.iter().all(|v| *v == f64::INFINITY));
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let mu = MeasureSpec::bernoulli(vec![0.75, 0.25]).unwrap();
        let orders = [50, 100, 200];
        let h = Some(mu.entropy_rate());
        let exact = brin_katok_entropy(&mu, 0.3, &orders, BallKind::Open, BkMode::ExactExpectation, 0.95, h).unwrap();
        let mc = brin_katok_entropy(&mu, 0.3, &orders, BallKind::Open, BkMode::MonteCarlo { samples: 400, seed: 9 }, 0.999, h)
            .unwrap();
        let last = orders.len() - 1;
        assert_eq!(exact.ci.0, exact.ci.1);
        // The per-order means are unbiased for the exact expectation.
        let se = mc.std_error * 3.0 + 0.01;
        assert!((mc.per_order[last] - exact.per_order[last]).abs() < se);
        let wide = brin_katok_entropy(&mu, 0.3, &orders, BallKind::Open, BkMode::MonteCarlo { samples: 400, seed: 9 }, 0.5, h)
            .unwrap();
        assert!(wide.ci.1 - wide.ci.0 < mc.ci.1 - mc.ci.0);
        assert!(brin_katok_entropy(&mu, 0.3, &orders, BallKind::Open, BkMode::MonteCarlo { samples: 0, seed: 1 }, 0.9, h)
            .is_err());
    }
}
