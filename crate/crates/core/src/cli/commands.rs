//! One function per subcommand, each producing output rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{BkModeConfig, RunConfig};
use super::output::ResultRecord;
use crate::cover::{brute_force_cover, check_laminar_integrality, CoverGeometry, CoverProblem};
use crate::error::{Error, Result};
use crate::estimators::{
    brin_katok_entropy, critical_exponent, critical_exponent_with_schedule, katok_entropy, linear_extrapolation,
    spanning_entropy, variational_sandwich, BkMode, CriticalStatus, SandwichOptions, GAP_THRESHOLD,
};
use crate::scalar::{CostScalar, HighPrecision, LogF64, Precision};
use crate::subset::{SubsetSpec, Target};
use crate::symbolic::{ball_cylinder_length, ShiftSpec, Word};

/// Rows plus the process exit code they imply.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub records: Vec<ResultRecord>,
    pub exit_code: i32,
    pub messages: Vec<String>,
}

impl Outcome {
    pub(crate) fn push(&mut self, r: ResultRecord) {
        self.records.push(r);
    }

    /// Records a failed row; the worst code wins.
    pub(crate) fn fail(&mut self, r: ResultRecord, e: &Error) {
        self.exit_code = self.exit_code.max(e.exit_code());
        self.messages.push(e.to_string());
        let mut r = r;
        r.converged = false;
        r.error = Some(format!("{}: {e}", e.category()));
        self.records.push(r);
    }

    pub(crate) fn absorb(&mut self, other: Outcome) {
        self.exit_code = self.exit_code.max(other.exit_code);
        self.records.extend(other.records);
        self.messages.extend(other.messages);
    }
}

fn base(cfg: &RunConfig, quantity: &str) -> ResultRecord {
    ResultRecord::new(quantity, cfg.compute.n_min, cfg.compute.n_max)
}

fn extrapolated(cfg: &RunConfig, quantity: &str, xs: &[f64], ys: &[f64], out: &mut Outcome) {
    if let Some(fit) = linear_extrapolation(xs, ys) {
        let r = fit.rms_residual;
        out.push(base(cfg, quantity).values(fit.intercept, fit.intercept - r, fit.intercept + r, true).diagnostics(&fit));
    }
}

pub fn entropy(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let subset = cfg.subset_spec()?;
    let params = cfg.params();
    let mut out = Outcome::default();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &eps in &cfg.compute.epsilon {
        let row = base(cfg, "bowen_entropy").epsilon(eps);
        let est = match &cfg.compute.n_min_schedule {
            Some(sched) => critical_exponent_with_schedule(&shift, &subset, eps, &params, sched),
            None => critical_exponent(&shift, &subset, eps, &params),
        };
        match est {
            Ok(est) => {
                let row = row.d_max(est.d_max).values(est.s_star, est.bracket.0, est.bracket.1, est.converged).diagnostics(&est);
                if est.status == CriticalStatus::EmptySet {
                    out.fail(row, &Error::Infeasible("the subset is empty; its cover cost vanishes".into()));
                    continue;
                }
                if est.status == CriticalStatus::NotConverged {
                    out.messages.push(format!("eps = {eps}: bisection did not converge"));
                }
                xs.push(eps);
                ys.push(est.s_star);
                out.push(row);
            }
            Err(e) => out.fail(row, &e),
        }
    }
    extrapolated(cfg, "bowen_entropy_extrapolated", &xs, &ys, &mut out);
    Ok(out)
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

pub fn katok(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let mu = cfg.require_measure()?;
    let params = cfg.params();
    let deltas = sorted_desc(&cfg.compute.delta);
    let mut out = Outcome::default();
    for &eps in &cfg.compute.epsilon {
        let table = match katok_entropy(&shift, &mu, eps, &deltas, &params) {
            Ok(t) => t,
            Err(e) => {
                out.fail(base(cfg, "katok_entropy").epsilon(eps), &e);
                continue;
            }
        };
        for w in &table.warnings {
            out.messages.push(format!("eps = {eps}: {w}"));
        }
        for k in &table.rows {
            let e = &k.estimate;
            let row = base(cfg, "katok_exponent")
                .epsilon(eps)
                .delta(k.delta)
                .d_max(e.d_max)
                .values(e.s_star, k.lower_root, k.upper_root, e.converged && k.duality_gap <= GAP_THRESHOLD)
                .diagnostics(&json!({
                    "duality_gap": k.duality_gap,
                    "exact_checked": k.exact_checked,
                    "bracket": e.bracket,
                    "status": e.status,
                    "warnings": k.warnings,
                }));
            if k.duality_gap > cfg.compute.max_duality_gap {
                let msg = format!("duality gap {:.3e} exceeds the limit {}", k.duality_gap, cfg.compute.max_duality_gap);
                out.fail(row, &Error::Invariant(msg));
            } else {
                out.push(row);
            }
        }
        let last = table.rows.last().expect("non-empty delta schedule");
        out.push(
            base(cfg, "katok_entropy")
                .epsilon(eps)
                .delta(last.delta)
                .d_max(last.estimate.d_max)
                .values(table.value, last.lower_root, last.upper_root, last.estimate.converged && table.monotone)
                .diagnostics(&json!({ "monotone": table.monotone, "warnings": table.warnings })),
        );
    }
    Ok(out)
}

pub fn brin_katok(cfg: &RunConfig) -> Result<Outcome> {
    let mu = cfg.require_measure()?;
    let orders = cfg.orders();
    let mode = match cfg.compute.bk_mode {
        BkModeConfig::Exact => BkMode::ExactExpectation,
        BkModeConfig::MonteCarlo => BkMode::MonteCarlo { samples: cfg.compute.samples, seed: cfg.require_seed()? },
    };
    let mut out = Outcome::default();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &eps in &cfg.compute.epsilon {
        let row = base(cfg, "brin_katok").epsilon(eps);
        match brin_katok_entropy(&mu, eps, &orders, cfg.compute.ball, mode, cfg.compute.confidence, Some(mu.entropy_rate())) {
            Ok(r) => {
                let d = ball_cylinder_length(*orders.last().expect("non-empty"), eps, mu.alphabet_size(), cfg.compute.ball);
                xs.push(eps);
                ys.push(r.integral_estimate);
                out.push(row.d_max(d).values(r.integral_estimate, r.ci.0, r.ci.1, true).diagnostics(&r));
            }
            Err(e) => out.fail(row, &e),
        }
    }
    extrapolated(cfg, "brin_katok_extrapolated", &xs, &ys, &mut out);
    Ok(out)
}

pub fn spanning(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let orders = cfg.orders();
    let eps = sorted_desc(&cfg.compute.epsilon);
    let mut out = Outcome::default();
    match spanning_entropy(&shift, &eps, &orders) {
        Ok(t) => {
            let n_last = *orders.last().expect("non-empty");
            for row in &t.rows {
                let d = ball_cylinder_length(n_last, row.epsilon, shift.alphabet_size(), crate::BallKind::Closed);
                out.push(base(cfg, "spanning_rate").epsilon(row.epsilon).d_max(d).point(row.r, true).diagnostics(&row.rates));
            }
            let xs: Vec<f64> = t.rows.iter().map(|r| r.epsilon).collect();
            let ys: Vec<f64> = t.rows.iter().map(|r| r.r).collect();
            extrapolated(cfg, "spanning_entropy_extrapolated", &xs, &ys, &mut out);
        }
        Err(e) => out.fail(base(cfg, "spanning_rate"), &e),
    }
    Ok(out)
}

fn frostman_check<S: CostScalar>(g: &CoverGeometry, s: f64, row: ResultRecord, out: &mut Outcome) {
    let f = match g.frostman::<S>(s) {
        Ok(f) => f,
        Err(e) => {
            let e = match e {
                Error::Degenerate(m) => Error::Infeasible(m),
                other => other,
            };
            return out.fail(row, &e);
        }
    };
    let integral = g.integral_cost::<S>(s);
    let (fractional, _) = g.fractional_cover::<S>(s);
    let dual_gap = f.total_mass.rel_diff(&integral);
    let audit = f.audit().clone();
    let row = row.values(f.total_mass.ln(), f.delivered.ln(), integral.ln(), true).not_entropy().diagnostics(&json!({
        "s": s,
        "duality_relative_gap": dual_gap,
        "fractional_log_cost": fractional.ln(),
        "audit": audit,
    }));
    if let Err(e) = check_laminar_integrality(&integral, &fractional) {
        return out.fail(row, &e);
    }
    if dual_gap > 1e-9 {
        return out.fail(row, &Error::Invariant(format!("flow value and cover cost differ by {dual_gap:e}")));
    }
    if audit.violations > 0 {
        return out.fail(row, &Error::Invariant(format!("{} classes exceed the mass bound", audit.violations)));
    }
    out.push(row);
}

pub fn frostman(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let subset = cfg.subset_spec()?;
    let params = cfg.params();
    let c = &cfg.compute;
    let mut out = Outcome::default();
    for &eps in &c.epsilon {
        let row = base(cfg, "frostman_log_mass").epsilon(eps);
        let g = match CoverGeometry::new(&shift, &Target::Indicator(subset.clone()), eps, c.n_min, c.n_max, c.ball) {
            Ok(g) => g,
            Err(e) => {
                out.fail(row, &e);
                continue;
            }
        };
        let row = row.d_max(g.max_depth());
        let s = match c.s {
            Some(s) => s,
            None => match critical_exponent(&shift, &subset, eps, &params) {
                Ok(est) if est.status == CriticalStatus::EmptySet => {
                    out.fail(row, &Error::Infeasible("the subset is empty".into()));
                    continue;
                }
                Ok(est) => est.bracket.0,
                Err(e) => {
                    out.fail(row, &e);
                    continue;
                }
            },
        };
        match c.precision {
            Precision::Double => frostman_check::<LogF64>(&g, s, row, &mut out),
            Precision::High => frostman_check::<HighPrecision>(&g, s, row, &mut out),
        }
    }
    Ok(out)
}

pub fn sandwich(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let subset = cfg.subset_spec()?;
    let params = cfg.params();
    let options = SandwichOptions {
        katok_measure: cfg.measure_spec()?,
        deltas: sorted_desc(&cfg.compute.delta),
        samples: cfg.compute.samples,
        seed: cfg.require_seed()?,
        tolerance: cfg.compute.check_tol,
        orders: cfg.compute.orders.clone(),
    };
    let mut out = Outcome::default();
    for &eps in &cfg.compute.epsilon {
        let r = match variational_sandwich(&shift, &subset, eps, &params, &options) {
            Ok(r) => r,
            Err(e) => {
                out.fail(base(cfg, "sandwich_critical").epsilon(eps), &e);
                continue;
            }
        };
        let d = r.critical.d_max;
        out.push(
            base(cfg, "sandwich_critical")
                .epsilon(eps)
                .d_max(d)
                .values(r.critical.s_star, r.critical.bracket.0, r.critical.bracket.1, r.critical.converged),
        );
        let bk = &r.bk_frostman;
        let lower = base(cfg, "sandwich_bk_frostman")
            .epsilon(2.0 * eps)
            .d_max(d)
            .values(bk.integral_estimate, bk.ci.0, bk.ci.1, r.lower_holds)
            .diagnostics(&json!({ "frostman_exponent": r.frostman_exponent, "frostman_log_mass": r.frostman_log_mass }));
        if r.lower_holds {
            out.push(lower);
        } else {
            let msg = format!("s* = {} exceeds BK(2 eps) = {} by more than {}", r.critical.s_star, bk.integral_estimate, r.tolerance);
            out.fail(lower, &Error::Invariant(msg));
        }
        if let Some(t) = &r.katok {
            let last = t.rows.last().expect("non-empty delta schedule");
            let upper = base(cfg, "sandwich_katok")
                .epsilon(eps)
                .delta(last.delta)
                .d_max(d)
                .values(t.value, last.lower_root, last.upper_root, r.upper_holds);
            if r.upper_holds {
                out.push(upper);
            } else {
                let msg = format!("Katok = {} exceeds s* = {} by more than {}", t.value, r.critical.s_star, r.tolerance);
                out.fail(upper, &Error::Invariant(msg));
            }
        }
    }
    Ok(out)
}

/// Largest truncation depth used by `oracle-check` instances.
pub const ORACLE_MAX_DEPTH: usize = 5;
/// Agreement required between the DP and exhaustive search (high precision).
pub const ORACLE_TOL: f64 = 1e-12;

fn random_word(shift: &ShiftSpec, rng: &mut ChaCha8Rng, len: usize) -> Option<Word> {
    let n = shift.alphabet_size() as u8;
    for _ in 0..100 {
        let w: Vec<u8> = (0..len).map(|_| rng.random_range(0..n)).collect();
        if shift.is_admissible(&w) {
            return Some(Word::new(w));
        }
    }
    None
}

/// A random small instance over `shift` with truncation depth at most `ORACLE_MAX_DEPTH`.
pub fn random_oracle_problem(shift: &ShiftSpec, rng: &mut ChaCha8Rng) -> CoverProblem {
    let ln_n = (shift.alphabet_size() as f64).ln();
    loop {
        let eps = rng.random_range(0.05..1.5);
        let n_min = rng.random_range(1..=4usize);
        let n_max = n_min + rng.random_range(0..=4usize);
        let kind = if rng.random_bool(0.5) { crate::BallKind::Open } else { crate::BallKind::Closed };
        let d_max = ball_cylinder_length(n_max, eps, shift.alphabet_size(), kind);
        if d_max > ORACLE_MAX_DEPTH {
            continue;
        }
        let subset = if rng.random_bool(0.3) {
            SubsetSpec::whole()
        } else {
            let k = rng.random_range(1..=4usize);
            let words: Vec<Word> =
                (0..k)
                .filter_map(|_| {
                    let len = rng.random_range(1..=d_max);
                    random_word(shift, rng, len)
                })
                .collect();
            if words.is_empty() {
                continue;
            }
            SubsetSpec::cylinders(words).expect("non-empty")
        };
        let s = rng.random_range(0.0..ln_n + 1.5);
        return CoverProblem::new(shift.clone(), subset, eps, n_min, n_max, s).expect("valid instance").with_kind(kind);
    }
}

pub fn oracle_check(cfg: &RunConfig) -> Result<Outcome> {
    let shift = cfg.shift()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.require_seed()?);
    let mut out = Outcome::default();
    let (mut agree, mut total) = (0usize, 0usize);
    let mut attempts = 0usize;
    while total < cfg.compute.samples {
        attempts += 1;
        if attempts > 100 * cfg.compute.samples.max(1) {
            return Err(Error::Refused("could not generate enough instances within the brute-force limits".into()));
        }
        let p = random_oracle_problem(&shift, &mut rng);
        let brute = match brute_force_cover::<HighPrecision>(&p) {
            Ok(b) => b,
            Err(Error::Refused(_)) => continue,
            Err(e) => return Err(e),
        };
        total += 1;
        let g = CoverGeometry::from_problem(&p)?;
        let dp = g.integral_cost::<HighPrecision>(p.s);
        let diff = dp.rel_diff(&brute);
        let row = ResultRecord::new("dp_vs_brute_force", p.n_min, p.n_max)
            .epsilon(p.epsilon)
            .d_max(g.max_depth())
            .values(diff, dp.ln(), brute.ln(), diff <= ORACLE_TOL)
            .not_entropy()
            .diagnostics(&json!({ "s": p.s, "kind": p.kind, "subset": p.subset }));
        if diff <= ORACLE_TOL {
            agree += 1;
            out.push(row);
        } else {
            out.fail(row, &Error::Invariant(format!("DP and brute force differ by {diff:e}")));
        }
    }
    let verdict = if agree == total { "dp == brute-force" } else { "dp != brute-force" };
    out.messages.push(format!("{verdict}: {agree}/{total} instances agree within {ORACLE_TOL:e}"));
    Ok(out)
}
