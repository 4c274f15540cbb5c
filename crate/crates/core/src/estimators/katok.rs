//! Partial covers capturing all but `delta` of a measure.
//!
//! Nodes are quotiented by `(state, mass)` with masses matched on a 2^-32 grid
//! in log space. The constrained problem is attacked through its Lagrangian
//! `max_A lambda mu(A) - cost(A)`, which the tree solves exactly:
//! `gain(v) = max(0, lambda mu(v) - seal(v), sum of children)`.

use std::cell::RefCell;
use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::critical::{bisect_unit_crossing, initial_upper, CriticalEstimate, CriticalStatus};
use super::TruncationParams;
use crate::cover::{check_truncation, DepthOrders};
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::scalar::{log_add_exp, log_sub_exp};
use crate::subset::{Layered, NodeState, SubsetAutomaton, SubsetSpec, Target};
use crate::symbolic::{ball_cylinder_length, BallKind, ShiftSpec, Word};

/// Relative duality gap above which the result is double-checked or flagged.
pub const GAP_THRESHOLD: f64 = 1e-3;
/// Truncation depth up to which the exact partial-cover DP is affordable.
pub const EXACT_MAX_DEPTH: usize = 6;
const CLASS_LIMIT: usize = 4_000_000;
const MASS_GRID: f64 = 4294967296.0;
const EXACT_NODE_LIMIT: usize = 10_000;

type Key = (NodeState, i64);

struct KatokGraph {
    graph: Layered<Key>,
    log_mass: Vec<Vec<f64>>,
    log_mult: Vec<Vec<Vec<(u32, f64)>>>,
    orders: DepthOrders,
}

fn quantize(log_mass: f64) -> i64 {
    (log_mass * MASS_GRID).round() as i64
}

impl KatokGraph {
    fn new(shift: &ShiftSpec, mu: &MeasureSpec, epsilon: f64, n_min: usize, n_max: usize, kind: BallKind) -> Result<Self> {
        check_truncation(epsilon, n_min, n_max)?;
        mu.check_support(shift)?;
        let automaton = SubsetAutomaton::with_last(shift, &Target::Indicator(SubsetSpec::whole()), mu.is_markov())?;
        let orders = DepthOrders::new(epsilon, n_min, n_max, shift.alphabet_size(), kind);
        let d_max = orders.max_depth();
        let root: Key = (automaton.root(), 0);
        let mut repr: Vec<HashMap<Key, f64>> = vec![HashMap::new(); d_max + 2];
        repr[0].insert(root, 0.0);
        let mut classes = 1usize;
        let mut overflow = false;
        let graph = Layered::build(vec![root], d_max, |d, key: &Key| {
            if overflow {
                return Vec::new();
            }
            let lm = repr[d][key];
            let mut out = Vec::new();
            for (a, st) in automaton.children(key.0) {
                let lp = match key.0.last {
                    Some(p) => mu.log_transition(p, a),
                    None => mu.log_initial(a),
                };
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let child = lm + lp;
                let k = (st, quantize(child));
                if let std::collections::hash_map::Entry::Vacant(e) = repr[d + 1].entry(k) {
                    e.insert(child);
                    classes += 1;
                }
                out.push(k);
            }
            if classes > CLASS_LIMIT {
                overflow = true;
            }
            out
        });
        if overflow {
            return Err(Error::Refused(format!(
                "mass-quotiented tree exceeds {CLASS_LIMIT} classes; reduce n_max"
            )));
        }
        let log_mass = graph
            .layers
            .iter()
            .enumerate()
            .map(|(d, layer)| layer.iter().map(|k| repr[d][k]).collect())
            .collect();
        let log_mult = graph
            .children
            .iter()
            .map(|layer| layer.iter().map(|kids| kids.iter().map(|&(c, m)| (c, (m as f64).ln())).collect()).collect())
            .collect();
        Ok(KatokGraph { graph, log_mass, log_mult, orders })
    }

    /// Solves the Lagrangian at `lambda = e^{big_lambda}`; returns logs of (gain, covered mass, cost).
    fn pass(&self, s: f64, big_lambda: f64) -> (f64, f64, f64) {
        let d_max = self.orders.max_depth();
        let ninf = f64::NEG_INFINITY;
        let mut below: Vec<(f64, f64, f64)> = Vec::new();
        for d in (0..=d_max).rev() {
            let seal = self.orders.order_at(d).map(|n| -(n as f64) * s);
            let row: Vec<(f64, f64, f64)> = (0..self.graph.layers[d].len())
                .map(|i| {
                    let lm = self.log_mass[d][i];
                    let (mut g, mut m, mut c) = (ninf, ninf, ninf);
                    if d < d_max {
                        for &(k, lmult) in &self.log_mult[d][i] {
                            let (gk, mk, ck) = below[k as usize];
                            if gk > ninf {
                                g = log_add_exp(g, lmult + gk);
                                m = log_add_exp(m, lmult + mk);
                                c = log_add_exp(c, lmult + ck);
                            }
                        }
                    }
                    if let Some(b) = seal {
                        let a = big_lambda + lm;
                        if a > b {
                            let gs = log_sub_exp(a, b);
                            if gs >= g {
                                return (gs, lm, b);
                            }
                        }
                    }
                    (g, m, c)
                })
                .collect();
            below = row;
        }
        below.first().copied().unwrap_or((ninf, ninf, ninf))
    }

    /// Range of `ln(seal / mu)` over sealable classes.
    fn lambda_range(&self, s: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (d, masses) in self.log_mass.iter().enumerate() {
            if let Some(n) = self.orders.order_at(d) {
                for &lm in masses {
                    let r = -(n as f64) * s - lm;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        (lo, hi)
    }

    fn bounds(&self, s: f64, delta: f64) -> Result<PartialCoverBounds> {
        let thr = (1.0 - delta).ln();
        let (lo, hi) = self.lambda_range(s);
        let mut lam_lo = lo - 1.0;
        let mut lam_hi = hi + 1.0 - delta.ln();
        let mut at_hi = self.pass(s, lam_hi);
        let mut widen = 0;
        while at_hi.1 <= thr {
            if widen == 20 {
                return Err(Error::Infeasible(format!("no cover captures more than {} of the mass", 1.0 - delta)));
            }
            lam_lo = lam_hi;
            lam_hi += 30.0;
            at_hi = self.pass(s, lam_hi);
            widen += 1;
        }
        let mut at_lo = self.pass(s, lam_lo);
        if at_lo.1 > thr {
            at_hi = at_lo;
            lam_hi = lam_lo;
        } else {
            for _ in 0..200 {
                if lam_hi - lam_lo <= 1e-10 * lam_hi.abs().max(1.0) {
                    break;
                }
                let mid = 0.5 * (lam_lo + lam_hi);
                let r = self.pass(s, mid);
                if r.1 > thr {
                    lam_hi = mid;
                    at_hi = r;
                } else {
                    lam_lo = mid;
                    at_lo = r;
                }
            }
        }
        let lower = |lam: f64, gain: f64| {
            let a = lam + thr;
            if a > gain {
                log_sub_exp(a, gain)
            } else {
                f64::NEG_INFINITY
            }
        };
        let log_lower = lower(lam_lo, at_lo.0).max(lower(lam_hi, at_hi.0)).min(at_hi.2);
        let log_upper = at_hi.2;
        Ok(PartialCoverBounds {
            s,
            delta,
            log_lower,
            log_upper,
            covered_log_mass: at_hi.1,
            log_lambda: lam_hi,
            relative_gap: -(log_lower - log_upper).exp_m1(),
            exact: false,
        })
    }
}

/// Lagrangian bounds on the cheapest cover of mass `> 1 - delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialCoverBounds {
    pub s: f64,
    pub delta: f64,
    /// Natural log of the dual bound `lambda (1 - delta) - Gain(lambda)`.
    pub log_lower: f64,
    /// Natural log of the cost of the feasible Lagrangian cover.
    pub log_upper: f64,
    pub covered_log_mass: f64,
    pub log_lambda: f64,
    pub relative_gap: f64,
    /// Both bounds were replaced by the exact small-depth optimum.
    pub exact: bool,
}

/// Lower and upper bounds on `Lambda^s_{N,eps}(mu, delta)` at one exponent.
pub fn partial_cover_bounds(
    shift: &ShiftSpec,
    mu: &MeasureSpec,
    delta: f64,
    epsilon: f64,
    s: f64,
    params: &TruncationParams,
) -> Result<PartialCoverBounds> {
    check_delta(delta)?;
    KatokGraph::new(shift, mu, epsilon, params.n_min, params.n_max, params.kind)?.bounds(s, delta)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Exact cheapest cover of mass `> 1 - delta` by enumeration of Pareto fronts of
/// `(mass, cost)` on the explicit tree, with rational masses.
#[allow(clippy::too_many_arguments)]
pub fn exact_partial_cover(
    shift: &ShiftSpec,
    mu: &MeasureSpec,
    delta: f64,
    epsilon: f64,
    n_min: usize,
    n_max: usize,
    kind: BallKind,
    s: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_truncation(epsilon, n_min, n_max)?;
    mu.check_support(shift)?;
    let alphabet = shift.alphabet_size();
    let d_max = ball_cylinder_length(n_max, epsilon, alphabet, kind);
    let seal_at = |depth: usize| -> Option<f64> {
        (n_min..=n_max)
            .filter(|&n| ball_cylinder_length(n, epsilon, alphabet, kind) == depth)
            .max()
            .map(|n| (-(n as f64) * s).exp())
    };
    let threshold = BigRational::from_float(1.0 - delta).expect("finite");

    struct Node {
        mass: BigRational,
        depth: usize,
        children: Vec<usize>,
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack: Vec<(Word, usize)> = vec![(Word::empty(), usize::MAX)];
    while let Some((w, parent)) = stack.pop() {
        if nodes.len() >= EXACT_NODE_LIMIT {
            return Err(Error::Refused(format!("explicit tree exceeds {EXACT_NODE_LIMIT} nodes")));
        }
        let id = nodes.len();
        nodes.push(Node { mass: mu.exact_cylinder_mass(&w)?, depth: w.len(), children: Vec::new() });
        if parent != usize::MAX {
            nodes[parent].children.push(id);
        }
        if w.len() < d_max {
            for a in (0..alphabet as u8).rev() {
                let c = w.extended(a);
                if shift.is_admissible(c.symbols()) && !mu.exact_cylinder_mass(&c)?.is_zero() {
                    stack.push((c, id));
                }
            }
        }
    }

    fn prune(mut front: Vec<(BigRational, f64)>) -> Vec<(BigRational, f64)> {
        front.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(BigRational, f64)> = Vec::new();
        for p in front {
            if out.last().is_none_or(|q| p.1 < q.1) {
                out.push(p);
            }
        }
        out
    }

    let mut fronts: Vec<Vec<(BigRational, f64)>> = vec![Vec::new(); nodes.len()];
    for v in (0..nodes.len()).rev() {
        let mut combos = vec![(BigRational::zero(), 0.0)];
        if nodes[v].depth < d_max {
            for &c in &nodes[v].children {
                let child = std::mem::take(&mut fronts[c]);
                let mut next = Vec::with_capacity(combos.len() * child.len());
                for a in &combos {
                    for b in &child {
                        next.push((&a.0 + &b.0, a.1 + b.1));
                    }
                }
                combos = prune(next);
            }
        }
        if let Some(cost) = seal_at(nodes[v].depth) {
            combos.push((nodes[v].mass.clone(), cost));
        }
        fronts[v] = prune(combos);
    }
    fronts[0]
        .iter()
        .filter(|(m, _)| *m > threshold)
        .map(|p| p.1)
        .reduce(f64::min)
        .ok_or_else(|| Error::Infeasible(format!("no cover captures more than {} of the mass", 1.0 - delta)))
}

/// Critical exponent of the partial-cover cost for one `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatokEstimate {
    pub delta: f64,
    pub estimate: CriticalEstimate,
    /// Root of the lower bound and of the upper bound; the true root lies between.
    pub lower_root: f64,
    pub upper_root: f64,
    /// Largest relative duality gap at the bracket ends.
    pub duality_gap: f64,
    pub exact_checked: bool,
    pub warnings: Vec<String>,
}

/// `Lambda_eps(mu, delta)`: the exponent where the cheapest cover of mass `> 1 - delta` costs 1.
pub fn katok_critical(
    shift: &ShiftSpec,
    mu: &MeasureSpec,
    delta: f64,
    epsilon: f64,
    params: &TruncationParams,
) -> Result<KatokEstimate> {
    check_delta(delta)?;
    params.validate()?;
    let graph = KatokGraph::new(shift, mu, epsilon, params.n_min, params.n_max, params.kind)?;
    let d_max = graph.orders.max_depth();
    let cache: RefCell<HashMap<u64, PartialCoverBounds>> = RefCell::new(HashMap::new());
    let eval = |s: f64| -> Result<PartialCoverBounds> {
        if let Some(b) = cache.borrow().get(&s.to_bits()) {
            return Ok(b.clone());
        }
        let mut b = graph.bounds(s, delta)?;
        if b.relative_gap > GAP_THRESHOLD && d_max <= EXACT_MAX_DEPTH {
            let exact = exact_partial_cover(shift, mu, delta, epsilon, params.n_min, params.n_max, params.kind, s)?;
            b.log_lower = exact.ln();
            b.log_upper = exact.ln();
            b.relative_gap = 0.0;
            b.exact = true;
        }
        cache.borrow_mut().insert(s.to_bits(), b.clone());
        Ok(b)
    };
    let s_hi = initial_upper(shift.alphabet_size(), epsilon);
    let lower = bisect_unit_crossing(|s| eval(s).map(|b| b.log_lower), s_hi, params.tol)?;
    let upper = bisect_unit_crossing(|s| eval(s).map(|b| b.log_upper), s_hi, params.tol)?;
    let at_lo = eval(lower.bracket.0)?;
    let at_hi = eval(upper.bracket.1)?;
    let duality_gap = at_lo.relative_gap.max(at_hi.relative_gap);
    let exact_checked = at_lo.exact || at_hi.exact;
    let mut warnings = Vec::new();
    if duality_gap > GAP_THRESHOLD {
        warnings.push(format!(
            "duality gap {duality_gap:.3e} exceeds {GAP_THRESHOLD:e}; the root lies in [{:.6}, {:.6}]",
            lower.s_star, upper.s_star
        ));
    }
    let status = match (lower.status, upper.status) {
        (CriticalStatus::NotConverged, _) | (_, CriticalStatus::NotConverged) => CriticalStatus::NotConverged,
        (_, CriticalStatus::ZeroCrossing) => CriticalStatus::ZeroCrossing,
        _ => CriticalStatus::Converged,
    };
    let s_star = 0.5 * (lower.s_star + upper.s_star);
    let estimate = CriticalEstimate {
        s_star,
        bracket: (lower.bracket.0, upper.bracket.1),
        epsilon,
        n_min: params.n_min,
        n_max: params.n_max,
        d_max,
        log_cost_at_bracket: (at_lo.log_lower, at_hi.log_upper),
        converged: status == CriticalStatus::Converged,
        status,
        evaluations: cache.borrow().len(),
        schedule: vec![(params.n_min, s_star)],
    };
    Ok(KatokEstimate {
        delta,
        estimate,
        lower_root: lower.s_star,
        upper_root: upper.s_star,
        duality_gap,
        exact_checked,
        warnings,
    })
}

/// `Lambda_eps(mu, delta)` over a decreasing `delta` schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatokTable {
    pub epsilon: f64,
    pub rows: Vec<KatokEstimate>,
    /// The estimate at the smallest `delta`.
    pub value: f64,
    /// `Lambda` is non-decreasing as `delta` decreases, within tolerance.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

pub fn katok_entropy(
    shift: &ShiftSpec,
    mu: &MeasureSpec,
    epsilon: f64,
    deltas: &[f64],
    params: &TruncationParams,
) -> Result<KatokTable> {
    super::check_decreasing(deltas, "delta")?;
    let rows: Vec<KatokEstimate> = deltas
        .iter()
        .map(|&d| katok_critical(shift, mu, d, epsilon, params))
        .collect::<Result<_>>()?;
    let mut warnings: Vec<String> = rows.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    let mut monotone = true;
    for w in rows.windows(2) {
        if w[1].estimate.bracket.1 + params.tol < w[0].estimate.bracket.0 {
            monotone = false;
            warnings.push(format!(
                "Lambda decreased from {:.6} (delta = {}) to {:.6} (delta = {})",
                w[0].estimate.s_star, w[0].delta, w[1].estimate.s_star, w[1].delta
            ));
        }
    }
    let value = rows.last().map_or(f64::NAN, |r| r.estimate.s_star);
    Ok(KatokTable { epsilon, rows, value, monotone, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrangian_brackets_exact_optimum() {
        let shift = ShiftSpec::full(2).unwrap();
        let mu = MeasureSpec::bernoulli_rational(&[(3, 4), (1, 4)]).unwrap();
        let params = TruncationParams::new(1, 4);
        for &delta in &[0.05, 0.3, 0.6] {
            for &s in &[0.2, 0.7, 1.4] {
                let b = partial_cover_bounds(&shift, &mu, delta, 0.5, s, &params).unwrap();
                let exact = exact_partial_cover(&shift, &mu, delta, 0.5, 1, 4, BallKind::Open, s).unwrap().ln();
                assert!(b.log_lower <= exact + 1e-9, "{b:?} vs {exact}");
                assert!(exact <= b.log_upper + 1e-9, "{b:?} vs {exact}");
                if b.relative_gap < 1e-12 {
                    assert!((b.log_upper - exact).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let shift = ShiftSpec::full(2).unwrap();
        let mu = MeasureSpec::uniform(2).unwrap();
        let p = TruncationParams::new(2, 10);
        assert!(katok_critical(&shift, &mu, 0.0, 0.3, &p).is_err());
        assert!(katok_critical(&shift, &mu, 1.0, 0.3, &p).is_err());
    }

    #[test]
    fn point_mass_has_zero_exponent() {
        let shift = ShiftSpec::full(2).unwrap();
        let mu = MeasureSpec::bernoulli(vec![1.0, 0.0]).unwrap();
        let k = katok_critical(&shift, &mu, 0.1, 0.3, &TruncationParams::new(5, 30)).unwrap();
        assert_eq!(k.estimate.s_star, 0.0);
        assert_eq!(k.estimate.status, CriticalStatus::ZeroCrossing);
    }

    #[test]
    fn uniform_katok_close_to_full_cover() {
        let shift = ShiftSpec::full(3).unwrap();
        let mu = MeasureSpec::uniform(3).unwrap();
        let t = katok_entropy(&shift, &mu, 0.3, &[0.1, 0.01], &TruncationParams::default()).unwrap();
        assert!(t.monotone);
        assert!((t.value - (3f64.ln() + 0.3)).abs() < 0.05, "{}", t.value);
    }
}
