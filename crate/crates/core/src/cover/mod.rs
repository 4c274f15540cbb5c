//! Minimal-cost covers by neutralized Bowen balls on the quotiented prefix tree.
//!
//! A ball of order `n` is the cylinder of length `D(n)`, so a cover is an
//! antichain of tree nodes meeting every branch through the subset. Nodes are
//! merged into classes `(depth, state)`, where the state records the position
//! in the subset's defining prefix structure and, for subshifts, the last
//! symbol. All recursions run bottom-up over these classes.

mod brute;
mod frostman;
mod vitali;

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::CostScalar;
use crate::subset::{Layered, NodeState, Region, SubsetAutomaton, SubsetSpec, Target};
use crate::symbolic::{ball_cylinder_length, BallKind, ShiftSpec};

pub use brute::{brute_force_cover, BRUTE_FORCE_ANTICHAIN_LIMIT, BRUTE_FORCE_NODE_LIMIT};
pub use frostman::{Frostman, FrostmanAudit, TreeMeasure};
pub use vitali::{five_r_select, radius_cylinder_length, vitali_cover_holds, weighted_sandwich_threshold};

/// Layers at least this wide are evaluated in parallel.
const PARALLEL_LAYER: usize = 2048;

/// Relative tolerance for the equality of fractional and integral optima on indicators.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// A truncated cover problem `M^s_{N,eps}(Z)` with orders in `[n_min, n_max]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProblem {
    pub shift: ShiftSpec,
    pub subset: SubsetSpec,
    pub epsilon: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub s: f64,
    pub kind: BallKind,
}

impl CoverProblem {
    pub fn new(shift: ShiftSpec, subset: SubsetSpec, epsilon: f64, n_min: usize, n_max: usize, s: f64) -> Result<Self> {
        let p = CoverProblem { shift, subset, epsilon, n_min, n_max, s, kind: BallKind::Open };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kind(mut self, kind: BallKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_exponent(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_truncation(self.epsilon, self.n_min, self.n_max)?;
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::Config(format!("exponent must be finite and >= 0, got {}", self.s)));
        }
        self.subset.validate(&self.shift)?;
        let d_max = self.max_depth();
        if self.subset.max_cylinder_len() > d_max {
            return Err(Error::Config(format!(
                "subset cylinder of length {} is deeper than the truncation depth {d_max}",
                self.subset.max_cylinder_len()
            )));
        }
        Ok(())
    }

    /// `D_max = D(n_max)`.
    pub fn max_depth(&self) -> usize {
        ball_cylinder_length(self.n_max, self.epsilon, self.shift.alphabet_size(), self.kind)
    }

    pub fn orders(&self) -> DepthOrders {
        DepthOrders::new(self.epsilon, self.n_min, self.n_max, self.shift.alphabet_size(), self.kind)
    }

    /// The order sealing a node at `depth`, if any.
    pub fn seal_order(&self, depth: usize) -> Option<usize> {
        self.orders().order_at(depth)
    }

    /// `e^{-n s}` for the order realizing `depth`; `None` at a depth gap.
    pub fn seal_cost(&self, depth: usize) -> Option<f64> {
        self.seal_order(depth).map(|n| (-(n as f64) * self.s).exp())
    }
}

pub(crate) fn check_truncation(epsilon: f64, n_min: usize, n_max: usize) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    if n_min == 0 || n_min > n_max {
        return Err(Error::Config(format!("need 1 <= n_min <= n_max, got {n_min}..{n_max}")));
    }
    Ok(())
}

/// Which order, if any, realizes each depth `0..=D_max`.
///
/// `D(n)` is strictly increasing, so each depth has at most one order.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthOrders {
    orders: Vec<Option<usize>>,
}

impl DepthOrders {
    pub fn new(epsilon: f64, n_min: usize, n_max: usize, alphabet: usize, kind: BallKind) -> Self {
        let d_max = ball_cylinder_length(n_max, epsilon, alphabet, kind);
        let mut orders = vec![None; d_max + 1];
        for n in n_min..=n_max {
            orders[ball_cylinder_length(n, epsilon, alphabet, kind)] = Some(n);
        }
        DepthOrders { orders }
    }

    pub fn max_depth(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn order_at(&self, depth: usize) -> Option<usize> {
        self.orders.get(depth).copied().flatten()
    }

    /// Depths in `[D(n_min), D_max]` that no order realizes.
    pub fn gaps(&self) -> Vec<usize> {
        let first = self.orders.iter().position(Option::is_some).unwrap_or(0);
        (first..self.orders.len()).filter(|&d| self.orders[d].is_none()).collect()
    }
}

fn decimal<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// `count` balls of order `order` (cylinders of length `depth`) each with weight `weight`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SealedBalls {
    pub depth: usize,
    pub order: usize,
    pub weight: f64,
    #[serde(serialize_with = "decimal")]
    pub count: BigUint,
}

/// An optimal cover, aggregated by depth and weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSolution {
    pub s: f64,
    pub integral: bool,
    pub log_cost: f64,
    pub balls: Vec<SealedBalls>,
}

impl CoverSolution {
    fn from_map(s: f64, integral: bool, log_cost: f64, map: BTreeMap<(usize, u64), (usize, BigUint)>) -> Self {
        let balls = map
            .into_iter()
            .filter(|(_, (_, c))| !c.is_zero())
            .map(|((depth, w), (order, count))| SealedBalls { depth, order, weight: f64::from_bits(w), count })
            .collect();
        CoverSolution { s, integral, log_cost, balls }
    }

    /// `sum c_i e^{-n_i s}` recomputed from the ball list.
    pub fn recomputed_cost<S: CostScalar>(&self) -> S {
        let terms: Vec<S> = self
            .balls
            .iter()
            .map(|b| S::exp_neg(b.order, self.s).mul(&S::from_f64(b.weight)).mul(&S::from_count(&b.count)))
            .collect();
        S::sum(&terms)
    }

    pub fn ball_count(&self) -> BigUint {
        self.balls.iter().map(|b| &b.count).sum()
    }
}

/// The quotiented tree for one `(shift, target, eps, n_min, n_max, kind)`, reusable across exponents.
#[derive(Clone, Debug)]
pub struct CoverGeometry {
    pub(crate) automaton: Arc<SubsetAutomaton>,
    pub(crate) graph: Arc<Layered<NodeState>>,
    orders: DepthOrders,
}

impl CoverGeometry {
    pub fn new(
        shift: &ShiftSpec,
        target: &Target,
        epsilon: f64,
        n_min: usize,
        n_max: usize,
        kind: BallKind,
    ) -> Result<Self> {
        check_truncation(epsilon, n_min, n_max)?;
        let automaton = SubsetAutomaton::new(shift, target)?;
        let orders = DepthOrders::new(epsilon, n_min, n_max, shift.alphabet_size(), kind);
        if automaton.max_cylinder_len() > orders.max_depth() {
            return Err(Error::Config(format!(
                "target cylinder of length {} is deeper than the truncation depth {}",
                automaton.max_cylinder_len(),
                orders.max_depth()
            )));
        }
        let graph = Layered::from_automaton(&automaton, orders.max_depth());
        Ok(CoverGeometry { automaton: Arc::new(automaton), graph: Arc::new(graph), orders })
    }

    pub fn from_problem(p: &CoverProblem) -> Result<Self> {
        p.validate()?;
        Self::new(&p.shift, &Target::Indicator(p.subset.clone()), p.epsilon, p.n_min, p.n_max, p.kind)
    }

    pub fn max_depth(&self) -> usize {
        self.orders.max_depth()
    }

    pub fn orders(&self) -> &DepthOrders {
        &self.orders
    }

    /// Number of node classes in the quotiented tree.
    pub fn class_count(&self) -> usize {
        self.graph.class_count()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.layers[0].is_empty()
    }

    fn seals<S: CostScalar>(&self, s: f64) -> Vec<Option<S>> {
        self.orders.orders.iter().map(|o| o.map(|n| S::exp_neg(n, s))).collect()
    }

    fn descend_sum<S: CostScalar>(&self, d: usize, i: usize, below: &[S]) -> S {
        let terms: Vec<S> = self.graph.children[d][i]
            .iter()
            .map(|&(c, m)| below[c as usize].scale(m as u64))
            .collect();
        S::sum(&terms)
    }

    /// Bottom-up `cost(v) = min(seal(v), sum of children)`; ties seal.
    fn integral_table<S: CostScalar>(&self, s: f64) -> (Vec<Vec<S>>, Vec<Vec<bool>>) {
        let seals = self.seals::<S>(s);
        let d_max = self.max_depth();
        let mut cost: Vec<Vec<S>> = vec![Vec::new(); d_max + 1];
        let mut sealed: Vec<Vec<bool>> = vec![Vec::new(); d_max + 1];
        for d in (0..=d_max).rev() {
            let width = self.graph.layers[d].len();
            let eval = |i: usize| -> (S, bool) {
                if d == d_max {
                    return (seals[d].clone().expect("D_max is realized by n_max"), true);
                }
                let descend = self.descend_sum(d, i, &cost[d + 1]);
                match &seals[d] {
                    Some(x) if x.less_eq(&descend) => (x.clone(), true),
                    _ => (descend, false),
                }
            };
            let row: Vec<(S, bool)> = if width >= PARALLEL_LAYER {
                (0..width).into_par_iter().map(eval).collect()
            } else {
                (0..width).map(eval).collect()
            };
            let (c, f): (Vec<S>, Vec<bool>) = row.into_iter().unzip();
            cost[d] = c;
            sealed[d] = f;
        }
        (cost, sealed)
    }

    /// Optimal cost only.
    pub fn integral_cost<S: CostScalar>(&self, s: f64) -> S {
        if self.is_empty() {
            return S::zero();
        }
        self.integral_table::<S>(s).0[0][0].clone()
    }

    /// Optimal cost and an optimal cover.
    pub fn integral_cover<S: CostScalar>(&self, s: f64) -> (S, CoverSolution) {
        if self.is_empty() {
            return (S::zero(), CoverSolution::from_map(s, true, f64::NEG_INFINITY, BTreeMap::new()));
        }
        let (cost, sealed) = self.integral_table::<S>(s);
        let mut map: BTreeMap<(usize, u64), (usize, BigUint)> = BTreeMap::new();
        let mut counts: Vec<BigUint> = vec![BigUint::one()];
        for d in 0..=self.max_depth() {
            let mut next = vec![BigUint::zero(); self.graph.layers.get(d + 1).map_or(0, Vec::len)];
            for (i, count) in counts.iter().enumerate() {
                if count.is_zero() {
                    continue;
                }
                if sealed[d][i] {
                    let order = self.orders.order_at(d).expect("sealed depth is realized");
                    map.entry((d, 1f64.to_bits())).or_insert((order, BigUint::zero())).1 += count;
                } else {
                    for &(c, m) in &self.graph.children[d][i] {
                        next[c as usize] += count * BigUint::from(m);
                    }
                }
            }
            counts = next;
        }
        let root = cost[0][0].clone();
        let log_cost = root.ln();
        (root, CoverSolution::from_map(s, true, log_cost, map))
    }

    /// Optimum of the covering LP `sum c_i chi_{B_i} >= f`, where `f` is the
    /// target this geometry was built from.
    ///
    /// With levels `0 = l_0 < .. < l_m` (the distinct values of `f`), `F_v(l)` is the
    /// cheapest way to raise every leaf below `v` from coverage `l` to its demand:
    /// `F_v(l_i) = min(G_v(l_i), F_v(l_{i+1}) + (l_{i+1} - l_i) seal(v))`.
    pub fn fractional_cover<S: CostScalar>(&self, s: f64) -> (S, CoverSolution) {
        if self.is_empty() {
            return (S::zero(), CoverSolution::from_map(s, false, f64::NEG_INFINITY, BTreeMap::new()));
        }
        let mut levels: Vec<f64> = self.automaton.weights.clone();
        levels.push(0.0);
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let top = levels.len() - 1;
        let steps: Vec<S> = levels.windows(2).map(|w| S::from_f64(w[1] - w[0])).collect();
        let seals = self.seals::<S>(s);
        let d_max = self.max_depth();

        // table[d][i][j] = F at level j; raise[d][i][j] = seal one step at level j
        let mut table: Vec<Vec<Vec<S>>> = vec![Vec::new(); d_max + 1];
        let mut raise: Vec<Vec<Vec<bool>>> = vec![Vec::new(); d_max + 1];
        for d in (0..=d_max).rev() {
            let width = self.graph.layers[d].len();
            let eval = |i: usize| -> (Vec<S>, Vec<bool>) {
                let demand = match self.graph.layers[d][i].region {
                    Region::Inside(c) => self.automaton.weights[c as usize],
                    _ => f64::INFINITY,
                };
                let mut f = vec![S::zero(); levels.len()];
                let mut up = vec![false; levels.len()];
                for j in (0..top).rev() {
                    let g = if d == d_max {
                        if levels[j] >= demand {
                            S::zero()
                        } else {
                            S::infinity()
                        }
                    } else {
                        let terms: Vec<S> = self.graph.children[d][i]
                            .iter()
                            .map(|&(c, m)| table[d + 1][c as usize][j].scale(m as u64))
                            .collect();
                        S::sum(&terms)
                    };
                    match &seals[d] {
                        Some(x) => {
                            let via_seal = f[j + 1].add(&steps[j].mul(x));
                            if via_seal.less_eq(&g) {
                                f[j] = via_seal;
                                up[j] = true;
                            } else {
                                f[j] = g;
                            }
                        }
                        None => f[j] = g,
                    }
                }
                (f, up)
            };
            let row: Vec<(Vec<S>, Vec<bool>)> = if width >= PARALLEL_LAYER {
                (0..width).into_par_iter().map(eval).collect()
            } else {
                (0..width).map(eval).collect()
            };
            let (t, r): (Vec<_>, Vec<_>) = row.into_iter().unzip();
            table[d] = t;
            raise[d] = r;
        }

        let mut map: BTreeMap<(usize, u64), (usize, BigUint)> = BTreeMap::new();
        // counts[i][j]: tree nodes of class i entered at coverage level j
        let mut counts: Vec<Vec<BigUint>> = vec![vec![BigUint::zero(); levels.len()]];
        counts[0][0] = BigUint::one();
        for d in 0..=d_max {
            let next_width = self.graph.layers.get(d + 1).map_or(0, Vec::len);
            let mut next = vec![vec![BigUint::zero(); levels.len()]; next_width];
            for (i, row) in counts.iter().enumerate() {
                for (j0, count) in row.iter().enumerate() {
                    if count.is_zero() {
                        continue;
                    }
                    let mut j = j0;
                    while j < top && raise[d][i][j] {
                        j += 1;
                    }
                    if j > j0 {
                        let order = self.orders.order_at(d).expect("sealed depth is realized");
                        let weight = levels[j] - levels[j0];
                        map.entry((d, weight.to_bits())).or_insert((order, BigUint::zero())).1 += count;
                    }
                    if j < top {
                        for &(c, m) in &self.graph.children[d][i] {
                            next[c as usize][j] += count * BigUint::from(m);
                        }
                    }
                }
            }
            counts = next;
        }
        let root = table[0][0][0].clone();
        let log_cost = root.ln();
        (root, CoverSolution::from_map(s, false, log_cost, map))
    }

    /// Maximal flow through the tree with node capacities `seal(v)`, and the
    /// normalized measure it induces.
    pub fn frostman<S: CostScalar>(&self, s: f64) -> Result<Frostman<S>> {
        frostman::build(self, s)
    }
}

/// Exact optimum of the integral cover problem.
pub fn integral_cover_cost<S: CostScalar>(p: &CoverProblem) -> Result<(S, CoverSolution)> {
    Ok(CoverGeometry::from_problem(p)?.integral_cover(p.s))
}

/// Optimum of the fractional (weighted) cover problem for `target`.
pub fn fractional_cover_cost<S: CostScalar>(p: &CoverProblem, target: &Target) -> Result<(S, CoverSolution)> {
    p.validate()?;
    let g = CoverGeometry::new(&p.shift, target, p.epsilon, p.n_min, p.n_max, p.kind)?;
    Ok(g.fractional_cover(p.s))
}

/// Frostman measure of the problem: total mass equals the cover cost.
pub fn frostman_measure<S: CostScalar>(p: &CoverProblem) -> Result<Frostman<S>> {
    CoverGeometry::from_problem(p)?.frostman(p.s)
}

/// Indicator covers on nested ball families have integral LP optima; a mismatch is a defect.
pub fn check_laminar_integrality<S: CostScalar>(integral: &S, fractional: &S) -> Result<()> {
    let gap = integral.rel_diff(fractional);
    if gap > INTEGRALITY_TOL {
        return Err(Error::Invariant(format!(
            "fractional optimum {} differs from integral optimum {} (relative gap {gap:e})",
            fractional.ln(),
            integral.ln()
        )));
    }
    Ok(())
}
