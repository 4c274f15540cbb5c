//! The max-flow dual of the cover problem and the measure it induces.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::CoverGeometry;
use crate::error::{Error, Result};
use crate::measures::CylinderMeasure;
use crate::scalar::{log_add_exp, CostScalar};
use crate::subset::{Layered, NodeState, SubsetAutomaton};
use crate::symbolic::Word;

/// Result of the flow computation.
#[derive(Clone, Debug)]
pub struct Frostman<S> {
    pub s: f64,
    /// `maxmass(root)`, the flow value.
    pub total_mass: S,
    /// Mass reaching the leaves when the flow is pushed down class by class.
    pub delivered: S,
    pub measure: TreeMeasure,
    audit: FrostmanAudit,
}

impl<S: CostScalar> Frostman<S> {
    /// Worst-case check of `mu(ball) <= e^{-n s} / c` over all classes.
    pub fn audit(&self) -> &FrostmanAudit {
        &self.audit
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrostmanAudit {
    pub classes_checked: usize,
    /// Largest `ln mu(node) - ln(e^{-n s}/c)` over audited nodes; must be <= 0.
    pub worst_log_excess: f64,
    pub violations: usize,
}

/// Normalized flow measure on the subset, evaluated lazily along words.
///
/// Mass splits at each class in proportion to the children's maximal masses;
/// below the truncation depth it splits evenly among children meeting the subset.
#[derive(Clone, Debug)]
pub struct TreeMeasure {
    automaton: Arc<SubsetAutomaton>,
    graph: Arc<Layered<NodeState>>,
    log_maxmass: Vec<Vec<f64>>,
    log_childsum: Vec<Vec<f64>>,
    log_total: f64,
}

pub(super) fn build<S: CostScalar>(g: &CoverGeometry, s: f64) -> Result<Frostman<S>> {
    if g.is_empty() {
        return Err(Error::Degenerate("the subset is empty, so the cover cost is zero".into()));
    }
    let d_max = g.max_depth();
    let seals = g.seals::<S>(s);
    let mut maxmass: Vec<Vec<S>> = vec![Vec::new(); d_max + 1];
    let mut childsum: Vec<Vec<S>> = vec![Vec::new(); d_max + 1];
    for d in (0..=d_max).rev() {
        let width = g.graph.layers[d].len();
        let mut mm = Vec::with_capacity(width);
        let mut cs = Vec::with_capacity(width);
        for i in 0..width {
            if d == d_max {
                let cap = seals[d].clone().expect("D_max is realized by n_max");
                cs.push(cap.clone());
                mm.push(cap);
                continue;
            }
            let sum = g.descend_sum(d, i, &maxmass[d + 1]);
            let m = match &seals[d] {
                Some(cap) if cap.less_than(&sum) => cap.clone(),
                _ => sum.clone(),
            };
            cs.push(sum);
            mm.push(m);
        }
        maxmass[d] = mm;
        childsum[d] = cs;
    }
    let total = maxmass[0][0].clone();
    if total.is_zero() {
        return Err(Error::Degenerate("zero cover cost".into()));
    }

    // Push the flow down: each class forwards its mass in proportion to maxmass.
    let mut flow: Vec<S> = vec![total.clone()];
    for d in 0..d_max {
        let mut next = vec![S::zero(); g.graph.layers[d + 1].len()];
        for (i, f) in flow.iter().enumerate() {
            for &(c, m) in &g.graph.children[d][i] {
                let share = f.mul(&maxmass[d + 1][c as usize]).div(&childsum[d][i]).scale(m as u64);
                next[c as usize] = next[c as usize].add(&share);
            }
        }
        flow = next;
    }
    let delivered = S::sum(&flow);

    let log_maxmass: Vec<Vec<f64>> = maxmass.iter().map(|r| r.iter().map(CostScalar::ln).collect()).collect();
    let log_childsum: Vec<Vec<f64>> = childsum.iter().map(|r| r.iter().map(CostScalar::ln).collect()).collect();
    let log_total = total.ln();

    // Heaviest single node per class, by forward max-propagation of log masses.
    let mut heaviest: Vec<f64> = vec![0.0];
    let mut audit = FrostmanAudit { classes_checked: 0, worst_log_excess: f64::NEG_INFINITY, violations: 0 };
    for d in 0..=d_max {
        if let Some(n) = g.orders.order_at(d) {
            let bound = -(n as f64) * s - log_total;
            for &h in &heaviest {
                let excess = h - bound;
                audit.classes_checked += 1;
                audit.worst_log_excess = audit.worst_log_excess.max(excess);
                if excess > 1e-9 {
                    audit.violations += 1;
                }
            }
        }
        if d == d_max {
            break;
        }
        let mut next = vec![f64::NEG_INFINITY; g.graph.layers[d + 1].len()];
        for (i, &h) in heaviest.iter().enumerate() {
            for &(c, _) in &g.graph.children[d][i] {
                let v = h + log_maxmass[d + 1][c as usize] - log_childsum[d][i];
                next[c as usize] = next[c as usize].max(v);
            }
        }
        heaviest = next;
    }

    let measure = TreeMeasure {
        automaton: g.automaton.clone(),
        graph: g.graph.clone(),
        log_maxmass,
        log_childsum,
        log_total,
    };
    Ok(Frostman { s, total_mass: total, delivered, measure, audit })
}

impl TreeMeasure {
    pub fn max_depth(&self) -> usize {
        self.graph.depth()
    }

    /// `ln c`, the log of the unnormalized total mass.
    pub fn log_total_mass(&self) -> f64 {
        self.log_total
    }

    /// Log-probabilities of the children of `state` at `depth`, with their symbols and states.
    fn split(&self, depth: usize, class: Option<u32>, state: NodeState) -> Vec<(u8, NodeState, Option<u32>, f64)> {
        let kids: Vec<(u8, NodeState)> = self.automaton.children(state).collect();
        match class {
            Some(i) if depth < self.max_depth() => kids
                .into_iter()
                .map(|(a, st)| {
                    let c = self.graph.index[depth + 1][&st];
                    let lp = self.log_maxmass[depth + 1][c as usize] - self.log_childsum[depth][i as usize];
                    (a, st, Some(c), lp)
                })
                .collect(),
            _ => {
                let lp = -(kids.len() as f64).ln();
                kids.into_iter().map(|(a, st)| (a, st, None, lp)).collect()
            }
        }
    }

    /// Natural log of the normalized mass of `[w]`.
    pub fn log_mass(&self, w: &Word) -> Result<f64> {
        let alphabet = self.automaton.alphabet();
        if let Some(&s) = w.symbols().iter().find(|&&s| s as usize >= alphabet) {
            return Err(Error::InvalidWord(format!("symbol {s} outside alphabet of size {alphabet}")));
        }
        let mut state = self.automaton.root();
        let mut class = Some(0u32);
        let mut total = 0.0;
        for (depth, &a) in w.symbols().iter().enumerate() {
            let Some(next) = self.split(depth, class, state).into_iter().find(|k| k.0 == a) else {
                return Ok(f64::NEG_INFINITY);
            };
            state = next.1;
            class = next.2;
            total += next.3;
        }
        Ok(total)
    }

    pub fn sample_word(&self, len: usize, seed: u64) -> Word {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.automaton.root();
        let mut class = Some(0u32);
        let mut out = Vec::with_capacity(len);
        for depth in 0..len {
            let kids = self.split(depth, class, state);
            let u: f64 = rng.random();
            let mut acc = f64::NEG_INFINITY;
            let mut pick = kids.len() - 1;
            for (k, kid) in kids.iter().enumerate() {
                acc = log_add_exp(acc, kid.3);
                if u.ln() < acc {
                    pick = k;
                    break;
                }
            }
            let (a, st, c, _) = kids[pick];
            out.push(a);
            state = st;
            class = c;
        }
        Word::new(out)
    }
}

impl CylinderMeasure for TreeMeasure {
    fn alphabet(&self) -> usize {
        self.automaton.alphabet()
    }
    fn log_mass(&self, w: &Word) -> Result<f64> {
        TreeMeasure::log_mass(self, w)
    }
    fn sample(&self, len: usize, seed: u64) -> Word {
        self.sample_word(len, seed)
    }
}
