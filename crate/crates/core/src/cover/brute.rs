//! Exhaustive search over covering antichains of the explicit prefix tree.

use crate::error::{Error, Result};
use crate::scalar::CostScalar;
use crate::symbolic::{ball_cylinder_length, Word};

use super::CoverProblem;

/// Largest explicit tree (nodes down to `D_max`) the oracle will build.
pub const BRUTE_FORCE_NODE_LIMIT: usize = 10_000;
/// Largest number of covering antichains the oracle will enumerate.
pub const BRUTE_FORCE_ANTICHAIN_LIMIT: f64 = 2.0e6;

struct Node {
    seal: Option<usize>,
    children: Vec<usize>,
}

/// Minimum of `sum e^{-n s}` over every covering antichain, by enumeration.
///
/// Builds the explicit tree of admissible words meeting the subset, recomputes
/// the sealing order of every depth by scanning `n`, lists all antichains and
/// their costs, and returns the smallest.
pub fn brute_force_cover<S: CostScalar>(p: &CoverProblem) -> Result<S> {
    p.validate()?;
    let alphabet = p.shift.alphabet_size();
    let d_max = ball_cylinder_length(p.n_max, p.epsilon, alphabet, p.kind);
    let order_for = |depth: usize| -> Option<usize> {
        (p.n_min..=p.n_max)
            .filter(|&n| ball_cylinder_length(n, p.epsilon, alphabet, p.kind) == depth)
            .max()
    };
    let orders: Vec<Option<usize>> = (0..=d_max).map(order_for).collect();

    if !p.subset.intersects(&p.shift, &Word::empty()) {
        return Ok(S::zero());
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack: Vec<(Word, usize)> = vec![(Word::empty(), usize::MAX)];
    while let Some((w, parent)) = stack.pop() {
        if nodes.len() >= BRUTE_FORCE_NODE_LIMIT {
            return Err(Error::Refused(format!(
                "explicit tree exceeds {BRUTE_FORCE_NODE_LIMIT} nodes"
            )));
        }
        let id = nodes.len();
        nodes.push(Node { seal: orders[w.len()], children: Vec::new() });
        if parent != usize::MAX {
            nodes[parent].children.push(id);
        }
        if w.len() < d_max {
            for a in (0..alphabet as u8).rev() {
                let child = w.extended(a);
                if p.shift.is_admissible(child.symbols()) && p.subset.intersects(&p.shift, &child) {
                    stack.push((child, id));
                }
            }
        }
    }

    // Antichain counts, bottom-up (children always have larger ids).
    let mut count = vec![0.0f64; nodes.len()];
    for v in (0..nodes.len()).rev() {
        let sealable = if nodes[v].seal.is_some() { 1.0 } else { 0.0 };
        let below = if nodes[v].children.is_empty() {
            0.0
        } else {
            nodes[v].children.iter().map(|&c| count[c]).product()
        };
        count[v] = sealable + below;
    }
    if count[0] > BRUTE_FORCE_ANTICHAIN_LIMIT {
        return Err(Error::Refused(format!("{:.0} covering antichains exceed the enumeration limit", count[0])));
    }

    let mut costs: Vec<Vec<S>> = vec![Vec::new(); nodes.len()];
    for v in (0..nodes.len()).rev() {
        let mut options: Vec<S> = Vec::new();
        if let Some(n) = nodes[v].seal {
            options.push(S::exp_neg(n, p.s));
        }
        if !nodes[v].children.is_empty() {
            let mut combos: Vec<S> = vec![S::zero()];
            for &c in &nodes[v].children {
                let mut next = Vec::with_capacity(combos.len() * costs[c].len());
                for a in &combos {
                    for b in &costs[c] {
                        next.push(a.add(b));
                    }
                }
                combos = next;
                costs[c] = Vec::new();
            }
            options.extend(combos);
        }
        costs[v] = options;
    }
    costs[0]
        .iter()
        .cloned()
        .reduce(|a, b| if b.less_than(&a) { b } else { a })
        .ok_or_else(|| Error::Invariant("no covering antichain exists".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{HighPrecision, LogF64};
    use crate::subset::SubsetSpec;
    use crate::symbolic::ShiftSpec;

    #[test]
    fn whole_space_forced_order() {
        let p = CoverProblem::new(ShiftSpec::full(2).unwrap(), SubsetSpec::whole(), 0.5, 3, 3, 0.2).unwrap();
        let c: HighPrecision = brute_force_cover(&p).unwrap();
        let expected = HighPrecision::exp_neg(3, 0.2).scale(32);
        assert!(c.rel_diff(&expected) < 1e-60);
    }

    #[test]
    fn empty_subset() {
        let p = CoverProblem::new(ShiftSpec::full(2).unwrap(), SubsetSpec::Empty, 0.5, 1, 3, 1.0).unwrap();
        assert!(brute_force_cover::<LogF64>(&p).unwrap().is_zero());
    }

    #[test]
    fn guard_refuses_large_trees() {
        let p = CoverProblem::new(ShiftSpec::full(3).unwrap(), SubsetSpec::whole(), 0.5, 1, 12, 1.0).unwrap();
        assert!(matches!(brute_force_cover::<LogF64>(&p), Err(Error::Refused(_))));
    }
}
