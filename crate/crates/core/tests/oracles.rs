//! Library results against independent solvers built on the explicit prefix tree.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbe_core::cover::{brute_force_cover, CoverGeometry, CoverProblem};
use nbe_core::estimators::{exact_partial_cover, partial_cover_bounds, TruncationParams};
use nbe_core::{BallKind, CostScalar, HighPrecision, LogF64, MeasureSpec, ShiftSpec, SubsetSpec, Target, Word};

fn depth_of(n: usize, eps: f64, alphabet: usize, kind: BallKind) -> usize {
    let t = n as f64 * eps / (alphabet as f64).ln();
    let r = t.round();
    let t = if r >= 1.0 && (t - r).abs() <= 1e-12 * t.max(1.0) { r } else { t };
    match kind {
        BallKind::Open => n + t.floor() as usize,
        BallKind::Closed => n - 1 + t.ceil() as usize,
    }
}

struct Instance {
    shift: ShiftSpec,
    eps: f64,
    n_min: usize,
    n_max: usize,
    kind: BallKind,
}

impl Instance {
    fn d_max(&self) -> usize {
        depth_of(self.n_max, self.eps, self.shift.alphabet_size(), self.kind)
    }

    /// Every `(order, depth)` pair in the truncation.
    fn balls(&self) -> Vec<(usize, usize)> {
        (self.n_min..=self.n_max).map(|n| (n, depth_of(n, self.eps, self.shift.alphabet_size(), self.kind))).collect()
    }
}

/// Admissible words of each length up to `d`.
fn tree(shift: &ShiftSpec, d: usize) -> Vec<Vec<Vec<u8>>> {
    let mut layers = vec![vec![Vec::new()]];
    for _ in 0..d {
        let next: Vec<Vec<u8>> = layers
            .last()
            .unwrap()
            .iter()
            .flat_map(|w| {
                (0..shift.alphabet_size() as u8).map(move |a| {
                    let mut c = w.clone();
                    c.push(a);
                    c
                })
            })
            .filter(|c| shift.is_admissible(c))
            .collect();
        layers.push(next);
    }
    layers
}

/// Requirement of each leaf: `target(w)` for a target constant on the leaf cylinder.
fn requirement(target: &Target, w: &[u8]) -> f64 {
    match target {
        Target::Indicator(SubsetSpec::WholeSpace) => 1.0,
        Target::Indicator(SubsetSpec::CylinderUnion { cylinders }) => {
            f64::from(u8::from(cylinders.iter().any(|c| w.starts_with(c.symbols()))))
        }
        Target::Indicator(SubsetSpec::SftSubsystem { transitions }) => {
            f64::from(u8::from(w.windows(2).all(|p| transitions[p[0] as usize][p[1] as usize])))
        }
        Target::Indicator(SubsetSpec::Empty) => 0.0,
        Target::Weighted { cells } => {
            cells.iter().find(|(c, _)| w.starts_with(c.symbols())).map_or(0.0, |(_, x)| *x)
        }
    }
}

/// Primal covering LP and its packing dual, one variable per `(word, order)`.
fn lp_pair(inst: &Instance, target: &Target, s: f64) -> (f64, f64) {
    let layers = tree(&inst.shift, inst.d_max());
    let leaves: Vec<(Vec<u8>, f64)> = layers
        .last()
        .unwrap()
        .iter()
        .map(|w| (w.clone(), requirement(target, w)))
        .filter(|(_, b)| *b > 0.0)
        .collect();
    let balls = inst.balls();

    let mut primal = Problem::new(OptimizationDirection::Minimize);
    let mut vars: Vec<(Vec<u8>, minilp::Variable)> = Vec::new();
    for &(n, d) in &balls {
        for w in &layers[d] {
            if leaves.iter().any(|(l, _)| l.starts_with(w)) {
                vars.push((w.clone(), primal.add_var((-(n as f64) * s).exp(), (0.0, f64::INFINITY))));
            }
        }
    }
    for (leaf, b) in &leaves {
        let row: Vec<(minilp::Variable, f64)> =
            vars.iter().filter(|(w, _)| leaf.starts_with(w)).map(|(_, v)| (*v, 1.0)).collect();
        primal.add_constraint(row.as_slice(), ComparisonOp::Ge, *b);
    }
    let p = if leaves.is_empty() { 0.0 } else { primal.solve().unwrap().objective() };

    let mut dual = Problem::new(OptimizationDirection::Maximize);
    let ys: Vec<minilp::Variable> = leaves.iter().map(|(_, b)| dual.add_var(*b, (0.0, f64::INFINITY))).collect();
    for &(n, d) in &balls {
        for w in &layers[d] {
            let row: Vec<(minilp::Variable, f64)> = leaves
                .iter()
                .zip(&ys)
                .filter(|((l, _), _)| l.starts_with(w))
                .map(|(_, y)| (*y, 1.0))
                .collect();
            if !row.is_empty() {
                dual.add_constraint(row.as_slice(), ComparisonOp::Le, (-(n as f64) * s).exp());
            }
        }
    }
    let q = if leaves.is_empty() { 0.0 } else { dual.solve().unwrap().objective() };
    (p, q)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_instance(rng: &mut ChaCha8Rng, shift: &ShiftSpec, max_depth: usize) -> Instance {
    loop {
        let inst = Instance {
            shift: shift.clone(),
            eps: rng.random_range(0.1..1.5),
            n_min: rng.random_range(1..=3),
            n_max: 0,
            kind: if rng.random_bool(0.5) { BallKind::Open } else { BallKind::Closed },
        };
        let inst = Instance { n_max: inst.n_min + rng.random_range(0..=3), ..inst };
        if inst.d_max() <= max_depth {
            return inst;
        }
    }
}

fn random_union(rng: &mut ChaCha8Rng, shift: &ShiftSpec, max_len: usize) -> SubsetSpec {
    let words: Vec<Word> = (0..rng.random_range(1..=3))
        .filter_map(|_| {
            let len = rng.random_range(1..=max_len);
            let w: Vec<u8> = (0..len).map(|_| rng.random_range(0..shift.alphabet_size() as u8)).collect();
            shift.is_admissible(&w).then(|| Word::new(w))
        })
        .collect();
    if words.is_empty() {
        SubsetSpec::whole()
    } else {
        SubsetSpec::cylinders(words).unwrap()
    }
}

#[test]
fn fractional_cover_and_flow_match_linear_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for shift in [ShiftSpec::full(2).unwrap(), ShiftSpec::golden_mean(), ShiftSpec::full(3).unwrap()] {
        let max_depth = if shift.alphabet_size() == 3 { 4 } else { 6 };
        for _ in 0..25 {
            let inst = random_instance(&mut rng, &shift, max_depth);
            let z = random_union(&mut rng, &shift, inst.d_max());
            let target = Target::Indicator(z);
            let s = rng.random_range(0.0..1.5);
            let g = CoverGeometry::new(&inst.shift, &target, inst.eps, inst.n_min, inst.n_max, inst.kind).unwrap();
            let (primal, dual) = lp_pair(&inst, &target, s);
            let integral = g.integral_cost::<LogF64>(s).ln().exp();
            let fractional = g.fractional_cover::<LogF64>(s).0.ln().exp();
            assert!(rel(primal, dual) < 1e-7, "LP duality: {primal} vs {dual}");
            assert!(rel(fractional, primal) < 1e-7, "fractional {fractional} vs LP {primal}");
            assert!(rel(integral, primal) < 1e-7, "integral {integral} vs LP {primal}");
            let flow = g.frostman::<LogF64>(s).unwrap();
            assert!(rel(flow.total_mass.ln().exp(), dual) < 1e-7, "flow vs dual LP");
        }
    }
}

#[test]
fn weighted_cover_matches_linear_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let shift = ShiftSpec::full(2).unwrap();
    for _ in 0..40 {
        let inst = random_instance(&mut rng, &shift, 6);
        let cell_len = rng.random_range(1..=inst.d_max());
        let mut cells: Vec<(Word, f64)> = Vec::new();
        for w in tree(&shift, cell_len).pop().unwrap() {
            if rng.random_bool(0.6) {
                cells.push((Word::new(w), rng.random_range(0.0..2.0)));
            }
        }
        if cells.is_empty() {
            continue;
        }
        let target = Target::Weighted { cells };
        let s = rng.random_range(0.0..1.5);
        let g = CoverGeometry::new(&inst.shift, &target, inst.eps, inst.n_min, inst.n_max, inst.kind).unwrap();
        let (primal, _) = lp_pair(&inst, &target, s);
        let fractional = g.fractional_cover::<HighPrecision>(s).0.to_f64();
        assert!(rel(fractional, primal) < 1e-7, "fractional {fractional} vs LP {primal}");
    }
}

#[test]
fn dp_matches_brute_force_beyond_the_full_two_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for shift in [ShiftSpec::golden_mean(), ShiftSpec::full(3).unwrap()] {
        let mut done = 0;
        while done < 40 {
            let inst = random_instance(&mut rng, &shift, 4);
            let z = random_union(&mut rng, &shift, inst.d_max());
            let s = rng.random_range(0.0..2.0);
            let p = CoverProblem::new(shift.clone(), z, inst.eps, inst.n_min, inst.n_max, s).unwrap().with_kind(inst.kind);
            let Ok(brute) = brute_force_cover::<HighPrecision>(&p) else { continue };
            let dp = CoverGeometry::from_problem(&p).unwrap().integral_cost::<HighPrecision>(s);
            assert!(dp.rel_diff(&brute) <= 1e-12, "{p:?}");
            done += 1;
        }
    }
}

/// Every antichain of sealable words, with total mass and cost.
fn antichains(words: &[(Vec<u8>, f64, f64)], start: usize, chosen: &mut Vec<usize>, out: &mut Vec<(f64, f64)>) {
    let mass: f64 = chosen.iter().map(|&i| words[i].1).sum();
    let cost: f64 = chosen.iter().map(|&i| words[i].2).sum();
    out.push((mass, cost));
    for i in start..words.len() {
        let w = &words[i].0;
        if chosen.iter().all(|&j| !w.starts_with(&words[j].0) && !words[j].0.starts_with(w)) {
            chosen.push(i);
            antichains(words, i + 1, chosen, out);
            chosen.pop();
        }
    }
}

#[test]
fn partial_covers_match_enumeration() {
    let shift = ShiftSpec::full(2).unwrap();
    let mu = MeasureSpec::bernoulli_rational(&[(2, 3), (1, 3)]).unwrap();
    let (eps, n_min, n_max, kind) = (0.25, 1, 3, BallKind::Open);
    let layers = tree(&shift, depth_of(n_max, eps, 2, kind));
    for &s in &[0.1, 0.6, 1.2] {
        let mut sealable: Vec<(Vec<u8>, f64, f64)> = Vec::new();
        for n in n_min..=n_max {
            let d = depth_of(n, eps, 2, kind);
            if (n + 1..=n_max).any(|m| depth_of(m, eps, 2, kind) == d) {
                continue;
            }
            for w in &layers[d] {
                let mass = mu.log_cylinder_mass(&Word::new(w.clone())).unwrap().exp();
                sealable.push((w.clone(), mass, (-(n as f64) * s).exp()));
            }
        }
        let mut all = Vec::new();
        antichains(&sealable, 0, &mut Vec::new(), &mut all);
        for &delta in &[0.05, 0.2, 0.5] {
            let best = all
                .iter()
                .filter(|(m, _)| *m > 1.0 - delta + 1e-12)
                .map(|p| p.1)
                .fold(f64::INFINITY, f64::min);
            let exact = exact_partial_cover(&shift, &mu, delta, eps, n_min, n_max, kind, s).unwrap();
            assert!(rel(exact, best) < 1e-12, "s={s} delta={delta}: {exact} vs {best}");
            let b = partial_cover_bounds(&shift, &mu, delta, eps, s, &TruncationParams::new(n_min, n_max)).unwrap();
            assert!(b.log_lower <= best.ln() + 1e-9 && best.ln() <= b.log_upper + 1e-9);
        }
    }
}
