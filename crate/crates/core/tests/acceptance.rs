//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbe_core::cover::{brute_force_cover, integral_cover_cost, weighted_sandwich_threshold, CoverGeometry, CoverProblem};
use nbe_core::estimators::{
    brin_katok_entropy, brin_katok_pointwise, critical_exponent, default_order_schedule, geometric_schedule,
    min_spanning_count, neutralized_bowen_entropy, spanning_entropy, variational_sandwich, verify_local_katok_bound, BkMode,
    SandwichOptions, TruncationParams, DEFAULT_DELTAS,
};
use nbe_core::{BallKind, CostScalar, HighPrecision, LogF64, MeasureSpec, ShiftSpec, SubsetSpec, Target, Word};

// Tolerances.
const PER_EPS_TOL: f64 = 0.05;
const EXTRAPOLATION_REL: f64 = 0.02;
const SPANNING_SLACK: f64 = 0.02;
const ORACLE_REL: f64 = 1e-12;
const DUALITY_REL: f64 = 1e-12;
const AUDIT_LOG_SLACK: f64 = 1e-9;
const SANDWICH_REL: f64 = 1e-12;
const LOCAL_KATOK_SLACK: f64 = -0.02;
const SUBSET_TOL: f64 = 1e-6;
const SANDWICH_TOL: f64 = 0.05;

// Budgets.
const C1_BUDGET: Duration = Duration::from_secs(30);
const C4_BUDGET: Duration = Duration::from_secs(30);
const C5_BUDGET: Duration = Duration::from_secs(60);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Least-squares intercept of `y = a + b x`.
fn intercept(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    my - sxy / sxx * mx
}

/// Cylinder length of the neutralized ball, recomputed from `d_n < e^{-n eps}`.
fn oracle_depth(n: usize, eps: f64, alphabet: usize, kind: BallKind) -> usize {
    let t = n as f64 * eps / (alphabet as f64).ln();
    let r = t.round();
    let t = if r >= 1.0 && (t - r).abs() <= 1e-12 * t.max(1.0) { r } else { t };
    match kind {
        BallKind::Open => n + t.floor() as usize,
        BallKind::Closed => n - 1 + t.ceil() as usize,
    }
}

/// Spectral radius of a 0/1 matrix by power iteration.
fn spectral_log_radius(a: &[Vec<u8>]) -> f64 {
    let k = a.len();
    let mut v = vec![1.0f64; k];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w: Vec<f64> = (0..k).map(|i| (0..k).map(|j| a[i][j] as f64 * v[j]).sum()).collect();
        let norm = w.iter().cloned().fold(0.0, f64::max);
        lambda = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda.ln()
}

fn ln3() -> f64 {
    3f64.ln()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let eps = [0.4, 0.2, 0.1];
    let table =
        neutralized_bowen_entropy(&ShiftSpec::full(3).unwrap(), &SubsetSpec::whole(), &eps, &TruncationParams::new(50, 400))
            .unwrap();
    let elapsed = start.elapsed();
    let worst = table.rows.iter().map(|r| (r.s_star - (ln3() + r.epsilon)).abs()).fold(0.0, f64::max);
    let ys: Vec<f64> = table.rows.iter().map(|r| r.s_star).collect();
    let a = intercept(&eps, &ys);
    let rel = (a - ln3()).abs() / ln3();
    verdict(
        worst <= PER_EPS_TOL && rel <= EXTRAPOLATION_REL && elapsed < C1_BUDGET,
        format!("max |s* - (ln3 + eps)| = {worst:.4}, extrapolation {a:.4} ({:.2}% off), {elapsed:.2?}", rel * 100.0),
    )
}

fn criterion_2() -> Verdict {
    let shift = ShiftSpec::full(3).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for m in 1..=3usize {
        for k in 1..=3usize {
            let r = min_spanning_count(&shift, m * k, 1.0 / k as f64).unwrap();
            let d = oracle_depth(m * k, 1.0 / k as f64, 3, BallKind::Closed);
            let bound = BigUint::from(3u32).pow((m * (k + 1) + 1) as u32);
            ok &= r == BigUint::from(3u32).pow(d as u32) && r <= bound;
            cells.push(format!("r_{}={}", m * k, r));
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=3usize {
        let t = spanning_entropy(&shift, &[1.0 / k as f64], &default_order_schedule()).unwrap();
        let margin = t.rows[0].r - ((1.0 + 1.0 / k as f64) * ln3() + SPANNING_SLACK);
        worst = worst.max(margin);
    }
    ok &= worst <= 0.0;
    verdict(ok, format!("9 cells within 3^(m(k+1)+1); worst rate margin {worst:.4}"))
}

fn criterion_3() -> Verdict {
    let mu = MeasureSpec::uniform(3).unwrap();
    let orders: Vec<usize> = (1..=400).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut exact = true;
    let mut checked = 0usize;
    for k in 1..=4usize {
        let eps = 1.0 / k as f64;
        let len = oracle_depth(400, eps, 3, BallKind::Closed);
        for _ in 0..100 {
            let x = Word::new((0..len).map(|_| rng.random_range(0..3u8)).collect());
            let r = brin_katok_pointwise(&mu, &x, eps, &orders, BallKind::Closed).unwrap();
            for (i, &n) in orders.iter().enumerate() {
                let d = oracle_depth(n, eps, 3, BallKind::Closed);
                exact &= r.depths[i] == d && r.values[i] == d as f64 * ln3() / n as f64;
                checked += 1;
            }
        }
    }
    let eps = [0.5, 0.25, 0.125];
    let sched = geometric_schedule(50, 400, 16);
    let ys: Vec<f64> = eps
        .iter()
        .map(|&e| {
            brin_katok_entropy(&mu, e, &sched, BallKind::Closed, BkMode::ExactExpectation, 0.95, None)
                .unwrap()
                .integral_estimate
        })
        .collect();
    let a = intercept(&eps, &ys);
    let rel = (a - ln3()).abs() / ln3();
    verdict(
        exact && rel <= EXTRAPOLATION_REL,
        format!("{checked} pointwise values exact: {exact}; extrapolation {a:.4} ({:.2}% off)", rel * 100.0),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let ln_phi = spectral_log_radius(&[vec![1, 1], vec![1, 0]]);
    let shift = ShiftSpec::full(2).unwrap();
    let k = SubsetSpec::golden_mean();
    let params = TruncationParams::new(50, 400);
    let eps = [0.4, 0.2, 0.1];
    let rows: Vec<f64> = eps.iter().map(|&e| critical_exponent(&shift, &k, e, &params).unwrap().s_star).collect();
    let elapsed = start.elapsed();
    let target = (1.0 + 0.2 / 2f64.ln()) * ln_phi;
    let err = (rows[1] - target).abs();
    let a = intercept(&eps, &rows);
    let rel = (a - ln_phi).abs() / ln_phi;
    verdict(
        err <= PER_EPS_TOL && rel <= EXTRAPOLATION_REL && elapsed < C4_BUDGET,
        format!("s*(0.2) = {:.4} vs {target:.4}; extrapolation {a:.4} ({:.2}% off ln phi), {elapsed:.2?}", rows[1], rel * 100.0),
    )
}

fn random_union(rng: &mut ChaCha8Rng, max_len: usize, count: usize) -> SubsetSpec {
    let words: Vec<Word> = (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            Word::new((0..len).map(|_| rng.random_range(0..2u8)).collect())
        })
        .collect();
    SubsetSpec::cylinders(words).unwrap()
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let shift = ShiftSpec::full(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut total, mut worst) = (0usize, 0.0f64);
    while total < 120 {
        let eps = rng.random_range(0.05..1.5);
        let n_min = rng.random_range(1..=4usize);
        let n_max = n_min + rng.random_range(0..=3usize);
        let kind = if rng.random_bool(0.5) { BallKind::Open } else { BallKind::Closed };
        let d_max = oracle_depth(n_max, eps, 2, kind);
        if d_max > 5 {
            continue;
        }
        let count = rng.random_range(1..=4);
        let subset = random_union(&mut rng, d_max, count);
        let s = rng.random_range(0.0..2.0);
        let p = CoverProblem::new(shift.clone(), subset, eps, n_min, n_max, s).unwrap().with_kind(kind);
        let Ok(brute) = brute_force_cover::<HighPrecision>(&p) else { continue };
        let (dp, _) = integral_cover_cost::<HighPrecision>(&p).unwrap();
        worst = worst.max(dp.rel_diff(&brute));
        total += 1;
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= ORACLE_REL && elapsed < C5_BUDGET,
        format!("{total} instances, worst relative difference {worst:e}, {elapsed:.2?}"),
    )
}

/// Whether the cylinder `w` meets the fixture set.
fn meets(subset: &SubsetSpec, w: &[u8]) -> bool {
    match subset {
        SubsetSpec::WholeSpace => true,
        SubsetSpec::CylinderUnion { cylinders } => cylinders.iter().any(|c| {
            let k = c.len().min(w.len());
            c.symbols()[..k] == w[..k]
        }),
        SubsetSpec::SftSubsystem { transitions } => w.windows(2).all(|p| transitions[p[0] as usize][p[1] as usize]),
        SubsetSpec::Empty => false,
    }
}

fn all_words(shift: &ShiftSpec, subset: &SubsetSpec, len: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &out {
            for a in 0..shift.alphabet_size() as u8 {
                let mut c = w.clone();
                c.push(a);
                if shift.is_admissible(&c) && meets(subset, &c) {
                    next.push(c);
                }
            }
        }
        out = next;
    }
    out
}

struct Fixture {
    shift: ShiftSpec,
    subset: SubsetSpec,
    eps: f64,
    n_min: usize,
    n_max: usize,
}

fn fixtures() -> Vec<Fixture> {
    let full3 = ShiftSpec::full(3).unwrap();
    let full2 = ShiftSpec::full(2).unwrap();
    let union = SubsetSpec::cylinders(vec![Word::new(vec![0, 1]), Word::new(vec![1, 1, 0])]).unwrap();
    vec![
        Fixture { shift: full3.clone(), subset: SubsetSpec::whole(), eps: 0.5, n_min: 2, n_max: 6 },
        Fixture { shift: full2.clone(), subset: SubsetSpec::golden_mean(), eps: 0.3, n_min: 2, n_max: 7 },
        Fixture { shift: full2.clone(), subset: union.clone(), eps: 0.7, n_min: 1, n_max: 6 },
        Fixture { shift: ShiftSpec::golden_mean(), subset: SubsetSpec::whole(), eps: 0.2, n_min: 3, n_max: 7 },
        Fixture { shift: full3, subset: SubsetSpec::whole(), eps: 0.2, n_min: 50, n_max: 400 },
        Fixture { shift: full2.clone(), subset: SubsetSpec::golden_mean(), eps: 0.2, n_min: 50, n_max: 400 },
        Fixture { shift: full2, subset: union, eps: 0.1, n_min: 20, n_max: 200 },
    ]
}

fn criterion_6() -> Verdict {
    let (mut worst_dual, mut worst_excess, mut audited, mut ok) = (0.0f64, f64::NEG_INFINITY, 0usize, true);
    for f in fixtures() {
        let alphabet = f.shift.alphabet_size();
        let g = CoverGeometry::new(&f.shift, &Target::Indicator(f.subset.clone()), f.eps, f.n_min, f.n_max, BallKind::Open)
            .unwrap();
        for &s in &[0.3, 0.8, 1.2] {
            let cost = g.integral_cost::<HighPrecision>(s);
            let flow = g.frostman::<HighPrecision>(s).unwrap();
            worst_dual = worst_dual.max(flow.total_mass.rel_diff(&cost));
            let d_max = oracle_depth(f.n_max, f.eps, alphabet, BallKind::Open);
            if d_max > 8 {
                ok &= flow.audit().violations == 0;
                continue;
            }
            let log_c = flow.total_mass.ln();
            for n in f.n_min..=f.n_max {
                let d = oracle_depth(n, f.eps, alphabet, BallKind::Open);
                for w in all_words(&f.shift, &f.subset, d) {
                    let lm = flow.measure.log_mass(&Word::new(w)).unwrap();
                    let excess = lm - (-(n as f64) * s - log_c);
                    worst_excess = worst_excess.max(excess);
                    audited += 1;
                }
            }
        }
    }
    ok &= worst_dual <= DUALITY_REL && worst_excess <= AUDIT_LOG_SLACK;
    verdict(ok, format!("worst duality gap {worst_dual:e}; {audited} balls audited, worst log excess {worst_excess:.3e}"))
}

fn criterion_7() -> Verdict {
    let systems = [
        (ShiftSpec::full(3).unwrap(), SubsetSpec::whole()),
        (ShiftSpec::full(2).unwrap(), SubsetSpec::golden_mean()),
    ];
    let (mut cases, mut violations) = (0usize, 0usize);
    for (shift, subset) in &systems {
        let target = Target::Indicator(subset.clone());
        for &eps in &[0.2, 0.4] {
            for &theta in &[0.25, 0.5, 1.0] {
                let n_min = weighted_sandwich_threshold(eps, theta);
                let n_max = n_min + 80;
                let coarse = CoverGeometry::new(shift, &target, eps, n_min, n_max, BallKind::Open).unwrap();
                let fine = CoverGeometry::new(shift, &target, eps / 2.0, n_min, n_max, BallKind::Open).unwrap();
                for &s in &[0.25, 0.75, 1.25, 2.0] {
                    let integral = coarse.integral_cost::<LogF64>(s).ln();
                    let fractional = coarse.fractional_cover::<LogF64>(s).0.ln();
                    let m_fine = fine.integral_cost::<LogF64>(s + theta).ln();
                    cases += 1;
                    if m_fine > fractional + SANDWICH_REL || fractional > integral + SANDWICH_REL {
                        violations += 1;
                    }
                }
            }
        }
    }
    verdict(violations == 0, format!("{cases} grid cells, {violations} violations"))
}

fn criterion_8() -> Verdict {
    let shift = ShiftSpec::full(2).unwrap();
    let measures = [MeasureSpec::uniform(2).unwrap(), MeasureSpec::bernoulli(vec![0.75, 0.25]).unwrap()];
    let params = TruncationParams::new(50, 400);
    let mut worst = f64::INFINITY;
    for mu in &measures {
        for &eps in &[0.2, 0.4] {
            let r = verify_local_katok_bound(&shift, mu, eps, &params, &DEFAULT_DELTAS, -LOCAL_KATOK_SLACK).unwrap();
            worst = worst.min(r.slack);
        }
    }
    verdict(worst >= LOCAL_KATOK_SLACK, format!("smallest slack Katok(eps) - BK(eps/2) = {worst:.4}"))
}

fn criterion_9() -> Verdict {
    let shift = ShiftSpec::full(2).unwrap();
    // A union exceeds the larger part by up to ln 2 / n_min at finite truncation,
    // so n_min is taken large enough for that to sit below the bisection tolerance.
    let params = TruncationParams::new(2000, 2400);
    assert!(2f64.ln() / (params.n_min as f64) < params.tol);
    let s = |z: &SubsetSpec| critical_exponent(&shift, z, 0.3, &params).unwrap().s_star;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut worst_nested, mut worst_union) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..20 {
        let (ka, kb) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let a = random_union(&mut rng, 6, ka);
        let b = random_union(&mut rng, 6, kb);
        let (SubsetSpec::CylinderUnion { cylinders: ca }, SubsetSpec::CylinderUnion { cylinders: cb }) = (&a, &b) else {
            unreachable!()
        };
        let both = SubsetSpec::cylinders(ca.iter().chain(cb).cloned().collect()).unwrap();
        let (sa, sb, su) = (s(&a), s(&b), s(&both));
        worst_nested = worst_nested.max(sa - su).max(sb - su);
        worst_union = worst_union.max((su - sa.max(sb)).abs());
    }
    let pass = worst_nested <= SUBSET_TOL && worst_union <= params.tol;
    verdict(pass, format!("worst s*(Z1) - s*(Z1 u Z2) = {worst_nested:.2e}; worst |union - max| = {worst_union:.2e}"))
}

fn criterion_10() -> Verdict {
    let params = TruncationParams::new(50, 400);
    let options = SandwichOptions { seed: 10, ..SandwichOptions::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, shift, k) in [
        ("full 3-shift", ShiftSpec::full(3).unwrap(), SubsetSpec::whole()),
        ("golden mean", ShiftSpec::full(2).unwrap(), SubsetSpec::golden_mean()),
    ] {
        let r = variational_sandwich(&shift, &k, 0.2, &params, &options).unwrap();
        let katok = r.katok.as_ref().map_or(f64::NAN, |t| t.value);
        let lower = r.critical.s_star <= r.bk_frostman.integral_estimate + SANDWICH_TOL;
        let upper = katok <= r.critical.s_star + SANDWICH_TOL;
        ok &= lower && upper;
        parts.push(format!(
            "{name}: Katok {katok:.4} <= s* {:.4} <= BK {:.4}",
            r.critical.s_star, r.bk_frostman.integral_estimate
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_11() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    let text = format!(
        r#"
[system]
alphabet = 2
kind = "full"

[measure]
kind = "bernoulli"
probs = [0.7, 0.3]

[compute]
n_max = 200
seed = 11
samples = 16
bk_mode = "monte-carlo"

[sweep]
quantity = "brin-katok"
epsilon = [0.4, 0.1, 0.2]
n_min = [40, 20, 30]

[output]
dir = "{}"
json = false
"#,
        dir.path().join("out").display()
    );
    std::fs::write(&config, text).unwrap();
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_nbe"))
            .args(["sweep", "--config"])
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join("out").join("sweep.csv")).unwrap()
    };
    let first = run();
    let second = run();
    let rows = String::from_utf8_lossy(&first).lines().count() - 1;
    verdict(first == second && rows == 9, format!("{rows} rows, byte-identical: {}", first == second))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("full-shift entropy", criterion_1),
        ("spanning bound", criterion_2),
        ("Brin-Katok exactness", criterion_3),
        ("golden-mean entropy", criterion_4),
        ("DP equals brute force", criterion_5),
        ("cover/flow duality", criterion_6),
        ("weighted sandwich", criterion_7),
        ("local vs Katok entropy", criterion_8),
        ("subset monotonicity and unions", criterion_9),
        ("variational sandwich", criterion_10),
        ("sweep determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        println!("{} criterion {:>2} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
