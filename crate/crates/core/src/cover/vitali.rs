//! Greedy disjoint selection from a family of equal-radius `d_n` balls.

use crate::symbolic::Word;

/// Length of the cylinder equal to the open `d_n`-ball of radius `r`.
///
/// `d_n(x, y) = N^{-m}` with `m` the number of agreeing symbols past the first
/// `n - 1`, so `d_n < r` needs `m > -ln r / ln N`.
pub fn radius_cylinder_length(n: usize, r: f64, alphabet: usize) -> usize {
    assert!(n >= 1 && r > 0.0 && alphabet >= 2, "invalid ball parameters");
    if r > 1.0 {
        return 0;
    }
    let t = -r.ln() / (alphabet as f64).ln();
    let snapped = t.round();
    let t = if (t - snapped).abs() <= crate::symbolic::BOUNDARY_GUARD * t.max(1.0) { snapped } else { t };
    n - 1 + t.floor() as usize + 1
}

/// Smallest `N` such that every `n >= N` has `e^{n eps / 2} > 5` and `n^2 < e^{n theta}`,
/// with `sum_{n >= N} 1/n^2 < 1`. From this order on, covers at `(eps/2, s + theta)`
/// cost no more than weighted covers at `(eps, s)`.
pub fn weighted_sandwich_threshold(epsilon: f64, theta: f64) -> usize {
    assert!(epsilon > 0.0 && theta > 0.0, "epsilon and theta must be positive");
    let radius = (2.0 * 5f64.ln() / epsilon).floor() as usize + 1;
    // n^2 e^{-n theta} decreases once n > 2 / theta, so the last failure is below that.
    let turn = (2.0 / theta).ceil() as usize;
    let mut n = turn.max(1);
    while n > 1 && ((n - 1) as f64).powi(2) < ((n - 1) as f64 * theta).exp() {
        n -= 1;
    }
    let mut m = n;
    while (m as f64).powi(2) >= (m as f64 * theta).exp() {
        m += 1;
    }
    radius.max(m).max(2)
}

/// Indices of a pairwise-disjoint subfamily of the balls `B_n(center, r)` whose
/// `5r` enlargements cover every ball of the family.
pub fn five_r_select(centers: &[Word], n: usize, r: f64, alphabet: usize) -> Vec<usize> {
    let len = radius_cylinder_length(n, r, alphabet);
    let mut chosen: Vec<usize> = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        let cyl = c.prefix(len.min(c.len()));
        let disjoint = chosen.iter().all(|&j| {
            let other = centers[j].prefix(len.min(centers[j].len()));
            !cyl.is_prefix_of(&other) && !other.is_prefix_of(&cyl)
        });
        if disjoint {
            chosen.push(i);
        }
    }
    chosen
}

/// Checks the selection contract on explicit points: the selected balls are
/// pairwise disjoint, and every point of any ball lies in some enlarged selected ball.
pub fn vitali_cover_holds(centers: &[Word], chosen: &[usize], n: usize, r: f64, alphabet: usize, points: &[Word]) -> bool {
    let inside = |c: &Word, y: &Word, radius: f64| {
        crate::symbolic::bowen_distance(c, y, n, alphabet).map(|d| d < radius).unwrap_or(false)
    };
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            if points.iter().any(|y| inside(&centers[i], y, r) && inside(&centers[j], y, r)) {
                return false;
            }
        }
    }
    points.iter().all(|y| {
        !centers.iter().any(|c| inside(c, y, r)) || chosen.iter().any(|&j| inside(&centers[j], y, 5.0 * r))
    })
}
