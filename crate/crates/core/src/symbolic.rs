//! Words, cylinders and shift spaces over a finite alphabet.
//!
//! The metric on one-sided sequence space is `d(x, y) = N^{-k}` where `k` is the
//! first index at which `x` and `y` disagree. For the Bowen metric of order `n`
//! the maximum over the windows `0..n` is attained at the last window, so
//! `d_n(x, y) = N^{-max(0, k - n + 1)}`. A neutralized Bowen ball of order `n` and
//! rate `eps` (radius `e^{-n eps}`) is therefore exactly a cylinder, and
//! [`ball_cylinder_length`] gives its length.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative guard band used when `n * eps / ln N` lands on an integer.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// A finite word over `{0, .., N-1}`, stored densely.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    /// The first `len` symbols (the whole word if it is shorter).
    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `self` followed by `symbol`.
    pub fn extended(&self, symbol: u8) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(symbol);
        Word(v)
    }

    pub fn push(&mut self, symbol: u8) {
        self.0.push(symbol);
    }

    /// Index of the first disagreement within the common length.
    pub fn first_disagreement(&self, other: &Word) -> Option<usize> {
        self.0.iter().zip(other.0.iter()).position(|(a, b)| a != b)
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl From<Vec<u8>> for Word {
    fn from(v: Vec<u8>) -> Self {
        Word(v)
    }
}

impl From<&[u8]> for Word {
    fn from(v: &[u8]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 && self.0.len() > 1 {
                // Separator only matters for alphabets above 10.
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

/// Boolean transition matrix of a 1-step subshift of finite type.
pub type Transitions = Vec<Vec<bool>>;

/// A full shift or a 1-step subshift of finite type (vertex = last symbol).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSpec {
    alphabet: usize,
    transitions: Option<Transitions>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Full,
    Sft,
}

impl ShiftSpec {
    pub fn full(alphabet: usize) -> Result<Self> {
        check_alphabet(alphabet)?;
        Ok(ShiftSpec { alphabet, transitions: None })
    }

    /// A subshift of finite type. Every row and every column needs at least one allowed transition.
    pub fn sft(transitions: Transitions) -> Result<Self> {
        let n = transitions.len();
        check_alphabet(n)?;
        check_square(&transitions, n).map_err(Error::InvalidShift)?;
        for (i, row) in transitions.iter().enumerate() {
            if !row.iter().any(|&b| b) {
                return Err(Error::InvalidShift(format!("row {i} has no allowed transition")));
            }
        }
        for j in 0..n {
            if !transitions.iter().any(|row| row[j]) {
                return Err(Error::InvalidShift(format!("column {j} has no allowed transition")));
            }
        }
        Ok(ShiftSpec { alphabet: n, transitions: Some(transitions) })
    }

    /// The golden-mean shift on two symbols (the word `11` is forbidden).
    pub fn golden_mean() -> Self {
        ShiftSpec::sft(vec![vec![true, true], vec![true, false]]).expect("valid matrix")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn kind(&self) -> ShiftKind {
        if self.transitions.is_some() {
            ShiftKind::Sft
        } else {
            ShiftKind::Full
        }
    }

    pub fn is_full(&self) -> bool {
        self.transitions.is_none()
    }

    pub fn transitions(&self) -> Option<&Transitions> {
        self.transitions.as_ref()
    }

    #[inline]
    pub fn allows(&self, from: u8, to: u8) -> bool {
        match &self.transitions {
            None => true,
            Some(t) => t[from as usize][to as usize],
        }
    }

    /// Every symbol is in the alphabet and every consecutive pair is allowed.
    pub fn is_admissible(&self, word: &[u8]) -> bool {
        word.iter().all(|&s| (s as usize) < self.alphabet)
            && word.windows(2).all(|p| self.allows(p[0], p[1]))
    }

    pub fn check_word(&self, word: &Word) -> Result<()> {
        if let Some(&s) = word.symbols().iter().find(|&&s| s as usize >= self.alphabet) {
            return Err(Error::InvalidWord(format!(
                "symbol {s} outside alphabet of size {}",
                self.alphabet
            )));
        }
        if !self.is_admissible(word.symbols()) {
            return Err(Error::InvalidWord(format!("{word} is not admissible")));
        }
        Ok(())
    }

    /// Strong connectivity of the transition graph.
    pub fn is_irreducible(&self) -> bool {
        match &self.transitions {
            None => true,
            Some(t) => is_irreducible(t),
        }
    }

    /// Number of admissible words of length `depth`, by transfer-matrix power.
    pub fn count_words(&self, depth: usize) -> BigUint {
        if depth == 0 {
            return BigUint::one();
        }
        match &self.transitions {
            None => BigUint::from(self.alphabet).pow(depth as u32),
            Some(t) => {
                let start = vec![BigUint::one(); self.alphabet];
                let end = vector_times_power(&start, t, depth - 1);
                end.into_iter().sum()
            }
        }
    }
}

fn check_alphabet(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidShift(format!("alphabet size must be at least 2, got {n}")));
    }
    if n > 256 {
        return Err(Error::InvalidShift(format!("alphabet size {n} exceeds 256")));
    }
    Ok(())
}

pub(crate) fn check_square(m: &Transitions, n: usize) -> std::result::Result<(), String> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(format!("transition matrix must be {n}x{n}"));
    }
    Ok(())
}

pub(crate) fn is_irreducible(t: &Transitions) -> bool {
    let n = t.len();
    (0..n).all(|start| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for (w, &ok) in t[v].iter().enumerate() {
                if ok && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|b| b)
    })
}

/// Row vector `v` times `A^power` over the naturals, by repeated squaring.
pub(crate) fn vector_times_power(v: &[BigUint], a: &Transitions, mut power: usize) -> Vec<BigUint> {
    let n = a.len();
    let mut base: Vec<Vec<BigUint>> = a
        .iter()
        .map(|row| row.iter().map(|&b| if b { BigUint::one() } else { BigUint::zero() }).collect())
        .collect();
    let mut acc = v.to_vec();
    while power > 0 {
        if power & 1 == 1 {
            acc = (0..n)
                .map(|j| (0..n).map(|i| &acc[i] * &base[i][j]).sum())
                .collect();
        }
        power >>= 1;
        if power > 0 {
            base = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| &base[i][k] * &base[k][j]).sum())
                        .collect()
                })
                .collect();
        }
    }
    acc
}

/// Open or closed neutralized Bowen ball.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    #[default]
    Open,
    Closed,
}

impl std::str::FromStr for BallKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(BallKind::Open),
            "closed" => Ok(BallKind::Closed),
            other => Err(Error::Config(format!("unknown ball kind '{other}'"))),
        }
    }
}

/// `n * eps / ln N`, snapped to an integer when within the guard band.
fn resolution(n: usize, eps: f64, alphabet: usize) -> (f64, bool) {
    let t = n as f64 * eps / (alphabet as f64).ln();
    let r = t.round();
    if r >= 1.0 && (t - r).abs() <= BOUNDARY_GUARD * t.max(1.0) {
        (r, true)
    } else {
        (t, false)
    }
}

/// True when `n * eps / ln N` is (numerically) an integer, where open and closed balls differ.
pub fn is_boundary_case(n: usize, eps: f64, alphabet: usize) -> bool {
    resolution(n, eps, alphabet).1
}

/// Length `D` of the cylinder equal to the neutralized ball `B_n(x, e^{-n eps})`.
///
/// Open balls need `m > t` extra agreeing symbols past the first `n - 1`, closed
/// balls `m >= t`, with `t = n eps / ln N`. So `D = n + floor(t)` (open) and
/// `D = n - 1 + ceil(t)` (closed).
pub fn ball_cylinder_length(n: usize, eps: f64, alphabet: usize, kind: BallKind) -> usize {
    assert!(n >= 1 && eps > 0.0 && alphabet >= 2, "invalid ball parameters");
    let (t, exact) = resolution(n, eps, alphabet);
    match (kind, exact) {
        (BallKind::Open, true) => n + t as usize,
        (BallKind::Closed, true) => n - 1 + t as usize,
        (BallKind::Open, false) => n + t.floor() as usize,
        (BallKind::Closed, false) => n - 1 + t.ceil() as usize,
    }
}

/// Exponent `m` with `d_n(x, y) = N^{-m}` given the first disagreement index `k`.
#[inline]
fn window_exponent(k: usize, n: usize) -> usize {
    if k < n {
        0
    } else {
        k - n + 1
    }
}

/// The Bowen distance `d_n(x, y) = max_{j<n} d(T^j x, T^j y)`.
///
/// Identical words are treated as the same point. Distinct words that agree on
/// their whole common length cannot be resolved and yield an error.
pub fn bowen_distance(x: &Word, y: &Word, n: usize, alphabet: usize) -> Result<f64> {
    match x.first_disagreement(y) {
        Some(k) => Ok((alphabet as f64).powi(-(window_exponent(k, n) as i32))),
        None if x == y => Ok(0.0),
        None => Err(Error::InsufficientLength {
            needed: x.len().max(y.len()),
            available: x.len().min(y.len()),
        }),
    }
}

/// Whether `y` lies in the neutralized ball of order `n` and rate `eps` around `center`.
///
/// Decided from the metric: the exponent `m` of `d_n` is compared against
/// `n eps / ln N` with the same boundary rule as [`ball_cylinder_length`].
pub fn ball_membership(
    center: &Word,
    y: &Word,
    n: usize,
    eps: f64,
    alphabet: usize,
    kind: BallKind,
) -> Result<bool> {
    match center.first_disagreement(y) {
        Some(k) => {
            let m = window_exponent(k, n) as f64;
            let (t, _) = resolution(n, eps, alphabet);
            Ok(match kind {
                BallKind::Open => m > t,
                BallKind::Closed => m >= t,
            })
        }
        None => {
            let depth = ball_cylinder_length(n, eps, alphabet, kind);
            let common = center.len().min(y.len());
            if center == y || common >= depth {
                Ok(true)
            } else {
                Err(Error::InsufficientLength { needed: depth, available: common })
            }
        }
    }
}

/// A neutralized Bowen ball realized as the cylinder of its center's first `D` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeutralizedBall {
    pub order: usize,
    pub rate: f64,
    pub center: Word,
    pub kind: BallKind,
    pub realized_length: usize,
    pub alphabet: usize,
}

impl NeutralizedBall {
    pub fn new(center: Word, order: usize, rate: f64, alphabet: usize, kind: BallKind) -> Result<Self> {
        if order == 0 || rate.is_nan() || rate <= 0.0 {
            return Err(Error::Config(format!("ball needs order >= 1 and rate > 0, got n={order}, eps={rate}")));
        }
        let realized_length = ball_cylinder_length(order, rate, alphabet, kind);
        if center.len() < realized_length {
            return Err(Error::InsufficientLength { needed: realized_length, available: center.len() });
        }
        Ok(NeutralizedBall { order, rate, center, kind, realized_length, alphabet })
    }

    /// The cylinder word this ball equals.
    pub fn cylinder(&self) -> Word {
        self.center.prefix(self.realized_length)
    }

    pub fn contains(&self, y: &Word) -> Result<bool> {
        ball_membership(&self.center, y, self.order, self.rate, self.alphabet, self.kind)
    }

    pub fn is_boundary_case(&self) -> bool {
        is_boundary_case(self.order, self.rate, self.alphabet)
    }
}
