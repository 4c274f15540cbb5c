//! Bernoulli and Markov measures on sequence space.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{ShiftSpec, Transitions, Word};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Anything that assigns masses to cylinders and can draw sample words.
pub trait CylinderMeasure {
    fn alphabet(&self) -> usize;
    /// Natural log of the mass of `[w]`; `-inf` for null cylinders.
    fn log_mass(&self, w: &Word) -> Result<f64>;
    /// A word drawn from the length-`len` marginal, deterministic in `seed`.
    fn sample(&self, len: usize, seed: u64) -> Word;
    /// `E[-ln mu([x_0..x_{len-1}])]` when available in closed form.
    fn expected_neg_log_mass(&self, _len: usize) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureParams {
    Bernoulli { probs: Vec<f64> },
    Markov { stationary: Vec<f64>, matrix: Vec<Vec<f64>> },
}

/// A Bernoulli or stationary Markov measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureParams", into = "MeasureParams")]
pub struct MeasureSpec {
    params: MeasureParams,
    log_probs: Vec<f64>,
    log_init: Vec<f64>,
    log_matrix: Vec<Vec<f64>>,
    uniform: bool,
    exact: Option<ExactParams>,
}

#[derive(Clone, Debug, PartialEq)]
struct ExactParams {
    probs: Vec<BigRational>,
    matrix: Vec<Vec<BigRational>>,
}

impl TryFrom<MeasureParams> for MeasureSpec {
    type Error = Error;
    fn try_from(p: MeasureParams) -> Result<Self> {
        match p {
            MeasureParams::Bernoulli { probs } => MeasureSpec::bernoulli(probs),
            MeasureParams::Markov { stationary, matrix } => MeasureSpec::markov(stationary, matrix),
        }
    }
}

impl From<MeasureSpec> for MeasureParams {
    fn from(m: MeasureSpec) -> Self {
        m.params
    }
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::InvalidMeasure(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL * p.len() as f64 {
        return Err(Error::InvalidMeasure(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl MeasureSpec {
    pub fn bernoulli(probs: Vec<f64>) -> Result<Self> {
        let n = probs.len();
        if n < 2 {
            return Err(Error::InvalidMeasure("need at least two symbols".into()));
        }
        check_distribution(&probs, "probability vector")?;
        // Equal weights get the exact `-ln N`, so uniform masses are exactly `-D ln N`.
        let uniform = probs.iter().all(|&p| p == probs[0]);
        let log_probs = if uniform {
            vec![-(n as f64).ln(); n]
        } else {
            probs.iter().map(|&p| ln_or_neg_inf(p)).collect()
        };
        Ok(MeasureSpec {
            params: MeasureParams::Bernoulli { probs },
            log_init: log_probs.clone(),
            log_matrix: vec![log_probs.clone(); n],
            log_probs,
            uniform,
            exact: None,
        })
    }

    /// The `(1/N, .., 1/N)` Bernoulli measure.
    pub fn uniform(alphabet: usize) -> Result<Self> {
        let mut m = MeasureSpec::bernoulli(vec![1.0 / alphabet as f64; alphabet])?;
        m.exact = Some(ExactParams { probs: vec![ratio(1, alphabet as u64); alphabet], matrix: Vec::new() });
        Ok(m)
    }

    /// Bernoulli measure with rational weights given as `(numerator, denominator)`.
    pub fn bernoulli_rational(probs: &[(u64, u64)]) -> Result<Self> {
        let exact: Vec<BigRational> = probs
            .iter()
            .map(|&(a, b)| {
                if b == 0 {
                    Err(Error::InvalidMeasure("zero denominator".into()))
                } else {
                    Ok(ratio(a, b))
                }
            })
            .collect::<Result<_>>()?;
        if exact.iter().sum::<BigRational>() != BigRational::one() {
            return Err(Error::InvalidMeasure("rational weights do not sum to 1".into()));
        }
        let mut m = MeasureSpec::bernoulli(probs.iter().map(|&(a, b)| a as f64 / b as f64).collect())?;
        m.exact = Some(ExactParams { probs: exact, matrix: Vec::new() });
        Ok(m)
    }

    pub fn markov(stationary: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = stationary.len();
        if n < 2 {
            return Err(Error::InvalidMeasure("need at least two symbols".into()));
        }
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMeasure(format!("transition matrix must be {n}x{n}")));
        }
        check_distribution(&stationary, "stationary vector")?;
        for (i, row) in matrix.iter().enumerate() {
            check_distribution(row, &format!("row {i}"))?;
        }
        for j in 0..n {
            let v: f64 = (0..n).map(|i| stationary[i] * matrix[i][j]).sum();
            if (v - stationary[j]).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "stationary vector is not invariant at {j}: {v} vs {}",
                    stationary[j]
                )));
            }
        }
        Ok(MeasureSpec {
            log_init: stationary.iter().map(|&p| ln_or_neg_inf(p)).collect(),
            log_matrix: matrix.iter().map(|r| r.iter().map(|&p| ln_or_neg_inf(p)).collect()).collect(),
            log_probs: Vec::new(),
            uniform: false,
            params: MeasureParams::Markov { stationary, matrix },
            exact: None,
        })
    }

    /// Markov measure with rational stationary vector and transition matrix.
    pub fn markov_rational(stationary: &[(u64, u64)], matrix: &[Vec<(u64, u64)>]) -> Result<Self> {
        let pi: Vec<BigRational> = stationary.iter().map(|&(a, b)| ratio(a, b)).collect();
        let p: Vec<Vec<BigRational>> = matrix.iter().map(|r| r.iter().map(|&(a, b)| ratio(a, b)).collect()).collect();
        for row in &p {
            if row.iter().sum::<BigRational>() != BigRational::one() {
                return Err(Error::InvalidMeasure("rational row does not sum to 1".into()));
            }
        }
        for j in 0..pi.len() {
            let v: BigRational = (0..pi.len()).map(|i| &pi[i] * &p[i][j]).sum();
            if v != pi[j] {
                return Err(Error::InvalidMeasure("rational stationary vector is not invariant".into()));
            }
        }
        let to_f = |r: &(u64, u64)| r.0 as f64 / r.1 as f64;
        let mut m = MeasureSpec::markov(
            stationary.iter().map(to_f).collect(),
            matrix.iter().map(|r| r.iter().map(to_f).collect()).collect(),
        )?;
        m.exact = Some(ExactParams { probs: pi, matrix: p });
        Ok(m)
    }

    /// The measure of maximal entropy (Parry measure) of an irreducible SFT.
    pub fn parry(transitions: &Transitions) -> Result<Self> {
        let n = transitions.len();
        if !crate::symbolic::is_irreducible(transitions) {
            return Err(Error::InvalidMeasure("Parry measure needs an irreducible matrix".into()));
        }
        let a = |i: usize, j: usize| if transitions[i][j] { 1.0 } else { 0.0 };
        // Power iteration on A + I, which is primitive when A is irreducible.
        let iterate = |transpose: bool| {
            let mut v = vec![1.0 / n as f64; n];
            let mut lambda = 0.0;
            for _ in 0..100_000 {
                let mut next: Vec<f64> = (0..n)
                    .map(|i| v[i] + (0..n).map(|j| if transpose { a(j, i) } else { a(i, j) } * v[j]).sum::<f64>())
                    .collect();
                let norm: f64 = next.iter().sum();
                next.iter_mut().for_each(|x| *x /= norm);
                let delta: f64 = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).sum();
                v = next;
                lambda = norm - 1.0;
                if delta < 1e-17 {
                    break;
                }
            }
            (v, lambda)
        };
        let (right, lambda) = iterate(false);
        let (left, _) = iterate(true);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|j| a(i, j) * right[j] / (lambda * right[i])).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let z: f64 = (0..n).map(|i| left[i] * right[i]).sum();
        let mut stationary: Vec<f64> = (0..n).map(|i| left[i] * right[i] / z).collect();
        // One step of the chain removes residual iteration error.
        stationary = (0..n).map(|j| (0..n).map(|i| stationary[i] * matrix[i][j]).sum()).collect();
        let s: f64 = stationary.iter().sum();
        stationary.iter_mut().for_each(|x| *x /= s);
        MeasureSpec::markov(stationary, matrix)
    }

    pub fn params(&self) -> &MeasureParams {
        &self.params
    }

    pub fn alphabet_size(&self) -> usize {
        match &self.params {
            MeasureParams::Bernoulli { probs } => probs.len(),
            MeasureParams::Markov { stationary, .. } => stationary.len(),
        }
    }

    /// Equal weights on every symbol.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.params, MeasureParams::Markov { .. })
    }

    /// Symbols with positive mass cannot be joined by forbidden transitions.
    pub fn check_support(&self, shift: &ShiftSpec) -> Result<()> {
        let n = self.alphabet_size();
        if n != shift.alphabet_size() {
            return Err(Error::InvalidMeasure(format!(
                "measure has {n} symbols, shift has {}",
                shift.alphabet_size()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let positive = match &self.params {
                    MeasureParams::Bernoulli { probs } => probs[i] > 0.0 && probs[j] > 0.0,
                    MeasureParams::Markov { stationary: _, matrix } => matrix[i][j] > 0.0,
                };
                if positive && !shift.allows(i as u8, j as u8) {
                    return Err(Error::InvalidMeasure(format!(
                        "measure charges the forbidden transition {i}->{j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log-probability of the first symbol.
    pub(crate) fn log_initial(&self, a: u8) -> f64 {
        self.log_init[a as usize]
    }

    /// Log-probability of `b` following `a`.
    pub(crate) fn log_transition(&self, a: u8, b: u8) -> f64 {
        self.log_matrix[a as usize][b as usize]
    }

    /// Natural log of `mu([w])`; `-inf` for null cylinders.
    pub fn log_cylinder_mass(&self, w: &Word) -> Result<f64> {
        let n = self.alphabet_size();
        if let Some(&s) = w.symbols().iter().find(|&&s| s as usize >= n) {
            return Err(Error::InvalidWord(format!("symbol {s} outside alphabet of size {n}")));
        }
        let s = w.symbols();
        if s.is_empty() {
            return Ok(0.0);
        }
        match &self.params {
            MeasureParams::Bernoulli { .. } if self.uniform => Ok(s.len() as f64 * self.log_probs[0]),
            MeasureParams::Bernoulli { .. } => {
                let mut counts = vec![0u64; n];
                s.iter().for_each(|&a| counts[a as usize] += 1);
                Ok(weighted_log_sum(counts.iter().zip(&self.log_probs).map(|(&c, &l)| (c, l))))
            }
            MeasureParams::Markov { .. } => {
                let mut counts = vec![0u64; n * n];
                s.windows(2).for_each(|p| counts[p[0] as usize * n + p[1] as usize] += 1);
                let flat = self.log_matrix.iter().flatten().copied();
                let body = weighted_log_sum(counts.iter().copied().zip(flat));
                Ok(self.log_init[s[0] as usize] + body)
            }
        }
    }

    /// Exact rational mass of `[w]`. Uses the rational parameters when given,
    /// otherwise the exact binary values of the `f64` parameters.
    pub fn exact_cylinder_mass(&self, w: &Word) -> Result<BigRational> {
        let n = self.alphabet_size();
        if w.symbols().iter().any(|&s| s as usize >= n) {
            return Err(Error::InvalidWord(format!("{w} has a symbol outside the alphabet")));
        }
        let from_f = |x: f64| BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        let s = w.symbols();
        if s.is_empty() {
            return Ok(BigRational::one());
        }
        match &self.params {
            MeasureParams::Bernoulli { probs } => {
                let p: Vec<BigRational> = match &self.exact {
                    Some(e) => e.probs.clone(),
                    None => probs.iter().map(|&x| from_f(x)).collect(),
                };
                Ok(s.iter().map(|&a| p[a as usize].clone()).product())
            }
            MeasureParams::Markov { stationary, matrix } => {
                let (pi, p) = match &self.exact {
                    Some(e) => (e.probs.clone(), e.matrix.clone()),
                    None => (
                        stationary.iter().map(|&x| from_f(x)).collect::<Vec<_>>(),
                        matrix.iter().map(|r| r.iter().map(|&x| from_f(x)).collect()).collect::<Vec<Vec<_>>>(),
                    ),
                };
                let mut m = pi[s[0] as usize].clone();
                for pair in s.windows(2) {
                    m *= &p[pair[0] as usize][pair[1] as usize];
                }
                Ok(m)
            }
        }
    }

    /// Kolmogorov-Sinai entropy in nats.
    pub fn entropy_rate(&self) -> f64 {
        let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum() };
        match &self.params {
            MeasureParams::Bernoulli { probs } => {
                if probs.iter().all(|&p| p == probs[0]) {
                    (probs.len() as f64).ln()
                } else {
                    h(probs)
                }
            }
            MeasureParams::Markov { stationary, matrix } => {
                stationary.iter().zip(matrix).map(|(&pi, row)| pi * h(row)).sum()
            }
        }
    }

    /// Entropy of the first-symbol distribution.
    pub fn initial_entropy(&self) -> f64 {
        let p = match &self.params {
            MeasureParams::Bernoulli { probs } => probs,
            MeasureParams::Markov { stationary, .. } => stationary,
        };
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
    }

    /// Expected `-ln mu([x_0..x_{len-1}])` under `mu`.
    pub fn expected_neg_log_mass(&self, len: usize) -> f64 {
        match (&self.params, len) {
            (_, 0) => 0.0,
            (MeasureParams::Bernoulli { .. }, l) => l as f64 * self.entropy_rate(),
            (MeasureParams::Markov { .. }, l) => self.initial_entropy() + (l - 1) as f64 * self.entropy_rate(),
        }
    }

    pub fn sample_word(&self, len: usize, seed: u64) -> Word {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        let draw = |rng: &mut ChaCha8Rng, p: &[f64]| -> u8 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &x) in p.iter().enumerate() {
                acc += x;
                if u < acc {
                    return i as u8;
                }
            }
            // Rounding left `u` above the cumulative total; take the last charged symbol.
            p.iter().rposition(|&x| x > 0.0).unwrap_or(0) as u8
        };
        match &self.params {
            MeasureParams::Bernoulli { probs } => {
                for _ in 0..len {
                    out.push(draw(&mut rng, probs));
                }
            }
            MeasureParams::Markov { stationary, matrix } => {
                if len > 0 {
                    let mut cur = draw(&mut rng, stationary);
                    out.push(cur);
                    for _ in 1..len {
                        cur = draw(&mut rng, &matrix[cur as usize]);
                        out.push(cur);
                    }
                }
            }
        }
        Word::new(out)
    }
}

fn weighted_log_sum(terms: impl Iterator<Item = (u64, f64)>) -> f64 {
    let mut total = 0.0;
    for (c, l) in terms {
        if c > 0 {
            if l == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += c as f64 * l;
        }
    }
    total
}

impl CylinderMeasure for MeasureSpec {
    fn alphabet(&self) -> usize {
        self.alphabet_size()
    }
    fn log_mass(&self, w: &Word) -> Result<f64> {
        self.log_cylinder_mass(w)
    }
    fn sample(&self, len: usize, seed: u64) -> Word {
        self.sample_word(len, seed)
    }
    fn expected_neg_log_mass(&self, len: usize) -> Option<f64> {
        Some(MeasureSpec::expected_neg_log_mass(self, len))
    }
}

/// `|a - b|` for rationals, as `f64`.
pub fn rational_gap(a: &BigRational, b: &BigRational) -> f64 {
    let d = (a - b).abs();
    let num: f64 = d.numer().to_string().parse().unwrap_or(f64::INFINITY);
    let den: f64 = d.denom().to_string().parse().unwrap_or(f64::INFINITY);
    num / den
}
