//! Nonnegative cost arithmetic.
//!
//! Cover costs `sum e^{-n s}` span hundreds of orders of magnitude, so the
//! default representation is the natural log of the value ([`LogF64`]). The
//! high-precision mode ([`HighPrecision`]) uses 256-bit software floats.

use std::cell::RefCell;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Arithmetic precision for cover computations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    High,
}

impl std::str::FromStr for Precision {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "high" => Ok(Precision::High),
            other => Err(crate::Error::Config(format!("unknown precision '{other}'"))),
        }
    }
}

/// A nonnegative extended real supporting the operations the tree DPs need.
pub trait CostScalar: Clone + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn infinity() -> Self;
    /// `e^{-order * s}`
    fn exp_neg(order: usize, s: f64) -> Self;
    /// A nonnegative finite `f64`.
    fn from_f64(x: f64) -> Self;
    fn from_count(count: &BigUint) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn scale(&self, k: u64) -> Self;
    fn less_than(&self, other: &Self) -> bool;
    fn is_zero(&self) -> bool;
    fn is_infinite(&self) -> bool;
    /// Natural log as `f64` (`-inf` for zero).
    fn ln(&self) -> f64;
    /// `|a - b| / max(a, b)` evaluated in this precision; 0 when both are zero.
    fn rel_diff(&self, other: &Self) -> f64;

    fn less_eq(&self, other: &Self) -> bool {
        !other.less_than(self)
    }

    fn sum<'a, I: IntoIterator<Item = &'a Self>>(items: I) -> Self
    where
        Self: 'a,
    {
        items.into_iter().fold(Self::zero(), |acc, x| acc.add(x))
    }
}

/// `ln(e^a + e^b)`
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when they are equal.
#[inline]
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Natural log of a big unsigned integer (`-inf` for zero).
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        let digits = x.to_u64_digits();
        let mut v = 0.0f64;
        for d in digits.iter().rev() {
            v = v * 18446744073709551616.0 + *d as f64;
        }
        return v.ln();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    let top = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// A cost stored as its natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogF64(pub f64);

impl CostScalar for LogF64 {
    fn zero() -> Self {
        LogF64(f64::NEG_INFINITY)
    }
    fn infinity() -> Self {
        LogF64(f64::INFINITY)
    }
    fn exp_neg(order: usize, s: f64) -> Self {
        LogF64(-(order as f64) * s)
    }
    fn from_f64(x: f64) -> Self {
        LogF64(x.ln())
    }
    fn from_count(count: &BigUint) -> Self {
        LogF64(ln_biguint(count))
    }
    fn add(&self, other: &Self) -> Self {
        LogF64(log_add_exp(self.0, other.0))
    }
    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        LogF64(self.0 + other.0)
    }
    fn div(&self, other: &Self) -> Self {
        LogF64(self.0 - other.0)
    }
    fn scale(&self, k: u64) -> Self {
        if k == 0 {
            return Self::zero();
        }
        LogF64(self.0 + (k as f64).ln())
    }
    fn less_than(&self, other: &Self) -> bool {
        self.0 < other.0
    }
    fn is_zero(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
    fn is_infinite(&self) -> bool {
        self.0 == f64::INFINITY
    }
    fn ln(&self) -> f64 {
        self.0
    }
    fn rel_diff(&self, other: &Self) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        -(-(self.0 - other.0).abs()).exp_m1()
    }
}

const HIGH_BITS: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// 256-bit binary floating point (about 77 significant decimal digits).
#[derive(Clone, Debug)]
pub struct HighPrecision(BigFloat);

impl HighPrecision {
    pub fn inner(&self) -> &BigFloat {
        &self.0
    }

    /// Nearest `f64` (through a decimal rendering).
    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        self.0.to_string().parse().unwrap_or(f64::NAN)
    }
}

impl PartialEq for HighPrecision {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl CostScalar for HighPrecision {
    fn zero() -> Self {
        HighPrecision(BigFloat::from_u64(0, HIGH_BITS))
    }
    fn infinity() -> Self {
        HighPrecision(astro_float::INF_POS)
    }
    fn exp_neg(order: usize, s: f64) -> Self {
        let x = BigFloat::from_f64(s, HIGH_BITS)
            .mul(&BigFloat::from_u64(order as u64, HIGH_BITS), HIGH_BITS, RM)
            .neg();
        CONSTS.with(|cc| HighPrecision(x.exp(HIGH_BITS, RM, &mut cc.borrow_mut())))
    }
    fn from_f64(x: f64) -> Self {
        HighPrecision(BigFloat::from_f64(x, HIGH_BITS))
    }
    fn from_count(count: &BigUint) -> Self {
        let radix = BigFloat::from_u64(u64::MAX, HIGH_BITS).add(&BigFloat::from_u64(1, HIGH_BITS), HIGH_BITS, RM);
        let mut acc = BigFloat::from_u64(0, HIGH_BITS);
        for d in count.to_u64_digits().iter().rev() {
            acc = acc
                .mul(&radix, HIGH_BITS, RM)
                .add(&BigFloat::from_u64(*d, HIGH_BITS), HIGH_BITS, RM);
        }
        HighPrecision(acc)
    }
    fn add(&self, other: &Self) -> Self {
        HighPrecision(self.0.add(&other.0, HIGH_BITS, RM))
    }
    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        HighPrecision(self.0.mul(&other.0, HIGH_BITS, RM))
    }
    fn div(&self, other: &Self) -> Self {
        HighPrecision(self.0.div(&other.0, HIGH_BITS, RM))
    }
    fn scale(&self, k: u64) -> Self {
        self.mul(&HighPrecision(BigFloat::from_u64(k, HIGH_BITS)))
    }
    fn less_than(&self, other: &Self) -> bool {
        self.0 < other.0
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn is_infinite(&self) -> bool {
        self.0.is_inf_pos()
    }
    fn ln(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        if self.is_infinite() {
            return f64::INFINITY;
        }
        CONSTS.with(|cc| HighPrecision(self.0.ln(HIGH_BITS, RM, &mut cc.borrow_mut()))).to_f64()
    }
    fn rel_diff(&self, other: &Self) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        if self.is_infinite() || other.is_infinite() {
            return if self.is_infinite() && other.is_infinite() { 0.0 } else { f64::INFINITY };
        }
        let diff = self.0.sub(&other.0, HIGH_BITS, RM).abs();
        let big = if self.less_than(other) { &other.0 } else { &self.0 };
        HighPrecision(diff.div(big, HIGH_BITS, RM)).to_f64()
    }
}
