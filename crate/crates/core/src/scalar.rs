//! Probability scalars: `f32`, `f64`, or exact `BigRational`.
//!
//! Every law and distance routine is generic over [`Scalar`]. Float
//! backends accumulate with Neumaier compensation; the rational backend
//! keeps a running common denominator so that adding many `1/k` weights
//! never triggers a big gcd.

use std::fmt::Debug;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    type Sum: SumAccumulator<Self>;
    const EXACT: bool;

    fn from_rational(r: &BigRational) -> Self;
    fn ratio_u64(num: u64, den: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_f64(x: f64) -> Self;
    /// Exact value (the binary expansion for floats).
    fn to_rational(&self) -> BigRational {
        BigRational::from_float(self.to_f64()).unwrap_or_else(BigRational::zero)
    }
    /// Lossless text form (`num/den`, or shortest round-trip float).
    fn to_text(&self) -> String;
    fn parse_text(s: &str) -> Option<Self>;
    /// Slack allowed when checking that a law has total mass one.
    fn mass_tolerance() -> Self;

    fn from_u64(v: u64) -> Self {
        Self::ratio_u64(v, 1)
    }
    fn recip_u64(v: u64) -> Self {
        Self::ratio_u64(1, v)
    }
}

/// An order-insensitive (exact) or order-fixed (float) running sum.
pub trait SumAccumulator<P>: Clone + Default + Send {
    fn add(&mut self, x: &P);
    /// Adds `num/den`; cheaper than `add` for the rational backend.
    fn add_ratio(&mut self, num: u64, den: u64);
    fn merge(&mut self, other: &Self);
    fn value(&self) -> P;
}

/// Neumaier (improved Kahan–Babuška) summation in double precision.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Neumaier>().total()
}

impl SumAccumulator<f64> for Neumaier {
    fn add(&mut self, x: &f64) {
        self.push(*x);
    }
    fn add_ratio(&mut self, num: u64, den: u64) {
        self.push(num as f64 / den as f64);
    }
    fn merge(&mut self, other: &Self) {
        self.push(other.sum);
        self.push(other.comp);
    }
    fn value(&self) -> f64 {
        self.total()
    }
}

// f32 laws still accumulate in f64 and round once at the end.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierF32(Neumaier);

impl SumAccumulator<f32> for NeumaierF32 {
    fn add(&mut self, x: &f32) {
        self.0.push(*x as f64);
    }
    fn add_ratio(&mut self, num: u64, den: u64) {
        self.0.push(num as f64 / den as f64);
    }
    fn merge(&mut self, other: &Self) {
        self.0.merge(&other.0);
    }
    fn value(&self) -> f32 {
        self.0.total() as f32
    }
}

/// Exact sum held as `num / den` with `den` the lcm of all denominators
/// seen so far. Reduction happens only in [`LcmSum::value`].
#[derive(Clone, Debug)]
pub struct LcmSum {
    num: BigInt,
    den: BigUint,
}

impl Default for LcmSum {
    fn default() -> Self {
        LcmSum {
            num: BigInt::zero(),
            den: BigUint::one(),
        }
    }
}

impl LcmSum {
    fn add_parts(&mut self, a: BigInt, b: &BigUint) {
        if b.is_one() {
            self.num += a * BigInt::from(self.den.clone());
            return;
        }
        let g = self.den.gcd(b);
        let b_over_g = b / &g;
        if !b_over_g.is_one() {
            self.num *= BigInt::from(b_over_g.clone());
            self.den *= &b_over_g;
        }
        let scale = &self.den / b;
        self.num += a * BigInt::from(scale);
    }
}

impl SumAccumulator<BigRational> for LcmSum {
    fn add(&mut self, x: &BigRational) {
        if x.is_zero() {
            return;
        }
        let b = x.denom().to_biguint().expect("reduced denominators are positive");
        self.add_parts(x.numer().clone(), &b);
    }

    fn add_ratio(&mut self, num: u64, den: u64) {
        assert!(den > 0, "zero denominator");
        if num == 0 {
            return;
        }
        let r = (&self.den % den).to_u64().unwrap_or(0);
        if r == 0 {
            let scale = &self.den / den;
            self.num += BigInt::from(scale * num);
            return;
        }
        // den does not divide the running lcm: extend it by den / gcd
        let g = r.gcd(&den);
        let ext = den / g;
        self.num *= ext;
        self.den *= ext;
        let scale = &self.den / den;
        self.num += BigInt::from(scale * num);
    }

    fn merge(&mut self, other: &Self) {
        self.add_parts(other.num.clone(), &other.den);
    }

    fn value(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::from(self.den.clone()))
    }
}

impl Scalar for f64 {
    type Sum = Neumaier;
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
    fn ratio_u64(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }
    fn parse_text(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn mass_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    type Sum = NeumaierF32;
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r) as f32
    }
    fn ratio_u64(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }
    fn parse_text(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn mass_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for BigRational {
    type Sum = LcmSum;
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn ratio_u64(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn to_rational(&self) -> BigRational {
        self.clone()
    }
    /// Exact binary expansion of `x`; NaN and infinities map to zero.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }
    fn to_text(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
    fn parse_text(s: &str) -> Option<Self> {
        let (n, d) = s.trim().split_once('/').unwrap_or((s.trim(), "1"));
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n.parse().ok()?, d))
    }
    fn mass_tolerance() -> Self {
        BigRational::zero()
    }
}

/// Correctly rounded even when numerator and denominator individually
/// overflow `f64`.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lcm_sum_harmonic() {
        let mut acc = LcmSum::default();
        for k in 1..=10u64 {
            acc.add_ratio(1, k);
        }
        assert_eq!(acc.value(), rat(7381, 2520));
    }

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(xs.iter().copied()), 1.0);
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = BigInt::from(3u32).pow(2000);
        let r = BigRational::new(big.clone() * 2, big);
        assert!((rational_to_f64(&r) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lcm_sum_matches_rational_sum(terms in proptest::collection::vec((0u64..50, 1u64..200), 0..40)) {
            let mut acc = LcmSum::default();
            let mut plain = BigRational::zero();
            for (i, &(a, b)) in terms.iter().enumerate() {
                if i % 2 == 0 {
                    acc.add_ratio(a, b);
                } else {
                    acc.add(&BigRational::ratio_u64(a, b));
                }
                plain += BigRational::ratio_u64(a, b);
            }
            prop_assert_eq!(acc.value(), plain);
        }

        #[test]
        fn lcm_merge_is_exact(xs in proptest::collection::vec((1u64..30, 1u64..60), 1..20), split in 0usize..20) {
            let split = split.min(xs.len());
            let (mut l, mut r) = (LcmSum::default(), LcmSum::default());
            let mut all = LcmSum::default();
            for (i, &(a, b)) in xs.iter().enumerate() {
                if i < split { l.add_ratio(a, b) } else { r.add_ratio(a, b) }
                all.add_ratio(a, b);
            }
            l.merge(&r);
            prop_assert_eq!(l.value(), all.value());
        }
    }
}
