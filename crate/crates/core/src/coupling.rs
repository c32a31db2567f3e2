//! The product coupling H_n·Q(n/H_n), where Q(k) is uniform on
//! {1} ∪ {primes ≤ k}, and the exact quantities it controls.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::additive::AdditiveFunction;
use crate::error::{invalid, Error, Result};
use crate::laws::DiscreteLaw;
use crate::primes::{harmonic_exact, harmonic_f64, SieveTables};
use crate::scalar::{rational_to_f64, Neumaier, Scalar, SumAccumulator};

/// Largest n for which the lemma checks are evaluated in exact arithmetic.
pub const EXACT_LIMIT: u64 = 100_000;

/// Both coupling lemmas are stated for n ≥ 21.
pub const MIN_N: u64 = 21;

pub const TV_COEFF: f64 = 61.0;
pub const DIVIDES_COEFF: f64 = 6.4;

#[derive(Clone, Debug, PartialEq)]
pub struct JointAtom<P> {
    pub h: u64,
    pub q: u64,
    pub prob: P,
}

impl<P> JointAtom<P> {
    pub fn product(&self) -> u64 {
        self.h * self.q
    }
}

/// Joint law of (H_n, Q(n/H_n)) with the law of the product.
#[derive(Clone, Debug)]
pub struct CouplingLaw<P> {
    pub n: u64,
    pub joint: Vec<JointAtom<P>>,
    pub product: DiscreteLaw<P>,
}

impl<P: Scalar> CouplingLaw<P> {
    pub fn joint_mass(&self) -> P {
        let mut acc = P::Sum::default();
        for a in &self.joint {
            acc.add(&a.prob);
        }
        acc.value()
    }
}

/// Lemma-style comparison of a computed left side with a closed-form right
/// side. `vacuous` is set when the right side is at least one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    #[serde(rename = "lemma-id")]
    pub lemma_id: String,
    pub n: u64,
    pub lhs: f64,
    /// `num/den` when the left side was computed exactly.
    pub lhs_exact: Option<String>,
    pub error_bound: f64,
    pub rhs: f64,
    pub vacuous: bool,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(lemma_id: impl Into<String>, n: u64, lhs: f64, error_bound: f64, rhs: f64) -> Self {
        BoundCheck {
            lemma_id: lemma_id.into(),
            n,
            lhs,
            lhs_exact: None,
            error_bound,
            rhs,
            vacuous: rhs >= 1.0,
            holds: lhs <= rhs + error_bound,
        }
    }

    fn exact(mut self, v: &BigRational) -> Self {
        self.lhs_exact = Some(v.to_string());
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

fn loglog_over_log(n: u64) -> f64 {
    let l = (n as f64).ln();
    l.ln() / l
}

fn check_range(lemma: &'static str, n: u64, tables: &SieveTables) -> Result<()> {
    if n < MIN_N {
        return Err(Error::OutOfTheoremRange { lemma, n, min: MIN_N });
    }
    tables.check_n(n)
}

/// π(x) for integer x within the sieve.
fn pi(tables: &SieveTables, x: u64) -> u64 {
    tables.primes_upto(x).len() as u64
}

/// Maximal runs `[lo, hi]` of h with the same ⌊n/h⌋ = k, as `(lo, hi, k)`.
fn floor_blocks(n: u64) -> impl Iterator<Item = (u64, u64, u64)> {
    let mut lo = 1;
    std::iter::from_fn(move || {
        if lo > n {
            return None;
        }
        let k = n / lo;
        let hi = n / k;
        let out = (lo, hi, k);
        lo = hi + 1;
        Some(out)
    })
}

fn harmonic_total<P: Scalar>(n: u64) -> P {
    if P::EXACT {
        P::from_rational(&harmonic_exact(n))
    } else {
        P::from_f64(harmonic_f64(n))
    }
}

/// gcd(a, b) for |a| much smaller than |b|: one remainder, then small gcd.
fn small_gcd(a: &num_bigint::BigInt, b: &num_bigint::BigInt) -> num_bigint::BigInt {
    if a.is_zero() {
        return b.abs();
    }
    let r = b % a;
    a.gcd(&r)
}

/// s / l for reduced rationals, taking gcds only against the factors that
/// can share them (l is typically a huge harmonic number).
fn div_reduced(s: &BigRational, l: &BigRational) -> BigRational {
    let (a, b) = (s.numer(), s.denom());
    let (la, lb) = (l.numer(), l.denom());
    let g1 = small_gcd(a, la);
    let g2 = small_gcd(b, lb);
    let num = (a / &g1) * (lb / &g2);
    let den = (b / &g2) * (la / &g1);
    if den.is_negative() {
        BigRational::new_raw(-num, -den)
    } else {
        BigRational::new_raw(num, den)
    }
}

/// Divides by L_n, with the cheap reduction on the exact backend.
fn over_harmonic<P: Scalar>(s: P, l_n: &BigRational, l_f: &P) -> P {
    if P::EXACT {
        P::from_rational(&div_reduced(&s.to_rational(), l_n))
    } else {
        s / l_f.clone()
    }
}

/// Exact joint law: P[(h, q)] = 1/(L_n h (π(⌊n/h⌋) + 1)).
pub fn coupling_law<P: Scalar>(n: u64, tables: &SieveTables) -> Result<CouplingLaw<P>> {
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let l_exact = if P::EXACT { harmonic_exact(n) } else { BigRational::one() };
    let l_n: P = harmonic_total(n);
    let mut joint = Vec::new();
    let mut product: BTreeMap<u64, P::Sum> = BTreeMap::new();
    for (lo, hi, k) in floor_blocks(n) {
        let qs = tables.primes_upto(k);
        let c = qs.len() as u64 + 1;
        for h in lo..=hi {
            let w = over_harmonic(P::ratio_u64(1, h * c), &l_exact, &l_n);
            for &q in std::iter::once(&1).chain(qs) {
                product.entry(h * q).or_default().add_ratio(1, h * c);
                joint.push(JointAtom { h, q, prob: w.clone() });
            }
        }
    }
    let product = DiscreteLaw::from_atoms(
        product
            .into_iter()
            .map(|(m, s)| (BigRational::from_integer(m.into()), over_harmonic(s.value(), &l_exact, &l_n))),
    )?;
    Ok(CouplingLaw { n, joint, product })
}

/// c(m) = L_n·P[H_n Q(n/H_n) = m] for m ≤ n. Every split m = h·q with q = 1
/// or q a prime divisor of m is admissible because q ≤ n·q/m.
fn scaled_mass(m: u64, n: u64, factors: &[(u64, u32)], tables: &SieveTables) -> (f64, Vec<(u64, u64)>) {
    let mut terms = Vec::with_capacity(factors.len() + 1);
    terms.push((1, m * (pi(tables, n / m) + 1)));
    for &(q, _) in factors {
        let h = m / q;
        terms.push((1, h * (pi(tables, n / h) + 1)));
    }
    let v = terms.iter().map(|&(a, b)| a as f64 / b as f64).sum();
    (v, terms)
}

fn terms_exact(terms: &[(u64, u64)]) -> BigRational {
    terms
        .iter()
        .fold(BigRational::zero(), |acc, &(a, b)| acc + BigRational::new(a.into(), b.into()))
}

/// d_TV(J_n, H_n Q(n/H_n)) = Σ_{m ≤ n} (1/n − P[HQ = m])⁺, exactly.
pub fn tv_coupling_exact(n: u64, tables: &SieveTables) -> Result<BigRational> {
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let l_exact = harmonic_exact(n);
    let l = rational_to_f64(&l_exact);
    let mut below = 0u64;
    let mut c_sum = crate::scalar::LcmSum::default();
    let mut buf = Vec::new();
    for m in 1..=n {
        tables.factor_into(m, &mut buf);
        let (c, terms) = scaled_mass(m, n, &buf, tables);
        let gap = l - n as f64 * c;
        let positive = if gap.abs() > 1e-9 * l {
            gap > 0.0
        } else {
            let c = terms_exact(&terms);
            l_exact > c * BigRational::from_integer(n.into())
        };
        if positive {
            below += 1;
            for &(a, b) in &terms {
                c_sum.add_ratio(a, b);
            }
        }
    }
    Ok(BigRational::new(below.into(), n.into()) - c_sum.value() / l_exact)
}

/// Float version of [`tv_coupling_exact`] with a rounding bound.
pub fn tv_coupling_f64(n: u64, tables: &SieveTables) -> Result<(f64, f64)> {
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let l = harmonic_f64(n);
    let mut acc = Neumaier::new();
    let mut buf = Vec::new();
    for m in 1..=n {
        tables.factor_into(m, &mut buf);
        let (c, _) = scaled_mass(m, n, &buf, tables);
        let d = 1.0 / n as f64 - c / l;
        if d > 0.0 {
            acc.push(d);
        }
    }
    // each term is within a few ulps of 1/n, and near-ties contribute < ulp
    let err = 8.0 * f64::EPSILON * (1.0 + n as f64 * f64::EPSILON);
    Ok((acc.total(), err))
}

/// d_TV(J_n, H_n Q(n/H_n)) against 61·loglog n/log n.
pub fn tv_coupling_vs_uniform(n: u64, tables: &SieveTables) -> Result<BoundCheck> {
    check_range("tv-coupling", n, tables)?;
    let rhs = TV_COEFF * loglog_over_log(n);
    if n <= EXACT_LIMIT {
        let v = tv_coupling_exact(n, tables)?;
        Ok(BoundCheck::new("tv-coupling", n, rational_to_f64(&v), 1e-15, rhs).exact(&v))
    } else {
        let (v, err) = tv_coupling_f64(n, tables)?;
        Ok(BoundCheck::new("tv-coupling", n, v, err, rhs))
    }
}

/// Number of primes q ≤ k dividing h, from the factorization of h.
fn small_prime_divisors(factors: &[(u64, u32)], k: u64) -> u64 {
    factors.iter().filter(|&&(q, _)| q <= k).count() as u64
}

/// L_n·P[Q(n/H_n) divides H_n] as a sum of (1 + #{q | h})/(h(π(⌊n/h⌋)+1)).
fn divides_terms(n: u64, tables: &SieveTables, mut visit: impl FnMut(u64, u64)) {
    let mut buf = Vec::new();
    for (lo, hi, k) in floor_blocks(n) {
        let c = pi(tables, k) + 1;
        for h in lo..=hi {
            tables.factor_into(h, &mut buf);
            visit(1 + small_prime_divisors(&buf, k), h * c);
        }
    }
}

pub fn prob_q_divides_h_exact(n: u64, tables: &SieveTables) -> Result<BigRational> {
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let mut acc = crate::scalar::LcmSum::default();
    divides_terms(n, tables, |a, b| acc.add_ratio(a, b));
    Ok(div_reduced(&acc.value(), &harmonic_exact(n)))
}

pub fn prob_q_divides_h_f64(n: u64, tables: &SieveTables) -> Result<f64> {
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let mut acc = Neumaier::new();
    divides_terms(n, tables, |a, b| acc.push(a as f64 / b as f64));
    Ok(acc.total() / harmonic_f64(n))
}

/// P[Q(n/H_n) divides H_n] (with 1 | h) against 6.4·loglog n/log n.
pub fn prob_q_divides_h(n: u64, tables: &SieveTables) -> Result<BoundCheck> {
    check_range("q-divides-h", n, tables)?;
    let rhs = DIVIDES_COEFF * loglog_over_log(n);
    if n <= EXACT_LIMIT {
        let v = prob_q_divides_h_exact(n, tables)?;
        Ok(BoundCheck::new("q-divides-h", n, rational_to_f64(&v), 1e-15, rhs).exact(&v))
    } else {
        let v = prob_q_divides_h_f64(n, tables)?;
        Ok(BoundCheck::new("q-divides-h", n, v, 1e-12 * v.max(1e-300), rhs))
    }
}

fn pair_law<P, F>(n: u64, tables: &SieveTables, value: F) -> Result<DiscreteLaw<P>>
where
    P: Scalar,
    F: Fn(&[(u64, u32)], u64) -> BigRational,
{
    if n < 2 {
        return invalid("coupling needs n >= 2");
    }
    tables.check_n(n)?;
    let mut sums: BTreeMap<BigRational, P::Sum> = BTreeMap::new();
    let mut buf = Vec::new();
    for (lo, hi, k) in floor_blocks(n) {
        let qs = tables.primes_upto(k);
        let c = qs.len() as u64 + 1;
        for h in lo..=hi {
            tables.factor_into(h, &mut buf);
            for &q in std::iter::once(&1).chain(qs) {
                sums.entry(value(&buf, q)).or_default().add_ratio(1, h * c);
            }
        }
    }
    let l_exact = if P::EXACT { harmonic_exact(n) } else { BigRational::one() };
    let l_n: P = harmonic_total(n);
    DiscreteLaw::from_atoms(sums.into_iter().map(|(v, s)| (v, over_harmonic(s.value(), &l_exact, &l_n))))
}

/// Law of ψ(H_n) + ψ(Q(n/H_n)), with ψ(1) = 0.
pub fn additive_shift_law<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<DiscreteLaw<P>> {
    pair_law(n, tables, |f, q| {
        let base = psi.eval_factored(f);
        if q == 1 {
            base
        } else {
            base + psi.prime_power(q, 1)
        }
    })
}

/// Law of ψ(H_n·Q(n/H_n)).
pub fn product_psi_law<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<DiscreteLaw<P>> {
    pair_law(n, tables, |f, q| {
        let base = psi.eval_factored(f);
        if q == 1 {
            return base;
        }
        match f.iter().find(|&&(p, _)| p == q) {
            Some(&(_, a)) => base - psi.prime_power(q, a) + psi.prime_power(q, a + 1),
            None => base + psi.prime_power(q, 1),
        }
    })
}

/// The O(n·π(n)) double loop over the joint law; test oracle for
/// [`prob_q_divides_h_exact`].
pub fn prob_q_divides_h_from_joint(law: &CouplingLaw<BigRational>) -> BigRational {
    law.joint
        .iter()
        .filter(|a| a.h % a.q == 0)
        .fold(BigRational::zero(), |acc, a| acc + &a.prob)
}

/// Uniform law on [1, n] over integer values.
pub fn uniform_integers<P: Scalar>(n: u64) -> Result<DiscreteLaw<P>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    DiscreteLaw::from_atoms((1..=n).map(|m| (BigRational::from_integer(m.into()), P::recip_u64(n))))
}

/// `true` when all probabilities in the coupling are exactly one in total.
pub fn is_normalized(law: &CouplingLaw<BigRational>) -> bool {
    law.joint_mass().is_one()
}
