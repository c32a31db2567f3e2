//! Independent geometric exponents conditioned on their prime-power
//! product staying below `n`, and the rejection sampler built on them.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng as _;
use rayon::prelude::*;

use crate::additive::AdditiveFunction;
use crate::error::{invalid, Error, Result};
use crate::laws::{self, DiscreteLaw};
use crate::primes::{harmonic_exact, harmonic_f64, SieveTables};
use crate::rng::{self, Rng};
use crate::scalar::{rational_to_f64, LcmSum, Scalar, SumAccumulator};

/// Sparse exponent vector `(p, c_p)` with `c_p ≥ 1`, primes ascending.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExponentVector {
    pub entries: Vec<(u64, u32)>,
}

impl ExponentVector {
    /// ∏ p^{c_p}, or `None` on `u64` overflow.
    pub fn value(&self) -> Option<u64> {
        self.entries
            .iter()
            .try_fold(1u64, |acc, &(p, c)| acc.checked_mul(p.checked_pow(c)?))
    }

    pub fn in_kn(&self, n: u64) -> bool {
        self.value().is_some_and(|v| v <= n)
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.entries
            .binary_search_by_key(&p, |&(q, _)| q)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }
}

/// K_n by factorizing each k ≤ n.
pub fn enumerate_kn(n: u64, tables: &SieveTables) -> Result<impl Iterator<Item = ExponentVector> + '_> {
    tables.check_n(n)?;
    Ok((1..=n).map(move |k| ExponentVector {
        entries: tables.factorize(k).expect("k within sieve range"),
    }))
}

/// Walks K_n directly from its definition: every exponent vector over the
/// primes ≤ n whose product stays ≤ n. `visit` receives the vector and its
/// product.
pub fn for_each_kn<F: FnMut(&[(u64, u32)], u64)>(n: u64, tables: &SieveTables, mut visit: F) -> Result<()> {
    tables.check_n(n)?;
    if n == 0 {
        return Ok(());
    }
    let primes = tables.primes_upto(n);
    let mut stack: Vec<(u64, u32)> = Vec::new();
    fn walk<F: FnMut(&[(u64, u32)], u64)>(
        primes: &[u64],
        from: usize,
        m: u64,
        n: u64,
        stack: &mut Vec<(u64, u32)>,
        visit: &mut F,
    ) {
        visit(stack, m);
        for (i, &p) in primes.iter().enumerate().skip(from) {
            if m > n / p {
                break;
            }
            let mut mp = m * p;
            let mut e = 1;
            loop {
                stack.push((p, e));
                walk(primes, i + 1, mp, n, stack, visit);
                stack.pop();
                if mp > n / p {
                    break;
                }
                mp *= p;
                e += 1;
            }
        }
    }
    walk(primes, 0, 1, n, &mut stack, &mut visit);
    Ok(())
}

/// ∏_{p ≤ n}(1 − 1/p), with the empty product for n < 2.
fn euler_exact(n: u64, tables: &SieveTables) -> Result<BigRational> {
    if n < 2 {
        return Ok(BigRational::one());
    }
    tables.euler_product_exact(n)
}

/// P[A_n] = L_n ∏_{p ≤ n}(1 − 1/p).
pub fn prob_an(n: u64, tables: &SieveTables) -> Result<BigRational> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    tables.check_n(n)?;
    Ok(harmonic_exact(n) * euler_exact(n, tables)?)
}

pub fn prob_an_f64(n: u64, tables: &SieveTables) -> Result<f64> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    tables.check_n(n)?;
    let e = if n < 2 { 1.0 } else { tables.euler_product::<f64>(n)? };
    Ok(harmonic_f64(n) * e)
}

/// P[A_n] as the sum over K_n of ∏_{p ≤ n} (1 − 1/p) p^{-c_p}.
pub fn prob_an_enumerated(n: u64, tables: &SieveTables) -> Result<BigRational> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let e = euler_exact(n, tables)?;
    let mut acc = LcmSum::default();
    for_each_kn(n, tables, |_, v| acc.add_ratio(1, v))?;
    Ok(e * acc.value())
}

/// Law of Σ_p ψ(p^{ξ_p}) given A_n.
pub fn conditioned_law<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<DiscreteLaw<P>> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let e = euler_exact(n, tables)?;
    let mut atoms: BTreeMap<BigRational, P::Sum> = BTreeMap::new();
    for_each_kn(n, tables, |vec, value| {
        let key = psi.eval_factored(vec);
        atoms.entry(key).or_default().add_ratio(1, value);
    })?;
    let pa = prob_an(n, tables)?;
    let scale = P::from_rational(&(e / pa));
    DiscreteLaw::from_atoms(atoms.into_iter().map(|(k, s)| (k, s.value() * scale.clone())))
}

pub type ThetaFn = Arc<dyn Fn(u64, u32) -> BigRational + Send + Sync>;
pub type NuFn = Arc<dyn Fn(u64) -> BigRational + Send + Sync>;
pub type RatioFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// ϑ given on prime powers, with per-prime normalizers ν_p and a declared
/// domination ϑ(p^{k+1}) ≤ r(p)·ϑ(p^k), r(p) < 1.
#[derive(Clone)]
pub struct MultiplicativeWeight {
    pub name: String,
    theta: ThetaFn,
    nu: NuFn,
    ratio: RatioFn,
    at_one: BigRational,
}

impl std::fmt::Debug for MultiplicativeWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiplicativeWeight({})", self.name)
    }
}

fn p_pow_neg(p: u64, k: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(p).pow(k))
}

impl MultiplicativeWeight {
    pub fn new(name: impl Into<String>, theta: ThetaFn, nu: NuFn, ratio: RatioFn) -> Self {
        MultiplicativeWeight {
            name: name.into(),
            theta,
            nu,
            ratio,
            at_one: BigRational::one(),
        }
    }

    /// ϑ ≡ 0. Not a probability weight; every law built from it is rejected.
    pub fn zero() -> Self {
        let mut w = Self::new(
            "zero",
            Arc::new(|_, _| BigRational::zero()),
            Arc::new(|_| BigRational::one()),
            Arc::new(|_| 0.0),
        );
        w.at_one = BigRational::zero();
        w
    }

    /// ϑ(m) = 1/m, ν_p = 1 − 1/p: recovers the harmonic law.
    pub fn harmonic() -> Self {
        Self::new(
            "1/k",
            Arc::new(|p, k| p_pow_neg(p, k)),
            Arc::new(|p| BigRational::new(BigInt::from(p - 1), BigInt::from(p))),
            Arc::new(|p| 1.0 / p as f64),
        )
    }

    /// ϑ(m) = 1/m², ν_p = 1 − 1/p².
    pub fn inverse_square() -> Self {
        Self::new(
            "1/k^2",
            Arc::new(|p, k| p_pow_neg(p, 2 * k)),
            Arc::new(|p| BigRational::new(BigInt::from(p * p - 1), BigInt::from(p * p))),
            Arc::new(|p| 1.0 / (p * p) as f64),
        )
    }

    /// ϑ(p^k) = (k+1) p^{-2k}, i.e. ϑ(m) = d(m)/m²; ν_p = (1 − 1/p²)².
    pub fn divisor_over_square() -> Self {
        Self::new(
            "d(k)/k^2",
            Arc::new(|p, k| p_pow_neg(p, 2 * k) * BigRational::from_integer(BigInt::from(k + 1))),
            Arc::new(|p| {
                let f = BigRational::new(BigInt::from(p * p - 1), BigInt::from(p * p));
                &f * &f
            }),
            Arc::new(|p| 2.0 / (p * p) as f64),
        )
    }

    pub fn theta(&self, p: u64, k: u32) -> BigRational {
        if k == 0 {
            BigRational::one()
        } else {
            (self.theta)(p, k)
        }
    }

    pub fn nu(&self, p: u64) -> BigRational {
        (self.nu)(p)
    }

    pub fn theta_factored(&self, factors: &[(u64, u32)]) -> BigRational {
        let mut w = self.at_one.clone();
        for &(p, e) in factors {
            w *= self.theta(p, e);
        }
        w
    }

    /// Checks the declared domination and normalization on primes ≤ n.
    pub fn validate(&self, primes: &[u64]) -> Result<()> {
        const TERMS: u32 = 32;
        for &p in primes {
            let r = (self.ratio)(p);
            if !(r >= 0.0 && r < 1.0) {
                return invalid(format!(
                    "weight {}: per-prime series at p = {p} is not geometrically dominated (ratio {r})",
                    self.name
                ));
            }
            let nu = self.nu(p);
            if !nu.is_positive() {
                return invalid(format!("weight {}: nu_{p} must be positive", self.name));
            }
            let nu_f = rational_to_f64(&nu);
            let mut partial = 0.0;
            let mut prev = 1.0;
            for k in 0..=TERMS {
                let t = self.theta(p, k);
                if t.is_negative() {
                    return invalid(format!("weight {}: theta({p}^{k}) is negative", self.name));
                }
                let tf = rational_to_f64(&t);
                if k > 0 && tf > r * prev * (1.0 + 1e-9) + 1e-300 {
                    return invalid(format!(
                        "weight {}: theta({p}^{k}) breaks the declared ratio bound {r}",
                        self.name
                    ));
                }
                partial += tf;
                prev = tf;
            }
            let tail = prev * r / (1.0 - r);
            let total = nu_f * partial;
            if total > 1.0 + 1e-9 || total + nu_f * tail < 1.0 - 1e-9 {
                return invalid(format!(
                    "weight {}: nu_{p} * sum_k theta({p}^k) = {total} is not 1",
                    self.name
                ));
            }
        }
        Ok(())
    }
}

/// Weighted conditioned law and P[A_n^ϑ] = L_n^ϑ ∏_{p ≤ n} ν_p.
pub fn conditioned_law_weighted<P: Scalar>(
    psi: &AdditiveFunction,
    n: u64,
    theta: &MultiplicativeWeight,
    tables: &SieveTables,
) -> Result<(DiscreteLaw<P>, BigRational)> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    tables.check_n(n)?;
    theta.validate(tables.primes_upto(n))?;
    let nu_prod = nu_product(n, theta, tables);
    let mut atoms: BTreeMap<BigRational, LcmSum> = BTreeMap::new();
    for_each_kn(n, tables, |vec, _| {
        // ∏_{p≤n} ν_p ϑ(p^{c_p}); the ν product is factored out below
        let w = theta.theta_factored(vec);
        atoms.entry(psi.eval_factored(vec)).or_default().add(&w);
    })?;
    let prob = laws::weighted_normalizer(n, theta, tables)? * &nu_prod;
    if prob.is_zero() {
        return invalid("weighted event has probability zero");
    }
    let scale = &nu_prod / &prob;
    let law = DiscreteLaw::from_atoms(
        atoms
            .into_iter()
            .map(|(k, s)| (k, P::from_rational(&(s.value() * &scale)))),
    )?;
    Ok((law, prob))
}

/// Σ over K_n of ∏_{p ≤ n} ν_p ϑ(p^{c_p}).
pub fn prob_an_weighted_enumerated(n: u64, theta: &MultiplicativeWeight, tables: &SieveTables) -> Result<BigRational> {
    let mut acc = LcmSum::default();
    for_each_kn(n, tables, |vec, _| acc.add(&theta.theta_factored(vec)))?;
    Ok(acc.value() * nu_product(n, theta, tables))
}

fn nu_product(n: u64, theta: &MultiplicativeWeight, tables: &SieveTables) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &p in tables.primes_upto(n) {
        let v = theta.nu(p);
        num *= v.numer();
        den *= v.denom();
    }
    BigRational::new(num, den)
}

/// One draw of ξ_p with P[ξ_p = k] = (1 − 1/p) p^{-k}, by inversion.
pub fn sample_geometric(p: u64, rng: &mut Rng) -> u32 {
    let u: f64 = rng.gen();
    let q = 1.0 / p as f64;
    if u >= q {
        return 0;
    }
    // u in (0, 1/p): ξ = ⌊log u / log(1/p)⌋ ≥ 1
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    (u.ln() / -(p as f64).ln()).floor() as u32
}

pub const MAX_TRIALS: u64 = 10_000;

/// Rejection draw of H_n: returns `(value, trials)`.
pub fn sample_hn(n: u64, primes: &[u64], rng: &mut Rng) -> Result<(u64, u64)> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let end = primes.partition_point(|&p| p <= n);
    let primes = &primes[..end];
    if n >= 2 && primes.is_empty() {
        return invalid("prime list does not cover n");
    }
    'trial: for trial in 1..=MAX_TRIALS {
        let mut prod: u64 = 1;
        for &p in primes {
            let xi = sample_geometric(p, rng);
            for _ in 0..xi {
                prod = match prod.checked_mul(p) {
                    Some(v) if v <= n => v,
                    _ => continue 'trial,
                };
            }
        }
        return Ok((prod, trial));
    }
    Err(Error::StatisticalAnomaly(format!(
        "no acceptance in {MAX_TRIALS} trials for n = {n}"
    )))
}

/// `samples` draws of H_n from stream-split generators; identical output
/// for any rayon pool size.
pub fn sample_hn_batch(n: u64, samples: u64, seed: u64, tables: &SieveTables) -> Result<Vec<(u64, u64)>> {
    tables.check_n(n)?;
    let primes = tables.primes_upto(n);
    let parts: Vec<Result<Vec<(u64, u64)>>> = rng::chunks(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(stream, len)| {
            let mut r = rng::stream(seed, stream);
            (0..len).map(|_| sample_hn(n, primes, &mut r)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Empirical law of sampled integers (probabilities as counts / total).
pub fn empirical_law(values: impl IntoIterator<Item = u64>) -> Result<DiscreteLaw<f64>> {
    let mut counts: BTreeMap<BigRational, u64> = BTreeMap::new();
    let mut total = 0u64;
    for v in values {
        *counts.entry(BigRational::from_integer(BigInt::from(v))).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return invalid("no samples");
    }
    DiscreteLaw::from_atoms(counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)))
}
