//! Laws of ψ(J_n), ψ(H_n), ψ(H_n^ϑ) and the centering constants.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::additive::AdditiveFunction;
use crate::conditioned::MultiplicativeWeight;
use crate::error::{invalid, Error, Result};
use crate::primes::{harmonic_exact, harmonic_f64, SieveTables};
use crate::scalar::{rational_to_f64, LcmSum, Neumaier, Scalar, SumAccumulator};

/// Finitely supported law on exact rational values.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLaw<P> {
    atoms: BTreeMap<BigRational, P>,
}

impl<P: Scalar> DiscreteLaw<P> {
    /// Builds a law, dropping zero atoms and merging repeated keys.
    /// Fails on negative mass or a total away from one.
    pub fn from_atoms<I: IntoIterator<Item = (BigRational, P)>>(atoms: I) -> Result<Self> {
        let mut map: BTreeMap<BigRational, P> = BTreeMap::new();
        for (k, p) in atoms {
            if p.is_negative() {
                return invalid(format!("negative probability at {k}"));
            }
            if p.is_zero() {
                continue;
            }
            match map.entry(k) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(p);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let e = o.get_mut();
                    *e = e.clone() + p;
                }
            }
        }
        let law = DiscreteLaw { atoms: map };
        let dev = (law.total() - P::one()).abs();
        if dev > P::mass_tolerance() {
            return invalid(format!("total mass differs from one by {:?}", dev));
        }
        Ok(law)
    }

    pub fn point_mass(v: BigRational) -> Self {
        DiscreteLaw {
            atoms: BTreeMap::from([(v, P::one())]),
        }
    }

    pub fn atoms(&self) -> &BTreeMap<BigRational, P> {
        &self.atoms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BigRational, &P)> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn prob(&self, v: &BigRational) -> P {
        self.atoms.get(v).cloned().unwrap_or_else(P::zero)
    }

    pub fn total(&self) -> P {
        let mut acc = P::Sum::default();
        for p in self.atoms.values() {
            acc.add(p);
        }
        acc.value()
    }

    /// Converts probabilities to another backend.
    pub fn convert<Q: Scalar>(&self) -> DiscreteLaw<Q> {
        DiscreteLaw {
            atoms: self
                .atoms
                .iter()
                .map(|(k, p)| {
                    let q = if Q::EXACT && P::EXACT {
                        Q::parse_text(&p.to_text()).expect("exact round trip")
                    } else {
                        Q::from_f64(p.to_f64())
                    };
                    (k.clone(), q)
                })
                .collect(),
        }
    }

    /// Law of a·X + c.
    pub fn affine(&self, a: &BigRational, c: &BigRational) -> Self {
        if a.is_zero() {
            return Self::point_mass(c.clone());
        }
        DiscreteLaw {
            atoms: self.atoms.iter().map(|(k, p)| (k * a + c, p.clone())).collect(),
        }
    }

    pub fn mean_f64(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(k, p)| rational_to_f64(k) * p.to_f64())
            .collect::<Neumaier>()
            .total()
    }
}

/// E[X^r].
pub fn moments<P: Scalar>(law: &DiscreteLaw<P>, r: u32) -> P {
    let mut acc = P::Sum::default();
    for (k, p) in law.iter() {
        let v = P::from_rational(&num_traits::pow(k.clone(), r as usize));
        acc.add(&(v * p.clone()));
    }
    acc.value()
}

/// How integers in [1, n] are weighted.
#[derive(Clone, Copy, Debug)]
pub enum Family<'a> {
    Uniform,
    Harmonic,
    Weighted(&'a MultiplicativeWeight),
}

const BLOCK: u64 = 1 << 16;

enum BlockHist<P: Scalar> {
    Counts(BTreeMap<BigRational, u64>),
    Sums(BTreeMap<BigRational, P::Sum>),
}

/// Unnormalized weighted histogram of `key(k)` over k ≤ n. Blocks are
/// built in parallel and merged in ascending block order.
fn histogram<P, K>(n: u64, family: Family<'_>, tables: &SieveTables, key: &K) -> Vec<BlockHist<P>>
where
    P: Scalar,
    K: Fn(u64, &[(u64, u32)]) -> BigRational + Sync,
{
    let blocks: Vec<u64> = (0..n.div_ceil(BLOCK)).collect();
    blocks
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK + 1;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut buf = Vec::with_capacity(16);
            match family {
                Family::Uniform => {
                    let mut h: BTreeMap<BigRational, u64> = BTreeMap::new();
                    for k in lo..=hi {
                        tables.factor_into(k, &mut buf);
                        *h.entry(key(k, &buf)).or_default() += 1;
                    }
                    BlockHist::Counts(h)
                }
                Family::Harmonic => {
                    let mut h: BTreeMap<BigRational, P::Sum> = BTreeMap::new();
                    for k in lo..=hi {
                        tables.factor_into(k, &mut buf);
                        h.entry(key(k, &buf)).or_default().add_ratio(1, k);
                    }
                    BlockHist::Sums(h)
                }
                Family::Weighted(theta) => {
                    let mut h: BTreeMap<BigRational, P::Sum> = BTreeMap::new();
                    for k in lo..=hi {
                        tables.factor_into(k, &mut buf);
                        let w = P::from_rational(&theta.theta_factored(&buf));
                        h.entry(key(k, &buf)).or_default().add(&w);
                    }
                    BlockHist::Sums(h)
                }
            }
        })
        .collect()
}

/// Law of `key(K)` for K drawn from `family` on [1, n]. `key` gets k and
/// its factorization.
pub fn law_of<P, K>(n: u64, family: Family<'_>, tables: &SieveTables, key: K) -> Result<DiscreteLaw<P>>
where
    P: Scalar,
    K: Fn(u64, &[(u64, u32)]) -> BigRational + Sync,
{
    if n == 0 {
        return invalid("n must be at least 1");
    }
    tables.check_n(n)?;
    let blocks = histogram::<P, K>(n, family, tables, &key);
    match family {
        Family::Uniform => {
            let mut counts: BTreeMap<BigRational, u64> = BTreeMap::new();
            for b in blocks {
                if let BlockHist::Counts(h) = b {
                    for (k, c) in h {
                        *counts.entry(k).or_default() += c;
                    }
                }
            }
            DiscreteLaw::from_atoms(counts.into_iter().map(|(k, c)| (k, P::ratio_u64(c, n))))
        }
        Family::Harmonic | Family::Weighted(_) => {
            let mut sums: BTreeMap<BigRational, P::Sum> = BTreeMap::new();
            for b in blocks {
                if let BlockHist::Sums(h) = b {
                    for (k, s) in h {
                        sums.entry(k).or_default().merge(&s);
                    }
                }
            }
            let total: P = match family {
                Family::Harmonic => {
                    if P::EXACT {
                        P::from_rational(&harmonic_exact(n))
                    } else {
                        P::from_f64(harmonic_f64(n))
                    }
                }
                Family::Weighted(theta) => {
                    let t = weighted_total::<P>(n, theta, tables)?;
                    if !t.is_positive() {
                        return invalid(format!("weight {} vanishes on [1, {n}]", theta.name));
                    }
                    t
                }
                Family::Uniform => unreachable!(),
            };
            DiscreteLaw::from_atoms(sums.into_iter().map(|(k, s)| (k, s.value() / total.clone())))
        }
    }
}

pub fn law_uniform<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<DiscreteLaw<P>> {
    law_of(n, Family::Uniform, tables, |_, f| psi.eval_factored(f))
}

pub fn law_harmonic<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<DiscreteLaw<P>> {
    law_of(n, Family::Harmonic, tables, |_, f| psi.eval_factored(f))
}

pub fn law_weighted<P: Scalar>(
    psi: &AdditiveFunction,
    n: u64,
    theta: &MultiplicativeWeight,
    tables: &SieveTables,
) -> Result<DiscreteLaw<P>> {
    validate_nonnegative(n, theta, tables)?;
    law_of(n, Family::Weighted(theta), tables, |_, f| psi.eval_factored(f))
}

fn validate_nonnegative(n: u64, theta: &MultiplicativeWeight, tables: &SieveTables) -> Result<()> {
    tables.check_n(n)?;
    for &p in tables.primes_upto(n) {
        let mut pk = p;
        let mut k = 1;
        while pk <= n {
            if theta.theta(p, k).is_negative() {
                return invalid(format!("theta({p}^{k}) is negative"));
            }
            pk = match pk.checked_mul(p) {
                Some(v) => v,
                None => break,
            };
            k += 1;
        }
    }
    Ok(())
}

fn weighted_total<P: Scalar>(n: u64, theta: &MultiplicativeWeight, tables: &SieveTables) -> Result<P> {
    let mut acc = P::Sum::default();
    let mut buf = Vec::new();
    for k in 1..=n {
        tables.factor_into(k, &mut buf);
        acc.add(&P::from_rational(&theta.theta_factored(&buf)));
    }
    Ok(acc.value())
}

/// L_n^ϑ = Σ_{k ≤ n} ϑ(k), exactly.
pub fn weighted_normalizer(n: u64, theta: &MultiplicativeWeight, tables: &SieveTables) -> Result<BigRational> {
    tables.check_n(n)?;
    let mut acc = LcmSum::default();
    let mut buf = Vec::new();
    for k in 1..=n {
        tables.factor_into(k, &mut buf);
        acc.add(&theta.theta_factored(&buf));
    }
    Ok(acc.value())
}

/// μ_n = λ_n = Σ_{p≤n} ψ(p)/(p−1), σ_n² = Σ_{p≤n} ψ(p)² p/(p−1)², and L_n.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizers<P> {
    pub n: u64,
    pub mu: P,
    pub sigma2: P,
    pub lambda: P,
    pub l_n: P,
}

impl<P: Scalar> Normalizers<P> {
    pub fn sigma(&self) -> f64 {
        self.sigma2.to_f64().max(0.0).sqrt()
    }

    /// σ_n, failing when it vanishes.
    pub fn sigma_checked(&self) -> Result<f64> {
        if self.sigma2.is_zero() || self.sigma2.to_f64() <= 0.0 {
            return Err(Error::DegenerateNormalizer { n: self.n });
        }
        Ok(self.sigma())
    }
}

pub fn normalizers<P: Scalar>(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<Normalizers<P>> {
    if n < 2 {
        return invalid("normalizers need n >= 2");
    }
    tables.check_n(n)?;
    let mut mu = P::Sum::default();
    let mut s2 = P::Sum::default();
    for &p in tables.primes_upto(n) {
        let v = P::from_rational(&psi.prime_power(p, 1));
        mu.add(&(v.clone() * P::recip_u64(p - 1)));
        s2.add(&(v.clone() * v * P::ratio_u64(p, (p - 1) * (p - 1))));
    }
    let mu = mu.value();
    let l_n = if P::EXACT {
        P::from_rational(&harmonic_exact(n))
    } else {
        P::from_f64(harmonic_f64(n))
    };
    Ok(Normalizers {
        n,
        lambda: mu.clone(),
        mu,
        sigma2: s2.value(),
        l_n,
    })
}

/// P[H_n > n/θ], exactly.
pub fn harmonic_tail(n: u64, theta: u64) -> Result<BigRational> {
    if n == 0 || theta == 0 {
        return invalid("n and theta must be positive");
    }
    // k > n/θ  ⇔  k ≥ ⌊n/θ⌋ + 1
    let mut acc = LcmSum::default();
    for k in n / theta + 1..=n {
        acc.add_ratio(1, k);
    }
    Ok(acc.value() / harmonic_exact(n))
}

// ---------------------------------------------------------------- io

pub fn write_csv<P: Scalar, W: Write>(law: &DiscreteLaw<P>, mut w: W) -> Result<()> {
    if P::EXACT {
        writeln!(w, "value_num,value_den,prob_num,prob_den")?;
        for (k, p) in law.iter() {
            let t = p.to_text();
            let (pn, pd) = t.split_once('/').unwrap_or((&t, "1"));
            writeln!(w, "{},{},{},{}", k.numer(), k.denom(), pn, pd)?;
        }
    } else {
        writeln!(w, "value_num,value_den,prob")?;
        for (k, p) in law.iter() {
            writeln!(w, "{},{},{}", k.numer(), k.denom(), p.to_text())?;
        }
    }
    Ok(())
}

pub fn read_csv<P: Scalar, R: BufRead>(r: R) -> Result<DiscreteLaw<P>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
    let exact = match header.trim() {
        "value_num,value_den,prob_num,prob_den" => true,
        "value_num,value_den,prob" => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unknown header '{other}'"),
            })
        }
    };
    let mut atoms = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse { line: line_no, msg: msg.into() };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != if exact { 4 } else { 3 } {
            return Err(err("wrong field count"));
        }
        let vn: BigInt = f[0].parse().map_err(|_| err("bad value numerator"))?;
        let vd: BigInt = f[1].parse().map_err(|_| err("bad value denominator"))?;
        if vd.is_zero() {
            return Err(err("zero value denominator"));
        }
        let p = if exact {
            P::parse_text(&format!("{}/{}", f[2], f[3]))
        } else if P::EXACT {
            f[2].parse::<f64>().ok().map(P::from_f64)
        } else {
            P::parse_text(f[2])
        }
        .ok_or_else(|| err("bad probability"))?;
        atoms.push((BigRational::new(vn, vd), p));
    }
    DiscreteLaw::from_atoms(atoms)
}

pub fn to_json<P: Scalar>(law: &DiscreteLaw<P>) -> Value {
    let atoms: Vec<Value> = law
        .iter()
        .map(|(k, p)| {
            let mut m = serde_json::Map::new();
            m.insert("prob".into(), Value::String(p.to_text()));
            m.insert("value".into(), Value::String(format!("{}/{}", k.numer(), k.denom())));
            Value::Object(m)
        })
        .collect();
    json!({
        "atoms": atoms,
        "backing": if P::EXACT { "exact" } else { "float" },
    })
}

pub fn from_json<P: Scalar>(v: &Value) -> Result<DiscreteLaw<P>> {
    let bad = |msg: &str| Error::Parse { line: 0, msg: msg.into() };
    let atoms = v.get("atoms").and_then(Value::as_array).ok_or_else(|| bad("missing atoms"))?;
    let mut out = Vec::with_capacity(atoms.len());
    for a in atoms {
        let value = a.get("value").and_then(Value::as_str).ok_or_else(|| bad("missing value"))?;
        let prob = a.get("prob").and_then(Value::as_str).ok_or_else(|| bad("missing prob"))?;
        let k = BigRational::parse_text(value).ok_or_else(|| bad("bad value"))?;
        let p = P::parse_text(prob)
            .or_else(|| prob.parse::<f64>().ok().map(P::from_f64))
            .ok_or_else(|| bad("bad prob"))?;
        out.push((k, p));
    }
    DiscreteLaw::from_atoms(out)
}

/// True if every atom is a non-negative integer.
pub fn is_n0_valued<P: Scalar>(law: &DiscreteLaw<P>) -> bool {
    law.atoms.keys().all(|k| k.is_integer() && !k.is_negative())
}
