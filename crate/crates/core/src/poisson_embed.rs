//! Poisson embedding of the geometric exponents.
//!
//! η is a Poisson process on 𝕏 = {(p, k) : p prime, k ≥ 1} with intensity
//! λ(p, k) = 1/(k p^k); ξ_p = Σ_k k·η(p, k) is then Geometric with
//! P[ξ_p = j] = (1 − 1/p) p^{−j}. Per prime the process is compound
//! Poisson: N_p ~ Poisson(Λ_p) points with marks P[k] ∝ 1/(k p^k), which
//! is how it is sampled.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::additive::{AdditiveFunction, C1Policy};
use crate::error::{invalid, Error, Result};
use crate::laws::normalizers;
use crate::primes::SieveTables;
use crate::rng::{self, Rng};
use crate::scalar::{rational_to_f64, Neumaier};

pub const DEFAULT_K_MAX: u32 = 64;

/// Batches used for Monte Carlo standard errors.
pub const BATCHES: u64 = 100;

pub type Point = (u64, u32);

/// λ(p, k) = 1/(k p^k).
pub fn intensity(p: u64, k: u32) -> f64 {
    1.0 / (k as f64 * (p as f64).powi(k as i32))
}

/// One realisation of η restricted to primes ≤ n and k ≤ k_max.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointProcessSample {
    pub n: u64,
    pub k_max: u32,
    pub seed: u64,
    pub counts: BTreeMap<Point, u64>,
}

impl PointProcessSample {
    pub fn from_points(n: u64, k_max: u32, seed: u64, points: &[Point]) -> Self {
        let mut counts = BTreeMap::new();
        for &x in points {
            *counts.entry(x).or_default() += 1;
        }
        PointProcessSample { n, k_max, seed, counts }
    }

    /// Points with multiplicity.
    pub fn points(&self) -> Vec<Point> {
        self.counts
            .iter()
            .flat_map(|(&x, &c)| std::iter::repeat(x).take(c as usize))
            .collect()
    }
}

/// Sampler for η on the truncated space.
#[derive(Clone, Debug)]
pub struct EtaSampler {
    n: u64,
    k_max: u32,
    primes: Vec<u64>,
    /// Λ_p over the retained marks.
    mass: Vec<f64>,
    /// e^{−Λ_p}.
    empty: Vec<f64>,
    /// Cumulative mark distribution over k = 1, 2, …
    marks: Vec<Vec<f64>>,
    /// Intensity left out by the truncation, summed over primes ≤ n.
    dropped: f64,
}

impl EtaSampler {
    pub fn new(n: u64, k_max: u32, tables: &SieveTables) -> Result<Self> {
        if n < 2 || k_max < 1 {
            return invalid("need n >= 2 and k_max >= 1");
        }
        tables.check_n(n)?;
        let primes = tables.primes_upto(n).to_vec();
        let mut mass = Vec::with_capacity(primes.len());
        let mut marks = Vec::with_capacity(primes.len());
        let mut dropped = Neumaier::new();
        for &p in &primes {
            let mut w = Vec::new();
            let mut total = 0.0;
            let mut last = 0;
            for k in 1..=k_max {
                let l = intensity(p, k);
                // marks below 1e-18 of the total never change a double draw
                if k > 1 && l < 1e-18 * total {
                    break;
                }
                total += l;
                w.push(total);
                last = k;
            }
            for v in &mut w {
                *v /= total;
            }
            *w.last_mut().expect("k = 1 is always kept") = 1.0;
            // Σ_{k>last} 1/(k p^k) ≤ p^{−last−1}/((last+1)(1 − 1/p))
            let q = 1.0 / p as f64;
            dropped.push(q.powi(last as i32 + 1) / ((last + 1) as f64 * (1.0 - q)));
            mass.push(total);
            marks.push(w);
        }
        let empty = mass.iter().map(|m| (-m).exp()).collect();
        Ok(EtaSampler {
            n,
            k_max,
            primes,
            mass,
            empty,
            marks,
            dropped: dropped.total(),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Upper bound on the intensity outside the sampled space (primes ≤ n).
    pub fn truncation_mass(&self) -> f64 {
        self.dropped
    }

    /// Appends one realisation to `out` (cleared first), ordered by prime.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut Vec<Point>) {
        out.clear();
        for (i, &p) in self.primes.iter().enumerate() {
            let u: f64 = rng.gen();
            if u < self.empty[i] {
                continue;
            }
            let m = self.mass[i];
            let mut count = 1u32;
            let mut pk = self.empty[i] * m;
            let mut cdf = self.empty[i] + pk;
            while u >= cdf && count < 200 {
                count += 1;
                pk *= m / count as f64;
                cdf += pk;
            }
            let w = &self.marks[i];
            for _ in 0..count {
                let v: f64 = rng.gen();
                let idx = w.iter().position(|&c| v < c).unwrap_or(w.len() - 1);
                out.push((p, idx as u32 + 1));
            }
        }
    }

    /// `f` applied to `samples` realisations, in sample order. Chunk `i` uses
    /// stream `i` of `seed`, so results do not depend on the thread count.
    pub fn map_batch<T, F>(&self, samples: u64, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[Point]) -> T + Sync,
    {
        let chunks: Vec<(u64, u64)> = rng::chunks(samples).collect();
        let parts: Vec<Vec<T>> = chunks
            .into_par_iter()
            .map(|(idx, len)| {
                let mut r = rng::stream(seed, idx);
                let mut buf = Vec::new();
                (0..len)
                    .map(|_| {
                        self.sample_into(&mut r, &mut buf);
                        f(&buf)
                    })
                    .collect()
            })
            .collect();
        parts.into_iter().flatten().collect()
    }
}

/// A single realisation of η, reproducible per seed.
pub fn sample_eta(n: u64, k_max: u32, seed: u64, tables: &SieveTables) -> Result<PointProcessSample> {
    let s = EtaSampler::new(n, k_max, tables)?;
    let mut r = rng::stream(seed, 0);
    let mut buf = Vec::new();
    s.sample_into(&mut r, &mut buf);
    Ok(PointProcessSample::from_points(n, k_max, seed, &buf))
}

/// ξ_p = Σ_k k·η(p, k); primes with ξ_p = 0 are omitted.
pub fn xi_from_points(points: &[Point]) -> BTreeMap<u64, u32> {
    let mut xi = BTreeMap::new();
    for &(p, k) in points {
        *xi.entry(p).or_default() += k;
    }
    xi
}

pub fn xi_from_eta(sample: &PointProcessSample) -> BTreeMap<u64, u32> {
    let mut xi = BTreeMap::new();
    for (&(p, k), &c) in &sample.counts {
        if c > 0 {
            *xi.entry(p).or_default() += k * c as u32;
        }
    }
    xi
}

/// Y = Σ ψ(p)ξ_p and R = Σ (ψ(p^{ξ_p}) − ψ(p)ξ_p)·1(ξ_p ≥ 2).
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub y: BigRational,
    pub r: BigRational,
    pub xi: BTreeMap<u64, u32>,
}

/// Σ_p ψ(p^{ξ_p}).
pub fn psi_of_xi(psi: &AdditiveFunction, xi: &BTreeMap<u64, u32>) -> BigRational {
    xi.iter()
        .filter(|(_, &e)| e > 0)
        .fold(BigRational::zero(), |acc, (&p, &e)| acc + psi.prime_power(p, e))
}

pub fn decompose(psi: &AdditiveFunction, xi: &BTreeMap<u64, u32>) -> Decomposition {
    let mut y = BigRational::zero();
    let mut r = BigRational::zero();
    for (&p, &e) in xi {
        if e == 0 {
            continue;
        }
        let lin = psi.prime_power(p, 1) * BigRational::from_integer(e.into());
        // 1(ξ = 1) = ξ − ξ·1(ξ ≥ 2): the linear part takes every ξ_p
        if e >= 2 {
            r += psi.prime_power(p, e) - &lin;
        }
        y += lin;
    }
    Decomposition { y, r, xi: xi.clone() }
}

/// A truncated series with a bound on what was left out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn c1_for(psi: &AdditiveFunction, primes: &[u64]) -> f64 {
    match psi.c1_policy() {
        C1Policy::Declared(c) => *c,
        C1Policy::ScanAndAssert => primes.iter().map(|&p| psi.prime_power_f64(p, 1).abs()).fold(0.0, f64::max),
    }
}

/// Σ_{k>j} (αk + β)(1 − q) q^k.
fn linear_geometric_tail(alpha: f64, beta: f64, q: f64, j: u32) -> f64 {
    let j = j as f64;
    let qj1 = q.powf(j + 1.0);
    (1.0 - q) * (alpha * qj1 * ((j + 1.0) - j * q) / ((1.0 - q) * (1.0 - q)) + beta * qj1 / (1.0 - q))
}

/// Per-prime tails are cut once below this, so the total stays far under 1e-12.
const PRIME_TAIL_CUT: f64 = 1e-20;

fn check_growth(psi: &AdditiveFunction, p: u64, k: u32, v: f64, a: f64, b: f64) -> Result<()> {
    if v.abs() > (a * k as f64 + b) * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::HypothesisViolation {
            p,
            k,
            detail: format!("|{}(p^k)| = {} exceeds the growth bound {a}*k + {b}", psi.name(), v.abs()),
        });
    }
    Ok(())
}

/// E|R_n| = Σ_{p≤n} Σ_{k≥2} |ψ(p^k) − kψ(p)| (1 − 1/p) p^{−k}.
pub fn expected_abs_r(psi: &AdditiveFunction, n: u64, tables: &SieveTables, k_cutoff: u32) -> Result<SeriesValue> {
    if n < 2 || k_cutoff < 2 {
        return invalid("need n >= 2 and k_cutoff >= 2");
    }
    tables.check_n(n)?;
    let primes = tables.primes_upto(n);
    let c1 = c1_for(psi, primes);
    let (a, b) = psi.growth_bound(c1);
    let mut acc = Neumaier::new();
    let mut tail = Neumaier::new();
    for &p in primes {
        let q = 1.0 / p as f64;
        let lin = psi.prime_power_f64(p, 1);
        let mut w = (1.0 - q) * q * q;
        let mut last = 1;
        for k in 2..=k_cutoff {
            let v = psi.prime_power_f64(p, k);
            check_growth(psi, p, k, v, a, b)?;
            acc.push((v - k as f64 * lin).abs() * w);
            w *= q;
            last = k;
            if linear_geometric_tail(a + lin.abs(), b, q, k) < PRIME_TAIL_CUT {
                break;
            }
        }
        tail.push(linear_geometric_tail(a + lin.abs(), b, q, last));
    }
    Ok(SeriesValue {
        value: acc.total(),
        tail_bound: tail.total(),
    })
}

/// E[Σ_p |ψ(p)| ξ_p 1(ξ_p ≥ 2)] = Σ_p |ψ(p)| p^{−2}(2 + 1/(p − 1)), closed form.
pub fn reduction_linear(psi: &AdditiveFunction, n: u64, tables: &SieveTables) -> Result<f64> {
    tables.check_n(n)?;
    let mut acc = Neumaier::new();
    for &p in tables.primes_upto(n) {
        let pf = p as f64;
        acc.push(psi.prime_power_f64(p, 1).abs() * (2.0 + 1.0 / (pf - 1.0)) / (pf * pf));
    }
    Ok(acc.total())
}

/// E[Σ_p |ψ(p^{ξ_p})| 1(ξ_p ≥ 2)] = Σ_p E|ψ(p^{ξ_p + 2})| / p².
pub fn reduction_power(psi: &AdditiveFunction, n: u64, tables: &SieveTables, k_cutoff: u32) -> Result<SeriesValue> {
    if k_cutoff < 2 {
        return invalid("k_cutoff must be at least 2");
    }
    tables.check_n(n)?;
    let primes = tables.primes_upto(n);
    let (a, b) = psi.growth_bound(c1_for(psi, primes));
    let mut acc = Neumaier::new();
    let mut tail = Neumaier::new();
    for &p in primes {
        let q = 1.0 / p as f64;
        let inv2 = q * q;
        let mut w = 1.0 - q;
        let mut last = 0;
        for j in 0..=k_cutoff - 2 {
            let v = psi.prime_power_f64(p, j + 2);
            check_growth(psi, p, j + 2, v, a, b)?;
            acc.push(v.abs() * w * inv2);
            w *= q;
            last = j;
            if linear_geometric_tail(a, 2.0 * a + b, q, j) * inv2 < PRIME_TAIL_CUT {
                break;
            }
        }
        // |ψ(p^{j+2})| ≤ a·j + (2a + b)
        tail.push(linear_geometric_tail(a, 2.0 * a + b, q, last) * inv2);
    }
    Ok(SeriesValue {
        value: acc.total(),
        tail_bound: tail.total(),
    })
}

/// Closed forms of Σ_{k≥1} k^r p^{−k} for r = 1, 2, 3.
pub fn geometric_moment_closed(p: u64) -> [f64; 3] {
    let pf = p as f64;
    let q = 1.0 / pf;
    let s = 1.0 - q;
    [
        q / (s * s),
        q * (1.0 + q) / (s * s * s),
        q * q * q * (1.0 + 4.0 * pf + pf * pf) / (s * s * s * s),
    ]
}

/// The same sums by direct summation until the terms drop below `tol`.
pub fn geometric_moment_summed(p: u64, tol: f64) -> [f64; 3] {
    let q = 1.0 / p as f64;
    let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
    let mut w = q;
    for k in 1..10_000u32 {
        let kf = k as f64;
        let t = [kf * w, kf * kf * w, kf * kf * kf * w];
        for (a, v) in acc.iter_mut().zip(t) {
            a.push(v);
        }
        if t[2] < tol * 1e-3 {
            break;
        }
        w *= q;
    }
    [acc[0].total(), acc[1].total(), acc[2].total()]
}

/// Stated caps on p·Σ k^r p^{−k}; see [`geometric_caps_hold`].
pub const GEOMETRIC_CAPS: [f64; 3] = [2.0, 12.0, 53.0];

/// Whether p·Σ k^r p^{−k} ≤ cap_r for r = 1, 2, 3.
pub fn geometric_caps_hold(p: u64) -> [bool; 3] {
    let c = geometric_moment_closed(p);
    [0, 1, 2].map(|r| c[r] * p as f64 <= GEOMETRIC_CAPS[r])
}

/// A kernel ρ on the truncated space, with its finite support.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    support: Vec<Point>,
    weight: Arc<dyn Fn(u64, u32) -> f64 + Send + Sync>,
    notes: Vec<String>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("support", &self.support.len())
            .finish()
    }
}

impl Kernel {
    /// `weight` must vanish outside `support`.
    pub fn new(name: impl Into<String>, support: Vec<Point>, weight: Arc<dyn Fn(u64, u32) -> f64 + Send + Sync>) -> Self {
        Kernel {
            name: name.into(),
            support,
            weight,
            notes: Vec::new(),
        }
    }

    pub fn indicator(p: u64, k: u32) -> Self {
        Kernel::new(
            format!("1{{({p},{k})}}"),
            vec![(p, k)],
            Arc::new(move |a, b| if (a, b) == (p, k) { 1.0 } else { 0.0 }),
        )
    }

    /// ρ_n(p, k) = k ψ(p)/σ_n on p ≤ n, k ≤ k_max. Flags σ_n < 10⁻³.
    pub fn rho_n(psi: &AdditiveFunction, n: u64, k_max: u32, tables: &SieveTables) -> Result<Self> {
        let sigma = normalizers::<f64>(psi, n, tables)?.sigma_checked()?;
        let primes = tables.primes_upto(n);
        let values: BTreeMap<u64, f64> = primes.iter().map(|&p| (p, psi.prime_power_f64(p, 1))).collect();
        let support = primes.iter().flat_map(|&p| (1..=k_max).map(move |k| (p, k))).collect();
        let mut kern = Kernel::new(
            format!("rho_{n}[{}]", psi.name()),
            support,
            Arc::new(move |p, k| match values.get(&p) {
                Some(v) if k >= 1 && k <= k_max => k as f64 * v / sigma,
                _ => 0.0,
            }),
        );
        if sigma < 1e-3 {
            kern.notes
                .push(format!("sigma_n = {sigma:e} < 1e-3: the kernel is ill-conditioned and variances blow up"));
        }
        Ok(kern)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weight(&self, p: u64, k: u32) -> f64 {
        (self.weight)(p, k)
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// λ(ρ) = Σ ρ(x)λ(x).
    pub fn lambda_integral(&self) -> f64 {
        let mut acc = Neumaier::new();
        for &(p, k) in &self.support {
            acc.push(self.weight(p, k) * intensity(p, k));
        }
        acc.total()
    }

    /// η(ρ) for one realisation.
    pub fn eta_integral(&self, points: &[Point]) -> f64 {
        points.iter().map(|&(p, k)| self.weight(p, k)).sum()
    }
}

/// A functional G(η) of a realisation given as a point list.
pub trait PoissonFunctional: Sync {
    fn eval(&self, points: &[Point]) -> f64;

    /// ∫ ρ(x)(G(η + δ_x) − G(η)) λ(dx) on one realisation.
    fn add_one_integral(&self, points: &[Point], kernel: &Kernel) -> f64 {
        let base = self.eval(points);
        let mut buf = points.to_vec();
        let mut acc = Neumaier::new();
        for &(p, k) in kernel.support() {
            buf.push((p, k));
            acc.push(kernel.weight(p, k) * intensity(p, k) * (self.eval(&buf) - base));
            buf.pop();
        }
        acc.total()
    }
}

/// G ≡ c.
pub struct ConstantFunctional(pub f64);

impl PoissonFunctional for ConstantFunctional {
    fn eval(&self, _: &[Point]) -> f64 {
        self.0
    }

    fn add_one_integral(&self, _: &[Point], _: &Kernel) -> f64 {
        0.0
    }
}

/// G = η(ρ').
pub struct LinearFunctional {
    kernel: Kernel,
    /// (name of ρ, ∫ρρ' dλ) from the last kernel seen.
    cross: std::sync::OnceLock<(String, f64)>,
}

impl LinearFunctional {
    pub fn new(kernel: Kernel) -> Self {
        LinearFunctional {
            kernel,
            cross: std::sync::OnceLock::new(),
        }
    }

    fn cross_integral(&self, rho: &Kernel) -> f64 {
        let mut acc = Neumaier::new();
        for &(p, k) in rho.support() {
            acc.push(rho.weight(p, k) * self.kernel.weight(p, k) * intensity(p, k));
        }
        acc.total()
    }
}

impl PoissonFunctional for LinearFunctional {
    fn eval(&self, points: &[Point]) -> f64 {
        self.kernel.eta_integral(points)
    }

    /// D_x G = ρ'(x) whatever the realisation.
    fn add_one_integral(&self, _: &[Point], kernel: &Kernel) -> f64 {
        let (name, v) = self.cross.get_or_init(|| (kernel.name().to_string(), self.cross_integral(kernel)));
        if name == kernel.name() {
            *v
        } else {
            self.cross_integral(kernel)
        }
    }
}

/// G = 1(Π p^{ξ_p} ≤ n).
pub struct ConstraintEvent {
    n: u64,
    kernel_name: String,
    /// Per prime: Σ_{j ≥ k} ρ(p, j)λ(p, j), indexed by k − 1.
    suffix: Vec<(u64, Vec<f64>)>,
}

impl ConstraintEvent {
    /// Precomputes the add-one-point integral for `kernel`, which must be the
    /// kernel later passed to the Mecke check.
    pub fn new(n: u64, kernel: &Kernel) -> Self {
        let mut per: BTreeMap<u64, BTreeMap<u32, f64>> = BTreeMap::new();
        for &(p, k) in kernel.support() {
            *per.entry(p).or_default().entry(k).or_default() += kernel.weight(p, k) * intensity(p, k);
        }
        let suffix = per
            .into_iter()
            .map(|(p, ks)| {
                let kmax = *ks.keys().last().unwrap_or(&0);
                let mut s = vec![0.0; kmax as usize + 1];
                for k in (1..=kmax).rev() {
                    s[k as usize - 1] = s[k as usize] + ks.get(&k).copied().unwrap_or(0.0);
                }
                (p, s)
            })
            .collect();
        ConstraintEvent {
            n,
            kernel_name: kernel.name().to_string(),
            suffix,
        }
    }

    /// Π p^{ξ_p}, or `None` once it exceeds n.
    fn value(&self, points: &[Point]) -> Option<u64> {
        let mut v: u64 = 1;
        for &(p, k) in points {
            for _ in 0..k {
                v = v.checked_mul(p).filter(|&x| x <= self.n)?;
            }
        }
        Some(v)
    }
}

impl PoissonFunctional for ConstraintEvent {
    fn eval(&self, points: &[Point]) -> f64 {
        if self.value(points).is_some() {
            1.0
        } else {
            0.0
        }
    }

    /// Adding a point only grows the product: D_x G = −1(v ≤ n < v·p^k).
    fn add_one_integral(&self, points: &[Point], kernel: &Kernel) -> f64 {
        debug_assert_eq!(kernel.name(), self.kernel_name);
        let Some(v) = self.value(points) else {
            return 0.0;
        };
        let room = self.n / v;
        let mut acc = 0.0;
        for (p, s) in &self.suffix {
            // first k with p^k > n/v
            let mut k = 1usize;
            let mut pk = *p;
            while pk <= room {
                k += 1;
                pk = pk.saturating_mul(*p);
            }
            if k <= s.len() {
                acc -= s[k - 1];
            }
        }
        acc
    }
}

/// Both sides of E[η̃(ρ) G] = ∫ ρ E[D_x G] dλ with a 3·SE band on their
/// difference.
#[derive(Clone, Debug, Serialize)]
pub struct MeckeResult {
    pub lhs: f64,
    pub rhs: f64,
    pub ci_halfwidth: f64,
    pub samples: u64,
    pub max_abs_g: f64,
    pub warnings: Vec<String>,
}

impl MeckeResult {
    pub fn within(&self) -> bool {
        (self.lhs - self.rhs).abs() <= self.ci_halfwidth
    }
}

/// Monte Carlo check of the Mecke integration-by-parts identity with common
/// random numbers: each realisation contributes η̃(ρ)G(η) to the left side
/// and ∫ρ D_xG(η) dλ to the right side.
pub fn mecke_check(
    kernel: &Kernel,
    g: &dyn PoissonFunctional,
    sampler: &EtaSampler,
    samples: u64,
    seed: u64,
) -> Result<MeckeResult> {
    if samples < BATCHES {
        return invalid(format!("need at least {BATCHES} samples"));
    }
    for &(p, k) in kernel.support() {
        if p > sampler.n() || k > sampler.k_max() || !sampler.primes().binary_search(&p).is_ok() {
            return invalid(format!("kernel support point ({p}, {k}) lies outside the sampled space"));
        }
    }
    let lam = kernel.lambda_integral();
    let rows = sampler.map_batch(samples, seed, |pts| {
        let gv = g.eval(pts);
        let y = (kernel.eta_integral(pts) - lam) * gv;
        let z = g.add_one_integral(pts, kernel);
        (y, z, gv.abs())
    });
    let mut means = Vec::with_capacity(BATCHES as usize);
    let mut maxes = Vec::with_capacity(BATCHES as usize);
    let (mut ly, mut lz) = (Neumaier::new(), Neumaier::new());
    for b in 0..BATCHES {
        let lo = (b * samples / BATCHES) as usize;
        let hi = ((b + 1) * samples / BATCHES) as usize;
        let mut d = Neumaier::new();
        let mut mx = 0.0f64;
        for &(y, z, ga) in &rows[lo..hi] {
            ly.push(y);
            lz.push(z);
            d.push(y - z);
            mx = mx.max(ga);
        }
        means.push(d.total() / (hi - lo) as f64);
        maxes.push(mx);
    }
    let bm = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (BATCHES - 1) as f64;
    let se = (var / BATCHES as f64).sqrt();

    let mut warnings = kernel.notes().to_vec();
    let half = (BATCHES / 2) as usize;
    let early = maxes[..half].iter().cloned().fold(0.0, f64::max);
    let late = maxes[half..].iter().cloned().fold(0.0, f64::max);
    if late > 10.0 * early.max(f64::MIN_POSITIVE) {
        warnings.push(format!(
            "running max of |G| jumped from {early:e} to {late:e}: G looks unbounded on this truncation"
        ));
    }
    Ok(MeckeResult {
        lhs: ly.total() / samples as f64,
        rhs: lz.total() / samples as f64,
        ci_halfwidth: 3.0 * se,
        samples,
        max_abs_g: early.max(late),
        warnings,
    })
}

/// Exact ψ(p^ξ) total versus Y + R for one realisation (used in tests and
/// the CLI sampler output).
pub fn decomposition_holds(psi: &AdditiveFunction, xi: &BTreeMap<u64, u32>) -> bool {
    let d = decompose(psi, xi);
    d.y + d.r == psi_of_xi(psi, xi)
}

/// |x| as f64 for reporting exact values.
pub fn abs_f64(v: &BigRational) -> f64 {
    rational_to_f64(&v.abs())
}
