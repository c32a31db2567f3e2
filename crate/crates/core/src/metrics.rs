//! Kolmogorov, Wasserstein-1 and total-variation distances between
//! discrete laws and against Gaussian and Poisson targets.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gaussian::{phi_cdf, phi_integral, phi_quantile, phi_sf, sqrt_2_over_pi, PHI_ABS_ERR, SQRT_2PI_OVER_4};
use crate::laws::{is_n0_valued, DiscreteLaw};
use crate::scalar::{rational_to_f64, Neumaier, Scalar, SumAccumulator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactRational,
    ClosedForm,
    Quadrature,
    SeriesWithTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    pub error_bound: f64,
    pub method: Method,
}

impl DistanceResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

/// Standardized atoms `(t_i, P[X < x_i], P[X ≤ x_i], P[X ≥ x_i], P[X > x_i])`
/// with prefix sums taken from each end separately.
struct Sweep {
    t: Vec<f64>,
    below: Vec<f64>,
    upto: Vec<f64>,
    from: Vec<f64>,
    above: Vec<f64>,
    sum_err: f64,
}

fn sweep<P: Scalar>(law: &DiscreteLaw<P>, mean: f64, sd: f64) -> Sweep {
    let probs: Vec<&P> = law.atoms().values().collect();
    let m = probs.len();
    let t = law.atoms().keys().map(|k| (rational_to_f64(k) - mean) / sd).collect();
    let prefix = |order: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut acc = P::Sum::default();
        let mut out = vec![0.0; m + 1];
        for (j, i) in order.enumerate() {
            acc.add(probs[i]);
            out[j + 1] = acc.value().to_f64();
        }
        out
    };
    let left = prefix(&mut (0..m));
    let right = prefix(&mut (0..m).rev());
    let below = (0..m).map(|i| left[i]).collect();
    let upto = (0..m).map(|i| left[i + 1]).collect();
    let from = (0..m).map(|i| right[m - i]).collect();
    let above = (0..m).map(|i| right[m - i - 1]).collect();
    let sum_err = if P::EXACT { 1.2e-16 } else { 4.0 * f64::EPSILON + m as f64 * 1e-17 };
    Sweep {
        t,
        below,
        upto,
        from,
        above,
        sum_err,
    }
}

fn check_sd(sd: f64) -> Result<()> {
    if !(sd > 0.0) || !sd.is_finite() {
        return invalid(format!("standard deviation must be positive, got {sd}"));
    }
    Ok(())
}

/// sup_z |P[X ≤ z] − Φ((z − mean)/sd)|, checked on both sides of every atom.
pub fn dk_vs_gaussian<P: Scalar>(law: &DiscreteLaw<P>, mean: f64, sd: f64) -> Result<DistanceResult> {
    check_sd(sd)?;
    let s = sweep(law, mean, sd);
    let mut best = 0.0f64;
    for i in 0..s.t.len() {
        let t = s.t[i];
        // on the lower tail compare CDFs, on the upper tail survival functions
        let (d_left, d_right) = if t <= 0.0 {
            let f = phi_cdf(t);
            ((s.below[i] - f).abs(), (s.upto[i] - f).abs())
        } else {
            let g = phi_sf(t);
            ((s.from[i] - g).abs(), (s.above[i] - g).abs())
        };
        best = best.max(d_left).max(d_right);
    }
    Ok(DistanceResult {
        value: best.min(1.0),
        error_bound: PHI_ABS_ERR + s.sum_err,
        method: if P::EXACT { Method::ExactRational } else { Method::ClosedForm },
    })
}

/// ∫_a^b |c − Φ(t)| dt for constant c, split at Φ^{-1}(c); `c_up` is 1 − c.
fn piece(a: f64, b: f64, c: f64, c_up: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let cross = if c <= 0.5 { phi_quantile(c) } else { -phi_quantile(c_up) };
    let lower = |x: f64, y: f64| -> f64 {
        // ∫_x^y (c − Φ) on the left half-line, or via survival functions
        if y <= 0.0 {
            c * (y - x) - (phi_integral(y) - phi_integral(x))
        } else if x >= 0.0 {
            (phi_integral(-x) - phi_integral(-y)) - c_up * (y - x)
        } else {
            c * (0.0 - x) - (phi_integral(0.0) - phi_integral(x)) + (phi_integral(0.0) - phi_integral(-y))
                - c_up * y
        }
    };
    if cross <= a || cross >= b {
        lower(a, b).abs()
    } else {
        lower(a, cross).abs() + lower(cross, b).abs()
    }
}

/// ∫ |F_X(x) − Φ((x − mean)/sd)| dx, piecewise in closed form.
pub fn w1_vs_gaussian<P: Scalar>(law: &DiscreteLaw<P>, mean: f64, sd: f64) -> Result<DistanceResult> {
    check_sd(sd)?;
    let s = sweep(law, mean, sd);
    let m = s.t.len();
    if m == 0 {
        return invalid("empty law");
    }
    let mut acc = Neumaier::new();
    acc.push(phi_integral(s.t[0]));
    for i in 0..m - 1 {
        acc.push(piece(s.t[i], s.t[i + 1], s.upto[i], s.above[i]));
    }
    acc.push(phi_integral(-s.t[m - 1]));
    let span = s.t[m - 1] - s.t[0];
    let err = (PHI_ABS_ERR + s.sum_err) * (span + 2.0) + 4e-16 * m as f64;
    Ok(DistanceResult {
        value: sd * acc.total(),
        error_bound: sd * err,
        method: Method::ClosedForm,
    })
}

/// Poisson(λ) pmf for k = 0..=kmax.
pub fn poisson_pmf(lambda: f64, kmax: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax as usize + 1);
    if lambda > 700.0 {
        let ll = lambda.ln();
        for k in 0..=kmax {
            out.push((-lambda + k as f64 * ll - libm::lgamma(k as f64 + 1.0)).exp());
        }
    } else {
        let mut p = (-lambda).exp();
        for k in 0..=kmax {
            out.push(p);
            p *= lambda / (k + 1) as f64;
        }
    }
    out
}

/// P[M > k] for M ~ Poisson(λ), summed upward, with a bound on what is left.
pub fn poisson_upper_tail(lambda: f64, k: u64) -> (f64, f64) {
    let mut term = {
        let pmf = poisson_pmf(lambda, k + 1);
        pmf[k as usize + 1]
    };
    let mut j = k + 1;
    let mut acc = Neumaier::new();
    loop {
        acc.push(term);
        let r = lambda / (j + 1) as f64;
        let next = term * r;
        if r < 0.5 && next <= 1e-20 * acc.total().max(1e-300) {
            // geometric bound on the remainder
            return (acc.total(), next / (1.0 - r));
        }
        if next == 0.0 && r < 1.0 {
            return (acc.total(), 0.0);
        }
        term = next;
        j += 1;
    }
}

/// ½ Σ_k |P[X = k] − e^{-λ}λ^k/k!| for ℕ₀-valued X.
pub fn tv_vs_poisson<P: Scalar>(law: &DiscreteLaw<P>, lambda: f64) -> Result<DistanceResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !is_n0_valued(law) {
        return invalid("law has an atom outside the non-negative integers");
    }
    let kmax = law
        .atoms()
        .keys()
        .next_back()
        .map(|k| rational_to_f64(k) as u64)
        .unwrap_or(0);
    let pmf = poisson_pmf(lambda, kmax);
    let mut acc = Neumaier::new();
    let mut k_iter = law.iter().peekable();
    for (k, &pk) in pmf.iter().enumerate() {
        let q = match k_iter.peek() {
            Some((v, p)) if rational_to_f64(v) as usize == k => {
                let q = p.to_f64();
                k_iter.next();
                q
            }
            _ => 0.0,
        };
        acc.push((q - pk).abs());
    }
    let (tail, tail_err) = poisson_upper_tail(lambda, kmax);
    acc.push(tail);
    Ok(DistanceResult {
        value: (0.5 * acc.total()).min(1.0),
        error_bound: 0.5 * tail_err + (kmax as f64 + 2.0) * 2.0 * f64::EPSILON,
        method: Method::SeriesWithTail,
    })
}

/// sup_k |P[X ≤ k] − P[M ≤ k]| for ℕ₀-valued X and M ~ Poisson(λ). Past
/// the last atom of X the gap is the Poisson tail, largest at that atom.
pub fn dk_vs_poisson<P: Scalar>(law: &DiscreteLaw<P>, lambda: f64) -> Result<DistanceResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !is_n0_valued(law) {
        return invalid("law has an atom outside the non-negative integers");
    }
    let kmax = law
        .atoms()
        .keys()
        .next_back()
        .map(|k| rational_to_f64(k) as u64)
        .unwrap_or(0);
    let pmf = poisson_pmf(lambda, kmax);
    let (mut fx, mut fm) = (P::Sum::default(), Neumaier::new());
    let mut k_iter = law.iter().peekable();
    let mut best = 0.0f64;
    for (k, &pk) in pmf.iter().enumerate() {
        if let Some((v, p)) = k_iter.peek() {
            if rational_to_f64(v) as usize == k {
                fx.add(p);
                k_iter.next();
            }
        }
        fm.push(pk);
        best = best.max((fx.value().to_f64() - fm.total()).abs());
    }
    Ok(DistanceResult {
        value: best.min(1.0),
        error_bound: (kmax as f64 + 2.0) * 2.0 * f64::EPSILON,
        method: Method::SeriesWithTail,
    })
}

fn merged_keys<'a, P: Scalar>(a: &'a DiscreteLaw<P>, b: &'a DiscreteLaw<P>) -> Vec<&'a BigRational> {
    let set: BTreeSet<&BigRational> = a.atoms().keys().chain(b.atoms().keys()).collect();
    set.into_iter().collect()
}

/// Exact ½ Σ |a(x) − b(x)|.
pub fn tv_discrete_exact<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> P {
    let mut acc = P::Sum::default();
    for k in merged_keys(a, b) {
        acc.add(&(a.prob(k) - b.prob(k)).abs());
    }
    acc.value() / (P::one() + P::one())
}

/// Exact sup_x |F_a(x) − F_b(x)|.
pub fn dk_discrete_exact<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> P {
    let mut fa = P::Sum::default();
    let mut fb = P::Sum::default();
    let mut best = P::zero();
    for k in merged_keys(a, b) {
        fa.add(&a.prob(k));
        fb.add(&b.prob(k));
        let d = (fa.value() - fb.value()).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Exact ∫ |F_a − F_b|.
pub fn w1_discrete_exact<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> P {
    let keys = merged_keys(a, b);
    let mut fa = P::Sum::default();
    let mut fb = P::Sum::default();
    let mut acc = P::Sum::default();
    for w in keys.windows(2) {
        fa.add(&a.prob(w[0]));
        fb.add(&b.prob(w[0]));
        let gap = P::from_rational(&(w[1] - w[0]));
        acc.add(&((fa.value() - fb.value()).abs() * gap));
    }
    acc.value()
}

fn wrap<P: Scalar>(v: P, atoms: usize) -> DistanceResult {
    DistanceResult {
        value: v.to_f64(),
        error_bound: if P::EXACT { 1.2e-16 * v.to_f64().abs() } else { (atoms as f64 + 4.0) * f64::EPSILON },
        method: if P::EXACT { Method::ExactRational } else { Method::ClosedForm },
    }
}

pub fn tv_discrete<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> DistanceResult {
    wrap(tv_discrete_exact(a, b), a.len() + b.len())
}

pub fn dk_discrete<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> DistanceResult {
    wrap(dk_discrete_exact(a, b), a.len() + b.len())
}

pub fn w1_discrete<P: Scalar>(a: &DiscreteLaw<P>, b: &DiscreteLaw<P>) -> DistanceResult {
    let v = w1_discrete_exact(a, b);
    let mut r = wrap(v, a.len() + b.len());
    if !P::EXACT {
        let span = match (a.atoms().keys().next(), b.atoms().keys().next_back()) {
            (Some(x), Some(y)) => rational_to_f64(&(y - x)).abs(),
            _ => 0.0,
        };
        r.error_bound *= span.max(1.0);
    }
    r
}

/// Right-hand sides bounding d_K(W, N) and d_1(W, N) for W ~ N(μ, σ²).
pub fn gaussian_pair_bounds(mu: f64, sigma: f64) -> Result<(f64, f64)> {
    check_sd(sigma)?;
    let v = (sigma * sigma - 1.0).abs();
    Ok((v + SQRT_2PI_OVER_4 * mu.abs(), sqrt_2_over_pi() * v + 2.0 * mu.abs()))
}

/// d_K(N(μ, σ²), N(0, 1)), from the stationary points of the CDF gap.
pub fn gaussian_pair_dk(mu: f64, sigma: f64) -> Result<f64> {
    check_sd(sigma)?;
    let gap = |x: f64| (phi_cdf((x - mu) / sigma) - phi_cdf(x)).abs();
    // stationary points solve (σ² − 1)x² + 2μx − μ² − 2σ² ln σ = 0
    let a = sigma * sigma - 1.0;
    let b = 2.0 * mu;
    let c = -mu * mu - 2.0 * sigma * sigma * sigma.ln();
    let mut cands = Vec::new();
    if a.abs() < 1e-14 {
        if b != 0.0 {
            cands.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let r = disc.sqrt();
            cands.push((-b + r) / (2.0 * a));
            cands.push((-b - r) / (2.0 * a));
        }
    }
    Ok(cands.into_iter().map(gap).fold(0.0, f64::max))
}

/// d_1(N(μ, σ²), N(0, 1)): the CDFs cross at most once, so the two signed
/// areas have closed forms in Ψ.
pub fn gaussian_pair_w1(mu: f64, sigma: f64) -> Result<f64> {
    check_sd(sigma)?;
    if (sigma - 1.0).abs() < 1e-15 {
        return Ok(mu.abs());
    }
    let c = mu / (1.0 - sigma);
    let left = sigma * phi_integral((c - mu) / sigma) - phi_integral(c);
    let right = sigma * phi_integral((mu - c) / sigma) - phi_integral(-c);
    Ok(left.abs() + right.abs())
}

/// Standardizes by (center, scale): the law of (X − center)/scale.
pub fn standardize<P: Scalar>(law: &DiscreteLaw<P>, center: &BigRational, scale: &BigRational) -> Result<DiscreteLaw<P>> {
    if !scale.is_positive() || scale.is_zero() {
        return invalid("scale must be positive");
    }
    let inv = BigRational::from_integer(1.into()) / scale;
    Ok(law.affine(&inv, &(-(center * &inv))))
}
