//! Solutions of the Gaussian Stein equation f'(x) − x f(x) = h(x) − E h(N)
//! and the Poisson one λ f(k+1) − k f(k) = h(k) − E h(M), with grid checks
//! of their regularity bounds.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{erfcx, phi_cdf, phi_pdf, phi_sf, sqrt_2_over_pi, SQRT_2PI_OVER_4};
use crate::metrics::poisson_pmf;
use crate::rng;
use crate::scalar::Neumaier;

/// Solution for h = 1(· ≤ z):
/// f(x) = √(2π) e^{x²/2} Φ(x)(1 − Φ(z)) for x ≤ z, and
/// f(x) = √(2π) e^{x²/2} Φ(z)(1 − Φ(x)) for x > z.
#[derive(Clone, Copy, Debug)]
pub struct GaussianIndicator {
    z: f64,
    cdf_z: f64,
    sf_z: f64,
}

/// √(2π) e^{x²/2} Φ(x) = √(π/2) erfcx(−x/√2), and the mirror for 1 − Φ.
fn mills_left(x: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(-x * FRAC_1_SQRT_2)
}

fn mills_right(x: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(x * FRAC_1_SQRT_2)
}

pub fn gaussian_indicator_solution(z: f64) -> GaussianIndicator {
    GaussianIndicator {
        z,
        cdf_z: phi_cdf(z),
        sf_z: phi_sf(z),
    }
}

impl GaussianIndicator {
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn f(&self, x: f64) -> f64 {
        let z = self.z;
        if x <= z {
            if x <= 0.0 {
                mills_left(x) * self.sf_z
            } else {
                // e^{x²/2}(1 − Φ(z)) = ½ e^{(x² − z²)/2} erfcx(z/√2) with z ≥ x > 0
                (2.0 * PI).sqrt() * phi_cdf(x) * 0.5 * (0.5 * (x - z) * (x + z)).exp() * erfcx(z * FRAC_1_SQRT_2)
            }
        } else if x >= 0.0 {
            mills_right(x) * self.cdf_z
        } else {
            // e^{x²/2}Φ(z) = ½ e^{(x² − z²)/2} erfcx(−z/√2) with z < x < 0
            (2.0 * PI).sqrt() * phi_sf(x) * 0.5 * (0.5 * (x - z) * (x + z)).exp() * erfcx(-z * FRAC_1_SQRT_2)
        }
    }

    /// h(x) − E h(N), the right-hand side.
    pub fn rhs(&self, x: f64) -> f64 {
        if x <= self.z {
            self.sf_z
        } else {
            -self.cdf_z
        }
    }

    /// f' = x f + h − Φ(z) (one-sided at x = z).
    pub fn f_prime(&self, x: f64) -> f64 {
        x * self.f(x) + self.rhs(x)
    }

    /// max over [a, b] of |f(b) − f(a) − ∫_a^b (x f(x) + h(x) − Φ(z)) dx|,
    /// splitting at z; an independent check of the closed form.
    pub fn integrated_residual(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        if a < self.z && self.z < b {
            cuts.push(self.z);
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let side = self.rhs(mid);
            let q = quadrature::integrate(|x| x * self.f(x) + side, w[0], w[1], 1e-14);
            total += q.integral;
        }
        (self.f(b) - self.f(a) - total).abs()
    }
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A test function with Lipschitz constant at most one.
#[derive(Clone)]
pub struct LipschitzTest {
    pub name: String,
    pub h: RealFn,
    /// Needed only for f''.
    pub h_prime: Option<RealFn>,
    pub lipschitz: f64,
}

impl std::fmt::Debug for LipschitzTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LipschitzTest({})", self.name)
    }
}

impl LipschitzTest {
    pub fn identity() -> Self {
        LipschitzTest {
            name: "x".into(),
            h: Arc::new(|x| x),
            h_prime: Some(Arc::new(|_| 1.0)),
            lipschitz: 1.0,
        }
    }

    /// √(x² + ε²), a smoothed |x|.
    pub fn smooth_abs(eps: f64) -> Self {
        LipschitzTest {
            name: format!("sqrt(x^2+{eps}^2)"),
            h: Arc::new(move |x| x.hypot(eps)),
            h_prime: Some(Arc::new(move |x| x / x.hypot(eps))),
            lipschitz: 1.0,
        }
    }

    pub fn sin() -> Self {
        LipschitzTest {
            name: "sin".into(),
            h: Arc::new(f64::sin),
            h_prime: Some(Arc::new(f64::cos)),
            lipschitz: 1.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LipschitzTest {
            name: format!("const {c}"),
            h: Arc::new(move |_| c),
            h_prime: Some(Arc::new(|_| 0.0)),
            lipschitz: 0.0,
        }
    }
}

/// Target accuracy for each quadrature behind f_h.
pub const LIPSCHITZ_TOL: f64 = 1e-12;

/// Beyond this the Gaussian weight is below e^{−98}.
const U_MAX: f64 = 14.0;

/// f_h(x) = −∫_0^∞ g(x+u) e^{−xu−u²/2} du for x ≥ 0 and
/// f_h(x) = ∫_0^∞ g(x−u) e^{xu−u²/2} du for x < 0, with g = h − E h(N).
/// Both forms integrate a decaying weight, so neither overflows.
#[derive(Clone, Debug)]
pub struct GaussianLipschitz {
    test: LipschitzTest,
    mean: f64,
}

fn integrate_checked(f: impl Fn(f64) -> f64, a: f64, b: f64, what: &str) -> Result<f64> {
    let q = quadrature::integrate(f, a, b, LIPSCHITZ_TOL);
    if !q.integral.is_finite() || q.error_estimate > 1e3 * LIPSCHITZ_TOL {
        return Err(Error::Numeric(format!(
            "{what}: quadrature on [{a}, {b}] did not converge (estimate {:e})",
            q.error_estimate
        )));
    }
    Ok(q.integral)
}

/// E h(N), split at 0 and truncated at ±40.
fn gaussian_mean(h: &RealFn) -> Result<f64> {
    let mut acc = 0.0;
    for (a, b) in [(-40.0, -8.0), (-8.0, 0.0), (0.0, 8.0), (8.0, 40.0)] {
        acc += integrate_checked(|x| h(x) * phi_pdf(x), a, b, "E h(N)")?;
    }
    Ok(acc)
}

pub fn gaussian_lipschitz_solution(test: LipschitzTest) -> Result<GaussianLipschitz> {
    if !(test.lipschitz <= 1.0) {
        return invalid(format!("Lipschitz constant {} exceeds 1", test.lipschitz));
    }
    let mean = gaussian_mean(&test.h)?;
    Ok(GaussianLipschitz { test, mean })
}

impl GaussianLipschitz {
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.test.h)(x) - self.mean
    }

    pub fn f(&self, x: f64) -> Result<f64> {
        let s = x.abs();
        // the weight decays like e^{−|x|u}; put a break where it is ~e^{−30}
        let knee = (30.0 / s.max(1e-9)).min(U_MAX);
        let pieces = [(0.0, knee), (knee, U_MAX)];
        let mut acc = 0.0;
        for (a, b) in pieces {
            if b <= a {
                continue;
            }
            acc += if x >= 0.0 {
                -integrate_checked(|u| self.g(x + u) * (-x * u - 0.5 * u * u).exp(), a, b, "f_h")?
            } else {
                integrate_checked(|u| self.g(x - u) * (x * u - 0.5 * u * u).exp(), a, b, "f_h")?
            };
        }
        Ok(acc)
    }

    pub fn f_prime(&self, x: f64) -> Result<f64> {
        Ok(x * self.f(x)? + self.g(x))
    }

    /// f'' = f + x f' + h'; `None` without h'.
    pub fn f_second(&self, x: f64) -> Result<Option<f64>> {
        let Some(hp) = &self.test.h_prime else {
            return Ok(None);
        };
        let f = self.f(x)?;
        let fp = x * f + self.g(x);
        Ok(Some(f + x * fp + hp(x)))
    }

    /// |f(b) − f(a) − ∫_a^b (x f(x) + g(x)) dx|.
    pub fn integrated_residual(&self, a: f64, b: f64) -> Result<f64> {
        let err = std::cell::Cell::new(None);
        let q = quadrature::integrate(
            |x| match self.f(x) {
                Ok(v) => x * v + self.g(x),
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            },
            a,
            b,
            1e-12,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok((self.f(b)? - self.f(a)? - q.integral).abs())
    }
}

/// B ⊂ ℕ₀ given by its finitely many members or finitely many non-members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PoissonSet {
    Finite(BTreeSet<u64>),
    CoFinite(BTreeSet<u64>),
}

impl PoissonSet {
    pub fn contains(&self, k: u64) -> bool {
        match self {
            PoissonSet::Finite(s) => s.contains(&k),
            PoissonSet::CoFinite(s) => !s.contains(&k),
        }
    }

    pub fn complement(&self) -> PoissonSet {
        match self {
            PoissonSet::Finite(s) => PoissonSet::CoFinite(s.clone()),
            PoissonSet::CoFinite(s) => PoissonSet::Finite(s.clone()),
        }
    }
}

/// Tabulated f_B(0..=k_max + 1) with f(0) = 0.
#[derive(Clone, Debug, Serialize)]
pub struct PoissonSolution {
    pub lambda: f64,
    pub set: PoissonSet,
    /// P[M ∈ B].
    pub prob_b: f64,
    pub values: Vec<f64>,
}

/// Tabulation range k ≤ 10λ + 100.
pub fn poisson_range(lambda: f64) -> u64 {
    (10.0 * lambda).ceil() as u64 + 100
}

/// f(k+1) = [F_B(k) T(k) − F(k) T_B(k)] / (λ P[M = k]), where F, T are the
/// Poisson CDF and upper tail and the B-subscript restricts to B. The ratio
/// is formed without dividing by the pmf: below λ through
/// a(k) = F(k)/P[M = k] = 1 + (k/λ) a(k−1), above λ through
/// t(k) = T(k)/P[M = k] = (λ/(k+1))(1 + t(k+1)), run downward.
pub fn poisson_solution(lambda: f64, set: &PoissonSet) -> Result<PoissonSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if let PoissonSet::CoFinite(_) = set {
        // h_B − P_B = −(h_{B^c} − P_{B^c})
        let mut s = poisson_solution(lambda, &set.complement())?;
        for v in &mut s.values {
            *v = -*v;
        }
        s.prob_b = 1.0 - s.prob_b;
        s.set = set.clone();
        return Ok(s);
    }
    let kmax = poisson_range(lambda);
    // t is started with zero far enough out that λ/(k+1) ≤ 1/10 damps it away
    let top = kmax + 80;
    let pmf = poisson_pmf(lambda, top);
    let in_b = |k: u64| set.contains(k);

    // forward sums F(k), F_B(k)
    let mut f_all = Vec::with_capacity(kmax as usize + 1);
    let mut f_b = Vec::with_capacity(kmax as usize + 1);
    let (mut s, mut sb) = (Neumaier::new(), Neumaier::new());
    for k in 0..=kmax {
        s.push(pmf[k as usize]);
        if in_b(k) {
            sb.push(pmf[k as usize]);
        }
        f_all.push(s.total());
        f_b.push(sb.total());
    }
    let prob_b = match set {
        PoissonSet::Finite(b) => {
            let mut acc = Neumaier::new();
            for &k in b {
                acc.push(if k <= top { pmf[k as usize] } else { 0.0 });
            }
            acc.total()
        }
        PoissonSet::CoFinite(_) => unreachable!(),
    };

    // backward tails T(k), T_B(k) as sums, and ratios t, t_B
    let n = kmax as usize + 1;
    let mut tail = vec![0.0; n];
    let mut tail_b = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut t_b = vec![0.0; n];
    {
        let (mut acc, mut acc_b) = (Neumaier::new(), Neumaier::new());
        let (mut r, mut r_b) = (0.0f64, 0.0f64);
        for k in (0..top).rev() {
            let j = k + 1;
            acc.push(pmf[j as usize]);
            let hb = if in_b(j) { 1.0 } else { 0.0 };
            if hb > 0.0 {
                acc_b.push(pmf[j as usize]);
            }
            let ratio = lambda / j as f64;
            r = ratio * (1.0 + r);
            r_b = ratio * (hb + r_b);
            if k <= kmax {
                tail[k as usize] = acc.total();
                tail_b[k as usize] = acc_b.total();
                t[k as usize] = r;
                t_b[k as usize] = r_b;
            }
        }
    }

    let mut values = vec![0.0; n + 1];
    let (mut a, mut a_b) = (0.0f64, 0.0f64);
    for k in 0..=kmax {
        let hb = if in_b(k) { 1.0 } else { 0.0 };
        let ku = k as usize;
        values[ku + 1] = if (k as f64) < lambda {
            a = 1.0 + (k as f64 / lambda) * a;
            a_b = hb + (k as f64 / lambda) * a_b;
            (a_b * tail[ku] - a * tail_b[ku]) / lambda
        } else {
            (f_b[ku] * t[ku] - f_all[ku] * t_b[ku]) / lambda
        };
    }
    Ok(PoissonSolution {
        lambda,
        set: set.clone(),
        prob_b,
        values,
    })
}

impl PoissonSolution {
    pub fn f(&self, k: u64) -> Option<f64> {
        self.values.get(k as usize).copied()
    }

    /// max_{k ≤ 10λ+100} |λ f(k+1) − k f(k) − (1_B(k) − P[M ∈ B])|.
    pub fn max_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.values.len() - 1 {
            let h = if self.set.contains(k as u64) { 1.0 } else { 0.0 };
            let r = self.lambda * self.values[k + 1] - k as f64 * self.values[k] - (h - self.prob_b);
            worst = worst.max(r.abs());
        }
        worst
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_increment(&self) -> f64 {
        self.values.windows(2).fold(0.0, |m, w| m.max((w[1] - w[0]).abs()))
    }
}

/// 1 ∧ λ^{−1/2}.
pub fn poisson_sup_bound(lambda: f64) -> f64 {
    1.0f64.min(lambda.powf(-0.5))
}

/// (1 − e^{−λ})/λ.
pub fn poisson_increment_bound(lambda: f64) -> f64 {
    -(-lambda).exp_m1() / lambda
}

/// Observed worst value of one regularity quantity against its bound.
#[derive(Clone, Debug, Serialize)]
pub struct SteinCheck {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub points: u64,
    pub holds: bool,
}

impl SteinCheck {
    fn new(name: impl Into<String>, observed: f64, bound: f64, slack: f64, points: u64) -> Self {
        SteinCheck {
            name: name.into(),
            observed,
            bound,
            points,
            holds: observed <= bound + slack,
        }
    }
}

/// Slack allowed for evaluation error on sup-bounds.
pub const BOUND_SLACK: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Randomized grid checks of every regularity bound and residual, `points`
/// evaluations per family, reproducible from `seed`.
pub fn verify_stein(points: u64, seed: u64) -> Result<Vec<SteinCheck>> {
    let mut r = rng::stream(seed, 0);
    let mut out = Vec::new();

    // indicator solutions: (z, x) pairs, plus the monotonicity of x f_z(x)
    let (mut sup_f, mut sup_fp, mut sup_xf) = (0.0f64, 0.0f64, 0.0f64);
    let mut drop = 0.0f64;
    let mut diff_excess = f64::NEG_INFINITY;
    let zs = 100;
    let per_z = (points / zs).max(2);
    for _ in 0..zs {
        let z: f64 = r.gen_range(-6.0..6.0);
        let s = gaussian_indicator_solution(z);
        let mut xs: Vec<f64> = (0..per_z).map(|_| r.gen_range(-12.0..12.0)).collect();
        xs.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &x in &xs {
            let f = s.f(x);
            sup_f = sup_f.max(f.abs());
            sup_fp = sup_fp.max(s.f_prime(x).abs());
            sup_xf = sup_xf.max((x * f).abs());
            drop = drop.max(prev - x * f);
            prev = x * f;
            let (w, u, v): (f64, f64, f64) = (x, r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
            let lhs = ((w + u) * s.f(w + u) - (w + v) * s.f(w + v)).abs();
            diff_excess = diff_excess.max(lhs - (u.abs() + v.abs()) * (w.abs() + SQRT_2PI_OVER_4));
        }
    }
    let n = per_z * zs;
    out.push(SteinCheck::new("indicator sup|f|", sup_f, SQRT_2PI_OVER_4, BOUND_SLACK, n));
    out.push(SteinCheck::new("indicator sup|f'|", sup_fp, 1.0, BOUND_SLACK, n));
    out.push(SteinCheck::new("indicator sup|x f|", sup_xf, 1.0, BOUND_SLACK, n));
    out.push(SteinCheck::new("indicator x f non-decreasing (max drop)", drop, 0.0, BOUND_SLACK, n));
    out.push(SteinCheck::new("indicator difference bound (max excess)", diff_excess, 0.0, BOUND_SLACK, n));
    let mut res = 0.0f64;
    for _ in 0..20 {
        let s = gaussian_indicator_solution(r.gen_range(-4.0..4.0));
        let a: f64 = r.gen_range(-8.0..6.0);
        res = res.max(s.integrated_residual(a, a + r.gen_range(0.1..2.0)));
    }
    out.push(SteinCheck::new("indicator integrated residual", res, 1e-12, 0.0, 20));

    // Lipschitz solutions
    for test in [LipschitzTest::identity(), LipschitzTest::smooth_abs(0.25), LipschitzTest::sin()] {
        let name = test.name.clone();
        let sol = gaussian_lipschitz_solution(test)?;
        let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
        let per = points / 3;
        for _ in 0..per {
            let x: f64 = r.gen_range(-10.0..10.0);
            let f = sol.f(x)?;
            let fp = x * f + sol.g(x);
            s0 = s0.max(f.abs());
            s1 = s1.max(fp.abs());
            if let Some(fpp) = sol.f_second(x)? {
                s2 = s2.max(fpp.abs());
            }
        }
        out.push(SteinCheck::new(format!("lipschitz[{name}] sup|f|"), s0, 2.0, BOUND_SLACK, per));
        out.push(SteinCheck::new(format!("lipschitz[{name}] sup|f'|"), s1, sqrt_2_over_pi(), BOUND_SLACK, per));
        out.push(SteinCheck::new(format!("lipschitz[{name}] sup|f''|"), s2, 2.0, BOUND_SLACK, per));
        let mut res = 0.0f64;
        for _ in 0..5 {
            let a: f64 = r.gen_range(-5.0..4.0);
            res = res.max(sol.integrated_residual(a, a + 1.0)?);
        }
        out.push(SteinCheck::new(format!("lipschitz[{name}] integrated residual"), res, RESIDUAL_TOL, 0.0, 5));
    }

    // Poisson solutions over random sets
    let (mut w_sup, mut w_inc, mut w_res) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut count = 0;
    let mut evaluated = 0u64;
    while evaluated < points {
        let lambda: f64 = match count % 5 {
            0 => 0.5,
            1 => 1.0,
            2 => 5.0,
            3 => 20.0,
            _ => r.gen_range(0.05..60.0),
        };
        count += 1;
        let hi = (3.0 * lambda) as u64 + 10;
        let members: BTreeSet<u64> = (0..=hi).filter(|_| r.gen_bool(0.4)).collect();
        let set = if r.gen_bool(0.5) {
            PoissonSet::Finite(members)
        } else {
            PoissonSet::CoFinite(members)
        };
        let sol = poisson_solution(lambda, &set)?;
        w_sup = w_sup.max(sol.sup_abs() - poisson_sup_bound(lambda));
        w_inc = w_inc.max(sol.sup_increment() - poisson_increment_bound(lambda));
        w_res = w_res.max(sol.max_residual());
        evaluated += sol.values.len() as u64;
    }
    out.push(SteinCheck::new("poisson sup|f| − (1 ∧ λ^-1/2) (max)", w_sup, 0.0, BOUND_SLACK, evaluated));
    out.push(SteinCheck::new(
        "poisson sup|Δf| − (1 − e^-λ)/λ (max)",
        w_inc,
        0.0,
        BOUND_SLACK,
        evaluated,
    ));
    out.push(SteinCheck::new("poisson residual", w_res, RESIDUAL_TOL, 0.0, evaluated));
    Ok(out)
}
