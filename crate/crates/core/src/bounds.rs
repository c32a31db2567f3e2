//! Right-hand sides of the Gaussian and Poisson distance bounds with their
//! explicit constants, and reports that put them next to exact distances
//! and the supporting prime-number, moment, tail and coupling inequalities.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::additive::{AdditiveFunction, HypothesisConstants, DEFAULT_K_CUTOFF, DEFAULT_PRIME_CUTOFF};
use crate::coupling::{self, BoundCheck};
use crate::error::{Error, Result};
use crate::laws::{harmonic_tail, is_n0_valued, law_harmonic, law_uniform, moments, normalizers, DiscreteLaw};
use crate::metrics::{
    dk_vs_gaussian, dk_vs_poisson, gaussian_pair_bounds, gaussian_pair_dk, tv_vs_poisson, w1_vs_gaussian, DistanceResult,
    Method,
};
use crate::primes::{harmonic_f64, SieveTables, EULER_GAMMA, MERTENS_CONSTANT};
use crate::scalar::Neumaier;

/// Every numeric constant entering the bounds, in one place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    // uniform Gaussian: κ₁ = 65c₁ + 66c₂, κ₂ = 726c₁² + 116c₁c₂, κ₃, κ₄ = 106c₁ + 2c₂, κ₅
    pub kappa1_c1: f64,
    pub kappa1_c2: f64,
    pub kappa2_c1c1: f64,
    pub kappa2_c1c2: f64,
    pub kappa3: f64,
    pub kappa4_c1: f64,
    pub kappa4_c2: f64,
    pub kappa5: f64,
    // harmonic Gaussian: γ₁ = 32c₁ + 33c₂, γ₂ = 363c₁² + 58c₁c₂, γ₃ = 105c₁ + 2c₂
    pub gamma1_c1: f64,
    pub gamma1_c2: f64,
    pub gamma2_c1c1: f64,
    pub gamma2_c1c2: f64,
    pub gamma3_c1: f64,
    pub gamma3_c2: f64,
    // harmonic Poisson: γ̃₁ = 17c₁ + 2c₂, γ̃₂ = 2.4c₁² + 8.2c₁c₂ + 4c₁
    pub gt1_c1: f64,
    pub gt1_c2: f64,
    pub gt2_c1c1: f64,
    pub gt2_c1c2: f64,
    pub gt2_c1: f64,
    // uniform Poisson: κ̃₁ = 51c₁ + 6c₂ + 1, κ̃₂ = 7.2c₁² + 24.6c₁c₂ + 12c₁ + 2.4(c₁ ∨ 1)
    pub kt1_c1: f64,
    pub kt1_c2: f64,
    pub kt1_one: f64,
    pub kt2_c1c1: f64,
    pub kt2_c1c2: f64,
    pub kt2_c1: f64,
    pub kt2_c1_or_1: f64,
    // ψ(p) ≡ 1: (18 + 2c₂)/√λ for J_n, 10/√λ for H_n, both + (6.4 + 8.2c₂)/λ
    pub unit_uniform_sqrt: f64,
    pub unit_uniform_sqrt_c2: f64,
    pub unit_inv: f64,
    pub unit_inv_c2: f64,
    pub unit_harmonic_sqrt: f64,
    // Σ|ψ(p) − 1|/p penalty coefficients (times c₁/λ)
    pub penalty_harmonic: f64,
    pub penalty_uniform: f64,
    /// σ² ≥ 3(c₁² + c₂²) for the Gaussian bounds.
    pub variance_floor: f64,
    /// Every bound assumes n at least this.
    pub min_n: u64,
    // ω with loglog normalization: 118.9/√L + 823.1/L + κ₃L/log n ≤ 599/√L
    pub chain_sqrt: f64,
    pub chain_inv: f64,
    pub chain_consolidated: f64,
    // moment lemmas for ω, Ω under J_n and H_n
    pub mean_omega: f64,
    pub mean_big_omega: f64,
    pub second_omega: f64,
    pub l2_c2: f64,
    // prime-number inequalities
    pub pi_upper: f64,
    pub pi_lower_from: u64,
    pub pi_second_order: f64,
    pub pi_second_order_from: u64,
    pub mertens_log_gap: f64,
    pub mertens_recip_tail: f64,
}

pub const CONSTANTS: Constants = Constants {
    kappa1_c1: 65.0,
    kappa1_c2: 66.0,
    kappa2_c1c1: 726.0,
    kappa2_c1c2: 116.0,
    kappa3: 67.4,
    kappa4_c1: 106.0,
    kappa4_c2: 2.0,
    kappa5: 49.3,
    gamma1_c1: 32.0,
    gamma1_c2: 33.0,
    gamma2_c1c1: 363.0,
    gamma2_c1c2: 58.0,
    gamma3_c1: 105.0,
    gamma3_c2: 2.0,
    gt1_c1: 17.0,
    gt1_c2: 2.0,
    gt2_c1c1: 2.4,
    gt2_c1c2: 8.2,
    gt2_c1: 4.0,
    kt1_c1: 51.0,
    kt1_c2: 6.0,
    kt1_one: 1.0,
    kt2_c1c1: 7.2,
    kt2_c1c2: 24.6,
    kt2_c1: 12.0,
    kt2_c1_or_1: 2.4,
    unit_uniform_sqrt: 18.0,
    unit_uniform_sqrt_c2: 2.0,
    unit_inv: 6.4,
    unit_inv_c2: 8.2,
    unit_harmonic_sqrt: 10.0,
    penalty_harmonic: 2.0,
    penalty_uniform: 4.0,
    variance_floor: 3.0,
    min_n: 21,
    chain_sqrt: 118.9,
    chain_inv: 823.1,
    chain_consolidated: 599.0,
    mean_omega: 1.5,
    mean_big_omega: 4.8,
    second_omega: 5.4,
    l2_c2: 13.2,
    pi_upper: 1.5,
    pi_lower_from: 17,
    pi_second_order: 184.0,
    pi_second_order_from: 229,
    mertens_log_gap: 2.0,
    mertens_recip_tail: 2.0,
};

impl Constants {
    /// The coefficients of the four constant displays, in display order,
    /// followed by the ψ(p) ≡ 1 specializations.
    pub fn display_list(&self) -> Vec<f64> {
        vec![
            self.kappa1_c1,
            self.kappa1_c2,
            self.kappa2_c1c1,
            self.kappa2_c1c2,
            self.kappa3,
            self.kappa4_c1,
            self.kappa4_c2,
            self.kappa5,
            self.gamma1_c1,
            self.gamma1_c2,
            self.gamma2_c1c1,
            self.gamma2_c1c2,
            self.gamma3_c1,
            self.gt1_c1,
            self.gt1_c2,
            self.gt2_c1c1,
            self.gt2_c1c2,
            self.gt2_c1,
            self.kt1_c1,
            self.kt1_c2,
            self.kt1_one,
            self.kt2_c1c1,
            self.kt2_c1c2,
            self.kt2_c1,
            self.kt2_c1_or_1,
            self.unit_uniform_sqrt,
            self.unit_inv,
            self.unit_harmonic_sqrt,
        ]
    }
}

/// Note attached to every uniform Poisson report.
pub const KAPPA_TILDE_2_NOTE: &str = "kappa~2 uses the stated 2.4(c1 v 1) term; the derivation of that \
     term produces 4(c1 v 1)/sqrt(2 pi) ~ 1.596(c1 v 1) instead, left unresolved";

/// A right-hand side with its labelled terms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rhs {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl Rhs {
    fn of(terms: Vec<(&str, f64)>) -> Self {
        let terms: Vec<(String, f64)> = terms.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        Rhs {
            total: terms.iter().map(|t| t.1).sum(),
            terms,
        }
    }
}

fn loglog(n: u64) -> f64 {
    (n as f64).ln().ln()
}

/// What the bounds need to know about ψ, computed once per function.
#[derive(Clone, Debug, Serialize)]
pub struct PsiProfile {
    pub name: String,
    pub constants: std::result::Result<HypothesisConstants, String>,
    /// ψ(p) = 1 on every prime up to the scan limit.
    pub unit_at_primes: bool,
    /// Integer valued and ψ(p^k) ≥ 0 on the scanned prime powers.
    pub n0_valued: bool,
    pub scan_limit: u64,
}

/// Prime powers p^k with k ≤ this are scanned for sign.
const SIGN_SCAN_K: u32 = 8;

impl PsiProfile {
    /// Hypothesis constants from primes up to `prime_cutoff`; the ψ(p) ≡ 1
    /// and sign scans run over primes up to `min(limit, prime_cutoff)`.
    pub fn new(psi: &AdditiveFunction, tables: &SieveTables, prime_cutoff: u64) -> Self {
        let constants = psi.constants(prime_cutoff, DEFAULT_K_CUTOFF).map_err(|e| e.to_string());
        let scan_limit = tables.limit().min(prime_cutoff);
        let primes = tables.primes_upto(scan_limit);
        let one = BigRational::one();
        let unit_at_primes = primes.iter().all(|&p| psi.prime_power(p, 1) == one);
        let n0_valued = psi.integer_valued()
            && primes
                .iter()
                .all(|&p| (1..=SIGN_SCAN_K).all(|k| psi.prime_power_f64(p, k) >= 0.0));
        PsiProfile {
            name: psi.name().to_string(),
            constants,
            unit_at_primes,
            n0_valued,
            scan_limit,
        }
    }

    pub fn default_for(psi: &AdditiveFunction, tables: &SieveTables) -> Self {
        PsiProfile::new(psi, tables, DEFAULT_PRIME_CUTOFF)
    }

    /// (c₁, c₂) with c₂ rounded up by its truncation error.
    pub fn c1_c2(&self) -> Option<(f64, f64)> {
        self.constants.as_ref().ok().map(|c| (c.c1, c.c2 + c.c2_error))
    }
}

/// Normalizers and penalty at one n.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremInputs {
    pub n: u64,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub lambda: f64,
    /// Σ_{p≤n} |ψ(p) − 1|/p.
    pub penalty: f64,
}

pub fn theorem_inputs(psi: &AdditiveFunction, profile: &PsiProfile, n: u64, tables: &SieveTables) -> Result<TheoremInputs> {
    let norm = normalizers::<f64>(psi, n, tables)?;
    let (c1, c2) = profile.c1_c2().unwrap_or((f64::NAN, f64::NAN));
    let mut pen = Neumaier::new();
    for &p in tables.primes_upto(n) {
        pen.push((psi.prime_power_f64(p, 1) - 1.0).abs() / p as f64);
    }
    Ok(TheoremInputs {
        n,
        c1,
        c2,
        mu: norm.mu,
        sigma2: norm.sigma2,
        lambda: norm.lambda,
        penalty: pen.total(),
    })
}

/// (d_K, d_1) right-hand sides for the standardized ψ(J_n).
pub fn rhs_gaussian_uniform(t: &TheoremInputs) -> (Rhs, Rhs) {
    let k = &CONSTANTS;
    let (c1, c2) = (t.c1, t.c2);
    let s = t.sigma2.sqrt();
    let ln = (t.n as f64).ln();
    let ll = loglog(t.n);
    let kappa1 = k.kappa1_c1 * c1 + k.kappa1_c2 * c2;
    let kappa2 = k.kappa2_c1c1 * c1 * c1 + k.kappa2_c1c2 * c1 * c2;
    let kappa4 = k.kappa4_c1 * c1 + k.kappa4_c2 * c2;
    (
        Rhs::of(vec![
            ("kappa1/sigma", kappa1 / s),
            ("kappa2/sigma^2", kappa2 / t.sigma2),
            ("kappa3 loglog/log", k.kappa3 * ll / ln),
        ]),
        Rhs::of(vec![
            ("kappa4/sigma", kappa4 / s),
            ("kappa5 loglog^1.5/log^0.5", k.kappa5 * ll.powf(1.5) / ln.sqrt()),
        ]),
    )
}

/// (d_K, d_1) right-hand sides for the standardized ψ(H_n).
pub fn rhs_gaussian_harmonic(t: &TheoremInputs) -> (Rhs, Rhs) {
    let k = &CONSTANTS;
    let (c1, c2) = (t.c1, t.c2);
    let s = t.sigma2.sqrt();
    let gamma1 = k.gamma1_c1 * c1 + k.gamma1_c2 * c2;
    let gamma2 = k.gamma2_c1c1 * c1 * c1 + k.gamma2_c1c2 * c1 * c2;
    let gamma3 = k.gamma3_c1 * c1 + k.gamma3_c2 * c2;
    (
        Rhs::of(vec![("gamma1/sigma", gamma1 / s), ("gamma2/sigma^2", gamma2 / t.sigma2)]),
        Rhs::of(vec![("gamma3/sigma", gamma3 / s)]),
    )
}

/// d_TV(ψ(H_n), Poisson(λ_n)).
pub fn rhs_poisson_harmonic(t: &TheoremInputs) -> Rhs {
    let k = &CONSTANTS;
    let (c1, c2) = (t.c1, t.c2);
    let g1 = k.gt1_c1 * c1 + k.gt1_c2 * c2;
    let g2 = k.gt2_c1c1 * c1 * c1 + k.gt2_c1c2 * c1 * c2 + k.gt2_c1 * c1;
    Rhs::of(vec![
        ("gamma~1/sqrt(lambda)", g1 / t.lambda.sqrt()),
        ("gamma~2/lambda", g2 / t.lambda),
        ("penalty", k.penalty_harmonic * c1 / t.lambda * t.penalty),
    ])
}

/// d_K(ψ(J_n), Poisson(λ_n)).
pub fn rhs_poisson_uniform(t: &TheoremInputs) -> Rhs {
    let k = &CONSTANTS;
    let (c1, c2) = (t.c1, t.c2);
    let kt1 = k.kt1_c1 * c1 + k.kt1_c2 * c2 + k.kt1_one;
    let kt2 = k.kt2_c1c1 * c1 * c1 + k.kt2_c1c2 * c1 * c2 + k.kt2_c1 * c1 + k.kt2_c1_or_1 * c1.max(1.0);
    Rhs::of(vec![
        ("kappa~1/sqrt(lambda)", kt1 / t.lambda.sqrt()),
        ("kappa~2/lambda", kt2 / t.lambda),
        ("penalty", k.penalty_uniform * c1 / t.lambda * t.penalty),
        ("kappa3 loglog/log", k.kappa3 * loglog(t.n) / (t.n as f64).ln()),
    ])
}

/// d_TV(ψ(H_n), Poisson(λ_n)) when ψ(p) ≡ 1.
pub fn rhs_poisson_harmonic_unit(t: &TheoremInputs) -> Rhs {
    let k = &CONSTANTS;
    Rhs::of(vec![
        ("10/sqrt(lambda)", k.unit_harmonic_sqrt / t.lambda.sqrt()),
        ("(6.4+8.2c2)/lambda", (k.unit_inv + k.unit_inv_c2 * t.c2) / t.lambda),
    ])
}

/// d_TV(ψ(J_n), Poisson(λ_n)) when ψ(p) ≡ 1.
pub fn rhs_poisson_uniform_unit(t: &TheoremInputs) -> Rhs {
    let k = &CONSTANTS;
    Rhs::of(vec![
        ("(18+2c2)/sqrt(lambda)", (k.unit_uniform_sqrt + k.unit_uniform_sqrt_c2 * t.c2) / t.lambda.sqrt()),
        ("(6.4+8.2c2)/lambda", (k.unit_inv + k.unit_inv_c2 * t.c2) / t.lambda),
        ("kappa3 loglog/log", k.kappa3 * loglog(t.n) / (t.n as f64).ln()),
    ])
}

/// d_K bound after renormalizing by (m, s) instead of (μ, σ): adds
/// the pair bound for d_K(N, N((μ − m)/s, σ²/s²)).
pub fn transfer_rhs_dk(rhs: f64, mu: f64, sigma: f64, m: f64, s: f64) -> Result<f64> {
    Ok(rhs + gaussian_pair_bounds((mu - m) / s, sigma / s)?.0)
}

/// d_1 bound after renormalizing: (σ/s)(rhs + d_1 bound for N((m − μ)/σ, s²/σ²)).
pub fn transfer_rhs_d1(rhs: f64, mu: f64, sigma: f64, m: f64, s: f64) -> Result<f64> {
    Ok(sigma / s * (rhs + gaussian_pair_bounds((m - mu) / sigma, s / sigma)?.1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Kolmogorov,
    Wasserstein,
    TotalVariation,
    /// A probability bounded from above.
    Probability,
    /// A plain inequality lhs ≤ rhs.
    Inequality,
}

impl Kind {
    /// Whether rhs ≥ 1 makes the bound carry no information.
    fn bounded_by_one(self) -> bool {
        matches!(self, Kind::Kolmogorov | Kind::TotalVariation | Kind::Probability)
    }
}

/// One check: lhs ≤ rhs, with its status.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub theorem_id: String,
    pub n: u64,
    pub psi_name: String,
    pub kind: Kind,
    pub lhs: Option<DistanceResult>,
    pub rhs: f64,
    pub rhs_terms: Vec<(String, f64)>,
    /// Extra tolerance for float comparisons.
    pub slack: f64,
    pub holds: Option<bool>,
    pub vacuous: bool,
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(id: impl Into<String>, n: u64, psi_name: &str, kind: Kind, lhs: Option<DistanceResult>, rhs: Rhs) -> Self {
        BoundReport {
            theorem_id: id.into(),
            n,
            psi_name: psi_name.to_string(),
            kind,
            lhs,
            rhs: rhs.total,
            rhs_terms: rhs.terms,
            slack: 0.0,
            holds: None,
            vacuous: false,
            applicable: true,
            notes: Vec::new(),
        }
    }

    fn inequality(id: &str, n: u64, psi_name: &str, lhs: f64, lhs_err: f64, rhs: f64, slack: f64) -> Self {
        let lhs = DistanceResult {
            value: lhs,
            error_bound: lhs_err,
            method: Method::ClosedForm,
        };
        let mut r = BoundReport::new(id, n, psi_name, Kind::Inequality, Some(lhs), Rhs::of(vec![("rhs", rhs)]));
        r.slack = slack;
        r
    }

    fn applicable(mut self, yes: bool, why_not: &str) -> Self {
        self.applicable = yes;
        if !yes {
            self.notes.push(why_not.to_string());
        }
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Applies the rhs scale and fills in `vacuous` and `holds`.
    pub fn finish(mut self, rhs_scale: f64) -> Self {
        if rhs_scale != 1.0 {
            self.rhs *= rhs_scale;
            self.notes.push(format!("rhs scaled by {rhs_scale}"));
        }
        self.vacuous = self.kind.bounded_by_one() && self.rhs >= 1.0;
        self.holds = self
            .lhs
            .as_ref()
            .map(|l| l.value.is_finite() && l.value <= self.rhs + l.error_bound + self.slack);
        self
    }

    /// Fails only when the check applies, is informative, and does not hold.
    pub fn passed(&self) -> bool {
        !self.applicable || self.vacuous || self.holds != Some(false)
    }

    fn from_check(c: &BoundCheck, psi_name: &str) -> Self {
        let lhs = DistanceResult {
            value: c.lhs,
            error_bound: c.error_bound,
            method: if c.lhs_exact.is_some() { Method::ExactRational } else { Method::ClosedForm },
        };
        let mut r = BoundReport::new(
            c.lemma_id.clone(),
            c.n,
            psi_name,
            Kind::Probability,
            Some(lhs),
            Rhs::of(vec![("rhs", c.rhs)]),
        );
        if let Some(e) = &c.lhs_exact {
            if e.len() <= 200 {
                r.notes.push(format!("lhs = {e}"));
            }
        }
        r
    }

    fn error(id: &str, n: u64, psi_name: &str, e: &Error) -> Self {
        let mut r = BoundReport::new(id, n, psi_name, Kind::Inequality, None, Rhs::of(vec![]));
        r.holds = Some(false);
        r.notes.push(format!("error: {e}"));
        r
    }
}

/// Gaussian and Poisson distance reports at one n.
pub fn theorem_reports(
    psi: &AdditiveFunction,
    profile: &PsiProfile,
    n: u64,
    tables: &SieveTables,
    rhs_scale: f64,
) -> Result<Vec<BoundReport>> {
    let t = theorem_inputs(psi, profile, n, tables)?;
    let name = psi.name();
    let k = &CONSTANTS;
    let hyp = profile.constants.as_ref().err();
    let base_ok = hyp.is_none() && n >= k.min_n;
    let why = match hyp {
        Some(e) => format!("hypotheses fail: {e}"),
        None => format!("needs n >= {}", k.min_n),
    };
    let mut out = Vec::new();

    let uniform: DiscreteLaw<f64> = law_uniform(psi, n, tables)?;
    let harmonic: DiscreteLaw<f64> = law_harmonic(psi, n, tables)?;

    if t.sigma2 > 0.0 {
        let sigma = t.sigma2.sqrt();
        let floor = k.variance_floor * (t.c1 * t.c1 + t.c2 * t.c2);
        let gauss_ok = base_ok && t.sigma2 >= floor;
        let gauss_why = if base_ok {
            format!("sigma_n^2 = {:.4} < 3(c1^2+c2^2) = {floor:.4}", t.sigma2)
        } else {
            why.clone()
        };
        for (law, (dk_rhs, d1_rhs), tag) in [
            (&uniform, rhs_gaussian_uniform(&t), "uniform"),
            (&harmonic, rhs_gaussian_harmonic(&t), "harmonic"),
        ] {
            let dk = dk_vs_gaussian(law, t.mu, sigma)?;
            out.push(
                BoundReport::new(format!("gauss-{tag}-dk"), n, name, Kind::Kolmogorov, Some(dk), dk_rhs)
                    .applicable(gauss_ok, &gauss_why),
            );
            // d_1 of the standardized variable is the raw distance over σ
            let mut d1 = w1_vs_gaussian(law, t.mu, sigma)?;
            d1.value /= sigma;
            d1.error_bound /= sigma;
            out.push(
                BoundReport::new(format!("gauss-{tag}-d1"), n, name, Kind::Wasserstein, Some(d1), d1_rhs)
                    .applicable(gauss_ok, &gauss_why),
            );
        }
    }

    let poisson_ok = base_ok && profile.n0_valued && t.lambda > 0.0;
    let poisson_why = if !profile.n0_valued {
        "psi is not N0-valued".to_string()
    } else if t.lambda <= 0.0 {
        "lambda_n <= 0".to_string()
    } else {
        why.clone()
    };
    if t.lambda > 0.0 && is_n0_valued(&uniform) && is_n0_valued(&harmonic) {
        let tv_h = tv_vs_poisson(&harmonic, t.lambda)?;
        out.push(
            BoundReport::new("poisson-harmonic-tv", n, name, Kind::TotalVariation, Some(tv_h), rhs_poisson_harmonic(&t))
                .applicable(poisson_ok, &poisson_why),
        );
        let dk_j = dk_vs_poisson(&uniform, t.lambda)?;
        out.push(
            BoundReport::new("poisson-uniform-dk", n, name, Kind::Kolmogorov, Some(dk_j), rhs_poisson_uniform(&t))
                .applicable(poisson_ok, &poisson_why)
                .note(KAPPA_TILDE_2_NOTE),
        );
        let unit_ok = poisson_ok && profile.unit_at_primes;
        let unit_why = if poisson_ok { "psi(p) is not identically 1" } else { poisson_why.as_str() };
        out.push(
            BoundReport::new(
                "poisson-harmonic-unit-tv",
                n,
                name,
                Kind::TotalVariation,
                Some(tv_h),
                rhs_poisson_harmonic_unit(&t),
            )
            .applicable(unit_ok, unit_why),
        );
        let tv_j = tv_vs_poisson(&uniform, t.lambda)?;
        out.push(
            BoundReport::new(
                "poisson-uniform-unit-tv",
                n,
                name,
                Kind::TotalVariation,
                Some(tv_j),
                rhs_poisson_uniform_unit(&t),
            )
            .applicable(unit_ok, unit_why),
        );
    }
    Ok(out.into_iter().map(|r| r.finish(rhs_scale)).collect())
}

/// Three terms, their sum and the single-term consolidation.
#[derive(Clone, Debug, Serialize)]
pub struct RemarkChain {
    pub n: u64,
    pub loglog: f64,
    pub terms: [f64; 3],
    pub chain: f64,
    pub consolidated: f64,
    /// chain ≤ consolidated, taken literally.
    pub consolidation_holds: bool,
    /// min(1, chain), the bound as a statement about a distance.
    pub capped: f64,
    pub exact: Option<RenormalizedDk>,
}

/// Exact d_K of ω(J_n) under both normalizations and the transfer between them.
#[derive(Clone, Debug, Serialize)]
pub struct RenormalizedDk {
    /// d_K((ω(J_n) − loglog n)/√loglog n, N).
    pub dk_loglog: DistanceResult,
    /// d_K((ω(J_n) − μ_n)/σ_n, N).
    pub dk_natural: DistanceResult,
    pub mean_shift: f64,
    pub sd_ratio: f64,
    /// Exact d_K(N, W) for W ~ N((μ_n − m)/s, σ_n²/s²).
    pub pair_dk: f64,
    /// Its closed-form bound.
    pub pair_dk_bound: f64,
    /// dk_loglog ≤ dk_natural + pair_dk.
    pub transfer_holds: bool,
    /// dk_loglog ≤ chain.
    pub chain_covers: bool,
}

/// The explicit chain for ω normalized by m = s² = loglog n, and, when n
/// is within `tables`, the exact distances it bounds.
pub fn remark_chain_omega(n: u64, tables: Option<&SieveTables>) -> Result<RemarkChain> {
    let k = &CONSTANTS;
    if n < k.min_n {
        return Err(Error::OutOfTheoremRange {
            lemma: "loglog chain for omega",
            n,
            min: k.min_n,
        });
    }
    let ll = loglog(n);
    let terms = [k.chain_sqrt / ll.sqrt(), k.chain_inv / ll, k.kappa3 * ll / (n as f64).ln()];
    let chain: f64 = terms.iter().sum();
    let consolidated = k.chain_consolidated / ll.sqrt();
    let exact = match tables {
        Some(t) if n <= t.limit() => {
            let psi = AdditiveFunction::omega();
            let law: DiscreteLaw<f64> = law_uniform(&psi, n, t)?;
            let norm = normalizers::<f64>(&psi, n, t)?;
            let sigma = norm.sigma_checked()?;
            let s = ll.sqrt();
            let dk_loglog = dk_vs_gaussian(&law, ll, s)?;
            let dk_natural = dk_vs_gaussian(&law, norm.mu, sigma)?;
            let mean_shift = (norm.mu - ll) / s;
            let sd_ratio = sigma / s;
            let pair_dk = gaussian_pair_dk(mean_shift, sd_ratio)?;
            let pair_dk_bound = gaussian_pair_bounds(mean_shift, sd_ratio)?.0;
            let err = dk_loglog.error_bound + dk_natural.error_bound + 1e-12;
            Some(RenormalizedDk {
                transfer_holds: dk_loglog.value <= dk_natural.value + pair_dk + err,
                chain_covers: dk_loglog.value <= chain + dk_loglog.error_bound,
                dk_loglog,
                dk_natural,
                mean_shift,
                sd_ratio,
                pair_dk,
                pair_dk_bound,
            })
        }
        _ => None,
    };
    Ok(RemarkChain {
        n,
        loglog: ll,
        terms,
        chain,
        consolidated,
        consolidation_holds: chain <= consolidated,
        capped: chain.min(1.0),
        exact,
    })
}

fn chain_reports(n: u64, tables: &SieveTables, rhs_scale: f64) -> Result<Vec<BoundReport>> {
    let c = remark_chain_omega(n, Some(tables))?;
    let name = "omega";
    let mut out = Vec::new();
    let chain_terms = Rhs::of(vec![
        ("118.9/sqrt(L)", c.terms[0]),
        ("823.1/L", c.terms[1]),
        ("67.4 L/log n", c.terms[2]),
    ]);
    // both sides bound a Kolmogorov distance from above and exceed one at
    // every n in reach, so a failure here carries no information about d_K
    let mut cons = BoundReport::inequality(
        "omega-loglog-consolidation",
        n,
        name,
        c.chain,
        0.0,
        c.consolidated,
        1e-9,
    )
    .finish(rhs_scale);
    cons.rhs_terms = chain_terms.terms.clone();
    cons.vacuous = cons.rhs >= 1.0;
    if !c.consolidation_holds {
        cons.notes.push(format!(
            "three-term chain {:.3} exceeds 599/sqrt(loglog n) = {:.3}",
            c.chain, c.consolidated
        ));
    }
    out.push(cons);
    if let Some(e) = &c.exact {
        out.push(
            BoundReport::new("omega-loglog-dk", n, name, Kind::Kolmogorov, Some(e.dk_loglog), chain_terms).finish(rhs_scale),
        );
        out.push(
            BoundReport::new(
                "omega-renormalized-transfer",
                n,
                name,
                Kind::Kolmogorov,
                Some(e.dk_loglog),
                Rhs::of(vec![("dk natural", e.dk_natural.value), ("dk(N, W)", e.pair_dk)]),
            )
            .finish(rhs_scale),
        );
        let mut r = BoundReport::new(
            "omega-renormalized-transfer-bound",
            n,
            name,
            Kind::Kolmogorov,
            Some(e.dk_loglog),
            Rhs::of(vec![("dk natural", e.dk_natural.value), ("pair bound", e.pair_dk_bound)]),
        );
        r.lhs.as_mut().unwrap().error_bound += e.dk_natural.error_bound;
        out.push(r.finish(rhs_scale));
    }
    Ok(out)
}

/// Prime counting, Mertens and product inequalities at one n.
pub fn prime_reports(n: u64, tables: &SieveTables) -> Result<Vec<BoundReport>> {
    let k = &CONSTANTS;
    let name = "-";
    let nf = n as f64;
    let ln = nf.ln();
    let slack = 1e-9;
    let pi = tables.prime_count(nf)? as f64;
    let mut out = Vec::new();
    if n >= k.pi_lower_from {
        out.push(BoundReport::inequality("pi-lower", n, name, nf / ln, 1e-15 * nf, pi, slack));
    }
    out.push(BoundReport::inequality("pi-upper", n, name, pi, 0.0, k.pi_upper * nf / ln, slack));
    if n >= k.pi_second_order_from {
        let dev = (pi - nf / ln - nf / (ln * ln)).abs();
        out.push(BoundReport::inequality(
            "pi-second-order",
            n,
            name,
            dev,
            1e-15 * nf,
            k.pi_second_order * nf / ln.powi(3),
            slack,
        ));
    }
    let slog = tables.mertens_log_sum(n)?;
    let serr = 1e-15 * slog.abs().max(1.0);
    out.push(BoundReport::inequality("mertens-log-lower", n, name, ln - k.mertens_log_gap, 0.0, slog, slack));
    out.push(BoundReport::inequality("mertens-log-upper", n, name, slog, serr, ln, slack));
    let srec = tables.mertens_recip_sum(n)?;
    if ln.ln() > 0.0 {
        out.push(BoundReport::inequality("mertens-recip-lower", n, name, ln.ln(), 0.0, srec, slack));
    }
    out.push(BoundReport::inequality(
        "mertens-recip-upper",
        n,
        name,
        srec,
        serr,
        ln.ln() + MERTENS_CONSTANT + k.mertens_recip_tail / ln,
        slack,
    ));
    let prod: f64 = tables.euler_product(n)?;
    out.push(BoundReport::inequality(
        "euler-product-lower",
        n,
        name,
        (-EULER_GAMMA).exp() / ln * (1.0 - 1.0 / (ln * ln)),
        0.0,
        prod,
        slack,
    ));
    Ok(out.into_iter().map(|r| r.finish(1.0)).collect())
}

/// Moment and L² inequalities for ψ at one n (ω and Ω get their own
/// sharper moment bounds as well).
pub fn moment_reports(psi: &AdditiveFunction, profile: &PsiProfile, n: u64, tables: &SieveTables) -> Result<Vec<BoundReport>> {
    let k = &CONSTANTS;
    let name = psi.name();
    let ll = loglog(n);
    let uniform: DiscreteLaw<BigRational> = law_uniform(psi, n, tables)?;
    let harmonic: DiscreteLaw<f64> = law_harmonic(psi, n, tables)?;
    let m1 = moments(&uniform, 1).to_f64().unwrap_or(f64::NAN);
    let m2 = moments(&uniform, 2).to_f64().unwrap_or(f64::NAN);
    let h2 = moments(&harmonic, 2);
    let herr = 1e-13 * h2.abs().max(1.0);
    let slack = 1e-9;
    let mut out = Vec::new();
    match name {
        "omega" => {
            out.push(BoundReport::inequality("mean-omega-uniform", n, name, (m1 - ll).abs(), 0.0, k.mean_omega, slack));
            out.push(BoundReport::inequality("second-omega-uniform", n, name, m2, 0.0, k.second_omega * ll * ll, slack));
            out.push(BoundReport::inequality("second-omega-harmonic", n, name, h2, herr, k.second_omega * ll * ll, slack));
        }
        "big-omega" => {
            out.push(BoundReport::inequality(
                "mean-big-omega-uniform",
                n,
                name,
                (m1 - ll).abs(),
                0.0,
                k.mean_big_omega,
                slack,
            ));
        }
        _ => {}
    }
    if let Some((c1, c2)) = profile.c1_c2() {
        let rhs = c1 * c1 * ll * ll + k.l2_c2 * c2 * c2;
        out.push(BoundReport::inequality("l2-uniform", n, name, m2, 0.0, rhs, slack));
        out.push(BoundReport::inequality("l2-harmonic", n, name, h2, herr, rhs, slack));
    }
    Ok(out
        .into_iter()
        .map(|r| r.applicable(n >= k.min_n, "needs n >= 21").finish(1.0))
        .collect())
}

/// θ values used for the H_n tail inequality.
pub const TAIL_THETAS: [u64; 9] = [2, 3, 5, 10, 20, 50, 100, 1000, 10_000];

/// P[H_n > n/θ] ≤ 2 log θ / L_n with the left side exact.
pub fn tail_reports(n: u64) -> Result<Vec<BoundReport>> {
    let ln_n = harmonic_f64(n);
    let mut out = Vec::new();
    for &theta in TAIL_THETAS.iter().filter(|&&t| t <= n) {
        let p = harmonic_tail(n, theta)?;
        let lhs = DistanceResult {
            value: p.to_f64().unwrap_or(f64::NAN),
            error_bound: 1e-16,
            method: Method::ExactRational,
        };
        let rhs = 2.0 * (theta as f64).ln() / ln_n;
        out.push(
            BoundReport::new(
                format!("harmonic-tail-theta-{theta}"),
                n,
                "-",
                Kind::Probability,
                Some(lhs),
                Rhs::of(vec![("2 log theta / L_n", rhs)]),
            )
            .applicable(n >= CONSTANTS.min_n, "needs n >= 21")
            .finish(1.0),
        );
    }
    Ok(out)
}

/// Largest n for which the suite computes coupling distances per grid point.
pub const SUITE_COUPLING_LIMIT: u64 = 1_000_000;
/// Largest n for exact tail and moment reports in the suite.
pub const SUITE_EXACT_LIMIT: u64 = 10_000;

/// Every applicable check over `grid`, in grid order; failures are recorded
/// in the reports rather than returned as errors.
pub fn verify_suite(psi: &AdditiveFunction, grid: &[u64], tables: &SieveTables, rhs_scale: f64) -> Vec<BoundReport> {
    let profile = PsiProfile::default_for(psi, tables);
    verify_suite_with(psi, &profile, grid, tables, rhs_scale)
}

pub fn verify_suite_with(
    psi: &AdditiveFunction,
    profile: &PsiProfile,
    grid: &[u64],
    tables: &SieveTables,
    rhs_scale: f64,
) -> Vec<BoundReport> {
    let mut ns: Vec<u64> = grid.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let name = psi.name().to_string();
    let per_n: Vec<Vec<BoundReport>> = ns
        .par_iter()
        .map(|&n| {
            let mut out = Vec::new();
            let mut run = |id: &str, r: Result<Vec<BoundReport>>| match r {
                Ok(v) => out.extend(v),
                Err(e) => out.push(BoundReport::error(id, n, &name, &e)),
            };
            if n < 2 || n > tables.limit() {
                run("range", Err(Error::InvalidArgument(format!("n = {n} outside [2, {}]", tables.limit()))));
                return out;
            }
            run("theorems", theorem_reports(psi, profile, n, tables, rhs_scale));
            run("primes", prime_reports(n, tables));
            if n <= SUITE_EXACT_LIMIT {
                run("moments", moment_reports(psi, profile, n, tables));
                run("tail", tail_reports(n));
            }
            if (CONSTANTS.min_n..=SUITE_COUPLING_LIMIT).contains(&n) {
                run(
                    "coupling",
                    coupling::tv_coupling_vs_uniform(n, tables)
                        .and_then(|a| Ok(vec![a, coupling::prob_q_divides_h(n, tables)?]))
                        .map(|v| v.iter().map(|c| BoundReport::from_check(c, "-").finish(rhs_scale)).collect()),
                );
            }
            if name == "omega" && n >= CONSTANTS.min_n {
                run("chain", chain_reports(n, tables, rhs_scale));
            }
            out
        })
        .collect();
    per_n.into_iter().flatten().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub applicable: usize,
    pub vacuous: usize,
    pub failed: usize,
}

pub fn summarize(reports: &[BoundReport]) -> SuiteSummary {
    SuiteSummary {
        total: reports.len(),
        applicable: reports.iter().filter(|r| r.applicable).count(),
        vacuous: reports.iter().filter(|r| r.applicable && r.vacuous).count(),
        failed: reports.iter().filter(|r| !r.passed()).count(),
    }
}

pub fn reports_to_json(reports: &[BoundReport]) -> serde_json::Value {
    serde_json::json!({
        "summary": summarize(reports),
        "reports": reports,
    })
}

pub fn write_reports_csv<W: Write>(reports: &[BoundReport], mut w: W) -> Result<()> {
    writeln!(w, "id,n,psi,kind,lhs,lhs_error,rhs,applicable,vacuous,holds,passed,notes")?;
    for r in reports {
        let (lhs, err) = r.lhs.map(|l| (l.value, l.error_bound)).unwrap_or((f64::NAN, f64::NAN));
        let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let holds = r.holds.map(|h| h.to_string()).unwrap_or_default();
        // notes are free text; keep the dialect quote-free
        let notes = r.notes.join("; ").replace([',', '"', '\n'], " ");
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{},{},{},{},{}",
            r.theorem_id,
            r.n,
            r.psi_name,
            kind,
            lhs,
            err,
            r.rhs,
            r.applicable,
            r.vacuous,
            holds,
            r.passed(),
            notes
        )?;
    }
    Ok(())
}

/// Outcome of one inequality checked at every n of a range.
#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub id: String,
    pub checked: u64,
    pub failures: u64,
    pub first_failure: Option<u64>,
    /// min over n of rhs − lhs.
    pub worst_margin: f64,
    pub worst_n: u64,
}

impl SweepResult {
    fn new(id: &str) -> Self {
        SweepResult {
            id: id.to_string(),
            checked: 0,
            failures: 0,
            first_failure: None,
            worst_margin: f64::INFINITY,
            worst_n: 0,
        }
    }

    fn record(&mut self, n: u64, lhs: f64, rhs: f64, slack: f64) {
        self.checked += 1;
        let margin = rhs - lhs;
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_n = n;
        }
        if !(lhs <= rhs + slack) {
            self.failures += 1;
            self.first_failure.get_or_insert(n);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

/// ω(k) and Ω(k) for k ≤ n by sieving.
pub fn omega_counts(n: u64, tables: &SieveTables) -> Result<(Vec<u8>, Vec<u8>)> {
    tables.check_n(n)?;
    let len = n as usize + 1;
    let mut w = vec![0u8; len];
    let mut big = vec![0u8; len];
    for &p in tables.primes_upto(n) {
        let p = p as usize;
        for m in (p..len).step_by(p) {
            w[m] += 1;
        }
        let mut pk = p;
        loop {
            for m in (pk..len).step_by(pk) {
                big[m] += 1;
            }
            match pk.checked_mul(p) {
                Some(x) if x < len => pk = x,
                _ => break,
            }
        }
    }
    Ok((w, big))
}

/// Moment and L² inequalities for ω and Ω at every n in [21, n_max], from
/// integer prefix sums (harmonic moments by compensated summation).
/// `c2_omega`, `c2_big_omega` are the c₂ constants of the two functions.
pub fn moment_sweep(n_max: u64, tables: &SieveTables, c2_omega: f64, c2_big_omega: f64) -> Result<Vec<SweepResult>> {
    let k = &CONSTANTS;
    let (w, big) = omega_counts(n_max, tables)?;
    let ids = [
        "mean-omega-uniform",
        "mean-big-omega-uniform",
        "second-omega-uniform",
        "second-omega-harmonic",
        "l2-omega-uniform",
        "l2-omega-harmonic",
        "l2-big-omega-uniform",
        "l2-big-omega-harmonic",
    ];
    let mut res: Vec<SweepResult> = ids.iter().map(|i| SweepResult::new(i)).collect();
    let (mut s1, mut s2, mut t1, mut t2) = (0u64, 0u64, 0u64, 0u64);
    let (mut hw2, mut hb2, mut l) = (Neumaier::new(), Neumaier::new(), Neumaier::new());
    let slack = 1e-9;
    for m in 1..=n_max {
        let (a, b) = (w[m as usize] as u64, big[m as usize] as u64);
        s1 += a;
        s2 += a * a;
        t1 += b;
        t2 += b * b;
        let inv = 1.0 / m as f64;
        hw2.push((a * a) as f64 * inv);
        hb2.push((b * b) as f64 * inv);
        l.push(inv);
        if m < k.min_n {
            continue;
        }
        let nf = m as f64;
        let ll = loglog(m);
        let ln_m = l.total();
        res[0].record(m, (s1 as f64 / nf - ll).abs(), k.mean_omega, slack);
        res[1].record(m, (t1 as f64 / nf - ll).abs(), k.mean_big_omega, slack);
        res[2].record(m, s2 as f64 / nf, k.second_omega * ll * ll, slack);
        res[3].record(m, hw2.total() / ln_m, k.second_omega * ll * ll, slack);
        let l2w = ll * ll + k.l2_c2 * c2_omega * c2_omega;
        let l2b = ll * ll + k.l2_c2 * c2_big_omega * c2_big_omega;
        res[4].record(m, s2 as f64 / nf, l2w, slack);
        res[5].record(m, hw2.total() / ln_m, l2w, slack);
        res[6].record(m, t2 as f64 / nf, l2b, slack);
        res[7].record(m, hb2.total() / ln_m, l2b, slack);
    }
    Ok(res)
}

/// Every n ≤ `dense` and a logarithmic grid (`per_decade` points) above,
/// up to `limit`.
pub fn log_grid(limit: u64, dense: u64, per_decade: u32) -> Vec<u64> {
    let mut g: Vec<u64> = (2..=dense.min(limit)).collect();
    let mut j = 0u32;
    loop {
        let x = 10f64.powf(j as f64 / per_decade as f64).round() as u64;
        if x > limit {
            break;
        }
        if x > dense {
            g.push(x);
        }
        j += 1;
    }
    if limit > dense {
        g.push(limit);
    }
    g.sort_unstable();
    g.dedup();
    g
}

/// Prime-number and Mertens inequalities over `grid`.
pub fn prime_sweep(grid: &[u64], tables: &SieveTables) -> Result<Vec<SweepResult>> {
    let mut res: Vec<SweepResult> = Vec::new();
    for &n in grid {
        for r in prime_reports(n, tables)? {
            let slot = match res.iter().position(|s| s.id == r.theorem_id) {
                Some(i) => i,
                None => {
                    res.push(SweepResult::new(&r.theorem_id));
                    res.len() - 1
                }
            };
            let lhs = r.lhs.expect("prime checks have a left side");
            res[slot].record(n, lhs.value - lhs.error_bound, r.rhs, r.slack);
        }
    }
    Ok(res)
}

/// The tail inequality for every 21 ≤ n ≤ n_max and θ in `thetas`, with
/// P[H_n > n/θ] = (A_n − A_⌊n/θ⌋)/A_n exact, where A_m = Σ_{k≤m} D/k for
/// D = lcm(1, …, n_max).
pub fn tail_sweep(n_max: u64, thetas: &[u64]) -> Result<SweepResult> {
    if n_max < CONSTANTS.min_n {
        return Err(Error::InvalidArgument(format!("n_max must be at least {}", CONSTANTS.min_n)));
    }
    let mut d = BigUint::one();
    for k in 2..=n_max {
        let g = num_integer::Integer::gcd(&d, &BigUint::from(k));
        d = d * BigUint::from(k) / g;
    }
    let mut a = Vec::with_capacity(n_max as usize + 1);
    a.push(BigUint::zero());
    for k in 1..=n_max {
        let next = a.last().unwrap() + &d / BigUint::from(k);
        a.push(next);
    }
    let mut res = SweepResult::new("harmonic-tail");
    for n in CONSTANTS.min_n..=n_max {
        let l_n = harmonic_f64(n);
        for &theta in thetas.iter().filter(|&&t| t >= 1 && t <= n) {
            let j = (n / theta) as usize;
            let diff = BigInt::from(&a[n as usize] - &a[j]);
            let p = BigRational::new_raw(diff, BigInt::from(a[n as usize].clone()));
            let lhs = p.to_f64().unwrap_or(f64::NAN);
            res.record(n, lhs, 2.0 * (theta as f64).ln() / l_n, 0.0);
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn tables() -> &'static SieveTables {
        static T: OnceLock<SieveTables> = OnceLock::new();
        T.get_or_init(|| SieveTables::build(1_000_000).unwrap())
    }

    fn omega_inputs(n: u64) -> TheoremInputs {
        let psi = AdditiveFunction::omega();
        let profile = PsiProfile::new(&psi, tables(), 10_000);
        theorem_inputs(&psi, &profile, n, tables()).unwrap()
    }

    #[test]
    fn constants_match_the_displays() {
        let expected = [
            65.0, 66.0, 726.0, 116.0, 67.4, 106.0, 2.0, 49.3, 32.0, 33.0, 363.0, 58.0, 105.0, 17.0, 2.0, 2.4, 8.2, 4.0, 51.0,
            6.0, 1.0, 7.2, 24.6, 12.0, 2.4, 18.0, 6.4, 10.0,
        ];
        assert_eq!(CONSTANTS.display_list(), expected.to_vec());
        assert_eq!(CONSTANTS.gamma3_c2, 2.0);
        assert_eq!(CONSTANTS.unit_inv_c2, 8.2);
        assert_eq!(CONSTANTS.unit_uniform_sqrt_c2, 2.0);
    }

    #[test]
    fn constant_reductions() {
        let t = TheoremInputs {
            n: 1000,
            c1: 1.0,
            c2: 0.0,
            mu: 0.0,
            sigma2: 1.0,
            lambda: 1.0,
            penalty: 0.0,
        };
        let (dk, d1) = rhs_gaussian_uniform(&t);
        assert_eq!(dk.terms[0].1, 65.0);
        assert_eq!(dk.terms[1].1, 726.0);
        assert_eq!(d1.terms[0].1, 106.0);
        // κ₅ does not depend on ψ
        let t2 = TheoremInputs { c1: 3.0, c2: 5.0, ..t.clone() };
        assert_eq!(rhs_gaussian_uniform(&t2).1.terms[1], d1.terms[1]);
        let (gk, gd) = rhs_gaussian_harmonic(&t);
        assert_eq!((gk.terms[0].1, gk.terms[1].1, gd.terms[0].1), (32.0, 363.0, 105.0));
        let p = rhs_poisson_harmonic(&t);
        assert_eq!(p.terms[0].1, 17.0);
        assert!((p.terms[1].1 - 6.4).abs() < 1e-15);
        let u = rhs_poisson_uniform(&t);
        assert_eq!(u.terms[0].1, 52.0);
        assert!((u.terms[1].1 - (7.2 + 12.0 + 2.4)).abs() < 1e-12);
        assert_eq!(rhs_poisson_harmonic_unit(&t).total, 16.4);
    }

    #[test]
    fn omega_instantiation() {
        let t = omega_inputs(10_000);
        assert_eq!(t.c1, 1.0);
        assert!((t.c2 - 0.672_494).abs() < 1e-5);
        assert_eq!(t.penalty, 0.0);
        let (dk, _) = rhs_gaussian_uniform(&t);
        let s = t.sigma2.sqrt();
        let want = (65.0 + 66.0 * t.c2) / s + (726.0 + 116.0 * t.c2) / t.sigma2 + 67.4 * loglog(10_000) / (10_000f64).ln();
        assert!((dk.total - want).abs() < 1e-12);
        // the penalty vanishes for ω
        let p = rhs_poisson_harmonic(&t);
        assert_eq!(p.terms[2].1, 0.0);
        assert!((p.total - ((17.0 + 2.0 * t.c2) / t.lambda.sqrt() + (2.4 + 8.2 * t.c2 + 4.0) / t.lambda)).abs() < 1e-12);
    }

    #[test]
    fn transfer_adds_exactly_the_pair_bound() {
        let (mu, sigma, m, s) = (2.3, 1.7, 2.0, 1.5);
        let base = 0.42;
        let (b, _) = gaussian_pair_bounds((mu - m) / s, sigma / s).unwrap();
        assert_eq!(transfer_rhs_dk(base, mu, sigma, m, s).unwrap(), base + b);
        let (_, b1) = gaussian_pair_bounds((m - mu) / sigma, s / sigma).unwrap();
        assert!((transfer_rhs_d1(base, mu, sigma, m, s).unwrap() - sigma / s * (base + b1)).abs() < 1e-15);
        // unchanged normalization adds nothing
        assert_eq!(transfer_rhs_dk(base, mu, sigma, mu, sigma).unwrap(), base);
    }

    #[test]
    fn chain_arithmetic() {
        let c = remark_chain_omega(100_000_000, None).unwrap();
        let ll = loglog(100_000_000);
        assert!((ll - 2.91347).abs() < 1e-4);
        assert!((c.terms[0] - 118.9 / ll.sqrt()).abs() < 1e-12);
        assert!((c.terms[1] - 823.1 / ll).abs() < 1e-12);
        assert!((c.consolidated - 599.0 / ll.sqrt()).abs() < 1e-12);
        assert_eq!(c.capped, 1.0);
        assert!(c.exact.is_none());
        assert!(remark_chain_omega(20, None).is_err());
    }

    #[test]
    fn chain_exact_transfer() {
        let c = remark_chain_omega(1_000_000, Some(tables())).unwrap();
        let e = c.exact.unwrap();
        assert!(e.dk_loglog.value > 0.0 && e.dk_loglog.value < 1.0);
        assert!(e.transfer_holds);
        assert!(e.chain_covers);
        assert!(e.pair_dk <= e.pair_dk_bound);
        assert!(c.chain >= 1.0);
    }

    #[test]
    fn reports_mark_vacuity() {
        let psi = AdditiveFunction::omega();
        let profile = PsiProfile::new(&psi, tables(), 10_000);
        let reps = theorem_reports(&psi, &profile, 10_000, tables(), 1.0).unwrap();
        assert_eq!(reps.len(), 8);
        for r in &reps {
            let l = r.lhs.unwrap();
            assert!(l.value > 0.0 && l.value < 1.0 || r.kind == Kind::Wasserstein, "{r:?}");
            if r.kind != Kind::Wasserstein {
                assert!(r.vacuous, "{}: rhs {}", r.theorem_id, r.rhs);
            }
            assert!(r.passed());
        }
        // σ² ≥ 3(c₁² + c₂²) ≈ 4.36 holds at 10^4 but not at 100 (σ² ≈ 3.95)
        let g = reps.iter().find(|r| r.theorem_id == "gauss-uniform-dk").unwrap();
        assert!(g.applicable);
        let small = theorem_reports(&psi, &profile, 100, tables(), 1.0).unwrap();
        assert!(!small.iter().find(|r| r.theorem_id == "gauss-uniform-dk").unwrap().applicable);
        let p = reps.iter().find(|r| r.theorem_id == "poisson-uniform-unit-tv").unwrap();
        assert!(p.applicable && p.vacuous);
    }

    #[test]
    fn forced_scale_fails() {
        let psi = AdditiveFunction::omega();
        let reps = verify_suite(&psi, &[100], tables(), 0.0);
        assert!(reps.iter().any(|r| !r.passed()));
        assert!(verify_suite(&psi, &[], tables(), 1.0).is_empty());
    }

    #[test]
    fn suite_on_small_grid() {
        let psi = AdditiveFunction::omega();
        let reps = verify_suite(&psi, &[100, 1000, 10_000], tables(), 1.0);
        let failed: Vec<_> = reps.iter().filter(|r| !r.passed()).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        // the literal consolidation is recorded as not holding
        let cons = reps.iter().find(|r| r.theorem_id == "omega-loglog-consolidation").unwrap();
        assert_eq!(cons.holds, Some(false));
        assert!(cons.vacuous);
        let ids: Vec<&str> = reps.iter().filter(|r| r.n == 100).map(|r| r.theorem_id.as_str()).collect();
        for want in ["pi-lower", "mertens-recip-upper", "tv-coupling", "harmonic-tail-theta-10", "l2-uniform"] {
            assert!(ids.contains(&want), "{want} missing from {ids:?}");
        }
        let s = summarize(&reps);
        assert_eq!(s.failed, 0);
        let mut buf = Vec::new();
        write_reports_csv(&reps, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), reps.len() + 1);
    }

    #[test]
    fn h2_violation_makes_theorems_inapplicable() {
        use crate::additive::{C1Policy, C2Policy, PrimePowerFn};
        use std::sync::Arc;
        // ψ(p^k) = k² breaks the declared linear growth
        let v: PrimePowerFn = Arc::new(|_, k| BigRational::from_integer(BigInt::from(k * k)));
        let psi = AdditiveFunction::new("square", v, true, C1Policy::Declared(1.0), C2Policy::Truncated { a: 1.0, b: 0.0 });
        let profile = PsiProfile::new(&psi, tables(), 10_000);
        assert!(profile.constants.is_err());
        let reps = theorem_reports(&psi, &profile, 1000, tables(), 1.0).unwrap();
        assert!(!reps.is_empty());
        assert!(reps.iter().all(|r| !r.applicable));
    }

    #[test]
    fn sweeps_small() {
        let c2w = AdditiveFunction::omega().constants(100_000, 64).unwrap().c2;
        let c2b = AdditiveFunction::big_omega().constants(100_000, 64).unwrap().c2;
        for s in moment_sweep(20_000, tables(), c2w, c2b).unwrap() {
            assert!(s.passed(), "{s:?}");
            assert_eq!(s.checked, 20_000 - 20);
        }
        let grid = log_grid(1_000_000, 2000, 50);
        for s in prime_sweep(&grid, tables()).unwrap() {
            assert!(s.passed(), "{s:?}");
        }
        let t = tail_sweep(500, &TAIL_THETAS).unwrap();
        assert!(t.passed(), "{t:?}");
    }

    #[test]
    fn tail_sweep_matches_exact_tail() {
        // the lcm representation agrees with the direct rational tail
        let n = 300;
        let mut d = BigUint::one();
        for k in 2..=n {
            let g = num_integer::Integer::gcd(&d, &BigUint::from(k));
            d = d * BigUint::from(k) / g;
        }
        let a = |m: u64| (1..=m).fold(BigUint::zero(), |s, k| s + &d / BigUint::from(k));
        for theta in [2u64, 7, 50] {
            let j = n / theta;
            let p = BigRational::new(BigInt::from(a(n) - a(j)), BigInt::from(a(n)));
            assert_eq!(p, harmonic_tail(n, theta).unwrap());
        }
    }

    #[test]
    fn omega_counts_small() {
        let (w, b) = omega_counts(12, tables()).unwrap();
        assert_eq!(&w[1..], &[0, 1, 1, 1, 1, 2, 1, 1, 1, 2, 1, 2]);
        assert_eq!(&b[1..], &[0, 1, 1, 2, 1, 2, 1, 3, 2, 2, 1, 3]);
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(10_000, 100, 10);
        assert_eq!(g[0], 2);
        assert!(g.contains(&100) && g.contains(&1000) && g.contains(&10_000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
