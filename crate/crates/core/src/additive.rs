//! Additive arithmetic functions given by their values on prime powers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::primes::SieveTables;
use crate::scalar::{rational_to_f64, Neumaier};

pub type PrimePowerFn = Arc<dyn Fn(u64, u32) -> BigRational + Send + Sync>;

/// Σ_p 1/p², the prime zeta function at 2.
pub const PRIME_ZETA_2: f64 = 0.452_247_420_041_065_5;

pub const DEFAULT_PRIME_CUTOFF: u64 = 1_000_000;
pub const DEFAULT_K_CUTOFF: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum C1Policy {
    /// Caller vouches for sup_p |ψ(p)| ≤ c1; scanning only checks it.
    Declared(f64),
    /// c1 is the maximum seen over scanned primes.
    ScanAndAssert,
}

#[derive(Clone, Debug, PartialEq)]
pub enum C2Policy {
    /// c2² known in closed form; no truncation.
    ClosedForm { c2_squared: f64 },
    /// Truncated series; |ψ(p^k)| ≤ a·k + b is the declared domination used
    /// for tail bounds and checked on every evaluated term.
    Truncated { a: f64, b: f64 },
}

#[derive(Clone)]
pub struct AdditiveFunction {
    name: String,
    value: PrimePowerFn,
    integer_valued: bool,
    totally_additive: bool,
    c1: C1Policy,
    c2: C2Policy,
}

impl fmt::Debug for AdditiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdditiveFunction")
            .field("name", &self.name)
            .field("integer_valued", &self.integer_valued)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisConstants {
    pub c1: f64,
    pub c2: f64,
    pub c2_error: f64,
    pub prime_cutoff: u64,
    pub c1_declared: bool,
}

impl AdditiveFunction {
    pub fn new(
        name: impl Into<String>,
        value: PrimePowerFn,
        integer_valued: bool,
        c1: C1Policy,
        c2: C2Policy,
    ) -> Self {
        AdditiveFunction {
            name: name.into(),
            value,
            integer_valued,
            totally_additive: false,
            c1,
            c2,
        }
    }

    pub fn omega() -> Self {
        AdditiveFunction::new(
            "omega",
            Arc::new(|_, _| BigRational::one()),
            true,
            C1Policy::Declared(1.0),
            C2Policy::ClosedForm { c2_squared: PRIME_ZETA_2 },
        )
    }

    pub fn big_omega() -> Self {
        let mut f = AdditiveFunction::new(
            "big-omega",
            Arc::new(|_, k| BigRational::from_integer(BigInt::from(k))),
            true,
            C1Policy::Declared(1.0),
            C2Policy::Truncated { a: 1.0, b: 0.0 },
        );
        f.totally_additive = true;
        f
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn integer_valued(&self) -> bool {
        self.integer_valued
    }

    pub fn is_totally_additive(&self) -> bool {
        self.totally_additive
    }

    pub fn c1_policy(&self) -> &C1Policy {
        &self.c1
    }

    pub fn c2_policy(&self) -> &C2Policy {
        &self.c2
    }

    /// (a, b) with |ψ(p^k)| ≤ a·k + b. A closed-form c₂ is only used for
    /// functions bounded by c₁ on all prime powers.
    pub fn growth_bound(&self, c1: f64) -> (f64, f64) {
        match self.c2 {
            C2Policy::ClosedForm { .. } => (0.0, c1),
            C2Policy::Truncated { a, b } => (if a.is_finite() { a } else { c1 }, b),
        }
    }

    /// ψ(p^k) for k ≥ 1.
    pub fn prime_power(&self, p: u64, k: u32) -> BigRational {
        debug_assert!(k >= 1);
        (self.value)(p, k)
    }

    pub fn prime_power_f64(&self, p: u64, k: u32) -> f64 {
        rational_to_f64(&self.prime_power(p, k))
    }

    pub fn eval_factored(&self, factors: &[(u64, u32)]) -> BigRational {
        let mut s = BigRational::zero();
        for &(p, e) in factors {
            s += self.prime_power(p, e);
        }
        s
    }

    pub fn eval(&self, k: u64, tables: &SieveTables) -> Result<BigRational> {
        Ok(self.eval_factored(&tables.factorize(k)?))
    }

    /// ψ̃(p^k) = k·ψ(p). Lifting a totally additive function returns it unchanged.
    pub fn totally_additive_lift(&self) -> AdditiveFunction {
        if self.totally_additive {
            return self.clone();
        }
        let inner = self.value.clone();
        let c2 = match self.c1 {
            C1Policy::Declared(c1) => C2Policy::Truncated { a: c1, b: 0.0 },
            // growth of the lift is k·sup|ψ(p)|; without a declared sup the
            // scan below has to supply it, so be permissive here
            C1Policy::ScanAndAssert => C2Policy::Truncated { a: f64::INFINITY, b: 0.0 },
        };
        AdditiveFunction {
            name: format!("{}~", self.name),
            value: Arc::new(move |p, k| inner(p, 1) * BigRational::from_integer(BigInt::from(k))),
            integer_valued: self.integer_valued,
            totally_additive: true,
            c1: self.c1.clone(),
            c2,
        }
    }

    /// c₁ and c₂ with c₂ read as (Σ_p E[ψ(p^{ξ_p+2})²]/p²)^{1/2}.
    pub fn constants(&self, prime_cutoff: u64, k_cutoff: u32) -> Result<HypothesisConstants> {
        if prime_cutoff < 2 || k_cutoff < 2 {
            return invalid("cutoffs must be at least 2");
        }
        let tables = SieveTables::build(prime_cutoff)?;
        let primes = tables.primes();

        let mut c1_seen = 0.0f64;
        for &p in primes {
            c1_seen = c1_seen.max(self.prime_power_f64(p, 1).abs());
        }
        let (c1, c1_declared) = match self.c1 {
            C1Policy::Declared(c) => {
                if c1_seen > c * (1.0 + 1e-12) {
                    let p = primes
                        .iter()
                        .copied()
                        .find(|&p| self.prime_power_f64(p, 1).abs() > c * (1.0 + 1e-12))
                        .unwrap();
                    return Err(Error::HypothesisViolation {
                        p,
                        k: 1,
                        detail: format!("|psi(p)| exceeds the declared c1 = {c}"),
                    });
                }
                (c, true)
            }
            C1Policy::ScanAndAssert => (c1_seen, false),
        };

        let (a, b) = match self.c2 {
            C2Policy::ClosedForm { c2_squared } => {
                return Ok(HypothesisConstants {
                    c1,
                    c2: c2_squared.sqrt(),
                    c2_error: 0.0,
                    prime_cutoff,
                    c1_declared,
                })
            }
            C2Policy::Truncated { a, b } => (if a.is_finite() { a } else { c1 }, b),
        };

        let mut s = Neumaier::new();
        let mut tail = Neumaier::new();
        for &p in primes {
            let (inner, inner_tail) = self.inner_second_moment(p, k_cutoff, a, b)?;
            let w = 1.0 / (p as f64 * p as f64);
            s.push(inner * w);
            tail.push(inner_tail * w);
        }
        // E[(a(ξ+2)+b)²] decreases in p; bound every p > P by its value at P+1
        // and Σ_{m>P} 1/m² by 1/P.
        let q = 1.0 / (prime_cutoff + 1) as f64;
        let m1 = q / (1.0 - q);
        let m2 = q * (1.0 + q) / ((1.0 - q) * (1.0 - q));
        let d = 2.0 * a + b;
        let prime_tail = (a * a * m2 + 2.0 * a * d * m1 + d * d) / prime_cutoff as f64;
        tail.push(prime_tail);

        let s = s.total();
        let c2 = s.sqrt();
        let c2_error = (s + tail.total()).sqrt() - c2;
        Ok(HypothesisConstants {
            c1,
            c2,
            c2_error,
            prime_cutoff,
            c1_declared,
        })
    }

    /// E[ψ(p^{ξ+2})²] summed over ξ = 0..K, plus a bound on the rest.
    fn inner_second_moment(&self, p: u64, k_cutoff: u32, a: f64, b: f64) -> Result<(f64, f64)> {
        let q = 1.0 / p as f64;
        let mut acc = Neumaier::new();
        let mut weight = 1.0 - q;
        let dominating = |j: u32| a * (j as f64 + 2.0) + b;
        let mut j_last = k_cutoff;
        for j in 0..=k_cutoff {
            let k = j + 2;
            let v = self.prime_power_f64(p, k);
            if v.abs() > dominating(j) * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::HypothesisViolation {
                    p,
                    k,
                    detail: format!("|psi(p^k)| = {} exceeds the declared growth {a}*k + {b}", v.abs()),
                });
            }
            acc.push(weight * v * v);
            weight *= q;
            // stop once the remaining mass is negligible against the sum
            if weight * dominating(j + 1).powi(2) < 1e-30 * acc.total().max(1e-300) && j >= 2 {
                j_last = j;
                break;
            }
        }
        // terms j > j_last: ratio of consecutive bounds ≤ q·((J+4)/(J+3))²
        let j0 = j_last + 1;
        let first = (1.0 - q) * q.powi(j0 as i32) * dominating(j0).powi(2);
        let r = q * ((j0 as f64 + 3.0) / (j0 as f64 + 2.0)).powi(2);
        let tail = if r < 1.0 { first / (1.0 - r) } else { f64::INFINITY };
        Ok((acc.total(), tail))
    }

    /// Σ_{p ≤ P} Σ_{k≥2} ψ(p^k)²/p^k, truncated at k_cutoff (cross-check only).
    pub fn h2_double_series(&self, prime_cutoff: u64, k_cutoff: u32) -> Result<f64> {
        let tables = SieveTables::build(prime_cutoff)?;
        let mut acc = Neumaier::new();
        for &p in tables.primes() {
            let q = 1.0 / p as f64;
            let mut w = q * q;
            for k in 2..=k_cutoff {
                let v = self.prime_power_f64(p, k);
                acc.push(v * v * w);
                w *= q;
                if w < 1e-300 {
                    break;
                }
            }
        }
        Ok(acc.total())
    }

    /// Parses the declarative text format (see [`TableSpec`]).
    pub fn from_text(src: &str) -> Result<Self> {
        TableSpec::parse(src)?.into_function()
    }
}

/// `a·k + b` with rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub a: BigRational,
    pub b: BigRational,
}

impl Poly {
    fn at(&self, k: u32) -> BigRational {
        &self.a * BigRational::from_integer(BigInt::from(k)) + &self.b
    }
}

/// User-defined ψ.
///
/// ```text
/// # comment
/// name: my-psi
/// c1: 2                 # optional; without it c1 is scanned
/// poly: 1/2*k + 1       # default for every prime
/// poly mod 4 3: 2*k     # primes ≡ 3 (mod 4), first matching rule wins
/// 2 3 5/2               # ψ(2^3) = 5/2, overrides the rules
/// ```
/// Primes matched by no rule and no explicit line get ψ = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TableSpec {
    pub name: String,
    pub c1: Option<BigRational>,
    pub default: Option<Poly>,
    pub classes: Vec<(u64, u64, Poly)>,
    pub explicit: BTreeMap<(u64, u32), BigRational>,
}

impl TableSpec {
    pub fn parse(src: &str) -> Result<Self> {
        let mut spec = TableSpec {
            name: "user".into(),
            c1: None,
            default: None,
            classes: Vec::new(),
            explicit: BTreeMap::new(),
        };
        for (i, raw) in src.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("name:") {
                spec.name = rest.trim().to_string();
                if spec.name.is_empty() {
                    return Err(err("empty name".into()));
                }
            } else if let Some(rest) = line.strip_prefix("c1:") {
                let c = parse_rational(rest.trim()).map_err(err)?;
                if c.is_negative() {
                    return Err(err("c1 must be non-negative".into()));
                }
                spec.c1 = Some(c);
            } else if let Some(rest) = line.strip_prefix("poly mod") {
                let (head, body) = rest
                    .split_once(':')
                    .ok_or_else(|| err("expected 'poly mod M R: a*k + b'".into()))?;
                let nums: Vec<&str> = head.split_whitespace().collect();
                if nums.len() != 2 {
                    return Err(err("expected modulus and residue".into()));
                }
                let m: u64 = nums[0].parse().map_err(|_| err(format!("bad modulus '{}'", nums[0])))?;
                let r: u64 = nums[1].parse().map_err(|_| err(format!("bad residue '{}'", nums[1])))?;
                if m == 0 || r >= m {
                    return Err(err(format!("need 0 <= R < M, got M={m}, R={r}")));
                }
                spec.classes.push((m, r, parse_poly(body).map_err(err)?));
            } else if let Some(rest) = line.strip_prefix("poly:") {
                if spec.default.is_some() {
                    return Err(err("duplicate default rule".into()));
                }
                spec.default = Some(parse_poly(rest).map_err(err)?);
            } else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected 'p k value', got '{line}'")));
                }
                let p: u64 = parts[0].parse().map_err(|_| err(format!("bad prime '{}'", parts[0])))?;
                if !is_prime_small(p) {
                    return Err(err(format!("{p} is not prime")));
                }
                let k: u32 = parts[1].parse().map_err(|_| err(format!("bad exponent '{}'", parts[1])))?;
                if k == 0 {
                    return Err(err("exponent must be at least 1".into()));
                }
                let v = parse_rational(parts[2]).map_err(err)?;
                if spec.explicit.insert((p, k), v).is_some() {
                    return Err(err(format!("duplicate entry for ({p}, {k})")));
                }
            }
        }
        Ok(spec)
    }

    pub fn value(&self, p: u64, k: u32) -> BigRational {
        if let Some(v) = self.explicit.get(&(p, k)) {
            return v.clone();
        }
        if let Some((_, _, poly)) = self.classes.iter().find(|(m, r, _)| p % m == *r) {
            return poly.at(k);
        }
        self.default.as_ref().map(|d| d.at(k)).unwrap_or_else(BigRational::zero)
    }

    pub fn into_function(self) -> Result<AdditiveFunction> {
        let integer_valued = self.explicit.values().all(|v| v.is_integer())
            && self
                .default
                .iter()
                .chain(self.classes.iter().map(|c| &c.2))
                .all(|p| p.a.is_integer() && p.b.is_integer());
        // growth a·k + b dominating every rule and explicit value
        let polys: Vec<&Poly> = self.default.iter().chain(self.classes.iter().map(|c| &c.2)).collect();
        let a = polys.iter().map(|p| rational_to_f64(&p.a).abs()).fold(0.0, f64::max);
        let b = polys
            .iter()
            .map(|p| rational_to_f64(&p.b).abs())
            .chain(self.explicit.values().map(|v| rational_to_f64(v).abs()))
            .fold(0.0, f64::max);
        let c1 = match &self.c1 {
            Some(c) => C1Policy::Declared(rational_to_f64(c)),
            None => C1Policy::ScanAndAssert,
        };
        let name = self.name.clone();
        let spec = Arc::new(self);
        Ok(AdditiveFunction::new(
            name,
            Arc::new(move |p, k| spec.value(p, k)),
            integer_valued,
            c1,
            C2Policy::Truncated { a, b },
        ))
    }
}

impl fmt::Display for TableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name: {}", self.name)?;
        if let Some(c) = &self.c1 {
            writeln!(f, "c1: {c}")?;
        }
        if let Some(d) = &self.default {
            writeln!(f, "poly: {}*k + {}", d.a, d.b)?;
        }
        for (m, r, p) in &self.classes {
            writeln!(f, "poly mod {m} {r}: {}*k + {}", p.a, p.b)?;
        }
        for ((p, k), v) in &self.explicit {
            writeln!(f, "{p} {k} {v}")?;
        }
        Ok(())
    }
}

fn is_prime_small(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d: &u64| d * d <= p).all(|d| p % d != 0)
}

/// Integers, `num/den`, and finite decimals, all read exactly.
pub fn parse_rational(s: &str) -> std::result::Result<BigRational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in '{s}'"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in '{s}'"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in '{s}'"));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad decimal '{s}'"));
        }
        let neg = int.starts_with('-');
        let digits: BigInt = format!("{}{}", int.trim_start_matches(['-', '+']), frac)
            .parse()
            .map_err(|_| format!("bad decimal '{s}'"))?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let v = BigRational::new(digits, den);
        return Ok(if neg { -v } else { v });
    }
    s.parse::<BigInt>()
        .map(BigRational::from_integer)
        .map_err(|_| format!("bad number '{s}'"))
}

fn parse_poly(body: &str) -> std::result::Result<Poly, String> {
    let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err("empty polynomial".into());
    }
    let mut a = BigRational::zero();
    let mut b = BigRational::zero();
    // split into signed terms, keeping '/' and '*' inside terms
    let mut terms = Vec::new();
    let mut cur = String::new();
    let mut prev: Option<char> = None;
    for c in compact.chars() {
        // a sign directly after an operator belongs to the next term
        if (c == '+' || c == '-') && prev.is_some_and(|q| !"+-*/".contains(q)) {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(c);
        prev = Some(c);
    }
    terms.push(cur);
    for t in terms {
        let mut neg = false;
        let mut body = t.as_str();
        while let Some(c) = body.chars().next().filter(|c| *c == '+' || *c == '-') {
            neg ^= c == '-';
            body = &body[1..];
        }
        let (coef, is_k) = if body == "k" {
            (BigRational::one(), true)
        } else if let Some(c) = body.strip_suffix("*k") {
            (parse_rational(c)?, true)
        } else {
            (parse_rational(body)?, false)
        };
        let coef = if neg { -coef } else { coef };
        if is_k {
            a += coef;
        } else {
            b += coef;
        }
    }
    Ok(Poly { a, b })
}

#[cfg(test)]
fn rational_to_i64(v: &BigRational) -> Option<i64> {
    if v.is_integer() {
        num_traits::ToPrimitive::to_i64(v.numer())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use num_integer::Integer;
    use proptest::prelude::*;

    fn tables() -> &'static SieveTables {
        static T: std::sync::OnceLock<SieveTables> = std::sync::OnceLock::new();
        T.get_or_init(|| SieveTables::build(1_000_000).unwrap())
    }

    #[test]
    fn builtin_values() {
        let t = tables();
        let w = AdditiveFunction::omega();
        let big = AdditiveFunction::big_omega();
        assert_eq!(w.eval(54, t).unwrap(), rat_int(2));
        assert_eq!(big.eval(12, t).unwrap(), rat_int(3));
        assert_eq!(big.eval(32, t).unwrap(), rat_int(5));
        for p in [2, 3, 97] {
            for k in 1..10 {
                assert_eq!(w.prime_power(p, k), rat_int(1));
            }
        }
        assert_eq!(w.eval(1, t).unwrap(), rat_int(0));
        assert!(w.eval(0, t).is_err());
    }

    #[test]
    fn lift_of_omega_is_big_omega() {
        let lift = AdditiveFunction::omega().totally_additive_lift();
        let big = AdditiveFunction::big_omega();
        for &p in &tables().primes()[..200] {
            for k in 1..12 {
                assert_eq!(lift.prime_power(p, k), big.prime_power(p, k));
            }
        }
        assert_eq!(lift.name(), "omega~");
        let again = lift.totally_additive_lift();
        assert_eq!(again.name(), "omega~");
        assert_eq!(again.prime_power(5, 3), rat_int(3));
    }

    #[test]
    fn lift_agrees_at_exponent_one() {
        let f = AdditiveFunction::from_text("poly: 3/2*k - 1\n2 1 7\n").unwrap();
        let lift = f.totally_additive_lift();
        for p in [2u64, 3, 5, 7, 11] {
            assert_eq!(lift.prime_power(p, 1), f.prime_power(p, 1));
            assert_eq!(lift.prime_power(p, 4), f.prime_power(p, 1) * rat_int(4));
        }
    }

    #[test]
    fn omega_constants() {
        let c = AdditiveFunction::omega().constants(DEFAULT_PRIME_CUTOFF, DEFAULT_K_CUTOFF).unwrap();
        assert_eq!(c.c1, 1.0);
        assert!((c.c2 - 0.67249).abs() < 1e-5);
        assert_eq!(c.c2_error, 0.0);
    }

    #[test]
    fn omega_closed_form_matches_truncation() {
        // ψ ≡ 1 through the truncated route must approach √P(2)
        let f = AdditiveFunction::from_text("c1: 1\npoly: 0*k + 1").unwrap();
        let c = f.constants(DEFAULT_PRIME_CUTOFF, DEFAULT_K_CUTOFF).unwrap();
        assert!(c.c2 <= PRIME_ZETA_2.sqrt() + 1e-12);
        assert!(c.c2 + c.c2_error >= PRIME_ZETA_2.sqrt() - 1e-12);
        assert!(c.c2_error < 1e-5);
    }

    #[test]
    fn big_omega_constants_from_geometric_moments() {
        // E[(ξ+2)²] = (p+1)/(p-1)² + 4/(p-1) + 4
        let t = tables();
        let oracle: f64 = t
            .primes()
            .iter()
            .map(|&p| {
                let pf = p as f64;
                let e = (pf + 1.0) / ((pf - 1.0) * (pf - 1.0)) + 4.0 / (pf - 1.0) + 4.0;
                e / (pf * pf)
            })
            .sum();
        let c = AdditiveFunction::big_omega().constants(DEFAULT_PRIME_CUTOFF, DEFAULT_K_CUTOFF).unwrap();
        assert!((c.c2 * c.c2 - oracle).abs() < 1e-10);
        assert!((11.0f64 / 4.0) < c.c2 * c.c2);
        assert_eq!(c.c1, 1.0);
    }

    #[test]
    fn divergent_h2_is_rejected() {
        let f = AdditiveFunction::new(
            "bad",
            Arc::new(|p, k| if k == 2 { rat_int(p as i64) } else { rat_int(0) }),
            true,
            C1Policy::Declared(1.0),
            C2Policy::Truncated { a: 1.0, b: 1.0 },
        );
        match f.constants(10_000, 64) {
            Err(Error::HypothesisViolation { k: 2, p, .. }) => assert!(p >= 3),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn declared_c1_is_enforced() {
        let f = AdditiveFunction::from_text("c1: 1\npoly: 0*k + 1\n7 1 2").unwrap();
        assert!(matches!(f.constants(100, 8), Err(Error::HypothesisViolation { p: 7, k: 1, .. })));
        let g = AdditiveFunction::from_text("poly: 0*k + 1\n7 1 2").unwrap();
        let c = g.constants(100, 8).unwrap();
        assert_eq!(c.c1, 2.0);
        assert!(!c.c1_declared);
    }

    #[test]
    fn c2_error_is_monotone() {
        let f = AdditiveFunction::big_omega();
        let mut last = f64::INFINITY;
        for cut in [100u64, 1000, 10_000, 100_000] {
            let c = f.constants(cut, 8).unwrap();
            assert!(c.c2_error <= last);
            last = c.c2_error;
        }
        let mut last = f64::INFINITY;
        for k in [2u32, 4, 8, 16, 64] {
            let c = f.constants(1000, k).unwrap();
            assert!(c.c2_error <= last + 1e-18);
            last = c.c2_error;
        }
    }

    #[test]
    fn double_series_cross_check() {
        // E[ψ(p^{ξ+2})²]/p² = (1 − 1/p) Σ_{k≥2} ψ(p^k)²/p^k, so c₂² ≤ d ≤ 2c₂²
        let f = AdditiveFunction::big_omega();
        let d = f.h2_double_series(10_000, 64).unwrap();
        let c = f.constants(10_000, 64).unwrap();
        let c2sq = c.c2 * c.c2;
        assert!(c2sq <= d * (1.0 + 1e-12) && d <= 2.0 * c2sq * (1.0 + 1e-12), "{d} vs {c2sq}");
        // p = 2 alone: Σ_{k≥2} k²/2^k = 11/2
        let two = AdditiveFunction::big_omega().h2_double_series(2, 64).unwrap();
        assert!((two - 5.5).abs() < 1e-12);
    }

    #[test]
    fn text_format() {
        let src = "# demo\nname: demo\nc1: 3/2\npoly: 1/2*k + 1\npoly mod 4 3: 2*k - 1\n2 3 5/2\n";
        let spec = TableSpec::parse(src).unwrap();
        assert_eq!(spec.value(2, 3), rat(5, 2));
        assert_eq!(spec.value(2, 2), rat(2, 1));
        assert_eq!(spec.value(7, 2), rat(3, 1));
        assert_eq!(spec.value(5, 1), rat(3, 2));
        let again = TableSpec::parse(&spec.to_string()).unwrap();
        assert_eq!(spec, again);
        let f = spec.into_function().unwrap();
        assert_eq!(f.name(), "demo");
        assert!(!f.integer_valued());
        assert_eq!(parse_rational("-0.25").unwrap(), rat(-1, 4));
    }

    #[test]
    fn text_format_errors() {
        for (src, line) in [
            ("poly: 1*k\npoly: 2", 2),
            ("4 1 1", 1),
            ("2 0 1", 1),
            ("\n\n2 1 1/0", 3),
            ("poly mod 4 4: k", 1),
            ("2 1", 1),
        ] {
            match TableSpec::parse(src) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn additivity_on_coprime_pairs(a in 1u64..1000, b in 1u64..1000) {
            prop_assume!(a.gcd(&b) == 1);
            let t = tables();
            let f = AdditiveFunction::from_text("poly: 3/7*k - 2\npoly mod 3 1: k\n5 2 11/3").unwrap();
            for psi in [AdditiveFunction::omega(), AdditiveFunction::big_omega(), f] {
                prop_assert_eq!(
                    psi.eval(a * b, t).unwrap(),
                    psi.eval(a, t).unwrap() + psi.eval(b, t).unwrap()
                );
            }
        }

        #[test]
        fn omega_le_big_omega_le_log2(k in 1u64..1_000_000) {
            let t = tables();
            let w = rational_to_i64(&AdditiveFunction::omega().eval(k, t).unwrap()).unwrap();
            let big = rational_to_i64(&AdditiveFunction::big_omega().eval(k, t).unwrap()).unwrap();
            prop_assert!(w <= big);
            prop_assert!((big as f64) <= (k as f64).log2() + 1e-12);
        }

        #[test]
        fn integer_flag_is_truthful(num in -20i64..20, den in 1i64..5) {
            let src = format!("poly: {num}/{den}*k + 1");
            let f = AdditiveFunction::from_text(&src).unwrap();
            let all_int = (1..6).all(|k| f.prime_power(3, k).is_integer());
            if f.integer_valued() { prop_assert!(all_int); }
        }
    }
}
