//! Smallest-prime-factor sieve and the prime sums built on it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{LcmSum, Neumaier, Scalar, SumAccumulator};

pub const DEFAULT_SEGMENT: usize = 1 << 20;
pub const DEFAULT_BUDGET: u64 = 100_000_000;

const CACHE_MAGIC: &[u8; 4] = b"SPFC";
const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct SieveTables {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SieveConfig {
    pub segment: usize,
    pub budget: u64,
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig {
            segment: DEFAULT_SEGMENT,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SieveTables {
    pub fn build(limit: u64) -> Result<Self> {
        Self::build_with(limit, SieveConfig::default())
    }

    pub fn build_with(limit: u64, cfg: SieveConfig) -> Result<Self> {
        if limit < 2 {
            return invalid(format!("sieve limit must be at least 2, got {limit}"));
        }
        if cfg.segment == 0 {
            return invalid("segment size must be positive");
        }
        // entries 1..=limit; index 0 is padding
        if limit > cfg.budget || limit >= u32::MAX as u64 {
            return Err(Error::ResourceLimit {
                what: "smallest-prime-factor table",
                requested: limit,
                budget: cfg.budget,
            });
        }
        let base = simple_primes(isqrt(limit));
        let mut spf = vec![0u32; limit as usize + 1];
        spf[1] = 1;

        // Each segment only reads the shared base primes and writes its own
        // slice, so segments are independent.
        spf.par_chunks_mut(cfg.segment)
            .enumerate()
            .for_each(|(idx, chunk)| {
                let lo = (idx * cfg.segment) as u64;
                let hi = lo + chunk.len() as u64;
                for &p in &base {
                    if p * p >= hi {
                        break;
                    }
                    let start = (p * p).max(lo.div_ceil(p) * p);
                    let mut m = start;
                    while m < hi {
                        let e = &mut chunk[(m - lo) as usize];
                        if *e == 0 {
                            *e = p as u32;
                        }
                        m += p;
                    }
                }
                for (i, e) in chunk.iter_mut().enumerate() {
                    let k = lo + i as u64;
                    if k >= 2 && *e == 0 {
                        *e = k as u32;
                    }
                }
            });

        let primes = collect_primes(&spf);
        Ok(SieveTables { limit, spf, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Primes `<= n` (clamped to the sieve limit).
    pub fn primes_upto(&self, n: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= n);
        &self.primes[..end]
    }

    pub fn spf(&self, k: u64) -> Result<u64> {
        self.check_range(k)?;
        Ok(self.spf[k as usize] as u64)
    }

    pub fn is_prime(&self, k: u64) -> bool {
        k >= 2 && k <= self.limit && self.spf[k as usize] as u64 == k
    }

    fn check_range(&self, k: u64) -> Result<()> {
        if k == 0 || k > self.limit {
            return invalid(format!("{k} is outside [1, {}]", self.limit));
        }
        Ok(())
    }

    pub(crate) fn check_n(&self, n: u64) -> Result<()> {
        if n > self.limit {
            return invalid(format!("n = {n} exceeds the sieve limit {}", self.limit));
        }
        Ok(())
    }

    pub fn factorize(&self, k: u64) -> Result<Vec<(u64, u32)>> {
        self.check_range(k)?;
        let mut out = Vec::new();
        self.factor_into(k, &mut out);
        Ok(out)
    }

    /// Unchecked factorization into a reusable buffer. `k` must be in range.
    pub(crate) fn factor_into(&self, mut k: u64, out: &mut Vec<(u64, u32)>) {
        out.clear();
        while k > 1 {
            let p = self.spf[k as usize] as u64;
            let mut e = 0;
            while k % p == 0 {
                k /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }

    /// π(x) for real `x`, counting primes `<= floor(x)`.
    pub fn prime_count(&self, x: f64) -> Result<u64> {
        if !(x >= 0.0) || x > self.limit as f64 {
            return invalid(format!("x = {x} outside [0, {}]", self.limit));
        }
        let m = x.floor() as u64;
        Ok(self.primes.partition_point(|&p| p <= m) as u64)
    }

    fn check_sum_range(&self, n: u64) -> Result<()> {
        if n < 2 || n > self.limit {
            return invalid(format!("n = {n} outside [2, {}]", self.limit));
        }
        Ok(())
    }

    /// Σ_{p ≤ n} log(p)/p.
    pub fn mertens_log_sum(&self, n: u64) -> Result<f64> {
        self.check_sum_range(n)?;
        Ok(self
            .primes_upto(n)
            .iter()
            .map(|&p| (p as f64).ln() / p as f64)
            .collect::<Neumaier>()
            .total())
    }

    /// Σ_{p ≤ n} 1/p.
    pub fn mertens_recip_sum(&self, n: u64) -> Result<f64> {
        self.check_sum_range(n)?;
        Ok(self
            .primes_upto(n)
            .iter()
            .map(|&p| 1.0 / p as f64)
            .collect::<Neumaier>()
            .total())
    }

    /// ∏_{p ≤ n} (1 − 1/p), exact for the rational backend.
    pub fn euler_product<P: Scalar>(&self, n: u64) -> Result<P> {
        self.check_sum_range(n)?;
        if P::EXACT {
            Ok(P::from_rational(&self.euler_product_exact(n)?))
        } else {
            // summing logs keeps the relative error at O(eps·log π(n))
            let s = self
                .primes_upto(n)
                .iter()
                .map(|&p| (-1.0 / p as f64).ln_1p())
                .collect::<Neumaier>()
                .total();
            Ok(P::from_f64(s.exp()))
        }
    }

    pub fn euler_product_exact(&self, n: u64) -> Result<BigRational> {
        self.check_sum_range(n)?;
        let ps = self.primes_upto(n);
        let num = product_tree(ps.iter().map(|&p| p - 1).collect());
        let den = product_tree(ps.to_vec());
        Ok(BigRational::new(num, den))
    }

    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.limit.to_le_bytes())?;
        for &e in &self.spf {
            w.write_all(&e.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a cache file; `expected_limit`, when given, must match the header.
    pub fn load_cache(path: &Path, expected_limit: Option<u64>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::Cache("truncated header".into()))?;
        if &header[0..4] != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let limit = u64::from_le_bytes(header[8..16].try_into().unwrap());
        if let Some(want) = expected_limit {
            if want != limit {
                return Err(Error::Cache(format!("limit {limit} does not match requested {want}")));
            }
        }
        if limit < 2 || limit >= u32::MAX as u64 {
            return Err(Error::Cache(format!("implausible limit {limit}")));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() as u64 != 4 * (limit + 1) {
            return Err(Error::Cache(format!(
                "expected {} table bytes, found {}",
                4 * (limit + 1),
                bytes.len()
            )));
        }
        let spf: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        for k in 2..=limit as usize {
            let p = spf[k] as usize;
            if p < 2 || k % p != 0 || (p != k && spf[p] as usize != p) {
                return Err(Error::Cache(format!("entry {k} is not a smallest prime factor")));
            }
        }
        let primes = collect_primes(&spf);
        Ok(SieveTables { limit, spf, primes })
    }
}

fn collect_primes(spf: &[u32]) -> Vec<u64> {
    spf.iter()
        .enumerate()
        .skip(2)
        .filter(|&(k, &e)| e as usize == k)
        .map(|(k, _)| k as u64)
        .collect()
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn simple_primes(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += i;
            }
        }
    }
    out
}

pub(crate) fn product_tree(mut xs: Vec<u64>) -> BigInt {
    if xs.is_empty() {
        return BigInt::one();
    }
    let mut level: Vec<BigInt> = xs.drain(..).map(BigInt::from).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { &c[0] * &c[1] } else { c[0].clone() })
            .collect();
    }
    level.pop().unwrap()
}

/// L_n = Σ_{j ≤ n} 1/j exactly.
pub fn harmonic_exact(n: u64) -> BigRational {
    let mut acc = LcmSum::default();
    for j in 1..=n {
        acc.add_ratio(1, j);
    }
    acc.value()
}

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// B = lim (Σ_{p≤n} 1/p − log log n).
pub const MERTENS_CONSTANT: f64 = 0.261_497_212_847_642_8;

pub fn harmonic_f64(n: u64) -> f64 {
    if n <= 10_000_000 {
        // smallest terms first
        return (1..=n).rev().map(|j| 1.0 / j as f64).collect::<Neumaier>().total();
    }
    let x = n as f64;
    let x2 = x * x;
    x.ln() + EULER_GAMMA + 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use proptest::prelude::*;

    fn trial_division_is_prime(k: u64) -> bool {
        k >= 2 && (2..k).take_while(|d| d * d <= k).all(|d| k % d != 0)
    }

    #[test]
    fn small_sieve() {
        let t = SieveTables::build(10).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7]);
        let t = SieveTables::build(100).unwrap();
        let oracle = (2..=100).filter(|&k| trial_division_is_prime(k)).count();
        assert_eq!(t.primes().len(), oracle);
        assert_eq!(oracle, 25);
        assert!(matches!(SieveTables::build(1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = SieveConfig { segment: 64, budget: 1000 };
        let e = SieveTables::build_with(5000, cfg).unwrap_err();
        assert!(matches!(e, Error::ResourceLimit { budget: 1000, .. }));
    }

    #[test]
    fn tiny_segments_agree() {
        let a = SieveTables::build(20_000).unwrap();
        let b = SieveTables::build_with(20_000, SieveConfig { segment: 7, budget: DEFAULT_BUDGET }).unwrap();
        assert_eq!(a.spf, b.spf);
        assert_eq!(a.primes, b.primes);
    }

    #[test]
    fn spf_invariants() {
        let t = SieveTables::build(50_000).unwrap();
        for k in 2..=50_000u64 {
            let p = t.spf(k).unwrap();
            assert_eq!(k % p, 0);
            assert!(trial_division_is_prime(p));
            assert_eq!(p == k, trial_division_is_prime(k));
            assert!((2..p).take_while(|d| d * d <= k).all(|d| k % d != 0));
        }
        let listed: Vec<u64> = (2..=50_000).filter(|&k| t.spf(k).unwrap() == k).collect();
        assert_eq!(listed, t.primes());
    }

    #[test]
    fn factorize_examples() {
        let t = SieveTables::build(100).unwrap();
        assert_eq!(t.factorize(54).unwrap(), vec![(2, 1), (3, 3)]);
        assert_eq!(t.factorize(1).unwrap(), vec![]);
        assert_eq!(t.factorize(97).unwrap(), vec![(97, 1)]);
        assert!(t.factorize(0).is_err());
        assert!(t.factorize(101).is_err());
    }

    #[test]
    fn factorize_roundtrip() {
        let t = SieveTables::build(100_000).unwrap();
        for k in 1..=100_000u64 {
            let f = t.factorize(k).unwrap();
            assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(f.iter().all(|&(_, e)| e >= 1));
            assert_eq!(f.iter().map(|&(p, e)| p.pow(e)).product::<u64>(), k);
        }
    }

    #[test]
    fn prime_count_examples() {
        let t = SieveTables::build(1000).unwrap();
        assert_eq!(t.prime_count(10.0).unwrap(), 4);
        let oracle = (2..=229).filter(|&k| trial_division_is_prime(k)).count() as u64;
        assert_eq!(t.prime_count(229.0).unwrap(), oracle);
        assert_eq!(oracle, 50);
        assert_eq!(t.prime_count(1.5).unwrap(), 0);
        assert!(t.prime_count(1000.5).is_err());
    }

    #[test]
    fn mertens_examples() {
        let t = SieveTables::build(100).unwrap();
        let oracle = 2f64.ln() / 2.0 + 3f64.ln() / 3.0 + 5f64.ln() / 5.0 + 7f64.ln() / 7.0;
        let v = t.mertens_log_sum(10).unwrap();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 1.31265).abs() < 1e-5);
        let l10 = 10f64.ln();
        assert!(v >= l10 - 2.0 && v < l10);
        assert!((t.mertens_log_sum(2).unwrap() - 2f64.ln() / 2.0).abs() < 1e-16);

        let r = t.mertens_recip_sum(10).unwrap();
        assert!((r - (0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0)).abs() < 1e-15);
        assert!(r >= l10.ln() && r <= l10.ln() + 0.262 + 2.0 / l10);
        assert_eq!(t.mertens_recip_sum(2).unwrap(), 0.5);
        assert!(t.mertens_recip_sum(1).is_err());
    }

    #[test]
    fn euler_product_examples() {
        let t = SieveTables::build(100).unwrap();
        assert_eq!(t.euler_product::<BigRational>(10).unwrap(), rat(8, 35));
        assert_eq!(t.euler_product::<BigRational>(2).unwrap(), rat(1, 2));
        assert!((t.euler_product::<f64>(10).unwrap() - 8.0 / 35.0).abs() < 1e-15);
        let l = 21f64.ln();
        let gamma = 0.577_215_664_901_532_9f64;
        assert!(t.euler_product::<f64>(21).unwrap() > (-gamma).exp() / l * (1.0 - 1.0 / (l * l)));
    }

    #[test]
    fn euler_product_matches_running_product() {
        let t = SieveTables::build(3000).unwrap();
        let mut run = BigRational::one();
        for &p in t.primes() {
            run *= rat(p as i64 - 1, p as i64);
            assert_eq!(t.euler_product_exact(p).unwrap(), run);
        }
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic_exact(10), rat(7381, 2520));
        assert_eq!(harmonic_exact(2), rat(3, 2));
        assert!((harmonic_f64(10) - 7381.0 / 2520.0).abs() < 1e-15);
        // asymptotic branch against the summed branch near the switch
        let n = 10_000_000u64;
        let x = n as f64;
        let asym = x.ln() + 0.577_215_664_901_532_9 + 0.5 / x - 1.0 / (12.0 * x * x);
        assert!((harmonic_f64(n) - asym).abs() < 1e-12);
    }

    #[test]
    fn cache_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spf.bin");
        let t = SieveTables::build(5000).unwrap();
        t.save_cache(&path).unwrap();
        let u = SieveTables::load_cache(&path, Some(5000)).unwrap();
        assert_eq!(t.spf, u.spf);
        assert!(matches!(SieveTables::load_cache(&path, Some(4000)), Err(Error::Cache(_))));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(SieveTables::load_cache(&path, None), Err(Error::Cache(_))));
    }

    proptest! {
        #[test]
        fn factorization_multiplies_back(k in 1u64..200_000) {
            let t = table_200k();
            let f = t.factorize(k).unwrap();
            prop_assert_eq!(f.iter().map(|&(p, e)| p.pow(e)).product::<u64>(), k);
            prop_assert!(f.iter().all(|&(p, _)| t.is_prime(p)));
        }

        #[test]
        fn prime_count_is_monotone(a in 0.0f64..200_000.0, b in 0.0f64..200_000.0) {
            let t = table_200k();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(t.prime_count(lo).unwrap() <= t.prime_count(hi).unwrap());
        }
    }

    fn table_200k() -> &'static SieveTables {
        static T: std::sync::OnceLock<SieveTables> = std::sync::OnceLock::new();
        T.get_or_init(|| SieveTables::build(200_000).unwrap())
    }
}
