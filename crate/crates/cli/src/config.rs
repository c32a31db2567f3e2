//! Command-line flags, the optional JSON config they override, and value parsing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ekac::AdditiveFunction;

#[derive(Parser, Debug)]
#[command(name = "ekac", version, about = "Exact laws, couplings and distance-bound checks for additive arithmetic functions")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Unset flags fall back to `--config`,
/// then to the per-command default.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// Additive function: omega, big-omega or file:<path>
    #[arg(long, global = true)]
    pub psi: Option<String>,
    /// Problem size n (accepts 1e6, 10^6, 1_000_000)
    #[arg(long, global = true, value_parser = parse_count)]
    pub n: Option<u64>,
    /// Sieve limit; defaults to the largest n the command needs
    #[arg(long, global = true, value_parser = parse_count)]
    pub limit: Option<u64>,
    /// Load the sieve from this cache file instead of building it
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Seed for stochastic commands
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of draws for stochastic commands
    #[arg(long, global = true, value_parser = parse_count)]
    pub samples: Option<u64>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write data here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (stochastic output is bit-reproducible at any count)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON file with defaults for any of these flags; flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the smallest-prime-factor sieve, optionally saving it as a cache
    Sieve {
        /// Write the sieve cache here
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Exact law of ψ under a family, with the normalizers
    Dist {
        #[arg(long, value_enum, default_value = "uniform")]
        family: FamilyArg,
        /// Weight for --family weighted
        #[arg(long, value_enum, default_value = "inverse-square")]
        weight: WeightArg,
        /// Use floating-point probabilities even when exact ones are affordable
        #[arg(long)]
        float: bool,
    },
    /// Distance from the law of ψ to its Gaussian or Poisson approximation
    Distance {
        #[arg(long, value_enum, default_value = "uniform")]
        family: FamilyArg,
        #[arg(long, value_enum, default_value = "inverse-square")]
        weight: WeightArg,
        #[arg(long, value_enum, default_value = "gaussian")]
        target: Target,
        /// Gaussian centering and scale: (μ_n, σ_n) or (loglog n, √loglog n)
        #[arg(long, value_enum, default_value = "natural")]
        normalization: Normalization,
    },
    /// Draws from the H_n rejection sampler, the coupling, or the Poisson embedding
    Sample {
        #[arg(long, value_enum, default_value = "hn")]
        what: SampleKind,
        /// Largest mark k for --what eta
        #[arg(long, default_value_t = ekac::poisson_embed::DEFAULT_K_MAX)]
        k_max: u32,
    },
    /// Every applicable bound check over a grid of n; exit 1 on any failure
    Verify {
        /// Comma-separated n values, or log:<lo>:<hi>:<points per decade>
        #[arg(long)]
        grid: Option<String>,
        /// Multiply every right-hand side before comparing
        #[arg(long, value_parser = parse_scale)]
        rhs_scale: Option<f64>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum FamilyArg {
    Uniform,
    Harmonic,
    Weighted,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum WeightArg {
    Harmonic,
    InverseSquare,
    DivisorOverSquare,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Target {
    Gaussian,
    Poisson,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Normalization {
    Natural,
    Loglog,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SampleKind {
    /// H_n by conditioning independent geometrics
    Hn,
    /// (H_n, Q) with Q uniform on [n/H_n]
    Coupling,
    /// The Poisson point process and Y + R for ψ
    Eta,
}

/// Keys accepted in `--config`; same meaning as the flags.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    psi: Option<String>,
    n: Option<serde_json::Value>,
    limit: Option<serde_json::Value>,
    cache: Option<PathBuf>,
    seed: Option<u64>,
    samples: Option<serde_json::Value>,
    format: Option<Format>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    grid: Option<String>,
    rhs_scale: Option<f64>,
}

fn count_value(v: Option<serde_json::Value>, key: &str) -> anyhow::Result<Option<u64>> {
    match v {
        None => Ok(None),
        Some(serde_json::Value::Number(x)) => match x.as_u64() {
            Some(u) => Ok(Some(u)),
            None => bail!("config key {key}: expected a non-negative integer"),
        },
        Some(serde_json::Value::String(s)) => parse_count(&s).map(Some).map_err(anyhow::Error::msg),
        Some(_) => bail!("config key {key}: expected a number or string"),
    }
}

/// Verify-only keys that can also come from the config file.
#[derive(Debug, Default)]
pub struct Extra {
    pub grid: Option<String>,
    pub rhs_scale: Option<f64>,
}

impl Common {
    /// Fills every unset flag from the config file.
    pub fn merge_config(mut self) -> anyhow::Result<(Common, Extra)> {
        let Some(path) = self.config.clone() else {
            return Ok((self, Extra::default()));
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let f: FileConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        self.psi = self.psi.or(f.psi);
        self.n = self.n.or(count_value(f.n, "n")?);
        self.limit = self.limit.or(count_value(f.limit, "limit")?);
        self.cache = self.cache.or(f.cache);
        self.seed = self.seed.or(f.seed);
        self.samples = self.samples.or(count_value(f.samples, "samples")?);
        self.format = self.format.or(f.format);
        self.out = self.out.or(f.out);
        self.workers = self.workers.or(f.workers);
        Ok((
            self,
            Extra {
                grid: f.grid,
                rhs_scale: f.rhs_scale,
            },
        ))
    }

    pub fn psi(&self) -> anyhow::Result<AdditiveFunction> {
        parse_psi(self.psi.as_deref().unwrap_or("omega"))
    }
}

pub fn parse_psi(s: &str) -> anyhow::Result<AdditiveFunction> {
    match s {
        "omega" => Ok(AdditiveFunction::omega()),
        "big-omega" => Ok(AdditiveFunction::big_omega()),
        _ => match s.strip_prefix("file:") {
            Some(p) => load_psi(Path::new(p)),
            None => bail!("unknown --psi '{s}' (expected omega, big-omega or file:<path>)"),
        },
    }
}

fn load_psi(path: &Path) -> anyhow::Result<AdditiveFunction> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(AdditiveFunction::from_text(&text)?)
}

/// Non-negative integers written plainly, with underscores, as 1e6 or 10^6.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    let bad = || format!("'{s}' is not a non-negative integer");
    if let Some((m, e)) = t.split_once(['e', 'E']) {
        let m: u64 = m.parse().map_err(|_| bad())?;
        let e: u32 = e.parse().map_err(|_| bad())?;
        return 10u64.checked_pow(e).and_then(|p| p.checked_mul(m)).ok_or_else(bad);
    }
    if let Some((b, e)) = t.split_once('^') {
        let b: u64 = b.parse().map_err(|_| bad())?;
        let e: u32 = e.parse().map_err(|_| bad())?;
        return b.checked_pow(e).ok_or_else(bad);
    }
    t.parse().map_err(|_| bad())
}

fn parse_scale(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("'{s}' is not a finite non-negative number")),
    }
}

/// Grid syntax: `a,b,c` or `log:lo:hi:k` (k points per decade, lo and hi included).
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, k] = parts.as_slice() else {
            bail!("log grid must be log:<lo>:<hi>:<points per decade>");
        };
        let lo = parse_count(lo).map_err(anyhow::Error::msg)?;
        let hi = parse_count(hi).map_err(anyhow::Error::msg)?;
        let k: u32 = k.parse().context("points per decade")?;
        if lo < 2 || hi < lo || k == 0 {
            bail!("log grid needs 2 <= lo <= hi and at least one point per decade");
        }
        let mut g = vec![lo, hi];
        let mut j = 0u32;
        loop {
            let x = 10f64.powf(j as f64 / k as f64).round() as u64;
            if x > hi {
                break;
            }
            if x >= lo {
                g.push(x);
            }
            j += 1;
        }
        g.sort_unstable();
        g.dedup();
        return Ok(g);
    }
    s.split(',')
        .map(|x| parse_count(x).map_err(anyhow::Error::msg))
        .collect()
}
