mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::Parser;
use rand::Rng as _;
use serde_json::json;

use config::{Cli, Command, Common, Extra, FamilyArg, Format, Normalization, SampleKind, Target, WeightArg};
use ekac::conditioned::{self, MultiplicativeWeight};
use ekac::laws::{self, Normalizers};
use ekac::metrics::{self, DistanceResult};
use ekac::poisson_embed::{self, EtaSampler};
use ekac::{bounds, rng, AdditiveFunction, BigRational, DiscreteLaw, Error, SieveTables};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

/// Exact rational probabilities up to this n unless `--float`.
const EXACT_DIST_LIMIT: u64 = 100_000;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version go to stdout with status 0, errors exit 2
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::ResourceLimit { .. }) => EXIT_RESOURCE,
        Some(Error::StatisticalAnomaly(_)) | Some(Error::Numeric(_)) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let (common, extra) = cli.common.merge_config()?;
    if let Some(w) = common.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Sieve { save } => cmd_sieve(&common, save),
        Command::Dist { family, weight, float } => cmd_dist(&common, family, weight, float),
        Command::Distance {
            family,
            weight,
            target,
            normalization,
        } => cmd_distance(&common, family, weight, target, normalization),
        Command::Sample { what, k_max } => cmd_sample(&common, what, k_max),
        Command::Verify { grid, rhs_scale } => cmd_verify(&common, extra, grid, rhs_scale),
    }
}

fn format(c: &Common) -> Format {
    c.format.unwrap_or(Format::Csv)
}

fn emit(c: &Common, data: &str) -> anyhow::Result<()> {
    match &c.out {
        Some(path) => std::fs::write(path, data).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(data.as_bytes())?,
    }
    Ok(())
}

fn json_text(v: &serde_json::Value) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn require_n(c: &Common) -> anyhow::Result<u64> {
    match c.n {
        Some(0) => Err(Error::InvalidArgument("n must be at least 1".into()).into()),
        Some(n) => Ok(n),
        None => Err(Error::InvalidArgument("--n is required".into()).into()),
    }
}

/// Sieve covering `need`: from `--cache` when given, else built to `--limit`
/// (default `need`, at least 2).
fn tables_for(c: &Common, need: u64) -> anyhow::Result<SieveTables> {
    if let Some(l) = c.limit {
        if need > l {
            return Err(Error::InvalidArgument(format!("n = {need} exceeds --limit {l}")).into());
        }
    }
    let t0 = Instant::now();
    let t = match &c.cache {
        Some(path) => SieveTables::load_cache(path, c.limit)?,
        None => SieveTables::build(c.limit.unwrap_or(need).max(2))?,
    };
    if t.limit() < need {
        return Err(Error::InvalidArgument(format!("sieve limit {} is below n = {need}", t.limit())).into());
    }
    eprintln!("sieve to {} ready in {:.2}s", t.limit(), t0.elapsed().as_secs_f64());
    Ok(t)
}

fn cmd_sieve(c: &Common, save: Option<std::path::PathBuf>) -> anyhow::Result<u8> {
    let limit = c.limit.or(c.n).ok_or_else(|| Error::InvalidArgument("--limit is required".into()))?;
    let t = tables_for(c, limit)?;
    if let Some(path) = save {
        t.save_cache(&path)?;
        eprintln!("wrote {}", path.display());
    }
    let largest = t.primes().last().copied().unwrap_or(0);
    let out = match format(c) {
        Format::Json => json_text(&json!({
            "limit": t.limit(),
            "prime_count": t.primes().len(),
            "largest_prime": largest,
        }))?,
        Format::Csv => format!("limit,prime_count,largest_prime\n{},{},{largest}\n", t.limit(), t.primes().len()),
    };
    emit(c, &out)?;
    Ok(0)
}

fn weight_of(w: WeightArg) -> MultiplicativeWeight {
    match w {
        WeightArg::Harmonic => MultiplicativeWeight::harmonic(),
        WeightArg::InverseSquare => MultiplicativeWeight::inverse_square(),
        WeightArg::DivisorOverSquare => MultiplicativeWeight::divisor_over_square(),
    }
}

fn family_name(f: FamilyArg) -> &'static str {
    match f {
        FamilyArg::Uniform => "uniform",
        FamilyArg::Harmonic => "harmonic",
        FamilyArg::Weighted => "weighted",
    }
}

fn law<P: ekac::Scalar>(
    psi: &AdditiveFunction,
    n: u64,
    t: &SieveTables,
    family: FamilyArg,
    weight: WeightArg,
) -> anyhow::Result<DiscreteLaw<P>> {
    Ok(match family {
        FamilyArg::Uniform => laws::law_uniform(psi, n, t)?,
        FamilyArg::Harmonic => laws::law_harmonic(psi, n, t)?,
        FamilyArg::Weighted => laws::law_weighted(psi, n, &weight_of(weight), t)?,
    })
}

fn normalizer_json(z: &Normalizers<f64>) -> serde_json::Value {
    json!({ "mu": z.mu, "sigma": z.sigma(), "lambda": z.lambda, "l_n": z.l_n })
}

fn cmd_dist(c: &Common, family: FamilyArg, weight: WeightArg, float: bool) -> anyhow::Result<u8> {
    let n = require_n(c)?;
    let psi = c.psi()?;
    let t = tables_for(c, n)?;
    let z = laws::normalizers::<f64>(&psi, n, &t)?;
    eprintln!(
        "n = {n}: mu_n = {} sigma_n = {} lambda_n = {} L_n = {}",
        z.mu,
        z.sigma(),
        z.lambda,
        z.l_n
    );
    let exact = !float && n <= EXACT_DIST_LIMIT;
    let mut buf = Vec::new();
    let law_json = if exact {
        let l: DiscreteLaw<BigRational> = law(&psi, n, &t, family, weight)?;
        laws::write_csv(&l, &mut buf)?;
        laws::to_json(&l)
    } else {
        let l: DiscreteLaw<f64> = law(&psi, n, &t, family, weight)?;
        laws::write_csv(&l, &mut buf)?;
        laws::to_json(&l)
    };
    let out = match format(c) {
        Format::Csv => String::from_utf8(buf)?,
        Format::Json => json_text(&json!({
            "psi": psi.name(),
            "n": n,
            "family": family_name(family),
            "normalizers": normalizer_json(&z),
            "law": law_json,
        }))?,
    };
    emit(c, &out)?;
    Ok(0)
}

fn cmd_distance(
    c: &Common,
    family: FamilyArg,
    weight: WeightArg,
    target: Target,
    norm: Normalization,
) -> anyhow::Result<u8> {
    let n = require_n(c)?;
    let psi = c.psi()?;
    let t = tables_for(c, n)?;
    let z = laws::normalizers::<f64>(&psi, n, &t)?;
    let l: DiscreteLaw<f64> = law(&psi, n, &t, family, weight)?;
    let rows: Vec<(&str, DistanceResult)> = match target {
        Target::Gaussian => {
            let (m, s) = match norm {
                Normalization::Natural => (z.mu, z.sigma_checked()?),
                Normalization::Loglog => {
                    if n < 16 {
                        return Err(Error::InvalidArgument("loglog normalization needs n >= 16".into()).into());
                    }
                    let ll = (n as f64).ln().ln();
                    (ll, ll.sqrt())
                }
            };
            let dk = metrics::dk_vs_gaussian(&l, m, s)?;
            let mut d1 = metrics::w1_vs_gaussian(&l, m, s)?;
            d1.value /= s;
            d1.error_bound /= s;
            vec![("kolmogorov", dk), ("wasserstein", d1)]
        }
        Target::Poisson => {
            if !laws::is_n0_valued(&l) {
                return Err(Error::InvalidArgument(format!("{} does not take values in N0", psi.name())).into());
            }
            vec![
                ("total-variation", metrics::tv_vs_poisson(&l, z.lambda)?),
                ("kolmogorov", metrics::dk_vs_poisson(&l, z.lambda)?),
            ]
        }
    };
    let method = |r: &DistanceResult| serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from));
    let out = match format(c) {
        Format::Csv => {
            let mut s = String::from("metric,value,error_bound,method\n");
            for (name, r) in &rows {
                writeln!(s, "{name},{:e},{:e},{}", r.value, r.error_bound, method(r).unwrap_or_default())?;
            }
            s
        }
        Format::Json => json_text(&json!({
            "psi": psi.name(),
            "n": n,
            "family": family_name(family),
            "normalizers": normalizer_json(&z),
            "distances": rows.iter().map(|(k, r)| json!({
                "metric": k, "value": r.value, "error_bound": r.error_bound, "method": method(r),
            })).collect::<Vec<_>>(),
        }))?,
    };
    emit(c, &out)?;
    Ok(0)
}

/// Rows of a sample table: header and one line per draw.
struct Table {
    header: &'static str,
    rows: Vec<Vec<String>>,
}

fn cmd_sample(c: &Common, what: SampleKind, k_max: u32) -> anyhow::Result<u8> {
    let seed = c
        .seed
        .ok_or_else(|| Error::InvalidArgument("--seed is required for sampling".into()))?;
    let n = require_n(c)?;
    let samples = c.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(Error::InvalidArgument("--samples must be positive".into()).into());
    }
    let t = tables_for(c, n)?;
    let table = match what {
        SampleKind::Hn => Table {
            header: "draw,value,trials",
            rows: conditioned::sample_hn_batch(n, samples, seed, &t)?
                .into_iter()
                .enumerate()
                .map(|(i, (v, k))| vec![i.to_string(), v.to_string(), k.to_string()])
                .collect(),
        },
        SampleKind::Coupling => {
            let primes = t.primes_upto(n);
            let mut rows = Vec::with_capacity(samples as usize);
            // same chunking as the sampler library, so any pool size gives the same draws
            let parts: Vec<anyhow::Result<Vec<(u64, u64)>>> = {
                use rayon::prelude::*;
                rng::chunks(samples)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|(idx, len)| {
                        let mut r = rng::stream(seed, idx);
                        (0..len)
                            .map(|_| {
                                let (h, _) = conditioned::sample_hn(n, primes, &mut r)?;
                                Ok((h, r.gen_range(1..=n / h)))
                            })
                            .collect()
                    })
                    .collect()
            };
            for p in parts {
                for (h, q) in p? {
                    let i = rows.len();
                    rows.push(vec![i.to_string(), h.to_string(), q.to_string(), (h * q).to_string()]);
                }
            }
            Table {
                header: "draw,h,q,product",
                rows,
            }
        }
        SampleKind::Eta => {
            let psi = c.psi()?;
            let s = EtaSampler::new(n, k_max, &t)?;
            let rows = s
                .map_batch(samples, seed, |pts| {
                    let xi = poisson_embed::xi_from_points(pts);
                    let d = poisson_embed::decompose(&psi, &xi);
                    let points: Vec<String> = pts.iter().map(|(p, k)| format!("{p}^{k}")).collect();
                    (points.join(";"), d.y.to_string(), d.r.to_string())
                })
                .into_iter()
                .enumerate()
                .map(|(i, (p, y, r))| vec![i.to_string(), p, y, r])
                .collect();
            Table {
                header: "draw,points,y,r",
                rows,
            }
        }
    };
    let out = match format(c) {
        Format::Csv => {
            let mut s = String::with_capacity(table.rows.len() * 16);
            s.push_str(table.header);
            s.push('\n');
            for r in &table.rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let keys: Vec<&str> = table.header.split(',').collect();
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|r| {
                    serde_json::Value::Object(keys.iter().zip(r).map(|(k, v)| (k.to_string(), json!(v))).collect())
                })
                .collect();
            json_text(&json!({ "n": n, "seed": seed, "samples": samples, "rows": rows }))?
        }
    };
    emit(c, &out)?;
    Ok(0)
}

fn cmd_verify(c: &Common, extra: Extra, grid: Option<String>, rhs_scale: Option<f64>) -> anyhow::Result<u8> {
    let grid = match grid.or(extra.grid) {
        Some(g) => config::parse_grid(&g).map_err(|e| anyhow!(Error::InvalidArgument(e.to_string())))?,
        None => vec![require_n(c)?],
    };
    let scale = rhs_scale.or(extra.rhs_scale).unwrap_or(1.0);
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidArgument("rhs scale must be a finite non-negative number".into()).into());
    }
    if let Some(&bad) = grid.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!("grid value {bad} is below 2")).into());
    }
    let psi = c.psi()?;
    let reports = match grid.iter().max() {
        None => Vec::new(),
        Some(&top) => {
            let t = tables_for(c, top)?;
            let t0 = Instant::now();
            let r = bounds::verify_suite(&psi, &grid, &t, scale);
            eprintln!("{} checks in {:.1}s", r.len(), t0.elapsed().as_secs_f64());
            r
        }
    };
    let s = bounds::summarize(&reports);
    eprintln!(
        "{} checks, {} applicable, {} vacuous, {} failed",
        s.total, s.applicable, s.vacuous, s.failed
    );
    let out = match format(c) {
        Format::Json => json_text(&bounds::reports_to_json(&reports))?,
        Format::Csv => {
            let mut buf = Vec::new();
            bounds::write_reports_csv(&reports, &mut buf)?;
            String::from_utf8(buf)?
        }
    };
    emit(c, &out)?;
    Ok(if s.failed == 0 { 0 } else { EXIT_FAIL })
}
