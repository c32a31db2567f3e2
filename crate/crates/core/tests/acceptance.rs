//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use ekac::additive::{C1Policy, C2Policy, PrimePowerFn};
use ekac::bounds::{self, Kind, PsiProfile, CONSTANTS, TAIL_THETAS};
use ekac::conditioned::{self, MultiplicativeWeight};
use ekac::coupling;
use ekac::laws::{self, Family};
use ekac::metrics;
use ekac::poisson_embed::{
    self, ConstantFunctional, ConstraintEvent, EtaSampler, Kernel, LinearFunctional, DEFAULT_K_MAX,
};
use ekac::{rng, stein, AdditiveFunction, BigRational, DiscreteLaw, SieveTables};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::Rng as _;

const LIMIT: u64 = 10_000_000;
const SEED: u64 = 20_240_601;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

/// Integer values in [−3, 3] on prime powers, drawn once from a fixed seed.
fn random_psi(max_p: u64, tables: &SieveTables) -> AdditiveFunction {
    let mut r = rng::stream(SEED, 7);
    let mut table = HashMap::new();
    for &p in tables.primes_upto(max_p) {
        for k in 1..=12u32 {
            table.insert((p, k), r.gen_range(-3i64..=3));
        }
    }
    let v: PrimePowerFn = Arc::new(move |p, k| {
        BigRational::from_integer(BigInt::from(*table.get(&(p, k)).unwrap_or(&0)))
    });
    AdditiveFunction::new(
        "random",
        v,
        true,
        C1Policy::Declared(3.0),
        C2Policy::Truncated { a: 0.0, b: 3.0 },
    )
}

fn c1_conditioned_independence(t: &SieveTables) -> Outcome {
    let fixtures = [AdditiveFunction::omega(), AdditiveFunction::big_omega(), random_psi(3000, t)];
    for psi in &fixtures {
        for n in 1..=3000 {
            let a: DiscreteLaw<BigRational> = conditioned::conditioned_law(psi, n, t).map_err(e)?;
            let b: DiscreteLaw<BigRational> = laws::law_harmonic(psi, n, t).map_err(e)?;
            if a != b {
                return Err(format!("{} differs at n = {n}", psi.name()));
            }
        }
    }
    Ok("omega, big-omega, random fixture: exact equality for n = 1..3000".into())
}

fn c2_prob_an(t: &SieveTables) -> Outcome {
    for n in 1..=3000 {
        if conditioned::prob_an(n, t).map_err(e)? != conditioned::prob_an_enumerated(n, t).map_err(e)? {
            return Err(format!("product formula differs from enumeration at n = {n}"));
        }
    }
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    for n in 21..=3000 {
        if conditioned::prob_an(n, t).map_err(e)? < half {
            return Err(format!("exact P[A_n] < 1/2 at n = {n}"));
        }
    }
    // L_n ∏(1 − 1/p) incrementally above the exact range
    let (mut h, mut prod) = (0.0f64, 1.0f64);
    let mut worst = (f64::INFINITY, 0);
    for n in 1..=1_000_000u64 {
        h += 1.0 / n as f64;
        if t.is_prime(n) {
            prod *= 1.0 - 1.0 / n as f64;
        }
        if n >= 21 {
            let p = h * prod;
            if p < worst.0 {
                worst = (p, n);
            }
        }
    }
    ensure(
        worst.0 >= 0.5 + 1e-9,
        format!("exact = enumeration for n <= 3000; min P[A_n] over 21..1e6 = {:.6} at n = {}", worst.0, worst.1),
    )
}

fn c3_weighted(t: &SieveTables) -> Outcome {
    let psi = AdditiveFunction::omega();
    for theta in [
        MultiplicativeWeight::harmonic(),
        MultiplicativeWeight::inverse_square(),
        MultiplicativeWeight::divisor_over_square(),
    ] {
        for n in 1..=500 {
            let (a, _) = conditioned::conditioned_law_weighted::<BigRational>(&psi, n, &theta, t).map_err(e)?;
            let b: DiscreteLaw<BigRational> = laws::law_weighted(&psi, n, &theta, t).map_err(e)?;
            if a != b {
                return Err(format!("{} differs at n = {n}", theta.name));
            }
        }
    }
    Ok("three weights, n = 1..500, exact".into())
}

fn c4_moments(t: &SieveTables) -> Outcome {
    let c2 = |psi: AdditiveFunction| psi.constants(1_000_000, 64).map(|c| c.c2 + c.c2_error).map_err(e);
    let sweeps = bounds::moment_sweep(1_000_000, t, c2(AdditiveFunction::omega())?, c2(AdditiveFunction::big_omega())?)
        .map_err(e)?;
    // the prefix sums agree with the exact laws at a few points
    for n in [21u64, 1000, 65_537] {
        for psi in [AdditiveFunction::omega(), AdditiveFunction::big_omega()] {
            let law: DiscreteLaw<BigRational> = laws::law_uniform(&psi, n, t).map_err(e)?;
            let m1 = laws::moments(&law, 1).to_f64().unwrap();
            let (w, b) = bounds::omega_counts(n, t).map_err(e)?;
            let counts = if psi.name() == "omega" { w } else { b };
            let s: u64 = counts.iter().map(|&c| c as u64).sum();
            if (m1 - s as f64 / n as f64).abs() > 1e-12 {
                return Err(format!("{} mean mismatch at n = {n}", psi.name()));
            }
        }
    }
    let bad: Vec<String> = sweeps
        .iter()
        .filter(|s| !s.passed())
        .map(|s| format!("{} first fails at {:?}", s.id, s.first_failure))
        .collect();
    let tight = sweeps
        .iter()
        .map(|s| format!("{} min margin {:.3}", s.id, s.worst_margin))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(bad.is_empty(), if bad.is_empty() { format!("n = 21..1e6: {tight}") } else { bad.join("; ") })
}

fn c5_primes(t: &SieveTables) -> Outcome {
    let grid = bounds::log_grid(t.limit(), 100_000, 200);
    let sweeps = bounds::prime_sweep(&grid, t).map_err(e)?;
    let bad: Vec<String> = sweeps
        .iter()
        .filter(|s| !s.passed())
        .map(|s| format!("{} fails first at {:?}", s.id, s.first_failure))
        .collect();
    ensure(
        bad.is_empty() && sweeps.len() == 8,
        if bad.is_empty() {
            format!("{} inequalities on {} grid points up to {}", sweeps.len(), grid.len(), t.limit())
        } else {
            bad.join("; ")
        },
    )
}

fn c6_remainder(t: &SieveTables) -> Outcome {
    let omega = AdditiveFunction::omega();
    let consts = omega.constants(1_000_000, 64).map_err(e)?;
    let cap = consts.c1 + 2.0 * (consts.c2 + consts.c2_error);
    let mut last = 0.0;
    for n in [10u64, 100, 1000, 10_000, 100_000, 1_000_000] {
        let r = poisson_embed::expected_abs_r(&omega, n, t, 64).map_err(e)?;
        if r.value > cap || r.tail_bound > 1e-12 {
            return Err(format!("omega at n = {n}: {} (tail {:e}) vs {cap}", r.value, r.tail_bound));
        }
        let z = poisson_embed::expected_abs_r(&AdditiveFunction::big_omega(), n, t, 64).map_err(e)?;
        if z.value != 0.0 {
            return Err(format!("big-omega remainder {} at n = {n}", z.value));
        }
        last = r.value;
    }
    Ok(format!("E|R_n| for omega = {last:.6} <= {cap:.4} at 1e6; identically 0 for big-omega"))
}

fn c7_stein() -> Outcome {
    let checks = stein::verify_stein(10_000, SEED).map_err(e)?;
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{}: {:e} vs {:e}", c.name, c.observed, c.bound))
        .collect();
    ensure(
        bad.is_empty(),
        if bad.is_empty() { format!("{} checks on 1e4-point grids", checks.len()) } else { bad.join("; ") },
    )
}

fn c8_mecke(t: &SieveTables) -> Outcome {
    let n = 100;
    let samples = 1_000_000;
    let s = EtaSampler::new(n, DEFAULT_K_MAX, t).map_err(e)?;
    let k = Kernel::rho_n(&AdditiveFunction::omega(), n, DEFAULT_K_MAX, t).map_err(e)?;
    let linear = LinearFunctional::new(Kernel::rho_n(&AdditiveFunction::omega(), n, DEFAULT_K_MAX, t).map_err(e)?);
    let event = ConstraintEvent::new(n, &k);
    let mut lines = Vec::new();
    let mut ok = true;
    let gs: [(&str, &dyn poisson_embed::PoissonFunctional); 3] =
        [("constant", &ConstantFunctional(1.0)), ("linear", &linear), ("constraint", &event)];
    for (i, (name, g)) in gs.into_iter().enumerate() {
        let r = poisson_embed::mecke_check(&k, g, &s, samples, SEED + i as u64).map_err(e)?;
        ok &= r.within();
        lines.push(format!("{name} |{:.5} - {:.5}| vs {:.5}", r.lhs, r.rhs, r.ci_halfwidth));
    }
    ensure(ok, lines.join(", "))
}

fn c9_tail_coupling(t: &SieveTables) -> Outcome {
    let tail = bounds::tail_sweep(10_000, &TAIL_THETAS).map_err(e)?;
    if !tail.passed() {
        return Err(format!("tail fails first at n = {:?}", tail.first_failure));
    }
    let mut tv = Vec::new();
    let mut qd = Vec::new();
    let mut notes = Vec::new();
    for n in [1000u64, 10_000, 100_000] {
        let a = coupling::tv_coupling_vs_uniform(n, t).map_err(e)?;
        let b = coupling::prob_q_divides_h(n, t).map_err(e)?;
        for c in [&a, &b] {
            if c.lhs_exact.is_none() {
                return Err(format!("{} at n = {n} not exact", c.lemma_id));
            }
            if c.vacuous != (c.rhs >= 1.0) || (!c.vacuous && !c.holds) {
                return Err(format!("{} at n = {n}: {c:?}", c.lemma_id));
            }
        }
        notes.push(format!("n={n}: tv {:.5} (rhs {:.2}), q|h {:.5} (rhs {:.3})", a.lhs, a.rhs, b.lhs, b.rhs));
        tv.push(a.lhs);
        qd.push(b.lhs);
    }
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    ensure(
        mono(&tv) && mono(&qd),
        format!("tail: {} checks; {}", tail.checked, notes.join("; ")),
    )
}

fn c10_sampler(t: &SieveTables) -> Outcome {
    let n = 100;
    let draws = conditioned::sample_hn_batch(n, 1_000_000, SEED, t).map_err(e)?;
    let emp = conditioned::empirical_law(draws.iter().map(|d| d.0)).map_err(e)?;
    let exact: DiscreteLaw<f64> =
        laws::law_of(n, Family::Harmonic, t, |k, _| BigRational::from_integer(BigInt::from(k))).map_err(e)?;
    let tv = metrics::tv_discrete(&emp, &exact).value;
    let m = draws.len() as f64;
    let mean = draws.iter().map(|d| d.1 as f64).sum::<f64>() / m;
    let var = draws.iter().map(|d| (d.1 as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    let want = 1.0 / conditioned::prob_an(n, t).map_err(e)?.to_f64().unwrap();
    ensure(
        tv < 0.005 && (mean - want).abs() <= 3.0 * se,
        format!("dTV {tv:.5}; mean trials {mean:.5} vs {want:.5} (SE {se:.5})"),
    )
}

fn c11_constants() -> Outcome {
    let literal = [
        65.0, 66.0, 726.0, 116.0, 67.4, 106.0, 2.0, 49.3, 32.0, 33.0, 363.0, 58.0, 105.0, 17.0, 2.0, 2.4, 8.2, 4.0, 51.0, 6.0,
        1.0, 7.2, 24.6, 12.0, 2.4, 18.0, 6.4, 10.0,
    ];
    if CONSTANTS.display_list() != literal {
        return Err("constants table differs from the displays".into());
    }
    let grid: Vec<u64> = bounds::log_grid(100_000_000, 1000, 50).into_iter().filter(|&n| n >= 21).collect();
    let mut failing = Vec::new();
    for &n in &grid {
        let c = bounds::remark_chain_omega(n, None).map_err(e)?;
        let ll = (n as f64).ln().ln();
        let structure = [118.9 / ll.sqrt(), 823.1 / ll, 67.4 * ll / (n as f64).ln()];
        if c.terms != structure {
            return Err(format!("chain terms differ at n = {n}"));
        }
        if !c.consolidation_holds {
            failing.push((n, c.chain, c.consolidated));
        }
    }
    match failing.last() {
        None => Ok(format!("table literal; consolidation holds on {} grid points", grid.len())),
        Some(&(n, chain, cons)) => Err(format!(
            "table literal; chain <= 599/sqrt(loglog n) fails at {}/{} grid points (n = {n}: {chain:.1} > {cons:.1})",
            failing.len(),
            grid.len()
        )),
    }
}

fn c12_exact_distances(t: &SieveTables) -> Outcome {
    let psi = AdditiveFunction::omega();
    let profile = PsiProfile::default_for(&psi, t);
    let mut tv = Vec::new();
    let mut dk = Vec::new();
    for n in [10_000u64, 1_000_000] {
        let reps = bounds::theorem_reports(&psi, &profile, n, t, 1.0).map_err(e)?;
        let get = |id: &str| reps.iter().find(|r| r.theorem_id == id).and_then(|r| r.lhs).map(|l| l.value);
        let (a, b) = (get("poisson-harmonic-tv"), get("gauss-uniform-dk"));
        let (Some(a), Some(b)) = (a, b) else {
            return Err(format!("missing reports at n = {n}"));
        };
        tv.push(a);
        dk.push(b);
        for r in reps.iter().filter(|r| matches!(r.kind, Kind::Kolmogorov | Kind::TotalVariation)) {
            if r.vacuous != (r.rhs >= 1.0) {
                return Err(format!("{} at n = {n}: vacuity flag inconsistent", r.theorem_id));
            }
            if r.applicable && !r.vacuous && r.holds != Some(true) {
                return Err(format!("{} at n = {n}: {:?} > {}", r.theorem_id, r.lhs, r.rhs));
            }
            if r.applicable && !r.vacuous {
                return Err(format!("{} at n = {n}: expected a vacuous bound, rhs = {}", r.theorem_id, r.rhs));
            }
        }
    }
    let inside = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x < 1.0);
    ensure(
        inside(&tv) && inside(&dk) && tv[1] < tv[0] && dk[1] < dk[0],
        format!(
            "dTV(omega(H_n), Po) {:.5} -> {:.5}; dK(omega(J_n), N) {:.5} -> {:.5}; all RHS >= 1, marked vacuous",
            tv[0], tv[1], dk[0], dk[1]
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let tables = SieveTables::build(LIMIT).expect("sieve");
    let small = SieveTables::build(1_000_000).expect("sieve");
    let t = &tables;
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("conditioned law equals harmonic law", Box::new(|| c1_conditioned_independence(&small))),
        ("acceptance probability", Box::new(|| c2_prob_an(&small))),
        ("weighted conditioned law", Box::new(|| c3_weighted(&small))),
        ("moment and L2 lemmas", Box::new(|| c4_moments(&small))),
        ("prime and Mertens inequalities", Box::new(|| c5_primes(t))),
        ("remainder series", Box::new(|| c6_remainder(&small))),
        ("Stein solution bounds", Box::new(c7_stein)),
        ("Mecke identity", Box::new(|| c8_mecke(&small))),
        ("harmonic tail and coupling", Box::new(|| c9_tail_coupling(&small))),
        ("rejection sampler", Box::new(|| c10_sampler(&small))),
        ("constants and loglog chain", Box::new(c11_constants)),
        ("exact distances and vacuity", Box::new(|| c12_exact_distances(&small))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (tag, msg) = match run() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag} [{name}] {msg} ({:.1}s)", i + 1, t0.elapsed().as_secs_f64());
    }
    println!(
        "{} of {} criteria pass ({:.0}s)",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
