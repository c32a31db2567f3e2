use std::path::Path;
use std::process::{Command, Output};

fn ekac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ekac")).args(args).output().expect("run ekac")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit status")
}

#[test]
fn help_lists_every_flag() {
    let o = ekac(&["--help"]);
    assert_eq!(code(&o), 0);
    let h = stdout(&o);
    for flag in [
        "--psi", "--n", "--limit", "--cache", "--seed", "--samples", "--format", "--out", "--workers", "--config",
    ] {
        assert!(h.contains(flag), "{flag} missing from help");
    }
    for cmd in ["sieve", "dist", "distance", "sample", "verify"] {
        assert!(h.contains(cmd));
    }
    let v = stdout(&ekac(&["verify", "--help"]));
    assert!(v.contains("--grid") && v.contains("--rhs-scale"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ekac(&["--bogus"])), 2);
    assert_eq!(code(&ekac(&["dist", "--n", "0"])), 2);
    assert_eq!(code(&ekac(&["dist"])), 2);
    assert_eq!(code(&ekac(&["dist", "--n", "50", "--limit", "10"])), 2);
    assert_eq!(code(&ekac(&["dist", "--n", "10", "--psi", "nope"])), 2);
    assert_eq!(code(&ekac(&["dist", "--n", "10", "--psi", "file:/no/such/file"])), 2);
}

#[test]
fn oversized_sieve_exits_3() {
    let o = ekac(&["sieve", "--limit", "1e9"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn dist_omega_10() {
    let o = ekac(&["dist", "--psi", "omega", "--n", "10", "--family", "uniform"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "value_num,value_den,prob_num,prob_den\n0,1,1,10\n1,1,7,10\n2,1,1,5\n");
    // normalizers go to stderr
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu_n"));
}

#[test]
fn dist_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.txt");
    // ψ(p^k) = k, i.e. Ω, written in the text format
    std::fs::write(&path, "name: count\nc1: 1\npoly: 1*k + 0\n").unwrap();
    let sel = format!("file:{}", path.display());
    let a = ekac(&["dist", "--psi", &sel, "--n", "300", "--family", "harmonic"]);
    let b = ekac(&["dist", "--psi", "big-omega", "--n", "300", "--family", "harmonic"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn dist_json_has_normalizers() {
    let o = ekac(&["dist", "--n", "100", "--family", "weighted", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["normalizers"]["sigma"].as_f64().unwrap() > 0.0);
    assert_eq!(v["family"], "weighted");
}

#[test]
fn distance_outputs() {
    let o = ekac(&["distance", "--n", "1000", "--target", "poisson"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("metric,value,error_bound,method\ntotal-variation,"));
    let tv: f64 = s.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(tv > 0.0 && tv < 1.0);
    // a function with negative values has no Poisson comparison
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("neg.txt");
    std::fs::write(&p, "poly: 0*k - 1\n").unwrap();
    let sel = format!("file:{}", p.display());
    assert_eq!(code(&ekac(&["distance", "--n", "100", "--psi", &sel, "--target", "poisson"])), 2);
}

#[test]
fn sampling_needs_a_seed() {
    assert_eq!(code(&ekac(&["sample", "--n", "100"])), 2);
}

#[test]
fn sampling_is_reproducible() {
    let run = |w: &str, what: &str| {
        let o = ekac(&["sample", "--what", what, "--n", "100", "--samples", "20000", "--seed", "11", "--workers", w]);
        assert_eq!(code(&o), 0);
        o.stdout
    };
    for what in ["hn", "coupling", "eta"] {
        let a = run("1", what);
        assert_eq!(a, run("1", what));
        assert_eq!(a, run("2", what));
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 20_001);
    }
}

#[test]
fn sample_rows() {
    let o = ekac(&["sample", "--n", "100", "--samples", "1000", "--seed", "5"]);
    let s = stdout(&o);
    for line in s.lines().skip(1) {
        let f: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((1..=100).contains(&f[1]) && f[2] >= 1);
    }
    let one = ekac(&["sample", "--n", "1", "--samples", "3", "--seed", "5"]);
    assert_eq!(stdout(&one), "draw,value,trials\n0,1,1\n1,1,1\n2,1,1\n");
    let c = ekac(&["sample", "--what", "coupling", "--n", "50", "--samples", "500", "--seed", "5"]);
    for line in stdout(&c).lines().skip(1) {
        let f: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[1] * f[2], f[3]);
        assert!(f[3] <= 50);
    }
}

#[test]
fn verify_grid_passes() {
    let o = ekac(&["verify", "--grid", "100,1000,10000", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert!(v["summary"]["vacuous"].as_u64().unwrap() > 0);
}

#[test]
fn verify_forced_failure_and_empty_grid() {
    assert_eq!(code(&ekac(&["verify", "--grid", "100", "--rhs-scale", "0"])), 1);
    let o = ekac(&["verify", "--grid", ""]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn config_merges_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("law.csv");
    std::fs::write(
        &cfg,
        format!(r#"{{"n": 10, "psi": "big-omega", "format": "csv", "out": "{}"}}"#, out.display()),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&ekac(&["dist", "--config", c, "--psi", "omega"])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text, "value_num,value_den,prob_num,prob_den\n0,1,1,10\n1,1,7,10\n2,1,1,5\n");
    // without the flag the config's big-omega applies: Ω(8) = 3
    assert_eq!(code(&ekac(&["dist", "--config", c])), 0);
    assert!(std::fs::read_to_string(&out).unwrap().contains("\n3,1,"));
    std::fs::write(&cfg, r#"{"nn": 3}"#).unwrap();
    assert_eq!(code(&ekac(&["dist", "--config", c])), 2);
}

#[test]
fn sieve_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("spf.bin");
    let c = cache.to_str().unwrap();
    let built = ekac(&["sieve", "--limit", "100000", "--save", c]);
    assert_eq!(code(&built), 0);
    assert_eq!(stdout(&built), "limit,prime_count,largest_prime\n100000,9592,99991\n");
    assert!(Path::new(c).exists());
    let a = ekac(&["dist", "--n", "5000", "--cache", c]);
    let b = ekac(&["dist", "--n", "5000"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&ekac(&["dist", "--n", "200000", "--cache", c])), 2);
}
