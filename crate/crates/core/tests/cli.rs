use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernelforge")).args(args).output().unwrap()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("bad report ({e}): {}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const GAUSS: &str = r#"{"family": "gaussian", "sigma": 1.0}"#;

#[test]
fn gram_two_points() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let p = write(d.path(), "p.csv", "x0,x1\n0,0\n1,0\n");
    let out = d.path().join("m.csv");
    let o = run(&["gram", "--kernel", &k, "--points", &p, "--check", "pd", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["verdicts"][0]["class"], "PD");
    assert_eq!(r["verdicts"][1]["verdict"], true);
    let m = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = m
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let em1 = (-1.0f64).exp();
    assert_eq!(rows, vec![vec![1.0, em1], vec![em1, 1.0]]);
}

#[test]
fn gram_duplicate_points_fail_pd() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let p = write(d.path(), "p.csv", "x0\n0\n1\n0\n");
    let o = run(&["gram", "--kernel", &k, "--points", &p, "--check", "pd"]);
    assert_eq!(code(&o), 1);
    let w = &report(&o)["verdicts"][1]["witness"];
    assert_eq!(w["kind"], "pair");
    assert_eq!((w["i"].as_u64(), w["j"].as_u64()), (Some(0), Some(2)));
    // the same sample is still PSD
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", &p, "--check", "psd"])), 0);
}

#[test]
fn input_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let empty = write(d.path(), "e.csv", "");
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", &empty])), 2);
    let header_only = write(d.path(), "h.csv", "x0,x1\n");
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", &header_only])), 2);

    let bad = write(d.path(), "b.csv", "x0,x1\n0,0\n1,zz\n");
    let o = run(&["gram", "--kernel", &k, "--points", &bad]);
    assert_eq!(code(&o), 2);
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 3") && msg.contains("'x1'"), "{msg}");

    let unknown = write(d.path(), "u.json", r#"{"family": "gaussian", "sigma": 1.0, "scale": 2}"#);
    let p = write(d.path(), "p.csv", "x0\n0\n");
    assert_eq!(code(&run(&["gram", "--kernel", &unknown, "--points", &p])), 2);
    let hyper = write(d.path(), "hk.json", r#"{"family": "sech_power", "r": 1.0}"#);
    assert_eq!(code(&run(&["gram", "--kernel", &hyper, "--points", &p])), 2);
    assert_eq!(code(&run(&["gram", "--kernel", &hyper, "--points", &p, "--lift"])), 0);
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", "/nonexistent.csv"])), 2);
    assert_eq!(code(&run(&["gram", "--kernel", &k])), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_kernelforge"))
        .args(["matern", "--r", "1", "--alpha", "1", "--nu", "1"])
        .env("KERNELFORGE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn threads_env_is_honoured() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let p = write(d.path(), "p.csv", "x0\n0\n1\n2\n3\n");
    let one = Command::new(env!("CARGO_BIN_EXE_kernelforge"))
        .args(["gram", "--kernel", &k, "--points", &p])
        .env("KERNELFORGE_THREADS", "1")
        .output()
        .unwrap();
    let many = run(&["gram", "--kernel", &k, "--points", &p]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn check_predicates() {
    let d = tempfile::tempdir().unwrap();
    let sq = write(d.path(), "sq.json", r#"{"family": "sq_distance"}"#);
    let p = write(d.path(), "p.csv", "x0,x1\n0,0\n1,0\n0,2\n3,1\n");
    let o = run(&["check", "cnd", "--kernel", &sq, "--points", &p]);
    assert_eq!(code(&o), 0);
    assert!(report(&o)["tolerances"]["tol"].is_number());

    let plus_i = write(d.path(), "i.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let o = run(&["check", "cnd", "--gamma", &plus_i]);
    assert_eq!(code(&o), 1);
    assert_eq!(report(&o)["verdicts"][0]["witness"]["kind"], "eigen");

    let constant = write(d.path(), "c.csv", "2,2,2\n2,2,2\n2,2,2\n");
    let o = run(&["check", "metrizable", "--gamma", &constant]);
    assert_eq!(code(&o), 1);
    let w = &report(&o)["verdicts"][0]["witness"];
    assert_eq!((w["kind"].as_str(), w["i"].as_u64(), w["j"].as_u64()), (Some("pair"), Some(0), Some(1)));

    let sine = write(d.path(), "s.json", r#"{"fn": "sine", "omega": 1.0}"#);
    let o = run(&["check", "cm", "--function", &sine]);
    assert_eq!(code(&o), 1);
    let w = &report(&o)["verdicts"][0]["witness"];
    assert_eq!(w["kind"], "order");
    assert!(w["order"].is_u64() && w["point"].is_number());

    let exp = write(d.path(), "x.json", r#"{"fn": "exp_decay", "c": 2.0}"#);
    assert_eq!(code(&run(&["check", "cm", "--function", &exp])), 0);
    let g = write(d.path(), "g.json", r#"{"fn": "log_e_plus"}"#);
    assert_eq!(code(&run(&["check", "bernstein", "--function", &g])), 0);

    let mink = write(d.path(), "m.json", r#"{"family": "minkowski"}"#);
    let o = run(&["check", "hyperbolic", "--kernel", &mink, "--points", &p, "--lift"]);
    assert_eq!(code(&o), 0);
    let bad_diag = write(d.path(), "bd.csv", "1.5,1\n1,1\n");
    assert_eq!(code(&run(&["check", "hyperbolic", "--gamma", &bad_diag])), 1);
    let below_one = write(d.path(), "b1.csv", "1,0.5\n0.5,1\n");
    assert_eq!(code(&run(&["check", "log-conditional", "--gamma", &below_one])), 2);

    assert_eq!(code(&run(&["check", "cnd"])), 2);
    assert_eq!(code(&run(&["check", "cm"])), 2);
}

#[test]
fn embed_command() {
    let d = tempfile::tempdir().unwrap();
    let g = write(d.path(), "g.csv", "0,1,4\n1,0,1\n4,1,0\n");
    let out = d.path().join("h.csv");
    let o = run(&["embed", "--gamma", &g, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["numbers"]["rank"], 1.0);
    assert!(r["numbers"]["relative_error"].as_f64().unwrap() < 1e-12);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h0,f"));
    let h: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(h[0], 0.0);
    assert!(((h[1] - h[0]).abs() - 1.0).abs() < 1e-12 && ((h[2] - h[0]).abs() - 2.0).abs() < 1e-12);

    let one = write(d.path(), "one.csv", "3\n");
    let o = run(&["embed", "--gamma", &one]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o)["numbers"]["rank"], 0.0);

    let plus_i = write(d.path(), "i.csv", "1,0\n0,1\n");
    let o = run(&["embed", "--gamma", &plus_i]);
    assert_eq!(code(&o), 1);
    assert!(report(&o)["numbers"]["lambda_max_projected"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&run(&["embed", "--gamma", &g, "--base", "3"])), 2);
}

#[test]
fn matern_command() {
    let o = run(&["matern", "--r", "0", "--alpha", "1.3", "--nu", "2.2"]);
    assert_eq!(report(&o)["numbers"]["value"], 1.0);
    let o = run(&["matern", "--r", "1.5", "--alpha", "2", "--nu", "0.5"]);
    let v = report(&o)["numbers"]["value"].as_f64().unwrap();
    assert!((v - (-3.0f64).exp()).abs() < 1e-12 * v);
    let o = run(&["matern", "--r", "0.7", "--alpha", "1", "--nu", "2.5", "--oracle"]);
    assert_eq!(code(&o), 0);
    assert!(report(&o)["numbers"]["relative_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(code(&run(&["matern", "--r", "1", "--alpha", "1", "--nu", "0"])), 2);
}

#[test]
fn mmd_command() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let a = write(d.path(), "a.csv", "x0,x1\n0,0\n");
    let b = write(d.path(), "b.csv", "x0,x1\n1,0\n");
    let s = write(d.path(), "s.csv", "x0,x1\n0,0\n2,1\n2,1\n");
    let s2 = write(d.path(), "s2.csv", "x0,x1\n2,1\n0,0\n2,1\n");
    let mmd = |x: &str, y: &str| {
        let o = run(&["mmd", "--kernel", &k, "--points", x, "--points", y]);
        assert_eq!(code(&o), 0);
        report(&o)["numbers"]["mmd"].as_f64().unwrap()
    };
    assert_eq!(mmd(&s, &s2), 0.0);
    let v = mmd(&a, &b);
    assert!((v - (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-12);
    assert_eq!(v.to_bits(), mmd(&b, &a).to_bits());
    assert_eq!(mmd(&s, &a).to_bits(), mmd(&a, &s).to_bits());
    assert_eq!(code(&run(&["mmd", "--kernel", &k, "--points", &a])), 2);
    // weighted: δ_0 against ½δ_0 + ½δ_{e₁}
    let w = write(d.path(), "w.csv", "x0,x1,weight\n0,0,0.5\n1,0,0.5\n");
    let v = mmd(&a, &w);
    assert!((v - 0.5 * (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-12);
    let bad = write(d.path(), "bw.csv", "x0,x1,weight\n0,0,oops\n");
    assert_eq!(code(&run(&["mmd", "--kernel", &k, "--points", &a, "--points", &bad])), 2);
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", &w])), 2);
}

#[test]
fn classify_matrix_gaussian_examples() {
    let d = tempfile::tempdir().unwrap();
    let gc = write(d.path(), "gc.csv", "3,3\n3,3\n");
    let ones = write(d.path(), "ones.csv", "1,1\n1,1\n");
    let dom = write(d.path(), "dom.json", "[[2, 1], [1, 2]]");
    let split = write(d.path(), "split.csv", "2,5\n5,2\n");
    let weak = write(d.path(), "weak.csv", "1,0.2\n0.2,1\n");
    let verdicts = |a: &str, g: &str| {
        let o = run(&["classify-matrix-gaussian", "--a", a, "--gamma", g, "--m", "2"]);
        let r = report(&o);
        (
            code(&o),
            r["verdicts"][0]["verdict"].as_bool().unwrap(),
            r["verdicts"][1]["verdict"].as_bool().unwrap(),
            r["numbers"]["classes"].as_f64().unwrap(),
        )
    };
    assert_eq!(verdicts(&ones, &gc), (1, false, false, 1.0));
    assert_eq!(verdicts(&dom, &gc), (0, true, true, 1.0));
    assert_eq!(verdicts(&weak, &split), (0, true, true, 2.0));
    // C = [a γ] indefinite violates the hypothesis
    assert_eq!(code(&run(&["classify-matrix-gaussian", "--a", &dom, "--gamma", &split, "--m", "2"])), 2);
    let three = write(d.path(), "three.csv", "1,0,0\n0,1,0\n0,0,1\n");
    assert_eq!(code(&run(&["classify-matrix-gaussian", "--a", &three, "--gamma", &gc, "--m", "2"])), 2);
}

#[test]
fn probe_and_seed() {
    let d = tempfile::tempdir().unwrap();
    let k = write(d.path(), "k.json", GAUSS);
    let p = write(d.path(), "p.csv", "x0\n0\n0.5\n1.5\n");
    let a = run(&["probe", "--kernel", &k, "--points", &p, "--seed", "3"]);
    let b = run(&["probe", "--kernel", &k, "--points", &p, "--seed", "4"]);
    assert_eq!(code(&a), 0);
    assert_eq!(report(&a)["seed"], 3);
    assert_ne!(
        report(&a)["verdicts"][0]["numbers"]["min_random_energy"],
        report(&b)["verdicts"][0]["numbers"]["min_random_energy"]
    );
    let dup = write(d.path(), "d.csv", "x0\n0\n0\n");
    assert_eq!(code(&run(&["probe", "--kernel", &k, "--points", &dup])), 2);
}

#[test]
fn product_and_channel_points() {
    let d = tempfile::tempdir().unwrap();
    let sites = write(d.path(), "sites.csv", "site_id,x0\nA,0\nB,1\n");
    let p = write(d.path(), "p.csv", "site_id,x0,x1,channel\nA,0,0,0\nB,0.5,0,0\nA,0,0,1\nB,0.5,0,1\n");
    let k = write(
        d.path(),
        "k.json",
        r#"{"family": "gamma_power_matrix", "gamma": {"op": "mixture", "atoms": [{"weight": 1.0, "kernel": {"family": "constant", "c": 1.0}}, {"weight": 1.0, "kernel": {"family": "sq_distance"}}]}, "nus": [0.5, 1.5]}"#,
    );
    let kp = write(d.path(), "kp.csv", "site_id,channel\nA,0\nB,0\nA,1\nB,1\n");
    let o = run(&["gram", "--kernel", &k, "--points", &kp, "--sites", &sites, "--check", "pd"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["gram", "--kernel", &k, "--points", &p])), 2);
    let missing = write(d.path(), "m.csv", "site_id,x0\nC,0\n");
    let o = run(&["gram", "--kernel", &k, "--points", &missing, "--sites", &sites]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown site 'C'"));
}
