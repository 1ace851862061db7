use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn normsol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normsol"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn verdict(report: &Value, h: &str) -> String {
    report["hypotheses"][h]["verdict"].as_str().unwrap().to_string()
}

#[test]
fn usage_errors() {
    assert_eq!(code(&normsol(&["--help"])), 0);
    assert_eq!(code(&normsol(&["frobnicate"])), 64);
    assert_eq!(code(&normsol(&["solve", "--dim", "1", "--builtin", "pure_power", "--param", "p=8"])), 64);
    assert_eq!(code(&normsol(&["check", "--dim", "1", "--builtin", "no_such_thing"])), 64);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = normsol(&["check", "--dim", "1", "--f", "t^3 +", "--F", "t^4/4", "--out", out]);
    assert_eq!(code(&bad), 64, "{}", String::from_utf8_lossy(&bad.stderr));
    assert_eq!(code(&normsol(&["solve", "--dim", "1", "--f", "t^7", "--F", "t^8/8", "--set", "solve.bogus=1"])), 64);
}

#[test]
fn check_classifies_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let run = |builtin: &str, dim: &str| {
        let out = dir.path().join(format!("{builtin}-{dim}"));
        let o = normsol(&["check", "--builtin", builtin, "--dim", dim, "--out", out.to_str().unwrap()]);
        (code(&o), json(&out.join("check.json")))
    };

    let (c, r) = run("log_supercritical", "2");
    assert_eq!(c, 0);
    assert_eq!(verdict(&r, "f6"), "pass");

    let (c, r) = run("critical_piecewise", "5");
    assert_eq!(c, 4);
    assert_eq!(verdict(&r, "f5"), "fail");
    for h in ["f0", "f1", "f2", "f3", "f4"] {
        assert_eq!(verdict(&r, h), "pass", "{h}");
    }

    // with the default alpha the log example sits exactly at the critical
    // growth rate for N >= 3
    let (c, r) = run("log_supercritical", "3");
    assert_eq!(c, 4);
    assert_eq!(verdict(&r, "f6"), "fail");
    assert_eq!(verdict(&r, "f6'"), "pass");

    let (c, r) = run("f6prime_example", "3");
    assert_eq!(c, 0);
    assert_eq!(verdict(&r, "f6"), "fail");
    assert_eq!(verdict(&r, "f6'"), "pass");
}

fn solve(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "solve", "--dim", "1", "--builtin", "pure_power", "--param", "p=8", "--mass", "1",
        "--nodes", "801", "--restarts", "2", "--out", out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    normsol(&args)
}

#[test]
fn solve_is_deterministic_and_reproducible_from_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&solve(&a, &["--seed", "7"])), 0);
    assert_eq!(code(&solve(&b, &["--seed", "7"])), 0);
    for file in ["trace.csv", "report.json", "profile.csv"] {
        let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
        assert!(x == y, "{file} differs between identical runs");
    }
    // the resolved configs differ only in the output directory
    let strip = |p: &Path| {
        let text = std::fs::read_to_string(p.join("config.toml")).unwrap();
        text.lines().filter(|l| !l.starts_with("dir =")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&a), strip(&b));

    let config = a.join("config.toml");
    let o = normsol(&["solve", "--config", config.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(c.join("trace.csv")).unwrap());

    let report = json(&a.join("report.json"));
    assert!(report["converged"].as_bool().unwrap());
    assert!(report["multiplier"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(&dir.path().join("short"), &["--set", "solve.max_iters=2"]);
    assert_eq!(code(&o), 2);

    let user = |f: &str, big_f: &str, out: &str| {
        let out = dir.path().join(out);
        normsol(&[
            "solve", "--dim", "1", "--mass", "1", "--nodes", "801", "--restarts", "1",
            "--f", f, "--F", big_f, "--out", out.to_str().unwrap(),
        ])
    };
    let o = user("abs(t)^6*t", "t^8/8", "user");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // primitive inconsistent with f
    assert_eq!(code(&user("abs(t)^6*t", "t^8/7", "wrong")), 3);
    // F(0) != 0
    assert_eq!(code(&user("abs(t)^6*t", "t^8/8 + 1", "offset")), 3);
    // subcritical growth fails the fiber hypotheses
    assert_eq!(code(&user("t^3", "t^4/4", "sub")), 3);
}

#[test]
fn sweep_verdicts_and_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec![
            "sweep", "--dim", "2", "--builtin", "log_supercritical", "--nodes", "801",
            "--restarts", "2", "--masses", "0.25,0.5,1,2,4", "--out", out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = normsol(&args);
        (code(&o), json(&out.join("sweep.json")))
    };
    let (c, s) = run("plain", &[]);
    assert_eq!(c, 0);
    assert!(s["verdicts"]["nonincreasing"]["ok"].as_bool().unwrap());
    assert!(s["failed"].as_array().unwrap().is_empty());
    assert!(dir.path().join("plain/config.toml").exists());
    assert!(dir.path().join("plain/sweep.csv").exists());

    let (c, s) = run("perturbed", &["--perturb-energies"]);
    assert_eq!(c, 6);
    assert!(!s["verdicts"]["nonincreasing"]["ok"].as_bool().unwrap());
}

#[test]
fn oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bubble");
    assert_eq!(code(&normsol(&["oracle", "--case", "bubble", "--dim", "5", "--out", out.to_str().unwrap()])), 0);
    let t = json(&out.join("oracle.json"));
    assert!(t["values"].as_object().unwrap().values().all(|v| v["error"].is_number()));
    assert!(out.join("config.toml").exists());

    let out = dir.path().join("soliton");
    assert_eq!(code(&normsol(&["oracle", "--case", "soliton", "--dim", "1", "--out", out.to_str().unwrap()])), 0);
    assert_eq!(code(&normsol(&["oracle", "--case", "soliton", "--dim", "3"])), 64);
    assert_eq!(code(&normsol(&["oracle", "--case", "nope", "--dim", "1"])), 64);
}
