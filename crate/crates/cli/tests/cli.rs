use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn horolab(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_horolab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn band_report_on_the_hyperbolic_surface() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(horolab(tmp.path(), &["band-report", "--out", "o"]), 0);
    let r = json(&tmp.path().join("o/band_report.json"));
    let band = r["band"].as_array().unwrap();
    assert!((band[0].as_f64().unwrap() + 0.55).abs() < 1e-6);
    assert!((band[1].as_f64().unwrap() + 0.45).abs() < 1e-6);
    assert_eq!(r["epsilon"].as_f64(), Some(0.05));
}

#[test]
fn riccati_table_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(horolab(tmp.path(), &["riccati", "--out", "o"]), 0);
    let mut rd = csv::Reader::from_path(tmp.path().join("o/riccati.csv")).unwrap();
    let h = rd.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    let (rm, rp) = (col("r_minus"), col("r_plus"));
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        for c in [rm, rp] {
            let r: f64 = rec[c].parse().unwrap();
            assert!((r - 1.0).abs() < 1e-6, "r = {r}");
        }
        rows += 1;
    }
    assert_eq!(rows, 20);
}

#[test]
fn intertwine_passes_at_v_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(horolab(tmp.path(), &["intertwine", "--lambda", "2.5,0", "--potential", "zero", "--out", "o"]), 0);
    let r = json(&tmp.path().join("o/intertwine.json"));
    assert_eq!(r["report"]["verdict"], "pass");
    let mut rd = csv::Reader::from_path(tmp.path().join("o/intertwine.csv")).unwrap();
    let h = rd.headers().unwrap().clone();
    let c = h.iter().position(|x| x == "rel_residual").unwrap();
    for rec in rd.records() {
        let res: f64 = rec.unwrap()[c].parse().unwrap();
        assert!(res <= 1e-2);
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let bad = write_config(d, "bad.json", r#"{"seeds": 2}"#);
    assert_eq!(horolab(d, &["surface-check", "--config", &bad]), 1);
    let neg = write_config(d, "neg.json", r#"{"horizons": {"T_rates": -1}}"#);
    assert_eq!(horolab(d, &["rates", "--config", &neg]), 1);
    assert_eq!(horolab(d, &["rates", "--potential", "nonsense", "--out", "o"]), 1);
    let rej = write_config(
        d,
        "rej.json",
        r#"{"surface": {"perturbation": [{"center": [0.0, 0.0], "radius": 1.2, "amplitude": 3.0}]}}"#,
    );
    assert_eq!(horolab(d, &["surface-check", "--config", &rej, "--out", "o"]), 2);
    assert_eq!(horolab(d, &["intertwine", "--lambda", "0.5,0", "--out", "o"]), 3);
    assert_eq!(horolab(d, &["no-such-command"]), 1);
    assert_eq!(horolab(d, &["--help"]), 0);
}

#[test]
fn identity_failure_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let tight = write_config(d, "tight.json", r#"{"tolerances": {"identity": 1e-14}, "points": 3}"#);
    assert_eq!(horolab(d, &["intertwine", "--config", &tight, "--out", "o"]), 4);
    assert_eq!(json(&d.join("o/intertwine.json"))["report"]["verdict"], "fail");
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(
        d,
        "pert.json",
        r#"{"surface": {"perturbation": [{"center": [0.1, 0.05], "radius": 1.2, "amplitude": 0.05}]},
            "ensemble_size": 20, "points": 4, "seed": 7}"#,
    );
    for out in ["a", "b"] {
        assert_eq!(horolab(d, &["all", "--config", &cfg, "--out", out]), 0);
    }
    let mut names: Vec<_> = fs::read_dir(d.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7, "{names:?}");
    for n in &names {
        assert_eq!(fs::read(d.join("a").join(n)).unwrap(), fs::read(d.join("b").join(n)).unwrap(), "{n:?} differs");
    }
    let summary = json(&d.join("a/summary.json"));
    assert_eq!(summary["spectrum"]["status"], "skipped");
}

#[test]
fn batch_manifest_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(
        d,
        "batch.json",
        r#"[{"function": "one", "potential": "zero", "lambda": [2.0, 0.0], "point": [0.1, 0.2, 0.3]},
            {"function": "one", "potential": "r-", "lambda": [2.5, 1.0], "point": [0.0, 0.0, 0.0]}]"#,
    );
    let cfg = write_config(d, "cfg.json", r#"{"batch": "batch.json", "ensemble_size": 20}"#);
    assert_eq!(horolab(d, &["resolvent", "--config", &cfg, "--out", "o"]), 0);
    let text = fs::read_to_string(d.join("o/resolvent_batch.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    // R(λ)1 = −1/(λ − c) when V ≡ c; r_- ≡ 1 on constant curvature
    let re: f64 = rows[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!((re + 0.5).abs() < 1e-6, "{re}");
    let re: f64 = rows[2].split(',').nth(5).unwrap().parse().unwrap();
    let im: f64 = rows[2].split(',').nth(6).unwrap().parse().unwrap();
    let expect = -1.0 / num_complex::Complex64::new(1.5, 1.0);
    assert!((re - expect.re).abs() < 1e-6 && (im - expect.im).abs() < 1e-6, "{re} {im}");
}
