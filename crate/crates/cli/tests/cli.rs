use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn data(name: &str) -> String {
    root().join("data").join(name).display().to_string()
}

struct Run {
    dir: TempDir,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap_or(-1)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn netrand(command: &str, config: Value, extra: &[&str]) -> Run {
    netrand_env(command, config, extra, &[])
}

fn netrand_env(command: &str, config: Value, extra: &[&str], env: &[(&str, String)]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netrand"));
    cmd.arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .env_remove("NETRAND_SOLVER")
        .current_dir(root());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let output = cmd.output().unwrap();
    Run { dir, output }
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn num(record: &csv::StringRecord, i: usize) -> f64 {
    record[i]
        .parse()
        .unwrap_or_else(|_| panic!("column {i}: {:?}", &record[i]))
}

fn write_behavior(path: &Path, p: impl Fn(&[usize; 6]) -> f64) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["x", "y1", "y2", "a", "b1", "b2", "p"]).unwrap();
    for x in 0..3 {
        for y1 in 0..2 {
            for y2 in 0..2 {
                for a in 0..2 {
                    for b1 in 0..2 {
                        for b2 in 0..2 {
                            let row = [x, y1, y2, a, b1, b2];
                            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                            rec.push(p(&row).to_string());
                            w.write_record(&rec).unwrap();
                        }
                    }
                }
            }
        }
    }
    w.flush().unwrap();
}

#[test]
fn sweep_local_rows_are_zero_and_reproducible() {
    let cfg = serde_json::json!({
        "alphas": [0.0, 0.5, 1.0],
        "seesaw": { "restarts": 10 },
        "seed": 3,
        "jobs": 1
    });
    let first = netrand("sweep", cfg.clone(), &[]);
    assert_eq!(first.code(), 0, "{}", first.stderr());
    let text = first.read("sweep.csv");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    for r in &rows[..2] {
        assert!(num(r, 1) <= 4.0 + 1e-9, "{r:?}");
        assert!(num(r, 4).abs() < 1e-6 && num(r, 7).abs() < 1e-6, "{r:?}");
        assert!(r[9].is_empty(), "{r:?}");
    }
    let top = &rows[2];
    assert!(num(top, 1) > 4.0, "{top:?}");
    assert!(num(top, 7) >= num(top, 4) - 1e-6, "{top:?}");

    let second = netrand("sweep", cfg, &[]);
    assert_eq!(second.code(), 0);
    assert_eq!(text, second.read("sweep.csv"));
    let m1 = first.json("manifest.json");
    let m2 = second.json("manifest.json");
    assert_eq!(m1["config_sha256"], m2["config_sha256"]);
    assert_eq!(m1["outputs"], m2["outputs"]);
}

#[test]
fn certify_uniform_behavior_has_no_randomness() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("uniform.csv");
    write_behavior(&path, |_| 0.125);
    let run = netrand("certify", serde_json::json!({ "certify": { "behavior": path } }), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let r = run.json("certify.json");
    assert!((r["result"]["bound"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(r["result"]["h_min"].as_f64().unwrap() < 1e-6);
}

#[test]
fn certify_example_matches_golden() {
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(data("golden/certify_alpha_0.637.json")).unwrap()).unwrap();
    let run = netrand(
        "certify",
        serde_json::json!({ "certify": { "behavior": data("example_behavior_alpha_0.637.csv") } }),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let r = &run.json("certify.json")["result"];
    let tol = golden["tolerance"].as_f64().unwrap();
    assert_eq!(r["status"], "optimal");
    assert!(
        (r["bound"].as_f64().unwrap() - golden["pguess"].as_f64().unwrap()).abs() < tol,
        "{r}"
    );
    assert!(
        (r["h_min"].as_f64().unwrap() - golden["h_min"].as_f64().unwrap()).abs() < tol,
        "{r}"
    );
    assert!(r["h_min"].as_f64().unwrap() > 0.0);
}

#[test]
#[ignore = "needs python3 with cvxpy"]
fn certify_example_through_file_bridge() {
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(data("golden/certify_alpha_0.637.json")).unwrap()).unwrap();
    let bridge = format!("python3 {}", root().join("tools/sdpa_bridge.py").display());
    let run = netrand_env(
        "certify",
        serde_json::json!({ "certify": { "behavior": data("example_behavior_alpha_0.637.csv") } }),
        &[],
        &[("NETRAND_SOLVER", "file-bridge".into()), ("NETRAND_BRIDGE_CMD", bridge)],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let r = &run.json("certify.json")["result"];
    assert!(
        (r["bound"].as_f64().unwrap() - golden["pguess"].as_f64().unwrap()).abs() < 1e-5,
        "{r}"
    );
}

#[test]
fn certify_rejects_unnormalized_behavior() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    let tol = 1e-6;
    write_behavior(&path, |r| {
        if r == &[0, 0, 0, 0, 0, 0] {
            0.125 + 10.0 * tol
        } else {
            0.125
        }
    });
    let run = netrand(
        "certify",
        serde_json::json!({ "certify": { "behavior": path, "tol": tol } }),
        &[],
    );
    assert_eq!(run.code(), 4, "{}", run.stderr());
    assert!(run.stderr().contains("normalization"), "{}", run.stderr());
    assert!(!run.path("certify.json").exists());
    assert!(run.path("manifest.json").exists());
}

#[test]
fn locality_rejects_ideal_behavior() {
    let run = netrand(
        "locality",
        serde_json::json!({ "locality": { "behavior": data("behavior_alpha_1.csv") } }),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let r = run.json("locality.json");
    assert_eq!(r["verdict"], "outside");
    assert!((r["certificate_bound"].as_f64().unwrap() - 4.0).abs() < 1e-9, "{r}");
    assert!(r["certificate_value"].as_f64().unwrap() > 4.0, "{r}");
    assert!(run.path("certificate.csv").exists());
}

#[test]
fn extract_reproduces_known_answer() {
    let run = netrand(
        "extract",
        serde_json::json!({
            "extract": { "transcript": data("golden/extract_transcript.csv"), "ell": 2, "seed_hex": "b0" }
        }),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let want = fs::read_to_string(data("golden/extract_expected.hex")).unwrap();
    assert_eq!(run.read("extracted.hex"), want);
    assert_eq!(fs::read(run.path("extracted.bin")).unwrap(), [0xc0]);
    assert_eq!(run.json("extract.json")["input_bits"], 4);
}

#[test]
fn simulate_then_extract() {
    let rate = serde_json::json!({ "n": 2000, "gamma": 0.1, "omega_exp": 0.75, "delta": 0.05, "ell": 64 });
    let sim = netrand("simulate", serde_json::json!({ "rate": rate, "seed": 4 }), &[]);
    assert_eq!(sim.code(), 0, "{}", sim.stderr());
    let report = sim.json("simulate.json");
    assert_eq!(report["aborted"], false);
    let transcript = sim.path("transcript.csv");
    let ext = netrand(
        "extract",
        serde_json::json!({ "rate": rate, "extract": { "transcript": transcript } }),
        &[],
    );
    assert_eq!(ext.code(), 0, "{}", ext.stderr());
    assert_eq!(fs::read(ext.path("extracted.bin")).unwrap().len(), 8);
    assert_eq!(ext.json("extract.json")["input_bits"], report["output_bits"]);
}

#[test]
fn rate_table_matches_hand_substitution() {
    let hb = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    for (n, gamma, h) in [
        (10_000u64, 0.01, 0.5),
        (1_000_000, 0.05, 1.2),
        (50_000_000, 0.001, 0.076),
    ] {
        let run = netrand(
            "rate",
            serde_json::json!({
                "rate": { "gamma": gamma, "eps_h": 0.0, "eps_r": 2f64.powi(-20) },
                "rate_table": { "ns": [n], "h": h }
            }),
            &[],
        );
        assert_eq!(run.code(), 0, "{}", run.stderr());
        assert!(run.stderr().contains("asymptotic-only"), "{}", run.stderr());
        let rows = csv_rows(&run.read("rate.csv"));
        // 2^{(ℓ − nh)/2} ≤ 2^{−20} means ℓ ≤ nh − 40.
        let ell = (n as f64 * h - 40.0).floor();
        let r_net = ell - n as f64 * (hb(gamma) + 3.0 * gamma) + 2.0;
        assert_eq!(num(&rows[0], 4), ell);
        assert!(
            (num(&rows[0], 5) - r_net).abs() <= 1e-9 * r_net.abs(),
            "{} vs {r_net}",
            &rows[0][5]
        );
    }
}

#[test]
fn unknown_config_keys_are_config_errors() {
    let run = netrand("rate", serde_json::json!({ "rate": { "gama": 0.1 } }), &[]);
    assert_eq!(run.code(), 2, "{}", run.stderr());
    assert!(run.stderr().contains("gama"), "{}", run.stderr());
}

#[test]
fn export_writes_sdpa_problem() {
    let run = netrand(
        "export-sdpa",
        serde_json::json!({ "export": { "behavior": data("example_behavior_alpha_0.637.csv") } }),
        &["--level", "1"],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let report = run.json("export.json");
    let text = run.read("problem.dat-s");
    let mut lines = text.lines().filter(|l| !l.starts_with(['"', '*']));
    assert_eq!(
        lines.next().unwrap().trim().parse::<u64>().unwrap(),
        report["constraints"].as_u64().unwrap()
    );
    assert_eq!(report["level"], "1");
    let manifest = run.json("manifest.json");
    assert_eq!(manifest["command"], "export-sdpa");
    assert!(manifest["outputs"].as_array().unwrap().len() >= 2);
}
