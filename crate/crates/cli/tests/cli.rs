use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sliceforge_core::models::{Architecture, SlicePredictor};
use sliceforge_core::traffic::EncodingBounds;

fn sliceforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sliceforge"))
        .args(args)
        .env_remove("SLICEFORGE_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"
name = "small"
[traffic]
total_requests = 900
duration_hours = 1.0
seed = 5
"#;

#[test]
fn gen_traffic_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("t.csv");
    let run = sliceforge(&["gen-traffic", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 901);
    assert!(stdout(&run).contains("embb"));

    let empty = dir.path().join("e.csv");
    let run = sliceforge(&[
        "gen-traffic",
        "--config",
        p(&config),
        "--out",
        p(&empty),
        "--total",
        "0",
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(fs::read_to_string(&empty).unwrap().lines().count(), 1);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let config = dir.path().join("bad.toml");
    fs::write(&config, "name = \"x\"\n[traffic]\ntotal_requests = 10\nduration_hours = 1.0\n[capacities]\nmmtc = 0\n")
        .unwrap();
    let run = sliceforge(&["gen-traffic", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("capacities.mmtc"), "{}", stderr(&run));
    assert!(!out.exists());

    fs::write(&config, "name = [\n").unwrap();
    let run = sliceforge(&["gen-traffic", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&run), 2);
    assert!(!out.exists());
}

#[test]
fn unknown_preset_lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let run = sliceforge(&[
        "simulate",
        "--scenario",
        "no-such",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&run), 2);
    for name in [
        "baseline-20h",
        "mmtc-outage",
        "urllc-outage",
        "mmtc-overload",
    ] {
        assert!(stderr(&run).contains(name), "{}", stderr(&run));
    }
}

#[test]
fn baseline_simulation_has_120_samples() {
    let dir = tempfile::tempdir().unwrap();
    let run = sliceforge(&[
        "simulate",
        "--scenario",
        "baseline-20h",
        "--scale",
        "0.01",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let samples = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 121);
    assert!(samples.lines().nth(1).unwrap().starts_with("0.000,"));
    let totals: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("totals.json")).unwrap()).unwrap();
    assert_eq!(totals["counters"]["arrivals"], 5000);
    assert!(!dir.path().join("pairs.csv").exists());

    let series = dir.path().join("active.csv");
    let run = sliceforge(&[
        "report",
        "--samples",
        p(&dir.path().join("samples.csv")),
        "--out",
        p(&series),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let text = fs::read_to_string(&series).unwrap();
    assert_eq!(text.lines().count(), 115);
    assert!(text.starts_with("time_s,embb,mmtc,urllc,master\n3600.000,"));

    let late = dir.path().join("late.csv");
    let run = sliceforge(&[
        "report",
        "--samples",
        p(&dir.path().join("samples.csv")),
        "--skip-warmup",
        "30",
        "--out",
        p(&late),
    ]);
    assert_eq!(code(&run), 3);
    assert!(!late.exists());
}

#[test]
fn outage_preset_redirects() {
    let dir = tempfile::tempdir().unwrap();
    let run = sliceforge(&[
        "simulate",
        "--scenario",
        "mmtc-outage",
        "--model",
        "oracle",
        "--scale",
        "0.02",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let totals: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("totals.json")).unwrap()).unwrap();
    assert!(totals["counters"]["failure_redirected"].as_u64().unwrap() > 0);
}

fn write_pairs(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("pairs.csv");
    fs::write(&path, format!("truth,predicted\n{body}")).unwrap();
    path
}

#[test]
fn evaluate_reports_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let perfect = write_pairs(dir.path(), "embb,embb\nmmtc,mmtc\nurllc,urllc\n");
    let run = sliceforge(&["evaluate", "--pairs", p(&perfect)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let scores: Vec<String> = stdout(&run)
        .split_whitespace()
        .filter(|t| t.contains('.'))
        .map(str::to_owned)
        .collect();
    assert_eq!(scores.len(), 13, "{}", stdout(&run));
    assert!(scores.iter().all(|t| t == "100.00"), "{}", stdout(&run));

    let mut body = String::new();
    for (t, row) in ["embb", "mmtc", "urllc"]
        .iter()
        .zip([[8, 1, 1], [0, 9, 1], [1, 0, 9]])
    {
        for (p, n) in ["embb", "mmtc", "urllc"].iter().zip(row) {
            for _ in 0..n {
                body.push_str(&format!("{t},{p}\n"));
            }
        }
    }
    let fixture = write_pairs(dir.path(), &body);
    let run = sliceforge(&["evaluate", "--pairs", p(&fixture), "--json"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let report: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(report["accuracy"].as_f64().unwrap(), 86.66666666666667);
    let run = sliceforge(&["evaluate", "--pairs", p(&fixture)]);
    for value in ["86.67", "86.90", "86.64"] {
        assert!(stdout(&run).contains(value), "{}", stdout(&run));
    }

    let empty = write_pairs(dir.path(), "");
    assert_eq!(code(&sliceforge(&["evaluate", "--pairs", p(&empty)])), 3);

    let bad = write_pairs(dir.path(), "embb,embb\nembb,wifi\n");
    let run = sliceforge(&["evaluate", "--pairs", p(&bad)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("line 3"), "{}", stderr(&run));

    assert_eq!(
        code(&sliceforge(&[
            "evaluate",
            "--pairs",
            p(&dir.path().join("missing.csv"))
        ])),
        2
    );
}

fn dataset(dir: &Path, rows: u64) -> std::path::PathBuf {
    let config = dir.join("s.toml");
    fs::write(&config, SMALL).unwrap();
    let data = dir.join("data.csv");
    let total = rows.to_string();
    let run = sliceforge(&[
        "gen-traffic",
        "--config",
        p(&config),
        "--out",
        p(&data),
        "--total",
        &total,
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    data
}

#[test]
fn training_is_reproducible_and_feeds_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 600);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let run = sliceforge(&[
            "train",
            "--data",
            p(&data),
            "--seed",
            "4",
            "--epochs",
            "5",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        assert!(
            stdout(&run).contains("Accuracy") || stdout(&run).contains("accuracy"),
            "{}",
            stdout(&run)
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let sim = dir.path().join("sim");
    let run = sliceforge(&[
        "simulate",
        "--scenario",
        "urllc-outage",
        "--scale",
        "0.002",
        "--model",
        p(&a),
        "--out-dir",
        p(&sim),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let pairs = sim.join("pairs.csv");
    assert_eq!(fs::read_to_string(&pairs).unwrap().lines().count(), 1001);
    assert_eq!(code(&sliceforge(&["evaluate", "--pairs", p(&pairs)])), 0);

    assert_eq!(
        code(&sliceforge(&[
            "train",
            "--data",
            p(&dir.path().join("nope.csv")),
            "--out",
            p(&a)
        ])),
        2
    );
}

#[test]
fn missing_class_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 300);
    let text = fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let col = header.split(',').position(|c| c == "slice_type").unwrap();
    let kept: Vec<&str> = lines
        .filter(|l| l.split(',').nth(col) != Some("mmtc"))
        .collect();
    fs::write(&data, format!("{header}\n{}\n", kept.join("\n"))).unwrap();
    let out = dir.path().join("m.json");
    let run = sliceforge(&[
        "train",
        "--data",
        p(&data),
        "--epochs",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&run), 3, "{}", stderr(&run));
    assert!(stderr(&run).contains("mmtc"), "{}", stderr(&run));
    assert!(!out.exists());
}

#[test]
fn mismatched_checkpoint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("narrow.json");
    let model = SlicePredictor::new(&Architecture::default(), 20, 1).unwrap();
    model.save(&path, &EncodingBounds::default(), 1).unwrap();
    let run = sliceforge(&[
        "simulate",
        "--scenario",
        "baseline-20h",
        "--scale",
        "0.001",
        "--model",
        p(&path),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&run), 4, "{}", stderr(&run));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.toml");
    fs::write(&config, SMALL).unwrap();
    let gen = |name: &str, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sliceforge"));
        cmd.args([
            "gen-traffic",
            "--config",
            p(&config),
            "--out",
            p(&out),
            "--total",
            "50",
        ]);
        cmd.env_remove("SLICEFORGE_SEED");
        if let Some(seed) = env {
            cmd.env("SLICEFORGE_SEED", seed);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(out).unwrap()
    };
    let from_file = gen("a.csv", None);
    assert_eq!(gen("b.csv", Some("5")), from_file);
    assert_ne!(gen("c.csv", Some("6")), from_file);
}
