use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dayahead"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dayahead")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: &str = "[data]\nkind = \"synth\"\n[data.synth]\nn_days = 60\nseed = 11\n";

const PERSISTENCE: &str = "train_days = 30\n\
[data]\nkind = \"csv\"\npath = \"community.csv\"\n\
[[models]]\nid = \"n_same_days\"\nn = 4\n\
[[models]]\nid = \"n_days\"\nn = 3\n";

/// Synthesises the golden fixture data into `dir` and returns the
/// evaluation config path.
fn persistence_run(dir: &Path) -> PathBuf {
    let synth = write_config(dir, "synth.toml", SYNTH);
    ok(&["synth", "--config", s(&synth), "--out", s(dir)]);
    write_config(dir, "eval.toml", PERSISTENCE)
}

fn read_load(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

/// Brute-force persistence evaluation straight from the CSV, in the
/// report CSV layout.
fn brute_force_report(load: &[f64]) -> String {
    let day = |d: usize| &load[d * 96..(d + 1) * 96];
    let n_days = load.len() / 96;
    let mut out = String::from("model_id,day,daily_rmse,running_avg_rmse\n");
    let models: [(&str, Vec<usize>); 2] = [("n_same_days", vec![7, 14, 21, 28]), ("n_days", vec![1, 2, 3])];
    for (id, offsets) in models {
        let mut sum = 0.0;
        let mut k = 0;
        for d in 30..n_days {
            let mut sq = 0.0;
            for t in 0..96 {
                let f = offsets.iter().map(|o| day(d - o)[t]).sum::<f64>() / offsets.len() as f64;
                sq += (f - day(d)[t]).powi(2);
            }
            let r = (sq / 96.0).sqrt();
            sum += r;
            k += 1;
            out.push_str(&format!("{id},{d},{r},{}\n", sum / k as f64));
        }
    }
    out
}

fn parse_rows(text: &str) -> Vec<(String, usize, f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn persistence_report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = persistence_run(dir.path());
    ok(&["evaluate", "--config", s(&cfg), "--out", s(dir.path())]);
    let got = parse_rows(&fs::read_to_string(dir.path().join("report.csv")).unwrap());
    let golden = parse_rows(include_str!("golden/persistence_report.csv"));
    assert_eq!(got.len(), golden.len());
    for (g, e) in got.iter().zip(&golden) {
        assert_eq!((&g.0, g.1), (&e.0, e.1));
        assert!((g.2 - e.2).abs() < 1e-12 && (g.3 - e.3).abs() < 1e-12, "{g:?} vs {e:?}");
    }
}

/// The golden file is the brute-force oracle's output on the same data.
#[test]
fn golden_file_is_the_brute_force_oracle() {
    let dir = tempfile::tempdir().unwrap();
    persistence_run(dir.path());
    let load = read_load(&dir.path().join("community.csv"));
    let expected = brute_force_report(&load);
    if std::env::var_os("DAYAHEAD_BLESS").is_some() {
        fs::write(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/persistence_report.csv"),
            &expected,
        )
        .unwrap();
    }
    assert_eq!(expected, include_str!("golden/persistence_report.csv"));
}

#[test]
fn evaluate_is_byte_identical_across_runs_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "train_days = 20\neval_end = 40\n[data]\nkind = \"synth\"\n[data.synth]\nn_days = 40\n\
         [[models]]\nid = \"par\"\n[[models]]\nid = \"spr\"\n[[models]]\nid = \"n_days\"\nn = 3\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["evaluate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["evaluate", "--config", s(&cfg), "--out", s(&b)]);
    ok(&["evaluate", "--manifest", s(&a.join("manifest.toml")), "--out", s(&c)]);
    let csv_a = fs::read(a.join("report.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("report.csv")).unwrap());
    assert_eq!(csv_a, fs::read(c.join("report.csv")).unwrap());
    assert_eq!(fs::read(a.join("report.svg")).unwrap(), fs::read(c.join("report.svg")).unwrap());
}

#[test]
fn oracle_evaluation_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "train_days = 10\n[data]\nkind = \"synth\"\n[data.synth]\nn_days = 20\n");
    let stdout = ok(&["evaluate", "--config", s(&cfg), "--models", "oracle", "--out", s(dir.path())]);
    let row = stdout.lines().find(|l| l.starts_with("oracle")).unwrap();
    assert_eq!(row.split_whitespace().nth(1), Some("0.0000"), "{stdout}");
    let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(table, stdout);
}

#[test]
fn unknown_model_id_fails_with_machine_readable_line() {
    let out = run(&["evaluate", "--models", "prophetx", "--out", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
    let line = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "unknown_model");
    assert_eq!(v["id"], "prophetx");
    assert!(v["valid"].as_str().unwrap().contains("par_w"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "[[models]]\nid = \"prophetx\"\n");
    let out = run(&["evaluate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prophetx"));
}

#[test]
fn schema_violation_reports_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "[[models]]\nid = \"spr\"\nlow_q = \"low\"\n");
    let out = run(&["evaluate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "config");
    assert_eq!(v["key_path"], "models[0].low_q");
}

#[test]
fn fit_then_forecast_from_checkpoints_matches_refit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "train_days = 20\n[data]\nkind = \"synth\"\n[data.synth]\nn_days = 40\n\
         [[models]]\nid = \"par_w\"\n[[models]]\nid = \"spnn\"\n[models.mlp]\nhidden = [4]\nepochs = 20\n",
    );
    let fitted = dir.path().join("fitted");
    let direct = dir.path().join("direct");
    let loaded = dir.path().join("loaded");
    ok(&["fit", "--config", s(&cfg), "--day", "35", "--out", s(&fitted)]);
    assert!(fitted.join("models/par_w.json").exists());
    assert!(fitted.join("models/spnn.bin").exists());
    assert!(fitted.join("fit_manifest.toml").exists());
    ok(&["forecast", "--config", s(&cfg), "--day", "35", "--out", s(&direct)]);
    ok(&[
        "forecast",
        "--config",
        s(&cfg),
        "--day",
        "35",
        "--checkpoints",
        s(&fitted),
        "--out",
        s(&loaded),
    ]);
    for id in ["par_w", "spnn"] {
        let name = format!("forecast_{id}_day35.csv");
        let text = fs::read_to_string(direct.join(&name)).unwrap();
        assert_eq!(text.lines().count(), 97);
        assert!(text.starts_with("timestamp,forecast_kw\n2016-02-05T00:00:00Z,"));
        assert_eq!(text, fs::read_to_string(loaded.join(&name)).unwrap());
    }
}

#[test]
fn report_rerenders_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = persistence_run(dir.path());
    let first = dir.path().join("first");
    let again = dir.path().join("again");
    ok(&["evaluate", "--config", s(&cfg), "--out", s(&first)]);
    ok(&["report", "--reports", s(&first.join("reports.json")), "--out", s(&again)]);
    for f in ["report.txt", "report.csv", "report.svg"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    let only = dir.path().join("only");
    ok(&[
        "report",
        "--reports",
        s(&first.join("reports.json")),
        "--format",
        "csv",
        "--out",
        s(&only),
    ]);
    assert!(only.join("report.csv").exists() && !only.join("report.svg").exists());
}

#[test]
fn synth_writes_buildings_and_community() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SYNTH);
    ok(&["synth", "--config", s(&cfg), "--seed", "5", "--out", s(dir.path())]);
    let community = fs::read_to_string(dir.path().join("community.csv")).unwrap();
    assert!(community.starts_with("timestamp,load_kw,solar_wm2,temp_c\n"));
    assert_eq!(community.lines().count(), 60 * 96 + 1);
    assert!(dir.path().join("building_0.csv").exists());
    assert!(fs::read_to_string(dir.path().join("synth.toml")).unwrap().contains("seed = 5"));
}
