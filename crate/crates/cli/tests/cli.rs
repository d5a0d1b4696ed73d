//! Subcommand contracts, exercised through the built binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
seed = 11
k_values = [5, 10]
[cv]
folds = 3
[grids.rf]
trees = [10]
mtry = ["sqrt"]
[grids.gb]
trees = [10, 20]
[grids.ann]
hidden = [4]
rates = [0.1]
epochs = 50
[importance]
repeats = 2
[synthetic]
trips = 3000
start_date = "2015-04-06"
end_date = "2015-04-12"
"#;

fn skyport(dir: &Path, config: &str, args: &[&str]) -> Output {
    let config_path = dir.join("run.toml");
    fs::write(&config_path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_skyport"))
        .arg("--config")
        .arg(&config_path)
        .arg("--output")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "one error line expected, got {stderr:?}");
    serde_json::from_str(lines[0]).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = Command::new(env!("CARGO_BIN_EXE_skyport")).arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
}

#[test]
fn bad_arguments_and_configs_exit_two_with_one_json_line() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_skyport")).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["exit_code"], 2);

    for config in ["k_values = [0]", "unknown_key = 3", "split_ratio = 2.0", "learners = [\"svm\"]"] {
        let out = skyport(dir.path(), config, &["prepare"]);
        assert_eq!(out.status.code(), Some(2), "{config}");
        assert_eq!(error_line(&out)["error"], "config");
    }

    let out = skyport(dir.path(), "[synthetic]\nhotspots = []", &["generate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "spec");

    let out = skyport(dir.path(), SMALL, &["generate", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stages_without_inputs_name_what_is_missing() {
    let dir = TempDir::new().unwrap();
    for stage in ["prepare", "train", "evaluate"] {
        let out = skyport(dir.path(), SMALL, &[stage]);
        assert_eq!(out.status.code(), Some(2), "{stage}");
        let err = error_line(&out);
        assert_eq!(err["error"], "missing_input");
        assert!(err["message"].as_str().unwrap().contains("skyport"));
    }
}

#[test]
fn corrupt_input_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("out/data");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("trips.csv"), "what,is,this\n1,2,3\n").unwrap();
    fs::write(data.join("weather.csv"), "").unwrap();
    let out = skyport(dir.path(), SMALL, &["prepare"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "format");
}

#[test]
fn generate_is_seed_deterministic_and_seed_flag_overrides() {
    let dir = TempDir::new().unwrap();
    ok(&skyport(dir.path(), SMALL, &["generate"]));
    let trips = read(dir.path().join("out/data/trips.csv"));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("out/data/manifest.json"))).unwrap();
    assert_eq!(manifest["spec"]["trips"], 3000);
    ok(&skyport(dir.path(), SMALL, &["generate"]));
    assert_eq!(read(dir.path().join("out/data/trips.csv")), trips);
    ok(&skyport(dir.path(), SMALL, &["generate", "--seed", "12"]));
    assert_ne!(read(dir.path().join("out/data/trips.csv")), trips);
}

#[test]
fn prepare_writes_one_dataset_per_k_and_listwise_keeps_complete_data() {
    let dir = TempDir::new().unwrap();
    let complete = format!("{SMALL}missing_rate = 0.0\n");
    ok(&skyport(dir.path(), &complete, &["generate"]));
    ok(&skyport(dir.path(), &complete, &["prepare"]));
    for k in [5, 10] {
        let k_dir = dir.path().join(format!("out/k{k}"));
        for f in ["samples.csv", "clusters.json", "bins.json", "encoder.json", "imputer.json", "prepare_log.csv"] {
            assert!(k_dir.join(f).exists(), "k{k}/{f}");
        }
        let log: serde_json::Value = serde_json::from_str(&read(k_dir.join("prepare_log.json"))).unwrap();
        assert_eq!(log["samples"]["dropped"], 0);
        let clusters: serde_json::Value = serde_json::from_str(&read(k_dir.join("clusters.json"))).unwrap();
        assert_eq!(clusters["centroids"].as_array().unwrap().len(), k);
    }
    assert!(!dir.path().join("out/k15").exists());
}

#[test]
fn dropped_rows_get_a_retained_versus_removed_summary() {
    let dir = TempDir::new().unwrap();
    let lossy = format!("{SMALL}missing_rate = 0.05\n");
    ok(&skyport(dir.path(), &lossy, &["generate"]));
    ok(&skyport(dir.path(), &lossy, &["prepare"]));
    let log = read(dir.path().join("out/k5/prepare_log.csv"));
    assert!(log.starts_with("group,column,count,missing,mean,std,min,max"));
    assert!(log.lines().any(|l| l.starts_with("removed,visibility,")));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("out/k5/prepare_log.json"))).unwrap();
    assert!(json["samples"]["dropped"].as_u64().unwrap() > 0);
}

#[test]
fn full_run_produces_every_artifact_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    ok(&skyport(dir.path(), SMALL, &["run"]));
    let out = dir.path().join("out");
    for k in [5, 10] {
        for learner in ["lr", "ann", "rf", "gb"] {
            assert!(out.join(format!("k{k}/models/{learner}.json")).exists());
            assert!(out.join(format!("k{k}/cv/{learner}.json")).exists());
            assert!(out.join(format!("k{k}/timing/{learner}.json")).exists());
        }
        // logistic regression has nothing to search
        assert!(!out.join(format!("k{k}/grid/lr.json")).exists());
        assert!(out.join(format!("k{k}/grid/gb.csv")).exists());
    }

    let metrics = read(out.join("metrics.csv"));
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("k,learner,evaluation,class,precision,recall,f1"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    // 2 K x 4 learners x {test, cv} x (3 classes + average)
    assert_eq!(rows.len(), 2 * 4 * 2 * 4);
    for block in rows.chunks(4) {
        assert_eq!(block[3][3], "average");
        for col in 4..7 {
            let mean = block[..3].iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / 3.0;
            assert!((mean - block[3][col].parse::<f64>().unwrap()).abs() <= 1.5e-4);
        }
    }
    let timing = read(out.join("timing.csv"));
    assert!(timing.starts_with("k,learner,grid_seconds,fit_seconds,training_seconds"));
    for line in timing.lines().skip(1) {
        for v in line.split(',').skip(2) {
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }

    let top = read(out.join("top_features.csv"));
    assert_eq!(top.lines().count(), 1 + 2 * 5);
    let report = read(out.join("report.md"));
    assert!(report.contains("None: every artifact was found."));
    assert!(report.contains("timing.csv"));
    let by_day: Vec<serde_json::Value> =
        serde_json::from_str(&read(out.join("demand_by_day_of_week.json"))).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&read(out.join("data/manifest.json"))).unwrap();
    let by_day_trips: u64 = by_day.iter().map(|b| b["trips"].as_u64().unwrap()).sum();
    let planted: u64 = manifest["trips_by_day_of_week"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(by_day_trips, planted);

    // same seed: identical models; deleted intermediates come back identical
    let model = read(out.join("k5/models/gb.json"));
    let samples = read(out.join("k10/samples.csv"));
    fs::remove_dir_all(out.join("k10")).unwrap();
    fs::remove_dir_all(out.join("k5/models")).unwrap();
    ok(&skyport(dir.path(), SMALL, &["prepare"]));
    ok(&skyport(dir.path(), SMALL, &["train"]));
    assert_eq!(read(out.join("k5/models/gb.json")), model);
    assert_eq!(read(out.join("k10/samples.csv")), samples);
}

#[test]
fn importance_defaults_to_the_best_learner_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = SMALL.replace("k_values = [5, 10]", "k_values = [5]");
    ok(&skyport(dir.path(), &config, &["run"]));
    let out = dir.path().join("out");
    let metrics: serde_json::Value = serde_json::from_str(&read(out.join("metrics.json"))).unwrap();
    let best = metrics["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["evaluation"] == "test" && r["class"] == "average")
        .fold(("", -1.0), |acc, r| {
            let f1 = r["f1"].as_f64().unwrap();
            if f1 > acc.1 {
                (r["learner"].as_str().unwrap(), f1)
            } else {
                acc
            }
        })
        .0
        .to_string();
    let table = out.join(format!("k5/importance/{best}.json"));
    let first = read(&table);
    ok(&skyport(dir.path(), &config, &["importance"]));
    assert_eq!(read(&table), first);
    let csv = read(out.join(format!("k5/importance/{best}.csv")));
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn report_with_partial_artifacts_lists_the_gaps() {
    let dir = TempDir::new().unwrap();
    ok(&skyport(dir.path(), SMALL, &["generate"]));
    ok(&skyport(dir.path(), SMALL, &["report"]));
    let report = read(dir.path().join("out/report.md"));
    assert!(report.contains("## Gaps"));
    assert!(report.contains("metrics"));
    assert!(!report.contains("None: every artifact was found."));
    let by_month = read(dir.path().join("out/demand_by_month.csv"));
    assert_eq!(by_month.lines().count(), 1 + 12);
}
