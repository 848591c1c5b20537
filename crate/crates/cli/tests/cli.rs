use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tagwatch::dataset::{Injection, Perturbation, SynthConfig};

fn small_synth() -> SynthConfig {
    let mut s = SynthConfig::demo();
    s.length = 1500;
    s.train_length = 3000;
    s.injections.retain(|inj| inj.end <= 1500);
    s
}

fn write_config(dir: &Path, synth: &SynthConfig, extra: &str) -> PathBuf {
    let mut table = toml::Table::new();
    table.insert("seed".into(), toml::Value::Integer(7));
    table.insert(
        "out_dir".into(),
        toml::Value::String(dir.join("out").display().to_string()),
    );
    let mut dataset = toml::Table::new();
    dataset.insert("synthetic".into(), toml::Value::try_from(synth).unwrap());
    table.insert("dataset".into(), toml::Value::Table(dataset));
    let text = format!("{}\n{extra}", toml::to_string(&table).unwrap());
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn tagwatch(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagwatch"))
        .arg("--config")
        .arg(config)
        .arg("--quiet")
        .args(["--set", "train.epochs=2"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_is_deterministic_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    ok(&tagwatch(&cfg, &["generate"]));
    let data = tmp.path().join("out/data");
    let first: Vec<Vec<u8>> = ["train.csv", "test.csv", "attacks.csv"]
        .iter()
        .map(|f| fs::read(data.join(f)).unwrap())
        .collect();
    ok(&tagwatch(&cfg, &["generate"]));
    let second: Vec<Vec<u8>> = ["train.csv", "test.csv", "attacks.csv"]
        .iter()
        .map(|f| fs::read(data.join(f)).unwrap())
        .collect();
    assert_eq!(first, second);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join("generate.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn overlapping_injections_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut synth = small_synth();
    synth.injections.push(Injection {
        start: 410,
        end: 450,
        tags: vec!["LIT101".into()],
        perturbation: Perturbation::Freeze,
    });
    let cfg = write_config(tmp.path(), &synth, "");
    let out = tagwatch(&cfg, &["generate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("dataset.synthetic") && err.contains("overlap"),
        "{err}"
    );
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn missing_dataset_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    let out = tagwatch(&cfg, &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset.train"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    let out = tagwatch(&cfg, &["--set", "train.epochz=3", "generate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_detect_score_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    let out_dir = tmp.path().join("out");
    ok(&tagwatch(&cfg, &["generate"]));
    ok(&tagwatch(&cfg, &["train"]));
    let model = fs::read(out_dir.join("bundle/model.bin")).unwrap();
    ok(&tagwatch(&cfg, &["train"]));
    assert_eq!(model, fs::read(out_dir.join("bundle/model.bin")).unwrap());

    // detect refits a missing calibration and stores it next to the model
    fs::remove_file(out_dir.join("bundle/calibration.json")).unwrap();
    ok(&tagwatch(&cfg, &["detect", "--svg"]));
    assert!(out_dir.join("bundle/calibration.json").is_file());
    for f in [
        "events.csv",
        "series.csv",
        "series.svg",
        "detect.manifest.json",
    ] {
        assert!(out_dir.join("detect").join(f).is_file(), "{f}");
    }
    ok(&tagwatch(&cfg, &["score"]));
    let csv = fs::read_to_string(out_dir.join("score/score.csv")).unwrap();
    assert!(csv.starts_with("nab,precision,recall,f1,tp,fp,fn,mean_delay_s,mean_delay_ratio\n"));
    let attacks = fs::read_to_string(out_dir.join("score/attacks.csv")).unwrap();
    assert_eq!(attacks.lines().count(), 1 + small_synth().injections.len());
}

#[test]
fn empty_detections_score_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    let out_dir = tmp.path().join("out");
    ok(&tagwatch(&cfg, &["generate"]));
    let det = tmp.path().join("none");
    fs::create_dir_all(&det).unwrap();
    fs::write(
        det.join("events.csv"),
        "event,start,end,duration,peak,peak_time,start_time,end_time\n",
    )
    .unwrap();
    let mut series = String::from("t,timestamp,m,threshold,flag\n");
    for t in 0..1500 {
        series.push_str(&format!("{t},{t},0,1,0\n"));
    }
    fs::write(det.join("series.csv"), series).unwrap();
    ok(&tagwatch(
        &cfg,
        &["score", "--detections", det.to_str().unwrap()],
    ));
    let csv = fs::read_to_string(out_dir.join("score/score.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn search_writes_history_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let template = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy_template.toml");
    let extra = format!(
        "[model]\ntemplate = {:?}\n\n[search]\npopulation = 4\ngenerations = 2\nepochs = 1\n",
        template.display().to_string()
    );
    let cfg = write_config(tmp.path(), &small_synth(), &extra);
    ok(&tagwatch(&cfg, &["generate"]));
    ok(&tagwatch(&cfg, &["search"]));
    let search = tmp.path().join("out/search");
    let history = fs::read_to_string(search.join("history.csv")).unwrap();
    let best: Vec<f64> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(best.len(), 2);
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    assert!(search.join("bundle/model.bin").is_file());
    assert!(search.join("best_genome.json").is_file());

    ok(&tagwatch(
        &cfg,
        &["--set", "search.generations=3", "search", "--resume"],
    ));
    let history = fs::read_to_string(search.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
}

#[test]
fn search_without_template_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_synth(), "");
    let out = tagwatch(&cfg, &["search"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.template"));
}
