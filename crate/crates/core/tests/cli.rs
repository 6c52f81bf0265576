use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bldgclass::features::{read_csv, stratified_split, CsvFrame, SplitRatios};
use bldgclass::geodata_io::{parse_footprints, write_ascii_grid, write_footprints};
use bldgclass::synth::{rasterize_synthetic_scene, SceneConfig, SynthConfig};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bldgclass"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_NET: &str = r#"{"hidden_layers": [16, 8], "train": {"max_epochs": 15, "patience": 5}}"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn synth(&self, name: &str, n: &str, imbalance: &str) -> PathBuf {
        let p = self.path(name);
        let o = bin(&["synth", "-o", s(&p), "--n", n, "--imbalance", imbalance, "--seed", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        p
    }

    fn trained(&self) -> (PathBuf, PathBuf, PathBuf) {
        let csv = self.synth("train.csv", "1200", "0.1");
        let cfg = self.path("cfg.json");
        fs::write(&cfg, SMALL_NET).unwrap();
        let (model, metrics, history) = (self.path("model.json"), self.path("metrics.json"), self.path("history.csv"));
        let o = bin(&[
            "train",
            s(&csv),
            "--config",
            s(&cfg),
            "--model",
            s(&model),
            "--metrics",
            s(&metrics),
            "--history",
            s(&history),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("test weighted F1"));
        (csv, model, metrics)
    }
}

#[test]
fn synth_counts_and_determinism() {
    let w = Workspace::new();
    let a = w.synth("a.csv", "15999", "0.0261");
    let b = w.synth("b.csv", "15999", "0.0261");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let table = read_csv(&fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(table.rows.iter().filter(|r| r.res == Some(0)).count(), 417);
    assert_eq!(table.len(), 15999);
}

#[test]
fn synth_rejects_majority_minority() {
    let w = Workspace::new();
    let o = bin(&["synth", "-o", s(&w.path("x.csv")), "--imbalance", "0.6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!w.path("x.csv").exists());
}

#[test]
fn extract_scene_and_skip_outside_footprint() {
    let w = Workspace::new();
    let synth = SynthConfig {
        n: 500,
        ..SynthConfig::default()
    };
    let scene = SceneConfig {
        ncols: 200,
        nrows: 200,
        buildings: 10,
        ..SceneConfig::default()
    };
    let mut sc = rasterize_synthetic_scene(&synth, &scene).unwrap();
    let mut outside = sc.footprints[0].clone();
    outside.uid = "far-away".into();
    outside.attributes.insert("UID".into(), "far-away".into());
    outside.geometry = outside.geometry.translated(5000.0, 5000.0);
    sc.footprints.push(outside);
    let (dem, fp, out) = (w.path("dem.asc"), w.path("fp.geojson"), w.path("features.csv"));
    fs::write(&dem, write_ascii_grid(&sc.grid)).unwrap();
    fs::write(&fp, write_footprints(&sc.footprints)).unwrap();
    let o = bin(&["extract", s(&dem), s(&fp), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("far-away"));
    let table = read_csv(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table.len(), 10);
}

#[test]
fn extract_missing_dem_names_path() {
    let w = Workspace::new();
    let missing = w.path("no-such-dem.asc");
    let o = bin(&["extract", s(&missing), s(&w.path("fp.geojson")), "-o", s(&w.path("o.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-dem.asc"));
}

#[test]
fn analyze_reports_and_validates_keep() {
    let w = Workspace::new();
    let csv = w.synth("t.csv", "3000", "0.0261");
    let out = w.path("eda.json");
    let o = bin(&["analyze", s(&csv), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["dropped"], serde_json::json!(["zonal_mean", "floor", "area_sqm"]));

    let o = bin(&["analyze", s(&csv), "-o", s(&out), "--keep", "ht,bogus"]);
    assert_eq!(o.status.code(), Some(1));

    let text = fs::read_to_string(&csv).unwrap();
    let two: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    let small = w.path("two.csv");
    fs::write(&small, two).unwrap();
    let o = bin(&["analyze", s(&small), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn train_rejects_negative_learning_rate() {
    let w = Workspace::new();
    let csv = w.synth("t.csv", "500", "0.1");
    let cfg = w.path("cfg.json");
    fs::write(&cfg, r#"{"train": {"learning_rate": -0.1}}"#).unwrap();
    let o = bin(&[
        "train",
        s(&csv),
        "--config",
        s(&cfg),
        "--model",
        s(&w.path("m.json")),
        "--metrics",
        s(&w.path("x.json")),
        "--history",
        s(&w.path("h.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn train_divergence_exits_two() {
    let w = Workspace::new();
    let csv = w.synth("t.csv", "500", "0.1");
    let cfg = w.path("cfg.json");
    fs::write(&cfg, SMALL_NET).unwrap();
    let o = bin(&[
        "train",
        s(&csv),
        "--config",
        s(&cfg),
        "--learning-rate",
        "1e300",
        "--model",
        s(&w.path("m.json")),
        "--metrics",
        s(&w.path("x.json")),
        "--history",
        s(&w.path("h.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!w.path("m.json").exists());
}

#[test]
fn unknown_config_key_rejected() {
    let w = Workspace::new();
    let csv = w.synth("t.csv", "500", "0.1");
    let cfg = w.path("cfg.json");
    fs::write(&cfg, r#"{"learning_rate": 0.01}"#).unwrap();
    let o = bin(&["analyze", s(&csv), "-o", s(&w.path("e.json")), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_csv_matches_stored_test_metrics() {
    let w = Workspace::new();
    let (csv, model, metrics) = w.trained();
    let preds = w.path("pred.csv");
    let o = bin(&["predict", s(&model), "--features", s(&csv), "-o", s(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let frame = CsvFrame::parse(&fs::read_to_string(&preds).unwrap()).unwrap();
    let table = read_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    let split = stratified_split(&table.labels().unwrap(), SplitRatios::default(), 42).unwrap();
    let class_col = frame.column_index("pred_class").unwrap();
    let mut cm = [[0usize; 2]; 2];
    for &i in &split.test {
        let truth = usize::from(table.rows[i].res.unwrap());
        let pred = usize::from(frame.records[i][class_col] == "residential");
        cm[truth][pred] += 1;
    }
    let stored: Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(stored["test"]["confusion_matrix"], serde_json::json!(cm));
    assert_eq!(stored["seed"], 42);
}

#[test]
fn predict_missing_column_named() {
    let w = Workspace::new();
    let (csv, model, _) = w.trained();
    let text = fs::read_to_string(&csv).unwrap().replace("RoofColor", "Roof");
    let broken = w.path("broken.csv");
    fs::write(&broken, text).unwrap();
    let o = bin(&["predict", s(&model), "--features", s(&broken), "-o", s(&w.path("p.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("RoofColor"));
}

#[test]
fn predict_geojson_preserves_geometry() {
    let w = Workspace::new();
    let (_, model, _) = w.trained();
    let scene = rasterize_synthetic_scene(
        &SynthConfig {
            n: 500,
            ..SynthConfig::default()
        },
        &SceneConfig {
            ncols: 150,
            nrows: 150,
            buildings: 8,
            ..SceneConfig::default()
        },
    )
    .unwrap();
    let (dem, fp, out) = (w.path("d.asc"), w.path("f.geojson"), w.path("classified.geojson"));
    fs::write(&dem, write_ascii_grid(&scene.grid)).unwrap();
    fs::write(&fp, write_footprints(&scene.footprints)).unwrap();
    let o = bin(&["predict", s(&model), "--footprints", s(&fp), "--dem", s(&dem), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let back = parse_footprints(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back.len(), scene.footprints.len());
    for (b, a) in back.iter().zip(&scene.footprints) {
        assert_eq!(b.geometry, a.geometry);
        assert!(b.attribute("pred_prob").is_some());
        assert!(b.attribute_text("pred_class").is_some());
    }
}

#[test]
fn evaluate_perfect_degenerate_and_mismatch() {
    let w = Workspace::new();
    let csv = w.synth("t.csv", "15999", "0.0261");
    let mut frame = CsvFrame::parse(&fs::read_to_string(&csv).unwrap()).unwrap();
    let res = frame.column_index("res").unwrap();
    frame.headers.push("pred_class".into());
    for r in frame.records.iter_mut() {
        let class = if r[res] == "1" { "residential" } else { "non_residential" };
        r.push(class.into());
    }
    let perfect = w.path("perfect.csv");
    fs::write(&perfect, frame.to_csv()).unwrap();
    let out = w.path("r.json");
    let o = bin(&["evaluate", s(&perfect), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["weighted_avg"]["f1"], 1.0);
    assert_eq!(r["classes"]["non_residential"]["f1"], 1.0);

    let last = frame.headers.len() - 1;
    frame.records.iter_mut().for_each(|r| r[last] = "residential".into());
    let degenerate = w.path("all_res.csv");
    fs::write(&degenerate, frame.to_csv()).unwrap();
    let o = bin(&["evaluate", s(&degenerate), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((r["accuracy"].as_f64().unwrap() - 0.9739).abs() < 5e-4);
    assert_eq!(r["classes"]["non_residential"]["f1"], 0.0);

    let labels = w.path("labels.csv");
    fs::write(&labels, "UID,res\nnobody,1\n").unwrap();
    let o = bin(&["evaluate", s(&perfect), "--labels", s(&labels), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("uid mismatch"));
}

#[test]
fn synth_scene_outputs_parse() {
    let w = Workspace::new();
    let (csv, dem, fp) = (w.path("t.csv"), w.path("d.asc"), w.path("f.geojson"));
    let o = bin(&[
        "synth",
        "-o",
        s(&csv),
        "--n",
        "400",
        "--imbalance",
        "0.05",
        "--scene",
        "--dem-out",
        s(&dem),
        "--footprints-out",
        s(&fp),
        "--scene-buildings",
        "20",
        "--scene-size",
        "300",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(parse_footprints(&fs::read_to_string(&fp).unwrap()).unwrap().len(), 20);
}

#[test]
fn help_lists_defaults() {
    let o = bin(&["train", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["0.001", "500", "50", "1024,512,128,64,32,16,8", "override"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}
