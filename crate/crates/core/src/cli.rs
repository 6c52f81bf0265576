//! The `bldgclass` command line.
//!
//! Settings resolve in three layers: built-in defaults, then the JSON file
//! given with `--config`, then individual flags.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::features::{
    analyze, build_attribute_table, encode_features, parse_label_text, read_csv, stratified_split,
    transform, write_csv, CsvFrame, EncodingSpec, ExtractConfig, SplitRatios, DEFAULT_FLOOR_HEIGHT,
    DEFAULT_GROUND_ELEV,
};
use crate::geodata_io::{
    parse_ascii_grid, parse_footprints, write_ascii_grid, write_footprints, write_predictions,
    BuildingClass, Prediction,
};
use crate::neuralnet::{bce_loss, init_mlp, load_model, save_model, ModelBundle, DEFAULT_ALPHA, DEFAULT_HIDDEN};
use crate::synth::{generate, rasterize_synthetic_scene, SceneConfig, SynthConfig};
use crate::trainer::{classification_report, evaluate, predict, train, ClassificationReport, TrainConfig, TrainError};

const PRECEDENCE: &str = "Settings precedence: flags override the --config JSON file, \
which overrides built-in defaults.";

#[derive(Debug, Parser)]
#[command(name = "bldgclass", version, about = "Residential vs non-residential building classification", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the per-building attribute table from a DEM and footprints.
    Extract(ExtractArgs),
    /// Correlation matrix and correlated-feature pruning.
    Analyze(AnalyzeArgs),
    /// Train the network on a feature CSV.
    Train(TrainArgs),
    /// Classify buildings from a feature CSV or from footprints plus a DEM.
    Predict(PredictArgs),
    /// Score predictions against labels.
    Evaluate(EvaluateArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
#[command(after_help = PRECEDENCE)]
pub struct ExtractArgs {
    /// ESRI ASCII Grid DEM.
    pub dem: PathBuf,
    /// GeoJSON FeatureCollection of footprints.
    pub footprints: PathBuf,
    /// Output feature CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground elevation in meters [default: 17.5].
    #[arg(long)]
    pub ground_elev: Option<f64>,
    /// Storey height in meters [default: 3.0].
    #[arg(long)]
    pub floor_height: Option<f64>,
}

#[derive(Debug, Args)]
#[command(after_help = PRECEDENCE)]
pub struct AnalyzeArgs {
    /// Feature CSV.
    pub features: PathBuf,
    /// Output report JSON.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Absolute correlation above which a feature is dropped [default: 0.9].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma separated features that are never dropped [default: ht,area_sqft].
    #[arg(long)]
    pub keep: Option<String>,
    /// Comma separated features to analyze
    /// [default: zonal_mean,floor,area_sqft,area_sqm,nodes,ht].
    #[arg(long)]
    pub features_list: Option<String>,
}

#[derive(Debug, Args)]
#[command(after_help = PRECEDENCE)]
pub struct TrainArgs {
    /// Labelled feature CSV.
    pub features: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Output metrics JSON (test split report).
    #[arg(long)]
    pub metrics: PathBuf,
    /// Output per-epoch history CSV.
    #[arg(long)]
    pub history: PathBuf,
    /// Seed for the split, initialization and shuffling [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning rate [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Mini-batch size [default: 8].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum epochs [default: 500].
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Early-stopping patience in epochs [default: 50].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Comma separated hidden layer widths [default: 1024,512,128,64,32,16,8].
    #[arg(long)]
    pub hidden: Option<String>,
}

#[derive(Debug, Args)]
#[command(after_help = PRECEDENCE)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    pub model: PathBuf,
    /// Feature CSV input.
    #[arg(long, conflicts_with_all = ["footprints", "dem"], required_unless_present = "footprints")]
    pub features: Option<PathBuf>,
    /// GeoJSON footprints input (needs --dem).
    #[arg(long, requires = "dem")]
    pub footprints: Option<PathBuf>,
    #[arg(long, requires = "footprints")]
    pub dem: Option<PathBuf>,
    /// Output CSV (for --features) or GeoJSON (for --footprints).
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground elevation in meters [default: 17.5].
    #[arg(long)]
    pub ground_elev: Option<f64>,
    /// Residential probability threshold [default: 0.5].
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with UID and pred_class columns (pred_prob optional).
    pub predictions: PathBuf,
    /// CSV with UID and label columns; defaults to the predictions file itself.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Label column name.
    #[arg(long, default_value = "res")]
    pub label_column: String,
    /// Output report JSON.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(after_help = PRECEDENCE)]
pub struct SynthArgs {
    /// Output feature CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of buildings [default: 15999].
    #[arg(long)]
    pub n: Option<usize>,
    /// Non-residential fraction [default: 0.0261].
    #[arg(long)]
    pub imbalance: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Label flip probability [default: 0].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Write a noise-free `UID,res` CSV of the planted rule's labels.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Also rasterize a scene (needs --dem-out and --footprints-out).
    #[arg(long, requires_all = ["dem_out", "footprints_out"])]
    pub scene: bool,
    #[arg(long)]
    pub dem_out: Option<PathBuf>,
    #[arg(long)]
    pub footprints_out: Option<PathBuf>,
    /// Attribute CSV of the buildings placed in the scene.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    /// Buildings placed in the scene [default: 100].
    #[arg(long)]
    pub scene_buildings: Option<usize>,
    /// Scene width and height in cells [default: 1000].
    #[arg(long)]
    pub scene_size: Option<usize>,
}

/// Everything a run can be configured with. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Drives the split, initialization and shuffling; replaces `train.seed`.
    pub seed: u64,
    pub train: TrainConfig,
    pub features: EncodingSpec,
    pub split: SplitRatios,
    pub hidden_layers: Vec<usize>,
    pub alpha: f64,
    pub ground_elev: f64,
    pub floor_height: f64,
    pub prune_threshold: f64,
    pub keep: Vec<String>,
    pub analyze_features: Vec<String>,
    pub synth: SynthConfig,
    pub scene: SceneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            train: TrainConfig::default(),
            features: EncodingSpec::default(),
            split: SplitRatios::default(),
            hidden_layers: DEFAULT_HIDDEN.to_vec(),
            alpha: DEFAULT_ALPHA,
            ground_elev: DEFAULT_GROUND_ELEV,
            floor_height: DEFAULT_FLOOR_HEIGHT,
            prune_threshold: 0.9,
            keep: vec!["ht".into(), "area_sqft".into()],
            analyze_features: ["zonal_mean", "floor", "area_sqft", "area_sqm", "nodes", "ht"]
                .map(String::from)
                .to_vec(),
            synth: SynthConfig::default(),
            scene: SceneConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = read_text(path)?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            ground_elev: self.ground_elev,
            floor_height: self.floor_height,
            ..ExtractConfig::default()
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Check `text` parses back, then write it through a temporary sibling file.
fn write_checked(path: &Path, text: &str, check: impl FnOnce(&str) -> Result<()>) -> Result<()> {
    check(text).with_context(|| format!("output for {} does not parse back", path.display()))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

fn check_json(text: &str) -> Result<()> {
    serde_json::from_str::<serde_json::Value>(text)?;
    Ok(())
}

fn check_frame(text: &str) -> Result<()> {
    CsvFrame::parse(text)?;
    Ok(())
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(g) = args.ground_elev {
        cfg.ground_elev = g;
    }
    if let Some(f) = args.floor_height {
        cfg.floor_height = f;
    }
    let grid = parse_ascii_grid(&read_text(&args.dem)?)
        .with_context(|| format!("invalid DEM {}", args.dem.display()))?;
    let records = parse_footprints(&read_text(&args.footprints)?)
        .with_context(|| format!("invalid footprints {}", args.footprints.display()))?;
    let build = build_attribute_table(&grid, &records, &cfg.extract_config())?;
    for failure in &build.failures {
        log::warn!("skipped {failure}");
    }
    write_checked(&args.out, &write_csv(&build.table), |t| Ok(read_csv(t).map(drop)?))?;
    println!(
        "wrote {} rows to {}, skipped {}",
        build.table.len(),
        args.out.display(),
        build.failures.len()
    );
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let threshold = args.threshold.unwrap_or(cfg.prune_threshold);
    let keep = args.keep.as_deref().map(split_list).unwrap_or(cfg.keep);
    let features = args
        .features_list
        .as_deref()
        .map(split_list)
        .unwrap_or(cfg.analyze_features);
    let table = read_csv(&read_text(&args.features)?)
        .with_context(|| format!("invalid feature CSV {}", args.features.display()))?;
    let report = analyze(&table, &features, threshold, &keep)?;
    let text = serde_json::to_string_pretty(&report)?;
    write_checked(&args.out, &text, check_json)?;
    println!("kept {:?}, dropped {:?}", report.kept, report.dropped);
    Ok(())
}

/// Contents of the metrics file written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    pub feature_names: Vec<String>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub validation: ClassificationReport,
    pub test: ClassificationReport,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.train.patience = v;
    }
    if let Some(h) = &args.hidden {
        cfg.hidden_layers = h
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("invalid --hidden `{h}`"))?;
    }
    cfg.train.seed = cfg.seed;
    cfg.train.validate()?;

    let table = read_csv(&read_text(&args.features)?)
        .with_context(|| format!("invalid feature CSV {}", args.features.display()))?;
    let labels = table.labels()?;
    let split = stratified_split(&labels, cfg.split, cfg.seed)?;
    let data = encode_features(&table, &cfg.features, &split.train)?;
    let mut sizes = vec![data.x.ncols()];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(1);
    let mlp = init_mlp(&sizes, cfg.alpha, cfg.seed)?;

    let outcome = train(mlp, &data, &split, &cfg.train)?;
    let threshold = cfg.train.threshold;
    let validation = evaluate(&outcome.model, &data, &split.val, threshold)?;
    let test = evaluate(&outcome.model, &data, &split.test, threshold)?;

    let bundle = ModelBundle {
        mlp: outcome.model,
        feature_spec: data.spec.clone(),
        standardization: data.standardization.clone(),
        seed: Some(cfg.seed),
    };
    let metrics = TrainMetrics {
        seed: cfg.seed,
        layer_sizes: sizes,
        feature_names: data.feature_names.clone(),
        best_epoch: outcome.history.best_epoch,
        stopped_epoch: outcome.history.stopped_epoch,
        validation,
        test,
    };
    write_checked(&args.model, &save_model(&bundle), |t| Ok(load_model(t).map(drop)?))?;
    write_checked(&args.metrics, &serde_json::to_string_pretty(&metrics)?, check_json)?;
    write_checked(&args.history, &outcome.history.to_csv(), check_frame)?;
    println!(
        "best epoch {}, stopped at epoch {}, test weighted F1 {:.4}",
        metrics.best_epoch, metrics.stopped_epoch, metrics.test.weighted_avg.f1
    );
    Ok(())
}

fn format_prediction(p: &Prediction) -> [String; 2] {
    [p.probability.to_string(), p.class.as_str().to_string()]
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(g) = args.ground_elev {
        cfg.ground_elev = g;
    }
    let threshold = args.threshold.unwrap_or(cfg.train.threshold);
    let bundle = load_model(&read_text(&args.model)?)
        .with_context(|| format!("invalid model {}", args.model.display()))?;
    let run = |source: &dyn crate::features::FeatureSource| -> Result<Vec<Prediction>> {
        let x = transform(source, &bundle.feature_spec, &bundle.standardization)?;
        let (probs, classes) = predict(&bundle.mlp, &x, threshold)?;
        Ok(probs
            .into_iter()
            .zip(classes)
            .map(|(probability, class)| Prediction { probability, class })
            .collect())
    };

    if let Some(features) = &args.features {
        let mut frame = CsvFrame::parse(&read_text(features)?)
            .with_context(|| format!("invalid CSV {}", features.display()))?;
        let preds = run(&frame).with_context(|| format!("cannot predict from {}", features.display()))?;
        for name in ["pred_prob", "pred_class"] {
            if let Ok(i) = frame.column_index(name) {
                frame.headers.remove(i);
                frame.records.iter_mut().for_each(|r| drop(r.remove(i)));
            }
        }
        frame.headers.extend(["pred_prob".to_string(), "pred_class".to_string()]);
        for (rec, p) in frame.records.iter_mut().zip(&preds) {
            rec.extend(format_prediction(p));
        }
        write_checked(&args.out, &frame.to_csv(), check_frame)?;
        println!("wrote {} predictions to {}", preds.len(), args.out.display());
        return Ok(());
    }

    let (fp_path, dem_path) = match (&args.footprints, &args.dem) {
        (Some(f), Some(d)) => (f, d),
        _ => bail!("predict needs --features or both --footprints and --dem"),
    };
    let grid = parse_ascii_grid(&read_text(dem_path)?)
        .with_context(|| format!("invalid DEM {}", dem_path.display()))?;
    let records = parse_footprints(&read_text(fp_path)?)
        .with_context(|| format!("invalid footprints {}", fp_path.display()))?;
    let build = build_attribute_table(&grid, &records, &cfg.extract_config())?;
    for failure in &build.failures {
        log::warn!("skipped {failure}");
    }
    let preds = run(&build.table)?;
    let kept: HashSet<&str> = build.table.rows.iter().map(|r| r.uid.as_str()).collect();
    let records: Vec<_> = records.into_iter().filter(|r| kept.contains(r.uid.as_str())).collect();
    let text = write_predictions(&records, &preds)?;
    write_checked(&args.out, &text, |t| Ok(parse_footprints(t).map(drop)?))?;
    println!(
        "classified {} footprints into {}, skipped {}",
        preds.len(),
        args.out.display(),
        build.failures.len()
    );
    Ok(())
}

fn uid_column(frame: &CsvFrame, path: &Path) -> Result<usize> {
    frame
        .column_index("UID")
        .with_context(|| format!("{} has no UID column", path.display()))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let preds = CsvFrame::parse(&read_text(&args.predictions)?)
        .with_context(|| format!("invalid CSV {}", args.predictions.display()))?;
    let p_uid = uid_column(&preds, &args.predictions)?;
    let p_class = preds.column_index("pred_class")?;
    let p_prob = preds.column_index("pred_prob").ok();

    let label_path = args.labels.as_ref().unwrap_or(&args.predictions);
    let labels_frame = match &args.labels {
        Some(path) => CsvFrame::parse(&read_text(path)?).with_context(|| format!("invalid CSV {}", path.display()))?,
        None => preds.clone(),
    };
    let l_uid = uid_column(&labels_frame, label_path)?;
    let l_col = labels_frame
        .column_index(&args.label_column)
        .with_context(|| format!("{} has no `{}` column", label_path.display(), args.label_column))?;

    let mut labels: HashMap<&str, u8> = HashMap::new();
    for rec in &labels_frame.records {
        let uid = rec[l_uid].as_str();
        let label = parse_label_text(&rec[l_col])
            .ok_or_else(|| anyhow!("{uid}: unrecognized label `{}`", rec[l_col]))?;
        if labels.insert(uid, label).is_some() {
            bail!("duplicate UID `{uid}` in {}", label_path.display());
        }
    }

    let mut seen = HashSet::new();
    let (mut y_true, mut y_pred, mut probs) = (Vec::new(), Vec::new(), Vec::new());
    let mut unmatched = Vec::new();
    for rec in &preds.records {
        let uid = rec[p_uid].as_str();
        if !seen.insert(uid) {
            bail!("duplicate UID `{uid}` in {}", args.predictions.display());
        }
        let Some(&label) = labels.get(uid) else {
            unmatched.push(uid);
            continue;
        };
        let class = BuildingClass::parse(&rec[p_class])
            .ok_or_else(|| anyhow!("{uid}: unrecognized pred_class `{}`", rec[p_class]))?;
        y_true.push(label);
        y_pred.push(class.label());
        if let Some(i) = p_prob {
            probs.push(rec[i].parse::<f64>().with_context(|| format!("{uid}: bad pred_prob"))?);
        }
    }
    let missing = labels.keys().filter(|u| !seen.contains(*u)).count();
    if !unmatched.is_empty() || missing > 0 {
        bail!(
            "uid mismatch: {} predictions without a label, {} labels without a prediction",
            unmatched.len(),
            missing
        );
    }
    let loss = if p_prob.is_some() {
        let y: Vec<f64> = y_true.iter().map(|&l| f64::from(l)).collect();
        Some(bce_loss(&probs, &y)?)
    } else {
        None
    };
    let report = classification_report(&y_true, &y_pred, loss)?;
    write_checked(&args.out, &report.to_json(), check_json)?;
    println!(
        "accuracy {:.4}, weighted F1 {:.4}, non-residential F1 {:.4}",
        report.accuracy, report.weighted_avg.f1, report.classes.non_residential.f1
    );
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let mut synth = cfg.synth;
    if let Some(n) = args.n {
        synth.n = n;
    }
    if let Some(f) = args.imbalance {
        synth.minority_fraction = f;
    }
    if let Some(s) = args.seed {
        synth.seed = s;
    }
    if let Some(r) = args.noise {
        synth.noise_rate = r;
    }
    let data = generate(&synth)?;
    write_checked(&args.out, &write_csv(&data.table), |t| Ok(read_csv(t).map(drop)?))?;
    if let Some(path) = &args.oracle {
        let mut text = String::from("UID,res\n");
        for (row, label) in data.table.rows.iter().zip(&data.oracle) {
            text.push_str(&format!("{},{label}\n", row.uid));
        }
        write_checked(path, &text, check_frame)?;
    }
    let minority = data.table.rows.iter().filter(|r| r.res == Some(0)).count();
    println!(
        "wrote {} rows ({} non-residential) to {}",
        data.table.len(),
        minority,
        args.out.display()
    );

    if args.scene {
        let mut scene = cfg.scene;
        if let Some(b) = args.scene_buildings {
            scene.buildings = b;
        }
        if let Some(s) = args.scene_size {
            scene.ncols = s;
            scene.nrows = s;
        }
        let s = rasterize_synthetic_scene(&synth, &scene)?;
        let (dem, fp) = (args.dem_out.as_ref().unwrap(), args.footprints_out.as_ref().unwrap());
        write_checked(dem, &write_ascii_grid(&s.grid), |t| Ok(parse_ascii_grid(t).map(drop)?))?;
        write_checked(fp, &write_footprints(&s.footprints), |t| Ok(parse_footprints(t).map(drop)?))?;
        if let Some(path) = &args.truth_out {
            write_checked(path, &write_csv(&s.truth), |t| Ok(read_csv(t).map(drop)?))?;
        }
        println!("placed {} buildings on a {}x{} DEM", s.footprints.len(), scene.ncols, scene.nrows);
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Extract(a) => cmd_extract(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Process exit code for a failed run: 2 when training diverged, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let diverged = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<TrainError>(), Some(TrainError::DivergedLoss { .. })));
    if diverged {
        2
    } else {
        1
    }
}

/// Parse `args`, run, and return the exit code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"train": {"patience": 5}}"#).unwrap();
        assert_eq!(c.train.patience, 5);
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.hidden_layers, DEFAULT_HIDDEN.to_vec());
    }

    #[test]
    fn defaults_match_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!(c.train.batch_size, 8);
        assert_eq!(c.train.max_epochs, 500);
        assert_eq!(c.alpha, 0.01);
        assert_eq!(c.prune_threshold, 0.9);
    }

    #[test]
    fn diverged_maps_to_two() {
        let e = anyhow::Error::from(TrainError::DivergedLoss { epoch: 3 });
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&anyhow!("other")), 1);
    }

    #[test]
    fn cli_parses() {
        Cli::try_parse_from(["bldgclass", "synth", "-o", "x.csv", "--n", "10"]).unwrap();
        assert!(Cli::try_parse_from(["bldgclass", "predict", "m.json", "-o", "x"]).is_err());
    }
}
