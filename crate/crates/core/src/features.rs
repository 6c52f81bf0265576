//! The per-building attribute table and everything done to it before training:
//! construction from a DEM and footprints, CSV exchange, Pearson correlation,
//! correlated-feature pruning, encoding/standardization and stratified splits.

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geodata_io::{DemGrid, FootprintRecord};
use crate::geometry::{self, GeometryError};

/// Square feet per square meter.
pub const SQFT_PER_SQM: f64 = 10.76391;
pub const DEFAULT_GROUND_ELEV: f64 = 17.5;
pub const DEFAULT_FLOOR_HEIGHT: f64 = 3.0;

/// Header of the feature CSV, in column order.
pub const CSV_HEADER: [&str; 12] = [
    "UID",
    "BuildType",
    "RoofColor",
    "zonal_mean",
    "zonal_max",
    "zonal_std",
    "floor",
    "area_sqft",
    "area_sqm",
    "nodes",
    "res",
    "ht",
];

/// Numeric columns in the order they appear in the attribute table.
pub const NUMERIC_FEATURES: [&str; 9] = [
    "zonal_mean",
    "zonal_max",
    "zonal_std",
    "floor",
    "area_sqft",
    "area_sqm",
    "nodes",
    "res",
    "ht",
];

pub const CATEGORICAL_FEATURES: [&str; 2] = ["BuildType", "RoofColor"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no footprints to process")]
    EmptyInput,
    #[error("{uid}: no valid DEM cell under the footprint")]
    NoCellsCovered { uid: String },
    #[error("{uid}: geometry error: {source}")]
    Geometry { uid: String, source: GeometryError },
    #[error("{uid}: missing or unrecognized residential label")]
    MissingLabel { uid: String },
    #[error("correlation needs at least 2 rows, got {0}")]
    InsufficientRows(usize),
    #[error("feature `{0}` is not numeric")]
    NonNumericFeature(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("keep-list names `{0}`, which is not among the analyzed features")]
    UnknownKeepFeature(String),
    #[error("prune threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("no rows to fit the encoding on")]
    EmptyFitSet,
    #[error("row index {0} is out of range")]
    RowOutOfRange(usize),
    #[error("class {class} has {count} rows; at least 3 are needed for a split")]
    ClassTooSmall { class: u8, count: usize },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios((f64, f64, f64)),
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("duplicate UID `{0}`")]
    DuplicateUid(String),
    #[error("CSV header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("CSV line {line}, column {column}: {message}")]
    BadCsvValue {
        line: usize,
        column: String,
        message: String,
    },
    #[error("CSV input is missing column `{0}`")]
    MissingColumn(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// One building of the derived attribute table.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub uid: String,
    pub build_type: Option<String>,
    pub roof_color: Option<String>,
    pub zonal_mean: f64,
    pub zonal_max: f64,
    pub zonal_std: f64,
    pub floor: f64,
    pub area_sqft: f64,
    pub area_sqm: f64,
    pub nodes: usize,
    /// 1 = residential, 0 = non-residential.
    pub res: Option<u8>,
    pub ht: f64,
}

impl AttributeRow {
    /// Value of a numeric column, `None` for an absent label.
    pub fn numeric(&self, name: &str) -> Result<Option<f64>, FeatureError> {
        Ok(Some(match name {
            "zonal_mean" => self.zonal_mean,
            "zonal_max" => self.zonal_max,
            "zonal_std" => self.zonal_std,
            "floor" => self.floor,
            "area_sqft" => self.area_sqft,
            "area_sqm" => self.area_sqm,
            "nodes" => self.nodes as f64,
            "ht" => self.ht,
            "res" => return Ok(self.res.map(f64::from)),
            n if CATEGORICAL_FEATURES.contains(&n) || n == "UID" => {
                return Err(FeatureError::NonNumericFeature(n.to_string()))
            }
            other => return Err(FeatureError::UnknownFeature(other.to_string())),
        }))
    }

    pub fn category(&self, name: &str) -> Result<Option<&str>, FeatureError> {
        match name {
            "RoofColor" => Ok(self.roof_color.as_deref()),
            "BuildType" => Ok(self.build_type.as_deref()),
            n if NUMERIC_FEATURES.contains(&n) => Ok(None),
            other => Err(FeatureError::UnknownFeature(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeTable {
    pub rows: Vec<AttributeRow>,
}

impl AttributeTable {
    pub fn new(rows: Vec<AttributeRow>) -> Self {
        AttributeTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, FeatureError> {
        self.rows
            .iter()
            .map(|r| {
                r.numeric(name)?
                    .ok_or_else(|| FeatureError::MissingLabel { uid: r.uid.clone() })
            })
            .collect()
    }

    /// The label column; every row must carry a label.
    pub fn labels(&self) -> Result<Vec<u8>, FeatureError> {
        self.rows
            .iter()
            .map(|r| r.res.ok_or_else(|| FeatureError::MissingLabel { uid: r.uid.clone() }))
            .collect()
    }
}

/// Which quantity the floor count is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorSource {
    #[default]
    ZonalMean,
    Ht,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    /// Ground elevation subtracted from the zonal mean to obtain building height.
    pub ground_elev: f64,
    pub floor_height: f64,
    pub sqft_per_sqm: f64,
    pub floor_source: FloorSource,
    /// Treat a missing or unparseable label as a row failure.
    pub require_labels: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            ground_elev: DEFAULT_GROUND_ELEV,
            floor_height: DEFAULT_FLOOR_HEIGHT,
            sqft_per_sqm: SQFT_PER_SQM,
            floor_source: FloorSource::ZonalMean,
            require_labels: false,
        }
    }
}

/// Interpret a `res` or `BuildType` property as a binary label.
pub fn parse_label(value: &Value) -> Option<u8> {
    match value {
        Value::Number(n) => match n.as_f64()? {
            v if v == 1.0 => Some(1),
            v if v == 0.0 => Some(0),
            _ => None,
        },
        Value::Bool(b) => Some(u8::from(*b)),
        Value::String(s) => parse_label_text(s),
        _ => None,
    }
}

pub fn parse_label_text(s: &str) -> Option<u8> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "residential" | "res" | "yes" | "true" => Some(1),
        "0" | "0.0" | "non-residential" | "non_residential" | "nonresidential" | "no" | "false" => {
            Some(0)
        }
        _ => None,
    }
}

fn record_label(rec: &FootprintRecord) -> Option<u8> {
    rec.attribute("res")
        .and_then(parse_label)
        .or_else(|| rec.attribute("BuildType").and_then(parse_label))
}

/// Derive one attribute row from the DEM and a footprint.
pub fn extract_row(
    grid: &DemGrid,
    rec: &FootprintRecord,
    config: &ExtractConfig,
) -> Result<AttributeRow, FeatureError> {
    let uid = || rec.uid.clone();
    let stats = geometry::zonal_stats(grid, &rec.geometry).map_err(|e| match e {
        GeometryError::NoCellsCovered => FeatureError::NoCellsCovered { uid: uid() },
        source => FeatureError::Geometry { uid: uid(), source },
    })?;
    let geom_err = |source| FeatureError::Geometry { uid: uid(), source };
    let area_sqm = geometry::polygon_area_sqm(&rec.geometry).map_err(geom_err)?;
    let nodes = geometry::node_count(&rec.geometry).map_err(geom_err)?;
    let res = record_label(rec);
    if config.require_labels && res.is_none() {
        return Err(FeatureError::MissingLabel { uid: uid() });
    }
    let ht = stats.mean - config.ground_elev;
    let floor = match config.floor_source {
        FloorSource::ZonalMean => stats.mean / config.floor_height,
        FloorSource::Ht => ht / config.floor_height,
    };
    Ok(AttributeRow {
        uid: uid(),
        build_type: rec.attribute_text("BuildType"),
        roof_color: rec.attribute_text("RoofColor"),
        zonal_mean: stats.mean,
        zonal_max: stats.max,
        zonal_std: stats.std,
        floor,
        area_sqft: area_sqm * config.sqft_per_sqm,
        area_sqm,
        nodes,
        res,
        ht,
    })
}

/// The attribute table plus the footprints that could not be processed.
#[derive(Debug)]
pub struct TableBuild {
    pub table: AttributeTable,
    pub failures: Vec<FeatureError>,
}

/// Build the attribute table. Rows are computed in parallel and collected in
/// input order; per-row failures are reported instead of aborting the build.
pub fn build_attribute_table(
    grid: &DemGrid,
    footprints: &[FootprintRecord],
    config: &ExtractConfig,
) -> Result<TableBuild, FeatureError> {
    if footprints.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let results: Vec<_> = footprints
        .par_iter()
        .map(|rec| extract_row(grid, rec, config))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    Ok(TableBuild {
        table: AttributeTable::new(rows),
        failures,
    })
}

fn opt_text(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("")
}

/// Render the table as feature CSV.
pub fn write_csv(table: &AttributeTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &table.rows {
        let res = r.res.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.uid.as_str(),
            opt_text(&r.build_type),
            opt_text(&r.roof_color),
            &r.zonal_mean.to_string(),
            &r.zonal_max.to_string(),
            &r.zonal_std.to_string(),
            &r.floor.to_string(),
            &r.area_sqft.to_string(),
            &r.area_sqm.to_string(),
            &r.nodes.to_string(),
            &res,
            &r.ht.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

/// A CSV file held as text columns, for inputs that are not full feature tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFrame {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvFrame {
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let records = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(CsvFrame { headers, records })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, FeatureError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FeatureError::MissingColumn(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.records {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
    }
}

fn parse_f64_cell(line: usize, column: &str, s: &str) -> Result<f64, FeatureError> {
    let v: f64 = s.trim().parse().map_err(|_| FeatureError::BadCsvValue {
        line,
        column: column.to_string(),
        message: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(FeatureError::BadCsvValue {
            line,
            column: column.to_string(),
            message: format!("`{s}` is not finite"),
        });
    }
    Ok(v)
}

/// Parse a feature CSV. The header must match [`CSV_HEADER`] exactly.
pub fn read_csv(text: &str) -> Result<AttributeTable, FeatureError> {
    let frame = CsvFrame::parse(text)?;
    if frame.headers != CSV_HEADER {
        return Err(FeatureError::HeaderMismatch {
            expected: CSV_HEADER.join(","),
            found: frame.headers.join(","),
        });
    }
    let mut seen = HashSet::with_capacity(frame.len());
    let mut rows = Vec::with_capacity(frame.len());
    for (i, rec) in frame.records.iter().enumerate() {
        let line = i + 2;
        let num = |col: usize| parse_f64_cell(line, CSV_HEADER[col], &rec[col]);
        let text = |col: usize| Some(rec[col].clone()).filter(|s| !s.is_empty());
        let nodes = num(9)?;
        if nodes < 0.0 || nodes.fract() != 0.0 {
            return Err(FeatureError::BadCsvValue {
                line,
                column: "nodes".into(),
                message: format!("`{}` is not a non-negative integer", rec[9]),
            });
        }
        let res = if rec[10].trim().is_empty() {
            None
        } else {
            Some(parse_label_text(&rec[10]).ok_or_else(|| FeatureError::BadCsvValue {
                line,
                column: "res".into(),
                message: format!("`{}` is not a label", rec[10]),
            })?)
        };
        let uid = rec[0].clone();
        if !seen.insert(uid.clone()) {
            return Err(FeatureError::DuplicateUid(uid));
        }
        rows.push(AttributeRow {
            uid,
            build_type: text(1),
            roof_color: text(2),
            zonal_mean: num(3)?,
            zonal_max: num(4)?,
            zonal_std: num(5)?,
            floor: num(6)?,
            area_sqft: num(7)?,
            area_sqm: num(8)?,
            nodes: nodes as usize,
            res,
            ht: num(11)?,
        });
    }
    Ok(AttributeTable::new(rows))
}

/// Pearson correlation matrix. Entries involving a zero-variance column are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Pearson correlation of two equally long columns; `None` if either has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let flat = |ss: f64, v: &[f64]| {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (ss / n).sqrt() <= 1e-12 * scale
    };
    if flat(saa, a) || flat(sbb, b) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn correlation_matrix(
    table: &AttributeTable,
    features: &[String],
) -> Result<CorrelationMatrix, FeatureError> {
    if table.len() < 2 {
        return Err(FeatureError::InsufficientRows(table.len()));
    }
    let columns = features
        .iter()
        .map(|f| table.column(f))
        .collect::<Result<Vec<_>, _>>()?;
    let d = columns.len();
    let mut values = vec![vec![None; d]; d];
    for i in 0..d {
        let defined = pearson(&columns[i], &columns[i]).is_some();
        values[i][i] = defined.then_some(1.0);
        for j in (i + 1)..d {
            let r = pearson(&columns[i], &columns[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: features.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
}

/// Greedy correlated-feature pruning.
///
/// Keep-list members are retained first. Every other feature, in matrix order,
/// is dropped when its absolute correlation with an already retained feature
/// exceeds `threshold`. A feature with zero variance (undefined correlation)
/// is dropped unless it is on the keep-list.
pub fn prune_features(
    corr: &CorrelationMatrix,
    threshold: f64,
    keep: &[String],
) -> Result<PruneOutcome, FeatureError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FeatureError::InvalidThreshold(threshold));
    }
    let mut retained: Vec<usize> = Vec::new();
    for k in keep {
        let idx = corr
            .index_of(k)
            .ok_or_else(|| FeatureError::UnknownKeepFeature(k.clone()))?;
        if !retained.contains(&idx) {
            retained.push(idx);
        }
    }
    let mut dropped = Vec::new();
    for i in 0..corr.names.len() {
        if retained.contains(&i) {
            continue;
        }
        let undefined = corr.get(i, i).is_none();
        let redundant = retained
            .iter()
            .any(|&j| corr.get(i, j).is_some_and(|r| r.abs() > threshold));
        if undefined || redundant {
            dropped.push(corr.names[i].clone());
        } else {
            retained.push(i);
        }
    }
    retained.sort_unstable();
    Ok(PruneOutcome {
        kept: retained.into_iter().map(|i| corr.names[i].clone()).collect(),
        dropped,
    })
}

/// Exploratory analysis report written by `bldgclass analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub feature_names: Vec<String>,
    pub correlation: Vec<Vec<Option<f64>>>,
    pub dropped: Vec<String>,
    pub kept: Vec<String>,
    pub threshold: f64,
}

pub fn analyze(
    table: &AttributeTable,
    features: &[String],
    threshold: f64,
    keep: &[String],
) -> Result<EdaReport, FeatureError> {
    let corr = correlation_matrix(table, features)?;
    let outcome = prune_features(&corr, threshold, keep)?;
    Ok(EdaReport {
        feature_names: corr.names,
        correlation: corr.values,
        dropped: outcome.dropped,
        kept: outcome.kept,
        threshold,
    })
}

/// Which table columns feed the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingSpec {
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
    pub standardize: bool,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec {
            numeric: vec!["ht".into(), "area_sqft".into(), "nodes".into()],
            categorical: vec!["RoofColor".into()],
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBlock {
    pub name: String,
    pub categories: Vec<String>,
}

/// A fitted encoding: numeric columns followed by one-hot blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub numeric: Vec<String>,
    pub categorical: Vec<CategoricalBlock>,
    pub feature_names: Vec<String>,
}

impl FeatureSpec {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Table columns an input must provide.
    pub fn source_columns(&self) -> Vec<&str> {
        self.numeric
            .iter()
            .map(String::as_str)
            .chain(self.categorical.iter().map(|b| b.name.as_str()))
            .collect()
    }
}

/// Per-column z-score parameters. Constant columns get `std = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn identity(d: usize) -> Self {
        Standardization {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn apply(&self, x: &mut Array2<f64>) {
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
    }
}

/// Anything rows of raw features can be read from.
pub trait FeatureSource {
    fn row_count(&self) -> usize;
    fn numeric_value(&self, row: usize, name: &str) -> Result<f64, FeatureError>;
    fn category_value(&self, row: usize, name: &str) -> Result<Option<String>, FeatureError>;
}

impl FeatureSource for AttributeTable {
    fn row_count(&self) -> usize {
        self.len()
    }

    fn numeric_value(&self, row: usize, name: &str) -> Result<f64, FeatureError> {
        let r = &self.rows[row];
        r.numeric(name)?
            .ok_or_else(|| FeatureError::MissingLabel { uid: r.uid.clone() })
    }

    fn category_value(&self, row: usize, name: &str) -> Result<Option<String>, FeatureError> {
        Ok(self.rows[row].category(name)?.map(str::to_string))
    }
}

impl FeatureSource for CsvFrame {
    fn row_count(&self) -> usize {
        self.len()
    }

    fn numeric_value(&self, row: usize, name: &str) -> Result<f64, FeatureError> {
        let col = self.column_index(name)?;
        parse_f64_cell(row + 2, name, &self.records[row][col])
    }

    fn category_value(&self, row: usize, name: &str) -> Result<Option<String>, FeatureError> {
        let col = self.column_index(name)?;
        Ok(Some(self.records[row][col].clone()).filter(|s| !s.is_empty()))
    }
}

fn check_feature_names(spec: &EncodingSpec) -> Result<(), FeatureError> {
    for n in &spec.numeric {
        if !NUMERIC_FEATURES.contains(&n.as_str()) || n == "res" {
            return Err(FeatureError::UnknownFeature(n.clone()));
        }
    }
    for c in &spec.categorical {
        if !CATEGORICAL_FEATURES.contains(&c.as_str()) {
            return Err(FeatureError::UnknownFeature(c.clone()));
        }
    }
    Ok(())
}

/// Build the raw (unstandardized) design matrix for `spec`.
pub fn raw_matrix(
    source: &dyn FeatureSource,
    spec: &FeatureSpec,
) -> Result<Array2<f64>, FeatureError> {
    let n = source.row_count();
    let mut x = Array2::zeros((n, spec.width()));
    for i in 0..n {
        let mut j = 0;
        for name in &spec.numeric {
            x[[i, j]] = source.numeric_value(i, name)?;
            j += 1;
        }
        for block in &spec.categorical {
            if let Some(v) = source.category_value(i, &block.name)? {
                if let Some(k) = block.categories.iter().position(|c| *c == v) {
                    x[[i, j + k]] = 1.0;
                }
            }
            j += block.categories.len();
        }
    }
    Ok(x)
}

/// Encode and standardize with an already fitted spec.
pub fn transform(
    source: &dyn FeatureSource,
    spec: &FeatureSpec,
    standardization: &Standardization,
) -> Result<Array2<f64>, FeatureError> {
    let mut x = raw_matrix(source, spec)?;
    standardization.apply(&mut x);
    Ok(x)
}

/// Fit category lists (first-appearance order over the fit rows) and, when
/// requested, z-score parameters on the fit rows only.
pub fn fit_encoding(
    table: &AttributeTable,
    spec: &EncodingSpec,
    fit_indices: &[usize],
) -> Result<(FeatureSpec, Standardization), FeatureError> {
    check_feature_names(spec)?;
    if fit_indices.is_empty() {
        return Err(FeatureError::EmptyFitSet);
    }
    if let Some(&bad) = fit_indices.iter().find(|&&i| i >= table.len()) {
        return Err(FeatureError::RowOutOfRange(bad));
    }
    let mut categorical = Vec::with_capacity(spec.categorical.len());
    for name in &spec.categorical {
        let mut categories: Vec<String> = Vec::new();
        for &i in fit_indices {
            if let Some(v) = table.rows[i].category(name)? {
                if !categories.iter().any(|c| c == v) {
                    categories.push(v.to_string());
                }
            }
        }
        categorical.push(CategoricalBlock {
            name: name.clone(),
            categories,
        });
    }
    let feature_names = spec
        .numeric
        .iter()
        .cloned()
        .chain(
            categorical
                .iter()
                .flat_map(|b| b.categories.iter().map(move |c| format!("{}={}", b.name, c))),
        )
        .collect::<Vec<_>>();
    let fspec = FeatureSpec {
        numeric: spec.numeric.clone(),
        categorical,
        feature_names,
    };
    let d = fspec.width();
    if !spec.standardize {
        return Ok((fspec, Standardization::identity(d)));
    }
    let fit = AttributeTable::new(fit_indices.iter().map(|&i| table.rows[i].clone()).collect());
    let raw = raw_matrix(&fit, &fspec)?;
    let n = raw.nrows() as f64;
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for col in raw.columns() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = var.sqrt();
        mean.push(m);
        std.push(if s > 0.0 { s } else { 1.0 });
    }
    Ok((fspec, Standardization { mean, std }))
}

/// Network-ready features for a labelled table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub spec: FeatureSpec,
    pub standardization: Standardization,
}

impl FeatureMatrix {
    /// Rows `indices` of `x` with their labels as `f64`.
    pub fn select(&self, indices: &[usize]) -> (Array2<f64>, Vec<f64>) {
        let x = self.x.select(ndarray::Axis(0), indices);
        let y = indices.iter().map(|&i| f64::from(self.y[i])).collect();
        (x, y)
    }
}

pub fn encode_features(
    table: &AttributeTable,
    spec: &EncodingSpec,
    fit_indices: &[usize],
) -> Result<FeatureMatrix, FeatureError> {
    let (fspec, standardization) = fit_encoding(table, spec, fit_indices)?;
    let x = transform(table, &fspec, &standardization)?;
    let y = table.labels()?;
    Ok(FeatureMatrix {
        x,
        y,
        feature_names: fspec.feature_names.clone(),
        spec: fspec,
        standardization,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `(train, val, test)` fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// Per-class seeded shuffle; `floor(test * n_c)` rows go to test, `floor(val * n_c)`
/// to validation, the rest to training. Index lists are returned sorted.
pub fn stratified_split(
    labels: &[u8],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitIndices, FeatureError> {
    let SplitRatios { train, val, test } = ratios;
    if [train, val, test].iter().any(|r| !(*r >= 0.0)) || ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(FeatureError::InvalidRatios((train, val, test)));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(FeatureError::InvalidLabel(bad));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 3 {
            return Err(FeatureError::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_test = (test * n).floor() as usize;
        let n_val = (val * n).floor() as usize;
        out.test.extend_from_slice(&members[..n_test]);
        out.val.extend_from_slice(&members[n_test..n_test + n_val]);
        out.train.extend_from_slice(&members[n_test + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
