//! Readers and writers for the geodata the pipeline consumes and produces:
//! ESRI ASCII Grid elevation rasters and GeoJSON footprint collections.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geometry::{Coord, Geometry, Polygon};

#[derive(Debug, Error)]
pub enum GeodataError {
    #[error("missing ASCII grid header key `{0}`")]
    MissingHeaderKey(&'static str),
    #[error("invalid ASCII grid header: {0}")]
    InvalidHeader(String),
    #[error("expected {expected} grid values, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("non-numeric token `{token}` in ASCII grid")]
    NonNumericToken { token: String },
    #[error("cell ({row}, {col}) is outside a {nrows}x{ncols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("unsupported geometry type `{0}` (only Polygon and MultiPolygon are accepted)")]
    UnsupportedGeometryType(String),
    #[error("feature {uid}: ring is not closed (first coordinate differs from last)")]
    UnclosedRing { uid: String },
    #[error("feature {uid}: ring has {len} coordinates, at least 4 are required")]
    DegenerateRing { uid: String, len: usize },
    #[error("feature {uid}: exterior ring has zero area")]
    ZeroAreaExterior { uid: String },
    #[error("duplicate UID `{0}`")]
    DuplicateUid(String),
    #[error("malformed GeoJSON document: {0}")]
    MalformedDocument(String),
    #[error("{records} records but {labels} labels")]
    LengthMismatch { records: usize, labels: usize },
}

/// A north-up elevation raster. `values` is row-major with row 0 the northernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    pub ncols: usize,
    pub nrows: usize,
    /// Easting of the lower-left corner.
    pub xll: f64,
    /// Northing of the lower-left corner.
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl DemGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GeodataError> {
        if ncols == 0 || nrows == 0 {
            return Err(GeodataError::InvalidHeader(format!(
                "grid dimensions must be positive, got {ncols}x{nrows}"
            )));
        }
        if !(cellsize > 0.0) || !cellsize.is_finite() {
            return Err(GeodataError::InvalidHeader(format!(
                "cellsize must be positive, got {cellsize}"
            )));
        }
        if !xll.is_finite() || !yll.is_finite() {
            return Err(GeodataError::InvalidHeader("non-finite corner".into()));
        }
        let expected = ncols * nrows;
        if values.len() != expected {
            return Err(GeodataError::CountMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| **v != nodata && !v.is_finite()) {
            return Err(GeodataError::NonNumericToken {
                token: v.to_string(),
            });
        }
        Ok(DemGrid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        })
    }

    /// A grid filled with one value.
    pub fn filled(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        fill: f64,
    ) -> Result<Self, GeodataError> {
        Self::new(ncols, nrows, xll, yll, cellsize, nodata, vec![fill; ncols * nrows])
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    #[inline]
    pub fn value_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.values[row * self.ncols + col]
    }

    #[inline]
    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata
    }

    /// Center of cell `(row, col)` in map coordinates.
    pub fn cell_center(&self, row: usize, col: usize) -> Result<Coord, GeodataError> {
        if row >= self.nrows || col >= self.ncols {
            return Err(GeodataError::IndexOutOfRange {
                row,
                col,
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok(self.center_unchecked(row, col))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, row: usize, col: usize) -> Coord {
        [
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        ]
    }
}

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

fn parse_number(token: &str) -> Result<f64, GeodataError> {
    let non_numeric = || GeodataError::NonNumericToken {
        token: token.to_string(),
    };
    let v: f64 = token.parse().map_err(|_| non_numeric())?;
    // Rust happily parses "inf" and "NaN"; the grid format does not allow them.
    if !v.is_finite() {
        return Err(non_numeric());
    }
    Ok(v)
}

fn parse_count(key: &str, v: f64) -> Result<usize, GeodataError> {
    if v < 1.0 || v.fract() != 0.0 {
        return Err(GeodataError::InvalidHeader(format!(
            "{key} must be a positive integer, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Parse an ESRI ASCII Grid: six `key value` header lines (keys case-insensitive,
/// any order) followed by `nrows * ncols` whitespace-separated values, north row first.
pub fn parse_ascii_grid(text: &str) -> Result<DemGrid, GeodataError> {
    let mut header: [Option<f64>; 6] = [None; 6];
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for _ in 0..HEADER_KEYS.len() {
        let Some(line) = lines.next() else { break };
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_lowercase();
        let Some(slot) = HEADER_KEYS.iter().position(|k| *k == key) else {
            let missing = HEADER_KEYS
                .iter()
                .zip(header.iter())
                .find(|(_, v)| v.is_none())
                .map(|(k, _)| *k)
                .unwrap_or("ncols");
            return Err(GeodataError::MissingHeaderKey(missing));
        };
        let value = parts
            .next()
            .ok_or_else(|| GeodataError::InvalidHeader(format!("`{key}` has no value")))?;
        if parts.next().is_some() {
            return Err(GeodataError::InvalidHeader(format!(
                "`{key}` has more than one value"
            )));
        }
        header[slot] = Some(parse_number(value)?);
    }
    let get = |i: usize| header[i].ok_or(GeodataError::MissingHeaderKey(HEADER_KEYS[i]));
    let ncols = parse_count("ncols", get(0)?)?;
    let nrows = parse_count("nrows", get(1)?)?;
    let (xll, yll, cellsize, nodata) = (get(2)?, get(3)?, get(4)?, get(5)?);

    let mut values = Vec::with_capacity(ncols * nrows);
    for line in lines {
        for token in line.split_whitespace() {
            values.push(parse_number(token)?);
        }
    }
    DemGrid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

/// Render a grid in ESRI ASCII Grid form. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_ascii_grid(grid: &DemGrid) -> String {
    let mut out = String::with_capacity(grid.values.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", grid.ncols);
    let _ = writeln!(out, "nrows {}", grid.nrows);
    let _ = writeln!(out, "xllcorner {}", grid.xll);
    let _ = writeln!(out, "yllcorner {}", grid.yll);
    let _ = writeln!(out, "cellsize {}", grid.cellsize);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in grid.values.chunks(grid.ncols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// A building footprint and the properties it was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintRecord {
    pub uid: String,
    pub geometry: Geometry,
    pub attributes: Map<String, Value>,
}

impl FootprintRecord {
    pub fn attribute(&self, key: &str) -> Option<&Value> {
        self.attributes.get(key).filter(|v| !v.is_null())
    }

    /// A string-valued view of a scalar property (numbers rendered as text).
    pub fn attribute_text(&self, key: &str) -> Option<String> {
        match self.attribute(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            Value::Bool(b) => Some(b.to_string()),
            _ => None,
        }
    }
}

/// Predicted building class. Residential is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingClass {
    NonResidential,
    Residential,
}

impl BuildingClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BuildingClass::Residential => "residential",
            BuildingClass::NonResidential => "non_residential",
        }
    }

    /// Binary label, `1` for residential.
    pub fn label(self) -> u8 {
        match self {
            BuildingClass::Residential => 1,
            BuildingClass::NonResidential => 0,
        }
    }

    pub fn from_label(label: u8) -> Self {
        if label == 1 {
            BuildingClass::Residential
        } else {
            BuildingClass::NonResidential
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "residential" | "1" => Some(BuildingClass::Residential),
            "non_residential" | "non-residential" | "0" => Some(BuildingClass::NonResidential),
            _ => None,
        }
    }
}

/// A model output for one footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub class: BuildingClass,
}

fn malformed(msg: impl Into<String>) -> GeodataError {
    GeodataError::MalformedDocument(msg.into())
}

fn parse_coord(v: &Value) -> Result<Coord, GeodataError> {
    let arr = v
        .as_array()
        .ok_or_else(|| malformed("position is not an array"))?;
    if arr.len() < 2 {
        return Err(malformed("position has fewer than 2 numbers"));
    }
    let x = arr[0].as_f64().ok_or_else(|| malformed("non-numeric coordinate"))?;
    let y = arr[1].as_f64().ok_or_else(|| malformed("non-numeric coordinate"))?;
    Ok([x, y])
}

fn parse_ring(v: &Value, uid: &str) -> Result<Vec<Coord>, GeodataError> {
    let ring = v
        .as_array()
        .ok_or_else(|| malformed("ring is not an array"))?
        .iter()
        .map(parse_coord)
        .collect::<Result<Vec<_>, _>>()?;
    if ring.len() >= 2 && ring.first() != ring.last() {
        return Err(GeodataError::UnclosedRing { uid: uid.into() });
    }
    if ring.len() < 4 {
        return Err(GeodataError::DegenerateRing {
            uid: uid.into(),
            len: ring.len(),
        });
    }
    Ok(ring)
}

fn parse_polygon(v: &Value, uid: &str) -> Result<Polygon, GeodataError> {
    let rings = v
        .as_array()
        .ok_or_else(|| malformed("polygon coordinates are not an array"))?
        .iter()
        .map(|r| parse_ring(r, uid))
        .collect::<Result<Vec<_>, _>>()?;
    if rings.is_empty() {
        return Err(malformed(format!("feature {uid}: polygon has no rings")));
    }
    if crate::geometry::ring_signed_area(&rings[0]) == 0.0 {
        return Err(GeodataError::ZeroAreaExterior { uid: uid.into() });
    }
    Ok(Polygon::new(rings))
}

fn parse_geometry(v: &Value, uid: &str) -> Result<Geometry, GeodataError> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(format!("feature {uid}: geometry has no type")))?;
    let coords = || {
        v.get("coordinates")
            .ok_or_else(|| malformed(format!("feature {uid}: geometry has no coordinates")))
    };
    match kind {
        "Polygon" => Ok(Geometry::Polygon(parse_polygon(coords()?, uid)?)),
        "MultiPolygon" => {
            let parts = coords()?
                .as_array()
                .ok_or_else(|| malformed("multipolygon coordinates are not an array"))?
                .iter()
                .map(|p| parse_polygon(p, uid))
                .collect::<Result<Vec<_>, _>>()?;
            if parts.is_empty() {
                return Err(malformed(format!("feature {uid}: empty MultiPolygon")));
            }
            Ok(Geometry::MultiPolygon(parts))
        }
        other => Err(GeodataError::UnsupportedGeometryType(other.to_string())),
    }
}

/// Parse a GeoJSON FeatureCollection of Polygon/MultiPolygon footprints.
///
/// The record uid is the `UID` property when present, otherwise `fid-<index>`.
pub fn parse_footprints(text: &str) -> Result<Vec<FootprintRecord>, GeodataError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(malformed("top-level object is not a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("FeatureCollection has no `features` array"))?;

    let mut seen = HashSet::with_capacity(features.len());
    let mut records = Vec::with_capacity(features.len());
    for (index, feature) in features.iter().enumerate() {
        if feature.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(malformed(format!("features[{index}] is not a Feature")));
        }
        let attributes = match feature.get("properties") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(malformed(format!("features[{index}].properties is not an object"))),
        };
        let uid = match attributes.get("UID") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("fid-{index}"),
        };
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| malformed(format!("feature {uid} has no geometry")))?;
        let geometry = parse_geometry(geometry, &uid)?;
        if !seen.insert(uid.clone()) {
            return Err(GeodataError::DuplicateUid(uid));
        }
        records.push(FootprintRecord {
            uid,
            geometry,
            attributes,
        });
    }
    Ok(records)
}

fn rings_json(p: &Polygon) -> Value {
    Value::Array(
        p.rings
            .iter()
            .map(|r| Value::Array(r.iter().map(|c| json!([c[0], c[1]])).collect()))
            .collect(),
    )
}

fn geometry_json(g: &Geometry) -> Value {
    match g {
        Geometry::Polygon(p) => json!({"type": "Polygon", "coordinates": rings_json(p)}),
        Geometry::MultiPolygon(ps) => json!({
            "type": "MultiPolygon",
            "coordinates": ps.iter().map(rings_json).collect::<Vec<_>>(),
        }),
    }
}

/// Serialize footprints as a GeoJSON FeatureCollection.
pub fn write_footprints(records: &[FootprintRecord]) -> String {
    let features: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "type": "Feature",
                "properties": Value::Object(r.attributes.clone()),
                "geometry": geometry_json(&r.geometry),
            })
        })
        .collect();
    serde_json::to_string(&json!({"type": "FeatureCollection", "features": features}))
        .expect("GeoJSON values always serialize")
}

/// Classified footprints: every feature keeps its properties and gains
/// `pred_prob` and `pred_class`.
pub fn write_predictions(
    records: &[FootprintRecord],
    labels: &[Prediction],
) -> Result<String, GeodataError> {
    if records.len() != labels.len() {
        return Err(GeodataError::LengthMismatch {
            records: records.len(),
            labels: labels.len(),
        });
    }
    let classified: Vec<FootprintRecord> = records
        .iter()
        .zip(labels)
        .map(|(r, p)| {
            let mut out = r.clone();
            out.attributes
                .insert("pred_prob".into(), json!(p.probability));
            out.attributes
                .insert("pred_class".into(), json!(p.class.as_str()));
            out
        })
        .collect();
    Ok(write_footprints(&classified))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n";

    #[test]
    fn minimal_grid() {
        let g = parse_ascii_grid(&format!("{HEADER}1 2\n3 4\n")).unwrap();
        assert_eq!(g.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.value(1, 0), 3.0);
    }

    #[test]
    fn count_mismatch() {
        let err = parse_ascii_grid(&format!("{HEADER}1 2 3")).unwrap_err();
        assert!(matches!(
            err,
            GeodataError::CountMismatch {
                expected: 4,
                found: 3
            }
        ));
    }

    #[test]
    fn nodata_is_stored() {
        let g = parse_ascii_grid(&format!("{HEADER}1 -9999\n3 4\n")).unwrap();
        assert_eq!(g.value(0, 1), -9999.0);
        assert!(g.is_nodata(g.value(0, 1)));
        assert!(!g.is_nodata(g.value(0, 0)));
    }

    #[test]
    fn header_keys_case_insensitive_any_order() {
        let text = "NROWS 1\nNCOLS 3\nCellSize 2.5\nXLLCORNER 10\nyllcorner 20\nnodata_value -1\n5 6 7";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!((g.ncols, g.nrows, g.cellsize, g.xll, g.yll), (3, 1, 2.5, 10.0, 20.0));
    }

    #[test]
    fn header_errors() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4";
        assert!(matches!(
            parse_ascii_grid(text),
            Err(GeodataError::MissingHeaderKey("nodata_value"))
        ));
        assert!(matches!(
            parse_ascii_grid(&format!("{HEADER}1 x\n3 4")),
            Err(GeodataError::NonNumericToken { .. })
        ));
        assert!(matches!(
            parse_ascii_grid(&format!("{HEADER}1 nan\n3 4")),
            Err(GeodataError::NonNumericToken { .. })
        ));
        let zero_cell = HEADER.replace("cellsize 1", "cellsize 0");
        assert!(matches!(
            parse_ascii_grid(&format!("{zero_cell}1 2\n3 4")),
            Err(GeodataError::InvalidHeader(_))
        ));
    }

    #[test]
    fn centers() {
        let g = DemGrid::filled(2, 2, 0.0, 0.0, 1.0, -9999.0, 0.0).unwrap();
        assert_eq!(g.cell_center(1, 0).unwrap(), [0.5, 0.5]);
        assert_eq!(g.cell_center(0, 1).unwrap(), [1.5, 1.5]);
        assert!(matches!(
            g.cell_center(2, 0),
            Err(GeodataError::IndexOutOfRange { .. })
        ));
    }

    const SQUARE: &str = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"UID":"b1","res":1},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#;

    #[test]
    fn minimal_footprints() {
        let recs = parse_footprints(SQUARE).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].uid, "b1");
        assert_eq!(recs[0].geometry.parts().len(), 1);
        assert_eq!(recs[0].geometry.parts()[0].rings[0].len(), 5);
    }

    #[test]
    fn footprint_errors() {
        let point = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(matches!(
            parse_footprints(point),
            Err(GeodataError::UnsupportedGeometryType(t)) if t == "Point"
        ));
        let open = SQUARE.replace("[0,1],[0,0]]", "[0,1],[0,0.5]]");
        assert!(matches!(parse_footprints(&open), Err(GeodataError::UnclosedRing { .. })));
        assert!(matches!(
            parse_footprints("{\"type\":\"Feature\"}"),
            Err(GeodataError::MalformedDocument(_))
        ));
        assert!(matches!(
            parse_footprints("{\"type\":"),
            Err(GeodataError::MalformedDocument(_))
        ));
        let dup = SQUARE.trim_end_matches("]}").to_string()
            + r#",{"type":"Feature","properties":{"UID":"b1"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#;
        assert!(matches!(parse_footprints(&dup), Err(GeodataError::DuplicateUid(u)) if u == "b1"));
    }

    #[test]
    fn synthesized_uid() {
        let text = SQUARE.replace("\"UID\":\"b1\",", "");
        assert_eq!(parse_footprints(&text).unwrap()[0].uid, "fid-0");
    }

    #[test]
    fn predictions_written() {
        let recs = parse_footprints(SQUARE).unwrap();
        let out = write_predictions(
            &recs,
            &[Prediction {
                probability: 0.93,
                class: BuildingClass::Residential,
            }],
        )
        .unwrap();
        let doc: Value = serde_json::from_str(&out).unwrap();
        let props = &doc["features"][0]["properties"];
        assert_eq!(props["pred_prob"], json!(0.93));
        assert_eq!(props["pred_class"], json!("residential"));
        assert_eq!(props["UID"], json!("b1"));
        let back = parse_footprints(&out).unwrap();
        assert_eq!(back[0].geometry, recs[0].geometry);
    }

    #[test]
    fn predictions_length_mismatch() {
        let mut recs = parse_footprints(SQUARE).unwrap();
        let mut second = recs[0].clone();
        second.uid = "b2".into();
        recs.push(second);
        let one = [Prediction {
            probability: 0.1,
            class: BuildingClass::NonResidential,
        }];
        assert!(matches!(
            write_predictions(&recs, &one),
            Err(GeodataError::LengthMismatch { records: 2, labels: 1 })
        ));
    }
}
