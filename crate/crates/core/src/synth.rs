//! Seeded synthetic buildings.
//!
//! [`generate`] draws an attribute table whose height, area and node-count
//! columns reproduce a target (mean, std, max) profile, and labels it with a
//! planted rule: a building is non-residential iff its area exceeds `T_a` or
//! its height exceeds `T_h`. The thresholds are placed so that exactly
//! `round(n * minority_fraction)` rows are non-residential. Values close to
//! either threshold are pushed out of a small relative band around it, which
//! leaves a margin between the classes.
//!
//! [`rasterize_synthetic_scene`] lays rectangular footprints on a flat DEM
//! with one elevation plateau per building, for end-to-end extraction tests.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};
use thiserror::Error;

use crate::features::{AttributeRow, AttributeTable, DEFAULT_FLOOR_HEIGHT, DEFAULT_GROUND_ELEV, SQFT_PER_SQM};
use crate::geodata_io::{DemGrid, FootprintRecord};
use crate::geometry::{point_in_polygon, Geometry, Polygon};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible synthetic configuration: {0}")]
    InfeasibleConfig(String),
    #[error("building {uid} does not fit in the scene extent")]
    SceneOverflow { uid: String },
}

/// Target moments for one generated column. `max` caps the drawn values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Profile {
    pub ht: FeatureProfile,
    pub area_sqm: FeatureProfile,
    pub nodes: FeatureProfile,
}

impl Default for Profile {
    /// Summary statistics of the reference Gandhinagar attribute table.
    fn default() -> Self {
        Profile {
            ht: FeatureProfile {
                mean: 7.7176,
                std: 3.3335,
                max: 61.2562,
            },
            area_sqm: FeatureProfile {
                mean: 144.1876,
                std: 375.0619,
                max: 17769.4054,
            },
            nodes: FeatureProfile {
                mean: 5.1131,
                std: 3.5721,
                max: 106.0,
            },
        }
    }
}

/// Planted decision rule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleConfig {
    /// Share of the minority class selected by the height threshold; the rest by area.
    pub height_share: f64,
    /// Relative half-width of the band kept clear on each side of a threshold.
    pub margin: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            height_share: 0.4,
            margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n: usize,
    pub minority_fraction: f64,
    pub seed: u64,
    /// Probability of flipping each observed label.
    pub noise_rate: f64,
    pub profile: Profile,
    pub rule: RuleConfig,
    pub ground_elev: f64,
    pub floor_height: f64,
    pub roof_colors: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 15999,
            minority_fraction: 0.0261,
            seed: 42,
            noise_rate: 0.0,
            profile: Profile::default(),
            rule: RuleConfig::default(),
            ground_elev: DEFAULT_GROUND_ELEV,
            floor_height: DEFAULT_FLOOR_HEIGHT,
            roof_colors: ["red", "grey", "white", "blue"].map(String::from).to_vec(),
        }
    }
}

impl SynthConfig {
    /// `floor(n * minority_fraction)`, so 15999 buildings at 0.0261 give 417.
    pub fn minority_count(&self) -> usize {
        (self.n as f64 * self.minority_fraction + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleConfig(m));
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 0.5) {
            return bad(format!(
                "minority_fraction must lie in (0, 0.5), got {}",
                self.minority_fraction
            ));
        }
        if self.minority_count() < 1 {
            return bad(format!(
                "n = {} with minority_fraction {} yields no minority rows",
                self.n, self.minority_fraction
            ));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return bad(format!("noise_rate must lie in [0, 0.5), got {}", self.noise_rate));
        }
        if !(0.0..=1.0).contains(&self.rule.height_share) {
            return bad(format!("height_share must lie in [0, 1], got {}", self.rule.height_share));
        }
        if !(0.0..0.5).contains(&self.rule.margin) {
            return bad(format!("margin must lie in [0, 0.5), got {}", self.rule.margin));
        }
        if self.roof_colors.is_empty() {
            return bad("roof_colors is empty".into());
        }
        if !(self.floor_height > 0.0) {
            return bad(format!("floor_height must be positive, got {}", self.floor_height));
        }
        for (name, p) in [
            ("ht", self.profile.ht),
            ("area_sqm", self.profile.area_sqm),
            ("nodes", self.profile.nodes),
        ] {
            if !(p.mean > 0.0 && p.std > 0.0 && p.max > p.mean) {
                return bad(format!("profile for {name} needs 0 < mean < max and std > 0"));
            }
        }
        if self.profile.nodes.mean < 4.0 {
            return bad("mean node count must be at least 4".into());
        }
        Ok(())
    }
}

/// Thresholds of the planted rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub area_sqft: f64,
    pub ht: f64,
}

impl PlantedRule {
    /// 1 = residential.
    pub fn label(&self, area_sqft: f64, ht: f64) -> u8 {
        u8::from(!(area_sqft > self.area_sqft || ht > self.ht))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Observed table; `res` carries the (possibly noisy) labels.
    pub table: AttributeTable,
    /// Labels of the planted rule before noise.
    pub oracle: Vec<u8>,
    pub rule: PlantedRule,
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let s = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
    if s > 0.0 {
        z.iter_mut().for_each(|v| *v = (*v - m) / s);
    }
    z
}

fn moments(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

/// Fit `(a, b)` so that `finish(min(exp(a + b z), cap))` has the target mean and
/// std, and return that column. `finish` sees the whole column.
fn fit_column(
    z: &[f64],
    target: FeatureProfile,
    finish: impl Fn(&mut [f64]) -> Result<(), SynthError>,
    what: &str,
) -> Result<Vec<f64>, SynthError> {
    let draw = |a: f64, b: f64| -> Result<Vec<f64>, SynthError> {
        let mut v: Vec<f64> = z.iter().map(|&zi| (a + b * zi).exp().min(target.max)).collect();
        finish(&mut v)?;
        Ok(v)
    };
    let stats = |a: f64, b: f64| -> Result<(f64, f64), SynthError> { Ok(moments(draw(a, b)?.into_iter())) };
    let solve_a = |b: f64| -> Result<f64, SynthError> {
        let (mut lo, mut hi) = (-50.0, target.max.ln() + 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if stats(mid, b)?.0 < target.mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let (mut lo, mut hi) = (0.0, 6.0);
    if stats(solve_a(hi)?, hi)?.1 < target.std {
        return Err(SynthError::InfeasibleConfig(format!(
            "cannot reach std {} for {what} under cap {}",
            target.std, target.max
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if stats(solve_a(mid)?, mid)?.1 < target.std {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    draw(solve_a(b)?, b)
}

/// Flags for the `k` largest `z` among the rows flagged in `pool`.
fn top_k(z: &[f64], pool: &[bool], k: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..z.len()).filter(|&i| pool[i]).collect();
    idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]));
    let mut flags = vec![false; z.len()];
    for &i in idx.iter().take(k) {
        flags[i] = true;
    }
    flags
}

/// Threshold with exactly the `selected` rows of `pool` strictly above it, at the
/// geometric midpoint of the values either side. `None` when nothing is selected.
fn threshold_between(
    values: &[f64],
    pool: &[bool],
    selected: &[bool],
    what: &str,
) -> Result<Option<f64>, SynthError> {
    let lowest_in = (0..values.len())
        .filter(|&i| selected[i])
        .map(|i| values[i])
        .fold(f64::INFINITY, f64::min);
    if lowest_in == f64::INFINITY {
        return Ok(None);
    }
    let highest_out = (0..values.len())
        .filter(|&i| pool[i] && !selected[i])
        .map(|i| values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if highest_out >= lowest_in {
        return Err(SynthError::InfeasibleConfig(format!(
            "tied {what} values at the class boundary"
        )));
    }
    if highest_out == f64::NEG_INFINITY {
        return Ok(Some(lowest_in / 2.0));
    }
    Ok(Some((lowest_in * highest_out).sqrt()))
}

/// Clear the band `(t / (1 + m)^2 .. t * (1 + m)^2)` except for its outer halves,
/// by log-linearly compressing each side away from `t`. Order is preserved.
fn open_margin(v: f64, t: f64, m: f64) -> f64 {
    if m == 0.0 {
        return v;
    }
    let g = (1.0 + m).ln();
    let u = (v / t).ln();
    let mapped = if u > 0.0 && u < 2.0 * g {
        g + u / 2.0
    } else if u <= 0.0 && u > -2.0 * g {
        -g + u / 2.0
    } else {
        return v;
    };
    t * mapped.exp()
}

/// Draw a labelled synthetic attribute table.
pub fn generate(config: &SynthConfig) -> Result<SyntheticDataset, SynthError> {
    config.validate()?;
    let n = config.n;
    let k = config.minority_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let p = config.profile;
    let m = config.rule.margin;
    let everyone = vec![true; n];
    let k_height = (k as f64 * config.rule.height_share).round() as usize;

    // Selected rows depend only on the order of the normal draws, so they are
    // fixed before the columns are calibrated.
    let z_ht = standard_normals(&mut rng, n);
    let by_height = top_k(&z_ht, &everyone, k_height);
    let rest: Vec<bool> = by_height.iter().map(|s| !s).collect();
    let z_area = standard_normals(&mut rng, n);
    let by_area = top_k(&z_area, &rest, k - k_height);
    if by_area.iter().filter(|&&s| s).count() != k - k_height {
        return Err(SynthError::InfeasibleConfig(format!("cannot select {k} rows")));
    }

    let with_margin = |pool: &[bool], selected: &[bool], what: &'static str| {
        let (pool, selected) = (pool.to_vec(), selected.to_vec());
        move |v: &mut [f64]| -> Result<(), SynthError> {
            // Ties can occur at extreme trial parameters; the final column is checked below.
            if let Ok(Some(t)) = threshold_between(v, &pool, &selected, what) {
                v.iter_mut().for_each(|x| *x = open_margin(*x, t, m));
            }
            Ok(())
        }
    };
    let ht = fit_column(&z_ht, p.ht, with_margin(&everyone, &by_height, "ht"), "ht")?;
    let area_sqm = fit_column(&z_area, p.area_sqm, with_margin(&rest, &by_area, "area"), "area_sqm")?;

    // nodes = 4 + floor(w); profile the extra vertices.
    let extra = FeatureProfile {
        mean: p.nodes.mean - 4.0,
        std: p.nodes.std,
        max: p.nodes.max - 4.0 + 0.999,
    };
    let z_nodes = standard_normals(&mut rng, n);
    let floor_all = |v: &mut [f64]| -> Result<(), SynthError> {
        v.iter_mut().for_each(|x| *x = x.floor());
        Ok(())
    };
    let nodes: Vec<usize> = fit_column(&z_nodes, extra, floor_all, "nodes")?
        .into_iter()
        .map(|e| 4 + e as usize)
        .collect();

    let t_ht = threshold_between(&ht, &everyone, &by_height, "ht")?.unwrap_or(f64::MAX);
    let t_area_sqm = threshold_between(&area_sqm, &rest, &by_area, "area")?.unwrap_or(f64::MAX);
    let rule = PlantedRule {
        area_sqft: t_area_sqm * SQFT_PER_SQM,
        ht: t_ht,
    };

    let color_pick = Uniform::new(0, config.roof_colors.len()).expect("non-empty palette");
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let mut oracle = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let area_sqft = area_sqm[i] * SQFT_PER_SQM;
        let truth = rule.label(area_sqft, ht[i]);
        let observed = if unit.sample(&mut rng) < config.noise_rate {
            1 - truth
        } else {
            truth
        };
        let zonal_mean = config.ground_elev + ht[i];
        let zonal_std = 0.05 * ht[i] * (0.5 + unit.sample(&mut rng));
        let zonal_max = zonal_mean + zonal_std * (1.0 + 2.0 * unit.sample(&mut rng));
        let roof = config.roof_colors[color_pick.sample(&mut rng)].clone();
        oracle.push(truth);
        rows.push(AttributeRow {
            uid: format!("B{:05}", i + 1),
            build_type: Some(if observed == 1 { "residential" } else { "non-residential" }.into()),
            roof_color: Some(roof),
            zonal_mean,
            zonal_max,
            zonal_std,
            floor: zonal_mean / config.floor_height,
            area_sqft,
            area_sqm: area_sqm[i],
            nodes: nodes[i],
            res: Some(observed),
            ht: ht[i],
        });
    }
    debug_assert_eq!(oracle.iter().filter(|&&l| l == 0).count(), k);
    Ok(SyntheticDataset {
        table: AttributeTable::new(rows),
        oracle,
        rule,
    })
}

/// Raster and layout parameters for a synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub ground_elev: f64,
    /// Clear space around every footprint, in meters.
    pub gap: f64,
    /// Number of table rows placed in the scene by [`rasterize_synthetic_scene`].
    pub buildings: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            ncols: 1000,
            nrows: 1000,
            xll: 0.0,
            yll: 0.0,
            cellsize: 1.0,
            nodata: -9999.0,
            ground_elev: DEFAULT_GROUND_ELEV,
            gap: 2.0,
            buildings: 100,
        }
    }
}

/// One rectangular building to place.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSpec {
    pub uid: String,
    pub width: f64,
    pub depth: f64,
    pub ht: f64,
    pub roof_color: Option<String>,
    pub res: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub grid: DemGrid,
    pub footprints: Vec<FootprintRecord>,
    /// What extraction should recover for every footprint.
    pub truth: AttributeTable,
}

/// Coordinates are snapped to this step so rectangle areas are exact in `f64`.
const SNAP: f64 = 0.125;

fn snap(v: f64) -> f64 {
    (v / SNAP).round() * SNAP
}

/// Shelf-pack rectangles left to right, bottom to top, and raise a plateau of
/// `ground_elev + ht` under each one.
pub fn rasterize_buildings(
    buildings: &[BuildingSpec],
    scene: &SceneConfig,
) -> Result<SyntheticScene, SynthError> {
    let extent_x = scene.ncols as f64 * scene.cellsize;
    let extent_y = scene.nrows as f64 * scene.cellsize;
    let mut grid = DemGrid::filled(
        scene.ncols,
        scene.nrows,
        scene.xll,
        scene.yll,
        scene.cellsize,
        scene.nodata,
        scene.ground_elev,
    )
    .map_err(|e| SynthError::InfeasibleConfig(e.to_string()))?;

    let gap = snap(scene.gap.max(0.0));
    let (mut x, mut y, mut shelf) = (gap, gap, 0.0f64);
    let mut footprints = Vec::with_capacity(buildings.len());
    let mut truth = Vec::with_capacity(buildings.len());
    for b in buildings {
        let overflow = || SynthError::SceneOverflow { uid: b.uid.clone() };
        let (w, d) = (snap(b.width), snap(b.depth));
        if w < scene.cellsize || d < scene.cellsize || w + 2.0 * gap > extent_x {
            return Err(overflow());
        }
        if x + w + gap > extent_x {
            x = gap;
            y += shelf + gap;
            shelf = 0.0;
        }
        if y + d + gap > extent_y {
            return Err(overflow());
        }
        let rect = Polygon::rectangle(scene.xll + x, scene.yll + y, w, d);
        let geometry = Geometry::Polygon(rect);
        let plateau = scene.ground_elev + b.ht;
        let c0 = ((x / scene.cellsize).floor() as usize).saturating_sub(1);
        let c1 = (((x + w) / scene.cellsize).ceil() as usize + 1).min(scene.ncols - 1);
        let r0 = (((extent_y - y - d) / scene.cellsize).floor() as usize).saturating_sub(1);
        let r1 = (((extent_y - y) / scene.cellsize).ceil() as usize + 1).min(scene.nrows - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let center = grid.cell_center(row, col).expect("window inside grid");
                if point_in_polygon(center, &geometry) {
                    *grid.value_mut(row, col) = plateau;
                }
            }
        }

        let mut attrs = Map::new();
        attrs.insert("UID".into(), json!(b.uid));
        if let Some(c) = &b.roof_color {
            attrs.insert("RoofColor".into(), json!(c));
        }
        if let Some(r) = b.res {
            attrs.insert("res".into(), json!(r));
        }
        let area_sqm = w * d;
        let zonal_mean = plateau;
        truth.push(AttributeRow {
            uid: b.uid.clone(),
            build_type: None,
            roof_color: b.roof_color.clone(),
            zonal_mean,
            zonal_max: zonal_mean,
            zonal_std: 0.0,
            floor: zonal_mean / DEFAULT_FLOOR_HEIGHT,
            area_sqft: area_sqm * SQFT_PER_SQM,
            area_sqm,
            nodes: 4,
            res: b.res,
            ht: b.ht,
        });
        footprints.push(FootprintRecord {
            uid: b.uid.clone(),
            geometry,
            attributes: attrs,
        });
        x += w + gap;
        shelf = shelf.max(d);
    }
    Ok(SyntheticScene {
        grid,
        footprints,
        truth: AttributeTable::new(truth),
    })
}

/// Generate a table with `config`, then place its first `scene.buildings` rows
/// as rectangles with a seeded aspect ratio between 1 and 2.
pub fn rasterize_synthetic_scene(
    config: &SynthConfig,
    scene: &SceneConfig,
) -> Result<SyntheticScene, SynthError> {
    let data = generate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5ce4e);
    let aspect = Uniform::new_inclusive(1.0, 2.0).expect("valid range");
    let specs: Vec<BuildingSpec> = data
        .table
        .rows
        .iter()
        .take(scene.buildings)
        .map(|r| {
            let a: f64 = aspect.sample(&mut rng);
            let side = r.area_sqm.max(scene.cellsize * scene.cellsize);
            let width = (side * a).sqrt().max(scene.cellsize);
            BuildingSpec {
                uid: r.uid.clone(),
                width,
                depth: (side / width).max(scene.cellsize),
                ht: r.ht,
                roof_color: r.roof_color.clone(),
                res: r.res,
            }
        })
        .collect();
    rasterize_buildings(&specs, scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::zonal_stats;

    #[test]
    fn reference_counts() {
        let d = generate(&SynthConfig::default()).unwrap();
        let minority = d.table.rows.iter().filter(|r| r.res == Some(0)).count();
        assert_eq!(minority, 417);
        assert_eq!(d.table.len() - minority, 15582);
        assert_eq!(d.oracle, d.table.labels().unwrap());
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            n: 2000,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 7, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().table, generate(&other).unwrap().table);
    }

    #[test]
    fn rule_consistent_and_margin_clear() {
        let d = generate(&SynthConfig::default()).unwrap();
        let m = RuleConfig::default().margin;
        for (r, &o) in d.table.rows.iter().zip(&d.oracle) {
            assert_eq!(d.rule.label(r.area_sqft, r.ht), o);
            let rel_h = r.ht / d.rule.ht;
            assert!(rel_h >= 1.0 + m - 1e-9 || rel_h <= 1.0 / (1.0 + m) + 1e-9);
            let rel_a = r.area_sqft / d.rule.area_sqft;
            assert!(rel_a >= 1.0 + m - 1e-9 || rel_a <= 1.0 / (1.0 + m) + 1e-9);
        }
    }

    #[test]
    fn noise_flips_some_labels() {
        let cfg = SynthConfig {
            noise_rate: 0.02,
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        let flips = d.table.rows.iter().zip(&d.oracle).filter(|(r, o)| r.res != Some(**o)).count();
        let rate = flips as f64 / cfg.n as f64;
        assert!((0.015..0.025).contains(&rate), "rate {rate}");
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { minority_fraction: 0.6, ..SynthConfig::default() },
            SynthConfig { noise_rate: 0.5, ..SynthConfig::default() },
            SynthConfig { n: 10, minority_fraction: 0.01, ..SynthConfig::default() },
        ] {
            assert!(matches!(generate(&cfg), Err(SynthError::InfeasibleConfig(_))));
        }
    }

    #[test]
    fn margin_map_is_monotone() {
        let t = 10.0;
        let mut prev = 0.0;
        for i in 1..4000 {
            let v = i as f64 * 0.005;
            let m = open_margin(v, t, 0.1);
            assert!(m > prev);
            prev = m;
            assert!(m <= t / 1.1 + 1e-12 || m >= t * 1.1 - 1e-12);
        }
    }

    #[test]
    fn single_building_plateau() {
        let b = BuildingSpec {
            uid: "b1".into(),
            width: 10.0,
            depth: 8.0,
            ht: 7.7176,
            roof_color: None,
            res: Some(1),
        };
        let scene = SceneConfig {
            ncols: 40,
            nrows: 40,
            ..SceneConfig::default()
        };
        let s = rasterize_buildings(&[b], &scene).unwrap();
        let z = zonal_stats(&s.grid, &s.footprints[0].geometry).unwrap();
        assert!((z.mean - 25.2176).abs() < 0.01);
        assert_eq!(z.count, 80);
    }

    #[test]
    fn empty_scene_is_flat() {
        let scene = SceneConfig {
            ncols: 10,
            nrows: 10,
            ..SceneConfig::default()
        };
        let s = rasterize_buildings(&[], &scene).unwrap();
        assert!(s.footprints.is_empty());
        assert!(s.grid.values.iter().all(|v| *v == scene.ground_elev));
    }

    #[test]
    fn oversized_building_overflows() {
        let b = BuildingSpec {
            uid: "huge".into(),
            width: 500.0,
            depth: 10.0,
            ht: 3.0,
            roof_color: None,
            res: None,
        };
        let scene = SceneConfig {
            ncols: 100,
            nrows: 100,
            ..SceneConfig::default()
        };
        assert_eq!(
            rasterize_buildings(&[b], &scene),
            Err(SynthError::SceneOverflow { uid: "huge".into() })
        );
    }
}
