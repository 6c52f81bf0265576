//! Planar geometry on footprint polygons: areas, node counts, point-in-polygon
//! and zonal statistics of a DEM under a footprint.
//!
//! All coordinates are assumed to be in a projected CRS with meter units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodata_io::DemGrid;

/// `[x, y]` in projected meters.
pub type Coord = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ring has {0} coordinates, at least 4 are required")]
    DegenerateRing(usize),
    #[error("polygon has no rings")]
    EmptyPolygon,
    #[error("no valid DEM cell center falls inside the footprint")]
    NoCellsCovered,
}

/// One polygon: the first ring is the exterior, the rest are holes.
/// Rings are closed (first coordinate repeated at the end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub rings: Vec<Vec<Coord>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<Coord>>) -> Self {
        Polygon { rings }
    }

    /// Closed axis-aligned rectangle with lower-left corner `(x0, y0)`.
    pub fn rectangle(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        let (x1, y1) = (x0 + width, y0 + height);
        Polygon {
            rings: vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
        }
    }

    pub fn exterior(&self) -> Option<&[Coord]> {
        self.rings.first().map(Vec::as_slice)
    }

    pub fn holes(&self) -> &[Vec<Coord>] {
        if self.rings.is_empty() {
            &[]
        } else {
            &self.rings[1..]
        }
    }
}

/// A footprint geometry. The variant is remembered so that output documents
/// keep the geometry type they were read with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
}

impl Geometry {
    pub fn parts(&self) -> &[Polygon] {
        match self {
            Geometry::Polygon(p) => std::slice::from_ref(p),
            Geometry::MultiPolygon(ps) => ps,
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Coord>> {
        self.parts().iter().flat_map(|p| p.rings.iter())
    }

    /// `(min_x, min_y, max_x, max_y)` over every ring, `None` when there are no coordinates.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let mut coords = self.rings().flatten().peekable();
        coords.peek()?;
        Some(coords.fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), c| (x0.min(c[0]), y0.min(c[1]), x1.max(c[0]), y1.max(c[1])),
        ))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Geometry {
        let shift = |p: &Polygon| Polygon {
            rings: p
                .rings
                .iter()
                .map(|r| r.iter().map(|c| [c[0] + dx, c[1] + dy]).collect())
                .collect(),
        };
        match self {
            Geometry::Polygon(p) => Geometry::Polygon(shift(p)),
            Geometry::MultiPolygon(ps) => Geometry::MultiPolygon(ps.iter().map(shift).collect()),
        }
    }
}

fn check_ring(ring: &[Coord]) -> Result<(), GeometryError> {
    if ring.len() < 4 {
        return Err(GeometryError::DegenerateRing(ring.len()));
    }
    Ok(())
}

/// Signed shoelace area of a closed ring; positive for counter-clockwise rings.
pub fn ring_signed_area(ring: &[Coord]) -> f64 {
    let twice: f64 = ring
        .windows(2)
        .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
        .sum();
    twice / 2.0
}

/// Area in square meters: each exterior ring minus its holes, summed over parts.
pub fn polygon_area_sqm(geometry: &Geometry) -> Result<f64, GeometryError> {
    let mut total = 0.0;
    for part in geometry.parts() {
        let exterior = part.exterior().ok_or(GeometryError::EmptyPolygon)?;
        check_ring(exterior)?;
        let mut area = ring_signed_area(exterior).abs();
        for hole in part.holes() {
            check_ring(hole)?;
            area -= ring_signed_area(hole).abs();
        }
        total += area;
    }
    Ok(total.max(0.0))
}

/// Vertices on the exterior outline of every part, closing vertex excluded.
pub fn node_count(geometry: &Geometry) -> Result<usize, GeometryError> {
    node_count_with(geometry, false)
}

/// Like [`node_count`], optionally also counting hole vertices.
pub fn node_count_with(geometry: &Geometry, include_holes: bool) -> Result<usize, GeometryError> {
    let mut nodes = 0;
    for part in geometry.parts() {
        let exterior = part.exterior().ok_or(GeometryError::EmptyPolygon)?;
        check_ring(exterior)?;
        nodes += exterior.len() - 1;
        if include_holes {
            for hole in part.holes() {
                check_ring(hole)?;
                nodes += hole.len() - 1;
            }
        }
    }
    Ok(nodes)
}

/// Even-odd crossing test against one ring. An edge counts when
/// `min(y0, y1) <= y < max(y0, y1)` and the crossing lies strictly right of `x`.
fn ring_crossings_odd(pt: Coord, ring: &[Coord]) -> bool {
    let [x, y] = pt;
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a[1] <= y) != (b[1] <= y) {
            let x_cross = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd containment; points inside a hole are outside.
pub fn point_in_polygon(pt: Coord, geometry: &Geometry) -> bool {
    geometry.parts().iter().any(|part| {
        part.rings
            .iter()
            .fold(false, |inside, ring| inside ^ ring_crossings_odd(pt, ring))
    })
}

/// Elevation statistics of the DEM cells under a footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZonalStats {
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl ZonalStats {
    /// Statistics of an in-order sequence of values. `None` for an empty sequence.
    pub fn from_values(values: &[f64]) -> Option<ZonalStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(ZonalStats {
            mean,
            max,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// Cell index window `[first, last]` whose centers may fall in `[lo, hi]` along one axis.
fn index_window(lo: f64, hi: f64, origin: f64, cellsize: f64, n: usize) -> Option<(usize, usize)> {
    // One cell of slack either way; the exact test happens in point_in_polygon.
    let first = ((lo - origin) / cellsize - 0.5).floor() - 1.0;
    let last = ((hi - origin) / cellsize - 0.5).ceil() + 1.0;
    if last < 0.0 || first > (n as f64 - 1.0) || first.is_nan() || last.is_nan() {
        return None;
    }
    let first = first.max(0.0) as usize;
    let last = (last as usize).min(n - 1);
    Some((first, last))
}

/// Mean, max and population std of every valid cell whose center lies in `geometry`.
///
/// Only the geometry's bounding box is scanned. Cells are visited in row-major
/// order (north row first), so the result is identical to scanning the whole grid.
pub fn zonal_stats(grid: &DemGrid, geometry: &Geometry) -> Result<ZonalStats, GeometryError> {
    let (min_x, min_y, max_x, max_y) = geometry
        .bounding_box()
        .ok_or(GeometryError::NoCellsCovered)?;
    let cols = index_window(min_x, max_x, grid.xll, grid.cellsize, grid.ncols);
    // Rows count from the north edge.
    let north = grid.yll + grid.nrows as f64 * grid.cellsize;
    let rows = index_window(-max_y, -min_y, -north, grid.cellsize, grid.nrows);
    let (Some((c0, c1)), Some((r0, r1))) = (cols, rows) else {
        return Err(GeometryError::NoCellsCovered);
    };

    let mut values = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            let v = grid.value(row, col);
            if grid.is_nodata(v) {
                continue;
            }
            if point_in_polygon(grid.center_unchecked(row, col), geometry) {
                values.push(v);
            }
        }
    }
    ZonalStats::from_values(&values).ok_or(GeometryError::NoCellsCovered)
}
