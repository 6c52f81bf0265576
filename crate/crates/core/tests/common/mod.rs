#![allow(dead_code)]

use bldgclass::geodata_io::DemGrid;
use bldgclass::geometry::{point_in_polygon, Geometry, Polygon, ZonalStats};
use rand::Rng;

/// Star-shaped simple ring with `k` vertices around `(cx, cy)`, closed, counter-clockwise.
pub fn star_ring(rng: &mut impl Rng, cx: f64, cy: f64, r_min: f64, r_max: f64, k: usize) -> Vec<[f64; 2]> {
    let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let mut ring: Vec<[f64; 2]> = angles
        .iter()
        .map(|a| {
            let r = rng.random_range(r_min..=r_max);
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect();
    ring.push(ring[0]);
    ring
}

fn random_part(rng: &mut impl Rng, x0: f64, y0: f64, width: f64, height: f64, with_hole: bool) -> Polygon {
    let cx = x0 + rng.random_range(-0.2 * width..1.2 * width);
    let cy = y0 + rng.random_range(-0.2 * height..1.2 * height);
    let r_max = rng.random_range(0.5..0.6 * width.max(height) + 1.0);
    let k = rng.random_range(3..=12);
    let mut rings = vec![star_ring(rng, cx, cy, 0.5 * r_max, r_max, k)];
    if with_hole {
        let kh = rng.random_range(3..=6);
        let mut hole = star_ring(rng, cx, cy, 0.1 * r_max, 0.4 * r_max, kh);
        hole.reverse();
        rings.push(hole);
    }
    Polygon::new(rings)
}

/// Random polygon with at most 12 exterior vertices, optionally holed, and a
/// two-part multipolygon one time in five, scattered over and around the extent.
pub fn random_geometry(rng: &mut impl Rng, x0: f64, y0: f64, width: f64, height: f64, with_hole: bool) -> Geometry {
    if rng.random_bool(0.2) {
        Geometry::MultiPolygon(vec![
            random_part(rng, x0, y0, width, height, with_hole),
            random_part(rng, x0, y0, width, height, false),
        ])
    } else {
        Geometry::Polygon(random_part(rng, x0, y0, width, height, with_hole))
    }
}

/// Random grid up to 50 x 50 with a share of nodata cells.
pub fn random_grid(rng: &mut impl Rng) -> DemGrid {
    let ncols = rng.random_range(1..=50);
    let nrows = rng.random_range(1..=50);
    let cellsize = [0.5, 1.0, 2.0, 0.75][rng.random_range(0..4)];
    let nodata = -9999.0;
    let p_nodata = rng.random_range(0.0..0.3);
    let values = (0..ncols * nrows)
        .map(|_| {
            if rng.random_bool(p_nodata) {
                nodata
            } else {
                rng.random_range(0.0..100.0)
            }
        })
        .collect();
    let xll = rng.random_range(-10.0..10.0f64).round();
    let yll = rng.random_range(-10.0..10.0f64).round();
    DemGrid::new(ncols, nrows, xll, yll, cellsize, nodata, values).unwrap()
}

/// Visit every cell of the grid, no windowing.
pub fn brute_force_zonal(grid: &DemGrid, geometry: &Geometry) -> Option<ZonalStats> {
    let mut values = Vec::new();
    for row in 0..grid.nrows {
        for col in 0..grid.ncols {
            let v = grid.value(row, col);
            if v == grid.nodata {
                continue;
            }
            if point_in_polygon(grid.cell_center(row, col).unwrap(), geometry) {
                values.push(v);
            }
        }
    }
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for &v in &values {
        sum += v;
        max = max.max(v);
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for &v in &values {
        ss += (v - mean) * (v - mean);
    }
    Some(ZonalStats {
        mean,
        max,
        std: (ss / n).sqrt(),
        count: values.len(),
    })
}
