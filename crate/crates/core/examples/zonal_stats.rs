//! Parse an ASCII Grid and a GeoJSON footprint, then print area, node count
//! and zonal statistics.

use bldgclass::geodata_io::{parse_ascii_grid, parse_footprints};
use bldgclass::geometry::{node_count, polygon_area_sqm, zonal_stats};

const DEM: &str = "ncols 6
nrows 5
xllcorner 0
yllcorner 0
cellsize 1
NODATA_value -9999
17.5 17.5 17.5 17.5 17.5 17.5
17.5 25.0 25.5 26.0 17.5 17.5
17.5 25.0 31.0 26.0 17.5 -9999
17.5 24.5 25.0 25.5 17.5 17.5
17.5 17.5 17.5 17.5 17.5 17.5
";

const FOOTPRINTS: &str = r#"{"type":"FeatureCollection","features":[
 {"type":"Feature","properties":{"UID":"house-1","RoofColor":"red"},
  "geometry":{"type":"Polygon","coordinates":[[[1,1],[4,1],[4,4],[1,4],[1,1]]]}},
 {"type":"Feature","properties":{"UID":"courtyard"},
  "geometry":{"type":"Polygon","coordinates":[
    [[0,0],[6,0],[6,5],[0,5],[0,0]],
    [[1,1],[1,4],[4,4],[4,1],[1,1]]]}}
]}"#;

fn main() {
    let grid = parse_ascii_grid(DEM).expect("valid grid");
    let footprints = parse_footprints(FOOTPRINTS).expect("valid footprints");
    for rec in &footprints {
        let area = polygon_area_sqm(&rec.geometry).unwrap();
        let nodes = node_count(&rec.geometry).unwrap();
        let z = zonal_stats(&grid, &rec.geometry).unwrap();
        println!(
            "{:>10}: area {area:6.2} m2, nodes {nodes}, cells {}, mean {:.4}, max {:.4}, std {:.4}",
            rec.uid, z.count, z.mean, z.max, z.std
        );
    }
}
