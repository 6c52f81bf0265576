//! Rasterize a synthetic scene, extract the attribute table from the DEM and
//! footprints, and compare it with the generating values.

use bldgclass::features::{build_attribute_table, ExtractConfig};
use bldgclass::synth::{rasterize_synthetic_scene, SceneConfig, SynthConfig};

fn main() {
    let synth = SynthConfig {
        n: 2000,
        ..SynthConfig::default()
    };
    let scene = SceneConfig {
        ncols: 400,
        nrows: 400,
        buildings: 60,
        ..SceneConfig::default()
    };
    let s = rasterize_synthetic_scene(&synth, &scene).expect("scene fits");
    let built = build_attribute_table(&s.grid, &s.footprints, &ExtractConfig::default()).unwrap();
    println!("{} footprints, {} failures", s.footprints.len(), built.failures.len());

    let (mut worst_ht, mut worst_area) = (0.0f64, 0.0f64);
    for (got, want) in built.table.rows.iter().zip(&s.truth.rows) {
        worst_ht = worst_ht.max((got.ht - want.ht).abs());
        worst_area = worst_area.max((got.area_sqm - want.area_sqm).abs());
    }
    println!("max |d ht| = {worst_ht:.3e} m, max |d area_sqm| = {worst_area:.3e} m2");
    for r in built.table.rows.iter().take(5) {
        println!(
            "{} ht {:.4} area_sqm {:.3} nodes {} res {:?}",
            r.uid, r.ht, r.area_sqm, r.nodes, r.res
        );
    }
}
