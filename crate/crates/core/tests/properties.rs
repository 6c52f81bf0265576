mod common;

use bldgclass::features::{
    correlation_matrix, encode_features, stratified_split, AttributeTable, EncodingSpec, SplitRatios,
};
use bldgclass::geodata_io::{parse_ascii_grid, parse_footprints, write_ascii_grid, write_footprints, DemGrid, FootprintRecord};
use bldgclass::geometry::{node_count, point_in_polygon, polygon_area_sqm, zonal_stats, Geometry, Polygon};
use bldgclass::neuralnet::{init_mlp, AmsGradConfig, Gradients, OptimizerState};
use bldgclass::synth::{generate, SynthConfig};
use bldgclass::trainer::classification_report;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn ring_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    (any::<u64>(), 3usize..=12).prop_map(|(seed, k)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::star_ring(&mut rng, 0.0, 0.0, 2.0, 10.0, k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn zonal_window_matches_brute_force(seed in any::<u64>(), hole in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = common::random_grid(&mut rng);
        let (w, h) = (grid.ncols as f64 * grid.cellsize, grid.nrows as f64 * grid.cellsize);
        let geom = common::random_geometry(&mut rng, grid.xll, grid.yll, w, h, hole);
        prop_assert_eq!(zonal_stats(&grid, &geom).ok(), common::brute_force_zonal(&grid, &geom));
    }

    #[test]
    fn zonal_invariant_under_whole_cell_shift(seed in any::<u64>(), dc in -5i32..5, dr in -5i32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = common::random_grid(&mut rng);
        let (w, h) = (grid.ncols as f64 * grid.cellsize, grid.nrows as f64 * grid.cellsize);
        // Vertices on a 1/64 lattice keep the shifted coordinates exact.
        let snap = |v: f64| (v * 64.0).round() / 64.0;
        let raw = common::random_geometry(&mut rng, grid.xll, grid.yll, w, h, true);
        let parts: Vec<Polygon> = raw
            .parts()
            .iter()
            .map(|p| Polygon::new(p.rings.iter().map(|r| r.iter().map(|c| [snap(c[0]), snap(c[1])]).collect()).collect()))
            .collect();
        let geom = Geometry::MultiPolygon(parts);
        let dx = f64::from(dc) * grid.cellsize;
        let dy = f64::from(dr) * grid.cellsize;
        let moved_grid = DemGrid { xll: grid.xll + dx, yll: grid.yll + dy, ..grid.clone() };
        prop_assert_eq!(zonal_stats(&grid, &geom).ok(), zonal_stats(&moved_grid, &geom.translated(dx, dy)).ok());
    }

    #[test]
    fn area_and_nodes_invariant(ring in ring_strategy(), start in 0usize..12, dx in -1e3f64..1e3, dy in -1e3f64..1e3) {
        let base = Geometry::Polygon(Polygon::new(vec![ring.clone()]));
        let area = polygon_area_sqm(&base).unwrap();
        let nodes = node_count(&base).unwrap();
        prop_assert!(area > 0.0);
        prop_assert_eq!(nodes, ring.len() - 1);

        let open = &ring[..ring.len() - 1];
        let k = start % open.len();
        let mut rotated: Vec<[f64; 2]> = open[k..].iter().chain(&open[..k]).copied().collect();
        rotated.push(rotated[0]);
        let mut reversed = ring.clone();
        reversed.reverse();
        for variant in [rotated, reversed] {
            let g = Geometry::Polygon(Polygon::new(vec![variant]));
            prop_assert!(close(polygon_area_sqm(&g).unwrap(), area, 1e-12));
            prop_assert_eq!(node_count(&g).unwrap(), nodes);
        }
        let moved = base.translated(dx, dy);
        prop_assert!(close(polygon_area_sqm(&moved).unwrap(), area, 1e-9));
        prop_assert_eq!(node_count(&moved).unwrap(), nodes);
    }

    #[test]
    fn rectangle_containment_is_half_open(
        x0 in -64i32..64, y0 in -64i32..64, w in 1i32..32, h in 1i32..32,
        px in -80i32..120, py in -80i32..120,
    ) {
        // Eighths keep every coordinate exact.
        let e = |v: i32| f64::from(v) / 8.0;
        let g = Geometry::Polygon(Polygon::rectangle(e(x0), e(y0), e(w), e(h)));
        let (x, y) = (e(px), e(py));
        let expected = e(x0) <= x && x < e(x0 + w) && e(y0) <= y && y < e(y0 + h);
        prop_assert_eq!(point_in_polygon([x, y], &g), expected);
    }

    #[test]
    fn grid_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = common::random_grid(&mut rng);
        let back = parse_ascii_grid(&write_ascii_grid(&grid)).unwrap();
        prop_assert_eq!(back, grid);
    }

    #[test]
    fn footprint_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<FootprintRecord> = (0..n)
            .map(|i| {
                let mut attributes = Map::new();
                attributes.insert("UID".into(), json!(format!("u{i}")));
                attributes.insert("res".into(), json!(i % 2));
                FootprintRecord {
                    uid: format!("u{i}"),
                    geometry: common::random_geometry(&mut rng, 0.0, 0.0, 100.0, 100.0, i % 2 == 0),
                    attributes,
                }
            })
            .collect();
        let back = parse_footprints(&write_footprints(&records)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn split_is_a_stratified_partition(labels in prop::collection::vec(0u8..2, 0..400), seed in any::<u64>()) {
        let ones = labels.iter().filter(|&&l| l == 1).count();
        let zeros = labels.len() - ones;
        prop_assume!(ones >= 3 && zeros >= 3);
        let s = stratified_split(&labels, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (class, n) in [(0u8, zeros), (1u8, ones)] {
            let count = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == class).count();
            prop_assert_eq!(count(&s.test), n / 10);
            prop_assert_eq!(count(&s.val), n / 10);
        }
    }

    #[test]
    fn vhat_never_decreases(seed in any::<u64>(), steps in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mlp = init_mlp(&[3, 5, 1], 0.01, seed).unwrap();
        let mut state = OptimizerState::new(&mlp, AmsGradConfig::default());
        for _ in 0..steps {
            let mut g = mlp.zeros_like();
            g.weights.iter_mut().for_each(|w| w.mapv_inplace(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)));
            let before = state.vhat_weights.clone();
            state.step(&mut mlp, &Gradients { weights: g.weights, biases: g.biases }).unwrap();
            for (b, a) in before.iter().zip(&state.vhat_weights) {
                prop_assert!(b.iter().zip(a.iter()).all(|(b, a)| a >= b));
            }
        }
    }

    #[test]
    fn correlation_ignores_row_order(seed in any::<u64>()) {
        let data = generate(&SynthConfig { n: 300, minority_fraction: 0.1, seed, ..SynthConfig::default() }).unwrap();
        let names: Vec<String> = ["ht", "area_sqft", "nodes", "zonal_std"].map(String::from).to_vec();
        let a = correlation_matrix(&data.table, &names).unwrap();
        let mut rows = data.table.rows.clone();
        rows.reverse();
        rows.rotate_left((seed % 300) as usize);
        let b = correlation_matrix(&AttributeTable::new(rows), &names).unwrap();
        for i in 0..names.len() {
            for j in 0..names.len() {
                let (x, y) = (a.get(i, j).unwrap(), b.get(i, j).unwrap());
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&x));
                prop_assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn report_counts_add_up(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..300)) {
        let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let r = classification_report(&t, &p, None).unwrap();
        let cm = r.confusion_matrix;
        prop_assert_eq!(cm[0][0] + cm[0][1] + cm[1][0] + cm[1][1], t.len());
        prop_assert_eq!(cm[1][0] + cm[1][1], t.iter().filter(|&&l| l == 1).count());
        let acc = (cm[0][0] + cm[1][1]) as f64 / t.len() as f64;
        prop_assert!((r.accuracy - acc).abs() < 1e-15);
        for f in [r.classes.residential.f1, r.classes.non_residential.f1, r.weighted_avg.f1] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}

#[test]
fn standardized_training_columns() {
    let data = generate(&SynthConfig { n: 2000, ..SynthConfig::default() }).unwrap();
    let labels = data.table.labels().unwrap();
    let split = stratified_split(&labels, SplitRatios::default(), 4).unwrap();
    let fm = encode_features(&data.table, &EncodingSpec::default(), &split.train).unwrap();
    let (x, _) = fm.select(&split.train);
    for col in x.columns() {
        let n = col.len() as f64;
        let m = col.sum() / n;
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 1e-9);
        assert!((s - 1.0).abs() < 1e-9);
    }
}
