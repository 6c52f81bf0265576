//! Train a small network on synthetic attributes, then classify the footprints
//! of a rasterized scene and write classified GeoJSON to stdout.

use bldgclass::features::{
    build_attribute_table, encode_features, stratified_split, transform, EncodingSpec, ExtractConfig,
    SplitRatios,
};
use bldgclass::geodata_io::{write_predictions, Prediction};
use bldgclass::neuralnet::init_mlp;
use bldgclass::synth::{generate, rasterize_synthetic_scene, SceneConfig, SynthConfig};
use bldgclass::trainer::{predict, train, TrainConfig};

fn main() {
    let synth = SynthConfig {
        n: 4000,
        ..SynthConfig::default()
    };
    let data = generate(&synth).unwrap();
    let labels = data.table.labels().unwrap();
    let split = stratified_split(&labels, SplitRatios::default(), 1).unwrap();
    let fm = encode_features(&data.table, &EncodingSpec::default(), &split.train).unwrap();
    let mlp = init_mlp(&[fm.x.ncols(), 32, 16, 8, 1], 0.01, 1).unwrap();
    let config = TrainConfig {
        max_epochs: 30,
        patience: 10,
        ..TrainConfig::default()
    };
    let model = train(mlp, &fm, &split, &config).unwrap().model;

    let scene = SceneConfig {
        ncols: 200,
        nrows: 200,
        buildings: 12,
        ..SceneConfig::default()
    };
    let s = rasterize_synthetic_scene(&synth, &scene).unwrap();
    let table = build_attribute_table(&s.grid, &s.footprints, &ExtractConfig::default())
        .unwrap()
        .table;
    let x = transform(&table, &fm.spec, &fm.standardization).unwrap();
    let (probs, classes) = predict(&model, &x, config.threshold).unwrap();
    let preds: Vec<Prediction> = probs
        .into_iter()
        .zip(classes)
        .map(|(probability, class)| Prediction { probability, class })
        .collect();
    println!("{}", write_predictions(&s.footprints, &preds).unwrap());
}
