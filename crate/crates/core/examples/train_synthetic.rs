//! Train the classifier on the synthetic dataset and report test metrics.
//!
//! `cargo run --release --example train_synthetic -- [noise_rate] [hidden,widths]`

use std::time::Instant;

use bldgclass::features::{encode_features, stratified_split, EncodingSpec, SplitRatios};
use bldgclass::neuralnet::{init_mlp, DEFAULT_ALPHA, DEFAULT_HIDDEN};
use bldgclass::synth::{generate, SynthConfig};
use bldgclass::trainer::{classification_report, predict, train_with_state, TrainConfig};
use bldgclass::OptimizerState;

fn main() {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().map_or(0.0, |s| s.parse().expect("noise rate"));
    let hidden: Vec<usize> = args.next().map_or(DEFAULT_HIDDEN.to_vec(), |s| {
        s.split(',').map(|t| t.parse().expect("layer width")).collect()
    });

    let synth = SynthConfig {
        noise_rate: noise,
        ..SynthConfig::default()
    };
    let data = generate(&synth).unwrap();
    let labels = data.table.labels().unwrap();
    let split = stratified_split(&labels, SplitRatios::default(), 42).unwrap();
    let fm = encode_features(&data.table, &EncodingSpec::default(), &split.train).unwrap();

    let mut sizes = vec![fm.x.ncols()];
    sizes.extend(&hidden);
    sizes.push(1);
    let mlp = init_mlp(&sizes, DEFAULT_ALPHA, 42).unwrap();
    let config = TrainConfig::default();
    let state = OptimizerState::new(&mlp, config.optimizer());

    let start = Instant::now();
    let mut last = Instant::now();
    let out = train_with_state(mlp, state, &fm, &split, &config, |r| {
        println!(
            "epoch {:>3}  train_loss {:.5}  val_loss {:.5}  val_f1 {:.5}  ({:.1}s)",
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.val_f1,
            last.elapsed().as_secs_f64()
        );
        last = Instant::now();
    })
    .unwrap();
    println!(
        "best epoch {}, stopped epoch {}, {:.1}s",
        out.history.best_epoch,
        out.history.stopped_epoch,
        start.elapsed().as_secs_f64()
    );

    let (x, _) = fm.select(&split.test);
    let (_, classes) = predict(&out.model, &x, config.threshold).unwrap();
    let pred: Vec<u8> = classes.iter().map(|c| c.label()).collect();
    let oracle: Vec<u8> = split.test.iter().map(|&i| data.oracle[i]).collect();
    let observed: Vec<u8> = split.test.iter().map(|&i| labels[i]).collect();
    let vs_oracle = classification_report(&oracle, &pred, None).unwrap();
    let vs_observed = classification_report(&observed, &pred, None).unwrap();
    println!(
        "test vs planted rule: weighted F1 {:.4}, non-residential F1 {:.4}",
        vs_oracle.weighted_avg.f1, vs_oracle.classes.non_residential.f1
    );
    println!(
        "test vs observed labels: weighted F1 {:.4}, non-residential F1 {:.4}",
        vs_observed.weighted_avg.f1, vs_observed.classes.non_residential.f1
    );
}
