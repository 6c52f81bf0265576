//! Correlation matrix of the extracted features and correlated-feature pruning.

use bldgclass::features::{correlation_matrix, prune_features};
use bldgclass::synth::{generate, SynthConfig};

fn main() {
    let data = generate(&SynthConfig::default()).unwrap();
    let names: Vec<String> = ["zonal_mean", "floor", "area_sqft", "area_sqm", "nodes", "ht"]
        .map(String::from)
        .to_vec();
    let corr = correlation_matrix(&data.table, &names).unwrap();
    print!("{:>11}", "");
    for n in &names {
        print!("{n:>11}");
    }
    println!();
    for (i, n) in names.iter().enumerate() {
        print!("{n:>11}");
        for j in 0..names.len() {
            match corr.get(i, j) {
                Some(r) => print!("{r:>11.4}"),
                None => print!("{:>11}", "-"),
            }
        }
        println!();
    }
    let keep = vec!["ht".to_string(), "area_sqft".to_string()];
    let out = prune_features(&corr, 0.9, &keep).unwrap();
    println!("kept:    {:?}", out.kept);
    println!("dropped: {:?}", out.dropped);
}
