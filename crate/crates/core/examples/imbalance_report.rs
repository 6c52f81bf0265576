//! Why accuracy misleads on imbalanced data: score the classifier that calls
//! every building residential.

use bldgclass::synth::{generate, SynthConfig};
use bldgclass::trainer::classification_report;

fn main() {
    let data = generate(&SynthConfig::default()).unwrap();
    let truth = data.table.labels().unwrap();
    let all_residential = vec![1u8; truth.len()];
    let report = classification_report(&truth, &all_residential, None).unwrap();
    println!("{}", report.to_json());
    println!(
        "accuracy {:.4} but non-residential F1 {:.4}",
        report.accuracy, report.classes.non_residential.f1
    );
}
