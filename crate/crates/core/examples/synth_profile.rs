//! Generate the default synthetic table and compare its moments with the target profile.

use bldgclass::features::{analyze, AttributeTable};
use bldgclass::synth::{generate, SynthConfig};

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    (m, s, v.iter().cloned().fold(f64::MIN, f64::max))
}

fn report(table: &AttributeTable, name: &str, target: (f64, f64, f64)) {
    let (m, s, mx) = moments(&table.column(name).unwrap());
    println!(
        "{name:>10}: mean {m:>10.4} ({:>10.4})  std {s:>10.4} ({:>10.4})  max {mx:>11.4} ({:>11.4})",
        target.0, target.1, target.2
    );
}

fn main() {
    let cfg = SynthConfig::default();
    let data = generate(&cfg).expect("default config is feasible");
    let t = &data.table;
    let minority = t.rows.iter().filter(|r| r.res == Some(0)).count();
    println!("rows {}, non-residential {minority}", t.len());
    println!("rule: area_sqft > {:.2} or ht > {:.4}", data.rule.area_sqft, data.rule.ht);
    report(t, "zonal_mean", (25.2176, 3.3335, 78.7562));
    report(t, "ht", (7.7176, 3.3335, 61.2562));
    report(t, "floor", (8.4058, 1.1111, 26.2520));
    report(t, "area_sqft", (1552.0230, 4037.1331, 191268.2879));
    report(t, "area_sqm", (144.1876, 375.0619, 17769.4054));
    report(t, "nodes", (5.1131, 3.5721, 106.0));

    let features: Vec<String> = ["zonal_mean", "floor", "area_sqft", "area_sqm", "nodes", "ht"]
        .map(String::from)
        .to_vec();
    let keep = vec!["ht".to_string(), "area_sqft".to_string()];
    let eda = analyze(t, &features, 0.9, &keep).unwrap();
    println!("kept {:?}\ndropped {:?}", eda.kept, eda.dropped);
}
