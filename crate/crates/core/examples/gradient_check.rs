//! Compare backpropagated gradients with central finite differences.

use bldgclass::neuralnet::{bce_loss, init_mlp, Mlp};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(mlp: &Mlp, x: &Array2<f64>, y: &[f64]) -> f64 {
    let p = mlp.predict_proba(x.view()).unwrap();
    bce_loss(p.as_slice().unwrap(), y).unwrap()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mlp = init_mlp(&[7, 16, 8, 4, 1], 0.01, 3).unwrap();
    let x = Array2::from_shape_fn((4, 7), |_| rng.random_range(-2.0..2.0));
    let y = vec![1.0, 0.0, 1.0, 0.0];
    let grads = mlp.backward(&mlp.forward(x.view()).unwrap(), &y).unwrap();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for layer in 0..mlp.weights.len() {
        let (rows, cols) = mlp.weights[layer].dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = mlp.weights[layer][[r, c]];
                mlp.weights[layer][[r, c]] = orig + h;
                let up = loss(&mlp, &x, &y);
                mlp.weights[layer][[r, c]] = orig - h;
                let down = loss(&mlp, &x, &y);
                mlp.weights[layer][[r, c]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.weights[layer][[r, c]];
                let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        println!("layer {layer}: {rows}x{cols} weights checked");
    }
    println!("max relative error {worst:.3e}");
}
