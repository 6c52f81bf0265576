//! A single AMSGrad step on a one-parameter network, next to the hand computation.

use bldgclass::neuralnet::{amsgrad_step, init_mlp, AmsGradConfig, OptimizerState};

fn main() {
    let mut mlp = init_mlp(&[1, 1], 0.01, 0).unwrap();
    mlp.weights[0][[0, 0]] = 1.0;
    let mut grads = mlp.zeros_like();
    grads.weights[0][[0, 0]] = 0.5;
    let grads = bldgclass::neuralnet::Gradients {
        weights: grads.weights,
        biases: grads.biases,
    };
    let mut state = OptimizerState::new(&mlp, AmsGradConfig::default());
    amsgrad_step(&mut mlp, &grads, &mut state).unwrap();

    // m = 0.05, v = 0.00025, lr_t = 0.001 * sqrt(0.001) / 0.1
    let (m, v): (f64, f64) = (0.1 * 0.5, 0.001 * 0.25);
    let lr_t = 0.001 * (1.0f64 - 0.999).sqrt() / (1.0 - 0.9);
    let hand = 1.0 - lr_t * m / (v.sqrt() + 1e-7);
    println!("theta after one step: {:.9}", mlp.weights[0][[0, 0]]);
    println!("hand computation:     {hand:.9}");
    println!("vhat = {}", state.vhat_weights[0][[0, 0]]);
}
