//! Shared helpers: central finite-difference gradient checking against the
//! recorded analytic gradients, in f64.

use irrm_core::rng::Rng;
use irrm_core::{Recording, Shape, Tensor};

/// Central finite differences of `f` w.r.t. input `which`, elementwise.
pub fn fd_gradient(
    f: &dyn Fn(&[Tensor<f64>]) -> Tensor<f64>,
    inputs: &[Tensor<f64>],
    which: usize,
    eps: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(inputs[which].numel());
    for i in 0..inputs[which].numel() {
        let eval = |delta: f64| -> f64 {
            let mut data = inputs[which].data().to_vec();
            data[i] += delta;
            let mut ins = inputs.to_vec();
            ins[which] = Tensor::from_vec(inputs[which].shape(), data).unwrap();
            f(&ins).item()
        };
        out.push((eval(eps) - eval(-eps)) / (2.0 * eps));
    }
    out
}

/// Max relative error between analytic and numeric gradients over every
/// element of every input.
pub fn max_grad_error(
    f: impl Fn(&[Tensor<f64>]) -> Tensor<f64>,
    inputs: &[Tensor<f64>],
    eps: f64,
) -> f64 {
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|t| t.clone().requires_grad(true))
        .collect();
    let rec = Recording::<f64>::start();
    let loss = f(&leaves);
    let grads = rec.backward(&loss).unwrap();

    let mut worst = 0.0f64;
    for (which, leaf) in leaves.iter().enumerate() {
        let analytic: Vec<f64> = match grads.get(leaf) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; leaf.numel()],
        };
        let numeric = fd_gradient(&f, &leaves, which, eps);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            let denom = a.abs().max(n.abs()).max(1e-6);
            worst = worst.max((a - n).abs() / denom);
        }
    }
    worst
}

pub fn assert_grads(
    name: &str,
    f: impl Fn(&[Tensor<f64>]) -> Tensor<f64>,
    inputs: &[Tensor<f64>],
    tol: f64,
) {
    let err = max_grad_error(f, inputs, 1e-4);
    assert!(err <= tol, "{name}: max relative gradient error {err:.3e}");
}

pub fn randn64(shape: Shape, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::seeded(seed);
    Tensor::randn64(shape, 1.0, &mut rng)
}

/// Random values kept away from zero, for kinked ops (abs, leaky_relu).
pub fn randn64_offset(shape: Shape, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::seeded(seed);
    let data = (0..shape.numel())
        .map(|_| {
            let v = rng.gauss();
            v + 0.5 * v.signum()
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}
