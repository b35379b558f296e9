//! Finite-difference verification of every differentiable primitive, plus
//! the basic backward identities.

mod common;

use common::{assert_grads, randn64, randn64_offset};
use irrm_core::rng::Rng;
use irrm_core::wavelet;
use irrm_core::{Recording, Shape, Tensor};

const TOL: f64 = 1e-5;

#[test]
fn grad_of_sum_is_ones() {
    let x = randn64(Shape::new(2, 3, 4, 4), 1).requires_grad(true);
    let rec = Recording::<f64>::start();
    let loss = x.sum();
    let grads = rec.backward(&loss).unwrap();
    let g = grads.get(&x).unwrap();
    assert!(g.data().iter().all(|&v| v == 1.0));
}

#[test]
fn grad_of_sum_of_squares_is_two_x() {
    let x = randn64(Shape::new(1, 2, 3, 3), 2).requires_grad(true);
    let rec = Recording::<f64>::start();
    let loss = x.mul(&x).unwrap().sum();
    let grads = rec.backward(&loss).unwrap();
    let g = grads.get(&x).unwrap();
    let expected = x.mul_scalar(2.0);
    assert!(g.max_abs_diff(&expected) < 1e-12);
}

#[test]
fn reused_leaf_accumulates_both_paths() {
    let w = randn64(Shape::new(1, 1, 2, 2), 3).requires_grad(true);
    let a = randn64(Shape::new(1, 1, 2, 2), 4);
    let b = randn64(Shape::new(1, 1, 2, 2), 5);
    let rec = Recording::<f64>::start();
    let loss = w
        .mul(&a)
        .unwrap()
        .sum()
        .add(&w.mul(&b).unwrap().sum())
        .unwrap();
    let grads = rec.backward(&loss).unwrap();
    let g = grads.get(&w).unwrap();
    let expected = a.add(&b).unwrap();
    assert!(g.max_abs_diff(&expected) < 1e-12);
}

#[test]
fn repeated_backward_accumulates_in_store() {
    let x = randn64(Shape::new(1, 1, 2, 2), 6).requires_grad(true);
    let run = || {
        let rec = Recording::<f64>::start();
        let loss = x.sum();
        rec.backward(&loss).unwrap()
    };
    let mut grads = run();
    grads.accumulate(run());
    let g = grads.get(&x).unwrap();
    assert!(g.data().iter().all(|&v| v == 2.0));
}

#[test]
fn non_scalar_loss_is_rejected() {
    let x = randn64(Shape::new(1, 1, 2, 2), 7).requires_grad(true);
    let rec = Recording::<f64>::start();
    let y = x.mul_scalar(2.0);
    let err = rec.backward(&y).unwrap_err();
    assert!(err.to_string().contains("scalar"), "{err}");
}

#[test]
fn quantize_is_not_differentiable() {
    let x = randn64(Shape::new(1, 1, 2, 2), 8).requires_grad(true);
    let rec = Recording::<f64>::start();
    let loss = x.quantize8().sum();
    let err = rec.backward(&loss).unwrap_err();
    assert!(err.to_string().contains("quantize8"), "{err}");
}

#[test]
fn untracked_loss_is_rejected() {
    let x = randn64(Shape::new(1, 1, 2, 2), 9);
    let rec = Recording::<f64>::start();
    let loss = x.sum(); // nothing requires_grad, so nothing was recorded
    let err = rec.backward(&loss).unwrap_err();
    assert!(err.to_string().contains("recording"), "{err}");
}

#[test]
fn elementwise_binary_ops() {
    let s = Shape::new(1, 2, 3, 4);
    let a = randn64(s, 10);
    let b = randn64(s, 11);
    assert_grads(
        "add",
        |t| t[0].add(&t[1]).unwrap().sum(),
        &[a.clone(), b.clone()],
        TOL,
    );
    assert_grads(
        "sub",
        |t| t[0].sub(&t[1]).unwrap().sum(),
        &[a.clone(), b.clone()],
        TOL,
    );
    assert_grads(
        "mul",
        |t| t[0].mul(&t[1]).unwrap().sum(),
        &[a.clone(), b.clone()],
        TOL,
    );
    let divisor = b.abs().add_scalar(0.5);
    assert_grads(
        "div",
        |t| t[0].div(&t[1]).unwrap().sum(),
        &[a, divisor],
        TOL,
    );
}

#[test]
fn elementwise_unary_ops() {
    let s = Shape::new(1, 2, 4, 4);
    let x = randn64(s, 12);
    assert_grads("neg", |t| t[0].neg().sum(), std::slice::from_ref(&x), TOL);
    assert_grads("exp", |t| t[0].exp().sum(), std::slice::from_ref(&x), TOL);
    assert_grads("tanh", |t| t[0].tanh().sum(), std::slice::from_ref(&x), TOL);
    assert_grads(
        "sigmoid",
        |t| t[0].sigmoid().sum(),
        std::slice::from_ref(&x),
        TOL,
    );
    assert_grads(
        "add_scalar",
        |t| t[0].add_scalar(0.7).sum(),
        std::slice::from_ref(&x),
        TOL,
    );
    assert_grads(
        "mul_scalar",
        |t| t[0].mul_scalar(-1.3).sum(),
        std::slice::from_ref(&x),
        TOL,
    );
    assert_grads("mean", |t| t[0].mean(), &[x], TOL);

    let off = randn64_offset(s, 13);
    assert_grads("abs", |t| t[0].abs().sum(), std::slice::from_ref(&off), TOL);
    assert_grads("leaky_relu", |t| t[0].leaky_relu(0.2).sum(), &[off], TOL);
}

#[test]
fn structural_ops() {
    let s = Shape::new(2, 2, 4, 4);
    let a = randn64(s, 14);
    let b = randn64(Shape::new(2, 3, 4, 4), 15);
    assert_grads(
        "concat+slice",
        |t| {
            let cat = Tensor::concat_channels(&[&t[0], &t[1]]).unwrap();
            cat.slice_channels(1, 4)
                .unwrap()
                .mul(&cat.slice_channels(1, 4).unwrap())
                .unwrap()
                .sum()
        },
        &[a.clone(), b],
        TOL,
    );
    assert_grads(
        "subgrid2",
        |t| t[0].subgrid2(1, 0).unwrap().exp().sum(),
        std::slice::from_ref(&a),
        TOL,
    );
    assert_grads(
        "scatter2",
        |t| t[0].scatter2(0, 1).tanh().sum(),
        std::slice::from_ref(&a),
        TOL,
    );
    assert_grads(
        "avg_pool2",
        |t| {
            t[0].avg_pool2()
                .unwrap()
                .mul(&t[0].avg_pool2().unwrap())
                .unwrap()
                .sum()
        },
        std::slice::from_ref(&a),
        TOL,
    );
    assert_grads(
        "nearest_up2",
        |t| t[0].nearest_up2().sigmoid().sum(),
        &[a],
        TOL,
    );
}

#[test]
fn conv2d_gradients() {
    // (stride, padding, kernel, in_c, out_c)
    let cases = [
        (1usize, 1usize, 3usize, 2usize, 3usize),
        (1, 0, 3, 1, 2),
        (1, 2, 5, 2, 2),
        (2, 1, 3, 3, 2),
        (1, 0, 1, 2, 4),
    ];
    for (i, (stride, pad, k, in_c, out_c)) in cases.into_iter().enumerate() {
        let x = randn64(Shape::new(2, in_c, 6, 6), 20 + i as u64);
        let w = randn64(Shape::new(out_c, in_c, k, k), 30 + i as u64);
        let b = randn64(Shape::new(1, out_c, 1, 1), 40 + i as u64);
        assert_grads(
            "conv2d",
            move |t| t[0].conv2d(&t[1], &t[2], stride, pad).unwrap().tanh().sum(),
            &[x, w, b],
            TOL,
        );
    }
}

#[test]
fn wavelet_ops_are_differentiable() {
    let x = randn64(Shape::new(1, 2, 8, 8), 50);
    assert_grads(
        "haar_forward",
        |t| {
            let bands = wavelet::haar_forward(&t[0]).unwrap();
            bands
                .low
                .mul(&bands.low)
                .unwrap()
                .sum()
                .add(&bands.high.abs().sum())
                .unwrap()
        },
        std::slice::from_ref(&x),
        TOL,
    );
    assert_grads(
        "residual_pair",
        |t| {
            let (base, high) = wavelet::residual_decompose(&t[0]).unwrap();
            let back = wavelet::residual_recompose(&base, &high).unwrap();
            back.mul(&back).unwrap().sum()
        },
        &[x],
        TOL,
    );
}

#[test]
fn coupling_style_expression() {
    // exp(alpha * tanh(w)) as divisor, the exact pattern of the inverse pass
    let s = Shape::new(1, 1, 4, 4);
    let x = randn64(s, 60);
    let w = randn64(s, 61);
    assert_grads(
        "clamped_inverse",
        |t| {
            let scale = t[1].tanh().mul_scalar(1.0).exp();
            t[0].sub(&scale).unwrap().div(&scale).unwrap().sum()
        },
        &[x, w],
        TOL,
    );
}

#[test]
fn determinism_bit_identical_across_runs() {
    let run = || {
        let mut rng = Rng::seeded(99);
        let x = Tensor::randn(Shape::new(1, 3, 8, 8), 1.0, &mut rng);
        let w = Tensor::randn(Shape::new(4, 3, 3, 3), 0.5, &mut rng);
        let b = Tensor::randn(Shape::new(1, 4, 1, 1), 0.1, &mut rng);
        x.conv2d(&w, &b, 1, 1).unwrap().tanh().sum().item()
    };
    assert_eq!(run().to_bits(), run().to_bits());
}

#[test]
fn ops_do_not_mutate_inputs() {
    let a = randn64(Shape::new(1, 2, 4, 4), 70);
    let b = randn64(Shape::new(1, 2, 4, 4), 71);
    let a_bits: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
    let b_bits: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
    let _ = a.add(&b).unwrap();
    let _ = a.mul(&b).unwrap();
    let _ = a.tanh();
    let _ = a.avg_pool2().unwrap();
    let _ = wavelet::haar_forward(&a).unwrap();
    assert!(a.data().iter().map(|v| v.to_bits()).eq(a_bits));
    assert!(b.data().iter().map(|v| v.to_bits()).eq(b_bits));
}
