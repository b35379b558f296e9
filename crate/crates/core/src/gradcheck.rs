//! Finite-difference verification of the training-loss gradients, in f64.
//!
//! Central differences with a caller-chosen epsilon, swept over every
//! element of every parameter. Used by the test suite; kept in the library
//! so verification runs against the public API exactly as training does.

use crate::error::Result;
use crate::model::{IrrmModel, LatentPyramid};
use crate::tensor::{Recording, Tensor};
use crate::train::total_loss;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    /// Worst relative error across all parameter elements.
    pub worst_rel_error: f64,
    pub elements_checked: usize,
}

/// Compare analytic parameter gradients of the full objective against
/// central finite differences. The relative error denominator is
/// max(|analytic|, |numeric|, 1e-6).
pub fn check_loss_gradients(
    model: &IrrmModel<f64>,
    x: &Tensor<f64>,
    y_gt: &Tensor<f64>,
    z_sample: &LatentPyramid<f64>,
    lambdas: (f64, f64, f64),
    eps: f64,
) -> Result<GradCheckReport> {
    let rec = Recording::<f64>::start();
    let terms = total_loss(model, x, y_gt, z_sample, lambdas)?;
    let grads = rec.backward(&terms.total)?;

    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .into_iter()
        .map(|(name, p)| {
            let g = grads
                .get(p)
                .map(|g| g.data().to_vec())
                .unwrap_or_else(|| vec![0.0; p.numel()]);
            (name, g)
        })
        .collect();

    let eval = |m: &IrrmModel<f64>| -> Result<f64> {
        Ok(total_loss(m, x, y_gt, z_sample, lambdas)?.total.item())
    };

    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (name, analytic_g) in &analytic {
        let numel = analytic_g.len();
        for i in 0..numel {
            let perturbed = |delta: f64| -> Result<f64> {
                let mut m = model.clone();
                for (n, p) in m.params_mut() {
                    if &n == name {
                        let mut data = p.data().to_vec();
                        data[i] += delta;
                        *p = Tensor::from_vec(p.shape(), data)?.requires_grad(true);
                        break;
                    }
                }
                eval(&m)
            };
            let numeric = (perturbed(eps)? - perturbed(-eps)?) / (2.0 * eps);
            let a = analytic_g[i];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        worst_rel_error: worst,
        elements_checked: checked,
    })
}
