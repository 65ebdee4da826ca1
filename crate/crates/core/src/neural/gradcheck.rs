use ndarray::{Array2, ArrayView2};

use super::mlp::{Activation, Layer, Mlp};
use crate::error::{Error, Result};

/// `act(z + d) − act(z)` evaluated without cancellation.
fn activation_delta(act: Activation, z: f64, d: f64) -> f64 {
    match act {
        Activation::Identity => d,
        Activation::Relu => match (z > 0.0, z + d > 0.0) {
            (true, true) => d,
            (false, false) => 0.0,
            (true, false) => -z,
            (false, true) => z + d,
        },
        // tanh a − tanh b = sinh(a − b) / (cosh a · cosh b)
        Activation::ScaledTanh(s) => s * d.sinh() / (z.cosh() * (z + d).cosh()),
    }
}

fn pre_activations(layer: &Layer, input: &[f64]) -> Vec<f64> {
    (0..layer.outputs())
        .map(|j| {
            let mut z = layer.bias[j];
            for (i, &a) in input.iter().enumerate() {
                z += a * layer.weights[[i, j]];
            }
            z
        })
        .collect()
}

fn activate(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Relu => z.max(0.0),
        Activation::Identity => z,
        Activation::ScaledTanh(s) => s * z.tanh(),
    }
}

/// Change of `Σ outputs` when pre-activation `unit` of layer `li` moves by `dz`.
fn output_change(net: &Mlp, pre: &[Vec<f64>], li: usize, unit: usize, dz: f64) -> f64 {
    let layers = net.layers();
    let mut dh = vec![0.0; layers[li].outputs()];
    dh[unit] = activation_delta(layers[li].activation, pre[li][unit], dz);
    let mut sparse = Some(unit);
    for (k, layer) in layers.iter().enumerate().skip(li + 1) {
        let mut dnext = vec![0.0; layer.outputs()];
        for (j, out) in dnext.iter_mut().enumerate() {
            let dzj = match sparse {
                Some(u) => dh[u] * layer.weights[[u, j]],
                None => dh
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| d * layer.weights[[i, j]])
                    .sum(),
            };
            *out = activation_delta(layer.activation, pre[k][j], dzj);
        }
        dh = dnext;
        sparse = None;
    }
    dh.iter().sum()
}

/// Compares backpropagated gradients of `Σ outputs` (summed over the batch)
/// against central differences with step `epsilon`.
///
/// Returns the largest `|g − ĝ| / max(|g|, |ĝ|, 1e-8)` over all parameters.
/// The difference quotient `(f(θ+ε) − f(θ−ε)) / 2ε` is computed by an
/// independent scalar evaluator that carries each perturbation through the
/// real nonlinearities as an exact difference from the unperturbed pass, so
/// no two nearly equal totals are ever subtracted.
pub fn gradient_check(net: &Mlp, input: ArrayView2<f64>, epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "epsilon must be in [1e-7, 1e-3], got {epsilon}"
        )));
    }
    let cache = net.forward_cached(input)?;
    let ones = Array2::ones(cache.output().raw_dim());
    let (grads, _) = net.backward(&cache, ones, true)?;
    let analytic = grads.expect("requested parameter gradients").flatten();

    let mut numeric = vec![0.0; analytic.len()];
    for row in input.rows() {
        let mut acts = vec![row.to_vec()];
        let mut pre = Vec::with_capacity(net.layers().len());
        for l in net.layers() {
            let z = pre_activations(l, acts.last().expect("nonempty"));
            acts.push(z.iter().map(|&v| activate(l.activation, v)).collect());
            pre.push(z);
        }
        let mut offset = 0;
        for (li, layer) in net.layers().iter().enumerate() {
            let (rows, cols) = layer.weights.dim();
            for idx in 0..rows * cols + cols {
                // A weight (i, j) feeds unit j scaled by a_i; a bias feeds it directly.
                let (j, scale) = if idx < rows * cols {
                    (idx % cols, acts[li][idx / cols])
                } else {
                    (idx - rows * cols, 1.0)
                };
                let up = output_change(net, &pre, li, j, epsilon * scale);
                let down = output_change(net, &pre, li, j, -epsilon * scale);
                numeric[offset + idx] += (up - down) / (2.0 * epsilon);
            }
            offset += rows * cols + cols;
        }
    }

    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

/// Smallest `|z|` over rectifier pre-activations for a batch.
///
/// Finite differences are only meaningful when this comfortably exceeds
/// the perturbation size.
pub fn relu_margin(net: &Mlp, input: ArrayView2<f64>) -> Result<f64> {
    let cache = net.forward_cached(input)?;
    Ok(net
        .layers()
        .iter()
        .zip(cache.pre_activations())
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, z)| z.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min))
}
