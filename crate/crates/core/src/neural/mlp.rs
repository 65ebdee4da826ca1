use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

/// Largest value strictly below `π`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Identity,
    /// `scale · tanh(z)`, clamped to the open interval `(-scale, scale)`.
    ScaledTanh(f64),
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Identity => {}
            Activation::ScaledTanh(s) => {
                let cap = s.next_down();
                z.mapv_inplace(|v| (s * v.tanh()).clamp(-cap, cap))
            }
        }
    }

    /// Multiplies `grad` in place by the derivative at pre-activation `z`.
    fn backprop(self, z: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(z, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Identity => {}
            Activation::ScaledTanh(s) => grad.zip_mut_with(z, |g, &z| {
                let t = z.tanh();
                *g *= s * (1.0 - t * t)
            }),
        }
    }

    pub(crate) fn code(self) -> (u8, f64) {
        match self {
            Activation::Relu => (0, 0.0),
            Activation::Identity => (1, 0.0),
            Activation::ScaledTanh(s) => (2, s),
        }
    }

    pub(crate) fn from_code(code: u8, scale: f64) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Identity),
            2 if scale.is_finite() && scale > 0.0 => Ok(Activation::ScaledTanh(scale)),
            _ => Err(Error::Format(format!("unknown activation code {code}"))),
        }
    }
}

/// Fully connected layer computing `act(x·W + b)` on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs × outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Per-layer gradients, or any other tensor set shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weights.raw_dim()),
                        Array1::zeros(l.bias.raw_dim()),
                    )
                })
                .collect(),
        }
    }

    /// Flattened view in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// Activations saved by [`Mlp::forward_cached`] for backpropagation.
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-activations of every layer, in order.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Multilayer perceptron operating on batches laid out one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) layers: Vec<Layer>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.inputs() != l.outputs() {
                    return Err(Error::DimensionMismatch {
                        expected: l.outputs(),
                        actual: next.inputs(),
                    });
                }
            }
        }
        Ok(Self { layers })
    }

    /// Randomly initialized network. Rectifier layers use He-uniform bounds
    /// `±√(6/fan_in)`, other layers `±1/√fan_in`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::invalid(
                "need one activation per layer and at least two sizes",
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(io, &activation)| {
                let fan_in = io[0] as f64;
                let bound = match activation {
                    Activation::Relu => (6.0 / fan_in).sqrt(),
                    _ => 1.0 / fan_in.sqrt(),
                };
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weights: Array2::from_shape_simple_fn((io[0], io[1]), || dist.sample(rng)),
                    bias: Array1::zeros(io[1]),
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for l in &mut z.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
        z
    }

    /// Policy network: `M → 16M → 16M → M`, output `π·tanh`.
    pub fn actor<R: Rng + ?Sized>(antennas: usize, rng: &mut R) -> Result<Self> {
        let h = 16 * antennas;
        Self::new(
            &[antennas, h, h, antennas],
            &[
                Activation::Relu,
                Activation::Relu,
                Activation::ScaledTanh(PI),
            ],
            rng,
        )
    }

    /// Value network over `state ⧺ action`: `2M → 32M → 32M → 1`.
    pub fn critic<R: Rng + ?Sized>(antennas: usize, rng: &mut R) -> Result<Self> {
        let h = 32 * antennas;
        Self::new(
            &[2 * antennas, h, h, 1],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            rng,
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters flattened layer by layer, weights row-major then bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weights.len();
            if index < nw {
                let cols = l.weights.ncols();
                return &mut l.weights[[index / cols, index % cols]];
            }
            index -= nw;
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.activation == b.activation)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("batch".into()));
        }
        Ok(())
    }

    /// Batch forward pass.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            l.activation.apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    /// Forward pass for a single sample.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            let mut out = z.clone();
            l.activation.apply(&mut out);
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: a,
        })
    }

    /// Backpropagates `grad_out = ∂L/∂output` through a cached pass.
    ///
    /// Returns parameter gradients (when `param_grads` is set) and `∂L/∂input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: Array2<f64>,
        param_grads: bool,
    ) -> Result<(Option<Grads>, Array2<f64>)> {
        if grad_out.dim() != cache.output.dim() {
            return Err(Error::DimensionMismatch {
                expected: cache.output.len(),
                actual: grad_out.len(),
            });
        }
        let mut grads = param_grads.then(|| Vec::with_capacity(self.layers.len()));
        let mut delta = grad_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            l.activation.backprop(&cache.pre[i], &mut delta);
            if let Some(g) = grads.as_mut() {
                g.push((cache.inputs[i].t().dot(&delta), delta.sum_axis(Axis(0))));
            }
            delta = delta.dot(&l.weights.t());
        }
        let grads = grads.map(|mut g| {
            g.reverse();
            Grads { layers: g }
        });
        Ok((grads, delta))
    }
}
