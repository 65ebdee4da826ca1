use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::mlp::{Grads, Mlp};
use crate::error::{Error, Result};

/// Hyperparameters for [`AdamW`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad optimizer settings {self:?}")))
        }
    }
}

/// Adam with decoupled weight decay.
///
/// Each step first shrinks parameters by `1 − lr·λ`, then applies the
/// bias-corrected Adam update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamConfig,
    pub(crate) step: u64,
    pub(crate) m: Grads,
    pub(crate) v: Grads,
}

impl AdamW {
    pub fn new(net: &Mlp, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&Grads, &Grads) {
        (&self.m, &self.v)
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Grads) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.m.layers.len() != net.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: net.layers.len(),
                actual: grads.layers.len(),
            });
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        let shrink = 1.0 - c.learning_rate * c.weight_decay;
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p = *p * shrink - c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            if gw.dim() != layer.weights.dim() || gb.dim() != layer.bias.dim() {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.len(),
                    actual: gw.len(),
                });
            }
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            Zip::from(&mut layer.weights)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(update);
        }
        Ok(())
    }
}

/// Online network paired with a slowly tracking target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPair {
    pub online: Mlp,
    pub target: Mlp,
}

impl TargetPair {
    pub fn new(online: Mlp) -> Self {
        Self {
            target: online.clone(),
            online,
        }
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.target, &self.online, tau)
    }
}

/// `θ′ ← τ·θ + (1−τ)·θ′` elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!(
            "soft-update rate must be in (0, 1], got {tau}"
        )));
    }
    if !target.same_shape(source) {
        return Err(Error::invalid("target and source networks differ in shape"));
    }
    if tau == 1.0 {
        target.clone_from(source);
        return Ok(());
    }
    // Written as t + τ(s − t) so that t = s is a fixed point in floating point.
    let blend = |t: &mut f64, &s: &f64| *t += tau * (s - *t);
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        t.weights.zip_mut_with(&s.weights, blend);
        t.bias.zip_mut_with(&s.bias, blend);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{Activation, Layer};
    use ndarray::{arr1, arr2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Mlp {
        Mlp::from_layers(vec![Layer {
            weights: arr2(&[[v]]),
            bias: arr1(&[0.0]),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn soft_update_arithmetic() {
        let mut t = scalar(0.0);
        soft_update(&mut t, &scalar(1.0), 0.1).unwrap();
        assert!((t.layers[0].weights[[0, 0]] - 0.1).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Mlp::actor(3, &mut rng).unwrap();
        let mut b = Mlp::actor(3, &mut rng).unwrap();
        soft_update(&mut b, &a, 1.0).unwrap();
        assert_eq!(a, b);
        soft_update(&mut b, &a, 0.3).unwrap();
        assert_eq!(a, b);
        assert!(soft_update(&mut b, &a, 0.0).is_err());
        assert!(soft_update(&mut b, &a, 1.5).is_err());
    }

    #[test]
    fn soft_update_contracts_by_one_minus_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = Mlp::critic(2, &mut rng).unwrap();
        let mut tgt = Mlp::critic(2, &mut rng).unwrap();
        let tau = 0.05;
        let before: Vec<f64> = tgt
            .parameters()
            .iter()
            .zip(src.parameters())
            .map(|(t, s)| t - s)
            .collect();
        soft_update(&mut tgt, &src, tau).unwrap();
        let after: Vec<f64> = tgt
            .parameters()
            .iter()
            .zip(src.parameters())
            .map(|(t, s)| t - s)
            .collect();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - (1.0 - tau) * b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut net = scalar(2.0);
        let mut opt = AdamW::new(&net, AdamConfig::new(1e-3, 1e-2)).unwrap();
        let g = Grads::zeros_like(&net);
        opt.apply(&mut net, &g).unwrap();
        assert_eq!(net.layers[0].weights[[0, 0]], 2.0 * (1.0 - 1e-5));
        assert_eq!(net.layers[0].bias[0], 0.0);
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut net = scalar(1.0);
        let mut opt = AdamW::new(&net, AdamConfig::new(1e-3, 0.0)).unwrap();
        let mut g = Grads::zeros_like(&net);
        g.layers[0].0[[0, 0]] = 0.37;
        opt.apply(&mut net, &g).unwrap();
        assert!((net.layers[0].weights[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-10);
        assert_eq!(opt.steps_taken(), 1);
    }
}
