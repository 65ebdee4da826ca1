//! Small dense networks with hand-written backpropagation.
//!
//! Everything here works on row-major batches of `f64`. The actor and critic
//! constructors fix the architectures used by the beam agent, and the
//! binary checkpoint stores networks, optimizer moments and an optional RNG
//! state so a training run can resume bit-exactly.

mod gradcheck;
mod mlp;
mod optim;
mod train;

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{gradient_check, relu_margin};
pub use mlp::{Activation, ForwardCache, Grads, Layer, Mlp};
pub use optim::{soft_update, AdamConfig, AdamW, TargetPair};
pub use train::{actor_step, critic_step, critic_values};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const NET_MAGIC: &[u8; 4] = b"BFNN";
const NET_VERSION: u32 = 1;

/// Networks, their optimizers and an optional generator state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub networks: Vec<Mlp>,
    pub optimizers: Vec<AdamW>,
    pub rng: Option<ChaCha8Rng>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.write(&mut w);
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let c = Self::read(&mut r)?;
        r.finish()?;
        Ok(c)
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.bytes(NET_MAGIC);
        w.u32(NET_VERSION);
        w.usize(self.networks.len());
        for n in &self.networks {
            write_net(w, n);
        }
        w.usize(self.optimizers.len());
        for o in &self.optimizers {
            let c = o.config;
            for v in [c.learning_rate, c.weight_decay, c.beta1, c.beta2, c.epsilon] {
                w.f64(v);
            }
            w.u64(o.step);
            write_grads(w, &o.m);
            write_grads(w, &o.v);
        }
        match &self.rng {
            Some(rng) => {
                w.u8(1);
                w.rng(rng);
            }
            None => w.u8(0),
        }
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self> {
        r.magic(NET_MAGIC)?;
        let version = r.u32()?;
        if version != NET_VERSION {
            return Err(Error::Format(format!(
                "unsupported network checkpoint version {version}"
            )));
        }
        let n = r.usize()?;
        let networks = (0..n).map(|_| read_net(r)).collect::<Result<Vec<_>>>()?;
        let n = r.usize()?;
        let mut optimizers = Vec::with_capacity(n.min(16));
        for _ in 0..n {
            let config = AdamConfig {
                learning_rate: r.f64()?,
                weight_decay: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                epsilon: r.f64()?,
            };
            config
                .validate()
                .map_err(|e| Error::Format(e.to_string()))?;
            let step = r.u64()?;
            let m = read_grads(r)?;
            let v = read_grads(r)?;
            optimizers.push(AdamW { config, step, m, v });
        }
        let rng = match r.u8()? {
            0 => None,
            1 => Some(r.rng()?),
            t => return Err(Error::Format(format!("bad rng tag {t}"))),
        };
        Ok(Self {
            networks,
            optimizers,
            rng,
        })
    }
}

fn write_tensors(w: &mut Writer, layers: &[(&Array2<f64>, &Array1<f64>)]) {
    w.usize(layers.len());
    for (wt, b) in layers {
        w.usize(wt.nrows());
        w.usize(wt.ncols());
        for &v in wt.iter() {
            w.f64(v);
        }
        for &v in b.iter() {
            w.f64(v);
        }
    }
}

fn read_tensors(r: &mut Reader) -> Result<Vec<(Array2<f64>, Array1<f64>)>> {
    let n = r.usize()?;
    let mut out = Vec::with_capacity(n.min(16));
    for _ in 0..n {
        let rows = r.usize()?;
        let cols = r.usize()?;
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_add(cols))
            .filter(|&c| c <= r.remaining() / 8)
            .ok_or_else(|| Error::Format(format!("layer {rows}x{cols} exceeds remaining data")))?;
        let mut vals = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = Array1::from(vals.split_off(rows * cols));
        let weights = Array2::from_shape_vec((rows, cols), vals).expect("sized above");
        out.push((weights, bias));
    }
    Ok(out)
}

fn write_net(w: &mut Writer, net: &Mlp) {
    let tensors: Vec<_> = net.layers.iter().map(|l| (&l.weights, &l.bias)).collect();
    write_tensors(w, &tensors);
    for l in &net.layers {
        let (code, scale) = l.activation.code();
        w.u8(code);
        w.f64(scale);
    }
}

fn read_net(r: &mut Reader) -> Result<Mlp> {
    let tensors = read_tensors(r)?;
    let mut layers = Vec::with_capacity(tensors.len());
    for (weights, bias) in tensors {
        let activation = Activation::from_code(r.u8()?, r.f64()?)?;
        layers.push(Layer {
            weights,
            bias,
            activation,
        });
    }
    Mlp::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
}

fn write_grads(w: &mut Writer, g: &Grads) {
    let tensors: Vec<_> = g.layers.iter().map(|(a, b)| (a, b)).collect();
    write_tensors(w, &tensors);
}

fn read_grads(r: &mut Reader) -> Result<Grads> {
    Ok(Grads {
        layers: read_tensors(r)?,
    })
}
