use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beams::{gain, BeamVector, PhaseSet};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};

/// Random lattice beams used to probe users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSet {
    beams: Vec<BeamVector>,
    bits: u32,
    seed: u64,
}

impl SensingSet {
    /// Draws `count` beams uniformly from the lattice.
    pub fn random(count: usize, antennas: usize, phases: &PhaseSet, seed: u64) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::invalid("sensing beams need at least one antenna"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beams = (0..count)
            .map(|_| BeamVector::random(antennas, phases, &mut rng))
            .collect();
        Self::from_beams(beams, phases, seed)
    }

    pub fn from_beams(beams: Vec<BeamVector>, phases: &PhaseSet, seed: u64) -> Result<Self> {
        if beams.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 sensing beams, got {}",
                beams.len()
            )));
        }
        let m = beams[0].len();
        for b in &beams {
            b.validate(phases)?;
            if b.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: b.len(),
                });
            }
        }
        Ok(Self {
            beams,
            bits: phases.bits(),
            seed,
        })
    }

    pub fn beams(&self) -> &[BeamVector] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.beams[0].len()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `P[s][k]`: gain of sensing beam `s` on user `k`.
pub fn build_sensing_matrix(sensing: &SensingSet, users: &ChannelSet) -> Result<Array2<f64>> {
    if users.is_empty() {
        return Err(Error::Empty("user set".into()));
    }
    if users.antennas() != sensing.antennas() {
        return Err(Error::DimensionMismatch {
            expected: sensing.antennas(),
            actual: users.antennas(),
        });
    }
    let phases = PhaseSet::new(sensing.bits)?;
    let weights = sensing
        .beams
        .iter()
        .map(|b| b.realize(&phases))
        .collect::<Result<Vec<_>>>()?;
    let mut p = Array2::zeros((sensing.len(), users.users()));
    for (s, w) in weights.iter().enumerate() {
        for (k, h) in users.channels().iter().enumerate() {
            p[[s, k]] = gain(w, h)?;
        }
    }
    Ok(p)
}

/// Mean-normalized pairwise differences of each column of `p`.
///
/// Row order is `(0,1), (0,2), …, (0,S−1), (1,2), …`. A column with zero
/// mean has no usable signal and is rejected with the user's index.
pub fn feature_vectors(p: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (s, k) = p.dim();
    if s < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 sensing rows, got {s}"
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(
            "sensing gains must be finite and nonnegative",
        ));
    }
    let mut u = Array2::zeros((s * (s - 1) / 2, k));
    for (user, (col, mut out)) in p.columns().into_iter().zip(u.columns_mut()).enumerate() {
        let mean = col.sum() / s as f64;
        if mean <= 0.0 {
            return Err(Error::ZeroEnergyUser(user));
        }
        let mut row = 0;
        for i in 0..s {
            for j in i + 1..s {
                out[row] = (col[i] - col[j]) / mean;
                row += 1;
            }
        }
    }
    Ok(u)
}
