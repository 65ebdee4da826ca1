use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported phase-shifter resolution.
pub const MAX_BITS: u32 = 12;

/// Maps any finite angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// Distance between two angles measured around the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// The `2^r` phase values an `r`-bit shifter can realize.
///
/// `values[i] = -π + (i + 1)·2π/2^r`, so `π` is in the set and `-π` is not.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    bits: u32,
    values: Vec<f64>,
}

impl PhaseSet {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::invalid(format!(
                "phase resolution must be 1..={MAX_BITS} bits, got {bits}"
            )));
        }
        let levels = 1usize << bits;
        let step = 2.0 * PI / levels as f64;
        let values = (0..levels).map(|i| -PI + (i + 1) as f64 * step).collect();
        Ok(Self { bits, values })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> Result<f64> {
        self.values
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index,
                levels: self.levels(),
            })
    }

    /// Spacing between adjacent phases.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.levels() as f64
    }

    /// Index of the phase closest to `theta` on the circle; ties go to the
    /// smaller index.
    pub fn nearest(&self, theta: f64) -> Result<usize> {
        if !theta.is_finite() {
            return Err(Error::NonFinite(format!("phase {theta}")));
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &v) in self.values.iter().enumerate() {
            let d = circular_distance(theta, v);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }

    /// Quantizes a vector of continuous phases onto the lattice.
    pub fn quantize(&self, proto: &[f64]) -> Result<BeamVector> {
        let indices = proto
            .iter()
            .map(|&t| self.nearest(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(BeamVector { indices })
    }
}

/// Shorthand for [`PhaseSet::quantize`].
pub fn quantize_phases(proto: &[f64], phases: &PhaseSet) -> Result<BeamVector> {
    phases.quantize(proto)
}

/// An analog beam as one phase index per antenna.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeamVector {
    indices: Vec<usize>,
}

impl BeamVector {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn random<R: Rng + ?Sized>(antennas: usize, phases: &PhaseSet, rng: &mut R) -> Self {
        let levels = phases.levels();
        Self {
            indices: (0..antennas).map(|_| rng.random_range(0..levels)).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate(&self, phases: &PhaseSet) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= phases.levels()) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                levels: phases.levels(),
            }),
            None => Ok(()),
        }
    }

    /// Phase values in radians.
    pub fn phases(&self, phases: &PhaseSet) -> Result<Vec<f64>> {
        self.indices.iter().map(|&i| phases.value(i)).collect()
    }

    /// Constant-modulus complex weights `exp(jθ_m)/√M`.
    pub fn realize(&self, phases: &PhaseSet) -> Result<Vec<Complex64>> {
        let scale = 1.0 / (self.indices.len() as f64).sqrt();
        self.indices
            .iter()
            .map(|&i| Ok(Complex64::from_polar(scale, phases.value(i)?)))
            .collect()
    }

    /// Recovers the indices from a realized weight vector.
    pub fn from_realized(weights: &[Complex64], phases: &PhaseSet) -> Result<Self> {
        let args: Vec<f64> = weights.iter().map(|w| w.arg()).collect();
        phases.quantize(&args)
    }
}
