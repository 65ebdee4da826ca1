//! Linear antenna array geometry, ideal and impaired.
//!
//! Positions are in carrier wavelengths, so the wave number is `2π`. An
//! impaired array carries non-uniform element positions and a fixed
//! per-element phase offset, both drawn once from a seed and frozen.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resampling rounds allowed before giving up on a monotone position draw.
pub const MAX_RESAMPLE_ROUNDS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    phase_mismatch: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    positions: Vec<f64>,
    phase_mismatch: Vec<f64>,
}

impl TryFrom<GeometryRepr> for ArrayGeometry {
    type Error = Error;

    fn try_from(r: GeometryRepr) -> Result<Self> {
        ArrayGeometry::new(r.positions, r.phase_mismatch)
    }
}

impl From<ArrayGeometry> for GeometryRepr {
    fn from(g: ArrayGeometry) -> Self {
        GeometryRepr {
            positions: g.positions,
            phase_mismatch: g.phase_mismatch,
        }
    }
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>, phase_mismatch: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("array has no antennas".into()));
        }
        if positions.len() != phase_mismatch.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                actual: phase_mismatch.len(),
            });
        }
        if positions
            .iter()
            .chain(&phase_mismatch)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("array geometry".into()));
        }
        if !is_strictly_increasing(&positions) {
            return Err(Error::invalid(
                "antenna positions must be strictly increasing",
            ));
        }
        Ok(Self {
            positions,
            phase_mismatch,
        })
    }

    /// Half-wavelength uniform linear array without impairments.
    pub fn ideal(antennas: usize) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::invalid("antenna count must be at least 1"));
        }
        Ok(Self {
            positions: (0..antennas).map(|m| m as f64 * 0.5).collect(),
            phase_mismatch: vec![0.0; antennas],
        })
    }

    pub fn antennas(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn phase_mismatch(&self) -> &[f64] {
        &self.phase_mismatch
    }

    pub fn is_ideal(&self) -> bool {
        self.phase_mismatch.iter().all(|&p| p == 0.0)
            && self
                .positions
                .iter()
                .enumerate()
                .all(|(m, &p)| p == m as f64 * 0.5)
    }

    /// Response of the array to a plane wave arriving from azimuth `phi`.
    ///
    /// Element `m` is `exp(j(2π·d_m·cos φ + Δθ_m))`. Angles outside `[0, π]`
    /// are accepted and behave as `cos` dictates, so `φ` and `-φ` give the
    /// same response.
    pub fn array_response(&self, phi: f64) -> Vec<Complex64> {
        let c = phi.cos();
        self.positions
            .iter()
            .zip(&self.phase_mismatch)
            .map(|(&d, &dp)| Complex64::from_polar(1.0, 2.0 * PI * d * c + dp))
            .collect()
    }

    /// Stable short identifier derived from the exact parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.positions.iter().chain(&self.phase_mismatch) {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("M{}-{:016x}", self.antennas(), h)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

// Always consumes one draw; a zero deviation yields +0.0 rather than -0.0.
fn scaled_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    if sigma == 0.0 {
        0.0
    } else {
        sigma * z
    }
}

fn is_strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Parameters of the random impairment model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    pub antennas: usize,
    /// Nominal element spacing in wavelengths.
    pub spacing: f64,
    /// Standard deviation of element positions, wavelengths.
    pub sigma_d: f64,
    /// Standard deviation of per-element phase mismatch, radians.
    pub sigma_p: f64,
    pub seed: u64,
}

impl ImpairmentSpec {
    pub fn ideal(antennas: usize) -> Self {
        Self {
            antennas,
            spacing: 0.5,
            sigma_d: 0.0,
            sigma_p: 0.0,
            seed: 0,
        }
    }

    /// Draws the frozen geometry for this spec.
    ///
    /// The phase mismatch is drawn first, then whole position vectors are
    /// drawn until one is strictly increasing. With a fixed seed and
    /// `sigma_d`, changing `sigma_p` only rescales the same mismatch draw.
    pub fn sample(&self) -> Result<ArrayGeometry> {
        if self.antennas == 0 {
            return Err(Error::invalid("antenna count must be at least 1"));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::invalid("nominal spacing must be positive"));
        }
        if !(self.sigma_d >= 0.0 && self.sigma_d.is_finite())
            || !(self.sigma_p >= 0.0 && self.sigma_p.is_finite())
        {
            return Err(Error::invalid(
                "impairment deviations must be finite and nonnegative",
            ));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.antennas;
        let phase_mismatch: Vec<f64> = (0..m)
            .map(|_| scaled_normal(&mut rng, self.sigma_p))
            .collect();

        for _ in 0..MAX_RESAMPLE_ROUNDS {
            let positions: Vec<f64> = (0..m)
                .map(|i| i as f64 * self.spacing + scaled_normal(&mut rng, self.sigma_d))
                .collect();
            if is_strictly_increasing(&positions) {
                return ArrayGeometry::new(positions, phase_mismatch);
            }
        }
        Err(Error::NonMonotoneGeometry(MAX_RESAMPLE_ROUNDS))
    }
}
