use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::phase::{BeamVector, PhaseSet};
use crate::error::{Error, Result};

/// A codebook entry: a lattice beam, or an unquantized unit vector used by
/// analytic baselines.
#[derive(Debug, Clone, PartialEq)]
pub enum CodebookBeam {
    Quantized(BeamVector),
    Unquantized(Vec<Complex64>),
}

/// A finite set of beams sharing one antenna count.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    antennas: usize,
    phases: Option<PhaseSet>,
    beams: Vec<CodebookBeam>,
    weights: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn quantized(phases: &PhaseSet, beams: Vec<BeamVector>) -> Result<Self> {
        let antennas = first_len(beams.iter().map(BeamVector::len))?;
        let weights = beams
            .iter()
            .map(|b| b.realize(phases))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            antennas,
            phases: Some(phases.clone()),
            beams: beams.into_iter().map(CodebookBeam::Quantized).collect(),
            weights,
        })
    }

    /// Wraps unit-norm complex combiners.
    pub fn unquantized(weights: Vec<Vec<Complex64>>) -> Result<Self> {
        let antennas = first_len(weights.iter().map(Vec::len))?;
        for (n, w) in weights.iter().enumerate() {
            let norm2: f64 = w.iter().map(|v| v.norm_sqr()).sum();
            if (norm2 - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "beam {n} has squared norm {norm2}, expected 1"
                )));
            }
        }
        Ok(Self {
            antennas,
            phases: None,
            beams: weights
                .iter()
                .cloned()
                .map(CodebookBeam::Unquantized)
                .collect(),
            weights,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beams(&self) -> &[CodebookBeam] {
        &self.beams
    }

    /// Phase set for quantized codebooks.
    pub fn phases(&self) -> Option<&PhaseSet> {
        self.phases.as_ref()
    }

    /// Realized complex weights, one vector per beam.
    pub fn weights(&self) -> &[Vec<Complex64>] {
        &self.weights
    }

    /// Lattice beams, if every entry is quantized.
    pub fn lattice_beams(&self) -> Option<Vec<BeamVector>> {
        self.beams
            .iter()
            .map(|b| match b {
                CodebookBeam::Quantized(v) => Some(v.clone()),
                CodebookBeam::Unquantized(_) => None,
            })
            .collect()
    }

    /// `{"M": .., "r": .., "beams": [[indices], ..]}`
    pub fn to_json(&self) -> Result<String> {
        let (Some(phases), Some(beams)) = (&self.phases, self.lattice_beams()) else {
            return Err(Error::invalid("only quantized codebooks have a JSON form"));
        };
        let j = CodebookJson {
            m: self.antennas,
            r: phases.bits(),
            beams: beams.into_iter().map(|b| b.indices().to_vec()).collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: CodebookJson = serde_json::from_str(s)?;
        let phases = PhaseSet::new(j.r)?;
        if let Some((n, b)) = j.beams.iter().enumerate().find(|(_, b)| b.len() != j.m) {
            return Err(Error::Format(format!(
                "beam {n} has {} entries, M = {}",
                b.len(),
                j.m
            )));
        }
        Codebook::quantized(&phases, j.beams.into_iter().map(BeamVector::new).collect())
    }
}

fn first_len(mut lens: impl Iterator<Item = usize>) -> Result<usize> {
    let m = lens.next().ok_or_else(|| Error::Empty("codebook".into()))?;
    if m == 0 {
        return Err(Error::invalid("beams must have at least one antenna"));
    }
    if let Some(other) = lens.find(|&l| l != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: other,
        });
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct CodebookJson {
    #[serde(rename = "M")]
    m: usize,
    r: u32,
    beams: Vec<Vec<usize>>,
}

/// Steering angles `n·π/(N−1)`; a single beam points at `0`.
pub fn steering_angles(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Classical beamsteering codebook for a half-wavelength ULA.
///
/// Beam `n` is `a(φ_n)/√M`, the spatial matched filter for a single path at
/// `φ_n`, so `|wᴴa(φ_n)|² = M`. With `phases` given, each beam's phases are
/// snapped onto the lattice.
pub fn beamsteering_codebook(
    antennas: usize,
    beams: usize,
    phases: Option<&PhaseSet>,
) -> Result<Codebook> {
    if antennas == 0 || beams == 0 {
        return Err(Error::invalid(
            "beamsteering codebook needs M ≥ 1 and N ≥ 1",
        ));
    }
    let scale = 1.0 / (antennas as f64).sqrt();
    let steer = |phi: f64| -> Vec<f64> {
        (0..antennas)
            .map(|m| super::wrap_phase(PI * m as f64 * phi.cos()))
            .collect()
    };
    let angles = steering_angles(beams);
    match phases {
        Some(p) => {
            let lattice = angles
                .iter()
                .map(|&phi| p.quantize(&steer(phi)))
                .collect::<Result<Vec<_>>>()?;
            Codebook::quantized(p, lattice)
        }
        None => Codebook::unquantized(
            angles
                .iter()
                .map(|&phi| {
                    steer(phi)
                        .into_iter()
                        .map(|t| Complex64::from_polar(scale, t))
                        .collect()
                })
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayGeometry;
    use crate::beams::gain;

    #[test]
    fn single_beam_points_at_zero() {
        assert_eq!(steering_angles(1), vec![0.0]);
        let cb = beamsteering_codebook(4, 1, None).unwrap();
        let g = ArrayGeometry::ideal(4).unwrap();
        assert!((gain(&cb.weights()[0], &g.array_response(0.0)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unquantized_steering_reaches_m_on_its_angle() {
        let m = 8;
        let g = ArrayGeometry::ideal(m).unwrap();
        let cb = beamsteering_codebook(m, 32, None).unwrap();
        assert_eq!(cb.len(), 32);
        for (w, phi) in cb.weights().iter().zip(steering_angles(32)) {
            assert!((gain(w, &g.array_response(phi)).unwrap() - m as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn quantized_steering_is_on_lattice_and_json_round_trips() {
        let p = PhaseSet::new(3).unwrap();
        let cb = beamsteering_codebook(8, 16, Some(&p)).unwrap();
        let beams = cb.lattice_beams().unwrap();
        assert!(beams.iter().all(|b| b.validate(&p).is_ok()));
        let back = Codebook::from_json(&cb.to_json().unwrap()).unwrap();
        assert_eq!(back, cb);
        assert!(beamsteering_codebook(8, 4, None)
            .unwrap()
            .to_json()
            .is_err());
    }

    #[test]
    fn mixed_lengths_rejected() {
        let p = PhaseSet::new(2).unwrap();
        assert!(Codebook::quantized(
            &p,
            vec![BeamVector::new(vec![0, 1]), BeamVector::new(vec![0])]
        )
        .is_err());
        assert!(Codebook::quantized(&p, vec![]).is_err());
        assert!(Codebook::unquantized(vec![vec![Complex64::new(2.0, 0.0)]]).is_err());
    }
}
