//! Deterministic beam math: gains, objectives, analytic baselines, the
//! exhaustive oracle and angular beam patterns.

mod codebook;
mod phase;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array::ArrayGeometry;
use crate::channel::ChannelSet;
use crate::error::{Error, Result};

pub use codebook::{beamsteering_codebook, steering_angles, Codebook, CodebookBeam};
pub use phase::{circular_distance, quantize_phases, wrap_phase, BeamVector, PhaseSet, MAX_BITS};

/// Default enumeration budget for [`exhaustive_oracle`].
pub const DEFAULT_ORACLE_BUDGET: u64 = 1 << 20;

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `wᴴh`
pub fn inner(w: &[Complex64], h: &[Complex64]) -> Complex64 {
    w.iter().zip(h).map(|(w, h)| w.conj() * h).sum()
}

/// Beamforming gain `|wᴴh|²`.
pub fn gain(w: &[Complex64], h: &[Complex64]) -> Result<f64> {
    check_len(w.len(), h.len())?;
    Ok(inner(w, h).norm_sqr())
}

/// Post-combining SNR for a unit-norm combiner: `gain · ρ`.
pub fn snr(w: &[Complex64], h: &[Complex64], rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!(
            "SNR scale must be positive, got {rho}"
        )));
    }
    Ok(gain(w, h)? * rho)
}

/// Mean gain of one beam over a user set.
pub fn average_gain(w: &[Complex64], set: &ChannelSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("channel set".into()));
    }
    check_len(set.antennas(), w.len())?;
    let total: f64 = set.channels().iter().map(|h| inner(w, h).norm_sqr()).sum();
    Ok(total / set.users() as f64)
}

/// Codebook objective together with the beam each user selects.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookScore {
    pub objective: f64,
    /// Index of the best beam per user; ties go to the lower index.
    pub selection: Vec<usize>,
    pub per_user: Vec<f64>,
}

/// Mean over users of the best gain any codebook beam achieves.
pub fn codebook_objective(cb: &Codebook, set: &ChannelSet) -> Result<CodebookScore> {
    if set.is_empty() {
        return Err(Error::Empty("channel set".into()));
    }
    check_len(cb.antennas(), set.antennas())?;
    let mut selection = Vec::with_capacity(set.users());
    let mut per_user = Vec::with_capacity(set.users());
    for h in set.channels() {
        let (best, g) = cb
            .weights()
            .iter()
            .enumerate()
            .map(|(n, w)| (n, inner(w, h).norm_sqr()))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        selection.push(best);
        per_user.push(g);
    }
    let objective = per_user.iter().sum::<f64>() / set.users() as f64;
    Ok(CodebookScore {
        objective,
        selection,
        per_user,
    })
}

/// Best gain any constant-modulus, unquantized combiner can reach:
/// `(Σ|h_m|)² / M`.
pub fn egc_upper_bound(h: &[Complex64]) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::Empty("channel".into()));
    }
    let s: f64 = h.iter().map(|v| v.norm()).sum();
    if s == 0.0 {
        return Err(Error::invalid("EGC bound undefined for a zero channel"));
    }
    Ok(s * s / h.len() as f64)
}

/// The co-phasing combiner attaining [`egc_upper_bound`] under `wᴴh`.
pub fn egc_beam(h: &[Complex64]) -> Result<Vec<Complex64>> {
    egc_upper_bound(h)?;
    let scale = 1.0 / (h.len() as f64).sqrt();
    Ok(h.iter()
        .map(|v| Complex64::from_polar(scale, v.arg()))
        .collect())
}

/// Mean EGC bound over a set.
pub fn mean_egc_bound(set: &ChannelSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("channel set".into()));
    }
    let total = set
        .channels()
        .iter()
        .map(|h| egc_upper_bound(h))
        .sum::<Result<f64>>()?;
    Ok(total / set.users() as f64)
}

/// Number of lattice beams `(2^r)^M`, or `None` when it overflows `u128`.
pub fn lattice_size(antennas: usize, phases: &PhaseSet) -> Option<u128> {
    (phases.levels() as u128).checked_pow(u32::try_from(antennas).ok()?)
}

/// Best lattice beam for a user set by full enumeration.
///
/// Ties resolve to the lexicographically smallest index vector.
pub fn exhaustive_oracle(
    set: &ChannelSet,
    phases: &PhaseSet,
    budget: u64,
) -> Result<(BeamVector, f64)> {
    if set.is_empty() {
        return Err(Error::Empty("channel set".into()));
    }
    let m = set.antennas();
    let size = lattice_size(m, phases);
    match size {
        Some(n) if n <= u128::from(budget) => {}
        _ => {
            let size = size.map_or_else(
                || format!("{}^{m}", phases.levels()),
                |n| format!("{n} ({:.2e})", n as f64),
            );
            return Err(Error::BudgetExceeded { size, budget });
        }
    }

    let levels = phases.levels();
    let scale = 1.0 / (m as f64).sqrt();
    // conj(w_m) for every phase level
    let taps: Vec<Complex64> = phases
        .values()
        .iter()
        .map(|&t| Complex64::from_polar(scale, -t))
        .collect();

    let mut idx = vec![0usize; m];
    let mut best = idx.clone();
    let mut best_gain = f64::NEG_INFINITY;
    loop {
        let mut total = 0.0;
        for h in set.channels() {
            let y: Complex64 = idx.iter().zip(h).map(|(&i, h)| taps[i] * h).sum();
            total += y.norm_sqr();
        }
        let g = total / set.users() as f64;
        if g > best_gain {
            best_gain = g;
            best.copy_from_slice(&idx);
        }
        // odometer, last antenna fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok((BeamVector::new(best), best_gain));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < levels {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Angular power pattern `|wᴴa(φ)|²` of a beam over a grid of angles.
pub fn beam_pattern(w: &[Complex64], geometry: &ArrayGeometry, grid: &[f64]) -> Result<Vec<f64>> {
    check_len(geometry.antennas(), w.len())?;
    Ok(grid
        .iter()
        .map(|&phi| inner(w, &geometry.array_response(phi)).norm_sqr())
        .collect())
}

/// `count` evenly spaced angles covering `[0, π]`, in radians.
pub fn angle_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Pattern table as CSV with header `angle_deg,beam_0,beam_1,...`.
pub fn patterns_csv(grid: &[f64], patterns: &[Vec<f64>]) -> String {
    let mut out = String::from("angle_deg");
    for n in 0..patterns.len() {
        out.push_str(&format!(",beam_{n}"));
    }
    out.push('\n');
    for (i, phi) in grid.iter().enumerate() {
        out.push_str(&phi.to_degrees().to_string());
        for p in patterns {
            out.push(',');
            out.push_str(&p[i].to_string());
        }
        out.push('\n');
    }
    out
}
