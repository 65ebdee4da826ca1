//! User channels: geometric synthesis, synthetic scenarios, file I/O and
//! dataset normalization.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};

pub const FILE_MAGIC: &[u8; 4] = b"BFCH";
pub const FILE_VERSION: u32 = 1;

/// One propagation path: complex gain and angle of arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub aoa: f64,
}

/// `h = Σ_ℓ α_ℓ a(φ_ℓ)`.
pub fn synthesize_channel(
    geometry: &ArrayGeometry,
    paths: &[PathComponent],
) -> Result<Vec<Complex64>> {
    if paths.is_empty() {
        return Err(Error::Empty("path list".into()));
    }
    let mut h = vec![Complex64::new(0.0, 0.0); geometry.antennas()];
    for p in paths {
        if !(p.gain.re.is_finite() && p.gain.im.is_finite() && p.aoa.is_finite()) {
            return Err(Error::NonFinite("path component".into()));
        }
        for (acc, a) in h.iter_mut().zip(geometry.array_response(p.aoa)) {
            *acc += p.gain * a;
        }
    }
    Ok(h)
}

/// An immutable collection of equal-length user channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<Vec<Complex64>>,
    geometry_id: Option<String>,
    normalization: Option<f64>,
}

impl ChannelSet {
    pub fn new(channels: Vec<Vec<Complex64>>) -> Result<Self> {
        validate_channels(&channels)?;
        Ok(Self {
            channels,
            geometry_id: None,
            normalization: None,
        })
    }

    pub fn with_geometry_id(mut self, id: impl Into<String>) -> Self {
        self.geometry_id = Some(id.into());
        self
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn channel(&self, user: usize) -> &[Complex64] {
        &self.channels[user]
    }

    pub fn users(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Antenna count, zero for an empty set.
    pub fn antennas(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn geometry_id(&self) -> Option<&str> {
        self.geometry_id.as_deref()
    }

    /// Factor the channels were divided by, if normalized.
    pub fn normalization(&self) -> Option<f64> {
        self.normalization
    }

    /// Subset of users by index, keeping provenance.
    pub fn select(&self, users: &[usize]) -> Self {
        Self {
            channels: users.iter().map(|&u| self.channels[u].clone()).collect(),
            geometry_id: self.geometry_id.clone(),
            normalization: self.normalization,
        }
    }

    /// Largest element magnitude across the set.
    pub fn max_magnitude(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Divides every channel by the largest element magnitude `Δ`.
    ///
    /// Returns the normalized set and `Δ`. Gains computed on the result are
    /// scaled by `1/Δ²`; ratios between users or beams are unchanged.
    pub fn normalize(&self) -> Result<(ChannelSet, f64)> {
        if self.is_empty() {
            return Err(Error::Empty("channel set".into()));
        }
        let delta = self.max_magnitude();
        if delta == 0.0 {
            return Err(Error::invalid("cannot normalize an all-zero channel set"));
        }
        let channels = self
            .channels
            .iter()
            .map(|h| h.iter().map(|v| v / delta).collect())
            .collect();
        let prior = self.normalization.unwrap_or(1.0);
        Ok((
            ChannelSet {
                channels,
                geometry_id: self.geometry_id.clone(),
                normalization: Some(prior * delta),
            },
            delta,
        ))
    }

    /// Little-endian binary encoding: magic, version, M, K, then K·M
    /// `(re, im)` f64 pairs in user-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.antennas();
        let k = self.users();
        let mut out = Vec::with_capacity(16 + 16 * m * k);
        out.extend_from_slice(FILE_MAGIC);
        out.extend_from_slice(&FILE_VERSION.to_le_bytes());
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        for v in self.channels.iter().flatten() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("channel file shorter than its header".into()));
        }
        if &bytes[..4] != FILE_MAGIC {
            return Err(Error::Format("bad channel file magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != FILE_VERSION {
            return Err(Error::Format(format!(
                "unsupported channel file version {version}"
            )));
        }
        let m = word(8) as usize;
        let k = word(12) as usize;
        if m == 0 {
            return Err(Error::Format("channel file declares M = 0".into()));
        }
        let expected = m
            .checked_mul(k)
            .and_then(|n| n.checked_mul(16))
            .and_then(|n| n.checked_add(16))
            .ok_or_else(|| Error::Format("channel file dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "channel file holds {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let channels = (0..k)
            .map(|u| {
                (0..m)
                    .map(|e| {
                        let at = 16 + 16 * (u * m + e);
                        Complex64::new(f(at), f(at + 8))
                    })
                    .collect()
            })
            .collect();
        ChannelSet::new(channels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&JsonChannels::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: JsonChannels = serde_json::from_str(s)?;
        if j.channels.len() != j.k {
            return Err(Error::Format(format!(
                "JSON header declares K = {} but holds {} users",
                j.k,
                j.channels.len()
            )));
        }
        let channels = j
            .channels
            .into_iter()
            .enumerate()
            .map(|(u, row)| {
                if row.len() != j.m {
                    return Err(Error::Format(format!(
                        "user {u} has {} elements, header declares M = {}",
                        row.len(),
                        j.m
                    )));
                }
                Ok(row
                    .into_iter()
                    .map(|[re, im]| Complex64::new(re, im))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut set = ChannelSet::new(channels)?;
        set.geometry_id = j.geometry_id;
        set.normalization = j.normalization;
        Ok(set)
    }

    /// Writes the binary format, or JSON when the path ends in `.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path)?;
        if is_json(path) {
            f.write_all(self.to_json()?.as_bytes())?;
        } else {
            f.write_all(&self.to_bytes())?;
        }
        Ok(())
    }
}

/// Reads a channel file in the binary format, or JSON for `.json` paths.
pub fn load_channels(path: impl AsRef<Path>) -> Result<ChannelSet> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    if is_json(path) {
        let s = String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?;
        ChannelSet::from_json(&s)
    } else {
        ChannelSet::from_bytes(&buf)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn validate_channels(channels: &[Vec<Complex64>]) -> Result<()> {
    let Some(first) = channels.first() else {
        return Ok(());
    };
    let m = first.len();
    if m == 0 {
        return Err(Error::Format(
            "channels must have at least one element".into(),
        ));
    }
    for (u, h) in channels.iter().enumerate() {
        if h.len() != m {
            return Err(Error::Format(format!(
                "user {u} has {} elements, expected {m}",
                h.len()
            )));
        }
        if h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("channel of user {u}")));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonChannels {
    magic: String,
    version: u32,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<f64>,
    channels: Vec<Vec<[f64; 2]>>,
}

impl From<&ChannelSet> for JsonChannels {
    fn from(s: &ChannelSet) -> Self {
        JsonChannels {
            magic: "BFCH".into(),
            version: FILE_VERSION,
            m: s.antennas(),
            k: s.users(),
            geometry_id: s.geometry_id.clone(),
            normalization: s.normalization,
            channels: s
                .channels
                .iter()
                .map(|h| h.iter().map(|v| [v.re, v.im]).collect())
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Los,
    Nlos,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "los" => Ok(ScenarioKind::Los),
            "nlos" => Ok(ScenarioKind::Nlos),
            other => Err(Error::Config(format!("unknown scenario kind {other:?}"))),
        }
    }
}

/// Parameters of the synthetic channel generator. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub users: usize,
    pub seed: u64,
    /// Maximum number of paths per user.
    pub paths: usize,
    /// LOS: sectors the dominant AoA is drawn from; each user picks a sector
    /// uniformly, then an angle uniformly inside it.
    pub sectors: Vec<(f64, f64)>,
    /// LOS: power of each weak path relative to the dominant one, dB.
    pub weak_path_db: f64,
    /// NLOS: reflector directions shared by all users.
    pub reflectors: Vec<f64>,
    /// NLOS: angular spread of a path around its reflector.
    pub reflector_spread_deg: f64,
}

impl ScenarioSpec {
    pub fn los(users: usize, sectors: Vec<(f64, f64)>, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Los,
            users,
            seed,
            paths: 5,
            sectors,
            weak_path_db: -15.0,
            reflectors: Vec::new(),
            reflector_spread_deg: 2.0,
        }
    }

    pub fn nlos(users: usize, reflectors: Vec<f64>, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Nlos,
            users,
            seed,
            paths: 5,
            sectors: Vec::new(),
            weak_path_db: -15.0,
            reflectors,
            reflector_spread_deg: 2.0,
        }
    }
}

/// Draws a synthetic channel set.
///
/// LOS users get one unit-power path inside one of the configured sectors
/// plus up to `paths - 1` weak paths at or below `weak_path_db`. NLOS users
/// get 2..=`paths` comparable-power paths scattered around the shared
/// reflector angles.
pub fn generate_scenario(geometry: &ArrayGeometry, spec: &ScenarioSpec) -> Result<ChannelSet> {
    if spec.users == 0 {
        return Err(Error::invalid("scenario needs at least one user"));
    }
    if spec.paths == 0 {
        return Err(Error::invalid("scenario needs at least one path per user"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let channels = match spec.kind {
        ScenarioKind::Los => {
            if spec.sectors.is_empty() {
                return Err(Error::invalid("LOS scenario needs a nonempty angular span"));
            }
            for &(lo, hi) in &spec.sectors {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return Err(Error::invalid(format!("empty angular span [{lo}, {hi}]")));
                }
            }
            let weak_amp = 10f64.powf(spec.weak_path_db / 20.0);
            (0..spec.users)
                .map(|_| {
                    let (lo, hi) = spec.sectors[rng.random_range(0..spec.sectors.len())];
                    let aoa = uniform_in(&mut rng, lo, hi).to_radians();
                    let mut paths = vec![PathComponent {
                        gain: random_phase(&mut rng),
                        aoa,
                    }];
                    let weak = rng.random_range(0..spec.paths);
                    for _ in 0..weak {
                        let amp = weak_amp * rng.random::<f64>();
                        paths.push(PathComponent {
                            gain: amp * random_phase(&mut rng),
                            aoa: rng.random::<f64>() * PI,
                        });
                    }
                    synthesize_channel(geometry, &paths)
                })
                .collect::<Result<Vec<_>>>()?
        }
        ScenarioKind::Nlos => {
            if spec.reflectors.is_empty() {
                return Err(Error::invalid(
                    "NLOS scenario needs at least one reflector angle",
                ));
            }
            let lo_paths = 2.min(spec.paths);
            let spread = Normal::new(0.0, spec.reflector_spread_deg.max(0.0))
                .map_err(|e| Error::invalid(e.to_string()))?;
            (0..spec.users)
                .map(|_| {
                    let count = rng.random_range(lo_paths..=spec.paths);
                    let paths: Vec<PathComponent> = (0..count)
                        .map(|l| {
                            // Cover every reflector before repeating one.
                            let r = if l < spec.reflectors.len() {
                                spec.reflectors[l]
                            } else {
                                spec.reflectors[rng.random_range(0..spec.reflectors.len())]
                            };
                            let deg = (r + spread.sample(&mut rng)).clamp(0.0, 180.0);
                            let amp = 0.7 + 0.3 * rng.random::<f64>();
                            PathComponent {
                                gain: amp * random_phase(&mut rng),
                                aoa: deg.to_radians(),
                            }
                        })
                        .collect();
                    synthesize_channel(geometry, &paths)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ChannelSet::new(channels)?.with_geometry_id(geometry.fingerprint()))
}

fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

fn random_phase<R: Rng>(rng: &mut R) -> Complex64 {
    let t: f64 = rng.random::<f64>() * 2.0 * PI;
    Complex64::from_polar(1.0, t)
}

/// Complex Gaussian channel draws, handy for property tests.
pub fn random_channel<R: Rng>(antennas: usize, rng: &mut R) -> Vec<Complex64> {
    (0..antennas)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect()
}
