use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Geometric decay of the noise scale from `start` to `end` over `horizon`
/// samples, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: usize,
}

impl NoiseSchedule {
    pub fn constant(sigma: f64) -> Self {
        Self {
            start: sigma,
            end: sigma,
            horizon: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.end >= 0.0 && self.start.is_finite() && self.end.is_finite())
        {
            return Err(Error::invalid(
                "noise scales must be finite and nonnegative",
            ));
        }
        if self.end > self.start {
            return Err(Error::invalid("noise scale must not grow over time"));
        }
        if self.end == 0.0 && self.start > 0.0 && self.horizon > 0 {
            return Err(Error::invalid(
                "geometric decay needs a positive final scale",
            ));
        }
        Ok(())
    }

    pub fn sigma(&self, t: usize) -> f64 {
        if t >= self.horizon || self.start == self.end {
            return self.end;
        }
        let frac = t as f64 / self.horizon as f64;
        // Clamp so rounding can never push the value above an earlier one.
        (self.start * (self.end / self.start).powf(frac)).clamp(self.end, self.start)
    }
}

/// Ornstein-Uhlenbeck process `x ← x − θx + σ(t)·n`, `n ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuProcess {
    pub theta: f64,
    pub schedule: NoiseSchedule,
    state: Vec<f64>,
    t: usize,
    rng: ChaCha8Rng,
}

impl OuProcess {
    pub fn new(dim: usize, theta: f64, schedule: NoiseSchedule, seed: u64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!(
                "mean reversion must be in (0, 1], got {theta}"
            )));
        }
        schedule.validate()?;
        Ok(Self {
            theta,
            schedule,
            state: vec![0.0; dim],
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_state(mut self, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.state.len(),
                actual: x.len(),
            });
        }
        self.state = x;
        Ok(self)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn samples_drawn(&self) -> usize {
        self.t
    }

    pub fn current_sigma(&self) -> f64 {
        self.schedule.sigma(self.t)
    }

    /// Advances the process one step and returns the new state.
    pub fn sample(&mut self) -> &[f64] {
        let sigma = self.schedule.sigma(self.t);
        for x in &mut self.state {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *x += -self.theta * *x + sigma * n;
        }
        self.t += 1;
        &self.state
    }

    /// Standard deviation the process settles to under a constant `sigma`.
    pub fn stationary_std(theta: f64, sigma: f64) -> f64 {
        sigma / (2.0 * theta - theta * theta).sqrt()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.f64(self.theta);
        w.f64(self.schedule.start);
        w.f64(self.schedule.end);
        w.usize(self.schedule.horizon);
        w.f64s(&self.state);
        w.usize(self.t);
        w.rng(&self.rng);
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self> {
        let theta = r.f64()?;
        let schedule = NoiseSchedule {
            start: r.f64()?,
            end: r.f64()?,
            horizon: r.usize()?,
        };
        let state = r.f64s()?;
        let t = r.usize()?;
        let rng = r.rng()?;
        let mut p = OuProcess::new(state.len(), theta, schedule, 0)
            .map_err(|e| Error::Format(e.to_string()))?;
        p.state = state;
        p.t = t;
        p.rng = rng;
        Ok(p)
    }
}
