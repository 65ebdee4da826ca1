use crate::error::{Error, Result};

/// Ternary reward with an adaptive threshold.
///
/// The threshold is the best gain seen so far. A gain above it earns `+1`
/// and raises the threshold; otherwise beating the previous gain earns `0`
/// and anything else `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThresholdReward {
    pub threshold: f64,
    pub prev_gain: f64,
}

/// Outcome of scoring one gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scored {
    pub reward: i8,
    /// The gain beat the threshold and replaced it.
    pub improved: bool,
}

impl ThresholdReward {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn score(&mut self, gain: f64) -> Result<Scored> {
        if !gain.is_finite() || gain < 0.0 {
            return Err(Error::invalid(format!(
                "gain must be finite and nonnegative, got {gain}"
            )));
        }
        let out = if gain > self.threshold {
            self.threshold = gain;
            Scored {
                reward: 1,
                improved: true,
            }
        } else if gain > self.prev_gain {
            Scored {
                reward: 0,
                improved: false,
            }
        } else {
            Scored {
                reward: -1,
                improved: false,
            }
        };
        self.prev_gain = gain;
        Ok(out)
    }

    /// Restarts both references at `gain`, e.g. when the environment changes.
    pub fn rebase(&mut self, gain: f64) {
        self.threshold = gain;
        self.prev_gain = gain;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(threshold: f64, prev_gain: f64) -> ThresholdReward {
        ThresholdReward {
            threshold,
            prev_gain,
        }
    }

    #[test]
    fn rule_examples() {
        let mut r = with(3.0, 4.0);
        assert_eq!(
            r.score(5.0).unwrap(),
            Scored {
                reward: 1,
                improved: true
            }
        );
        assert_eq!(r.threshold, 5.0);
        assert_eq!(r.prev_gain, 5.0);

        let mut r = with(5.0, 2.0);
        assert_eq!(r.score(3.0).unwrap().reward, 0);
        assert_eq!(r.threshold, 5.0);

        let mut r = with(5.0, 2.0);
        assert_eq!(r.score(1.0).unwrap().reward, -1);
        assert_eq!(r.prev_gain, 1.0);
    }

    #[test]
    fn equal_gains_are_not_improvements() {
        let mut r = with(2.0, 2.0);
        assert_eq!(r.score(2.0).unwrap().reward, -1);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(ThresholdReward::new().score(-1e-12).is_err());
        assert!(ThresholdReward::new().score(f64::NAN).is_err());
    }
}
