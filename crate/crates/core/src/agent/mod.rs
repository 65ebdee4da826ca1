//! Wolpertinger-style actor-critic agent that learns one analog beam from
//! receive-power feedback alone.
//!
//! Each iteration the actor proposes a continuous phase vector, exploration
//! noise is added, the result is snapped to the `k` nearest lattice beams,
//! and the critic picks among them. The chosen beam is measured, scored
//! with the adaptive-threshold reward, and stored; once the replay buffer
//! holds a full batch the networks are trained off-policy.

mod knn;
mod ou;
mod replay;
mod reward;

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use knn::nearest_beams;
pub use ou::{NoiseSchedule, OuProcess};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{Scored, ThresholdReward};

use crate::beams::{average_gain, wrap_phase, BeamVector, PhaseSet};
use crate::channel::ChannelSet;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::neural::{
    actor_step, critic_step, critic_values, AdamConfig, AdamW, Checkpoint, Mlp, TargetPair,
};

/// Agent hyperparameters. Unset optional fields are derived from the others
/// when the agent is built; see [`AgentConfig::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Phase-shifter resolution in bits.
    pub bits: u32,
    /// Iterations per training run.
    pub iterations: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_weight_decay: f64,
    pub critic_weight_decay: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Soft target updates happen every this many network updates.
    pub target_every: usize,
    /// Environment steps between network updates.
    pub train_every: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Number of lattice candidates the critic chooses among.
    pub candidates: usize,
    pub ou_theta: f64,
    pub ou_sigma_start: f64,
    /// Defaults to `π/2^bits`, half the lattice spacing.
    pub ou_sigma_end: Option<f64>,
    /// Defaults to `iterations`.
    pub noise_horizon: Option<usize>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            bits: 3,
            iterations: 5000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            actor_weight_decay: 1e-2,
            critic_weight_decay: 1e-3,
            gamma: 0.5,
            tau: 0.05,
            target_every: 1,
            train_every: 16,
            batch_size: 1024,
            replay_capacity: 8192,
            candidates: 1,
            ou_theta: 0.15,
            ou_sigma_start: FRAC_PI_2,
            ou_sigma_end: None,
            noise_horizon: None,
            seed: 0,
        }
    }
}

impl AgentConfig {
    /// Copy with every optional field filled in.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let bits = self.bits.clamp(1, crate::beams::MAX_BITS);
        c.ou_sigma_end.get_or_insert(PI / f64::from(1u32 << bits));
        c.noise_horizon.get_or_insert(self.iterations);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        PhaseSet::new(self.bits).map_err(|e| Error::Config(e.to_string()))?;
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if self.target_every == 0 || self.train_every == 0 {
            return bad("update cadences must be at least 1");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.candidates == 0 {
            return bad("batch size, replay capacity and candidate count must be positive");
        }
        AdamConfig::new(self.actor_lr, self.actor_weight_decay)
            .validate()
            .and(AdamConfig::new(self.critic_lr, self.critic_weight_decay).validate())
            .map_err(|e| Error::Config(e.to_string()))?;
        let r = self.resolved();
        let schedule = NoiseSchedule {
            start: r.ou_sigma_start,
            end: r.ou_sigma_end.expect("resolved"),
            horizon: r.noise_horizon.expect("resolved"),
        };
        schedule
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.ou_theta > 0.0 && self.ou_theta <= 1.0) {
            return bad("ou_theta must be in (0, 1]");
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub gain: f64,
    pub threshold: f64,
    pub reward: i8,
}

/// Learning curve as CSV with header `iter,gain,threshold,reward`.
pub fn curve_csv(curve: &[StepRecord]) -> String {
    let mut s = String::from("iter,gain,threshold,reward\n");
    for r in curve {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.iter, r.gain, r.threshold, r.reward
        ));
    }
    s
}

/// Derives independent sub-seeds from one seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

/// Fast environment: average gain of lattice beams over a fixed user set.
pub(crate) struct GainOracle<'a> {
    set: &'a ChannelSet,
    /// `conj(e^{jθ_i})/√M` for every phase level.
    taps: Vec<Complex64>,
}

impl<'a> GainOracle<'a> {
    pub fn new(set: &'a ChannelSet, phases: &PhaseSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Empty("channel set".into()));
        }
        let scale = 1.0 / (set.antennas() as f64).sqrt();
        let taps = phases
            .values()
            .iter()
            .map(|&t| Complex64::from_polar(scale, -t))
            .collect();
        Ok(Self { set, taps })
    }

    pub fn gain(&self, beam: &BeamVector) -> f64 {
        let mut total = 0.0;
        for h in self.set.channels() {
            let y: Complex64 = beam
                .indices()
                .iter()
                .zip(h)
                .map(|(&i, h)| self.taps[i] * h)
                .sum();
            total += y.norm_sqr();
        }
        total / self.set.users() as f64
    }
}

/// The learning agent for a single beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamAgent {
    config: AgentConfig,
    phases: PhaseSet,
    antennas: usize,
    actor: TargetPair,
    critic: TargetPair,
    actor_opt: AdamW,
    critic_opt: AdamW,
    buffer: ReplayBuffer,
    ou: OuProcess,
    rng: ChaCha8Rng,
    reward: ThresholdReward,
    state: BeamVector,
    best_beam: BeamVector,
    iteration: usize,
    updates: u64,
}

impl BeamAgent {
    pub fn new(config: &AgentConfig, antennas: usize) -> Result<Self> {
        config.validate()?;
        if antennas == 0 {
            return Err(Error::Config("antenna count must be at least 1".into()));
        }
        let config = config.resolved();
        let phases = PhaseSet::new(config.bits)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0));
        let actor = Mlp::actor(antennas, &mut init_rng)?;
        let critic = Mlp::critic(antennas, &mut init_rng)?;
        let actor_opt = AdamW::new(
            &actor,
            AdamConfig::new(config.actor_lr, config.actor_weight_decay),
        )?;
        let critic_opt = AdamW::new(
            &critic,
            AdamConfig::new(config.critic_lr, config.critic_weight_decay),
        )?;
        let schedule = NoiseSchedule {
            start: config.ou_sigma_start,
            end: config.ou_sigma_end.expect("resolved"),
            horizon: config.noise_horizon.expect("resolved"),
        };
        let ou = OuProcess::new(
            antennas,
            config.ou_theta,
            schedule,
            derive_seed(config.seed, 1),
        )?;
        let state = BeamVector::random(antennas, &phases, &mut init_rng);
        Ok(Self {
            buffer: ReplayBuffer::new(config.replay_capacity)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2)),
            actor: TargetPair::new(actor),
            critic: TargetPair::new(critic),
            actor_opt,
            critic_opt,
            ou,
            reward: ThresholdReward::new(),
            best_beam: state.clone(),
            state,
            iteration: 0,
            updates: 0,
            phases,
            antennas,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn phases(&self) -> &PhaseSet {
        &self.phases
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn state(&self) -> &BeamVector {
        &self.state
    }

    pub fn best_beam(&self) -> &BeamVector {
        &self.best_beam
    }

    /// Best gain observed so far; always equal to the reward threshold.
    pub fn best_gain(&self) -> f64 {
        self.reward.threshold
    }

    pub fn threshold(&self) -> f64 {
        self.reward.threshold
    }

    pub fn prev_gain(&self) -> f64 {
        self.reward.prev_gain
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn actor(&self) -> &TargetPair {
        &self.actor
    }

    pub fn critic(&self) -> &TargetPair {
        &self.critic
    }

    pub fn noise(&self) -> &OuProcess {
        &self.ou
    }

    /// Replaces the exploration noise process, e.g. to silence it.
    pub fn set_noise(&mut self, ou: OuProcess) -> Result<()> {
        if ou.state().len() != self.antennas {
            return Err(Error::DimensionMismatch {
                expected: self.antennas,
                actual: ou.state().len(),
            });
        }
        self.ou = ou;
        Ok(())
    }

    fn phase_rows<'b>(&self, beams: impl ExactSizeIterator<Item = &'b BeamVector>) -> Array2<f64> {
        let n = beams.len();
        let mut out = Array2::zeros((n, self.antennas));
        for (mut row, b) in out.rows_mut().into_iter().zip(beams) {
            for (x, &i) in row.iter_mut().zip(b.indices()) {
                *x = self.phases.values()[i];
            }
        }
        out
    }

    /// Actor output plus exploration noise, wrapped, and its nearest beams.
    pub fn propose_action(&mut self) -> Result<(Vec<f64>, Vec<BeamVector>)> {
        let s = self.state.phases(&self.phases)?;
        let mu = self.actor.online.forward_one(&s)?;
        let noise = self.ou.sample();
        let proto: Vec<f64> = mu
            .iter()
            .zip(noise)
            .map(|(a, n)| wrap_phase(a + n))
            .collect();
        let candidates = nearest_beams(&proto, &self.phases, self.config.candidates)?;
        Ok((proto, candidates))
    }

    /// The candidate the critic values most in the current state; ties go
    /// to the earliest candidate.
    pub fn select_action(&self, candidates: &[BeamVector]) -> Result<BeamVector> {
        match candidates {
            [] => Err(Error::Empty("candidate list".into())),
            [only] => Ok(only.clone()),
            _ => {
                let s = self.phase_rows(std::iter::repeat_n(&self.state, candidates.len()));
                let a = self.phase_rows(candidates.iter());
                let q = critic_values(&self.critic.online, s.view(), a.view())?;
                let mut best = 0;
                for (i, &v) in q.iter().enumerate() {
                    if v > q[best] {
                        best = i;
                    }
                }
                Ok(candidates[best].clone())
            }
        }
    }

    /// Records the measured gain of `action`, stores the transition, moves
    /// to the new state and trains when due.
    pub fn observe(&mut self, action: BeamVector, gain: f64) -> Result<StepRecord> {
        action.validate(&self.phases)?;
        if action.len() != self.antennas {
            return Err(Error::DimensionMismatch {
                expected: self.antennas,
                actual: action.len(),
            });
        }
        let scored = self.reward.score(gain)?;
        if scored.improved {
            self.best_beam = action.clone();
        }
        let record = StepRecord {
            iter: self.iteration,
            gain,
            threshold: self.reward.threshold,
            reward: scored.reward,
        };
        let state = std::mem::replace(&mut self.state, action.clone());
        self.buffer.push(Transition {
            state,
            action,
            reward: scored.reward,
        });
        self.iteration += 1;
        if self.buffer.len() >= self.config.batch_size
            && self.iteration.is_multiple_of(self.config.train_every)
        {
            self.learn()?;
        }
        Ok(record)
    }

    pub(crate) fn step_with(&mut self, env: &GainOracle) -> Result<StepRecord> {
        let (_, candidates) = self.propose_action()?;
        let action = self.select_action(&candidates)?;
        let gain = env.gain(&action);
        self.observe(action, gain)
    }

    /// One full interaction with the user set.
    pub fn step(&mut self, set: &ChannelSet) -> Result<StepRecord> {
        self.check_set(set)?;
        self.step_with(&GainOracle::new(set, &self.phases)?)
    }

    fn check_set(&self, set: &ChannelSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::Empty("channel set".into()));
        }
        if set.antennas() != self.antennas {
            return Err(Error::DimensionMismatch {
                expected: self.antennas,
                actual: set.antennas(),
            });
        }
        Ok(())
    }

    /// Runs `iterations` steps and returns their records.
    pub fn run(&mut self, set: &ChannelSet, iterations: usize) -> Result<Vec<StepRecord>> {
        self.check_set(set)?;
        let env = GainOracle::new(set, &self.phases)?;
        (0..iterations).map(|_| self.step_with(&env)).collect()
    }

    /// Re-anchors threshold and previous gain on a new user set, measured
    /// with the current best beam.
    pub fn rebase(&mut self, set: &ChannelSet) -> Result<f64> {
        self.check_set(set)?;
        let g = average_gain(&self.best_beam.realize(&self.phases)?, set)?;
        self.reward.rebase(g);
        Ok(g)
    }

    /// Replaces the best beam with `beam` and rebases on `set`.
    pub fn adopt(&mut self, beam: BeamVector, set: &ChannelSet) -> Result<f64> {
        beam.validate(&self.phases)?;
        if beam.len() != self.antennas {
            return Err(Error::DimensionMismatch {
                expected: self.antennas,
                actual: beam.len(),
            });
        }
        self.best_beam = beam;
        self.rebase(set)
    }

    /// One critic and actor update on a replay batch, followed by a soft
    /// target update when due.
    pub fn learn(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Err(Error::Empty("replay buffer".into()));
        }
        let batch = self.buffer.sample(&mut self.rng, self.config.batch_size);
        let s = self.phase_rows(batch.iter().map(|t| &t.state));
        let a = self.phase_rows(batch.iter().map(|t| &t.action));
        let r = Array1::from_iter(batch.iter().map(|t| f64::from(t.reward)));

        // Next state equals the action.
        let next_a = self.actor.target.forward(a.view())?;
        let q_next = critic_values(&self.critic.target, a.view(), next_a.view())?;
        let y = r + &(Array1::from(q_next) * self.config.gamma);

        critic_step(
            &mut self.critic.online,
            &mut self.critic_opt,
            s.view(),
            a.view(),
            y.view(),
        )?;
        actor_step(
            &mut self.actor.online,
            &self.critic.online,
            &mut self.actor_opt,
            s.view(),
        )?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_every as u64) {
            self.actor.soft_update(self.config.tau)?;
            self.critic.soft_update(self.config.tau)?;
        }
        Ok(())
    }

    /// Actor output for arbitrary states, without noise.
    pub fn policy(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.actor.online.forward(states)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(AGENT_MAGIC);
        w.u32(AGENT_VERSION);
        let config = serde_json::to_vec(&self.config)?;
        w.usize(config.len());
        w.bytes(&config);
        w.usize(self.antennas);
        Checkpoint {
            networks: vec![
                self.actor.online.clone(),
                self.actor.target.clone(),
                self.critic.online.clone(),
                self.critic.target.clone(),
            ],
            optimizers: vec![self.actor_opt.clone(), self.critic_opt.clone()],
            rng: Some(self.rng.clone()),
        }
        .write(&mut w);
        self.buffer.write(&mut w);
        self.ou.write(&mut w);
        w.f64(self.reward.threshold);
        w.f64(self.reward.prev_gain);
        for b in [&self.state, &self.best_beam] {
            for &i in b.indices() {
                w.u32(i as u32);
            }
        }
        w.usize(self.iteration);
        w.u64(self.updates);
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.magic(AGENT_MAGIC)?;
        let version = r.u32()?;
        if version != AGENT_VERSION {
            return Err(Error::Format(format!(
                "unsupported agent checkpoint version {version}"
            )));
        }
        let n = r.usize()?;
        let config: AgentConfig = serde_json::from_slice(r.take(n)?)?;
        config
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        let antennas = r.usize()?;
        let phases = PhaseSet::new(config.bits)?;
        let ck = Checkpoint::read(&mut r)?;
        let (Ok([ao, at, co, ct]), Ok([aopt, copt]), Some(rng)) = (
            <[Mlp; 4]>::try_from(ck.networks),
            <[AdamW; 2]>::try_from(ck.optimizers),
            ck.rng,
        ) else {
            return Err(Error::Format(
                "agent checkpoint needs 4 networks, 2 optimizers and an rng".into(),
            ));
        };
        if ao.inputs() != antennas || co.inputs() != 2 * antennas {
            return Err(Error::Format(
                "network shapes do not match antenna count".into(),
            ));
        }
        let buffer = ReplayBuffer::read(&mut r)?;
        let ou = OuProcess::read(&mut r)?;
        let reward = ThresholdReward {
            threshold: r.f64()?,
            prev_gain: r.f64()?,
        };
        let mut beam = || -> Result<BeamVector> {
            let b = BeamVector::new(
                (0..antennas)
                    .map(|_| r.u32().map(|v| v as usize))
                    .collect::<Result<_>>()?,
            );
            b.validate(&phases)
                .map_err(|e| Error::Format(e.to_string()))?;
            Ok(b)
        };
        let state = beam()?;
        let best_beam = beam()?;
        let iteration = r.usize()?;
        let updates = r.u64()?;
        r.finish()?;
        Ok(Self {
            actor: TargetPair {
                online: ao,
                target: at,
            },
            critic: TargetPair {
                online: co,
                target: ct,
            },
            actor_opt: aopt,
            critic_opt: copt,
            buffer,
            ou,
            rng,
            reward,
            state,
            best_beam,
            iteration,
            updates,
            phases,
            antennas,
            config,
        })
    }
}

const AGENT_MAGIC: &[u8; 4] = b"BFAG";
const AGENT_VERSION: u32 = 1;

/// Result of a single-beam training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_beam: BeamVector,
    pub best_gain: f64,
    pub curve: Vec<StepRecord>,
}

/// Trains a fresh agent on `set` for `iterations` steps.
pub fn train_beam_pattern(
    config: &AgentConfig,
    set: &ChannelSet,
    iterations: usize,
) -> Result<TrainOutcome> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    if set.is_empty() {
        return Err(Error::Empty("channel set".into()));
    }
    let config = AgentConfig {
        iterations,
        ..config.clone()
    };
    let mut agent = BeamAgent::new(&config, set.antennas())?;
    let curve = agent.run(set, iterations)?;
    Ok(TrainOutcome {
        best_beam: agent.best_beam.clone(),
        best_gain: agent.best_gain(),
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayGeometry;
    use crate::beams::{exhaustive_oracle, DEFAULT_ORACLE_BUDGET};
    use crate::channel::{random_channel, synthesize_channel, PathComponent};

    fn small_config(seed: u64) -> AgentConfig {
        AgentConfig {
            bits: 2,
            batch_size: 16,
            replay_capacity: 64,
            seed,
            ..AgentConfig::default()
        }
    }

    fn los_user(m: usize, deg: f64) -> ChannelSet {
        let g = ArrayGeometry::ideal(m).unwrap();
        let h = synthesize_channel(
            &g,
            &[PathComponent {
                gain: Complex64::new(1.0, 0.0),
                aoa: deg.to_radians(),
            }],
        )
        .unwrap();
        ChannelSet::new(vec![h]).unwrap()
    }

    #[test]
    fn single_iteration_stores_one_transition() {
        let set = los_user(4, 60.0);
        let mut agent = BeamAgent::new(&small_config(1), 4).unwrap();
        let rec = agent.run(&set, 1).unwrap();
        assert_eq!(agent.buffer().len(), 1);
        assert_eq!(rec[0].threshold, rec[0].gain);
        assert_eq!(agent.best_gain(), rec[0].gain);
    }

    #[test]
    fn invariants_hold_over_a_run() {
        let set = los_user(4, 100.0);
        let mut agent = BeamAgent::new(&small_config(2), 4).unwrap();
        let curve = agent.run(&set, 300).unwrap();
        assert!(agent.updates() > 0);
        let mut running_max: f64 = 0.0;
        let mut prev = 0.0;
        let mut beta = 0.0;
        for r in &curve {
            let expect = if r.gain > beta {
                1
            } else if r.gain > prev {
                0
            } else {
                -1
            };
            assert_eq!(r.reward, expect);
            running_max = running_max.max(r.gain);
            assert!(r.threshold >= beta);
            assert_eq!(r.threshold, running_max);
            beta = r.threshold;
            prev = r.gain;
        }
        let g = GainOracle::new(&set, agent.phases())
            .unwrap()
            .gain(agent.best_beam());
        assert_eq!(g, agent.best_gain());
        for t in agent.buffer().iter().collect::<Vec<_>>().windows(2) {
            assert_eq!(&t[1].state, t[0].next_state());
        }
    }

    #[test]
    fn silent_noise_untrained_actor_stays_finite() {
        let set = los_user(3, 45.0);
        let mut agent = BeamAgent::new(&small_config(3), 3).unwrap();
        agent
            .set_noise(OuProcess::new(3, 0.15, NoiseSchedule::constant(0.0), 0).unwrap())
            .unwrap();
        let curve = agent.run(&set, 100).unwrap();
        assert!(curve
            .iter()
            .all(|r| r.gain.is_finite() && r.threshold.is_finite()));
        assert!(agent
            .actor()
            .online
            .parameters()
            .iter()
            .all(|p| p.is_finite()));
    }

    #[test]
    fn runs_are_deterministic() {
        let set =
            ChannelSet::new(vec![random_channel(3, &mut ChaCha8Rng::seed_from_u64(1))]).unwrap();
        let a = train_beam_pattern(&small_config(4), &set, 200).unwrap();
        let b = train_beam_pattern(&small_config(4), &set, 200).unwrap();
        assert_eq!(a, b);
        let c = train_beam_pattern(&small_config(5), &set, 200).unwrap();
        assert_ne!(a.curve, c.curve);
    }

    #[test]
    fn checkpoint_resumes_bit_exactly() {
        let set = los_user(3, 30.0);
        let mut a = BeamAgent::new(&small_config(6), 3).unwrap();
        a.run(&set, 80).unwrap();
        let bytes = a.to_bytes().unwrap();
        let mut b = BeamAgent::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        let ra = a.run(&set, 50).unwrap();
        let rb = b.run(&set, 50).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        assert!(BeamAgent::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn select_breaks_ties_toward_first_and_follows_critic() {
        let mut agent = BeamAgent::new(&small_config(7), 2).unwrap();
        let cands = vec![
            BeamVector::new(vec![0, 1]),
            BeamVector::new(vec![2, 3]),
            BeamVector::new(vec![1, 1]),
        ];
        // Constant critic.
        agent.critic.online = agent.critic.online.zeroed();
        assert_eq!(agent.select_action(&cands).unwrap(), cands[0]);
        assert!(agent.select_action(&[]).is_err());
        // Linear critic on the action's second phase.
        let last = agent.critic.online.layers.len() - 1;
        agent.critic.online.layers[0].weights[[3, 0]] = 1.0;
        agent.critic.online.layers[1].weights[[0, 0]] = 1.0;
        agent.critic.online.layers[last].weights[[0, 0]] = 1.0;
        agent.critic.online.layers[0].bias[0] = 10.0;
        agent.critic.online.layers[1].bias.fill(0.0);
        let p = agent.phases().clone();
        let want = cands
            .iter()
            .max_by(|a, b| p.values()[a.indices()[1]].total_cmp(&p.values()[b.indices()[1]]))
            .unwrap();
        assert_eq!(&agent.select_action(&cands).unwrap(), want);
    }

    #[test]
    fn proposals_snap_to_nearest_lattice_points() {
        let mut agent = BeamAgent::new(
            &AgentConfig {
                candidates: 3,
                ..small_config(8)
            },
            2,
        )
        .unwrap();
        let (proto, cands) = agent.propose_action().unwrap();
        assert!(proto.iter().all(|&p| p > -PI && p <= PI));
        assert_eq!(cands, nearest_beams(&proto, agent.phases(), 3).unwrap());
    }

    #[test]
    fn learns_a_small_los_beam() {
        let set = los_user(4, 70.0);
        let p = PhaseSet::new(2).unwrap();
        let (_, best) = exhaustive_oracle(&set, &p, DEFAULT_ORACLE_BUDGET).unwrap();
        let cfg = AgentConfig {
            bits: 2,
            batch_size: 64,
            replay_capacity: 512,
            seed: 9,
            ..AgentConfig::default()
        };
        let out = train_beam_pattern(&cfg, &set, 1500).unwrap();
        assert!(out.best_gain >= 0.95 * best);
    }

    #[test]
    fn curve_csv_format() {
        let s = curve_csv(&[StepRecord {
            iter: 0,
            gain: 1.5,
            threshold: 1.5,
            reward: 1,
        }]);
        assert_eq!(s, "iter,gain,threshold,reward\n0,1.5,1.5,1\n");
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig {
            gamma: 1.5,
            ..AgentConfig::default()
        }
        .validate()
        .is_err());
        assert!(AgentConfig {
            train_every: 0,
            ..AgentConfig::default()
        }
        .validate()
        .is_err());
        assert!(AgentConfig {
            bits: 0,
            ..AgentConfig::default()
        }
        .validate()
        .is_err());
        let r = AgentConfig {
            bits: 3,
            iterations: 100,
            ..AgentConfig::default()
        }
        .resolved();
        assert_eq!(r.ou_sigma_end, Some(PI / 8.0));
        assert_eq!(r.noise_horizon, Some(100));
        assert!(BeamAgent::new(&AgentConfig::default(), 0).is_err());
    }
}
