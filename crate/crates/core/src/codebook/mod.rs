//! Multi-beam codebook learning.
//!
//! Users are probed with a handful of random sensing beams. Only those
//! receive gains feed the clustering, so no channel knowledge is needed.
//! Each cluster is matched to one beam agent by a maximum-gain assignment,
//! the agents learn their beams independently, and a short
//! perturb-and-quantize search polishes each result.

mod hungarian;
mod kmeans;
mod sensing;

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use hungarian::{hungarian_assign, Assignment};
pub use kmeans::{
    kmeans_fit, kmeans_fit_restarts, kmeans_from, ClusterModel, DEFAULT_RESTARTS, MAX_ITERATIONS,
};
pub use sensing::{build_sensing_matrix, feature_vectors, SensingSet};

use crate::agent::{derive_seed, AgentConfig, BeamAgent, GainOracle, StepRecord};
use crate::beams::{codebook_objective, BeamVector, Codebook, PhaseSet};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};

/// Gain of every beam (rows) averaged over every cluster (columns).
pub fn cost_matrix(
    beams: &[BeamVector],
    clusters: &[ChannelSet],
    phases: &PhaseSet,
) -> Result<Array2<f64>> {
    if beams.len() != clusters.len() {
        return Err(Error::DimensionMismatch {
            expected: beams.len(),
            actual: clusters.len(),
        });
    }
    if let Some(c) = clusters.iter().position(ChannelSet::is_empty) {
        return Err(Error::Empty(format!("cluster {c}")));
    }
    let n = beams.len();
    let mut z = Array2::zeros((n, n));
    for (j, cluster) in clusters.iter().enumerate() {
        let env = GainOracle::new(cluster, phases)?;
        for (i, b) in beams.iter().enumerate() {
            b.validate(phases)?;
            if b.len() != cluster.antennas() {
                return Err(Error::DimensionMismatch {
                    expected: cluster.antennas(),
                    actual: b.len(),
                });
            }
            z[[i, j]] = env.gain(b);
        }
    }
    Ok(z)
}

/// Random local search around `beam`: perturb its phases with Gaussian
/// noise of standard deviation `noise`, snap to the lattice, and keep the
/// candidate whenever it strictly improves the average gain.
///
/// Returns the best beam and its gain, which is never below the input's.
pub fn fine_tune(
    beam: &BeamVector,
    cluster: &ChannelSet,
    phases: &PhaseSet,
    iterations: usize,
    noise: f64,
    seed: u64,
) -> Result<(BeamVector, f64)> {
    beam.validate(phases)?;
    if beam.len() != cluster.antennas() {
        return Err(Error::DimensionMismatch {
            expected: cluster.antennas(),
            actual: beam.len(),
        });
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!(
            "fine-tune noise must be finite and nonnegative, got {noise}"
        )));
    }
    let env = GainOracle::new(cluster, phases)?;
    let mut best = beam.clone();
    let mut best_gain = env.gain(&best);
    if noise == 0.0 {
        return Ok((best, best_gain));
    }
    let normal = Normal::new(0.0, noise).expect("validated scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..iterations {
        let proto: Vec<f64> = best
            .phases(phases)?
            .iter()
            .map(|t| t + normal.sample(&mut rng))
            .collect();
        let candidate = phases.quantize(&proto)?;
        let g = env.gain(&candidate);
        if g > best_gain {
            best = candidate;
            best_gain = g;
        }
    }
    Ok((best, best_gain))
}

/// Settings for [`learn_codebook`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    /// Number of beams (and agents).
    #[serde(rename = "N")]
    pub beams: usize,
    #[serde(rename = "S")]
    pub sensing_beams: usize,
    /// k-means++ starts; the lowest-inertia fit is kept.
    pub kmeans_restarts: usize,
    /// Clustering, assignment and training rounds.
    pub rounds: usize,
    /// Fraction of users drawn for each round.
    pub subset_fraction: f64,
    /// Training stops once the best gain improved by less than
    /// `saturation_tolerance` (relative) over this many iterations.
    pub saturation_window: usize,
    pub saturation_tolerance: f64,
    pub fine_tune_iterations: usize,
    /// Defaults to one lattice step.
    pub fine_tune_noise: Option<f64>,
    pub seed: u64,
    /// Shared by all agents; `iterations` caps each round and the seed is
    /// replaced by a per-agent stream. Not part of the serialized form.
    #[serde(skip)]
    pub agent: AgentConfig,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            beams: 4,
            sensing_beams: 16,
            kmeans_restarts: DEFAULT_RESTARTS,
            rounds: 1,
            subset_fraction: 1.0,
            saturation_window: 2000,
            saturation_tolerance: 1e-3,
            fine_tune_iterations: 1000,
            fine_tune_noise: None,
            seed: 0,
            agent: AgentConfig::default(),
        }
    }
}

impl CodebookConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.beams == 0 {
            return bad("codebook needs at least one beam");
        }
        if self.sensing_beams < 2 {
            return bad("need at least 2 sensing beams");
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return bad("subset_fraction must be in (0, 1]");
        }
        if self.saturation_window == 0
            || self.saturation_tolerance.is_nan()
            || self.saturation_tolerance < 0.0
        {
            return bad("saturation window must be positive and tolerance nonnegative");
        }
        if let Some(s) = self.fine_tune_noise {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("fine_tune_noise must be finite and nonnegative");
            }
        }
        self.agent.validate()
    }

    fn agent_config(&self, network: usize) -> AgentConfig {
        AgentConfig {
            seed: derive_seed(self.seed, 100 + network as u64),
            ..self.agent.clone()
        }
    }
}

/// One line of the assignment log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub round: usize,
    pub network: usize,
    pub cluster: usize,
    /// Gain of the network's beam on its cluster after training.
    pub avg_gain: f64,
}

/// Summary of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    /// Objective of this round's beams on the evaluation set.
    pub objective: f64,
    /// Objective of the best codebook seen so far.
    pub best_objective: f64,
    /// Agent iterations spent before saturation, per network.
    pub iterations: Vec<usize>,
    pub assignment: Vec<AssignmentRecord>,
}

/// Output of [`learn_codebook`].
#[derive(Debug, Clone)]
pub struct CodebookRun {
    /// Best codebook over all rounds.
    pub codebook: Codebook,
    pub sensing: SensingSet,
    pub model: ClusterModel,
    pub rounds: Vec<RoundLog>,
    /// Learning curve of every agent, concatenated over rounds.
    pub curves: Vec<Vec<StepRecord>>,
}

impl CodebookRun {
    /// Cluster model with the sensing beams needed to classify new users.
    pub fn cluster_json(&self) -> Result<String> {
        let j = ClusterJson {
            n: self.model.clusters(),
            s: self.sensing.len(),
            r: self.sensing.bits(),
            sensing_beams: self
                .sensing
                .beams()
                .iter()
                .map(|b| b.indices().to_vec())
                .collect(),
            centroids: self.model.centroids.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    /// CSV with header `round,network,cluster,avg_gain`.
    pub fn assignment_csv(&self) -> String {
        let mut s = String::from("round,network,cluster,avg_gain\n");
        for r in self.rounds.iter().flat_map(|r| &r.assignment) {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.round, r.network, r.cluster, r.avg_gain
            ));
        }
        s
    }

    /// Best-so-far objective after each round.
    pub fn objective_log(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.best_objective).collect()
    }
}

#[derive(Serialize)]
struct ClusterJson {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "S")]
    s: usize,
    r: u32,
    sensing_beams: Vec<Vec<usize>>,
    centroids: Vec<Vec<f64>>,
}

/// Trains a quantized codebook of `config.beams` beams for `users`.
///
/// `eval` selects the users on which rounds are scored and the best
/// codebook is chosen; it defaults to `users`.
pub fn learn_codebook(
    config: &CodebookConfig,
    users: &ChannelSet,
    eval: Option<&ChannelSet>,
) -> Result<CodebookRun> {
    config.validate()?;
    let n = config.beams;
    let k = users.users();
    if k < n {
        return Err(Error::invalid(format!(
            "{k} users cannot fill {n} clusters"
        )));
    }
    let eval = eval.unwrap_or(users);
    if eval.antennas() != users.antennas() {
        return Err(Error::DimensionMismatch {
            expected: users.antennas(),
            actual: eval.antennas(),
        });
    }
    let m = users.antennas();
    let phases = PhaseSet::new(config.agent.bits)?;
    let sensing = SensingSet::random(
        config.sensing_beams,
        m,
        &phases,
        derive_seed(config.seed, 10),
    )?;

    // The clustering sees the users only through their sensing gains.
    let p = build_sensing_matrix(&sensing, users)?;
    let features = feature_vectors(p.view())?;
    let model = kmeans_fit_restarts(
        features.view(),
        n,
        derive_seed(config.seed, 11),
        config.kmeans_restarts,
    )?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 13));
    let mut upsilon: Vec<BeamVector> = (0..n)
        .map(|_| BeamVector::random(m, &phases, &mut init_rng))
        .collect();
    let mut subset_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 12));
    let mut agents: Vec<Option<BeamAgent>> = (0..n).map(|_| None).collect();
    let mut curves = vec![Vec::new(); n];
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut best: Option<(Codebook, f64)> = None;
    let noise = config.fine_tune_noise.unwrap_or_else(|| phases.step());

    for round in 0..config.rounds {
        let clusters = classify_round(config, &model, &features, users, &mut subset_rng)?;
        let z = cost_matrix(&upsilon, &clusters, &phases)?;
        let assignment = hungarian_assign(z.view())?;

        let tasks: Vec<_> = agents
            .iter_mut()
            .zip(&upsilon)
            .enumerate()
            .map(|(net, (agent, beam))| {
                (
                    net,
                    agent,
                    beam.clone(),
                    &clusters[assignment.permutation[net]],
                )
            })
            .collect();
        let results: Vec<Result<(BeamVector, f64, Vec<StepRecord>)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = tasks
                    .into_iter()
                    .map(|(net, agent, beam, cluster)| {
                        let phases = &phases;
                        scope.spawn(move || {
                            train_network(config, net, round, agent, beam, cluster, phases, noise)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("agent thread panicked"))
                    .collect()
            });

        let mut iterations = Vec::with_capacity(n);
        let mut records = Vec::with_capacity(n);
        for (net, res) in results.into_iter().enumerate() {
            let (beam, g, curve) = res?;
            upsilon[net] = beam;
            iterations.push(curve.len());
            curves[net].extend(curve);
            records.push(AssignmentRecord {
                round,
                network: net,
                cluster: assignment.permutation[net],
                avg_gain: g,
            });
        }

        let codebook = Codebook::quantized(&phases, upsilon.clone())?;
        let objective = codebook_objective(&codebook, eval)?.objective;
        if best.as_ref().is_none_or(|(_, b)| objective > *b) {
            best = Some((codebook, objective));
        }
        rounds.push(RoundLog {
            round,
            objective,
            best_objective: best.as_ref().expect("set above").1,
            iterations,
            assignment: records,
        });
    }

    Ok(CodebookRun {
        codebook: best.expect("at least one round").0,
        sensing,
        model,
        rounds,
        curves,
    })
}

/// Draws this round's users and splits them by nearest centroid.
fn classify_round(
    config: &CodebookConfig,
    model: &ClusterModel,
    features: &Array2<f64>,
    users: &ChannelSet,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ChannelSet>> {
    let k = users.users();
    let n = config.beams;
    let take = ((k as f64 * config.subset_fraction).round() as usize).clamp(n, k);
    let labels: Vec<usize> = features
        .axis_iter(Axis(1))
        .map(|col| model.classify(&col.to_vec()))
        .collect::<Result<_>>()?;
    for _ in 0..100 {
        let mut chosen = if take == k {
            (0..k).collect()
        } else {
            index::sample(rng, k, take).into_vec()
        };
        chosen.sort_unstable();
        let mut groups = vec![Vec::new(); n];
        for u in chosen {
            groups[labels[u]].push(u);
        }
        if groups.iter().all(|g| !g.is_empty()) {
            return Ok(groups.iter().map(|g| users.select(g)).collect());
        }
        if take == k {
            break;
        }
    }
    Err(Error::Empty(
        "a cluster received no users in this round".into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn train_network(
    config: &CodebookConfig,
    net: usize,
    round: usize,
    slot: &mut Option<BeamAgent>,
    beam: BeamVector,
    cluster: &ChannelSet,
    phases: &PhaseSet,
    noise: f64,
) -> Result<(BeamVector, f64, Vec<StepRecord>)> {
    let agent = match slot {
        Some(a) => a,
        None => slot.insert(BeamAgent::new(
            &config.agent_config(net),
            cluster.antennas(),
        )?),
    };
    // The first round starts from the agent's own random state.
    if round > 0 {
        agent.adopt(beam, cluster)?;
    }
    let env = GainOracle::new(cluster, phases)?;
    let window = config.saturation_window;
    let mut curve: Vec<StepRecord> = Vec::new();
    for t in 0..config.agent.iterations {
        curve.push(agent.step_with(&env)?);
        if t >= window {
            let then = curve[t - window].threshold;
            if agent.threshold() - then <= config.saturation_tolerance * then {
                break;
            }
        }
    }
    let seed = derive_seed(config.seed, 1_000_000 + (round * config.beams + net) as u64);
    let (tuned, g) = fine_tune(
        agent.best_beam(),
        cluster,
        phases,
        config.fine_tune_iterations,
        noise,
        seed,
    )?;
    agent.adopt(tuned.clone(), cluster)?;
    Ok((tuned, g, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayGeometry;
    use crate::beams::{average_gain, exhaustive_oracle};
    use crate::channel::{generate_scenario, random_channel, ScenarioSpec};

    fn random_set(m: usize, k: usize, seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelSet::new((0..k).map(|_| random_channel(m, &mut rng)).collect()).unwrap()
    }

    #[test]
    fn cost_matrix_matches_loops() {
        let phases = PhaseSet::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let beams: Vec<_> = (0..3)
            .map(|_| BeamVector::random(4, &phases, &mut rng))
            .collect();
        let clusters: Vec<_> = (0..3)
            .map(|c| random_set(4, c + 1, 10 + c as u64))
            .collect();
        let z = cost_matrix(&beams, &clusters, &phases).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let w = beams[i].realize(&phases).unwrap();
                assert!((z[[i, j]] - average_gain(&w, &clusters[j]).unwrap()).abs() < 1e-12);
            }
        }
        let same = vec![
            clusters[0].clone(),
            clusters[0].clone(),
            clusters[0].clone(),
        ];
        let z = cost_matrix(&beams, &same, &phases).unwrap();
        assert_eq!(z.column(0), z.column(2));
        assert!(cost_matrix(&beams[..2], &clusters, &phases).is_err());
    }

    #[test]
    fn fine_tune_never_loses_and_zero_noise_is_identity() {
        let phases = PhaseSet::new(3).unwrap();
        let set = random_set(6, 5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..10 {
            let b = BeamVector::random(6, &phases, &mut rng);
            let g0 = average_gain(&b.realize(&phases).unwrap(), &set).unwrap();
            let (t, g) = fine_tune(&b, &set, &phases, 200, 0.5, seed).unwrap();
            assert!(g >= g0);
            assert!((average_gain(&t.realize(&phases).unwrap(), &set).unwrap() - g).abs() < 1e-12);
            let (same, _) = fine_tune(&b, &set, &phases, 200, 0.0, seed).unwrap();
            assert_eq!(same, b);
        }
    }

    #[test]
    fn fine_tune_finds_small_optimum() {
        let phases = PhaseSet::new(2).unwrap();
        let mut hits = 0;
        for seed in 0..20 {
            let set = random_set(4, 1, 100 + seed);
            let (_, opt) = exhaustive_oracle(&set, &phases, 1 << 10).unwrap();
            let start = BeamVector::random(4, &phases, &mut ChaCha8Rng::seed_from_u64(seed));
            let (_, g) = fine_tune(&start, &set, &phases, 2000, phases.step(), seed).unwrap();
            if g >= opt * (1.0 - 1e-12) {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    fn quick_config(n: usize, rounds: usize) -> CodebookConfig {
        CodebookConfig {
            beams: n,
            sensing_beams: 8,
            rounds,
            saturation_window: 100,
            fine_tune_iterations: 200,
            agent: AgentConfig {
                bits: 2,
                iterations: 300,
                batch_size: 32,
                replay_capacity: 256,
                ..AgentConfig::default()
            },
            ..CodebookConfig::default()
        }
    }

    #[test]
    fn codebook_run_shapes_and_monotone_log() {
        let g = ArrayGeometry::ideal(4).unwrap();
        let spec = ScenarioSpec::los(24, vec![(20.0, 50.0), (120.0, 160.0)], 5);
        let (users, _) = generate_scenario(&g, &spec).unwrap().normalize().unwrap();
        let cfg = CodebookConfig {
            subset_fraction: 0.75,
            ..quick_config(2, 3)
        };
        let run = learn_codebook(&cfg, &users, None).unwrap();
        assert_eq!(run.codebook.len(), 2);
        assert_eq!(run.rounds.len(), 3);
        let log = run.objective_log();
        assert!(log.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(run.assignment_csv().lines().count(), 1 + 3 * 2);
        let mut labels = run.model.labels.clone();
        labels.sort();
        labels.dedup();
        assert_eq!(labels, vec![0, 1]);
        let best = codebook_objective(&run.codebook, &users).unwrap().objective;
        assert_eq!(best, *log.last().unwrap());
        let json: serde_json::Value = serde_json::from_str(&run.cluster_json().unwrap()).unwrap();
        assert_eq!(json["N"], 2);
        assert_eq!(json["S"], 8);
    }

    #[test]
    fn single_beam_codebook() {
        let users = random_set(3, 5, 9);
        let run = learn_codebook(&quick_config(1, 1), &users, None).unwrap();
        assert_eq!(run.codebook.len(), 1);
        assert_eq!(run.rounds[0].assignment[0].cluster, 0);
        let obj = codebook_objective(&run.codebook, &users).unwrap().objective;
        assert!((run.rounds[0].assignment[0].avg_gain - obj).abs() < 1e-12);
    }

    #[test]
    fn rejects_more_beams_than_users() {
        let users = random_set(3, 2, 9);
        assert!(learn_codebook(&quick_config(3, 1), &users, None).is_err());
    }

    #[test]
    fn deterministic() {
        let users = random_set(3, 12, 4);
        let a = learn_codebook(&quick_config(3, 2), &users, None).unwrap();
        let b = learn_codebook(&quick_config(3, 2), &users, None).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.assignment_csv(), b.assignment_csv());
        assert_eq!(a.curves, b.curves);
    }
}
