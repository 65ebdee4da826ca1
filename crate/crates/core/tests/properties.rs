use std::f64::consts::PI;

use beamlearn::agent::{
    AgentConfig, BeamAgent, NoiseSchedule, ReplayBuffer, ThresholdReward, Transition,
};
use beamlearn::array::ImpairmentSpec;
use beamlearn::beams::{
    average_gain, beamsteering_codebook, codebook_objective, egc_upper_bound, exhaustive_oracle,
    gain, snr, BeamVector, Codebook, PhaseSet,
};
use beamlearn::channel::{random_channel, synthesize_channel, ChannelSet, PathComponent};
use beamlearn::codebook::{
    build_sensing_matrix, feature_vectors, fine_tune, hungarian_assign, kmeans_fit, SensingSet,
};
use beamlearn::neural::{soft_update, Mlp};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn users(m: usize, k: usize, seed: u64) -> ChannelSet {
    let mut r = rng(seed);
    ChannelSet::new((0..k).map(|_| random_channel(m, &mut r)).collect()).unwrap()
}

fn impaired(m: usize, sigma_d: f64, sigma_p: f64, seed: u64) -> ImpairmentSpec {
    ImpairmentSpec {
        antennas: m,
        spacing: 0.5,
        sigma_d,
        sigma_p,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_response_has_unit_modulus(
        m in 1usize..16, sd in 0.0..0.15f64, sp in 0.0..1.0f64, seed: u64, phi in 0.0..PI,
    ) {
        let g = impaired(m, sd, sp, seed).sample().unwrap();
        for a in g.array_response(phi) {
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geometry_sampling_depends_only_on_seed(m in 1usize..12, sd in 0.0..0.15f64, sp in 0.0..1.0f64, seed: u64) {
        let spec = impaired(m, sd, sp, seed);
        prop_assert_eq!(spec.sample().unwrap(), spec.sample().unwrap());
    }

    #[test]
    fn synthesis_is_linear_in_path_gains(
        m in 1usize..10, seed: u64, re in -3.0..3.0f64, im in -3.0..3.0f64, paths in 1usize..6,
    ) {
        let g = impaired(m, 0.05, 0.2, seed).sample().unwrap();
        let mut r = rng(seed ^ 1);
        let base: Vec<PathComponent> = (0..paths)
            .map(|_| PathComponent {
                gain: Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
                aoa: r.random_range(0.0..PI),
            })
            .collect();
        let c = Complex64::new(re, im);
        let scaled: Vec<PathComponent> = base.iter().map(|p| PathComponent { gain: p.gain * c, ..*p }).collect();
        let h = synthesize_channel(&g, &base).unwrap();
        let hc = synthesize_channel(&g, &scaled).unwrap();
        for (a, b) in h.iter().zip(&hc) {
            prop_assert!((a * c - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn normalization_is_idempotent_and_keeps_gain_ratios(m in 1usize..8, k in 2usize..8, seed: u64) {
        let set = users(m, k, seed);
        let (once, _) = set.normalize().unwrap();
        let (twice, delta) = once.normalize().unwrap();
        prop_assert!((delta - 1.0).abs() < 1e-12);
        prop_assert!((once.max_magnitude() - 1.0).abs() < 1e-12);
        for (a, b) in once.channels().iter().zip(twice.channels()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
        let p = PhaseSet::new(2).unwrap();
        let w = BeamVector::random(m, &p, &mut rng(seed ^ 7)).realize(&p).unwrap();
        let raw = [gain(&w, set.channel(0)).unwrap(), gain(&w, set.channel(1)).unwrap()];
        let norm = [gain(&w, once.channel(0)).unwrap(), gain(&w, once.channel(1)).unwrap()];
        prop_assume!(raw[1] > 1e-9 && norm[1] > 1e-12);
        prop_assert!(((raw[0] / raw[1]) / (norm[0] / norm[1]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gain_never_exceeds_equal_gain_bound(m in 1usize..17, bits in 1u32..5, seed: u64) {
        let mut r = rng(seed);
        let p = PhaseSet::new(bits).unwrap();
        let h = random_channel(m, &mut r);
        let w = BeamVector::random(m, &p, &mut r).realize(&p).unwrap();
        prop_assert!(gain(&w, &h).unwrap() <= egc_upper_bound(&h).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn snr_is_scaled_gain(m in 1usize..10, seed: u64, rho in 1e-3..1e3f64) {
        let mut r = rng(seed);
        let p = PhaseSet::new(3).unwrap();
        let h = random_channel(m, &mut r);
        let w = BeamVector::random(m, &p, &mut r).realize(&p).unwrap();
        let g = gain(&w, &h).unwrap();
        prop_assert!((snr(&w, &h, rho).unwrap() / rho - g).abs() <= 4.0 * f64::EPSILON * g);
    }

    #[test]
    fn adding_a_beam_never_lowers_the_objective(m in 1usize..8, n in 1usize..6, seed: u64) {
        let mut r = rng(seed);
        let p = PhaseSet::new(2).unwrap();
        let set = users(m, 10, seed ^ 3);
        let beams: Vec<BeamVector> = (0..=n).map(|_| BeamVector::random(m, &p, &mut r)).collect();
        let small = Codebook::quantized(&p, beams[..n].to_vec()).unwrap();
        let large = Codebook::quantized(&p, beams).unwrap();
        prop_assert!(
            codebook_objective(&large, &set).unwrap().objective
                >= codebook_objective(&small, &set).unwrap().objective
        );
    }

    #[test]
    fn soft_update_contracts_toward_source(seed: u64, tau in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let source = Mlp::actor(3, &mut r).unwrap();
        let mut target = Mlp::actor(3, &mut r).unwrap();
        let before = target.parameters();
        soft_update(&mut target, &source, tau).unwrap();
        for ((old, new), s) in before.iter().zip(target.parameters()).zip(source.parameters()) {
            let expected = (1.0 - tau) * (old - s);
            prop_assert!(((new - s) - expected).abs() <= 1e-12 * (1.0 + old.abs() + s.abs()));
        }
    }

    #[test]
    fn actor_outputs_stay_inside_the_open_phase_interval(m in 1usize..9, seed: u64, scale in 0.1..1e4f64) {
        let mut r = rng(seed);
        let actor = Mlp::actor(m, &mut r).unwrap();
        let x = Array2::from_shape_simple_fn((8, m), || r.random_range(-scale..scale));
        for v in actor.forward(x.view()).unwrap() {
            prop_assert!(v > -PI && v < PI);
        }
    }

    #[test]
    fn threshold_tracks_the_running_maximum(gains in prop::collection::vec(0.0..10.0f64, 1..100)) {
        let mut r = ThresholdReward::new();
        let mut best = 0.0f64;
        for g in gains {
            let before = r.threshold;
            r.score(g).unwrap();
            best = best.max(g);
            prop_assert!(r.threshold >= before);
            prop_assert_eq!(r.threshold, best);
        }
    }

    #[test]
    fn noise_schedule_is_nonincreasing(start in 0.01..3.0f64, frac in 0.01..1.0f64, horizon in 0usize..500) {
        let s = NoiseSchedule { start, end: start * frac, horizon };
        let mut prev = f64::INFINITY;
        for t in 0..horizon + 10 {
            let v = s.sigma(t);
            prop_assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn replay_buffer_is_bounded_and_drops_oldest(capacity in 1usize..64, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(capacity).unwrap();
        for i in 0..pushes {
            buf.push(Transition {
                state: BeamVector::new(vec![i]),
                action: BeamVector::new(vec![i + 1]),
                reward: 0,
            });
            prop_assert!(buf.len() <= capacity);
        }
        let oldest_kept = pushes.saturating_sub(capacity);
        for t in buf.iter() {
            prop_assert!(t.state.indices()[0] >= oldest_kept);
        }
    }

    #[test]
    fn feature_columns_ignore_user_scaling(seed: u64, re in -5.0..5.0f64, im in -5.0..5.0f64) {
        prop_assume!(Complex64::new(re, im).norm() > 1e-3);
        let c = Complex64::new(re, im);
        let p = PhaseSet::new(2).unwrap();
        let set = users(4, 6, seed);
        let scaled = ChannelSet::new(
            set.channels().iter().map(|h| h.iter().map(|v| v * c).collect()).collect(),
        )
        .unwrap();
        let sensing = SensingSet::random(5, 4, &p, seed).unwrap();
        let a = feature_vectors(build_sensing_matrix(&sensing, &set).unwrap().view()).unwrap();
        let b = feature_vectors(build_sensing_matrix(&sensing, &scaled).unwrap().view()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn kmeans_labels_partition_the_points(dim in 1usize..5, k in 1usize..30, n in 1usize..6, seed: u64) {
        prop_assume!(n <= k);
        let mut r = rng(seed);
        let pts = Array2::from_shape_simple_fn((dim, k), || r.random_range(-1.0..1.0));
        let model = kmeans_fit(pts.view(), n, seed).unwrap();
        prop_assert_eq!(model.labels.len(), k);
        let mut seen = vec![0; k];
        for members in model.members() {
            prop_assert!(!members.is_empty());
            for i in members {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn hungarian_returns_a_permutation(n in 1usize..8, seed: u64) {
        let mut r = rng(seed);
        let z = Array2::from_shape_simple_fn((n, n), || f64::from(r.random_range(0..5)));
        let a = hungarian_assign(z.view()).unwrap();
        let mut p = a.permutation.clone();
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_dominates_sampled_and_steering_beams(m in 1usize..5, seed: u64) {
        let p = PhaseSet::new(2).unwrap();
        let set = users(m, 3, seed);
        let (_, best) = exhaustive_oracle(&set, &p, 1 << 20).unwrap();
        let mut r = rng(seed ^ 9);
        for _ in 0..1000 {
            let w = BeamVector::random(m, &p, &mut r).realize(&p).unwrap();
            prop_assert!(average_gain(&w, &set).unwrap() <= best * (1.0 + 1e-12));
        }
        let steer = beamsteering_codebook(m, 16, Some(&p)).unwrap();
        for w in steer.weights() {
            prop_assert!(average_gain(w, &set).unwrap() <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fine_tune_never_lowers_average_gain(m in 2usize..8, seed: u64, noise in 0.0..2.0f64) {
        let p = PhaseSet::new(3).unwrap();
        let cluster = users(m, 5, seed);
        let start = BeamVector::random(m, &p, &mut rng(seed ^ 5));
        let before = average_gain(&start.realize(&p).unwrap(), &cluster).unwrap();
        let (tuned, after) = fine_tune(&start, &cluster, &p, 50, noise, seed).unwrap();
        prop_assert!(after >= before);
        prop_assert!((average_gain(&tuned.realize(&p).unwrap(), &cluster).unwrap() - after).abs() < 1e-12);
    }

    #[test]
    fn replayed_transitions_chain_state_to_action(seed: u64, m in 1usize..5) {
        let cfg = AgentConfig {
            bits: 2,
            batch_size: 8,
            replay_capacity: 32,
            train_every: 4,
            seed,
            ..AgentConfig::default()
        };
        let set = users(m, 2, seed);
        let mut agent = BeamAgent::new(&cfg, m).unwrap();
        let curve = agent.run(&set, 60).unwrap();
        let stored: Vec<&Transition> = agent.buffer().iter().collect();
        for pair in stored.windows(2) {
            prop_assert_eq!(&pair[1].state, pair[0].next_state());
        }
        let mut best = 0.0f64;
        for rec in &curve {
            prop_assert!(rec.gain.is_finite());
            best = best.max(rec.gain);
            prop_assert_eq!(rec.threshold, best);
        }
        prop_assert_eq!(agent.best_gain(), best);
    }
}
