use std::fs;
use std::path::Path;
use std::process::Command;

use beamlearn::beams::{average_gain, codebook_objective, Codebook};
use beamlearn::experiment::{load_scenario, ExperimentConfig};

const SMALL: &str = "\
array.M = 4
array.r = 2
scenario.users = 6
agent.iterations = 300
agent.batch_size = 32
agent.replay_capacity = 256
codebook.N = 2
codebook.S = 6
codebook.saturation_window = 100
codebook.fine_tune_iterations = 100
patterns.points = 37
";

fn beamlearn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_beamlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(task: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        task,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = beamlearn(&args);
    assert!(
        o.status.success(),
        "{task} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn last_threshold(curve: &str) -> f64 {
    curve
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn learn_beam_artifacts_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    run_ok("learn-beam", &cfg, &out, &[]);
    for f in [
        "curve.csv",
        "codebook.json",
        "patterns_clean.csv",
        "patterns_corrupted.csv",
        "baselines.csv",
        "summary.json",
        "metadata.cfg",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert!(curve.starts_with("iter,gain,threshold,reward\n"));
    assert_eq!(curve.lines().count(), 301);

    let cb = Codebook::from_json(&fs::read_to_string(out.join("codebook.json")).unwrap()).unwrap();
    let config =
        ExperimentConfig::parse(&fs::read_to_string(out.join("metadata.cfg")).unwrap(), None)
            .unwrap();
    let (_, set) = load_scenario(&config).unwrap();
    let regained = average_gain(&cb.weights()[0], &set).unwrap();
    let best = last_threshold(&curve);
    assert!(
        (regained - best).abs() <= 1e-12 * best,
        "{regained} vs {best}"
    );

    let patterns = fs::read_to_string(out.join("patterns_clean.csv")).unwrap();
    assert!(patterns.starts_with("angle_deg,beam_0\n"));
    assert_eq!(patterns.lines().count(), 38);
    let table = fs::read_to_string(out.join("baselines.csv")).unwrap();
    assert!(table.starts_with("codebook,size,objective,egc_ratio\nlearned,1,"));
    assert!(table.contains("\nbeamsteering,32,"));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("learn-codebook", &cfg, &a, &["--seed", "5"]);
    run_ok("learn-codebook", &cfg, &b, &["--seed", "5"]);
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }

    // Re-running the recorded metadata reproduces the outputs as well.
    let c = dir.path().join("c");
    run_ok("learn-codebook", &a.join("metadata.cfg"), &c, &[]);
    for name in [
        "codebook.json",
        "assignments.csv",
        "clusters.json",
        "baselines.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(c.join(name)).unwrap(),
            "{name}"
        );
    }
    let other = dir.path().join("d");
    run_ok("learn-codebook", &cfg, &other, &["--seed", "6"]);
    assert_ne!(
        fs::read(a.join("curve_net0.csv")).unwrap(),
        fs::read(other.join("curve_net0.csv")).unwrap()
    );
}

#[test]
fn evaluate_reads_a_saved_codebook_without_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let trained = dir.path().join("trained");
    run_ok("learn-codebook", &cfg, &trained, &[]);
    let cb_path = trained.join("codebook.json");
    let eval_cfg = write_config(
        dir.path(),
        &format!("{SMALL}evaluate.codebook = {}\n", cb_path.display()),
    );
    let eval = dir.path().join("eval");
    run_ok("evaluate", &eval_cfg, &eval, &[]);
    assert!(!eval.join("curve.csv").exists());
    assert!(!eval.join("curve_net0.csv").exists());

    let config = ExperimentConfig::parse(&fs::read_to_string(&eval_cfg).unwrap(), None).unwrap();
    let (_, set) = load_scenario(&config).unwrap();
    let cb = Codebook::from_json(&fs::read_to_string(&cb_path).unwrap()).unwrap();
    let direct = codebook_objective(&cb, &set).unwrap().objective;
    let table = fs::read_to_string(eval.join("baselines.csv")).unwrap();
    let learned: f64 = table
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(learned, direct);

    let exported = dir.path().join("patterns");
    run_ok("export-patterns", &eval_cfg, &exported, &[]);
    let header = fs::read_to_string(exported.join("patterns_corrupted.csv")).unwrap();
    assert!(header.starts_with("angle_deg,beam_0,beam_1\n"));
}

#[test]
fn generated_channels_can_be_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let gen = dir.path().join("gen");
    run_ok("generate-scenario", &cfg, &gen, &[]);
    let file_cfg = write_config(
        dir.path(),
        &format!(
            "{SMALL}scenario.file = {}\n",
            gen.join("channels.bin").display()
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("learn-beam", &cfg, &a, &[]);
    run_ok("learn-beam", &file_cfg, &b, &[]);
    assert_eq!(
        fs::read(a.join("curve.csv")).unwrap(),
        fs::read(b.join("curve.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "agent.gama = 0.1\n");
    let o = beamlearn(&[
        "learn-beam",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gama"));

    let o = beamlearn(&["evaluate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    // A well-formed codebook for the wrong array size fails at run time.
    let cb = dir.path().join("cb.json");
    fs::write(&cb, r#"{"M": 3, "r": 2, "beams": [[0, 1, 2]]}"#).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}evaluate.codebook = {}\n", cb.display()),
    );
    let o = beamlearn(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
