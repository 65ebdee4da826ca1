//! Config-driven experiment runner and baseline comparison.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    ArraySection, EvaluateSection, ExperimentConfig, PatternSection, ScenarioSection, Task,
};

use crate::agent::{curve_csv, train_beam_pattern};
use crate::array::ArrayGeometry;
use crate::beams::{
    angle_grid, beam_pattern, beamsteering_codebook, codebook_objective, mean_egc_bound,
    patterns_csv, Codebook,
};
use crate::channel::{generate_scenario, load_channels, ChannelSet};
use crate::codebook::learn_codebook;
use crate::error::{Error, Result};

/// One row of a baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub name: String,
    pub size: usize,
    pub objective: f64,
    /// `objective / mean EGC bound`.
    pub egc_ratio: f64,
}

/// Learned codebook against beamsteering codebooks of growing size and the
/// equal-gain-combining bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub egc_mean: f64,
    pub rows: Vec<BaselineRow>,
}

impl BaselineReport {
    pub fn learned(&self) -> &BaselineRow {
        &self.rows[0]
    }

    /// Beamsteering row of a given size, if present.
    pub fn beamsteering(&self, size: usize) -> Option<&BaselineRow> {
        self.rows
            .iter()
            .find(|r| r.name == "beamsteering" && r.size == size)
    }

    /// CSV with header `codebook,size,objective,egc_ratio`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("codebook,size,objective,egc_ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.name, r.size, r.objective, r.egc_ratio
            ));
        }
        s
    }
}

/// Beamsteering sizes `N, 2N, 4N, …` up to 32, always ending at 32.
fn baseline_sizes(n: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut s = n.max(1);
    while s < 32 {
        sizes.push(s);
        s *= 2;
    }
    sizes.push(32);
    sizes
}

/// Scores `codebook` and ideal-design unquantized beamsteering codebooks on
/// `set`, relative to the mean EGC bound.
pub fn compare_baselines(
    codebook: &Codebook,
    set: &ChannelSet,
    geometry: &ArrayGeometry,
) -> Result<BaselineReport> {
    let m = geometry.antennas();
    for got in [codebook.antennas(), set.antennas()] {
        if got != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: got,
            });
        }
    }
    let egc_mean = mean_egc_bound(set)?;
    let row = |name: &str, cb: &Codebook| -> Result<BaselineRow> {
        let objective = codebook_objective(cb, set)?.objective;
        Ok(BaselineRow {
            name: name.into(),
            size: cb.len(),
            objective,
            egc_ratio: objective / egc_mean,
        })
    };
    let mut rows = vec![row("learned", codebook)?];
    for size in baseline_sizes(codebook.len()) {
        rows.push(row("beamsteering", &beamsteering_codebook(m, size, None)?)?);
    }
    rows.push(BaselineRow {
        name: "egc".into(),
        size: set.users(),
        objective: egc_mean,
        egc_ratio: 1.0,
    });
    Ok(BaselineReport { egc_mean, rows })
}

/// Files written by [`run`], relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub report: Option<BaselineReport>,
}

struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push(PathBuf::from(name));
        Ok(())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    task: Task,
    users: usize,
    antennas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_gain: Option<f64>,
    objective: f64,
    egc_mean: f64,
    egc_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_objective_per_round: Option<&'a [f64]>,
}

/// Builds the channel set a config describes, along with the array it was
/// generated for.
pub fn load_scenario(config: &ExperimentConfig) -> Result<(ArrayGeometry, ChannelSet)> {
    let geometry = config.impairments().sample()?;
    let set = match &config.scenario.file {
        Some(path) => load_channels(path)?,
        None => generate_scenario(&geometry, &config.scenario_spec())?,
    };
    if set.antennas() != geometry.antennas() {
        return Err(Error::DimensionMismatch {
            expected: geometry.antennas(),
            actual: set.antennas(),
        });
    }
    let set = if config.scenario.normalize {
        set.normalize()?.0
    } else {
        set
    };
    Ok((geometry, set))
}

/// Executes `config.task`, writing artifacts into `out_dir`.
///
/// Every artifact is a deterministic function of the config, so two runs
/// with the same config produce identical files.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut out = Out {
        dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    let (geometry, set) = load_scenario(config)?;

    let mut report = None;
    match config.task {
        Task::GenerateScenario => {
            out.write("channels.bin", set.to_bytes())?;
            out.write("channels.json", set.to_json()?)?;
            out.write("geometry.json", geometry.to_json()?)?;
        }
        Task::LearnBeam => {
            let outcome = train_beam_pattern(&config.agent, &set, config.agent.iterations)?;
            let cb = Codebook::quantized(
                &crate::beams::PhaseSet::new(config.array.r)?,
                vec![outcome.best_beam],
            )?;
            out.write("curve.csv", curve_csv(&outcome.curve))?;
            let r = finish(
                config,
                &mut out,
                &cb,
                &set,
                &geometry,
                Some(outcome.best_gain),
                None,
            )?;
            report = Some(r);
        }
        Task::LearnCodebook => {
            let learned = learn_codebook(&config.codebook, &set, None)?;
            for (n, curve) in learned.curves.iter().enumerate() {
                out.write(&format!("curve_net{n}.csv"), curve_csv(curve))?;
            }
            out.write("assignments.csv", learned.assignment_csv())?;
            out.write("clusters.json", learned.cluster_json()?)?;
            let mut rounds = String::from("round,objective,best_objective\n");
            for r in &learned.rounds {
                rounds.push_str(&format!(
                    "{},{},{}\n",
                    r.round, r.objective, r.best_objective
                ));
            }
            out.write("rounds.csv", rounds)?;
            let log = learned.objective_log();
            let r = finish(
                config,
                &mut out,
                &learned.codebook,
                &set,
                &geometry,
                None,
                Some(&log),
            )?;
            report = Some(r);
        }
        Task::Evaluate => {
            let cb = read_codebook(config)?;
            let r = finish(config, &mut out, &cb, &set, &geometry, None, None)?;
            report = Some(r);
        }
        Task::ExportPatterns => {
            let cb = read_codebook(config)?;
            write_patterns(config, &mut out, &cb, &geometry)?;
        }
    }
    out.write("metadata.cfg", metadata(config)?)?;
    Ok(RunOutcome {
        artifacts: out.written,
        report,
    })
}

fn read_codebook(config: &ExperimentConfig) -> Result<Codebook> {
    let path = config
        .evaluate
        .codebook
        .as_ref()
        .ok_or_else(|| Error::Config("evaluate.codebook is not set".into()))?;
    let cb = Codebook::from_json(&fs::read_to_string(path)?)?;
    if cb.antennas() != config.array.m {
        return Err(Error::DimensionMismatch {
            expected: config.array.m,
            actual: cb.antennas(),
        });
    }
    Ok(cb)
}

fn write_patterns(
    config: &ExperimentConfig,
    out: &mut Out,
    cb: &Codebook,
    geometry: &ArrayGeometry,
) -> Result<()> {
    let grid = angle_grid(config.patterns.points);
    let ideal = ArrayGeometry::ideal(geometry.antennas())?;
    for (name, g) in [
        ("patterns_clean.csv", &ideal),
        ("patterns_corrupted.csv", geometry),
    ] {
        let patterns = cb
            .weights()
            .iter()
            .map(|w| beam_pattern(w, g, &grid))
            .collect::<Result<Vec<_>>>()?;
        out.write(name, patterns_csv(&grid, &patterns))?;
    }
    Ok(())
}

fn finish(
    config: &ExperimentConfig,
    out: &mut Out,
    cb: &Codebook,
    set: &ChannelSet,
    geometry: &ArrayGeometry,
    best_gain: Option<f64>,
    log: Option<&[f64]>,
) -> Result<BaselineReport> {
    out.write("codebook.json", cb.to_json()?)?;
    write_patterns(config, out, cb, geometry)?;
    let report = compare_baselines(cb, set, geometry)?;
    out.write("baselines.csv", report.to_csv())?;
    let learned = report.learned();
    let summary = Summary {
        task: config.task,
        users: set.users(),
        antennas: set.antennas(),
        best_gain,
        objective: learned.objective,
        egc_mean: report.egc_mean,
        egc_ratio: learned.egc_ratio,
        best_objective_per_round: log,
    };
    out.write("summary.json", serde_json::to_string_pretty(&summary)?)?;
    Ok(report)
}

fn metadata(config: &ExperimentConfig) -> Result<String> {
    Ok(format!(
        "# beamlearn {}\n# Resolved configuration; pass this file to --config to repeat the run.\n{}",
        env!("CARGO_PKG_VERSION"),
        config.to_flat()?
    ))
}

/// Process exit status for a run result: 0 on success, 2 for configuration
/// problems, 1 for anything that failed while running.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(Error::Config(_)) => 2,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::{egc_beam, PhaseSet};
    use crate::channel::ScenarioSpec;

    #[test]
    fn sizes_double_up_to_32() {
        assert_eq!(baseline_sizes(4), vec![4, 8, 16, 32]);
        assert_eq!(baseline_sizes(3), vec![3, 6, 12, 24, 32]);
        assert_eq!(baseline_sizes(32), vec![32]);
        assert_eq!(baseline_sizes(40), vec![32]);
    }

    #[test]
    fn egc_beam_scores_ratio_one() {
        let g = ArrayGeometry::ideal(6).unwrap();
        let set = generate_scenario(&g, &ScenarioSpec::los(1, vec![(40.0, 140.0)], 3)).unwrap();
        let cb = Codebook::unquantized(vec![egc_beam(set.channel(0)).unwrap()]).unwrap();
        let r = compare_baselines(&cb, &set, &g).unwrap();
        assert!((r.learned().egc_ratio - 1.0).abs() < 1e-12);
        assert!(r.rows.iter().all(|row| row.egc_ratio <= 1.0 + 1e-12));
    }

    #[test]
    fn steering_ratio_grows_with_grid_on_single_path_users() {
        let g = ArrayGeometry::ideal(8).unwrap();
        let spec = ScenarioSpec {
            paths: 1,
            ..ScenarioSpec::los(40, vec![(10.0, 170.0)], 4)
        };
        let set = generate_scenario(&g, &spec).unwrap();
        let cb = beamsteering_codebook(8, 2, None).unwrap();
        let r = compare_baselines(&cb, &set, &g).unwrap();
        let ratios: Vec<f64> = [2, 4, 8, 16, 32]
            .iter()
            .map(|&n| r.beamsteering(n).unwrap().egc_ratio)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(ratios[4] > 0.95, "{ratios:?}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = ArrayGeometry::ideal(4).unwrap();
        let set = generate_scenario(&g, &ScenarioSpec::los(2, vec![(40.0, 140.0)], 3)).unwrap();
        let p = PhaseSet::new(2).unwrap();
        let cb = Codebook::quantized(&p, vec![crate::beams::BeamVector::new(vec![0; 5])]).unwrap();
        assert!(compare_baselines(&cb, &set, &g).is_err());
    }
}
