use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agent::{derive_seed, AgentConfig};
use crate::array::ImpairmentSpec;
use crate::channel::{ScenarioKind, ScenarioSpec};
use crate::codebook::CodebookConfig;
use crate::error::{Error, Result};

/// What a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    GenerateScenario,
    LearnBeam,
    LearnCodebook,
    Evaluate,
    ExportPatterns,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    #[serde(rename = "M")]
    pub m: usize,
    pub r: u32,
    pub spacing: f64,
    pub sigma_d: f64,
    pub sigma_p: f64,
    pub seed: Option<u64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            m: 8,
            r: 3,
            spacing: 0.5,
            sigma_d: 0.0,
            sigma_p: 0.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub users: usize,
    pub paths: usize,
    /// LOS sectors in degrees, `[[lo, hi], ...]`.
    pub sectors: Vec<(f64, f64)>,
    pub weak_path_db: f64,
    /// NLOS reflector angles in degrees.
    pub reflectors: Vec<f64>,
    pub reflector_spread_deg: f64,
    /// Load channels from this file instead of generating them.
    pub file: Option<PathBuf>,
    /// Scale channels so the largest entry magnitude is 1.
    pub normalize: bool,
    pub seed: Option<u64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Los,
            users: 1,
            paths: 5,
            sectors: vec![(30.0, 150.0)],
            weak_path_db: -15.0,
            reflectors: vec![40.0, 100.0],
            reflector_spread_deg: 2.0,
            file: None,
            normalize: true,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Codebook JSON to evaluate or export.
    pub codebook: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternSection {
    /// Number of angles in the exported beam patterns.
    pub points: usize,
}

impl Default for PatternSection {
    fn default() -> Self {
        Self { points: 181 }
    }
}

/// A complete run description.
///
/// Written as flat `section.key = value` lines; see [`ExperimentConfig::parse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Master seed. Every subsystem seed left unset is derived from it.
    pub seed: u64,
    pub array: ArraySection,
    pub scenario: ScenarioSection,
    pub agent: AgentConfig,
    pub codebook: CodebookConfig,
    pub evaluate: EvaluateSection,
    pub patterns: PatternSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::LearnBeam,
            seed: 0,
            array: ArraySection::default(),
            scenario: ScenarioSection::default(),
            agent: AgentConfig::default(),
            codebook: CodebookConfig::default(),
            evaluate: EvaluateSection::default(),
            patterns: PatternSection::default(),
        }
    }
}

/// Named seed keys and the stream each one is derived on.
const SEED_STREAMS: [(&str, u64); 4] = [
    ("array.seed", 1),
    ("scenario.seed", 2),
    ("agent.seed", 3),
    ("codebook.seed", 4),
];

/// Splits `key = value` lines into a map. `#` starts a comment.
fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key}",
                n + 1
            )));
        }
    }
    Ok(map)
}

fn scalar(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn nest(map: &BTreeMap<String, String>) -> Result<Value> {
    let mut root = Map::new();
    for (key, value) in map {
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            node = entry
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("{key}: {part} is a value, not a section")))?;
        }
        let leaf = parts[parts.len() - 1];
        if node.insert(leaf.to_string(), scalar(value)).is_some() {
            return Err(Error::Config(format!("{key}: conflicting definitions")));
        }
    }
    Ok(Value::Object(root))
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::String(s)
            if !matches!(scalar(s), Value::String(_)) || s.contains('#') || s.trim() != s =>
        {
            out.push((prefix.to_string(), Value::String(s.clone()).to_string()));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

impl ExperimentConfig {
    /// Parses flat config text and resolves every default.
    ///
    /// Values are read as JSON when they parse as JSON and as bare strings
    /// otherwise, so `agent.gamma = 0.5`, `scenario.kind = nlos` and
    /// `scenario.sectors = [[30, 150]]` all work. `seed_override` replaces
    /// the master seed and discards explicitly set subsystem seeds.
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self> {
        Self::parse_for(text, seed_override, None)
    }

    /// Like [`parse`](Self::parse), with the task forced to `task` when given.
    pub fn parse_for(text: &str, seed_override: Option<u64>, task: Option<Task>) -> Result<Self> {
        let mut map = parse_lines(text)?;
        if let Some(task) = task {
            let name = serde_json::to_value(task)?;
            map.insert(
                "task".into(),
                name.as_str().expect("unit variant").to_string(),
            );
        }
        if let Some(seed) = seed_override {
            map.insert("seed".into(), seed.to_string());
            for (key, _) in SEED_STREAMS {
                map.remove(key);
            }
        }
        let master: u64 = match map.get("seed") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("seed must be an integer, got {v:?}")))?,
            None => 0,
        };
        for (key, stream) in SEED_STREAMS {
            map.entry(key.to_string())
                .or_insert_with(|| derive_seed(master, stream).to_string());
        }
        let r = map
            .get("array.r")
            .cloned()
            .unwrap_or_else(|| ArraySection::default().r.to_string());
        match map.get("agent.bits") {
            Some(b) if *b != r => {
                return Err(Error::Config(format!(
                    "agent.bits = {b} disagrees with array.r = {r}"
                )));
            }
            _ => {
                map.insert("agent.bits".into(), r);
            }
        }
        let value = nest(&map)?;
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolved(mut self) -> Self {
        self.agent = self.agent.resolved();
        self.codebook.agent = self.agent.clone();
        self.codebook
            .fine_tune_noise
            .get_or_insert(std::f64::consts::TAU / f64::from(1u32 << self.array.r.min(16)));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if self.array.m == 0 {
            return bad("array.M must be at least 1".into());
        }
        self.impairments()
            .sample()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.agent.validate()?;
        if matches!(self.task, Task::LearnCodebook) {
            self.codebook.validate()?;
        }
        if self.scenario.users == 0 {
            return bad("scenario.users must be at least 1".into());
        }
        if self.patterns.points == 0 {
            return bad("patterns.points must be at least 1".into());
        }
        if let Some(f) = &self.scenario.file {
            if !f.is_file() {
                return bad(format!("scenario.file {} does not exist", f.display()));
            }
        }
        match (&self.task, &self.evaluate.codebook) {
            (Task::Evaluate | Task::ExportPatterns, None) => {
                bad("evaluate.codebook is required for this task".into())
            }
            (_, Some(f)) if !f.is_file() => {
                bad(format!("evaluate.codebook {} does not exist", f.display()))
            }
            _ => Ok(()),
        }
    }

    pub fn impairments(&self) -> ImpairmentSpec {
        ImpairmentSpec {
            antennas: self.array.m,
            spacing: self.array.spacing,
            sigma_d: self.array.sigma_d,
            sigma_p: self.array.sigma_p,
            seed: self.array.seed.expect("resolved"),
        }
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        ScenarioSpec {
            kind: s.kind,
            users: s.users,
            seed: s.seed.expect("resolved"),
            paths: s.paths,
            sectors: s.sectors.clone(),
            weak_path_db: s.weak_path_db,
            reflectors: s.reflectors.clone(),
            reflector_spread_deg: s.reflector_spread_deg,
        }
    }

    /// All resolved values in the flat format, one `key = value` per line.
    /// Parsing the result gives back an equal config.
    pub fn to_flat(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        // The agent settings appear once, under `agent`.
        if let Some(cb) = value.get_mut("codebook").and_then(Value::as_object_mut) {
            cb.remove("agent");
        }
        let mut pairs = Vec::new();
        flatten("", &value, &mut pairs);
        Ok(pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect())
    }
}
