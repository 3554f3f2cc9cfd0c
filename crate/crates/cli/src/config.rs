//! Scenario configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symdyn_core::mppi::MppiConfig;
use symdyn_core::neural::{EnsembleConfig, TrainConfig};
use symdyn_core::pipeline::{BaseLearner, BaselineCombo, Task};
use symdyn_core::sim::{DisturbanceScenario, Env, TrackKind};
use symdyn_core::symreg::SrSearchConfig;
use symdyn_core::{ActionBounds, CostWeights, Platform};

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("config field `{field}`: {msg}"))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub platform: String,
    #[serde(default = "default_disturbance")]
    pub disturbance: String,
    #[serde(default)]
    pub tracks: Option<Vec<String>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub base: BaseSection,
    #[serde(default)]
    pub sr: SrSection,
    #[serde(default)]
    pub nn: NnSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub mppi: MppiSection,
    #[serde(default)]
    pub adapt: AdaptSection,
    #[serde(default)]
    pub coverage: CoverageSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub suite: SuiteSection,
}

fn default_disturbance() -> String {
    "none".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_max_steps() -> usize {
    symdyn_core::types::MAX_EPISODE_STEPS
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseSection {
    /// Base learners run by `train-base`: "sr", "nn" or both.
    pub learners: Vec<String>,
    pub max_episodes: usize,
    pub stop_on_plateau: bool,
}

impl Default for BaseSection {
    fn default() -> Self {
        Self { learners: vec!["sr".into()], max_episodes: 20, stop_on_plateau: true }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrSection {
    pub population: usize,
    pub islands: usize,
    pub generations: usize,
    pub iterations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub const_perturb_scale: f64,
    pub max_complexity: usize,
    pub parsimony: f64,
    pub tournament: usize,
    pub migration_interval: usize,
    pub max_fit_rows: usize,
    pub const_opt_per_generation: usize,
}

impl Default for SrSection {
    fn default() -> Self {
        let d = SrSearchConfig::default();
        Self {
            population: d.population,
            islands: d.islands,
            generations: d.generations,
            iterations: d.iterations,
            crossover_prob: d.crossover_prob,
            mutation_prob: d.mutation_prob,
            const_perturb_scale: d.const_perturb_scale,
            max_complexity: d.max_complexity,
            parsimony: d.parsimony,
            tournament: d.tournament,
            migration_interval: d.migration_interval,
            max_fit_rows: d.max_fit_rows,
            const_opt_per_generation: d.const_opt_per_generation,
        }
    }
}

impl SrSection {
    pub fn search(&self, seed: u64) -> SrSearchConfig {
        SrSearchConfig {
            population: self.population,
            islands: self.islands,
            generations: self.generations,
            iterations: self.iterations,
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            const_perturb_scale: self.const_perturb_scale,
            max_complexity: self.max_complexity,
            parsimony: self.parsimony,
            tournament: self.tournament,
            migration_interval: self.migration_interval,
            max_fit_rows: self.max_fit_rows,
            const_opt_per_generation: self.const_opt_per_generation,
            seed,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnSection {
    pub members: usize,
    pub hidden: Vec<usize>,
    pub predict_delta: bool,
}

impl Default for NnSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self { members: d.members, hidden: d.hidden, predict_delta: d.predict_delta }
    }
}

impl NnSection {
    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig { members: self.members, hidden: self.hidden.clone(), predict_delta: self.predict_delta }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self { epochs: d.epochs, batch_size: d.batch_size, learning_rate: d.learning_rate, patience: d.patience }
    }
}

impl TrainSection {
    pub fn train(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lambda,
            seed,
            patience: self.patience,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiSection {
    pub samples: Option<usize>,
    /// Planning horizon in seconds.
    pub horizon_s: Option<f64>,
    pub temperature: Option<f64>,
    pub noise_std: Option<Vec<f64>>,
    pub bounds_lo: Option<Vec<f64>>,
    pub bounds_hi: Option<Vec<f64>>,
    /// Position, orientation, velocity and angular-velocity weights.
    pub weights: Option<[f64; 4]>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptSection {
    pub budget: usize,
    pub lambda: f64,
    pub residual_hidden: Vec<usize>,
    pub sr_max_complexity: usize,
    pub early_stop: bool,
    pub combos: Vec<String>,
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self {
            budget: 10,
            lambda: 0.01,
            residual_hidden: vec![64, 64],
            sr_max_complexity: 30,
            early_stop: true,
            combos: BaselineCombo::ALL.iter().map(|c| c.name().to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageSection {
    pub trials: usize,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self { trials: 20 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Timed plan calls per model, after one warm-up call.
    pub calls: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { calls: 30 }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    /// Scenario subset for the sim2sim suites; empty means all.
    pub scenarios: Vec<String>,
}

/// A parsed and validated configuration.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    /// The file with every default filled in, echoed into reports.
    pub file: ConfigFile,
    pub platform: Platform,
    pub disturbance: DisturbanceScenario,
    pub tracks: Vec<TrackKind>,
    pub learners: Vec<String>,
    pub combos: Vec<BaselineCombo>,
    pub scenarios: Vec<DisturbanceScenario>,
    pub mppi: MppiConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(mut file: ConfigFile) -> Result<Self, ConfigError> {
        let platform: Platform = file.platform.parse().map_err(|e| field_err("platform", e))?;
        let disturbance: DisturbanceScenario = file.disturbance.parse().map_err(|e| field_err("disturbance", e))?;
        if !disturbance.applies_to(platform) {
            return Err(field_err("disturbance", format!("{disturbance} does not apply to {platform}")));
        }
        let tracks = match &file.tracks {
            Some(t) => t
                .iter()
                .map(|s| s.parse::<TrackKind>().map_err(|e| field_err("tracks", e)))
                .collect::<Result<Vec<_>, _>>()?,
            None => symdyn_core::pipeline::default_tasks(platform).iter().map(|t| t.track.kind).collect(),
        };
        if tracks.is_empty() {
            return Err(field_err("tracks", "at least one track is required"));
        }
        file.tracks = Some(tracks.iter().map(|t| t.name().to_string()).collect());
        if file.seeds.is_empty() {
            return Err(field_err("seeds", "at least one seed is required"));
        }
        if file.max_steps == 0 {
            return Err(field_err("max_steps", "must be at least 1"));
        }
        for l in &file.base.learners {
            if l != "sr" && l != "nn" {
                return Err(field_err("base.learners", format!("unknown learner `{l}` (expected sr or nn)")));
            }
        }
        if file.base.max_episodes == 0 {
            return Err(field_err("base.max_episodes", "must be at least 1"));
        }
        file.sr.search(0).validate().map_err(|e| field_err("sr", e))?;
        if file.nn.members == 0 || file.nn.hidden.contains(&0) {
            return Err(field_err("nn", "members and hidden widths must be positive"));
        }
        file.train.train(file.adapt.lambda, 0).validate().map_err(|e| field_err("train", e))?;
        if !(file.adapt.lambda >= 0.0 && file.adapt.lambda.is_finite()) {
            return Err(field_err("adapt.lambda", "must be a nonnegative number"));
        }
        if file.adapt.residual_hidden.contains(&0) {
            return Err(field_err("adapt.residual_hidden", "widths must be positive"));
        }
        if file.adapt.sr_max_complexity == 0 {
            return Err(field_err("adapt.sr_max_complexity", "must be at least 1"));
        }
        let combos = file
            .adapt
            .combos
            .iter()
            .map(|c| c.parse::<BaselineCombo>().map_err(|e| field_err("adapt.combos", e)))
            .collect::<Result<Vec<_>, _>>()?;
        if file.coverage.trials == 0 {
            return Err(field_err("coverage.trials", "must be at least 1"));
        }
        if file.bench.calls == 0 {
            return Err(field_err("bench.calls", "must be at least 1"));
        }
        let scenarios = file
            .suite
            .scenarios
            .iter()
            .map(|s| s.parse::<DisturbanceScenario>().map_err(|e| field_err("suite.scenarios", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let mppi = resolve_mppi(platform, &mut file.mppi)?;
        Ok(Self {
            learners: file.base.learners.clone(),
            file,
            platform,
            disturbance,
            tracks,
            combos,
            scenarios,
            mppi,
        })
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> Result<PathBuf, ConfigError> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| self.file.out.clone())
            .ok_or_else(|| field_err("out", "no output directory (set `out` or pass --out)"))?;
        std::fs::create_dir_all(&dir).map_err(|e| field_err("out", format!("{}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"").map_err(|e| field_err("out", format!("{} is not writable: {e}", dir.display())))?;
        let _ = std::fs::remove_file(probe);
        Ok(dir)
    }

    pub fn tasks(&self) -> Vec<Task> {
        self.tracks.iter().map(|k| Task::standard(self.platform, *k)).collect()
    }

    pub fn learner(&self, name: &str) -> BaseLearner {
        match name {
            "sr" => BaseLearner::Sr(self.file.sr.search(0)),
            _ => BaseLearner::Nn { arch: self.file.nn.ensemble(), train: self.file.train.train(self.file.adapt.lambda, 0) },
        }
    }

    pub fn env(&self) -> Env {
        Env::nominal(self.platform)
    }

    pub fn echo(&self) -> String {
        toml::to_string(&self.file).expect("config serializes")
    }
}

fn resolve_mppi(platform: Platform, m: &mut MppiSection) -> Result<MppiConfig, ConfigError> {
    let dt = Env::nominal(platform).dt();
    let mut cfg = MppiConfig::default_for(platform, dt);
    if let Some(n) = m.samples {
        cfg.samples = n;
    }
    if let Some(h) = m.horizon_s {
        if !(h > 0.0 && h.is_finite()) {
            return Err(field_err("mppi.horizon_s", "must be positive"));
        }
        cfg.horizon = ((h / dt).round() as usize).max(1);
    }
    if let Some(t) = m.temperature {
        cfg.temperature = t;
    }
    if let Some(n) = &m.noise_std {
        cfg.noise_std = n.clone();
    }
    if m.bounds_lo.is_some() || m.bounds_hi.is_some() {
        let lo = m.bounds_lo.clone().unwrap_or_else(|| cfg.bounds.lo.clone());
        let hi = m.bounds_hi.clone().unwrap_or_else(|| cfg.bounds.hi.clone());
        cfg.bounds = ActionBounds::new(lo, hi).map_err(|e| field_err("mppi.bounds_lo/bounds_hi", e))?;
    }
    if let Some(w) = m.weights {
        cfg.weights = CostWeights::new(w[0], w[1], w[2], w[3]).map_err(|e| field_err("mppi.weights", e))?;
    }
    cfg.validate().map_err(|e| field_err("mppi", e))?;
    m.samples = Some(cfg.samples);
    m.horizon_s = Some(cfg.horizon as f64 * dt);
    m.temperature = Some(cfg.temperature);
    m.noise_std = Some(cfg.noise_std.clone());
    m.bounds_lo = Some(cfg.bounds.lo.clone());
    m.bounds_hi = Some(cfg.bounds.hi.clone());
    let w = &cfg.weights;
    m.weights = Some([w.position, w.orientation, w.velocity, w.angular_velocity]);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ScenarioConfig::parse("platform = \"quadrotor\"\n").unwrap();
        assert_eq!(c.platform, Platform::Quadrotor);
        assert_eq!(c.tracks.len(), 3);
        assert_eq!(c.mppi.samples, 1024);
        assert_eq!(c.mppi.horizon, 40);
        assert_eq!(c.combos.len(), 4);
        let again = ScenarioConfig::parse(&c.echo()).unwrap();
        assert_eq!(again.echo(), c.echo());
    }

    #[test]
    fn errors_name_the_field() {
        let e = ScenarioConfig::parse("seeds = [1]\n").unwrap_err();
        assert!(e.0.contains("platform"), "{e}");
        let e = ScenarioConfig::parse("platform = \"boat\"\n").unwrap_err();
        assert!(e.0.contains("platform"), "{e}");
        let e = ScenarioConfig::parse("platform = \"racecar\"\ndisturbance = \"wind_weak\"\n").unwrap_err();
        assert!(e.0.contains("disturbance"), "{e}");
        let e = ScenarioConfig::parse("platform = \"racecar\"\n[mppi]\nnoise_std = [0.1]\n").unwrap_err();
        assert!(e.0.contains("mppi"), "{e}");
        let e = ScenarioConfig::parse("platform = \"racecar\"\n[sr]\npopulaton = 3\n").unwrap_err();
        assert!(e.0.contains("populaton"), "{e}");
        let e = ScenarioConfig::parse("platform = \"racecar\"\n[adapt]\ncombos = [\"sr_xx\"]\n").unwrap_err();
        assert!(e.0.contains("adapt.combos"), "{e}");
    }
}
