//! Multi-seed experiment batches with resumable cells.
//!
//! Each cell writes into its own directory and leaves a `done` marker;
//! reruns skip finished cells and only redo the aggregation.

use std::path::{Path, PathBuf};

use symdyn_core::mppi::MppiConfig;
use symdyn_core::neural::{train_ensemble, BaseModel};
use symdyn_core::pipeline::{
    carry_forward, collect_expert_dataset, coverage_train_task, episodes_to_reach, ood_coverage_eval,
    scenario_task, stage1_train_base, stage3_adapt, AdaptHistory, CoverageSplit, Stage1Config,
};
use symdyn_core::sim::{apply_disturbance, DisturbanceScenario};
use symdyn_core::{Error, Platform};

use crate::commands::{
    adapt_config, coverage_csv, curve_csv, load_base, load_dataset, parse_curve, save_base, save_dataset, stage1_config,
    COVERAGE_HEADER,
};
use crate::config::ScenarioConfig;
use crate::report::{csv_rows, mean_std, read_file, rel, write_file, AdaptSummary, CoverageSummary, CurveSummary, RunReport};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Sim2SimQuad,
    Sim2SimCar,
    Coverage,
    Efficiency,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "sim2sim-quad" => Ok(Suite::Sim2SimQuad),
            "sim2sim-car" => Ok(Suite::Sim2SimCar),
            "coverage" => Ok(Suite::Coverage),
            "efficiency" => Ok(Suite::Efficiency),
            _ => Err(CliError::Config(format!(
                "unknown suite `{s}` (expected sim2sim-quad, sim2sim-car, coverage or efficiency)"
            ))),
        }
    }
}

/// Default scenario list of the sim2sim suites.
pub fn default_scenarios(platform: Platform) -> Vec<DisturbanceScenario> {
    use DisturbanceScenario::*;
    match platform {
        Platform::Quadrotor => vec![MassPlus11_1, MassPlus25_9, ComOffsetX, WindWeak, WindStrong],
        Platform::Racecar => vec![LowFriction, SteeringOffset, SpeedX4, ReverseTrack],
    }
}

/// Ground-truth MPPI episodes used to train ensemble bases for adaptation.
pub const NN_BASE_EXPERT_EPISODES: usize = 20;

pub fn run_suite(suite: Suite, cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let want = match suite {
        Suite::Sim2SimQuad => Some(Platform::Quadrotor),
        Suite::Sim2SimCar => Some(Platform::Racecar),
        _ => None,
    };
    if let Some(p) = want {
        if cfg.platform != p {
            return Err(CliError::Config(format!("field `platform`: this suite needs {p}, config has {}", cfg.platform)));
        }
    }
    match suite {
        Suite::Sim2SimQuad | Suite::Sim2SimCar => sim2sim(cfg, seeds, out),
        Suite::Coverage => coverage(cfg, seeds, out),
        Suite::Efficiency => efficiency(cfg, seeds, out),
    }
}

fn done_marker(dir: &Path) -> PathBuf {
    dir.join("done")
}

fn is_done(dir: &Path) -> bool {
    done_marker(dir).exists()
}

fn mark_done(dir: &Path) -> Result<(), CliError> {
    write_file(&done_marker(dir), "")
}

/// Stage-1 symbolic base for a seed, shared by the suites that need one.
pub struct SeedBase {
    pub dir: PathBuf,
    pub model: BaseModel,
    pub curve_csv: PathBuf,
}

/// Fits (or reloads) the symbolic base of `seed` on the configured tasks.
pub fn ensure_sr_base(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<SeedBase, CliError> {
    let dir = out.join("bases").join(format!("seed{seed}"));
    let model_path = dir.join("sr.model");
    let curve_path = dir.join("curve_sr.csv");
    if !is_done(&dir) {
        let r = stage1_train_base(&cfg.env(), &cfg.learner("sr"), &stage1_config(cfg, cfg.tasks(), seed))?;
        save_base(&model_path, &r.model)?;
        write_file(&curve_path, &curve_csv(&r.curve))?;
        save_dataset(&dir.join("data_sr.csv"), &r.dataset)?;
        mark_done(&dir)?;
    }
    Ok(SeedBase { dir, model: load_base(&model_path)?, curve_csv: curve_path })
}

/// Ensemble base for adaptation baselines, trained on ground-truth MPPI
/// episodes of the configured tasks.
pub fn ensure_nn_base(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<BaseModel, CliError> {
    let dir = out.join("bases").join(format!("seed{seed}"));
    let path = dir.join("nn.model");
    if !path.exists() {
        let mppi = MppiConfig { seed, ..cfg.mppi.clone() };
        let data = collect_expert_dataset(&cfg.env(), &cfg.tasks(), NN_BASE_EXPERT_EPISODES, &mppi, cfg.file.max_steps, seed)?;
        let model = train_ensemble(&data, &cfg.file.nn.ensemble(), &cfg.file.train.train(cfg.file.adapt.lambda, seed))?;
        save_dataset(&dir.join("data_nn.csv"), &data)?;
        save_base(&path, &BaseModel::Nn(model))?;
    }
    load_base(&path)
}

fn curve_summary_from_csv(learner: &str, seed: u64, out: &Path, path: &Path, plateau: Option<usize>) -> Result<CurveSummary, CliError> {
    let curve = parse_curve(&read_file(path)?)?;
    Ok(CurveSummary {
        learner: learner.to_string(),
        seed,
        csv: rel(out, path),
        episodes: curve.len(),
        plateau,
        final_avg_pos_err: curve.last().map_or(f64::NAN, |c| c.avg_pos_err),
    })
}

/// Cost curves of one cell: `None` when the zero-shot episode crashed.
fn read_history(path: &Path) -> Result<Option<AdaptHistory>, CliError> {
    if path.with_extension("failed").exists() {
        return Ok(None);
    }
    let text = read_file(path)?;
    AdaptHistory::from_csv(&text).map(Some).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

pub const SUMMARY_HEADER: &str = "scenario,combo,trial,mean_cost,std_cost,seeds";
pub const AUC_HEADER: &str = "scenario,combo,seeds,failed_seeds,zero_shot_mean,best_mean,auc,reduction";

/// Aggregate of one (scenario, combo) pair over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct ComboAggregate {
    pub scenario: String,
    pub combo: String,
    /// Per-trial mean cost over completed seeds, padded to budget + 1.
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    pub seeds: usize,
    pub failed_seeds: usize,
}

impl ComboAggregate {
    /// Mean of the mean cost curve over all trials; infinite when any seed
    /// failed its zero-shot episode.
    pub fn auc(&self) -> f64 {
        if self.failed_seeds > 0 || self.mean_curve.is_empty() {
            return f64::INFINITY;
        }
        self.mean_curve.iter().sum::<f64>() / self.mean_curve.len() as f64
    }

    pub fn zero_shot(&self) -> f64 {
        self.mean_curve.first().copied().unwrap_or(f64::NAN)
    }

    /// Lowest mean cost after at least one adaptation trajectory.
    pub fn best_adapted(&self) -> f64 {
        self.mean_curve.iter().skip(1).copied().fold(f64::INFINITY, f64::min)
    }

    /// Relative cost reduction of the best adapted trial over zero-shot.
    pub fn reduction(&self) -> f64 {
        if self.failed_seeds > 0 {
            return f64::NAN;
        }
        1.0 - self.best_adapted() / self.zero_shot()
    }
}

pub fn aggregate(scenario: &str, combo: &str, histories: &[Option<AdaptHistory>], len: usize) -> ComboAggregate {
    let curves: Vec<Vec<f64>> = histories.iter().flatten().map(|h| carry_forward(&h.costs(), len)).collect();
    let failed = histories.iter().filter(|h| h.is_none()).count();
    let mut mean_curve = Vec::new();
    let mut std_curve = Vec::new();
    if !curves.is_empty() {
        for t in 0..len {
            let col: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            let (m, s) = mean_std(&col);
            mean_curve.push(m);
            std_curve.push(s);
        }
    }
    ComboAggregate {
        scenario: scenario.to_string(),
        combo: combo.to_string(),
        mean_curve,
        std_curve,
        seeds: curves.len(),
        failed_seeds: failed,
    }
}

/// Reads the aggregate table written by a sim2sim suite.
pub fn read_auc_table(path: &Path) -> Result<Vec<(String, String, f64, f64)>, CliError> {
    csv_rows(&read_file(path)?, AUC_HEADER)?
        .into_iter()
        .map(|r| {
            let bad = || CliError::Artifact(format!("bad aggregate row {r:?}"));
            if r.len() != 8 {
                return Err(bad());
            }
            Ok((r[0].clone(), r[1].clone(), r[6].parse().map_err(|_| bad())?, r[7].parse().map_err(|_| bad())?))
        })
        .collect()
}

fn sim2sim(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("suite", cfg.echo());
    let scenarios = if cfg.scenarios.is_empty() { default_scenarios(cfg.platform) } else { cfg.scenarios.clone() };
    if let Some(d) = scenarios.iter().find(|d| !d.applies_to(cfg.platform)) {
        return Err(CliError::Config(format!("field `suite.scenarios`: {d} does not apply to {}", cfg.platform)));
    }
    let budget = cfg.file.adapt.budget;
    for &seed in seeds {
        let sr = ensure_sr_base(cfg, seed, out)?;
        let nn = if cfg.combos.iter().any(|c| !c.sr_base()) { Some(ensure_nn_base(cfg, seed, out)?) } else { None };
        let plateau = symdyn_core::pipeline::plateau_index(
            &parse_curve(&read_file(&sr.curve_csv)?)?.iter().map(|c| c.avg_pos_err).collect::<Vec<_>>(),
        )
        .map(|i| i + 1);
        report.curves.push(curve_summary_from_csv("sr", seed, out, &sr.curve_csv, plateau)?);
        for &d in &scenarios {
            let env = apply_disturbance(&cfg.env(), d)?;
            let cell = out.join(d.name()).join(format!("seed{seed}"));
            for &combo in &cfg.combos {
                let csv = cell.join(format!("{combo}.csv"));
                if csv.exists() || csv.with_extension("failed").exists() {
                    continue;
                }
                let base = if combo.sr_base() { &sr.model } else { nn.as_ref().expect("trained above") };
                let acfg = adapt_config(cfg, scenario_task(cfg.platform, d), budget, seed);
                match stage3_adapt(base, combo, &env, &acfg) {
                    Ok(r) => {
                        write_file(&cell.join(format!("residual_{combo}.model")), &r.model.residual.to_text())?;
                        write_file(&csv, &r.history.to_csv())?;
                    }
                    Err(Error::Scenario(msg)) => write_file(&csv.with_extension("failed"), &format!("{msg}\n"))?,
                    Err(e) => return Err(e.into()),
                }
            }
            mark_done(&cell)?;
        }
    }
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut auc = format!("{AUC_HEADER}\n");
    for &d in &scenarios {
        for &combo in &cfg.combos {
            let mut hs = Vec::new();
            for &seed in seeds {
                let csv = out.join(d.name()).join(format!("seed{seed}")).join(format!("{combo}.csv"));
                let h = read_history(&csv)?;
                if let Some(h) = &h {
                    let costs = h.costs();
                    report.adaptations.push(AdaptSummary {
                        scenario: d.name().to_string(),
                        combo: combo.name().to_string(),
                        seed,
                        csv: rel(out, &csv),
                        trials: costs.len(),
                        zero_shot_cost: costs[0],
                        best_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
                        final_cost: *costs.last().unwrap(),
                    });
                }
                hs.push(h);
            }
            let agg = aggregate(d.name(), combo.name(), &hs, budget + 1);
            for (t, (m, s)) in agg.mean_curve.iter().zip(&agg.std_curve).enumerate() {
                summary.push_str(&format!("{},{},{t},{m:.9e},{s:.9e},{}\n", d.name(), combo.name(), agg.seeds));
            }
            auc.push_str(&format!(
                "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                d.name(),
                combo.name(),
                agg.seeds,
                agg.failed_seeds,
                agg.zero_shot(),
                agg.best_adapted(),
                agg.auc(),
                agg.reduction()
            ));
        }
    }
    write_file(&out.join("summary.csv"), &summary)?;
    write_file(&out.join("auc.csv"), &auc)?;
    report.artifacts.extend(["summary.csv".to_string(), "auc.csv".to_string()]);
    Ok(report)
}

pub const EFFICIENCY_HEADER: &str = "seed,sr_episodes,sr_plateau,sr_level,nn_episodes,nn_reached";

/// One efficiency cell: SR plateau and the episodes the ensemble needed to
/// match it (`None` when it never did within its budget).
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyRow {
    pub seed: u64,
    pub sr_episodes: usize,
    pub sr_plateau: Option<usize>,
    pub sr_level: f64,
    pub nn_episodes: usize,
    pub nn_reached: Option<usize>,
}

/// Tolerance on the SR plateau error when asking whether the ensemble
/// reached the same level.
pub const MATCH_FACTOR: f64 = 1.1;

/// Episode budget given to the ensemble: one short of three times the SR
/// plateau count, so reaching the level inside it means the ensemble was
/// less than three times slower.
pub fn nn_budget(sr_episodes: usize) -> usize {
    (3 * sr_episodes).saturating_sub(1).max(1)
}

pub fn read_efficiency(path: &Path) -> Result<Vec<EfficiencyRow>, CliError> {
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { s.parse().map(Some) };
    csv_rows(&read_file(path)?, EFFICIENCY_HEADER)?
        .into_iter()
        .map(|r| {
            let bad = || CliError::Artifact(format!("bad efficiency row {r:?}"));
            if r.len() != 6 {
                return Err(bad());
            }
            Ok(EfficiencyRow {
                seed: r[0].parse().map_err(|_| bad())?,
                sr_episodes: r[1].parse().map_err(|_| bad())?,
                sr_plateau: opt(&r[2]).map_err(|_| bad())?,
                sr_level: r[3].parse().map_err(|_| bad())?,
                nn_episodes: r[4].parse().map_err(|_| bad())?,
                nn_reached: opt(&r[5]).map_err(|_| bad())?,
            })
        })
        .collect()
}

fn efficiency(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("suite", cfg.echo());
    let mut table = format!("{EFFICIENCY_HEADER}\n");
    for &seed in seeds {
        let sr = ensure_sr_base(cfg, seed, out)?;
        let sr_curve = parse_curve(&read_file(&sr.curve_csv)?)?;
        let vals: Vec<f64> = sr_curve.iter().map(|c| c.avg_pos_err).collect();
        let plateau = symdyn_core::pipeline::plateau_index(&vals).map(|i| sr_curve[i].episodes);
        let (sr_episodes, level) = match plateau {
            Some(k) => (k, sr_curve[k - 1].avg_pos_err),
            None => (sr_curve.len(), vals.iter().copied().fold(f64::INFINITY, f64::min)),
        };
        report.curves.push(curve_summary_from_csv("sr", seed, out, &sr.curve_csv, plateau)?);
        let cell = out.join("efficiency").join(format!("seed{seed}"));
        let nn_curve_path = cell.join("curve_nn.csv");
        if !is_done(&cell) {
            let s1 = Stage1Config {
                max_episodes: nn_budget(sr_episodes),
                stop_on_plateau: false,
                target_error: Some(level * MATCH_FACTOR),
                ..stage1_config(cfg, cfg.tasks(), seed)
            };
            let curve = match stage1_train_base(&cfg.env(), &cfg.learner("nn"), &s1) {
                Ok(r) => r.curve,
                // every evaluation crashed: the level was never reached
                Err(Error::Training(msg)) => {
                    write_file(&cell.join("nn.failed"), &format!("{msg}\n"))?;
                    Vec::new()
                }
                Err(e) => return Err(e.into()),
            };
            write_file(&nn_curve_path, &curve_csv(&curve))?;
            mark_done(&cell)?;
        }
        let nn_curve = parse_curve(&read_file(&nn_curve_path)?)?;
        let reached = episodes_to_reach(&nn_curve, level, MATCH_FACTOR);
        let nn_episodes = if cell.join("nn.failed").exists() { nn_budget(sr_episodes) } else { nn_curve.len() };
        report.curves.push(curve_summary_from_csv("nn", seed, out, &nn_curve_path, None)?);
        table.push_str(&format!(
            "{seed},{sr_episodes},{},{level:.9e},{nn_episodes},{}\n",
            plateau.map_or(String::new(), |p| p.to_string()),
            reached.map_or(String::new(), |r| r.to_string())
        ));
    }
    write_file(&out.join("efficiency.csv"), &table)?;
    report.artifacts.push("efficiency.csv".into());
    Ok(report)
}

pub const GRID_HEADER: &str = "learner,split,seeds,mean_rate";

fn coverage(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("suite", cfg.echo());
    let task = coverage_train_task(cfg.platform);
    for &seed in seeds {
        let cell = out.join("coverage").join(format!("seed{seed}"));
        if !is_done(&cell) {
            let s1 = stage1_config(cfg, vec![task.clone()], seed);
            let r = stage1_train_base(&cfg.env(), &cfg.learner("sr"), &s1)?;
            save_base(&cell.join("sr.model"), &r.model)?;
            write_file(&cell.join("curve_sr.csv"), &curve_csv(&r.curve))?;
            save_dataset(&cell.join("data.csv"), &r.dataset)?;
            let nn = train_ensemble(&r.dataset, &cfg.file.nn.ensemble(), &cfg.file.train.train(cfg.file.adapt.lambda, seed))?;
            save_base(&cell.join("nn.model"), &BaseModel::Nn(nn))?;
            for learner in ["sr", "nn"] {
                let model = load_base(&cell.join(format!("{learner}.model")))?;
                for split in [CoverageSplit::Train, CoverageSplit::Test] {
                    let mppi = MppiConfig { seed, ..cfg.mppi.clone() };
                    let res = ood_coverage_eval(&model, split, cfg.file.coverage.trials, &mppi, cfg.file.max_steps, seed)?;
                    write_file(&cell.join(format!("{learner}_{}.csv", split.name())), &coverage_csv(&res))?;
                }
            }
            mark_done(&cell)?;
        }
        // the dataset is reloaded only to check the artifact is intact
        load_dataset(&cell.join("data.csv"), cfg)?;
    }
    let mut grid = format!("{GRID_HEADER}\n");
    for learner in ["sr", "nn"] {
        for split in [CoverageSplit::Train, CoverageSplit::Test] {
            let mut rates = Vec::new();
            for &seed in seeds {
                let path = out.join("coverage").join(format!("seed{seed}")).join(format!("{learner}_{}.csv", split.name()));
                let rows = csv_rows(&read_file(&path)?, COVERAGE_HEADER)?;
                let successes = rows.iter().filter(|r| r.get(2).map(String::as_str) == Some("1")).count();
                let rate = successes as f64 / rows.len().max(1) as f64;
                rates.push(rate);
                report.coverage.push(CoverageSummary {
                    learner: learner.to_string(),
                    seed,
                    split: split.name().to_string(),
                    csv: rel(out, &path),
                    trials: rows.len(),
                    successes,
                    rate,
                });
            }
            grid.push_str(&format!("{learner},{},{},{:.6}\n", split.name(), rates.len(), mean_std(&rates).0));
        }
    }
    write_file(&out.join("grid.csv"), &grid)?;
    report.artifacts.push("grid.csv".into());
    Ok(report)
}
