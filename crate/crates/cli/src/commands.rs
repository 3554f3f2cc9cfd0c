//! Single-run commands: base training, adaptation, coverage and benchmarks.

use std::path::{Path, PathBuf};
use std::time::Instant;

use symdyn_core::mppi::{Mppi, MppiConfig};
use symdyn_core::neural::BaseModel;
use symdyn_core::pipeline::{
    ood_coverage_eval, scenario_task, stage1_train_base, stage3_adapt, AdaptConfig, AdaptResult, BaselineCombo,
    CoverageResult, CoverageSplit, CurvePoint, Stage1Config, Stage1Result, Task,
};
use symdyn_core::sim::{apply_disturbance, Env, ReferenceTrack, TrackKind};
use symdyn_core::{trajlog, Dataset, Dynamics, Error};

use crate::config::ScenarioConfig;
use crate::report::{percentile, read_file, rel, write_file, AdaptSummary, CoverageSummary, CurveSummary, RunReport, TimingSummary};
use crate::CliError;

pub const CURVE_HEADER: &str = "episodes,avg_pos_err,truncated";
pub const COVERAGE_HEADER: &str = "trial,final_pos_err,success";
pub const BENCH_HEADER: &str = "call,latency_us";

pub fn load_base(path: &Path) -> Result<BaseModel, CliError> {
    let text = read_file(path)?;
    BaseModel::from_text(&text).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

pub fn save_base(path: &Path, model: &BaseModel) -> Result<(), CliError> {
    write_file(path, &model.to_text())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut buf = Vec::new();
    trajlog::write_trajectories(&mut buf, data.episodes())?;
    write_file(path, &String::from_utf8(buf).expect("CSV is ASCII"))
}

pub fn load_dataset(path: &Path, cfg: &ScenarioConfig) -> Result<Dataset, CliError> {
    let text = read_file(path)?;
    let trajs = trajlog::read_trajectories(text.as_bytes()).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
    Dataset::from_trajectories(cfg.platform, trajs).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for c in curve {
        s.push_str(&format!("{},{:.9e},{}\n", c.episodes, c.avg_pos_err, u8::from(c.truncated)));
    }
    s
}

pub fn parse_curve(text: &str) -> Result<Vec<CurvePoint>, CliError> {
    crate::report::csv_rows(text, CURVE_HEADER)?
        .into_iter()
        .map(|r| {
            let bad = || CliError::Artifact(format!("bad curve row {r:?}"));
            if r.len() != 3 {
                return Err(bad());
            }
            Ok(CurvePoint {
                episodes: r[0].parse().map_err(|_| bad())?,
                avg_pos_err: r[1].parse().map_err(|_| bad())?,
                truncated: r[2] == "1",
            })
        })
        .collect()
}

/// Stage-1 settings for one learner and seed.
pub fn stage1_config(cfg: &ScenarioConfig, tasks: Vec<Task>, seed: u64) -> Stage1Config {
    Stage1Config {
        tasks,
        mppi: MppiConfig { seed, ..cfg.mppi.clone() },
        max_episodes: cfg.file.base.max_episodes,
        max_steps: cfg.file.max_steps,
        stop_on_plateau: cfg.file.base.stop_on_plateau,
        target_error: None,
        seed,
    }
}

pub fn curve_summary(learner: &str, seed: u64, csv: String, r: &Stage1Result) -> CurveSummary {
    CurveSummary {
        learner: learner.to_string(),
        seed,
        csv,
        episodes: r.curve.len(),
        plateau: r.plateau,
        final_avg_pos_err: r.curve.last().map_or(f64::NAN, |c| c.avg_pos_err),
    }
}

/// `train-base`: stage-1 fitting for every configured learner and seed.
pub fn train_base(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("train-base", cfg.echo());
    let env = cfg.env();
    for &seed in seeds {
        for name in &cfg.learners {
            let r = stage1_train_base(&env, &cfg.learner(name), &stage1_config(cfg, cfg.tasks(), seed))?;
            let model = out.join(format!("base_{name}_seed{seed}.model"));
            let curve = out.join(format!("curve_{name}_seed{seed}.csv"));
            let data = out.join(format!("data_{name}_seed{seed}.csv"));
            save_base(&model, &r.model)?;
            write_file(&curve, &curve_csv(&r.curve))?;
            save_dataset(&data, &r.dataset)?;
            report.curves.push(curve_summary(name, seed, rel(out, &curve), &r));
            report.artifacts.extend([rel(out, &model), rel(out, &data)]);
        }
    }
    Ok(report)
}

pub fn adapt_config(cfg: &ScenarioConfig, task: Task, budget: usize, seed: u64) -> AdaptConfig {
    let a = &cfg.file.adapt;
    let mut c = AdaptConfig::new(task, MppiConfig { seed, ..cfg.mppi.clone() }, budget, seed);
    c.lambda = a.lambda;
    c.residual_hidden = a.residual_hidden.clone();
    c.train = cfg.file.train.train(a.lambda, seed);
    c.sr_residual = symdyn_core::symreg::SrSearchConfig { max_complexity: a.sr_max_complexity, ..cfg.file.sr.search(seed) };
    c.max_steps = cfg.file.max_steps;
    c.early_stop = a.early_stop;
    c
}

pub fn check_combo(base: &BaseModel, combo: BaselineCombo) -> Result<(), CliError> {
    if combo.sr_base() != matches!(base, BaseModel::Sr(_)) {
        let want = if combo.sr_base() { "symbolic" } else { "ensemble" };
        return Err(CliError::Config(format!("combo `{combo}` needs a {want} base model")));
    }
    Ok(())
}

pub fn adapt_summary(scenario: &str, combo: BaselineCombo, seed: u64, csv: String, r: &AdaptResult) -> AdaptSummary {
    let costs = r.history.costs();
    AdaptSummary {
        scenario: scenario.to_string(),
        combo: combo.name().to_string(),
        seed,
        csv,
        trials: costs.len(),
        zero_shot_cost: costs[0],
        best_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
        final_cost: *costs.last().unwrap(),
    }
}

/// `adapt`: residual adaptation of a saved base in the configured
/// disturbance scenario.
pub fn adapt(
    cfg: &ScenarioConfig,
    base_path: &Path,
    combo: BaselineCombo,
    budget: Option<usize>,
    seeds: &[u64],
    out: &Path,
) -> Result<RunReport, CliError> {
    let base = load_base(base_path)?;
    if base.platform() != cfg.platform {
        return Err(CliError::Config(format!("base model is for {}, config is for {}", base.platform(), cfg.platform)));
    }
    check_combo(&base, combo)?;
    let env = apply_disturbance(&cfg.env(), cfg.disturbance)?;
    let budget = budget.unwrap_or(cfg.file.adapt.budget);
    let mut report = RunReport::new("adapt", cfg.echo());
    for &seed in seeds {
        let acfg = adapt_config(cfg, scenario_task(cfg.platform, cfg.disturbance), budget, seed);
        let r = stage3_adapt(&base, combo, &env, &acfg)?;
        let csv = out.join(format!("adapt_{combo}_seed{seed}.csv"));
        let ckpt = out.join(format!("residual_{combo}_seed{seed}.model"));
        write_file(&csv, &r.history.to_csv())?;
        write_file(&ckpt, &r.model.residual.to_text())?;
        report.adaptations.push(adapt_summary(cfg.disturbance.name(), combo, seed, rel(out, &csv), &r));
        report.artifacts.push(rel(out, &ckpt));
    }
    Ok(report)
}

pub fn coverage_csv(r: &CoverageResult) -> String {
    let mut s = format!("{COVERAGE_HEADER}\n");
    for (i, e) in r.final_errors.iter().enumerate() {
        s.push_str(&format!("{i},{e:.9e},{}\n", u8::from(*e < r.threshold)));
    }
    s
}

pub fn coverage_summary(learner: &str, seed: u64, csv: String, r: &CoverageResult) -> CoverageSummary {
    CoverageSummary {
        learner: learner.to_string(),
        seed,
        split: r.split.name().to_string(),
        csv,
        trials: r.final_errors.len(),
        successes: r.successes(),
        rate: r.rate(),
    }
}

/// `eval-coverage`: zero-shot success of a saved base on the training
/// and test start distributions.
pub fn eval_coverage(cfg: &ScenarioConfig, base_path: &Path, seeds: &[u64], out: &Path) -> Result<RunReport, CliError> {
    let base = load_base(base_path)?;
    if base.platform() != cfg.platform {
        return Err(CliError::Config(format!("base model is for {}, config is for {}", base.platform(), cfg.platform)));
    }
    let name = base_path.file_stem().map_or("base".into(), |s| s.to_string_lossy().to_string());
    let mut report = RunReport::new("eval-coverage", cfg.echo());
    for &seed in seeds {
        for split in [CoverageSplit::Train, CoverageSplit::Test] {
            let mppi = MppiConfig { seed, ..cfg.mppi.clone() };
            let r = ood_coverage_eval(&base, split, cfg.file.coverage.trials, &mppi, cfg.file.max_steps, seed)?;
            let csv = out.join(format!("coverage_{name}_{}_seed{seed}.csv", split.name()));
            write_file(&csv, &coverage_csv(&r))?;
            report.coverage.push(coverage_summary(&name, seed, rel(out, &csv), &r));
        }
    }
    Ok(report)
}

/// Per-call plan latencies in microseconds for `model`, driving the
/// ground-truth simulator around the circle track. One untimed warm-up
/// call precedes the `calls` timed ones.
pub fn plan_latencies<M: Dynamics + ?Sized>(model: &M, mppi: &MppiConfig, calls: usize) -> Result<Vec<f64>, Error> {
    let p = model.platform();
    let env = Env::nominal(p);
    let track = ReferenceTrack::new(p, TrackKind::Circle);
    let mut s = track.reference_at(0)?;
    let mut ctrl = Mppi::new(p, mppi.clone())?;
    let mut out = Vec::with_capacity(calls);
    for t in 0..=calls {
        let t0 = Instant::now();
        let plan = ctrl.act(model, &s, &track, t)?;
        let us = t0.elapsed().as_secs_f64() * 1e6;
        if t > 0 {
            out.push(us);
        }
        s = env.step(&s, &plan.action)?;
    }
    Ok(out)
}

pub fn bench_csv(lat: &[f64]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for (i, v) in lat.iter().enumerate() {
        s.push_str(&format!("{i},{v:.3}\n"));
    }
    s
}

/// `bench`: plan-call latency of each model under the configured MPPI
/// settings, with speed ratios relative to the first model.
pub fn bench(cfg: &ScenarioConfig, models: &[PathBuf], out: &Path) -> Result<RunReport, CliError> {
    if models.is_empty() {
        return Err(CliError::Config("bench needs at least one --model".into()));
    }
    let mut report = RunReport::new("bench", cfg.echo());
    let mut first_median = None;
    for (i, path) in models.iter().enumerate() {
        let model = load_base(path)?;
        if model.platform() != cfg.platform {
            return Err(CliError::Config(format!("{} is for {}, config is for {}", path.display(), model.platform(), cfg.platform)));
        }
        let lat = plan_latencies(&model, &cfg.mppi, cfg.file.bench.calls)?;
        let name = path.file_stem().map_or(format!("model{i}"), |s| s.to_string_lossy().to_string());
        let csv = out.join(format!("bench_{i}_{name}.csv"));
        write_file(&csv, &bench_csv(&lat))?;
        let median = percentile(&lat, 0.5);
        let first = *first_median.get_or_insert(median);
        report.timing.push(TimingSummary {
            model: name,
            csv: rel(out, &csv),
            calls: lat.len(),
            median_us: median,
            p95_us: percentile(&lat, 0.95),
            speedup_vs_first: first / median,
        });
    }
    Ok(report)
}
