use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::mppi::MppiConfig;
use crate::neural::{train_ensemble, BaseModel, EnsembleConfig, TrainConfig};
use crate::seed;
use crate::sim::Env;
use crate::symreg::{fit_sr_model, SrSearchConfig};

use super::episode::{collect_episode, episode_position_error, MppiController, RandomController};
use super::tasks::Task;

/// How the base model is fitted from the accumulated data.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseLearner {
    Sr(SrSearchConfig),
    Nn { arch: EnsembleConfig, train: TrainConfig },
}

impl BaseLearner {
    pub fn name(&self) -> &'static str {
        match self {
            BaseLearner::Sr(_) => "sr",
            BaseLearner::Nn { .. } => "nn",
        }
    }

    /// Fits a base model to `data`, warm-starting symbolic search from
    /// `previous` when given.
    pub fn fit(&self, data: &Dataset, previous: Option<&BaseModel>, seed_value: u64) -> Result<BaseModel> {
        match self {
            BaseLearner::Sr(cfg) => {
                let warm = match previous {
                    Some(BaseModel::Sr(m)) => Some(m),
                    _ => None,
                };
                let cfg = SrSearchConfig { seed: seed_value, ..cfg.clone() };
                Ok(BaseModel::Sr(fit_sr_model(data, &cfg, warm)?))
            }
            BaseLearner::Nn { arch, train } => {
                let train = TrainConfig { seed: seed_value, ..train.clone() };
                Ok(BaseModel::Nn(train_ensemble(data, arch, &train)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Config {
    pub tasks: Vec<Task>,
    pub mppi: MppiConfig,
    pub max_episodes: usize,
    pub max_steps: usize,
    /// Stop once the learning curve plateaus; otherwise run the full budget.
    pub stop_on_plateau: bool,
    /// Stop as soon as a completed evaluation reaches this error.
    pub target_error: Option<f64>,
    pub seed: u64,
}

/// One point of the learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    /// Training episodes the evaluated model was fitted on.
    pub episodes: usize,
    /// Mean position error over one evaluation episode per task.
    pub avg_pos_err: f64,
    /// Whether any evaluation episode was truncated.
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct Stage1Result {
    pub model: BaseModel,
    pub dataset: Dataset,
    pub curve: Vec<CurvePoint>,
    /// Episode count at which the plateau level was first reached, when
    /// the curve plateaued within the budget.
    pub plateau: Option<usize>,
}

/// Relative improvement below which three further points count as a plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.02;
/// Trials in the plateau window.
pub const PLATEAU_WINDOW: usize = 3;

/// Returns the index of the plateau point if the curve has flattened: the
/// last [`PLATEAU_WINDOW`] values improve on the best earlier value by less
/// than [`PLATEAU_TOLERANCE`] (relative).
pub fn plateau_index(values: &[f64]) -> Option<usize> {
    if values.len() <= PLATEAU_WINDOW {
        return None;
    }
    let split = values.len() - PLATEAU_WINDOW;
    let (best_i, best) = values[..split]
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let recent = values[split..].iter().copied().fold(f64::INFINITY, f64::min);
    (best.is_finite() && recent > best * (1.0 - PLATEAU_TOLERANCE)).then_some(best_i)
}

/// Evaluates `model` with MPPI in `env`, one episode per task from its
/// nominal start; returns the mean position error and a truncation flag.
pub fn evaluate_model(
    env: &Env,
    model: &BaseModel,
    tasks: &[Task],
    mppi: &MppiConfig,
    max_steps: usize,
) -> Result<(f64, bool)> {
    let mut total = 0.0;
    let mut truncated = false;
    for (i, task) in tasks.iter().enumerate() {
        let cfg = MppiConfig { seed: seed::derive(mppi.seed, 0xE7A1, i as u64), ..mppi.clone() };
        let mut ctrl = MppiController::new(model, cfg)?;
        let traj = collect_episode(env, &mut ctrl, &task.track, &task.nominal_start()?, max_steps, 0)?;
        truncated |= traj.termination.is_truncated();
        total += episode_position_error(&traj, &task.track)?;
    }
    Ok((total / tasks.len() as f64, truncated))
}

/// Iterative base fitting in the clean simulator: collect one episode with
/// the current model (uniform random actions for the first), append it,
/// refit, evaluate, repeat until the budget or a plateau.
pub fn stage1_train_base(env: &Env, learner: &BaseLearner, cfg: &Stage1Config) -> Result<Stage1Result> {
    env.validate()?;
    let platform = env.platform();
    if cfg.tasks.is_empty() {
        return invalid("stage 1 needs at least one task");
    }
    if cfg.max_episodes == 0 {
        return invalid("max_episodes must be at least 1");
    }
    if cfg.tasks.iter().any(|t| t.track.platform != platform) {
        return invalid("task platform does not match the environment");
    }
    let mut data = Dataset::new(platform);
    let mut model: Option<BaseModel> = None;
    let mut curve = Vec::new();
    let mut plateau = None;
    for k in 0..cfg.max_episodes {
        let task = &cfg.tasks[k % cfg.tasks.len()];
        let mut rng = seed::rng(cfg.seed, 0x57A1, k as u64);
        let start = task.start.sample(&task.track, &mut rng)?;
        let traj = match &model {
            None => {
                let mut ctrl = RandomController::new(platform, cfg.mppi.bounds.clone(), seed::derive(cfg.seed, 0x7A4D, k as u64))?;
                collect_episode(env, &mut ctrl, &task.track, &start, cfg.max_steps, k)?
            }
            Some(m) => {
                let mppi = MppiConfig { seed: seed::derive(cfg.seed, 0xC011, k as u64), ..cfg.mppi.clone() };
                let mut ctrl = MppiController::new(m, mppi)?;
                collect_episode(env, &mut ctrl, &task.track, &start, cfg.max_steps, k)?
            }
        };
        data.push(traj)?;
        let fitted = learner.fit(&data, model.as_ref(), seed::derive(cfg.seed, 0xF17, k as u64))?;
        let eval_mppi = MppiConfig { seed: seed::derive(cfg.seed, 0xE7A1, 0), ..cfg.mppi.clone() };
        let (err, truncated) = evaluate_model(env, &fitted, &cfg.tasks, &eval_mppi, cfg.max_steps)?;
        model = Some(fitted);
        curve.push(CurvePoint { episodes: k + 1, avg_pos_err: err, truncated });
        if cfg.target_error.is_some_and(|t| !truncated && err <= t) {
            break;
        }
        if plateau.is_none() && !truncated {
            let vals: Vec<f64> = curve.iter().map(|c| c.avg_pos_err).collect();
            if let Some(i) = plateau_index(&vals) {
                plateau = Some(curve[i].episodes);
                if cfg.stop_on_plateau {
                    break;
                }
            }
        }
    }
    if curve.iter().all(|c| c.truncated) && cfg.max_episodes > 1 {
        let best = curve.iter().map(|c| c.avg_pos_err).fold(f64::INFINITY, f64::min);
        return Err(Error::Training(format!(
            "no model completed an evaluation episode in {} episodes (best error {best:.3} m, {} transitions)",
            curve.len(),
            data.len()
        )));
    }
    Ok(Stage1Result { model: model.expect("at least one episode"), dataset: data, curve, plateau })
}

/// First episode count whose error is within `factor` of `level`.
pub fn episodes_to_reach(curve: &[CurvePoint], level: f64, factor: f64) -> Option<usize> {
    curve.iter().find(|c| !c.truncated && c.avg_pos_err <= level * factor).map(|c| c.episodes)
}
