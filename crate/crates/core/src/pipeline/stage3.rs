use std::fmt;
use std::str::FromStr;

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::mppi::MppiConfig;
use crate::neural::{train_residual, BaseModel, Residual, ResidualModel, TrainConfig};
use crate::seed;
use crate::sim::Env;
use crate::symreg::{fit_columns, SrModel, SrSearchConfig};

use super::episode::{collect_episode, episode_cost, episode_position_error, MppiController};
use super::stage1::plateau_index;
use super::tasks::Task;

/// Frozen base family and residual family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineCombo {
    SrNn,
    SrSr,
    NnNn,
    NnSr,
}

impl BaselineCombo {
    pub const ALL: [BaselineCombo; 4] = [Self::SrNn, Self::SrSr, Self::NnNn, Self::NnSr];

    pub fn name(self) -> &'static str {
        match self {
            Self::SrNn => "sr_nn",
            Self::SrSr => "sr_sr",
            Self::NnNn => "nn_nn",
            Self::NnSr => "nn_sr",
        }
    }

    pub fn sr_base(self) -> bool {
        matches!(self, Self::SrNn | Self::SrSr)
    }

    pub fn nn_residual(self) -> bool {
        matches!(self, Self::SrNn | Self::NnNn)
    }
}

impl fmt::Display for BaselineCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown combo `{s}` (expected sr_nn, sr_sr, nn_nn or nn_sr)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptConfig {
    pub task: Task,
    pub mppi: MppiConfig,
    /// Adaptation episodes after the zero-shot one.
    pub budget: usize,
    pub lambda: f64,
    pub residual_hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Search settings for symbolic residuals.
    pub sr_residual: SrSearchConfig,
    pub max_steps: usize,
    /// Stop when the last three trials improve by less than 2%.
    pub early_stop: bool,
    pub seed: u64,
}

impl AdaptConfig {
    /// Residual defaults: two hidden layers of 64, lambda 0.01, symbolic
    /// residuals capped at complexity 30.
    pub fn new(task: Task, mppi: MppiConfig, budget: usize, seed_value: u64) -> Self {
        Self {
            task,
            mppi,
            budget,
            lambda: 0.01,
            residual_hidden: vec![64, 64],
            train: TrainConfig::default(),
            sr_residual: SrSearchConfig { max_complexity: 30, ..SrSearchConfig::default() },
            max_steps: crate::types::MAX_EPISODE_STEPS,
            early_stop: true,
            seed: seed_value,
        }
    }
}

/// One adaptation trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// Target-domain episodes available after this trial's collection.
    pub episodes_used: usize,
    pub episode_cost: f64,
    pub avg_pos_err: f64,
    pub truncated: bool,
    pub base_checksum: String,
    pub residual_checksum: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptHistory {
    pub trials: Vec<TrialRecord>,
}

impl AdaptHistory {
    pub const CSV_HEADER: &'static str = "trial,episodes_used,episode_cost,avg_pos_err";

    pub fn costs(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.episode_cost).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for t in &self.trials {
            s.push_str(&format!("{},{},{:.9e},{:.9e}\n", t.trial, t.episodes_used, t.episode_cost, t.avg_pos_err));
        }
        s
    }

    /// Parses the CSV written by [`AdaptHistory::to_csv`]; checksums are
    /// not part of the file and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::Format("adaptation history header mismatch".into()));
        }
        let mut trials = Vec::new();
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("history row {}: `{line}`", i + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            trials.push(TrialRecord {
                trial: f[0].parse().map_err(|_| bad())?,
                episodes_used: f[1].parse().map_err(|_| bad())?,
                episode_cost: f[2].parse().map_err(|_| bad())?,
                avg_pos_err: f[3].parse().map_err(|_| bad())?,
                truncated: false,
                base_checksum: String::new(),
                residual_checksum: String::new(),
            });
        }
        Ok(Self { trials })
    }
}

#[derive(Clone, Debug)]
pub struct AdaptResult {
    pub model: ResidualModel,
    pub history: AdaptHistory,
    pub data: Dataset,
}

fn residual_checksum(r: &Residual) -> String {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(r.to_text().as_bytes());
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Fits a symbolic residual to `s' - f_base(s, a)` over all target data,
/// warm-started from the previous residual.
pub fn fit_sr_residual(base: &BaseModel, data: &Dataset, cfg: &SrSearchConfig, warm: Option<&SrModel>) -> Result<SrModel> {
    let p = data.platform();
    let inputs = data.input_columns();
    let mut targets = data.target_columns();
    let n = data.len();
    let rows: Vec<f64> = (0..n).flat_map(|r| inputs.iter().map(move |c| c[r])).collect();
    let x = ndarray::ArrayView2::from_shape((n, p.input_dim()), &rows).expect("row layout");
    let pred = base.predict_rows(x)?;
    for (d, col) in targets.iter_mut().enumerate() {
        for (r, v) in col.iter_mut().enumerate() {
            *v -= pred[(r, d)];
        }
    }
    if targets.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("base model produces non-finite predictions on the data".into()));
    }
    Ok(fit_columns(p, &inputs, &targets, cfg, warm)?.model)
}

/// Few-shot adaptation in the target environment: collect an episode with
/// the current composite (trial 0 is the frozen base alone), add it to the
/// target data, retrain the residual on all of it, repeat.
pub fn stage3_adapt(base: &BaseModel, combo: BaselineCombo, target: &Env, cfg: &AdaptConfig) -> Result<AdaptResult> {
    target.validate()?;
    let p = target.platform();
    if base.platform() != p || cfg.task.track.platform != p {
        return invalid("base model, task and target environment must share a platform");
    }
    if combo.sr_base() != matches!(base, BaseModel::Sr(_)) {
        return invalid(format!("combo {combo} does not match the base model family"));
    }
    cfg.train.validate()?;
    let residual = if combo.nn_residual() {
        Residual::Nn(crate::neural::ResidualNet::new(p, &cfg.residual_hidden, seed::derive(cfg.seed, 0x2E5, 0))?)
    } else {
        Residual::Sr(SrModel::zero(p))
    };
    let mut model = ResidualModel::new(base.clone(), residual, cfg.lambda)?;
    let base_sum = base.checksum();
    let start = cfg.task.nominal_start()?;
    let mut data = Dataset::new(p);
    let mut history = AdaptHistory::default();
    for trial in 0..=cfg.budget {
        let mppi = MppiConfig { seed: seed::derive(cfg.seed, 0xAD, trial as u64), ..cfg.mppi.clone() };
        let mut ctrl = MppiController::new(&model, mppi)?;
        let traj = collect_episode(target, &mut ctrl, &cfg.task.track, &start, cfg.max_steps, trial)?;
        let truncated = traj.termination.is_truncated();
        if trial == 0 && truncated {
            return Err(Error::Scenario(format!(
                "zero-shot episode ended early ({}) after {} steps",
                traj.termination.as_str(),
                traj.len()
            )));
        }
        let cost = episode_cost(&traj, &cfg.task.track, &cfg.mppi.weights)?;
        let err = episode_position_error(&traj, &cfg.task.track)?;
        data.push(traj)?;
        if model.base.checksum() != base_sum {
            return Err(Error::Training("base model changed during adaptation".into()));
        }
        history.trials.push(TrialRecord {
            trial,
            episodes_used: trial + 1,
            episode_cost: cost,
            avg_pos_err: err,
            truncated,
            base_checksum: base_sum.clone(),
            residual_checksum: residual_checksum(&model.residual),
        });
        if trial == cfg.budget || (cfg.early_stop && plateau_index(&history.costs()).is_some()) {
            break;
        }
        let train_seed = seed::derive(cfg.seed, 0x7EA, trial as u64);
        model = match &model.residual {
            Residual::Nn(_) => {
                let train = TrainConfig { lambda: cfg.lambda, seed: train_seed, ..cfg.train.clone() };
                train_residual(&model, &data, &train)?.model
            }
            Residual::Sr(prev) => {
                let sr = SrSearchConfig { seed: train_seed, ..cfg.sr_residual.clone() };
                let fitted = fit_sr_residual(&model.base, &data, &sr, Some(prev))?;
                ResidualModel::new(model.base.clone(), Residual::Sr(fitted), cfg.lambda)?
            }
        };
    }
    Ok(AdaptResult { model, history, data })
}

/// Per-trial costs padded to `len` entries by repeating the last value, so
/// runs that stopped early can be averaged with complete ones.
pub fn carry_forward(costs: &[f64], len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = costs.iter().copied().take(len).collect();
    if let Some(&last) = v.last() {
        v.resize(len, last);
    }
    v
}
