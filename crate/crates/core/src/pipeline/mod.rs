//! Base fitting, few-shot adaptation and evaluation loops.

mod coverage;
mod episode;
mod stage1;
mod stage3;
mod tasks;

pub use coverage::{
    collect_expert_dataset, coverage_train_task, coverage_trial_task, ood_coverage_eval, scenario_task, scenario_track,
    success_threshold, DRIFT_SPEEDUP, CoverageResult, CoverageSplit,
};
pub use episode::{
    collect_episode, episode_cost, episode_position_error, ConstantController, Controller, MppiController,
    RandomController,
};
pub use stage1::{
    episodes_to_reach, evaluate_model, plateau_index, stage1_train_base, BaseLearner, CurvePoint, Stage1Config,
    Stage1Result, PLATEAU_TOLERANCE, PLATEAU_WINDOW,
};
pub use tasks::{default_tasks, StartRegion, Task};
pub use stage3::{
    carry_forward, fit_sr_residual, stage3_adapt, AdaptConfig, AdaptHistory, AdaptResult, BaselineCombo, TrialRecord,
};
