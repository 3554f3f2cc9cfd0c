use crate::cost::position_error;
use crate::dataset::Dataset;
use crate::dynamics::Dynamics;
use crate::error::{invalid, Result};
use crate::mppi::MppiConfig;
use crate::seed;
use crate::sim::{DisturbanceScenario, Env, ReferenceTrack, TrackKind};
use crate::types::Platform;

use super::episode::{collect_episode, MppiController, RandomController};
use super::tasks::{StartRegion, Task};

/// Final position error below which a coverage trial counts as a success.
pub fn success_threshold(platform: Platform) -> f64 {
    match platform {
        Platform::Racecar => 0.3,
        Platform::Quadrotor => 0.15,
    }
}

/// Which half of the coverage grid a trial is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageSplit {
    Train,
    Test,
}

impl CoverageSplit {
    pub fn name(self) -> &'static str {
        match self {
            CoverageSplit::Train => "train",
            CoverageSplit::Test => "test",
        }
    }
}

/// The restricted-coverage training task: racecar parking from a small box
/// behind the goal, or quadrotor hover at a fixed point.
pub fn coverage_train_task(platform: Platform) -> Task {
    match platform {
        Platform::Racecar => Task::new(ReferenceTrack::new(platform, TrackKind::ParkAtGoal), StartRegion::car_train()),
        Platform::Quadrotor => Task::new(ReferenceTrack::new(platform, TrackKind::Hover), StartRegion::quad_train()),
    }
}

/// Task for trial `i` of a coverage split. Racecar test trials start past
/// the goal; quadrotor test trials move the hover goal around a
/// 0.6 x 0.6 x 1 m volume while the start stays at the training point.
pub fn coverage_trial_task(platform: Platform, split: CoverageSplit, seed_value: u64, i: usize) -> Result<(Task, crate::types::StateVec)> {
    let mut rng = seed::rng(seed_value, 0xC0FE, i as u64);
    let train = coverage_train_task(platform);
    match (platform, split) {
        (_, CoverageSplit::Train) => {
            let s = train.start.sample(&train.track, &mut rng)?;
            Ok((train, s))
        }
        (Platform::Racecar, CoverageSplit::Test) => {
            let task = Task::new(train.track.clone(), StartRegion::car_test());
            let s = task.start.sample(&task.track, &mut rng)?;
            Ok((task, s))
        }
        (Platform::Quadrotor, CoverageSplit::Test) => {
            let start = train.nominal_start()?;
            let goal = StartRegion::quad_test().sample(&train.track, &mut rng)?;
            let mut track = train.track.clone();
            track.center.copy_from_slice(&goal.values()[..3]);
            Ok((Task::new(track, StartRegion::OnTrack { jitter: 0.0 }), start))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageResult {
    pub split: CoverageSplit,
    pub threshold: f64,
    /// Final position error of each trial; truncated trials score infinity.
    pub final_errors: Vec<f64>,
}

impl CoverageResult {
    pub fn successes(&self) -> usize {
        self.final_errors.iter().filter(|e| **e < self.threshold).count()
    }

    pub fn rate(&self) -> f64 {
        self.successes() as f64 / self.final_errors.len() as f64
    }
}

/// Zero-shot success rate of MPPI on `model` over `n_trials` draws from a
/// coverage split, run in the clean simulator.
pub fn ood_coverage_eval<M: Dynamics + ?Sized>(
    model: &M,
    split: CoverageSplit,
    n_trials: usize,
    mppi: &MppiConfig,
    max_steps: usize,
    seed_value: u64,
) -> Result<CoverageResult> {
    if n_trials == 0 {
        return invalid("n_trials must be at least 1");
    }
    let platform = model.platform();
    let env = Env::nominal(platform);
    let mut final_errors = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let (task, start) = coverage_trial_task(platform, split, seed_value, i)?;
        let cfg = MppiConfig { seed: seed::derive(seed_value, 0xC0E, i as u64), ..mppi.clone() };
        let mut ctrl = MppiController::new(model, cfg)?;
        let traj = collect_episode(&env, &mut ctrl, &task.track, &start, max_steps, i)?;
        let e = if traj.termination.is_truncated() {
            f64::INFINITY
        } else {
            let last = &traj.transitions.last().expect("non-empty").s_next;
            position_error(last, &task.track.reference_clamped(traj.len()))
        };
        final_errors.push(e);
    }
    Ok(CoverageResult { split, threshold: success_threshold(platform), final_errors })
}

/// Episodes of MPPI on the ground-truth simulator from sampled task
/// starts, preceded by one random-action episode. Used to give different
/// base learners the same training data.
pub fn collect_expert_dataset(env: &Env, tasks: &[Task], episodes: usize, mppi: &MppiConfig, max_steps: usize, seed_value: u64) -> Result<Dataset> {
    if tasks.is_empty() || episodes == 0 {
        return invalid("need at least one task and one episode");
    }
    let mut data = Dataset::new(env.platform());
    for k in 0..episodes {
        let task = &tasks[k % tasks.len()];
        let start = task.start.sample(&task.track, &mut seed::rng(seed_value, 0xE4, k as u64))?;
        let traj = if k == 0 {
            let mut ctrl = RandomController::new(env.platform(), mppi.bounds.clone(), seed::derive(seed_value, 0xE5, 0))?;
            collect_episode(env, &mut ctrl, &task.track, &start, max_steps, k)?
        } else {
            let cfg = MppiConfig { seed: seed::derive(seed_value, 0xE6, k as u64), ..mppi.clone() };
            let mut ctrl = MppiController::new(env, cfg)?;
            collect_episode(env, &mut ctrl, &task.track, &start, max_steps, k)?
        };
        data.push(traj)?;
    }
    Ok(data)
}

/// Track as seen under a disturbance scenario (sped up or reversed for the
/// track-level racecar scenarios, unchanged otherwise).
pub fn scenario_track(track: &ReferenceTrack, d: DisturbanceScenario) -> ReferenceTrack {
    let mut t = track.clone().sped_up(d.track_speedup());
    if d.reverses_track() {
        t = t.reversed();
    }
    t
}

/// Racecar circle speed-up used for the friction scenario; slip only
/// builds up noticeably above roughly 0.8 m/s.
pub const DRIFT_SPEEDUP: f64 = 2.0;

/// Adaptation task for a scenario: the circle track on either platform,
/// run faster on the racecar under low friction.
pub fn scenario_task(platform: Platform, d: DisturbanceScenario) -> Task {
    let mut base = Task::standard(platform, TrackKind::Circle);
    if d == DisturbanceScenario::LowFriction {
        base.track = base.track.sped_up(DRIFT_SPEEDUP);
    }
    Task::new(scenario_track(&base.track, d), base.start)
}
