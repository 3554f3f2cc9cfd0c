//! Fixtures shared by the benchmarks.

use symdyn_core::mppi::MppiConfig;
use symdyn_core::neural::{train_ensemble, EnsembleConfig, EnsembleNN, TrainConfig};
use symdyn_core::pipeline::{collect_episode, RandomController, Task};
use symdyn_core::sim::{Env, TrackKind};
use symdyn_core::symreg::{Expr, SrModel};
use symdyn_core::{ActionBounds, Dataset, Platform};

/// A hand-written symbolic model with the shape of a fitted one: positions
/// integrate velocities, velocities respond to the actions.
pub fn sr_fixture(platform: Platform) -> SrModel {
    let dt = Env::nominal(platform).dt();
    let d = platform.state_dim();
    let lay = platform.layout();
    let exprs = (0..d)
        .map(|i| {
            let x = Expr::var(i);
            if i >= lay.position.0 && i < lay.position.1 {
                let v = lay.velocity.0 + (i - lay.position.0);
                Expr::add(x, Expr::mul(Expr::constant(dt), Expr::var(v)))
            } else if i >= lay.velocity.0 && i < lay.velocity.1 {
                let a = Expr::var(d + (i - lay.velocity.0) % platform.action_dim());
                let o = Expr::sin(Expr::var(lay.orientation.0));
                Expr::add(x, Expr::mul(Expr::constant(dt), Expr::sub(Expr::mul(a, Expr::cos(o)), Expr::constant(0.3))))
            } else {
                Expr::add(x, Expr::mul(Expr::constant(0.01), Expr::var(d)))
            }
        })
        .collect();
    SrModel::new(platform, exprs).expect("fixture is well formed")
}

/// Random-action episodes in the nominal simulator.
pub fn random_dataset(platform: Platform, episodes: usize) -> Dataset {
    let env = Env::nominal(platform);
    let task = Task::standard(platform, TrackKind::Circle);
    let start = task.nominal_start().expect("nominal start");
    let mut data = Dataset::new(platform);
    for e in 0..episodes {
        let mut ctrl = RandomController::new(platform, ActionBounds::default_for(platform), e as u64).expect("controller");
        data.push(collect_episode(&env, &mut ctrl, &task.track, &start, 100, e).expect("episode")).expect("push");
    }
    data
}

/// An ensemble of the given width; one epoch is enough for timing.
pub fn ensemble_fixture(platform: Platform, members: usize, hidden: Vec<usize>) -> EnsembleNN {
    let arch = EnsembleConfig { members, hidden, predict_delta: false };
    train_ensemble(&random_dataset(platform, 2), &arch, &TrainConfig { epochs: 1, ..Default::default() }).expect("ensemble")
}

/// Default planner settings with `samples` rollouts.
pub fn mppi(platform: Platform, samples: usize) -> MppiConfig {
    MppiConfig { samples, ..MppiConfig::default_for(platform, Env::nominal(platform).dt()) }
}
