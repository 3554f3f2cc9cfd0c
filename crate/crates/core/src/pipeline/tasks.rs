use std::f64::consts::FRAC_PI_4;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::sim::{ReferenceTrack, TrackKind};
use crate::types::{normalize_orientation, Platform, StateVec};

/// Region from which episode start states are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum StartRegion {
    /// The track's own initial target, optionally jittered in position.
    OnTrack { jitter: f64 },
    /// Racecar box: x and y ranges and a symmetric yaw range, at rest.
    CarBox { x: (f64, f64), y: (f64, f64), yaw: f64 },
    /// Quadrotor box around a point, level and at rest.
    QuadBox { center: [f64; 3], half: [f64; 3] },
}

impl StartRegion {
    /// Parking starts of the restricted-coverage training task.
    pub fn car_train() -> Self {
        StartRegion::CarBox { x: (-1.0, -0.5), y: (-1.0, 1.0), yaw: FRAC_PI_4 }
    }

    /// Parking starts well outside the training region.
    pub fn car_test() -> Self {
        StartRegion::CarBox { x: (2.5, 3.0), y: (-1.0, 1.0), yaw: FRAC_PI_4 }
    }

    /// Start states near the hover goal.
    pub fn quad_train() -> Self {
        StartRegion::QuadBox { center: [0.0, 0.0, 1.0], half: [0.05, 0.05, 0.05] }
    }

    /// Start offsets spanning a 0.6 x 0.6 x 1 m volume around the goal.
    pub fn quad_test() -> Self {
        StartRegion::QuadBox { center: [0.0, 0.0, 1.0], half: [0.3, 0.3, 0.5] }
    }

    pub fn sample<R: Rng + ?Sized>(&self, track: &ReferenceTrack, rng: &mut R) -> Result<StateVec> {
        let p = track.platform;
        let u = |rng: &mut R, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        match self {
            StartRegion::OnTrack { jitter } => {
                let mut s = track.reference_at(0)?;
                let n = if p == Platform::Quadrotor { 3 } else { 2 };
                for k in 0..n {
                    s.values_mut()[k] += u(rng, -jitter, *jitter);
                }
                Ok(s)
            }
            StartRegion::CarBox { x, y, yaw } => {
                if p != Platform::Racecar {
                    return invalid("car start region used with a quadrotor track");
                }
                let th = u(rng, -yaw, *yaw);
                let v = vec![u(rng, x.0, x.1), u(rng, y.0, y.1), th.sin(), th.cos(), 0.0, 0.0, 0.0];
                StateVec::new(p, v)
            }
            StartRegion::QuadBox { center, half } => {
                if p != Platform::Quadrotor {
                    return invalid("quadrotor start region used with a car track");
                }
                let mut v = vec![0.0; 13];
                for k in 0..3 {
                    v[k] = center[k] + u(rng, -half[k], half[k]);
                }
                v[3] = 1.0;
                normalize_orientation(p, &mut v);
                StateVec::new(p, v)
            }
        }
    }
}

/// A reference track with the distribution its episodes start from.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub track: ReferenceTrack,
    pub start: StartRegion,
}

impl Task {
    pub fn new(track: ReferenceTrack, start: StartRegion) -> Self {
        Self { track, start }
    }

    /// Default task for a track: parking starts from the training box,
    /// everything else from the track's own start with a little jitter.
    pub fn standard(platform: Platform, kind: TrackKind) -> Self {
        let track = ReferenceTrack::new(platform, kind);
        let start = match (platform, kind) {
            (Platform::Racecar, TrackKind::ParkAtGoal) => StartRegion::car_train(),
            _ => StartRegion::OnTrack { jitter: 0.05 },
        };
        Self { track, start }
    }

    /// Fixed representative start used for evaluation.
    pub fn nominal_start(&self) -> Result<StateVec> {
        let p = self.track.platform;
        match &self.start {
            StartRegion::OnTrack { .. } => self.track.reference_at(0),
            StartRegion::CarBox { x, y, yaw } => {
                let th = 0.5 * yaw;
                StateVec::new(p, vec![0.5 * (x.0 + x.1), y.0 + 0.625 * (y.1 - y.0), th.sin(), th.cos(), 0.0, 0.0, 0.0])
            }
            StartRegion::QuadBox { center, half } => {
                let mut v = vec![0.0; 13];
                for k in 0..3 {
                    v[k] = center[k] + 0.5 * half[k];
                }
                v[3] = 1.0;
                StateVec::new(p, v)
            }
        }
    }
}

/// Training tasks per platform: hover, circle and figure eight for the
/// quadrotor; circle and parking for the racecar.
pub fn default_tasks(platform: Platform) -> Vec<Task> {
    let kinds: &[TrackKind] = match platform {
        Platform::Quadrotor => &[TrackKind::Hover, TrackKind::Circle, TrackKind::Lemniscate],
        Platform::Racecar => &[TrackKind::Circle, TrackKind::ParkAtGoal],
    };
    kinds.iter().map(|k| Task::standard(platform, *k)).collect()
}
