use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::types::{Platform, StateVec, MAX_EPISODE_STEPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrackKind {
    Hover,
    Circle,
    Lemniscate,
    ParkAtGoal,
    ReverseCircle,
}

impl TrackKind {
    pub fn name(self) -> &'static str {
        match self {
            TrackKind::Hover => "hover",
            TrackKind::Circle => "circle",
            TrackKind::Lemniscate => "lemniscate",
            TrackKind::ParkAtGoal => "park_at_goal",
            TrackKind::ReverseCircle => "reverse_circle",
        }
    }

    fn is_periodic(self) -> bool {
        matches!(self, TrackKind::Circle | TrackKind::Lemniscate | TrackKind::ReverseCircle)
    }
}

impl fmt::Display for TrackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "hover" => TrackKind::Hover,
            "circle" => TrackKind::Circle,
            "lemniscate" => TrackKind::Lemniscate,
            "park_at_goal" | "park" => TrackKind::ParkAtGoal,
            "reverse_circle" => TrackKind::ReverseCircle,
            other => return invalid(format!("unknown track `{other}`")),
        })
    }
}

/// Analytic reference path sampled at the control rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrack {
    pub kind: TrackKind,
    pub platform: Platform,
    /// Path centre; hover and parking use it as the goal.
    pub center: [f64; 3],
    pub radius: f64,
    /// Lap time, s.
    pub period: f64,
    /// Heading held at a parking goal (racecar).
    pub goal_yaw: f64,
    /// Episode length in steps.
    pub duration: usize,
    pub dt: f64,
}

impl ReferenceTrack {
    pub fn new(platform: Platform, kind: TrackKind) -> Self {
        match platform {
            Platform::Quadrotor => Self {
                kind,
                platform,
                center: [0.0, 0.0, 1.0],
                radius: 0.5,
                period: 5.0,
                goal_yaw: 0.0,
                duration: MAX_EPISODE_STEPS,
                dt: 0.02,
            },
            Platform::Racecar => Self {
                kind,
                platform,
                center: if kind == TrackKind::ParkAtGoal { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 0.0] },
                radius: 1.0,
                period: 12.0,
                goal_yaw: 0.0,
                duration: MAX_EPISODE_STEPS,
                dt: 0.05,
            },
        }
    }

    pub fn id(&self) -> &'static str {
        self.kind.name()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_periodic() && !(self.period > 0.0) {
            return invalid("periodic track needs a positive period");
        }
        if !(self.dt > 0.0) {
            return invalid("track dt must be positive");
        }
        Ok(())
    }

    /// Same path traversed `factor` times faster.
    pub fn sped_up(mut self, factor: f64) -> Self {
        self.period /= factor;
        self
    }

    /// Circles traversed in the opposite direction.
    pub fn reversed(mut self) -> Self {
        self.kind = match self.kind {
            TrackKind::Circle => TrackKind::ReverseCircle,
            TrackKind::ReverseCircle => TrackKind::Circle,
            k => k,
        };
        self
    }

    /// Position and velocity on the path at time `time` seconds.
    fn path(&self, time: f64) -> ([f64; 3], [f64; 3]) {
        let c = self.center;
        let r = self.radius;
        let om = TAU / self.period;
        match self.kind {
            TrackKind::Hover | TrackKind::ParkAtGoal => (c, [0.0; 3]),
            TrackKind::Circle | TrackKind::ReverseCircle => {
                let sgn = if self.kind == TrackKind::Circle { 1.0 } else { -1.0 };
                let ph = sgn * om * time;
                (
                    [c[0] + r * ph.cos(), c[1] + r * ph.sin(), c[2]],
                    [-r * sgn * om * ph.sin(), r * sgn * om * ph.cos(), 0.0],
                )
            }
            TrackKind::Lemniscate => {
                // figure eight of Gerono: (r sin ph, r sin ph cos ph)
                let ph = om * time;
                (
                    [c[0] + r * ph.sin(), c[1] + 0.5 * r * (2.0 * ph).sin(), c[2]],
                    [r * om * ph.cos(), r * om * (2.0 * ph).cos(), 0.0],
                )
            }
        }
    }

    fn heading(&self, time: f64) -> f64 {
        let (_, v) = self.path(time);
        if v[0].hypot(v[1]) < 1e-9 {
            self.goal_yaw
        } else {
            v[1].atan2(v[0])
        }
    }

    /// Target state at step `t`, for `t` in `0..=duration`.
    pub fn reference_at(&self, t: usize) -> Result<StateVec> {
        if t > self.duration {
            return invalid(format!("step {t} beyond track duration {}", self.duration));
        }
        self.validate()?;
        Ok(self.target(t))
    }

    /// Target state with `t` clamped to the track duration.
    pub fn reference_clamped(&self, t: usize) -> StateVec {
        self.target(t.min(self.duration))
    }

    fn target(&self, t: usize) -> StateVec {
        let time = t as f64 * self.dt;
        let (p, v) = self.path(time);
        let mut s = vec![0.0; self.platform.state_dim()];
        match self.platform {
            Platform::Quadrotor => {
                s[..3].copy_from_slice(&p);
                s[3] = 1.0;
                s[7..10].copy_from_slice(&v);
            }
            Platform::Racecar => {
                let yaw = self.heading(time);
                s[0] = p[0];
                s[1] = p[1];
                s[2] = yaw.sin();
                s[3] = yaw.cos();
                s[4] = v[0];
                s[5] = v[1];
                let h = 1e-4;
                let mut dyaw = self.heading(time + h) - self.heading(time - h);
                dyaw = (dyaw + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                s[6] = dyaw / (2.0 * h);
            }
        }
        StateVec::new(self.platform, s).expect("dimension fixed by platform")
    }

    /// Targets for steps `1..=duration`, aligned with transition successors.
    pub fn targets(&self) -> Vec<StateVec> {
        (1..=self.duration).map(|t| self.target(t)).collect()
    }
}
