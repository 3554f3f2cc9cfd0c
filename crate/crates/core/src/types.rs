//! Platform-agnostic state, action and trajectory types.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Unit-norm tolerance used for quaternion and heading checks.
pub const UNIT_TOL: f64 = 1e-6;

/// Default episode cap in environment steps.
pub const MAX_EPISODE_STEPS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Platform {
    Quadrotor,
    Racecar,
}

/// Index ranges of the semantic blocks inside a flat state vector.
#[derive(Clone, Copy, Debug)]
pub struct StateLayout {
    pub position: (usize, usize),
    pub orientation: (usize, usize),
    pub velocity: (usize, usize),
    pub angular_velocity: (usize, usize),
}

impl Platform {
    pub const fn state_dim(self) -> usize {
        match self {
            Platform::Quadrotor => 13,
            Platform::Racecar => 7,
        }
    }

    pub const fn action_dim(self) -> usize {
        match self {
            Platform::Quadrotor => 4,
            Platform::Racecar => 2,
        }
    }

    /// Width of a concatenated state-action model input.
    pub const fn input_dim(self) -> usize {
        self.state_dim() + self.action_dim()
    }

    pub const fn layout(self) -> StateLayout {
        match self {
            Platform::Quadrotor => StateLayout {
                position: (0, 3),
                orientation: (3, 7),
                velocity: (7, 10),
                angular_velocity: (10, 13),
            },
            Platform::Racecar => StateLayout {
                position: (0, 2),
                orientation: (2, 4),
                velocity: (4, 6),
                angular_velocity: (6, 7),
            },
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Platform::Quadrotor => "quadrotor",
            Platform::Racecar => "racecar",
        }
    }

    /// Index of the vertical position (quadrotor only).
    pub const Z_INDEX: usize = 2;
    /// Index of the vertical velocity (quadrotor only).
    pub const VZ_INDEX: usize = 9;
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quadrotor" | "quad" => Ok(Platform::Quadrotor),
            "racecar" | "car" => Ok(Platform::Racecar),
            other => invalid(format!("unknown platform `{other}`")),
        }
    }
}

/// Renormalises the orientation block (quaternion or (sin, cos) pair) in place.
///
/// A zero-norm block is reset to the identity orientation.
pub fn normalize_orientation(platform: Platform, values: &mut [f64]) {
    let (lo, hi) = platform.layout().orientation;
    let block = &mut values[lo..hi];
    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 && norm.is_finite() {
        block.iter_mut().for_each(|v| *v /= norm);
    } else {
        block.iter_mut().for_each(|v| *v = 0.0);
        match platform {
            Platform::Quadrotor => block[0] = 1.0,
            Platform::Racecar => block[1] = 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVec {
    platform: Platform,
    values: Vec<f64>,
}

impl StateVec {
    pub fn new(platform: Platform, values: Vec<f64>) -> Result<Self> {
        if values.len() != platform.state_dim() {
            return invalid(format!(
                "{platform} state needs {} values, got {}",
                platform.state_dim(),
                values.len()
            ));
        }
        Ok(Self { platform, values })
    }

    pub fn zeros(platform: Platform) -> Self {
        let mut values = vec![0.0; platform.state_dim()];
        normalize_orientation(platform, &mut values);
        Self { platform, values }
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn position(&self) -> &[f64] {
        let (lo, hi) = self.platform.layout().position;
        &self.values[lo..hi]
    }

    pub fn orientation(&self) -> &[f64] {
        let (lo, hi) = self.platform.layout().orientation;
        &self.values[lo..hi]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn normalize(&mut self) {
        normalize_orientation(self.platform, &mut self.values);
    }

    /// Norm of the orientation block; 1 for a valid state.
    pub fn orientation_norm(&self) -> f64 {
        self.orientation().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionVec {
    platform: Platform,
    values: Vec<f64>,
}

impl ActionVec {
    pub fn new(platform: Platform, values: Vec<f64>) -> Result<Self> {
        if values.len() != platform.action_dim() {
            return invalid(format!(
                "{platform} action needs {} values, got {}",
                platform.action_dim(),
                values.len()
            ));
        }
        Ok(Self { platform, values })
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Closed per-component action intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ActionBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return invalid("action bounds must be matching closed intervals");
        }
        Ok(Self { lo, hi })
    }

    pub fn default_for(platform: Platform) -> Self {
        match platform {
            // thrust N, body rates rad/s
            Platform::Quadrotor => Self {
                lo: vec![0.0, -4.0, -4.0, -4.0],
                hi: vec![0.6, 4.0, 4.0, 4.0],
            },
            // steering rad, longitudinal velocity m/s
            Platform::Racecar => Self {
                lo: vec![-0.35, -2.5],
                hi: vec![0.35, 2.5],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp_in_place(&self, a: &mut [f64]) {
        for (i, v) in a.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().enumerate().all(|(i, v)| *v >= self.lo[i] && *v <= self.hi[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Ran for the full reference duration.
    Completed,
    /// Hit the ground plane.
    GroundContact,
    /// Stopped by the step cap.
    MaxSteps,
    /// The controller could not produce an action.
    PlannerFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::GroundContact => "ground_contact",
            Termination::MaxSteps => "max_steps",
            Termination::PlannerFailure => "planner_failure",
        }
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, Termination::GroundContact | Termination::PlannerFailure)
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "completed" => Termination::Completed,
            "ground_contact" => Termination::GroundContact,
            "max_steps" => Termination::MaxSteps,
            "planner_failure" => Termination::PlannerFailure,
            other => return invalid(format!("unknown termination flag `{other}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: StateVec,
    pub a: ActionVec,
    pub s_next: StateVec,
    pub t: usize,
    pub episode: usize,
}

impl Transition {
    pub fn new(s: StateVec, a: ActionVec, s_next: StateVec, t: usize, episode: usize) -> Result<Self> {
        if s.platform() != s_next.platform() || s.platform() != a.platform() {
            return invalid("transition mixes platforms");
        }
        Ok(Self { s, a, s_next, t, episode })
    }

    /// Concatenated `[state, action]` model input.
    pub fn input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.s.values().len() + self.a.values().len());
        x.extend_from_slice(self.s.values());
        x.extend_from_slice(self.a.values());
        x
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub platform: Platform,
    pub transitions: Vec<Transition>,
    pub termination: Termination,
    pub track: String,
}

impl Trajectory {
    pub fn new(platform: Platform, track: impl Into<String>) -> Self {
        Self {
            platform,
            transitions: Vec::new(),
            termination: Termination::Completed,
            track: track.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Checks platform consistency and consecutive step indices from 0.
    pub fn validate(&self, max_len: usize) -> Result<()> {
        if self.transitions.len() > max_len {
            return invalid(format!("trajectory longer than {max_len} steps"));
        }
        for (i, tr) in self.transitions.iter().enumerate() {
            if tr.t != i {
                return invalid(format!("step index {} at position {i}", tr.t));
            }
            if tr.s.platform() != self.platform {
                return invalid("trajectory mixes platforms");
            }
        }
        Ok(())
    }

    /// Visited states: the initial state followed by every successor.
    pub fn states(&self) -> impl Iterator<Item = &StateVec> {
        self.transitions
            .first()
            .map(|t| &t.s)
            .into_iter()
            .chain(self.transitions.iter().map(|t| &t.s_next))
    }
}

/// Nonnegative weights of the tracking cost terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    pub position: f64,
    pub orientation: f64,
    pub velocity: f64,
    pub angular_velocity: f64,
}

impl CostWeights {
    pub fn new(position: f64, orientation: f64, velocity: f64, angular_velocity: f64) -> Result<Self> {
        let w = Self { position, orientation, velocity, angular_velocity };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.position, self.orientation, self.velocity, self.angular_velocity];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return invalid("cost weights must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            position: self.position * c,
            orientation: self.orientation * c,
            velocity: self.velocity * c,
            angular_velocity: self.angular_velocity * c,
        }
    }

    pub fn default_for(platform: Platform) -> Self {
        match platform {
            Platform::Quadrotor => Self { position: 10.0, orientation: 2.0, velocity: 1.0, angular_velocity: 0.05 },
            Platform::Racecar => Self { position: 5.0, orientation: 1.0, velocity: 0.5, angular_velocity: 0.0 },
        }
    }
}
