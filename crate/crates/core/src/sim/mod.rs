//! Analytical simulators, disturbance patches and reference tracks.

mod car;
mod disturbance;
mod quad;
mod track;

pub use car::{racecar_step, CarParams};
pub use disturbance::{
    apply_disturbance, DisturbanceScenario, COM_OFFSET_X, LOW_FRICTION, STEERING_OFFSET, WIND_STRONG, WIND_WEAK,
};
pub use quad::{quadrotor_step, QuadParams};
pub use track::{ReferenceTrack, TrackKind};

use crate::error::{invalid, Result};
use crate::types::{ActionVec, Platform, StateVec};

/// A ground-truth environment: one platform with its physical parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Env {
    Quad(QuadParams),
    Car(CarParams),
}

impl Env {
    pub fn nominal(platform: Platform) -> Self {
        match platform {
            Platform::Quadrotor => Env::Quad(QuadParams::default()),
            Platform::Racecar => Env::Car(CarParams::default()),
        }
    }

    pub fn platform(&self) -> Platform {
        match self {
            Env::Quad(_) => Platform::Quadrotor,
            Env::Car(_) => Platform::Racecar,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Env::Quad(p) => p.dt,
            Env::Car(p) => p.dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Env::Quad(p) => p.validate(),
            Env::Car(p) => p.validate(),
        }
    }

    pub fn step(&self, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
        match self {
            Env::Quad(p) => quadrotor_step(s, a, p),
            Env::Car(p) => racecar_step(s, a, p),
        }
    }

    /// Unchecked step on raw slices.
    #[inline]
    pub fn step_raw(&self, s: &[f64], a: &[f64], out: &mut [f64]) {
        match self {
            Env::Quad(p) => quad::step_raw(s, a, p, out),
            Env::Car(p) => car::step_raw(s, a, p, out),
        }
    }
}

/// Ground contact ends a quadrotor episode; the racecar never terminates.
pub fn is_terminated(s: &StateVec) -> bool {
    match s.platform() {
        Platform::Quadrotor => s.values()[Platform::Z_INDEX] <= 0.0,
        Platform::Racecar => false,
    }
}

pub fn check_platform(env: &Env, platform: Platform) -> Result<()> {
    if env.platform() != platform {
        return invalid(format!("environment is {}, expected {platform}", env.platform()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_rules() {
        let mut s = StateVec::zeros(Platform::Quadrotor);
        s.values_mut()[2] = 0.5;
        assert!(!is_terminated(&s));
        s.values_mut()[2] = -0.01;
        assert!(is_terminated(&s));
        let mut c = StateVec::zeros(Platform::Racecar);
        c.values_mut()[0] = -1e6;
        assert!(!is_terminated(&c));
    }

    #[test]
    fn stepping_is_deterministic() {
        let env = Env::nominal(Platform::Quadrotor);
        let mut s = StateVec::zeros(Platform::Quadrotor);
        s.values_mut()[2] = 1.0;
        let a = ActionVec::new(Platform::Quadrotor, vec![0.3, 0.2, -0.1, 0.5]).unwrap();
        assert_eq!(env.step(&s, &a).unwrap(), env.step(&s, &a).unwrap());
    }

    #[test]
    fn quaternion_stays_unit_over_long_runs() {
        let env = Env::nominal(Platform::Quadrotor);
        let mut s = StateVec::zeros(Platform::Quadrotor);
        s.values_mut()[2] = 1000.0;
        for k in 0..2000 {
            let a = ActionVec::new(Platform::Quadrotor, vec![0.3, (k as f64 * 0.1).sin() * 3.0, 2.0, -1.0]).unwrap();
            s = env.step(&s, &a).unwrap();
            assert!((s.orientation_norm() - 1.0).abs() < 1e-6);
        }
    }
}
