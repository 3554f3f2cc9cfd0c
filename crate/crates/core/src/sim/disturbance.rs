use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::types::Platform;

use super::Env;

/// Weak planar wind force per axis, N.
pub const WIND_WEAK: f64 = 0.03;
/// Strong planar wind force per axis, N.
pub const WIND_STRONG: f64 = 0.08;
/// Centre-of-mass offset along body x, m.
pub const COM_OFFSET_X: f64 = 4e-4;
pub const LOW_FRICTION: f64 = 0.4;
pub const STEERING_OFFSET: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DisturbanceScenario {
    None,
    MassPlus11_1,
    MassPlus25_9,
    ComOffsetX,
    WindWeak,
    WindStrong,
    LowFriction,
    SteeringOffset,
    SpeedX4,
    ReverseTrack,
}

impl DisturbanceScenario {
    pub const ALL: [DisturbanceScenario; 10] = [
        Self::None,
        Self::MassPlus11_1,
        Self::MassPlus25_9,
        Self::ComOffsetX,
        Self::WindWeak,
        Self::WindStrong,
        Self::LowFriction,
        Self::SteeringOffset,
        Self::SpeedX4,
        Self::ReverseTrack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::MassPlus11_1 => "mass_plus_11_1",
            Self::MassPlus25_9 => "mass_plus_25_9",
            Self::ComOffsetX => "com_offset_x",
            Self::WindWeak => "wind_weak",
            Self::WindStrong => "wind_strong",
            Self::LowFriction => "low_friction",
            Self::SteeringOffset => "steering_offset",
            Self::SpeedX4 => "speed_x4",
            Self::ReverseTrack => "reverse_track",
        }
    }

    pub fn applies_to(self, platform: Platform) -> bool {
        match self {
            Self::None => true,
            Self::MassPlus11_1 | Self::MassPlus25_9 | Self::ComOffsetX | Self::WindWeak | Self::WindStrong => {
                platform == Platform::Quadrotor
            }
            Self::LowFriction | Self::SteeringOffset | Self::SpeedX4 | Self::ReverseTrack => platform == Platform::Racecar,
        }
    }

    /// Time compression applied to reference tracks.
    pub fn track_speedup(self) -> f64 {
        if self == Self::SpeedX4 {
            4.0
        } else {
            1.0
        }
    }

    pub fn reverses_track(self) -> bool {
        self == Self::ReverseTrack
    }
}

impl fmt::Display for DisturbanceScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisturbanceScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown disturbance `{s}`")))
    }
}

/// Returns `base` patched for scenario `d`.
///
/// Track-level scenarios (`speed_x4`, `reverse_track`) leave the physical
/// parameters untouched; they act through [`DisturbanceScenario::track_speedup`]
/// and [`DisturbanceScenario::reverses_track`].
pub fn apply_disturbance(base: &Env, d: DisturbanceScenario) -> Result<Env> {
    if !d.applies_to(base.platform()) {
        return invalid(format!("scenario {d} does not apply to {}", base.platform()));
    }
    let mut env = base.clone();
    match &mut env {
        Env::Quad(p) => match d {
            DisturbanceScenario::MassPlus11_1 => p.mass *= 1.111,
            DisturbanceScenario::MassPlus25_9 => p.mass *= 1.259,
            DisturbanceScenario::ComOffsetX => p.com_offset_x = COM_OFFSET_X,
            DisturbanceScenario::WindWeak => p.wind = [WIND_WEAK, WIND_WEAK],
            DisturbanceScenario::WindStrong => p.wind = [WIND_STRONG, WIND_STRONG],
            _ => {}
        },
        Env::Car(p) => match d {
            DisturbanceScenario::LowFriction => p.friction = LOW_FRICTION,
            DisturbanceScenario::SteeringOffset => p.steering_offset = STEERING_OFFSET,
            _ => {}
        },
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CarParams, QuadParams};

    #[test]
    fn none_is_identity() {
        let q = Env::Quad(QuadParams::default());
        assert_eq!(apply_disturbance(&q, DisturbanceScenario::None).unwrap(), q);
    }

    #[test]
    fn mass_patches() {
        let q = Env::Quad(QuadParams::default());
        let Env::Quad(p) = apply_disturbance(&q, DisturbanceScenario::MassPlus11_1).unwrap() else { panic!() };
        assert!((p.mass - 0.029997).abs() < 1e-12);
        let Env::Quad(p) = apply_disturbance(&q, DisturbanceScenario::MassPlus25_9).unwrap() else { panic!() };
        assert!((p.mass - 0.027 * 1.259).abs() < 1e-15);
    }

    #[test]
    fn steering_offset_patch() {
        let c = Env::Car(CarParams::default());
        let Env::Car(p) = apply_disturbance(&c, DisturbanceScenario::SteeringOffset).unwrap() else { panic!() };
        assert_eq!(p.steering_offset, 0.1);
    }

    #[test]
    fn platform_mismatch_rejected() {
        let c = Env::Car(CarParams::default());
        assert!(apply_disturbance(&c, DisturbanceScenario::WindWeak).is_err());
        let q = Env::Quad(QuadParams::default());
        assert!(apply_disturbance(&q, DisturbanceScenario::LowFriction).is_err());
    }

    #[test]
    fn names_round_trip() {
        for d in DisturbanceScenario::ALL {
            assert_eq!(d.name().parse::<DisturbanceScenario>().unwrap(), d);
        }
    }
}
