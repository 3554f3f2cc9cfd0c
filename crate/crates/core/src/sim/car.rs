use crate::error::{invalid, Result};
use crate::types::{normalize_orientation, ActionVec, Platform, StateVec};

#[derive(Clone, Debug, PartialEq)]
pub struct CarParams {
    pub wheelbase: f64,
    /// Tyre-floor friction coefficient; 1 means full grip.
    pub friction: f64,
    /// Constant bias added to the steering command, rad.
    pub steering_offset: f64,
    /// Longitudinal velocity tracking time constant, s.
    pub velocity_tau: f64,
    pub dt: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        Self { wheelbase: 0.33, friction: 1.0, steering_offset: 0.0, velocity_tau: 0.2, dt: 0.05 }
    }
}

impl CarParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase > 0.0) || !(self.dt > 0.0) || !(self.velocity_tau > 0.0) {
            return invalid("wheelbase, dt and velocity time constant must be positive");
        }
        if !(self.friction > 0.0 && self.friction <= 1.5) {
            return invalid("friction must lie in (0, 1.5]");
        }
        Ok(())
    }
}

/// Kinematic bicycle with first-order speed tracking and friction-limited grip.
///
/// With full grip the yaw rate equals the bicycle rate `v tan(delta) / L` and
/// the lateral body velocity is zero. Below full grip the yaw rate only moves
/// part of the way toward that target each step and lateral velocity
/// accumulates from the rotating body frame, which shows up as drift.
pub fn step_raw(s: &[f64], a: &[f64], p: &CarParams, out: &mut [f64]) {
    let dt = p.dt;
    let n = (s[2] * s[2] + s[3] * s[3]).sqrt();
    let (sn, cs) = if n > 1e-12 { (s[2] / n, s[3] / n) } else { (0.0, 1.0) };
    let (vx, vy, w) = (s[4], s[5], s[6]);

    let v_long = vx * cs + vy * sn;
    let v_lat = -vx * sn + vy * cs;
    let v_long_next = v_long + dt / p.velocity_tau * (a[1] - v_long);

    let grip = p.friction.min(1.0);
    let yaw_target = v_long_next * (a[0] + p.steering_offset).tan() / p.wheelbase;
    let w_next = w + grip * (yaw_target - w);
    let v_lat_next = (1.0 - grip) * (v_lat - dt * v_long_next * w_next);

    // heading advances with the current yaw rate
    let (dsn, dcs) = (dt * w).sin_cos();
    let sn_next = sn * dcs + cs * dsn;
    let cs_next = cs * dcs - sn * dsn;

    let vx_next = v_long_next * cs_next - v_lat_next * sn_next;
    let vy_next = v_long_next * sn_next + v_lat_next * cs_next;

    out[0] = s[0] + dt * vx_next;
    out[1] = s[1] + dt * vy_next;
    out[2] = sn_next;
    out[3] = cs_next;
    out[4] = vx_next;
    out[5] = vy_next;
    out[6] = w_next;
    normalize_orientation(Platform::Racecar, out);
}

pub fn racecar_step(s: &StateVec, a: &ActionVec, p: &CarParams) -> Result<StateVec> {
    if s.platform() != Platform::Racecar || a.platform() != Platform::Racecar {
        return invalid("racecar_step needs racecar state and action");
    }
    if !s.is_finite() || a.values().iter().any(|v| !v.is_finite()) {
        return invalid("non-finite racecar input");
    }
    p.validate()?;
    let mut out = vec![0.0; 7];
    step_raw(s.values(), a.values(), p, &mut out);
    StateVec::new(Platform::Racecar, out)
}
