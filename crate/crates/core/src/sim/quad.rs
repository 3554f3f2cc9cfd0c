use crate::error::{invalid, Result};
use crate::types::{normalize_orientation, ActionVec, Platform, StateVec};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    /// Diagonal body inertia, kg m^2.
    pub inertia: [f64; 3],
    /// Body-rate tracking time constant, s.
    pub rate_tau: f64,
    /// Offset of the centre of mass along body x, m.
    pub com_offset_x: f64,
    /// Planar wind force (x, y), N.
    pub wind: [f64; 2],
    pub dt: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 0.027,
            gravity: 9.81,
            inertia: [1.4e-5, 1.4e-5, 2.17e-5],
            rate_tau: 0.05,
            com_offset_x: 0.0,
            wind: [0.0, 0.0],
            dt: 0.02,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.dt > 0.0) || !(self.rate_tau > 0.0) {
            return invalid("quadrotor mass, dt and rate time constant must be positive");
        }
        if self.inertia.iter().any(|i| !(*i > 0.0)) {
            return invalid("quadrotor inertia must be positive");
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// One control period of the quadrotor, written into `out`.
///
/// Order of updates: body rates (first-order lag toward the command plus the
/// pitch torque of an off-centre mass), linear velocity from thrust along
/// body z, wind and gravity, then position and attitude from the updated
/// velocities. The quaternion is renormalised at the end.
pub fn step_raw(s: &[f64], a: &[f64], p: &QuadParams, out: &mut [f64]) {
    let dt = p.dt;
    let (qw, qx, qy, qz) = (s[3], s[4], s[5], s[6]);
    let k = dt / p.rate_tau;

    let wx = s[10] + k * (a[1] - s[10]);
    let mut wy = s[11] + k * (a[2] - s[11]);
    let wz = s[12] + k * (a[3] - s[12]);
    wy += dt * (-p.com_offset_x * a[0]) / p.inertia[1];

    let thrust_acc = a[0] / p.mass;
    let bz = [
        2.0 * (qx * qz + qw * qy),
        2.0 * (qy * qz - qw * qx),
        1.0 - 2.0 * (qx * qx + qy * qy),
    ];
    let acc = [
        thrust_acc * bz[0] + p.wind[0] / p.mass,
        thrust_acc * bz[1] + p.wind[1] / p.mass,
        thrust_acc * bz[2] - p.gravity,
    ];
    for i in 0..3 {
        out[7 + i] = s[7 + i] + dt * acc[i];
        out[i] = s[i] + dt * out[7 + i];
    }

    let h = 0.5 * dt;
    out[3] = qw - h * (qx * wx + qy * wy + qz * wz);
    out[4] = qx + h * (qw * wx + qy * wz - qz * wy);
    out[5] = qy + h * (qw * wy - qx * wz + qz * wx);
    out[6] = qz + h * (qw * wz + qx * wy - qy * wx);
    out[10] = wx;
    out[11] = wy;
    out[12] = wz;
    normalize_orientation(Platform::Quadrotor, out);
}

pub fn quadrotor_step(s: &StateVec, a: &ActionVec, p: &QuadParams) -> Result<StateVec> {
    if s.platform() != Platform::Quadrotor || a.platform() != Platform::Quadrotor {
        return invalid("quadrotor_step needs quadrotor state and action");
    }
    if !s.is_finite() || a.values().iter().any(|v| !v.is_finite()) {
        return invalid("non-finite quadrotor input");
    }
    p.validate()?;
    let mut out = vec![0.0; 13];
    step_raw(s.values(), a.values(), p, &mut out);
    StateVec::new(Platform::Quadrotor, out)
}
