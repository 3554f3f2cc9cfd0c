//! Tracking cost and evaluation metrics.

use crate::error::{invalid, Result};
use crate::types::{CostWeights, Platform, StateVec, Trajectory, UNIT_TOL};

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn unit_check(v: &[f64], what: &str) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return invalid(format!("{what} is not unit norm (|v| = {n})"));
    }
    Ok(())
}

/// Rotation distance `1 - (q . q*)^2` between unit quaternions.
///
/// Insensitive to the sign ambiguity of quaternions.
pub fn quat_distance(q: &[f64], q_star: &[f64]) -> Result<f64> {
    if q.len() != 4 || q_star.len() != 4 {
        return invalid("quaternions have four components");
    }
    unit_check(q, "quaternion")?;
    unit_check(q_star, "target quaternion")?;
    Ok(quat_distance_raw(q, q_star))
}

#[inline]
fn quat_distance_raw(q: &[f64], q_star: &[f64]) -> f64 {
    let dot: f64 = q.iter().zip(q_star).map(|(a, b)| a * b).sum();
    (1.0 - dot * dot).clamp(0.0, 1.0)
}

/// Heading distance from (sin, cos) pairs: `|sin - sin*| + |cos - cos*|`.
pub fn yaw_distance(sin: f64, cos: f64, sin_star: f64, cos_star: f64) -> Result<f64> {
    unit_check(&[sin, cos], "heading")?;
    unit_check(&[sin_star, cos_star], "target heading")?;
    Ok((sin - sin_star).abs() + (cos - cos_star).abs())
}

/// Single-step tracking cost of `s` against `target`.
pub fn step_cost(s: &StateVec, target: &StateVec, w: &CostWeights) -> Result<f64> {
    if s.platform() != target.platform() {
        return invalid(format!("platform mismatch: {} vs {}", s.platform(), target.platform()));
    }
    w.validate()?;
    let p = s.platform();
    let (lo, hi) = p.layout().orientation;
    unit_check(&s.values()[lo..hi], "state orientation")?;
    unit_check(&target.values()[lo..hi], "target orientation")?;
    Ok(stage_cost(p, s.values(), target.values(), w))
}

/// Unchecked cost on raw slices, used inside rollouts.
///
/// The orientation block of `s` is projected to unit norm before use, so
/// predictions of learned models that drift off the unit sphere still give
/// a bounded rotation term. Non-finite input yields a non-finite cost.
#[inline]
pub fn stage_cost(platform: Platform, s: &[f64], target: &[f64], w: &CostWeights) -> f64 {
    let l = platform.layout();
    let mut c = 0.0;
    if w.position != 0.0 {
        c += w.position * norm_diff(&s[l.position.0..l.position.1], &target[l.position.0..l.position.1]);
    }
    if w.orientation != 0.0 {
        let o = &s[l.orientation.0..l.orientation.1];
        let o_star = &target[l.orientation.0..l.orientation.1];
        let n = o.iter().map(|x| x * x).sum::<f64>().sqrt();
        let d = if n > 1e-12 {
            match platform {
                Platform::Quadrotor => {
                    let dot: f64 = o.iter().zip(o_star).map(|(a, b)| a * b).sum::<f64>() / n;
                    (1.0 - dot * dot).max(0.0)
                }
                Platform::Racecar => (o[0] / n - o_star[0]).abs() + (o[1] / n - o_star[1]).abs(),
            }
        } else if n.is_finite() {
            1.0
        } else {
            f64::NAN
        };
        c += w.orientation * d;
    }
    if w.velocity != 0.0 {
        c += w.velocity * norm_diff(&s[l.velocity.0..l.velocity.1], &target[l.velocity.0..l.velocity.1]);
    }
    if w.angular_velocity != 0.0 {
        c += w.angular_velocity
            * norm_diff(
                &s[l.angular_velocity.0..l.angular_velocity.1],
                &target[l.angular_velocity.0..l.angular_velocity.1],
            );
    }
    c
}

/// Euclidean position error of a state against its target.
pub fn position_error(s: &StateVec, target: &StateVec) -> f64 {
    norm_diff(s.position(), target.position())
}

/// Mean position error over a trajectory.
///
/// `reference[t]` is the target for the successor state of transition `t`.
pub fn avg_position_error(traj: &Trajectory, reference: &[StateVec]) -> Result<f64> {
    if traj.is_empty() {
        return invalid("average position error of an empty trajectory");
    }
    if reference.len() < traj.len() {
        return invalid(format!("reference has {} targets for {} steps", reference.len(), traj.len()));
    }
    let total: f64 = traj
        .transitions
        .iter()
        .zip(reference)
        .map(|(tr, r)| position_error(&tr.s_next, r))
        .sum();
    Ok(total / traj.len() as f64)
}
