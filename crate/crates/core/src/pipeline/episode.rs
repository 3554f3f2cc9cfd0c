use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cost::{avg_position_error, step_cost};
use crate::dynamics::Dynamics;
use crate::error::{invalid, Error, Result};
use crate::mppi::{Mppi, MppiConfig};
use crate::seed;
use crate::sim::{check_platform, is_terminated, Env, ReferenceTrack};
use crate::types::{ActionBounds, ActionVec, CostWeights, Platform, StateVec, Termination, Trajectory, Transition};

/// Anything that picks an action for the current state and track step.
pub trait Controller {
    fn platform(&self) -> Platform;

    /// Called before every episode.
    fn reset(&mut self) {}

    fn act(&mut self, s: &StateVec, track: &ReferenceTrack, t: usize) -> Result<ActionVec>;
}

/// MPPI driving a borrowed dynamics model.
pub struct MppiController<'a, M: Dynamics + ?Sized> {
    model: &'a M,
    mppi: Mppi,
}

impl<'a, M: Dynamics + ?Sized> MppiController<'a, M> {
    pub fn new(model: &'a M, cfg: MppiConfig) -> Result<Self> {
        let mppi = Mppi::new(model.platform(), cfg)?;
        Ok(Self { model, mppi })
    }
}

impl<M: Dynamics + ?Sized> Controller for MppiController<'_, M> {
    fn platform(&self) -> Platform {
        self.model.platform()
    }

    fn reset(&mut self) {
        self.mppi.reset();
    }

    fn act(&mut self, s: &StateVec, track: &ReferenceTrack, t: usize) -> Result<ActionVec> {
        Ok(self.mppi.act(self.model, s, track, t)?.action)
    }
}

/// Independent uniform samples from the action box.
pub struct RandomController {
    platform: Platform,
    bounds: ActionBounds,
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(platform: Platform, bounds: ActionBounds, seed_value: u64) -> Result<Self> {
        if bounds.dim() != platform.action_dim() {
            return invalid("bounds do not match platform");
        }
        Ok(Self { platform, bounds, rng: seed::rng(seed_value, 0xAA, 0) })
    }
}

impl Controller for RandomController {
    fn platform(&self) -> Platform {
        self.platform
    }

    fn act(&mut self, _: &StateVec, _: &ReferenceTrack, _: usize) -> Result<ActionVec> {
        let v = self.bounds.lo.iter().zip(&self.bounds.hi).map(|(l, h)| self.rng.random_range(*l..=*h)).collect();
        ActionVec::new(self.platform, v)
    }
}

/// Replays one fixed action.
pub struct ConstantController(pub ActionVec);

impl Controller for ConstantController {
    fn platform(&self) -> Platform {
        self.0.platform()
    }

    fn act(&mut self, _: &StateVec, _: &ReferenceTrack, _: usize) -> Result<ActionVec> {
        Ok(self.0.clone())
    }
}

/// Runs `ctrl` in `env` from `start` for up to `max_steps` steps.
///
/// Quadrotor ground contact truncates the episode; a planning failure
/// truncates it at the failing step. Flips, drift and other risky but
/// non-terminal behaviour are kept in full.
pub fn collect_episode<C: Controller + ?Sized>(
    env: &Env,
    ctrl: &mut C,
    track: &ReferenceTrack,
    start: &StateVec,
    max_steps: usize,
    episode: usize,
) -> Result<Trajectory> {
    check_platform(env, ctrl.platform())?;
    if track.platform != env.platform() || start.platform() != env.platform() {
        return invalid("track or start state platform does not match the environment");
    }
    if max_steps == 0 {
        return invalid("max_steps must be at least 1");
    }
    ctrl.reset();
    let mut traj = Trajectory::new(env.platform(), track.id());
    traj.termination = if max_steps < track.duration { Termination::MaxSteps } else { Termination::Completed };
    let mut s = start.clone();
    for t in 0..max_steps {
        let a = match ctrl.act(&s, track, t) {
            Ok(a) => a,
            Err(Error::Planning(_)) => {
                traj.termination = Termination::PlannerFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        let next = env.step(&s, &a)?;
        let done = is_terminated(&next);
        traj.transitions.push(Transition::new(s, a, next.clone(), t, episode)?);
        s = next;
        if done {
            traj.termination = Termination::GroundContact;
            break;
        }
    }
    Ok(traj)
}

/// Summed tracking cost of an episode against the track targets. Steps
/// lost to truncation are charged at the last state's cost, so an early
/// crash never looks cheaper than flying the whole track.
pub fn episode_cost(traj: &Trajectory, track: &ReferenceTrack, w: &CostWeights) -> Result<f64> {
    if traj.is_empty() {
        return invalid("empty trajectory");
    }
    let mut total = 0.0;
    for tr in &traj.transitions {
        total += step_cost(&tr.s_next, &track.reference_clamped(tr.t + 1), w)?;
    }
    if traj.termination.is_truncated() {
        let last = &traj.transitions.last().unwrap().s_next;
        for t in traj.len() + 1..=track.duration {
            total += step_cost(last, &track.reference_clamped(t), w)?;
        }
    }
    Ok(total)
}

/// Mean position error of an episode against its track, with the same
/// truncation charge as [`episode_cost`].
pub fn episode_position_error(traj: &Trajectory, track: &ReferenceTrack) -> Result<f64> {
    let refs: Vec<StateVec> = (1..=traj.len()).map(|t| track.reference_clamped(t)).collect();
    let mut err = avg_position_error(traj, &refs)?;
    if traj.termination.is_truncated() && traj.len() < track.duration {
        let last = &traj.transitions.last().unwrap().s_next;
        let mut tail = 0.0;
        for t in traj.len() + 1..=track.duration {
            tail += crate::cost::position_error(last, &track.reference_clamped(t));
        }
        err = (err * traj.len() as f64 + tail) / track.duration as f64;
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TrackKind;

    #[test]
    fn zero_thrust_falls_to_the_ground() {
        let env = Env::nominal(Platform::Quadrotor);
        let track = ReferenceTrack::new(Platform::Quadrotor, TrackKind::Hover);
        let start = track.reference_at(0).unwrap();
        let mut ctrl = ConstantController(ActionVec::new(Platform::Quadrotor, vec![0.0; 4]).unwrap());
        let traj = collect_episode(&env, &mut ctrl, &track, &start, 400, 0).unwrap();
        assert_eq!(traj.termination, Termination::GroundContact);
        assert!(traj.len() < 400);
        assert!(traj.transitions.last().unwrap().s_next.values()[2] <= 0.0);
        traj.validate(400).unwrap();
        let full = episode_cost(&traj, &track, &CostWeights::default_for(Platform::Quadrotor)).unwrap();
        assert!(full > 0.0);
        // the tail charge makes the mean error equal the ground distance once landed (the last state sits just below z = 0)
        let e = episode_position_error(&traj, &track).unwrap();
        assert!(e > 0.5 && e <= 1.05, "{e}");
    }

    #[test]
    fn single_step_episode() {
        let env = Env::nominal(Platform::Racecar);
        let track = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle);
        let start = track.reference_at(0).unwrap();
        let mut ctrl = RandomController::new(Platform::Racecar, ActionBounds::default_for(Platform::Racecar), 1).unwrap();
        let traj = collect_episode(&env, &mut ctrl, &track, &start, 1, 0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.termination, Termination::MaxSteps);
        assert!(collect_episode(&env, &mut ctrl, &track, &start, 0, 0).is_err());
    }

    #[test]
    fn platform_mismatch_rejected() {
        let env = Env::nominal(Platform::Racecar);
        let track = ReferenceTrack::new(Platform::Quadrotor, TrackKind::Hover);
        let start = track.reference_at(0).unwrap();
        let mut ctrl = ConstantController(ActionVec::new(Platform::Quadrotor, vec![0.0; 4]).unwrap());
        assert!(collect_episode(&env, &mut ctrl, &track, &start, 10, 0).is_err());
    }
}
