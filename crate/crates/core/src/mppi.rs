//! Model predictive path integral control.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cost::stage_cost;
use crate::dynamics::Dynamics;
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::sim::{QuadParams, ReferenceTrack};
use crate::types::{normalize_orientation, ActionBounds, ActionVec, CostWeights, Platform, StateVec};

/// Rollouts are simulated in fixed blocks, each with its own random
/// stream, so results do not depend on the number of worker threads.
const BLOCK: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct MppiConfig {
    pub samples: usize,
    pub horizon: usize,
    /// Temperature of the exponential weighting.
    pub temperature: f64,
    pub noise_std: Vec<f64>,
    pub bounds: ActionBounds,
    pub weights: CostWeights,
    pub seed: u64,
}

impl MppiConfig {
    /// 1024 samples over a 0.8 s horizon at the platform's control rate.
    pub fn default_for(platform: Platform, dt: f64) -> Self {
        let noise_std = match platform {
            Platform::Quadrotor => vec![0.08, 0.5, 0.5, 0.5],
            Platform::Racecar => vec![0.08, 0.3],
        };
        Self {
            samples: 1024,
            horizon: horizon_steps(dt),
            temperature: 0.05,
            noise_std,
            bounds: ActionBounds::default_for(platform),
            weights: CostWeights::default_for(platform),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return invalid("samples must be at least 1");
        }
        if self.horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return invalid("temperature must be positive");
        }
        if self.noise_std.len() != self.bounds.dim() {
            return invalid("noise_std length must match the action dimension");
        }
        if self.noise_std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid("noise_std entries must be positive");
        }
        self.weights.validate()
    }

    pub fn action_dim(&self) -> usize {
        self.bounds.dim()
    }
}

/// Steps in a 0.8 s horizon.
pub fn horizon_steps(dt: f64) -> usize {
    ((0.8 / dt).round() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub action: ActionVec,
    /// Total rollout cost of every sample; infinite for blown-up rollouts.
    pub costs: Vec<f64>,
    pub weights: Vec<f64>,
    /// First action of every sample, row-major.
    pub first_actions: Vec<f64>,
    /// Warm start for the next call: weighted sequence shifted by one step.
    pub nominal: Vec<f64>,
}

/// Normalised weights `exp(-(J_i - min J) / temperature)`.
pub fn mppi_weights(costs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let min = costs.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::Planning("every rollout produced non-finite states".into()));
    }
    let mut w: Vec<f64> =
        costs.iter().map(|&c| if c.is_finite() { (-(c - min) / temperature).exp() } else { 0.0 }).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    Ok(w)
}

/// Simulates `b` sequences (each `h * a` values) from `s0`, returning
/// per-sequence cost and, when requested, the visited states.
fn rollout_block<M: Dynamics + ?Sized>(
    model: &M,
    s0: &[f64],
    seqs: &[f64],
    b: usize,
    h: usize,
    refs: &[f64],
    w: &CostWeights,
    mut states: Option<&mut Vec<f64>>,
) -> Vec<f64> {
    let p = model.platform();
    let (d, na) = (p.state_dim(), p.action_dim());
    let width = d + na;
    let mut cur: Vec<f64> = s0.iter().copied().cycle().take(b * d).collect();
    let mut x = vec![0.0; b * width];
    let mut next = vec![0.0; b * d];
    let mut cost = vec![0.0f64; b];
    for t in 0..h {
        for r in 0..b {
            x[r * width..r * width + d].copy_from_slice(&cur[r * d..(r + 1) * d]);
            let a = &seqs[(r * h + t) * na..(r * h + t + 1) * na];
            x[r * width + d..(r + 1) * width].copy_from_slice(a);
        }
        model.predict_rows(&x, b, &mut next);
        let target = &refs[t * d..(t + 1) * d];
        for r in 0..b {
            let row = &mut next[r * d..(r + 1) * d];
            if !cost[r].is_finite() {
                row.copy_from_slice(&cur[r * d..(r + 1) * d]);
                continue;
            }
            if row.iter().all(|v| v.is_finite()) {
                normalize_orientation(p, row);
                let c = stage_cost(p, row, target, w);
                cost[r] = if c.is_finite() { cost[r] + c } else { f64::INFINITY };
            } else {
                cost[r] = f64::INFINITY;
                row.copy_from_slice(&cur[r * d..(r + 1) * d]);
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if let Some(st) = states.as_deref_mut() {
            st.extend_from_slice(&cur);
        }
    }
    cost
}

fn check_refs(p: Platform, refs: &[f64], h: usize) -> Result<()> {
    if refs.len() != h * p.state_dim() {
        return invalid(format!("expected {h} reference states"));
    }
    Ok(())
}

/// Auto-regressive rollout of one action sequence (`h` rows of actions)
/// against `h` reference states. Returns the predicted states and the
/// summed stage cost, which is infinite if the model produced non-finite
/// states.
pub fn rollout<M: Dynamics + ?Sized>(
    model: &M,
    s0: &StateVec,
    seq: &[f64],
    refs: &[f64],
    w: &CostWeights,
) -> Result<(Vec<StateVec>, f64)> {
    let p = model.platform();
    if s0.platform() != p {
        return invalid("initial state platform does not match model");
    }
    let na = p.action_dim();
    if seq.is_empty() || seq.len() % na != 0 {
        return invalid("action sequence must hold whole actions");
    }
    let h = seq.len() / na;
    check_refs(p, refs, h)?;
    w.validate()?;
    let mut visited = Vec::with_capacity(h * p.state_dim());
    let cost = rollout_block(model, s0.values(), seq, 1, h, refs, w, Some(&mut visited))[0];
    let states = visited.chunks(p.state_dim()).map(|c| StateVec::new(p, c.to_vec())).collect::<Result<_>>()?;
    Ok((states, cost))
}

/// One MPPI step: perturb `nominal` (`horizon` rows of actions) with
/// Gaussian noise, clamp to bounds, score every sample by rollout and
/// return the exponentially weighted first action.
pub fn plan<M: Dynamics + ?Sized>(
    model: &M,
    s0: &StateVec,
    refs: &[f64],
    cfg: &MppiConfig,
    nominal: &[f64],
) -> Result<PlanResult> {
    cfg.validate()?;
    let p = model.platform();
    if s0.platform() != p || cfg.action_dim() != p.action_dim() {
        return invalid("planner configuration does not match model platform");
    }
    let (h, na, n) = (cfg.horizon, p.action_dim(), cfg.samples);
    if nominal.len() != h * na {
        return invalid(format!("nominal sequence must hold {h} actions"));
    }
    check_refs(p, refs, h)?;

    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let b = BLOCK.min(n - blk * BLOCK);
            let mut rng = seed::rng(cfg.seed, 0x3221, blk as u64);
            let mut seqs = Vec::with_capacity(b * h * na);
            for _ in 0..b {
                for t in 0..h {
                    let start = seqs.len();
                    for k in 0..na {
                        let z: f64 = rng.sample(StandardNormal);
                        seqs.push(nominal[t * na + k] + cfg.noise_std[k] * z);
                    }
                    cfg.bounds.clamp_in_place(&mut seqs[start..]);
                }
            }
            let costs = rollout_block(model, s0.values(), &seqs, b, h, refs, &cfg.weights, None);
            (seqs, costs)
        })
        .collect();

    let costs: Vec<f64> = blocks.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let weights = mppi_weights(&costs, cfg.temperature)?;
    let mut avg = vec![0.0; h * na];
    let mut first_actions = Vec::with_capacity(n * na);
    let mut i = 0;
    for (seqs, _) in &blocks {
        for seq in seqs.chunks(h * na) {
            first_actions.extend_from_slice(&seq[..na]);
            let wi = weights[i];
            if wi > 0.0 {
                avg.iter_mut().zip(seq).for_each(|(a, v)| *a += wi * v);
            }
            i += 1;
        }
    }
    for t in 0..h {
        cfg.bounds.clamp_in_place(&mut avg[t * na..(t + 1) * na]);
    }
    let action = ActionVec::new(p, avg[..na].to_vec())?;
    let mut next_nominal = avg[na..].to_vec();
    next_nominal.extend_from_slice(&avg[(h - 1) * na..]);
    Ok(PlanResult { action, costs, weights, first_actions, nominal: next_nominal })
}

/// Action that roughly holds the platform still: hover thrust for the
/// quadrotor, zero steering and speed for the racecar.
pub fn resting_action(platform: Platform) -> Vec<f64> {
    match platform {
        Platform::Quadrotor => {
            let q = QuadParams::default();
            vec![q.mass * q.gravity, 0.0, 0.0, 0.0]
        }
        Platform::Racecar => vec![0.0, 0.0],
    }
}

/// Receding-horizon controller holding the warm-start sequence.
#[derive(Clone, Debug)]
pub struct Mppi {
    pub cfg: MppiConfig,
    nominal: Vec<f64>,
    calls: u64,
    platform: Platform,
}

impl Mppi {
    pub fn new(platform: Platform, cfg: MppiConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.action_dim() != platform.action_dim() {
            return invalid("planner bounds do not match platform");
        }
        let mut m = Self { cfg, nominal: Vec::new(), calls: 0, platform };
        m.reset();
        Ok(m)
    }

    pub fn reset(&mut self) {
        let mut rest = resting_action(self.platform);
        self.cfg.bounds.clamp_in_place(&mut rest);
        self.nominal = rest.iter().copied().cycle().take(self.cfg.horizon * rest.len()).collect();
        self.calls = 0;
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    /// Plans from `s` against explicit references and advances the warm start.
    pub fn plan_with_refs<M: Dynamics + ?Sized>(&mut self, model: &M, s: &StateVec, refs: &[f64]) -> Result<PlanResult> {
        let mut cfg = self.cfg.clone();
        cfg.seed = seed::derive(self.cfg.seed, 0x57E9, self.calls);
        let res = plan(model, s, refs, &cfg, &self.nominal)?;
        self.nominal.clone_from(&res.nominal);
        self.calls += 1;
        Ok(res)
    }

    /// Plans at step `t` of `track`, targeting steps `t+1 ..= t+H`.
    pub fn act<M: Dynamics + ?Sized>(
        &mut self,
        model: &M,
        s: &StateVec,
        track: &ReferenceTrack,
        t: usize,
    ) -> Result<PlanResult> {
        let refs = horizon_refs(track, t, self.cfg.horizon);
        self.plan_with_refs(model, s, &refs)
    }
}

/// Flattened targets for steps `t+1 ..= t+h`, clamped at the track end.
pub fn horizon_refs(track: &ReferenceTrack, t: usize, h: usize) -> Vec<f64> {
    (1..=h).flat_map(|k| track.reference_clamped(t + k).into_values()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::step_cost;
    use crate::sim::{Env, TrackKind};
    use crate::symreg::SrModel;
    use proptest::prelude::*;

    fn car_cfg(n: usize, h: usize) -> MppiConfig {
        let mut c = MppiConfig::default_for(Platform::Racecar, 0.05);
        c.samples = n;
        c.horizon = h;
        c
    }

    #[test]
    fn default_horizon_covers_point_eight_seconds() {
        assert_eq!(MppiConfig::default_for(Platform::Quadrotor, 0.02).horizon, 40);
        assert_eq!(MppiConfig::default_for(Platform::Racecar, 0.05).horizon, 16);
        assert_eq!(MppiConfig::default_for(Platform::Racecar, 0.05).samples, 1024);
    }

    #[test]
    fn single_step_rollout_matches_step_cost() {
        let env = Env::nominal(Platform::Quadrotor);
        let mut s0 = StateVec::zeros(Platform::Quadrotor);
        s0.values_mut()[3] = 1.0;
        s0.values_mut()[2] = 1.0;
        let target = ReferenceTrack::new(Platform::Quadrotor, TrackKind::Hover).reference_at(1).unwrap();
        let w = CostWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let a = [0.4, 0.1, 0.0, 0.0];
        let (states, j) = rollout(&env, &s0, &a, target.values(), &w).unwrap();
        let s1 = env.step(&s0, &ActionVec::new(Platform::Quadrotor, a.to_vec()).unwrap()).unwrap();
        assert_eq!(states[0], s1);
        assert!((j - step_cost(&s1, &target, &w).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_and_identity_model_cost_nothing() {
        let target = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle).reference_at(3).unwrap();
        let refs: Vec<f64> = (0..5).flat_map(|_| target.values().to_vec()).collect();
        let seq = [0.1, 1.0, -0.2, 0.5, 0.0, 0.0, 0.3, 2.0, 0.1, -1.0];
        let env = Env::nominal(Platform::Racecar);
        let zero = CostWeights::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(rollout(&env, &target, &seq, &refs, &zero).unwrap().1, 0.0);
        let ident = SrModel::passthrough(Platform::Racecar);
        let w = CostWeights::default_for(Platform::Racecar);
        assert_eq!(rollout(&ident, &target, &seq, &refs, &w).unwrap().1, 0.0);
    }

    #[test]
    fn blown_up_rollouts_are_infinite_and_all_invalid_is_an_error() {
        let mut exprs = SrModel::passthrough(Platform::Racecar).exprs().to_vec();
        exprs[0] = crate::symreg::Expr::parse("(* (* x0 x0) (* x0 1e200))").unwrap();
        let bad = SrModel::new(Platform::Racecar, exprs).unwrap();
        let mut s0 = StateVec::zeros(Platform::Racecar);
        s0.values_mut()[3] = 1.0;
        s0.values_mut()[0] = 10.0;
        let cfg = car_cfg(8, 3);
        let refs: Vec<f64> = (0..3).flat_map(|_| s0.values().to_vec()).collect();
        let (_, j) = rollout(&bad, &s0, &[0.0; 6], &refs, &cfg.weights).unwrap();
        assert!(j.is_infinite());
        let err = plan(&bad, &s0, &refs, &cfg, &[0.0; 6]).unwrap_err();
        assert!(matches!(err, Error::Planning(_)));
    }

    #[test]
    fn single_sample_returns_its_first_action() {
        let env = Env::nominal(Platform::Racecar);
        let track = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle);
        let s0 = track.reference_at(0).unwrap();
        let cfg = car_cfg(1, 4);
        let res = plan(&env, &s0, &horizon_refs(&track, 0, 4), &cfg, &[0.0; 8]).unwrap();
        assert_eq!(res.weights, vec![1.0]);
        assert_eq!(res.action.values(), &res.first_actions[..2]);
    }

    #[test]
    fn equal_costs_average_first_actions() {
        let env = Env::nominal(Platform::Racecar);
        let s0 = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle).reference_at(0).unwrap();
        let mut cfg = car_cfg(2, 3);
        cfg.weights = CostWeights::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let refs: Vec<f64> = (0..3).flat_map(|_| s0.values().to_vec()).collect();
        let res = plan(&env, &s0, &refs, &cfg, &[0.0; 6]).unwrap();
        let f = &res.first_actions;
        for k in 0..2 {
            assert_eq!(res.action.values()[k], 0.5 * f[k] + 0.5 * f[2 + k]);
        }
    }

    #[test]
    fn cold_temperature_selects_argmin() {
        let env = Env::nominal(Platform::Racecar);
        let track = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle);
        let s0 = track.reference_at(0).unwrap();
        let mut cfg = car_cfg(300, 6);
        cfg.temperature = 1e-9;
        let res = plan(&env, &s0, &horizon_refs(&track, 0, 6), &cfg, &[0.0; 12]).unwrap();
        let best = (0..300).min_by(|&a, &b| res.costs[a].total_cmp(&res.costs[b])).unwrap();
        for k in 0..2 {
            assert!((res.action.values()[k] - res.first_actions[best * 2 + k]).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_and_warm_start_shifts() {
        let env = Env::nominal(Platform::Quadrotor);
        let track = ReferenceTrack::new(Platform::Quadrotor, TrackKind::Hover);
        let s0 = track.reference_at(0).unwrap();
        let mut cfg = MppiConfig::default_for(Platform::Quadrotor, 0.02);
        cfg.samples = 200;
        cfg.seed = 3;
        let refs = horizon_refs(&track, 0, cfg.horizon);
        let nominal: Vec<f64> = (0..cfg.horizon).flat_map(|_| resting_action(Platform::Quadrotor)).collect();
        let a = plan(&env, &s0, &refs, &cfg, &nominal).unwrap();
        let b = plan(&env, &s0, &refs, &cfg, &nominal).unwrap();
        assert_eq!(a, b);
        let n = a.nominal.len();
        assert_eq!(n, nominal.len());
        assert_eq!(&a.nominal[n - 4..], &a.nominal[n - 8..n - 4]);
        assert!(cfg.bounds.contains(a.action.values()));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = single.install(|| plan(&env, &s0, &refs, &cfg, &nominal).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let env = Env::nominal(Platform::Racecar);
        let s0 = StateVec::zeros(Platform::Racecar);
        let mut cfg = car_cfg(4, 2);
        let refs = vec![0.0; 14];
        assert!(plan(&env, &s0, &refs, &cfg, &[0.0; 3]).is_err());
        assert!(plan(&env, &s0, &refs[..7], &cfg, &[0.0; 4]).is_err());
        cfg.temperature = 0.0;
        assert!(plan(&env, &s0, &refs, &cfg, &[0.0; 4]).is_err());
        assert!(mppi_weights(&[f64::INFINITY, f64::NAN], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn weights_normalised_and_shift_invariant(
            ticks in prop::collection::vec(0u32..50_000, 1..64),
            shift in -1000i32..1000,
            temp in 0.01f64..10.0,
        ) {
            // dyadic costs and integer shifts keep J + c exact in f64
            let costs: Vec<f64> = ticks.iter().map(|&t| t as f64 / 1024.0).collect();
            let shift = shift as f64;
            let w = mppi_weights(&costs, temp).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let ws = mppi_weights(&shifted, temp).unwrap();
            for (a, b) in w.iter().zip(&ws) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn planned_actions_respect_bounds(seed_value in 0u64..1000, lo in -2.0f64..0.0) {
            let env = Env::nominal(Platform::Racecar);
            let track = ReferenceTrack::new(Platform::Racecar, TrackKind::Circle);
            let s0 = track.reference_at(0).unwrap();
            let mut cfg = car_cfg(64, 4);
            cfg.seed = seed_value;
            cfg.bounds = ActionBounds::new(vec![-0.1, lo], vec![0.05, lo + 0.5]).unwrap();
            let res = plan(&env, &s0, &horizon_refs(&track, 0, 4), &cfg, &[0.3, 5.0, 0.3, 5.0, 0.3, 5.0, 0.3, 5.0]).unwrap();
            prop_assert!(cfg.bounds.contains(res.action.values()));
            prop_assert!((res.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
