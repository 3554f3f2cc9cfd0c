//! Episode-structured transition datasets.

use crate::error::{invalid, Result};
use crate::types::{Platform, Trajectory, Transition};

/// Transitions accumulated episode by episode.
///
/// Data efficiency is accounted in episodes, so the dataset keeps whole
/// trajectories rather than a flat sample pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    platform: Platform,
    episodes: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(platform: Platform) -> Self {
        Self { platform, episodes: Vec::new() }
    }

    pub fn from_trajectories(platform: Platform, trajs: impl IntoIterator<Item = Trajectory>) -> Result<Self> {
        let mut d = Self::new(platform);
        for t in trajs {
            d.push(t)?;
        }
        Ok(d)
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn push(&mut self, traj: Trajectory) -> Result<()> {
        if traj.platform != self.platform {
            return invalid(format!("{} trajectory pushed into {} dataset", traj.platform, self.platform));
        }
        traj.validate(usize::MAX)?;
        self.episodes.push(traj);
        Ok(())
    }

    pub fn episodes(&self) -> &[Trajectory] {
        &self.episodes
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Total transition count.
    pub fn len(&self) -> usize {
        self.episodes.iter().map(|e| e.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.episodes.iter().flat_map(|e| e.transitions.iter())
    }

    /// Model inputs `[s, a]` as one column per input dimension.
    pub fn input_columns(&self) -> Vec<Vec<f64>> {
        let (d, a) = (self.platform.state_dim(), self.platform.action_dim());
        let mut cols = vec![Vec::with_capacity(self.len()); d + a];
        for tr in self.transitions() {
            for (k, v) in tr.s.values().iter().chain(tr.a.values()).enumerate() {
                cols[k].push(*v);
            }
        }
        cols
    }

    /// Next states as one column per state dimension.
    pub fn target_columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(self.len()); self.platform.state_dim()];
        for tr in self.transitions() {
            for (k, v) in tr.s_next.values().iter().enumerate() {
                cols[k].push(*v);
            }
        }
        cols
    }

    /// Row-major `(inputs, targets)` matrices.
    pub fn rows(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut x = Vec::with_capacity(n * self.platform.input_dim());
        let mut y = Vec::with_capacity(n * self.platform.state_dim());
        for tr in self.transitions() {
            x.extend_from_slice(tr.s.values());
            x.extend_from_slice(tr.a.values());
            y.extend_from_slice(tr.s_next.values());
        }
        (x, y)
    }
}
