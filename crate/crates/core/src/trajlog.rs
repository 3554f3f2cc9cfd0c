//! CSV transition logs.
//!
//! Header `episode,t,term,s0..,a0..,n0..`, one row per transition. Values are
//! written in scientific notation with 17 significant digits, so a log read
//! back reproduces the exact bits.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::types::{ActionVec, Platform, StateVec, Termination, Trajectory, Transition};

pub fn header(platform: Platform) -> String {
    let mut cols = vec!["episode".to_string(), "t".into(), "term".into()];
    cols.extend((0..platform.state_dim()).map(|i| format!("s{i}")));
    cols.extend((0..platform.action_dim()).map(|i| format!("a{i}")));
    cols.extend((0..platform.state_dim()).map(|i| format!("n{i}")));
    cols.join(",")
}

pub fn write_trajectories<W: Write>(mut out: W, trajs: &[Trajectory]) -> Result<()> {
    let Some(first) = trajs.first() else {
        return Ok(());
    };
    writeln!(out, "{}", header(first.platform))?;
    for traj in trajs {
        if traj.platform != first.platform {
            return Err(Error::InvalidArgument("log mixes platforms".into()));
        }
        for tr in &traj.transitions {
            write!(out, "{},{},{}", tr.episode, tr.t, traj.termination.as_str())?;
            for v in tr.s.values().iter().chain(tr.a.values()).chain(tr.s_next.values()) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Reads a log back into trajectories, split on the episode column.
pub fn read_trajectories<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut lines = input.lines();
    let head = match lines.next() {
        Some(h) => h?,
        None => return Ok(Vec::new()),
    };
    let ncols = head.split(',').count();
    let platform = [Platform::Quadrotor, Platform::Racecar]
        .into_iter()
        .find(|p| header(*p) == head.trim())
        .ok_or_else(|| Error::Format(format!("unrecognised trajectory header with {ncols} columns")))?;
    let (d, a) = (platform.state_dim(), platform.action_dim());

    let mut out: Vec<Trajectory> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Format(format!("line {}: {msg}", lineno + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(bad("wrong column count"));
        }
        let episode: usize = fields[0].parse().map_err(|_| bad("bad episode"))?;
        let t: usize = fields[1].parse().map_err(|_| bad("bad step index"))?;
        let term: Termination = fields[2].parse().map_err(|_| bad("bad termination flag"))?;
        let nums = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad("bad number")))
            .collect::<Result<Vec<_>>>()?;
        let tr = Transition::new(
            StateVec::new(platform, nums[..d].to_vec())?,
            ActionVec::new(platform, nums[d..d + a].to_vec())?,
            StateVec::new(platform, nums[d + a..].to_vec())?,
            t,
            episode,
        )?;
        match out.last_mut() {
            Some(traj) if traj.transitions.last().map(|l| l.episode) == Some(episode) => traj.transitions.push(tr),
            _ => {
                let mut traj = Trajectory::new(platform, "");
                traj.termination = term;
                traj.transitions.push(tr);
                out.push(traj);
            }
        }
    }
    Ok(out)
}
