use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRAJECTORY_COLUMNS: [&str; 7] = ["t", "phi_true", "phi_est", "x", "x_dot", "u", "reward"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Fell,
    Diverged,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Horizon => "horizon",
            Termination::Fell => "fell",
            Termination::Diverged => "diverged",
        })
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizon" => Ok(Termination::Horizon),
            "fell" => Ok(Termination::Fell),
            "diverged" => Ok(Termination::Diverged),
            other => Err(Error::TrajectoryFormat(format!("unknown termination {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub controller: String,
    pub seed: u64,
    pub config_hash: String,
}

/// One tick. `u` is the saturated force applied over `[t, t + dt)`; the
/// final sample of a trajectory carries the terminal state with `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub phi_true: f64,
    pub phi_est: f64,
    pub x: f64,
    pub x_dot: f64,
    pub u: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub termination: Termination,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn total_reward(&self) -> f64 {
        self.samples.iter().map(|s| s.reward).sum()
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.samples.iter().map(|s| s.phi_true.abs()).fold(0.0, f64::max)
    }

    /// Plain-text form: `#`-prefixed metadata, a header naming the columns,
    /// then one whitespace-separated sample per line. Floats use Rust's
    /// shortest round-trip formatting, so reading back is exact.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# controller {}", self.meta.controller)?;
        writeln!(out, "# seed {}", self.meta.seed)?;
        writeln!(out, "# config_hash {}", self.meta.config_hash)?;
        writeln!(out, "# termination {}", self.termination)?;
        writeln!(out, "{}", TRAJECTORY_COLUMNS.join(" "))?;
        for s in &self.samples {
            writeln!(
                out,
                "{} {} {} {} {} {} {}",
                s.t, s.phi_true, s.phi_est, s.x, s.x_dot, s.u, s.reward
            )?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = TrajectoryMeta::default();
        let mut termination = None;
        let mut saw_header = false;
        let mut samples = Vec::new();
        let bad = |msg: String| Error::TrajectoryFormat(msg);

        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest.trim().split_once(' ').unwrap_or((rest.trim(), ""));
                match key {
                    "controller" => meta.controller = value.to_string(),
                    "seed" => meta.seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
                    "config_hash" => meta.config_hash = value.to_string(),
                    "termination" => termination = Some(value.parse()?),
                    _ => {}
                }
                continue;
            }
            if !saw_header {
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols != TRAJECTORY_COLUMNS {
                    return Err(bad(format!("unexpected header {line:?}")));
                }
                saw_header = true;
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
            if values.len() != TRAJECTORY_COLUMNS.len() {
                return Err(bad(format!(
                    "line {}: expected 7 columns, got {}",
                    lineno + 1,
                    values.len()
                )));
            }
            samples.push(TrajectorySample {
                t: values[0],
                phi_true: values[1],
                phi_est: values[2],
                x: values[3],
                x_dot: values[4],
                u: values[5],
                reward: values[6],
            });
        }
        if samples.is_empty() {
            return Err(bad("no samples".into()));
        }
        Ok(Trajectory {
            samples,
            termination: termination.ok_or_else(|| bad("missing termination".into()))?,
            meta,
        })
    }
}

/// First time after which `|phi|` stays strictly inside `band` through the
/// end of the run. `None` when the run did not reach its horizon or ends
/// outside the band.
pub fn settling_time(traj: &Trajectory, band: f64) -> Option<f64> {
    settling_index(traj, band).map(|i| traj.samples[i].t)
}

/// Index of the sample at which the trajectory settles; see [`settling_time`].
pub fn settling_index(traj: &Trajectory, band: f64) -> Option<usize> {
    if traj.termination != Termination::Horizon || traj.samples.is_empty() {
        return None;
    }
    match traj.samples.iter().rposition(|s| s.phi_true.abs() >= band) {
        None => Some(0),
        Some(i) if i + 1 < traj.samples.len() => Some(i + 1),
        Some(_) => None,
    }
}
