use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{settling_index, Termination, Trajectory};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};
use crate::pid::{run_pid_episode, PidGains, PositionLoop, Setpoint};
use crate::rl::{run_rl_episode, PolicyModel, TrainConfig};
use crate::sim::PlantConfig;

/// How "distance covered before settling" is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// `|x(T_settle)|`.
    #[default]
    Displacement,
    /// `Σ|x[k+1] − x[k]|` over samples up to `T_settle`.
    PathLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Settling band on |phi| (rad).
    pub band: f64,
    /// Initial pitches (rad) of the comparison grid.
    pub grid: Vec<f64>,
    pub distance: DistanceMode,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            band: 0.017,
            grid: vec![-0.09, -0.06, -0.03, 0.03, 0.06, 0.09],
            distance: DistanceMode::Displacement,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band > 0.0 && self.band.is_finite()) {
            return Err(Error::Config(format!("settling band must be > 0, got {}", self.band)));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("comparison grid is empty".into()));
        }
        if self.grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("comparison grid must be finite".into()));
        }
        Ok(())
    }
}

/// Distance covered up to sample `settle` under `mode`.
pub fn settle_distance(traj: &Trajectory, settle: usize, mode: DistanceMode) -> f64 {
    match mode {
        DistanceMode::Displacement => traj.samples[settle].x.abs(),
        DistanceMode::PathLength => traj.samples[..=settle]
            .windows(2)
            .map(|w| (w[1].x - w[0].x).abs())
            .sum(),
    }
}

/// Metrics of one run. Settling time and distance are absent when the run
/// never settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub termination: Termination,
    pub settled: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub settling_time: Option<f64>,
    pub max_abs_phi: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance: Option<f64>,
}

impl RunMetrics {
    pub fn of(traj: &Trajectory, band: f64, mode: DistanceMode) -> Self {
        let settle = settling_index(traj, band);
        RunMetrics {
            termination: traj.termination,
            settled: settle.is_some(),
            settling_time: settle.map(|i| traj.samples[i].t),
            max_abs_phi: traj.max_abs_phi(),
            distance: settle.map(|i| settle_distance(traj, i, mode)),
        }
    }
}

/// One controller on one grid cell: metrics plus the trajectory file, or
/// the error that stopped the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<RunMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub phi0: f64,
    /// Sensor-noise seed shared by both controllers on this cell.
    pub seed: u64,
    pub pid: RunRecord,
    pub rl: RunRecord,
}

/// Aggregates over the grid. Means of settling time and distance exist only
/// when every run settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub runs: usize,
    pub settled: usize,
    pub falls: usize,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_settling_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_max_abs_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_distance: Option<f64>,
}

impl ControllerSummary {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let records: Vec<&RunRecord> = records.into_iter().collect();
        let metrics: Vec<&RunMetrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let all_settled = metrics.len() == records.len() && metrics.iter().all(|m| m.settled);
        let mean = |v: Vec<f64>| {
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        let settled_mean = |get: fn(&RunMetrics) -> Option<f64>| {
            if all_settled {
                mean(metrics.iter().filter_map(|m| get(m)).collect())
            } else {
                None
            }
        };
        ControllerSummary {
            runs: records.len(),
            settled: metrics.iter().filter(|m| m.settled).count(),
            falls: metrics.iter().filter(|m| m.termination == Termination::Fell).count(),
            errors: records.len() - metrics.len(),
            mean_settling_time: settled_mean(|m| m.settling_time),
            mean_max_abs_phi: if metrics.len() == records.len() {
                mean(metrics.iter().map(|m| m.max_abs_phi).collect())
            } else {
                None
            },
            mean_distance: settled_mean(|m| m.distance),
        }
    }
}

/// `rl − pid` for each aggregate present on both sides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Deltas {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub settling_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_abs_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance: Option<f64>,
    pub falls: i64,
}

impl Deltas {
    pub fn between(rl: &ControllerSummary, pid: &ControllerSummary) -> Self {
        let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
        Deltas {
            settling_time: diff(rl.mean_settling_time, pid.mean_settling_time),
            max_abs_phi: diff(rl.mean_max_abs_phi, pid.mean_max_abs_phi),
            distance: diff(rl.mean_distance, pid.mean_distance),
            falls: rl.falls as i64 - pid.falls as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub band: f64,
    pub distance_mode: DistanceMode,
    pub horizon_s: f64,
    pub config_hash: String,
    pub pid_gains: PidGains,
    pub pid: ControllerSummary,
    pub rl: ControllerSummary,
    pub deltas: Deltas,
    pub cells: Vec<CellReport>,
}

impl ComparisonReport {
    /// Recomputes summaries and deltas from the per-cell records.
    pub fn from_cells(cells: Vec<CellReport>, setup: &CompareSetup<'_>) -> Self {
        let pid = ControllerSummary::of(cells.iter().map(|c| &c.pid));
        let rl = ControllerSummary::of(cells.iter().map(|c| &c.rl));
        ComparisonReport {
            band: setup.harness.band,
            distance_mode: setup.harness.distance,
            horizon_s: setup.plant.sim.horizon_s,
            config_hash: setup.config_hash.clone(),
            pid_gains: setup.gains,
            deltas: Deltas::between(&rl, &pid),
            pid,
            rl,
            cells,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("comparison report: {e}")))
    }
}

/// Everything [`compare`] needs.
#[derive(Debug, Clone)]
pub struct CompareSetup<'a> {
    pub plant: PlantConfig,
    pub gains: PidGains,
    pub setpoint: Setpoint,
    pub position_loop: PositionLoop,
    pub model: &'a PolicyModel,
    pub rl: &'a TrainConfig,
    pub harness: &'a HarnessConfig,
    pub seed: u64,
    pub config_hash: String,
}

/// Report plus the trajectories of every successful run, in grid order.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub trajectories: Vec<(String, Trajectory)>,
}

impl Comparison {
    /// Writes each trajectory under its recorded file name and the report as
    /// `report.toml`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, traj) in &self.trajectories {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            traj.write(std::io::BufWriter::new(file))
                .map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, self.report.to_toml_string()).map_err(|e| Error::io(&path, e))
    }
}

pub const REPORT_FILE: &str = "report.toml";

fn cell_seed(base: u64, cell: usize) -> u64 {
    base.wrapping_add(cell as u64)
}

fn record(
    run: Result<Trajectory>,
    name: String,
    setup: &CompareSetup<'_>,
    out: &mut Vec<(String, Trajectory)>,
) -> RunRecord {
    match run {
        Ok(mut traj) => {
            traj.meta.config_hash = setup.config_hash.clone();
            let metrics = RunMetrics::of(&traj, setup.harness.band, setup.harness.distance);
            out.push((name.clone(), traj));
            RunRecord {
                file: Some(name),
                metrics: Some(metrics),
                error: None,
            }
        }
        Err(e) => RunRecord {
            file: None,
            metrics: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs PID and the policy on every grid cell with matched seeds. Cells run
/// in parallel; output order follows the grid. A failing run is recorded in
/// its cell and does not abort the comparison.
pub fn compare(setup: &CompareSetup<'_>) -> Result<Comparison> {
    setup.harness.validate()?;
    setup.gains.validate()?;
    setup.plant.validate()?;
    let per_cell: Vec<(CellReport, Vec<(String, Trajectory)>)> = setup
        .harness
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &phi0)| {
            let seed = cell_seed(setup.seed, i);
            let initial = RobotState::tilted(phi0);
            let pid_run = run_pid_episode(
                initial,
                setup.gains,
                setup.setpoint,
                setup.position_loop,
                &setup.plant,
                seed,
            );
            let rl_run = run_rl_episode(setup.model, initial, &setup.plant, setup.rl, seed);
            let mut trajs = Vec::with_capacity(2);
            let pid = record(pid_run, format!("cell{i:02}_pid.traj"), setup, &mut trajs);
            let rl = record(rl_run, format!("cell{i:02}_rl.traj"), setup, &mut trajs);
            (CellReport { phi0, seed, pid, rl }, trajs)
        })
        .collect();
    let mut cells = Vec::with_capacity(per_cell.len());
    let mut trajectories = Vec::new();
    for (cell, trajs) in per_cell {
        cells.push(cell);
        trajectories.extend(trajs);
    }
    Ok(Comparison {
        report: ComparisonReport::from_cells(cells, setup),
        trajectories,
    })
}
