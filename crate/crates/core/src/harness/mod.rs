//! Experiment orchestration: trajectories, settling metrics, PID-vs-RL
//! comparison, and the command-line entry point.

mod compare;
mod trajectory;

pub use compare::{
    compare, settle_distance, CellReport, CompareSetup, Comparison, ComparisonReport, ControllerSummary, Deltas,
    DistanceMode, HarnessConfig, RunMetrics, RunRecord, REPORT_FILE,
};
pub use trajectory::{
    settling_index, settling_time, Termination, Trajectory, TrajectoryMeta, TrajectorySample, TRAJECTORY_COLUMNS,
};
