//! Discrete PID on the pitch estimate and a grid-search tuner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotState;
use crate::error::{Error, Result};
use crate::harness::{settling_time, Termination, Trajectory, TrajectoryMeta};
use crate::sim::{run_episode, Command, Controller, Observation, Plant, PlantConfig};

/// Gains calibrated by trial and error on the hardware prototype. Their units
/// are motor-driver counts, not newtons, so they are kept for reference only.
pub const HARDWARE_REFERENCE_GAINS: PidGains = PidGains {
    kp: 1970.0,
    ki: 21950.0,
    kd: 19.5,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Setpoint {
    pub target_phi: f64,
    pub target_x: f64,
}

/// Bound on `|integral|` such that `ki·|integral| ≤ 2·force_limit`.
/// Infinite when `ki == 0` (the integral then has no effect on the output).
pub fn integral_limit(gains: &PidGains, force_limit: f64) -> f64 {
    if gains.ki > 0.0 {
        2.0 * force_limit / gains.ki
    } else {
        f64::INFINITY
    }
}

/// One PID update; returns the unclamped output and the next state.
///
/// Derivative acts on the error and is zero on the first call.
pub fn pid_step(ps: &PidState, gains: &PidGains, error: f64, dt: f64, integral_limit: f64) -> (f64, PidState) {
    let integral = if gains.ki > 0.0 {
        (ps.integral + error * dt).clamp(-integral_limit, integral_limit)
    } else {
        ps.integral
    };
    let derivative = if ps.initialized {
        (error - ps.prev_error) / dt
    } else {
        0.0
    };
    let output = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        output,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}

/// Optional outer loop that tilts the pitch target to pull the cart back
/// toward `target_x`. Off by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionLoop {
    pub enabled: bool,
    /// rad per metre of position error.
    pub kx: f64,
    /// rad per m/s of cart velocity.
    pub kv: f64,
    /// Cap on the tilt the outer loop may request (rad).
    pub max_tilt: f64,
}

impl Default for PositionLoop {
    fn default() -> Self {
        PositionLoop {
            enabled: false,
            kx: 0.05,
            kv: 0.05,
            max_tilt: 0.05,
        }
    }
}

/// Pitch PID wrapped as a closed-loop controller.
#[derive(Debug, Clone)]
pub struct PidController {
    pub gains: PidGains,
    pub setpoint: Setpoint,
    pub position_loop: PositionLoop,
    integral_limit: f64,
    state: PidState,
}

impl PidController {
    pub fn new(gains: PidGains, setpoint: Setpoint, force_limit: f64) -> Self {
        PidController {
            gains,
            setpoint,
            position_loop: PositionLoop::default(),
            integral_limit: integral_limit(&gains, force_limit),
            state: PidState::default(),
        }
    }

    pub fn with_position_loop(mut self, outer: PositionLoop) -> Self {
        self.position_loop = outer;
        self
    }

    pub fn state(&self) -> &PidState {
        &self.state
    }

    fn target_phi(&self, obs: &Observation) -> f64 {
        let outer = &self.position_loop;
        if !outer.enabled {
            return self.setpoint.target_phi;
        }
        // Leaning toward −x (phi > 0) drives the cart toward −x.
        let tilt = outer.kx * (obs.x - self.setpoint.target_x) + outer.kv * obs.x_dot;
        self.setpoint.target_phi + tilt.clamp(-outer.max_tilt, outer.max_tilt)
    }
}

impl Controller for PidController {
    fn reset(&mut self) {
        self.state = PidState::default();
    }

    fn act(&mut self, obs: &Observation, dt: f64) -> Result<Command> {
        let error = self.target_phi(obs) - obs.phi_hat;
        let (output, next) = pid_step(&self.state, &self.gains, error, dt, self.integral_limit);
        self.state = next;
        Ok(Command {
            force: output,
            action: None,
        })
    }
}

/// Runs one PID episode on a fresh plant whose noise stream is `seed`.
pub fn run_pid_episode(
    initial: RobotState,
    gains: PidGains,
    setpoint: Setpoint,
    position_loop: PositionLoop,
    plant: &PlantConfig,
    seed: u64,
) -> Result<Trajectory> {
    gains.validate()?;
    let mut env = Plant::new(*plant, seed)?;
    let mut ctl = PidController::new(gains, setpoint, plant.params.force_limit).with_position_loop(position_loop);
    run_episode(
        &mut env,
        &mut ctl,
        initial,
        TrajectoryMeta {
            controller: "pid".into(),
            seed,
            config_hash: String::new(),
        },
    )
}

/// Candidate grid and cost weights for [`tune_pid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
    /// Initial pitches each candidate is scored on.
    pub initial_phis: Vec<f64>,
    pub seed: u64,
    pub w_mean_abs_phi: f64,
    pub w_settling: f64,
    pub w_fall: f64,
    /// Settling band used by the cost (rad).
    pub band: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            kp: vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0],
            ki: vec![0.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0],
            kd: vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5],
            initial_phis: vec![-0.09, -0.06, -0.03, 0.03, 0.06, 0.09],
            seed: 0,
            w_mean_abs_phi: 1.0,
            w_settling: 0.5,
            w_fall: 100.0,
            band: 0.017,
        }
    }
}

impl TuneConfig {
    pub fn candidates(&self) -> Vec<PidGains> {
        let mut out = Vec::with_capacity(self.kp.len() * self.ki.len() * self.kd.len());
        for &kp in &self.kp {
            for &ki in &self.ki {
                for &kd in &self.kd {
                    out.push(PidGains { kp, ki, kd });
                }
            }
        }
        out
    }
}

/// Cost breakdown for one candidate over the evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub gains: PidGains,
    pub mean_abs_phi: f64,
    /// Mean settling time, counting an unsettled run as the full horizon.
    pub mean_settling: f64,
    pub falls: usize,
    pub cost: f64,
}

impl CandidateScore {
    pub fn recost(&self, cfg: &TuneConfig) -> f64 {
        cfg.w_mean_abs_phi * self.mean_abs_phi + cfg.w_settling * self.mean_settling + cfg.w_fall * self.falls as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub best: PidGains,
    pub best_cost: f64,
    pub scores: Vec<CandidateScore>,
}

pub fn evaluate_candidate(gains: PidGains, cfg: &TuneConfig, plant: &PlantConfig) -> Result<CandidateScore> {
    let mut abs_phi_sum = 0.0;
    let mut settle_sum = 0.0;
    let mut falls = 0;
    for &phi0 in &cfg.initial_phis {
        let traj = run_pid_episode(
            RobotState::tilted(phi0),
            gains,
            Setpoint::default(),
            PositionLoop::default(),
            plant,
            cfg.seed,
        )?;
        let n = traj.samples.len() as f64;
        abs_phi_sum += traj.samples.iter().map(|s| s.phi_true.abs()).sum::<f64>() / n;
        settle_sum += settling_time(&traj, cfg.band).unwrap_or(plant.sim.horizon_s);
        if traj.termination != Termination::Horizon {
            falls += 1;
        }
    }
    let runs = cfg.initial_phis.len() as f64;
    let mut score = CandidateScore {
        gains,
        mean_abs_phi: abs_phi_sum / runs,
        mean_settling: settle_sum / runs,
        falls,
        cost: 0.0,
    };
    score.cost = score.recost(cfg);
    Ok(score)
}

/// Exhaustive grid search; candidates are scored in parallel and the lowest
/// cost wins, ties going to the earliest candidate in grid order.
pub fn tune_pid(cfg: &TuneConfig, plant: &PlantConfig) -> Result<TuneReport> {
    let candidates = cfg.candidates();
    if candidates.is_empty() || cfg.initial_phis.is_empty() {
        return Err(Error::Config("PID search space is empty".into()));
    }
    for g in &candidates {
        g.validate()?;
    }
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|&g| evaluate_candidate(g, cfg, plant))
        .collect::<Result<_>>()?;
    let best = pick_best(&scores);
    Ok(TuneReport {
        best: scores[best].gains,
        best_cost: scores[best].cost,
        scores,
    })
}

fn pick_best(scores: &[CandidateScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.cost < scores[best].cost {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhysicalParams;
    use crate::sensing::ImuConfig;
    use crate::sim::SimConfig;
    use proptest::prelude::*;

    fn plant() -> PlantConfig {
        PlantConfig {
            params: PhysicalParams::default(),
            imu: ImuConfig::default().noiseless(),
            alpha: 0.98,
            sim: SimConfig::default(),
        }
    }

    #[test]
    fn zero_error_stays_zero() {
        let g = PidGains {
            kp: 3.0,
            ki: 4.0,
            kd: 5.0,
        };
        let mut s = PidState::default();
        for _ in 0..100 {
            let (u, next) = pid_step(&s, &g, 0.0, 0.01, 1.0);
            assert_eq!(u, 0.0);
            s = next;
        }
        assert_eq!(s.integral, 0.0);
    }

    #[test]
    fn pure_proportional() {
        let g = PidGains {
            kp: 2.0,
            ki: 0.0,
            kd: 0.0,
        };
        let (u, _) = pid_step(&PidState::default(), &g, 0.5, 0.01, 1.0);
        assert_eq!(u, 1.0);
    }

    #[test]
    fn integral_after_five_steps() {
        let g = PidGains {
            kp: 0.0,
            ki: 10.0,
            kd: 0.0,
        };
        let mut s = PidState::default();
        let mut u = 0.0;
        for _ in 0..5 {
            (u, s) = pid_step(&s, &g, 0.1, 0.01, integral_limit(&g, 5.0));
        }
        assert!((u - 0.05).abs() < 1e-15);
    }

    #[test]
    fn first_derivative_is_zero() {
        let g = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 1.0,
        };
        let (u, s) = pid_step(&PidState::default(), &g, 0.3, 0.01, 1.0);
        assert_eq!(u, 0.0);
        let (u, _) = pid_step(&s, &g, 0.4, 0.01, 1.0);
        assert!((u - 10.0).abs() < 1e-9);
    }

    #[test]
    fn hardware_gains_are_recorded() {
        assert_eq!(HARDWARE_REFERENCE_GAINS.kp, 1970.0);
        assert_eq!(HARDWARE_REFERENCE_GAINS.ki, 21950.0);
        assert_eq!(HARDWARE_REFERENCE_GAINS.kd, 19.5);
    }

    #[test]
    fn zero_gains_fall() {
        for phi0 in [0.01, -0.01, 0.05] {
            let traj = run_pid_episode(
                RobotState::tilted(phi0),
                PidGains::ZERO,
                Setpoint::default(),
                PositionLoop::default(),
                &plant(),
                0,
            )
            .unwrap();
            assert_eq!(traj.termination, Termination::Fell);
        }
    }

    #[test]
    fn single_candidate_is_returned() {
        let g = PidGains {
            kp: 40.0,
            ki: 10.0,
            kd: 2.0,
        };
        let cfg = TuneConfig {
            kp: vec![g.kp],
            ki: vec![g.ki],
            kd: vec![g.kd],
            initial_phis: vec![0.03],
            ..TuneConfig::default()
        };
        let report = tune_pid(&cfg, &plant()).unwrap();
        assert_eq!(report.best, g);
        assert_eq!(report.scores.len(), 1);
    }

    #[test]
    fn empty_search_space_is_an_error() {
        let cfg = TuneConfig {
            kp: vec![],
            ..TuneConfig::default()
        };
        assert!(matches!(tune_pid(&cfg, &plant()), Err(Error::Config(_))));
    }

    #[test]
    fn position_loop_pulls_cart_back() {
        let g = PidGains {
            kp: 30.0,
            ki: 0.0,
            kd: 0.3,
        };
        let plant = plant();
        let free = run_pid_episode(
            RobotState::tilted(0.05),
            g,
            Setpoint::default(),
            PositionLoop::default(),
            &plant,
            0,
        )
        .unwrap();
        let outer = PositionLoop {
            enabled: true,
            ..PositionLoop::default()
        };
        let held = run_pid_episode(RobotState::tilted(0.05), g, Setpoint::default(), outer, &plant, 0).unwrap();
        assert_eq!(held.termination, Termination::Horizon);
        let end = |t: &Trajectory| t.samples.last().unwrap().x.abs();
        assert!(end(&held) < end(&free), "{} vs {}", end(&held), end(&free));
    }

    proptest! {
        #[test]
        fn p_term_is_linear(k in 0.0f64..1e4, e in -10.0f64..10.0) {
            let g = PidGains { kp: k, ki: 0.0, kd: 0.0 };
            let (u, _) = pid_step(&PidState::default(), &g, e, 0.002, 1.0);
            prop_assert_eq!(u, k * e);
        }

        #[test]
        fn integral_respects_clamp(errors in prop::collection::vec(-100.0f64..100.0, 1..200), ki in 0.1f64..1e5) {
            let g = PidGains { kp: 0.0, ki, kd: 0.0 };
            let limit = integral_limit(&g, 5.0);
            let mut s = PidState::default();
            for e in errors {
                let (u, next) = pid_step(&s, &g, e, 0.01, limit);
                prop_assert!(next.integral.abs() <= limit);
                prop_assert!(u.abs() <= 10.0 * (1.0 + 1e-12));
                s = next;
            }
        }
    }
}
