//! Closed-loop plant shared by every controller: true dynamics, emulated IMU,
//! complementary filter, actuator saturation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{derivatives, step_rk4, PhysicalParams, RobotState};
use crate::error::{Error, Result};
use crate::harness::{Termination, Trajectory, TrajectoryMeta, TrajectorySample};
use crate::sensing::{filter_update, synthesize_imu, FilterState, ImuConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration and control period (s).
    pub dt: f64,
    /// Episode length (s).
    pub horizon_s: f64,
    /// |phi| beyond this counts as a fall (rad).
    pub fall_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.002,
            horizon_s: 10.0,
            fall_threshold: 0.35,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(Error::Config(format!("dt must be in (0, 0.05], got {}", self.dt)));
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::Config("horizon_s must be > 0".into()));
        }
        if !(self.fall_threshold > 0.0) {
            return Err(Error::Config("fall_threshold must be > 0".into()));
        }
        Ok(())
    }

    pub fn horizon_steps(&self) -> usize {
        (self.horizon_s / self.dt).round() as usize
    }
}

/// Everything the plant needs besides the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub params: PhysicalParams,
    pub imu: ImuConfig,
    pub alpha: f64,
    pub sim: SimConfig,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.imu.validate()?;
        self.sim.validate()?;
        FilterState::new(self.alpha)?;
        Ok(())
    }
}

/// What a controller gets to see each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub phi_hat: f64,
    /// Bias-corrected gyro pitch rate (rad/s).
    pub gyro_rate: f64,
    pub x: f64,
    pub x_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub state: RobotState,
    pub fell: bool,
}

/// Stateful plant stepping at a fixed `dt`.
#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    state: RobotState,
    filter: FilterState,
    last_force: f64,
    rng: ChaCha8Rng,
    ticks: usize,
}

impl Plant {
    /// `seed` selects the sensor-noise stream.
    pub fn new(config: PlantConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Plant {
            filter: FilterState::new(config.alpha)?,
            config,
            state: RobotState::default(),
            last_force: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ticks: 0,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    /// Puts the robot in `initial` with a fresh filter (estimate 0) and takes
    /// the first sensor reading.
    pub fn reset(&mut self, initial: RobotState) -> Result<Observation> {
        if !initial.is_finite() {
            return Err(Error::IntegrationDiverged { state: initial });
        }
        self.state = RobotState { t: 0.0, ..initial };
        self.filter = FilterState::new(self.config.alpha)?;
        self.last_force = 0.0;
        self.ticks = 0;
        self.sense()
    }

    fn sense(&mut self) -> Result<Observation> {
        let p = &self.config.params;
        let accel = derivatives(&self.state, self.last_force, p)?.x_ddot;
        let sample = synthesize_imu(&self.state, accel, p.g, &self.config.imu, &mut self.rng);
        self.filter = filter_update(&self.filter, &sample, &self.config.imu, self.config.sim.dt);
        let (_, gyro) = self.config.imu.to_physical(&sample);
        Ok(Observation {
            t: self.time(),
            phi_hat: self.filter.phi_hat,
            gyro_rate: gyro[0],
            x: self.state.x,
            x_dot: self.state.x_dot,
        })
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.config.sim.dt
    }

    pub fn phi_hat(&self) -> f64 {
        self.filter.phi_hat
    }

    /// Applies `force` (saturated) for one tick, then reads the sensors.
    /// Returns the applied force alongside the outcome.
    pub fn step(&mut self, force: f64) -> Result<(f64, StepOutcome)> {
        let p = self.config.params;
        let applied = if force.is_nan() { 0.0 } else { p.clamp_force(force) };
        self.state = step_rk4(&self.state, applied, &p, self.config.sim.dt)?;
        self.last_force = applied;
        self.ticks += 1;
        let observation = self.sense()?;
        Ok((
            applied,
            StepOutcome {
                observation,
                state: self.state,
                fell: self.state.phi.abs() > self.config.sim.fall_threshold,
            },
        ))
    }
}

/// Control output for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub force: f64,
    pub action: Option<usize>,
}

pub trait Controller {
    fn reset(&mut self) {}
    fn act(&mut self, obs: &Observation, dt: f64) -> Result<Command>;
    /// Per-tick reward written to the trajectory (0 for non-learning controllers).
    fn reward(&self, _state: &RobotState, _fell: bool) -> f64 {
        0.0
    }
}

/// Open loop: the same force every tick.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantForce(pub f64);

impl Controller for ConstantForce {
    fn act(&mut self, _obs: &Observation, _dt: f64) -> Result<Command> {
        Ok(Command {
            force: self.0,
            action: None,
        })
    }
}

/// Runs one closed-loop episode until the horizon or a fall.
///
/// Integration failures come back as a trajectory terminated `Diverged`
/// rather than an error, so the samples recorded so far survive.
pub fn run_episode<C: Controller + ?Sized>(
    plant: &mut Plant,
    controller: &mut C,
    initial: RobotState,
    meta: TrajectoryMeta,
) -> Result<Trajectory> {
    controller.reset();
    let dt = plant.config.sim.dt;
    let steps = plant.config.sim.horizon_steps();
    let mut obs = plant.reset(initial)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut termination = Termination::Horizon;

    if plant.state.phi.abs() > plant.config.sim.fall_threshold {
        termination = Termination::Fell;
    } else {
        for _ in 0..steps {
            let before = plant.state;
            let t = plant.time();
            let phi_est = plant.phi_hat();
            let cmd = controller.act(&obs, dt)?;
            let (applied, outcome) = match plant.step(cmd.force) {
                Ok(r) => r,
                Err(Error::IntegrationDiverged { .. }) => {
                    termination = Termination::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            };
            samples.push(TrajectorySample {
                t,
                phi_true: before.phi,
                phi_est,
                x: before.x,
                x_dot: before.x_dot,
                u: applied,
                reward: controller.reward(&outcome.state, outcome.fell),
            });
            obs = outcome.observation;
            if outcome.fell {
                termination = Termination::Fell;
                break;
            }
        }
    }

    let last = plant.state;
    samples.push(TrajectorySample {
        t: plant.time(),
        phi_true: last.phi,
        phi_est: plant.phi_hat(),
        x: last.x,
        x_dot: last.x_dot,
        u: 0.0,
        reward: 0.0,
    });
    Ok(Trajectory {
        samples,
        termination,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero;
    impl Controller for Zero {
        fn act(&mut self, _: &Observation, _: f64) -> Result<Command> {
            Ok(Command {
                force: 0.0,
                action: None,
            })
        }
    }

    fn plant() -> Plant {
        Plant::new(
            PlantConfig {
                params: PhysicalParams::default(),
                imu: ImuConfig::ideal(),
                alpha: 0.98,
                sim: SimConfig::default(),
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn open_loop_falls() {
        let mut p = plant();
        let traj = run_episode(&mut p, &mut Zero, RobotState::tilted(0.01), TrajectoryMeta::default()).unwrap();
        assert_eq!(traj.termination, Termination::Fell);
        assert!(traj.samples.last().unwrap().phi_true.abs() > 0.35);
    }

    #[test]
    fn upright_rest_stays_for_horizon() {
        let mut p = plant();
        let traj = run_episode(&mut p, &mut Zero, RobotState::default(), TrajectoryMeta::default()).unwrap();
        assert_eq!(traj.termination, Termination::Horizon);
        assert_eq!(traj.samples.len(), 5001);
        assert!((traj.samples.last().unwrap().t - 10.0).abs() < 1e-9);
    }

    #[test]
    fn force_is_saturated() {
        let mut p = plant();
        p.reset(RobotState::default()).unwrap();
        let (applied, _) = p.step(100.0).unwrap();
        assert_eq!(applied, 5.0);
        let (applied, _) = p.step(-100.0).unwrap();
        assert_eq!(applied, -5.0);
    }

    #[test]
    fn rejects_bad_dt() {
        let cfg = SimConfig {
            dt: 0.1,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
