use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{a2c_update_in_place, select_action, PolicyModel, Transition, UpdateConfig};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};
use crate::harness::{Trajectory, TrajectoryMeta};
use crate::sim::{run_episode, Command, Controller, Observation, Plant, PlantConfig};

/// Observation features: filtered pitch, gyro pitch rate, cart position,
/// cart velocity, previous action as a force fraction in `[-1, 1]`.
pub const OBS_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    /// Decisions per training episode.
    pub horizon: usize,
    pub n_episodes: usize,
    pub seed: u64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub n_actions: usize,
    /// Physics ticks each action is held for; the transition reward is the
    /// mean over those ticks.
    pub action_repeat: usize,
    /// Training starts are uniform in ±this pitch (rad).
    pub init_phi_range: f64,
    /// Training starts are uniform in ±this cart position (m) and velocity
    /// (m/s), so the policy sees the drifted states of long runs.
    pub init_x_range: f64,
    pub init_x_dot_range: f64,
    pub reward: RewardConfig,
    /// Divisors for the raw observation features.
    pub obs_scale: [f64; OBS_DIM],
}

impl Default for TrainConfig {
    fn default() -> Self {
        let update = UpdateConfig::default();
        TrainConfig {
            gamma: update.gamma,
            lr_actor: 1e-3,
            lr_critic: 3e-3,
            entropy_coef: update.entropy_coef,
            horizon: 300,
            n_episodes: 2000,
            seed: 0,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            n_actions: 3,
            action_repeat: 3,
            init_phi_range: 0.05,
            init_x_range: 0.5,
            init_x_dot_range: 0.5,
            reward: RewardConfig::default(),
            obs_scale: [0.1, 1.0, 0.5, 1.0, 1.0],
        }
    }
}

impl TrainConfig {
    pub fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            gamma: self.gamma,
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.update_config().validate()?;
        if self.horizon < 1 {
            return Err(Error::Config("rl horizon must be >= 1".into()));
        }
        if self.n_actions < 2 {
            return Err(Error::Config("need at least two actions".into()));
        }
        if self.action_repeat < 1 {
            return Err(Error::Config("action_repeat must be >= 1".into()));
        }
        for (name, v) in [
            ("init_phi_range", self.init_phi_range),
            ("init_x_range", self.init_x_range),
            ("init_x_dot_range", self.init_x_dot_range),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        self.reward.validate()
    }

    pub fn init_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PolicyModel> {
        PolicyModel::init(
            OBS_DIM,
            self.n_actions,
            &self.actor_hidden,
            &self.critic_hidden,
            self.obs_scale.to_vec(),
            rng,
        )
    }

    /// Best possible training-episode return.
    pub fn max_episode_reward(&self) -> f64 {
        self.horizon as f64
    }
}

/// Per-tick reward: `1 − w_x·|x| − w_phi·max(|phi| − phi_deadband, 0)`
/// floored at 0 while upright,
/// 0 on the tick that falls. Staying up is never worse than falling, and 1
/// per tick is the ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_x: f64,
    pub w_phi: f64,
    /// Pitch inside this band (rad) is not penalised.
    pub phi_deadband: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_x: 0.1,
            w_phi: 30.0,
            phi_deadband: 0.017,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_x >= 0.0 && self.w_phi >= 0.0 && self.phi_deadband >= 0.0) {
            return Err(Error::Config("reward weights and deadband must be >= 0".into()));
        }
        Ok(())
    }

    pub fn tick(&self, state: &RobotState, fell: bool) -> f64 {
        if fell {
            0.0
        } else {
            let tilt = (state.phi.abs() - self.phi_deadband).max(0.0);
            (1.0 - self.w_x * state.x.abs() - self.w_phi * tilt).max(0.0)
        }
    }
}

/// Force for a discrete action: evenly spaced over `[-limit, limit]`.
pub fn action_force(action: usize, n_actions: usize, force_limit: f64) -> f64 {
    action_fraction(action, n_actions) * force_limit
}

fn action_fraction(action: usize, n_actions: usize) -> f64 {
    2.0 * action as f64 / (n_actions - 1) as f64 - 1.0
}

fn neutral_action(n_actions: usize) -> usize {
    n_actions / 2
}

/// Raw (unscaled) feature vector for the networks.
pub fn features(obs: &Observation, prev_action: usize, n_actions: usize) -> [f64; OBS_DIM] {
    [
        obs.phi_hat,
        obs.gyro_rate,
        obs.x,
        obs.x_dot,
        action_fraction(prev_action, n_actions),
    ]
}

/// The trained policy driving the closed loop.
#[derive(Debug, Clone)]
pub struct RlController {
    model: PolicyModel,
    force_limit: f64,
    action_repeat: usize,
    reward: RewardConfig,
    explore: bool,
    rng: ChaCha8Rng,
    prev_action: usize,
    held: usize,
    force: f64,
}

impl RlController {
    pub fn new(model: PolicyModel, force_limit: f64, cfg: &TrainConfig, explore: bool, seed: u64) -> Self {
        let n = model.n_actions;
        RlController {
            model,
            force_limit,
            action_repeat: cfg.action_repeat,
            reward: cfg.reward,
            explore,
            rng: ChaCha8Rng::seed_from_u64(seed),
            prev_action: neutral_action(n),
            held: 0,
            force: 0.0,
        }
    }
}

impl Controller for RlController {
    fn reset(&mut self) {
        self.prev_action = neutral_action(self.model.n_actions);
        self.held = 0;
        self.force = 0.0;
    }

    fn act(&mut self, obs: &Observation, _dt: f64) -> Result<Command> {
        if self.held == 0 {
            let n = self.model.n_actions;
            let input = self.model.normalize(&features(obs, self.prev_action, n));
            let choice = select_action(&self.model, &input, &mut self.rng, self.explore)?;
            self.prev_action = choice.action;
            self.force = action_force(choice.action, n, self.force_limit);
        }
        self.held = (self.held + 1) % self.action_repeat;
        Ok(Command {
            force: self.force,
            action: Some(self.prev_action),
        })
    }

    fn reward(&self, state: &RobotState, fell: bool) -> f64 {
        self.reward.tick(state, fell)
    }
}

/// Greedy evaluation episode.
pub fn run_rl_episode(
    model: &PolicyModel,
    initial: RobotState,
    plant: &PlantConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Trajectory> {
    let mut env = Plant::new(*plant, seed)?;
    let mut ctl = RlController::new(model.clone(), plant.params.force_limit, cfg, false, seed);
    run_episode(
        &mut env,
        &mut ctl,
        initial,
        TrajectoryMeta {
            controller: "rl".into(),
            seed,
            config_hash: String::new(),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub initial_phi: f64,
    pub total_reward: f64,
    pub steps: usize,
    pub fell: bool,
    pub mean_abs_td: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingLog {
    /// Mean total reward over the last `n` episodes (all, if fewer).
    pub fn mean_recent_reward(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|e| e.total_reward).sum::<f64>() / tail.len() as f64
    }
}

/// Training stopped early; carries everything logged before the failure.
#[derive(Debug, thiserror::Error)]
#[error("training aborted after {} episodes: {error}", log.episodes.len())]
pub struct TrainFailure {
    #[source]
    pub error: Error,
    pub log: TrainingLog,
}

impl From<TrainFailure> for Error {
    fn from(f: TrainFailure) -> Self {
        match f.error {
            Error::TrainingDiverged(msg) => {
                Error::TrainingDiverged(format!("{msg} (after {} episodes)", f.log.episodes.len()))
            }
            other => other,
        }
    }
}

/// Trains from a fresh seeded initialisation.
pub fn train(plant: &PlantConfig, cfg: &TrainConfig) -> std::result::Result<(PolicyModel, TrainingLog), TrainFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = cfg.init_model(&mut rng).map_err(|error| TrainFailure {
        error,
        log: TrainingLog::default(),
    })?;
    train_from(model, plant, cfg, &mut rng)
}

/// Continues training `model`, drawing all randomness from `rng`.
pub fn train_from(
    mut model: PolicyModel,
    plant: &PlantConfig,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(PolicyModel, TrainingLog), TrainFailure> {
    let mut log = TrainingLog::default();
    let fail = |error: Error, log: &TrainingLog| TrainFailure {
        error,
        log: log.clone(),
    };
    if let Err(e) = cfg.validate().and_then(|_| model.validate()) {
        return Err(fail(e, &log));
    }
    let mut env = Plant::new(*plant, rng.random()).map_err(|e| fail(e, &log))?;
    let n = model.n_actions;
    let force_limit = plant.params.force_limit;
    let update = cfg.update_config();

    for episode in 0..cfg.n_episodes {
        let mut uniform = |range: f64| {
            if range > 0.0 {
                rng.random_range(-range..=range)
            } else {
                0.0
            }
        };
        let phi0 = uniform(cfg.init_phi_range);
        let initial = RobotState {
            x: uniform(cfg.init_x_range),
            x_dot: uniform(cfg.init_x_dot_range),
            ..RobotState::tilted(phi0)
        };
        let obs = env.reset(initial).map_err(|e| fail(e, &log))?;
        let mut input = model.normalize(&features(&obs, neutral_action(n), n));
        let mut total = 0.0;
        let mut steps = 0;
        let mut fell = false;
        let mut td_sum = 0.0;

        for _ in 0..cfg.horizon {
            let choice = select_action(&model, &input, rng, true).map_err(|e| fail(e, &log))?;
            let force = action_force(choice.action, n, force_limit);
            let mut reward = 0.0;
            let mut last_obs = None;
            for _ in 0..cfg.action_repeat {
                let (_, out) = env.step(force).map_err(|e| fail(e, &log))?;
                reward += cfg.reward.tick(&out.state, out.fell);
                last_obs = Some(out.observation);
                if out.fell {
                    fell = true;
                    break;
                }
            }
            let reward = reward / cfg.action_repeat as f64;
            let next_input = model.normalize(&features(&last_obs.expect("action_repeat >= 1"), choice.action, n));
            let transition = Transition {
                obs: input,
                action: choice.action,
                reward,
                next_obs: next_input.clone(),
                done: fell,
            };
            let diag = a2c_update_in_place(&mut model, &transition, &update).map_err(|e| fail(e, &log))?;
            td_sum += diag.td_error.abs();
            total += reward;
            steps += 1;
            input = next_input;
            if fell {
                break;
            }
        }
        log.episodes.push(EpisodeRecord {
            episode,
            initial_phi: phi0,
            total_reward: total,
            steps,
            fell,
            mean_abs_td: td_sum / steps.max(1) as f64,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_actions_map_to_full_force_range() {
        assert_eq!(action_force(0, 3, 5.0), -5.0);
        assert_eq!(action_force(1, 3, 5.0), 0.0);
        assert_eq!(action_force(2, 3, 5.0), 5.0);
    }

    #[test]
    fn reward_ceiling_is_one_per_tick() {
        let r = RewardConfig {
            w_x: 0.1,
            w_phi: 0.5,
            phi_deadband: 0.0,
        };
        assert_eq!(r.tick(&RobotState::default(), false), 1.0);
        assert!(
            r.tick(
                &RobotState {
                    x: 0.3,
                    ..RobotState::tilted(0.1)
                },
                false
            ) < 1.0
        );
        assert_eq!(r.tick(&RobotState::default(), true), 0.0);
    }

    #[test]
    fn mean_recent_reward_uses_tail() {
        let log = TrainingLog {
            episodes: (0..10)
                .map(|i| EpisodeRecord {
                    episode: i,
                    initial_phi: 0.0,
                    total_reward: i as f64,
                    steps: 1,
                    fell: false,
                    mean_abs_td: 0.0,
                })
                .collect(),
        };
        assert_eq!(log.mean_recent_reward(2), 8.5);
        assert_eq!(log.mean_recent_reward(100), 4.5);
    }
}
