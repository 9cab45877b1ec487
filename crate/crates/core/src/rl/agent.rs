use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Mlp, MlpGrads};
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Actor (action logits) and critic (state value) over the same observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub actor: Mlp,
    pub critic: Mlp,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub version: u32,
    /// Divisors applied to raw observation features before the networks.
    pub obs_scale: Vec<f64>,
}

impl PolicyModel {
    pub fn new(actor: Mlp, critic: Mlp, obs_scale: Vec<f64>) -> Result<Self> {
        let obs_dim = actor.input_dim();
        let model = PolicyModel {
            n_actions: actor.output_dim(),
            obs_dim,
            actor,
            critic,
            version: MODEL_VERSION,
            obs_scale,
        };
        model.validate()?;
        Ok(model)
    }

    /// Uniformly initialised networks with the given hidden widths.
    pub fn init<R: Rng + ?Sized>(
        obs_dim: usize,
        n_actions: usize,
        actor_hidden: &[usize],
        critic_hidden: &[usize],
        obs_scale: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = |hidden: &[usize], out: usize| {
            std::iter::once(obs_dim)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(out))
                .collect::<Vec<_>>()
        };
        let actor = Mlp::uniform(&sizes(actor_hidden, n_actions), rng)?;
        let critic = Mlp::uniform(&sizes(critic_hidden, 1), rng)?;
        PolicyModel::new(actor, critic, obs_scale)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::ShapeMismatch { expected, got })
            }
        };
        shape(self.obs_dim, self.actor.input_dim())?;
        shape(self.obs_dim, self.critic.input_dim())?;
        shape(self.n_actions, self.actor.output_dim())?;
        shape(1, self.critic.output_dim())?;
        shape(self.obs_dim, self.obs_scale.len())?;
        if self.n_actions < 1 {
            return Err(Error::Config("policy needs at least one action".into()));
        }
        if self.obs_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("observation scales must be finite and > 0".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.obs_scale).map(|(v, s)| v / s).collect()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.critic.predict(obs)?[0])
    }

    pub fn probabilities(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let logits = self.actor.predict(obs)?;
        softmax(&logits)
    }
}

/// Numerically stable softmax; errors on non-finite logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::TrainingDiverged(format!("non-finite logits {logits:?}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub probs: Vec<f64>,
}

/// Samples from the actor's softmax when `explore`, otherwise takes the
/// argmax (lowest index on ties). `obs` is already normalized.
pub fn select_action<R: Rng + ?Sized>(
    model: &PolicyModel,
    obs: &[f64],
    rng: &mut R,
    explore: bool,
) -> Result<ActionChoice> {
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDiverged(format!("non-finite observation {obs:?}")));
    }
    let probs = model.probabilities(obs)?;
    let action = if explore {
        sample_categorical(&probs, rng)
    } else {
        argmax(&probs)
    };
    Ok(ActionChoice {
        action,
        log_prob: probs[action].ln(),
        value: model.value(obs)?,
        probs,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Learning hyperparameters for one-step A2C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            gamma: 0.99,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            entropy_coef: 0.01,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::Config("entropy_coef must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    pub td_error: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

/// Gradients of both losses for one transition, without applying them.
#[derive(Debug, Clone)]
pub struct A2cGradients {
    pub actor: MlpGrads,
    pub critic: MlpGrads,
    pub diagnostics: UpdateDiagnostics,
}

/// Loss gradients for a single transition.
///
/// Critic loss is `½·td²` with the bootstrap target `r + γ·V(s')` held
/// fixed. Actor loss is `−log π(a|s)·td − β·H(π(·|s))` with `td` treated as
/// a constant.
pub fn a2c_gradients(model: &PolicyModel, tr: &Transition, cfg: &UpdateConfig) -> Result<A2cGradients> {
    if tr.action >= model.n_actions {
        return Err(Error::ShapeMismatch {
            expected: model.n_actions,
            got: tr.action,
        });
    }
    if !tr.reward.is_finite() {
        return Err(Error::TrainingDiverged(format!("non-finite reward {}", tr.reward)));
    }

    let bootstrap = if tr.done { 0.0 } else { model.value(&tr.next_obs)? };
    let (v, critic_cache) = model.critic.forward(&tr.obs)?;
    let td = tr.reward + cfg.gamma * bootstrap - v[0];
    let critic = model.critic.backward(&critic_cache, &[-td]);

    let (logits, actor_cache) = model.actor.forward(&tr.obs)?;
    let probs = softmax(&logits)?;
    let h = entropy(&probs);
    let grad_logits: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let onehot = if j == tr.action { 1.0 } else { 0.0 };
            let policy = td * (p - onehot);
            let log_p = if p > 0.0 { p.ln() } else { 0.0 };
            let ent = cfg.entropy_coef * p * (log_p + h);
            policy + ent
        })
        .collect();
    let actor = model.actor.backward(&actor_cache, &grad_logits);

    let diagnostics = UpdateDiagnostics {
        td_error: td,
        actor_loss: -probs[tr.action].ln() * td - cfg.entropy_coef * h,
        critic_loss: 0.5 * td * td,
        entropy: h,
    };
    if !(td.is_finite() && actor.is_finite() && critic.is_finite() && diagnostics.actor_loss.is_finite()) {
        return Err(Error::TrainingDiverged(format!("non-finite gradient: {diagnostics:?}")));
    }
    Ok(A2cGradients {
        actor,
        critic,
        diagnostics,
    })
}

/// One-step advantage actor-critic update, returning the new model.
pub fn a2c_update(
    model: &PolicyModel,
    tr: &Transition,
    cfg: &UpdateConfig,
) -> Result<(PolicyModel, UpdateDiagnostics)> {
    let mut next = model.clone();
    let diag = a2c_update_in_place(&mut next, tr, cfg)?;
    Ok((next, diag))
}

/// [`a2c_update`] without the copy, for training loops.
pub fn a2c_update_in_place(model: &mut PolicyModel, tr: &Transition, cfg: &UpdateConfig) -> Result<UpdateDiagnostics> {
    let g = a2c_gradients(model, tr, cfg)?;
    model.actor.sgd_step(&g.actor, cfg.lr_actor);
    model.critic.sgd_step(&g.critic, cfg.lr_critic);
    if !model.is_finite() {
        return Err(Error::TrainingDiverged(format!(
            "parameters became non-finite: {:?}",
            g.diagnostics
        )));
    }
    Ok(g.diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::nn::{Dense, Mlp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_model(obs_dim: usize, n_actions: usize) -> PolicyModel {
        PolicyModel::new(
            Mlp::zeros(&[obs_dim, 4, n_actions]).unwrap(),
            Mlp::zeros(&[obs_dim, 4, 1]).unwrap(),
            vec![1.0; obs_dim],
        )
        .unwrap()
    }

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let m = zero_model(3, 4);
        let p = m.probabilities(&[0.1, 0.2, 0.3]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn uniform_sampling_histogram() {
        // Each count ~ Binomial(10000, 1/3): sd = sqrt(10000·(1/3)(2/3)) ≈ 47.1.
        let m = zero_model(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[select_action(&m, &[0.0, 0.0], &mut rng, true).unwrap().action] += 1;
        }
        let sd = (10_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0 / 3.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn dominant_logit_wins() {
        let mut m = zero_model(1, 3);
        let out = m.actor.layers.last_mut().unwrap();
        out.biases[1] = 50.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let greedy = select_action(&m, &[0.0], &mut rng, false).unwrap();
        assert_eq!(greedy.action, 1);
        assert!(greedy.probs[1] > 1.0 - 1e-15);
        let sampled = (0..1000)
            .filter(|_| select_action(&m, &[0.0], &mut rng, true).unwrap().action == 1)
            .count();
        assert_eq!(sampled, 1000);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[0.3, -1.2, 2.5]).unwrap();
        let b = softmax(&[100.3, 98.8, 102.5]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(matches!(softmax(&[f64::NAN, 0.0]), Err(Error::TrainingDiverged(_))));
    }

    #[test]
    fn perfect_critic_leaves_uniform_actor_untouched() {
        // Terminal one-step MDP with reward 0.7; critic output bias = 0.7 is exact.
        let mut m = zero_model(2, 3);
        m.critic.layers.last_mut().unwrap().biases[0] = 0.7;
        let before = m.clone();
        let tr = Transition {
            obs: vec![0.5, -0.5],
            action: 2,
            reward: 0.7,
            next_obs: vec![0.0, 0.0],
            done: true,
        };
        let (after, diag) = a2c_update(&m, &tr, &UpdateConfig::default()).unwrap();
        assert_eq!(diag.td_error, 0.0);
        // Entropy gradient vanishes at the uniform distribution, so nothing
        // moves beyond rounding in log(1/3) + H.
        for (a, b) in after.actor.params().zip(before.actor.params()) {
            assert!((a - b).abs() < 1e-18);
        }
        assert_eq!(after.critic, before.critic);
    }

    #[test]
    fn perfect_critic_moves_actor_only_by_entropy() {
        let mut m = zero_model(1, 2);
        m.actor = Mlp::from_layers(vec![Dense {
            inputs: 1,
            outputs: 2,
            weights: vec![0.0, 0.0],
            biases: vec![1.0, -1.0],
        }])
        .unwrap();
        m.critic.layers.last_mut().unwrap().biases[0] = 1.0;
        let tr = Transition {
            obs: vec![0.0],
            action: 0,
            reward: 1.0,
            next_obs: vec![0.0],
            done: true,
        };
        let cfg = UpdateConfig {
            entropy_coef: 0.1,
            lr_actor: 0.5,
            ..UpdateConfig::default()
        };
        let (after, diag) = a2c_update(&m, &tr, &cfg).unwrap();
        assert_eq!(diag.td_error, 0.0);
        // Entropy ascent pulls the logits together.
        let gap_before = 2.0;
        let b = &after.actor.layers[0].biases;
        assert!(b[0] - b[1] < gap_before);
        let cfg_no_entropy = UpdateConfig {
            entropy_coef: 0.0,
            ..cfg
        };
        let (frozen, _) = a2c_update(&m, &tr, &cfg_no_entropy).unwrap();
        assert_eq!(frozen.actor, m.actor);
    }

    #[test]
    fn bad_action_index_rejected() {
        let m = zero_model(1, 2);
        let tr = Transition {
            obs: vec![0.0],
            action: 5,
            reward: 0.0,
            next_obs: vec![0.0],
            done: false,
        };
        assert!(a2c_update(&m, &tr, &UpdateConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(UpdateConfig {
            gamma: 1.0,
            ..UpdateConfig::default()
        }
        .validate()
        .is_err());
        assert!(UpdateConfig {
            lr_actor: 0.0,
            ..UpdateConfig::default()
        }
        .validate()
        .is_err());
        UpdateConfig::default().validate().unwrap();
    }
}
