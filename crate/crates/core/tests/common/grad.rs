//! Finite-difference oracle for the networks, with its own forward pass.

use balance_lab::rl::nn::{Dense, Mlp, MlpGrads};
use balance_lab::rl::{a2c_update, PolicyModel, Transition, UpdateConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

/// Independent forward pass: tanh on hidden layers, identity on the last.
pub fn forward(layers: &[Dense], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (i, l) in layers.iter().enumerate() {
        let mut z = l.biases.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            for (k, ak) in a.iter().enumerate() {
                *zo += l.weights[o * l.inputs + k] * ak;
            }
        }
        a = if i + 1 == layers.len() {
            z
        } else {
            z.iter().map(|v| v.tanh()).collect()
        };
    }
    a
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub fn flat(g: &MlpGrads) -> Vec<f64> {
    g.layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
        .collect()
}

pub fn param_mut(layers: &mut [Dense], layer: usize, index: usize) -> &mut f64 {
    let l = &mut layers[layer];
    let nw = l.weights.len();
    if index < nw {
        &mut l.weights[index]
    } else {
        &mut l.biases[index - nw]
    }
}

/// Central differences of `loss` with respect to every parameter of `net`.
pub fn numeric_gradient(net: &Mlp, loss: impl Fn(&[Dense]) -> f64) -> Vec<f64> {
    let mut work = net.layers.clone();
    let mut out = Vec::new();
    for li in 0..work.len() {
        for pi in 0..work[li].weights.len() + work[li].biases.len() {
            let orig = *param_mut(&mut work, li, pi);
            *param_mut(&mut work, li, pi) = orig + H;
            let up = loss(&work);
            *param_mut(&mut work, li, pi) = orig - H;
            let down = loss(&work);
            *param_mut(&mut work, li, pi) = orig;
            out.push((up - down) / (2.0 * H));
        }
    }
    out
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_model(rng: &mut ChaCha8Rng) -> PolicyModel {
    let actor = Mlp::uniform(&[4, 8, 3], rng).unwrap();
    let critic = Mlp::uniform(&[4, 8, 1], rng).unwrap();
    PolicyModel::new(actor, critic, vec![1.0; 4]).unwrap()
}

pub fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
    Transition {
        obs: random_vec(rng, 4),
        action: rng.random_range(0..3),
        reward: rng.random_range(-1.0..1.0),
        next_obs: random_vec(rng, 4),
        done: rng.random_bool(0.3),
    }
}

pub fn bandit_model(seed: u64) -> PolicyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyModel::new(
        Mlp::uniform(&[1, 8, 2], &mut rng).unwrap(),
        Mlp::uniform(&[1, 8, 1], &mut rng).unwrap(),
        vec![1.0],
    )
    .unwrap()
}

/// Single state, two actions paying 1 and 0, every step terminal.
pub fn bandit_step(model: &PolicyModel, cfg: &UpdateConfig, rng: &mut ChaCha8Rng) -> PolicyModel {
    let probs = model.probabilities(&[1.0]).unwrap();
    let action = usize::from(rng.random::<f64>() >= probs[0]);
    let tr = Transition {
        obs: vec![1.0],
        action,
        reward: if action == 0 { 1.0 } else { 0.0 },
        next_obs: vec![1.0],
        done: true,
    };
    a2c_update(model, &tr, cfg).unwrap().0
}

/// Largest relative discrepancy, with differences below 1e-4 in size
/// measured absolutely.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}
