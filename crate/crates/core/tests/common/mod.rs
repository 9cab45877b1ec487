//! Oracles shared by the integration and acceptance tests. Nothing here
//! calls the library routine it is used to check.
#![allow(dead_code)]

pub mod grad;

use balance_lab::dynamics::{PhysicalParams, RobotState};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex;

/// Kinetic plus potential energy written out from the cart and pendulum
/// centre-of-mass velocities: the centre of mass sits at
/// `(x − l·sin φ, l·cos φ)`.
pub fn energy_from_lagrangian(s: &RobotState, p: &PhysicalParams) -> f64 {
    let vx = s.x_dot - p.l * s.phi.cos() * s.phi_dot;
    let vy = -p.l * s.phi.sin() * s.phi_dot;
    let cart = 0.5 * p.m1 * s.x_dot * s.x_dot;
    let body = 0.5 * p.m2 * (vx * vx + vy * vy) + 0.5 * p.i2 * s.phi_dot * s.phi_dot;
    cart + body + p.m2 * p.g * p.l * s.phi.cos()
}

/// `c·(sI − A)⁻¹·b` evaluated with a dense complex inverse.
pub fn state_space_response(a: &Matrix4<f64>, b: &Vector4<f64>, c: &Vector4<f64>, s: Complex<f64>) -> Complex<f64> {
    let a = a.map(|v| Complex::new(v, 0.0));
    let m = Matrix4::from_diagonal_element(s) - a;
    let inv = m.try_inverse().expect("s is not an eigenvalue");
    let b = b.map(|v| Complex::new(v, 0.0));
    let c = c.map(|v| Complex::new(v, 0.0));
    (c.transpose() * inv * b)[(0, 0)]
}

/// Polynomial in descending powers, evaluated at a complex point.
pub fn poly_eval(coeffs: &[f64], s: Complex<f64>) -> Complex<f64> {
    coeffs.iter().fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn state_vec(s: &RobotState) -> [f64; 4] {
    [s.x, s.x_dot, s.phi, s.phi_dot]
}

/// Prints one acceptance line and returns whether it passed.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

use balance_lab::rl::nn::{Dense, Mlp};
use balance_lab::rl::{PolicyModel, OBS_DIM};

/// Policy that always picks the middle (zero-force) action.
pub fn neutral_model() -> PolicyModel {
    let mut out = Dense::zeros(4, 3);
    out.biases[1] = 10.0;
    let actor = Mlp::from_layers(vec![Dense::zeros(OBS_DIM, 4), out]).unwrap();
    let critic = Mlp::zeros(&[OBS_DIM, 4, 1]).unwrap();
    PolicyModel::new(actor, critic, vec![1.0; OBS_DIM]).unwrap()
}

/// Hand-wired relay policy: push against `phi_hat + kd·gyro` at full force.
pub fn relay_model(kd: f64) -> PolicyModel {
    let mut hidden = Dense::zeros(OBS_DIM, 1);
    hidden.weights[0] = 1.0;
    hidden.weights[1] = kd;
    let mut out = Dense::zeros(1, 3);
    // Positive pitch needs negative force (action 0).
    out.weights[0] = 1e4;
    out.weights[2] = -1e4;
    let actor = Mlp::from_layers(vec![hidden, out]).unwrap();
    let critic = Mlp::zeros(&[OBS_DIM, 2, 1]).unwrap();
    PolicyModel::new(actor, critic, vec![1.0; OBS_DIM]).unwrap()
}
