use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PhysicalParams;
use crate::error::{Error, Result};

/// Cart-pendulum state. `phi` is the tilt from the upward vertical, signed so
/// that pushing the cart toward +x rotates the body toward positive `phi`
/// (the body leans toward −x when `phi > 0`). It is never wrapped; the
/// hanging configuration is `phi = ±π`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub t: f64,
}

impl RobotState {
    /// At rest at the origin with the given tilt.
    pub fn tilted(phi: f64) -> Self {
        RobotState {
            phi,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.x_dot.is_finite()
            && self.phi.is_finite()
            && self.phi_dot.is_finite()
            && self.t.is_finite()
    }

    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.x_dot, self.phi, self.phi_dot)
    }

    fn from_vector(v: &Vector4<f64>, t: f64) -> Self {
        RobotState {
            x: v[0],
            x_dot: v[1],
            phi: v[2],
            phi_dot: v[3],
            t,
        }
    }
}

/// Time derivative of `(x, x_dot, phi, phi_dot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub x_dot: f64,
    pub x_ddot: f64,
    pub phi_dot: f64,
    pub phi_ddot: f64,
}

impl StateDerivative {
    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x_dot, self.x_ddot, self.phi_dot, self.phi_ddot)
    }
}

/// Accelerations of the full nonlinear model.
///
/// The cart and pendulum equations are coupled through the accelerations:
///
/// ```text
/// (m1 + m2)·ẍ − m2·l·cosφ·φ̈ = F − f·ẋ − m2·l·φ̇²·sinφ
/// −m2·l·cosφ·ẍ + (I2 + m2·l²)·φ̈ = m2·g·l·sinφ
/// ```
///
/// and are recovered with a 2×2 Cramer solve.
pub fn derivatives(state: &RobotState, force: f64, params: &PhysicalParams) -> Result<StateDerivative> {
    let m = params.total_mass();
    let j = params.pivot_inertia();
    let ml = params.m2 * params.l;
    let (sin, cos) = state.phi.sin_cos();

    let a11 = m;
    let a12 = -ml * cos;
    let a22 = j;
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 * (a11 * a22).abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateParams(format!(
            "singular acceleration system (det={det:e})"
        )));
    }

    let rhs_cart = force - params.f * state.x_dot - ml * state.phi_dot * state.phi_dot * sin;
    let rhs_pend = ml * params.g * sin;

    Ok(StateDerivative {
        x_dot: state.x_dot,
        x_ddot: (a22 * rhs_cart - a12 * rhs_pend) / det,
        phi_dot: state.phi_dot,
        phi_ddot: (a11 * rhs_pend - a12 * rhs_cart) / det,
    })
}

/// One classical Runge–Kutta step with the force held over the interval.
pub fn step_rk4(state: &RobotState, force: f64, params: &PhysicalParams, dt: f64) -> Result<RobotState> {
    let f = |s: &Vector4<f64>| -> Result<Vector4<f64>> {
        let st = RobotState::from_vector(s, state.t);
        Ok(derivatives(&st, force, params)?.as_vector())
    };
    let y = state.as_vector();
    let k1 = f(&y)?;
    let k2 = f(&(y + k1 * (dt / 2.0)))?;
    let k3 = f(&(y + k2 * (dt / 2.0)))?;
    let k4 = f(&(y + k3 * dt))?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = RobotState::from_vector(&next, state.t + dt);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::IntegrationDiverged { state: next })
    }
}

/// Total mechanical energy (kinetic + gravitational, zero at the pivot height).
pub fn mechanical_energy(state: &RobotState, params: &PhysicalParams) -> f64 {
    let ml = params.m2 * params.l;
    let kinetic = 0.5 * params.total_mass() * state.x_dot * state.x_dot
        - ml * state.phi.cos() * state.x_dot * state.phi_dot
        + 0.5 * params.pivot_inertia() * state.phi_dot * state.phi_dot;
    let potential = ml * params.g * state.phi.cos();
    kinetic + potential
}

/// Linear model `ẋ = A·x + B·u` about the upright equilibrium, state order
/// `(x, x_dot, phi, phi_dot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
}

impl LinearModel {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }
}

pub fn linearize(params: &PhysicalParams) -> Result<LinearModel> {
    params.validate()?;
    let q = params.q();
    let j = params.pivot_inertia();
    let m = params.total_mass();
    let ml = params.m2 * params.l;
    let g = params.g;
    let f = params.f;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0,              0.0,                0.0,
        0.0, -f * j / q,       ml * ml * g / q,    0.0,
        0.0, 0.0,              0.0,                1.0,
        0.0, -ml * f / q,      m * ml * g / q,     0.0,
    );
    let b = Vector4::new(0.0, j / q, 0.0, ml / q);
    Ok(LinearModel { a, b })
}
