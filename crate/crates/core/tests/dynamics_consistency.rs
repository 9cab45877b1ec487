mod common;

use balance_lab::dynamics::{
    derivatives, linearize, mechanical_energy, pitch_transfer_function, poles, step_rk4, yaw_transfer_function,
    PhysicalParams, RobotState,
};
use common::{energy_from_lagrangian, poly_eval, state_space_response, state_vec};
use nalgebra::Vector4;
use num_complex::Complex64;

fn frictionless() -> PhysicalParams {
    PhysicalParams {
        f: 0.0,
        ..PhysicalParams::default()
    }
}

#[test]
fn library_energy_matches_lagrangian() {
    let p = PhysicalParams::default();
    for s in [
        RobotState::default(),
        RobotState {
            x: 0.3,
            x_dot: -1.2,
            phi: 0.7,
            phi_dot: 2.5,
            t: 0.0,
        },
        RobotState {
            phi: std::f64::consts::PI - 0.3,
            x_dot: 0.4,
            ..RobotState::default()
        },
    ] {
        let (a, b) = (mechanical_energy(&s, &p), energy_from_lagrangian(&s, &p));
        assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn hanging_pendulum_conserves_energy() {
    let p = frictionless();
    let mut s = RobotState {
        phi: std::f64::consts::PI - 0.3,
        ..RobotState::default()
    };
    let e0 = energy_from_lagrangian(&s, &p);
    for _ in 0..10_000 {
        s = step_rk4(&s, 0.0, &p, 1e-3).unwrap();
    }
    let drift = ((energy_from_lagrangian(&s, &p) - e0) / e0).abs();
    assert!(drift < 1e-6, "relative drift {drift:e}");
    assert!((s.t - 10.0).abs() < 1e-9);
}

/// Error of one step of size `h` against the same interval integrated at 1e-6.
fn one_step_error(h: f64) -> f64 {
    let p = PhysicalParams::default();
    let s0 = RobotState {
        x: 0.1,
        x_dot: 0.5,
        phi: 0.2,
        phi_dot: -1.0,
        t: 0.0,
    };
    let coarse = step_rk4(&s0, 1.5, &p, h).unwrap();
    let n = (h / 1e-6).round() as usize;
    let mut fine = s0;
    for _ in 0..n {
        fine = step_rk4(&fine, 1.5, &p, h / n as f64).unwrap();
    }
    state_vec(&coarse)
        .iter()
        .zip(state_vec(&fine))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let ratio = one_step_error(0.02) / one_step_error(0.01);
    assert!(ratio >= 14.0, "halving dt reduced the error by only {ratio}");
}

#[test]
fn finite_difference_jacobian_matches_linearization() {
    let p = PhysicalParams::default();
    let lin = linearize(&p).unwrap();
    let h = 1e-6;
    let f = |x: [f64; 4], u: f64| {
        let s = RobotState {
            x: x[0],
            x_dot: x[1],
            phi: x[2],
            phi_dot: x[3],
            t: 0.0,
        };
        let d = derivatives(&s, u, &p).unwrap();
        [d.x_dot, d.x_ddot, d.phi_dot, d.phi_ddot]
    };
    for j in 0..4 {
        let (mut plus, mut minus) = ([0.0; 4], [0.0; 4]);
        plus[j] = h;
        minus[j] = -h;
        let (fp, fm) = (f(plus, 0.0), f(minus, 0.0));
        for i in 0..4 {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!(
                (fd - lin.a[(i, j)]).abs() <= 1e-6 * lin.a[(i, j)].abs().max(1.0),
                "A[{i}][{j}]"
            );
        }
    }
    let (fp, fm) = (f([0.0; 4], h), f([0.0; 4], -h));
    for i in 0..4 {
        let fd = (fp[i] - fm[i]) / (2.0 * h);
        assert!((fd - lin.b[i]).abs() <= 1e-6 * lin.b[i].abs().max(1.0), "B[{i}]");
    }
}

fn closest(target: Complex64, among: &[Complex64]) -> f64 {
    among.iter().map(|e| (e - target).norm()).fold(f64::INFINITY, f64::min)
}

#[test]
fn transfer_function_poles_are_state_space_eigenvalues() {
    for p in [PhysicalParams::default(), frictionless()] {
        let lin = linearize(&p).unwrap();
        let eig: Vec<Complex64> = lin.a.complex_eigenvalues().iter().copied().collect();
        let pitch = poles(&pitch_transfer_function(&p).unwrap()).unwrap();
        let yaw = poles(&yaw_transfer_function(&p).unwrap()).unwrap();
        assert_eq!(pitch.poles.len(), 3);
        assert_eq!(yaw.poles.len(), 4);
        for pole in pitch.poles.iter().chain(&yaw.poles) {
            assert!(closest(*pole, &eig) < 1e-8, "pole {pole} not among {eig:?}");
        }
        for e in &eig {
            assert!(closest(*e, &yaw.poles) < 1e-8, "eigenvalue {e} missing from yaw poles");
        }
        assert!(pitch.unstable_count >= 1);
        assert!(pitch.max_residual < 1e-8);
    }
}

#[test]
fn transfer_functions_match_state_space_response() {
    let p = PhysicalParams::default();
    let lin = linearize(&p).unwrap();
    let pitch = pitch_transfer_function(&p).unwrap();
    let yaw = yaw_transfer_function(&p).unwrap();
    let c_phi = Vector4::new(0.0, 0.0, 1.0, 0.0);
    let c_x = Vector4::new(1.0, 0.0, 0.0, 0.0);
    for s in [
        Complex64::new(0.3, 1.7),
        Complex64::new(-2.0, 0.5),
        Complex64::new(4.0, -3.0),
        Complex64::new(0.0, 20.0),
    ] {
        let tf = poly_eval(&pitch.numerator, s) / poly_eval(&pitch.denominator, s);
        let ss = state_space_response(&lin.a, &lin.b, &c_phi, s);
        assert!(
            (tf - ss).norm() <= 1e-9 * ss.norm().max(1.0),
            "pitch at {s}: {tf} vs {ss}"
        );
        let tf = poly_eval(&yaw.numerator, s) / poly_eval(&yaw.denominator, s);
        let ss = state_space_response(&lin.a, &lin.b, &c_x, s);
        assert!(
            (tf - ss).norm() <= 1e-9 * ss.norm().max(1.0),
            "position at {s}: {tf} vs {ss}"
        );
    }
}

#[test]
fn small_tilt_grows_in_open_loop() {
    let p = PhysicalParams::default();
    let mut s = RobotState::tilted(0.05);
    let mut prev = s.phi.abs();
    while s.t < 0.5 {
        s = step_rk4(&s, 0.0, &p, 1e-3).unwrap();
        assert!(s.phi.abs() > prev);
        prev = s.phi.abs();
    }
}
