//! Simultaneous polynomial root finding (Aberth–Ehrlich) with Newton polish.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;

/// All complex roots of a real polynomial given in descending powers.
///
/// Trailing zero coefficients are split off as exact roots at the origin.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let first = coeffs
        .iter()
        .position(|&c| c != 0.0)
        .ok_or_else(|| Error::NumericalFailure("zero polynomial".into()))?;
    let coeffs = &coeffs[first..];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericalFailure("non-finite coefficient".into()));
    }

    let zeros_at_origin = coeffs.iter().rev().take_while(|&&c| c == 0.0).count();
    let core = &coeffs[..coeffs.len() - zeros_at_origin];
    let lead = core[0];
    let monic: Vec<f64> = core.iter().map(|c| c / lead).collect();

    let mut roots = aberth(&monic)?;
    roots.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), zeros_at_origin));
    Ok(roots)
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn aberth(monic: &[f64]) -> Result<Vec<Complex64>> {
    let n = monic.len() - 1;
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(-monic[1], 0.0)]),
        _ => {}
    }

    // Cauchy bound on root magnitudes
    let radius = 1.0 + monic[1..].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, angle)
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval_with_derivative(monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }

    // A few Newton steps tighten the residual on simple roots.
    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(monic, *root);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let next = *root - p / dp;
            if eval_with_derivative(monic, next).0.norm() < p.norm() {
                *root = next;
            } else {
                break;
            }
        }
    }

    if !converged {
        let scale: f64 = monic.iter().map(|c| c.abs()).sum();
        let worst = z
            .iter()
            .map(|&r| eval_with_derivative(monic, r).0.norm() / (scale * (1.0 + r.norm()).powi(n as i32)))
            .fold(0.0, f64::max);
        if !(worst < 1e-10) {
            return Err(Error::NumericalFailure(format!(
                "root finder did not converge in {MAX_ITERATIONS} iterations (residual {worst:e})"
            )));
        }
    }

    // Snap conjugate-pair noise on real roots.
    for r in z.iter_mut() {
        if r.im.abs() <= 1e-12 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    Ok(z)
}
