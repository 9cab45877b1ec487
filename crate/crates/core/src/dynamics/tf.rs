use num_complex::Complex64;
use serde::Serialize;

use super::roots::polynomial_roots;
use super::{GravityCoupling, PhysicalParams};
use crate::error::{Error, Result};

/// Rational function in `s`, coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferFunction {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl TransferFunction {
    /// Builds a transfer function and rescales it so the denominator is monic.
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        let lead = *denominator
            .first()
            .ok_or_else(|| Error::NumericalFailure("empty denominator".into()))?;
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::NumericalFailure(format!("invalid leading coefficient {lead}")));
        }
        Ok(TransferFunction {
            numerator: numerator.into_iter().map(|c| c / lead).collect(),
            denominator: denominator.into_iter().map(|c| c / lead).collect(),
        })
    }

    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        horner(&self.numerator, s) / horner(&self.denominator, s)
    }

    pub fn denominator_degree(&self) -> usize {
        self.denominator.len().saturating_sub(1)
    }
}

pub(crate) fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Coefficients shared by both transfer functions:
/// `s³ + f·J/q·s² − (m1+m2)·m·g·l/q·s − f·m2·g·l/q` where `m` is `m2`
/// or `m1` depending on [`GravityCoupling`].
fn cubic_denominator(params: &PhysicalParams) -> Vec<f64> {
    let q = params.q();
    let j = params.pivot_inertia();
    let coupled_mass = match params.gravity_coupling {
        GravityCoupling::Derived => params.m2,
        GravityCoupling::Printed => params.m1,
    };
    let gl = params.g * params.l;
    vec![
        1.0,
        params.f * j / q,
        -params.total_mass() * coupled_mass * gl / q,
        -params.f * params.m2 * gl / q,
    ]
}

/// Pitch response `Φ(s)/F(s)`.
pub fn pitch_transfer_function(params: &PhysicalParams) -> Result<TransferFunction> {
    params.validate()?;
    let q = params.q();
    TransferFunction::new(vec![params.m2 * params.l / q, 0.0], cubic_denominator(params))
}

/// Cart position response `X(s)/F(s)`.
pub fn yaw_transfer_function(params: &PhysicalParams) -> Result<TransferFunction> {
    params.validate()?;
    let q = params.q();
    let mut den = cubic_denominator(params);
    den.push(0.0);
    TransferFunction::new(
        vec![params.pivot_inertia() / q, 0.0, -params.g * params.m2 * params.l / q],
        den,
    )
}

/// Roots of a denominator with stability bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleSet {
    #[serde(serialize_with = "serialize_complex")]
    pub poles: Vec<Complex64>,
    /// Poles with real part > 0 (beyond the marginal tolerance).
    pub unstable_count: usize,
    /// Poles with |real part| ≤ [`MARGINAL_TOLERANCE`].
    pub marginal_count: usize,
    /// Largest `|den(p)|` over all poles.
    pub max_residual: f64,
}

pub const MARGINAL_TOLERANCE: f64 = 1e-10;

fn serialize_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl PoleSet {
    pub fn is_unstable(&self) -> bool {
        self.unstable_count > 0
    }
}

pub fn poles(tf: &TransferFunction) -> Result<PoleSet> {
    if tf.denominator_degree() < 1 {
        return Err(Error::NumericalFailure("denominator must have degree >= 1".into()));
    }
    let roots = polynomial_roots(&tf.denominator)?;
    let mut unstable = 0;
    let mut marginal = 0;
    for z in &roots {
        if z.re.abs() <= MARGINAL_TOLERANCE {
            marginal += 1;
        } else if z.re > 0.0 {
            unstable += 1;
        }
    }
    let max_residual = roots
        .iter()
        .map(|&z| horner(&tf.denominator, z).norm())
        .fold(0.0, f64::max);
    Ok(PoleSet {
        poles: roots,
        unstable_count: unstable,
        marginal_count: marginal,
        max_residual,
    })
}
