use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRAM: f64 = 1e-3;
const CENTIMETRE: f64 = 1e-2;

/// Which mass multiplies `g·l` in the `s` coefficient of the pitch/yaw
/// denominators.
///
/// `Derived` is what falls out of the equations of motion,
/// `(m1 + m2)·m2·g·l`. `Printed` reproduces the published coefficient
/// `(m2 + m1)·m1·g·l`. Only the transfer-function constructors consult this;
/// the nonlinear model and its linearization always use the derived form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GravityCoupling {
    #[default]
    Derived,
    Printed,
}

/// Cart-pendulum parameters in SI units.
///
/// `m1` is the wheel/base assembly treated as the cart, `m2` the body treated
/// as the pendulum with its centre of mass `l` above the axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub l: f64,
    pub i2: f64,
    pub f: f64,
    pub g: f64,
    pub wheel_diameter: f64,
    pub wheel_base: f64,
    /// Stored for completeness; the point-mass model has no contact slip.
    pub mu_s: f64,
    pub force_limit: f64,
    #[serde(default)]
    pub gravity_coupling: GravityCoupling,
}

impl Default for PhysicalParams {
    /// Prototype values (135 g body, 60 g pendulum, 5 cm wheels, 20 cm track,
    /// static friction 1.15) plus the simulator-only quantities that the
    /// prototype never measured: `l`, `f`, `force_limit`, and the thin-rod `I2`.
    fn default() -> Self {
        let m2 = 60.0 * GRAM;
        let l = 10.0 * CENTIMETRE;
        PhysicalParams {
            m1: 135.0 * GRAM,
            m2,
            l,
            i2: thin_rod_inertia(m2, l),
            f: 0.1,
            g: 9.81,
            wheel_diameter: 5.0 * CENTIMETRE,
            wheel_base: 20.0 * CENTIMETRE,
            mu_s: 1.15,
            force_limit: 5.0,
            gravity_coupling: GravityCoupling::Derived,
        }
    }
}

/// Moment of inertia of a uniform rod of mass `m` about its centre, where
/// the centre sits `l` from the pivot (rod length `2l`).
pub fn thin_rod_inertia(m: f64, l: f64) -> f64 {
    m * l * l / 3.0
}

impl PhysicalParams {
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    /// Pendulum inertia about the pivot, `I2 + m2·l²`.
    pub fn pivot_inertia(&self) -> f64 {
        self.i2 + self.m2 * self.l * self.l
    }

    /// `q = (m1 + m2)(I2 + m2·l²) − (m2·l)²`, the common denominator of the
    /// linearized model.
    pub fn q(&self) -> f64 {
        let ml = self.m2 * self.l;
        self.total_mass() * self.pivot_inertia() - ml * ml
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l", self.l),
            ("i2", self.i2),
            ("f", self.f),
            ("g", self.g),
            ("wheel_diameter", self.wheel_diameter),
            ("wheel_base", self.wheel_base),
            ("mu_s", self.mu_s),
            ("force_limit", self.force_limit),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::DegenerateParams(format!("{name} is not finite")));
        }
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l", self.l),
            ("g", self.g),
            ("force_limit", self.force_limit),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(Error::DegenerateParams(format!("{name} must be > 0, got {v}")));
        }
        if self.i2 < 0.0 {
            return Err(Error::DegenerateParams(format!("i2 must be >= 0, got {}", self.i2)));
        }
        if self.f < 0.0 {
            return Err(Error::DegenerateParams(format!("f must be >= 0, got {}", self.f)));
        }
        let q = self.q();
        if q <= 1e-12 * self.total_mass() * self.pivot_inertia() {
            return Err(Error::DegenerateParams(format!("q must be > 0, got {q}")));
        }
        Ok(())
    }

    /// Saturate a force command to the actuator range.
    pub fn clamp_force(&self, force: f64) -> f64 {
        force.clamp(-self.force_limit, self.force_limit)
    }
}
