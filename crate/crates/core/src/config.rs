//! Single TOML document describing a whole experiment.
//!
//! Every section is optional and every key falls back to its default, so an
//! empty file is a valid configuration. Unknown keys are rejected. All
//! quantities are SI (kg, m, s, N, rad).
//!
//! ```toml
//! [physical]
//! m1 = 0.135
//! l = 0.1          # i2 defaults to the thin-rod value m2·l²/3
//!
//! [sensor]
//! noise_std_accel = 0.0
//! alpha = 0.98
//!
//! [sim]
//! dt = 0.002
//!
//! [pid]
//! kp = 30.0
//!
//! [rl]
//! n_episodes = 2000
//!
//! [harness]
//! grid = [-0.09, -0.06, -0.03, 0.03, 0.06, 0.09]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{thin_rod_inertia, GravityCoupling, PhysicalParams};
use crate::error::{Error, Result};
use crate::harness::HarnessConfig;
use crate::pid::{PidGains, PositionLoop, Setpoint, TuneConfig};
use crate::rl::TrainConfig;
use crate::sensing::ImuConfig;
use crate::sim::{PlantConfig, SimConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub physical: PhysicalSection,
    pub sensor: SensorSection,
    pub sim: SimConfig,
    pub pid: PidSection,
    pub rl: TrainConfig,
    pub harness: HarnessConfig,
}

/// Physical parameters as written in the file; `i2` may be left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalSection {
    pub m1: f64,
    pub m2: f64,
    pub l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i2: Option<f64>,
    pub f: f64,
    pub g: f64,
    pub wheel_diameter: f64,
    pub wheel_base: f64,
    pub mu_s: f64,
    pub force_limit: f64,
    pub gravity_coupling: GravityCoupling,
}

impl Default for PhysicalSection {
    fn default() -> Self {
        let p = PhysicalParams::default();
        PhysicalSection {
            m1: p.m1,
            m2: p.m2,
            l: p.l,
            i2: None,
            f: p.f,
            g: p.g,
            wheel_diameter: p.wheel_diameter,
            wheel_base: p.wheel_base,
            mu_s: p.mu_s,
            force_limit: p.force_limit,
            gravity_coupling: p.gravity_coupling,
        }
    }
}

impl PhysicalSection {
    pub fn params(&self) -> PhysicalParams {
        PhysicalParams {
            m1: self.m1,
            m2: self.m2,
            l: self.l,
            i2: self.i2.unwrap_or_else(|| thin_rod_inertia(self.m2, self.l)),
            f: self.f,
            g: self.g,
            wheel_diameter: self.wheel_diameter,
            wheel_base: self.wheel_base,
            mu_s: self.mu_s,
            force_limit: self.force_limit,
            gravity_coupling: self.gravity_coupling,
        }
    }
}

/// IMU model plus the complementary-filter coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    /// Raw-count biases, order ax ay az gx gy gz.
    pub offsets: [f64; 6],
    pub accel_scale: f64,
    pub gyro_scale: f64,
    pub noise_std_accel: f64,
    pub noise_std_gyro: f64,
    pub alpha: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let imu = ImuConfig::default();
        SensorSection {
            offsets: imu.offsets,
            accel_scale: imu.accel_scale,
            gyro_scale: imu.gyro_scale,
            noise_std_accel: imu.noise_std_accel,
            noise_std_gyro: imu.noise_std_gyro,
            alpha: 0.98,
        }
    }
}

impl SensorSection {
    pub fn imu(&self) -> ImuConfig {
        ImuConfig {
            offsets: self.offsets,
            accel_scale: self.accel_scale,
            gyro_scale: self.gyro_scale,
            noise_std_accel: self.noise_std_accel,
            noise_std_gyro: self.noise_std_gyro,
        }
    }
}

/// Gains used when no gains file is given, found by the default tuning grid
/// on the default plant without sensor noise.
pub const DEFAULT_GAINS: PidGains = PidGains {
    kp: 30.0,
    ki: 640.0,
    kd: 0.3,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidSection {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub target_phi: f64,
    pub target_x: f64,
    pub position_loop: PositionLoop,
    pub tune: TuneConfig,
}

impl Default for PidSection {
    fn default() -> Self {
        PidSection {
            kp: DEFAULT_GAINS.kp,
            ki: DEFAULT_GAINS.ki,
            kd: DEFAULT_GAINS.kd,
            target_phi: 0.0,
            target_x: 0.0,
            position_loop: PositionLoop::default(),
            tune: TuneConfig::default(),
        }
    }
}

impl PidSection {
    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
        }
    }

    pub fn setpoint(&self) -> Setpoint {
        Setpoint {
            target_phi: self.target_phi,
            target_x: self.target_x,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.plant().validate()?;
        self.pid.gains().validate()?;
        self.rl.validate()?;
        self.harness.validate()
    }

    pub fn plant(&self) -> PlantConfig {
        PlantConfig {
            params: self.physical.params(),
            imu: self.sensor.imu(),
            alpha: self.sensor.alpha,
            sim: self.sim,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical serialisation, first 16 hex digits.
    /// Equal configurations hash equally however the file was written.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn write_gains(path: impl AsRef<Path>, gains: &PidGains) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string(gains).expect("gains serialise");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_gains(path: impl AsRef<Path>) -> Result<PidGains> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let gains: PidGains = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    gains.validate()?;
    Ok(gains)
}
