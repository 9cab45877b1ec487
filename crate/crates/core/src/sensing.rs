//! IMU emulation and complementary-filter pitch estimation.
//!
//! The emulated sensor sits on the axle with its x axis along the axle, so
//! pitch is a rotation about x. Readings are raw counts: physical value times
//! scale, plus a per-axis bias and optional Gaussian noise.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotState;
use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Bias values measured on the prototype's MPU-6050, in raw counts,
/// ordered `(ax, ay, az, gx, gy, gz)`.
pub const PROTOTYPE_OFFSETS: [f64; 6] = [-1780.0, 750.0, 2700.0, 180.0, 76.0, 61.0];

/// Minimum rest samples for [`calibrate_offsets`].
pub const MIN_CALIBRATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuSample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    pub t: f64,
}

impl ImuSample {
    pub fn channels(&self) -> [f64; 6] {
        [self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }

    fn from_channels(c: [f64; 6], t: f64) -> Self {
        ImuSample {
            ax: c[0],
            ay: c[1],
            az: c[2],
            gx: c[3],
            gy: c[4],
            gz: c[5],
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.channels().iter().all(|c| c.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuConfig {
    pub offsets: [f64; 6],
    /// Counts per m/s².
    pub accel_scale: f64,
    /// Counts per rad/s.
    pub gyro_scale: f64,
    pub noise_std_accel: f64,
    pub noise_std_gyro: f64,
}

impl Default for ImuConfig {
    /// ±2 g / ±250 °/s full-scale settings: 16384 counts per g and
    /// 131 counts per °/s.
    fn default() -> Self {
        ImuConfig {
            offsets: PROTOTYPE_OFFSETS,
            accel_scale: 16384.0 / STANDARD_GRAVITY,
            gyro_scale: 131.0 * 180.0 / std::f64::consts::PI,
            noise_std_accel: 30.0,
            noise_std_gyro: 5.0,
        }
    }
}

impl ImuConfig {
    /// Same scales, no bias and no noise.
    pub fn ideal() -> Self {
        ImuConfig {
            offsets: [0.0; 6],
            noise_std_accel: 0.0,
            noise_std_gyro: 0.0,
            ..ImuConfig::default()
        }
    }

    pub fn noiseless(self) -> Self {
        ImuConfig {
            noise_std_accel: 0.0,
            noise_std_gyro: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_scale > 0.0 && self.gyro_scale > 0.0) {
            return Err(Error::Config("IMU scales must be > 0".into()));
        }
        if !(self.noise_std_accel >= 0.0 && self.noise_std_gyro >= 0.0) {
            return Err(Error::Config("IMU noise std must be >= 0".into()));
        }
        if self.offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("IMU offsets must be finite".into()));
        }
        Ok(())
    }

    /// Bias-corrected readings in physical units: (m/s² ×3, rad/s ×3).
    pub fn to_physical(&self, sample: &ImuSample) -> ([f64; 3], [f64; 3]) {
        let c = sample.channels();
        let o = &self.offsets;
        (
            [
                (c[0] - o[0]) / self.accel_scale,
                (c[1] - o[1]) / self.accel_scale,
                (c[2] - o[2]) / self.accel_scale,
            ],
            [
                (c[3] - o[3]) / self.gyro_scale,
                (c[4] - o[4]) / self.gyro_scale,
                (c[5] - o[5]) / self.gyro_scale,
            ],
        )
    }
}

/// Noise-free, bias-free body-frame readings in counts.
fn ideal_counts(phi: f64, phi_dot: f64, accel: f64, gravity: f64, config: &ImuConfig) -> [f64; 6] {
    let (sin, cos) = phi.sin_cos();
    let ay = gravity * sin + accel * cos;
    let az = gravity * cos - accel * sin;
    [
        0.0,
        ay * config.accel_scale,
        az * config.accel_scale,
        phi_dot * config.gyro_scale,
        0.0,
        0.0,
    ]
}

/// Emulated IMU reading for the true state and cart acceleration `accel`.
///
/// Noise is drawn from `rng` only for channels with a nonzero standard
/// deviation, so zero-noise sampling never advances the stream.
pub fn synthesize_imu<R: Rng + ?Sized>(
    state: &RobotState,
    accel: f64,
    gravity: f64,
    config: &ImuConfig,
    rng: &mut R,
) -> ImuSample {
    let mut counts = ideal_counts(state.phi, state.phi_dot, accel, gravity, config);
    for (c, o) in counts.iter_mut().zip(config.offsets) {
        *c += o;
    }
    if config.noise_std_accel > 0.0 {
        let n = Normal::new(0.0, config.noise_std_accel).expect("validated std");
        for c in &mut counts[..3] {
            *c += n.sample(rng);
        }
    }
    if config.noise_std_gyro > 0.0 {
        let n = Normal::new(0.0, config.noise_std_gyro).expect("validated std");
        for c in &mut counts[3..] {
            *c += n.sample(rng);
        }
    }
    ImuSample::from_channels(counts, state.t)
}

/// Per-axis bias estimated from samples taken upright and at rest.
///
/// Returns the mean observed minus ideal reading on each channel, which is
/// what [`ImuConfig::offsets`] expects.
pub fn calibrate_offsets(samples: &[ImuSample], gravity: f64, config: &ImuConfig) -> Result<[f64; 6]> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    let ideal = ideal_counts(0.0, 0.0, 0.0, gravity, config);
    let n = samples.len() as f64;
    let mut offsets = [0.0; 6];
    for (axis, offset) in offsets.iter_mut().enumerate() {
        let sum: f64 = samples.iter().map(|s| s.channels()[axis] - ideal[axis]).sum();
        *offset = sum / n;
    }
    Ok(offsets)
}

/// Pitch angle implied by the accelerometer alone.
pub fn accel_pitch(sample: &ImuSample, config: &ImuConfig) -> f64 {
    let (acc, _) = config.to_physical(sample);
    acc[1].atan2(acc[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub phi_hat: f64,
    pub alpha: f64,
    pub last_t: f64,
}

impl FilterState {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("filter alpha must be in [0, 1], got {alpha}")));
        }
        Ok(FilterState {
            phi_hat: 0.0,
            alpha,
            last_t: 0.0,
        })
    }
}

/// One complementary-filter step: the gyro-propagated estimate blended with
/// the accelerometer angle, weights `alpha` and `1 - alpha`.
///
/// Offsets from `config` are removed before use.
pub fn filter_update(fs: &FilterState, sample: &ImuSample, config: &ImuConfig, dt: f64) -> FilterState {
    let (acc, gyro) = config.to_physical(sample);
    let predicted = fs.phi_hat + gyro[0] * dt;
    let measured = acc[1].atan2(acc[2]);
    FilterState {
        phi_hat: fs.alpha * predicted + (1.0 - fs.alpha) * measured,
        alpha: fs.alpha,
        last_t: sample.t,
    }
}

/// Writes one `t ax ay az gx gy gz` record per line.
pub fn write_imu_log<W: Write>(mut out: W, samples: &[ImuSample]) -> std::io::Result<()> {
    writeln!(out, "t ax ay az gx gy gz")?;
    for s in samples {
        writeln!(out, "{} {} {} {} {} {} {}", s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz)?;
    }
    Ok(())
}
