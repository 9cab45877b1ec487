//! Cart-pendulum model of the two-wheeled robot.

mod model;
mod params;
mod roots;
mod tf;

pub use model::{derivatives, linearize, mechanical_energy, step_rk4, LinearModel, RobotState, StateDerivative};
pub use params::{thin_rod_inertia, GravityCoupling, PhysicalParams};
pub use roots::polynomial_roots;
pub use tf::{pitch_transfer_function, poles, yaw_transfer_function, PoleSet, TransferFunction, MARGINAL_TOLERANCE};
