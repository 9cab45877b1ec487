//! Simulation laboratory for a two-wheeled self-balancing robot modelled as
//! an inverted pendulum on a cart.
//!
//! Two controllers share one closed-loop plant ([`sim::Plant`]): a PID on the
//! complementary-filtered pitch ([`pid`]) and an advantage actor-critic agent
//! with hand-written backpropagation ([`rl`]). [`harness`] runs them on
//! matched initial conditions and compares settling behaviour.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod pid;
pub mod rl;
pub mod sensing;
pub mod sim;

pub use config::Config;
pub use error::{Error, Result};
