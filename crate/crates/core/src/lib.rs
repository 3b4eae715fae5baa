//! Solvers and Monte Carlo checks for zero-sum linear-quadratic stochastic
//! differential games whose state splits into slow and fast components.

pub mod asymptotics;
pub mod boundary;
pub mod cli;
pub mod error;
pub mod game;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod output;
pub mod reduced;
pub mod riccati;
pub mod scalar;

pub use error::{Assumption, Error, OdeSystem, Result};
pub use model::{assemble_compact, delta_blocks, fixture_s1, validate_spec, GameSpec};
pub use ode::ToleranceConfig;
