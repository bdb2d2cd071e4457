//! Agent-based simulator and control library for multi-robot-guided crowd
//! evacuation.
//!
//! A crowd of N humans evolves under a microscopic social-force model; a much
//! smaller team of n robots carries directional signs whose locally supported
//! force fields steer nearby humans. The robots run two controllers: a
//! potential-field coverage controller for their positions and a
//! density-feedback/backstepping controller (with an adaptive RBF term for
//! unknown environment forces) for their sign directions. Crowd density and
//! velocity macrostates are reconstructed on a grid from the particle states
//! by kernel density estimation and kernel regression; feedback drives the
//! estimated density toward a narrow Gaussian target at a safe location.
//!
//! Modules:
//! - [`domain`]: spatial domain, particle states, obstacles, target density,
//!   run configuration.
//! - [`field`]: grid-sampled scalar/vector fields and the discrete calculus
//!   (gradient, divergence, advection, convolution, quadrature, sampling).
//! - [`forces`]: microscopic force laws (pair potential, environment forces,
//!   robot navigation kernel and its derivatives).
//! - [`estimation`]: density and velocity-field estimators.
//! - [`control`]: position and direction controllers, adaptive approximator.
//! - [`sim`]: the time-stepping engine, metrics, and diagnostics.

pub mod control;
pub mod domain;
pub mod error;
pub mod estimation;
pub mod field;
pub mod forces;
pub mod geom;
pub mod rng;
pub mod sim;

pub use error::{Result, SimError};
pub use geom::Vec2;
