//! Exact-rational laboratory for nonexpansive operator dynamics on finite
//! measure spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`l1`]: measure spaces, L¹ functions, norms, metrics and feasible sets.
//! - [`operators`]: translation, averaging, clipping, conditional expectation,
//!   grid quantization and bounded perturbation, plus property checks.
//! - [`dynamics`]: orbit iteration, exact cycle detection, displacement scans,
//!   ε-fixed-point search and rotation periods.
//! - [`geometry`]: diameters, Chebyshev-radius estimates, midpoint probes.
//! - [`scenarios`]: declarative experiments and the built-in case registry.
//! - [`cli`]: the `fixlab` command-line front end.
//!
//! No floating point is used anywhere; every value is a [`exact::Rat`].

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod l1;
pub mod operators;
pub mod sampling;
pub mod scenarios;

pub use error::{Error, Result};
