//! Product-normal distributions PN(n, σ²), the order-n zero-bias transform,
//! and the explicit solution of the PN(2, σ²) Stein equation.
//!
//! Modules are layered bottom-up: [`specfun`] and [`quad`] supply scalar
//! kernels, [`prodnormal`] and [`operators`] build the distribution family and
//! its Stein operator, [`zerobias`] and [`stein2`] sit on top, and
//! [`experiments`] runs the Monte Carlo convergence checks.

pub mod error;
pub mod experiments;
pub mod operators;
pub mod par;
pub mod prodnormal;
pub mod quad;
pub mod rng;
pub mod specfun;
pub mod stats;
pub mod stein2;
pub mod testfns;
pub mod zerobias;

pub use error::{Error, Result};
