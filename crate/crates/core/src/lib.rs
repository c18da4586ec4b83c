//! Exact one-dimensional sticky particle dynamics under a maximal packing
//! constraint, and the machinery to follow it to its hydrodynamic limit.
//!
//! `N` particles of diameter `2r = 1/N` move freely until they touch, then
//! stick. Positions are given in closed form by a projection onto the spacing
//! cone ([`cone`]), or equivalently by an event-driven simulation
//! ([`dynamics`]). Lagrangian interpolations ([`fields`]) and their Eulerian
//! push-forward ([`eulerian`]) connect the particle system to the constrained
//! pressureless Euler equations, with density at most one and a congestion
//! pressure that only acts where the density saturates.
//!
//! Particles are sampled from a macroscopic datum by [`initdata`]. The named
//! test cases and the closed-form two-block solutions live in [`scenarios`];
//! [`battery`] runs every invariant check on a finished run.

// `!(a < b)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod bench;
pub mod cone;
pub mod dynamics;
pub mod error;
pub mod eulerian;
pub mod fields;
pub mod initdata;
pub mod quadrature;
pub mod report;
pub mod scenarios;

pub use error::{Error, Result};
