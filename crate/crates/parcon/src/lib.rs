//! Numerical toolkit for partial null controllability of coupled parabolic
//! systems.
//!
//! The crate decides, constructs and falsifies controllability of the first
//! `p` components of linear parabolic systems:
//!
//! * [`kalman`] — algebraic rank checks `rank Π_p[A|B] = p` for constant and
//!   time-polynomial coefficient matrices, constructive cascade transforms
//!   and an independent finite-dimensional Gramian oracle.
//! * [`spectral`] — exact sine-eigenbasis solvers for the 2×2 coupled heat
//!   system on an interval, coupling coefficients `α_{kl}` and the duality
//!   identity connecting forward and adjoint solutions.
//! * [`moments`] — constructive control synthesis through a biorthogonal
//!   family to the exponentials `e^{-μ_k t}` and the associated problem of
//!   moments.
//! * [`witness`] — explicit adjoint data certifying *non*-controllability:
//!   boundary observation decaying polynomially while the duality pairing
//!   stays bounded below.
//! * [`hum`] — fully discrete penalized-HUM solver (P1 finite elements,
//!   backward Euler, conjugate gradients on the Gramian) and mesh sweeps.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature is
//! enabled by default. All operations are pure functions of their inputs and
//! all value types are immutable once built, so independent computations can
//! run in parallel without shared state.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dd;
pub mod expm;
pub mod hum;
pub mod kalman;
pub mod linalg;
pub mod moments;
pub mod poly;
pub mod quad;
pub mod scalar;
pub mod spectral;
pub mod witness;

pub use nalgebra::{DMatrix, DVector};
