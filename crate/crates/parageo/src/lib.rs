//! Parametric geometry of numbers over `Q` and real quadratic fields.
//!
//! The crate is organised around one pipeline:
//!
//! * [`exterior`] — exact multilinear algebra (wedge, contraction, Hodge
//!   duality, projective distances) over exchangeable scalar kinds;
//! * [`numberfield`] — places, absolute values and heights for `Q` and
//!   `Q(sqrt(D))`, plus the twisted-height factors attached to an
//!   approximation target;
//! * [`nsystem`] — the combinatorial model: piecewise-linear systems with
//!   slopes 0 and 1, their validation, duality, rigidification and exponents;
//! * [`minima`] — certified enumeration of parametric lattice minima and the
//!   profile/exponent reports built from them;
//! * [`construct`] — synthesis of a point whose minima track a prescribed
//!   rigid system, with a machine-checked certificate;
//! * [`extension`] — restriction of scalars: transport of points, minima and
//!   exponents between a quadratic field and `Q`.

pub mod scalar;

pub mod exterior;

pub mod numberfield;

pub mod nsystem;

pub mod lattice;

pub mod minima;

pub mod construct;

pub mod extension;
