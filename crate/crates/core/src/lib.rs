//! Numerical potential theory for the Brownian sheet: thermal energies and
//! capacities on discretized product sets, parabolic box-counting dimension,
//! path sampling (sheet, pinned sheet, additive stable processes), and
//! Monte Carlo hitting estimators with capacity cross-checks.
//!
//! The crate is organized around six modules:
//!
//! * [`geometry`] — set specifications, discretization into cells, product grids,
//!   and the parabolic metric.
//! * [`capacity`] — thermal and Riesz kernels, energy matrices, a Frank-Wolfe
//!   minimizer over capped simplices, and the kappa comparison kernel.
//! * [`dimension`] — box-counting estimates and closed-form dimension arithmetic
//!   (product bounds, critical exponents, hitting dichotomy).
//! * [`simulate`] — exact-law lattice samplers for the sheet and additive stable
//!   processes, pinned-sheet transforms, empirical covariance.
//! * [`hitting`] — epsilon-schedule hitting rates with Wilson intervals,
//!   intersection-dimension statistics, and the codimension probe.
//! * [`experiments`] — config parsing, study orchestration, CSV/report emission.
//!
//! Everything downstream of a seed is deterministic: parallel and serial runs
//! produce identical output because every Monte Carlo path draws from its own
//! counter-derived ChaCha substream.

pub mod capacity;
pub mod dimension;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hitting;
pub mod simulate;

pub(crate) mod util;

pub use error::{Error, Result};
