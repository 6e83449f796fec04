//! Numerical laboratory for Ginzburg-Landau critical points with homogeneous
//! Neumann boundary conditions on structured-grid chart domains.
//!
//! The library is organized around a handful of discrete objects:
//!
//! * [`grid::Chart`] — a masked structured grid with per-node metric
//!   coefficients and boundary normals, for a small catalogue of coordinate
//!   charts (flat boxes, a solid disk/ball, a half ball, the product
//!   S¹ × S²₊ chart, and the rotationally reduced half-ellipse).
//! * [`field::ComplexField`] — the complex order parameter u with its ε.
//! * [`solver`] — semi-implicit gradient flow plus matrix-free Newton
//!   polishing for −Δ_g u = ε⁻²(1−|u|²)u, ∂_ν u = 0.
//! * [`hodge`] — collocated 1-form calculus and Hodge splitting with
//!   normal-trace boundary handling.
//! * [`analysis`] — energy measures, density/monotonicity/Courant-Lebesgue
//!   verifiers, η-ellipticity scans, singular sets, stationarity residuals.
//! * [`minmax`] — the rotationally reduced two-parameter sweep family and
//!   mountain-pass estimate on the solid ellipsoid.
//! * [`scenarios`] — named, reproducible end-to-end pipelines.

pub mod analysis;
pub mod error;
pub mod field;
pub mod grid;
pub mod hodge;
pub mod io;
pub mod minmax;
pub mod scenarios;
pub mod solver;
pub mod util;

pub use error::{GlError, Result};
