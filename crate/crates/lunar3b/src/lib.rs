//! Numerical toolkit for the quaternion-regularized spatial three-body problem
//! in the lunar (hierarchical) regime.
//!
//! The library studies a hierarchical triple: two bodies in a tight inner
//! binary, a third far away. The inner binary is allowed to pass arbitrarily
//! close to collision; the inner double collision is removed by a
//! quaternionic (Kustaanheimo–Stiefel) change of variables combined with a
//! time reparametrization, so that degenerate (rectilinear) inner ellipses
//! become regular interior points of the phase space.
//!
//! # Module map
//!
//! * [`quat`] — quaternion algebra, the Hopf map, the KS transformation and
//!   its inverse section, and the bilinear invariant `BL` whose zero level
//!   carries the regularized dynamics.
//! * [`threebody`] — masses, Jacobi splitting of the inertial three-body
//!   data, and the physical and regularized Hamiltonians (Keplerian part +
//!   perturbing function).
//! * [`elements`] — Kepler-equation solver, Delaunay elements of the outer
//!   body, elliptic elements of the inner body (degenerate ellipses
//!   included), and the oscillator action-angle chart of the regularized
//!   inner problem.
//! * [`legendre`] — Legendre polynomials, the expansion of the perturbing
//!   function in the semi-major-axis ratio, and rigorous remainder bounds.
//! * [`secular`] — numerical double averaging over the two fast anomalies,
//!   extraction of expansion coefficients in the semi-major-axis ratio, and
//!   the first normal-form elimination step with its residual estimate.
//! * [`quad`] — the closed-form quadrupolar secular system: its reduced
//!   phase portraits, equilibria, separatrices, torsion, and the
//!   non-degeneracy diagnostics (bordered Hessian, frequency map).
//! * [`flow`] — the regularized equations of motion, an adaptive high-order
//!   embedded Runge–Kutta integrator with dense output, conservation
//!   monitors, near-collision event detection, and frequency analysis.
//!
//! # Units and conventions
//!
//! Gravitational constant G = 1; masses, lengths and times are in the
//! consistent natural units this implies. Angles are radians in `[0, 2π)`,
//! inclinations in `[0, π]`. Vectors are `nalgebra::Vector3<f64>`; all
//! floating point work is `f64`.

pub mod elements;
pub mod error;
pub mod flow;
pub mod legendre;
pub mod quad;
pub mod quat;
pub mod secular;
pub mod threebody;
pub mod tol;

pub use error::Error;
pub use quat::Quaternion;

/// 3-vector of `f64`, the workhorse geometric type.
pub type Vec3 = nalgebra::Vector3<f64>;
