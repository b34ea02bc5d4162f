//! Reduced quadrupolar dynamics on the branched double cover at `C = G2`.
//!
//! The quadrupolar secular Hamiltonian is independent of the outer
//! pericenter `g2`, so at total angular momentum `C` equal to the outer
//! momentum `G2` the inner pair `(G1, g1)` carries a one-degree-of-freedom
//! Hamiltonian flow. This module works on the double cover of that
//! reduced space, the cylinder
//!
//! ```text
//! 𝒟 = { (G1, g1) : |G1| < min(L1, C + G2), g1 ∈ [0, 2π) },   C = G2,
//! ```
//!
//! on which `G1` is *signed*: the deck transformation
//! `s(G1, g1) = (−G1, π − g1)` identifies the two sheets, its two fixed
//! points `(0, π/2)` and `(0, 3π/2)` descending to the branch points of
//! the quotient. The Hamiltonian is even in `G1`, so it extends smoothly
//! (in fact polynomially) across `{G1 = 0}`, where the chart of the
//! uncovered space degenerates together with the inner ellipse.
//!
//! # Units & Conventions
//!
//! - Coordinates `(G1, g1)` are a Darboux pair: momentum `G1` (inner
//!   angular momentum, signed on the cover) and conjugate angle `g1`
//!   (inner pericenter argument, radians). Hamilton's equations read
//!   `dG1/dt = −∂f/∂g1`, `dg1/dt = +∂f/∂G1`.
//! - The Hamiltonian on the cover is the closed quadrupolar form
//!   `f = −β·S(γ, u, g1)` with `β = μ_quad L2³/(8 G2³)`, `γ = G1²/L1²`
//!   and `u = G1²/(4 G2²)` (the slice `C = G2` of `u = cos²J`), shared
//!   bit-for-bit in its bracket `S` with the general-position form in
//!   [`crate::secular`].
//! - Time is the secular time of that Hamiltonian; frequencies returned
//!   here are radian rates in this time.
//! - The circles `{G1 = ±min(L1, 2G2)}` bounding the chart (circular
//!   inner orbit when `L1` binds, maximal inclination slice when `2G2`
//!   binds) are invariant under the flow; all interior equilibria lie on
//!   `{G1 = 0}` at `g1 ∈ {0, π/2, π, 3π/2}`.
//! - Normalized variables divide momenta by `L1`:
//!   `α = C/L1`, `β = G2/L1`, `δ = G1/L1`, `ω = g1`. (The symbol `β`
//!   doubles in the literature for the normalized momentum and for the
//!   coefficient `μ_quad L2³/(8G2³)`; code identifiers keep them apart
//!   as `beta` versus `coefficient`.)

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix4;

use crate::elements::kepler_frequencies;
use crate::error::{Error, Result};
use crate::flow::{integrate_adaptive, DenseStep, StepControl};
use crate::secular::{quad_bracket, SecularPoint};
use crate::threebody::{f1_of_l2, MassConfig};
use crate::tol;

// ---------------------------------------------------------------------------
// Parameters and points
// ---------------------------------------------------------------------------

/// Parameters of the reduced quadrupolar flow on the cover `C = G2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams {
    /// Inner circular angular momentum `L1` (chart bound in `G1`).
    pub big_l1: f64,
    /// Outer circular angular momentum `L2` (enters the coefficient).
    pub big_l2: f64,
    /// Outer angular momentum `G2`, equal to the total momentum `C` on
    /// the cover.
    pub big_g2: f64,
    /// Mass prefactor `μ_quad = m0 m1 m2/(m0 + m1)` of the quadrupolar
    /// term.
    pub mu_quad: f64,
}

impl QuadParams {
    /// Validate and build a parameter set.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for non-finite or non-positive
    /// entries, [`Error::NonPhysicalPoint`] for `G2 > L2`.
    pub fn new(big_l1: f64, big_l2: f64, big_g2: f64, mu_quad: f64) -> Result<Self> {
        for (name, v) in [
            ("L1", big_l1),
            ("L2", big_l2),
            ("G2", big_g2),
            ("mu_quad", mu_quad),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if big_g2 > big_l2 * (1.0 + tol::PHYSICAL_REGION_SLACK) {
            return Err(Error::NonPhysicalPoint(format!(
                "G2 = {big_g2} exceeds L2 = {big_l2}"
            )));
        }
        Ok(Self {
            big_l1,
            big_l2,
            big_g2,
            mu_quad,
        })
    }

    /// Half-width of the chart in `G1`: `min(L1, C + G2) = min(L1, 2G2)`.
    pub fn g1_bound(&self) -> f64 {
        self.big_l1.min(2.0 * self.big_g2)
    }

    /// Overall coefficient `μ_quad L2³/(8 G2³)` multiplying the bracket;
    /// the natural energy scale of the reduced flow.
    pub fn coefficient(&self) -> f64 {
        self.mu_quad * self.big_l2.powi(3) / (8.0 * self.big_g2.powi(3))
    }
}

/// A point of the double cover: signed inner momentum and pericenter
/// angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverPoint {
    /// Signed inner angular momentum, `|G1| < min(L1, 2G2)`.
    pub big_g1: f64,
    /// Inner pericenter argument, wrapped to `[0, 2π)`.
    pub g1: f64,
}

impl CoverPoint {
    /// Validate a point against the chart domain of `params`.
    ///
    /// # Errors
    ///
    /// [`Error::NonPhysicalPoint`] when `|G1|` reaches the chart bound
    /// (the invariant boundary circles are excluded),
    /// [`Error::InvalidParameter`] for non-finite input.
    pub fn new(big_g1: f64, g1: f64, params: &QuadParams) -> Result<Self> {
        if !big_g1.is_finite() || !g1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cover point must be finite, got G1 = {big_g1}, g1 = {g1}"
            )));
        }
        let bound = params.g1_bound();
        if big_g1.abs() >= bound {
            return Err(Error::NonPhysicalPoint(format!(
                "|G1| = {} is not inside the chart bound min(L1, 2G2) = {bound}",
                big_g1.abs()
            )));
        }
        Ok(Self {
            big_g1,
            g1: g1.rem_euclid(TAU),
        })
    }

    /// Image under the deck transformation `s(G1, g1) = (−G1, π − g1)`;
    /// the Hamiltonian takes the same value there.
    pub fn symmetry_partner(&self) -> CoverPoint {
        CoverPoint {
            big_g1: -self.big_g1,
            g1: (PI - self.g1).rem_euclid(TAU),
        }
    }
}

// ---------------------------------------------------------------------------
// Closed form on the cover
// ---------------------------------------------------------------------------

/// `(γ, u)` of a raw cover coordinate pair: both are even polynomials of
/// the signed momentum, so the cover extension is automatic.
fn cover_gamma_u(params: &QuadParams, big_g1: f64) -> (f64, f64) {
    let gamma = (big_g1 / params.big_l1).powi(2);
    let u = (big_g1 / (2.0 * params.big_g2)).powi(2);
    (gamma, u)
}

/// Hamiltonian on raw (not necessarily wrapped or validated) cover
/// coordinates; polynomial in `G1`, trigonometric in `g1`.
fn hamiltonian_raw(params: &QuadParams, big_g1: f64, g1: f64) -> f64 {
    let (gamma, u) = cover_gamma_u(params, big_g1);
    let (s, ..) = quad_bracket(gamma, u, g1);
    -params.coefficient() * s
}

/// Vector field `(dG1/dt, dg1/dt) = (−∂f/∂g1, +∂f/∂G1)` on raw cover
/// coordinates, from the hand-differentiated closed form.
fn field_raw(params: &QuadParams, big_g1: f64, g1: f64) -> (f64, f64) {
    let (gamma, u) = cover_gamma_u(params, big_g1);
    let (_, ds_du, ds_dgamma) = quad_bracket(gamma, u, g1);
    let coeff = params.coefficient();
    let ds_dangle = 15.0 * (1.0 - gamma) * (u - 1.0) * (2.0 * g1).sin();
    let dgamma_dg1 = 2.0 * big_g1 / (params.big_l1 * params.big_l1);
    let du_dg1 = big_g1 / (2.0 * params.big_g2 * params.big_g2);
    (
        coeff * ds_dangle,
        -coeff * (ds_dgamma * dgamma_dg1 + ds_du * du_dg1),
    )
}

/// Outer-pericenter rate `∂f/∂G2` at fixed `(G1, g1, C)`, evaluated on
/// the cover `C = G2`, where `∂u/∂G2 = 1/G2 − G1²/(2G2³)` (smooth
/// through `G1 = 0`).
fn precession_raw(params: &QuadParams, big_g1: f64, g1: f64) -> f64 {
    let (gamma, u) = cover_gamma_u(params, big_g1);
    let (s, ds_du, _) = quad_bracket(gamma, u, g1);
    let g2 = params.big_g2;
    let coeff = params.coefficient();
    let du_dg2 = 1.0 / g2 - big_g1 * big_g1 / (2.0 * g2 * g2 * g2);
    3.0 * coeff * s / g2 - coeff * ds_du * du_dg2
}

/// Quadrupolar Hamiltonian at a cover point.
pub fn cover_hamiltonian(p: &CoverPoint, params: &QuadParams) -> f64 {
    hamiltonian_raw(params, p.big_g1, p.g1)
}

/// Outer-pericenter precession rate `∂f/∂G2` (at fixed `G1, g1, C`) at a
/// cover point. This is the same quantity as
/// [`crate::secular::nu_quad2`] restricted to the cover, with the mass
/// prefactor supplied through [`QuadParams`].
pub fn cover_precession_rate(p: &CoverPoint, params: &QuadParams) -> f64 {
    precession_raw(params, p.big_g1, p.g1)
}

/// Hamiltonian vector field `(dG1/dt, dg1/dt)` at a cover point, via
/// exact partials of the closed form.
///
/// The right-hand sides are `(−∂f/∂g1, +∂f/∂G1)`; both vanish at the
/// four interior equilibria `(0, k·π/2)`.
pub fn quad_vector_field(p: &CoverPoint, params: &QuadParams) -> (f64, f64) {
    field_raw(params, p.big_g1, p.g1)
}

/// Hamiltonian vector field `(dG1/dt, dg1/dt)` at a general secular
/// point (not necessarily on the cover), via exact partials of the
/// closed form at fixed `(C, G2, L1, L2)`.
///
/// # Errors
///
/// As [`crate::secular::f_quad`]: [`Error::SingularCoordinates`] at
/// `G1 = 0` away from `C = G2`.
pub fn quad_vector_field_secular(sp: &SecularPoint, m: &MassConfig) -> Result<(f64, f64)> {
    let (gamma, u, _du_dg2, du_dg1, dgamma_dg1) = crate::secular::quad_geometry(sp)?;
    let (_, ds_du, ds_dgamma) = quad_bracket(gamma, u, sp.g1);
    let coeff = m.mu_quad * sp.big_l2.powi(3) / (8.0 * sp.big_g2.powi(3));
    let ds_dangle = 15.0 * (1.0 - gamma) * (u - 1.0) * (2.0 * sp.g1).sin();
    Ok((
        coeff * ds_dangle,
        -coeff * (ds_dgamma * dgamma_dg1 + ds_du * du_dg1),
    ))
}

/// Uniformly sampled solution curve of the planar secular system at
/// fixed `(G2, g2, L1, L2, C)`, valid on and off the `C = G2` section.
///
/// Integrates the `(G1, g1)` field of [`quad_vector_field_secular`] for
/// `duration` time units and returns `samples + 1` rows `[G1, g1]` at
/// uniformly spaced times, first row the start, last row the end.  The
/// pericenter argument is reported *unwrapped* (continuous), so curves
/// that circulate around the annulus
/// `|C − G2| < G1 < min(L1, C + G2)` — the generic behaviour near the
/// inner boundary, where the level curves encircle the minimal-`G1`
/// circle — accumulate multiples of `2π`.
///
/// This one-degree-of-freedom flow conserves the quadrupolar energy, so
/// every bounded solution lies on a closed level curve; a duration of a
/// few precession periods suffices to traverse it.
///
/// # Errors
///
/// [`Error::NonPhysicalPoint`] for a start outside the physical region;
/// [`Error::InvalidParameter`] for a non-positive duration or fewer
/// than 2 samples; integration failures (for instance a curve running
/// into an annulus boundary, where the chart degenerates) are
/// propagated.
pub fn trace_secular_curve(
    start: &SecularPoint,
    m: &MassConfig,
    duration: f64,
    samples: usize,
) -> Result<Vec<[f64; 2]>> {
    start.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive and finite, got {duration}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "at least 2 samples are required, got {samples}"
        )));
    }
    let template = *start;
    let mut rhs = move |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let sp = SecularPoint {
            big_g1: y[0],
            g1: y[1],
            ..template
        };
        let (dm, da) = quad_vector_field_secular(&sp, m)?;
        Ok([dm, da])
    };
    let ctl = StepControl {
        rtol: 0.1 * tol::ODE_RTOL,
        atol: 0.1 * tol::ODE_ATOL,
        max_step: Some(duration / 16.0),
        max_steps: 400_000,
    };
    let step = duration / samples as f64;
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(samples + 1);
    out.push([start.big_g1, start.g1]);
    let mut next = 1usize;
    let (end, _stats) = integrate_adaptive(
        &mut rhs,
        0.0,
        [start.big_g1, start.g1],
        duration,
        &ctl,
        &mut |dense: &DenseStep<'_, 2>| {
            let step_end = dense.t0 + dense.h;
            while next <= samples {
                let t = step * next as f64;
                if t > step_end * (1.0 + 1e-15) + 1e-300 {
                    break;
                }
                out.push(dense.eval(t.min(step_end)));
                next += 1;
            }
            Ok(true)
        },
    )?;
    while out.len() < samples + 1 {
        out.push(end);
    }
    Ok(out)
}

/// Closed-form Hessian determinant of the cover Hamiltonian at the
/// elliptic equilibrium `(G1, g1) = (0, 0)`:
///
/// ```text
/// det = (45/8) · μ_quad² L2⁶ / (G2⁶ L1²).
/// ```
///
/// Expanding `f = −β S` to second order at the origin gives
/// `f ≈ −5β + (6β/L1²) G1² + 15β g1²`, hence the diagonal Hessian
/// `(12β/L1², 30β)` whose product is the value above. The same value
/// holds at `(0, π)`, the deck image of the origin.
pub fn equilibrium_hessian(params: &QuadParams) -> f64 {
    let ratio = params.mu_quad * params.big_l2.powi(3) / params.big_g2.powi(3);
    45.0 / 8.0 * ratio * ratio / (params.big_l1 * params.big_l1)
}

/// Finite-difference Hessian determinant of the cover Hamiltonian at
/// `(0, 0)`, for cross-checking [`equilibrium_hessian`]. Central second
/// differences with one Richardson level; the momentum direction is
/// quartic, so its extrapolated difference is exact up to rounding.
pub fn equilibrium_hessian_numeric(params: &QuadParams) -> f64 {
    let f = |mom: f64, ang: f64| hamiltonian_raw(params, mom, ang);
    let h_mom = 0.01 * params.g1_bound();
    let h_ang = 0.01;
    let second = |d: &dyn Fn(f64) -> f64, h: f64| {
        let coarse = (d(h) - 2.0 * d(0.0) + d(-h)) / (h * h);
        let half = 0.5 * h;
        let fine = (d(half) - 2.0 * d(0.0) + d(-half)) / (half * half);
        (4.0 * fine - coarse) / 3.0
    };
    let fxx = second(&|x| f(x, 0.0), h_mom);
    let fyy = second(&|y| f(0.0, y), h_ang);
    let fxy = (f(h_mom, h_ang) - f(h_mom, -h_ang) - f(-h_mom, h_ang) + f(-h_mom, -h_ang))
        / (4.0 * h_mom * h_ang);
    fxx * fyy - fxy * fxy
}

// ---------------------------------------------------------------------------
// Orbit tracing
// ---------------------------------------------------------------------------

/// Knobs of the level-curve tracer.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Number of uniform-in-time samples stored over one period (the
    /// closing point is appended as one extra sample).
    pub samples: usize,
    /// Integration time allowed for finding the section returns;
    /// `None` means 250 linear periods of the coplanar equilibrium.
    pub time_budget: Option<f64>,
    /// Step budget per integration pass.
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            samples: 1024,
            time_budget: None,
            max_steps: 200_000,
        }
    }
}

/// One transversal crossing of the section line `{G1 = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionCrossing {
    /// Time since the trace start.
    pub time: f64,
    /// Unwrapped angle at the crossing.
    pub g1: f64,
    /// Whether `G1` increases through the crossing.
    pub increasing: bool,
    /// Chart angle between the orbit velocity and the section line, in
    /// `[0, π/2]`; the field has `dg1/dt = 0` on `{G1 = 0}`, so closed
    /// orbits cross perpendicularly.
    pub angle: f64,
}

/// A traced closed level curve of the reduced flow.
#[derive(Debug, Clone)]
pub struct OrbitRecord {
    /// `(G1, g1)` samples, uniform in time over one period starting at
    /// the first section crossing; the closing point is appended, so a
    /// record holds `samples + 1` rows. The angle is unwrapped (real
    /// line, not reduced mod 2π).
    pub samples: Vec<[f64; 2]>,
    /// Period of the closed curve.
    pub period: f64,
    /// Enclosed action `𝒥1 = area/2π` by the shoelace rule over the
    /// sampled polygon.
    pub action: f64,
    /// The three section crossings used to certify closure, in trace
    /// order (two per period, alternating direction).
    pub crossings: Vec<SectionCrossing>,
    /// Hamiltonian value at the start point.
    pub energy: f64,
    /// Largest relative drift of the Hamiltonian over the sampled
    /// period, scaled by `max(|energy|, coefficient)`.
    pub energy_drift: f64,
    /// Euclidean chart distance between the state after one period and
    /// the anchor crossing state.
    pub closure_gap: f64,
    /// Half-diagonal of the traced bounding box, the scale against
    /// which closure is judged.
    pub amplitude: f64,
}

/// Linear period `2π/√det` of the coplanar equilibrium; the natural
/// time unit for budgets and step caps.
fn linear_period(params: &QuadParams) -> f64 {
    TAU / equilibrium_hessian(params).sqrt()
}

/// Scan one accepted step for sign changes of the momentum component
/// and refine each to a crossing time by bisection on the dense output.
fn scan_crossings(
    step: &DenseStep<'_, 2>,
    subsamples: usize,
    extent: &mut [f64; 4],
    mut on_crossing: impl FnMut(f64, [f64; 2]) -> Result<bool>,
) -> Result<bool> {
    let t0 = step.t0;
    let h = step.h;
    let mut prev_t = t0;
    let mut prev = step.eval(t0);
    for i in 0..=subsamples {
        let t = if i == subsamples {
            t0 + h
        } else {
            t0 + h * i as f64 / subsamples as f64
        };
        let y = step.eval(t);
        extent[0] = extent[0].min(y[0]);
        extent[1] = extent[1].max(y[0]);
        extent[2] = extent[2].min(y[1]);
        extent[3] = extent[3].max(y[1]);
        if i > 0 && (prev[0] == 0.0 || prev[0].signum() != y[0].signum()) {
            // Bisect the dense polynomial for the crossing time.
            let (mut lo, mut hi) = (prev_t, t);
            let mut lo_val = prev[0];
            if lo_val == 0.0 {
                hi = lo;
            }
            for _ in 0..60 {
                if hi == lo {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let v = step.eval(mid)[0];
                if v == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if v.signum() == lo_val.signum() {
                    lo = mid;
                    lo_val = v;
                } else {
                    hi = mid;
                }
            }
            let tc = 0.5 * (lo + hi);
            if !on_crossing(tc, step.eval(tc))? {
                return Ok(false);
            }
        }
        prev_t = t;
        prev = y;
    }
    Ok(true)
}

/// Trace the closed orbit through `start` with default options.
///
/// # Errors
///
/// See [`trace_orbit_with`].
pub fn trace_orbit(start: &CoverPoint, params: &QuadParams) -> Result<OrbitRecord> {
    trace_orbit_with(start, params, &TraceOptions::default())
}

/// Trace the closed orbit of the reduced flow through `start`.
///
/// The orbit is integrated with the adaptive high-order driver and its
/// returns to the section `{G1 = 0}` are located on the dense output;
/// every closed curve of the foliation crosses that line exactly twice
/// per period, perpendicularly, so the period is the separation of two
/// consecutive same-direction crossings. A second pass resamples the
/// curve uniformly over one period for the action and averages.
///
/// # Errors
///
/// - [`Error::InvalidParameter`] if `start` is an equilibrium to
///   rounding accuracy (the four points `(0, k·π/2)`).
/// - [`Error::NotClosed`] if three section crossings are not found
///   within the time budget (separatrix or boundary-circulating starts)
///   or the curve fails the closure gate
///   `gap < `[`tol::ORBIT_CLOSURE_TOL`]`·amplitude`.
/// - [`Error::StepFailure`] from the underlying driver on a step budget
///   blowout.
pub fn trace_orbit_with(
    start: &CoverPoint,
    params: &QuadParams,
    opts: &TraceOptions,
) -> Result<OrbitRecord> {
    if opts.samples < 16 {
        return Err(Error::InvalidParameter(format!(
            "at least 16 samples per orbit required, got {}",
            opts.samples
        )));
    }
    let (v_mom, v_ang) = field_raw(params, start.big_g1, start.g1);
    let speed_floor = 1e-13 * params.coefficient();
    if v_mom.abs().max(v_ang.abs()) <= speed_floor {
        return Err(Error::InvalidParameter(format!(
            "start point (G1 = {}, g1 = {}) is an equilibrium of the reduced \
             flow; no closed orbit passes through it",
            start.big_g1, start.g1
        )));
    }
    let t_lin = linear_period(params);
    let budget = opts.time_budget.unwrap_or(250.0 * t_lin);
    // One notch below the library default: the drift gate is judged on
    // the dense output, whose interpolation error sits above the
    // endpoint error of each step.
    let ctl = StepControl {
        rtol: 0.1 * tol::ODE_RTOL,
        atol: 0.1 * tol::ODE_ATOL,
        max_step: Some(t_lin / 8.0),
        max_steps: opts.max_steps,
    };
    let mut rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let (dm, da) = field_raw(params, y[0], y[1]);
        Ok([dm, da])
    };

    // Pass 1: find three section crossings (start-time crossing, if the
    // start lies on the section, excluded).
    let t_eps = 1e-9 * t_lin;
    let mut crossings: Vec<SectionCrossing> = Vec::new();
    let mut crossing_states: Vec<[f64; 2]> = Vec::new();
    let mut extent = [
        start.big_g1,
        start.big_g1,
        start.g1,
        start.g1,
    ];
    {
        let mut on_step = |step: &DenseStep<'_, 2>| -> Result<bool> {
            scan_crossings(step, 16, &mut extent, |tc, state| {
                if tc <= t_eps
                    || crossings
                        .last()
                        .is_some_and(|c| tc <= c.time + t_eps)
                {
                    return Ok(true);
                }
                let (dm, da) = field_raw(params, state[0], state[1]);
                crossings.push(SectionCrossing {
                    time: tc,
                    g1: state[1],
                    increasing: dm > 0.0,
                    angle: dm.abs().atan2(da.abs()),
                });
                crossing_states.push(state);
                Ok(crossings.len() < 3)
            })
        };
        integrate_adaptive(&mut rhs, 0.0, [start.big_g1, start.g1], budget, &ctl, &mut on_step)?;
    }
    if crossings.len() < 3 {
        return Err(Error::NotClosed(format!(
            "only {} section crossings within the time budget {budget:.6}; \
             the start may lie on a separatrix, at an invariant boundary \
             circle, or outside the libration region",
            crossings.len()
        )));
    }
    if crossings[0].increasing == crossings[1].increasing
        || crossings[0].increasing != crossings[2].increasing
    {
        return Err(Error::NotClosed(
            "section crossings do not alternate in direction; the traced \
             curve is not a simple closed loop"
                .to_string(),
        ));
    }
    let period = crossings[2].time - crossings[0].time;
    let amplitude = 0.5 * (extent[1] - extent[0]).hypot(extent[3] - extent[2]);

    // Pass 2: resample one period from the anchor crossing.
    let anchor = crossing_states[0];
    let n = opts.samples;
    let mut samples: Vec<[f64; 2]> = Vec::with_capacity(n + 1);
    let mut next = 0usize;
    let (end_state, _) = {
        let mut on_step = |step: &DenseStep<'_, 2>| -> Result<bool> {
            let step_end = step.t0 + step.h;
            while next <= n {
                let t = period * next as f64 / n as f64;
                if t > step_end * (1.0 + 1e-15) + 1e-300 {
                    break;
                }
                samples.push(step.eval(t.min(step_end)));
                next += 1;
            }
            Ok(true)
        };
        integrate_adaptive(&mut rhs, 0.0, anchor, period, &ctl, &mut on_step)?
    };
    while samples.len() <= n {
        samples.push(end_state);
    }
    let closure_gap = (end_state[0] - anchor[0]).hypot(end_state[1] - anchor[1]);
    if closure_gap > tol::ORBIT_CLOSURE_TOL * amplitude {
        return Err(Error::NotClosed(format!(
            "endpoint gap {closure_gap:.3e} exceeds {:.1e} of the orbit \
             amplitude {amplitude:.3e}",
            tol::ORBIT_CLOSURE_TOL
        )));
    }

    let energy = hamiltonian_raw(params, start.big_g1, start.g1);
    let scale = energy.abs().max(params.coefficient());
    let mut drift: f64 = 0.0;
    for s in &samples {
        drift = drift.max((hamiltonian_raw(params, s[0], s[1]) - energy).abs());
    }
    // Shoelace over the closed polygon (the duplicated closing sample is
    // skipped; the wrap edge closes the polygon).
    let mut twice_area = 0.0;
    for k in 0..n {
        let a = samples[k];
        let b = samples[(k + 1) % n];
        twice_area += a[1] * b[0] - b[1] * a[0];
    }
    let action = twice_area.abs() / (2.0 * TAU);

    Ok(OrbitRecord {
        samples,
        period,
        action,
        crossings,
        energy,
        energy_drift: drift / scale,
        closure_gap,
        amplitude,
    })
}

// ---------------------------------------------------------------------------
// Actions and frequencies
// ---------------------------------------------------------------------------

/// Action and frequency data of one traced orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFrequencies {
    /// Enclosed action `𝒥1`.
    pub action: f64,
    /// Libration period.
    pub period: f64,
    /// Libration frequency `2π/T`.
    pub libration_frequency: f64,
    /// Time average of the outer-pericenter rate `∂f/∂G2` over the
    /// orbit — the secular precession frequency of `g2`.
    pub precession_rate: f64,
}

/// Action `𝒥1`, period, and orbit-averaged outer-pericenter rate of a
/// traced orbit. The average is a uniform-in-time mean over one period,
/// spectrally accurate for the smooth closed curve.
pub fn action_and_frequencies(orbit: &OrbitRecord, params: &QuadParams) -> QuadFrequencies {
    let n = orbit.samples.len() - 1;
    let mut sum = 0.0;
    for s in &orbit.samples[..n] {
        sum += precession_raw(params, s[0], s[1]);
    }
    QuadFrequencies {
        action: orbit.action,
        period: orbit.period,
        libration_frequency: TAU / orbit.period,
        precession_rate: sum / n as f64,
    }
}

/// Determinant of the frequency map `(𝒫0, L2, 𝒥1, G2) ↦ (energy, three
/// frequency ratios)` at a torus of the reduced problem, by central
/// finite differences.
///
/// The torus is specified by the inner oscillator action `p0`, the outer
/// circular momentum `big_l2`, the libration amplitude `amplitude` (the
/// momentum half-width of the quadrupolar orbit through `(amplitude, 0)`),
/// and the outer momentum `big_g2` on the cover, at fixed energy
/// parameter `f` and masses. Each evaluation derives the fast
/// frequencies from the Kepler data, the inner momentum scale
/// `L1 = μ1 M1/ν1`, and the slow frequencies from a traced orbit; the
/// observables are
///
/// ```text
/// E  = 𝒫0 ν1 − μ1 M1 + f_quad,   ν2/ν1,   ν_lib/ν1,   ⟨∂f/∂G2⟩/ν1.
/// ```
///
/// The derivative with respect to the action is obtained from the
/// amplitude derivative by the chain rule with `∂𝒥1/∂amplitude`, which
/// is positive on the libration family.
///
/// # Errors
///
/// [`Error::HyperbolicOuter`] for non-positive inner energy parameter,
/// tracing errors as [`trace_orbit`], and
/// [`Error::InvalidParameter`] if the action does not respond to the
/// amplitude (degenerate chart).
pub fn frequency_map_jacobian(
    p0: f64,
    big_l2: f64,
    amplitude: f64,
    big_g2: f64,
    f: f64,
    m: &MassConfig,
) -> Result<f64> {
    let observables = |x: [f64; 4]| -> Result<[f64; 5]> {
        let [p0, l2, amp, g2] = x;
        let f1 = f1_of_l2(l2, f, m);
        if f1 <= 0.0 {
            return Err(Error::HyperbolicOuter(f1));
        }
        let (nu1, nu2) = kepler_frequencies(p0, l2, f, m)?;
        let big_l1 = m.mu1 * m.big_m1 / nu1;
        let params = QuadParams::new(big_l1, l2, g2, m.mu_quad)?;
        let start = CoverPoint::new(amp, 0.0, &params)?;
        let orbit = trace_orbit(&start, &params)?;
        let fr = action_and_frequencies(&orbit, &params);
        Ok([
            p0 * nu1 - m.mu1 * m.big_m1 + orbit.energy,
            nu2 / nu1,
            fr.libration_frequency / nu1,
            fr.precession_rate / nu1,
            fr.action,
        ])
    };
    let base = [p0, big_l2, amplitude, big_g2];
    let mut cols = [[0.0; 5]; 4];
    for i in 0..4 {
        let h = 1e-4 * (1.0 + base[i].abs());
        let mut xp = base;
        xp[i] += h;
        let mut xm = base;
        xm[i] -= h;
        let op = observables(xp)?;
        let om = observables(xm)?;
        for k in 0..5 {
            cols[i][k] = (op[k] - om[k]) / (2.0 * h);
        }
    }
    let dj_damp = cols[2][4];
    if dj_damp == 0.0 {
        return Err(Error::InvalidParameter(
            "enclosed action does not respond to the libration amplitude; \
             the action chart is degenerate at this torus"
                .to_string(),
        ));
    }
    let mat = Matrix4::from_fn(|r, c| cols[c][r]);
    Ok(mat.determinant() / dj_damp)
}

// ---------------------------------------------------------------------------
// Phase portrait
// ---------------------------------------------------------------------------

/// Sampling plan of a phase portrait.
#[derive(Debug, Clone, Copy)]
pub struct PortraitSpec {
    /// Orbits around each of the coplanar centers `(0, 0)` and `(0, π)`.
    pub coplanar_family: usize,
    /// Orbits around each of the polar centers `(0, π/2)` and
    /// `(0, 3π/2)` (the branch points of the quotient).
    pub polar_family: usize,
    /// Samples stored per orbit.
    pub samples_per_orbit: usize,
    /// Largest start amplitude as a fraction of the available range.
    pub max_fraction: f64,
}

impl Default for PortraitSpec {
    fn default() -> Self {
        Self {
            coplanar_family: 5,
            polar_family: 3,
            samples_per_orbit: 512,
            max_fraction: 0.85,
        }
    }
}

/// Bisection estimate of the separatrix between the coplanar and polar
/// libration families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixEstimate {
    /// Angle at which the separatrix level crosses the axis `{G1 = 0}`,
    /// in `(0, π/2)`.
    pub g1_axis: f64,
    /// Hamiltonian level of the separatrix; it coincides with the level
    /// of the invariant boundary circles, which carry the limiting
    /// critical points.
    pub level: f64,
}

/// A computed phase portrait of the reduced flow on the cover.
#[derive(Debug, Clone)]
pub struct Portrait {
    /// Traced orbits: coplanar family around `(0, 0)`, coplanar family
    /// around `(0, π)`, polar family around `(0, π/2)`, polar family
    /// around `(0, 3π/2)`, each ordered by increasing start amplitude.
    pub orbits: Vec<OrbitRecord>,
    /// Separatrix estimate from amplitude bisection on the axis.
    pub separatrix: SeparatrixEstimate,
    /// The two fixed points of the deck transformation, `(0, π/2)` and
    /// `(0, 3π/2)`; they descend to the singular points of the quotient.
    pub symmetry_fixed_points: [[f64; 2]; 2],
}

/// Classify the orbit through the axis point `(0, g1_start)`,
/// `g1_start ∈ (0, π/2)`: `false` if it belongs to the coplanar family
/// (its angle sweep reaches 0), `true` for the polar family (the sweep
/// reaches π/2).
fn classify_axis_start(params: &QuadParams, g1_start: f64, budget: f64) -> Result<bool> {
    let ctl = StepControl {
        rtol: tol::ODE_RTOL,
        atol: tol::ODE_ATOL,
        max_step: Some(linear_period(params) / 8.0),
        max_steps: 2_000_000,
    };
    let mut rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let (dm, da) = field_raw(params, y[0], y[1]);
        Ok([dm, da])
    };
    let mut verdict: Option<bool> = None;
    let mut on_step = |step: &DenseStep<'_, 2>| -> Result<bool> {
        for i in 0..=8 {
            let t = step.t0 + step.h * i as f64 / 8.0;
            let ang = step.eval(t)[1];
            if ang <= 0.0 {
                verdict = Some(false);
                return Ok(false);
            }
            if ang >= PI / 2.0 {
                verdict = Some(true);
                return Ok(false);
            }
        }
        Ok(true)
    };
    integrate_adaptive(&mut rhs, 0.0, [0.0, g1_start], budget, &ctl, &mut on_step)?;
    verdict.ok_or_else(|| {
        Error::RootFindingFailure(format!(
            "orbit through (0, {g1_start}) swept neither bounding angle \
             within the classification budget; the start is on the \
             separatrix to working accuracy"
        ))
    })
}

/// Locate the separatrix crossing of the axis `{G1 = 0}` by bisection
/// between the two libration families.
fn separatrix_on_axis(params: &QuadParams) -> Result<SeparatrixEstimate> {
    let budget = 500.0 * linear_period(params);
    let mut lo = 0.05_f64;
    let mut hi = PI / 2.0 - 1e-6;
    if classify_axis_start(params, lo, budget)? {
        return Err(Error::RootFindingFailure(format!(
            "axis start {lo} already encircles the polar center; no \
             coplanar bracket for the separatrix bisection"
        )));
    }
    if !classify_axis_start(params, hi, budget)? {
        return Err(Error::RootFindingFailure(format!(
            "axis start {hi} still encircles the coplanar center; no \
             polar bracket for the separatrix bisection"
        )));
    }
    let g1_axis = loop {
        if hi - lo <= tol::SEPARATRIX_BISECTION_TOL {
            break 0.5 * (lo + hi);
        }
        let mid = 0.5 * (lo + hi);
        match classify_axis_start(params, mid, budget) {
            Ok(true) => hi = mid,
            Ok(false) => lo = mid,
            // The midpoint sits on the separatrix to the resolution of
            // the classification budget; that is the answer.
            Err(Error::RootFindingFailure(_)) => break mid,
            Err(e) => return Err(e),
        }
    };
    Ok(SeparatrixEstimate {
        g1_axis,
        level: hamiltonian_raw(params, 0.0, g1_axis),
    })
}

/// Trace a family portrait of the reduced flow: nested orbits around
/// the two coplanar centers and the two polar centers, plus the
/// separatrix estimate separating the families.
///
/// Orbits are traced in parallel (one task per initial condition) and
/// reported in deterministic index order.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for an empty or degenerate spec;
/// bisection and tracing errors as [`trace_orbit`] and the separatrix
/// search.
pub fn phase_portrait(params: &QuadParams, spec: &PortraitSpec) -> Result<Portrait> {
    if spec.coplanar_family == 0 || spec.polar_family == 0 {
        return Err(Error::InvalidParameter(
            "portrait spec needs at least one orbit per family".to_string(),
        ));
    }
    if !(spec.max_fraction > 0.0 && spec.max_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max_fraction must lie in (0, 1), got {}",
            spec.max_fraction
        )));
    }
    let separatrix = separatrix_on_axis(params)?;

    let bound = params.g1_bound();
    let mut starts: Vec<CoverPoint> = Vec::new();
    for center in [0.0, PI] {
        for k in 1..=spec.coplanar_family {
            let amp = bound * spec.max_fraction * k as f64 / spec.coplanar_family as f64;
            starts.push(CoverPoint::new(amp, center, params)?);
        }
    }
    let polar_gap = PI / 2.0 - separatrix.g1_axis;
    for center in [0.0, PI] {
        for k in 1..=spec.polar_family {
            // Increasing k walks outward from the polar center toward
            // the separatrix, stopping a fixed fraction short of it.
            let toward = polar_gap * spec.max_fraction * k as f64
                / (spec.polar_family + 1) as f64;
            starts.push(CoverPoint::new(0.0, center + PI / 2.0 - toward, params)?);
        }
    }

    let opts = TraceOptions {
        samples: spec.samples_per_orbit,
        ..TraceOptions::default()
    };
    let mut results: Vec<Option<Result<OrbitRecord>>> = starts.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, start) in results.iter_mut().zip(&starts) {
            scope.spawn(move || {
                *slot = Some(trace_orbit_with(start, params, &opts));
            });
        }
    });
    let mut orbits = Vec::with_capacity(results.len());
    for r in results {
        orbits.push(r.expect("every portrait task writes its slot")?);
    }
    Ok(Portrait {
        orbits,
        separatrix,
        symmetry_fixed_points: [[0.0, PI / 2.0], [0.0, 3.0 * PI / 2.0]],
    })
}

// ---------------------------------------------------------------------------
// Normalized coordinates and torsion
// ---------------------------------------------------------------------------

/// Momenta normalized by the inner circular momentum:
/// `α = C/L1`, `β = G2/L1`, `δ = G1/L1`, `ω = g1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedQuad {
    /// Normalized total angular momentum `C/L1`.
    pub alpha: f64,
    /// Normalized outer momentum `G2/L1`.
    pub beta: f64,
    /// Normalized inner momentum `G1/L1` (non-negative).
    pub delta: f64,
    /// Inner pericenter argument, wrapped to `[0, 2π)`.
    pub omega: f64,
}

impl NormalizedQuad {
    /// Validate and build a normalized point. The physical region
    /// requires `|α − β| ≤ δ ≤ min(1, α + β)`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for non-finite or non-positive
    /// `α, β` or negative `δ`; [`Error::NonPhysicalPoint`] outside the
    /// momentum triangle.
    pub fn new(alpha: f64, beta: f64, delta: f64, omega: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && delta.is_finite() && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "normalized point must be finite, got ({alpha}, {beta}, {delta}, {omega})"
            )));
        }
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normalized momenta must be positive, got alpha = {alpha}, beta = {beta}"
            )));
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normalized inner momentum must be non-negative, got {delta}"
            )));
        }
        let slack = tol::PHYSICAL_REGION_SLACK * (1.0 + alpha + beta);
        if delta + slack < (alpha - beta).abs() || delta > (alpha + beta).min(1.0) + slack {
            return Err(Error::NonPhysicalPoint(format!(
                "delta = {delta} violates |alpha − beta| ≤ delta ≤ min(1, alpha + beta) \
                 for alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            delta,
            omega: omega.rem_euclid(TAU),
        })
    }

    /// Normalize a secular point by its `L1`.
    ///
    /// # Errors
    ///
    /// As [`NormalizedQuad::new`].
    pub fn from_secular(sp: &SecularPoint) -> Result<Self> {
        Self::new(
            sp.c / sp.big_l1,
            sp.big_g2 / sp.big_l1,
            sp.big_g1 / sp.big_l1,
            sp.g1,
        )
    }
}

/// Dimensionless quadrupolar shape function
///
/// ```text
/// 𝒲 = −2δ² + (α² − β² − δ²)²/(4β²)
///     + 5(1 − δ²) sin²ω [ (α² − β² − δ²)²/(4β²δ²) − 1 ],
/// ```
///
/// related to the closed-form bracket by `S = 3(𝒲 + 5/3)`, so the full
/// Hamiltonian is a constant multiple of `(𝒲 + 5/3)/β³` at fixed
/// `(L1, L2, μ_quad)`.
///
/// # Errors
///
/// [`Error::SingularCoordinates`] at `δ = 0` away from `α = β`, where
/// the middle bracket has no limit; on the cover `α = β` the limit is
/// `−5 sin²ω`.
pub fn normalized_w(nq: &NormalizedQuad) -> Result<f64> {
    let d2 = nq.delta * nq.delta;
    let s2 = nq.omega.sin().powi(2);
    // (α − β)(α + β) − δ² is exact on the cover and avoids the α² − β²
    // cancellation near it.
    let num = (nq.alpha - nq.beta) * (nq.alpha + nq.beta) - d2;
    if nq.delta == 0.0 {
        if nq.alpha != nq.beta {
            return Err(Error::SingularCoordinates(format!(
                "delta = 0 requires alpha = beta (double-cover branch), got \
                 alpha = {}, beta = {}",
                nq.alpha, nq.beta
            )));
        }
        return Ok(-5.0 * s2);
    }
    let half = num / (2.0 * nq.beta);
    let ratio = half / nq.delta;
    Ok(-2.0 * d2 + half * half + 5.0 * (1.0 - d2) * s2 * (ratio * ratio - 1.0))
}

/// Normalized Hamiltonian `𝒲̄ = (𝒲 + 5/3)/β³`, the scale-free form of
/// the quadrupolar term as a function of `(δ, ω)` with parameters
/// `(α, β)`.
///
/// # Errors
///
/// As [`normalized_w`].
pub fn normalized_w_bar(nq: &NormalizedQuad) -> Result<f64> {
    Ok((normalized_w(nq)? + 5.0 / 3.0) / nq.beta.powi(3))
}

/// The cubic pair of the boundary expansion:
/// `A = 9α²β − 6αβ² + β³ − 4α³ + 5α` and
/// `B = −5α + 5α³ − 10α²β + 5αβ²`. Their sum factors as
/// `A + B = (α − β)²(α + β)`, which is what makes the closed-form
/// frequency coefficient finite at coincident momenta.
fn torsion_cubics(alpha: f64, beta: f64) -> (f64, f64) {
    let a = 9.0 * alpha * alpha * beta - 6.0 * alpha * beta * beta + beta.powi(3)
        - 4.0 * alpha.powi(3)
        + 5.0 * alpha;
    let b = -5.0 * alpha + 5.0 * alpha.powi(3) - 10.0 * alpha * alpha * beta
        + 5.0 * alpha * beta * beta;
    (a, b)
}

/// Linear coefficient `Ξ̄(α, β, ω)` of the Taylor expansion of the
/// normalized Hamiltonian `𝒲̄` in `δ` at the lower boundary
/// `δ_min = |α − β|` of the physical region:
///
/// ```text
/// Ξ̄ = −2 (A + B cos²ω) / (β⁴ |α − β|),
/// ```
///
/// with the cubic pair `A, B` of [`torsion_frequency_coefficient`]. It
/// equals `∂𝒲̄/∂δ` at `δ = δ_min` and is strictly negative on the
/// physical parameter range, so the level curves near the boundary are
/// graphs over `ω`.
///
/// # Errors
///
/// [`Error::CoincidentMomenta`] at `α = β`, where the expansion point
/// `δ_min = 0` collides with the coordinate singularity of the cover.
pub fn xi_bar(alpha: f64, beta: f64, omega: f64) -> Result<f64> {
    if alpha == beta {
        return Err(Error::CoincidentMomenta(format!(
            "alpha = beta = {alpha}; the boundary expansion divides by |alpha − beta|"
        )));
    }
    let (a, b) = torsion_cubics(alpha, beta);
    let c2 = omega.cos().powi(2);
    Ok(-2.0 * (a + b * c2) / (beta.powi(4) * (alpha - beta).abs()))
}

/// Closed-form frequency coefficient of the boundary normal form,
///
/// ```text
/// N(α, β) = 2π (∮ dω/Ξ̄)⁻¹ = −2 √(α + β) √A / β⁴,
/// A = 9α²β − 6αβ² + β³ − 4α³ + 5α,
/// ```
///
/// obtained from the circle average of `1/Ξ̄` with
/// `∮ dω/(a + b cos ω) = 2π/√(a² − b²)` and the factorization
/// `A + B = (α − β)²(α + β)`. The coefficient is the rate at which the
/// boundary action advances the angle in the linearized normal form;
/// its `β`-derivative squared is the torsion.
///
/// Unlike the `Ξ̄` route, the closed form is regular at `α = β`, where
/// the cubic reduces to `A = 5α`.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for non-positive `α, β`;
/// [`Error::DegenerateRadicand`] when `A ≤ 0`.
pub fn torsion_frequency_coefficient(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "normalized momenta must be positive and finite, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let (a, _) = torsion_cubics(alpha, beta);
    if a <= 0.0 {
        return Err(Error::DegenerateRadicand);
    }
    Ok(-2.0 * (alpha + beta).sqrt() * a.sqrt() / beta.powi(4))
}

/// Frequency coefficient by direct periodic-trapezoid quadrature of
/// `∮ dω/Ξ̄` over the circle, for cross-checking the closed form. The
/// integrand is analytic and periodic, so the rule converges
/// spectrally.
///
/// # Errors
///
/// [`Error::CoincidentMomenta`] at `α = β`;
/// [`Error::DegenerateRadicand`] when the integrand denominator
/// `A + B cos²ω` is not positive throughout;
/// [`Error::InvalidParameter`] for fewer than 16 nodes.
pub fn frequency_coefficient_quadrature(alpha: f64, beta: f64, nodes: usize) -> Result<f64> {
    if alpha == beta {
        return Err(Error::CoincidentMomenta(format!(
            "alpha = beta = {alpha}; the quadrature route needs distinct momenta"
        )));
    }
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!(
            "at least 16 quadrature nodes required, got {nodes}"
        )));
    }
    let (a, b) = torsion_cubics(alpha, beta);
    if a <= 0.0 || a + b <= 0.0 {
        return Err(Error::DegenerateRadicand);
    }
    let scale = -beta.powi(4) * (alpha - beta).abs() / 2.0;
    let mut sum = 0.0;
    for j in 0..nodes {
        let omega = TAU * j as f64 / nodes as f64;
        let c2 = omega.cos().powi(2);
        sum += scale / (a + b * c2);
    }
    let integral = sum * TAU / nodes as f64;
    Ok(TAU / integral)
}

/// Frequency coefficient and torsion at one normalized parameter pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsionResult {
    /// Closed-form frequency coefficient `N(α, β)`.
    pub frequency_coefficient: f64,
    /// Torsion `(∂N/∂β)²`, the squared Hessian determinant of the
    /// boundary normal form with respect to the action–momentum pair.
    pub torsion: f64,
}

/// Torsion of the boundary normal form at `(α, β)`: the closed-form
/// frequency coefficient together with the square of its `β`-derivative,
/// the latter by central differences at steps `{1e−4, 5e−5}` with one
/// Richardson extrapolation.
///
/// # Errors
///
/// [`Error::CoincidentMomenta`] at `α = β` — the expansion route that
/// defines the normal form degenerates there; use [`torsion_limit`] (or
/// [`torsion_limit_extrapolated`]) for the coincident value.
/// [`Error::DegenerateRadicand`] if the cubic radicand fails anywhere
/// on the differentiation stencil; [`Error::InvalidParameter`] if `β`
/// is too small for the fixed stencil.
pub fn torsion(alpha: f64, beta: f64) -> Result<TorsionResult> {
    if alpha == beta {
        return Err(Error::CoincidentMomenta(format!(
            "alpha = beta = {alpha}; the torsion of the coincident torus is \
             the continuous limit, see torsion_limit"
        )));
    }
    let h_coarse = 1e-4;
    let h_fine = 5e-5;
    if beta <= h_coarse {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} is too small for the differentiation steps {h_coarse} and {h_fine}"
        )));
    }
    let frequency_coefficient = torsion_frequency_coefficient(alpha, beta)?;
    let derivative = |h: f64| -> Result<f64> {
        let plus = torsion_frequency_coefficient(alpha, beta + h)?;
        let minus = torsion_frequency_coefficient(alpha, beta - h)?;
        Ok((plus - minus) / (2.0 * h))
    };
    let coarse = derivative(h_coarse)?;
    let fine = derivative(h_fine)?;
    let slope = (4.0 * fine - coarse) / 3.0;
    Ok(TorsionResult {
        frequency_coefficient,
        torsion: slope * slope,
    })
}

/// Torsion of the coincident-momentum tori, the `α → β` limit of
/// [`torsion`]:
///
/// ```text
/// lim torsion = 1125/(2β⁸),
/// ```
///
/// finite and non-vanishing because at `α = β` the cubic reduces to
/// `A = 5β` with `∂A/∂β = 0`, leaving
/// `∂N/∂β = (15/2)√10/β⁴`. Precondition: `β > 0`.
pub fn torsion_limit(beta: f64) -> f64 {
    1125.0 / (2.0 * beta.powi(8))
}

/// Numeric limit of [`torsion`] at coincident momenta: evaluate at
/// `α = β ± ε` and `α = β ± ε/2`, average the symmetric pairs (killing
/// the odd orders), and Richardson-extrapolate the remaining `ε²` term.
/// Agrees with [`torsion_limit`] to better than `1e−6` relative at
/// `ε = 1e−4`.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for non-positive `ε` or `ε ≥ β`;
/// propagated [`torsion`] errors.
pub fn torsion_limit_extrapolated(beta: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < beta) {
        return Err(Error::InvalidParameter(format!(
            "extrapolation offset must satisfy 0 < eps < beta, got eps = {eps}, beta = {beta}"
        )));
    }
    let symmetric = |e: f64| -> Result<f64> {
        Ok(0.5 * (torsion(beta + e, beta)?.torsion + torsion(beta - e, beta)?.torsion))
    };
    let coarse = symmetric(eps)?;
    let fine = symmetric(0.5 * eps)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn params() -> QuadParams {
        QuadParams::new(1.0, 1.4, 1.0, 1.0).expect("valid params")
    }

    /// Low-discrepancy angle sequence for grid-free sampling.
    fn weyl(n: usize) -> f64 {
        (n as f64 * FRAC_1_SQRT_2).fract()
    }

    #[test]
    fn parameter_and_point_validation() {
        assert!(matches!(
            QuadParams::new(0.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            QuadParams::new(1.0, 1.0, 1.2, 1.0),
            Err(Error::NonPhysicalPoint(_))
        ));
        let p = params();
        assert_eq!(p.g1_bound(), 1.0);
        assert!(matches!(
            CoverPoint::new(1.0, 0.0, &p),
            Err(Error::NonPhysicalPoint(_))
        ));
        assert!(matches!(
            CoverPoint::new(f64::NAN, 0.0, &p),
            Err(Error::InvalidParameter(_))
        ));
        // Wrapping of the angle.
        let c = CoverPoint::new(-0.3, -1.0, &p).expect("interior point");
        assert!((0.0..TAU).contains(&c.g1));
        assert_relative_eq!(c.g1, TAU - 1.0, max_relative = 1e-15);
    }

    #[test]
    fn symmetry_partner_preserves_hamiltonian() {
        let p = params();
        for k in 0..40 {
            let g1 = (2.0 * weyl(3 * k + 1) - 1.0) * 0.9;
            let ang = TAU * weyl(3 * k + 2);
            let point = CoverPoint::new(g1, ang, &p).expect("interior");
            let partner = point.symmetry_partner();
            assert_relative_eq!(
                cover_hamiltonian(&point, &p),
                cover_hamiltonian(&partner, &p),
                max_relative = 1e-13,
            );
            let back = partner.symmetry_partner();
            assert_abs_diff_eq!(back.big_g1, point.big_g1, epsilon = 1e-15);
            assert_abs_diff_eq!(
                crate::elements::angle_diff(back.g1, point.g1),
                0.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn cover_matches_general_closed_form() {
        let p = QuadParams::new(1.0, 1.4, 0.9, 1.0 * 0.8 * 1.3 / 1.8).expect("params");
        let m = MassConfig::new(1.0, 0.8, 1.3).expect("masses");
        for k in 0..25 {
            let g1 = 0.05 + 0.8 * weyl(2 * k + 1);
            let ang = TAU * weyl(2 * k + 2);
            let point = CoverPoint::new(g1, ang, &p).expect("interior");
            let sp = SecularPoint::new(g1, ang, 0.9, 0.4, 1.0, 1.4, 0.9).expect("secular point");
            assert_relative_eq!(
                cover_hamiltonian(&point, &p),
                crate::secular::f_quad(&sp, &m).expect("f_quad"),
                max_relative = 1e-13,
            );
            assert_relative_eq!(
                cover_precession_rate(&point, &p),
                crate::secular::nu_quad2(&sp, &m).expect("nu_quad2"),
                max_relative = 1e-12,
            );
        }
        // The branch point G1 = 0 of the cover.
        let origin = CoverPoint::new(0.0, 0.7, &p).expect("axis point");
        let sp0 = SecularPoint::new(0.0, 0.7, 0.9, 0.4, 1.0, 1.4, 0.9).expect("secular");
        assert_relative_eq!(
            cover_precession_rate(&origin, &p),
            crate::secular::nu_quad2(&sp0, &m).expect("nu_quad2"),
            max_relative = 1e-13,
        );
    }

    #[test]
    fn interior_equilibria_of_the_cover_flow() {
        let p = params();
        let origin = CoverPoint::new(0.0, 0.0, &p).expect("origin");
        assert_eq!(quad_vector_field(&origin, &p), (0.0, 0.0));
        // sin(2π) and sin(π) round away from zero, so the deck images
        // vanish only to rounding.
        let scale = p.coefficient();
        for ang in [PI, PI / 2.0, 3.0 * PI / 2.0] {
            let point = CoverPoint::new(0.0, ang, &p).expect("axis");
            let (dm, da) = quad_vector_field(&point, &p);
            assert!(dm.abs() <= 1e-13 * scale, "dG1/dt = {dm} at g1 = {ang}");
            assert!(da.abs() <= 1e-13 * scale, "dg1/dt = {da} at g1 = {ang}");
        }
    }

    #[test]
    fn vector_field_matches_central_differences_on_cover() {
        let p = QuadParams::new(1.1, 2.0, 0.8, 0.7).expect("params");
        // Central differences with one Richardson level push the
        // truncation error far below the rounding floor.
        let fd = |value: &dyn Fn(f64) -> f64| {
            let h = 2e-5;
            let central = |s: f64| (value(s) - value(-s)) / (2.0 * s);
            (4.0 * central(0.5 * h) - central(h)) / 3.0
        };
        for k in 0..25 {
            let g1 = (2.0 * weyl(2 * k + 1) - 1.0) * 0.9 * p.g1_bound();
            let ang = TAU * weyl(2 * k + 2);
            let (dm, da) = field_raw(&p, g1, ang);
            let fd_angle = fd(&|s| hamiltonian_raw(&p, g1, ang + s));
            let fd_mom = fd(&|s| hamiltonian_raw(&p, g1 + s, ang));
            let scale = p.coefficient().max(dm.abs()).max(da.abs());
            assert_abs_diff_eq!(dm, -fd_angle, epsilon = 1e-9 * scale);
            assert_abs_diff_eq!(da, fd_mom, epsilon = 1e-9 * scale);
        }
    }

    #[test]
    fn secular_vector_field_matches_central_differences() {
        let m = MassConfig::new(1.0, 0.8, 1.3).expect("masses");
        let h = 1e-6;
        for k in 0..20 {
            // Interior secular points away from the cover: C ≠ G2.
            let big_g1 = 0.45 + 0.3 * weyl(2 * k + 1);
            let ang = TAU * weyl(2 * k + 2);
            let sp = SecularPoint::new(big_g1, ang, 1.1, 0.9, 1.0, 1.4, 1.3).expect("secular");
            let (dm, da) = quad_vector_field_secular(&sp, &m).expect("field");
            let at = |g1: f64, angle: f64| {
                let shifted =
                    SecularPoint::new(g1, angle, 1.1, 0.9, 1.0, 1.4, 1.3).expect("shifted");
                crate::secular::f_quad(&shifted, &m).expect("f_quad")
            };
            let fd_angle = (at(big_g1, ang + h) - at(big_g1, ang - h)) / (2.0 * h);
            let fd_mom = (at(big_g1 + h, ang) - at(big_g1 - h, ang)) / (2.0 * h);
            let scale = 1.0_f64.max(dm.abs()).max(da.abs());
            assert_abs_diff_eq!(dm, -fd_angle, epsilon = 1e-9 * scale);
            assert_abs_diff_eq!(da, fd_mom, epsilon = 1e-9 * scale);
        }
    }

    #[test]
    fn off_cover_curves_conserve_energy_and_circulate_near_the_boundary() {
        let m = MassConfig::new(1.0, 0.8, 1.3).expect("masses");
        let (big_g2, c) = (0.9, 1.05);

        // Mid-annulus curve: energy is conserved along the samples.
        let start = SecularPoint::new(0.45, 0.6, big_g2, 0.0, 1.0, 1.4, c).expect("start");
        let f0 = crate::secular::f_quad(&start, &m).expect("energy");
        let curve = trace_secular_curve(&start, &m, 40.0, 160).expect("curve");
        assert_eq!(curve.len(), 161);
        assert_eq!(curve[0], [start.big_g1, start.g1]);
        let lo = (c - big_g2).abs();
        let hi = 1.0_f64.min(c + big_g2);
        for row in &curve {
            assert!(row[0] > lo && row[0] < hi, "left the annulus: {row:?}");
            let sp = SecularPoint {
                big_g1: row[0],
                g1: row[1],
                ..start
            };
            let f = crate::secular::f_quad(&sp, &m).expect("sampled energy");
            assert_relative_eq!(f, f0, max_relative = 1e-9);
        }

        // Near the inner boundary the pericenter argument has no
        // restoring term left (the g1-dependence of the energy carries a
        // sin²-of-inclination factor that vanishes there), so the level
        // curves encircle the minimal-G1 circle and g1 circulates.
        let near = SecularPoint::new(0.18, 0.6, big_g2, 0.0, 1.0, 1.4, c).expect("near");
        let loop_curve = trace_secular_curve(&near, &m, 40.0, 160).expect("loop");
        let swept = loop_curve.last().expect("rows")[1] - loop_curve[0][1];
        assert!(
            swept.abs() > TAU,
            "expected circulation near the boundary, swept {swept:.3}"
        );

        // Input validation.
        assert!(matches!(
            trace_secular_curve(&start, &m, -1.0, 64),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            trace_secular_curve(&start, &m, 10.0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn hessian_determinant_reference_values() {
        let unit = QuadParams::new(1.0, 1.0, 1.0, 1.0).expect("params");
        assert_relative_eq!(equilibrium_hessian(&unit), 5.625, max_relative = 1e-15);
        let stretched = QuadParams::new(2.0, 1.0, 1.0, 1.0).expect("params");
        assert_relative_eq!(
            equilibrium_hessian(&stretched),
            45.0 / 32.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn hessian_determinant_matches_finite_differences() {
        let grid = [
            (1.0, 1.0, 1.0, 1.0),
            (2.0, 1.0, 1.0, 1.0),
            (1.3, 2.0, 0.8, 0.6),
            (0.7, 1.1, 0.5, 1.9),
            (1.0, 1.7, 1.2, 1.0),
        ];
        for (l1, l2, g2, mu) in grid {
            let p = QuadParams::new(l1, l2, g2, mu).expect("params");
            assert_relative_eq!(
                equilibrium_hessian_numeric(&p),
                equilibrium_hessian(&p),
                max_relative = 1e-8,
            );
        }
    }

    #[test]
    fn trace_rejects_equilibrium_starts() {
        let p = params();
        for ang in [0.0, PI, PI / 2.0] {
            let point = CoverPoint::new(0.0, ang, &p).expect("axis");
            assert!(matches!(
                trace_orbit(&point, &p),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn small_oscillations_match_the_linearization() {
        let p = params();
        let t_lin = linear_period(&p);
        let fxx = 12.0 * p.coefficient() / (p.big_l1 * p.big_l1);
        let fyy = 30.0 * p.coefficient();
        let mut deviations = Vec::new();
        for amp in [2e-3, 1e-3] {
            let start = CoverPoint::new(amp, 0.0, &p).expect("start");
            let orbit = trace_orbit(&start, &p).expect("small orbit closes");
            deviations.push((orbit.period - t_lin).abs());
            // Harmonic action of the elliptic level set.
            let harmonic = 0.5 * amp * amp * (fxx / fyy).sqrt();
            assert_relative_eq!(orbit.action, harmonic, max_relative = 1e-4);
        }
        assert!(
            deviations[0] < 1e-4 * t_lin,
            "period deviation {} at amplitude 2e-3",
            deviations[0]
        );
        // The anharmonic correction is quadratic in amplitude.
        let ratio = deviations[0] / deviations[1];
        assert!(
            (2.8..5.2).contains(&ratio),
            "period deviation ratio {ratio} not consistent with O(amplitude²)"
        );
    }

    #[test]
    fn orbit_conserves_the_hamiltonian_and_closes() {
        let p = params();
        for (amp, ang) in [(0.5, 0.0), (0.75, PI), (0.3, 0.0)] {
            let start = CoverPoint::new(amp, ang, &p).expect("start");
            let orbit = trace_orbit(&start, &p).expect("orbit closes");
            assert!(
                orbit.energy_drift < tol::ORBIT_ENERGY_DRIFT_TOL,
                "drift {} at amplitude {amp}",
                orbit.energy_drift
            );
            assert!(orbit.closure_gap <= tol::ORBIT_CLOSURE_TOL * orbit.amplitude);
            assert!(orbit.action > 0.0);
            assert_eq!(orbit.crossings.len(), 3);
            assert_eq!(orbit.crossings[0].increasing, orbit.crossings[2].increasing);
            assert_ne!(orbit.crossings[0].increasing, orbit.crossings[1].increasing);
        }
    }

    #[test]
    fn section_crossings_are_perpendicular_across_amplitudes() {
        let p = params();
        for k in 1..=8 {
            let amp = 0.1 * k as f64;
            let start = CoverPoint::new(amp, 0.0, &p).expect("start");
            let orbit = trace_orbit(&start, &p).expect("orbit closes");
            for c in &orbit.crossings {
                assert!(
                    c.angle > 1.5,
                    "crossing angle {} at amplitude {amp} not transversal",
                    c.angle
                );
            }
        }
    }

    #[test]
    fn budget_exhaustion_reports_not_closed() {
        let p = params();
        let start = CoverPoint::new(0.5, 0.0, &p).expect("start");
        let full = trace_orbit(&start, &p).expect("orbit closes");
        let strangled = TraceOptions {
            time_budget: Some(0.3 * full.period),
            ..TraceOptions::default()
        };
        assert!(matches!(
            trace_orbit_with(&start, &p, &strangled),
            Err(Error::NotClosed(_))
        ));
    }

    #[test]
    fn action_grows_monotonically_with_amplitude() {
        let p = params();
        let mut previous = 0.0;
        for k in 1..=6 {
            let amp = 0.13 * k as f64;
            let start = CoverPoint::new(amp, 0.0, &p).expect("start");
            let orbit = trace_orbit(&start, &p).expect("orbit closes");
            assert!(
                orbit.action > previous,
                "action {} not monotone at amplitude {amp}",
                orbit.action
            );
            previous = orbit.action;
        }
    }

    #[test]
    fn tiny_orbit_average_approaches_the_equilibrium_rate() {
        let p = params();
        let start = CoverPoint::new(1e-3, 0.0, &p).expect("start");
        let orbit = trace_orbit(&start, &p).expect("orbit closes");
        let fr = action_and_frequencies(&orbit, &p);
        let origin = CoverPoint::new(0.0, 0.0, &p).expect("origin");
        let at_equilibrium = cover_precession_rate(&origin, &p);
        // 15β/G2 with β = μ L2³/(8 G2³).
        assert_relative_eq!(
            at_equilibrium,
            15.0 * p.coefficient() / p.big_g2,
            max_relative = 1e-14,
        );
        assert_relative_eq!(fr.precession_rate, at_equilibrium, max_relative = 1e-4);
        assert_relative_eq!(fr.libration_frequency, TAU / orbit.period, max_relative = 1e-15);
    }

    #[test]
    fn portrait_families_and_separatrix() {
        let p = params();
        let spec = PortraitSpec {
            coplanar_family: 4,
            polar_family: 3,
            samples_per_orbit: 256,
            max_fraction: 0.8,
        };
        let portrait = phase_portrait(&p, &spec).expect("portrait");
        assert_eq!(portrait.orbits.len(), 2 * 4 + 2 * 3);
        assert_eq!(
            portrait.symmetry_fixed_points,
            [[0.0, PI / 2.0], [0.0, 3.0 * PI / 2.0]]
        );

        // The separatrix level is the level of the invariant boundary
        // circle {G1 = L1}: with u_L = L1²/(4G2²) the bracket there is
        // S = 3u_L − 1, and its axis crossing solves
        // 15 cos²g1 − 10 = 3u_L − 1.
        let u_l = (p.big_l1 / (2.0 * p.big_g2)).powi(2);
        let level = -p.coefficient() * (3.0 * u_l - 1.0);
        let g1_axis = ((9.0 + 3.0 * u_l) / 15.0).sqrt().acos();
        assert_abs_diff_eq!(portrait.separatrix.g1_axis, g1_axis, epsilon = 1e-6);
        assert_relative_eq!(portrait.separatrix.level, level, max_relative = 1e-7);

        // Coplanar loops live below the separatrix level, polar loops
        // above; within each family the level increases outward resp.
        // toward the polar center.
        let coplanar = &portrait.orbits[..8];
        let polar = &portrait.orbits[8..];
        for orbit in coplanar {
            assert!(orbit.energy < portrait.separatrix.level);
        }
        for orbit in polar {
            assert!(orbit.energy > portrait.separatrix.level);
        }
        for family in [&portrait.orbits[0..4], &portrait.orbits[4..8]] {
            for pair in family.windows(2) {
                assert!(pair[0].energy < pair[1].energy, "levels not nested");
            }
        }

        // Deck symmetry: each traced orbit has a partner orbit of equal
        // period and action through the transformed start.
        let sample_start = CoverPoint::new(0.4, 0.0, &p).expect("start");
        let orbit = trace_orbit(&sample_start, &p).expect("orbit");
        let partner = trace_orbit(&sample_start.symmetry_partner(), &p).expect("partner orbit");
        assert_relative_eq!(orbit.period, partner.period, max_relative = 1e-10);
        assert_relative_eq!(orbit.action, partner.action, max_relative = 1e-8);
    }

    #[test]
    fn normalized_w_identity_and_branch() {
        // S = 3(𝒲 + 5/3) whenever (γ, u) and (δ, α, β) describe the
        // same geometry.
        for k in 0..30 {
            let alpha = 0.5 + weyl(3 * k + 1);
            let beta = 0.4 + weyl(3 * k + 2);
            let lo = (alpha - beta).abs();
            let hi = (alpha + beta).min(1.0);
            if lo >= hi {
                continue;
            }
            let delta = lo + (hi - lo) * (0.1 + 0.8 * weyl(3 * k + 3));
            let omega = TAU * weyl(k + 7);
            let nq = NormalizedQuad::new(alpha, beta, delta, omega).expect("normalized");
            let w = normalized_w(&nq).expect("w");
            let num = (alpha - beta) * (alpha + beta) - delta * delta;
            let u = (num / (2.0 * beta * delta)).powi(2);
            let (s, ..) = quad_bracket(delta * delta, u, omega);
            assert_relative_eq!(s, 3.0 * w + 5.0, max_relative = 1e-12, epsilon = 1e-12);
        }
        // Branch at δ = 0 on the cover, and its singularity off it.
        let on_cover = NormalizedQuad::new(0.8, 0.8, 0.0, 1.1).expect("cover point");
        assert_relative_eq!(
            normalized_w(&on_cover).expect("w"),
            -5.0 * 1.1_f64.sin().powi(2),
            max_relative = 1e-15,
        );
        assert!(matches!(
            NormalizedQuad::new(0.9, 0.8, 0.0, 1.1),
            Err(Error::NonPhysicalPoint(_))
        ));
        // The constructor rejects δ = 0 off the cover, but the raw
        // evaluation reports the coordinate singularity.
        let off_cover = NormalizedQuad {
            alpha: 0.9,
            beta: 0.8,
            delta: 0.0,
            omega: 1.1,
        };
        assert!(matches!(
            normalized_w(&off_cover),
            Err(Error::SingularCoordinates(_))
        ));
    }

    #[test]
    fn hamiltonian_is_a_constant_multiple_of_the_normalized_form() {
        let p = QuadParams::new(1.0, 1.4, 0.9, 0.77).expect("params");
        let expected = -3.0 * p.mu_quad * p.big_l2.powi(3) / (8.0 * p.big_l1.powi(3));
        let mut ratios = Vec::new();
        for mom in [-0.8, -0.5, -0.2, 0.2, 0.5, 0.8] {
            for ang in [0.3, 1.2, 2.1, 4.0] {
                let point = CoverPoint::new(mom, ang, &p).expect("interior");
                let nq = NormalizedQuad::new(
                    p.big_g2 / p.big_l1,
                    p.big_g2 / p.big_l1,
                    mom.abs() / p.big_l1,
                    ang,
                )
                .expect("normalized");
                let w_bar = normalized_w_bar(&nq).expect("w_bar");
                if w_bar.abs() < 0.05 {
                    continue;
                }
                ratios.push(cover_hamiltonian(&point, &p) / w_bar);
            }
        }
        assert!(ratios.len() > 12);
        for r in &ratios {
            assert_relative_eq!(*r, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn xi_bar_is_the_boundary_slope_of_w_bar() {
        for (alpha, beta) in [(0.9_f64, 0.7_f64), (1.1, 0.8), (0.6, 1.0), (0.45, 0.85)] {
            let delta_min = (alpha - beta).abs();
            for omega in [0.4, 1.1, 2.0, 5.5] {
                let xi = xi_bar(alpha, beta, omega).expect("xi");
                assert!(xi < 0.0, "xi = {xi} not negative at ({alpha}, {beta})");
                let value = |d: f64| {
                    let nq = NormalizedQuad::new(alpha, beta, d, omega).expect("point");
                    normalized_w_bar(&nq).expect("w_bar")
                };
                // Second-order one-sided difference staying inside the
                // physical region, with one Richardson level.
                let one_sided = |h: f64| {
                    (-3.0 * value(delta_min) + 4.0 * value(delta_min + h)
                        - value(delta_min + 2.0 * h))
                        / (2.0 * h)
                };
                let coarse = one_sided(1e-5);
                let fine = one_sided(5e-6);
                let fd = (4.0 * fine - coarse) / 3.0;
                assert_relative_eq!(xi, fd, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_frequency_coefficient_matches_quadrature() {
        for alpha in [0.6, 0.9, 1.2] {
            for beta in [0.5, 1.0, 1.6] {
                let closed = torsion_frequency_coefficient(alpha, beta).expect("closed form");
                let quad =
                    frequency_coefficient_quadrature(alpha, beta, 512).expect("quadrature");
                assert_relative_eq!(
                    closed,
                    quad,
                    max_relative = tol::TORSION_QUADRATURE_TOL
                );
            }
        }
        // The closed form is regular at coincident momenta: −2√10 at
        // unit parameters.
        let at_limit = torsion_frequency_coefficient(1.0, 1.0).expect("closed form");
        assert_relative_eq!(at_limit, -2.0 * 10.0_f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn torsion_limit_reference_values_and_extrapolation() {
        assert_relative_eq!(torsion_limit(1.0), 562.5, max_relative = 1e-15);
        assert_relative_eq!(torsion_limit(2.0), 1125.0 / 512.0, max_relative = 1e-15);
        for beta in [0.5, 1.0, 2.0] {
            let fitted = torsion_limit_extrapolated(beta, 1e-4).expect("extrapolated");
            assert_relative_eq!(fitted, torsion_limit(beta), max_relative = 1e-6);
        }
    }

    #[test]
    fn torsion_error_paths() {
        assert!(matches!(
            torsion(1.0, 1.0),
            Err(Error::CoincidentMomenta(_))
        ));
        assert!(matches!(xi_bar(0.7, 0.7, 0.3), Err(Error::CoincidentMomenta(_))));
        assert!(matches!(
            frequency_coefficient_quadrature(0.7, 0.7, 512),
            Err(Error::CoincidentMomenta(_))
        ));
        // A = 9α²β − 6αβ² + β³ − 4α³ + 5α < 0 for a dominant first
        // momentum.
        assert!(matches!(
            torsion_frequency_coefficient(2.0, 0.1),
            Err(Error::DegenerateRadicand)
        ));
        assert!(matches!(
            torsion(2.0, 0.1),
            Err(Error::DegenerateRadicand)
        ));
    }

    #[test]
    fn torsion_value_is_the_squared_beta_derivative() {
        // Independent of the stencil: differentiate the closed form
        // analytically. With N = −2√(α+β)√A/β⁴,
        // N′/N = 1/(2(α+β)) + A′/(2A) − 4/β, A′ = 9α² − 12αβ + 3β².
        for (alpha, beta) in [(0.9, 0.7), (1.1, 1.0), (0.8, 1.3)] {
            let (a, _) = torsion_cubics(alpha, beta);
            let a_prime = 9.0 * alpha * alpha - 12.0 * alpha * beta + 3.0 * beta * beta;
            let n = torsion_frequency_coefficient(alpha, beta).expect("closed form");
            let derivative =
                n * (0.5 / (alpha + beta) + 0.5 * a_prime / a - 4.0 / beta);
            let result = torsion(alpha, beta).expect("torsion");
            assert_relative_eq!(result.frequency_coefficient, n, max_relative = 1e-15);
            assert_relative_eq!(
                result.torsion,
                derivative * derivative,
                max_relative = 1e-9,
            );
        }
    }

    #[test]
    fn frequency_map_is_nondegenerate() {
        let m = MassConfig::new(1.0, 0.8, 1.3).expect("masses");
        let det = frequency_map_jacobian(0.4, 2.0, 0.15, 0.3, 0.7, &m).expect("jacobian");
        assert!(
            det.abs() > 1e-4,
            "frequency map determinant {det} too close to zero"
        );
    }
}
