//! Secular (doubly averaged) dynamics of the hierarchical three-body
//! problem: numerical averaging of the coupling over both fast anomalies,
//! extraction of the leading coefficients of its expansion in the
//! semi-major-axis ratio, the closed-form quadrupolar Hamiltonian on the
//! reduced space, the coplanar octupolar term, the first fast-angle
//! elimination generator with its residual scalings, and the bordered
//! Hessian used for iso-energetic non-degeneracy checks.
//!
//! # Units and conventions
//!
//! The reduced secular phase space carries Darboux coordinates
//! `(G1, g1, G2, g2)` — angular momenta and pericenter arguments of the
//! two ellipses — with the actions `L1, L2` and the total angular
//! momentum magnitude `C` as parameters. The total angular-momentum
//! vector is vertical, which fixes the node convention `h1 = π, h2 = 0`;
//! inclinations follow from the triangle with sides `G1, G2, C`:
//!
//! ```text
//! cos i1 = (C² + G1² − G2²)/(2 C G1)
//! cos i2 = (C² + G2² − G1²)/(2 C G2)
//! cos J  = (C² − G1² − G2²)/(2 G1 G2)      (mutual inclination)
//! ```
//!
//! The physical (triangle) region is `|C − G2| ≤ G1 ≤ min(L1, C + G2)`.
//! On the branched double cover `C = G2`, `G1 = 0` (degenerate inner
//! ellipse) is an interior point: there `cos J`-type quantities stay
//! regular when written through `X = C² − G1² − G2² = −G1²`.
//!
//! Averages are computed with eccentric anomalies as integration
//! variables, `dl = (1 − e cos u) du`, so the degenerate inner ellipse
//! `e1 = 1` poses no difficulty. All quadratures are tensor trapezoid
//! rules on periodic analytic integrands, hence spectrally accurate.

use crate::error::{Error, Result};
use crate::flow::{pack_state, unpack_state, STATE_DIM};
use crate::quat::hopf;
use crate::threebody::{eval_regularized, pert_value, MassConfig, RegularizedState};
use crate::tol;
use crate::Vec3;
use std::f64::consts::PI;

type Rot3 = nalgebra::Rotation3<f64>;

// ---------------------------------------------------------------------------
// The reduced secular point
// ---------------------------------------------------------------------------

/// A point of the reduced secular space: Darboux coordinates
/// `(G1, g1, G2, g2)` with parameters `(L1, L2, C)` under the
/// vertical-total-angular-momentum convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularPoint {
    /// Inner angular momentum `G1 ≥ 0` (`0` is the degenerate ellipse).
    pub big_g1: f64,
    /// Inner argument of pericenter.
    pub g1: f64,
    /// Outer angular momentum `G2 > 0`.
    pub big_g2: f64,
    /// Outer argument of pericenter.
    pub g2: f64,
    /// Inner circular angular momentum `L1 > 0`.
    pub big_l1: f64,
    /// Outer circular angular momentum `L2 > 0`.
    pub big_l2: f64,
    /// Magnitude `C > 0` of the (vertical) total angular momentum.
    pub c: f64,
}

impl SecularPoint {
    /// Validated constructor; see [`SecularPoint::validate`].
    pub fn new(
        big_g1: f64,
        g1: f64,
        big_g2: f64,
        g2: f64,
        big_l1: f64,
        big_l2: f64,
        c: f64,
    ) -> Result<Self> {
        let sp = Self {
            big_g1,
            g1,
            big_g2,
            g2,
            big_l1,
            big_l2,
            c,
        };
        sp.validate()?;
        Ok(sp)
    }

    /// Check membership in the physical region: positivity of the
    /// parameters, `G2 ≤ L2`, and the triangle condition
    /// `|C − G2| ≤ G1 ≤ min(L1, C + G2)`, all with a small relative
    /// slack so boundary configurations assembled in floating point pass.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| -> Result<()> {
            Err(Error::NonPhysicalPoint(format!(
                "{what} (G1 = {}, G2 = {}, L1 = {}, L2 = {}, C = {})",
                self.big_g1, self.big_g2, self.big_l1, self.big_l2, self.c
            )))
        };
        if !(self.big_l1 > 0.0 && self.big_l2 > 0.0 && self.c > 0.0 && self.big_g2 > 0.0) {
            return bad("L1, L2, C, G2 must be positive");
        }
        if self.big_g1 < 0.0 {
            return bad("G1 must be non-negative");
        }
        let scale = self.c + self.big_g2 + self.big_g1;
        let slack = tol::PHYSICAL_REGION_SLACK * scale;
        if self.big_g2 > self.big_l2 * (1.0 + tol::PHYSICAL_REGION_SLACK) {
            return bad("G2 exceeds L2");
        }
        if (self.c - self.big_g2).abs() > self.big_g1 + slack {
            return bad("triangle condition |C − G2| ≤ G1 violated");
        }
        if self.big_g1 > self.big_l1.min(self.c + self.big_g2) + slack {
            return bad("triangle condition G1 ≤ min(L1, C + G2) violated");
        }
        Ok(())
    }

    /// Inner eccentricity `√(1 − G1²/L1²)`; `1` at the degenerate ellipse.
    pub fn e1(&self) -> f64 {
        (1.0 - (self.big_g1 / self.big_l1).powi(2)).max(0.0).sqrt()
    }

    /// Outer eccentricity `√(1 − G2²/L2²)`.
    pub fn e2(&self) -> f64 {
        (1.0 - (self.big_g2 / self.big_l2).powi(2)).max(0.0).sqrt()
    }
}

/// Orbital-plane rotations `(R1, R2)` of the two ellipses under the
/// vertical-`C̄` convention: `R = Rz(h) Rx(i) Rz(g)` with `h1 = π`,
/// `h2 = 0` and the triangle inclinations. At `G1 = 0` (which forces
/// `C = G2`) the inner plane degenerates; the convention continues it
/// with `i1 = π/2`, which is the limit along the cover.
pub(crate) fn secular_frames(sp: &SecularPoint) -> Result<(Rot3, Rot3)> {
    sp.validate()?;
    let scale = sp.c + sp.big_g2 + sp.big_g1;
    let cos_i1 = if sp.big_g1 <= f64::MIN_POSITIVE * scale.max(1.0) {
        0.0
    } else {
        ((sp.c * sp.c + sp.big_g1 * sp.big_g1 - sp.big_g2 * sp.big_g2)
            / (2.0 * sp.c * sp.big_g1))
            .clamp(-1.0, 1.0)
    };
    let cos_i2 = ((sp.c * sp.c + sp.big_g2 * sp.big_g2 - sp.big_g1 * sp.big_g1)
        / (2.0 * sp.c * sp.big_g2))
        .clamp(-1.0, 1.0);
    let rz = |a: f64| Rot3::from_axis_angle(&Vec3::z_axis(), a);
    let rx = |a: f64| Rot3::from_axis_angle(&Vec3::x_axis(), a);
    let r1 = rz(PI) * rx(cos_i1.acos()) * rz(sp.g1);
    let r2 = rx(cos_i2.acos()) * rz(sp.g2);
    Ok((r1, r2))
}

// ---------------------------------------------------------------------------
// Double averaging
// ---------------------------------------------------------------------------

/// Double average of the coupling over both mean anomalies, computed with
/// eccentric anomalies as quadrature variables:
///
/// ```text
/// (1/4π²) ∬ F_pert(Q1(u1), Q2(u2)) (1 − e1 cos u1)(1 − e2 cos u2) du1 du2
/// ```
///
/// The inner ellipse has semi-major axis `a1` and the outer `a1/alpha`;
/// eccentricities and orientations come from the secular point. The
/// trapezoid rule on these periodic analytic integrands converges
/// spectrally in `nodes`. The degenerate inner ellipse `e1 = 1` is an
/// ordinary input because the parametrization is by `u1`, not by mean
/// anomaly.
///
/// # Errors
///
/// [`Error::NonPhysicalPoint`] outside the triangle region;
/// [`Error::InvalidParameter`] for bad `a1`, `alpha`, or `nodes < 32`;
/// [`Error::CollisionSingular`] if the ellipses intersect (only possible
/// when `alpha` is far too large for a hierarchical system).
pub fn average_pert(
    sp: &SecularPoint,
    a1: f64,
    alpha: f64,
    m: &MassConfig,
    nodes: usize,
) -> Result<f64> {
    if !(a1 > 0.0) || !(alpha > 0.0) || !(alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need a1 > 0 and 0 < alpha < 1, got a1 = {a1}, alpha = {alpha}"
        )));
    }
    if nodes < 32 {
        return Err(Error::InvalidParameter(format!(
            "averaging needs at least 32 nodes, got {nodes}"
        )));
    }
    let (r1, r2) = secular_frames(sp)?;
    average_with_frames(&r1, &r2, sp.e1(), sp.e2(), a1, a1 / alpha, m, nodes, false)
}

/// Averaging core over explicit ellipse frames. `negate_inner` flips the
/// inner perifocal coordinates before rotating, which realizes the
/// half-turn `g1 ↦ g1 + π` exactly (to the last bit) and is what the
/// parity split of the α-expansion relies on.
#[allow(clippy::too_many_arguments)]
pub(crate) fn average_with_frames(
    r1: &Rot3,
    r2: &Rot3,
    e1: f64,
    e2: f64,
    a1: f64,
    a2: f64,
    m: &MassConfig,
    nodes: usize,
    negate_inner: bool,
) -> Result<f64> {
    let eps1 = (1.0 - e1 * e1).max(0.0).sqrt();
    let eps2 = (1.0 - e2 * e2).max(0.0).sqrt();
    let sign = if negate_inner { -1.0 } else { 1.0 };
    let n = nodes;
    let nf = n as f64;

    // Precompute the outer sample ring.
    let mut outer: Vec<(Vec3, f64)> = Vec::with_capacity(n);
    for j in 0..n {
        let u2 = 2.0 * PI * j as f64 / nf;
        let q2 = r2 * Vec3::new(a2 * (u2.cos() - e2), a2 * eps2 * u2.sin(), 0.0);
        outer.push((q2, 1.0 - e2 * u2.cos()));
    }

    let mut sum = 0.0;
    for i in 0..n {
        let u1 = 2.0 * PI * i as f64 / nf;
        let q1 = r1
            * Vec3::new(
                sign * a1 * (u1.cos() - e1),
                sign * a1 * eps1 * u1.sin(),
                0.0,
            );
        let w1 = 1.0 - e1 * u1.cos();
        for (q2, w2) in &outer {
            sum += pert_value(q1, *q2, m)? * w1 * w2;
        }
    }
    Ok(sum / (nf * nf))
}

// ---------------------------------------------------------------------------
// Closed-form quadrupolar Hamiltonian
// ---------------------------------------------------------------------------

/// Shared geometric pieces of the quadrupolar closed form:
/// `γ = G1²/L1²`, `u = cos²J` written through `X = C² − G1² − G2²`, and
/// the partials of `u` and `γ` at fixed `(g1, C, L1, L2)`, in the order
/// `(γ, u, ∂u/∂G2, ∂u/∂G1, ∂γ/∂G1)`.
pub(crate) fn quad_geometry(sp: &SecularPoint) -> Result<(f64, f64, f64, f64, f64)> {
    let g1 = sp.big_g1;
    let g2 = sp.big_g2;
    let gamma = (g1 / sp.big_l1).powi(2);
    let dgamma_dg1 = 2.0 * g1 / (sp.big_l1 * sp.big_l1);
    if g1 == 0.0 {
        if sp.c != g2 {
            return Err(Error::SingularCoordinates(format!(
                "G1 = 0 requires C = G2 (double-cover branch), got C = {}, G2 = {}",
                sp.c, g2
            )));
        }
        // Along the cover, X = −G1² exactly, so u = G1²/(4G2²) → 0,
        // ∂u/∂G2 → 1/G2, and ∂u/∂G1 = G1/(2G2²) → 0; all limits are
        // regular.
        return Ok((gamma, 0.0, 1.0 / g2, 0.0, dgamma_dg1));
    }
    // (C − G2)(C + G2) − G1² is exact on the cover C = G2 and avoids the
    // C² − G2² cancellation near it.
    let x = (sp.c - g2) * (sp.c + g2) - g1 * g1;
    let u = (x / (2.0 * g1 * g2)).powi(2);
    let du_dg2 = -x / (g1 * g1 * g2) - x * x / (2.0 * g1 * g1 * g2 * g2 * g2);
    let du_dg1 = -x / (g1 * g2 * g2) - x * x / (2.0 * g1 * g1 * g1 * g2 * g2);
    Ok((gamma, u, du_dg2, du_dg1, dgamma_dg1))
}

/// Quadrupolar bracket `S` and its `u`- and `γ`-derivatives.
pub(crate) fn quad_bracket(gamma: f64, u: f64, g1_angle: f64) -> (f64, f64, f64) {
    let cg = g1_angle.cos();
    let sg = g1_angle.sin();
    let s = 3.0 * gamma * (1.0 + u) + 15.0 * (1.0 - gamma) * (cg * cg + u * sg * sg)
        - 6.0 * (1.0 - gamma)
        - 4.0;
    let ds_du = 3.0 * gamma + 15.0 * (1.0 - gamma) * sg * sg;
    let ds_dgamma = 3.0 * (1.0 + u) - 15.0 * (cg * cg + u * sg * sg) + 6.0;
    (s, ds_du, ds_dgamma)
}

/// Closed-form quadrupolar secular Hamiltonian on the reduced space,
///
/// ```text
/// f_quad = −(μ_quad L2³ / 8 G2³) · S(γ, u, g1),
/// S = 3γ(1 + u) + 15(1 − γ)(cos²g1 + u sin²g1) − 6(1 − γ) − 4,
/// γ = G1²/L1²,   u = cos²J = X²/(4 G1² G2²),   X = C² − G1² − G2².
/// ```
///
/// It is the `α³`-coefficient of [`average_pert`]`/a1` (at fixed secular
/// point), independent of `g2`, and even under `g1 ↦ π − g1` together
/// with the sign flip of `G1` on the double cover.
///
/// # Errors
///
/// [`Error::SingularCoordinates`] at `G1 = 0` away from the cover
/// `C = G2`, where `u` has no limit.
pub fn f_quad(sp: &SecularPoint, m: &MassConfig) -> Result<f64> {
    let (gamma, u, ..) = quad_geometry(sp)?;
    let (s, ..) = quad_bracket(gamma, u, sp.g1);
    let beta = m.mu_quad * sp.big_l2.powi(3) / (8.0 * sp.big_g2.powi(3));
    Ok(-beta * s)
}

/// Partial derivative `∂f_quad/∂G2` at fixed `(G1, g1, C, L1, L2)` — the
/// quantity that drives the outer pericenter in the reduced quadrupolar
/// flow. Computed from the hand-differentiated closed form; the
/// finite-difference route fails precisely at the `G1 = 0` reference
/// points because moving `G2` off `C = G2` there leaves the domain, so
/// the analytic partial (whose limit along the cover is regular) is used
/// everywhere and finite differences serve as the test oracle at
/// interior points.
///
/// At `C = G2`, `G1 = 0` this reduces to
/// `−(15 μ_quad L2³ / 8 G2⁴)(3 − 4 cos²g1)`.
///
/// # Errors
///
/// As [`f_quad`].
pub fn nu_quad2(sp: &SecularPoint, m: &MassConfig) -> Result<f64> {
    let (gamma, u, du_dg2, ..) = quad_geometry(sp)?;
    let (s, ds_du, _) = quad_bracket(gamma, u, sp.g1);
    let g2 = sp.big_g2;
    let beta = m.mu_quad * sp.big_l2.powi(3) / (8.0 * g2.powi(3));
    // d(−βS)/dG2 with β ∝ G2⁻³: −β′S − β S′ = 3βS/G2 − β (dS/du)(du/dG2).
    Ok(3.0 * beta * s / g2 - beta * ds_du * du_dg2)
}

/// Closed-form coplanar octupolar secular term,
/// `−(15/64)(4 e1 + 3 e1³) e2 (1 − e2²)^{−5/2} cos(dg)`, where `dg` is
/// the apse offset between the two coplanar ellipses. Odd under
/// `dg ↦ dg + π` and vanishing with `e1`. The absolute normalization
/// (mass and semi-major-axis prefactor) is deliberately left out; shape
/// comparisons against quadrature fit a single global constant.
pub fn octupolar_coplanar(e1: f64, e2: f64, dg: f64) -> f64 {
    -(15.0 / 64.0) * (4.0 * e1 + 3.0 * e1.powi(3)) * e2 * (1.0 - e2 * e2).powf(-2.5) * dg.cos()
}

// ---------------------------------------------------------------------------
// α-expansion of the double average
// ---------------------------------------------------------------------------

/// Leading coefficients of the expansion
/// `average_pert/a1 = c2 α³ + c3 α⁴ + O(α⁵)` at a fixed secular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaExpansion {
    /// Quadrupolar coefficient (the `α³` term); equals [`f_quad`]`/a1`.
    pub c2: f64,
    /// Octupolar coefficient (the `α⁴` term); zero for equal inner
    /// masses.
    pub c3: f64,
    /// Relative root-mean-square misfit of the two-term model against
    /// the directly computed averages at the sample ratios; dominated by
    /// the truncated `α⁵` term, so of order `h²`.
    pub residual: f64,
}

/// Extract `c2` and `c3` by evaluating the double average at
/// `α ∈ {h, h/2, h/4}` with the inner perifocal frame both unflipped and
/// flipped. The flip realizes `g1 ↦ g1 + π` exactly, so the half-sum and
/// half-difference split the expansion into even and odd Legendre orders
/// with no cross-contamination; Richardson extrapolation in `α²` then
/// removes the next two orders from each branch. For equal inner masses
/// the odd branch cancels exactly to the last bit, making `c3 = 0` an
/// exact output, not an approximation.
///
/// The coefficients are normalized by `a1 = 1`; they depend on the
/// secular point only through eccentricities and mutual geometry.
///
/// # Errors
///
/// As [`average_pert`], plus [`Error::InvalidParameter`] for `h` outside
/// `(0, 0.5)`.
pub fn alpha_expansion(
    sp: &SecularPoint,
    m: &MassConfig,
    h: f64,
    nodes: usize,
) -> Result<AlphaExpansion> {
    if !(h > 0.0) || !(h < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "expansion base ratio must lie in (0, 0.5), got {h}"
        )));
    }
    let (r1, r2) = secular_frames(sp)?;
    let (e1, e2) = (sp.e1(), sp.e2());
    let a1 = 1.0;
    let alphas = [h, 0.5 * h, 0.25 * h];
    let mut even = [0.0_f64; 3];
    let mut odd = [0.0_f64; 3];
    let mut direct = [0.0_f64; 3];
    for (i, &alpha) in alphas.iter().enumerate() {
        let plus = average_with_frames(&r1, &r2, e1, e2, a1, a1 / alpha, m, nodes, false)?;
        let minus = average_with_frames(&r1, &r2, e1, e2, a1, a1 / alpha, m, nodes, true)?;
        direct[i] = plus;
        even[i] = 0.5 * (plus + minus) / alpha.powi(3);
        odd[i] = 0.5 * (plus - minus) / alpha.powi(4);
    }
    // Richardson weights eliminating the α² and α⁴ corrections from
    // samples at h, h/2, h/4.
    let richardson = |y: [f64; 3]| y[0] / 45.0 - 4.0 * y[1] / 9.0 + 64.0 * y[2] / 45.0;
    let c2 = richardson(even);
    let c3 = richardson(odd);

    let mut misfit = 0.0;
    let mut scale = 0.0;
    for (i, &alpha) in alphas.iter().enumerate() {
        let model = c2 * alpha.powi(3) + c3 * alpha.powi(4);
        misfit += (direct[i] - model).powi(2);
        scale += direct[i].powi(2);
    }
    Ok(AlphaExpansion {
        c2,
        c3,
        residual: (misfit / scale.max(f64::MIN_POSITIVE)).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// First elimination generator
// ---------------------------------------------------------------------------

/// Value at `s` of the generator of the first fast-angle elimination:
/// with `P̃` the zero-mean part of the coupling along the integrable
/// circle through `s` (the inner oscillator orbit at frozen outer body),
///
/// ```text
/// Ĥ(s) = (1/ν1) Σ_{k≠0} p̂_k/(i k),
/// ```
///
/// where `p̂_k` are the Fourier coefficients of the coupling over that
/// circle. Along the circle `dĤ/dτ = P̃` holds by construction, which is
/// the homological property making the time-one flow of `Ĥ` cancel the
/// oscillating part of the coupling at leading order.
///
/// `circle_samples` points are taken on the circle (trapezoid/DFT, so
/// spectrally accurate for the analytic coupling).
///
/// # Errors
///
/// [`Error::HyperbolicOuter`] if the inner energy parameter is not
/// positive at `s`; [`Error::InvalidParameter`] for fewer than 8
/// samples; propagated singular-configuration errors from the coupling.
pub fn elimination_hat(
    s: &RegularizedState,
    m: &MassConfig,
    circle_samples: usize,
) -> Result<f64> {
    let p = circle_fourier(s, m, circle_samples)?;
    let f1 = s.f1(m);
    let nu1 = (2.0 * f1 / m.mu1).sqrt();
    // Σ_{k≠0} p̂_k/(ik) at phase 0 = Σ_{k≥1} 2 Im(p̂_k)/k for a real series.
    let mut acc = 0.0;
    for (k, &(_re, im)) in p.iter().enumerate().skip(1) {
        acc += 2.0 * im / k as f64;
    }
    Ok(acc / nu1)
}

/// Fourier coefficients `p̂_k = (1/n) Σ_j P(φ_j) e^{−ikφ_j}` for
/// `k = 0..n/2` of the coupling over the integrable circle through `s`,
/// as `(re, im)` pairs. The circle is the closed-form oscillator orbit
/// in `(z, w)` with the outer pair frozen; φ is the fast angle, which
/// advances by `2π` over one oscillator period.
fn circle_fourier(
    s: &RegularizedState,
    m: &MassConfig,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "circle sampling needs at least 8 points, got {n}"
        )));
    }
    let f1 = s.f1(m);
    if !(f1 > 0.0) {
        return Err(Error::HyperbolicOuter(f1));
    }
    let nu1 = (2.0 * f1 / m.mu1).sqrt();
    let period = 2.0 * PI / nu1;
    let values = circle_coupling_values(s, m, f1, period, n)?;
    let nf = n as f64;
    let mut coeffs = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &v) in values.iter().enumerate() {
            let ph = 2.0 * PI * (j * k) as f64 / nf;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        coeffs.push((re / nf, im / nf));
    }
    Ok(coeffs)
}

/// Coupling values `ℱ_pert` at `n` equispaced points of the integrable
/// circle through `s` (outer pair frozen).
fn circle_coupling_values(
    s: &RegularizedState,
    m: &MassConfig,
    f1: f64,
    period: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let tau = period * j as f64 / n as f64;
        let ks = crate::elements::oscillator_propagate(&s.ks, f1, m.mu1, tau);
        let z2 = ks.z.norm_sq();
        let v = if z2 == 0.0 {
            0.0
        } else {
            z2 * pert_value(hopf(&ks.z)?, s.q2, m)?
        };
        values.push(v);
    }
    Ok(values)
}

/// Relative finite-difference step for gradients of the generator.
const HAT_GRADIENT_STEP: f64 = 1e-5;
/// Fixed Runge–Kutta steps for the time-one map of the generator flow.
const TIME_ONE_STEPS: usize = 8;

/// Hamiltonian vector field of the tabulated generator at a packed
/// state, by central differences over the 14 dynamical coordinates and
/// the symplectic pairing (`dz = +∂/∂w`, `dw = −∂/∂z`, `dq2 = +∂/∂p2`,
/// `dp2 = −∂/∂q2`). The time slot is carried unchanged.
fn hat_field(
    y: &[f64; STATE_DIM],
    f_param: f64,
    m: &MassConfig,
    n: usize,
) -> Result<[f64; STATE_DIM]> {
    let mut grad = [0.0_f64; 14];
    for (c, g) in grad.iter_mut().enumerate() {
        let step = HAT_GRADIENT_STEP * y[c].abs().max(1.0);
        let mut yp = *y;
        let mut ym = *y;
        yp[c] += step;
        ym[c] -= step;
        let hp = elimination_hat(&unpack_state(&yp, f_param), m, n)?;
        let hm = elimination_hat(&unpack_state(&ym, f_param), m, n)?;
        *g = (hp - hm) / (2.0 * step);
    }
    let mut field = [0.0_f64; STATE_DIM];
    for i in 0..4 {
        field[i] = grad[4 + i];
        field[4 + i] = -grad[i];
    }
    for i in 0..3 {
        field[8 + i] = grad[11 + i];
        field[11 + i] = -grad[8 + i];
    }
    Ok(field)
}

/// Time-one map of the generator's Hamiltonian flow by fixed-step
/// fourth-order Runge–Kutta. The field is of the size of the coupling,
/// so a handful of steps leaves discretization far below the
/// non-commutativity terms the map is allowed to carry.
fn hat_time_one_map(
    y0: &[f64; STATE_DIM],
    f_param: f64,
    m: &MassConfig,
    n: usize,
) -> Result<[f64; STATE_DIM]> {
    let mut y = *y0;
    let h = 1.0 / TIME_ONE_STEPS as f64;
    for _ in 0..TIME_ONE_STEPS {
        let k1 = hat_field(&y, f_param, m, n)?;
        let mut y2 = y;
        for c in 0..STATE_DIM {
            y2[c] += 0.5 * h * k1[c];
        }
        let k2 = hat_field(&y2, f_param, m, n)?;
        let mut y3 = y;
        for c in 0..STATE_DIM {
            y3[c] += 0.5 * h * k2[c];
        }
        let k3 = hat_field(&y3, f_param, m, n)?;
        let mut y4 = y;
        for c in 0..STATE_DIM {
            y4[c] += h * k3[c];
        }
        let k4 = hat_field(&y4, f_param, m, n)?;
        for c in 0..STATE_DIM {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    Ok(y)
}

/// Diagnostics of the elimination at one base state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationSample {
    /// Semi-major-axis ratio of the base state.
    pub alpha: f64,
    /// Half peak-to-peak oscillation of the generator over the fast
    /// circle; scales as `α³`.
    pub hat_amplitude: f64,
    /// Quadrature mean of the generator over the circle; zero by
    /// construction, reported as a sanity figure.
    pub hat_mean: f64,
    /// Half peak-to-peak oscillation of the full Hamiltonian over the
    /// raw fast circle — the before picture, of size `α³`.
    pub raw_amplitude: f64,
    /// Half peak-to-peak oscillation of the full Hamiltonian composed
    /// with the time-one generator flow over the same circle — the
    /// after picture; scales as `α^{9/2}`.
    pub residual_amplitude: f64,
}

/// Full elimination report over a sweep of base states.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationReport {
    /// One diagnostic row per base state, in input order.
    pub samples: Vec<EliminationSample>,
    /// Log-log slope of `hat_amplitude` against `alpha`.
    pub amplitude_exponent: f64,
    /// Log-log slope of `residual_amplitude` against `alpha`.
    pub residual_exponent: f64,
}

/// Run the first-elimination diagnostic over a sweep of base states
/// (typically one per semi-major-axis ratio): tabulate the generator on
/// each fast circle, apply its time-one flow, and measure how much
/// fast-angle oscillation of the full Hamiltonian survives. The two
/// reported exponents are least-squares slopes in log-log coordinates.
///
/// # Errors
///
/// [`Error::TooShort`] with fewer than two states; propagated element
/// or coupling errors from degenerate inputs.
pub fn elimination_generator(
    states: &[RegularizedState],
    m: &MassConfig,
    circle_samples: usize,
) -> Result<EliminationReport> {
    if states.len() < 2 {
        return Err(Error::TooShort(format!(
            "exponent fits need at least 2 base states, got {}",
            states.len()
        )));
    }
    let mut samples = Vec::with_capacity(states.len());
    for s in states {
        let inner = crate::elements::inner_elements_from_ks(s, m)?;
        let outer = crate::elements::delaunay_from_outer_state(s.q2, s.p2, m)?;
        let a2 = (outer.big_l2 / m.mu2).powi(2) / m.big_m2;
        let alpha = inner.a1 / a2;

        let f1 = s.f1(m);
        if !(f1 > 0.0) {
            return Err(Error::HyperbolicOuter(f1));
        }
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let period = 2.0 * PI / nu1;

        // The generator and the full Hamiltonian on the fast circle.
        let n = circle_samples;
        let mut hat_min = f64::INFINITY;
        let mut hat_max = f64::NEG_INFINITY;
        let mut hat_sum = 0.0;
        let mut raw_min = f64::INFINITY;
        let mut raw_max = f64::NEG_INFINITY;
        let mut res_min = f64::INFINITY;
        let mut res_max = f64::NEG_INFINITY;
        // Fewer circle points suffice for amplitude readings than for
        // the Fourier tabulation each evaluation performs internally.
        let probe = 16.min(n);
        for j in 0..probe {
            let tau = period * j as f64 / probe as f64;
            let ks = crate::elements::oscillator_propagate(&s.ks, f1, m.mu1, tau);
            let sj = RegularizedState {
                ks,
                q2: s.q2,
                p2: s.p2,
                f: s.f,
            };
            let hat = elimination_hat(&sj, m, n)?;
            hat_min = hat_min.min(hat);
            hat_max = hat_max.max(hat);
            hat_sum += hat;
            let raw = eval_regularized(&sj, m)?.total();
            raw_min = raw_min.min(raw);
            raw_max = raw_max.max(raw);
            let y = pack_state(&sj, 0.0);
            let mapped = hat_time_one_map(&y, s.f, m, n)?;
            let transformed = eval_regularized(&unpack_state(&mapped, s.f), m)?.total();
            res_min = res_min.min(transformed);
            res_max = res_max.max(transformed);
        }
        samples.push(EliminationSample {
            alpha,
            hat_amplitude: 0.5 * (hat_max - hat_min),
            hat_mean: hat_sum / probe as f64,
            raw_amplitude: 0.5 * (raw_max - raw_min),
            residual_amplitude: 0.5 * (res_max - res_min),
        });
    }

    let slope = |pick: fn(&EliminationSample) -> f64| -> f64 {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .map(|s| (s.alpha.ln(), pick(s).max(f64::MIN_POSITIVE).ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (x, y) in &pts {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        sxy / sxx
    };
    Ok(EliminationReport {
        amplitude_exponent: slope(|s| s.hat_amplitude),
        residual_exponent: slope(|s| s.residual_amplitude),
        samples,
    })
}

// ---------------------------------------------------------------------------
// Bordered Hessian
// ---------------------------------------------------------------------------

/// Determinant of the bordered Hessian `[[0, ∇Kᵀ], [∇K, ∇²K]]` of a
/// scalar function of `p` action variables, by central finite
/// differences. A nonzero value is the iso-energetic non-degeneracy
/// condition: the frequency map restricted to an energy level is a local
/// diffeomorphism up to scale.
///
/// # Errors
///
/// Propagates evaluation errors of `k`; [`Error::InvalidParameter`] for
/// an empty point.
pub fn bordered_hessian<F>(mut k: F, point: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let p = point.len();
    if p == 0 {
        return Err(Error::InvalidParameter(
            "bordered Hessian needs at least one variable".into(),
        ));
    }
    // Second-derivative-friendly step: eps^(1/4) scale balances
    // truncation against cancellation in the double differences.
    let steps: Vec<f64> = point
        .iter()
        .map(|&x| 1e-4 * x.abs().max(1.0))
        .collect();
    let mut grad = vec![0.0_f64; p];
    for i in 0..p {
        let mut xp = point.to_vec();
        let mut xm = point.to_vec();
        xp[i] += steps[i];
        xm[i] -= steps[i];
        grad[i] = (k(&xp)? - k(&xm)?) / (2.0 * steps[i]);
    }
    let f0 = k(point)?;
    let mut hess = nalgebra::DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let hij = if i == j {
                let mut xp = point.to_vec();
                let mut xm = point.to_vec();
                xp[i] += steps[i];
                xm[i] -= steps[i];
                (k(&xp)? - 2.0 * f0 + k(&xm)?) / (steps[i] * steps[i])
            } else {
                let mut xpp = point.to_vec();
                let mut xpm = point.to_vec();
                let mut xmp = point.to_vec();
                let mut xmm = point.to_vec();
                xpp[i] += steps[i];
                xpp[j] += steps[j];
                xpm[i] += steps[i];
                xpm[j] -= steps[j];
                xmp[i] -= steps[i];
                xmp[j] += steps[j];
                xmm[i] -= steps[i];
                xmm[j] -= steps[j];
                (k(&xpp)? - k(&xpm)? - k(&xmp)? + k(&xmm)?) / (4.0 * steps[i] * steps[j])
            };
            hess[(i, j)] = hij;
            hess[(j, i)] = hij;
        }
    }
    let mut bordered = nalgebra::DMatrix::<f64>::zeros(p + 1, p + 1);
    for i in 0..p {
        bordered[(0, i + 1)] = grad[i];
        bordered[(i + 1, 0)] = grad[i];
        for j in 0..p {
            bordered[(i + 1, j + 1)] = hess[(i, j)];
        }
    }
    Ok(bordered.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{ks_inverse, CartesianPair};
    use crate::threebody::f1_of_l2;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn weyl(state: &mut f64) -> f64 {
        *state = (*state + FRAC_1_SQRT_2).fract();
        *state
    }

    fn masses() -> MassConfig {
        MassConfig::new(1.0, 0.8, 1.3).unwrap()
    }

    /// Masses with `μ_quad = m0 m1 m2/(m0+m1) = 1`, so closed-form spot
    /// values come out as bare rationals.
    fn unit_quad_masses() -> MassConfig {
        MassConfig::new(2.0, 2.0, 1.0).unwrap()
    }

    /// A comfortably interior secular point.
    fn interior_point() -> SecularPoint {
        SecularPoint::new(0.6, 0.8, 1.1, 0.3, 1.0, 1.4, 1.3).unwrap()
    }

    #[test]
    fn physical_region_is_enforced() {
        assert!(SecularPoint::new(0.6, 0.0, 1.1, 0.0, 1.0, 1.4, 1.3).is_ok());
        // Rectilinear on the cover: G1 = 0 with C = G2.
        assert!(SecularPoint::new(0.0, 0.2, 1.0, 0.0, 1.0, 1.4, 1.0).is_ok());
        // Coplanar boundary: C = G1 + G2.
        assert!(SecularPoint::new(0.5, 0.2, 1.0, 0.0, 1.0, 1.4, 1.5).is_ok());
        // Triangle violations and bad parameters.
        assert!(matches!(
            SecularPoint::new(0.1, 0.0, 1.0, 0.0, 1.0, 1.4, 1.5),
            Err(Error::NonPhysicalPoint(_))
        ));
        assert!(matches!(
            SecularPoint::new(2.6, 0.0, 1.0, 0.0, 3.0, 1.4, 1.0),
            Err(Error::NonPhysicalPoint(_))
        ));
        assert!(matches!(
            SecularPoint::new(0.6, 0.0, 1.5, 0.0, 1.0, 1.4, 1.3),
            Err(Error::NonPhysicalPoint(_)) // G2 > L2
        ));
        assert!(matches!(
            SecularPoint::new(0.6, 0.0, -1.0, 0.0, 1.0, 1.4, 1.3),
            Err(Error::NonPhysicalPoint(_))
        ));
        // average_pert surfaces the same validation.
        let bad = SecularPoint {
            big_g1: 0.1,
            g1: 0.0,
            big_g2: 1.0,
            g2: 0.0,
            big_l1: 1.0,
            big_l2: 1.4,
            c: 1.5,
        };
        assert!(matches!(
            average_pert(&bad, 1.0, 0.05, &masses(), 64),
            Err(Error::NonPhysicalPoint(_))
        ));
    }

    #[test]
    fn frames_recompose_the_vertical_total_angular_momentum() {
        let mut seed = 0.31;
        for _ in 0..20 {
            let g1 = 0.2 + 0.7 * weyl(&mut seed);
            let g2m = 0.8 + 0.6 * weyl(&mut seed);
            // C somewhere strictly inside the triangle bounds.
            let lo = (g2m - g1).abs() + 0.01;
            let hi = g2m + g1 - 0.01;
            let c = lo + (hi - lo) * weyl(&mut seed);
            let sp = SecularPoint::new(
                g1,
                2.0 * PI * weyl(&mut seed),
                g2m,
                2.0 * PI * weyl(&mut seed),
                1.0,
                1.6,
                c,
            )
            .unwrap();
            let (r1, r2) = secular_frames(&sp).unwrap();
            let total = r1 * Vec3::z() * sp.big_g1 + r2 * Vec3::z() * sp.big_g2;
            assert!(total.x.abs() < 1e-12 && total.y.abs() < 1e-12);
            assert!((total.z - sp.c).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrupolar_spot_values_on_the_cover() {
        let m = unit_quad_masses();
        assert!((m.mu_quad - 1.0).abs() < 1e-15);
        let at = |g1_angle: f64| {
            let sp = SecularPoint::new(0.0, g1_angle, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
            f_quad(&sp, &m).unwrap()
        };
        assert!((at(0.0) - (-0.625)).abs() < 1e-15);
        assert!((at(PI / 2.0) - 1.25).abs() < 1e-15);

        let sp_off = SecularPoint {
            big_g1: 0.0,
            g1: 0.0,
            big_g2: 1.0,
            g2: 0.0,
            big_l1: 1.0,
            big_l2: 1.4,
            c: 1.2,
        };
        assert!(matches!(
            f_quad(&sp_off, &m),
            Err(Error::SingularCoordinates(_))
        ));
        assert!(matches!(
            nu_quad2(&sp_off, &m),
            Err(Error::SingularCoordinates(_))
        ));
    }

    #[test]
    fn outer_frequency_spot_values_on_the_cover() {
        let m = unit_quad_masses();
        let at = |g1_angle: f64| {
            let sp = SecularPoint::new(0.0, g1_angle, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
            nu_quad2(&sp, &m).unwrap()
        };
        assert!((at(0.0) - 1.875).abs() < 1e-15); // +15/8
        assert!((at(PI / 2.0) - (-5.625)).abs() < 1e-15); // −45/8
    }

    #[test]
    fn outer_frequency_matches_finite_differences_inside_the_region() {
        let m = masses();
        let mut seed = 0.53;
        for _ in 0..25 {
            // Interior points with G1 well above |C − G2| so the G2
            // perturbations stay physical.
            let g1 = 0.5 + 0.4 * weyl(&mut seed);
            let g2m = 0.9 + 0.4 * weyl(&mut seed);
            let c = g2m + (2.0 * weyl(&mut seed) - 1.0) * 0.3 * g1;
            let sp = SecularPoint::new(
                g1,
                2.0 * PI * weyl(&mut seed),
                g2m,
                0.0,
                1.0,
                1.5,
                c,
            )
            .unwrap();
            let analytic = nu_quad2(&sp, &m).unwrap();
            let h = 1e-5 * g2m;
            let fd_at = |step: f64| {
                let mut up = sp;
                up.big_g2 += step;
                let mut dn = sp;
                dn.big_g2 -= step;
                (f_quad(&up, &m).unwrap() - f_quad(&dn, &m).unwrap()) / (2.0 * step)
            };
            // One Richardson refinement of the central difference.
            let d_h = fd_at(h);
            let d_h2 = fd_at(0.5 * h);
            let fd = (4.0 * d_h2 - d_h) / 3.0;
            assert!(
                (analytic - fd).abs() < 1e-8 * (1.0 + analytic.abs()),
                "analytic {analytic:.12e} vs finite differences {fd:.12e}"
            );
        }
    }

    #[test]
    fn quadrupolar_form_ignores_g2_but_responds_to_big_g2() {
        let m = masses();
        let base = interior_point();
        let f0 = f_quad(&base, &m).unwrap();
        for k in 1..8 {
            let mut sp = base;
            sp.g2 = 2.0 * PI * k as f64 / 8.0;
            assert_eq!(f_quad(&sp, &m).unwrap(), f0);
        }
        // ∂f/∂G2 is substantially nonzero across a grid.
        let mut max_rate: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let g1 = 0.3 + 0.1 * i as f64;
                let g1_angle = PI * j as f64 / 4.0;
                let sp = SecularPoint::new(g1, g1_angle, 1.1, 0.0, 1.0, 1.4, 1.3).unwrap();
                max_rate = max_rate.max(nu_quad2(&sp, &m).unwrap().abs());
            }
        }
        assert!(max_rate > 0.1, "largest |∂f_quad/∂G2| = {max_rate}");
    }

    #[test]
    fn octupolar_closed_form_has_the_stated_structure() {
        assert_eq!(octupolar_coplanar(0.0, 0.5, 0.7), 0.0);
        assert!(octupolar_coplanar(0.8, 0.5, PI / 2.0).abs() < 1e-15);
        let v = octupolar_coplanar(0.8, 0.4, 0.9);
        assert!((octupolar_coplanar(0.8, 0.4, 0.9 + PI) + v).abs() < 1e-15);
        // Independent arithmetic route for the reference value at
        // e1 = 1, e2 = 1/2, dg = 0.
        let reference = -(15.0 * 7.0 * 0.5 / 64.0) / (0.75_f64.powi(2) * 0.75_f64.sqrt());
        let direct = octupolar_coplanar(1.0, 0.5, 0.0);
        assert!((direct - reference).abs() < 1e-14);
        assert!((direct - (-1.6839382851364084)).abs() < 1e-12);
    }

    #[test]
    fn averaging_is_spectrally_converged_at_moderate_node_counts() {
        let m = masses();
        let sp = interior_point();
        let a64 = average_pert(&sp, 1.0, 0.05, &m, 64).unwrap();
        let a128 = average_pert(&sp, 1.0, 0.05, &m, 128).unwrap();
        assert!(
            (a64 - a128).abs() < 1e-12 * a128.abs(),
            "node doubling moved the average by {:.3e}",
            (a64 - a128).abs() / a128.abs()
        );
    }

    #[test]
    fn averaging_is_rotation_invariant() {
        let m = masses();
        let sp = interior_point();
        let (r1, r2) = secular_frames(&sp).unwrap();
        let (e1, e2) = (sp.e1(), sp.e2());
        let base = average_with_frames(&r1, &r2, e1, e2, 1.0, 20.0, &m, 64, false).unwrap();
        let mut seed = 0.77;
        for _ in 0..5 {
            let axis = Vec3::new(
                2.0 * weyl(&mut seed) - 1.0,
                2.0 * weyl(&mut seed) - 1.0,
                2.0 * weyl(&mut seed) - 1.0,
            );
            let rot = Rot3::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                2.0 * PI * weyl(&mut seed),
            );
            let rotated =
                average_with_frames(&(rot * r1), &(rot * r2), e1, e2, 1.0, 20.0, &m, 64, false)
                    .unwrap();
            assert!(
                (rotated - base).abs() < 1e-13 * base.abs(),
                "rotation moved the average by {:.3e}",
                (rotated - base).abs() / base.abs()
            );
        }
    }

    #[test]
    fn quadrupolar_coefficient_emerges_from_the_average() {
        let m = masses();
        // Interior point and a rectilinear-cover point (e1 = 1).
        let points = [
            interior_point(),
            SecularPoint::new(0.0, 0.9, 1.1, 0.4, 1.0, 1.4, 1.1).unwrap(),
        ];
        for sp in &points {
            let expansion = alpha_expansion(sp, &m, 0.02, 96).unwrap();
            let closed = f_quad(sp, &m).unwrap();
            assert!(
                (expansion.c2 - closed).abs() < 1e-6 * closed.abs(),
                "c2 = {:.10e} vs closed form {:.10e}",
                expansion.c2,
                closed
            );
            assert!(
                expansion.residual < tol::ALPHA_FIT_RESIDUAL_TOL,
                "fit residual {:.3e}",
                expansion.residual
            );
        }
    }

    #[test]
    fn equal_inner_masses_kill_the_octupolar_coefficient_exactly() {
        let m = MassConfig::new(1.4, 1.4, 0.9).unwrap();
        let sp = interior_point();
        let expansion = alpha_expansion(&sp, &m, 0.02, 64).unwrap();
        assert_eq!(expansion.c3, 0.0);
        assert!(expansion.c2.abs() > 0.0);
    }

    #[test]
    fn octupolar_coefficient_tracks_the_coplanar_closed_form() {
        let m = masses();
        // Coplanar points: C = G1 + G2, apse offset dg = g1 − g2 up to
        // the half-turn the node convention inserts; the overall
        // constant (and that sign) is fitted once over the grid.
        let l1 = 1.0;
        let l2 = 1.5;
        let mut measured = Vec::new();
        let mut predicted = Vec::new();
        for &e1 in &[0.4_f64, 0.8] {
            for &e2 in &[0.3_f64, 0.5] {
                for k in 0..4 {
                    let dg = PI * k as f64 / 2.0 + 0.35;
                    let big_g1 = l1 * (1.0 - e1 * e1).sqrt();
                    let big_g2 = l2 * (1.0 - e2 * e2).sqrt();
                    let sp = SecularPoint::new(
                        big_g1,
                        dg,
                        big_g2,
                        0.0,
                        l1,
                        l2,
                        big_g1 + big_g2,
                    )
                    .unwrap();
                    let expansion = alpha_expansion(&sp, &m, 0.02, 96).unwrap();
                    measured.push(expansion.c3);
                    predicted.push(octupolar_coplanar(e1, e2, dg));
                }
            }
        }
        // Least-squares constant through the origin.
        let num: f64 = measured.iter().zip(&predicted).map(|(y, p)| y * p).sum();
        let den: f64 = predicted.iter().map(|p| p * p).sum();
        let k_fit = num / den;
        assert!(k_fit.abs() > 0.0);
        let scale = measured.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let mut worst: f64 = 0.0;
        for (y, p) in measured.iter().zip(&predicted) {
            worst = worst.max((y - k_fit * p).abs() / scale);
        }
        assert!(
            worst < 1e-4,
            "coplanar octupolar shape misfit {worst:.3e} (constant {k_fit:.6e})"
        );
    }

    /// Hierarchical base state for the elimination sweep: fixed inner
    /// oscillator (identical across ratios), outer ellipse at `a2 = 1/α`,
    /// with the energy parameter chosen so the inner frequency is the
    /// same at every ratio.
    fn sweep_state(m: &MassConfig, alpha: f64) -> RegularizedState {
        let rot = |node: f64, incl: f64, argp: f64| {
            Rot3::from_axis_angle(&Vec3::z_axis(), node)
                * Rot3::from_axis_angle(&Vec3::x_axis(), incl)
                * Rot3::from_axis_angle(&Vec3::z_axis(), argp)
        };
        let ellipse = |a: f64, e: f64, r: &Rot3, u: f64, gm: f64, mu: f64| {
            let eps = (1.0 - e * e).sqrt();
            let rad = a * (1.0 - e * u.cos());
            let pos = r * Vec3::new(a * (u.cos() - e), a * eps * u.sin(), 0.0);
            let vel = r * Vec3::new(-u.sin(), eps * u.cos(), 0.0) * ((gm * a).sqrt() / rad);
            (pos, vel * mu)
        };
        let r1 = rot(0.3, 0.4, 0.7);
        let r2 = rot(1.1, 0.2, 0.4);
        let (q1, p1) = ellipse(1.0, 0.5, &r1, 0.9, m.big_m1, m.mu1);
        let (q2, p2) = ellipse(1.0 / alpha, 0.2, &r2, 2.1, m.big_m2, m.mu2);
        let ks = ks_inverse(&CartesianPair { q: q1, p: p1 }).unwrap();
        let outer_energy = p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / q2.norm();
        let f = 1.2 - outer_energy; // f1 = 1.2 at every ratio
        RegularizedState { ks, p2, q2, f }
    }

    #[test]
    fn generator_has_zero_mean_and_integrates_the_coupling() {
        let m = masses();
        let s = sweep_state(&m, 0.02);
        let n = 64;
        let f1 = s.f1(&m);
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let period = 2.0 * PI / nu1;

        // Zero mean over the circle.
        let mut mean = 0.0;
        let mut pert_mean = 0.0;
        for j in 0..n {
            let tau = period * j as f64 / n as f64;
            let ks = crate::elements::oscillator_propagate(&s.ks, f1, m.mu1, tau);
            let sj = RegularizedState {
                ks,
                q2: s.q2,
                p2: s.p2,
                f: s.f,
            };
            mean += elimination_hat(&sj, &m, n).unwrap();
            pert_mean += eval_regularized(&sj, &m).unwrap().pert;
        }
        mean /= n as f64;
        pert_mean /= n as f64;
        let scale = eval_regularized(&s, &m).unwrap().pert.abs();
        assert!(
            mean.abs() < 1e-12 * scale.max(1e-30),
            "generator mean {mean:.3e} against coupling scale {scale:.3e}"
        );

        // dĤ/dτ along the integrable circle equals the zero-mean part of
        // the coupling.
        let dtau = 1e-4 * period;
        let fwd = {
            let ks = crate::elements::oscillator_propagate(&s.ks, f1, m.mu1, dtau);
            elimination_hat(
                &RegularizedState {
                    ks,
                    q2: s.q2,
                    p2: s.p2,
                    f: s.f,
                },
                &m,
                n,
            )
            .unwrap()
        };
        let bwd = {
            let ks = crate::elements::oscillator_propagate(&s.ks, f1, m.mu1, -dtau);
            elimination_hat(
                &RegularizedState {
                    ks,
                    q2: s.q2,
                    p2: s.p2,
                    f: s.f,
                },
                &m,
                n,
            )
            .unwrap()
        };
        let rate = (fwd - bwd) / (2.0 * dtau);
        let oscillating = eval_regularized(&s, &m).unwrap().pert - pert_mean;
        assert!(
            (rate - oscillating).abs() < 1e-6 * scale,
            "dĤ/dτ = {rate:.9e} vs oscillating coupling {oscillating:.9e}"
        );
    }

    #[test]
    fn elimination_residual_scales_with_the_stated_exponents() {
        let m = masses();
        let states: Vec<RegularizedState> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&alpha| sweep_state(&m, alpha))
            .collect();
        let report = elimination_generator(&states, &m, 48).unwrap();
        for s in &report.samples {
            assert!(
                s.hat_mean.abs() < 1e-12 * s.hat_amplitude.max(1e-30),
                "mean {:.3e} vs amplitude {:.3e}",
                s.hat_mean,
                s.hat_amplitude
            );
            assert!(
                s.residual_amplitude < 0.1 * s.raw_amplitude,
                "elimination did not reduce the oscillation at α = {}",
                s.alpha
            );
        }
        assert!(
            (report.amplitude_exponent - 3.0).abs() < 0.2,
            "generator amplitude exponent {:.3}",
            report.amplitude_exponent
        );
        assert!(
            (report.residual_exponent - 4.5).abs() < 0.3,
            "residual exponent {:.3}",
            report.residual_exponent
        );
        // Too few states for a fit.
        assert!(matches!(
            elimination_generator(&states[..1], &m, 48),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn bordered_hessian_reference_values() {
        // Quadratic in two actions.
        let det = bordered_hessian(
            |x: &[f64]| Ok(0.5 * (x[0] * x[0] + x[1] * x[1])),
            &[1.0, 1.0],
        )
        .unwrap();
        assert!((det - (-2.0)).abs() < 1e-6, "determinant {det}");
        // Linear in one action: −(∂K)².
        let det = bordered_hessian(|x: &[f64]| Ok(3.0 * x[0] + 1.0), &[0.4]).unwrap();
        assert!((det - (-9.0)).abs() < 1e-6, "determinant {det}");
        assert!(matches!(
            bordered_hessian(|_x: &[f64]| Ok(0.0), &[]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn integrable_part_is_isoenergetically_nondegenerate() {
        let m = masses();
        // ℱ_Kep as a function of the actions (𝒫0, L2) at fixed energy
        // parameter: 𝒫0·√(2 f1(L2)/μ1) − μ1 M1.
        let f_param = 2.0;
        let kep = |x: &[f64]| -> Result<f64> {
            let p0 = x[0];
            let l2 = x[1];
            let f1 = f1_of_l2(l2, f_param, &m);
            if !(f1 > 0.0) {
                return Err(Error::HyperbolicOuter(f1));
            }
            Ok(p0 * (2.0 * f1 / m.mu1).sqrt() - m.mu1 * m.big_m1)
        };
        for &p0 in &[0.5, 1.0, 2.0] {
            for &l2 in &[2.0, 3.0, 5.0] {
                let det = bordered_hessian(kep, &[p0, l2]).unwrap();
                assert!(
                    det.abs() > 1e-6,
                    "degenerate bordered Hessian {det:.3e} at 𝒫0 = {p0}, L2 = {l2}"
                );
            }
        }
    }
}
