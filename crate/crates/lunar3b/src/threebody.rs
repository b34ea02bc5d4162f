//! Masses, Jacobi coordinates, and the two Hamiltonians of the
//! hierarchical three-body problem.
//!
//! # Setting
//!
//! Three point masses `m0, m1, m2` attract each other with gravitational
//! constant 1. Bodies 0 and 1 form the tight inner pair; body 2 moves on a
//! wide outer orbit. In Jacobi coordinates the inner vector `Q1` joins body
//! 0 to body 1, the outer vector `Q2` joins the inner pair's barycenter to
//! body 2, and (after fixing the center of mass) the Hamiltonian splits as
//!
//! ```text
//! F = F_Kep + F_pert,
//! F_Kep  = |P1|²/(2μ1) + |P2|²/(2μ2) − μ1 M1/|Q1| − μ2 M2/|Q2|,
//! F_pert = −μ1 m2 [ (1/σ0)(1/|Q2 − σ0 Q1| − 1/|Q2|)
//!                 + (1/σ1)(1/|Q2 + σ1 Q1| − 1/|Q2|) ] .
//! ```
//!
//! `F_Kep` is two uncoupled Kepler problems; `F_pert` collects the tidal
//! coupling and decays like `|Q1|²/|Q2|³`.
//!
//! # Regularization
//!
//! On the energy level `F = −f` the inner double collision is removed by
//! the quaternionic square-root of [`crate::quat`] together with the time
//! change `dt = |Q1| dτ`. The flow of
//!
//! ```text
//! ℱ = ℱ_Kep + ℱ_pert,
//! ℱ_Kep  = |w|²/(8μ1) + f₁(state)·|z|² − μ1 M1,
//! ℱ_pert = |z|² · F_pert(z̄iz, Q2),
//! f₁(state) = f + |P2|²/(2μ2) − μ2 M2/|Q2|,
//! ```
//!
//! on `{ℱ = 0, BL = 0}` reproduces the physical flow up to the time
//! change; `ℱ_Kep` is four harmonic oscillators in `(z, w)` slowed down by
//! the outer Kepler motion, and every term is finite at the collision
//! `z = 0`.

use crate::error::{Error, Result};
use crate::quat::{hopf, KSPoint};
use crate::Vec3;

/// The three masses together with the derived constants of the Jacobi
/// splitting.
///
/// All derived quantities are precomputed at construction:
/// `σ0 = m0/(m0+m1)`, `σ1 = m1/(m0+m1)` (barycentric weights of the inner
/// pair), the reduced masses `μ1 = (1/m0 + 1/m1)⁻¹` and
/// `μ2 = (1/(m0+m1) + 1/m2)⁻¹`, the total masses `M1 = m0 + m1` and
/// `M2 = m0 + m1 + m2`, and the mass prefactor
/// `μ_quad = m0 m1 m2/(m0+m1)` of the leading secular term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassConfig {
    /// First inner mass.
    pub m0: f64,
    /// Second inner mass.
    pub m1: f64,
    /// Outer mass.
    pub m2: f64,
    /// Inner barycentric weight of body 0: `m0/(m0+m1)`.
    pub sigma0: f64,
    /// Inner barycentric weight of body 1: `m1/(m0+m1)`.
    pub sigma1: f64,
    /// Reduced mass of the inner pair.
    pub mu1: f64,
    /// Reduced mass of the outer split.
    pub mu2: f64,
    /// Total inner mass `m0 + m1`.
    pub big_m1: f64,
    /// Total mass `m0 + m1 + m2`.
    pub big_m2: f64,
    /// Mass prefactor `m0 m1 m2/(m0+m1)` of the quadrupolar secular term.
    pub mu_quad: f64,
}

impl MassConfig {
    /// Build the configuration from the three masses.
    ///
    /// # Errors
    ///
    /// [`Error::NonPositiveMass`] unless all masses are strictly positive
    /// and finite.
    pub fn new(m0: f64, m1: f64, m2: f64) -> Result<Self> {
        for m in [m0, m1, m2] {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::NonPositiveMass(m));
            }
        }
        let big_m1 = m0 + m1;
        let big_m2 = big_m1 + m2;
        Ok(Self {
            m0,
            m1,
            m2,
            sigma0: m0 / big_m1,
            sigma1: m1 / big_m1,
            mu1: m0 * m1 / big_m1,
            mu2: big_m1 * m2 / big_m2,
            big_m1,
            big_m2,
            mu_quad: m0 * m1 * m2 / big_m1,
        })
    }
}

/// State of the two fictitious Kepler problems in Jacobi coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiState {
    /// Momentum conjugate to `q1`.
    pub p1: Vec3,
    /// Inner relative position (body 1 minus body 0).
    pub q1: Vec3,
    /// Momentum conjugate to `q2` (equal to the outer body's momentum).
    pub p2: Vec3,
    /// Outer position (body 2 minus the inner barycenter).
    pub q2: Vec3,
}

/// State of the regularized system: quaternionic inner pair, Cartesian
/// outer pair, and the energy parameter `f` fixing the level `F = −f` on
/// which the time change is performed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedState {
    /// Inner state `(z, w)` on the zero level of the bilinear form.
    pub ks: KSPoint,
    /// Outer momentum.
    pub p2: Vec3,
    /// Outer position.
    pub q2: Vec3,
    /// Energy parameter: the physical flow is recovered on `F = −f`.
    pub f: f64,
}

impl RegularizedState {
    /// Checked constructor.
    ///
    /// # Errors
    ///
    /// [`Error::OuterCollision`] if `q2 = 0`;
    /// [`Error::InvalidParameter`] if `f` is not a positive finite number.
    /// The `BL = 0` condition on `ks` is the responsibility of
    /// [`KSPoint::new`].
    pub fn new(ks: KSPoint, p2: Vec3, q2: Vec3, f: f64) -> Result<Self> {
        if q2.norm_squared() == 0.0 {
            return Err(Error::OuterCollision);
        }
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "energy parameter f must be positive and finite, got {f}"
            )));
        }
        Ok(Self { ks, p2, q2, f })
    }

    /// Effective oscillator parameter
    /// `f₁ = f + |P2|²/(2μ2) − μ2 M2/|Q2|` as a function of the state.
    ///
    /// On the level `ℱ = 0` this equals minus the inner two-body energy;
    /// admissible (hierarchical) states have `f₁ > 0`, making the
    /// regularized inner problem four harmonic oscillators of frequency
    /// `√(2 f₁/μ1) / 2`.
    pub fn f1(&self, m: &MassConfig) -> f64 {
        self.f + self.p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / self.q2.norm()
    }
}

/// Totals-plus-parts result of a Hamiltonian evaluation.
///
/// Estimates and tests address the Keplerian and perturbing parts
/// individually, so evaluators return both rather than only their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianParts {
    /// Keplerian (integrable) part.
    pub kep: f64,
    /// Perturbing (coupling) part.
    pub pert: f64,
}

impl HamiltonianParts {
    /// The full Hamiltonian value `kep + pert`.
    pub fn total(&self) -> f64 {
        self.kep + self.pert
    }
}

/// Jacobi coordinates of an inertial three-body state.
///
/// Input: inertial momenta `p[j]` and positions `q[j]`, `j = 0, 1, 2`.
/// The map is linear: `Q1 = q1 − q0`, `Q2 = q2 − σ0 q0 − σ1 q1`,
/// `P1 = p1 + σ1 p2`, `P2 = p2`. The total momentum `P0 = p0 + p1 + p2`
/// may be nonzero; reduction (setting `P0 = 0` and discarding the center of
/// mass) is the caller's choice and is what [`jacobi_to_inertial`]
/// assumes when reconstructing.
pub fn jacobi_from_inertial(p: &[Vec3; 3], q: &[Vec3; 3], m: &MassConfig) -> JacobiState {
    JacobiState {
        p1: p[1] + m.sigma1 * p[2],
        q1: q[1] - q[0],
        p2: p[2],
        q2: q[2] - m.sigma0 * q[0] - m.sigma1 * q[1],
    }
}

/// Inverse of [`jacobi_from_inertial`] on the reduced space: reconstruct
/// inertial momenta/positions from a Jacobi state, the position `q0` of
/// body 0, and the total momentum `p_total` (zero on the reduced space).
pub fn jacobi_to_inertial(
    s: &JacobiState,
    q0: Vec3,
    p_total: Vec3,
    m: &MassConfig,
) -> ([Vec3; 3], [Vec3; 3]) {
    let q1 = s.q1 + q0;
    let q2 = s.q2 + q0 + m.sigma1 * s.q1;
    let p2 = s.p2;
    let p1 = s.p1 - m.sigma1 * s.p2;
    let p0 = p_total - p1 - p2;
    ([p0, p1, p2], [q0, q1, q2])
}

/// Perturbing function `F_pert(Q1, Q2)` (independent of the momenta).
///
/// # Errors
///
/// [`Error::CollisionSingular`] if any of the three denominators
/// `|Q2 − σ0 Q1|`, `|Q2 + σ1 Q1|`, `|Q2|` vanishes.
pub fn pert_value(q1: Vec3, q2: Vec3, m: &MassConfig) -> Result<f64> {
    let r2 = q2.norm();
    let ra = (q2 - m.sigma0 * q1).norm();
    let rb = (q2 + m.sigma1 * q1).norm();
    if r2 == 0.0 || ra == 0.0 || rb == 0.0 {
        return Err(Error::CollisionSingular(format!(
            "vanishing denominator in perturbing function: |Q2|={r2:.3e}, |Q2-σ0Q1|={ra:.3e}, |Q2+σ1Q1|={rb:.3e}"
        )));
    }
    Ok(-m.mu1
        * m.m2
        * ((1.0 / ra - 1.0 / r2) / m.sigma0 + (1.0 / rb - 1.0 / r2) / m.sigma1))
}

/// Gradient of the perturbing function with respect to `(Q1, Q2)`.
///
/// Returned as `(∇_{Q1} F_pert, ∇_{Q2} F_pert)`; both are needed by the
/// regularized vector field. Cross-checked against central finite
/// differences of [`pert_value`] in the tests.
///
/// # Errors
///
/// [`Error::CollisionSingular`] under the same conditions as
/// [`pert_value`].
pub fn pert_gradient(q1: Vec3, q2: Vec3, m: &MassConfig) -> Result<(Vec3, Vec3)> {
    let xa = q2 - m.sigma0 * q1;
    let xb = q2 + m.sigma1 * q1;
    let r2 = q2.norm();
    let ra = xa.norm();
    let rb = xb.norm();
    if r2 == 0.0 || ra == 0.0 || rb == 0.0 {
        return Err(Error::CollisionSingular(
            "vanishing denominator in perturbing-function gradient".into(),
        ));
    }
    let ua = xa / (ra * ra * ra);
    let ub = xb / (rb * rb * rb);
    let u2 = q2 / (r2 * r2 * r2);
    let k = -m.mu1 * m.m2;
    let g1 = k * (ua - ub);
    let g2 = k * ((u2 - ua) / m.sigma0 + (u2 - ub) / m.sigma1);
    Ok((g1, g2))
}

/// Physical Hamiltonian `F = F_Kep + F_pert` at a Jacobi state.
///
/// # Errors
///
/// [`Error::CollisionSingular`] if `Q1 = 0`, `Q2 = 0`, or one of the
/// perturbing denominators vanishes.
pub fn eval_f(s: &JacobiState, m: &MassConfig) -> Result<HamiltonianParts> {
    let r1 = s.q1.norm();
    let r2 = s.q2.norm();
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::CollisionSingular(format!(
            "|Q1| = {r1:.3e}, |Q2| = {r2:.3e}"
        )));
    }
    let kep = s.p1.norm_squared() / (2.0 * m.mu1) + s.p2.norm_squared() / (2.0 * m.mu2)
        - m.mu1 * m.big_m1 / r1
        - m.mu2 * m.big_m2 / r2;
    let pert = pert_value(s.q1, s.q2, m)?;
    Ok(HamiltonianParts { kep, pert })
}

/// Regularized Hamiltonian `ℱ = ℱ_Kep + ℱ_pert` at a regularized state.
///
/// Both parts are finite for every `(z, w)`, including the inner collision
/// `z = 0`; on `z ≠ 0` and `BL = 0` the total satisfies
/// `ℱ = |Q1| · (F + f)` evaluated at the mapped Cartesian state, so the
/// zero level of `ℱ` is the regularized image of the energy level
/// `F = −f`.
///
/// # Errors
///
/// [`Error::OuterCollision`] if `Q2 = 0`;
/// [`Error::HyperbolicOuter`] if the state's `f₁` is not positive;
/// [`Error::CollisionSingular`] if an outer perturbing denominator
/// vanishes (inner collisions are regular here).
pub fn eval_regularized(s: &RegularizedState, m: &MassConfig) -> Result<HamiltonianParts> {
    if s.q2.norm_squared() == 0.0 {
        return Err(Error::OuterCollision);
    }
    let f1 = s.f1(m);
    if !(f1 > 0.0) {
        return Err(Error::HyperbolicOuter(f1));
    }
    let z2 = s.ks.z.norm_sq();
    let kep = s.ks.w.norm_sq() / (8.0 * m.mu1) + f1 * z2 - m.mu1 * m.big_m1;
    let pert = if z2 == 0.0 {
        0.0
    } else {
        let q1 = hopf(&s.ks.z)?;
        z2 * pert_value(q1, s.q2, m)?
    };
    Ok(HamiltonianParts { kep, pert })
}

/// Oscillator parameter `f₁(L2) = f − μ2³ M2²/(2 L2²)` as a function of
/// the outer circular action, i.e. the value of [`RegularizedState::f1`]
/// expressed through the outer Delaunay element `L2` instead of the outer
/// Cartesian pair.
///
/// The sign is returned to the caller: the regularized oscillator picture
/// needs `f₁ > 0`, but boundary and hyperbolic values are legitimate
/// queries when scanning parameter space.
pub fn f1_of_l2(l2: f64, f: f64, m: &MassConfig) -> f64 {
    f - m.mu2.powi(3) * m.big_m2.powi(2) / (2.0 * l2 * l2)
}
