//! Orbital elements and action-angle coordinates.
//!
//! Three coordinate systems share this module:
//!
//! * **Delaunay elements of the outer body** ([`DelaunayOuter`]): the
//!   classical action-angle set `(L2, l2, G2, g2, H2, h2)` of the outer
//!   Kepler problem with masses `(μ2, M2)` — circular angular momentum and
//!   mean anomaly, angular momentum and pericenter argument, vertical
//!   angular-momentum component and node longitude.
//! * **Elliptic elements of the inner body** ([`InnerElements`]): the
//!   inner pair, viewed in the regularized picture, moves on a Keplerian
//!   ellipse for the *modified* central mass `M̃ = M1 + ℱ_Kep/μ1`; its
//!   semi-major axis, eccentricity and eccentric anomaly are defined for
//!   every bound state **including the degenerate segment `e1 = 1`**,
//!   which is where the interesting near-collision dynamics lives.
//! * **Regular coordinates** ([`RegularCoords`]): exact action-angle
//!   coordinates `(𝒫_i, ϑ_i)` of the four-oscillator regularized Kepler
//!   part, together with the corrected outer Delaunay pair `(L2, l2′)`.
//!   In them `ℱ_Kep = 𝒫0 √(2 f₁(L2)/μ1) − μ1 M1` identically, so the
//!   inner fast dynamics is a rigid rotation of `ϑ0`.
//!
//! All angles are reduced to `[0, 2π)`; inclinations live in `[0, π]`.

use crate::error::{Error, Result};
use crate::quat::{position_momentum_cross, position_momentum_dot, KSPoint, Quaternion};
use crate::threebody::{eval_regularized, f1_of_l2, MassConfig, RegularizedState};
use crate::tol::{
    CHART_ACTION_REL_TOL, ELEMENT_DEGENERACY_TOL, KEPLER_RESIDUAL_TOL,
};
use crate::Vec3;
use std::f64::consts::TAU;

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a − b` wrapped to `(−π, π]`, for comparing angles.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d -= TAU;
    }
    d
}

/// Solve the elliptic Kepler equation `u − e sin u = l`.
///
/// Newton iteration from a bracketing-safe starter, with a bisection
/// fallback for the rare non-convergent corner; the returned `u` lies in
/// `[0, 2π)` when `l` is reduced there and satisfies the equation to
/// [`KEPLER_RESIDUAL_TOL`].
///
/// # Errors
///
/// [`Error::EccentricityOutOfRange`] unless `0 ≤ e < 1`.
pub fn solve_kepler(l: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) || !e.is_finite() {
        return Err(Error::EccentricityOutOfRange(e));
    }
    let l = wrap_angle(l);
    // Starter: exact for e = 0; pushes toward the correct branch for
    // moderate-to-high eccentricities.
    let mut u = if e < 0.8 { l + e * l.sin() } else { std::f64::consts::PI };
    let mut converged = false;
    for _ in 0..20 {
        let f = u - e * u.sin() - l;
        if f.abs() < KEPLER_RESIDUAL_TOL {
            converged = true;
            break;
        }
        let fp = 1.0 - e * u.cos();
        u -= f / fp;
    }
    if !converged {
        // Bisection on [l − e, l + e], which always brackets the root.
        let (mut lo, mut hi) = (l - e, l + e);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = mid - e * mid.sin() - l;
            if fm.abs() < KEPLER_RESIDUAL_TOL {
                u = mid;
                converged = true;
                break;
            }
            if fm > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if !converged {
            u = 0.5 * (lo + hi);
        }
    }
    Ok(wrap_angle(u))
}

/// Delaunay elements of the outer body under masses `(μ2, M2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaunayOuter {
    /// Circular angular momentum `L2 = μ2 √(M2 a2)`.
    pub big_l2: f64,
    /// Mean anomaly.
    pub l2: f64,
    /// Angular momentum `G2 = L2 √(1 − e2²)`.
    pub big_g2: f64,
    /// Argument of pericenter.
    pub g2: f64,
    /// Vertical angular-momentum component `H2 = G2 cos i2`.
    pub big_h2: f64,
    /// Longitude of the ascending node.
    pub h2: f64,
}

impl DelaunayOuter {
    /// Eccentricity `e2 = √(1 − G2²/L2²)`.
    pub fn eccentricity(&self) -> f64 {
        (1.0 - (self.big_g2 / self.big_l2).powi(2)).max(0.0).sqrt()
    }

    /// Inclination `i2 = acos(H2/G2) ∈ [0, π]`.
    pub fn inclination(&self) -> f64 {
        (self.big_h2 / self.big_g2).clamp(-1.0, 1.0).acos()
    }

    /// Semi-major axis `a2 = L2²/(μ2² M2)`.
    pub fn semi_major(&self, m: &MassConfig) -> f64 {
        self.big_l2 * self.big_l2 / (m.mu2 * m.mu2 * m.big_m2)
    }

    /// Structural sanity of the action hierarchy `L2 ≥ G2 ≥ |H2| > 0`.
    fn check_hierarchy(&self) -> Result<()> {
        if !(self.big_l2 > 0.0)
            || self.big_g2 > self.big_l2 * (1.0 + 1e-14)
            || !(self.big_g2 > 0.0)
            || self.big_h2.abs() > self.big_g2 * (1.0 + 1e-14)
        {
            return Err(Error::InvalidParameter(format!(
                "Delaunay actions must satisfy L2 ≥ G2 ≥ |H2| > 0, got L2={}, G2={}, H2={}",
                self.big_l2, self.big_g2, self.big_h2
            )));
        }
        Ok(())
    }
}

/// Cartesian outer state `(Q2, P2)` from Delaunay elements.
///
/// # Errors
///
/// [`Error::DegenerateElement`] when the pericenter (`G2 = L2`, circular)
/// or the node (`|H2| = G2`, coplanar) is undefined, within
/// [`ELEMENT_DEGENERACY_TOL`]; [`Error::InvalidParameter`] if the action
/// hierarchy is violated.
pub fn outer_state_from_delaunay(d: &DelaunayOuter, m: &MassConfig) -> Result<(Vec3, Vec3)> {
    d.check_hierarchy()?;
    let e = d.eccentricity();
    if e <= ELEMENT_DEGENERACY_TOL {
        return Err(Error::DegenerateElement(
            "circular outer orbit: pericenter argument g2 undefined".into(),
        ));
    }
    let sin_i = (1.0 - (d.big_h2 / d.big_g2).powi(2)).max(0.0).sqrt();
    if sin_i <= ELEMENT_DEGENERACY_TOL {
        return Err(Error::DegenerateElement(
            "coplanar outer orbit: node longitude h2 undefined".into(),
        ));
    }
    let a = d.semi_major(m);
    let u = solve_kepler(d.l2, e)?;
    let (su, cu) = u.sin_cos();
    let b_over_a = (1.0 - e * e).max(0.0).sqrt();
    // Perifocal position and velocity.
    let r = a * (1.0 - e * cu);
    let pos = Vec3::new(a * (cu - e), a * b_over_a * su, 0.0);
    let n = (m.big_m2 / (a * a * a)).sqrt();
    let vel = Vec3::new(-a * n * su / (1.0 - e * cu), a * n * b_over_a * cu / (1.0 - e * cu), 0.0);
    // Perifocal → inertial: Rz(h2) · Rx(i2) · Rz(g2).
    let i2 = d.inclination();
    let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), d.h2)
        * nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), i2)
        * nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), d.g2);
    debug_assert!((r - pos.norm()).abs() <= 1e-12 * r.abs().max(1.0));
    Ok((rot * pos, m.mu2 * (rot * vel)))
}

/// Delaunay elements from a Cartesian outer state `(Q2, P2)`.
///
/// # Errors
///
/// [`Error::NonElliptic`] for non-negative outer two-body energy;
/// [`Error::DegenerateElement`] when the orbit is circular or coplanar to
/// within [`ELEMENT_DEGENERACY_TOL`] (pericenter/node extraction would
/// divide by zero).
pub fn delaunay_from_outer_state(q2: Vec3, p2: Vec3, m: &MassConfig) -> Result<DelaunayOuter> {
    let r = q2.norm();
    if r == 0.0 {
        return Err(Error::OuterCollision);
    }
    let energy = p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / r;
    if energy >= 0.0 {
        return Err(Error::NonElliptic(format!("outer energy {energy:.6e} ≥ 0")));
    }
    let a = -m.mu2 * m.big_m2 / (2.0 * energy);
    let big_l2 = m.mu2 * (m.big_m2 * a).sqrt();
    let g_vec = q2.cross(&p2);
    let big_g2 = g_vec.norm();
    let big_h2 = g_vec.z;
    // Laplace–Runge–Lenz eccentricity vector.
    let e_vec = p2.cross(&g_vec) / (m.mu2 * m.mu2 * m.big_m2) - q2 / r;
    let e = e_vec.norm();
    if e <= ELEMENT_DEGENERACY_TOL {
        return Err(Error::DegenerateElement(
            "circular outer orbit: pericenter argument g2 undefined".into(),
        ));
    }
    let sin_i_scale = (g_vec.x * g_vec.x + g_vec.y * g_vec.y).sqrt();
    if sin_i_scale <= ELEMENT_DEGENERACY_TOL * big_g2 {
        return Err(Error::DegenerateElement(
            "coplanar outer orbit: node longitude h2 undefined".into(),
        ));
    }
    // Ascending node direction ẑ × G.
    let node = Vec3::new(-g_vec.y, g_vec.x, 0.0);
    let h2 = wrap_angle(node.y.atan2(node.x));
    // Pericenter argument: angle from the node to ê in the orbit plane.
    let g_hat = g_vec / big_g2;
    let cos_g = node.dot(&e_vec) / (node.norm() * e);
    let sin_g = node.cross(&e_vec).dot(&g_hat) / (node.norm() * e);
    let g2 = wrap_angle(sin_g.atan2(cos_g));
    // Eccentric anomaly from the scalar relations
    // e cos u = 1 − r/a, e sin u = ⟨Q,P⟩ / (μ2 √(M2 a)).
    let ecu = 1.0 - r / a;
    let esu = q2.dot(&p2) / (m.mu2 * (m.big_m2 * a).sqrt());
    let u = esu.atan2(ecu);
    let l2 = wrap_angle(u - esu);
    Ok(DelaunayOuter {
        big_l2,
        l2,
        big_g2,
        g2,
        big_h2,
        h2,
    })
}

/// Orientation block of the inner elements, defined when the orbital
/// plane exists (`G1 > 0`, equivalently `e1 < 1` for bound orbits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOrientation {
    /// Angular momentum `G1 = |Q1 × P1|`.
    pub big_g1: f64,
    /// Argument of pericenter (set to `0` by convention when `e1 ≈ 0`).
    pub g1: f64,
    /// Vertical angular-momentum component.
    pub big_h1: f64,
    /// Longitude of the ascending node (set to `0` when the orbit is
    /// equatorial and the node is undefined).
    pub h1: f64,
    /// Inclination in `[0, π]`.
    pub i1: f64,
}

/// Elliptic elements of the regularized inner body.
///
/// The ellipse is taken for the Kepler problem with masses
/// `(μ1, M̃ = M1 + ℱ_Kep/μ1)`; its energy is then exactly `−f₁`, so
/// `a1 = μ1 M̃/(2 f₁)` for every state. Degenerate (rectilinear, `e1 = 1`)
/// ellipses are first-class values: they carry no orientation block but
/// valid `a1`, `e1`, `u1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerElements {
    /// Semi-major axis.
    pub a1: f64,
    /// Eccentricity in `[0, 1]`, with `1` the rectilinear segment.
    pub e1: f64,
    /// Eccentric anomaly in `[0, 2π)`; for the rectilinear ellipse,
    /// `u1 = 0` is the collision.
    pub u1: f64,
    /// Plane-dependent angles; `None` exactly when `G1` vanishes to
    /// rounding (rectilinear orbit, plane undefined).
    pub orientation: Option<InnerOrientation>,
}

/// Inner elliptic elements of a regularized state.
///
/// # Errors
///
/// [`Error::HyperbolicOuter`] if the state's `f₁ ≤ 0` (the modified-mass
/// ellipse requires a positive oscillator parameter);
/// [`Error::OuterCollision`] if `Q2 = 0`.
pub fn inner_elements_from_ks(s: &RegularizedState, m: &MassConfig) -> Result<InnerElements> {
    let parts = eval_regularized(s, m)?;
    let f1 = s.f1(m);
    // Modified central-mass parameter M̃ = M1 + ℱ_Kep/μ1.
    let gm = m.big_m1 + parts.kep / m.mu1;
    let a1 = m.mu1 * gm / (2.0 * f1);
    let z2 = s.ks.z.norm_sq();
    // Smooth angular momentum (valid through z = 0).
    let g_vec = position_momentum_cross(&s.ks.z, &s.ks.w);
    let big_g1 = g_vec.norm();
    // Eccentricity from the momentum-space identity
    // e1² = 1 − 2 f₁ G1²/(μ1³ M̃²): exact at the rectilinear limit.
    let e1sq = 1.0 - 2.0 * f1 * big_g1 * big_g1 / (m.mu1.powi(3) * gm * gm);
    let e1 = e1sq.max(0.0).sqrt();
    if z2 == 0.0 {
        // Collision state: necessarily rectilinear, at pericenter.
        return Ok(InnerElements {
            a1,
            e1: 1.0,
            u1: 0.0,
            orientation: None,
        });
    }
    let pair = s.ks.to_cartesian()?;
    let r = pair.q.norm();
    // e cos u = 1 − r/a, e sin u = ⟨Q,P⟩/(μ1 √(M̃ a)): defined for every
    // eccentricity, including 0 (u1 then absorbs the pericenter freedom)
    // and 1.
    let ecu = 1.0 - r / a1;
    let esu = position_momentum_dot(&s.ks.z, &s.ks.w) / (m.mu1 * (gm * a1).sqrt());
    let u1 = wrap_angle(esu.atan2(ecu));
    let scale = m.mu1 * (gm * a1).sqrt();
    let orientation = if big_g1 <= ELEMENT_DEGENERACY_TOL * scale {
        None
    } else {
        let big_h1 = g_vec.z;
        let i1 = (big_h1 / big_g1).clamp(-1.0, 1.0).acos();
        let sin_i_scale = (g_vec.x * g_vec.x + g_vec.y * g_vec.y).sqrt();
        let (h1, g1) = if sin_i_scale <= ELEMENT_DEGENERACY_TOL * big_g1 {
            // Equatorial orbit: node undefined; measure the pericenter
            // from the x-axis by convention.
            let e_vec = pair.p.cross(&g_vec) / (m.mu1 * m.mu1 * gm) - pair.q / r;
            let g1 = if e_vec.norm() <= ELEMENT_DEGENERACY_TOL {
                0.0
            } else {
                wrap_angle(e_vec.y.atan2(e_vec.x) * g_vec.z.signum())
            };
            (0.0, g1)
        } else {
            let node = Vec3::new(-g_vec.y, g_vec.x, 0.0);
            let h1 = wrap_angle(node.y.atan2(node.x));
            let e_vec = pair.p.cross(&g_vec) / (m.mu1 * m.mu1 * gm) - pair.q / r;
            let e_norm = e_vec.norm();
            let g1 = if e_norm <= ELEMENT_DEGENERACY_TOL {
                0.0
            } else {
                let g_hat = g_vec / big_g1;
                let cos_g = node.dot(&e_vec) / (node.norm() * e_norm);
                let sin_g = node.cross(&e_vec).dot(&g_hat) / (node.norm() * e_norm);
                wrap_angle(sin_g.atan2(cos_g))
            };
            (h1, g1)
        };
        Some(InnerOrientation {
            big_g1,
            g1,
            big_h1: g_vec.z,
            h1,
            i1,
        })
    };
    Ok(InnerElements {
        a1,
        e1,
        u1,
        orientation,
    })
}

/// Action-angle coordinates of the regularized system: four oscillator
/// pairs `(𝒫_i, ϑ_i)` for the inner part and the corrected Delaunay set
/// `(L2, l2′, G2, g2, H2, h2)` for the outer part.
///
/// `𝒫0` is half the total oscillator action divided by `s = √(8 μ1 f₁)`;
/// `ϑ0` is twice the leading oscillator phase; `(𝒫_i, ϑ_i)`, `i = 1..3`,
/// are the relative actions/phases. `l2′` differs from the mean anomaly
/// `l2` by `(f₁′/2f₁)·⟨Q1, P1⟩`, which restores canonicity after the
/// `L2`-dependent oscillator rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularCoords {
    /// Actions `𝒫0..𝒫3`.
    pub actions: [f64; 4],
    /// Angles `ϑ0..ϑ3` in `[0, 2π)`.
    pub angles: [f64; 4],
    /// Outer circular angular momentum `L2`.
    pub big_l2: f64,
    /// Corrected outer mean anomaly `l2′`.
    pub l2_prime: f64,
    /// Outer angular momentum `G2`.
    pub big_g2: f64,
    /// Outer pericenter argument.
    pub g2: f64,
    /// Outer vertical angular-momentum component `H2`.
    pub big_h2: f64,
    /// Outer node longitude.
    pub h2: f64,
}

/// Oscillator actions `I_i = (w_i² + 8 μ1 f₁ z_i²)/2` and phases
/// `φ_i = atan2(s z_i, w_i)` of a regularized inner state, given
/// `s = √(8 μ1 f₁)`.
fn oscillator_actions_phases(ks: &KSPoint, s: f64) -> ([f64; 4], [f64; 4]) {
    let z = ks.z.as_array();
    let w = ks.w.as_array();
    let mut actions = [0.0; 4];
    let mut phases = [0.0; 4];
    for i in 0..4 {
        actions[i] = 0.5 * (w[i] * w[i] + s * s * z[i] * z[i]);
        phases[i] = (s * z[i]).atan2(w[i]);
    }
    (actions, phases)
}

/// Regular (action-angle) coordinates of a regularized state.
///
/// # Errors
///
/// [`Error::ChartDegenerate`] if any oscillator action `I_i` vanishes to
/// within [`CHART_ACTION_REL_TOL`] of the total — the angles are
/// undefined there; [`Error::HyperbolicOuter`] if `f₁ ≤ 0`; degenerate
/// outer orbits propagate [`Error::DegenerateElement`] from the Delaunay
/// extraction.
pub fn regular_from_ks(s: &RegularizedState, m: &MassConfig) -> Result<RegularCoords> {
    let outer = delaunay_from_outer_state(s.q2, s.p2, m)?;
    let f1 = f1_of_l2(outer.big_l2, s.f, m);
    if !(f1 > 0.0) {
        return Err(Error::HyperbolicOuter(f1));
    }
    let s_freq = (8.0 * m.mu1 * f1).sqrt();
    let (actions_i, phases) = oscillator_actions_phases(&s.ks, s_freq);
    let total: f64 = actions_i.iter().sum();
    for (i, &ii) in actions_i.iter().enumerate() {
        if ii <= CHART_ACTION_REL_TOL * total {
            return Err(Error::ChartDegenerate(format!(
                "oscillator action I_{i} = {ii:.3e} vanishes (total {total:.3e})"
            )));
        }
    }
    let p0 = total / (2.0 * s_freq);
    let theta0 = wrap_angle(2.0 * phases[0]);
    let mut actions = [p0, 0.0, 0.0, 0.0];
    let mut angles = [theta0, 0.0, 0.0, 0.0];
    for i in 1..4 {
        actions[i] = actions_i[i] / s_freq;
        angles[i] = wrap_angle(phases[i] - phases[0]);
    }
    // Canonical correction of the outer mean anomaly.
    let f1_prime = m.mu2.powi(3) * m.big_m2.powi(2) / outer.big_l2.powi(3);
    let q_dot_p = position_momentum_dot(&s.ks.z, &s.ks.w);
    let l2_prime = wrap_angle(outer.l2 + f1_prime / (2.0 * f1) * q_dot_p);
    Ok(RegularCoords {
        actions,
        angles,
        big_l2: outer.big_l2,
        l2_prime,
        big_g2: outer.big_g2,
        g2: outer.g2,
        big_h2: outer.big_h2,
        h2: outer.h2,
    })
}

/// Inverse of [`regular_from_ks`]: rebuild the regularized state from
/// regular coordinates and the energy parameter `f`.
///
/// The reconstructed `(z, w)` lies on the zero level of the bilinear form
/// only if the coordinates came from an actual state (the level is a
/// codimension-one condition in the chart); the checked [`KSPoint::new`]
/// enforces this. Because `ϑ0 = 2 φ0` forgets the overall sign of the
/// oscillator pair, the inner state is recovered up to the deck
/// transformation `(z, w) ↦ (−z, −w)` of the quaternionic double cover;
/// both lifts map to the same Cartesian state.
///
/// # Errors
///
/// [`Error::HyperbolicOuter`] if `f₁(L2) ≤ 0`; [`Error::ChartDegenerate`]
/// if the implied `I_0` is non-positive; [`Error::ZeroPosition`] if the
/// coordinates violate the bilinear-form level; outer reconstruction
/// errors propagate.
pub fn regular_to_ks(rc: &RegularCoords, f: f64, m: &MassConfig) -> Result<RegularizedState> {
    let f1 = f1_of_l2(rc.big_l2, f, m);
    if !(f1 > 0.0) {
        return Err(Error::HyperbolicOuter(f1));
    }
    let s_freq = (8.0 * m.mu1 * f1).sqrt();
    let mut actions_i = [0.0; 4];
    actions_i[0] = s_freq * (2.0 * rc.actions[0] - rc.actions[1] - rc.actions[2] - rc.actions[3]);
    for i in 1..4 {
        actions_i[i] = s_freq * rc.actions[i];
    }
    let total: f64 = actions_i.iter().sum();
    for (i, &ii) in actions_i.iter().enumerate() {
        if ii <= CHART_ACTION_REL_TOL * total {
            return Err(Error::ChartDegenerate(format!(
                "implied oscillator action I_{i} = {ii:.3e} not positive"
            )));
        }
    }
    let phi0 = rc.angles[0] / 2.0;
    let mut z = [0.0; 4];
    let mut w = [0.0; 4];
    for i in 0..4 {
        let phi = if i == 0 { phi0 } else { rc.angles[i] + phi0 };
        let amp = (2.0 * actions_i[i]).sqrt();
        z[i] = amp * phi.sin() / s_freq;
        w[i] = amp * phi.cos();
    }
    let ks = KSPoint::new(Quaternion::from_array(z), Quaternion::from_array(w))?;
    // Undo the canonical correction to recover the mean anomaly.
    let f1_prime = m.mu2.powi(3) * m.big_m2.powi(2) / rc.big_l2.powi(3);
    let q_dot_p = position_momentum_dot(&ks.z, &ks.w);
    let l2 = wrap_angle(rc.l2_prime - f1_prime / (2.0 * f1) * q_dot_p);
    let outer = DelaunayOuter {
        big_l2: rc.big_l2,
        l2,
        big_g2: rc.big_g2,
        g2: rc.g2,
        big_h2: rc.big_h2,
        h2: rc.h2,
    };
    let (q2, p2) = outer_state_from_delaunay(&outer, m)?;
    RegularizedState::new(ks, p2, q2, f)
}

/// The two Keplerian frequencies of the regularized integrable part in
/// regular coordinates: `ν1 = ∂ℱ_Kep/∂𝒫0 = √(2 f₁/μ1)` (inner oscillator)
/// and `ν2 = ∂ℱ_Kep/∂L2 = 𝒫0 μ2³ M2²/(L2³ √(2 μ1 f₁))` (outer mean
/// motion in the rescaled time).
///
/// Their ratio scales like `α^{3/2}` in the semi-major-axis ratio `α`:
/// the two fast angles are frequency-separated in the lunar regime.
pub fn kepler_frequencies(p0: f64, big_l2: f64, f: f64, m: &MassConfig) -> Result<(f64, f64)> {
    let f1 = f1_of_l2(big_l2, f, m);
    if !(f1 > 0.0) {
        return Err(Error::HyperbolicOuter(f1));
    }
    let nu1 = (2.0 * f1 / m.mu1).sqrt();
    let f1_prime = m.mu2.powi(3) * m.big_m2.powi(2) / big_l2.powi(3);
    let nu2 = p0 * f1_prime / (2.0 * m.mu1 * f1).sqrt();
    Ok((nu1, nu2))
}

/// Closed-form flow of the regularized Kepler part on the inner pair at
/// frozen outer state: each oscillator pair rotates rigidly,
/// `(s z_i, w_i) ↦ R(ν1 τ/2) (s z_i, w_i)` with `s = √(8 μ1 f₁)`.
///
/// Used as an integrator-free oracle for phase/anomaly relations.
pub fn oscillator_propagate(ks: &KSPoint, f1: f64, mu1: f64, tau: f64) -> KSPoint {
    let s = (8.0 * mu1 * f1).sqrt();
    let nu1 = (2.0 * f1 / mu1).sqrt();
    let (sn, cs) = (0.5 * nu1 * tau).sin_cos();
    let z = ks.z.as_array();
    let w = ks.w.as_array();
    let mut z_new = [0.0; 4];
    let mut w_new = [0.0; 4];
    for i in 0..4 {
        z_new[i] = cs * z[i] + sn * w[i] / s;
        w_new[i] = -s * sn * z[i] + cs * w[i];
    }
    KSPoint::new_unchecked(Quaternion::from_array(z_new), Quaternion::from_array(w_new))
}

/// Keplerian elements of a hierarchical two-ellipse configuration.
///
/// Both ellipses are specified in the same Jacobi frame: the inner pair
/// `(Q1, P1)` and the outer pair `(Q2, P2)` each get a semi-major axis,
/// an eccentricity, the `Rz(Ω)·Rx(i)·Rz(ω)` orientation angles, and an
/// eccentric anomaly selecting the point on the ellipse.  The inner
/// eccentricity may equal `1` (rectilinear segment) as long as the
/// chosen anomaly keeps the radius positive; the outer one must stay
/// below `1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchicalElements {
    /// Inner semi-major axis.
    pub a1: f64,
    /// Inner eccentricity in `[0, 1]`.
    pub e1: f64,
    /// Inner node longitude.
    pub node1: f64,
    /// Inner inclination.
    pub incl1: f64,
    /// Inner pericenter argument.
    pub argp1: f64,
    /// Inner eccentric anomaly.
    pub u1: f64,
    /// Outer semi-major axis.
    pub a2: f64,
    /// Outer eccentricity in `[0, 1)`.
    pub e2: f64,
    /// Outer node longitude.
    pub node2: f64,
    /// Outer inclination.
    pub incl2: f64,
    /// Outer pericenter argument.
    pub argp2: f64,
    /// Outer eccentric anomaly.
    pub u2: f64,
}

impl Default for HierarchicalElements {
    /// A mildly eccentric, mildly inclined hierarchy with axis ratio
    /// `a1/a2 = 0.05`, generic orientation angles, and both bodies away
    /// from their apsides.
    fn default() -> Self {
        Self {
            a1: 1.0,
            e1: 0.6,
            node1: 0.3,
            incl1: 0.5,
            argp1: 0.7,
            u1: 1.1,
            a2: 20.0,
            e2: 0.2,
            node2: 1.1,
            incl2: 0.25,
            argp2: 0.4,
            u2: 2.0,
        }
    }
}

/// Cartesian position and momentum of a point on an elliptic Kepler
/// orbit.
///
/// The orbit has gravitational parameter `gm` (specific energy
/// `‖q̇‖²/2 − gm/‖q‖ = −gm/(2a)`) and reduced mass `mu` (momentum
/// `p = mu·q̇`).  The point is selected by its eccentric anomaly `u`;
/// the in-plane vectors are rotated by `Rz(node)·Rx(incl)·Rz(argp)`.
/// Degenerate `e = 1` segments are accepted as long as the radius
/// `a(1 − e·cos u)` stays positive.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for non-positive or non-finite `a`,
/// `gm`, `mu`; [`Error::NonElliptic`] for `e ∉ [0, 1]`;
/// [`Error::CollisionSingular`] when the requested point has zero
/// radius (`e = 1` at `cos u = 1`).
pub fn elliptic_state(
    a: f64,
    e: f64,
    node: f64,
    incl: f64,
    argp: f64,
    u: f64,
    gm: f64,
    mu: f64,
) -> Result<(Vec3, Vec3)> {
    for (name, v) in [
        ("semi-major axis", a),
        ("gravitational parameter", gm),
        ("reduced mass", mu),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::NonElliptic(format!(
            "eccentricity must lie in [0, 1], got {e}"
        )));
    }
    let r = a * (1.0 - e * u.cos());
    if r <= 0.0 {
        return Err(Error::CollisionSingular(format!(
            "zero orbital radius at eccentric anomaly {u} with eccentricity {e}"
        )));
    }
    let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), node)
        * nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), incl)
        * nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), argp);
    let eps = (1.0 - e * e).sqrt();
    let pos = rot * Vec3::new(a * (u.cos() - e), a * eps * u.sin(), 0.0);
    let vel = rot * Vec3::new(-u.sin(), eps * u.cos(), 0.0) * ((gm * a).sqrt() / r);
    Ok((pos, mu * vel))
}

/// Regularized state realizing a hierarchical element set on the zero
/// level of the full Hamiltonian.
///
/// Builds the two Cartesian ellipse points with [`elliptic_state`],
/// lifts the inner pair through the inverse Kustaanheimo–Stiefel map
/// (so `BL = 0` holds by construction), and solves the zero-level
/// condition for the energy parameter:
///
/// `f = (μ1 M1 − |w|²/(8 μ1))/|z|² − E_outer − F_pert`,
///
/// with `E_outer = |P2|²/(2 μ2) − μ2 M2/‖Q2‖`.  The physical flow on
/// the returned state is therefore the time-changed regularized flow.
///
/// # Errors
///
/// Propagates [`elliptic_state`] failures, rejects an outer
/// eccentricity at or above `1` with [`Error::NonElliptic`], and
/// forwards the checked-constructor errors of
/// [`RegularizedState::new`] (in particular a non-positive energy
/// parameter, which signals an unbound inner pair).
pub fn hierarchical_regularized(
    el: &HierarchicalElements,
    m: &MassConfig,
) -> Result<RegularizedState> {
    if !(el.e2 < 1.0) {
        return Err(Error::NonElliptic(format!(
            "outer eccentricity must lie in [0, 1), got {}",
            el.e2
        )));
    }
    let (q1, p1) = elliptic_state(
        el.a1, el.e1, el.node1, el.incl1, el.argp1, el.u1, m.big_m1, m.mu1,
    )?;
    let (q2, p2) = elliptic_state(
        el.a2, el.e2, el.node2, el.incl2, el.argp2, el.u2, m.big_m2, m.mu2,
    )?;
    let ks = crate::quat::ks_inverse(&crate::quat::CartesianPair { q: q1, p: p1 })?;
    let z2 = ks.z.norm_sq();
    let outer_energy = p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / q2.norm();
    let fp = crate::threebody::pert_value(q1, q2, m)?;
    let f = (m.mu1 * m.big_m1 - ks.w.norm_sq() / (8.0 * m.mu1)) / z2 - outer_energy - fp;
    RegularizedState::new(ks, p2, q2, f)
}
