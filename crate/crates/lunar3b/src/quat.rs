//! Quaternion algebra, the Hopf map, and the regularizing change of
//! variables for the inner two-body problem.
//!
//! # Conventions
//!
//! A quaternion `q = q0 + q1 i + q2 j + q3 k` has scalar part `q0` and
//! imaginary (vector) part `(q1, q2, q3)`, with the Hamilton products
//! `i j = k`, `j k = i`, `k i = j`, `i² = j² = k² = -1`. Imaginary
//! quaternions are identified with vectors in `R³`: `i ↦ x`, `j ↦ y`,
//! `k ↦ z`.
//!
//! # The regularizing map
//!
//! Positions of the inner body live on the imaginary quaternions. A state
//! `(z, w)` of two quaternions maps to a position/momentum pair by
//!
//! ```text
//! Q = z̄ i z            (the Hopf map; purely imaginary)
//! P = z̄ i w / (2|z|²)
//! ```
//!
//! The momentum image `P` is purely imaginary exactly on the zero level of
//! the bilinear form [`bl_form`]; dynamical states are kept on that level.
//! The preimage of a point is a circle `(e^{iθ} z, e^{iθ} w)` (left
//! multiplication by a unit complex phase); [`ks_inverse`] picks the
//! canonical representative with `z1 = 0`, `z0 ≥ 0`.
//!
//! Squaring the position means `|Q| = |z|²`: near-collision states have
//! small `|z|` but perfectly regular `(z, w)` coordinates, which is the
//! point of the construction.

use crate::error::{Error, Result};
use crate::tol::PURE_IMAGINARY_TOL;
use crate::Vec3;
use std::ops::{Add, Mul, Neg, Sub};

/// Quaternion `q0 + q1 i + q2 j + q3 k` over `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    /// Scalar (real) part.
    pub q0: f64,
    /// Coefficient of `i`.
    pub q1: f64,
    /// Coefficient of `j`.
    pub q2: f64,
    /// Coefficient of `k`.
    pub q3: f64,
}

/// Short alias used in formula-dense code.
pub type Quat = Quaternion;

impl Quaternion {
    /// Zero quaternion.
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    /// Multiplicative identity.
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    /// Basis element `i`.
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    /// Basis element `j`.
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    /// Basis element `k`.
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    /// Build a quaternion from its four components.
    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    /// Real quaternion with scalar part `s`.
    pub const fn from_scalar(s: f64) -> Self {
        Self::new(s, 0.0, 0.0, 0.0)
    }

    /// Purely imaginary quaternion with vector part `v`.
    pub fn from_imag(v: Vec3) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    /// Scalar (real) part.
    pub fn scalar(&self) -> f64 {
        self.q0
    }

    /// Imaginary part as a 3-vector.
    pub fn imag(&self) -> Vec3 {
        Vec3::new(self.q1, self.q2, self.q3)
    }

    /// Conjugate `q0 - q1 i - q2 j - q3 k`.
    pub fn conj(&self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    /// Squared Euclidean norm `q0² + q1² + q2² + q3²`.
    pub fn norm_sq(&self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Euclidean inner product of the component 4-vectors.
    pub fn dot(&self, other: &Self) -> f64 {
        self.q0 * other.q0 + self.q1 * other.q1 + self.q2 * other.q2 + self.q3 * other.q3
    }

    /// Components as `[q0, q1, q2, q3]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    /// Quaternion from `[q0, q1, q2, q3]`.
    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// `true` iff every component is finite.
    pub fn is_finite(&self) -> bool {
        self.q0.is_finite() && self.q1.is_finite() && self.q2.is_finite() && self.q3.is_finite()
    }

    /// `true` iff the scalar part is negligible against the overall size:
    /// `|q0| ≤ tol · max(1, |q|)` with the library's imaginary-part
    /// tolerance.
    pub fn is_pure_imaginary(&self) -> bool {
        self.q0.abs() <= PURE_IMAGINARY_TOL * self.norm().max(1.0)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.q0 + rhs.q0,
            self.q1 + rhs.q1,
            self.q2 + rhs.q2,
            self.q3 + rhs.q3,
        )
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Self) -> Self {
        Self::new(
            self.q0 - rhs.q0,
            self.q1 - rhs.q1,
            self.q2 - rhs.q2,
            self.q3 - rhs.q3,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Self {
        Self::new(-self.q0, -self.q1, -self.q2, -self.q3)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Self) -> Self {
        quat_mul(&self, &rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Self {
        Self::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

/// Hamilton product `a b`.
///
/// The convention is fixed by `i j = k` and cyclic permutations; the
/// product is associative and norm-multiplicative, `|ab| = |a||b|`.
pub fn quat_mul(a: &Quaternion, b: &Quaternion) -> Quaternion {
    Quaternion::new(
        a.q0 * b.q0 - a.q1 * b.q1 - a.q2 * b.q2 - a.q3 * b.q3,
        a.q0 * b.q1 + a.q1 * b.q0 + a.q2 * b.q3 - a.q3 * b.q2,
        a.q0 * b.q2 - a.q1 * b.q3 + a.q2 * b.q0 + a.q3 * b.q1,
        a.q0 * b.q3 + a.q1 * b.q2 - a.q2 * b.q1 + a.q3 * b.q0,
    )
}

/// Hopf map `z ↦ z̄ i z`, returned as the 3-vector of the (automatically
/// purely imaginary) image.
///
/// The image norm is `|z|²`. The map is invariant under left multiplication
/// of `z` by unit complex phases `e^{iθ}`, and its image sweeps all of `R³`.
///
/// # Errors
///
/// [`Error::ZeroQuaternion`] if `z = 0`: the zero quaternion corresponds to
/// the collision configuration, which has no meaningful direction.
pub fn hopf(z: &Quaternion) -> Result<Vec3> {
    if z.norm_sq() == 0.0 {
        return Err(Error::ZeroQuaternion);
    }
    Ok((z.conj() * Quaternion::I * *z).imag())
}

/// Bilinear form `BL(z, w) = z̄ i w + conj(z̄ i w)`, i.e. twice the scalar
/// part of `z̄ i w`, returned as a real number.
///
/// In components, `BL(z, w) = 2 (z1 w0 - z0 w1 + z3 w2 - z2 w3)`. The form
/// is preserved by the simultaneous phase action `(z, w) ↦ (e^{iθ} z,
/// e^{iθ} w)` and is a first integral of the regularized flow; its zero
/// level (minus the origin) is the submanifold on which the mapped momentum
/// is purely imaginary and the dynamics is physical.
pub fn bl_form(z: &Quaternion, w: &Quaternion) -> f64 {
    2.0 * (z.q1 * w.q0 - z.q0 * w.q1 + z.q3 * w.q2 - z.q2 * w.q3)
}

/// Position/momentum pair of the inner body in Cartesian 3-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianPair {
    /// Position vector.
    pub q: Vec3,
    /// Linear momentum vector.
    pub p: Vec3,
}

/// Quaternionic state of the regularized inner problem.
///
/// `z` plays the role of a "square root" of the position (`|z|² = |Q|`),
/// `w` the role of the conjugate momentum. Physically meaningful states
/// satisfy `BL(z, w) = 0`; the checked constructor [`KSPoint::new`]
/// enforces this up to the scaled imaginary-part tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSPoint {
    /// Regularized position quaternion (nonzero away from collision).
    pub z: Quaternion,
    /// Regularized momentum quaternion.
    pub w: Quaternion,
}

impl KSPoint {
    /// Checked constructor: requires `|BL(z, w)|` below the scaled
    /// imaginary-part tolerance, so the state maps to a genuine
    /// position/momentum pair.
    ///
    /// # Errors
    ///
    /// [`Error::ZeroPosition`] if the bilinear form is out of tolerance.
    pub fn new(z: Quaternion, w: Quaternion) -> Result<Self> {
        let bl = bl_form(&z, &w);
        let scale = (z.norm() * w.norm()).max(1.0);
        if bl.abs() > PURE_IMAGINARY_TOL * scale {
            return Err(Error::ZeroPosition(format!(
                "bilinear form {bl:.3e} exceeds tolerance at scale {scale:.3e}"
            )));
        }
        Ok(Self { z, w })
    }

    /// Unchecked constructor for internal use where the level condition is
    /// maintained by construction (e.g. integration of the regularized
    /// flow, which conserves the form).
    pub fn new_unchecked(z: Quaternion, w: Quaternion) -> Self {
        Self { z, w }
    }

    /// Map to Cartesian position/momentum. See [`ks_map`].
    pub fn to_cartesian(&self) -> Result<CartesianPair> {
        ks_map(&self.z, &self.w)
    }

    /// Act by the phase circle: `(z, w) ↦ (e^{iθ} z, e^{iθ} w)`.
    ///
    /// All physical observables (position, momentum, bilinear form) are
    /// invariant under this action; it parametrizes the fiber over a given
    /// Cartesian pair.
    pub fn fiber_rotate(&self, theta: f64) -> Self {
        let u = unit_phase(theta);
        Self {
            z: u * self.z,
            w: u * self.w,
        }
    }

    /// Squared norm of `z`, equal to the distance `|Q|` of the mapped
    /// position from the origin.
    pub fn position_norm(&self) -> f64 {
        self.z.norm_sq()
    }
}

/// Unit complex phase `e^{iθ} = cos θ + sin θ · i` as a quaternion.
pub fn unit_phase(theta: f64) -> Quaternion {
    Quaternion::new(theta.cos(), theta.sin(), 0.0, 0.0)
}

/// Full momentum quaternion `z̄ i w / (2|z|²)` including its scalar part.
///
/// The scalar part equals `BL(z, w) / (4|z|²)` and vanishes on the zero
/// level of the bilinear form; [`ks_map`] discards it after that fact is
/// established. Exposed separately so callers (and tests) can inspect the
/// off-level residue.
///
/// # Errors
///
/// [`Error::ZeroQuaternion`] if `z = 0`.
pub fn momentum_quat(z: &Quaternion, w: &Quaternion) -> Result<Quaternion> {
    let n2 = z.norm_sq();
    if n2 == 0.0 {
        return Err(Error::ZeroQuaternion);
    }
    Ok(z.conj() * Quaternion::I * *w * (0.5 / n2))
}

/// Regularizing map `(z, w) ↦ (Q, P) = (z̄ i z, z̄ i w / (2|z|²))`.
///
/// The returned momentum is the imaginary part of the momentum quaternion;
/// on the zero level of [`bl_form`] (where dynamical states live) the
/// discarded scalar part is zero. The map intertwines the phase action on
/// `(z, w)` with the identity on `(Q, P)`.
///
/// # Errors
///
/// [`Error::ZeroQuaternion`] if `z = 0`.
pub fn ks_map(z: &Quaternion, w: &Quaternion) -> Result<CartesianPair> {
    let q = hopf(z)?;
    let p = momentum_quat(z, w)?.imag();
    Ok(CartesianPair { q, p })
}

/// Canonical section of the regularizing map: produce the representative
/// `(z, w)` with `z1 = 0` and `z0 ≥ 0` mapping to the given pair.
///
/// Construction: with `n = Q/|Q|` (unit imaginary), the unit quaternion
/// `u = (1 - i n)/|1 - i n|` satisfies `ū i u = n` and has vanishing `i`
/// component, so `z = √|Q| · u` has `z1 = 0`, `z0 = √((1+nx)/2) ≥ 0`. When
/// `Q` points along the negative x-axis the construction degenerates
/// (`1 - i n = 0`) and `u = j` is used, giving `z = √|Q| · j` — still
/// `z0 = 0`, `z1 = 0 ≥ 0`. The momentum is then `w = -2 i z P`, which both
/// inverts the momentum half of the map exactly and lands on the zero
/// level of the bilinear form automatically.
///
/// # Errors
///
/// [`Error::ZeroPosition`] if `Q = 0`: the collision configuration is not
/// in the image of the map restricted to nonzero `z`.
pub fn ks_inverse(pair: &CartesianPair) -> Result<KSPoint> {
    let r = pair.q.norm();
    if r == 0.0 {
        return Err(Error::ZeroPosition(
            "cannot invert the regularizing map at the collision Q = 0".into(),
        ));
    }
    // 1 - i n (n = Q/|Q|) has scalar part s = 1 + nx and vector part
    // (0, nz, -ny). Near the degenerate direction nx ≈ -1 the direct
    // expression for s cancels catastrophically; the equivalent form
    // s = (ny² + nz²)/(1 - nx) is exact there, so each sign of nx gets
    // the cancellation-free variant.
    let rho2 = pair.q.y * pair.q.y + pair.q.z * pair.q.z;
    let s = if pair.q.x >= 0.0 {
        1.0 + pair.q.x / r
    } else {
        rho2 / (r * (r - pair.q.x))
    };
    let norm2 = s * s + rho2 / (r * r);
    let u = if norm2 > 0.0 && norm2.is_finite() {
        let inv = 1.0 / norm2.sqrt();
        Quaternion::new(s * inv, 0.0, pair.q.z / r * inv, -pair.q.y / r * inv)
    } else {
        // Exactly (or indistinguishably) the negative x-axis.
        Quaternion::J
    };
    let z = u * r.sqrt();
    let p_quat = Quaternion::from_imag(pair.p);
    let w = Quaternion::I * z * p_quat * -2.0;
    Ok(KSPoint::new_unchecked(z, w))
}

/// Transpose of the Hopf-map Jacobian applied to a vector: the 4-vector
/// `Jᵀ g = -2 i z G` (with `G` the imaginary quaternion of `g`), so that
/// `⟨Jᵀ g, δz⟩ = ⟨g, d(hopf)·δz⟩` for every variation `δz`.
///
/// This is the pullback needed to convert Cartesian force gradients into
/// gradients with respect to the regularized position `z`; it is linear in
/// `z`, hence perfectly regular at the collision.
pub fn hopf_pullback(z: &Quaternion, g: Vec3) -> Quaternion {
    Quaternion::I * *z * Quaternion::from_imag(g) * -2.0
}

/// Cross product `Q × P` of the mapped pair, evaluated in a form that is
/// polynomial in `(z, w)` and hence smooth through the collision `z = 0`:
/// `Q × P = -Im(z̄ w)/2` on the zero level of the bilinear form.
///
/// This is the inner body's angular momentum; it is one block of the total
/// angular momentum conserved by the full flow and is used as a
/// long-integration conservation monitor.
pub fn position_momentum_cross(z: &Quaternion, w: &Quaternion) -> Vec3 {
    -(z.conj() * *w).imag() * 0.5
}

/// Inner product `⟨Q, P⟩` of the mapped pair in smooth form:
/// `⟨Q, P⟩ = Re(z̄ w)/2` on the zero level of the bilinear form.
pub fn position_momentum_dot(z: &Quaternion, w: &Quaternion) -> f64 {
    0.5 * (z.conj() * *w).scalar()
}
