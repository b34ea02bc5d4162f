//! Library-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. Variants are
//! grouped by the stage that raises them; messages carry enough context to
//! diagnose the offending input without a debugger.

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A quaternion that must be invertible (nonzero) was zero.
    #[error("zero quaternion where an invertible one is required")]
    ZeroQuaternion,

    /// A position that must be nonzero (collision configuration) was zero,
    /// or not purely imaginary where a spatial position is expected.
    #[error("invalid position for inverse mapping: {0}")]
    ZeroPosition(String),

    /// Masses must be strictly positive.
    #[error("non-positive mass: {0}")]
    NonPositiveMass(f64),

    /// A Hamiltonian evaluation hit a vanishing mutual distance.
    #[error("collision singularity: {0}")]
    CollisionSingular(String),

    /// The outer body sits at the origin of its Jacobi frame, where the
    /// regularized Hamiltonian is not defined.
    #[error("outer body at zero Jacobi position")]
    OuterCollision,

    /// The outer-body energy parameter is non-negative (hyperbolic or
    /// parabolic outer orbit); the regularized inner oscillator needs a
    /// strictly positive frequency parameter.
    #[error("non-elliptic outer configuration: f1 = {0}")]
    HyperbolicOuter(f64),

    /// An orbital-element constructor received an eccentricity outside the
    /// supported range.
    #[error("eccentricity {0} outside supported range [0, {max})", max = crate::tol::MAX_ECCENTRICITY)]
    EccentricityOutOfRange(f64),

    /// An element set is degenerate for the requested operation (circular
    /// orbit with undefined pericenter, coplanar orbit with undefined node,
    /// rectilinear orbit with undefined plane).
    #[error("degenerate element set: {0}")]
    DegenerateElement(String),

    /// A state or parameter set is hyperbolic/parabolic where an elliptic
    /// (negative-energy) configuration is required.
    #[error("non-elliptic configuration: {0}")]
    NonElliptic(String),

    /// The oscillator action-angle chart is not defined at this state
    /// (one of the four oscillator actions vanishes).
    #[error("action-angle chart degenerate: {0}")]
    ChartDegenerate(String),

    /// The semi-major-axis ratio is too large for the requested series or
    /// bound to converge.
    #[error("axis ratio {ratio} too large: series requires ratio < {limit}")]
    RatioTooLarge { ratio: f64, limit: f64 },

    /// The small parameter exceeds the validity envelope of the uniform
    /// perturbation bound (its denominator crosses zero).
    #[error("axis ratio {alpha} too large for the uniform bound: requires alpha < {limit}")]
    AlphaTooLarge { alpha: f64, limit: f64 },

    /// Reduced secular coordinates are singular at the requested point
    /// (e.g. a derivative taken on a codimension-one set where the chart
    /// breaks down).
    #[error("singular reduced coordinates: {0}")]
    SingularCoordinates(String),

    /// The two momenta that must differ for an elliptic-integral quadrature
    /// coincide; use the closed-form limit instead.
    #[error("coincident angular momenta: {0}")]
    CoincidentMomenta(String),

    /// The adaptive integrator failed (step size underflow, NaN state,
    /// step budget exhausted, or a monitored invariant drifted past its
    /// abort threshold).
    #[error("integration step failure: {0}")]
    StepFailure(String),

    /// A momentum triple violates the triangle inequalities (or a
    /// positivity constraint) that carve out the physically realizable
    /// region of the reduced secular space.
    #[error("non-physical secular point: {0}")]
    NonPhysicalPoint(String),

    /// An orbit traced in the reduced plane failed to close onto its
    /// starting section within tolerance.
    #[error("orbit did not close: {0}")]
    NotClosed(String),

    /// A closed-form expression requires the square root of a quantity
    /// that is non-positive at the requested parameters.
    #[error("non-positive radicand in closed-form expression")]
    DegenerateRadicand,

    /// A time series is too short for the requested spectral analysis.
    #[error("series too short: {0}")]
    TooShort(String),

    /// A root/bisection bracket was invalid or failed to converge.
    #[error("root finding failed: {0}")]
    RootFindingFailure(String),

    /// Invalid user-facing parameter (CLI/config layer).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Convenient result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
