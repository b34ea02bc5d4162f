//! Centralized numerical tolerances.
//!
//! Every tolerance used by library validation logic (and by the acceptance
//! tests) is defined here together with its rationale. No ad-hoc magic
//! numbers at call sites: if a threshold needs to change, it changes here,
//! with its justification.
//!
//! Tolerances fall into three tiers:
//!
//! 1. **Algebraic identities** (`1e-12` … `1e-10`): quantities that are
//!    exactly zero in exact arithmetic and accumulate only a handful of
//!    rounding errors. These are scaled by the magnitude of the inputs.
//! 2. **Iterative solvers** (`1e-13` residual): Newton-type iterations run
//!    to near machine precision; the residual tolerance leaves ~30× headroom
//!    over `f64` epsilon for badly conditioned corners.
//! 3. **Discretization-limited oracles** (`1e-9` … `1e-4`): quadrature,
//!    extrapolation and integration results whose accuracy is set by grid
//!    resolution and step control rather than by rounding.

/// Absolute tolerance, scaled by the norm of the quaternion under test, for
/// deciding that a quaternion is purely imaginary (its scalar part is
/// rounding noise rather than signal).
///
/// Rationale: the scalar part of a mapped momentum vanishes identically on
/// the zero level of the bilinear invariant; double-precision evaluation of
/// the defining products leaves a residue of a few ulps, amplified by the
/// state's magnitude. `1e-10` sits four orders of magnitude above that noise
/// floor while still rejecting any genuinely off-level state.
pub const PURE_IMAGINARY_TOL: f64 = 1e-10;

/// Relative tolerance for reconstruction round trips (map ∘ section = id on
/// the section's domain).
///
/// Rationale: both directions are short chains of products, square roots and
/// one division; the composed relative error is a small multiple of machine
/// epsilon (~1e-15). `1e-12` gives three orders of headroom.
pub const KS_ROUNDTRIP_TOL: f64 = 1e-12;

/// Residual tolerance for the Kepler-equation Newton solver, in radians.
///
/// Rationale: Newton converges quadratically once bracketed; the iteration
/// is stopped when the residual `u - e sin u - l` falls below this value,
/// ~450 ulps of 2π, reachable in ≤ 6 iterations for e ≤ 0.999.
pub const KEPLER_RESIDUAL_TOL: f64 = 1e-13;

/// Eccentricities above this value are rejected by the elliptic-element
/// constructors as effectively parabolic/degenerate for the solver contract.
pub const MAX_ECCENTRICITY: f64 = 0.999_999;

/// Relative tolerance on conserved quantities (energy on the zero level,
/// angular-momentum components) over long regularized integrations.
///
/// Rationale: the embedded integrator is run with tighter per-step
/// tolerances (`ODE_RTOL`); drift accumulates as a random walk over ~1e5
/// steps, staying 1–2 orders below this acceptance threshold.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// Default per-step relative tolerance of the adaptive integrator.
pub const ODE_RTOL: f64 = 1e-12;

/// Default per-step absolute tolerance of the adaptive integrator.
pub const ODE_ATOL: f64 = 1e-12;

/// Relative tolerance for closed-form derivative formulas cross-checked
/// against high-order central finite differences of the same closed form.
///
/// Rationale: 4th-order central differences with step ~1e-3 on smooth
/// `O(1)` functions carry truncation error ~1e-12; `1e-8` leaves room for
/// less benign scaling while still catching any algebra slip (which shows
/// up at `O(1)` or `O(step)`).
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-8;

/// Relative tolerance for coefficient-extraction oracles (quadrupolar /
/// octupolar terms recovered from the numerically averaged perturbation by
/// parity splitting and Richardson extrapolation in the axis ratio).
///
/// Rationale: the extrapolation cancels the expansion through three orders;
/// the remaining bias is ~(α/2)^6 ≈ 1e-12 at α = 0.02, far under this
/// threshold, while the averaging quadrature itself converges spectrally.
pub const COEFFICIENT_EXTRACTION_TOL: f64 = 1e-6;

/// Absolute floor under which a squared distance is treated as an exact
/// collision when classifying trajectory events.
pub const COLLISION_EPS: f64 = 1e-300;

/// Relative threshold (against the total action sum) below which an oscillator
/// action is treated as exactly degenerate and the action-angle chart is
/// refused.
///
/// Rationale: the chart's angles lose all meaning only at `I_i = 0`
/// exactly; `1e-13` of the total action is indistinguishable from zero
/// after the arithmetic that produced the `I_i`, while any physically
/// degenerate input (a fiber-aligned oscillator switched off) hits `0`
/// to rounding.
pub const CHART_ACTION_REL_TOL: f64 = 1e-13;

/// Relative threshold for treating orbital elements as degenerate
/// (eccentricity ≈ 0: pericenter undefined; sin i ≈ 0: node undefined;
/// inner angular momentum ≈ 0: orbital plane undefined).
///
/// Rationale: the angle-extraction formulas divide by these quantities;
/// at `1e-12` of their natural scale the quotient retains no correct
/// digits, so the operation reports a tagged degeneracy instead.
pub const ELEMENT_DEGENERACY_TOL: f64 = 1e-12;

/// Relative drift of a monitored first integral (Hamiltonian or bilinear
/// invariant) beyond which an integration aborts with a step failure.
///
/// Rationale: the monitors are diagnostic, not enforced; a drift two
/// orders beyond the advertised `1e-9` budget means the vector field or
/// the step control is wrong, and continuing would silently produce
/// garbage. Aborting keeps such bugs loud.
pub const CONSERVATION_ABORT_TOL: f64 = 1e-7;

/// Default near-collision detection threshold as a fraction of the inner
/// semi-major axis: passages with `‖Q1‖ < fraction · a1` are events.
///
/// Rationale: `1e-2 · a1` corresponds to eccentricity above `1 - 1e-2`,
/// comfortably inside the regime where unregularized integration starts
/// to degrade, while rare enough not to flood the event list.
pub const NEAR_COLLISION_FRACTION: f64 = 1e-2;

/// Inner separation below which a collision passage counts as an exact
/// double collision (`z = 0` hit to rounding).
pub const COLLISION_ZERO_TOL: f64 = 1e-13;

/// Minimum number of samples accepted by the spectral estimator; shorter
/// series cannot resolve even one frequency with a windowed transform.
pub const MIN_SPECTRUM_SAMPLES: usize = 32;

/// Relative slack admitted when validating the secular triangle region,
/// so boundary configurations (coplanar, rectilinear) assembled in
/// floating point still count as physical.
pub const PHYSICAL_REGION_SLACK: f64 = 1e-10;

/// Acceptable relative misfit of the two-term power-law model against the
/// directly computed averages. The model truncates the next order at the
/// largest expansion parameter, so the floor is that truncation (~h²),
/// not rounding.
pub const ALPHA_FIT_RESIDUAL_TOL: f64 = 1e-2;

/// Relative endpoint gap (scaled by the orbit amplitude) below which a
/// traced level curve of the reduced quadrupolar flow counts as closed.
///
/// Rationale: the section-return machinery locates crossings on the
/// ninth-order dense output to near machine precision, so a genuine
/// closed curve closes many orders better than this; a gap at `1e-8`
/// of the amplitude therefore reliably separates closure failures
/// (separatrix starts, budget exhaustion) from rounding.
pub const ORBIT_CLOSURE_TOL: f64 = 1e-8;

/// Relative drift of the reduced Hamiltonian allowed along one traced
/// closed orbit. The planar field is polynomial and the integrator runs
/// at `1e-12` tolerances, so `1e-10` is loose by two orders yet still
/// certifies the first integral.
pub const ORBIT_ENERGY_DRIFT_TOL: f64 = 1e-10;

/// Agreement demanded between the closed-form secular frequency
/// coefficient and its direct periodic-trapezoid quadrature. The
/// integrand is analytic and periodic, so the quadrature converges
/// spectrally and the comparison is limited only by rounding.
pub const TORSION_QUADRATURE_TOL: f64 = 1e-10;

/// Absolute bisection width (in radians, along the `{G1 = 0}` axis) at
/// which the separatrix search stops.
pub const SEPARATRIX_BISECTION_TOL: f64 = 1e-10;
