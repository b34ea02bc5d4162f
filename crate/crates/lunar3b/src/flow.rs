//! Regularized equations of motion and their numerical realization:
//! hand-coded canonical vector field, an adaptive embedded Runge–Kutta
//! integrator of orders 9(8) with ninth-order dense output, conservation
//! monitors, near-collision event detection, physical-time reconstruction,
//! and frequency analysis of quasi-periodic output.
//!
//! # Units and conventions
//!
//! The independent variable of every integration here is the fictitious
//! time `τ` of the regularized system; physical time is reconstructed
//! alongside as `t(τ) = ∫ |z|² dτ` and carried as an extra state
//! component. The dynamical state is the 14-dimensional regularized
//! vector `(z, w, Q2, P2)` with the energy parameter `f` fixed per run.
//! The canonical equations derive from the regularized Hamiltonian `ℱ`
//! with symplectic pairing `Re{dw̄ ∧ dz}` in the quaternionic inner
//! variables and the standard form in the outer pair:
//!
//! ```text
//! dz/dτ  = +∂ℱ/∂w = w/(4 μ1)
//! dw/dτ  = −∂ℱ/∂z = −2 (f₁ + F_pert) z − |z|² Jᵀ∇_{Q1} F_pert
//! dQ2/dτ = +∂ℱ/∂P2 = |z|² P2/μ2
//! dP2/dτ = −∂ℱ/∂Q2 = −|z|² (μ2 M2 Q2/|Q2|³ + ∇_{Q2} F_pert)
//! ```
//!
//! Every right-hand side is polynomial in `z` near the inner collision
//! `z = 0`, so trajectories cross double collisions as regular points.
//!
//! Conservation is monitored, never enforced: the Hamiltonian, the
//! bilinear invariant `BL`, and the total angular momentum are recorded
//! at every accepted step, and a drift of `ℱ` or `BL` beyond
//! [`crate::tol::CONSERVATION_ABORT_TOL`] aborts the run loudly instead
//! of projecting back.

mod tableau;

use crate::error::{Error, Result};
use crate::quat::{bl_form, hopf, hopf_pullback, position_momentum_cross, KSPoint, Quaternion};
use crate::threebody::{
    eval_regularized, pert_gradient, pert_value, MassConfig, RegularizedState,
};
use crate::tol;
use crate::Vec3;

/// Dimension of the packed integration state: `z` (4), `w` (4), `Q2` (3),
/// `P2` (3), and the reconstructed physical time `t` (1).
pub const STATE_DIM: usize = 15;

// ---------------------------------------------------------------------------
// Vector field
// ---------------------------------------------------------------------------

/// Derivative of the regularized state with respect to fictitious time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    /// `dz/dτ`.
    pub dz: Quaternion,
    /// `dw/dτ`.
    pub dw: Quaternion,
    /// `dQ2/dτ`.
    pub dq2: Vec3,
    /// `dP2/dτ`.
    pub dp2: Vec3,
    /// `dt/dτ = |z|²`, the physical-time rate.
    pub dt: f64,
}

/// Canonical vector field of the full regularized Hamiltonian
/// (Keplerian part plus coupling).
///
/// The gradients are hand-coded; see the module doc for the explicit
/// formulas. All components are finite at the inner collision `z = 0`.
///
/// # Errors
///
/// [`Error::OuterCollision`] if `Q2 = 0`; [`Error::CollisionSingular`] if
/// the inner body's mapped position collides with the outer body.
pub fn hamiltonian_field(s: &RegularizedState, m: &MassConfig) -> Result<StateDerivative> {
    field_impl(s, m, true)
}

/// Canonical vector field of the Keplerian (integrable) part alone: four
/// identical harmonic oscillators of angular frequency `√(2 f₁/μ1)/2` in
/// `(z, w)`, decoupled from an outer Kepler problem in reparametrized
/// time.
///
/// # Errors
///
/// [`Error::OuterCollision`] if `Q2 = 0`.
pub fn kepler_field(s: &RegularizedState, m: &MassConfig) -> Result<StateDerivative> {
    field_impl(s, m, false)
}

fn field_impl(s: &RegularizedState, m: &MassConfig, include_pert: bool) -> Result<StateDerivative> {
    let r2sq = s.q2.norm_squared();
    if r2sq == 0.0 {
        return Err(Error::OuterCollision);
    }
    let r2 = r2sq.sqrt();
    let z2 = s.ks.z.norm_sq();
    let f1 = s.f1(m);

    let dz = s.ks.w * (1.0 / (4.0 * m.mu1));
    let mut dw = s.ks.z * (-2.0 * f1);
    let dq2 = s.p2 * (z2 / m.mu2);
    let mut dp2 = s.q2 * (-z2 * m.mu2 * m.big_m2 / (r2sq * r2));

    // The coupling enters multiplied by z or |z|²; at z = 0 exactly its
    // contribution vanishes and the Hopf map need not be evaluated.
    if include_pert && z2 > 0.0 {
        let q1 = hopf(&s.ks.z)?;
        let fp = pert_value(q1, s.q2, m)?;
        let (g1, g2) = pert_gradient(q1, s.q2, m)?;
        dw = dw - s.ks.z * (2.0 * fp) - hopf_pullback(&s.ks.z, g1) * z2;
        dp2 -= z2 * g2;
    }
    Ok(StateDerivative { dz, dw, dq2, dp2, dt: z2 })
}

// ---------------------------------------------------------------------------
// State packing
// ---------------------------------------------------------------------------

pub(crate) fn pack_state(s: &RegularizedState, t: f64) -> [f64; STATE_DIM] {
    let z = s.ks.z.as_array();
    let w = s.ks.w.as_array();
    [
        z[0], z[1], z[2], z[3], w[0], w[1], w[2], w[3], s.q2.x, s.q2.y, s.q2.z, s.p2.x, s.p2.y,
        s.p2.z, t,
    ]
}

pub(crate) fn unpack_state(y: &[f64; STATE_DIM], f: f64) -> RegularizedState {
    RegularizedState {
        ks: KSPoint::new_unchecked(
            Quaternion::new(y[0], y[1], y[2], y[3]),
            Quaternion::new(y[4], y[5], y[6], y[7]),
        ),
        q2: Vec3::new(y[8], y[9], y[10]),
        p2: Vec3::new(y[11], y[12], y[13]),
        f,
    }
}

fn pack_derivative(d: &StateDerivative) -> [f64; STATE_DIM] {
    let dz = d.dz.as_array();
    let dw = d.dw.as_array();
    [
        dz[0], dz[1], dz[2], dz[3], dw[0], dw[1], dw[2], dw[3], d.dq2.x, d.dq2.y, d.dq2.z,
        d.dp2.x, d.dp2.y, d.dp2.z, d.dt,
    ]
}

/// Total angular momentum `C̄ = Q1 × P1 + Q2 × P2` of a regularized
/// state, evaluated in the polynomial form that stays smooth through the
/// inner collision.
pub fn total_angular_momentum(s: &RegularizedState) -> Vec3 {
    position_momentum_cross(&s.ks.z, &s.ks.w) + s.q2.cross(&s.p2)
}

// ---------------------------------------------------------------------------
// Adaptive embedded Runge–Kutta driver with dense output
// ---------------------------------------------------------------------------

/// Step-size and budget control for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    /// Relative tolerance of the per-step error test.
    pub rtol: f64,
    /// Absolute tolerance of the per-step error test.
    pub atol: f64,
    /// Optional hard cap on the step size (also the sampling density of
    /// the recorded output).
    pub max_step: Option<f64>,
    /// Total step budget (accepted plus rejected).
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: tol::ODE_RTOL,
            atol: tol::ODE_ATOL,
            max_step: None,
            max_steps: 5_000_000,
        }
    }
}

/// Counters reported by the driver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// One accepted step with its dense-output data, borrowed from the
/// driver's working storage and valid only inside the step callback.
pub(crate) struct DenseStep<'a, const N: usize> {
    /// Left endpoint of the step.
    pub t0: f64,
    /// Step length.
    pub h: f64,
    /// State at the left endpoint.
    pub y0: &'a [f64; N],
    /// Ninth-order state at the right endpoint (what the driver advances
    /// with).
    pub y_end: &'a [f64; N],
    /// All stage derivatives, including the extra interpolation stages.
    pub k: &'a [[f64; N]; tableau::DENSE_STAGES],
}

impl<const N: usize> DenseStep<'_, N> {
    /// Interpolated state at `t ∈ [t0, t0 + h]`; ninth-order accurate,
    /// exact to rounding at both endpoints.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let mut out = *self.y0;
        for (i, poly) in tableau::B_DENSE.iter().enumerate() {
            let mut acc = poly[tableau::ORDER - 1];
            for j in (0..tableau::ORDER - 1).rev() {
                acc = poly[j] + s * acc;
            }
            let weight = s * acc * self.h;
            for c in 0..N {
                out[c] += weight * self.k[i][c];
            }
        }
        out
    }
}

const MAX_CONSECUTIVE_REJECTS: usize = 100;
const STEP_SAFETY: f64 = 0.9;
const MIN_STEP_SCALE: f64 = 0.2;
const MAX_STEP_SCALE: f64 = 10.0;

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` with the embedded
/// 9(8) pair, invoking `on_step` after every accepted step. The callback
/// returns `Ok(false)` to stop early (the driver then returns the state
/// at the end of that step), `Ok(true)` to continue.
///
/// Right-hand-side failures during trial stages are treated as step
/// rejections (the step is retried smaller), so an integration can skirt
/// singular sets it does not actually have to cross; persistent failure
/// becomes [`Error::StepFailure`].
pub(crate) fn integrate_adaptive<const N: usize, F, CB>(
    f: &mut F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    on_step: &mut CB,
) -> Result<([f64; N], IntegrationStats)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    CB: FnMut(&DenseStep<'_, N>) -> Result<bool>,
{
    use tableau::{A, A_DENSE, B_HIGH, B_LOW, C, C_DENSE, DENSE_STAGES, EXTRA_STAGES, STAGES};

    if !t0.is_finite() || !t_end.is_finite() || !(t_end > t0) {
        return Err(Error::InvalidParameter(format!(
            "integration span must be finite with t_end > t0, got [{t0}, {t_end}]"
        )));
    }
    if !(ctl.rtol > 0.0) || !(ctl.atol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerances must be positive, got rtol = {}, atol = {}",
            ctl.rtol, ctl.atol
        )));
    }

    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0_f64; N]; DENSE_STAGES];
    let mut dydt = f(t, &y)?;
    stats.evaluations += 1;
    let mut h = initial_step(f, t, &y, &dydt, t_end - t0, ctl, &mut stats);
    let mut consecutive_rejects = 0_usize;
    let span_scale = t_end.abs().max(1.0);

    loop {
        let remaining = t_end - t;
        if remaining <= 32.0 * f64::EPSILON * span_scale {
            break;
        }
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::StepFailure(format!(
                "step budget {} exhausted at t = {t:.6e}",
                ctl.max_steps
            )));
        }
        if let Some(hm) = ctl.max_step {
            h = h.min(hm);
        }
        h = h.min(remaining);
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepFailure(format!(
                "step size underflow (h = {h:.3e}) at t = {t:.6e}"
            )));
        }

        k[0] = dydt;
        let mut failure: Option<String> = None;
        for i in 1..STAGES {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = A[i][j];
                if a != 0.0 {
                    let ah = a * h;
                    for c in 0..N {
                        ys[c] += ah * kj[c];
                    }
                }
            }
            match f(t + C[i] * h, &ys) {
                Ok(v) => {
                    stats.evaluations += 1;
                    k[i] = v;
                }
                Err(e) => {
                    failure = Some(format!("stage {i}: {e}"));
                    break;
                }
            }
        }

        let mut err_norm = f64::INFINITY;
        let mut y_high = y;
        if failure.is_none() {
            let mut y_low = y;
            for i in 0..STAGES {
                let (bh, bl) = (B_HIGH[i] * h, B_LOW[i] * h);
                for c in 0..N {
                    y_high[c] += bh * k[i][c];
                    y_low[c] += bl * k[i][c];
                }
            }
            err_norm = 0.0;
            for c in 0..N {
                let scale = ctl.atol + ctl.rtol * y[c].abs().max(y_high[c].abs());
                err_norm = err_norm.max((y_high[c] - y_low[c]).abs() / scale);
            }
            if !err_norm.is_finite() || y_high.iter().any(|v| !v.is_finite()) {
                failure = Some("non-finite state or error estimate".into());
            }
        }

        let accept = failure.is_none() && err_norm <= 1.0;
        if accept {
            // Extra stages for the dense-output polynomial; later rows may
            // reference earlier extra stages, so the order matters.
            for i in 0..EXTRA_STAGES {
                let mut ys = y;
                let row = &A_DENSE[i];
                for (j, kj) in k.iter().enumerate().take(STAGES + i) {
                    let a = row[j];
                    if a != 0.0 {
                        let ah = a * h;
                        for c in 0..N {
                            ys[c] += ah * kj[c];
                        }
                    }
                }
                match f(t + C_DENSE[i] * h, &ys) {
                    Ok(v) => {
                        stats.evaluations += 1;
                        k[STAGES + i] = v;
                    }
                    Err(e) => {
                        failure = Some(format!("interpolation stage {i}: {e}"));
                        break;
                    }
                }
            }
        }

        if let Some(msg) = failure {
            stats.rejected += 1;
            consecutive_rejects += 1;
            if consecutive_rejects > MAX_CONSECUTIVE_REJECTS {
                return Err(Error::StepFailure(format!(
                    "{MAX_CONSECUTIVE_REJECTS} consecutive rejected steps at t = {t:.6e}; last failure: {msg}"
                )));
            }
            h *= MIN_STEP_SCALE;
            continue;
        }

        let scale = (STEP_SAFETY * err_norm.powf(-1.0 / tableau::ORDER as f64))
            .clamp(MIN_STEP_SCALE, MAX_STEP_SCALE);
        if !accept {
            stats.rejected += 1;
            consecutive_rejects += 1;
            if consecutive_rejects > MAX_CONSECUTIVE_REJECTS {
                return Err(Error::StepFailure(format!(
                    "{MAX_CONSECUTIVE_REJECTS} consecutive rejected steps at t = {t:.6e}; error norm {err_norm:.3e}"
                )));
            }
            h *= scale;
            continue;
        }

        consecutive_rejects = 0;
        stats.accepted += 1;
        let keep_going = {
            let step = DenseStep {
                t0: t,
                h,
                y0: &y,
                y_end: &y_high,
                k: &k,
            };
            on_step(&step)?
        };
        t += h;
        y = y_high;
        if !keep_going {
            break;
        }
        if t_end - t <= 32.0 * f64::EPSILON * span_scale {
            break;
        }
        dydt = f(t, &y)?;
        stats.evaluations += 1;
        h *= scale;
    }
    Ok((y, stats))
}

/// Starting step-size heuristic: match the scaled magnitudes of the state
/// and its first two derivative estimates (one trial Euler step).
fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    dydt0: &[f64; N],
    span: f64,
    ctl: &StepControl,
    stats: &mut IntegrationStats,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut d0 = 0.0_f64;
    let mut d1 = 0.0_f64;
    for c in 0..N {
        let sc = ctl.atol + ctl.rtol * y0[c].abs();
        d0 = d0.max(y0[c].abs() / sc);
        d1 = d1.max(dydt0[c].abs() / sc);
    }
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let mut y1 = *y0;
    for c in 0..N {
        y1[c] += h0 * dydt0[c];
    }
    let h1 = match f(t0 + h0, &y1) {
        Ok(f1) => {
            stats.evaluations += 1;
            let mut d2 = 0.0_f64;
            for c in 0..N {
                let sc = ctl.atol + ctl.rtol * y0[c].abs();
                d2 = d2.max((f1[c] - dydt0[c]).abs() / sc);
            }
            d2 /= h0;
            if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(1.0 / tableau::ORDER as f64)
            }
        }
        Err(_) => h0,
    };
    let mut h = (100.0 * h0).min(h1).min(span);
    if let Some(hm) = ctl.max_step {
        h = h.min(hm);
    }
    h
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// Options of [`integrate_with_options`] beyond the span and tolerance.
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Integrate the full Hamiltonian (`true`) or its Keplerian part only.
    pub include_pert: bool,
    /// Optional cap on the step in `τ`; also bounds the output sample
    /// spacing, which matters for event post-processing.
    pub max_step: Option<f64>,
    /// Total step budget (accepted plus rejected).
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            include_pert: true,
            max_step: None,
            max_steps: 5_000_000,
        }
    }
}

/// Largest relative drifts of the monitored first integrals over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MonitorDrift {
    /// Hamiltonian drift relative to the run's energy scale.
    pub hamiltonian: f64,
    /// Bilinear-invariant drift relative to the run's action scale.
    pub bilinear: f64,
    /// Worst angular-momentum component drift relative to `‖C̄‖`-scale.
    pub angular_momentum: f64,
}

/// A regularized trajectory: states sampled at every accepted step,
/// reconstructed physical time, and conservation monitors.
///
/// `t` is strictly increasing wherever `z ≠ 0` (the time change
/// `dt = |z|² dτ` degenerates only at collisions themselves).
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Mass configuration of the run.
    pub masses: MassConfig,
    /// Energy parameter `f` of the regularized Hamiltonian.
    pub energy_parameter: f64,
    /// Fictitious times of the samples (initial point plus every accepted
    /// step end).
    pub tau: Vec<f64>,
    /// Reconstructed physical time, starting at `0`.
    pub t: Vec<f64>,
    /// Regularized states at the samples.
    pub states: Vec<RegularizedState>,
    /// Monitored Hamiltonian at the samples (the part actually
    /// integrated: full `ℱ`, or its Keplerian part for a coupling-free
    /// run).
    pub hamiltonian: Vec<f64>,
    /// Bilinear invariant `BL` at the samples.
    pub bilinear: Vec<f64>,
    /// Total angular momentum at the samples.
    pub angular_momentum: Vec<Vec3>,
    /// Inner separation `‖Q1‖ = |z|²` at the samples.
    pub inner_radius: Vec<f64>,
    /// Largest relative drifts observed.
    pub drift: MonitorDrift,
    /// Accepted step count.
    pub accepted_steps: usize,
    /// Rejected step count.
    pub rejected_steps: usize,
    /// Vector-field evaluation count.
    pub field_evaluations: usize,
}

/// Integrate the full regularized flow over `tau_span = (τ0, τ1)` at
/// relative/absolute tolerance `tol`, recording states and monitors at
/// every accepted step.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for a bad span or tolerance;
/// [`Error::OuterCollision`] / [`Error::CollisionSingular`] if the run
/// reaches a singular configuration; [`Error::StepFailure`] if the step
/// control cannot maintain the tolerance or a monitored invariant drifts
/// beyond [`tol::CONSERVATION_ABORT_TOL`].
pub fn integrate(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
) -> Result<Trajectory> {
    integrate_with_options(s0, m, tau_span, tol_scale, &IntegrateOptions::default())
}

/// [`integrate`] with the coupling switched off: the integrable reference
/// flow (inner oscillators plus outer Kepler).
pub fn integrate_kepler(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
) -> Result<Trajectory> {
    integrate_with_options(
        s0,
        m,
        tau_span,
        tol_scale,
        &IntegrateOptions {
            include_pert: false,
            ..IntegrateOptions::default()
        },
    )
}

/// [`integrate`] with explicit [`IntegrateOptions`].
pub fn integrate_with_options(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(tol_scale > 0.0) || !tol_scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration tolerance must be positive and finite, got {tol_scale}"
        )));
    }
    let include_pert = opts.include_pert;
    let f_param = s0.f;

    // Monitor scales, frozen at the initial state. The Hamiltonian scale
    // sums the magnitudes of the energy contributions (the total itself is
    // ≈ 0 on the physical level set); the action scale stays positive for
    // rectilinear starts with z = 0.
    let f1_0 = s0.f1(m);
    let ham_scale =
        s0.ks.w.norm_sq() / (8.0 * m.mu1) + f1_0.abs() * s0.ks.z.norm_sq() + m.mu1 * m.big_m1;
    let bl_scale = (0.5 * (s0.ks.z.norm_sq() + s0.ks.w.norm_sq())).max(f64::MIN_POSITIVE);
    let ang_scale = (0.5 * s0.ks.z.norm() * s0.ks.w.norm() + s0.q2.norm() * s0.p2.norm())
        .max(f64::MIN_POSITIVE);

    let parts0 = eval_regularized(s0, m)?;
    let ham0 = parts0.kep + if include_pert { parts0.pert } else { 0.0 };
    let bl0 = bl_form(&s0.ks.z, &s0.ks.w);
    let c0 = total_angular_momentum(s0);

    let mut tau_v: Vec<f64> = Vec::new();
    let mut t_v: Vec<f64> = Vec::new();
    let mut states_v: Vec<RegularizedState> = Vec::new();
    let mut ham_v: Vec<f64> = Vec::new();
    let mut bl_v: Vec<f64> = Vec::new();
    let mut ang_v: Vec<Vec3> = Vec::new();
    let mut radius_v: Vec<f64> = Vec::new();
    let mut drift = MonitorDrift::default();

    let mut record = |tau: f64, y: &[f64; STATE_DIM]| -> Result<()> {
        let st = unpack_state(y, f_param);
        let parts = eval_regularized(&st, m)?;
        let ham = parts.kep + if include_pert { parts.pert } else { 0.0 };
        let bl = bl_form(&st.ks.z, &st.ks.w);
        let c = total_angular_momentum(&st);
        let dh = (ham - ham0).abs() / ham_scale;
        let dbl = (bl - bl0).abs() / bl_scale;
        let dc = (c - c0).abs().max() / ang_scale;
        drift.hamiltonian = drift.hamiltonian.max(dh);
        drift.bilinear = drift.bilinear.max(dbl);
        drift.angular_momentum = drift.angular_momentum.max(dc);
        if dh > tol::CONSERVATION_ABORT_TOL || dbl > tol::CONSERVATION_ABORT_TOL {
            return Err(Error::StepFailure(format!(
                "conservation monitor exceeded abort threshold at τ = {tau:.6e}: \
                 Hamiltonian drift {dh:.3e}, bilinear drift {dbl:.3e} \
                 (threshold {:.1e})",
                tol::CONSERVATION_ABORT_TOL
            )));
        }
        tau_v.push(tau);
        t_v.push(y[STATE_DIM - 1]);
        radius_v.push(st.ks.z.norm_sq());
        states_v.push(st);
        ham_v.push(ham);
        bl_v.push(bl);
        ang_v.push(c);
        Ok(())
    };

    let y0 = pack_state(s0, 0.0);
    record(tau_span.0, &y0)?;

    let ctl = StepControl {
        rtol: tol_scale,
        atol: tol_scale,
        max_step: opts.max_step,
        max_steps: opts.max_steps,
    };
    let mut rhs = |_tau: f64, y: &[f64; STATE_DIM]| -> Result<[f64; STATE_DIM]> {
        let st = unpack_state(y, f_param);
        Ok(pack_derivative(&field_impl(&st, m, include_pert)?))
    };
    let (_y_final, stats) = integrate_adaptive(
        &mut rhs,
        tau_span.0,
        y0,
        tau_span.1,
        &ctl,
        &mut |step: &DenseStep<'_, STATE_DIM>| {
            record(step.t0 + step.h, step.y_end)?;
            Ok(true)
        },
    )?;

    Ok(Trajectory {
        masses: *m,
        energy_parameter: f_param,
        tau: tau_v,
        t: t_v,
        states: states_v,
        hamiltonian: ham_v,
        bilinear: bl_v,
        angular_momentum: ang_v,
        inner_radius: radius_v,
        drift,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        field_evaluations: stats.evaluations,
    })
}

/// A run resampled on a uniform `τ` grid via dense output, for spectral
/// diagnostics. No monitors are recorded here; use [`integrate`] when
/// conservation matters.
#[derive(Debug, Clone)]
pub struct SampledRun {
    /// Uniform sample times in `τ`.
    pub tau: Vec<f64>,
    /// Reconstructed physical time at the samples.
    pub t: Vec<f64>,
    /// Regularized states at the samples.
    pub states: Vec<RegularizedState>,
}

/// Integrate the full flow and return `n_samples` states on a uniform
/// `τ` grid over `tau_span` (endpoints included), using the integrator's
/// ninth-order interpolant between accepted steps.
///
/// # Errors
///
/// As [`integrate`], plus [`Error::InvalidParameter`] if `n_samples < 2`.
pub fn integrate_resampled(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
    n_samples: usize,
) -> Result<SampledRun> {
    resampled_impl(s0, m, tau_span, tol_scale, n_samples, true)
}

/// Coupling-free variant of [`integrate_resampled`], for tests and
/// integrable-reference diagnostics.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn integrate_resampled_kepler(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
    n_samples: usize,
) -> Result<SampledRun> {
    resampled_impl(s0, m, tau_span, tol_scale, n_samples, false)
}

fn resampled_impl(
    s0: &RegularizedState,
    m: &MassConfig,
    tau_span: (f64, f64),
    tol_scale: f64,
    n_samples: usize,
    include_pert: bool,
) -> Result<SampledRun> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "resampling needs at least 2 samples, got {n_samples}"
        )));
    }
    if !(tol_scale > 0.0) || !tol_scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration tolerance must be positive and finite, got {tol_scale}"
        )));
    }
    let f_param = s0.f;
    let (tau0, tau1) = tau_span;
    let dt = (tau1 - tau0) / (n_samples - 1) as f64;
    let grid: Vec<f64> = (0..n_samples).map(|i| tau0 + dt * i as f64).collect();

    let mut tau_v = vec![grid[0]];
    let mut t_v = vec![0.0];
    let mut states_v = vec![*s0];
    let mut idx = 1_usize;

    let y0 = pack_state(s0, 0.0);
    let ctl = StepControl {
        rtol: tol_scale,
        atol: tol_scale,
        ..StepControl::default()
    };
    let mut rhs = |_tau: f64, y: &[f64; STATE_DIM]| -> Result<[f64; STATE_DIM]> {
        let st = unpack_state(y, f_param);
        Ok(pack_derivative(&field_impl(&st, m, include_pert)?))
    };
    let slack = 64.0 * f64::EPSILON * tau1.abs().max(1.0);
    let (y_final, _stats) = integrate_adaptive(
        &mut rhs,
        tau0,
        y0,
        tau1,
        &ctl,
        &mut |step: &DenseStep<'_, STATE_DIM>| {
            while idx < n_samples && grid[idx] <= step.t0 + step.h + slack {
                let y = step.eval(grid[idx]);
                tau_v.push(grid[idx]);
                t_v.push(y[STATE_DIM - 1]);
                states_v.push(unpack_state(&y, f_param));
                idx += 1;
            }
            Ok(true)
        },
    )?;
    // Cover any trailing grid point lost to endpoint rounding.
    while idx < n_samples {
        tau_v.push(grid[idx]);
        t_v.push(y_final[STATE_DIM - 1]);
        states_v.push(unpack_state(&y_final, f_param));
        idx += 1;
    }
    Ok(SampledRun {
        tau: tau_v,
        t: t_v,
        states: states_v,
    })
}

// ---------------------------------------------------------------------------
// Near-collision events
// ---------------------------------------------------------------------------

/// One near-collision passage: a local minimum of the inner separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    /// Fictitious time of the (interpolated) minimum.
    pub tau: f64,
    /// Interpolated minimum of `‖Q1‖ = |z|²` (clamped at zero).
    pub min_separation: f64,
    /// Whether the passage is an exact double collision to within
    /// [`tol::COLLISION_ZERO_TOL`].
    pub exact_zero: bool,
}

/// Result of scanning a trajectory for near-collision passages.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionScan {
    /// Local minima of the inner separation below the threshold, in time
    /// order, with quadratically interpolated minimum values.
    pub events: Vec<CollisionEvent>,
    /// Global minimum separation over the run (interpolated where an
    /// event refines it).
    pub global_min: f64,
    /// Fictitious time of the global minimum.
    pub global_min_tau: f64,
    /// Whether any passage reached `z = 0` to within
    /// [`tol::COLLISION_ZERO_TOL`].
    pub hit_exact_zero: bool,
}

/// Scan a trajectory's sampled inner separation `|z|²` for local minima
/// below `threshold`, refining each through the parabola fitted to the
/// three neighboring samples. A natural threshold is
/// [`tol::NEAR_COLLISION_FRACTION`]` · a1`.
///
/// The refinement is only as good as the sampling: with sample spacing
/// `Δτ` the interpolated minimum carries an `O(Δτ⁴)` bias, so runs meant
/// for collision forensics should cap the step (see
/// [`IntegrateOptions::max_step`]).
pub fn near_collision_events(traj: &Trajectory, threshold: f64) -> CollisionScan {
    let r = &traj.inner_radius;
    let n = r.len();
    let mut scan = CollisionScan {
        events: Vec::new(),
        global_min: f64::INFINITY,
        global_min_tau: 0.0,
        hit_exact_zero: false,
    };
    for i in 0..n {
        if r[i] < scan.global_min {
            scan.global_min = r[i];
            scan.global_min_tau = traj.tau[i];
        }
    }
    if scan.global_min < tol::COLLISION_ZERO_TOL {
        scan.hit_exact_zero = true;
    }
    for i in 1..n.saturating_sub(1) {
        // Plateau-safe local-minimum test: weak on the left, strict on the
        // right, so a flat run of equal samples yields one event.
        if !(r[i] <= r[i - 1] && r[i] <= r[i + 1] && (r[i] < r[i - 1] || r[i] < r[i + 1])) {
            continue;
        }
        if r[i] >= threshold {
            continue;
        }
        let (x0, x1, x2) = (traj.tau[i - 1], traj.tau[i], traj.tau[i + 1]);
        let (y0, y1, y2) = (r[i - 1], r[i], r[i + 1]);
        let d1 = (y1 - y0) / (x1 - x0);
        let d2 = (y2 - y1) / (x2 - x1);
        let c2 = (d2 - d1) / (x2 - x0);
        let (tau_min, val_min) = if c2 > 0.0 {
            let xs = (0.5 * (x0 + x1) - d1 / (2.0 * c2)).clamp(x0, x2);
            let ys = y0 + d1 * (xs - x0) + c2 * (xs - x0) * (xs - x1);
            (xs, ys.max(0.0))
        } else {
            (x1, y1)
        };
        let exact = val_min < tol::COLLISION_ZERO_TOL;
        scan.hit_exact_zero |= exact;
        if val_min < scan.global_min {
            scan.global_min = val_min;
            scan.global_min_tau = tau_min;
        }
        scan.events.push(CollisionEvent {
            tau: tau_min,
            min_separation: val_min,
            exact_zero: exact,
        });
    }
    scan
}

// ---------------------------------------------------------------------------
// Frequency analysis
// ---------------------------------------------------------------------------

/// One spectral peak of a uniformly sampled series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPeak {
    /// Angular frequency, in radians per unit of the sample spacing.
    pub frequency: f64,
    /// Amplitude of the fitted sinusoid.
    pub amplitude: f64,
}

/// Peaks plus the goodness of the joint sinusoidal fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    /// Detected peaks, strongest first.
    pub peaks: Vec<FrequencyPeak>,
    /// Relative root-mean-square misfit of the joint model (linear trend
    /// plus one sinusoid per peak) against the detrended series.
    pub residual: f64,
}

/// Fraction of the dominant periodogram power below which candidate peaks
/// are ignored (≈ 40 dB dynamic range, past the window's sidelobes).
const PEAK_POWER_FLOOR: f64 = 1e-8;
/// Maximum number of reported peaks.
const MAX_PEAKS: usize = 8;

/// Estimate the fundamental frequencies of a uniformly sampled series by
/// a windowed spectral fit: Hann-windowed, zero-padded FFT for peak
/// localization, then per-peak maximization of the windowed transform
/// magnitude, then a joint least-squares sinusoid fit for amplitudes and
/// the residual.
///
/// `dt` is the sample spacing; reported frequencies are angular
/// (radians per unit of `dt`'s time). The series is linearly detrended
/// first, so slowly winding unwrapped angles are acceptable input.
///
/// # Errors
///
/// [`Error::TooShort`] below [`tol::MIN_SPECTRUM_SAMPLES`] samples;
/// [`Error::InvalidParameter`] for a non-positive sample spacing.
pub fn frequency_estimate(series: &[f64], dt: f64) -> Result<FrequencyReport> {
    let n = series.len();
    if n < tol::MIN_SPECTRUM_SAMPLES {
        return Err(Error::TooShort(format!(
            "{n} samples; spectral estimation needs at least {}",
            tol::MIN_SPECTRUM_SAMPLES
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sample spacing must be positive and finite, got {dt}"
        )));
    }

    // Linear detrend (least squares).
    let nf = n as f64;
    let k_mean = 0.5 * (nf - 1.0);
    let y_mean = series.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, &y) in series.iter().enumerate() {
        let dk = k as f64 - k_mean;
        sxx += dk * dk;
        sxy += dk * (y - y_mean);
    }
    let slope = sxy / sxx;
    let detrended: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(k, &y)| y - y_mean - slope * (k as f64 - k_mean))
        .collect();

    let max_abs = detrended.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let input_scale = series.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if max_abs <= 1e-12 * (1.0 + input_scale) {
        return Ok(FrequencyReport {
            peaks: Vec::new(),
            residual: 0.0,
        });
    }

    // Hann window.
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / (nf - 1.0)).cos()))
        .collect();

    // Zero-padded periodogram.
    let m = (4 * n).next_power_of_two();
    let mut re = vec![0.0_f64; m];
    let mut im = vec![0.0_f64; m];
    for k in 0..n {
        re[k] = detrended[k] * window[k];
    }
    fft_in_place(&mut re, &mut im);
    let half = m / 2;
    let power: Vec<f64> = (0..half).map(|j| re[j] * re[j] + im[j] * im[j]).collect();
    let p_max = power[1..].iter().fold(0.0_f64, |a, &v| a.max(v));
    if p_max == 0.0 {
        return Ok(FrequencyReport {
            peaks: Vec::new(),
            residual: 0.0,
        });
    }

    // Candidate peaks: local maxima above the power floor, kept clear of
    // already-accepted stronger peaks by more than two window main-lobe
    // widths (Hann sidelobes decay fast enough to be excluded by then).
    let pad_ratio = (m / n).max(1);
    let exclusion = 8 * pad_ratio;
    let mut candidates: Vec<usize> = (2..half - 1)
        .filter(|&j| power[j] > power[j - 1] && power[j] >= power[j + 1])
        .filter(|&j| power[j] >= PEAK_POWER_FLOOR * p_max)
        .collect();
    candidates.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    let mut accepted_bins: Vec<usize> = Vec::new();
    for j in candidates {
        if accepted_bins.len() >= MAX_PEAKS {
            break;
        }
        if accepted_bins.iter().all(|&b| b.abs_diff(j) > exclusion) {
            accepted_bins.push(j);
        }
    }

    // Refine each peak: ternary-search maximization of the windowed
    // transform magnitude over one natural bin around the FFT estimate.
    let two_pi = 2.0 * std::f64::consts::PI;
    let bin_width = two_pi / nf; // natural (unpadded) bin, rad/sample
    let mut thetas: Vec<f64> = Vec::new();
    for &j in &accepted_bins {
        let theta0 = two_pi * j as f64 / m as f64;
        let mut lo = (theta0 - bin_width).max(0.25 * two_pi / m as f64);
        let mut hi = (theta0 + bin_width).min(std::f64::consts::PI);
        for _ in 0..70 {
            let t1 = lo + (hi - lo) / 3.0;
            let t2 = hi - (hi - lo) / 3.0;
            if windowed_power(&detrended, &window, t1) < windowed_power(&detrended, &window, t2) {
                lo = t1;
            } else {
                hi = t2;
            }
        }
        let theta = 0.5 * (lo + hi);
        // Drop refinements that collapsed onto an earlier peak.
        if thetas.iter().all(|&t| (t - theta).abs() > 0.5 * bin_width) {
            thetas.push(theta);
        }
    }

    // Joint least-squares fit: linear trend + one sinusoid per frequency.
    let rhs = nalgebra::DVector::<f64>::from_column_slice(&detrended);
    let solve = |ths: &[f64]| -> Result<(nalgebra::DVector<f64>, nalgebra::DVector<f64>)> {
        let cols = 2 + 2 * ths.len();
        let mut design = nalgebra::DMatrix::<f64>::zeros(n, cols);
        for k in 0..n {
            design[(k, 0)] = 1.0;
            design[(k, 1)] = k as f64 / nf;
            for (j, &theta) in ths.iter().enumerate() {
                let ph = theta * k as f64;
                design[(k, 2 + 2 * j)] = ph.cos();
                design[(k, 3 + 2 * j)] = ph.sin();
            }
        }
        let svd = design.clone().svd(true, true);
        let coeffs = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::RootFindingFailure(format!("spectral least-squares solve: {e}")))?;
        let fitted = design * &coeffs;
        Ok((coeffs, fitted))
    };
    let (mut coeffs, mut fitted) = solve(&thetas)?;

    // Leakage-removal refinement: re-maximize each peak on the series with
    // every other fitted component subtracted, then refit. Two rounds push
    // the inter-tone bias of the window transform below rounding level.
    for _ in 0..2 {
        for j in 0..thetas.len() {
            let mut cleaned = detrended.clone();
            for (k, c) in cleaned.iter_mut().enumerate() {
                let mut other = coeffs[0] + coeffs[1] * k as f64 / nf;
                for (l, &th) in thetas.iter().enumerate() {
                    if l != j {
                        let ph = th * k as f64;
                        other += coeffs[2 + 2 * l] * ph.cos() + coeffs[3 + 2 * l] * ph.sin();
                    }
                }
                *c -= other;
            }
            let mut lo = (thetas[j] - bin_width).max(0.25 * two_pi / m as f64);
            let mut hi = (thetas[j] + bin_width).min(std::f64::consts::PI);
            for _ in 0..70 {
                let t1 = lo + (hi - lo) / 3.0;
                let t2 = hi - (hi - lo) / 3.0;
                if windowed_power(&cleaned, &window, t1) < windowed_power(&cleaned, &window, t2) {
                    lo = t1;
                } else {
                    hi = t2;
                }
            }
            thetas[j] = 0.5 * (lo + hi);
        }
        let (c, f) = solve(&thetas)?;
        coeffs = c;
        fitted = f;
    }
    let misfit = (&rhs - &fitted).norm();
    let signal = rhs.norm().max(f64::MIN_POSITIVE);

    let mut peaks: Vec<FrequencyPeak> = thetas
        .iter()
        .enumerate()
        .map(|(j, &theta)| FrequencyPeak {
            frequency: theta / dt,
            amplitude: coeffs[2 + 2 * j].hypot(coeffs[3 + 2 * j]),
        })
        .collect();
    peaks.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));

    Ok(FrequencyReport {
        peaks,
        residual: misfit / signal,
    })
}

/// Squared magnitude of the Hann-windowed discrete-time transform of `d`
/// at normalized angular frequency `theta` (radians per sample).
fn windowed_power(d: &[f64], window: &[f64], theta: f64) -> f64 {
    let mut sr = 0.0;
    let mut si = 0.0;
    for (k, (&x, &wk)) in d.iter().zip(window).enumerate() {
        let ph = theta * k as f64;
        sr += x * wk * ph.cos();
        si -= x * wk * ph.sin();
    }
    sr * sr + si * si
}

/// In-place radix-2 Cooley–Tukey FFT; `re.len()` must be a power of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two() && im.len() == n);
    // Bit-reversal permutation.
    let mut j = 0_usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (wlen_im, wlen_re) = ang.sin_cos();
        let mut i = 0;
        while i < n {
            let mut wr = 1.0_f64;
            let mut wi = 0.0_f64;
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr0, vi0) = (re[i + k + len / 2], im[i + k + len / 2]);
                let vr = vr0 * wr - vi0 * wi;
                let vi = vr0 * wi + vi0 * wr;
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let nwr = wr * wlen_re - wi * wlen_im;
                wi = wr * wlen_im + wi * wlen_re;
                wr = nwr;
            }
            i += len;
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{angle_diff, kepler_frequencies, oscillator_propagate, regular_from_ks};
    use crate::quat::ks_inverse;
    use crate::quat::CartesianPair;
    use crate::threebody::{eval_f, JacobiState};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    /// Deterministic low-discrepancy sequence in [0, 1).
    fn weyl(state: &mut f64) -> f64 {
        *state = (*state + FRAC_1_SQRT_2).fract();
        *state
    }

    fn masses() -> MassConfig {
        MassConfig::new(1.0, 0.8, 1.3).unwrap()
    }

    /// Rotation taking the perifocal frame to space axes:
    /// `Rz(node) Rx(incl) Rz(argp)`.
    fn orbit_rotation(node: f64, incl: f64, argp: f64) -> nalgebra::Rotation3<f64> {
        nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), node)
            * nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), incl)
            * nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), argp)
    }

    /// Cartesian position/momentum on an ellipse of the two-body problem
    /// with gravitational parameter `gm` and reduced mass `mu`, at
    /// eccentric anomaly `u`.
    fn elliptic_state(
        a: f64,
        e: f64,
        node: f64,
        incl: f64,
        argp: f64,
        u: f64,
        gm: f64,
        mu: f64,
    ) -> (Vec3, Vec3) {
        let eps = (1.0 - e * e).sqrt();
        let r = a * (1.0 - e * u.cos());
        let rot = orbit_rotation(node, incl, argp);
        let pos = rot * Vec3::new(a * (u.cos() - e), a * eps * u.sin(), 0.0);
        let vel = rot * Vec3::new(-u.sin(), eps * u.cos(), 0.0) * ((gm * a).sqrt() / r);
        (pos, vel * mu)
    }

    /// Hierarchical regularized state: inner ellipse of semi-major axis 1
    /// mapped through the KS inverse, outer ellipse of semi-major axis
    /// `1/alpha`, with `f` set so that the full Hamiltonian vanishes
    /// (physical energy level).
    fn hierarchical_state(
        m: &MassConfig,
        alpha: f64,
        e1: f64,
        incl1: f64,
        u1: f64,
        e2: f64,
        u2: f64,
    ) -> RegularizedState {
        let (q1, p1) = elliptic_state(1.0, e1, 0.3, incl1, 0.7, u1, m.big_m1, m.mu1);
        let (q2, p2) = elliptic_state(1.0 / alpha, e2, 1.1, 0.25, 0.4, u2, m.big_m2, m.mu2);
        let ks = ks_inverse(&CartesianPair { q: q1, p: p1 }).unwrap();
        let z2 = ks.z.norm_sq();
        let outer_energy = p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / q2.norm();
        let fp = pert_value(q1, q2, m).unwrap();
        let f = (m.mu1 * m.big_m1 - ks.w.norm_sq() / (8.0 * m.mu1)) / z2 - outer_energy - fp;
        RegularizedState { ks, p2, q2, f }
    }

    #[test]
    fn tableau_is_internally_consistent() {
        for i in 0..tableau::STAGES {
            let row_sum: f64 = tableau::A[i].iter().sum();
            assert!(
                (row_sum - tableau::C[i]).abs() < 1e-12,
                "row {i}: sum {row_sum} vs node {}",
                tableau::C[i]
            );
        }
        let bh: f64 = tableau::B_HIGH.iter().sum();
        let bl: f64 = tableau::B_LOW.iter().sum();
        assert!((bh - 1.0).abs() < 1e-12);
        assert!((bl - 1.0).abs() < 1e-12);
        for i in 0..tableau::EXTRA_STAGES {
            let row_sum: f64 = tableau::A_DENSE[i].iter().sum();
            assert!((row_sum - tableau::C_DENSE[i]).abs() < 1e-11);
        }
        // Interpolation at the right endpoint reproduces the high-order
        // weights: stage i's polynomial evaluates to B_HIGH[i] at s = 1.
        for i in 0..tableau::DENSE_STAGES {
            let val: f64 = tableau::B_DENSE[i].iter().sum();
            let target = if i < tableau::STAGES {
                tableau::B_HIGH[i]
            } else {
                0.0
            };
            assert!(
                (val - target).abs() < 1e-11,
                "dense row {i}: {val} vs {target}"
            );
        }
    }

    #[test]
    fn driver_matches_exponential_decay() {
        let lambda = -1.7_f64;
        let ctl = StepControl::default();
        let mut f = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([lambda * y[0]]) };
        let mut dense_checked = false;
        let (y, stats) = integrate_adaptive(
            &mut f,
            0.0,
            [1.0],
            2.0,
            &ctl,
            &mut |step: &DenseStep<'_, 1>| {
                let mid = step.t0 + 0.37 * step.h;
                let interp = step.eval(mid)[0];
                let exact = (lambda * mid).exp();
                assert!(
                    (interp - exact).abs() < 1e-10 * exact.abs().max(1.0),
                    "dense output off by {:.3e}",
                    interp - exact
                );
                dense_checked = true;
                Ok(true)
            },
        )
        .unwrap();
        assert!(dense_checked);
        let exact = (lambda * 2.0).exp();
        assert!(
            (y[0] - exact).abs() < 1e-11 * exact.abs(),
            "endpoint error {:.3e}",
            y[0] - exact
        );
        assert!(stats.accepted > 0);
    }

    #[test]
    fn driver_closes_a_harmonic_orbit() {
        let ctl = StepControl::default();
        let mut f = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -y[0]]) };
        let (y, _) = integrate_adaptive(
            &mut f,
            0.0,
            [1.0, 0.0],
            2.0 * PI,
            &ctl,
            &mut |_s: &DenseStep<'_, 2>| Ok(true),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-11);
        assert!(y[1].abs() < 1e-11);
    }

    #[test]
    fn driver_rejects_bad_spans_and_budgets() {
        let ctl = StepControl::default();
        let mut f = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([y[0]]) };
        let err = integrate_adaptive(
            &mut f,
            1.0,
            [1.0],
            0.0,
            &ctl,
            &mut |_s: &DenseStep<'_, 1>| Ok(true),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));

        let tiny_budget = StepControl {
            max_steps: 3,
            max_step: Some(1e-3),
            ..StepControl::default()
        };
        let err = integrate_adaptive(
            &mut f,
            0.0,
            [1.0],
            10.0,
            &tiny_budget,
            &mut |_s: &DenseStep<'_, 1>| Ok(true),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepFailure(_)));
    }

    #[test]
    fn field_is_finite_and_oscillatorlike_at_collision() {
        let m = masses();
        let ks = KSPoint::new_unchecked(
            Quaternion::ZERO,
            Quaternion::new(0.7, -0.4, 0.5, 0.2),
        );
        let s = RegularizedState {
            ks,
            q2: Vec3::new(3.0, 0.5, -0.2),
            p2: Vec3::new(0.1, 0.6, 0.05),
            f: 2.0,
        };
        let d = hamiltonian_field(&s, &m).unwrap();
        let expected_dz = s.ks.w * (1.0 / (4.0 * m.mu1));
        assert!((d.dz - expected_dz).norm() < 1e-15);
        assert_eq!(d.dw, Quaternion::ZERO);
        assert_eq!(d.dq2, Vec3::zeros());
        assert_eq!(d.dp2, Vec3::zeros());
        assert_eq!(d.dt, 0.0);
    }

    #[test]
    fn field_rejects_outer_collision() {
        let m = masses();
        let s = RegularizedState {
            ks: KSPoint::new_unchecked(Quaternion::ONE, Quaternion::I),
            q2: Vec3::zeros(),
            p2: Vec3::new(0.1, 0.0, 0.0),
            f: 2.0,
        };
        assert!(matches!(
            hamiltonian_field(&s, &m),
            Err(Error::OuterCollision)
        ));
    }

    #[test]
    fn field_matches_central_differences_of_the_hamiltonian() {
        let m = masses();
        let mut seed = 0.17;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let mut rnd = |lo: f64, hi: f64| lo + (hi - lo) * weyl(&mut seed);
            let z = Quaternion::new(
                rnd(-1.0, 1.0),
                rnd(-1.0, 1.0),
                rnd(-1.0, 1.0),
                rnd(-1.0, 1.0),
            );
            let w = Quaternion::new(
                rnd(-1.5, 1.5),
                rnd(-1.5, 1.5),
                rnd(-1.5, 1.5),
                rnd(-1.5, 1.5),
            );
            let q2 = Vec3::new(rnd(1.5, 3.0), rnd(-2.0, 2.0), rnd(-1.0, 1.0));
            let p2 = Vec3::new(rnd(-0.8, 0.8), rnd(-0.8, 0.8), rnd(-0.8, 0.8));
            // Keep f1 > 0 so the Hamiltonian evaluator accepts every
            // perturbed neighbor as well.
            let f = m.mu2 * m.big_m2 / q2.norm() + 1.0;
            let s = RegularizedState {
                ks: KSPoint::new_unchecked(z, w),
                q2,
                p2,
                f,
            };
            let d = hamiltonian_field(&s, &m).unwrap();
            let field = pack_derivative(&d);

            let y0 = pack_state(&s, 0.0);
            let mut grad = [0.0_f64; 14];
            for (c, g) in grad.iter_mut().enumerate() {
                let hstep = 1e-6 * y0[c].abs().max(1.0);
                let mut yp = y0;
                let mut ym = y0;
                yp[c] += hstep;
                ym[c] -= hstep;
                let hp = eval_regularized(&unpack_state(&yp, f), &m).unwrap();
                let hm = eval_regularized(&unpack_state(&ym, f), &m).unwrap();
                *g = (hp.total() - hm.total()) / (2.0 * hstep);
            }
            // Symplectic pairing: dz = +∂/∂w, dw = −∂/∂z,
            // dq2 = +∂/∂p2, dp2 = −∂/∂q2.
            let mut expected = [0.0_f64; 15];
            for i in 0..4 {
                expected[i] = grad[4 + i];
                expected[4 + i] = -grad[i];
            }
            for i in 0..3 {
                expected[8 + i] = grad[11 + i];
                expected[11 + i] = -grad[8 + i];
            }
            expected[14] = s.ks.z.norm_sq();

            let field_scale = field.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1.0);
            for c in 0..15 {
                worst = worst.max((field[c] - expected[c]).abs() / field_scale);
            }
        }
        assert!(
            worst < tol::DERIVATIVE_CHECK_TOL,
            "worst relative deviation {worst:.3e}"
        );
    }

    #[test]
    fn kepler_run_matches_the_closed_form_oscillator() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.08, 0.45, 0.6, 1.1, 0.25, 2.0);
        let f1 = s0.f1(&m);
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let span = 3.0 * 2.0 * PI / nu1;
        let traj = integrate_with_options(
            &s0,
            &m,
            (0.0, span),
            1e-13,
            &IntegrateOptions {
                include_pert: false,
                ..IntegrateOptions::default()
            },
        )
        .unwrap();

        // Endpoint matches the closed-form rotation in (z, w).
        let expected = oscillator_propagate(&s0.ks, f1, m.mu1, span);
        let last = traj.states.last().unwrap();
        let scale = s0.ks.z.norm() + s0.ks.w.norm();
        assert!(
            (last.ks.z - expected.z).norm() + (last.ks.w - expected.w).norm() < 1e-9 * scale,
            "oscillator mismatch"
        );

        // Individual oscillator amplitudes stay constant.
        let s_freq = (8.0 * m.mu1 * f1).sqrt();
        let actions = |ks: &KSPoint| -> [f64; 4] {
            let z = ks.z.as_array();
            let w = ks.w.as_array();
            std::array::from_fn(|i| 0.5 * (w[i] * w[i] + s_freq * s_freq * z[i] * z[i]))
        };
        let i0 = actions(&s0.ks);
        let total: f64 = i0.iter().sum();
        let mut worst: f64 = 0.0;
        for st in &traj.states {
            let ii = actions(&st.ks);
            for c in 0..4 {
                worst = worst.max((ii[c] - i0[c]).abs() / total);
            }
        }
        assert!(worst < 1e-11, "amplitude drift {worst:.3e}");
    }

    #[test]
    fn full_flow_conserves_its_monitors() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.06, 0.5, 0.5, 0.9, 0.2, 1.3);
        let nu1 = (2.0 * s0.f1(&m) / m.mu1).sqrt();
        let span = 100.0 * 2.0 * PI / nu1;
        let traj = integrate(&s0, &m, (0.0, span), tol::ODE_RTOL).unwrap();
        assert!(
            traj.drift.hamiltonian < tol::CONSERVATION_TOL,
            "Hamiltonian drift {:.3e}",
            traj.drift.hamiltonian
        );
        assert!(
            traj.drift.bilinear < tol::CONSERVATION_TOL,
            "bilinear drift {:.3e}",
            traj.drift.bilinear
        );
        assert!(
            traj.drift.angular_momentum < tol::CONSERVATION_TOL,
            "angular-momentum drift {:.3e}",
            traj.drift.angular_momentum
        );
        // Physical time is strictly increasing away from collisions.
        for i in 1..traj.t.len() {
            assert!(traj.t[i] > traj.t[i - 1]);
        }
    }

    #[test]
    fn bilinear_invariant_survives_ten_thousand_periods() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.05, 0.4, 0.4, 0.7, 0.15, 0.9);
        let nu1 = (2.0 * s0.f1(&m) / m.mu1).sqrt();
        let span = 1e4 * 2.0 * PI / nu1;
        let traj = integrate(&s0, &m, (0.0, span), tol::ODE_RTOL).unwrap();
        assert!(
            traj.drift.bilinear < 1e-11,
            "bilinear drift {:.3e} over 1e4 periods",
            traj.drift.bilinear
        );
    }

    #[test]
    fn zero_level_run_sits_on_the_physical_energy_level() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.07, 0.3, 0.8, 2.2, 0.2, 0.5);
        let parts0 = eval_regularized(&s0, &m).unwrap();
        assert!(
            parts0.total().abs() < 1e-12,
            "state constructed off the zero level: {:.3e}",
            parts0.total()
        );
        let nu1 = (2.0 * s0.f1(&m) / m.mu1).sqrt();
        let span = 20.0 * 2.0 * PI / nu1;
        let traj = integrate(&s0, &m, (0.0, span), tol::ODE_RTOL).unwrap();
        for st in &traj.states {
            let pair = st.ks.to_cartesian().unwrap();
            let phys = JacobiState {
                p1: pair.p,
                q1: pair.q,
                p2: st.p2,
                q2: st.q2,
            };
            let f_val = eval_f(&phys, &m).unwrap().total();
            assert!(
                (f_val + st.f).abs() < 1e-8 * (1.0 + st.f.abs()),
                "physical energy {f_val:.12e} vs level −{:.12e}",
                st.f
            );
        }
    }

    #[test]
    fn regularized_run_matches_direct_physical_integration() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.07, 0.5, 0.6, 1.8, 0.2, 2.7);
        let nu1 = (2.0 * s0.f1(&m) / m.mu1).sqrt();
        let span = 10.0 * 2.0 * PI / nu1;
        let traj = integrate(&s0, &m, (0.0, span), tol::ODE_RTOL).unwrap();
        let t_end = *traj.t.last().unwrap();

        // Direct integration of the physical equations in Jacobi
        // variables (q1, p1, q2, p2), in physical time.
        let pair0 = s0.ks.to_cartesian().unwrap();
        let y0: [f64; 12] = [
            pair0.q.x, pair0.q.y, pair0.q.z, pair0.p.x, pair0.p.y, pair0.p.z, s0.q2.x, s0.q2.y,
            s0.q2.z, s0.p2.x, s0.p2.y, s0.p2.z,
        ];
        let mut rhs = |_t: f64, y: &[f64; 12]| -> Result<[f64; 12]> {
            let q1 = Vec3::new(y[0], y[1], y[2]);
            let p1 = Vec3::new(y[3], y[4], y[5]);
            let q2 = Vec3::new(y[6], y[7], y[8]);
            let p2 = Vec3::new(y[9], y[10], y[11]);
            let (g1, g2) = pert_gradient(q1, q2, &m)?;
            let r1 = q1.norm();
            let r2 = q2.norm();
            let dq1 = p1 / m.mu1;
            let dp1 = -m.mu1 * m.big_m1 * q1 / (r1 * r1 * r1) - g1;
            let dq2 = p2 / m.mu2;
            let dp2 = -m.mu2 * m.big_m2 * q2 / (r2 * r2 * r2) - g2;
            Ok([
                dq1.x, dq1.y, dq1.z, dp1.x, dp1.y, dp1.z, dq2.x, dq2.y, dq2.z, dp2.x, dp2.y,
                dp2.z,
            ])
        };
        let ctl = StepControl::default();
        let (y_phys, _) = integrate_adaptive(
            &mut rhs,
            0.0,
            y0,
            t_end,
            &ctl,
            &mut |_s: &DenseStep<'_, 12>| Ok(true),
        )
        .unwrap();

        let last = traj.states.last().unwrap();
        let pair_end = last.ks.to_cartesian().unwrap();
        let dq1 = (pair_end.q - Vec3::new(y_phys[0], y_phys[1], y_phys[2])).norm();
        let dq2 = (last.q2 - Vec3::new(y_phys[6], y_phys[7], y_phys[8])).norm();
        assert!(dq1 < 1e-6, "inner position mismatch {dq1:.3e}");
        assert!(dq2 < 1e-6, "outer position mismatch {dq2:.3e}");
    }

    #[test]
    fn rectilinear_run_crosses_collisions_regularly() {
        let m = masses();
        // Degenerate (rectilinear) inner ellipse: z = 0 with nonzero w
        // automatically satisfies BL = 0 and starts at the collision.
        let ks = KSPoint::new_unchecked(
            Quaternion::ZERO,
            Quaternion::new(0.9, -0.35, 0.55, 0.15),
        );
        let (q2, p2) = elliptic_state(12.0, 0.2, 1.1, 0.0, 0.4, 2.0, m.big_m2, m.mu2);
        let outer_energy = p2.norm_squared() / (2.0 * m.mu2) - m.mu2 * m.big_m2 / q2.norm();
        let f = 1.5 - outer_energy; // f1 = 1.5 exactly
        let s0 = RegularizedState { ks, p2, q2, f };
        let f1 = s0.f1(&m);
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let period = 2.0 * PI / nu1; // collision return time in τ

        let traj = integrate_with_options(
            &s0,
            &m,
            (0.0, 2.6 * period),
            tol::ODE_RTOL,
            &IntegrateOptions {
                include_pert: false,
                max_step: Some(5e-4),
                ..IntegrateOptions::default()
            },
        )
        .unwrap();

        // The field stays bounded through every passage (the integrator
        // would have failed otherwise); check one sample near a crossing.
        let near_zero = traj
            .inner_radius
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let d = kepler_field(&traj.states[near_zero], &m).unwrap();
        assert!(d.dz.is_finite() && d.dw.is_finite());

        let scan = near_collision_events(&traj, 1e-2);
        assert!(scan.hit_exact_zero);
        assert_eq!(scan.events.len(), 2, "interior collision passages");
        for ev in &scan.events {
            assert!(ev.exact_zero, "passage at τ = {} not exact", ev.tau);
            assert!(ev.min_separation < tol::COLLISION_ZERO_TOL);
        }
        // Passages occur at the oscillator half-period spacing 2π/ν1
        // (z ∝ sin(ν1 τ/2) vanishes every half period of the z-oscillator).
        let spacing = scan.events[1].tau - scan.events[0].tau;
        assert!(
            (spacing - period).abs() < 1e-4 * period,
            "collision spacing {spacing} vs {period}"
        );
        assert!((scan.events[0].tau - period).abs() < 1e-4 * period);
    }

    #[test]
    fn near_collision_minimum_matches_the_pericenter_distance() {
        let m = masses();
        let e1 = 1.0 - 1e-4;
        let s0 = hierarchical_state(&m, 0.05, e1, 0.9, PI, 0.2, 1.0);
        let f1 = s0.f1(&m);
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let period = 2.0 * PI / nu1;
        let traj = integrate_with_options(
            &s0,
            &m,
            (0.0, 1.6 * period),
            tol::ODE_RTOL,
            &IntegrateOptions {
                include_pert: false,
                max_step: Some(0.02),
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        let scan = near_collision_events(&traj, tol::NEAR_COLLISION_FRACTION * 1.0);
        assert!(!scan.hit_exact_zero);
        assert!(!scan.events.is_empty());
        let pericenter = 1.0 * (1.0 - e1);
        let min = scan.global_min;
        assert!(
            (min - pericenter).abs() < 1e-2 * pericenter,
            "min separation {min:.6e} vs pericenter {pericenter:.6e}"
        );
        assert!(min > 0.0);
    }

    #[test]
    fn threshold_filters_shallow_minima() {
        let m = masses();
        // Hand-built trajectory with two local minima, one above threshold.
        let r = vec![0.5, 0.3, 0.5, 0.009, 0.5];
        let n = r.len();
        let dummy = hierarchical_state(&m, 0.1, 0.2, 0.3, 0.4, 0.2, 0.5);
        let traj = Trajectory {
            masses: m,
            energy_parameter: dummy.f,
            tau: (0..n).map(|i| i as f64).collect(),
            t: (0..n).map(|i| i as f64).collect(),
            states: vec![dummy; n],
            hamiltonian: vec![0.0; n],
            bilinear: vec![0.0; n],
            angular_momentum: vec![Vec3::zeros(); n],
            inner_radius: r,
            drift: MonitorDrift::default(),
            accepted_steps: n - 1,
            rejected_steps: 0,
            field_evaluations: 0,
        };
        let scan = near_collision_events(&traj, 0.01);
        assert_eq!(scan.events.len(), 1);
        assert!(scan.events[0].min_separation < 0.01);
        assert!(!scan.hit_exact_zero);
        assert!(scan.global_min <= 0.009);
    }

    #[test]
    fn perturbed_near_degenerate_orbit_dives_below_its_pericenter() {
        // Equal inner masses, strong mutual inclination: the secular
        // exchange drives the inner eccentricity up, the pericenter down;
        // the regularized flow rides through the close passages.
        let m = MassConfig::new(1.0, 1.0, 1.0).unwrap();
        let e1 = 0.9;
        let s0 = hierarchical_state(&m, 0.2, e1, 1.45, PI, 0.1, 0.8);
        let nu1 = (2.0 * s0.f1(&m) / m.mu1).sqrt();
        let span = 150.0 * 2.0 * PI / nu1;
        let traj = integrate(&s0, &m, (0.0, span), tol::ODE_RTOL).unwrap();
        let scan = near_collision_events(&traj, 1.0);
        let pericenter0 = 1.0 - e1;
        assert!(
            scan.global_min < 0.9 * pericenter0,
            "no almost-collision deepening: min {:.4e} vs initial pericenter {:.4e}",
            scan.global_min,
            pericenter0
        );
        assert!(scan.global_min > 0.0);
        assert!(!scan.hit_exact_zero);
    }

    #[test]
    fn frequency_estimate_resolves_a_synthetic_two_tone_signal() {
        let n = 4096;
        let dt = 0.07;
        let om1 = 1.234_567;
        let om2 = 2.719_281;
        let series: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                0.3 + 1.3 * (om1 * t + 0.4).cos() + 0.8 * (om2 * t + 1.1).cos()
            })
            .collect();
        let report = frequency_estimate(&series, dt).unwrap();
        assert!(report.peaks.len() >= 2, "found {} peaks", report.peaks.len());
        let f0 = report.peaks[0].frequency;
        let f1 = report.peaks[1].frequency;
        let (lo, hi) = if f0 < f1 { (f0, f1) } else { (f1, f0) };
        assert!(
            ((lo - om1) / om1).abs() < 1e-6,
            "first tone {lo} vs {om1}"
        );
        assert!(
            ((hi - om2) / om2).abs() < 1e-6,
            "second tone {hi} vs {om2}"
        );
        assert!((report.peaks[0].amplitude - 1.3).abs() < 1e-3);
        assert!((report.peaks[1].amplitude - 0.8).abs() < 1e-3);
        assert!(report.residual < 1e-6, "residual {}", report.residual);
    }

    #[test]
    fn frequency_estimate_handles_degenerate_inputs() {
        let constant = vec![3.25; 256];
        let report = frequency_estimate(&constant, 0.1).unwrap();
        assert!(report.peaks.is_empty());
        assert_eq!(report.residual, 0.0);

        // A pure linear ramp is absorbed by the detrending.
        let ramp: Vec<f64> = (0..256).map(|k| 0.5 + 0.01 * k as f64).collect();
        let report = frequency_estimate(&ramp, 0.1).unwrap();
        assert!(report.peaks.is_empty());

        let err = frequency_estimate(&[1.0; 8], 0.1).unwrap_err();
        assert!(matches!(err, Error::TooShort(_)));
        let err = frequency_estimate(&vec![1.0; 64], 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn frequency_estimate_recovers_the_inner_frequency_of_a_kepler_run() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.06, 0.4, 0.5, 1.2, 0.2, 0.6);
        let f1 = s0.f1(&m);
        let nu1 = (2.0 * f1 / m.mu1).sqrt();
        let n = 2048;
        let span = 60.0 * 2.0 * PI / nu1;
        let run = integrate_resampled_kepler(&s0, &m, (0.0, span), tol::ODE_RTOL, n).unwrap();
        // |z|² = a1 (1 − e1 cos u1) with u1 exactly linear in τ: a pure
        // tone at ν1 plus the constant the detrend removes.
        let series: Vec<f64> = run.states.iter().map(|s| s.ks.z.norm_sq()).collect();
        let dt = span / (n - 1) as f64;
        let report = frequency_estimate(&series, dt).unwrap();
        assert!(!report.peaks.is_empty());
        let measured = report.peaks[0].frequency;
        assert!(
            ((measured - nu1) / nu1).abs() < 1e-6,
            "measured {measured} vs ν1 {nu1}"
        );
    }

    #[test]
    fn outer_angle_rate_matches_the_frequency_formula_and_scaling() {
        let m = masses();
        let mut log_alpha = Vec::new();
        let mut log_ratio = Vec::new();
        for &alpha in &[0.04_f64, 0.06, 0.09] {
            let s0 = hierarchical_state(&m, alpha, 0.4, 0.7, 0.9, 0.2, 1.4);
            let f1 = s0.f1(&m);
            let nu1 = (2.0 * f1 / m.mu1).sqrt();
            let n = 400;
            let span = 25.0 * 2.0 * PI / nu1;
            let run = integrate_resampled_kepler(&s0, &m, (0.0, span), tol::ODE_RTOL, n).unwrap();
            let coords0 = regular_from_ks(&run.states[0], &m).unwrap();
            let p0 = coords0.actions[0];
            let (nu1_formula, nu2_formula) =
                kepler_frequencies(p0, coords0.big_l2, s0.f, &m).unwrap();
            assert!(((nu1_formula - nu1) / nu1).abs() < 1e-12);

            // Unwrap l2′ and fit its linear growth rate: along the
            // integrable flow this is exactly the outer frequency.
            let mut unwrapped = Vec::with_capacity(n);
            let mut acc = 0.0;
            let mut prev = coords0.l2_prime;
            unwrapped.push(0.0);
            for st in run.states.iter().skip(1) {
                let c = regular_from_ks(st, &m).unwrap();
                acc += angle_diff(c.l2_prime, prev);
                prev = c.l2_prime;
                unwrapped.push(acc);
            }
            let dt = span / (n - 1) as f64;
            let nf = n as f64;
            let k_mean = 0.5 * (nf - 1.0);
            let y_mean = unwrapped.iter().sum::<f64>() / nf;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            for (k, &y) in unwrapped.iter().enumerate() {
                let dk = k as f64 - k_mean;
                sxx += dk * dk;
                sxy += dk * (y - y_mean);
            }
            let nu2_measured = sxy / sxx / dt;
            assert!(
                ((nu2_measured - nu2_formula) / nu2_formula).abs() < 1e-6,
                "α = {alpha}: measured ν2 {nu2_measured:.9e} vs formula {nu2_formula:.9e}"
            );
            log_alpha.push(alpha.ln());
            log_ratio.push((nu2_measured / nu1).ln());
        }
        // Log-log slope of the frequency ratio against α.
        let n = log_alpha.len() as f64;
        let ax = log_alpha.iter().sum::<f64>() / n;
        let ay = log_ratio.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (x, y) in log_alpha.iter().zip(&log_ratio) {
            sxx += (x - ax) * (x - ax);
            sxy += (x - ax) * (y - ay);
        }
        let slope = sxy / sxx;
        assert!(
            (slope - 1.5).abs() < 0.05,
            "frequency-ratio exponent {slope}"
        );
    }

    #[test]
    fn resampling_covers_the_grid_deterministically() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.08, 0.3, 0.4, 0.5, 0.2, 1.0);
        let run = integrate_resampled(&s0, &m, (0.0, 5.0), 1e-10, 11).unwrap();
        assert_eq!(run.tau.len(), 11);
        assert_eq!(run.states.len(), 11);
        for (i, &tau) in run.tau.iter().enumerate() {
            assert!((tau - 0.5 * i as f64).abs() < 1e-12);
        }
        assert_eq!(run.t[0], 0.0);
        for i in 1..run.t.len() {
            assert!(run.t[i] > run.t[i - 1]);
        }
        let err = integrate_resampled(&s0, &m, (0.0, 5.0), 1e-10, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn integrate_validates_its_inputs() {
        let m = masses();
        let s0 = hierarchical_state(&m, 0.08, 0.3, 0.4, 0.5, 0.2, 1.0);
        assert!(matches!(
            integrate(&s0, &m, (0.0, 1.0), -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            integrate(&s0, &m, (1.0, 0.0), 1e-12),
            Err(Error::InvalidParameter(_))
        ));
        let err = integrate_with_options(
            &s0,
            &m,
            (0.0, 100.0),
            1e-12,
            &IntegrateOptions {
                max_steps: 5,
                ..IntegrateOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepFailure(_)));
    }
}
