//! Legendre expansion of the perturbing interaction.
//!
//! In the hierarchical regime the coupling between the two Kepler pairs,
//!
//! ```text
//! F_pert(Q1, Q2) = −μ1 m2 [ (1/σ0)(1/‖Q2 − σ0 Q1‖ − 1/‖Q2‖)
//!                         + (1/σ1)(1/‖Q2 + σ1 Q1‖ − 1/‖Q2‖) ],
//! ```
//!
//! expands in the radius ratio ρ = ‖Q1‖/‖Q2‖ as a Legendre series
//!
//! ```text
//! F_pert = −μ1 m2 Σ_{n ≥ 2} σₙ Pₙ(cos ζ) ‖Q1‖ⁿ / ‖Q2‖ⁿ⁺¹,
//!     σₙ = σ0ⁿ⁻¹ + (−1)ⁿ σ1ⁿ⁻¹,   cos ζ = ⟨Q1, Q2⟩/(‖Q1‖‖Q2‖),
//! ```
//!
//! convergent for σ̂ρ < 1 with σ̂ = max(σ0, σ1). The n = 0 monopole and
//! n = 1 dipole cancel identically — that cancellation is why the Jacobi
//! splitting is the right frame for the lunar problem. This module
//! provides the polynomial evaluation, the mass coefficients σₙ, the
//! truncated series with a rigorous tail bound, and the uniform cubic
//! bound in the semi-major-axis ratio α used to size perturbative
//! estimates.
//!
//! # Units & conventions
//!
//! Gravitational constant 1; masses, lengths, energies in consistent
//! units. `pert_bound` measures lengths in units of the outer semi-major
//! axis (α is dimensionless and the returned bound scales like μ1 m2).

use crate::error::{Error, Result};
use crate::threebody::{JacobiState, MassConfig};

/// Legendre polynomial `Pₙ(x)` by the three-term recursion
/// `(n+1)Pₙ₊₁ = (2n+1)x Pₙ − n Pₙ₋₁`.
///
/// `x` may lie outside `[−1, 1]`; the growth bound `|Pₙ(x)| ≤ 5ⁿ` for
/// `|x| ≤ 2` keeps extended-domain estimates finite.
pub fn legendre_eval(n: u32, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..n {
                let kf = f64::from(k);
                let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Mass coefficient `σₙ = σ0ⁿ⁻¹ + (−1)ⁿ σ1ⁿ⁻¹` of the `n`-th term.
///
/// For equal primaries every odd coefficient vanishes exactly, making the
/// interaction even in `Q1 ↦ −Q1`. Always `|σₙ| ≤ 2 σ̂ⁿ⁻¹` with
/// `σ̂ = max(σ0, σ1)`.
///
/// # Panics
///
/// If `n < 2`: the monopole and dipole cancel identically and carry no
/// coefficient.
pub fn sigma_n(n: u32, m: &MassConfig) -> f64 {
    assert!(n >= 2, "sigma_n is defined for n >= 2 only");
    let k = (n - 1) as i32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    m.sigma0.powi(k) + sign * m.sigma1.powi(k)
}

/// One term of the expansion: order, mass coefficient, and the term's
/// contribution `−μ1 m2 σₙ Pₙ(cos ζ) ‖Q1‖ⁿ/‖Q2‖ⁿ⁺¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerm {
    /// Multipole order `n ≥ 2`.
    pub n: u32,
    /// Mass coefficient `σₙ`.
    pub sigma_n: f64,
    /// Signed value of the term.
    pub value: f64,
}

/// Terms `n = 2..=n_max` of the Legendre expansion at a state.
///
/// For `‖Q1‖ = 0` every term is `0` (the limit value: each carries a
/// factor `‖Q1‖ⁿ`).
///
/// # Errors
///
/// [`Error::OuterCollision`] at `Q2 = 0`; [`Error::RatioTooLarge`] when
/// `σ̂·‖Q1‖/‖Q2‖ ≥ 1` and the series diverges.
pub fn expansion_terms(
    s: &JacobiState,
    m: &MassConfig,
    n_max: u32,
) -> Result<Vec<ExpansionTerm>> {
    let r1 = s.q1.norm();
    let r2 = s.q2.norm();
    if r2 == 0.0 {
        return Err(Error::OuterCollision);
    }
    let sigma_hat = m.sigma0.max(m.sigma1);
    let rho = r1 / r2;
    if sigma_hat * rho >= 1.0 {
        return Err(Error::RatioTooLarge {
            ratio: rho,
            limit: 1.0 / sigma_hat,
        });
    }
    let mut terms = Vec::with_capacity(n_max.saturating_sub(1) as usize);
    if r1 == 0.0 {
        for n in 2..=n_max {
            terms.push(ExpansionTerm {
                n,
                sigma_n: sigma_n(n, m),
                value: 0.0,
            });
        }
        return Ok(terms);
    }
    let cos_zeta = s.q1.dot(&s.q2) / (r1 * r2);
    let prefactor = -m.mu1 * m.m2 / r2;
    // Bonnet recursion threaded with the ratio powers: at the top of the
    // loop body (prev, cur) = (P_{n−2}, P_{n−1}) and rho_pow = ρⁿ⁻¹.
    let (mut prev, mut cur) = (1.0, cos_zeta);
    let mut rho_pow = rho;
    for n in 2..=n_max {
        let kf = f64::from(n - 1);
        let next = ((2.0 * kf + 1.0) * cos_zeta * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        rho_pow *= rho;
        let coeff = sigma_n(n, m);
        terms.push(ExpansionTerm {
            n,
            sigma_n: coeff,
            value: prefactor * coeff * cur * rho_pow,
        });
    }
    Ok(terms)
}

/// Truncated Legendre series of the perturbing interaction with a
/// rigorous tail bound: `(value, bound)` with
/// `value = Σ_{n=2}^{N} term_n` and
/// `|F_pert(direct) − value| ≤ bound`.
///
/// The bound majorizes every discarded term by
/// `|σₙ| ≤ 2σ̂ⁿ⁻¹` and `|Pₙ(cos ζ)| ≤ 1` (the argument is a real cosine)
/// and sums the geometric tail:
/// `bound = (2 μ1 m2 / (σ̂ ‖Q2‖)) · q^{N+1}/(1 − q)`, `q = σ̂ρ`.
///
/// # Errors
///
/// As [`expansion_terms`].
pub fn pert_series(s: &JacobiState, m: &MassConfig, n_max: u32) -> Result<(f64, f64)> {
    let terms = expansion_terms(s, m, n_max)?;
    // Small-to-large accumulation: the terms decay geometrically, so
    // summing high orders first keeps the roundoff of the partial sum at
    // the level of the leading term's ulp.
    let value: f64 = terms.iter().rev().map(|t| t.value).sum();
    let r2 = s.q2.norm();
    let sigma_hat = m.sigma0.max(m.sigma1);
    let q = sigma_hat * s.q1.norm() / r2;
    let bound =
        2.0 * m.mu1 * m.m2 / (sigma_hat * r2) * q.powi(n_max as i32 + 1) / (1.0 - q);
    Ok((value, bound))
}

/// Uniform cubic bound on the regularized perturbation
/// `ℱ_pert = ‖Q1‖·F_pert` over the hierarchy envelope: outer ellipse of
/// eccentricity at most `e2max` (lengths in units of its semi-major
/// axis), inner radius at most `2α`, for semi-major-axis ratio `α`.
///
/// The returned constant is
/// `(μ1 m2 / 5) · 20³ α³ / ((1 − e2max)² (1 − e2max − 20α))`:
/// a deliberately generous envelope (safety factor 10 on the radius
/// ratio) that stays rigorous down to the outer pericenter and absorbs
/// polynomial growth when estimates are continued slightly off the real
/// domain.
///
/// # Errors
///
/// [`Error::AlphaTooLarge`] when `1 − e2max − 20α ≤ 0` (the envelope's
/// denominator crosses zero at `α = (1 − e2max)/20`);
/// [`Error::InvalidParameter`] for non-positive `α` or `e2max ∉ [0, 1)`.
pub fn pert_bound(alpha: f64, e2max: f64, m: &MassConfig) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "axis ratio must be positive and finite, got {alpha}"
        )));
    }
    if !(0.0..1.0).contains(&e2max) {
        return Err(Error::InvalidParameter(format!(
            "outer eccentricity cap must lie in [0, 1), got {e2max}"
        )));
    }
    let margin = 1.0 - e2max - 20.0 * alpha;
    if margin <= 0.0 {
        return Err(Error::AlphaTooLarge {
            alpha,
            limit: (1.0 - e2max) / 20.0,
        });
    }
    Ok(m.mu1 * m.m2 / 5.0 * 8000.0 * alpha.powi(3) / ((1.0 - e2max).powi(2) * margin))
}
