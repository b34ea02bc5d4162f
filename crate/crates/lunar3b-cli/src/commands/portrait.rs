//! `portrait` — phase portraits of the reduced quadrupolar system.
//!
//! With `c_offset = 0` (the default) the total and outer angular-momentum
//! magnitudes coincide, and the command traces the branched-double-cover
//! portrait: nested libration loops around the two coplanar centers
//! `(G1, g1) = (0, 0), (0, π)`, the polar family around `(0, ±π/2)`, the
//! separatrix estimate between them, and the four interior equilibria
//! with finite-difference Hessian data.
//!
//! With `c_offset ≠ 0` the section is left: the command integrates a fan
//! of level curves of the planar secular system across the annulus
//! `|C − G2| < G1 < min(L1, C + G2)` starting on the axes `g1 = 0` and
//! `g1 = π/2`, and locates the equilibria on those axes by bisection.
//! For small `|c_offset|` the curves near the inner boundary close
//! around the minimal-`G1` circle.
//!
//! Configuration keys (all optional): `big_l1`, `big_l2`, `big_g2`,
//! `mu_quad`, `c_offset`; on the cover `coplanar_family`,
//! `polar_family`, `samples_per_orbit`, `max_fraction`; off the cover
//! `curves`, `samples_per_orbit`, and `span_periods` (duration in units
//! of the characteristic circulation period).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use serde_json::json;

use lunar3b::quad::{
    cover_hamiltonian, phase_portrait, trace_secular_curve, CoverPoint, PortraitSpec,
    QuadParams,
};
use lunar3b::quad::quad_vector_field_secular;
use lunar3b::secular::{f_quad, SecularPoint};
use lunar3b::threebody::MassConfig;
use lunar3b::error::Result as LibResult;

use crate::config::RunConfig;
use crate::report::{fmt_float, write_json, CsvTable};

use super::{CmdError, CmdResult};

/// Masses realizing a requested quadrupolar strength exactly:
/// `μ_quad = m0 m1 m2/(m0 + m1)`, so `(1, 1, 2 μ_quad)` reproduces it
/// without rounding.
fn mass_for_mu_quad(mu: f64) -> Result<MassConfig, CmdError> {
    MassConfig::new(1.0, 1.0, 2.0 * mu).map_err(CmdError::Domain)
}

/// Finite-difference Hessian determinant of the cover energy at an
/// equilibrium `(0, g1_eq)`: central second differences, steps scaled to
/// the chart size.
fn hessian_det_at(params: &QuadParams, g1_eq: f64) -> LibResult<f64> {
    let h_mom = 0.01 * params.g1_bound();
    let h_ang = 0.01;
    let f = |dm: f64, da: f64| -> LibResult<f64> {
        Ok(cover_hamiltonian(
            &CoverPoint::new(dm, g1_eq + da, params)?,
            params,
        ))
    };
    let f00 = f(0.0, 0.0)?;
    let fxx = (f(h_mom, 0.0)? - 2.0 * f00 + f(-h_mom, 0.0)?) / (h_mom * h_mom);
    let fyy = (f(0.0, h_ang)? - 2.0 * f00 + f(0.0, -h_ang)?) / (h_ang * h_ang);
    let fxy = (f(h_mom, h_ang)? - f(h_mom, -h_ang)? - f(-h_mom, h_ang)?
        + f(-h_mom, -h_ang)?)
        / (4.0 * h_mom * h_ang);
    Ok(fxx * fyy - fxy * fxy)
}

/// Equilibria of the off-cover flow on the line `g1 = line_g1`: scan the
/// pericenter-rate sign over the annulus interior and bisect each
/// change.  Returns `(G1, energy)` pairs.
fn line_equilibria(
    line_g1: f64,
    lo: f64,
    hi: f64,
    template: &SecularPoint,
    m: &MassConfig,
) -> Vec<(f64, f64)> {
    let margin = 0.02 * (hi - lo);
    let (a, b) = (lo + margin, hi - margin);
    let rate = |big_g1: f64| -> Option<f64> {
        let sp = SecularPoint {
            big_g1,
            g1: line_g1,
            ..*template
        };
        quad_vector_field_secular(&sp, m).ok().map(|(_, da)| da)
    };
    let n = 96;
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let Some(r) = rate(x) else {
            prev = None;
            continue;
        };
        if let Some((x0, r0)) = prev {
            if r0 == 0.0 {
                roots.push(x0);
            } else if r0 * r < 0.0 {
                let (mut xa, mut xb, mut ra) = (x0, x, r0);
                for _ in 0..60 {
                    let xm = 0.5 * (xa + xb);
                    let Some(rm) = rate(xm) else { break };
                    if ra * rm <= 0.0 {
                        xb = xm;
                    } else {
                        xa = xm;
                        ra = rm;
                    }
                }
                roots.push(0.5 * (xa + xb));
            }
        }
        prev = Some((x, r));
    }
    roots
        .into_iter()
        .filter_map(|g| {
            let sp = SecularPoint {
                big_g1: g,
                g1: line_g1,
                ..*template
            };
            f_quad(&sp, m).ok().map(|e| (g, e))
        })
        .collect()
}

pub fn run(cfg: &RunConfig, out: &Path, seed: u64) -> CmdResult {
    let big_l1 = cfg.get_f64("big_l1", 1.0)?;
    let big_l2 = cfg.get_f64("big_l2", 1.4)?;
    let big_g2 = cfg.get_f64("big_g2", 1.0)?;
    let mu_quad = cfg.get_f64("mu_quad", 1.0)?;
    let c_offset = cfg.get_f64("c_offset", 0.0)?;
    let coplanar_family = cfg.get_usize("coplanar_family", 5)?;
    let polar_family = cfg.get_usize("polar_family", 3)?;
    let samples_per_orbit = cfg.get_usize("samples_per_orbit", 512)?;
    let max_fraction = cfg.get_f64("max_fraction", 0.85)?;
    let curves = cfg.get_usize("curves", 8)?;
    let span_periods = cfg.get_f64("span_periods", 12.0)?;
    cfg.finish()?;

    if samples_per_orbit < 2 {
        return Err(CmdError::Config(format!(
            "key `samples_per_orbit` requires at least 2, got {samples_per_orbit}"
        )));
    }
    let params = QuadParams::new(big_l1, big_l2, big_g2, mu_quad)?;

    if c_offset == 0.0 {
        if coplanar_family + polar_family == 0 {
            return Err(CmdError::Config(
                "empty portrait grid: coplanar_family + polar_family must be positive"
                    .to_owned(),
            ));
        }
        if !(0.0 < max_fraction && max_fraction < 1.0) {
            return Err(CmdError::Config(format!(
                "key `max_fraction` must lie in (0, 1), got {max_fraction}"
            )));
        }
        run_cover(
            &params,
            coplanar_family,
            polar_family,
            samples_per_orbit,
            max_fraction,
            out,
            seed,
        )
    } else {
        if curves == 0 {
            return Err(CmdError::Config(
                "empty portrait grid: `curves` must be positive off the cover".to_owned(),
            ));
        }
        if !(span_periods > 0.0) || !span_periods.is_finite() {
            return Err(CmdError::Config(format!(
                "key `span_periods` requires a positive finite value, got {span_periods}"
            )));
        }
        run_off_cover(
            &params,
            c_offset,
            curves,
            samples_per_orbit,
            span_periods,
            out,
            seed,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cover(
    params: &QuadParams,
    coplanar_family: usize,
    polar_family: usize,
    samples_per_orbit: usize,
    max_fraction: f64,
    out: &Path,
    seed: u64,
) -> CmdResult {
    let spec = PortraitSpec {
        coplanar_family,
        polar_family,
        samples_per_orbit,
        max_fraction,
    };
    let portrait = phase_portrait(params, &spec)?;

    let mut orbits_csv = CsvTable::new(
        &["orbit", "sample", "big_g1", "g1"],
        &["1", "1", "action", "rad"],
    );
    for (i, orbit) in portrait.orbits.iter().enumerate() {
        for (j, row) in orbit.samples.iter().enumerate() {
            orbits_csv.push(vec![
                i.to_string(),
                j.to_string(),
                fmt_float(row[0]),
                fmt_float(row[1]),
            ]);
        }
    }
    let orbits_path = orbits_csv.write(out, "portrait_orbits.csv")?;

    let mut summary_csv = CsvTable::new(
        &[
            "orbit",
            "family",
            "start_big_g1",
            "start_g1",
            "period",
            "action",
            "energy",
            "amplitude",
            "closure_gap",
            "energy_drift",
            "min_crossing_angle",
        ],
        &[
            "1", "name", "action", "rad", "time", "action", "energy", "action", "action",
            "1", "rad",
        ],
    );
    for (i, orbit) in portrait.orbits.iter().enumerate() {
        let start = orbit.samples[0];
        let dist = |target: f64| {
            let d = (start[1] - target).rem_euclid(TAU);
            d.min(TAU - d)
        };
        let family = if dist(0.0).min(dist(PI)) <= dist(FRAC_PI_2).min(dist(3.0 * FRAC_PI_2)) {
            "coplanar"
        } else {
            "polar"
        };
        let min_angle = orbit
            .crossings
            .iter()
            .map(|c| c.angle)
            .fold(f64::INFINITY, f64::min);
        summary_csv.push(vec![
            i.to_string(),
            family.to_owned(),
            fmt_float(start[0]),
            fmt_float(start[1]),
            fmt_float(orbit.period),
            fmt_float(orbit.action),
            fmt_float(orbit.energy),
            fmt_float(orbit.amplitude),
            fmt_float(orbit.closure_gap),
            fmt_float(orbit.energy_drift),
            fmt_float(min_angle),
        ]);
    }
    let summary_path = summary_csv.write(out, "portrait_summary.csv")?;

    // The four interior equilibria on the section {G1 = 0} with
    // finite-difference Hessian data.
    let mut equilibria = Vec::new();
    for &g1 in &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2] {
        let point = CoverPoint::new(0.0, g1, params)?;
        let energy = cover_hamiltonian(&point, params);
        let det = hessian_det_at(params, g1)?;
        equilibria.push(json!({
            "big_g1": 0.0,
            "g1": g1,
            "energy": energy,
            "hessian_det": det,
            "kind": if det > 0.0 { "center" } else { "saddle" },
        }));
    }

    let json_path = write_json(
        out,
        "portrait_summary.json",
        &json!({
            "command": "portrait",
            "seed": seed,
            "mode": "cover",
            "params": {
                "big_l1": params.big_l1,
                "big_l2": params.big_l2,
                "big_g2": params.big_g2,
                "mu_quad": params.mu_quad,
            },
            "spec": {
                "coplanar_family": coplanar_family,
                "polar_family": polar_family,
                "samples_per_orbit": samples_per_orbit,
                "max_fraction": max_fraction,
            },
            "orbits": portrait.orbits.len(),
            "separatrix": {
                "g1_axis": portrait.separatrix.g1_axis,
                "level": portrait.separatrix.level,
            },
            "symmetry_fixed_points": portrait.symmetry_fixed_points,
            "equilibria": equilibria,
        }),
    )?;

    println!(
        "traced {} orbits on the cover; separatrix axis crossing g1 = {:.6}, level = {:.6e}",
        portrait.orbits.len(),
        portrait.separatrix.g1_axis,
        portrait.separatrix.level
    );
    println!(
        "wrote {}, {}, {}",
        orbits_path.display(),
        summary_path.display(),
        json_path.display()
    );
    Ok(0)
}

fn run_off_cover(
    params: &QuadParams,
    c_offset: f64,
    curves: usize,
    samples_per_orbit: usize,
    span_periods: f64,
    out: &Path,
    seed: u64,
) -> CmdResult {
    let m = mass_for_mu_quad(params.mu_quad)?;
    let c = params.big_g2 + c_offset;
    if !(c > 0.0) {
        return Err(CmdError::Config(format!(
            "key `c_offset` makes the total angular momentum non-positive: C = {c}"
        )));
    }
    let lo = (c - params.big_g2).abs();
    let hi = params.big_l1.min(c + params.big_g2);
    if !(lo < hi * (1.0 - 1e-9)) {
        return Err(CmdError::Config(format!(
            "empty annulus: |C - G2| = {lo} must fall below min(L1, C + G2) = {hi}"
        )));
    }
    let template = SecularPoint {
        big_g1: 0.5 * (lo + hi),
        g1: 0.0,
        big_g2: params.big_g2,
        g2: 0.0,
        big_l1: params.big_l1,
        big_l2: params.big_l2,
        c,
    };

    // Characteristic circulation period of the reduced flow.
    let beta = params.coefficient();
    let duration = span_periods * TAU / (15.0 * beta);

    let mut curves_csv = CsvTable::new(
        &["curve", "sample", "big_g1", "g1"],
        &["1", "1", "action", "rad"],
    );
    let mut summary_csv = CsvTable::new(
        &[
            "curve",
            "start_big_g1",
            "start_g1",
            "energy",
            "min_big_g1",
            "max_big_g1",
            "swept_angle",
        ],
        &["1", "action", "rad", "energy", "action", "action", "rad"],
    );
    let mut traced = 0usize;
    for k in 0..curves {
        // Alternate the two starting axes so both libration and
        // circulation regions are fanned.
        let line = if k % 2 == 0 { FRAC_PI_2 } else { 0.0 };
        let frac = (k + 1) as f64 / (curves + 1) as f64;
        let start = SecularPoint {
            big_g1: lo + (hi - lo) * frac,
            g1: line,
            ..template
        };
        let energy = f_quad(&start, &m)?;
        let samples = trace_secular_curve(&start, &m, duration, samples_per_orbit)?;
        let (mut min_g1, mut max_g1) = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, row) in samples.iter().enumerate() {
            min_g1 = min_g1.min(row[0]);
            max_g1 = max_g1.max(row[0]);
            curves_csv.push(vec![
                traced.to_string(),
                j.to_string(),
                fmt_float(row[0]),
                fmt_float(row[1]),
            ]);
        }
        let swept = samples.last().expect("samples")[1] - samples[0][1];
        summary_csv.push(vec![
            traced.to_string(),
            fmt_float(start.big_g1),
            fmt_float(start.g1),
            fmt_float(energy),
            fmt_float(min_g1),
            fmt_float(max_g1),
            fmt_float(swept),
        ]);
        traced += 1;
    }
    let curves_path = curves_csv.write(out, "portrait_curves.csv")?;
    let summary_path = summary_csv.write(out, "portrait_curves_summary.csv")?;

    let eq_half_pi = line_equilibria(FRAC_PI_2, lo, hi, &template, &m);
    let eq_zero = line_equilibria(0.0, lo, hi, &template, &m);
    let entry = |list: &[(f64, f64)], g1: f64| -> Vec<serde_json::Value> {
        list.iter()
            .map(|&(big_g1, energy)| json!({ "big_g1": big_g1, "g1": g1, "energy": energy }))
            .collect()
    };
    let json_path = write_json(
        out,
        "portrait_summary.json",
        &json!({
            "command": "portrait",
            "seed": seed,
            "mode": "off-cover",
            "params": {
                "big_l1": params.big_l1,
                "big_l2": params.big_l2,
                "big_g2": params.big_g2,
                "mu_quad": params.mu_quad,
            },
            "c": c,
            "c_offset": c_offset,
            "annulus": [lo, hi],
            "curves": traced,
            "samples_per_curve": samples_per_orbit + 1,
            "duration": duration,
            "equilibria": {
                "g1=pi/2": entry(&eq_half_pi, FRAC_PI_2),
                "g1=0": entry(&eq_zero, 0.0),
            },
        }),
    )?;

    println!(
        "traced {traced} level curves over the annulus ({lo:.4}, {hi:.4}) at C = {c:.4}"
    );
    println!(
        "equilibria found: {} on g1 = pi/2, {} on g1 = 0",
        eq_half_pi.len(),
        eq_zero.len()
    );
    println!(
        "wrote {}, {}, {}",
        curves_path.display(),
        summary_path.display(),
        json_path.display()
    );
    Ok(0)
}
