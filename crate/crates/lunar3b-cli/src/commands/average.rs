//! `average` — numerically double-average the coupling at a secular
//! point and compare against its semi-major-axis-ratio expansion.
//!
//! For each ratio `α` in the (strictly decreasing) list the command
//! tabulates the direct double average, the quadrupolar model `c2 α³`,
//! and the two-term model `c2 α³ + c3 α⁴`, where `(c2, c3)` come from
//! the Richardson extraction at base ratio `h`.  The summary also
//! compares `c2` against the closed-form quadrupolar energy, and fits
//! the single global constant relating `c3` at the coplanar companion
//! point (same momenta, `C = G1 + G2`) to the closed-form coplanar
//! octupolar shape — the constant is recorded in the JSON manifest, and
//! vanishes identically for equal inner masses.
//!
//! Configuration keys (all optional): `m0`, `m1`, `m2` (all or none);
//! the secular point `big_g1`, `g1`, `big_g2`, `g2`, `big_l1`,
//! `big_l2`, `c`; `alphas` (strictly decreasing list), `nodes`
//! (anomaly-grid size per axis), and `h` (expansion base ratio).

use std::path::Path;

use serde_json::json;

use lunar3b::secular::{alpha_expansion, average_pert, f_quad, octupolar_coplanar, SecularPoint};

use crate::config::RunConfig;
use crate::report::{fmt_float, write_json, CsvTable};

use super::{mass_config, require_positive, require_strictly_decreasing, CmdResult};

pub fn run(cfg: &RunConfig, out: &Path, seed: u64) -> CmdResult {
    let m = mass_config(cfg)?;
    let big_g1 = cfg.get_f64("big_g1", 0.6)?;
    let g1 = cfg.get_f64("g1", 0.8)?;
    let big_g2 = cfg.get_f64("big_g2", 1.1)?;
    let g2 = cfg.get_f64("g2", 0.3)?;
    let big_l1 = cfg.get_f64("big_l1", 1.0)?;
    let big_l2 = cfg.get_f64("big_l2", 1.4)?;
    let c = cfg.get_f64("c", 1.3)?;
    let alphas = cfg.get_f64_list("alphas", &[0.04, 0.02, 0.01])?;
    let nodes = cfg.get_usize("nodes", 128)?;
    let h = cfg.get_f64("h", 0.02)?;
    cfg.finish()?;

    require_positive(&alphas, "alphas")?;
    require_strictly_decreasing(&alphas, "alphas")?;

    let sp = SecularPoint::new(big_g1, g1, big_g2, g2, big_l1, big_l2, c)?;
    let expansion = alpha_expansion(&sp, &m, h, nodes)?;
    let closed = f_quad(&sp, &m)?;
    let quad_agreement =
        (expansion.c2 - closed).abs() / closed.abs().max(f64::MIN_POSITIVE);

    let mut table = CsvTable::new(
        &[
            "alpha",
            "direct_average",
            "quadrupolar_model",
            "two_term_model",
            "relative_residual",
        ],
        &["1", "energy", "energy", "energy", "1"],
    );
    for &alpha in &alphas {
        let direct = average_pert(&sp, 1.0, alpha, &m, nodes)?;
        let quad_model = expansion.c2 * alpha.powi(3);
        let two_term = quad_model + expansion.c3 * alpha.powi(4);
        let residual = (direct - two_term).abs() / direct.abs().max(f64::MIN_POSITIVE);
        table.push(vec![
            fmt_float(alpha),
            fmt_float(direct),
            fmt_float(quad_model),
            fmt_float(two_term),
            fmt_float(residual),
        ]);
    }
    let table_path = table.write(out, "average_table.csv")?;

    // Octupolar shape constant, fitted at the coplanar companion point
    // (same momenta and angles, total angular momentum G1 + G2).
    let coplanar = SecularPoint::new(big_g1, g1, big_g2, g2, big_l1, big_l2, big_g1 + big_g2)?;
    let coplanar_expansion = alpha_expansion(&coplanar, &m, h, nodes)?;
    let shape = octupolar_coplanar(coplanar.e1(), coplanar.e2(), g1 - g2);
    let octupole_constant = if shape.abs() > 1e-12 {
        Some(coplanar_expansion.c3 / shape)
    } else {
        None
    };

    let json_path = write_json(
        out,
        "average_summary.json",
        &json!({
            "command": "average",
            "seed": seed,
            "masses": { "m0": m.m0, "m1": m.m1, "m2": m.m2 },
            "secular_point": {
                "big_g1": big_g1, "g1": g1, "big_g2": big_g2, "g2": g2,
                "big_l1": big_l1, "big_l2": big_l2, "c": c,
                "e1": sp.e1(), "e2": sp.e2(),
            },
            "expansion": {
                "h": h,
                "nodes": nodes,
                "c2": expansion.c2,
                "c3": expansion.c3,
                "residual": expansion.residual,
            },
            "quadrupolar_closed_form": closed,
            "quadrupolar_agreement": quad_agreement,
            "octupole": {
                "coplanar_c3": coplanar_expansion.c3,
                "shape": shape,
                "fitted_constant": octupole_constant,
                "vanishes_for_equal_inner_masses": m.m0 == m.m1,
            },
        }),
    )?;

    println!(
        "c2 = {} vs closed form {} (relative deviation {:.3e})",
        fmt_float(expansion.c2),
        fmt_float(closed),
        quad_agreement
    );
    println!(
        "c3 = {} (coplanar companion c3 = {}, octupolar shape constant {})",
        fmt_float(expansion.c3),
        fmt_float(coplanar_expansion.c3),
        octupole_constant.map_or_else(|| "undefined".to_owned(), fmt_float),
    );
    println!("wrote {}, {}", table_path.display(), json_path.display());
    Ok(0)
}
