//! `torsion` — tabulate the normalized frequency coefficient and the
//! torsion over a grid of momentum pairs `(α, β)`.
//!
//! Each off-diagonal row carries the closed-form frequency coefficient,
//! its independent quadrature value with their relative deviation, and
//! the torsion (squared `β`-derivative of the coefficient).  Diagonal
//! rows `α = β` — where the quadrature degenerates — instead report the
//! coincident-momenta limit `1125/(2β⁸)` together with the deviation of
//! its Richardson extrapolation from nearby pairs, so the limit is
//! checked rather than assumed.
//!
//! Configuration keys (all optional): `alphas`, `betas` (positive
//! lists; non-positive values are configuration errors), `nodes`
//! (quadrature panels, at least 16), and `eps` (extrapolation offset
//! for the diagonal check).

use std::path::Path;

use serde_json::json;

use lunar3b::quad::{
    frequency_coefficient_quadrature, torsion, torsion_frequency_coefficient, torsion_limit,
    torsion_limit_extrapolated,
};

use crate::config::RunConfig;
use crate::report::{fmt_float, write_json, CsvTable};

use super::{require_positive, CmdError, CmdResult};

pub fn run(cfg: &RunConfig, out: &Path, seed: u64) -> CmdResult {
    let alphas = cfg.get_f64_list("alphas", &[0.6, 0.8, 1.0, 1.2])?;
    let betas = cfg.get_f64_list("betas", &[0.5, 1.0, 2.0])?;
    let nodes = cfg.get_usize("nodes", 512)?;
    let eps = cfg.get_f64("eps", 1e-4)?;
    cfg.finish()?;

    require_positive(&alphas, "alphas")?;
    require_positive(&betas, "betas")?;
    if nodes < 16 {
        return Err(CmdError::Config(format!(
            "key `nodes` requires at least 16 quadrature panels, got {nodes}"
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CmdError::Config(format!(
            "key `eps` requires a positive finite offset, got {eps}"
        )));
    }

    let mut table = CsvTable::new(
        &[
            "alpha",
            "beta",
            "freq_coeff_closed",
            "freq_coeff_quadrature",
            "quadrature_rel_dev",
            "torsion",
            "limit_value",
            "limit_check_rel_dev",
            "source",
        ],
        &["1", "1", "1", "1", "1", "1", "1", "1", "name"],
    );
    let mut worst_quadrature: f64 = 0.0;
    let mut worst_limit: f64 = 0.0;
    let mut diagonal_rows = 0usize;
    for &beta in &betas {
        for &alpha in &alphas {
            let closed = torsion_frequency_coefficient(alpha, beta)?;
            let limit_value = torsion_limit(beta);
            if alpha == beta {
                // Quadrature degenerates at coincident momenta; check
                // the closed-form limit by extrapolation instead.
                let extrapolated = torsion_limit_extrapolated(beta, eps)?;
                let limit_dev = (extrapolated - limit_value).abs() / limit_value;
                worst_limit = worst_limit.max(limit_dev);
                diagonal_rows += 1;
                table.push(vec![
                    fmt_float(alpha),
                    fmt_float(beta),
                    fmt_float(closed),
                    fmt_float(f64::NAN),
                    fmt_float(f64::NAN),
                    fmt_float(limit_value),
                    fmt_float(limit_value),
                    fmt_float(limit_dev),
                    "limit".to_owned(),
                ]);
            } else {
                let quadrature = frequency_coefficient_quadrature(alpha, beta, nodes)?;
                let quad_dev = (quadrature - closed).abs() / closed.abs();
                worst_quadrature = worst_quadrature.max(quad_dev);
                let result = torsion(alpha, beta)?;
                table.push(vec![
                    fmt_float(alpha),
                    fmt_float(beta),
                    fmt_float(closed),
                    fmt_float(quadrature),
                    fmt_float(quad_dev),
                    fmt_float(result.torsion),
                    fmt_float(limit_value),
                    fmt_float(f64::NAN),
                    "derivative".to_owned(),
                ]);
            }
        }
    }
    let table_path = table.write(out, "torsion_table.csv")?;

    let json_path = write_json(
        out,
        "torsion_summary.json",
        &json!({
            "command": "torsion",
            "seed": seed,
            "alphas": alphas,
            "betas": betas,
            "nodes": nodes,
            "eps": eps,
            "rows": table.len(),
            "diagonal_rows": diagonal_rows,
            "worst_quadrature_rel_dev": worst_quadrature,
            "worst_limit_check_rel_dev": worst_limit,
        }),
    )?;

    println!(
        "tabulated {} pairs: worst quadrature deviation {:.3e}, worst diagonal limit check {:.3e}",
        table.len(),
        worst_quadrature,
        worst_limit
    );
    println!("wrote {}, {}", table_path.display(), json_path.display());
    Ok(0)
}
