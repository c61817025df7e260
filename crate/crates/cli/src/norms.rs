//! The `norms` subcommand: `‖H_AB‖` at `ℓ = L/2` against `L`, with fits and
//! the analytic bound next to each value.

use std::path::Path;

use monitored_fermions::bounds::{lemma1_bound_bilinear, norm_scaling_series, BoundParameters, NormScalingSeries};
use monitored_fermions::model::{build_boundary_block, LatticeSpec};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_f64, write_csv, write_json};

pub const NORMS_FILE: &str = "norms.csv";
pub const NORM_FITS_FILE: &str = "norm_fits.json";
pub const NORMS_HEADER: [&str; 7] = ["alpha", "L", "ell", "norm", "g_max", "bound", "config_hash"];

#[derive(Debug, Clone, Serialize)]
pub struct NormFitReport {
    pub config_hash: String,
    pub series: Vec<NormScalingSeries>,
}

pub fn norms(config: &ExperimentConfig, out: &Path) -> Result<NormFitReport, CliError> {
    ensure_dir(out)?;
    let hash = config.hash();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &alpha in &config.norms.alphas {
        let s = norm_scaling_series(alpha, &config.norms.sizes).map_err(|e| CliError::Config(e.to_string()))?;
        for &(l, norm) in &s.points {
            let spec = LatticeSpec::new(l, alpha).map_err(|e| CliError::Config(e.to_string()))?;
            let block = build_boundary_block(&spec, l / 2).map_err(|e| CliError::Runtime(e.to_string()))?;
            let g_max = block.g_max();
            let bound = BoundParameters::new(alpha, 1, g_max)
                .and_then(|p| lemma1_bound_bilinear(&p, l))
                .unwrap_or(f64::NAN);
            rows.push(vec![
                fmt_f64(alpha),
                l.to_string(),
                (l / 2).to_string(),
                fmt_f64(norm),
                fmt_f64(g_max),
                fmt_f64(bound),
                hash.clone(),
            ]);
        }
        series.push(s);
    }
    write_csv(&out.join(NORMS_FILE), &NORMS_HEADER, &rows)?;
    let report = NormFitReport { config_hash: hash, series };
    write_json(&out.join(NORM_FITS_FILE), &report)?;
    Ok(report)
}
