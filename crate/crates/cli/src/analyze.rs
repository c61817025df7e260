//! The `analyze` subcommand: crossings, collapses and CFT fits on the CSV
//! files written by `run`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use monitored_fermions::observables::{cft_fit, default_fit_window, CftFit, EntanglementProfile};
use monitored_fermions::scaling::{
    bkt_collapse_fit, bkt_transform, bootstrap_crossing, detect_crossing, power_law_collapse_fit, power_law_transform,
    BootstrapCrossing, CollapseConfig, Crossing, Curve, CurveFamily, CurvePoint, ScalingFitResult, TrajectorySamples,
};
use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_f64, parse_f64, write_csv, write_json};
use crate::run::{RESULTS_HEADER, TRAJECTORIES_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Crossing,
    Bkt,
    Powerlaw,
    Cft,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Crossing => "crossing",
            Mode::Bkt => "bkt",
            Mode::Powerlaw => "powerlaw",
            Mode::Cft => "cft",
        }
    }
}

/// Ensemble estimate read back from a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
}

/// Trajectory average read back from a trajectories file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub trajectory_id: u64,
    pub observable: String,
    pub value: f64,
}

#[derive(Debug, Default)]
pub struct Inputs {
    pub results: Vec<ResultRow>,
    pub trajectories: Vec<TrajectoryRow>,
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    header.iter().position(|h| h == name).ok_or_else(|| CliError::Config(format!("missing column {name}")))
}

/// Reads results and trajectory files, told apart by their headers.
pub fn read_inputs(files: &[PathBuf]) -> Result<Inputs, CliError> {
    let mut inputs = Inputs::default();
    for path in files {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let header = reader.headers()?.clone();
        let is = |cols: &[&str]| cols.iter().all(|c| header.iter().any(|h| h == *c));
        let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::Config(format!("not an integer: {s:?}")));
        if is(&TRAJECTORIES_HEADER) {
            let idx: Vec<usize> = ["L", "alpha", "gamma", "trajectory_id", "observable", "value"]
                .iter()
                .map(|c| column(&header, c))
                .collect::<Result<_, _>>()?;
            for rec in reader.records() {
                let rec = rec?;
                inputs.trajectories.push(TrajectoryRow {
                    sites: parse_usize(&rec[idx[0]])?,
                    alpha: parse_f64(&rec[idx[1]])?,
                    gamma: parse_f64(&rec[idx[2]])?,
                    trajectory_id: parse_usize(&rec[idx[3]])? as u64,
                    observable: rec[idx[4]].to_string(),
                    value: parse_f64(&rec[idx[5]])?,
                });
            }
        } else if is(&RESULTS_HEADER) {
            let idx: Vec<usize> = ["L", "alpha", "gamma", "observable", "mean", "stderr"]
                .iter()
                .map(|c| column(&header, c))
                .collect::<Result<_, _>>()?;
            for rec in reader.records() {
                let rec = rec?;
                inputs.results.push(ResultRow {
                    sites: parse_usize(&rec[idx[0]])?,
                    alpha: parse_f64(&rec[idx[1]])?,
                    gamma: parse_f64(&rec[idx[2]])?,
                    observable: rec[idx[3]].to_string(),
                    mean: parse_f64(&rec[idx[4]])?,
                    stderr: parse_f64(&rec[idx[5]])?,
                });
            }
        } else {
            return Err(CliError::Config(format!("{} is neither a results nor a trajectories file", path.display())));
        }
    }
    Ok(inputs)
}

/// `f64` key that orders by value; inputs are finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);
impl Eq for Key {}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// One curve family per `α` for `observable`.
pub fn families(rows: &[ResultRow], observable: &str) -> Result<Vec<(f64, CurveFamily)>, CliError> {
    let mut grouped: BTreeMap<Key, BTreeMap<usize, Vec<CurvePoint>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.observable == observable) {
        grouped.entry(Key(r.alpha)).or_default().entry(r.sites).or_default().push(CurvePoint {
            gamma: r.gamma,
            value: r.mean,
            stderr: r.stderr,
        });
    }
    let mut out = Vec::new();
    for (alpha, by_size) in grouped {
        let mut curves = Vec::new();
        for (sites, mut points) in by_size {
            points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
            curves.push(Curve::new(sites, points).map_err(|e| CliError::Config(format!("alpha {}: {e}", alpha.0)))?);
        }
        out.push((alpha.0, CurveFamily::new(curves).map_err(|e| CliError::Config(e.to_string()))?));
    }
    Ok(out)
}

fn samples_for(rows: &[TrajectoryRow], observable: &str, alpha: f64, sites: usize) -> Option<TrajectorySamples> {
    let mut by_gamma: BTreeMap<Key, Vec<(u64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.observable == observable && r.alpha == alpha && r.sites == sites) {
        by_gamma.entry(Key(r.gamma)).or_default().push((r.trajectory_id, r.value));
    }
    if by_gamma.is_empty() {
        return None;
    }
    let gammas = by_gamma.keys().map(|k| k.0).collect();
    let samples = by_gamma
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|p| p.0);
            v.into_iter().map(|p| p.1).collect()
        })
        .collect();
    Some(TrajectorySamples { sites, gammas, samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingEntry {
    pub alpha: f64,
    pub l1: usize,
    pub l2: usize,
    pub crossing: Option<Crossing>,
    pub bootstrap: Option<BootstrapCrossing>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseEntry {
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub fit: ScalingFitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct CftEntry {
    #[serde(rename = "L")]
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub window: [usize; 2],
    pub fit: CftFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub mode: Mode,
    pub observable: String,
    pub crossings: Vec<CrossingEntry>,
    pub collapses: Vec<CollapseEntry>,
    pub cft: Vec<CftEntry>,
}

pub fn report_path(out: &Path, mode: Mode) -> PathBuf {
    out.join(format!("analysis_{}.json", mode.name()))
}

pub fn collapse_path(out: &Path, mode: Mode) -> PathBuf {
    out.join(format!("collapse_{}.csv", mode.name()))
}

pub fn analyze(files: &[PathBuf], mode: Mode, config: &AnalysisConfig, seed: u64, out: &Path) -> Result<AnalysisReport, CliError> {
    if files.is_empty() {
        return Err(CliError::Config("analyze needs at least one results file".into()));
    }
    let inputs = read_inputs(files)?;
    if inputs.results.is_empty() {
        return Err(CliError::Config("input files hold no ensemble results".into()));
    }
    ensure_dir(out)?;
    let observable = config.observable.clone();
    let mut report = AnalysisReport { mode, observable: observable.clone(), crossings: vec![], collapses: vec![], cft: vec![] };
    match mode {
        Mode::Crossing | Mode::Bkt | Mode::Powerlaw => {
            let fams = families(&inputs.results, &observable)?;
            if fams.is_empty() {
                return Err(CliError::Config(format!("no rows for observable {observable}")));
            }
            let mut coords = Vec::new();
            for (alpha, fam) in fams {
                let sizes: Vec<usize> = fam.curves().iter().map(|c| c.sites).collect();
                match mode {
                    Mode::Crossing => {
                        for w in sizes.windows(2) {
                            let crossing = detect_crossing(&fam, w[0], w[1]).map_err(|e| CliError::Runtime(e.to_string()))?;
                            let a = samples_for(&inputs.trajectories, &observable, alpha, w[0]);
                            let b = samples_for(&inputs.trajectories, &observable, alpha, w[1]);
                            let bootstrap = match (a, b) {
                                (Some(a), Some(b)) => Some(
                                    bootstrap_crossing(&a, &b, config.bootstrap_resamples, config.confidence, seed)
                                        .map_err(|e| CliError::Runtime(e.to_string()))?,
                                ),
                                _ => None,
                            };
                            report.crossings.push(CrossingEntry { alpha, l1: w[0], l2: w[1], crossing, bootstrap });
                        }
                    }
                    Mode::Bkt => {
                        let cfg = config.collapse(CollapseConfig::default());
                        let fit = bkt_collapse_fit(&fam, &cfg).map_err(|e| CliError::Runtime(format!("alpha {alpha}: {e}")))?;
                        for (l, x, y) in bkt_transform(&fam, fit.gamma_c, fit.nu, cfg.log_base) {
                            coords.push(vec![fmt_f64(alpha), l.to_string(), fmt_f64(x), fmt_f64(y)]);
                        }
                        report.collapses.push(CollapseEntry { alpha, sizes, fit });
                    }
                    _ => {
                        let (lo, hi) = gamma_span(&fam);
                        let cfg = config.collapse(CollapseConfig { gamma_c_range: (lo, hi), ..CollapseConfig::power_law() });
                        let fit = power_law_collapse_fit(&fam, &cfg).map_err(|e| CliError::Runtime(format!("alpha {alpha}: {e}")))?;
                        let beta = fit.beta.unwrap_or(0.0);
                        for (l, x, y) in power_law_transform(&fam, fit.gamma_c, beta, fit.nu) {
                            coords.push(vec![fmt_f64(alpha), l.to_string(), fmt_f64(x), fmt_f64(y)]);
                        }
                        report.collapses.push(CollapseEntry { alpha, sizes, fit });
                    }
                }
            }
            if mode != Mode::Crossing {
                write_csv(&collapse_path(out, mode), &["alpha", "L", "x", "y"], &coords)?;
            }
        }
        Mode::Cft => {
            let mut profiles: BTreeMap<(usize, Key, Key), BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
            for r in &inputs.results {
                if let Some(ell) = r.observable.strip_prefix("entropy_l").and_then(|s| s.parse::<usize>().ok()) {
                    profiles.entry((r.sites, Key(r.alpha), Key(r.gamma))).or_default().insert(ell, (r.mean, r.stderr));
                }
            }
            if profiles.is_empty() {
                return Err(CliError::Config("no entanglement profiles (entropy_l*) in the input".into()));
            }
            for ((sites, alpha, gamma), by_ell) in profiles {
                if by_ell.keys().copied().ne(1..=sites / 2) {
                    return Err(CliError::Config(format!("profile for L={sites} is incomplete")));
                }
                let (values, stderr): (Vec<f64>, Vec<f64>) = by_ell.into_values().unzip();
                let profile = EntanglementProfile::new(sites, values, stderr).map_err(|e| CliError::Runtime(e.to_string()))?;
                let window = config.fit_window.map_or_else(|| default_fit_window(sites), |[a, b]| a..=b);
                let bounds = [*window.start(), *window.end()];
                let fit = cft_fit(&profile, window).map_err(|e| CliError::Runtime(e.to_string()))?;
                report.cft.push(CftEntry { sites, alpha: alpha.0, gamma: gamma.0, window: bounds, fit });
            }
        }
    }
    write_json(&report_path(out, mode), &report)?;
    Ok(report)
}

fn gamma_span(fam: &CurveFamily) -> (f64, f64) {
    let gs = fam.curves().iter().flat_map(|c| c.points.iter().map(|p| p.gamma));
    gs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
}
