//! Experiment configuration: one TOML file fully determines a run.

use std::path::{Path, PathBuf};

use monitored_fermions::model::DEFAULT_SHORT_RANGE_THRESHOLD;
use monitored_fermions::observables::Observable;
use monitored_fermions::scaling::{CollapseConfig, LogBase};
use monitored_fermions::trajectory::{Engine, TrajectoryConfig};
use monitored_fermions::model::LatticeSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; every trajectory stream is derived from it.
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Particle number; `None` means half filling.
    pub particles: Option<usize>,
    pub short_range_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16],
            alphas: vec![2.0],
            gammas: vec![0.5],
            particles: None,
            short_range_threshold: DEFAULT_SHORT_RANGE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    /// `None` means `2L`.
    pub t_burn: Option<f64>,
    /// `None` means `2L`.
    pub t_sample: Option<f64>,
    pub dt_sample: f64,
    pub n_traj: usize,
    pub observables: Vec<Observable>,
    pub engine: Engine,
    pub save_jumps: bool,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            t_burn: None,
            t_sample: None,
            dt_sample: 1.0,
            n_traj: 200,
            observables: vec![Observable::EntropyHalf, Observable::MiQuarters],
            engine: Engine::Canonical,
            save_jumps: false,
        }
    }
}

/// Analysis settings; unset grid entries take the defaults of the chosen
/// collapse method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub observable: String,
    pub bandwidth: f64,
    pub bias_matched: bool,
    pub log_base: LogBase,
    pub gamma_c_range: Option<[f64; 2]>,
    pub gamma_c_step: Option<f64>,
    pub nu_range: Option<[f64; 2]>,
    pub nu_step: Option<f64>,
    pub beta_range: Option<[f64; 2]>,
    pub beta_step: Option<f64>,
    pub gamma_domain: Option<[f64; 2]>,
    pub refine_sweeps: usize,
    /// `ℓ` window of the CFT fit; `None` means `[⌈3L/8⌉, L/2]`.
    pub fit_window: Option<[usize; 2]>,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let c = CollapseConfig::default();
        Self {
            observable: "mi_quarters".into(),
            bandwidth: c.bandwidth,
            bias_matched: c.bias_matched,
            log_base: c.log_base,
            gamma_c_range: None,
            gamma_c_step: None,
            nu_range: None,
            nu_step: None,
            beta_range: None,
            beta_step: None,
            gamma_domain: None,
            refine_sweeps: c.refine_sweeps,
            fit_window: None,
            bootstrap_resamples: 1000,
            confidence: 0.95,
        }
    }
}

impl AnalysisConfig {
    /// `base` with every configured entry applied on top.
    pub fn collapse(&self, base: CollapseConfig) -> CollapseConfig {
        let pair = |r: Option<[f64; 2]>, d: (f64, f64)| r.map_or(d, |[a, b]| (a, b));
        CollapseConfig {
            bandwidth: self.bandwidth,
            log_base: self.log_base,
            gamma_c_range: pair(self.gamma_c_range, base.gamma_c_range),
            gamma_c_step: self.gamma_c_step.unwrap_or(base.gamma_c_step),
            nu_range: pair(self.nu_range, base.nu_range),
            nu_step: self.nu_step.unwrap_or(base.nu_step),
            beta_range: pair(self.beta_range, base.beta_range),
            beta_step: self.beta_step.unwrap_or(base.beta_step),
            gamma_domain: self.gamma_domain.map(|[a, b]| (a, b)),
            refine_sweeps: self.refine_sweeps,
            bias_matched: self.bias_matched,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    pub alphas: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self { alphas: vec![0.5, 0.8, 1.2, 2.0, 3.0], sizes: vec![256, 512, 1024, 2048, 4096] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub t_sample: f64,
    pub dt_sample: f64,
    pub trajectories: usize,
    pub interaction: f64,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            sizes: vec![4, 6, 8],
            alphas: vec![0.8, 1.5, 3.0],
            gamma: 1.0,
            t_sample: 20.0,
            dt_sample: 0.5,
            trajectories: 2,
            interaction: 1.0,
            tolerance: 1e-8,
        }
    }
}

/// Largest lattice the oracle check accepts.
pub const ORACLE_MAX_SITES: usize = 8;

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        Err(CliError::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn range(name: &str, r: [f64; 2]) -> Result<(), CliError> {
    if r[0] <= r[1] && r[0].is_finite() && r[1].is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be an ordered finite pair, got {r:?}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        nonempty("model.sizes", &m.sizes)?;
        nonempty("model.alphas", &m.alphas)?;
        nonempty("model.gammas", &m.gammas)?;
        for &l in &m.sizes {
            if l < 4 || l % 2 != 0 {
                return Err(CliError::Config(format!("model.sizes: {l} must be even and at least 4")));
            }
            if let Some(n) = m.particles {
                if n == 0 || n > l {
                    return Err(CliError::Config(format!("model.particles = {n} does not fit L = {l}")));
                }
            }
        }
        for &a in &m.alphas {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(CliError::Config(format!("model.alphas: {a} must be finite and non-negative")));
            }
        }
        for &g in &m.gammas {
            positive("model.gammas entry", g)?;
        }
        let t = &self.trajectory;
        positive("trajectory.dt_sample", t.dt_sample)?;
        for (name, v) in [("trajectory.t_burn", t.t_burn), ("trajectory.t_sample", t.t_sample)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(CliError::Config(format!("{name} must be finite and non-negative, got {v}")));
                }
            }
        }
        if t.n_traj < 2 {
            return Err(CliError::Config(format!("trajectory.n_traj must be at least 2, got {}", t.n_traj)));
        }
        nonempty("trajectory.observables", &t.observables)?;
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let a = &self.analysis;
        positive("analysis.bandwidth", a.bandwidth)?;
        for (name, step) in [("analysis.gamma_c_step", a.gamma_c_step), ("analysis.nu_step", a.nu_step), ("analysis.beta_step", a.beta_step)] {
            if let Some(step) = step {
                positive(name, step)?;
            }
        }
        for (name, r) in [
            ("analysis.gamma_c_range", a.gamma_c_range),
            ("analysis.nu_range", a.nu_range),
            ("analysis.beta_range", a.beta_range),
            ("analysis.gamma_domain", a.gamma_domain),
        ] {
            if let Some(r) = r {
                range(name, r)?;
            }
        }
        if !(a.confidence > 0.0 && a.confidence < 1.0) {
            return Err(CliError::Config(format!("analysis.confidence must lie in (0, 1), got {}", a.confidence)));
        }
        let n = &self.norms;
        nonempty("norms.alphas", &n.alphas)?;
        if n.sizes.len() < 3 || n.sizes.windows(2).any(|w| w[0] >= w[1]) || n.sizes.iter().any(|&l| l < 4 || l % 2 != 0) {
            return Err(CliError::Config("norms.sizes needs at least 3 strictly increasing even sizes ≥ 4".into()));
        }
        let o = &self.oracle;
        nonempty("oracle.sizes", &o.sizes)?;
        nonempty("oracle.alphas", &o.alphas)?;
        for &l in &o.sizes {
            if l < 2 || l % 2 != 0 || l > ORACLE_MAX_SITES {
                return Err(CliError::Config(format!("oracle.sizes: {l} must be even and at most {ORACLE_MAX_SITES}")));
            }
        }
        positive("oracle.gamma", o.gamma)?;
        positive("oracle.t_sample", o.t_sample)?;
        positive("oracle.dt_sample", o.dt_sample)?;
        positive("oracle.tolerance", o.tolerance)?;
        if o.trajectories == 0 {
            return Err(CliError::Config("oracle.trajectories must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without `workers` and `out_dir`,
    /// truncated to 16 hex digits.
    pub fn hash(&self) -> String {
        let canonical = Self { workers: None, out_dir: None, ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Trajectory parameters of one `(L, α, γ)` cell with its derived seed.
    pub fn cell_config(&self, cell: &Cell) -> Result<TrajectoryConfig, CliError> {
        let particles = self.model.particles.unwrap_or(cell.sites / 2);
        let spec = LatticeSpec::with_particles(cell.sites, cell.alpha, particles)
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_short_range_threshold(self.model.short_range_threshold);
        let l = cell.sites as f64;
        let t = &self.trajectory;
        Ok(TrajectoryConfig {
            t_burn: t.t_burn.unwrap_or(2.0 * l),
            t_sample: t.t_sample.unwrap_or(2.0 * l),
            dt_sample: t.dt_sample,
            n_traj: t.n_traj,
            observables: t.observables.clone(),
            engine: t.engine,
            ..TrajectoryConfig::new(spec, cell.gamma, cell_seed(self.seed, cell))
        })
    }

    /// Sweep cells in `sizes × alphas × gammas` order.
    pub fn cells(&self) -> Vec<Cell> {
        let m = &self.model;
        let mut out = Vec::new();
        for &sites in &m.sizes {
            for &alpha in &m.alphas {
                for &gamma in &m.gammas {
                    out.push(Cell { sites, alpha, gamma });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
}

/// Seed of a cell: the first 8 bytes of SHA-256 over the base seed and the
/// cell's exact parameter bits, so cells never share random streams.
pub fn cell_seed(seed: u64, cell: &Cell) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((cell.sites as u64).to_le_bytes());
    h.update(cell.alpha.to_bits().to_le_bytes());
    h.update(cell.gamma.to_bits().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(ExperimentConfig::from_toml("[model]\nsizes = [8]\n"), Err(CliError::Config(_))));
        assert!(ExperimentConfig::from_toml("seed = 1\n").is_ok());
    }

    #[test]
    fn unknown_keys_and_empty_lists_are_rejected() {
        assert!(ExperimentConfig::from_toml("seed = 1\n[model]\nsize = [8]\n").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[model]\nsizes = []\n").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[model]\ngammas = [0.0]\n").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[oracle]\nsizes = [10]\n").is_err());
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = ExperimentConfig::from_toml("seed = 1\nworkers = 1\n").unwrap();
        let b = ExperimentConfig::from_toml("seed = 1\nworkers = 8\nout_dir = \"x\"\n").unwrap();
        let c = ExperimentConfig::from_toml("seed = 2\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn cell_seeds_differ() {
        let a = Cell { sites: 8, alpha: 1.0, gamma: 0.5 };
        let b = Cell { gamma: 0.6, ..a };
        assert_ne!(cell_seed(1, &a), cell_seed(1, &b));
        assert_eq!(cell_seed(1, &a), cell_seed(1, &a));
    }
}
