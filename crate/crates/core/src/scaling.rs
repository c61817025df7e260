//! Crossing points, data collapses and size-scaling fits.
//!
//! The collapse objective is the same for both ansätze. Every point is mapped
//! to `(x, y)`; each point is then predicted by a Gaussian-kernel local-linear
//! regression through the points of the *other* sizes whose `x` range covers
//! it. The residual is the mean squared prediction error divided by the
//! variance of all `y`, so rescaling `y` (for instance through `L^β`) cannot
//! shrink it artificially.


use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub value: f64,
    pub stderr: f64,
}

/// One system size, points strictly increasing in `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub sites: usize,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(sites: usize, points: Vec<CurvePoint>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Fit(format!("curve L={sites} has {} points, need at least 3", points.len())));
        }
        if points.iter().any(|p| !p.gamma.is_finite() || !p.value.is_finite()) {
            return Err(Error::Fit(format!("curve L={sites} has non-finite entries")));
        }
        if points.windows(2).any(|w| !(w[0].gamma < w[1].gamma)) {
            return Err(Error::Fit(format!("curve L={sites} is not strictly increasing in gamma")));
        }
        Ok(Self { sites, points })
    }

    pub fn from_values(sites: usize, gammas: &[f64], values: &[f64]) -> Result<Self> {
        if gammas.len() != values.len() {
            return Err(Error::Fit("gamma and value lengths differ".into()));
        }
        let points = gammas
            .iter()
            .zip(values)
            .map(|(&gamma, &value)| CurvePoint { gamma, value, stderr: 0.0 })
            .collect();
        Self::new(sites, points)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Curves for distinct sizes, kept sorted by size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFamily {
    curves: Vec<Curve>,
}

impl CurveFamily {
    pub fn new(mut curves: Vec<Curve>) -> Result<Self> {
        curves.sort_by_key(|c| c.sites);
        if curves.windows(2).any(|w| w[0].sites == w[1].sites) {
            return Err(Error::Fit("duplicate system size in curve family".into()));
        }
        Ok(Self { curves })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn curve(&self, sites: usize) -> Option<&Curve> {
        self.curves.iter().find(|c| c.sites == sites)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub gamma: f64,
    /// Set when the difference changes sign more than once; `gamma` is then
    /// the largest crossing.
    pub ambiguous: bool,
    pub sign_changes: usize,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// Crossing of two sampled curves on the union of their grids inside the
/// overlapping `γ` window.
pub fn crossing_of(g1: &[f64], y1: &[f64], g2: &[f64], y2: &[f64]) -> Option<Crossing> {
    let lo = g1[0].max(g2[0]);
    let hi = g1[g1.len() - 1].min(g2[g2.len() - 1]);
    if !(lo < hi) {
        return None;
    }
    let mut grid: Vec<f64> = g1.iter().chain(g2).copied().filter(|&g| g >= lo && g <= hi).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let diff: Vec<f64> = grid.iter().map(|&g| interpolate(g1, y1, g) - interpolate(g2, y2, g)).collect();

    let mut crossings = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for (k, &d) in diff.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        if let Some((p, dp)) = prev {
            if dp.signum() != d.signum() {
                let at = if p + 1 < k {
                    grid[p + 1]
                } else {
                    grid[p] + (grid[k] - grid[p]) * dp / (dp - d)
                };
                crossings.push(at);
            }
        }
        prev = Some((k, d));
    }
    let last = *crossings.last()?;
    Some(Crossing { gamma: last, ambiguous: crossings.len() > 1, sign_changes: crossings.len() })
}

/// Crossing of the curves for sizes `l1` and `l2`, or `None` if they do not
/// cross.
pub fn detect_crossing(fam: &CurveFamily, l1: usize, l2: usize) -> Result<Option<Crossing>> {
    let c1 = fam.curve(l1).ok_or_else(|| Error::Fit(format!("no curve for L={l1}")))?;
    let c2 = fam.curve(l2).ok_or_else(|| Error::Fit(format!("no curve for L={l2}")))?;
    Ok(crossing_of(&c1.gammas(), &c1.values(), &c2.gammas(), &c2.values()))
}

/// Per-trajectory values of one size: `samples[k]` belongs to `gammas[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySamples {
    pub sites: usize,
    pub gammas: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl TrajectorySamples {
    fn means(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect()
    }

    fn resampled_means(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).sum::<f64>() / s.len() as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCrossing {
    /// Crossing of the full-sample means.
    pub point: Option<Crossing>,
    /// Percentile interval over resamples that cross; `None` if none do.
    pub interval: Option<(f64, f64)>,
    pub resamples: usize,
    pub without_crossing: usize,
}

/// Percentile bootstrap of the crossing point, resampling trajectories
/// independently at every `(L, γ)`.
pub fn bootstrap_crossing(
    a: &TrajectorySamples,
    b: &TrajectorySamples,
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapCrossing> {
    for s in [a, b] {
        if s.gammas.len() != s.samples.len() || s.gammas.len() < 3 || s.samples.iter().any(|v| v.is_empty()) {
            return Err(Error::Fit(format!("malformed trajectory samples for L={}", s.sites)));
        }
    }
    let point = crossing_of(&a.gammas, &a.means(), &b.gammas, &b.means());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ya = a.resampled_means(&mut rng);
        let yb = b.resampled_means(&mut rng);
        if let Some(c) = crossing_of(&a.gammas, &ya, &b.gammas, &yb) {
            found.push(c.gamma);
        }
    }
    found.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let interval = (!found.is_empty()).then(|| (quantile(&found, tail), quantile(&found, 1.0 - tail)));
    Ok(BootstrapCrossing { point, interval, resamples, without_crossing: resamples - found.len() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// `g(L) = [1 + 1/(2 log L − 4)]^{-1}`.
pub fn g_factor(sites: usize, base: LogBase) -> f64 {
    1.0 / (1.0 + 1.0 / (2.0 * base.log(sites as f64) - 4.0))
}

/// Search window and smoothing for a collapse fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseConfig {
    pub bandwidth: f64,
    pub log_base: LogBase,
    /// Window for `γ_c` (BKT) or `γ_p` (power law).
    pub gamma_c_range: (f64, f64),
    pub gamma_c_step: f64,
    pub nu_range: (f64, f64),
    pub nu_step: f64,
    /// Power law only; equal ends fix `β`.
    pub beta_range: (f64, f64),
    pub beta_step: f64,
    /// Only points with `γ` in this window enter the collapse.
    pub gamma_domain: Option<(f64, f64)>,
    pub min_points_per_size: usize,
    pub refine_sweeps: usize,
    /// Compare the master curve with the point's own curve smoothed by the
    /// same kernel, so the leading smoothing bias cancels.
    pub bias_matched: bool,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            bandwidth: 0.5,
            log_base: LogBase::Natural,
            gamma_c_range: (0.0, f64::INFINITY),
            gamma_c_step: 0.02,
            nu_range: (0.1, 10.0),
            nu_step: 0.1,
            beta_range: (0.0, 5.0),
            beta_step: 0.2,
            gamma_domain: None,
            min_points_per_size: 4,
            refine_sweeps: 3,
            bias_matched: true,
        }
    }
}

impl CollapseConfig {
    /// Coarser grid suited to the three-parameter power-law search.
    pub fn power_law() -> Self {
        Self { gamma_c_step: 0.05, nu_range: (0.3, 4.0), nu_step: 0.1, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseMethod {
    Bkt,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFitResult {
    pub method: CollapseMethod,
    /// `γ_c` for BKT, `γ_p` for the power law.
    pub gamma_c: f64,
    pub nu: f64,
    pub beta: Option<f64>,
    pub residual: f64,
    /// The coarse optimum sat on an edge of the search grid.
    pub at_boundary: bool,
    pub n_points: usize,
}

/// Residual reported when too few points overlap to judge a collapse.
pub const NO_OVERLAP_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy)]
struct Mapped {
    size: usize,
    x: f64,
    y: f64,
}

fn local_linear(points: &[Mapped], at: f64, bandwidth: f64, use_size: &[bool]) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points.iter().filter(|p| use_size[p.size]) {
        let dx = p.x - at;
        let w = (-0.5 * (dx / bandwidth).powi(2)).exp();
        s0 += w;
        s1 += w * dx;
        s2 += w * dx * dx;
        t0 += w * p.y;
        t1 += w * dx * p.y;
    }
    if !(s0 > 1e-300) {
        return None;
    }
    let det = s0 * s2 - s1 * s1;
    if det > 1e-12 * s0 * s0 * bandwidth * bandwidth {
        Some((s2 * t0 - s1 * t1) / det)
    } else {
        Some(t0 / s0)
    }
}

fn collapse_objective(points: &[Mapped], sizes: usize, bandwidth: f64, bias_matched: bool) -> f64 {
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return NO_OVERLAP_PENALTY;
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); sizes];
    for p in points {
        let r = &mut ranges[p.size];
        r.0 = r.0.min(p.x);
        r.1 = r.1.max(p.x);
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.y).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.y - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut scored = 0usize;
    let mut use_size = vec![false; sizes];
    let mut own = vec![false; sizes];
    for p in points {
        let mut any = false;
        for (s, r) in ranges.iter().enumerate() {
            use_size[s] = s != p.size && p.x >= r.0 && p.x <= r.1;
            any |= use_size[s];
        }
        if !any {
            continue;
        }
        let Some(fit) = local_linear(points, p.x, bandwidth, &use_size) else { continue };
        let y = if bias_matched {
            own.iter_mut().enumerate().for_each(|(s, o)| *o = s == p.size);
            match local_linear(points, p.x, bandwidth, &own) {
                Some(y) => y,
                None => continue,
            }
        } else {
            p.y
        };
        sum += (y - fit).powi(2);
        scored += 1;
    }
    if scored < (points.len() / 3).max(6) {
        return NO_OVERLAP_PENALTY;
    }
    sum / scored as f64 / var
}

/// Points of `fam` inside the configured `γ` domain, with a per-size check.
fn domain_points(fam: &CurveFamily, config: &CollapseConfig) -> Result<Vec<(usize, usize, f64, f64)>> {
    if fam.curves().len() < 3 {
        return Err(Error::Fit(format!("collapse needs at least 3 sizes, got {}", fam.curves().len())));
    }
    let mut out = Vec::new();
    for (k, c) in fam.curves().iter().enumerate() {
        let kept: Vec<_> = c
            .points
            .iter()
            .filter(|p| config.gamma_domain.is_none_or(|(lo, hi)| p.gamma >= lo && p.gamma <= hi))
            .map(|p| (k, c.sites, p.gamma, p.value))
            .collect();
        if kept.len() < config.min_points_per_size {
            return Err(Error::Fit(format!(
                "L={} keeps {} points in the collapse domain, need {}",
                c.sites,
                kept.len(),
                config.min_points_per_size
            )));
        }
        out.extend(kept);
    }
    Ok(out)
}

/// `(log L − ν/√(γ−γ_c), g(L)·γ·Ī)`; points with `γ ≤ γ_c` are dropped.
pub fn bkt_transform(fam: &CurveFamily, gamma_c: f64, nu: f64, base: LogBase) -> Vec<(usize, f64, f64)> {
    fam.curves()
        .iter()
        .flat_map(|c| {
            let g = g_factor(c.sites, base);
            let ln_l = (c.sites as f64).ln();
            c.points
                .iter()
                .filter(move |p| p.gamma > gamma_c)
                .map(move |p| (c.sites, ln_l - nu / (p.gamma - gamma_c).sqrt(), g * p.gamma * p.value))
        })
        .collect()
}

/// `((γ−γ_p)L^{1/ν}, L^β·Ī)`.
pub fn power_law_transform(fam: &CurveFamily, gamma_p: f64, beta: f64, nu: f64) -> Vec<(usize, f64, f64)> {
    fam.curves()
        .iter()
        .flat_map(|c| {
            let l = c.sites as f64;
            c.points
                .iter()
                .map(move |p| (c.sites, (p.gamma - gamma_p) * l.powf(1.0 / nu), l.powf(beta) * p.value))
        })
        .collect()
}

fn bkt_map(points: &[(usize, usize, f64, f64)], params: &[f64], base: LogBase) -> Vec<Mapped> {
    let (gc, nu) = (params[0], params[1]);
    points
        .iter()
        .filter(|p| p.2 > gc)
        .map(|&(size, l, gamma, value)| Mapped {
            size,
            x: (l as f64).ln() - nu / (gamma - gc).sqrt(),
            y: g_factor(l, base) * gamma * value,
        })
        .collect()
}

fn power_map(points: &[(usize, usize, f64, f64)], params: &[f64]) -> Vec<Mapped> {
    let (gp, nu, beta) = (params[0], params[1], params[2]);
    points
        .iter()
        .map(|&(size, l, gamma, value)| {
            let l = l as f64;
            Mapped { size, x: (gamma - gp) * l.powf(1.0 / nu), y: l.powf(beta) * value }
        })
        .collect()
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo || step <= 0.0 {
        return vec![lo];
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn golden_section(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid search with deterministic lexicographic arg-min followed by
/// coordinate-wise golden-section refinement that only accepts improvements.
/// Grid optima refined independently; the collapse valleys are narrow and curved.
const MULTI_START: usize = 4;
const SIMPLEX_EVALUATIONS: usize = 600;

fn refine(
    mut best: Vec<f64>,
    mut best_val: f64,
    bounds: &[(f64, f64)],
    steps: &[f64],
    sweeps: usize,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, f64) {
    let free: Vec<usize> = (0..best.len()).filter(|&k| bounds[k].1 > bounds[k].0 && steps[k] > 0.0).collect();
    for _ in 0..sweeps {
        for &k in &free {
            let lo = (best[k] - steps[k]).max(bounds[k].0);
            let hi = (best[k] + steps[k]).min(bounds[k].1);
            let mut trial = best.clone();
            let (x, v) = golden_section(
                |x| {
                    trial[k] = x;
                    objective(&trial)
                },
                lo,
                hi,
            );
            if v < best_val {
                best[k] = x;
                best_val = v;
            }
        }
    }
    if sweeps > 0 && !free.is_empty() {
        let (p, v) = nelder_mead(&best, &free, bounds, steps, objective);
        if v < best_val {
            best = p;
            best_val = v;
        }
    }
    (best, best_val)
}

/// Bounded Nelder–Mead over the coordinates in `free`; points are clamped to `bounds`.
fn nelder_mead(
    start: &[f64],
    free: &[usize],
    bounds: &[(f64, f64)],
    steps: &[f64],
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, f64) {
    let n = free.len();
    let embed = |y: &[f64]| -> Vec<f64> {
        let mut p = start.to_vec();
        for (j, &k) in free.iter().enumerate() {
            p[k] = y[j].clamp(bounds[k].0, bounds[k].1);
        }
        p
    };
    let evals = std::cell::Cell::new(0usize);
    let f = |y: &[f64]| {
        evals.set(evals.get() + 1);
        objective(&embed(y))
    };
    let y0: Vec<f64> = free.iter().map(|&k| start[k]).collect();
    let mut simplex = vec![(y0.clone(), f(&y0))];
    for (j, &k) in free.iter().enumerate() {
        let mut y = y0.clone();
        let h = 0.5 * steps[k];
        y[j] = if y[j] + h <= bounds[k].1 { y[j] + h } else { y[j] - h };
        let v = f(&y);
        simplex.push((y, v));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    while evals.get() < SIMPLEX_EVALUATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread <= 1e-14 * simplex[0].1.abs().max(1e-300) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (y, _) in &simplex[..n] {
            for j in 0..n {
                centroid[j] += y[j] / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 { combine(&centroid, &reflected, 0.5) } else { combine(&centroid, &worst.0, 0.5) };
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = combine(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (y, v) = simplex.swap_remove(0);
    (embed(&y), v)
}

fn minimize(
    axes: &[Vec<f64>],
    bounds: &[(f64, f64)],
    steps: &[f64],
    sweeps: usize,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, f64, bool) {
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; axes.len()];
        for k in (0..axes.len()).rev() {
            p[k] = axes[k][idx % axes[k].len()];
            idx /= axes[k].len();
        }
        p
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| objective(&point(i))).collect();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let best_idx = order[0];
    let first = point(best_idx);
    let at_boundary = (0..axes.len()).any(|k| {
        let a = &axes[k];
        a.len() > 1 && (first[k] == a[0] || first[k] == a[a.len() - 1])
    });
    let starts: Vec<usize> = order.into_iter().take(MULTI_START).collect();
    let refined: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|&i| refine(point(i), values[i], bounds, steps, sweeps, objective))
        .collect();
    let (mut best, mut best_val) = (first, values[best_idx]);
    for (p, v) in refined {
        if v < best_val {
            best = p;
            best_val = v;
        }
    }
    (best, best_val, at_boundary)
}

/// Collapse objective of the BKT ansatz at `(γ_c, ν)`.
pub fn bkt_residual(fam: &CurveFamily, gamma_c: f64, nu: f64, config: &CollapseConfig) -> Result<f64> {
    let points = domain_points(fam, config)?;
    Ok(collapse_objective(&bkt_map(&points, &[gamma_c, nu], config.log_base), fam.curves().len(), config.bandwidth, config.bias_matched))
}

/// Collapse objective of the power-law ansatz at `(γ_p, ν, β)`.
pub fn power_law_residual(fam: &CurveFamily, gamma_p: f64, nu: f64, beta: f64, config: &CollapseConfig) -> Result<f64> {
    let points = domain_points(fam, config)?;
    Ok(collapse_objective(&power_map(&points, &[gamma_p, nu, beta]), fam.curves().len(), config.bandwidth, config.bias_matched))
}

/// Fits `g(L)·γ·Ī = F(log L − ν/√(γ−γ_c))` with `γ_c` below every `γ` used.
pub fn bkt_collapse_fit(fam: &CurveFamily, config: &CollapseConfig) -> Result<ScalingFitResult> {
    let points = domain_points(fam, config)?;
    let min_gamma = points.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let gc_hi = config.gamma_c_range.1.min(min_gamma - 1e-6);
    if gc_hi < config.gamma_c_range.0 {
        return Err(Error::Fit("gamma_c window lies above the collapse domain".into()));
    }
    let gc_axis: Vec<f64> = axis(config.gamma_c_range.0, gc_hi, config.gamma_c_step);
    let nu_axis = axis(config.nu_range.0, config.nu_range.1, config.nu_step);
    let sizes = fam.curves().len();
    let objective = |p: &[f64]| collapse_objective(&bkt_map(&points, p, config.log_base), sizes, config.bandwidth, config.bias_matched);
    let (best, residual, at_boundary) = minimize(
        &[gc_axis, nu_axis],
        &[(config.gamma_c_range.0, gc_hi), config.nu_range],
        &[config.gamma_c_step, config.nu_step],
        config.refine_sweeps,
        &objective,
    );
    Ok(ScalingFitResult {
        method: CollapseMethod::Bkt,
        gamma_c: best[0],
        nu: best[1],
        beta: None,
        residual,
        at_boundary,
        n_points: points.len(),
    })
}

/// Fits `Ī = L^{−β} f((γ−γ_p) L^{1/ν})`. An unbounded `γ_p` window defaults
/// to the span of the data.
pub fn power_law_collapse_fit(fam: &CurveFamily, config: &CollapseConfig) -> Result<ScalingFitResult> {
    let points = domain_points(fam, config)?;
    let (g_lo, g_hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.2), b.max(p.2)));
    let lo = if config.gamma_c_range.0.is_finite() && config.gamma_c_range.0 > 0.0 { config.gamma_c_range.0 } else { g_lo };
    let hi = if config.gamma_c_range.1.is_finite() { config.gamma_c_range.1 } else { g_hi };
    let sizes = fam.curves().len();
    let objective = |p: &[f64]| collapse_objective(&power_map(&points, p), sizes, config.bandwidth, config.bias_matched);
    let (best, residual, at_boundary) = minimize(
        &[
            axis(lo, hi, config.gamma_c_step),
            axis(config.nu_range.0, config.nu_range.1, config.nu_step),
            axis(config.beta_range.0, config.beta_range.1, config.beta_step),
        ],
        &[(lo, hi), config.nu_range, config.beta_range],
        &[config.gamma_c_step, config.nu_step, config.beta_step],
        config.refine_sweeps,
        &objective,
    );
    Ok(ScalingFitResult {
        method: CollapseMethod::PowerLaw,
        gamma_c: best[0],
        nu: best[1],
        beta: Some(best[2]),
        residual,
        at_boundary,
        n_points: points.len(),
    })
}

/// `a·L^μ + b` by Levenberg–Marquardt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub mu: f64,
    pub b: f64,
    /// Standard errors of `(a, μ, b)` from the Gauss–Newton covariance.
    pub stderr: [f64; 3],
    pub rss: f64,
    /// `rss / (n − 3)`.
    pub reduced_residual: f64,
    /// `false` when the data carry no size dependence or the normal matrix is
    /// singular, so `μ` is not determined.
    pub identifiable: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub p: f64,
    pub q: f64,
    pub rss: f64,
    /// `rss / (n − 2)`.
    pub reduced_residual: f64,
}

const LM_MAX_ITERATIONS: usize = 500;

fn check_series(sizes: &[f64], values: &[f64], min: usize) -> Result<()> {
    if sizes.len() != values.len() {
        return Err(Error::Fit("size and value lengths differ".into()));
    }
    if sizes.len() < min {
        return Err(Error::Fit(format!("need at least {min} sizes, got {}", sizes.len())));
    }
    if sizes.iter().chain(values).any(|v| !v.is_finite()) || sizes.iter().any(|&l| l <= 0.0) {
        return Err(Error::Fit("sizes must be positive and values finite".into()));
    }
    Ok(())
}

fn linear_ls(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn power_rss(sizes: &[f64], values: &[f64], p: &Vector3<f64>) -> f64 {
    sizes.iter().zip(values).map(|(l, v)| (p[0] * l.powf(p[1]) + p[2] - v).powi(2)).sum()
}

/// Fits `values ≈ a·L^μ + b`.
///
/// `μ` starts from the log–log slope of `|Δv/ΔL|` against the midpoint size
/// plus one; `(a, b)` then follow by linear least squares.
pub fn power_law_fit(sizes: &[f64], values: &[f64]) -> Result<PowerLawFit> {
    check_series(sizes, values, 4)?;
    let n = sizes.len();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let spread = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if spread <= 1e-12 * scale {
        let b = values.iter().sum::<f64>() / n as f64;
        let rss: f64 = values.iter().map(|v| (v - b).powi(2)).sum();
        return Ok(PowerLawFit {
            a: 0.0,
            mu: 0.0,
            b,
            stderr: [f64::NAN; 3],
            rss,
            reduced_residual: rss / (n - 3) as f64,
            identifiable: false,
            iterations: 0,
        });
    }

    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for k in 1..n {
        let slope = (values[k] - values[k - 1]) / (sizes[k] - sizes[k - 1]);
        if slope != 0.0 && slope.is_finite() {
            lx.push(((sizes[k] * sizes[k - 1]).sqrt()).ln());
            ly.push(slope.abs().ln());
        }
    }
    let mu0 = if lx.len() >= 2 { linear_ls(&lx, &ly).0 + 1.0 } else { 0.5 };
    let mu0 = if mu0.abs() < 1e-3 { 1e-3 } else { mu0.clamp(-10.0, 10.0) };
    let basis: Vec<f64> = sizes.iter().map(|l| l.powf(mu0)).collect();
    let (a0, b0) = linear_ls(&basis, values);
    let mut p = Vector3::new(a0, mu0, b0);
    let mut rss = power_rss(sizes, values, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let jacobian = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (l, v) in sizes.iter().zip(values) {
            let lm = l.powf(p[1]);
            let row = Vector3::new(lm, p[0] * lm * l.ln(), 1.0);
            let r = p[0] * lm + p[2] - v;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        (jtj, jtr)
    };
    let mut converged = false;
    while iterations < LM_MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = jacobian(&p);
        if jtr.amax() <= 1e-15 * scale * scale || rss <= 1e-30 * scale * scale {
            converged = true;
            break;
        }
        let mut damped = jtj;
        for k in 0..3 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&(-jtr)) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        let trial_rss = power_rss(sizes, values, &trial);
        if trial_rss.is_finite() && trial_rss <= rss {
            let rel = step.component_div(&p.map(|x| x.abs().max(1e-12))).amax();
            let drop = rss - trial_rss;
            p = trial;
            rss = trial_rss;
            lambda = (lambda / 10.0).max(1e-15);
            if rel < 1e-13 || drop <= 1e-15 * rss {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence(iterations));
    }
    let (jtj, _) = jacobian(&p);
    let dof = (n - 3) as f64;
    let reduced = rss / dof;
    let cov = jtj.try_inverse();
    let identifiable = cov.is_some() && p[0].abs() > 1e-10 * scale;
    let stderr = match cov {
        Some(c) => [0, 1, 2].map(|k| (reduced * c[(k, k)]).max(0.0).sqrt()),
        None => [f64::NAN; 3],
    };
    Ok(PowerLawFit { a: p[0], mu: p[1], b: p[2], stderr, rss, reduced_residual: reduced, identifiable, iterations })
}

/// Fits `values ≈ p·ln L + q`.
pub fn log_fit(sizes: &[f64], values: &[f64]) -> Result<LogFit> {
    check_series(sizes, values, 3)?;
    let logs: Vec<f64> = sizes.iter().map(|l| l.ln()).collect();
    let (p, q) = linear_ls(&logs, values);
    let rss: f64 = logs.iter().zip(values).map(|(x, v)| (p * x + q - v).powi(2)).sum();
    Ok(LogFit { p, q, rss, reduced_residual: rss / (sizes.len() - 2) as f64 })
}
