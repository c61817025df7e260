//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. An
//! unmet criterion is reported as FAIL and does not abort the suite; only an
//! infrastructure error (a panic) fails the target. Set
//! `MFSIM_ACCEPTANCE_QUICK=1` for a reduced-ensemble pass while developing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mfsim::analyze::{analyze, read_inputs, Mode};
use mfsim::config::{AnalysisConfig, ExperimentConfig};
use mfsim::oracle_check::oracle_check;
use mfsim::run::{run, RunOptions, RESULTS_FILE, TRAJECTORIES_FILE};
use monitored_fermions::bounds::{
    bilinear_norm, classify_threshold, growth_rate_check, growth_rate_lambda, lemma1_bound_bilinear,
    norm_scaling_series, BoundParameters, Family,
};
use monitored_fermions::model::{build_boundary_block, build_hopping_matrix, LatticeSpec};
use monitored_fermions::observables::{cft_fit, default_fit_window, EntanglementProfile, Observable};
use monitored_fermions::oracle::{dense_hamiltonian, dense_neel};
use monitored_fermions::scaling::{
    bkt_collapse_fit, g_factor, power_law_collapse_fit, CollapseConfig, Curve, CurveFamily, LogBase,
};
use monitored_fermions::stats::{ks_critical_value, ks_statistic_exponential, mean_stderr};
use monitored_fermions::trajectory::{run_trajectory, Engine, TrajectoryConfig};
use tempfile::TempDir;

/// `𝒜`, the norm of the single-site operators in the bilinear coupling.
const LOCAL_OPERATOR_NORM: f64 = 1.0;

struct Outcome {
    passed: usize,
    failed: usize,
}

impl Outcome {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn quick() -> bool {
    std::env::var_os("MFSIM_ACCEPTANCE_QUICK").is_some_and(|v| v != "0")
}

/// A sweep of the full acceptance set, run once per worker count.
struct Sweep {
    name: &'static str,
    toml: String,
}

fn sweeps() -> Vec<Sweep> {
    let (mip_traj, cft_traj, area_traj) = if quick() { (24, 4, 2) } else { (200, 20, 8) };
    let gammas: Vec<String> = (1..=10).map(|k| format!("{:.1}", k as f64 / 10.0)).collect();
    vec![
        Sweep {
            name: "mip",
            toml: format!(
                "seed = 20240601\n[model]\nsizes = [32, 64]\nalphas = [0.8, 10.0]\ngammas = [{}]\n\
                 [trajectory]\nn_traj = {mip_traj}\nobservables = [\"mi_quarters\"]\nengine = \"spectral\"\n",
                gammas.join(", ")
            ),
        },
        Sweep {
            name: "cft_critical",
            toml: format!(
                "seed = 20240602\n[model]\nsizes = [128]\nalphas = [10.0]\ngammas = [0.2]\n\
                 [trajectory]\nn_traj = {cft_traj}\nobservables = [\"profile\"]\nengine = \"spectral\"\n"
            ),
        },
        Sweep {
            name: "cft_area",
            // strong monitoring relaxes within a few units of time
            toml: format!(
                "seed = 20240603\n[model]\nsizes = [128]\nalphas = [10.0]\ngammas = [5.0]\n\
                 [trajectory]\nn_traj = {area_traj}\nt_burn = 32.0\nt_sample = 32.0\nobservables = [\"profile\"]\nengine = \"spectral\"\n"
            ),
        },
    ]
}

fn run_sweep(sweep: &Sweep, root: &Path, workers: usize) -> PathBuf {
    let config = ExperimentConfig::from_toml(&sweep.toml).expect("acceptance config");
    let out = root.join(format!("{}_w{workers}", sweep.name));
    run(&config, &RunOptions { out: out.clone(), workers, resume: false, stop_after: None })
        .unwrap_or_else(|e| panic!("sweep {}: {e}", sweep.name));
    out
}

fn oracle_equivalence(o: &mut Outcome) {
    let start = Instant::now();
    let tmp = TempDir::new().unwrap();
    let config = ExperimentConfig::from_toml(
        "seed = 7\n[oracle]\nsizes = [6]\nalphas = [1.5]\ngamma = 1.0\nt_sample = 20.0\ntrajectories = 2\n",
    )
    .unwrap();
    let report = oracle_check(&config, tmp.path(), false).expect("oracle check");
    let names = ["trajectory_observables", "correlation_after_each_jump", "spectral_engine_observables"];
    let relevant: Vec<_> = report.checks.iter().filter(|c| names.contains(&c.name.as_str())).collect();
    let worst = relevant.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    let jumps: usize = relevant
        .iter()
        .find(|c| c.name == "trajectory_observables")
        .and_then(|c| c.detail.split(", ").nth(1)?.split(' ').next()?.parse().ok())
        .unwrap_or(0);
    let elapsed = start.elapsed();
    o.report(
        "oracle equivalence (L=6, N=3, alpha=1.5, gamma=1)",
        relevant.len() == 3 && worst < 1e-8 && jumps >= 50 && elapsed < Duration::from_secs(60),
        format!("max deviation {worst:.2e} over {jumps} jumps in {:.1}s", elapsed.as_secs_f64()),
    );
}

fn norm_scaling(o: &mut Outcome) {
    let start = Instant::now();
    let sizes = [256, 512, 1024, 2048, 4096];
    let mut lines = Vec::new();
    let mut pass = true;
    for alpha in [0.5, 0.8] {
        let s = norm_scaling_series(alpha, &sizes).expect("norm series");
        let mu = s.power_fit.as_ref().map_or(f64::NAN, |f| f.mu);
        let ok = (mu - (1.0 - alpha)).abs() <= 0.05;
        pass &= ok;
        lines.push(format!("alpha={alpha} mu={mu:.4} (target {:.2})", 1.0 - alpha));
    }
    let s = norm_scaling_series(1.2, &sizes).expect("norm series");
    let log_res = s.log_fit.as_ref().map_or(f64::INFINITY, |f| f.reduced_residual);
    let pow_res = s.power_fit.as_ref().map_or(f64::INFINITY, |f| f.reduced_residual);
    pass &= log_res < pow_res;
    lines.push(format!("alpha=1.2 log residual {log_res:.2e} vs power {pow_res:.2e}"));
    for alpha in [2.0, 3.0] {
        let s = norm_scaling_series(alpha, &sizes).expect("norm series");
        let at = |l: usize| s.points.iter().find(|p| p.0 == l).map(|p| p.1).unwrap();
        let ratio = at(4096) / at(512);
        pass &= ratio < 1.05;
        lines.push(format!("alpha={alpha} ratio {ratio:.5}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(600);
    lines.push(format!("{:.1}s", elapsed.as_secs_f64()));
    o.report("norm scaling", pass, lines.join("; "));
}

fn lemma_inequality(o: &mut Outcome) {
    let mut pass = true;
    let mut violations = Vec::new();
    let mut tightest = (f64::INFINITY, 0.0, 0);
    for alpha in [1.6, 2.0, 3.0] {
        for l in [64, 128, 256, 512, 1024] {
            let spec = LatticeSpec::new(l, alpha).unwrap();
            let block = build_boundary_block(&spec, l / 2).unwrap();
            let norm = bilinear_norm(&block) / LOCAL_OPERATOR_NORM;
            let bound = lemma1_bound_bilinear(&BoundParameters::new(alpha, 1, block.g_max()).unwrap(), l).unwrap();
            if norm > bound {
                pass = false;
                violations.push(format!("alpha={alpha} L={l}: {norm:.4} > {bound:.4}"));
            }
            if bound / norm < tightest.0 {
                tightest = (bound / norm, alpha, l);
            }
        }
    }
    let bilinear = classify_threshold(1, Family::Bilinear).unwrap();
    let interacting = classify_threshold(1, Family::Interacting).unwrap();
    pass &= bilinear == 1.5 && interacting == 2.0;
    let detail = if violations.is_empty() {
        format!("tightest bound/norm {:.3} at alpha={} L={}", tightest.0, tightest.1, tightest.2)
    } else {
        format!("violated at {}", violations.join(", "))
    };
    o.report(
        "Lemma 1 inequality and thresholds",
        pass,
        format!("{detail}; alpha_sc bilinear {bilinear}, interacting {interacting}"),
    );
}

fn mip_dichotomy(o: &mut Outcome, dir: &Path, elapsed: Duration) {
    let files = [dir.join(RESULTS_FILE), dir.join(TRAJECTORIES_FILE)];
    let analysis = AnalysisConfig { observable: "mi_quarters".into(), ..AnalysisConfig::default() };
    let report = analyze(&files, Mode::Crossing, &analysis, 11, &dir.join("analysis")).expect("crossing analysis");
    let inputs = read_inputs(&files[..1]).expect("results");
    let tag = if quick() { " [quick]" } else { "" };

    let short = report.crossings.iter().find(|c| c.alpha == 10.0).expect("alpha 10 entry");
    let interval = short.bootstrap.as_ref().and_then(|b| b.interval);
    let pass = short.crossing.is_some() && interval.is_some_and(|(lo, hi)| lo > 0.1 && hi < 1.0);
    o.report(
        &format!("MIP dichotomy, alpha=10 crossing{tag}"),
        pass,
        format!(
            "crossing {:?}, 95% bootstrap interval {:?}, sweep {:.0}s",
            short.crossing.as_ref().map(|c| c.gamma),
            interval,
            elapsed.as_secs_f64()
        ),
    );

    let long = report.crossings.iter().find(|c| c.alpha == 0.8).expect("alpha 0.8 entry");
    let rows = |l: usize| {
        let mut r: Vec<_> = inputs.results.iter().filter(|r| r.alpha == 0.8 && r.sites == l).collect();
        r.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        r
    };
    let (small, large) = (rows(32), rows(64));
    let mut worst = f64::INFINITY;
    for (a, b) in small.iter().zip(&large) {
        let z = (b.mean - a.mean) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        worst = worst.min(z);
    }
    o.report(
        &format!("MIP dichotomy, alpha=0.8 growth{tag}"),
        long.crossing.is_none() && small.len() == 10 && large.len() == 10 && worst > 2.0,
        format!(
            "crossing {:?}; smallest (I(64) - I(32)) / combined stderr = {worst:.2}",
            long.crossing.as_ref().map(|c| c.gamma)
        ),
    );
}

fn profile_of(dir: &Path) -> EntanglementProfile {
    let inputs = read_inputs(&[dir.join(RESULTS_FILE)]).expect("results");
    let mut rows: Vec<(usize, f64, f64)> = inputs
        .results
        .iter()
        .filter_map(|r| Some((r.observable.strip_prefix("entropy_l")?.parse().ok()?, r.mean, r.stderr)))
        .collect();
    rows.sort_by_key(|r| r.0);
    let sites = inputs.results[0].sites;
    EntanglementProfile::new(sites, rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect())
        .expect("profile")
}

fn cft_profile(o: &mut Outcome, critical: &Path, area: &Path) {
    let tag = if quick() { " [quick]" } else { "" };
    let p = profile_of(critical);
    let fit = cft_fit(&p, default_fit_window(p.sites)).expect("cft fit");
    o.report(
        &format!("CFT profile, alpha=10 gamma=0.2 L=128{tag}"),
        fit.r_squared > 0.98 && fit.c_eff > 0.0,
        format!("c_eff {:.4} +- {:.4}, R^2 {:.5}", fit.c_eff, fit.c_stderr, fit.r_squared),
    );
    let p = profile_of(area);
    let drop = p.values[p.sites / 2 - 1] - p.values[p.sites / 8 - 1];
    o.report(
        &format!("area-law profile, alpha=10 gamma=5 L=128{tag}"),
        drop < 0.1,
        format!("S(L/2) - S(L/8) = {drop:.4} bit"),
    );
}

fn jump_statistics(o: &mut Outcome) {
    let spec = LatticeSpec::new(16, 2.0).unwrap();
    let h = build_hopping_matrix(&spec);
    let gamma = 0.5;
    let rate = gamma * spec.particles() as f64;
    let events = 10_000;
    let mut lines = Vec::new();
    let mut pass = true;
    for engine in [Engine::Canonical, Engine::Spectral] {
        let config = TrajectoryConfig {
            t_burn: 0.0,
            t_sample: 1.2 * events as f64 / rate,
            dt_sample: 100.0,
            n_traj: 1,
            observables: vec![Observable::EntropyHalf],
            engine,
            ..TrajectoryConfig::new(spec.clone(), gamma, 99)
        };
        let out = run_trajectory(&config, &h, 0).expect("trajectory");
        let times: Vec<f64> = out.record.events.iter().map(|e| e.time).collect();
        assert!(times.len() >= events, "only {} events", times.len());
        let waits: Vec<f64> =
            std::iter::once(times[0]).chain(times.windows(2).map(|w| w[1] - w[0])).take(events).collect();
        let (mean, stderr) = mean_stderr(&waits);
        let d = ks_statistic_exponential(&waits, rate);
        let critical = ks_critical_value(waits.len(), 0.01);
        pass &= (mean - 1.0 / rate).abs() < 3.0 * stderr && d < critical;
        lines.push(format!(
            "{engine:?}: mean {mean:.5} vs {:.5} (stderr {stderr:.5}), KS {d:.4} < {critical:.4}",
            1.0 / rate
        ));
    }
    o.report("jump statistics (10^4 events)", pass, lines.join("; "));
}

fn conservation(o: &mut Outcome, dirs: &[PathBuf]) {
    let (mut ortho, mut trace, mut rows) = (0.0f64, 0.0f64, 0usize);
    for dir in dirs {
        let mut reader = csv::Reader::from_path(dir.join(TRAJECTORIES_FILE)).expect("trajectories");
        let header = reader.headers().unwrap().clone();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let (co, ct) = (col("max_orthonormality_error"), col("max_trace_error"));
        for record in reader.records() {
            let record = record.unwrap();
            ortho = ortho.max(record[co].parse().unwrap());
            trace = trace.max(record[ct].parse().unwrap());
            rows += 1;
        }
    }
    o.report(
        "conservation and unitarity",
        rows > 0 && ortho < 1e-9 && trace < 1e-9,
        format!("max |u^H u - I| {ortho:.2e}, max |tr D - N| {trace:.2e} over {rows} trajectory rows"),
    );
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn family(sizes: &[usize], gammas: &[f64], f: impl Fn(f64, f64) -> f64) -> CurveFamily {
    CurveFamily::new(
        sizes
            .iter()
            .map(|&l| {
                let values: Vec<f64> = gammas.iter().map(|&g| f(l as f64, g)).collect();
                Curve::from_values(l, gammas, &values).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn within(x: f64, target: f64) -> bool {
    (x - target).abs() <= 0.05 * target.abs()
}

fn fit_round_trips(o: &mut Outcome) {
    let (gc, nu) = (0.3, 4.0);
    let bkt = family(&[32, 64, 128, 256], &grid(0.6, 2.8, 23), |l, g| {
        let x = l.ln() - nu / (g - gc).sqrt();
        x.tanh() / (g_factor(l as usize, LogBase::Natural) * g)
    });
    let narrow = bkt_collapse_fit(&bkt, &CollapseConfig { bandwidth: 0.2, ..CollapseConfig::default() }).unwrap();
    let default = bkt_collapse_fit(&bkt, &CollapseConfig::default()).unwrap();
    let (gp, beta, nu_p) = (3.0, 2.5, 1.4);
    let power = family(&[8, 12, 16, 24, 32], &grid(2.0, 4.0, 21), |l, g| {
        l.powf(-beta) / (1.0 + ((g - gp) * l.powf(1.0 / nu_p)).exp())
    });
    let pl = power_law_collapse_fit(&power, &CollapseConfig::power_law()).unwrap();
    let pass = within(narrow.gamma_c, gc)
        && within(narrow.nu, nu)
        && within(pl.gamma_c, gp)
        && within(pl.nu, nu_p)
        && pl.beta.is_some_and(|b| within(b, beta));
    o.report(
        "fit round trips",
        pass,
        format!(
            "BKT (bandwidth 0.2) gamma_c {:.4} nu {:.4} [planted 0.3, 4]; BKT (bandwidth {}) gamma_c {:.4} nu {:.4}; \
             power law gamma_p {:.4} beta {:.4} nu {:.4} [planted 3, 2.5, 1.4]",
            narrow.gamma_c,
            narrow.nu,
            CollapseConfig::default().bandwidth,
            default.gamma_c,
            default.nu,
            pl.gamma_c,
            pl.beta.unwrap_or(f64::NAN),
            pl.nu
        ),
    );
}

fn growth_rate(o: &mut Outcome) {
    let spec = LatticeSpec::new(6, 1.5).unwrap();
    let block = build_boundary_block(&spec, 3).unwrap();
    let neel = dense_neel(&spec).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for v in [0.0, 1.0] {
        let at_neel = growth_rate_lambda(&neel, &block, v).unwrap();
        let lambda = at_neel.lambda.norm().max(at_neel.lambda_log.norm());
        let h = dense_hamiltonian(&spec, v).unwrap();
        let report = growth_rate_check(&neel, &h, &block, v, 0.7, 1e-5, 1e-6).unwrap();
        pass &= lambda == 0.0 && !report.matched.is_empty();
        lines.push(format!(
            "V={v}: Neel |lambda| {lambda:e}; at t=0.7 dS/dt {:.9}, literal {:.9}, log-corrected {:.9}, matched {:?}",
            report.finite_difference, report.rates.rate_literal, report.rates.rate_log, report.matched
        ));
    }
    o.report("growth rate (L=6)", pass, lines.join("; "));
}

fn determinism(o: &mut Outcome, pairs: &[(PathBuf, PathBuf)]) {
    let mut differing = Vec::new();
    for (a, b) in pairs {
        for file in [RESULTS_FILE, TRAJECTORIES_FILE] {
            if fs::read(a.join(file)).unwrap() != fs::read(b.join(file)).unwrap() {
                differing.push(format!("{}", a.join(file).display()));
            }
        }
    }
    o.report(
        "determinism (1 vs 8 workers)",
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} sweeps byte-identical", pairs.len())
        } else {
            format!("differs: {}", differing.join(", "))
        },
    );
}

fn main() {
    let mut o = Outcome { passed: 0, failed: 0 };
    oracle_equivalence(&mut o);
    norm_scaling(&mut o);
    lemma_inequality(&mut o);
    jump_statistics(&mut o);
    fit_round_trips(&mut o);
    growth_rate(&mut o);

    let tmp = TempDir::new().unwrap();
    let mut pairs = Vec::new();
    let mut timings = Vec::new();
    for sweep in sweeps() {
        let start = Instant::now();
        let eight = run_sweep(&sweep, tmp.path(), 8);
        timings.push(start.elapsed());
        let one = run_sweep(&sweep, tmp.path(), 1);
        pairs.push((one, eight));
    }
    mip_dichotomy(&mut o, &pairs[0].1, timings[0]);
    cft_profile(&mut o, &pairs[1].1, &pairs[2].1);
    let dirs: Vec<PathBuf> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    conservation(&mut o, &dirs);
    determinism(&mut o, &pairs);

    println!("acceptance: {} passed, {} failed", o.passed, o.failed);
}
