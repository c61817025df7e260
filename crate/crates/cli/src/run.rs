//! The `run` subcommand: sweeps `(L, α, γ)` cells, one work item per
//! trajectory, with a checkpoint that makes interrupted runs resumable.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use monitored_fermions::model::{build_hopping_matrix, SingleParticleHamiltonian};
use monitored_fermions::trajectory::{run_trajectory, summarize, JumpRecord, TrajectoryConfig, TrajectorySummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_f64, write_csv, write_json};

pub const RESULTS_FILE: &str = "results.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const JUMPS_FILE: &str = "jumps.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";

pub const RESULTS_HEADER: [&str; 8] = ["L", "alpha", "gamma", "observable", "mean", "stderr", "n_traj", "config_hash"];
pub const TRAJECTORIES_HEADER: [&str; 11] = [
    "L",
    "alpha",
    "gamma",
    "trajectory_id",
    "seed",
    "n_jumps",
    "max_orthonormality_error",
    "max_trace_error",
    "observable",
    "value",
    "config_hash",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: usize,
    pub resume: bool,
    /// Stop once this many new trajectories are checkpointed; simulates an
    /// interruption.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub cells: usize,
    pub failed_cells: usize,
    pub computed: usize,
    pub reused: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Entry {
    Header { config_hash: String },
    Trajectory { cell: usize, summary: TrajectorySummary, jumps: Option<JumpRecord> },
    Failure { cell: usize, trajectory_id: u64, error: String },
}

#[derive(Debug, Clone, Serialize)]
struct CellProvenance {
    #[serde(rename = "L")]
    sites: usize,
    alpha: f64,
    gamma: f64,
    seed: u64,
    trajectory_streams: String,
    status: String,
}

#[derive(Debug, Clone, Serialize)]
struct Provenance<'a> {
    config_hash: String,
    code_version: &'static str,
    rng: &'static str,
    config: &'a ExperimentConfig,
    cells: Vec<CellProvenance>,
}

struct Prepared {
    cell: Cell,
    config: Result<TrajectoryConfig, String>,
    h: Option<SingleParticleHamiltonian>,
}

/// Completed trajectories of an earlier attempt with the same config hash.
fn read_checkpoint(path: &Path, hash: &str) -> Result<BTreeMap<(usize, u64), Entry>, CliError> {
    let mut done = BTreeMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(done);
    };
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        None => return Ok(done),
        Some(line) => match serde_json::from_str::<Entry>(&line?) {
            Ok(Entry::Header { config_hash }) if config_hash == hash => {}
            Ok(Entry::Header { config_hash }) => {
                return Err(CliError::Config(format!(
                    "checkpoint belongs to config {config_hash}, not {hash}; remove it or drop --resume"
                )))
            }
            _ => return Err(CliError::Runtime(format!("{} has no header", path.display()))),
        },
    }
    for line in lines {
        // a torn final line from an interruption is ignored
        let Ok(entry) = serde_json::from_str::<Entry>(&line?) else { break };
        if let Entry::Trajectory { cell, ref summary, .. } = entry {
            done.insert((cell, summary.trajectory_id), entry);
        }
    }
    Ok(done)
}

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    ensure_dir(&opts.out)?;
    let hash = config.hash();
    let checkpoint = opts.out.join(CHECKPOINT_FILE);
    let mut done = if opts.resume { read_checkpoint(&checkpoint, &hash)? } else { BTreeMap::new() };
    let reused = done.len();

    let prepared: Vec<Prepared> = config
        .cells()
        .into_iter()
        .map(|cell| {
            let tc = config.cell_config(&cell).map_err(|e| e.to_string());
            let h = tc.as_ref().ok().map(|c| build_hopping_matrix(&c.spec));
            Prepared { cell, config: tc, h }
        })
        .collect();
    let n_traj = config.trajectory.n_traj as u64;
    let items: Vec<(usize, u64)> = prepared
        .iter()
        .enumerate()
        .filter(|(_, p)| p.config.is_ok())
        .flat_map(|(k, _)| (0..n_traj).map(move |id| (k, id)))
        .filter(|key| !done.contains_key(key))
        .collect();

    let mut file = if opts.resume && reused > 0 {
        OpenOptions::new().append(true).open(&checkpoint)?
    } else {
        let mut f = File::create(&checkpoint)?;
        writeln!(f, "{}", serde_json::to_string(&Entry::Header { config_hash: hash.clone() })?)?;
        f
    };
    let save_jumps = config.trajectory.save_jumps;
    let started = AtomicUsize::new(0);
    let limit = opts.stop_after.unwrap_or(usize::MAX);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<Entry>();
    let writer = std::thread::spawn(move || -> std::io::Result<Vec<Entry>> {
        let mut written = Vec::new();
        for entry in rx {
            let line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
            writeln!(file, "{line}")?;
            file.flush()?;
            written.push(entry);
        }
        Ok(written)
    });
    pool.install(|| {
        items.par_iter().for_each_with(tx, |tx, &(k, id)| {
            if started.fetch_add(1, Ordering::SeqCst) >= limit {
                return;
            }
            let p = &prepared[k];
            let (Ok(tc), Some(h)) = (&p.config, &p.h) else { return };
            let entry = match run_trajectory(tc, h, id) {
                Ok(out) => Entry::Trajectory {
                    cell: k,
                    summary: out.summary(),
                    jumps: save_jumps.then(|| out.record.clone()),
                },
                Err(e) => Entry::Failure { cell: k, trajectory_id: id, error: e.to_string() },
            };
            let _ = tx.send(entry);
        });
    });
    let written = writer.join().map_err(|_| CliError::Runtime("checkpoint writer panicked".into()))??;
    let computed = written.len();
    // lowest failing id per cell, independent of completion order
    let mut failures: BTreeMap<usize, (u64, String)> = BTreeMap::new();
    for entry in written {
        match entry {
            Entry::Trajectory { cell, ref summary, .. } => {
                done.insert((cell, summary.trajectory_id), entry);
            }
            Entry::Failure { cell, trajectory_id, error } => {
                let slot = failures.entry(cell).or_insert((trajectory_id, error.clone()));
                if trajectory_id < slot.0 {
                    *slot = (trajectory_id, error);
                }
            }
            Entry::Header { .. } => {}
        }
    }
    if items.len() > limit {
        return Err(CliError::Partial(format!(
            "stopped after {computed} new trajectories ({} of {} pending); rerun with --resume",
            items.len() - computed,
            items.len()
        )));
    }

    let mut results = Vec::new();
    let mut trajectories = Vec::new();
    let mut jumps = Vec::new();
    let mut cells = Vec::new();
    let mut failed_cells = 0;
    for (k, p) in prepared.iter().enumerate() {
        let c = p.cell;
        let status = match (&p.config, failures.get(&k)) {
            (Err(e), _) => Err(e.clone()),
            (Ok(_), Some((id, e))) => Err(format!("trajectory {id}: {e}")),
            (Ok(_), None) => Ok(()),
        };
        cells.push(CellProvenance {
            sites: c.sites,
            alpha: c.alpha,
            gamma: c.gamma,
            seed: p.config.as_ref().map(|t| t.seed).unwrap_or(0),
            trajectory_streams: format!("0..{n_traj}"),
            status: match &status {
                Ok(()) => "ok".into(),
                Err(e) => format!("failed: {e}"),
            },
        });
        if status.is_err() {
            failed_cells += 1;
            continue;
        }
        let tc = p.config.as_ref().expect("checked above");
        let mut summaries = Vec::with_capacity(n_traj as usize);
        for id in 0..n_traj {
            let Some(Entry::Trajectory { summary, jumps: record, .. }) = done.remove(&(k, id)) else {
                return Err(CliError::Runtime(format!("trajectory {id} of cell {k} is missing")));
            };
            if let Some(record) = record {
                jumps.push(serde_json::json!({ "L": c.sites, "alpha": c.alpha, "gamma": c.gamma, "record": record }));
            }
            summaries.push(summary);
        }
        let names = tc.observable_names();
        let (l, a, g) = (c.sites.to_string(), fmt_f64(c.alpha), fmt_f64(c.gamma));
        for s in &summaries {
            for (name, v) in names.iter().zip(&s.averages) {
                trajectories.push(vec![
                    l.clone(),
                    a.clone(),
                    g.clone(),
                    s.trajectory_id.to_string(),
                    tc.seed.to_string(),
                    s.n_jumps.to_string(),
                    fmt_f64(s.max_orthonormality_error),
                    fmt_f64(s.max_trace_error),
                    name.clone(),
                    fmt_f64(*v),
                    hash.clone(),
                ]);
            }
        }
        let ensemble = summarize(names, summaries);
        for (k, name) in ensemble.names.iter().enumerate() {
            results.push(vec![
                l.clone(),
                a.clone(),
                g.clone(),
                name.clone(),
                fmt_f64(ensemble.mean[k]),
                fmt_f64(ensemble.stderr[k]),
                ensemble.n_traj.to_string(),
                hash.clone(),
            ]);
        }
    }

    write_csv(&opts.out.join(RESULTS_FILE), &RESULTS_HEADER, &results)?;
    write_csv(&opts.out.join(TRAJECTORIES_FILE), &TRAJECTORIES_HEADER, &trajectories)?;
    let provenance = Provenance {
        config_hash: hash.clone(),
        code_version: env!("CARGO_PKG_VERSION"),
        rng: "ChaCha8, seed_from_u64(cell seed), stream = trajectory id",
        config: &ExperimentConfig { workers: None, out_dir: None, ..config.clone() },
        cells,
    };
    write_json(&opts.out.join(PROVENANCE_FILE), &provenance)?;
    let jumps_path = opts.out.join(JUMPS_FILE);
    if save_jumps {
        let mut text = String::new();
        for j in &jumps {
            text.push_str(&serde_json::to_string(j)?);
            text.push('\n');
        }
        fs::write(&jumps_path, text)?;
    }

    let report = RunReport {
        config_hash: hash,
        cells: prepared.len(),
        failed_cells,
        computed,
        reused,
        complete: failed_cells == 0,
    };
    if failed_cells > 0 {
        return Err(CliError::Partial(format!("{failed_cells} of {} cells failed; see {PROVENANCE_FILE}", prepared.len())));
    }
    Ok(report)
}
