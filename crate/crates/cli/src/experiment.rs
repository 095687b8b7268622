//! Load sweeps: every (policy, load, replication) is one simulation run.

use std::path::{Path, PathBuf};

use podsim::cluster::{throughput_margin, RateVector, Topology};
use podsim::engine::{locality_mix, mean_completion_time, queue_stability_stat, run, SimConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, PolicyEntry, RateSource};
use crate::{CliError, Result};

pub const RESULT_COLUMNS: [&str; 11] = [
    "policy",
    "rho",
    "seed",
    "mean_completion_time",
    "ci_half_width",
    "frac_local",
    "frac_rack",
    "frac_remote",
    "route_cost_per_task",
    "sched_cost_per_decision",
    "stability_ratio",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "policy",
    "rho",
    "replications",
    "mean_completion_time",
    "ci_half_width",
    "frac_local",
    "frac_rack",
    "frac_remote",
    "route_cost_per_task",
    "sched_cost_per_decision",
    "stability_ratio",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// One replication of one policy at one load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub rho: f64,
    pub seed: u64,
    pub mean_completion_time: f64,
    pub ci_half_width: f64,
    pub frac_local: f64,
    pub frac_rack: f64,
    pub frac_remote: f64,
    /// Servers examined per routing decision; one routing per task.
    pub route_cost_per_task: f64,
    pub sched_cost_per_decision: f64,
    pub stability_ratio: f64,
}

/// Replications of one (policy, load) averaged. The half-width pools the
/// per-replication intervals as `sqrt(sum hw_i^2) / R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub rho: f64,
    pub replications: usize,
    pub mean_completion_time: f64,
    pub ci_half_width: f64,
    pub frac_local: f64,
    pub frac_rack: f64,
    pub frac_remote: f64,
    pub route_cost_per_task: f64,
    pub sched_cost_per_decision: f64,
    pub stability_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    /// Throughput margin of the rate shape; `None` for absolute rates or an
    /// empty load grid.
    pub margin: Option<f64>,
    /// Ordered by policy (config order), then load, then replication.
    pub rows: Vec<ResultRow>,
    /// Ordered by policy, then load.
    pub summary: Vec<SummaryRow>,
}

impl Experiment {
    pub fn summary_row(&self, policy: &str, rho: f64) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.policy == policy && s.rho == rho)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    spec.validate()?;
    let topo = spec.topology()?;
    let loads = &spec.run.loads;
    let (margin, rates_at) = match spec.rate_source()? {
        RateSource::Absolute(v) => (None, v),
        RateSource::Shape(shape) if loads.is_empty() => (None, shape),
        RateSource::Shape(shape) => {
            // One LP per shape; each load is a rescaling of the same witness.
            let m = throughput_margin(&shape, &topo, &spec.rates)?.margin;
            (Some(m), shape.scaled(m))
        }
    };

    let reps = spec.run.replications;
    let jobs: Vec<(&PolicyEntry, f64, u64)> = spec
        .policies
        .iter()
        .flat_map(|p| {
            loads
                .iter()
                .flat_map(move |&rho| (0..reps as u64).map(move |i| (p, rho, i)))
        })
        .collect();
    let base = spec.run.base_seed;
    let work = || {
        jobs.par_iter()
            .map(|&(p, rho, i)| replicate(spec, &topo, &rates_at.scaled(rho), p, rho, base + i))
            .collect::<Result<Vec<_>>>()
    };
    let rows = match spec.run.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let summary = rows.chunks(reps).map(summarize).collect();
    Ok(Experiment { margin, rows, summary })
}

fn replicate(
    spec: &ExperimentSpec,
    topo: &Topology,
    workload: &RateVector,
    policy: &PolicyEntry,
    rho: f64,
    seed: u64,
) -> Result<ResultRow> {
    let mut c = SimConfig::new(*topo, workload.clone(), policy.name);
    c.rates = spec.rates;
    c.service = spec.service;
    c.mode = spec.time_mode();
    c.options = policy.options();
    c.horizon = spec.run.horizon.into();
    c.warmup = spec.run.warmup;
    c.seed = seed;
    c.check_invariants = spec.run.check_invariants;
    let r = run(&c)?;
    let ct = mean_completion_time(&r)?;
    let mix = locality_mix(&r)?;
    Ok(ResultRow {
        policy: policy.name.name().to_string(),
        rho,
        seed,
        mean_completion_time: ct.mean,
        ci_half_width: ct.half_width,
        frac_local: mix.local,
        frac_rack: mix.rack,
        frac_remote: mix.remote,
        route_cost_per_task: r.cost.route_per_decision(),
        sched_cost_per_decision: r.cost.sched_per_decision(),
        stability_ratio: queue_stability_stat(&r).ratio,
    })
}

fn summarize(reps: &[ResultRow]) -> SummaryRow {
    let n = reps.len() as f64;
    let mean = |f: fn(&ResultRow) -> f64| reps.iter().map(f).sum::<f64>() / n;
    SummaryRow {
        policy: reps[0].policy.clone(),
        rho: reps[0].rho,
        replications: reps.len(),
        mean_completion_time: mean(|r| r.mean_completion_time),
        ci_half_width: reps.iter().map(|r| r.ci_half_width.powi(2)).sum::<f64>().sqrt() / n,
        frac_local: mean(|r| r.frac_local),
        frac_rack: mean(|r| r.frac_rack),
        frac_remote: mean(|r| r.frac_remote),
        route_cost_per_task: mean(|r| r.route_cost_per_task),
        sched_cost_per_decision: mean(|r| r.sched_cost_per_decision),
        stability_ratio: mean(|r| r.stability_ratio),
    }
}

/// Writes `header` and then one line per row, so an empty table still has
/// its header.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `results.csv` and `summary.csv` into `dir`, creating it.
pub fn write_experiment(exp: &Experiment, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let results = dir.join(RESULTS_FILE);
    let summary = dir.join(SUMMARY_FILE);
    write_csv(&results, &RESULT_COLUMNS, &exp.rows)?;
    write_csv(&summary, &SUMMARY_COLUMNS, &exp.summary)?;
    Ok((results, summary))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if !header.iter().eq(SUMMARY_COLUMNS) {
        return Err(CliError::Config(format!("{}: not a summary table", path.display())));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<SummaryRow>, _>>()
        .map_err(|e| CliError::io(path, e))
}
