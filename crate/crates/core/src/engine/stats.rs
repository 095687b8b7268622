//! Estimators over a finished run.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{SimResult, TaskRecord};
use crate::cluster::LocalityClass;
use crate::error::{Error, Result};

/// Batches used for the confidence interval; also the minimum record count.
pub const MIN_BATCHES: usize = 20;

/// Mean sojourn with a 95% batch-means confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionTime {
    pub mean: f64,
    pub half_width: f64,
    pub count: usize,
}

/// Mean sojourn over all post-warmup records. The interval comes from
/// [`MIN_BATCHES`] consecutive equal-size batches in completion order; up to
/// `MIN_BATCHES - 1` trailing records are left out of the batches only.
pub fn mean_completion_time(result: &SimResult) -> Result<CompletionTime> {
    sojourn_estimate(&result.records)
}

pub(crate) fn sojourn_estimate(records: &[TaskRecord]) -> Result<CompletionTime> {
    let n = records.len();
    if n < MIN_BATCHES {
        return Err(Error::InsufficientData {
            needed: MIN_BATCHES,
            got: n,
        });
    }
    let mean = records.iter().map(TaskRecord::sojourn).sum::<f64>() / n as f64;
    let size = n / MIN_BATCHES;
    let batch_means: Vec<f64> = records
        .chunks_exact(size)
        .take(MIN_BATCHES)
        .map(|b| b.iter().map(TaskRecord::sojourn).sum::<f64>() / size as f64)
        .collect();
    let k = batch_means.len() as f64;
    let grand = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|b| (b - grand).powi(2)).sum::<f64>() / (k - 1.0);
    let t = StudentsT::new(0.0, 1.0, k - 1.0)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    Ok(CompletionTime {
        mean,
        half_width: t * (var / k).sqrt(),
        count: n,
    })
}

/// Fractions of post-warmup tasks served at each locality class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalityMix {
    pub local: f64,
    pub rack: f64,
    pub remote: f64,
}

impl LocalityMix {
    pub fn sum(&self) -> f64 {
        self.local + self.rack + self.remote
    }
}

pub fn locality_mix(result: &SimResult) -> Result<LocalityMix> {
    let n = result.records.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut counts = [0usize; 3];
    for r in &result.records {
        counts[r.class.index()] += 1;
    }
    let local = counts[LocalityClass::Local.index()] as f64 / n as f64;
    let rack = counts[LocalityClass::RackLocal.index()] as f64 / n as f64;
    // Closing the sum this way makes `local + rack + remote` exactly 1.
    let remote = 1.0 - (local + rack);
    Ok(LocalityMix { local, rack, remote })
}

/// Time-averaged number of tasks in the system over the first and second
/// half of the post-warmup window, and `late / early`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityStat {
    pub early: f64,
    pub late: f64,
    pub ratio: f64,
}

pub fn queue_stability_stat(result: &SimResult) -> StabilityStat {
    let (a, b) = (result.warmup_end, result.end_time);
    let mid = 0.5 * (a + b);
    let early = time_average(&result.occupancy, a, mid);
    let late = time_average(&result.occupancy, mid, b);
    let ratio = match (early > 0.0, late > 0.0) {
        (false, false) => 1.0,
        (false, true) => f64::INFINITY,
        _ => late / early,
    };
    StabilityStat { early, late, ratio }
}

/// Average of a right-continuous step function (zero before its first
/// point) over `[a, b]`; zero for an empty window.
fn time_average(steps: &[(f64, u32)], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let first = steps.partition_point(|&(t, _)| t <= a);
    let mut level = if first == 0 { 0.0 } else { steps[first - 1].1 as f64 };
    let mut t = a;
    let mut area = 0.0;
    for &(s, n) in &steps[first..] {
        if s >= b {
            break;
        }
        area += level * (s - t);
        t = s;
        level = n as f64;
    }
    area += level * (b - t);
    area / (b - a)
}
