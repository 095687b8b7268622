//! Golden event traces: a fixed 100-task run per policy on six servers in
//! two racks, compared byte for byte against the committed files.

use std::path::{Path, PathBuf};

use podsim::cluster::{scale_to_load, RateProfile, Topology};
use podsim::engine::{run_with_log, Horizon, SimConfig};
use podsim::policies::{PodConfig, PolicyKind, PolicyOptions};
use podsim::workload::{sample_type_pool, PoolScope, Popularity};

use crate::{CliError, Result};

pub const TASKS: u64 = 100;
const LOAD: f64 = 0.8;
const SEED: u64 = 7;

/// Where the committed traces live in the source tree.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

pub fn file_name(kind: PolicyKind) -> String {
    format!("{}.tsv", kind.name())
}

/// All 20 three-replica types of the cluster at equal popularity. Pod
/// variants sample one server per stratum so the sampler is exercised.
pub fn golden_config(kind: PolicyKind) -> Result<SimConfig> {
    let topo = Topology::new(6, 2)?;
    let pool = sample_type_pool(&topo, 20, 3, Popularity::Uniform, PoolScope::All, 1)?;
    let w = scale_to_load(&pool.shape(), LOAD, &topo, &RateProfile::default())?;
    let mut c = SimConfig::new(topo, w, kind);
    c.options = PolicyOptions {
        pod: kind.uses_pod().then(|| PodConfig::stratified(1, 1)),
        count_in_service: false,
    };
    c.horizon = Horizon::Arrivals(TASKS);
    c.warmup = 0.0;
    c.seed = SEED;
    c.check_invariants = true;
    Ok(c)
}

pub fn render(kind: PolicyKind) -> Result<String> {
    let mut buf = Vec::new();
    run_with_log(&golden_config(kind)?, &mut buf)?;
    Ok(String::from_utf8(buf).expect("log is utf-8"))
}

pub fn write_goldens(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    PolicyKind::ALL
        .into_iter()
        .map(|k| {
            let path = dir.join(file_name(k));
            std::fs::write(&path, render(k)?).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Regenerates every trace and compares it with the file in `dir`.
pub fn check_goldens(dir: &Path) -> Result<()> {
    let mut bad = Vec::new();
    for k in PolicyKind::ALL {
        let path = dir.join(file_name(k));
        let stored = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        if stored != render(k)? {
            bad.push(k.name());
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Golden(bad.join(", ")))
    }
}
