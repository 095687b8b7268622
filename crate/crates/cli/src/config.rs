//! Experiment config files (TOML).
//!
//! ```toml
//! name = "desk"                # names the default output directory
//! output_dir = "out/desk"      # optional; PODSIM_OUT_DIR wins over it
//!
//! [cluster]
//! servers = 50
//! racks = 5
//! replication = 3              # default 3
//!
//! [rates]                      # default 1.0 / 0.5 / 0.25
//! alpha = 1.0
//! beta = 0.5
//! gamma = 0.25
//!
//! [service]                    # default exponential
//! family = "lognormal"         # geometric | exponential | lognormal
//! cv = 2.0                     # lognormal only, default 2
//!
//! [pool]                       # either [pool] or [workload]
//! size = 200
//! seed = 1                     # default 0
//! popularity = { law = "zipf", s = 1.1 }     # default uniform
//! scope = { kind = "hotspot", rack = 1 }     # default all
//!
//! [workload]                   # explicit rate vector
//! types = [[1, 2, 3], [4, 5, 6]]
//! rates = [0.6, 0.4]
//! absolute = false             # true: use rho * rates, no LP
//!
//! [[policies]]                 # default: all six with default options
//! name = "bp_pod"
//! pod = { n_rack = 2, n_remote = 6, sampling = "stratified" }
//! count_in_service = false
//!
//! [run]
//! loads = [0.3, 0.5, 0.7, 0.9] # default 0.3, 0.4, ..., 0.9, 0.95, 0.99
//! replications = 5             # default 5
//! base_seed = 0                # replication i runs with seed base_seed + i
//! horizon = { arrivals = 50000 }   # or { time = 1000.0 }
//! warmup = 0.2
//! workers = 4                  # default: all cores
//! check_invariants = false
//! ```
//!
//! Geometric service selects slotted time; the other families run in
//! continuous time. Unknown keys are errors.

use std::path::{Path, PathBuf};

use podsim::cluster::{RateProfile, RateVector, TaskType, Topology};
use podsim::engine::Horizon;
use podsim::policies::{PodConfig, PolicyKind, PolicyOptions};
use podsim::workload::{sample_type_pool, PoolScope, Popularity, ServiceFamily, TimeMode};
use serde::Deserialize;

use crate::{CliError, Result};

/// Configs bundled with the binary, addressed as `preset:<name>`.
pub const PRESETS: [(&str, &str); 4] = [
    ("desk", include_str!("../presets/desk.toml")),
    ("reference", include_str!("../presets/reference.toml")),
    (
        "reference_lognormal",
        include_str!("../presets/reference_lognormal.toml"),
    ),
    ("hotspot", include_str!("../presets/hotspot.toml")),
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub rates: RateProfile,
    #[serde(default = "default_service")]
    pub service: ServiceFamily,
    #[serde(default)]
    pub pool: Option<PoolSpec>,
    #[serde(default)]
    pub workload: Option<ExplicitRates>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub servers: usize,
    pub racks: usize,
    #[serde(default = "default_replication")]
    pub replication: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_popularity")]
    pub popularity: Popularity,
    #[serde(default)]
    pub scope: PoolScope,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRates {
    pub types: Vec<Vec<usize>>,
    pub rates: Vec<f64>,
    /// Use `rho * rates` directly instead of scaling to the capacity
    /// boundary, which needs no LP.
    #[serde(default)]
    pub absolute: bool,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub name: PolicyKind,
    #[serde(default)]
    pub pod: Option<PodConfig>,
    #[serde(default)]
    pub count_in_service: bool,
}

impl PolicyEntry {
    pub fn options(&self) -> PolicyOptions {
        PolicyOptions {
            pod: self.pod,
            count_in_service: self.count_in_service,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum HorizonSpec {
    Arrivals(u64),
    Time(f64),
}

impl From<HorizonSpec> for Horizon {
    fn from(h: HorizonSpec) -> Self {
        match h {
            HorizonSpec::Arrivals(n) => Horizon::Arrivals(n),
            HorizonSpec::Time(t) => Horizon::Time(t),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_loads")]
    pub loads: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: HorizonSpec,
    #[serde(default = "default_warmup")]
    pub warmup: f64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub check_invariants: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            loads: default_loads(),
            replications: default_replications(),
            base_seed: 0,
            horizon: default_horizon(),
            warmup: default_warmup(),
            workers: None,
            check_invariants: false,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn default_service() -> ServiceFamily {
    ServiceFamily::Exponential
}
fn default_replication() -> usize {
    3
}
fn default_popularity() -> Popularity {
    Popularity::Uniform
}
fn default_policies() -> Vec<PolicyEntry> {
    PolicyKind::ALL
        .into_iter()
        .map(|name| PolicyEntry {
            name,
            pod: None,
            count_in_service: false,
        })
        .collect()
}
pub fn default_loads() -> Vec<f64> {
    vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99]
}
fn default_replications() -> usize {
    5
}
fn default_horizon() -> HorizonSpec {
    HorizonSpec::Arrivals(50_000)
}
fn default_warmup() -> f64 {
    0.2
}

/// Where the rate vector of each load comes from.
#[derive(Clone, Debug)]
pub enum RateSource {
    /// A shape scaled so that load `rho` sits at `rho` times its margin.
    Shape(RateVector),
    /// Rates used as `rho * rates`.
    Absolute(RateVector),
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a file, or a bundled config given as `preset:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("preset:")) {
            return Self::from_toml(preset(name)?);
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.topology()?;
        self.rates.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.time_mode() == TimeMode::Slotted {
            self.rates
                .validate_probabilities()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let ServiceFamily::LogNormal { cv } = self.service {
            if !(cv > 0.0 && cv.is_finite()) {
                return bad(format!("lognormal cv must be positive, got {cv}"));
            }
        }
        match (&self.pool, &self.workload) {
            (Some(_), Some(_)) => return bad("give either [pool] or [workload], not both".into()),
            (None, None) => return bad("missing [pool] or [workload]".into()),
            (_, Some(w)) if w.types.len() != w.rates.len() => {
                return bad("[workload] needs one rate per type".into());
            }
            _ => {}
        }
        let r = self.cluster.replication;
        if r == 0 || r > self.cluster.servers {
            return bad(format!("replication {r} must lie in 1..={}", self.cluster.servers));
        }
        if self.policies.is_empty() {
            return bad("no policies".into());
        }
        for (i, p) in self.policies.iter().enumerate() {
            if self.policies[..i].iter().any(|q| q.name == p.name) {
                return bad(format!("policy {} listed twice", p.name));
            }
        }
        if let Some(rho) = self.run.loads.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return bad(format!("load {rho} must lie in (0, 1)"));
        }
        if self.run.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        match self.run.horizon {
            HorizonSpec::Arrivals(0) => return bad("arrival horizon must be positive".into()),
            HorizonSpec::Time(t) if !(t > 0.0 && t.is_finite()) => {
                return bad("time horizon must be positive".into());
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.run.warmup) {
            return bad("warmup must lie in [0, 1)".into());
        }
        if self.run.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::new(self.cluster.servers, self.cluster.racks).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn time_mode(&self) -> TimeMode {
        match self.service {
            ServiceFamily::Geometric => TimeMode::Slotted,
            _ => TimeMode::Continuous,
        }
    }

    /// Samples the pool or builds the explicit rate vector.
    pub fn rate_source(&self) -> Result<RateSource> {
        let topo = self.topology()?;
        if let Some(p) = &self.pool {
            let pool = sample_type_pool(&topo, p.size, self.cluster.replication, p.popularity, p.scope, p.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(RateSource::Shape(pool.shape()));
        }
        let w = self.workload.as_ref().expect("validated");
        let mut entries = Vec::with_capacity(w.types.len());
        for (locals, &rate) in w.types.iter().zip(&w.rates) {
            let t = TaskType::on(&topo, locals.iter().copied()).map_err(|e| CliError::Config(e.to_string()))?;
            entries.push((t, rate));
        }
        let v = RateVector::new(entries).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(if w.absolute {
            RateSource::Absolute(v)
        } else {
            RateSource::Shape(v)
        })
    }

    /// `override_dir`, else `output_dir`, else `podsim-out/<name>`.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match (override_dir, &self.output_dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => d.clone(),
            (None, None) => Path::new("podsim-out").join(&self.name),
        }
    }
}

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset `{name}`; known: {}", names.join(", ")))
        })
}
