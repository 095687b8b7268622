//! Routing and scheduling policies.
//!
//! Every policy splits into a *routing* rule, applied when a task arrives,
//! and a *scheduling* rule, applied when a server is idle. The pure decision
//! functions ([`pandas_route`], [`jsqmw_schedule`], ...) work on state
//! snapshots; the [`Policy`] implementations own the queues and call them.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{LocalityClass, RateProfile, TypeTable};
use crate::error::{invalid, Error, Result};
use crate::workload::Task;

mod fcfs;
mod jsq;
mod pandas;
mod sampling;

pub use fcfs::Fcfs;
pub use jsq::{jsqmw_route, jsqmw_schedule, jsqmw_schedule_among, JsqMaxWeight, JsqPriority, JsqScheduling};
pub use pandas::{pandas_route, pandas_route_among, pandas_schedule, BalancedPandas, PandasQueues};
pub use sampling::{jsqmw_pod_candidates, pandas_pod_candidates};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fcfs,
    JsqPriority,
    JsqMw,
    JsqMwPod,
    Bp,
    BpPod,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        Self::Fcfs,
        Self::JsqPriority,
        Self::JsqMw,
        Self::JsqMwPod,
        Self::Bp,
        Self::BpPod,
    ];

    /// Stable name used in configs and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Self::Fcfs => "fcfs",
            Self::JsqPriority => "jsq_priority",
            Self::JsqMw => "jsq_mw",
            Self::JsqMwPod => "jsq_mw_pod",
            Self::Bp => "bp",
            Self::BpPod => "bp_pod",
        }
    }

    /// FCFS and JSQ-Priority are baselines whose rules are defined here,
    /// not taken from the literature.
    pub fn is_local_baseline(self) -> bool {
        matches!(self, Self::Fcfs | Self::JsqPriority)
    }

    pub fn uses_pod(self) -> bool {
        matches!(self, Self::JsqMwPod | Self::BpPod)
    }

    /// Default sample counts: (2, 6) for BP-Pod, (6, 6) for JSQ-MW-Pod.
    pub fn default_pod(self) -> Option<PodConfig> {
        match self {
            Self::BpPod => Some(PodConfig::stratified(2, 6)),
            Self::JsqMwPod => Some(PodConfig::stratified(6, 6)),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown policy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// `n_rack` servers from the rack-local set and `n_remote` from the
    /// remote set (for JSQ-MW-Pod: same rack / other racks).
    #[default]
    Stratified,
    /// `n_rack + n_remote` servers uniformly from all non-local servers.
    Uniform,
}

/// Sample sizes of the power-of-d variants. Sampling is without replacement
/// and a stratum smaller than its request is included whole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodConfig {
    pub n_rack: usize,
    pub n_remote: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

impl PodConfig {
    pub fn stratified(n_rack: usize, n_remote: usize) -> Self {
        Self {
            n_rack,
            n_remote,
            sampling: Sampling::Stratified,
        }
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            n_rack: d,
            n_remote: 0,
            sampling: Sampling::Uniform,
        }
    }

    /// `d` (BP-Pod) or `d'` (JSQ-MW-Pod).
    pub fn d(&self) -> usize {
        self.n_rack + self.n_remote
    }
}

/// Servers examined by routing and scheduling decisions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCost {
    pub route_decisions: u64,
    pub route_examined: u64,
    pub sched_decisions: u64,
    pub sched_examined: u64,
}

impl DecisionCost {
    pub fn route(&mut self, examined: usize) {
        self.route_decisions += 1;
        self.route_examined += examined as u64;
    }

    pub fn schedule(&mut self, examined: usize) {
        self.sched_decisions += 1;
        self.sched_examined += examined as u64;
    }

    pub fn route_per_decision(&self) -> f64 {
        ratio(self.route_examined, self.route_decisions)
    }

    pub fn sched_per_decision(&self) -> f64 {
        ratio(self.sched_examined, self.sched_decisions)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// What a policy may see and touch while deciding.
pub struct Ctx<'a> {
    pub table: &'a TypeTable,
    pub rates: &'a RateProfile,
    /// Busy flag per server, indexed by `server - 1`.
    pub busy: &'a [bool],
    pub rng: &'a mut ChaCha8Rng,
    pub cost: &'a mut DecisionCost,
}

/// A scheduling decision: the task and the per-server queue it left
/// (`None` for a global queue).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pick {
    pub task: Task,
    pub from: Option<usize>,
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// Stores an arriving task and returns the server that should get the
    /// first scheduling opportunity, if any.
    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> Option<usize>;

    /// Picks the task idle `server` starts next.
    fn schedule(&mut self, server: usize, ctx: &mut Ctx<'_>) -> Option<Pick>;

    /// Whether an idle server may take work queued at other servers, in
    /// which case the engine offers new work to every idle server.
    fn pulls_from_others(&self) -> bool;

    /// Tasks waiting (not in service).
    fn queued(&self) -> usize;

    /// Waiting tasks attributed to `server` (0 for a global queue).
    fn queued_at(&self, server: usize) -> usize;

    /// Compact queue dump for event logs.
    fn describe_queues(&self, out: &mut String);

    /// Checks structural invariants against the current cluster state.
    fn audit(&self, ctx: &Ctx<'_>) -> std::result::Result<(), String>;

    /// Checks a just-made scheduling decision.
    fn audit_start(&self, _server: usize, _class: LocalityClass) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Options beyond the policy name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PolicyOptions {
    /// Sample sizes for the Pod variants; the policy default when `None`.
    pub pod: Option<PodConfig>,
    /// Balanced-Pandas family: count the task in service in `W`.
    pub count_in_service: bool,
}

/// Builds a policy. Options that do not apply to `kind` are ignored.
pub fn build(kind: PolicyKind, options: PolicyOptions, table: &TypeTable) -> Result<Box<dyn Policy>> {
    let PolicyOptions { pod, count_in_service } = options;
    let servers = table.topology().servers();
    let pod = || {
        pod.or(kind.default_pod())
            .ok_or_else(|| Error::InvalidConfig(format!("{kind} needs a pod config")))
    };
    Ok(match kind {
        PolicyKind::Fcfs => Box::new(Fcfs::new(servers)),
        PolicyKind::JsqPriority => Box::new(JsqPriority::new(servers)),
        PolicyKind::JsqMw => Box::new(JsqMaxWeight::new(servers, JsqScheduling::Full)),
        PolicyKind::JsqMwPod => Box::new(JsqMaxWeight::new(servers, JsqScheduling::Pod(pod()?))),
        PolicyKind::Bp => Box::new(BalancedPandas::new(servers, None).counting_in_service(count_in_service)),
        PolicyKind::BpPod => Box::new(BalancedPandas::new(servers, Some(pod()?)).counting_in_service(count_in_service)),
    })
}
