//! Single-queue-per-server policies: JSQ-MaxWeight, its Pod variant and the
//! JSQ-Priority baseline.
//!
//! All three route an arrival to the shortest queue among its local
//! servers. They differ in what an idle server `m` does:
//!
//! * JSQ-MaxWeight serves the head of the queue `n` maximizing
//!   `α|Q_n|` (n = m), `β|Q_n|` (same rack) or `γ|Q_n|` (other rack);
//! * JSQ-MaxWeight-Pod takes that argmax over `m` and a sample of servers;
//! * JSQ-Priority only ever serves its own queue.
//!
//! A task taken from another server's queue is served at the rate of its
//! true locality class with respect to `m`.

use std::collections::VecDeque;

use super::sampling::jsqmw_pod_candidates;
use super::{Ctx, Pick, PodConfig, Policy, PolicyKind};
use crate::cluster::{RateProfile, Topology, TypeTable};
use crate::workload::Task;

/// Shortest local queue; ties to the lowest id. `queue_lens[m - 1] = |Q_m|`.
pub fn jsqmw_route(table: &TypeTable, kind: u32, queue_lens: &[usize]) -> usize {
    let mut best = (usize::MAX, 0);
    for &m in table.locals(kind) {
        if queue_lens[m - 1] < best.0 {
            best = (queue_lens[m - 1], m);
        }
    }
    best.1
}

/// Max-weight source queue for idle `server` over `candidates` (ascending).
/// `None` when every candidate weight is zero.
pub fn jsqmw_schedule_among(
    server: usize,
    candidates: impl IntoIterator<Item = usize>,
    queue_lens: &[usize],
    topology: &Topology,
    rates: &RateProfile,
) -> Option<usize> {
    let rack = topology.rack_of_unchecked(server);
    let mut best = (0.0, None);
    for n in candidates {
        let len = queue_lens[n - 1];
        if len == 0 {
            continue;
        }
        let rate = if n == server {
            rates.alpha
        } else if topology.rack_of_unchecked(n) == rack {
            rates.beta
        } else {
            rates.gamma
        };
        let weight = rate * len as f64;
        if weight > best.0 {
            best = (weight, Some(n));
        }
    }
    best.1
}

/// JSQ-MaxWeight scheduling over all servers.
pub fn jsqmw_schedule(server: usize, queue_lens: &[usize], topology: &Topology, rates: &RateProfile) -> Option<usize> {
    jsqmw_schedule_among(server, 1..=topology.servers(), queue_lens, topology, rates)
}

#[derive(Clone, Debug, Default)]
struct Queues {
    queues: Vec<VecDeque<Task>>,
    lens: Vec<usize>,
    queued: usize,
}

impl Queues {
    fn new(servers: usize) -> Self {
        Self {
            queues: vec![VecDeque::new(); servers],
            lens: vec![0; servers],
            queued: 0,
        }
    }

    fn push(&mut self, server: usize, task: Task) {
        self.queues[server - 1].push_back(task);
        self.lens[server - 1] += 1;
        self.queued += 1;
    }

    fn pop(&mut self, server: usize) -> Option<Pick> {
        let task = self.queues[server - 1].pop_front()?;
        self.lens[server - 1] -= 1;
        self.queued -= 1;
        Some(Pick {
            task,
            from: Some(server),
        })
    }

    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> usize {
        ctx.cost.route(ctx.table.locals(task.kind).len());
        let m = jsqmw_route(ctx.table, task.kind, &self.lens);
        self.push(m, task);
        m
    }

    fn describe(&self, out: &mut String) {
        use std::fmt::Write;
        for (i, l) in self.lens.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{l}");
        }
    }

    fn audit_routing(&self, table: &TypeTable) -> Result<(), String> {
        for (i, q) in self.queues.iter().enumerate() {
            if let Some(t) = q.iter().find(|t| !table.locals(t.kind).contains(&(i + 1))) {
                return Err(format!("task {} queued at non-local server {}", t.id, i + 1));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JsqScheduling {
    Full,
    Pod(PodConfig),
}

/// JSQ-MaxWeight (`Full`) or JSQ-MaxWeight-Pod (`Pod`).
pub struct JsqMaxWeight {
    queues: Queues,
    scheduling: JsqScheduling,
}

impl JsqMaxWeight {
    pub fn new(servers: usize, scheduling: JsqScheduling) -> Self {
        Self {
            queues: Queues::new(servers),
            scheduling,
        }
    }

    pub fn queue_lens(&self) -> &[usize] {
        &self.queues.lens
    }
}

impl Policy for JsqMaxWeight {
    fn kind(&self) -> PolicyKind {
        match self.scheduling {
            JsqScheduling::Full => PolicyKind::JsqMw,
            JsqScheduling::Pod(_) => PolicyKind::JsqMwPod,
        }
    }

    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> Option<usize> {
        Some(self.queues.route(task, ctx))
    }

    fn schedule(&mut self, server: usize, ctx: &mut Ctx<'_>) -> Option<Pick> {
        let topo = ctx.table.topology();
        let source = match &self.scheduling {
            JsqScheduling::Full => {
                ctx.cost.schedule(topo.servers());
                jsqmw_schedule(server, &self.queues.lens, topo, ctx.rates)
            }
            JsqScheduling::Pod(pod) => {
                let candidates = jsqmw_pod_candidates(topo, server, pod, ctx.rng);
                ctx.cost.schedule(candidates.len());
                jsqmw_schedule_among(server, candidates, &self.queues.lens, topo, ctx.rates)
            }
        }?;
        self.queues.pop(source)
    }

    fn pulls_from_others(&self) -> bool {
        true
    }

    fn queued(&self) -> usize {
        self.queues.queued
    }

    fn queued_at(&self, server: usize) -> usize {
        self.queues.lens[server - 1]
    }

    fn describe_queues(&self, out: &mut String) {
        self.queues.describe(out);
    }

    fn audit(&self, ctx: &Ctx<'_>) -> Result<(), String> {
        self.queues.audit_routing(ctx.table)?;
        if self.scheduling == JsqScheduling::Full && self.queues.queued > 0 {
            if let Some(i) = ctx.busy.iter().position(|b| !b) {
                return Err(format!("server {} idle while {} tasks wait", i + 1, self.queues.queued));
            }
        }
        Ok(())
    }
}

/// Join-the-shortest-local-queue routing with no work stealing.
pub struct JsqPriority {
    queues: Queues,
}

impl JsqPriority {
    pub fn new(servers: usize) -> Self {
        Self {
            queues: Queues::new(servers),
        }
    }
}

impl Policy for JsqPriority {
    fn kind(&self) -> PolicyKind {
        PolicyKind::JsqPriority
    }

    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> Option<usize> {
        Some(self.queues.route(task, ctx))
    }

    fn schedule(&mut self, server: usize, ctx: &mut Ctx<'_>) -> Option<Pick> {
        ctx.cost.schedule(1);
        self.queues.pop(server)
    }

    fn pulls_from_others(&self) -> bool {
        false
    }

    fn queued(&self) -> usize {
        self.queues.queued
    }

    fn queued_at(&self, server: usize) -> usize {
        self.queues.lens[server - 1]
    }

    fn describe_queues(&self, out: &mut String) {
        self.queues.describe(out);
    }

    fn audit(&self, ctx: &Ctx<'_>) -> Result<(), String> {
        self.queues.audit_routing(ctx.table)?;
        for (i, &len) in self.queues.lens.iter().enumerate() {
            if len > 0 && !ctx.busy[i] {
                return Err(format!("server {} idle with {len} queued tasks", i + 1));
            }
        }
        Ok(())
    }
}
