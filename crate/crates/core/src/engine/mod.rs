//! Event-driven simulation of one policy on one workload.
//!
//! Events sit in a binary heap keyed by `(time, kind, sequence)` with
//! arrivals ordered before completions at equal times. Only the next arrival
//! is pending at any moment.
//!
//! In continuous time an arrival is routed and, if its target server is
//! idle, that server schedules at once. Policies that let a server take work
//! from other queues also offer the new work to every other idle server, in
//! ascending id order. A completion frees its server, which schedules next.
//!
//! In slotted time all events of slot `t` are handled in a fixed micro-order:
//! every arrival is routed, then every completion is recorded, then idle
//! servers schedule in ascending id order. Slots without events are skipped.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::cluster::{LocalityClass, RateProfile, RateVector, Topology, TypeTable};
use crate::error::{Error, Result};
use crate::policies::{self, Ctx, DecisionCost, Policy, PolicyKind, PolicyOptions};
use crate::workload::{stream_rng, ArrivalProcess, ServiceFamily, ServiceModel, Stream, Task, TimeMode};

mod stats;

pub use stats::{
    locality_mix, mean_completion_time, queue_stability_stat, CompletionTime, LocalityMix, StabilityStat, MIN_BATCHES,
};

/// When a run stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Stop at this time.
    Time(f64),
    /// Stop at the time of this many arrivals.
    Arrivals(u64),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub topology: Topology,
    pub rates: RateProfile,
    pub service: ServiceFamily,
    pub mode: TimeMode,
    /// Arrival rate per task type, per unit time (per slot when slotted).
    pub workload: RateVector,
    pub policy: PolicyKind,
    pub options: PolicyOptions,
    pub horizon: Horizon,
    /// Fraction of the run, from time 0, whose completions are discarded.
    pub warmup: f64,
    pub seed: u64,
    /// Audit queues and flow conservation after every event.
    pub check_invariants: bool,
}

impl SimConfig {
    /// Continuous time, exponential service, default rates, 50,000 arrivals,
    /// 20% warmup, seed 0.
    pub fn new(topology: Topology, workload: RateVector, policy: PolicyKind) -> Self {
        Self {
            topology,
            rates: RateProfile::default(),
            service: ServiceFamily::Exponential,
            mode: TimeMode::Continuous,
            workload,
            policy,
            options: PolicyOptions::default(),
            horizon: Horizon::Arrivals(50_000),
            warmup: 0.2,
            seed: 0,
            check_invariants: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        match self.horizon {
            Horizon::Time(t) if !(t > 0.0 && t.is_finite()) => return bad("time horizon must be positive"),
            Horizon::Arrivals(0) => return bad("arrival horizon must be positive"),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup fraction must lie in [0, 1)");
        }
        if (self.mode == TimeMode::Slotted) != (self.service == ServiceFamily::Geometric) {
            return bad("slotted time requires geometric service and vice versa");
        }
        self.rates.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.workload
            .validate(&self.topology)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.workload.is_empty() {
            return bad("workload has no task types");
        }
        Ok(())
    }
}

/// One completed task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskRecord {
    pub id: u64,
    /// Index into the workload's types.
    pub kind: u32,
    pub arrival: f64,
    pub start: f64,
    pub completion: f64,
    pub server: usize,
    pub class: LocalityClass,
}

impl TaskRecord {
    pub fn sojourn(&self) -> f64 {
        self.completion - self.arrival
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    /// Completions at or after `warmup_end`, in completion order.
    pub records: Vec<TaskRecord>,
    pub cost: DecisionCost,
    /// Time-averaged number of waiting tasks per server over `[0, end_time]`.
    pub mean_queue_lengths: Vec<f64>,
    pub arrived: u64,
    pub completed: u64,
    pub in_system: u64,
    pub end_time: f64,
    pub warmup_end: f64,
    /// `(t, n)`: from time `t` on, `n` tasks are in the system.
    pub occupancy: Vec<(f64, u32)>,
}

pub fn run(config: &SimConfig) -> Result<SimResult> {
    Engine::new(config, None)?.run()
}

/// Like [`run`], writing one tab-separated line per event to `log`:
/// time, kind (`A` arrival, `S` start, `C` completion), task id, task type,
/// server (`-` if none) and the queue state after the event.
pub fn run_with_log(config: &SimConfig, log: &mut dyn Write) -> Result<SimResult> {
    Engine::new(config, Some(log))?.run()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Arrival,
    Completion,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
    task: Task,
    server: usize,
}

impl Event {
    fn key(&self) -> (f64, EventKind, u64) {
        (self.time, self.kind, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2))
    }
}

struct InService {
    task: Task,
    start: f64,
    class: LocalityClass,
}

struct Engine<'a> {
    config: &'a SimConfig,
    table: TypeTable,
    policy: Box<dyn Policy>,
    service: ServiceModel,
    arrivals: ArrivalProcess,
    service_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    cost: DecisionCost,
    heap: BinaryHeap<Event>,
    seq: u64,
    now: f64,
    busy: Vec<bool>,
    idle: BTreeSet<usize>,
    serving: Vec<Option<InService>>,
    records: Vec<TaskRecord>,
    arrived: u64,
    completed: u64,
    occupancy: Vec<(f64, u32)>,
    queue_len: Vec<usize>,
    queue_area: Vec<f64>,
    queue_since: Vec<f64>,
    log: Option<&'a mut dyn Write>,
    line: String,
}

macro_rules! ctx {
    ($e:ident) => {
        Ctx {
            table: &$e.table,
            rates: &$e.config.rates,
            busy: &$e.busy,
            rng: &mut $e.policy_rng,
            cost: &mut $e.cost,
        }
    };
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig, log: Option<&'a mut dyn Write>) -> Result<Self> {
        config.validate()?;
        let m = config.topology.servers();
        let table = TypeTable::new(config.topology, config.workload.types().cloned().collect())?;
        let policy = policies::build(config.policy, config.options, &table)?;
        let service = ServiceModel::new(config.service, config.rates, config.mode)?;
        let rates: Vec<f64> = config.workload.rates().collect();
        let arrivals = ArrivalProcess::new(config.mode, &rates, config.seed)?;
        Ok(Self {
            config,
            table,
            policy,
            service,
            arrivals,
            service_rng: stream_rng(config.seed, Stream::Service),
            policy_rng: stream_rng(config.seed, Stream::Policy),
            cost: DecisionCost::default(),
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            busy: vec![false; m],
            idle: (1..=m).collect(),
            serving: (0..m).map(|_| None).collect(),
            records: Vec::new(),
            arrived: 0,
            completed: 0,
            occupancy: Vec::new(),
            queue_len: vec![0; m],
            queue_area: vec![0.0; m],
            queue_since: vec![0.0; m],
            log,
            line: String::new(),
        })
    }

    fn push(&mut self, time: f64, kind: EventKind, task: Task, server: usize) {
        self.heap.push(Event {
            time,
            kind,
            seq: self.seq,
            task,
            server,
        });
        self.seq += 1;
    }

    fn push_next_arrival(&mut self) {
        if let Horizon::Arrivals(n) = self.config.horizon {
            if self.arrived >= n {
                return;
            }
        }
        if let Some(task) = self.arrivals.next_task() {
            self.push(task.arrival, EventKind::Arrival, task, 0);
        }
    }

    fn run(mut self) -> Result<SimResult> {
        self.push_next_arrival();
        let end = match self.config.mode {
            TimeMode::Continuous => self.run_continuous()?,
            TimeMode::Slotted => self.run_slotted()?,
        };
        self.finish(end)
    }

    fn past_horizon(&self, t: f64) -> bool {
        matches!(self.config.horizon, Horizon::Time(h) if t > h)
    }

    fn horizon_end(&self) -> f64 {
        match self.config.horizon {
            Horizon::Time(h) => h,
            Horizon::Arrivals(_) => self.now,
        }
    }

    fn arrivals_done(&self) -> bool {
        matches!(self.config.horizon, Horizon::Arrivals(n) if self.arrived >= n)
    }

    fn run_continuous(&mut self) -> Result<f64> {
        while let Some(ev) = self.heap.peek().copied() {
            if self.past_horizon(ev.time) {
                break;
            }
            self.heap.pop();
            self.advance(ev.time)?;
            match ev.kind {
                EventKind::Arrival => {
                    let target = self.arrive(ev.task)?;
                    if let Some(m) = target.filter(|&m| !self.busy[m - 1]) {
                        self.try_start(m)?;
                    }
                    if self.policy.pulls_from_others() {
                        self.offer_idle()?;
                    }
                    self.push_next_arrival();
                }
                EventKind::Completion => {
                    self.complete(ev.server, ev.task)?;
                    self.try_start(ev.server)?;
                }
            }
            self.audit()?;
            if self.arrivals_done() && ev.kind == EventKind::Arrival {
                break;
            }
        }
        Ok(self.horizon_end())
    }

    fn run_slotted(&mut self) -> Result<f64> {
        while let Some(first) = self.heap.peek().copied() {
            let slot = first.time;
            if self.past_horizon(slot) {
                break;
            }
            self.advance(slot)?;
            while let Some(ev) = self.heap.peek().copied() {
                if ev.time != slot {
                    break;
                }
                self.heap.pop();
                match ev.kind {
                    EventKind::Arrival => {
                        self.arrive(ev.task)?;
                        self.push_next_arrival();
                    }
                    EventKind::Completion => self.complete(ev.server, ev.task)?,
                }
            }
            let candidates: Vec<usize> = self.idle.iter().copied().collect();
            for m in candidates {
                if self.policy.queued() == 0 {
                    break;
                }
                if self.policy.pulls_from_others() || self.policy.queued_at(m) > 0 {
                    self.try_start(m)?;
                }
            }
            self.audit()?;
            if self.arrivals_done() {
                break;
            }
        }
        Ok(self.horizon_end())
    }

    fn advance(&mut self, t: f64) -> Result<()> {
        if t < self.now {
            return Err(self.violation(format!("event at {t} before clock {}", self.now)));
        }
        self.now = t;
        Ok(())
    }

    fn in_system(&self) -> u64 {
        self.arrived - self.completed
    }

    fn note_occupancy(&mut self) {
        self.occupancy.push((self.now, self.in_system() as u32));
    }

    fn touch_queue(&mut self, server: usize) {
        let i = server - 1;
        self.queue_area[i] += self.queue_len[i] as f64 * (self.now - self.queue_since[i]);
        self.queue_since[i] = self.now;
        self.queue_len[i] = self.policy.queued_at(server);
    }

    fn arrive(&mut self, task: Task) -> Result<Option<usize>> {
        self.arrived += 1;
        self.note_occupancy();
        let target = self.policy.route(task, &mut ctx!(self));
        if let Some(m) = target {
            if m == 0 || m > self.busy.len() {
                return Err(self.violation(format!("task {} routed to unknown server {m}", task.id)));
            }
            self.touch_queue(m);
        }
        self.log_line('A', &task, target)?;
        Ok(target)
    }

    /// Gives each idle server, lowest id first, one chance at queued work.
    fn offer_idle(&mut self) -> Result<()> {
        let mut next = 1;
        while self.policy.queued() > 0 {
            let Some(&m) = self.idle.range(next..).next() else {
                break;
            };
            self.try_start(m)?;
            next = m + 1;
        }
        Ok(())
    }

    fn try_start(&mut self, server: usize) -> Result<()> {
        debug_assert!(!self.busy[server - 1]);
        let Some(pick) = self.policy.schedule(server, &mut ctx!(self)) else {
            return Ok(());
        };
        let task = pick.task;
        if let Some(from) = pick.from {
            self.touch_queue(from);
        }
        let class = self.table.locality(task.kind, server);
        if self.config.check_invariants {
            if let Err(msg) = self.policy.audit_start(server, class) {
                return Err(self.violation(msg));
            }
        }
        let duration = self.service.sample(class, &mut self.service_rng);
        self.busy[server - 1] = true;
        self.idle.remove(&server);
        self.serving[server - 1] = Some(InService {
            task,
            start: self.now,
            class,
        });
        self.push(self.now + duration, EventKind::Completion, task, server);
        self.log_line('S', &task, Some(server))
    }

    fn complete(&mut self, server: usize, task: Task) -> Result<()> {
        let Some(s) = self.serving[server - 1].take() else {
            return Err(self.violation(format!("completion on idle server {server}")));
        };
        if s.task.id != task.id || s.start > self.now {
            return Err(self.violation(format!("completion of task {} out of order", task.id)));
        }
        self.records.push(TaskRecord {
            id: task.id,
            kind: task.kind,
            arrival: task.arrival,
            start: s.start,
            completion: self.now,
            server,
            class: s.class,
        });
        self.completed += 1;
        self.note_occupancy();
        self.busy[server - 1] = false;
        self.idle.insert(server);
        self.log_line('C', &task, Some(server))
    }

    fn violation(&self, message: String) -> Error {
        Error::Invariant {
            time: self.now,
            message,
        }
    }

    fn audit(&mut self) -> Result<()> {
        if !self.config.check_invariants {
            return Ok(());
        }
        let in_service = self.busy.iter().filter(|&&b| b).count() as u64;
        let queued = self.policy.queued() as u64;
        if self.arrived != self.completed + queued + in_service {
            return Err(self.violation(format!(
                "flow: arrived {} != completed {} + queued {queued} + in service {in_service}",
                self.arrived, self.completed
            )));
        }
        if let Err(msg) = self.policy.audit(&ctx!(self)) {
            return Err(self.violation(msg));
        }
        Ok(())
    }

    fn log_line(&mut self, kind: char, task: &Task, server: Option<usize>) -> Result<()> {
        use std::fmt::Write as _;
        let Some(log) = self.log.as_mut() else {
            return Ok(());
        };
        self.line.clear();
        let _ = write!(
            self.line,
            "{}\t{kind}\t{}\t{}\t",
            self.now,
            task.id,
            self.table.get(task.kind)
        );
        match server {
            Some(m) => {
                let _ = write!(self.line, "{m}\t");
            }
            None => self.line.push_str("-\t"),
        }
        self.policy.describe_queues(&mut self.line);
        self.line.push('\n');
        log.write_all(self.line.as_bytes())?;
        Ok(())
    }

    fn finish(mut self, end: f64) -> Result<SimResult> {
        self.now = end.max(self.now);
        let end = self.now;
        for m in 1..=self.busy.len() {
            self.touch_queue(m);
        }
        let mean_queue_lengths = self
            .queue_area
            .iter()
            .map(|a| if end > 0.0 { a / end } else { 0.0 })
            .collect();
        let warmup_end = self.config.warmup * end;
        let mut records = self.records;
        records.retain(|r| r.completion >= warmup_end);
        if let Some(log) = self.log.as_mut() {
            log.flush()?;
        }
        Ok(SimResult {
            records,
            cost: self.cost,
            mean_queue_lengths,
            arrived: self.arrived,
            completed: self.completed,
            in_system: self.arrived - self.completed,
            end_time: end,
            warmup_end,
            occupancy: self.occupancy,
        })
    }
}
