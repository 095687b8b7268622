//! Balanced-Pandas and Balanced-Pandas-Pod.
//!
//! Each server keeps three FIFO sub-queues holding the tasks that are local,
//! rack-local and remote to it. Its workload is
//! `W = |Q1|/α + |Q2|/β + |Q3|/γ` over queued tasks only. An opt-in variant
//! also counts the mean service time of the task in service. An arrival joins the server minimizing `W / rate`, where
//! `rate` is the service rate the task would get there. An idle server
//! serves Q1 before Q2 before Q3.

use std::collections::VecDeque;

use super::sampling::pandas_pod_candidates;
use super::{Ctx, Pick, PodConfig, Policy, PolicyKind};
use crate::cluster::{LocalityClass, RateProfile, TypeTable};
use crate::workload::Task;

/// The three sub-queues of one server.
#[derive(Clone, Debug, Default)]
pub struct PandasQueues {
    queues: [VecDeque<Task>; 3],
}

impl PandasQueues {
    pub fn push(&mut self, class: LocalityClass, task: Task) {
        self.queues[class.index()].push_back(task);
    }

    pub fn len(&self, class: LocalityClass) -> usize {
        self.queues[class.index()].len()
    }

    pub fn total(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    #[inline]
    pub fn workload(&self, rates: &RateProfile) -> f64 {
        self.queues[0].len() as f64 / rates.alpha
            + self.queues[1].len() as f64 / rates.beta
            + self.queues[2].len() as f64 / rates.gamma
    }

    pub fn iter(&self, class: LocalityClass) -> impl Iterator<Item = &Task> {
        self.queues[class.index()].iter()
    }
}

/// Strict-priority pick for an idle server: head of Q1, else Q2, else Q3.
pub fn pandas_schedule(queues: &mut PandasQueues) -> Option<(Task, LocalityClass)> {
    LocalityClass::ALL
        .into_iter()
        .find_map(|c| queues.queues[c.index()].pop_front().map(|t| (t, c)))
}

/// Min weighted workload over `candidates` (ascending server ids).
///
/// `workloads[m - 1]` is `W_m`. Ties go to the better locality class, then
/// to the lowest server id.
pub fn pandas_route_among(
    table: &TypeTable,
    kind: u32,
    candidates: impl IntoIterator<Item = usize>,
    workloads: &[f64],
    rates: &RateProfile,
) -> (usize, LocalityClass) {
    let mut best: Option<(f64, LocalityClass, usize)> = None;
    for m in candidates {
        let class = table.locality(kind, m);
        let value = workloads[m - 1] / rates.rate(class);
        let better = match best {
            None => true,
            Some((v, c, _)) => value < v || (value == v && class < c),
        };
        if better {
            best = Some((value, class, m));
        }
    }
    let (_, class, m) = best.expect("at least one candidate");
    (m, class)
}

/// Balanced-Pandas routing over every server.
pub fn pandas_route(table: &TypeTable, kind: u32, workloads: &[f64], rates: &RateProfile) -> (usize, LocalityClass) {
    pandas_route_among(table, kind, 1..=table.topology().servers(), workloads, rates)
}

/// Balanced-Pandas, or Balanced-Pandas-Pod when built with a [`PodConfig`].
pub struct BalancedPandas {
    servers: Vec<PandasQueues>,
    pod: Option<PodConfig>,
    queued: usize,
    scratch: Vec<f64>,
    /// Mean service time of the task each server last started, when the
    /// in-service variant is on.
    in_service: Option<Vec<f64>>,
}

impl BalancedPandas {
    pub fn new(servers: usize, pod: Option<PodConfig>) -> Self {
        Self {
            servers: vec![PandasQueues::default(); servers],
            pod,
            queued: 0,
            scratch: vec![0.0; servers],
            in_service: None,
        }
    }

    /// Adds the mean service time of the task in service to `W`.
    pub fn counting_in_service(mut self, on: bool) -> Self {
        self.in_service = on.then(|| vec![0.0; self.servers.len()]);
        self
    }

    fn workload_at(&self, server: usize, ctx: &Ctx<'_>) -> f64 {
        let w = self.servers[server - 1].workload(ctx.rates);
        match &self.in_service {
            Some(s) if ctx.busy[server - 1] => w + s[server - 1],
            _ => w,
        }
    }

    pub fn queues(&self, server: usize) -> &PandasQueues {
        &self.servers[server - 1]
    }

    pub fn workloads(&self, rates: &RateProfile) -> Vec<f64> {
        self.servers.iter().map(|q| q.workload(rates)).collect()
    }
}

impl Policy for BalancedPandas {
    fn kind(&self) -> PolicyKind {
        if self.pod.is_some() {
            PolicyKind::BpPod
        } else {
            PolicyKind::Bp
        }
    }

    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> Option<usize> {
        let (server, class) = match &self.pod {
            None => {
                for m in 1..=self.servers.len() {
                    self.scratch[m - 1] = self.workload_at(m, ctx);
                }
                ctx.cost.route(self.servers.len());
                pandas_route(ctx.table, task.kind, &self.scratch, ctx.rates)
            }
            Some(pod) => {
                let candidates = pandas_pod_candidates(ctx.table, task.kind, pod, ctx.rng);
                for &m in &candidates {
                    self.scratch[m - 1] = self.workload_at(m, ctx);
                }
                ctx.cost.route(candidates.len());
                pandas_route_among(ctx.table, task.kind, candidates, &self.scratch, ctx.rates)
            }
        };
        self.servers[server - 1].push(class, task);
        self.queued += 1;
        Some(server)
    }

    fn schedule(&mut self, server: usize, ctx: &mut Ctx<'_>) -> Option<Pick> {
        ctx.cost.schedule(1);
        let (task, class) = pandas_schedule(&mut self.servers[server - 1])?;
        self.queued -= 1;
        if let Some(s) = &mut self.in_service {
            s[server - 1] = 1.0 / ctx.rates.rate(class);
        }
        Some(Pick {
            task,
            from: Some(server),
        })
    }

    fn pulls_from_others(&self) -> bool {
        false
    }

    fn queued(&self) -> usize {
        self.queued
    }

    fn queued_at(&self, server: usize) -> usize {
        self.servers[server - 1].total()
    }

    fn describe_queues(&self, out: &mut String) {
        use std::fmt::Write;
        for (i, q) in self.servers.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(
                out,
                "{}/{}/{}",
                q.len(LocalityClass::Local),
                q.len(LocalityClass::RackLocal),
                q.len(LocalityClass::Remote)
            );
        }
    }

    fn audit(&self, ctx: &Ctx<'_>) -> Result<(), String> {
        for (i, q) in self.servers.iter().enumerate() {
            let m = i + 1;
            for class in LocalityClass::ALL {
                if let Some(t) = q.iter(class).find(|t| ctx.table.locality(t.kind, m) != class) {
                    return Err(format!("task {} sits in the {class} queue of server {m}", t.id));
                }
            }
            if !ctx.busy[i] && !q.is_empty() {
                return Err(format!("server {m} idle with {} queued tasks", q.total()));
            }
        }
        Ok(())
    }

    fn audit_start(&self, server: usize, class: LocalityClass) -> Result<(), String> {
        let q = &self.servers[server - 1];
        let skipped = LocalityClass::ALL
            .into_iter()
            .take_while(|&c| c < class)
            .find(|&c| q.len(c) > 0);
        match skipped {
            Some(c) => Err(format!(
                "server {server} started a {class} task while its {c} queue is non-empty"
            )),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{TaskType, Topology};
    use crate::policies::DecisionCost;
    use crate::workload::{stream_rng, Stream};

    fn table(m: usize, k: usize, types: &[&[usize]]) -> TypeTable {
        let topo = Topology::new(m, k).unwrap();
        TypeTable::new(
            topo,
            types
                .iter()
                .map(|t| TaskType::new(t.iter().copied()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn task(id: u64, kind: u32) -> Task {
        Task {
            id,
            kind,
            arrival: id as f64,
        }
    }

    #[test]
    fn zero_workloads_pick_lowest_local() {
        let rates = RateProfile::default();
        let t = table(6, 2, &[&[1, 2, 3], &[2, 5, 6]]);
        assert_eq!(pandas_route(&t, 0, &[0.0; 6], &rates), (1, LocalityClass::Local));
        // Server 1 ties at zero but is rack-local; the local server wins.
        assert_eq!(pandas_route(&t, 1, &[0.0; 6], &rates), (2, LocalityClass::Local));
    }

    #[test]
    fn weighted_argmin_example() {
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let t = table(6, 2, &[&[1, 2, 3]]);
        let w = [8.0, 3.0, 5.0, 0.0, 10.0, 2.0];
        assert_eq!(pandas_route(&t, 0, &w, &rates), (4, LocalityClass::Remote));
    }

    #[test]
    fn equal_workloads_prefer_local() {
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let t = table(6, 2, &[&[1, 2, 4]]);
        assert_eq!(pandas_route(&t, 0, &[1.0; 6], &rates), (1, LocalityClass::Local));
    }

    #[test]
    fn strict_priority_schedule() {
        let mut q = PandasQueues::default();
        for i in 0..2 {
            q.push(LocalityClass::Local, task(i, 0));
        }
        for i in 2..7 {
            q.push(LocalityClass::RackLocal, task(i, 0));
        }
        for i in 7..16 {
            q.push(LocalityClass::Remote, task(i, 0));
        }
        assert_eq!(pandas_schedule(&mut q).unwrap(), (task(0, 0), LocalityClass::Local));

        let mut q = PandasQueues::default();
        q.push(LocalityClass::Remote, task(3, 0));
        assert_eq!(pandas_schedule(&mut q).unwrap().1, LocalityClass::Remote);
        assert!(pandas_schedule(&mut q).is_none());
    }

    #[test]
    fn workload_formula() {
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let mut q = PandasQueues::default();
        q.push(LocalityClass::Local, task(0, 0));
        q.push(LocalityClass::RackLocal, task(1, 0));
        q.push(LocalityClass::Remote, task(2, 0));
        assert_eq!(q.workload(&rates), 1.0 + 2.0 + 4.0);
    }

    fn route_with(policy: &mut BalancedPandas, t: &TypeTable, kind: u32, seed: u64) -> (usize, DecisionCost) {
        let rates = RateProfile::default();
        let busy = vec![true; t.topology().servers()];
        let mut rng = stream_rng(seed, Stream::Policy);
        let mut cost = DecisionCost::default();
        let mut ctx = Ctx {
            table: t,
            rates: &rates,
            busy: &busy,
            rng: &mut rng,
            cost: &mut cost,
        };
        let server = policy.route(task(0, kind), &mut ctx).unwrap();
        (server, cost)
    }

    #[test]
    fn pod_with_no_samples_stays_local() {
        let t = table(6, 2, &[&[1, 2, 4]]);
        let mut p = BalancedPandas::new(6, Some(PodConfig::stratified(0, 0)));
        for _ in 0..5 {
            let (server, cost) = route_with(&mut p, &t, 0, 1);
            assert!([1, 2, 4].contains(&server));
            assert_eq!(cost.route_examined, 3);
        }
    }

    #[test]
    fn route_costs() {
        let t = table(500, 10, &[&[7, 120, 480]]);
        let (_, cost) = route_with(&mut BalancedPandas::new(500, None), &t, 0, 1);
        assert_eq!(cost.route_examined, 500);
        let (_, cost) = route_with(
            &mut BalancedPandas::new(500, Some(PodConfig::stratified(2, 6))),
            &t,
            0,
            1,
        );
        assert_eq!(cost.route_examined, 11);
    }

    #[test]
    fn in_service_variant_sees_busy_servers() {
        let rates = RateProfile::default();
        let t = table(6, 2, &[&[1, 2, 3]]);
        let mut busy = vec![false; 6];
        let mut rng = stream_rng(0, Stream::Policy);
        let mut cost = DecisionCost::default();
        for counting in [false, true] {
            let mut p = BalancedPandas::new(6, None).counting_in_service(counting);
            busy.fill(false);
            let mut ctx = Ctx {
                table: &t,
                rates: &rates,
                busy: &busy,
                rng: &mut rng,
                cost: &mut cost,
            };
            assert_eq!(p.route(task(0, 0), &mut ctx), Some(1));
            p.schedule(1, &mut ctx).unwrap();
            busy[0] = true;
            let mut ctx = Ctx {
                table: &t,
                rates: &rates,
                busy: &busy,
                rng: &mut rng,
                cost: &mut cost,
            };
            let expected = if counting { 2 } else { 1 };
            assert_eq!(p.route(task(1, 0), &mut ctx), Some(expected));
        }
    }

    #[test]
    fn audit_catches_priority_inversion() {
        let mut p = BalancedPandas::new(3, None);
        p.servers[0].push(LocalityClass::Local, task(0, 0));
        assert!(p.audit_start(1, LocalityClass::RackLocal).is_err());
        assert!(p.audit_start(1, LocalityClass::Local).is_ok());
        assert!(p.audit_start(2, LocalityClass::Remote).is_ok());
    }
}
