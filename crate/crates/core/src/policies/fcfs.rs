//! Locality-oblivious FCFS baseline.
//!
//! One global FIFO queue. An arrival goes to an idle server if there is one,
//! preferring the best locality class and then the lowest id; otherwise it
//! waits. A server that becomes idle takes the head of the queue whatever
//! its locality.

use std::collections::VecDeque;

use super::{Ctx, Pick, Policy, PolicyKind};
use crate::workload::Task;

pub struct Fcfs {
    queue: VecDeque<Task>,
}

impl Fcfs {
    pub fn new(_servers: usize) -> Self {
        Self { queue: VecDeque::new() }
    }
}

impl Policy for Fcfs {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Fcfs
    }

    fn route(&mut self, task: Task, ctx: &mut Ctx<'_>) -> Option<usize> {
        ctx.cost.route(ctx.busy.len());
        let target = ctx
            .busy
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| (ctx.table.locality(task.kind, i + 1), i + 1))
            .min()
            .map(|(_, m)| m);
        self.queue.push_back(task);
        target
    }

    fn schedule(&mut self, _server: usize, ctx: &mut Ctx<'_>) -> Option<Pick> {
        ctx.cost.schedule(1);
        self.queue.pop_front().map(|task| Pick { task, from: None })
    }

    fn pulls_from_others(&self) -> bool {
        true
    }

    fn queued(&self) -> usize {
        self.queue.len()
    }

    fn queued_at(&self, _server: usize) -> usize {
        0
    }

    fn describe_queues(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = write!(out, "g={}", self.queue.len());
    }

    fn audit(&self, ctx: &Ctx<'_>) -> Result<(), String> {
        if !self.queue.is_empty() {
            if let Some(i) = ctx.busy.iter().position(|b| !b) {
                return Err(format!("server {} idle while {} tasks wait", i + 1, self.queue.len()));
            }
        }
        Ok(())
    }
}
