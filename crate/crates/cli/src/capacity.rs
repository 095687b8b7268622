//! Throughput margin of a config's rate vector and its busiest servers.

use std::fmt;

use podsim::cluster::{throughput_margin, Membership};

use crate::config::{ExperimentSpec, RateSource};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityReport {
    pub servers: usize,
    pub types: usize,
    /// Total arrival rate of the vector the margin refers to.
    pub total_rate: f64,
    pub margin: f64,
    pub membership: Membership,
    /// `(server, load)` for the `top` most loaded servers when the witness is
    /// scaled back to the supplied rates, by load then id.
    pub busiest: Vec<(usize, f64)>,
}

/// A pool is reported at its popularity shape (total rate 1); an explicit
/// `[workload]` at its rates as written.
pub fn capacity_report(spec: &ExperimentSpec, top: usize) -> Result<CapacityReport> {
    let topo = spec.topology()?;
    let rates = match spec.rate_source()? {
        RateSource::Shape(v) | RateSource::Absolute(v) => v,
    };
    let tm = throughput_margin(&rates, &topo, &spec.rates)?;
    let loads = tm.witness.scaled(1.0 / tm.margin).server_loads(&topo, &spec.rates)?;
    let mut busiest: Vec<(usize, f64)> = loads.into_iter().enumerate().map(|(i, l)| (i + 1, l)).collect();
    busiest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    busiest.truncate(top);
    Ok(CapacityReport {
        servers: topo.servers(),
        types: rates.len(),
        total_rate: rates.total(),
        margin: tm.margin,
        membership: tm.membership(),
        busiest,
    })
}

impl fmt::Display for CapacityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "servers        {}", self.servers)?;
        writeln!(f, "task types     {}", self.types)?;
        writeln!(f, "total rate     {}", self.total_rate)?;
        writeln!(f, "margin rho*    {}", self.margin)?;
        writeln!(f, "membership     {}", self.membership.describe())?;
        writeln!(f, "busiest servers at the supplied rates:")?;
        for (m, load) in &self.busiest {
            writeln!(f, "  server {m:>4}  load {load:.6}")?;
        }
        Ok(())
    }
}
