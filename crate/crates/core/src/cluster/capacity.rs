//! Capacity region membership via the throughput-margin LP.
//!
//! For a rate shape `λ` the margin `ρ*` is the largest `ρ` such that `ρ·λ`
//! can be split over servers with every server's weighted load at most 1:
//!
//! ```text
//! max ρ  s.t.  Σ_m x[L,m] = ρ·λ[L]                        for every type L
//!              Σ_L x[L,m] / rate(class(L, m)) <= 1        for every server m
//!              x >= 0
//! ```
//!
//! `λ` itself is strictly inside the capacity region iff `ρ* > 1`.

use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpError, Relation};
use super::topology::{RateProfile, TaskType, Topology};
use crate::error::{invalid, Error, Result};

/// Hard cap on LP size; above it the caller has to shrink the problem.
pub const LP_VARIABLE_LIMIT: usize = 100_000;

/// Tolerance used when classifying a margin against the boundary `ρ* = 1`.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Arrival rate per task type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    entries: Vec<(TaskType, f64)>,
}

impl RateVector {
    pub fn new(entries: Vec<(TaskType, f64)>) -> Result<Self> {
        for (t, r) in &entries {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(invalid(format!("rate {r} for type {t} must be finite and >= 0")));
            }
        }
        let mut seen: Vec<&TaskType> = entries.iter().map(|(t, _)| t).collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate task type in rate vector"));
        }
        Ok(Self { entries })
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        self.entries.iter().try_for_each(|(t, _)| t.validate(topology))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskType, f64)> {
        self.entries.iter().map(|(t, r)| (t, *r))
    }

    pub fn types(&self) -> impl Iterator<Item = &TaskType> {
        self.entries.iter().map(|(t, _)| t)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, r)| *r)
    }

    pub fn total(&self) -> f64 {
        self.rates().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|(t, r)| (t.clone(), r * factor)).collect(),
        }
    }
}

/// Per-(type, server) split of a rate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    types: Vec<TaskType>,
    servers: usize,
    shares: Vec<f64>,
}

impl Decomposition {
    /// All-zero decomposition over `types`.
    pub fn zeros(types: Vec<TaskType>, servers: usize) -> Self {
        let shares = vec![0.0; types.len() * servers];
        Self { types, servers, shares }
    }

    pub fn types(&self) -> &[TaskType] {
        &self.types
    }

    pub fn share(&self, type_index: usize, server: usize) -> f64 {
        self.shares[type_index * self.servers + server - 1]
    }

    pub fn set_share(&mut self, type_index: usize, server: usize, value: f64) {
        self.shares[type_index * self.servers + server - 1] = value;
    }

    /// Sum of shares of one type.
    pub fn type_total(&self, type_index: usize) -> f64 {
        self.shares[type_index * self.servers..(type_index + 1) * self.servers]
            .iter()
            .sum()
    }

    /// Weighted load on `server`: each share divided by the service rate of
    /// its locality class at that server.
    pub fn server_load(&self, topology: &Topology, rates: &RateProfile, server: usize) -> Result<f64> {
        topology.check_server(server)?;
        if topology.servers() != self.servers {
            return Err(invalid("decomposition and topology disagree on server count"));
        }
        Ok(self
            .types
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let x = self.share(i, server);
                if x == 0.0 {
                    0.0
                } else {
                    x / rates.rate(t.locality_unchecked(server, topology))
                }
            })
            .sum())
    }

    pub fn server_loads(&self, topology: &Topology, rates: &RateProfile) -> Result<Vec<f64>> {
        (1..=topology.servers())
            .map(|m| self.server_load(topology, rates, m))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            types: self.types.clone(),
            servers: self.servers,
            shares: self.shares.iter().map(|x| x * factor).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    OnBoundary,
    Outside,
}

impl Membership {
    pub fn from_margin(margin: f64) -> Self {
        if margin > 1.0 + BOUNDARY_EPS {
            Self::Inside
        } else if margin >= 1.0 - BOUNDARY_EPS {
            Self::OnBoundary
        } else {
            Self::Outside
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Self::Inside => "inside capacity region",
            Self::OnBoundary => "on boundary",
            Self::Outside => "outside capacity region",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThroughputMargin {
    /// Largest feasible scaling `ρ*` of the shape.
    pub margin: f64,
    /// An optimal split of `margin · shape`.
    pub witness: Decomposition,
}

impl ThroughputMargin {
    pub fn membership(&self) -> Membership {
        Membership::from_margin(self.margin)
    }
}

/// Solves for `ρ*` and a witness decomposition.
pub fn throughput_margin(shape: &RateVector, topology: &Topology, rates: &RateProfile) -> Result<ThroughputMargin> {
    rates.validate()?;
    shape.validate(topology)?;
    if shape.rates().all(|r| r == 0.0) {
        return Err(invalid("rate shape is all zero"));
    }

    let servers = topology.servers();
    let active: Vec<(usize, &TaskType, f64)> = shape
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| *r > 0.0)
        .map(|(i, (t, r))| (i, t, r))
        .collect();
    let vars = active.len() * servers + 1;
    if vars > LP_VARIABLE_LIMIT {
        return Err(Error::LpTooLarge {
            vars,
            limit: LP_VARIABLE_LIMIT,
        });
    }

    let rho = vars - 1;
    let var = |k: usize, m: usize| k * servers + m - 1;
    let mut lp = LinearProgram::new(vars);
    lp.set_objective(rho, 1.0);
    for (k, (_, _, rate)) in active.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = (1..=servers).map(|m| (var(k, m), 1.0)).collect();
        row.push((rho, -rate));
        lp.add_constraint(row, Relation::Eq, 0.0);
    }
    for m in 1..=servers {
        let row = active
            .iter()
            .enumerate()
            .map(|(k, (_, t, _))| (var(k, m), 1.0 / rates.rate(t.locality_unchecked(m, topology))))
            .collect();
        lp.add_constraint(row, Relation::Le, 1.0);
    }

    let solution = lp.maximize().map_err(|e| match e {
        LpError::Unbounded => Error::Solver("capacity LP unbounded".into()),
        other => Error::Solver(format!("capacity LP: {other}")),
    })?;

    let margin = solution.values[rho];
    let mut witness = Decomposition::zeros(shape.types().cloned().collect(), servers);
    for (k, (i, _, rate)) in active.iter().enumerate() {
        let target = margin * rate;
        let mut row: Vec<f64> = (1..=servers).map(|m| solution.values[var(k, m)]).collect();
        // Push rounding residue onto the largest share so each row sums to
        // exactly ρ*·λ.
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            let largest = (0..servers).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
            row[largest] = (row[largest] + target - sum).max(0.0);
        }
        for (m, x) in row.into_iter().enumerate() {
            witness.set_share(*i, m + 1, x);
        }
    }
    Ok(ThroughputMargin { margin, witness })
}

/// Scales `shape` to sit at fraction `target_rho` of the capacity boundary.
pub fn scale_to_load(
    shape: &RateVector,
    target_rho: f64,
    topology: &Topology,
    rates: &RateProfile,
) -> Result<RateVector> {
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(invalid(format!("target load {target_rho} must lie in (0, 1)")));
    }
    let margin = throughput_margin(shape, topology, rates)?.margin;
    Ok(shape.scaled(target_rho * margin))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(topo: &Topology, locals: [usize; 3], rate: f64) -> RateVector {
        RateVector::new(vec![(TaskType::on(topo, locals).unwrap(), rate)]).unwrap()
    }

    #[test]
    fn server_load_examples() {
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let t3 = Topology::new(3, 1).unwrap();
        let mut d = Decomposition::zeros(vec![TaskType::new([1, 2, 3]).unwrap()], 3);
        d.set_share(0, 1, 0.5);
        assert_eq!(d.server_load(&t3, &rates, 1).unwrap(), 0.5);

        let t6 = Topology::new(6, 2).unwrap();
        let mut d = Decomposition::zeros(vec![TaskType::new([1, 2, 3]).unwrap()], 6);
        d.set_share(0, 4, 0.1);
        assert!((d.server_load(&t6, &rates, 4).unwrap() - 0.4).abs() < 1e-12);

        let empty = Decomposition::zeros(vec![], 6);
        assert!(empty.server_loads(&t6, &rates).unwrap().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn margin_three_local_servers() {
        let topo = Topology::new(3, 1).unwrap();
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let tm = throughput_margin(&single(&topo, [1, 2, 3], 1.0), &topo, &rates).unwrap();
        assert!((tm.margin - 3.0).abs() < 1e-9);
        assert_eq!(tm.membership(), Membership::Inside);

        let doubled = throughput_margin(&single(&topo, [1, 2, 3], 2.0), &topo, &rates).unwrap();
        assert!((doubled.margin - 1.5).abs() < 1e-9);
    }

    #[test]
    fn margin_with_remote_help() {
        let topo = Topology::new(6, 2).unwrap();
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let tm = throughput_margin(&single(&topo, [1, 2, 3], 1.0), &topo, &rates).unwrap();
        assert!((tm.margin - 3.75).abs() < 1e-9);
        let loads = tm.witness.server_loads(&topo, &rates).unwrap();
        assert!(loads.iter().all(|&l| (l - 1.0).abs() < 1e-9), "{loads:?}");
        assert!((tm.witness.type_total(0) - 3.75).abs() < 1e-9);
    }

    #[test]
    fn scale_to_load_examples() {
        let rates = RateProfile::new(1.0, 0.5, 0.25).unwrap();
        let t3 = Topology::new(3, 1).unwrap();
        let v = scale_to_load(&single(&t3, [1, 2, 3], 1.0), 0.5, &t3, &rates).unwrap();
        assert!((v.total() - 1.5).abs() < 1e-9);

        let t6 = Topology::new(6, 2).unwrap();
        let v = scale_to_load(&single(&t6, [1, 2, 3], 1.0), 0.8, &t6, &rates).unwrap();
        assert!((v.total() - 3.0).abs() < 1e-9);
        let back = throughput_margin(&v, &t6, &rates).unwrap().margin;
        assert!((back - 1.25).abs() < 1e-9);

        let tiny = scale_to_load(&single(&t6, [1, 2, 3], 1.0), 1e-9, &t6, &rates).unwrap();
        assert!(tiny.total() < 1e-8);

        assert!(scale_to_load(&single(&t6, [1, 2, 3], 1.0), 1.0, &t6, &rates).is_err());
        assert!(scale_to_load(&single(&t6, [1, 2, 3], 1.0), 0.0, &t6, &rates).is_err());
    }

    #[test]
    fn zero_shape_rejected() {
        let topo = Topology::new(3, 1).unwrap();
        let rates = RateProfile::default();
        let err = throughput_margin(&single(&topo, [1, 2, 3], 0.0), &topo, &rates).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn size_limit_is_explicit() {
        let topo = Topology::new(500, 10).unwrap();
        let entries = (0..201)
            .map(|i| (TaskType::new([1 + i, 250 + i, 499]).unwrap(), 1.0))
            .collect();
        let shape = RateVector::new(entries).unwrap();
        let err = throughput_margin(&shape, &topo, &RateProfile::default()).unwrap_err();
        assert_eq!(
            err,
            Error::LpTooLarge {
                vars: 201 * 500 + 1,
                limit: LP_VARIABLE_LIMIT
            }
        );
    }

    #[test]
    fn membership_classification() {
        assert_eq!(Membership::from_margin(1.5), Membership::Inside);
        assert_eq!(Membership::from_margin(1.0), Membership::OnBoundary);
        assert_eq!(Membership::from_margin(0.9), Membership::Outside);
    }

    #[test]
    fn duplicate_types_rejected() {
        let t = TaskType::new([1, 2, 3]).unwrap();
        assert!(RateVector::new(vec![(t.clone(), 1.0), (t, 2.0)]).is_err());
    }
}
