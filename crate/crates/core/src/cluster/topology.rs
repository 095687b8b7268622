use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Result};

/// `M` servers split into `K` equal racks.
///
/// Server ids run `1..=M` and rack ids `1..=K`. Racks are contiguous
/// blocks: servers `1..=M/K` sit in rack 1, the next block in rack 2, and
/// so on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    servers: usize,
    racks: usize,
}

impl Topology {
    pub fn new(servers: usize, racks: usize) -> Result<Self> {
        if servers == 0 || racks == 0 {
            return Err(invalid("topology needs at least one server and one rack"));
        }
        if !servers.is_multiple_of(racks) {
            return Err(invalid(format!(
                "{servers} servers cannot be split into {racks} equal racks"
            )));
        }
        Ok(Self { servers, racks })
    }

    #[inline]
    pub fn servers(&self) -> usize {
        self.servers
    }

    #[inline]
    pub fn racks(&self) -> usize {
        self.racks
    }

    #[inline]
    pub fn servers_per_rack(&self) -> usize {
        self.servers / self.racks
    }

    pub fn rack_of(&self, server: usize) -> Result<usize> {
        self.check_server(server)?;
        Ok(self.rack_of_unchecked(server))
    }

    /// Same as [`rack_of`](Self::rack_of) for ids already known to be valid.
    #[inline]
    pub fn rack_of_unchecked(&self, server: usize) -> usize {
        (server - 1) / self.servers_per_rack() + 1
    }

    /// Server ids of `rack`, in ascending order.
    pub fn rack_members(&self, rack: usize) -> std::ops::RangeInclusive<usize> {
        let per = self.servers_per_rack();
        (rack - 1) * per + 1..=rack * per
    }

    pub fn check_server(&self, server: usize) -> Result<()> {
        if server == 0 || server > self.servers {
            return Err(invalid(format!("server id {server} outside 1..={}", self.servers)));
        }
        Ok(())
    }
}

/// Data-locality level of a (task type, server) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocalityClass {
    Local,
    RackLocal,
    Remote,
}

impl LocalityClass {
    pub const ALL: [LocalityClass; 3] = [Self::Local, Self::RackLocal, Self::Remote];

    /// 0, 1, 2 for local, rack-local, remote.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Local => "local",
            Self::RackLocal => "rack",
            Self::Remote => "remote",
        }
    }
}

impl fmt::Display for LocalityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The sorted tuple of servers holding a task's data chunk.
///
/// Replication factor 3 is the usual case, but any factor `r >= 1` is
/// accepted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TaskType(SmallVec<[usize; 3]>);

impl TaskType {
    /// Builds a type from local server ids, which must be strictly increasing.
    pub fn new(locals: impl IntoIterator<Item = usize>) -> Result<Self> {
        let locals: SmallVec<[usize; 3]> = locals.into_iter().collect();
        if locals.is_empty() {
            return Err(invalid("a task type needs at least one local server"));
        }
        if locals.contains(&0) {
            return Err(invalid("server ids start at 1"));
        }
        if locals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "local servers {locals:?} must be distinct and sorted ascending"
            )));
        }
        Ok(Self(locals))
    }

    /// Builds a type on `topology`, checking every id is in range.
    pub fn on(topology: &Topology, locals: impl IntoIterator<Item = usize>) -> Result<Self> {
        let t = Self::new(locals)?;
        t.validate(topology)?;
        Ok(t)
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        self.0.iter().try_for_each(|&m| topology.check_server(m))
    }

    #[inline]
    pub fn locals(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn replication(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_local(&self, server: usize) -> bool {
        self.0.contains(&server)
    }

    /// Distinct racks holding at least one replica, ascending.
    pub fn racks(&self, topology: &Topology) -> SmallVec<[usize; 3]> {
        let mut racks: SmallVec<[usize; 3]> = self.0.iter().map(|&m| topology.rack_of_unchecked(m)).collect();
        racks.dedup();
        racks
    }

    pub fn locality_of(&self, server: usize, topology: &Topology) -> Result<LocalityClass> {
        self.validate(topology)?;
        topology.check_server(server)?;
        Ok(self.locality_unchecked(server, topology))
    }

    #[inline]
    pub(crate) fn locality_unchecked(&self, server: usize, topology: &Topology) -> LocalityClass {
        if self.is_local(server) {
            return LocalityClass::Local;
        }
        let rack = topology.rack_of_unchecked(server);
        if self.0.iter().any(|&m| topology.rack_of_unchecked(m) == rack) {
            LocalityClass::RackLocal
        } else {
            LocalityClass::Remote
        }
    }

    /// The local, rack-local and remote server sets, each ascending.
    pub fn locality_sets(&self, topology: &Topology) -> Result<LocalitySets> {
        self.validate(topology)?;
        let mut sets = LocalitySets::default();
        for m in 1..=topology.servers() {
            match self.locality_unchecked(m, topology) {
                LocalityClass::Local => sets.local.push(m),
                LocalityClass::RackLocal => sets.rack_local.push(m),
                LocalityClass::Remote => sets.remote.push(m),
            }
        }
        Ok(sets)
    }
}

impl TryFrom<Vec<usize>> for TaskType {
    type Error = crate::Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TaskType> for Vec<usize> {
    fn from(t: TaskType) -> Self {
        t.0.into_vec()
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LocalitySets {
    pub local: Vec<usize>,
    pub rack_local: Vec<usize>,
    pub remote: Vec<usize>,
}

/// Service parameters per locality class, `alpha > beta > gamma > 0`.
///
/// They read as rates in continuous time and as per-slot success
/// probabilities in slotted mode, where `alpha <= 1` is also required.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfile {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RateProfile {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.25,
        }
    }
}

impl RateProfile {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let r = Self { alpha, beta, gamma };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha.is_finite() && self.alpha > self.beta && self.beta > self.gamma && self.gamma > 0.0;
        if !ok {
            return Err(invalid(format!(
                "rates must satisfy alpha > beta > gamma > 0, got ({}, {}, {})",
                self.alpha, self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// Extra check for slotted mode, where rates are success probabilities.
    pub fn validate_probabilities(&self) -> Result<()> {
        self.validate()?;
        if self.alpha > 1.0 {
            return Err(invalid(format!(
                "geometric service needs alpha <= 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn rate(&self, class: LocalityClass) -> f64 {
        match class {
            LocalityClass::Local => self.alpha,
            LocalityClass::RackLocal => self.beta,
            LocalityClass::Remote => self.gamma,
        }
    }
}
