use smallvec::SmallVec;

use super::topology::{LocalityClass, TaskType, Topology};
use crate::error::Result;

/// The task types of one run, indexed by the `kind` carried on each task,
/// with their replica racks cached for fast locality lookups.
#[derive(Clone, Debug)]
pub struct TypeTable {
    topology: Topology,
    types: Vec<TaskType>,
    racks: Vec<SmallVec<[usize; 3]>>,
}

impl TypeTable {
    pub fn new(topology: Topology, types: Vec<TaskType>) -> Result<Self> {
        types.iter().try_for_each(|t| t.validate(&topology))?;
        let racks = types.iter().map(|t| t.racks(&topology)).collect();
        Ok(Self { topology, types, racks })
    }

    #[inline]
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    #[inline]
    pub fn get(&self, kind: u32) -> &TaskType {
        &self.types[kind as usize]
    }

    pub fn types(&self) -> &[TaskType] {
        &self.types
    }

    #[inline]
    pub fn locals(&self, kind: u32) -> &[usize] {
        self.types[kind as usize].locals()
    }

    /// Distinct racks holding replicas of `kind`, ascending.
    #[inline]
    pub fn replica_racks(&self, kind: u32) -> &[usize] {
        &self.racks[kind as usize]
    }

    #[inline]
    pub fn locality(&self, kind: u32, server: usize) -> LocalityClass {
        if self.locals(kind).contains(&server) {
            LocalityClass::Local
        } else if self
            .replica_racks(kind)
            .contains(&self.topology.rack_of_unchecked(server))
        {
            LocalityClass::RackLocal
        } else {
            LocalityClass::Remote
        }
    }

    /// Sizes of the rack-local and remote server sets of `kind`.
    pub fn stratum_sizes(&self, kind: u32) -> (usize, usize) {
        let per = self.topology.servers_per_rack();
        let rack_local = self.replica_racks(kind).len() * per - self.locals(kind).len();
        let remote = (self.topology.racks() - self.replica_racks(kind).len()) * per;
        (rack_local, remote)
    }
}
