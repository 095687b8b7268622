//! Cluster topology, task types, data locality and the capacity region.

mod capacity;
pub mod lp;
mod table;
mod topology;

pub use capacity::{
    scale_to_load, throughput_margin, Decomposition, Membership, RateVector, ThroughputMargin, BOUNDARY_EPS,
    LP_VARIABLE_LIMIT,
};
pub use table::TypeTable;
pub use topology::{LocalityClass, LocalitySets, RateProfile, TaskType, Topology};
