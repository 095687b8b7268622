//! Simulator for locality-aware task scheduling in rack-structured clusters:
//! cluster model and capacity LP, workload streams, scheduling policies and
//! an event-driven engine with its estimators.

pub mod cluster;
pub mod engine;
mod error;
pub mod policies;
pub mod workload;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cluster.md")]
    mod cluster {}
    #[doc = include_str!("../../../book/src/workload.md")]
    mod workload {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
}
