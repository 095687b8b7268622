//! Candidate sampling for the power-of-d variants.
//!
//! Strata are never materialized: a sampled index is mapped straight to a
//! server id, so one decision costs O(d · r) regardless of cluster size.

use rand::seq::index;
use rand::Rng;

use super::{PodConfig, Sampling};
use crate::cluster::{Topology, TypeTable};

/// Up to `amount` distinct indices in `0..len`; the whole range when
/// `amount >= len` (no randomness consumed then).
fn pick<R: Rng + ?Sized>(rng: &mut R, len: usize, amount: usize) -> Vec<usize> {
    if amount >= len {
        (0..len).collect()
    } else {
        index::sample(rng, len, amount).into_vec()
    }
}

/// `i`-th element (0-based) of `1..=n` with the sorted ids in `skip` removed.
fn nth_skipping(i: usize, skip: &[usize]) -> usize {
    let mut s = i + 1;
    for &k in skip {
        if k <= s {
            s += 1;
        }
    }
    s
}

/// `i`-th server of the rack-local set of `kind`.
fn rack_local_nth(table: &TypeTable, kind: u32, mut i: usize) -> usize {
    let topo = table.topology();
    let locals = table.locals(kind);
    for &rack in table.replica_racks(kind) {
        let members = topo.rack_members(rack);
        let in_rack: Vec<usize> = locals.iter().copied().filter(|m| members.contains(m)).collect();
        let size = topo.servers_per_rack() - in_rack.len();
        if i < size {
            let base = members.start() - 1;
            let rel: Vec<usize> = in_rack.iter().map(|m| m - base).collect();
            return base + nth_skipping(i, &rel);
        }
        i -= size;
    }
    unreachable!("index beyond rack-local stratum")
}

/// `i`-th server outside the racks in `skip_racks` (sorted).
fn outside_racks_nth(topo: &Topology, skip_racks: &[usize], i: usize) -> usize {
    let per = topo.servers_per_rack();
    let rack = nth_skipping(i / per, skip_racks);
    (rack - 1) * per + i % per + 1
}

/// The `r` local servers of `kind` plus sampled non-local servers, ascending.
pub fn pandas_pod_candidates<R: Rng + ?Sized>(
    table: &TypeTable,
    kind: u32,
    pod: &PodConfig,
    rng: &mut R,
) -> Vec<usize> {
    let locals = table.locals(kind);
    let mut out: Vec<usize> = locals.to_vec();
    match pod.sampling {
        Sampling::Stratified => {
            let (rack_len, remote_len) = table.stratum_sizes(kind);
            out.extend(
                pick(rng, rack_len, pod.n_rack)
                    .into_iter()
                    .map(|i| rack_local_nth(table, kind, i)),
            );
            let racks = table.replica_racks(kind);
            out.extend(
                pick(rng, remote_len, pod.n_remote)
                    .into_iter()
                    .map(|i| outside_racks_nth(table.topology(), racks, i)),
            );
        }
        Sampling::Uniform => {
            let len = table.topology().servers() - locals.len();
            out.extend(pick(rng, len, pod.d()).into_iter().map(|i| nth_skipping(i, locals)));
        }
    }
    out.sort_unstable();
    out
}

/// Idle `server` plus sampled same-rack and other-rack servers, ascending.
pub fn jsqmw_pod_candidates<R: Rng + ?Sized>(
    topology: &Topology,
    server: usize,
    pod: &PodConfig,
    rng: &mut R,
) -> Vec<usize> {
    let per = topology.servers_per_rack();
    let rack = topology.rack_of_unchecked(server);
    let mut out = vec![server];
    match pod.sampling {
        Sampling::Stratified => {
            let base = (rack - 1) * per;
            out.extend(
                pick(rng, per - 1, pod.n_rack)
                    .into_iter()
                    .map(|i| base + nth_skipping(i, &[server - base])),
            );
            let others = (topology.racks() - 1) * per;
            out.extend(
                pick(rng, others, pod.n_remote)
                    .into_iter()
                    .map(|i| outside_racks_nth(topology, &[rack], i)),
            );
        }
        Sampling::Uniform => {
            let len = topology.servers() - 1;
            out.extend(pick(rng, len, pod.d()).into_iter().map(|i| nth_skipping(i, &[server])));
        }
    }
    out.sort_unstable();
    out
}
