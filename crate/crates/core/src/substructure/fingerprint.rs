use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hash::stable_hash;
use crate::wl::wl_refine_from;

use super::Partition;

/// WL rounds used when hashing a substructure.
pub const FINGERPRINT_WL_ROUNDS: usize = 3;

/// Isomorphism-invariant summary hash of a substructure: node count, sorted
/// degree sequence and a WL histogram hash seeded by discrete node labels
/// (or degrees when the graph has none). Continuous features are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint(pub u64);

pub fn substructure_fingerprint(graph: &Graph, partition: &Partition, id: usize) -> Fingerprint {
    let sub = graph.induced_subgraph(partition.substructure(id));
    let degrees = sub.degrees();
    let initial: Vec<u64> = match sub.node_labels() {
        Some(labels) => labels.iter().map(|&l| stable_hash(&[1, l as u64])).collect(),
        None => degrees.iter().map(|&d| stable_hash(&[2, d as u64])).collect(),
    };
    let wl = wl_refine_from(&sub, initial, FINGERPRINT_WL_ROUNDS);
    let mut sorted = degrees;
    sorted.sort_unstable();
    let mut words = vec![sub.node_count() as u64, sorted.len() as u64];
    words.extend(sorted.iter().map(|&d| d as u64));
    words.push(wl.hash);
    Fingerprint(stable_hash(&words))
}

pub fn graph_fingerprints(graph: &Graph, partition: &Partition) -> Vec<Fingerprint> {
    (0..partition.len())
        .map(|id| substructure_fingerprint(graph, partition, id))
        .collect()
}

/// Fraction of OOD graphs holding at least one substructure whose fingerprint
/// never occurs among the ID substructures.
pub fn novelty_rate(id: &[(&Graph, &Partition)], ood: &[(&Graph, &Partition)]) -> Result<f64> {
    if id.is_empty() {
        return Err(Error::Config("novelty rate needs at least one ID graph".into()));
    }
    if ood.is_empty() {
        return Ok(0.0);
    }
    let seen: HashSet<Fingerprint> = id
        .iter()
        .flat_map(|(g, p)| graph_fingerprints(g, p))
        .collect();
    let novel = ood
        .iter()
        .filter(|(g, p)| graph_fingerprints(g, p).iter().any(|f| !seen.contains(f)))
        .count();
    Ok(novel as f64 / ood.len() as f64)
}
