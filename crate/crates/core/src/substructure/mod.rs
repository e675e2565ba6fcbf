//! Task-agnostic substructures: detection, validation, super graphs and
//! fingerprints.

mod cache;
mod fingerprint;
mod lp;
mod modularity;
mod partition;
mod supergraph;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

pub use cache::{dataset_hash, PartitionCache, PARTITION_CACHE_VERSION};
pub use fingerprint::{
    graph_fingerprints, novelty_rate, substructure_fingerprint, Fingerprint, FINGERPRINT_WL_ROUNDS,
};
pub use lp::detect_substructures_lp;
pub use modularity::{detect_substructures_modularity, modularity};
pub use partition::{validate_partition, Partition, Violation};
pub use supergraph::{build_super_graph, SuperGraph};

/// Substructure detector selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    /// Greedy modularity agglomeration (CNM).
    Modularity,
    /// Seeded label propagation.
    Lp { seed: u64 },
}

impl Detector {
    pub fn detect(&self, graph: &Graph) -> Partition {
        match *self {
            Detector::Modularity => detect_substructures_modularity(graph),
            Detector::Lp { seed } => detect_substructures_lp(graph, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Detector::Modularity => "modularity",
            Detector::Lp { .. } => "lp",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modularity" | "cnm" => Ok(Detector::Modularity),
            "lp" => Ok(Detector::Lp { seed: 0 }),
            other => Err(crate::Error::Config(format!("unknown detector {other:?}"))),
        }
    }
}
