use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

use super::{validate_partition, Partition};

/// Graph over substructures: `(j, k)` is an edge iff some original edge
/// joins a node of `j` to a node of `k`. Every super node also carries one
/// self-loop, which is implicit in this representation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperGraph {
    node_count: usize,
    /// Cross edges `(j, k)`, `j < k`, sorted, without duplicates.
    edges: Vec<(usize, usize)>,
}

impl SuperGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn self_loop_count(&self) -> usize {
        self.node_count
    }

    /// Degree of a super node, not counting its self-loop.
    pub fn degree(&self, j: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == j || b == j).count()
    }

    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == j {
                    Some(b)
                } else if b == j {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Cross edges as an ordinary [`Graph`] (no self-loops).
    pub fn as_graph(&self) -> Graph {
        Graph::from_edges(self.node_count, self.edges.clone()).expect("super edges are simple")
    }

    /// Directed `(source, target)` pairs for message passing: both directions
    /// of every cross edge plus one self pair per super node.
    pub fn message_pairs(&self) -> (Vec<usize>, Vec<usize>) {
        let mut src = Vec::with_capacity(2 * self.edges.len() + self.node_count);
        let mut dst = Vec::with_capacity(src.capacity());
        for &(a, b) in &self.edges {
            src.extend([a, b]);
            dst.extend([b, a]);
        }
        for j in 0..self.node_count {
            src.push(j);
            dst.push(j);
        }
        (src, dst)
    }
}

/// Builds the super graph of a validated partition.
pub fn build_super_graph(graph: &Graph, partition: &Partition) -> Result<SuperGraph> {
    let violations = validate_partition(graph, partition);
    if !violations.is_empty() {
        return Err(Error::InvalidPartition(violations));
    }
    let assign = partition.assignment();
    let mut edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .filter_map(|&(u, v)| {
            let (a, b) = (assign[u], assign[v]);
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(SuperGraph {
        node_count: partition.len(),
        edges,
    })
}
