use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// Assignment of nodes to substructures.
///
/// Built by the detectors through [`Partition::from_assignment`], which
/// renumbers substructures by their smallest member node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    node_count: usize,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Dense, canonical partition from arbitrary per-node labels.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (v, &l) in labels.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[id].push(v);
        }
        Self {
            node_count: labels.len(),
            members,
        }
    }

    /// Raw member lists, kept as given. May violate the partition
    /// properties; see [`validate_partition`](super::validate_partition).
    pub fn from_members(node_count: usize, members: Vec<Vec<usize>>) -> Self {
        Self { node_count, members }
    }

    /// Everything in one substructure.
    pub fn whole(node_count: usize) -> Self {
        Self::from_assignment(&vec![0; node_count])
    }

    pub fn singletons(node_count: usize) -> Self {
        Self::from_assignment(&(0..node_count).collect::<Vec<_>>())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of substructures `n_i`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn substructure(&self, id: usize) -> &[usize] {
        &self.members[id]
    }

    /// Owning substructure per node; `usize::MAX` for uncovered nodes.
    pub fn assignment(&self) -> Vec<usize> {
        let mut a = vec![usize::MAX; self.node_count];
        for (id, m) in self.members.iter().enumerate() {
            for &v in m {
                if v < self.node_count {
                    a[v] = id;
                }
            }
        }
        a
    }

    /// Substructure sizes, in id order.
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Which of the three substructure properties an assignment breaks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// (i) a node listed in two substructures.
    Overlap { node: usize, substructures: (usize, usize) },
    /// (ii) a node in no substructure.
    Uncovered { node: usize },
    /// (ii) a member id that is not a node of the graph.
    UnknownNode { substructure: usize, node: usize },
    /// (iii) a substructure whose induced subgraph is disconnected.
    Disconnected { substructure: usize },
    /// (iii) a substructure with no members.
    Empty { substructure: usize },
}

/// Checks non-overlap, coverage and connectivity. An empty list means the
/// partition is valid.
pub fn validate_partition(graph: &Graph, partition: &Partition) -> Vec<Violation> {
    let n = graph.node_count();
    let mut out = Vec::new();
    let mut owner = vec![usize::MAX; n];
    for (id, m) in partition.members().iter().enumerate() {
        if m.is_empty() {
            out.push(Violation::Empty { substructure: id });
        }
        for &v in m {
            if v >= n {
                out.push(Violation::UnknownNode { substructure: id, node: v });
            } else if owner[v] != usize::MAX {
                out.push(Violation::Overlap {
                    node: v,
                    substructures: (owner[v], id),
                });
            } else {
                owner[v] = id;
            }
        }
    }
    for (node, &o) in owner.iter().enumerate() {
        if o == usize::MAX {
            out.push(Violation::Uncovered { node });
        }
    }
    let adj = graph.adjacency();
    for (id, m) in partition.members().iter().enumerate() {
        let nodes: Vec<usize> = m.iter().copied().filter(|&v| v < n && owner[v] == id).collect();
        if nodes.len() <= 1 {
            continue;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![nodes[0]];
        seen[nodes[0]] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] && owner[u] == id {
                    seen[u] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        if reached != nodes.len() {
            out.push(Violation::Disconnected { substructure: id });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;

    #[test]
    fn canonical_ids() {
        let p = Partition::from_assignment(&[7, 3, 7, 3, 9]);
        assert_eq!(p.members(), &[vec![0, 2], vec![1, 3], vec![4]]);
        assert_eq!(p.assignment(), vec![0, 1, 0, 1, 2]);
    }

    #[test]
    fn disconnected_member_is_reported() {
        let g = path(3);
        let p = Partition::from_members(3, vec![vec![0, 2], vec![1]]);
        assert_eq!(validate_partition(&g, &p), vec![Violation::Disconnected { substructure: 0 }]);
    }

    #[test]
    fn missing_and_overlapping_nodes() {
        let g = path(3);
        let missing = Partition::from_members(3, vec![vec![0, 1]]);
        assert_eq!(validate_partition(&g, &missing), vec![Violation::Uncovered { node: 2 }]);
        let overlap = Partition::from_members(3, vec![vec![0, 1], vec![1, 2]]);
        let v = validate_partition(&g, &overlap);
        assert!(v.contains(&Violation::Overlap { node: 1, substructures: (0, 1) }));
    }

    #[test]
    fn trivial_partitions_of_connected_graph() {
        let g = cycle(5);
        assert!(validate_partition(&g, &Partition::whole(5)).is_empty());
        assert!(validate_partition(&g, &Partition::singletons(5)).is_empty());
    }
}
