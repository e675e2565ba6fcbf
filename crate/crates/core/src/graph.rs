//! Graph data model: simple undirected graphs with dense per-node features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simple undirected graph with a fixed-width feature vector per node.
///
/// Edges are stored once per undirected pair as `(u, v)` with `u < v`, sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    feature_width: usize,
    features: Vec<f64>,
    label: Option<usize>,
    node_labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges, out-of-range
    /// endpoints and ragged features. `features` is row-major,
    /// `node_count * feature_width` values.
    pub fn new(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        feature_width: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        if features.len() != node_count * feature_width {
            return Err(Error::FeatureWidth {
                expected: node_count * feature_width,
                found: features.len(),
            });
        }
        Ok(Self {
            node_count,
            edges: norm,
            feature_width,
            features,
            label: None,
            node_labels: None,
        })
    }

    /// Structure-only graph with zero-width features.
    pub fn from_edges(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(node_count, edges, 0, Vec::new())
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(Error::InvalidGraph(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.node_count
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    /// Replaces the feature matrix.
    pub fn with_features(mut self, feature_width: usize, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.node_count * feature_width {
            return Err(Error::FeatureWidth {
                expected: self.node_count * feature_width,
                found: features.len(),
            });
        }
        self.feature_width = feature_width;
        self.features = features;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_row(&self, node: usize) -> &[f64] {
        &self.features[node * self.feature_width..(node + 1) * self.feature_width]
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    /// Sorted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Subgraph induced by `nodes`, renumbered in the given order. Keeps
    /// features and node labels; drops the graph label.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut local = vec![usize::MAX; self.node_count];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| local[u] != usize::MAX && local[v] != usize::MAX)
            .map(|&(u, v)| (local[u], local[v]))
            .collect();
        let mut features = Vec::with_capacity(nodes.len() * self.feature_width);
        for &v in nodes {
            features.extend_from_slice(self.feature_row(v));
        }
        let mut g = Graph::new(nodes.len(), edges, self.feature_width, features)
            .expect("induced subgraph of a valid graph is valid");
        if let Some(labels) = &self.node_labels {
            g.node_labels = Some(nodes.iter().map(|&v| labels[v]).collect());
        }
        g
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count, "permutation length");
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut features = vec![0.0; self.features.len()];
        let w = self.feature_width;
        for v in 0..self.node_count {
            features[perm[v] * w..(perm[v] + 1) * w].copy_from_slice(self.feature_row(v));
        }
        let mut g = Graph::new(self.node_count, edges, w, features).expect("permutation of a valid graph");
        g.label = self.label;
        if let Some(labels) = &self.node_labels {
            let mut nl = vec![0; self.node_count];
            for v in 0..self.node_count {
                nl[perm[v]] = labels[v];
            }
            g.node_labels = Some(nl);
        }
        g
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(self.node_count, &self.adjacency(), |_| true)
    }
}

/// Connected components of the nodes accepted by `keep`.
pub(crate) fn components_of(
    node_count: usize,
    adj: &[Vec<usize>],
    keep: impl Fn(usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut seen = vec![false; node_count];
    let mut out = Vec::new();
    for start in 0..node_count {
        if seen[start] || !keep(start) {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &u in &adj[v] {
                if !seen[u] && keep(u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// A labelled collection of graphs sharing one feature width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_width: usize,
    /// Original label values, indexed by dense class id.
    pub original_labels: Vec<i64>,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        let feature_width = graphs.first().map_or(0, Graph::feature_width);
        for g in &graphs {
            if g.feature_width() != feature_width {
                return Err(Error::FeatureWidth {
                    expected: feature_width,
                    found: g.feature_width(),
                });
            }
            if let Some(label) = g.label() {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        label,
                        classes: num_classes,
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_classes,
            feature_width,
            original_labels: (0..num_classes as i64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.graphs.iter().map(Graph::max_degree).max().unwrap_or(0)
    }

    /// Replaces every graph's features with degree one-hot vectors of width
    /// `max_degree + 1`.
    pub fn with_degree_features(mut self, max_degree: usize) -> Result<Self> {
        let mut graphs = Vec::with_capacity(self.graphs.len());
        for g in self.graphs {
            let feats = degree_features(&g, max_degree)?;
            graphs.push(g.with_features(max_degree + 1, feats)?);
        }
        self.graphs = graphs;
        self.feature_width = max_degree + 1;
        Ok(self)
    }
}

/// Row-major one-hot encoding of node degrees, width `max_degree + 1`.
pub fn degree_features(graph: &Graph, max_degree: usize) -> Result<Vec<f64>> {
    let width = max_degree + 1;
    let mut out = vec![0.0; graph.node_count() * width];
    for (v, d) in graph.degrees().into_iter().enumerate() {
        if d > max_degree {
            return Err(Error::DegreeOverflow {
                degree: d,
                max: max_degree,
            });
        }
        out[v * width + d] = 1.0;
    }
    Ok(out)
}

/// Block-diagonal union of several graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchedGraph {
    pub node_count: usize,
    pub feature_width: usize,
    /// Row-major features of all member nodes.
    pub features: Vec<f64>,
    /// Undirected edges with global node ids, `u < v`.
    pub edges: Vec<(usize, usize)>,
    /// Owning graph of each node.
    pub owner: Vec<usize>,
    /// First global node id of each member graph.
    pub offsets: Vec<usize>,
}

impl BatchedGraph {
    pub fn graph_count(&self) -> usize {
        self.offsets.len()
    }

    /// Directed message-passing pairs `(source, target)`, both directions.
    pub fn message_pairs(&self) -> (Vec<usize>, Vec<usize>) {
        let mut src = Vec::with_capacity(2 * self.edges.len());
        let mut dst = Vec::with_capacity(2 * self.edges.len());
        for &(u, v) in &self.edges {
            src.push(u);
            dst.push(v);
            src.push(v);
            dst.push(u);
        }
        (src, dst)
    }
}

pub fn disjoint_union_batch(graphs: &[&Graph]) -> Result<BatchedGraph> {
    let first = graphs.first().ok_or(Error::EmptyBatch)?;
    let width = first.feature_width();
    let mut batch = BatchedGraph {
        node_count: 0,
        feature_width: width,
        features: Vec::new(),
        edges: Vec::new(),
        owner: Vec::new(),
        offsets: Vec::with_capacity(graphs.len()),
    };
    for (gi, g) in graphs.iter().enumerate() {
        if g.feature_width() != width {
            return Err(Error::FeatureWidth {
                expected: width,
                found: g.feature_width(),
            });
        }
        let off = batch.node_count;
        batch.offsets.push(off);
        batch.features.extend_from_slice(g.features());
        batch
            .edges
            .extend(g.edges().iter().map(|&(u, v)| (u + off, v + off)));
        batch.owner.extend(std::iter::repeat_n(gi, g.node_count()));
        batch.node_count += g.node_count();
    }
    Ok(batch)
}

/// Small constructors for the standard graph families used in tests and docs.
pub mod families {
    use super::Graph;

    pub fn cycle(n: usize) -> Graph {
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, edges).expect("cycle")
    }

    pub fn path(n: usize) -> Graph {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, edges).expect("path")
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Graph::from_edges(n, edges).expect("complete")
    }

    pub fn star(leaves: usize) -> Graph {
        let edges = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, edges).expect("star")
    }

    /// Two cliques of size `k` joined by a single edge `(k-1, k)`.
    pub fn barbell(k: usize) -> Graph {
        let mut edges = Vec::new();
        for base in [0, k] {
            for i in 0..k {
                for j in i + 1..k {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((k - 1, k));
        Graph::from_edges(2 * k, edges).expect("barbell")
    }

    /// Disjoint union of structure-only graphs.
    pub fn union(parts: &[Graph]) -> Graph {
        let mut edges = Vec::new();
        let mut off = 0;
        for g in parts {
            edges.extend(g.edges().iter().map(|&(u, v)| (u + off, v + off)));
            off += g.node_count();
        }
        Graph::from_edges(off, edges).expect("union")
    }
}

#[cfg(test)]
mod tests {
    use super::families::*;
    use super::*;

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(Graph::from_edges(2, vec![(0, 0)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn degree_one_hot() {
        let iso = Graph::from_edges(1, vec![]).unwrap();
        assert_eq!(degree_features(&iso, 3).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let tri = complete(3);
        assert_eq!(&degree_features(&tri, 3).unwrap()[..4], &[0.0, 0.0, 1.0, 0.0]);
        let s = star(5);
        let f = degree_features(&s, 5).unwrap();
        assert_eq!(f[5], 1.0);
        assert_eq!(f[..6].iter().sum::<f64>(), 1.0);
        assert!(matches!(
            degree_features(&s, 4),
            Err(Error::DegreeOverflow { degree: 5, max: 4 })
        ));
    }

    #[test]
    fn batch_two_triangles() {
        let a = complete(3);
        let b = batch_of(&[&a, &a]);
        assert_eq!(b.node_count, 6);
        assert_eq!(b.edges.len(), 6);
        assert_eq!(b.owner, vec![0, 0, 0, 1, 1, 1]);
        assert!(b.edges.iter().all(|&(u, v)| b.owner[u] == b.owner[v]));
    }

    #[test]
    fn batch_offsets() {
        let one = Graph::from_edges(1, vec![]).unwrap();
        let p = path(3);
        let b = batch_of(&[&one, &p]);
        assert_eq!(b.offsets, vec![0, 1]);
        assert_eq!(b.edges, vec![(1, 2), (2, 3)]);

        let single = batch_of(&[&p]);
        assert_eq!(single.edges, p.edges());
        assert_eq!(single.owner, vec![0; 3]);
    }

    #[test]
    fn empty_batch_is_error() {
        assert!(matches!(disjoint_union_batch(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn induced_and_permute() {
        let g = barbell(3);
        let sub = g.induced_subgraph(&[0, 1, 2]);
        assert_eq!(sub.edge_count(), 3);
        let p = g.permute(&[5, 4, 3, 2, 1, 0]);
        assert_eq!(p.edge_count(), g.edge_count());
        assert!(p.has_edge(3, 2));
    }

    fn batch_of(gs: &[&Graph]) -> BatchedGraph {
        disjoint_union_batch(gs).unwrap()
    }
}
