//! Substructure-preserving augmentations.
//!
//! Each augmentation edits the super graph and maps the change back onto the
//! original graph, so that the returned graph, partition and super graph stay
//! consistent with each other.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::substructure::{build_super_graph, Partition, SuperGraph};

/// Default fraction of super nodes affected by an augmentation.
pub const DEFAULT_RATIO: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentKind {
    /// No change.
    I,
    /// Substructure dropping.
    SD,
    /// Super-graph sampling by depth-first search.
    SG,
    /// Substructure substitution.
    SS,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 4] = [AugmentKind::I, AugmentKind::SD, AugmentKind::SG, AugmentKind::SS];
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AugmentKind::I => "I",
            AugmentKind::SD => "SD",
            AugmentKind::SG => "SG",
            AugmentKind::SS => "SS",
        };
        f.write_str(s)
    }
}

/// Set when an augmentation fell back to the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentWarning {
    /// No pool substructures exist for the graph's class.
    EmptyPool,
    /// The graph has no class label to pick a pool with.
    Unlabeled,
}

/// An augmented view: graph, partition and super graph kept in step.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub kind: AugmentKind,
    pub graph: Graph,
    pub partition: Partition,
    pub super_graph: SuperGraph,
    pub warning: Option<AugmentWarning>,
}

impl Augmented {
    fn identity(kind: AugmentKind, graph: &Graph, partition: &Partition, super_graph: &SuperGraph) -> Self {
        Self {
            kind,
            graph: graph.clone(),
            partition: partition.clone(),
            super_graph: super_graph.clone(),
            warning: None,
        }
    }
}

/// Keeps the listed substructures (in ascending id order) and everything
/// induced by their nodes. Node order follows the original numbering.
fn keep_substructures(kind: AugmentKind, graph: &Graph, partition: &Partition, keep: &[usize]) -> Result<Augmented> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let mut kept_nodes: Vec<usize> = keep.iter().flat_map(|&j| partition.substructure(j).iter().copied()).collect();
    kept_nodes.sort_unstable();
    let mut local = vec![usize::MAX; graph.node_count()];
    for (i, &v) in kept_nodes.iter().enumerate() {
        local[v] = i;
    }
    let members = keep
        .iter()
        .map(|&j| {
            let mut m: Vec<usize> = partition.substructure(j).iter().map(|&v| local[v]).collect();
            m.sort_unstable();
            m
        })
        .collect();
    let mut sub = graph.induced_subgraph(&kept_nodes);
    if let Some(label) = graph.label() {
        sub = sub.with_label(label);
    }
    let partition = Partition::from_members(kept_nodes.len(), members);
    let super_graph = build_super_graph(&sub, &partition)?;
    Ok(Augmented {
        kind,
        graph: sub,
        partition,
        super_graph,
        warning: None,
    })
}

/// Drops `floor(ratio * n)` uniformly chosen substructures, always keeping one.
pub fn substructure_drop<R: Rng + ?Sized>(
    graph: &Graph,
    partition: &Partition,
    super_graph: &SuperGraph,
    ratio: f64,
    rng: &mut R,
) -> Result<Augmented> {
    let n = partition.len();
    let k = ((ratio * n as f64).floor() as usize).min(n.saturating_sub(1));
    if k == 0 {
        return Ok(Augmented::identity(AugmentKind::SD, graph, partition, super_graph));
    }
    let dropped = index::sample(rng, n, k).into_vec();
    let mut gone = vec![false; n];
    for j in dropped {
        gone[j] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&j| !gone[j]).collect();
    keep_substructures(AugmentKind::SD, graph, partition, &keep)
}

/// Super nodes in depth-first visiting order, stopping once `target` are
/// collected. Neighbors are explored in a random order; an exhausted
/// component restarts the search at a random unvisited super node.
pub fn dfs_sample<R: Rng + ?Sized>(super_graph: &SuperGraph, target: usize, rng: &mut R) -> Vec<usize> {
    let n = super_graph.node_count();
    let target = target.min(n);
    let adj: Vec<Vec<usize>> = (0..n).map(|j| super_graph.neighbors(j)).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(target);
    while order.len() < target {
        let unvisited: Vec<usize> = (0..n).filter(|&j| !visited[j]).collect();
        let start = unvisited[rng.gen_range(0..unvisited.len())];
        visited[start] = true;
        order.push(start);
        let mut first = adj[start].clone();
        first.shuffle(rng);
        let mut stack = vec![(first, 0usize)];
        while let Some((nbrs, pos)) = stack.last_mut() {
            if order.len() == target {
                break;
            }
            if *pos == nbrs.len() {
                stack.pop();
                continue;
            }
            let next = nbrs[*pos];
            *pos += 1;
            if visited[next] {
                continue;
            }
            visited[next] = true;
            order.push(next);
            let mut more = adj[next].clone();
            more.shuffle(rng);
            stack.push((more, 0));
        }
    }
    order
}

/// Keeps `max(1, ceil((1 - ratio) * n))` substructures collected by a
/// depth-first walk over the super graph.
pub fn super_graph_sample<R: Rng + ?Sized>(
    graph: &Graph,
    partition: &Partition,
    super_graph: &SuperGraph,
    ratio: f64,
    rng: &mut R,
) -> Result<Augmented> {
    let n = partition.len();
    let target = (((1.0 - ratio) * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1));
    if target >= n {
        return Ok(Augmented::identity(AugmentKind::SG, graph, partition, super_graph));
    }
    let keep = dfs_sample(super_graph, target, rng);
    keep_substructures(AugmentKind::SG, graph, partition, &keep)
}

/// Substructures harvested from training graphs, grouped by class.
#[derive(Clone, Debug, Default)]
pub struct SubstructurePool {
    by_class: Vec<Vec<Graph>>,
}

impl SubstructurePool {
    /// Collects every substructure of every labeled graph.
    pub fn build(items: &[(&Graph, &Partition)], num_classes: usize) -> Self {
        let mut by_class = vec![Vec::new(); num_classes];
        for (g, p) in items {
            let Some(c) = g.label() else { continue };
            if c >= by_class.len() {
                by_class.resize(c + 1, Vec::new());
            }
            for m in p.members() {
                by_class[c].push(g.induced_subgraph(m));
            }
        }
        Self { by_class }
    }

    pub fn class(&self, c: usize) -> &[Graph] {
        self.by_class.get(c).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.by_class.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Replaces `floor(ratio * |C|)` of the degree-one super nodes `C` with
/// random same-class substructures from `pool`.
///
/// Every cut edge touching a replaced substructure keeps its other endpoint
/// and is rewired to a uniformly chosen node of the replacement, so the super
/// graph is unchanged.
pub fn substructure_substitute<R: Rng + ?Sized>(
    graph: &Graph,
    partition: &Partition,
    super_graph: &SuperGraph,
    pool: &SubstructurePool,
    ratio: f64,
    rng: &mut R,
) -> Result<Augmented> {
    let candidates: Vec<usize> = (0..super_graph.node_count()).filter(|&j| super_graph.degree(j) == 1).collect();
    let k = (ratio * candidates.len() as f64).floor() as usize;
    let mut out = Augmented::identity(AugmentKind::SS, graph, partition, super_graph);
    if k == 0 {
        return Ok(out);
    }
    let Some(class) = graph.label() else {
        out.warning = Some(AugmentWarning::Unlabeled);
        return Ok(out);
    };
    let donors = pool.class(class);
    if donors.is_empty() {
        out.warning = Some(AugmentWarning::EmptyPool);
        return Ok(out);
    }

    let mut chosen: Vec<usize> = index::sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect();
    chosen.sort_unstable();
    let mut replacement: Vec<Option<&Graph>> = vec![None; partition.len()];
    for &j in &chosen {
        let donor = &donors[rng.gen_range(0..donors.len())];
        if donor.feature_width() != graph.feature_width() {
            return Err(Error::FeatureWidth {
                expected: graph.feature_width(),
                found: donor.feature_width(),
            });
        }
        replacement[j] = Some(donor);
    }

    let assign = partition.assignment();
    let width = graph.feature_width();
    // surviving original nodes first, in original order
    let mut local = vec![usize::MAX; graph.node_count()];
    let mut features = Vec::new();
    let mut node_labels = graph.node_labels().map(|_| Vec::new());
    let mut next = 0;
    for v in 0..graph.node_count() {
        if replacement[assign[v]].is_none() {
            local[v] = next;
            next += 1;
            features.extend_from_slice(graph.feature_row(v));
            if let (Some(nl), Some(src)) = (node_labels.as_mut(), graph.node_labels()) {
                nl.push(src[v]);
            }
        }
    }
    let mut members: Vec<Vec<usize>> = partition
        .members()
        .iter()
        .map(|m| m.iter().filter(|&&v| local[v] != usize::MAX).map(|&v| local[v]).collect())
        .collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &j in &chosen {
        let donor = replacement[j].expect("chosen substructure has a donor");
        let base = next;
        next += donor.node_count();
        members[j] = (base..next).collect();
        features.extend_from_slice(donor.features());
        match (node_labels.as_mut(), donor.node_labels()) {
            (Some(nl), Some(src)) => nl.extend_from_slice(src),
            _ => node_labels = None,
        }
        edges.extend(donor.edges().iter().map(|&(a, b)| (base + a, base + b)));
    }

    for &(u, v) in graph.edges() {
        let (su, sv) = (assign[u], assign[v]);
        let end = |x: usize, s: usize, rng: &mut R| match replacement[s] {
            Some(_) => members[s][rng.gen_range(0..members[s].len())],
            None => local[x],
        };
        if su == sv {
            if replacement[su].is_none() {
                edges.push((local[u], local[v]));
            }
            continue;
        }
        let a = end(u, su, rng);
        let b = end(v, sv, rng);
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut new_graph = Graph::new(next, edges, width, features)?.with_label(class);
    if let Some(nl) = node_labels {
        new_graph = new_graph.with_node_labels(nl)?;
    }
    let new_partition = Partition::from_members(next, members);
    let new_super = build_super_graph(&new_graph, &new_partition)?;
    debug_assert_eq!(&new_super, super_graph);
    Ok(Augmented {
        kind: AugmentKind::SS,
        graph: new_graph,
        partition: new_partition,
        super_graph: new_super,
        warning: None,
    })
}

/// Applies one augmentation of the given kind.
pub fn apply<R: Rng + ?Sized>(
    kind: AugmentKind,
    graph: &Graph,
    partition: &Partition,
    super_graph: &SuperGraph,
    pool: &SubstructurePool,
    ratio: f64,
    rng: &mut R,
) -> Result<Augmented> {
    match kind {
        AugmentKind::I => Ok(Augmented::identity(kind, graph, partition, super_graph)),
        AugmentKind::SD => substructure_drop(graph, partition, super_graph, ratio, rng),
        AugmentKind::SG => super_graph_sample(graph, partition, super_graph, ratio, rng),
        AugmentKind::SS => substructure_substitute(graph, partition, super_graph, pool, ratio, rng),
    }
}

pub fn sample_kind<R: Rng + ?Sized>(rng: &mut R) -> AugmentKind {
    AugmentKind::ALL[rng.gen_range(0..AugmentKind::ALL.len())]
}

/// Two views with independently drawn augmentation kinds.
pub fn sample_view_pair<R: Rng + ?Sized>(
    graph: &Graph,
    partition: &Partition,
    super_graph: &SuperGraph,
    pool: &SubstructurePool,
    ratio: f64,
    rng: &mut R,
) -> Result<(Augmented, Augmented)> {
    let k0 = sample_kind(rng);
    let k1 = sample_kind(rng);
    let a = apply(k0, graph, partition, super_graph, pool, ratio, rng)?;
    let b = apply(k1, graph, partition, super_graph, pool, ratio, rng)?;
    Ok((a, b))
}
