//! Newman modularity and greedy agglomerative (CNM) maximization.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

use super::Partition;

/// `Q = sum_c (e_c / m - (d_c / 2m)^2)` with `e_c` intra-community edges and
/// `d_c` the total degree of community `c`.
pub fn modularity(graph: &Graph, partition: &Partition) -> Result<f64> {
    let m = graph.edge_count();
    if m == 0 {
        return Err(Error::EdgelessGraph);
    }
    let assign = partition.assignment();
    let k = partition.len();
    let mut intra = vec![0usize; k];
    let mut degree = vec![0usize; k];
    for &(u, v) in graph.edges() {
        degree[assign[u]] += 1;
        degree[assign[v]] += 1;
        if assign[u] == assign[v] {
            intra[assign[u]] += 1;
        }
    }
    let m = m as f64;
    Ok(intra
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// Greedy modularity agglomeration, run on each connected component with that
/// component's own edge count.
///
/// Starting from singletons, the adjacent pair with the largest gain is merged
/// while the gain is positive. Gains are compared exactly in integers
/// (`2m * l_ab - d_a * d_b`, proportional to the modularity change) and ties
/// go to the lexicographically smallest `(a, b)` pair of community ids, where
/// a merged community keeps the smaller id.
pub fn detect_substructures_modularity(graph: &Graph) -> Partition {
    let adj = graph.adjacency();
    let mut labels = vec![0usize; graph.node_count()];
    for comp in graph.components() {
        for community in cnm_component(&comp, &adj) {
            let rep = community[0];
            for v in community {
                labels[v] = rep;
            }
        }
    }
    Partition::from_assignment(&labels)
}

fn cnm_component(nodes: &[usize], adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    if nodes.len() == 1 {
        return vec![nodes.to_vec()];
    }
    let mut local = std::collections::HashMap::with_capacity(nodes.len());
    for (i, &v) in nodes.iter().enumerate() {
        local.insert(v, i);
    }
    let n = nodes.len();
    let mut degree: Vec<i128> = nodes.iter().map(|&v| adj[v].len() as i128).collect();
    let two_m: i128 = degree.iter().sum();
    // links[a][b] = number of edges between communities a and b (a != b)
    let mut links: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    for (i, &v) in nodes.iter().enumerate() {
        for &u in &adj[v] {
            links[i].insert(local[&u], 1);
        }
    }
    let mut members: Vec<Option<Vec<usize>>> = nodes.iter().map(|&v| Some(vec![v])).collect();

    loop {
        let mut best: Option<(i128, usize, usize)> = None;
        for a in 0..n {
            if members[a].is_none() {
                continue;
            }
            for (&b, &l) in links[a].range(a + 1..) {
                let gain = two_m * l - degree[a] * degree[b];
                let better = match best {
                    None => true,
                    Some((g, _, _)) => gain > g,
                };
                if better {
                    best = Some((gain, a, b));
                }
            }
        }
        let Some((gain, a, b)) = best else { break };
        if gain <= 0 {
            break;
        }
        let moved = members[b].take().expect("live community");
        members[a].as_mut().expect("live community").extend(moved);
        degree[a] += degree[b];
        let b_links = std::mem::take(&mut links[b]);
        for (c, l) in b_links {
            links[c].remove(&b);
            if c == a {
                continue;
            }
            *links[a].entry(c).or_insert(0) += l;
            *links[c].entry(a).or_insert(0) += l;
        }
    }
    members
        .into_iter()
        .flatten()
        .map(|mut m| {
            m.sort_unstable();
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;
    use crate::substructure::validate_partition;

    #[test]
    fn modularity_examples() {
        let k3 = complete(3);
        assert!(modularity(&k3, &Partition::whole(3)).unwrap().abs() < 1e-15);

        let two = union(&[complete(3), complete(3)]);
        let split = Partition::from_assignment(&[0, 0, 0, 1, 1, 1]);
        assert!((modularity(&two, &split).unwrap() - 2.0 * (3.0 / 6.0 - 0.25)).abs() < 1e-15);

        let g = path(4);
        let d = [1.0, 2.0, 2.0, 1.0];
        let expected: f64 = -d.iter().map(|x| (x / 6.0f64).powi(2)).sum::<f64>();
        assert!((modularity(&g, &Partition::singletons(4)).unwrap() - expected).abs() < 1e-15);

        assert!(matches!(
            modularity(&Graph::from_edges(2, vec![]).unwrap(), &Partition::whole(2)),
            Err(Error::EdgelessGraph)
        ));
    }

    #[test]
    fn cnm_examples() {
        assert_eq!(detect_substructures_modularity(&complete(3)).len(), 1);
        let two = union(&[complete(3), complete(3)]);
        let p = detect_substructures_modularity(&two);
        assert_eq!(p.members(), &[vec![0, 1, 2], vec![3, 4, 5]]);
        let b = detect_substructures_modularity(&barbell(4));
        assert_eq!(b.members(), &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
    }

    #[test]
    fn isolated_nodes_are_singletons() {
        let g = Graph::from_edges(4, vec![(0, 1)]).unwrap();
        let p = detect_substructures_modularity(&g);
        assert_eq!(p.members(), &[vec![0, 1], vec![2], vec![3]]);
        assert!(validate_partition(&g, &p).is_empty());
    }

    #[test]
    fn cycles_split_into_pairs() {
        let p = detect_substructures_modularity(&cycle(6));
        assert_eq!(p.sizes(), vec![2, 2, 2]);
    }
}
