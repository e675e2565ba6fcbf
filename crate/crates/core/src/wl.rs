//! 1-WL color refinement with colors that are comparable across graphs.
//!
//! Colors are stable 64-bit hashes of `(own color, sorted neighbor colors)`,
//! so two graphs refined independently can be compared by histogram.

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::hash::stable_hash;

const UNIFORM_COLOR: u64 = 0x5347_4f4f_445f_574c;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WlColoring {
    pub colors: Vec<u64>,
    /// `(color, count)` sorted by color.
    pub histogram: Vec<(u64, usize)>,
    pub hash: u64,
}

fn histogram(colors: &[u64]) -> Vec<(u64, usize)> {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(u64, usize)> = Vec::new();
    for c in sorted {
        match out.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

fn initial_colors(graph: &Graph, use_features: bool) -> Vec<u64> {
    match (use_features, graph.node_labels()) {
        (true, Some(labels)) => labels.iter().map(|&l| stable_hash(&[1, l as u64])).collect(),
        _ => vec![UNIFORM_COLOR; graph.node_count()],
    }
}

fn refine_round(adj: &[Vec<usize>], colors: &[u64]) -> Vec<u64> {
    adj.iter()
        .enumerate()
        .map(|(v, nbrs)| {
            let mut sig = Vec::with_capacity(nbrs.len() + 2);
            sig.push(colors[v]);
            let mut nc: Vec<u64> = nbrs.iter().map(|&u| colors[u]).collect();
            nc.sort_unstable();
            sig.push(nc.len() as u64);
            sig.extend(nc);
            stable_hash(&sig)
        })
        .collect()
}

fn finish(colors: Vec<u64>) -> WlColoring {
    let histogram = histogram(&colors);
    let flat: Vec<u64> = histogram.iter().flat_map(|&(c, n)| [c, n as u64]).collect();
    WlColoring {
        hash: stable_hash(&flat),
        colors,
        histogram,
    }
}

/// Runs `iterations` rounds of 1-WL refinement.
///
/// Initial colors come from discrete node labels when `use_features` is set
/// and the graph carries them; otherwise every node starts with one color.
pub fn wl_refine(graph: &Graph, iterations: usize, use_features: bool) -> WlColoring {
    wl_refine_from(graph, initial_colors(graph, use_features), iterations)
}

/// Refinement from caller-supplied initial colors.
pub fn wl_refine_from(graph: &Graph, initial: Vec<u64>, iterations: usize) -> WlColoring {
    let adj = graph.adjacency();
    let mut colors = initial;
    for _ in 0..iterations {
        colors = refine_round(&adj, &colors);
    }
    finish(colors)
}

/// True iff the two graphs have different node counts or their 1-WL
/// histograms differ at some round `<= iterations`.
pub fn wl_distinguishable(g1: &Graph, g2: &Graph, iterations: usize) -> bool {
    if g1.node_count() != g2.node_count() {
        return true;
    }
    let use_labels = g1.node_labels().is_some() && g2.node_labels().is_some();
    let (a1, a2) = (g1.adjacency(), g2.adjacency());
    let mut c1 = initial_colors(g1, use_labels);
    let mut c2 = initial_colors(g2, use_labels);
    for round in 0..=iterations {
        if histogram(&c1) != histogram(&c2) {
            return true;
        }
        if round < iterations {
            c1 = refine_round(&a1, &c1);
            c2 = refine_round(&a2, &c2);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand::seq::SliceRandom;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::families::*;

    #[test]
    fn two_regular_pair_is_indistinguishable() {
        let c6 = cycle(6);
        let two_c3 = union(&[cycle(3), cycle(3)]);
        for k in 0..5 {
            assert_eq!(wl_refine(&c6, k, false).hash, wl_refine(&two_c3, k, false).hash);
        }
        assert!(!wl_distinguishable(&c6, &two_c3, 10));
    }

    #[test]
    fn path_splits_after_one_round() {
        let c = wl_refine(&path(3), 1, false);
        assert_eq!(c.histogram.len(), 2);
        assert_eq!(c.colors[0], c.colors[2]);
        assert_ne!(c.colors[0], c.colors[1]);
        assert_eq!(c.histogram.iter().map(|h| h.1).sum::<usize>(), 3);
    }

    #[test]
    fn simple_pairs() {
        assert!(wl_distinguishable(&complete(3), &path(3), 2));
        let g = barbell(4);
        assert!(!wl_distinguishable(&g, &g, 3));
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn distinguished_pairs_stay_distinguished() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let g1 = random_graph(&mut rng, 8, 0.3);
            let g2 = random_graph(&mut rng, 8, 0.3);
            let first = (0..5).find(|&k| wl_refine(&g1, k, false).hash != wl_refine(&g2, k, false).hash);
            if let Some(k) = first {
                for later in k..6 {
                    assert_ne!(wl_refine(&g1, later, false).hash, wl_refine(&g2, later, false).hash);
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn symmetric_and_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g1 = random_graph(&mut rng, 7, 0.4);
            let g2 = random_graph(&mut rng, 7, 0.4);
            assert_eq!(wl_distinguishable(&g1, &g2, 3), wl_distinguishable(&g2, &g1, 3));
            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut rng);
            assert!(!wl_distinguishable(&g1, &g1.permute(&perm), 4));
        }
    }
}
