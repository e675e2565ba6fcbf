//! Asynchronous label propagation with a connectivity post-pass.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

use super::Partition;

const MAX_SWEEPS: usize = 100;

pub fn detect_substructures_lp(graph: &Graph, seed: u64) -> Partition {
    let n = graph.node_count();
    let adj = graph.adjacency();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut counts = vec![0usize; n];

    for _ in 0..MAX_SWEEPS {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &v in &order {
            if adj[v].is_empty() {
                continue;
            }
            for &u in &adj[v] {
                counts[labels[u]] += 1;
            }
            let mut best = usize::MAX;
            let mut best_count = 0;
            for &u in &adj[v] {
                let l = labels[u];
                let c = counts[l];
                if c > best_count || (c == best_count && l < best) {
                    best = l;
                    best_count = c;
                }
            }
            for &u in &adj[v] {
                counts[labels[u]] = 0;
            }
            if best != labels[v] {
                labels[v] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // split label classes into connected pieces
    let mut piece = vec![usize::MAX; n];
    for start in 0..n {
        if piece[start] != usize::MAX {
            continue;
        }
        piece[start] = start;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if piece[u] == usize::MAX && labels[u] == labels[start] {
                    piece[u] = start;
                    stack.push(u);
                }
            }
        }
    }
    Partition::from_assignment(&piece)
}
