use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sgood::encoder::{EncoderConfig, Model};
use sgood::graph::Graph;
use sgood::substructure::{
    build_super_graph, detect_substructures_lp, detect_substructures_modularity, graph_fingerprints, validate_partition,
    Detector, Partition,
};
use sgood::synth::{motif_chain, Motif, SyntheticSpec};
use sgood::training::Prepared;
use sgood::tudataset::{parse_tudataset, write_tudataset};
use sgood::wl::wl_distinguishable;

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (1..=max_nodes).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..(2 * n)).prop_map(move |pairs| {
            let mut edges: Vec<(usize, usize)> =
                pairs.into_iter().filter(|(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
            edges.sort();
            edges.dedup();
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

fn motif_strategy() -> impl Strategy<Value = Graph> {
    (0..3usize, 1..6usize, 0..3usize, any::<u64>()).prop_map(|(m, count, extra, seed)| {
        let motif = [Motif::Triangle, Motif::Square, Motif::Pentagon][m];
        motif_chain(motif, count, extra, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    })
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

fn permuted(g: &Graph, seed: u64) -> Graph {
    g.permute(&permutation(g.node_count(), seed))
}

fn multiset<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn detectors_are_valid_on_motif_chains(g in motif_strategy(), seed in any::<u64>()) {
        for p in [detect_substructures_modularity(&g), detect_substructures_lp(&g, seed)] {
            prop_assert!(validate_partition(&g, &p).is_empty());
            prop_assert!(build_super_graph(&g, &p).is_ok());
        }
    }

    #[test]
    fn fingerprints_survive_relabeling(g in graph_strategy(12), seed in any::<u64>()) {
        let perm = permutation(g.node_count(), seed);
        let h = g.permute(&perm);
        let p = detect_substructures_modularity(&g);
        let a = p.assignment();
        let mut moved = vec![0; a.len()];
        for (v, &c) in a.iter().enumerate() {
            moved[perm[v]] = c;
        }
        prop_assert_eq!(
            multiset(graph_fingerprints(&g, &p)),
            multiset(graph_fingerprints(&h, &Partition::from_assignment(&moved)))
        );
    }

    #[test]
    fn wl_is_symmetric_and_blind_to_relabeling(a in graph_strategy(9), b in graph_strategy(9), seed in any::<u64>()) {
        prop_assert_eq!(wl_distinguishable(&a, &b, 9), wl_distinguishable(&b, &a, 9));
        prop_assert!(!wl_distinguishable(&a, &permuted(&a, seed), 9));
    }

    #[test]
    fn encoder_is_permutation_invariant(g in graph_strategy(10), seed in any::<u64>()) {
        let n = g.node_count();
        let feats: Vec<f64> = (0..n).map(|v| (v % 3) as f64 - 1.0).collect();
        let g = g.with_features(1, feats).unwrap();
        let h = permuted(&g, seed);
        let model = Model::new(EncoderConfig::new(1, 2), seed).unwrap();
        let embed = |g: &Graph| {
            let p = Prepared::new(g.clone(), Detector::Modularity.detect(g)).unwrap();
            model.encode(p.item()).unwrap().h_graph
        };
        // node readouts do not depend on the partition
        for (x, y) in embed(&g).iter().zip(embed(&h)) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }
}

#[test]
fn tudataset_round_trip_on_synthetic_sets() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [SyntheticSpec::id_default(12, 1), SyntheticSpec::ood_default(7, 2)] {
        let ds = spec.generate().unwrap();
        write_tudataset(&ds, &dir.path().join(&ds.name)).unwrap();
        let back = parse_tudataset(&dir.path().join(&ds.name), &ds.name).unwrap();
        assert_eq!(back, ds);
    }
}
