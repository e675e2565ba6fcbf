use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn hand_stats() -> GaussianStats {
    let zs = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![0.0, 4.0]];
    estimate_gaussian(&zs, &[0, 0, 1, 1], 2).unwrap()
}

#[test]
fn hand_dataset() {
    let s = hand_stats();
    assert_eq!(s.centroids, vec![vec![1.0, 0.0], vec![0.0, 3.0]]);
    assert_eq!(s.covariance, vec![0.5, 0.0, 0.0, 0.5]);
    let z = [1.0, 0.0];
    // brute force over both centroids with the ridged inverse
    let inv = 1.0 / (0.5 + s.ridge);
    let q = |m: [f64; 2]| inv * ((z[0] - m[0]).powi(2) + (z[1] - m[1]).powi(2));
    let (d0, d1) = (q([1.0, 0.0]), q([0.0, 3.0]));
    assert!((mahalanobis_score(&z, &s, ScoreMode::Nearest) - d0.min(d1)).abs() < 1e-12);
    assert!((mahalanobis_score(&z, &s, ScoreMode::LiteralMax) - d0.max(d1)).abs() < 1e-9);
    assert_eq!(mahalanobis_score(&z, &s, ScoreMode::Nearest), 0.0);
}

#[test]
fn one_sample_per_class() {
    let s = estimate_gaussian(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[0, 1], 2).unwrap();
    assert!(s.covariance.iter().all(|&x| x == 0.0));
    assert_eq!(s.ridge, 1e-10);
    assert!((s.precision[0] - 1e10).abs() < 1e-3 && s.precision[1] == 0.0);
}

#[test]
fn estimate_errors() {
    assert!(matches!(
        estimate_gaussian(&[vec![1.0]], &[0], 2),
        Err(Error::EmptyClass(1))
    ));
    assert!(estimate_gaussian(&[vec![1.0]], &[3], 2).is_err());
}

#[test]
fn identity_covariance_is_squared_distance() {
    let stats = GaussianStats {
        width: 2,
        centroids: vec![vec![0.0, 0.0], vec![3.0, 4.0]],
        covariance: vec![1.0, 0.0, 0.0, 1.0],
        precision: vec![1.0, 0.0, 0.0, 1.0],
        ridge: 0.0,
    };
    assert_eq!(mahalanobis_score(&[3.0, 4.0], &stats, ScoreMode::Nearest), 0.0);
    assert_eq!(mahalanobis_score(&[1.0, 1.0], &stats, ScoreMode::Nearest), 2.0);
    assert_eq!(mahalanobis_score(&[1.0, 1.0], &stats, ScoreMode::LiteralMax), 13.0);
}

#[test]
fn covariance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zs: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let s = estimate_gaussian(&zs, &labels, 3).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(s.covariance[i * 5 + j], s.covariance[j * 5 + i]);
        }
    }
}

#[test]
fn scoring_embedding_is_unit_and_homogeneous() {
    let z = embed_for_scoring(&[3.0, 0.0], Some(&[4.0])).unwrap();
    assert_eq!(z, vec![0.6, 0.0, 0.8]);
    let z2 = embed_for_scoring(&[30.0, 0.0], Some(&[40.0])).unwrap();
    assert_eq!(z, z2);
    assert!(matches!(embed_for_scoring(&[0.0], Some(&[0.0])), Err(Error::ZeroNorm)));
}

#[test]
fn threshold_examples() {
    let s: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(threshold_at_tpr(&s, 0.95).unwrap(), 95.0);
    assert_eq!(threshold_at_tpr(&[2.5; 7], 0.95).unwrap(), 2.5);
}

#[test]
fn threshold_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(1..60);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..20) as f64).collect();
        let lambda = threshold_at_tpr(&s, 0.95).unwrap();
        let ok = |t: f64| s.iter().filter(|&&x| x <= t).count() as f64 / n as f64 >= 0.95;
        let brute = s.iter().copied().filter(|&t| ok(t)).fold(f64::INFINITY, f64::min);
        assert_eq!(lambda, brute);
    }
}

#[test]
fn separated_and_tied_metrics() {
    let scores = [0.1, 0.2, 0.3, 0.9, 1.0];
    let ood = [false, false, false, true, true];
    assert_eq!(auroc(&scores, &ood).unwrap(), 1.0);
    assert_eq!(aupr(&scores, &ood).unwrap(), 1.0);
    assert_eq!(fpr95(&scores, &ood).unwrap(), 0.0);
    let flat = [0.5; 5];
    assert_eq!(auroc(&flat, &ood).unwrap(), 0.5);
    assert!(matches!(auroc(&scores, &[false; 5]), Err(Error::SingleClass)));
}

#[test]
fn aupr_hand_example() {
    // descending: ood, id, ood, id -> precision 1 at recall .5, 2/3 at recall 1
    let scores = [4.0, 3.0, 2.0, 1.0];
    let ood = [true, false, true, false];
    assert!((aupr(&scores, &ood).unwrap() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
}

fn pair_auroc(scores: &[f64], ood: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if ood[i] && !ood[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    credit += 1.0;
                } else if scores[i] == scores[j] {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs
}

fn random_scored(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..80);
    let mut ood: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    ood[0] = true;
    ood[1] = false;
    let levels = rng.gen_range(2..30);
    let scores = (0..n).map(|i| rng.gen_range(0..levels) as f64 + if ood[i] { 2.0 } else { 0.0 }).collect();
    (scores, ood)
}

#[test]
fn auroc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..200 {
        let (s, o) = random_scored(&mut rng);
        assert_eq!(auroc(&s, &o).unwrap(), pair_auroc(&s, &o));
    }
}

#[test]
fn fpr95_threshold_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let (s, o) = random_scored(&mut rng);
        let t = fpr95_threshold(&s, &o).unwrap();
        let n_ood = o.iter().filter(|&&x| x).count();
        let caught = s.iter().zip(&o).filter(|(&x, &f)| f && x >= t).count();
        assert!(caught as f64 / n_ood as f64 >= 0.95);
        // no larger threshold keeps the rate
        let larger = s.iter().copied().filter(|&x| x > t).fold(f64::INFINITY, f64::min);
        if larger.is_finite() {
            let c2 = s.iter().zip(&o).filter(|(&x, &f)| f && x >= larger).count();
            assert!((c2 as f64 / n_ood as f64) < 0.95);
        }
        let n_id = o.len() - n_ood;
        let fp = s.iter().zip(&o).filter(|(&x, &f)| !f && x >= t).count();
        assert_eq!(fpr95(&s, &o).unwrap(), fp as f64 / n_id as f64);
    }
}

#[test]
fn affine_recalibration_keeps_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let w = 3;
    let zs: Vec<Vec<f64>> = (0..60).map(|_| (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..60).map(|i| i % 2).collect();
    let tests: Vec<Vec<f64>> = (0..40).map(|_| (0..w).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let a = [[2.0, 0.5, 0.0], [0.0, 1.0, -0.3], [0.4, 0.0, 1.5]];
    let b = [0.7, -1.2, 3.0];
    let map = |z: &Vec<f64>| -> Vec<f64> { (0..w).map(|i| (0..w).map(|j| a[i][j] * z[j]).sum::<f64>() + b[i]).collect() };
    let s1 = estimate_gaussian(&zs, &labels, 2).unwrap();
    let s2 = estimate_gaussian(&zs.iter().map(map).collect::<Vec<_>>(), &labels, 2).unwrap();
    let x: Vec<f64> = tests.iter().map(|z| mahalanobis_score(z, &s1, ScoreMode::Nearest)).collect();
    let y: Vec<f64> = tests.iter().map(|z| mahalanobis_score(&map(z), &s2, ScoreMode::Nearest)).collect();
    let mut ox: Vec<usize> = (0..40).collect();
    let mut oy = ox.clone();
    ox.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    oy.sort_by(|&i, &j| y[i].total_cmp(&y[j]));
    assert_eq!(ox, oy);
}

#[test]
fn evaluate_collects_all() {
    let set = ScoredSet {
        rows: vec![
            ScoredGraph { graph_id: 0, score: 0.1, is_ood: false, predicted_class: Some(1) },
            ScoredGraph { graph_id: 1, score: 0.2, is_ood: false, predicted_class: Some(0) },
            ScoredGraph { graph_id: 2, score: 0.9, is_ood: true, predicted_class: Some(0) },
        ],
    };
    let m = evaluate(&set, &[1, 1], &[0.1, 0.2]).unwrap();
    assert_eq!((m.auroc, m.aupr, m.fpr95, m.id_acc, m.lambda), (1.0, 1.0, 0.0, 0.5, 0.2));
    assert_eq!("literal-max".parse::<ScoreMode>().unwrap(), ScoreMode::LiteralMax);
}

proptest! {
    #[test]
    fn auroc_complement(scores in proptest::collection::vec(-1e3f64..1e3, 2..50), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
        let mut ood: Vec<bool> = scores.iter().map(|_| rng.gen_bool(0.5)).collect();
        ood[0] = true;
        ood[1] = false;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = auroc(&scores, &ood).unwrap() + auroc(&neg, &ood).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
