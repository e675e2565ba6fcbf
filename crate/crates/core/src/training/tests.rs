use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::grad_check;
use crate::substructure::detect_substructures_modularity;

fn unit_rows(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Tensor {
    let mut t = Tensor::uniform(b, d, 1.0, rng);
    for r in 0..b {
        let n = t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        t.row_mut(r).iter_mut().for_each(|x| *x /= n);
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The contrastive objective evaluated term by term.
fn ntxent_loop(u0: &Tensor, u1: &Tensor, tau: f64) -> f64 {
    let b = u0.rows();
    let view = |a: usize, i: usize| if a == 0 { u0.row(i) } else { u1.row(i) };
    let mut total = 0.0;
    for i in 0..b {
        for a in 0..2 {
            let num = (dot(view(a, i), view(1 - a, i)) / tau).exp();
            let mut den = 0.0;
            for j in 0..b {
                if j == i {
                    continue;
                }
                for k in 0..2 {
                    den += (dot(view(a, i), view(1 - k, j)) / tau).exp();
                }
            }
            total += -(num / den).ln();
        }
    }
    total / (2 * b) as f64
}

fn eval_ntxent(u0: &Tensor, u1: &Tensor, tau: f64) -> crate::Result<f64> {
    let mut tape = Tape::new();
    let (a, b) = (tape.leaf(u0.clone()), tape.leaf(u1.clone()));
    let l = ntxent(&mut tape, a, b, tau)?;
    Ok(tape.value(l).item())
}

#[test]
fn ntxent_identical_rows() {
    for b in [2usize, 4, 8, 128] {
        let u = Tensor::from_vec(b, 3, [0.6, 0.0, 0.8].repeat(b)).unwrap();
        let l = eval_ntxent(&u, &u, 0.5).unwrap();
        assert!((l - (2.0 * (b as f64 - 1.0)).ln()).abs() < 1e-9, "B={b}: {l}");
    }
}

#[test]
fn ntxent_matches_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let b = rng.gen_range(2..10);
        let d = rng.gen_range(1..6);
        let tau = rng.gen_range(0.1..2.0);
        let (u0, u1) = (unit_rows(&mut rng, b, d), unit_rows(&mut rng, b, d));
        let got = eval_ntxent(&u0, &u1, tau).unwrap();
        assert!((got - ntxent_loop(&u0, &u1, tau)).abs() < 1e-10);
    }
}

#[test]
fn ntxent_row_permutation_and_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (u0, u1) = (unit_rows(&mut rng, 5, 4), unit_rows(&mut rng, 5, 4));
    let perm = [3, 0, 4, 1, 2];
    let shuffle = |t: &Tensor| {
        let mut o = t.clone();
        for (r, &p) in perm.iter().enumerate() {
            o.row_mut(r).copy_from_slice(t.row(p));
        }
        o
    };
    let a = eval_ntxent(&u0, &u1, 0.5).unwrap();
    let b = eval_ntxent(&shuffle(&u0), &shuffle(&u1), 0.5).unwrap();
    assert!((a - b).abs() < 1e-12);
    let one = unit_rows(&mut rng, 1, 4);
    assert!(matches!(eval_ntxent(&one, &one, 0.5), Err(Error::BatchTooSmall(1))));
}

#[test]
fn cross_entropy_examples() {
    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::zeros(3, 2));
    let l = cross_entropy(&mut tape, z, &[0, 1, 1]).unwrap();
    assert!((tape.value(l).item() - 2f64.ln()).abs() < 1e-15);

    let big = tape.leaf(Tensor::from_vec(1, 3, vec![40.0, 0.0, 0.0]).unwrap());
    let l = cross_entropy(&mut tape, big, &[0]).unwrap();
    assert!(tape.value(l).item() < 1e-6);
    assert!(cross_entropy(&mut tape, big, &[3]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = Tensor::uniform(6, 4, 3.0, &mut rng);
    let labels = [0, 3, 2, 1, 1, 0];
    let x = tape.leaf(logits.clone());
    let l = cross_entropy(&mut tape, x, &labels).unwrap();
    let mut brute = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let z: f64 = logits.row(i).iter().map(|v| v.exp()).sum();
        for c in 0..4 {
            if c == y {
                brute -= (logits.get(i, c).exp() / z).ln();
            }
        }
    }
    assert!((tape.value(l).item() - brute / 6.0).abs() < 1e-12);
}

#[test]
fn combined_is_linear_in_alpha() {
    let mut tape = Tape::new();
    let ce = tape.leaf(Tensor::scalar(0.7));
    let cl = tape.leaf(Tensor::scalar(2.5));
    for alpha in [0.0, 0.1, 1.0] {
        let l = combined_loss(&mut tape, ce, cl, alpha).unwrap();
        assert!((tape.value(l).item() - (0.7 + alpha * 2.5)).abs() < 1e-15);
    }
}

#[test]
fn batches_fold_single_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let idx: Vec<usize> = (0..9).collect();
    let b = make_batches(&idx, 4, &mut rng).unwrap();
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    let b = make_batches(&idx[..6], 4, &mut rng).unwrap();
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 2]);
    let mut all: Vec<usize> = make_batches(&idx, 2, &mut rng).unwrap().concat();
    all.sort_unstable();
    assert_eq!(all, idx);
    assert!(make_batches(&[3], 4, &mut rng).is_err());
}

/// Two classes of motif chains with constant node features.
fn toy(per_class: usize, seed: u64) -> Vec<Prepared> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..2 * per_class {
        let class = i % 2;
        let size = if class == 0 { 3 } else { 5 };
        let motifs = rng.gen_range(2..5);
        let mut edges = Vec::new();
        for m in 0..motifs {
            let base = m * size;
            for k in 0..size {
                edges.push((base + k, base + (k + 1) % size));
            }
            if m > 0 {
                edges.push((base - 1, base + rng.gen_range(0..size)));
            }
        }
        let n = motifs * size;
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        let g = Graph::from_edges(n, edges).unwrap().with_features(1, vec![1.0; n]).unwrap().with_label(class);
        let p = detect_substructures_modularity(&g);
        out.push(Prepared::new(g, p).unwrap());
    }
    out
}

fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        hidden: 8,
        ..EncoderConfig::new(1, 2)
    }
}

#[test]
fn zero_pretrain_epochs_keep_params() {
    let data = toy(4, 1);
    let idx: Vec<usize> = (0..8).collect();
    let mut model = Model::new(small_encoder(), 2).unwrap();
    let before = model.params.clone();
    let cfg = TrainConfig { pretrain_epochs: 0, ..TrainConfig::default() };
    let (rec, _) = pretrain_stage(&mut model, &data, &idx, &cfg).unwrap();
    assert!(rec.is_empty());
    assert_eq!(model.params, before);
}

fn cl_on_views(model: &Model, views: &(Vec<Augmented>, Vec<Augmented>), tau: f64) -> f64 {
    let (a, b) = (view_items(&views.0), view_items(&views.1));
    let mut tape = Tape::new();
    let pv = model.params.record(&mut tape);
    let l = batch_objective(&mut tape, &pv, &model.config, None, Some((&a, &b)), 0.1, tau).unwrap();
    tape.value(l.total).item()
}

#[test]
fn one_pretrain_epoch_lowers_contrastive_loss() {
    let data = toy(2, 3);
    let idx: Vec<usize> = (0..4).collect();
    let mut lowered = 0;
    for seed in 0..10 {
        let cfg = TrainConfig { pretrain_epochs: 1, seed, ..TrainConfig::default() };
        let mut model = Model::new(small_encoder(), seed).unwrap();
        let pool = pool_for(&data, &idx, 2);
        let mut rng = epoch_rng(seed, Stage::Pretrain, 0);
        let batch = make_batches(&idx, cfg.batch_size, &mut rng).unwrap().remove(0);
        let views = make_views(&data, &batch, &pool, cfg.aug_ratio, seed, Stage::Pretrain, 0).unwrap();
        let before = cl_on_views(&model, &views, cfg.tau);
        pretrain_stage(&mut model, &data, &idx, &cfg).unwrap();
        if cl_on_views(&model, &views, cfg.tau) < before {
            lowered += 1;
        }
    }
    assert!(lowered >= 9, "{lowered}/10");
}

#[test]
fn training_is_deterministic() {
    let data = toy(4, 5);
    let (train_idx, val) = ((0..6).collect::<Vec<_>>(), vec![6, 7]);
    let cfg = TrainConfig { batch_size: 4, pretrain_epochs: 2, finetune_epochs: 3, seed: 9, ..TrainConfig::default() };
    let a = train(&data, &train_idx, &val, small_encoder(), &cfg).unwrap();
    let b = train(&data, &train_idx, &val, small_encoder(), &cfg).unwrap();
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.stats, b.stats);
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.report.epochs.len(), 5);
    assert!(a.report.epochs.iter().all(|e| e.total.is_finite()));
}

#[test]
fn zero_alpha_is_plain_classification() {
    let data = toy(3, 6);
    let idx: Vec<usize> = (0..6).collect();
    let cfg = TrainConfig { alpha: 0.0, finetune_epochs: 2, ..TrainConfig::default() };
    let mut model = Model::new(small_encoder(), 0).unwrap();
    let (rec, _, fallbacks) = finetune_stage(&mut model, &data, &idx, &[], &cfg).unwrap();
    assert!(rec.iter().all(|r| r.cl.is_none() && Some(r.total) == r.ce));
    assert_eq!(fallbacks, 0);
}

#[test]
fn best_validation_checkpoint_is_restored() {
    let data = toy(6, 7);
    let (train_idx, val): (Vec<usize>, Vec<usize>) = ((0..8).collect(), (8..12).collect());
    let cfg = TrainConfig { batch_size: 4, finetune_epochs: 6, lr_finetune: 0.05, ..TrainConfig::default() };
    let mut model = Model::new(small_encoder(), 1).unwrap();
    let (rec, best, _) = finetune_stage(&mut model, &data, &train_idx, &val, &cfg).unwrap();
    let (epoch, acc) = best.unwrap();
    let top = rec.iter().filter_map(|r| r.val_acc).fold(0.0, f64::max);
    assert_eq!(acc, top);
    assert_eq!(rec[epoch].val_acc, Some(acc));
    assert!(rec[epoch + 1..].iter().all(|r| r.val_acc.unwrap() < acc));
    assert_eq!(accuracy(&model, &data, &val).unwrap(), acc);
}

#[test]
fn full_objective_gradient() {
    let data = toy(1, 11);
    let config = small_encoder();
    let model = Model::new(config.clone(), 4).unwrap();
    let pool = pool_for(&data, &[0, 1], 2);
    let views = make_views(&data, &[0, 1], &pool, 0.3, 4, Stage::Finetune, 0).unwrap();
    let originals: Vec<EncodeItem<'_>> = data.iter().map(Prepared::item).collect();
    let labels = [0, 1];
    let (a, b) = (view_items(&views.0), view_items(&views.1));
    let err = grad_check(
        |tape, vars| {
            let pv = ParamVars::from_vars(&model.params, vars.to_vec());
            let l = batch_objective(tape, &pv, &config, Some((&originals, &labels)), Some((&a, &b)), 0.1, 0.5)?;
            Ok(l.total)
        },
        model.params.tensors(),
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn scores_and_stats_have_expected_width() {
    let data = toy(4, 13);
    let idx: Vec<usize> = (0..8).collect();
    let cfg = TrainConfig { batch_size: 8, pretrain_epochs: 1, finetune_epochs: 1, ..TrainConfig::default() };
    let t = train(&data, &idx, &[], small_encoder(), &cfg).unwrap();
    assert_eq!(t.stats.width, small_encoder().score_width());
    assert_eq!(t.report.best_epoch, None);
    let items: Vec<EncodeItem<'_>> = data.iter().map(Prepared::item).collect();
    let scores = score_graphs(&t.model, &t.stats, &items, ScoreMode::Nearest).unwrap();
    assert!(scores.iter().all(|(s, c)| s.is_finite() && *c < 2));
}
