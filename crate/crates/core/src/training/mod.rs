//! Losses and the two-stage training procedure.
//!
//! Stage one pre-trains the encoder and projection head on the contrastive
//! loss alone. Stage two fine-tunes on cross-entropy plus the weighted
//! contrastive term and keeps the parameters with the best validation
//! accuracy. Gaussian statistics for scoring are then fitted on the training
//! embeddings.

mod loss;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{sample_view_pair, Augmented, SubstructurePool, DEFAULT_RATIO};
use crate::autodiff::{Adam, Tape, Tensor};
use crate::encoder::{forward, project, classify, EncodeBatch, EncodeItem, EncoderConfig, Model, ParamVars};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};
use crate::hash::stable_hash;
use crate::oodscore::{embed_for_scoring, estimate_gaussian, id_accuracy, mahalanobis_score, GaussianStats, ScoreMode};
use crate::substructure::{build_super_graph, Detector, Partition, PartitionCache, SuperGraph};

pub use loss::{combined_loss, cross_entropy, ntxent};

/// A graph with its substructure partition and super graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub graph: Graph,
    pub partition: Partition,
    pub super_graph: SuperGraph,
}

impl Prepared {
    pub fn new(graph: Graph, partition: Partition) -> Result<Self> {
        let super_graph = build_super_graph(&graph, &partition)?;
        Ok(Self {
            graph,
            partition,
            super_graph,
        })
    }

    pub fn item(&self) -> EncodeItem<'_> {
        (&self.graph, &self.partition, &self.super_graph)
    }

    pub fn label(&self) -> Result<usize> {
        self.graph
            .label()
            .ok_or_else(|| Error::InvalidGraph("graph has no class label".into()))
    }
}

impl From<Augmented> for Prepared {
    fn from(a: Augmented) -> Self {
        Self {
            graph: a.graph,
            partition: a.partition,
            super_graph: a.super_graph,
        }
    }
}

/// Runs `detector` over every graph of `dataset`.
pub fn prepare(dataset: &GraphDataset, detector: Detector) -> Result<Vec<Prepared>> {
    dataset
        .graphs
        .iter()
        .map(|g| Prepared::new(g.clone(), detector.detect(g)))
        .collect()
}

/// Pairs graphs with previously computed partitions.
pub fn prepare_from_cache(dataset: &GraphDataset, cache: &PartitionCache) -> Result<Vec<Prepared>> {
    if cache.partitions.len() != dataset.len() || cache.super_graphs.len() != dataset.len() {
        return Err(Error::Config(format!(
            "partition cache holds {} entries for {} graphs",
            cache.partitions.len(),
            dataset.len()
        )));
    }
    Ok(dataset
        .graphs
        .iter()
        .zip(&cache.partitions)
        .zip(&cache.super_graphs)
        .map(|((g, p), s)| Prepared {
            graph: g.clone(),
            partition: p.clone(),
            super_graph: s.clone(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    /// Weight of the contrastive term during fine-tuning.
    pub alpha: f64,
    /// Contrastive temperature.
    pub tau: f64,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    /// Fraction of super nodes touched by each augmentation.
    pub aug_ratio: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            pretrain_epochs: 100,
            finetune_epochs: 500,
            alpha: 0.1,
            tau: 0.5,
            lr_pretrain: 0.001,
            lr_finetune: 0.001,
            aug_ratio: DEFAULT_RATIO,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and non-negative");
        }
        for (name, v) in [("tau", self.tau), ("lr_pretrain", self.lr_pretrain), ("lr_finetune", self.lr_finetune)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.aug_ratio > 0.0 && self.aug_ratio < 1.0) {
            return bad("aug_ratio must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Pretrain => 1,
            Stage::Finetune => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    pub epoch: usize,
    pub ce: Option<f64>,
    pub cl: Option<f64>,
    pub total: f64,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Fine-tuning epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_val_acc: Option<f64>,
    pub parameter_count: usize,
    /// SS augmentations that fell back to the identity.
    pub pool_fallbacks: usize,
    /// Excluded from serialization so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Splits shuffled indices into batches; a trailing batch of one graph is
/// merged into the previous batch.
pub fn make_batches(indices: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    if indices.len() < 2 {
        return Err(Error::BatchTooSmall(indices.len()));
    }
    let mut order = indices.to_vec();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(2)).map(<[usize]>::to_vec).collect();
    if let Some(tail) = batches.pop_if(|b| b.len() < 2) {
        batches.last_mut().expect("at least two graphs").extend(tail);
    }
    Ok(batches)
}

fn epoch_rng(seed: u64, stage: Stage, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[seed, stage.tag(), epoch as u64, 0]))
}

/// Augmented view pairs for `batch`, each graph drawing from its own stream
/// derived from `(seed, stage, epoch, graph index)`.
pub fn make_views(
    data: &[Prepared],
    batch: &[usize],
    pool: &SubstructurePool,
    ratio: f64,
    seed: u64,
    stage: Stage,
    epoch: usize,
) -> Result<(Vec<Augmented>, Vec<Augmented>)> {
    let mut v0 = Vec::with_capacity(batch.len());
    let mut v1 = Vec::with_capacity(batch.len());
    for &i in batch {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[seed, stage.tag(), epoch as u64, 1, i as u64]));
        let p = &data[i];
        let (a, b) = sample_view_pair(&p.graph, &p.partition, &p.super_graph, pool, ratio, &mut rng)?;
        v0.push(a);
        v1.push(b);
    }
    Ok((v0, v1))
}

fn view_items(views: &[Augmented]) -> Vec<EncodeItem<'_>> {
    views.iter().map(|a| (&a.graph, &a.partition, &a.super_graph)).collect()
}

/// Loss terms recorded for one batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchLoss {
    pub ce: Option<crate::autodiff::Var>,
    pub cl: Option<crate::autodiff::Var>,
    pub total: crate::autodiff::Var,
}

/// Records the training objective of one batch.
///
/// With only `views`, the objective is the contrastive loss; with only
/// `labeled`, cross-entropy; with both, `ce + alpha * cl`.
pub fn batch_objective(
    tape: &mut Tape,
    pv: &ParamVars<'_>,
    config: &EncoderConfig,
    labeled: Option<(&[EncodeItem<'_>], &[usize])>,
    views: Option<(&[EncodeItem<'_>], &[EncodeItem<'_>])>,
    alpha: f64,
    tau: f64,
) -> Result<BatchLoss> {
    let ce = match labeled {
        Some((items, labels)) => {
            let batch = EncodeBatch::new(items)?;
            let f = forward(tape, pv, &batch, config)?;
            let logits = classify(tape, pv, f.head_input)?;
            Some(cross_entropy(tape, logits, labels)?)
        }
        None => None,
    };
    let cl = match views {
        Some((a, b)) => {
            let ba = EncodeBatch::new(a)?;
            let bb = EncodeBatch::new(b)?;
            let fa = forward(tape, pv, &ba, config)?;
            let fb = forward(tape, pv, &bb, config)?;
            let ua = project(tape, pv, fa.head_input)?;
            let ub = project(tape, pv, fb.head_input)?;
            Some(ntxent(tape, ua, ub, tau)?)
        }
        None => None,
    };
    let total = match (ce, cl) {
        (Some(ce), Some(cl)) => combined_loss(tape, ce, cl, alpha)?,
        (Some(ce), None) => ce,
        (None, Some(cl)) => cl,
        (None, None) => return Err(Error::EmptyBatch),
    };
    Ok(BatchLoss { ce, cl, total })
}

fn labels_of(data: &[Prepared], idx: &[usize]) -> Result<Vec<usize>> {
    idx.iter().map(|&i| data[i].label()).collect()
}

pub(crate) fn pool_for(data: &[Prepared], train: &[usize], num_classes: usize) -> SubstructurePool {
    let items: Vec<(&Graph, &Partition)> = train.iter().map(|&i| (&data[i].graph, &data[i].partition)).collect();
    SubstructurePool::build(&items, num_classes)
}

/// Accuracy of the model's predictions on `idx`.
pub fn accuracy(model: &Model, data: &[Prepared], idx: &[usize]) -> Result<f64> {
    let items: Vec<EncodeItem<'_>> = idx.iter().map(|&i| data[i].item()).collect();
    let emb = model.embed_chunked(&items, 256)?;
    let predicted: Vec<usize> = emb.iter().map(|e| e.predicted_class()).collect();
    id_accuracy(&predicted, &labels_of(data, idx)?)
}

struct StepOutcome {
    ce: Option<f64>,
    cl: Option<f64>,
    total: f64,
}

#[allow(clippy::too_many_arguments)]
fn step(
    model: &mut Model,
    adam: &mut Adam,
    data: &[Prepared],
    batch: &[usize],
    pool: &SubstructurePool,
    cfg: &TrainConfig,
    stage: Stage,
    epoch: usize,
    fallbacks: &mut usize,
) -> Result<StepOutcome> {
    let want_cl = stage == Stage::Pretrain || cfg.alpha > 0.0;
    let views = if want_cl {
        let v = make_views(data, batch, pool, cfg.aug_ratio, cfg.seed, stage, epoch)?;
        *fallbacks += v.0.iter().chain(&v.1).filter(|a| a.warning.is_some()).count();
        Some(v)
    } else {
        None
    };
    let originals: Vec<EncodeItem<'_>> = batch.iter().map(|&i| data[i].item()).collect();
    let labels = if stage == Stage::Finetune {
        labels_of(data, batch)?
    } else {
        Vec::new()
    };
    let view_pair = views.as_ref().map(|(a, b)| (view_items(a), view_items(b)));

    let mut tape = Tape::new();
    let pv = model.params.record(&mut tape);
    let loss = batch_objective(
        &mut tape,
        &pv,
        &model.config,
        (stage == Stage::Finetune).then_some((&originals[..], &labels[..])),
        view_pair.as_ref().map(|(a, b)| (&a[..], &b[..])),
        cfg.alpha,
        cfg.tau,
    )?;
    let grads = tape.backward(loss.total)?;
    let g: Vec<Tensor> = pv
        .vars()
        .iter()
        .zip(model.params.tensors())
        .map(|(&v, p)| grads.get_or_zeros(v, p))
        .collect();
    let out = StepOutcome {
        ce: loss.ce.map(|v| tape.value(v).item()),
        cl: loss.cl.map(|v| tape.value(v).item()),
        total: tape.value(loss.total).item(),
    };
    drop(pv);
    adam.step(model.params.tensors_mut(), &g)?;
    if !model.params.is_finite() {
        return Err(Error::NonFinite("adam_step"));
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut Model,
    adam: &mut Adam,
    data: &[Prepared],
    train: &[usize],
    pool: &SubstructurePool,
    cfg: &TrainConfig,
    stage: Stage,
    epoch: usize,
    fallbacks: &mut usize,
) -> Result<EpochRecord> {
    let mut rng = epoch_rng(cfg.seed, stage, epoch);
    let (mut ce, mut cl, mut total) = (Vec::new(), Vec::new(), Vec::new());
    for batch in make_batches(train, cfg.batch_size, &mut rng)? {
        let o = step(model, adam, data, &batch, pool, cfg, stage, epoch, fallbacks)?;
        ce.extend(o.ce);
        cl.extend(o.cl);
        total.push(o.total);
    }
    Ok(EpochRecord {
        stage,
        epoch,
        ce: (!ce.is_empty()).then(|| mean(&ce)),
        cl: (!cl.is_empty()).then(|| mean(&cl)),
        total: mean(&total),
        val_acc: None,
    })
}

/// Contrastive pre-training for `cfg.pretrain_epochs` epochs.
/// Returns the per-epoch records and the number of SS fallbacks.
pub fn pretrain_stage(
    model: &mut Model,
    data: &[Prepared],
    train: &[usize],
    cfg: &TrainConfig,
) -> Result<(Vec<EpochRecord>, usize)> {
    cfg.validate()?;
    let pool = pool_for(data, train, model.config.num_classes);
    let mut adam = Adam::new(cfg.lr_pretrain, model.params.tensors());
    let mut fallbacks = 0;
    let records = (0..cfg.pretrain_epochs)
        .map(|epoch| run_epoch(model, &mut adam, data, train, &pool, cfg, Stage::Pretrain, epoch, &mut fallbacks))
        .collect::<Result<_>>()?;
    Ok((records, fallbacks))
}

/// Epoch records, the kept `(epoch, val accuracy)` and the number of SS
/// fallbacks.
pub type FinetuneOutcome = (Vec<EpochRecord>, Option<(usize, f64)>, usize);

/// Fine-tuning on `ce + alpha * cl`. Returns the per-epoch records and the
/// selected epoch; `model` ends up holding the parameters of the epoch with
/// the highest validation accuracy (later epochs win ties). Without a
/// validation set the final parameters are kept.
pub fn finetune_stage(
    model: &mut Model,
    data: &[Prepared],
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    let pool = pool_for(data, train, model.config.num_classes);
    let mut adam = Adam::new(cfg.lr_finetune, model.params.tensors());
    let mut fallbacks = 0;
    let mut records = Vec::with_capacity(cfg.finetune_epochs);
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;
    for epoch in 0..cfg.finetune_epochs {
        let mut rec = run_epoch(model, &mut adam, data, train, &pool, cfg, Stage::Finetune, epoch, &mut fallbacks)?;
        if !val.is_empty() {
            let acc = accuracy(model, data, val)?;
            rec.val_acc = Some(acc);
            if best.as_ref().is_none_or(|(_, b, _)| acc >= *b) {
                best = Some((epoch, acc, model.params.tensors().to_vec()));
            }
        }
        records.push(rec);
    }
    let chosen = best.map(|(epoch, acc, tensors)| {
        model.params.tensors_mut().clone_from_slice(&tensors);
        (epoch, acc)
    });
    Ok((records, chosen, fallbacks))
}

/// Scoring embeddings of `idx` under `model`.
pub fn scoring_embeddings(model: &Model, data: &[Prepared], idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    let items: Vec<EncodeItem<'_>> = idx.iter().map(|&i| data[i].item()).collect();
    model
        .embed_chunked(&items, 256)?
        .iter()
        .map(|e| embed_for_scoring(&e.h_graph, e.h_super.as_deref()))
        .collect()
}

/// Fits the Gaussian statistics on the training graphs.
pub fn fit_gaussian(model: &Model, data: &[Prepared], train: &[usize]) -> Result<GaussianStats> {
    let zs = scoring_embeddings(model, data, train)?;
    estimate_gaussian(&zs, &labels_of(data, train)?, model.config.num_classes)
}

/// Score and predicted class of each graph in `items`.
pub fn score_graphs(
    model: &Model,
    stats: &GaussianStats,
    items: &[EncodeItem<'_>],
    mode: ScoreMode,
) -> Result<Vec<(f64, usize)>> {
    model
        .embed_chunked(items, 256)?
        .iter()
        .map(|e| {
            let z = embed_for_scoring(&e.h_graph, e.h_super.as_deref())?;
            Ok((mahalanobis_score(&z, stats, mode), e.predicted_class()))
        })
        .collect()
}

/// A trained model with its scoring statistics.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub stats: GaussianStats,
    pub report: TrainReport,
}

/// Both training stages followed by Gaussian fitting, using only the graphs
/// listed in `train` and `val`.
pub fn train(
    data: &[Prepared],
    train: &[usize],
    val: &[usize],
    encoder: EncoderConfig,
    cfg: &TrainConfig,
) -> Result<Trained> {
    cfg.validate()?;
    encoder.validate()?;
    let started = Instant::now();
    let mut model = Model::new(encoder, cfg.seed)?;
    let (mut epochs, pt_fallbacks) = pretrain_stage(&mut model, data, train, cfg)?;
    let (ft, best, ft_fallbacks) = finetune_stage(&mut model, data, train, val, cfg)?;
    epochs.extend(ft);
    let stats = fit_gaussian(&model, data, train)?;
    let report = TrainReport {
        seed: cfg.seed,
        config: cfg.clone(),
        epochs,
        best_epoch: best.map(|b| b.0),
        best_val_acc: best.map(|b| b.1),
        parameter_count: model.params.parameter_count(),
        pool_fallbacks: pt_fallbacks + ft_fallbacks,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(Trained { model, stats, report })
}

#[cfg(test)]
mod tests;
