//! End-to-end experiment: split, train on ID graphs, score a balanced
//! ID/OOD test set and compute the metrics.

use serde::{Deserialize, Serialize};

use crate::encoder::{EncodeItem, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};
use crate::oodscore::{evaluate, Metrics, ScoreMode, ScoredGraph, ScoredSet};
use crate::split::{assemble_test_set, split_dataset, Splits};
use crate::substructure::{novelty_rate, Detector, Partition};
use crate::training::{prepare, score_graphs, train, Prepared, TrainConfig, Trained};

/// Train/validation/test ratios used for the ID dataset.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub detector: Detector,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub score_mode: ScoreMode,
    /// Seed for the ID split and the OOD test sample.
    pub split_seed: u64,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub splits: Splits,
    pub trained: Trained,
    pub scored: ScoredSet,
    pub metrics: Metrics,
    /// Share of OOD test graphs with a substructure unseen among all ID graphs.
    pub novelty_rate: f64,
}

fn labels(data: &[Prepared], idx: &[usize]) -> Result<Vec<usize>> {
    idx.iter().map(|&i| data[i].label()).collect()
}

/// Scores the test graphs of `splits`; rows are ID graphs first, then OOD.
pub fn score_test_set(
    trained: &Trained,
    id: &[Prepared],
    ood: &[Prepared],
    splits: &Splits,
    mode: ScoreMode,
) -> Result<ScoredSet> {
    let mut rows = Vec::new();
    for (data, idx, is_ood) in [(id, &splits.test_id, false), (ood, &splits.test_ood, true)] {
        let items: Vec<EncodeItem<'_>> = idx.iter().map(|&i| data[i].item()).collect();
        let scored = score_graphs(&trained.model, &trained.stats, &items, mode)?;
        rows.extend(idx.iter().zip(scored).map(|(&graph_id, (score, class))| ScoredGraph {
            graph_id,
            score,
            is_ood,
            predicted_class: Some(class),
        }));
    }
    Ok(ScoredSet { rows })
}

/// Metrics of a scored test set; the threshold comes from validation scores.
pub fn metrics_for(trained: &Trained, id: &[Prepared], splits: &Splits, scored: &ScoredSet, mode: ScoreMode) -> Result<Metrics> {
    let val_items: Vec<EncodeItem<'_>> = splits.val.iter().map(|&i| id[i].item()).collect();
    let reference: Vec<f64> = if val_items.is_empty() {
        scored.rows.iter().filter(|r| !r.is_ood).map(|r| r.score).collect()
    } else {
        score_graphs(&trained.model, &trained.stats, &val_items, mode)?
            .into_iter()
            .map(|(s, _)| s)
            .collect()
    };
    evaluate(scored, &labels(id, &splits.test_id)?, &reference)
}

/// Novelty of the OOD test graphs against every ID graph.
pub fn test_novelty(id: &[Prepared], ood: &[Prepared], splits: &Splits) -> Result<f64> {
    let a: Vec<(&Graph, &Partition)> = id.iter().map(|p| (&p.graph, &p.partition)).collect();
    let b: Vec<(&Graph, &Partition)> = splits.test_ood.iter().map(|&i| (&ood[i].graph, &ood[i].partition)).collect();
    novelty_rate(&a, &b)
}

pub fn run_experiment(id: &GraphDataset, ood: &GraphDataset, config: &ExperimentConfig) -> Result<Experiment> {
    if id.feature_width != ood.feature_width {
        return Err(Error::FeatureWidth {
            expected: id.feature_width,
            found: ood.feature_width,
        });
    }
    let id_p = prepare(id, config.detector)?;
    let ood_p = prepare(ood, config.detector)?;
    let splits = split_dataset(id.len(), SPLIT_RATIOS, config.split_seed)?;
    let splits = assemble_test_set(splits, ood.len(), config.split_seed.wrapping_add(1))?;
    let trained = train(&id_p, &splits.train, &splits.val, config.encoder.clone(), &config.train)?;
    let scored = score_test_set(&trained, &id_p, &ood_p, &splits, config.score_mode)?;
    let metrics = metrics_for(&trained, &id_p, &splits, &scored, config.score_mode)?;
    let novelty_rate = test_novelty(&id_p, &ood_p, &splits)?;
    Ok(Experiment {
        splits,
        trained,
        scored,
        metrics,
        novelty_rate,
    })
}
