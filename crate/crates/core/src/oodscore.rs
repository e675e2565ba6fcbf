//! Class-conditional Gaussian statistics, Mahalanobis OOD scores and the
//! evaluation metrics. Higher scores mean "more likely out of distribution".

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-class distances are combined into one score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Distance to the closest class centroid.
    #[default]
    Nearest,
    /// Distance to the farthest class centroid.
    LiteralMax,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Nearest => "nearest",
            ScoreMode::LiteralMax => "literal-max",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(ScoreMode::Nearest),
            "literal-max" => Ok(ScoreMode::LiteralMax),
            other => Err(Error::Config(format!("unknown score mode `{other}`"))),
        }
    }
}

/// `concat(h_graph, h_super) / ||concat||`.
pub fn embed_for_scoring(h_graph: &[f64], h_super: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut z = h_graph.to_vec();
    if let Some(s) = h_super {
        z.extend_from_slice(s);
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("embed_for_scoring"));
    }
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(z.into_iter().map(|x| x / norm).collect())
}

/// Class centroids and a covariance matrix shared by all classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub width: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Row-major `width x width` scatter matrix.
    pub covariance: Vec<f64>,
    /// Row-major inverse of `covariance + ridge * I`.
    pub precision: Vec<f64>,
    pub ridge: f64,
}

impl GaussianStats {
    pub fn num_classes(&self) -> usize {
        self.centroids.len()
    }

    /// `(z - mu_c)^T P (z - mu_c)`.
    pub fn quadratic(&self, z: &[f64], class: usize) -> f64 {
        let w = self.width;
        let d: Vec<f64> = z.iter().zip(&self.centroids[class]).map(|(a, b)| a - b).collect();
        let mut total = 0.0;
        for i in 0..w {
            let row = &self.precision[i * w..(i + 1) * w];
            total += d[i] * row.iter().zip(&d).map(|(p, x)| p * x).sum::<f64>();
        }
        total
    }
}

/// Fits centroids and the tied covariance of `zs` grouped by `labels`.
///
/// The inverse is taken of `cov + eps I` with `eps = 1e-6 * trace / width`,
/// never below `1e-10`.
pub fn estimate_gaussian(zs: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<GaussianStats> {
    if zs.len() != labels.len() {
        return Err(Error::Shape {
            op: "estimate_gaussian",
            detail: format!("{} samples, {} labels", zs.len(), labels.len()),
        });
    }
    let width = zs.first().map_or(0, Vec::len);
    if zs.iter().any(|z| z.len() != width) {
        return Err(Error::Shape {
            op: "estimate_gaussian",
            detail: "ragged embeddings".into(),
        });
    }
    let mut sums = vec![vec![0.0; width]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (z, &y) in zs.iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: num_classes,
            });
        }
        counts[y] += 1;
        for (s, x) in sums[y].iter_mut().zip(z) {
            *s += x;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(c));
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|x| x / n as f64).collect())
        .collect();

    let mut cov = DMatrix::<f64>::zeros(width, width);
    for (z, &y) in zs.iter().zip(labels) {
        let d = nalgebra::DVector::from_iterator(width, z.iter().zip(&centroids[y]).map(|(a, b)| a - b));
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= zs.len() as f64;
    let ridge = (1e-6 * cov.trace() / width.max(1) as f64).max(1e-10);
    let mut reg = cov.clone();
    for i in 0..width {
        reg[(i, i)] += ridge;
    }
    let precision = reg.cholesky().ok_or(Error::Singular)?.inverse();
    if precision.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(GaussianStats {
        width,
        centroids,
        covariance: row_major(&cov),
        precision: row_major(&precision),
        ridge,
    })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn mahalanobis_score(z: &[f64], stats: &GaussianStats, mode: ScoreMode) -> f64 {
    let d = (0..stats.num_classes()).map(|c| stats.quadratic(z, c));
    match mode {
        ScoreMode::Nearest => d.fold(f64::INFINITY, f64::min),
        ScoreMode::LiteralMax => d.fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Smallest `k` with `k / n >= target`.
fn order_index(n: usize, target: f64) -> usize {
    (1..=n).find(|&k| k as f64 / n as f64 >= target).unwrap_or(n)
}

/// Smallest `lambda` such that at least `target` of the ID scores are `<= lambda`.
pub fn threshold_at_tpr(id_scores: &[f64], target: f64) -> Result<f64> {
    if id_scores.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut s = id_scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s[order_index(s.len(), target) - 1])
}

fn split_scores(scores: &[f64], is_ood: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != is_ood.len() {
        return Err(Error::Shape {
            op: "metric",
            detail: format!("{} scores, {} flags", scores.len(), is_ood.len()),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("metric"));
    }
    let ood: Vec<f64> = scores.iter().zip(is_ood).filter(|(_, &o)| o).map(|(&s, _)| s).collect();
    let id: Vec<f64> = scores.iter().zip(is_ood).filter(|(_, &o)| !o).map(|(&s, _)| s).collect();
    if ood.is_empty() || id.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok((id, ood))
}

/// Area under the ROC curve from the rank-sum statistic, ties sharing the
/// average rank.
pub fn auroc(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    let (id, ood) = split_scores(scores, is_ood)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank, so tied averages stay integral
    let mut rank2 = vec![0u64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            rank2[k] = avg2;
        }
        i = j + 1;
    }
    let (n1, n0) = (ood.len() as u64, id.len() as u64);
    let r2: u64 = (0..scores.len()).filter(|&k| is_ood[k]).map(|k| rank2[k]).sum();
    let u2 = r2 - n1 * (n1 + 1);
    Ok(u2 as f64 / (2 * n1 * n0) as f64)
}

/// Average precision with OOD as the positive class, one step per distinct
/// threshold.
pub fn aupr(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    let (_, ood) = split_scores(scores, is_ood)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = ood.len() as f64;
    let (mut tp, mut fp, mut prev_recall, mut ap) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if is_ood[order[j]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        let recall = tp / positives;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Largest threshold `t` at which flagging `S >= t` catches at least 95% of
/// the OOD graphs.
pub fn fpr95_threshold(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    let (_, mut ood) = split_scores(scores, is_ood)?;
    ood.sort_by(|a, b| b.total_cmp(a));
    Ok(ood[order_index(ood.len(), 0.95) - 1])
}

/// Fraction of ID graphs flagged at [`fpr95_threshold`].
pub fn fpr95(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    let t = fpr95_threshold(scores, is_ood)?;
    let (id, _) = split_scores(scores, is_ood)?;
    Ok(id.iter().filter(|&&s| s >= t).count() as f64 / id.len() as f64)
}

pub fn id_accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::Shape {
            op: "id_accuracy",
            detail: format!("{} predictions, {} labels", predicted.len(), labels.len()),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// One scored test graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredGraph {
    pub graph_id: usize,
    pub score: f64,
    pub is_ood: bool,
    pub predicted_class: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub rows: Vec<ScoredGraph>,
}

impl ScoredSet {
    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.is_ood).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
    pub id_acc: f64,
    pub lambda: f64,
}

/// All metrics for a scored test set. `id_labels` pairs with the ID rows in
/// order; `lambda` comes from `threshold_at_tpr` over `reference_id_scores`
/// (validation scores, typically).
pub fn evaluate(set: &ScoredSet, id_labels: &[usize], reference_id_scores: &[f64]) -> Result<Metrics> {
    let (scores, flags) = (set.scores(), set.flags());
    let predicted: Vec<usize> = set
        .rows
        .iter()
        .filter(|r| !r.is_ood)
        .map(|r| r.predicted_class.unwrap_or(usize::MAX))
        .collect();
    Ok(Metrics {
        auroc: auroc(&scores, &flags)?,
        aupr: aupr(&scores, &flags)?,
        fpr95: fpr95(&scores, &flags)?,
        id_acc: id_accuracy(&predicted, id_labels)?,
        lambda: threshold_at_tpr(reference_id_scores, 0.95)?,
    })
}

#[cfg(test)]
mod tests;
