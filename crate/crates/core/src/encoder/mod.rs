//! Two-level graph encoder.
//!
//! A node-level GIN produces per-layer node representations whose
//! concatenation `h_v` is pooled per substructure with a DeepSet. The pooled
//! vectors seed a second GIN over the super graph; concatenating its layers
//! and summing over super nodes gives the super-graph representation used
//! for classification. The node-level sum readout `h_G` is kept alongside
//! for OOD scoring.

mod forward;
mod params;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{load_checkpoint, save_checkpoint, Tape};
use crate::error::Result;

pub use forward::{
    classify, deepset_pool, forward, gin_node_forward, gin_super_forward, node_multiscale, node_readout, project,
    super_readout, EncodeBatch, EncodeItem, Forward, ParamVars,
};
pub use params::{EncoderConfig, ModelParams};

/// Values of one graph's encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding {
    /// Node-level readout, width `L1 * d`.
    pub h_graph: Vec<f64>,
    /// Super-graph readout, width `(L2 + 1) * d`; `None` without the branch.
    pub h_super: Option<Vec<f64>>,
    /// Concatenated layer representations of each super node.
    pub super_nodes: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl GraphEmbedding {
    /// `h_G` followed by the super-graph readout (when present).
    pub fn concat(&self) -> Vec<f64> {
        let mut z = self.h_graph.clone();
        if let Some(s) = &self.h_super {
            z.extend_from_slice(s);
        }
        z
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.logits)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Encoder configuration plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: EncoderConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Encodes a batch of graphs without recording gradients.
    pub fn embed(&self, items: &[EncodeItem<'_>]) -> Result<Vec<GraphEmbedding>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let batch = EncodeBatch::new(items)?;
        let mut tape = Tape::new();
        let pv = self.params.record(&mut tape);
        let f = forward(&mut tape, &pv, &batch, &self.config)?;
        let logits = classify(&mut tape, &pv, f.head_input)?;

        let h_graph = tape.value(f.h_graph);
        let h_super = f.h_super.map(|v| tape.value(v).clone());
        let super_nodes = f.h_super_nodes.map(|v| tape.value(v).clone());
        let logits = tape.value(logits);
        Ok((0..items.len())
            .map(|i| GraphEmbedding {
                h_graph: h_graph.row(i).to_vec(),
                h_super: h_super.as_ref().map(|t| t.row(i).to_vec()),
                super_nodes: super_nodes
                    .as_ref()
                    .map(|t| {
                        (0..t.rows())
                            .filter(|&j| batch.super_owner[j] == i)
                            .map(|j| t.row(j).to_vec())
                            .collect()
                    })
                    .unwrap_or_default(),
                logits: logits.row(i).to_vec(),
            })
            .collect())
    }

    /// Encodes in chunks of `chunk` graphs to bound tape size.
    pub fn embed_chunked(&self, items: &[EncodeItem<'_>], chunk: usize) -> Result<Vec<GraphEmbedding>> {
        let mut out = Vec::with_capacity(items.len());
        for c in items.chunks(chunk.max(1)) {
            out.extend(self.embed(c)?);
        }
        Ok(out)
    }

    /// Encodes a single graph.
    pub fn encode(&self, item: EncodeItem<'_>) -> Result<GraphEmbedding> {
        Ok(self.embed(&[item])?.remove(0))
    }

    /// Writes parameters (binary checkpoint) and `config` (JSON sidecar).
    pub fn save(&self, checkpoint: &Path, config_json: &Path) -> Result<()> {
        save_checkpoint(checkpoint, &self.params.named())?;
        std::fs::write(config_json, serde_json::to_vec_pretty(&self.config)?)?;
        Ok(())
    }

    pub fn load(checkpoint: &Path, config_json: &Path) -> Result<Self> {
        let config: EncoderConfig = serde_json::from_slice(&std::fs::read(config_json)?)?;
        let params = ModelParams::from_named(&config, load_checkpoint(checkpoint)?)?;
        Ok(Self { config, params })
    }
}
