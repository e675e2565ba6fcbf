use std::sync::Arc;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{disjoint_union_batch, Graph};
use crate::substructure::{Partition, SuperGraph};

use super::params::{GinSlots, Layout, MlpSlots};
use super::{EncoderConfig, ModelParams};

/// One graph together with its substructure partition and super graph.
pub type EncodeItem<'a> = (&'a Graph, &'a Partition, &'a SuperGraph);

/// Index structures for encoding several graphs in one pass.
///
/// Nodes of all graphs are stacked in order, and so are their super nodes;
/// substructure ids are made global by offsetting per graph.
#[derive(Clone, Debug)]
pub struct EncodeBatch {
    pub graph_count: usize,
    pub node_count: usize,
    pub features: Tensor,
    pub node_src: Arc<[usize]>,
    pub node_dst: Arc<[usize]>,
    pub node_owner: Arc<[usize]>,
    /// Global super node of each node.
    pub node_substructure: Arc<[usize]>,
    pub super_count: usize,
    pub super_src: Arc<[usize]>,
    pub super_dst: Arc<[usize]>,
    pub super_owner: Arc<[usize]>,
}

impl EncodeBatch {
    pub fn new(items: &[EncodeItem<'_>]) -> Result<Self> {
        let graphs: Vec<&Graph> = items.iter().map(|(g, _, _)| *g).collect();
        let batch = disjoint_union_batch(&graphs)?;
        let (src, dst) = batch.message_pairs();
        let mut node_sub = Vec::with_capacity(batch.node_count);
        let mut super_src = Vec::new();
        let mut super_dst = Vec::new();
        let mut super_owner = Vec::new();
        let mut super_off = 0;
        for (gi, (g, p, s)) in items.iter().enumerate() {
            if p.node_count() != g.node_count() || s.node_count() != p.len() {
                return Err(Error::InvalidGraph(format!(
                    "graph {gi}: partition/super graph do not match the graph"
                )));
            }
            let assign = p.assignment();
            if assign.contains(&usize::MAX) {
                return Err(Error::InvalidGraph(format!("graph {gi}: partition leaves nodes uncovered")));
            }
            node_sub.extend(assign.iter().map(|a| a + super_off));
            let (ss, sd) = s.message_pairs();
            super_src.extend(ss.iter().map(|j| j + super_off));
            super_dst.extend(sd.iter().map(|j| j + super_off));
            super_owner.extend(std::iter::repeat_n(gi, s.node_count()));
            super_off += s.node_count();
        }
        Ok(Self {
            graph_count: items.len(),
            node_count: batch.node_count,
            features: Tensor::from_vec(batch.node_count, batch.feature_width, batch.features)?,
            node_src: src.into(),
            node_dst: dst.into(),
            node_owner: batch.owner.into(),
            node_substructure: node_sub.into(),
            super_count: super_off,
            super_src: super_src.into(),
            super_dst: super_dst.into(),
            super_owner: super_owner.into(),
        })
    }
}

/// Parameters recorded as leaves of one tape.
pub struct ParamVars<'a> {
    layout: &'a Layout,
    vars: Vec<Var>,
}

impl<'a> ParamVars<'a> {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Uses already-recorded leaves, in [`ModelParams::tensors`] order.
    pub fn from_vars(params: &'a ModelParams, vars: Vec<Var>) -> Self {
        assert_eq!(vars.len(), params.tensors().len());
        Self {
            layout: &params.layout,
            vars,
        }
    }
}

impl ModelParams {
    pub fn record<'a>(&'a self, tape: &mut Tape) -> ParamVars<'a> {
        let vars = self.tensors().iter().map(|t| tape.leaf(t.clone())).collect();
        ParamVars {
            layout: &self.layout,
            vars,
        }
    }
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

/// `Linear -> ReLU -> Linear`.
fn mlp(tape: &mut Tape, pv: &ParamVars<'_>, s: MlpSlots, x: Var) -> Result<Var> {
    let h = linear(tape, x, pv.vars[s.w1], pv.vars[s.b1])?;
    let h = tape.relu(h)?;
    linear(tape, h, pv.vars[s.w2], pv.vars[s.b2])
}

/// `relu(MLP((1 + eps) h_v + sum_{u -> v} h_u))`.
fn gin_layer(
    tape: &mut Tape,
    pv: &ParamVars<'_>,
    s: GinSlots,
    h: Var,
    src: &Arc<[usize]>,
    dst: &Arc<[usize]>,
    n: usize,
) -> Result<Var> {
    let msgs = tape.gather_rows(h, src.clone())?;
    let agg = tape.segment_sum(msgs, dst.clone(), n)?;
    let eps_h = tape.scale_by(h, pv.vars[s.eps])?;
    let own = tape.add(h, eps_h)?;
    let comb = tape.add(own, agg)?;
    let out = mlp(tape, pv, s.mlp, comb)?;
    tape.relu(out)
}

/// Node-level GIN: returns `H^(1) .. H^(L1)`.
pub fn gin_node_forward(tape: &mut Tape, pv: &ParamVars<'_>, batch: &EncodeBatch) -> Result<Vec<Var>> {
    let mut h = tape.leaf(batch.features.clone());
    let mut layers = Vec::with_capacity(pv.layout.node.len());
    for &slots in &pv.layout.node {
        h = gin_layer(tape, pv, slots, h, &batch.node_src, &batch.node_dst, batch.node_count)?;
        layers.push(h);
    }
    Ok(layers)
}

/// Concatenation of the per-layer node representations (input features excluded).
pub fn node_multiscale(tape: &mut Tape, layers: &[Var]) -> Result<Var> {
    tape.concat_cols(layers)
}

/// DeepSet pooling `rho(sum_{v in g} phi(h_v))` for every substructure.
pub fn deepset_pool(
    tape: &mut Tape,
    pv: &ParamVars<'_>,
    h_nodes: Var,
    membership: &Arc<[usize]>,
    substructures: usize,
) -> Result<Var> {
    let (phi, rho) = match (pv.layout.phi, pv.layout.rho) {
        (Some(p), Some(r)) => (p, r),
        _ => return Err(Error::Config("model has no substructure branch".into())),
    };
    let mut seen = vec![false; substructures];
    for &m in membership.iter() {
        if m < substructures {
            seen[m] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidGraph("empty substructure in DeepSet pooling".into()));
    }
    let inner = mlp(tape, pv, phi, h_nodes)?;
    let pooled = tape.segment_sum(inner, membership.clone(), substructures)?;
    mlp(tape, pv, rho, pooled)
}

/// Super-graph GIN over the batch's super nodes: returns `H^(0) .. H^(L2)`,
/// with `H^(0) = initial`.
pub fn gin_super_forward(
    tape: &mut Tape,
    pv: &ParamVars<'_>,
    batch: &EncodeBatch,
    initial: Var,
) -> Result<Vec<Var>> {
    let mut layers = vec![initial];
    let mut h = initial;
    for &slots in &pv.layout.sup {
        h = gin_layer(tape, pv, slots, h, &batch.super_src, &batch.super_dst, batch.super_count)?;
        layers.push(h);
    }
    Ok(layers)
}

/// Sum over each graph's super nodes of the concatenated layer representations.
/// Returns `(per-super-node concat, per-graph readout)`.
pub fn super_readout(
    tape: &mut Tape,
    layers: &[Var],
    owner: &Arc<[usize]>,
    graphs: usize,
) -> Result<(Var, Var)> {
    let cat = tape.concat_cols(layers)?;
    let out = tape.segment_sum(cat, owner.clone(), graphs)?;
    Ok((cat, out))
}

/// Sum over each graph's nodes.
pub fn node_readout(tape: &mut Tape, h_nodes: Var, owner: &Arc<[usize]>, graphs: usize) -> Result<Var> {
    tape.segment_sum(h_nodes, owner.clone(), graphs)
}

/// Projection head followed by row-wise L2 normalization.
pub fn project(tape: &mut Tape, pv: &ParamVars<'_>, h: Var) -> Result<Var> {
    let z = mlp(tape, pv, pv.layout.proj, h)?;
    tape.l2_normalize_rows(z)
}

/// Linear classifier producing logits.
pub fn classify(tape: &mut Tape, pv: &ParamVars<'_>, h: Var) -> Result<Var> {
    linear(tape, h, pv.vars[pv.layout.cls_w], pv.vars[pv.layout.cls_b])
}

/// Every intermediate of one encoder pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub node_layers: Vec<Var>,
    /// Multi-scale node representations `h_v`.
    pub h_nodes: Var,
    /// Node-level readout `h_G` per graph.
    pub h_graph: Var,
    /// `H^(0) .. H^(L2)` over super nodes; empty without the substructure branch.
    pub super_layers: Vec<Var>,
    pub h_super_nodes: Option<Var>,
    /// Super-graph readout per graph.
    pub h_super: Option<Var>,
    /// Representation read by the classifier and projection head.
    pub head_input: Var,
}

pub fn forward(tape: &mut Tape, pv: &ParamVars<'_>, batch: &EncodeBatch, config: &EncoderConfig) -> Result<Forward> {
    let node_layers = gin_node_forward(tape, pv, batch)?;
    let h_nodes = node_multiscale(tape, &node_layers)?;
    let h_graph = node_readout(tape, h_nodes, &batch.node_owner, batch.graph_count)?;
    if !config.substructure_branch {
        return Ok(Forward {
            node_layers,
            h_nodes,
            h_graph,
            super_layers: Vec::new(),
            h_super_nodes: None,
            h_super: None,
            head_input: h_graph,
        });
    }
    let h0 = deepset_pool(tape, pv, h_nodes, &batch.node_substructure, batch.super_count)?;
    let super_layers = gin_super_forward(tape, pv, batch, h0)?;
    let (cat, h_super) = super_readout(tape, &super_layers, &batch.super_owner, batch.graph_count)?;
    Ok(Forward {
        node_layers,
        h_nodes,
        h_graph,
        super_layers,
        h_super_nodes: Some(cat),
        h_super: Some(h_super),
        head_input: h_super,
    })
}
