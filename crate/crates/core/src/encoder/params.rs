use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// ChaCha stream reserved for parameter initialization.
const INIT_STREAM: u64 = 0x1417;

/// Shape hyperparameters of the two-level encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// GIN layers over the original graph.
    pub node_layers: usize,
    /// GIN layers over the super graph.
    pub super_layers: usize,
    /// Hidden width `d`.
    pub hidden: usize,
    /// Node feature width `c`.
    pub input_width: usize,
    pub num_classes: usize,
    /// When false the super-graph branch is removed and the classifier and
    /// projection head read the node-level readout instead.
    pub substructure_branch: bool,
}

impl EncoderConfig {
    pub fn new(input_width: usize, num_classes: usize) -> Self {
        Self {
            node_layers: 3,
            super_layers: 2,
            hidden: 16,
            input_width,
            num_classes,
            substructure_branch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_layers == 0 || self.super_layers == 0 || self.hidden == 0 {
            return Err(Error::Config("node_layers, super_layers and hidden must be >= 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be >= 1".into()));
        }
        Ok(())
    }

    /// Width of the node-level readout, `L1 * d`.
    pub fn node_repr_width(&self) -> usize {
        self.node_layers * self.hidden
    }

    /// Width of the super-graph readout, `(L2 + 1) * d`.
    pub fn super_repr_width(&self) -> usize {
        (self.super_layers + 1) * self.hidden
    }

    /// Width of the representation fed to the classifier and projection head.
    pub fn head_input_width(&self) -> usize {
        if self.substructure_branch {
            self.super_repr_width()
        } else {
            self.node_repr_width()
        }
    }

    /// Width of the scoring embedding.
    pub fn score_width(&self) -> usize {
        if self.substructure_branch {
            self.node_repr_width() + self.super_repr_width()
        } else {
            self.node_repr_width()
        }
    }
}

/// Indices of a two-layer MLP's tensors inside [`ModelParams`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct MlpSlots {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GinSlots {
    pub mlp: MlpSlots,
    pub eps: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub node: Vec<GinSlots>,
    pub phi: Option<MlpSlots>,
    pub rho: Option<MlpSlots>,
    pub sup: Vec<GinSlots>,
    pub proj: MlpSlots,
    pub cls_w: usize,
    pub cls_b: usize,
}

struct Builder<'r> {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    rng: &'r mut ChaCha8Rng,
}

impl Builder<'_> {
    fn push(&mut self, name: String, t: Tensor) -> usize {
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> (usize, usize) {
        let w = Tensor::glorot_uniform(fan_in, fan_out, self.rng);
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let b = Tensor::uniform(1, fan_out, bound, self.rng);
        (self.push(format!("{prefix}.w"), w), self.push(format!("{prefix}.b"), b))
    }

    fn mlp(&mut self, prefix: &str, fan_in: usize, hidden: usize, out: usize) -> MlpSlots {
        let (w1, b1) = self.linear(&format!("{prefix}.0"), fan_in, hidden);
        let (w2, b2) = self.linear(&format!("{prefix}.1"), hidden, out);
        MlpSlots { w1, b1, w2, b2 }
    }

    fn gin(&mut self, prefix: &str, fan_in: usize, d: usize) -> GinSlots {
        let mlp = self.mlp(&format!("{prefix}.mlp"), fan_in, d, d);
        let eps = self.push(format!("{prefix}.eps"), Tensor::scalar(0.0));
        GinSlots { mlp, eps }
    }
}

pub(crate) fn build(config: &EncoderConfig, seed: u64) -> (Layout, Vec<String>, Vec<Tensor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let mut b = Builder {
        names: Vec::new(),
        tensors: Vec::new(),
        rng: &mut rng,
    };
    let d = config.hidden;
    let node = (0..config.node_layers)
        .map(|l| b.gin(&format!("node_gin.{l}"), if l == 0 { config.input_width } else { d }, d))
        .collect();
    let (phi, rho, sup) = if config.substructure_branch {
        let phi = b.mlp("pool.phi", config.node_repr_width(), d, d);
        let rho = b.mlp("pool.rho", d, d, d);
        let sup = (0..config.super_layers)
            .map(|l| b.gin(&format!("super_gin.{l}"), d, d))
            .collect();
        (Some(phi), Some(rho), sup)
    } else {
        (None, None, Vec::new())
    };
    let proj = b.mlp("proj", config.head_input_width(), d, d);
    let (cls_w, cls_b) = b.linear("cls", config.head_input_width(), config.num_classes);
    let layout = Layout {
        node,
        phi,
        rho,
        sup,
        proj,
        cls_w,
        cls_b,
    };
    let Builder { names, tensors, .. } = b;
    (layout, names, tensors)
}

/// All trainable tensors of the encoder, projection head and classifier.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub(crate) layout: Layout,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.tensors == other.tensors
    }
}

impl ModelParams {
    /// Glorot-uniform weights, `U(+-1/sqrt(fan_in))` biases and zero GIN
    /// epsilons, drawn from a dedicated stream of `seed`.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, names, tensors) = build(config, seed);
        Ok(Self { layout, names, tensors })
    }

    /// Rebuilds parameters from named tensors, checking names and shapes.
    pub fn from_named(config: &EncoderConfig, entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        if entries.len() != p.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                p.tensors.len(),
                entries.len()
            )));
        }
        for (i, (name, t)) in entries.into_iter().enumerate() {
            if name != p.names[i] || t.shape() != p.tensors[i].shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: expected {} {:?}, found {name} {:?}",
                    p.names[i],
                    p.tensors[i].shape(),
                    t.shape()
                )));
            }
            p.tensors[i] = t;
        }
        Ok(p)
    }

    pub fn named(&self) -> Vec<(String, Tensor)> {
        self.names.iter().cloned().zip(self.tensors.iter().cloned()).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}
