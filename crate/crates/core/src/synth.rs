//! Motif-stitched synthetic graph families.
//!
//! Every graph is a random tree of cycle motifs joined by single bridge
//! edges, plus optional extra bridges. Families differ only in the motif
//! cycle length.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    Triangle,
    Square,
    Pentagon,
}

impl Motif {
    pub fn size(self) -> usize {
        match self {
            Motif::Triangle => 3,
            Motif::Square => 4,
            Motif::Pentagon => 5,
        }
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Motif::Triangle => "triangle",
            Motif::Square => "square",
            Motif::Pentagon => "pentagon",
        })
    }
}

impl FromStr for Motif {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(Motif::Triangle),
            "square" => Ok(Motif::Square),
            "pentagon" => Ok(Motif::Pentagon),
            other => Err(Error::Config(format!("unknown motif `{other}`"))),
        }
    }
}

/// Node features of generated graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScheme {
    /// A single constant feature.
    #[default]
    Constant,
    /// One-hot degree, capped at `max_degree`.
    Degree { max_degree: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub motif: Motif,
    pub label: usize,
    pub graphs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub families: Vec<Family>,
    /// Inclusive range of motifs per graph.
    pub motifs: (usize, usize),
    /// Extra bridges between distinct motifs, beyond the spanning tree.
    pub extra_bridges: usize,
    pub features: FeatureScheme,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two-class ID set: triangle chains (class 0) and pentagon chains (class 1).
    pub fn id_default(graphs_per_class: usize, seed: u64) -> Self {
        Self {
            name: "SYNTH_ID".into(),
            families: vec![
                Family { motif: Motif::Triangle, label: 0, graphs: graphs_per_class },
                Family { motif: Motif::Pentagon, label: 1, graphs: graphs_per_class },
            ],
            motifs: (3, 6),
            extra_bridges: 1,
            features: FeatureScheme::Constant,
            seed,
        }
    }

    /// Square chains sharing the ID generator settings.
    pub fn ood_default(graphs: usize, seed: u64) -> Self {
        Self {
            name: "SYNTH_OOD".into(),
            families: vec![Family { motif: Motif::Square, label: 0, graphs }],
            ..Self::id_default(0, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.motifs;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("motif range ({lo}, {hi}) is empty")));
        }
        if self.families.is_empty() {
            return Err(Error::Config("no families".into()));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.families.iter().map(|f| f.label + 1).max().unwrap_or(0)
    }

    /// Generates the dataset; graphs of the families are interleaved.
    pub fn generate(&self) -> Result<GraphDataset> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut per_family: Vec<Vec<Graph>> = Vec::new();
        for fam in &self.families {
            let motifs_hi = self.motifs.1;
            let mut graphs = Vec::with_capacity(fam.graphs);
            for _ in 0..fam.graphs {
                let m = rng.gen_range(self.motifs.0..=motifs_hi);
                graphs.push(motif_chain(fam.motif, m, self.extra_bridges, &mut rng)?.with_label(fam.label));
            }
            per_family.push(graphs);
        }
        let longest = per_family.iter().map(Vec::len).max().unwrap_or(0);
        let mut graphs = Vec::new();
        for i in 0..longest {
            for fam in &per_family {
                if let Some(g) = fam.get(i) {
                    graphs.push(g.clone());
                }
            }
        }
        let graphs = graphs
            .into_iter()
            .map(|g| self.featurize(g))
            .collect::<Result<Vec<_>>>()?;
        GraphDataset::new(self.name.clone(), graphs, self.num_classes())
    }

    fn featurize(&self, g: Graph) -> Result<Graph> {
        match self.features {
            FeatureScheme::Constant => {
                let n = g.node_count();
                g.with_features(1, vec![1.0; n])
            }
            FeatureScheme::Degree { max_degree } => {
                // the last slot means "max_degree or more"
                let w = max_degree + 1;
                let mut f = vec![0.0; g.node_count() * w];
                for (v, d) in g.degrees().into_iter().enumerate() {
                    f[v * w + d.min(max_degree)] = 1.0;
                }
                g.with_features(w, f)
            }
        }
    }
}

/// `count` cycles of the motif's length, joined into a random tree by one
/// bridge per motif after the first, plus up to `extra` further bridges
/// between distinct motifs.
pub fn motif_chain<R: Rng + ?Sized>(motif: Motif, count: usize, extra: usize, rng: &mut R) -> Result<Graph> {
    let k = motif.size();
    let mut edges = BTreeSet::new();
    for m in 0..count {
        let base = m * k;
        for i in 0..k {
            let (a, b) = (base + i, base + (i + 1) % k);
            edges.insert((a.min(b), a.max(b)));
        }
        if m > 0 {
            let other = rng.gen_range(0..m);
            let u = other * k + rng.gen_range(0..k);
            let v = base + rng.gen_range(0..k);
            edges.insert((u.min(v), u.max(v)));
        }
    }
    if count > 1 {
        for _ in 0..extra {
            let mut ids: Vec<usize> = (0..count).collect();
            ids.shuffle(rng);
            let u = ids[0] * k + rng.gen_range(0..k);
            let v = ids[1] * k + rng.gen_range(0..k);
            edges.insert((u.min(v), u.max(v)));
        }
    }
    Graph::from_edges(count * k, edges.into_iter().collect())
}
