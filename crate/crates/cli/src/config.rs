use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sgood::encoder::EncoderConfig;
use sgood::oodscore::ScoreMode;
use sgood::substructure::Detector;
use sgood::synth::{FeatureScheme, Motif, SyntheticSpec, Family};
use sgood::training::TrainConfig;

/// Flat run configuration; every key is optional in the TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub id_dir: Option<PathBuf>,
    /// Dataset name inside `id_dir`; defaults to the directory name.
    pub id_name: Option<String>,
    pub ood_dir: Option<PathBuf>,
    pub ood_name: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub detector: String,
    /// `auto`, `node_labels` or `degree`.
    pub features: String,
    /// Degree cap for `features = "degree"`; defaults to the largest degree seen.
    pub max_degree: Option<usize>,

    pub node_layers: usize,
    pub super_layers: usize,
    pub hidden: usize,

    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub alpha: f64,
    pub tau: f64,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub aug_ratio: f64,

    pub score_mode: String,

    pub wl_seeds: u64,

    pub synth_graphs_per_class: usize,
    pub synth_ood_graphs: usize,
    pub synth_id_motifs: Vec<String>,
    pub synth_ood_motif: String,
    pub synth_motifs_min: usize,
    pub synth_motifs_max: usize,
    pub synth_extra_bridges: usize,
    /// Degree cap for one-hot degree features; 0 means a constant feature.
    pub synth_degree_features: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let enc = EncoderConfig::new(0, 1);
        let synth = SyntheticSpec::id_default(250, 0);
        Self {
            id_dir: None,
            id_name: None,
            ood_dir: None,
            ood_name: None,
            out: PathBuf::from("out"),
            seed: 0,
            detector: "modularity".into(),
            features: "auto".into(),
            max_degree: None,
            node_layers: enc.node_layers,
            super_layers: enc.super_layers,
            hidden: enc.hidden,
            batch_size: train.batch_size,
            pretrain_epochs: train.pretrain_epochs,
            finetune_epochs: train.finetune_epochs,
            alpha: train.alpha,
            tau: train.tau,
            lr_pretrain: train.lr_pretrain,
            lr_finetune: train.lr_finetune,
            aug_ratio: train.aug_ratio,
            score_mode: "nearest".into(),
            wl_seeds: 100,
            synth_graphs_per_class: 250,
            synth_ood_graphs: 100,
            synth_id_motifs: vec!["triangle".into(), "pentagon".into()],
            synth_ood_motif: "square".into(),
            synth_motifs_min: synth.motifs.0,
            synth_motifs_max: synth.motifs.1,
            synth_extra_bridges: synth.extra_bridges,
            synth_degree_features: 0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub detector: Option<String>,
    pub score_mode: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Features {
    Auto,
    NodeLabels,
    Degree,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(o) = overrides.out {
            cfg.out = o;
        }
        if let Some(d) = overrides.detector {
            cfg.detector = d;
        }
        if let Some(m) = overrides.score_mode {
            cfg.score_mode = m;
        }
        cfg.detector()?;
        cfg.score_mode()?;
        cfg.feature_mode()?;
        cfg.train_config().validate()?;
        Ok(cfg)
    }

    pub fn detector(&self) -> Result<Detector> {
        Ok(match self.detector.parse()? {
            Detector::Lp { .. } => Detector::Lp { seed: self.seed },
            d => d,
        })
    }

    pub fn score_mode(&self) -> Result<ScoreMode> {
        Ok(self.score_mode.parse()?)
    }

    pub fn feature_mode(&self) -> Result<Features> {
        Ok(match self.features.as_str() {
            "auto" => Features::Auto,
            "node_labels" => Features::NodeLabels,
            "degree" => Features::Degree,
            other => bail!("unknown feature mode {other:?} (expected auto, node_labels or degree)"),
        })
    }

    pub fn encoder_config(&self, input_width: usize, num_classes: usize) -> EncoderConfig {
        EncoderConfig {
            node_layers: self.node_layers,
            super_layers: self.super_layers,
            hidden: self.hidden,
            ..EncoderConfig::new(input_width, num_classes)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            pretrain_epochs: self.pretrain_epochs,
            finetune_epochs: self.finetune_epochs,
            alpha: self.alpha,
            tau: self.tau,
            lr_pretrain: self.lr_pretrain,
            lr_finetune: self.lr_finetune,
            aug_ratio: self.aug_ratio,
            seed: self.seed,
        }
    }

    /// Input directories with their dataset names; both must exist.
    pub fn datasets(&self) -> Result<[(PathBuf, String); 2]> {
        let resolve = |dir: &Option<PathBuf>, name: &Option<String>, key: &str| -> Result<(PathBuf, String)> {
            let Some(dir) = dir else {
                bail!("config key `{key}_dir` is required for this command");
            };
            if !dir.is_dir() {
                bail!("{key}_dir {} does not exist", dir.display());
            }
            let name = match name {
                Some(n) => n.clone(),
                None => dir
                    .file_name()
                    .and_then(|s| s.to_str())
                    .with_context(|| format!("cannot derive a dataset name from {}", dir.display()))?
                    .to_string(),
            };
            Ok((dir.clone(), name))
        };
        Ok([
            resolve(&self.id_dir, &self.id_name, "id")?,
            resolve(&self.ood_dir, &self.ood_name, "ood")?,
        ])
    }

    pub fn synth_specs(&self) -> Result<(SyntheticSpec, SyntheticSpec)> {
        let features = match self.synth_degree_features {
            0 => FeatureScheme::Constant,
            d => FeatureScheme::Degree { max_degree: d },
        };
        let families = self
            .synth_id_motifs
            .iter()
            .enumerate()
            .map(|(label, m)| {
                Ok(Family {
                    motif: m.parse::<Motif>()?,
                    label,
                    graphs: self.synth_graphs_per_class,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ood_motif: Motif = self.synth_ood_motif.parse()?;
        if families.iter().any(|f| f.motif == ood_motif) {
            bail!("the OOD motif {ood_motif} is also an ID motif");
        }
        let id = SyntheticSpec {
            name: "SYNTH_ID".into(),
            families,
            motifs: (self.synth_motifs_min, self.synth_motifs_max),
            extra_bridges: self.synth_extra_bridges,
            features,
            seed: self.seed,
        };
        let ood = SyntheticSpec {
            name: "SYNTH_OOD".into(),
            families: vec![Family {
                motif: ood_motif,
                label: 0,
                graphs: self.synth_ood_graphs,
            }],
            seed: self.seed.wrapping_add(1),
            ..id.clone()
        };
        id.validate()?;
        ood.validate()?;
        Ok((id, ood))
    }
}
