use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sgood::encoder::{EncoderConfig, Model};
use sgood::graph::families::{cycle, union};
use sgood::graph::{Graph, GraphDataset};
use sgood::hash::content_hash;
use sgood::oodscore::GaussianStats;
use sgood::pipeline::{metrics_for, score_test_set, test_novelty, SPLIT_RATIOS};
use sgood::split::{assemble_test_set, split_dataset, Splits};
use sgood::substructure::{build_super_graph, detect_substructures_modularity, PartitionCache};
use sgood::training::{prepare_from_cache, train, Prepared, TrainReport, Trained};
use sgood::tudataset::{parse_tudataset_with, write_tudataset, FeatureMode};
use sgood::wl::wl_distinguishable;

use crate::artifacts::{display_path, fixed_json, hash_files, read_json, round_sig, write_json, Layout, Manifest, Versions};
use crate::config::{Features, RunConfig};

pub struct Ctx {
    pub cfg: RunConfig,
    pub layout: Layout,
    pub force: bool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, force: bool) -> Self {
        let layout = Layout::new(&cfg.out);
        Self { cfg, layout, force }
    }

    /// Hash of the resolved configuration, ignoring the output directory.
    fn config_hash(&self) -> Result<String> {
        let mut c = self.cfg.clone();
        c.out = PathBuf::new();
        Ok(content_hash(&fixed_json(&c)?))
    }

    /// Runs `body` unless a previous run with the same inputs is intact, then
    /// records the manifest and the elapsed time.
    fn stage(&self, command: &str, inputs: &[PathBuf], body: impl FnOnce(&Ctx) -> Result<Vec<PathBuf>>) -> Result<()> {
        let config_hash = self.config_hash()?;
        let inputs = hash_files(&self.layout.root, inputs)?;
        if !self.force && Manifest::is_fresh(&self.layout, command, &config_hash, &inputs) {
            println!("{command}: up to date");
            return Ok(());
        }
        let start = Instant::now();
        let outputs = body(self)?;
        let secs = start.elapsed().as_secs_f64();
        let manifest = Manifest {
            command: command.to_string(),
            config_hash,
            seed: self.cfg.seed,
            versions: Versions::current(),
            inputs,
            outputs: hash_files(&self.layout.root, &outputs)?,
        };
        write_json(&self.layout.manifest(command), &manifest)?;
        fs::create_dir_all(self.layout.root.join("timing"))?;
        fs::write(self.layout.timing(command), format!("{{\"seconds\": {secs:.3}}}\n"))?;
        for p in &outputs {
            println!("{command}: wrote {}", display_path(&self.layout.root, p));
        }
        Ok(())
    }
}

/// Names and shapes of the ingested datasets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Index {
    pub id: String,
    pub ood: String,
    pub feature_width: usize,
    pub num_classes: usize,
}

fn tu_files(dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let prefix = format!("{name}_");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .is_some_and(|f| f.starts_with(&prefix) && f.ends_with(".txt"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no {name}_*.txt files in {}", dir.display());
    }
    Ok(files)
}

fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            out.extend(files_under(&p)?);
        } else {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Zero-pads node features to `width` columns.
fn pad_features(ds: GraphDataset, width: usize) -> Result<GraphDataset> {
    if ds.feature_width == width {
        return Ok(ds);
    }
    let old = ds.feature_width;
    let graphs = ds
        .graphs
        .into_iter()
        .map(|g| {
            let mut f = vec![0.0; g.node_count() * width];
            for v in 0..g.node_count() {
                f[v * width..v * width + old].copy_from_slice(g.feature_row(v));
            }
            g.with_features(width, f)
        })
        .collect::<sgood::Result<Vec<Graph>>>()?;
    let mut padded = GraphDataset::new(ds.name, graphs, ds.num_classes)?;
    padded.original_labels = ds.original_labels;
    Ok(padded)
}

pub fn ingest(ctx: &Ctx) -> Result<()> {
    let [(id_dir, id_name), (ood_dir, ood_name)] = ctx.cfg.datasets()?;
    if id_name == ood_name {
        bail!("ID and OOD datasets share the name {id_name:?}");
    }
    let mut inputs = tu_files(&id_dir, &id_name)?;
    inputs.extend(tu_files(&ood_dir, &ood_name)?);
    ctx.stage("ingest", &inputs, |ctx| {
        let features = ctx.cfg.feature_mode()?;
        let mode = match features {
            Features::Auto => FeatureMode::Auto,
            Features::NodeLabels => FeatureMode::NodeLabels,
            Features::Degree => FeatureMode::None,
        };
        let mut id = parse_tudataset_with(&id_dir, &id_name, mode)?;
        let mut ood = parse_tudataset_with(&ood_dir, &ood_name, mode)?;
        if features == Features::Degree {
            let cap = ctx.cfg.max_degree.unwrap_or(id.max_degree().max(ood.max_degree()));
            id = id.with_degree_features(cap)?;
            ood = ood.with_degree_features(cap)?;
        }
        let width = id.feature_width.max(ood.feature_width);
        if width == 0 {
            bail!("datasets carry no node features; set features = \"degree\"");
        }
        let id = pad_features(id, width)?;
        let ood = pad_features(ood, width)?;
        let splits = split_dataset(id.len(), SPLIT_RATIOS, ctx.cfg.seed)?;
        let splits = assemble_test_set(splits, ood.len(), ctx.cfg.seed.wrapping_add(1))?;
        let index = Index {
            id: id.name.clone(),
            ood: ood.name.clone(),
            feature_width: width,
            num_classes: id.num_classes,
        };
        let l = &ctx.layout;
        let outputs = vec![l.dataset(&id.name), l.dataset(&ood.name), l.splits(), index_path(l)];
        write_json(&outputs[0], &id)?;
        write_json(&outputs[1], &ood)?;
        write_json(&outputs[2], &splits)?;
        write_json(&outputs[3], &index)?;
        println!(
            "ingest: {} graphs {} (train/val/test {}/{}/{}), {} graphs {}, feature width {width}",
            id.name,
            id.len(),
            splits.train.len(),
            splits.val.len(),
            splits.test_id.len(),
            ood.name,
            ood.len()
        );
        Ok(outputs)
    })
}

fn index_path(l: &Layout) -> PathBuf {
    l.root.join("datasets").join("index.json")
}

struct Ingested {
    index: Index,
    id: GraphDataset,
    ood: GraphDataset,
    splits: Splits,
    files: Vec<PathBuf>,
}

fn load_ingested(ctx: &Ctx) -> Result<Ingested> {
    let l = &ctx.layout;
    let index: Index = read_json(&index_path(l)).context("run `sgood ingest` first")?;
    let files = vec![index_path(l), l.dataset(&index.id), l.dataset(&index.ood), l.splits()];
    Ok(Ingested {
        id: read_json(&files[1])?,
        ood: read_json(&files[2])?,
        splits: read_json(&files[3])?,
        index,
        files,
    })
}

/// Prepared ID and OOD graphs, computing partitions only when the cache is stale.
fn prepared(ctx: &Ctx, data: &Ingested) -> Result<(Vec<Prepared>, Vec<Prepared>, Vec<PathBuf>)> {
    let det = ctx.cfg.detector()?;
    let dir = ctx.layout.partitions();
    let id = PartitionCache::load_or_compute(&dir, &data.id, det)?;
    let ood = PartitionCache::load_or_compute(&dir, &data.ood, det)?;
    let files = vec![
        PartitionCache::path_in(&dir, &data.id.name, det),
        PartitionCache::path_in(&dir, &data.ood.name, det),
    ];
    Ok((prepare_from_cache(&data.id, &id)?, prepare_from_cache(&data.ood, &ood)?, files))
}

pub fn partition(ctx: &Ctx) -> Result<()> {
    let data = load_ingested(ctx)?;
    ctx.stage("partition", &data.files, |ctx| {
        let (id, ood, files) = prepared(ctx, &data)?;
        let mean = |p: &[Prepared]| p.iter().map(|x| x.partition.len() as f64).sum::<f64>() / p.len().max(1) as f64;
        println!(
            "partition: {} mean substructures {:.2} {}, {:.2} {}",
            ctx.cfg.detector,
            mean(&id),
            data.index.id,
            mean(&ood),
            data.index.ood
        );
        Ok(files)
    })
}

fn model_files(dir: &Path) -> [PathBuf; 4] {
    [
        dir.join("checkpoint.bin"),
        dir.join("encoder.json"),
        dir.join("gaussian.json"),
        dir.join("train_report.json"),
    ]
}

pub fn train_cmd(ctx: &Ctx) -> Result<()> {
    let data = load_ingested(ctx)?;
    let (id, _, part_files) = prepared(ctx, &data)?;
    let mut inputs = data.files.clone();
    inputs.extend(part_files);
    ctx.stage("train", &inputs, |ctx| {
        let encoder = ctx.cfg.encoder_config(data.index.feature_width, data.index.num_classes);
        let trained = train(&id, &data.splits.train, &data.splits.val, encoder, &ctx.cfg.train_config())?;
        let dir = ctx.layout.model_dir();
        fs::create_dir_all(&dir)?;
        let files = model_files(&dir);
        trained.model.save(&files[0], &files[1])?;
        write_json(&files[2], &trained.stats)?;
        write_json(&files[3], &trained.report)?;
        let last = trained.report.epochs.last();
        println!(
            "train: {} parameters, best epoch {:?}, val acc {:?}, final loss {:.4}",
            trained.report.parameter_count,
            trained.report.best_epoch,
            trained.report.best_val_acc,
            last.map_or(f64::NAN, |e| e.total)
        );
        Ok(files.to_vec())
    })
}

#[derive(Serialize)]
struct ScoreRow {
    graph_id: usize,
    score: f64,
    is_ood: bool,
    predicted_class: Option<usize>,
}

pub fn eval(ctx: &Ctx, checkpoint: Option<&Path>) -> Result<()> {
    let data = load_ingested(ctx)?;
    let (id, ood, part_files) = prepared(ctx, &data)?;
    let dir = checkpoint.map_or_else(|| ctx.layout.model_dir(), Path::to_path_buf);
    let files = model_files(&dir);
    for f in &files {
        if !f.exists() {
            bail!("missing artifact {}; run `sgood train` first", f.display());
        }
    }
    let mut inputs = data.files.clone();
    inputs.extend(part_files);
    inputs.extend(files.iter().cloned());
    ctx.stage("eval", &inputs, |ctx| {
        let model = Model::load(&files[0], &files[1])?;
        let stats: GaussianStats = read_json(&files[2])?;
        let report: TrainReport = read_json(&files[3])?;
        let trained = Trained { model, stats, report };
        let mode = ctx.cfg.score_mode()?;
        let scored = score_test_set(&trained, &id, &ood, &data.splits, mode)?;
        let metrics = metrics_for(&trained, &id, &data.splits, &scored, mode)?;

        let out = ctx.layout.eval_dir();
        fs::create_dir_all(&out)?;
        let csv_path = out.join("scores.csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        for r in &scored.rows {
            w.serialize(ScoreRow {
                graph_id: r.graph_id,
                score: round_sig(r.score),
                is_ood: r.is_ood,
                predicted_class: r.predicted_class,
            })?;
        }
        w.flush()?;
        let metrics_path = out.join("metrics.json");
        write_json(&metrics_path, &metrics)?;
        println!(
            "eval: AUROC {:.4} AUPR {:.4} FPR95 {:.4} ID-ACC {:.4} lambda {:.4}",
            metrics.auroc, metrics.aupr, metrics.fpr95, metrics.id_acc, metrics.lambda
        );
        Ok(vec![csv_path, metrics_path])
    })
}

#[derive(Serialize)]
struct Novelty<'a> {
    dataset: &'a str,
    ood_dataset: &'a str,
    detector: &'a str,
    ood_test_graphs: usize,
    novelty_rate: f64,
}

pub fn analyze_novelty(ctx: &Ctx) -> Result<()> {
    let data = load_ingested(ctx)?;
    let (id, ood, part_files) = prepared(ctx, &data)?;
    let mut inputs = data.files.clone();
    inputs.extend(part_files);
    ctx.stage("analyze-novelty", &inputs, |ctx| {
        let rate = test_novelty(&id, &ood, &data.splits)?;
        let path = ctx.layout.root.join("novelty.json");
        write_json(
            &path,
            &Novelty {
                dataset: &data.index.id,
                ood_dataset: &data.index.ood,
                detector: &ctx.cfg.detector,
                ood_test_graphs: data.splits.test_ood.len(),
                novelty_rate: rate,
            },
        )?;
        println!("analyze-novelty: {rate:.4}");
        Ok(vec![path])
    })
}

#[derive(Serialize)]
struct WlPair {
    pair: String,
    wl_distinguishable: bool,
    seeds: u64,
    sgood_separation_rate: f64,
}

/// Pairs of graphs that 1-WL cannot tell apart.
pub fn wl_pairs() -> Vec<(&'static str, Graph, Graph)> {
    vec![
        ("C6 vs 2C3", cycle(6), union(&[cycle(3), cycle(3)])),
        ("C8 vs 2C4", cycle(8), union(&[cycle(4), cycle(4)])),
        ("C10 vs C4+C6", cycle(10), union(&[cycle(4), cycle(6)])),
    ]
}

fn with_constant_features(g: Graph) -> Result<Prepared> {
    let n = g.node_count();
    let p = detect_substructures_modularity(&g);
    let g = g.with_features(1, vec![1.0; n])?;
    build_super_graph(&g, &p)?;
    Ok(Prepared::new(g, p)?)
}

pub fn wl_bench(ctx: &Ctx) -> Result<()> {
    ctx.stage("wl-bench", &[], |ctx| {
        let enc = EncoderConfig {
            input_width: 1,
            num_classes: 2,
            ..ctx.cfg.encoder_config(1, 2)
        };
        let mut rows = Vec::new();
        for (name, a, b) in wl_pairs() {
            let wl = wl_distinguishable(&a, &b, a.node_count().max(b.node_count()));
            let (pa, pb) = (with_constant_features(a)?, with_constant_features(b)?);
            let mut separated = 0;
            for s in 0..ctx.cfg.wl_seeds {
                let model = Model::new(enc.clone(), ctx.cfg.seed.wrapping_add(s))?;
                let ea = model.encode(pa.item())?.concat();
                let eb = model.encode(pb.item())?.concat();
                let d = ea.iter().zip(&eb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                separated += u64::from(d > 1e-6);
            }
            let rate = separated as f64 / ctx.cfg.wl_seeds.max(1) as f64;
            println!("wl-bench: {name}: 1-WL distinguishes {wl}, separation rate {rate:.2}");
            rows.push(WlPair {
                pair: name.to_string(),
                wl_distinguishable: wl,
                seeds: ctx.cfg.wl_seeds,
                sgood_separation_rate: rate,
            });
        }
        let path = ctx.layout.root.join("wl_bench.json");
        write_json(&path, &rows)?;
        Ok(vec![path])
    })
}

pub fn synth(ctx: &Ctx) -> Result<()> {
    let (id_spec, ood_spec) = ctx.cfg.synth_specs()?;
    ctx.stage("synth", &[], |ctx| {
        let dir = ctx.layout.synth_dir();
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let mut specs = BTreeMap::new();
        for spec in [&id_spec, &ood_spec] {
            let ds = spec.generate()?;
            write_tudataset(&ds, &dir.join(&spec.name))?;
            println!("synth: {} graphs {} in {}", ds.len(), spec.name, dir.join(&spec.name).display());
            specs.insert(spec.name.clone(), spec);
        }
        write_json(&dir.join("spec.json"), &specs)?;
        files_under(&dir)
    })
}
