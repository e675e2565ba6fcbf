//! On-disk sidecar of detector outputs, so detection runs once per dataset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::hash::content_hash;

use super::{build_super_graph, Detector, Partition, SuperGraph};

/// Bumped whenever detector output for the same input may change.
pub const PARTITION_CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCache {
    pub dataset: String,
    pub detector: Detector,
    pub version: u32,
    /// SHA-256 of the dataset's JSON form.
    pub dataset_hash: String,
    pub partitions: Vec<Partition>,
    pub super_graphs: Vec<SuperGraph>,
}

impl PartitionCache {
    /// Runs the detector on every graph of `dataset`.
    pub fn compute(dataset: &GraphDataset, detector: Detector) -> Result<Self> {
        let mut partitions = Vec::with_capacity(dataset.len());
        let mut super_graphs = Vec::with_capacity(dataset.len());
        for g in &dataset.graphs {
            let p = detector.detect(g);
            super_graphs.push(build_super_graph(g, &p)?);
            partitions.push(p);
        }
        Ok(Self {
            dataset: dataset.name.clone(),
            detector,
            version: PARTITION_CACHE_VERSION,
            dataset_hash: dataset_hash(dataset)?,
            partitions,
            super_graphs,
        })
    }

    pub fn file_name(dataset: &str, detector: Detector) -> String {
        format!("{dataset}.{}.v{PARTITION_CACHE_VERSION}.partitions.json", detector.name())
    }

    pub fn path_in(dir: &Path, dataset: &str, detector: Detector) -> PathBuf {
        dir.join(Self::file_name(dataset, detector))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::path_in(dir, &self.dataset, self.detector);
        fs::write(&path, serde_json::to_vec(self)?)?;
        Ok(path)
    }

    /// Loads a cache entry if one exists and still matches `dataset`.
    pub fn load(dir: &Path, dataset: &GraphDataset, detector: Detector) -> Result<Option<Self>> {
        let path = Self::path_in(dir, &dataset.name, detector);
        if !path.exists() {
            return Ok(None);
        }
        let cache: Self = serde_json::from_slice(&fs::read(&path)?)?;
        if cache.version != PARTITION_CACHE_VERSION
            || cache.detector != detector
            || cache.dataset_hash != dataset_hash(dataset)?
        {
            return Ok(None);
        }
        if cache.partitions.len() != dataset.len() {
            return Err(Error::Config(format!("{} holds the wrong number of partitions", path.display())));
        }
        Ok(Some(cache))
    }

    /// Cached entry when valid, otherwise computes and stores a fresh one.
    pub fn load_or_compute(dir: &Path, dataset: &GraphDataset, detector: Detector) -> Result<Self> {
        if let Some(c) = Self::load(dir, dataset, detector)? {
            return Ok(c);
        }
        let c = Self::compute(dataset, detector)?;
        c.save(dir)?;
        Ok(c)
    }
}

pub fn dataset_hash(dataset: &GraphDataset) -> Result<String> {
    Ok(content_hash(&serde_json::to_vec(dataset)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;

    #[test]
    fn round_trip_and_invalidation() {
        let ds = GraphDataset::new("toy", vec![complete(3).with_label(0), barbell(3).with_label(0)], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let c = PartitionCache::load_or_compute(dir.path(), &ds, Detector::Modularity).unwrap();
        assert_eq!(PartitionCache::load(dir.path(), &ds, Detector::Modularity).unwrap(), Some(c));
        let mut changed = ds.clone();
        changed.graphs.pop();
        assert_eq!(PartitionCache::load(dir.path(), &changed, Detector::Modularity).unwrap(), None);
    }

    #[test]
    fn detector_seed_invalidates() {
        let ds = GraphDataset::new("toy", vec![barbell(4).with_label(0)], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        PartitionCache::load_or_compute(dir.path(), &ds, Detector::Lp { seed: 1 }).unwrap();
        assert!(PartitionCache::load(dir.path(), &ds, Detector::Lp { seed: 1 }).unwrap().is_some());
        assert!(PartitionCache::load(dir.path(), &ds, Detector::Lp { seed: 2 }).unwrap().is_none());
    }
}
