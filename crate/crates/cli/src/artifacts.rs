//! Output files: fixed-precision JSON, per-command manifests and timings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sgood::hash::content_hash;

/// Significant digits kept for floats in JSON and CSV outputs.
const SIG_DIGITS: usize = 10;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to a fixed number of significant digits.
pub fn fixed_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, fixed_json(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(content_hash(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

/// Layout of an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn dataset(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{name}.json"))
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("datasets").join("splits.json")
    }

    pub fn partitions(&self) -> PathBuf {
        self.root.join("partitions")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.root.join("synth")
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{command}.json"))
    }

    pub fn timing(&self, command: &str) -> PathBuf {
        self.root.join("timing").join(format!("{command}.json"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub sgood: String,
    pub sgood_cli: String,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            sgood: sgood::VERSION.to_string(),
            sgood_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// What a command consumed and produced; paths are relative to the output
/// directory where possible.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn display_path(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Hashes every file in `paths` into a map keyed by display path.
pub fn hash_files(root: &Path, paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths.iter().map(|p| Ok((display_path(root, p), hash_file(p)?))).collect()
}

impl Manifest {
    /// True when a previous run with identical inputs left all its outputs intact.
    pub fn is_fresh(layout: &Layout, command: &str, config_hash: &str, inputs: &BTreeMap<String, String>) -> bool {
        let Ok(old) = read_json::<Manifest>(&layout.manifest(command)) else {
            return false;
        };
        old.config_hash == config_hash
            && &old.inputs == inputs
            && old.versions == Versions::current()
            && old
                .outputs
                .iter()
                .all(|(p, h)| hash_file(&layout.root.join(p)).is_ok_and(|cur| &cur == h))
    }
}
