//! Reader and writer for the TUDataset text format.
//!
//! A dataset `NAME` is a directory holding:
//!
//! * `NAME_A.txt`: one `i, j` row per directed edge, 1-indexed global node ids
//! * `NAME_graph_indicator.txt`: 1-indexed graph id of each node
//! * `NAME_graph_labels.txt`: one class label per graph
//! * `NAME_node_labels.txt` (optional): one discrete label per node
//! * `NAME_node_attributes.txt` (optional): one real vector per node
//!
//! Values may be separated by commas and/or whitespace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

/// How node features are derived from the optional node files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMode {
    /// Attributes if present, else one-hot node labels, else empty.
    #[default]
    Auto,
    /// One-hot node labels, ignoring attributes.
    NodeLabels,
    /// Empty features; fill with [`GraphDataset::with_degree_features`].
    None,
}

fn file(root: &Path, name: &str, suffix: &str) -> PathBuf {
    root.join(format!("{name}_{suffix}.txt"))
}

/// `(line number, fields)` of each non-empty line.
type Rows = Vec<(usize, Vec<String>)>;

fn read_rows(path: &Path, required: bool) -> Result<Option<Rows>> {
    if !path.exists() {
        return if required {
            Err(Error::MissingFile(path.to_path_buf()))
        } else {
            Ok(None)
        };
    }
    let text = fs::read_to_string(path)?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields = l
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect();
            (i + 1, fields)
        })
        .collect();
    Ok(Some(rows))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        file: path.to_path_buf(),
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

fn parse_scalars<T: std::str::FromStr>(path: &Path, rows: &[(usize, Vec<String>)]) -> Result<Vec<T>> {
    rows.iter()
        .map(|(line, f)| {
            if f.len() != 1 {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line: *line,
                    msg: format!("expected one value, found {}", f.len()),
                });
            }
            parse_field(path, *line, &f[0])
        })
        .collect()
}

fn dense_remap(values: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let uniq: Vec<i64> = values.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<i64, usize> = uniq.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (values.iter().map(|v| index[v]).collect(), uniq)
}

/// Parses `root/name_*.txt` with [`FeatureMode::Auto`].
pub fn parse_tudataset(root: &Path, name: &str) -> Result<GraphDataset> {
    parse_tudataset_with(root, name, FeatureMode::Auto)
}

pub fn parse_tudataset_with(root: &Path, name: &str, mode: FeatureMode) -> Result<GraphDataset> {
    let a_path = file(root, name, "A");
    let ind_path = file(root, name, "graph_indicator");
    let gl_path = file(root, name, "graph_labels");
    let nl_path = file(root, name, "node_labels");
    let at_path = file(root, name, "node_attributes");

    let a_rows = read_rows(&a_path, true)?.unwrap_or_default();
    let ind_rows = read_rows(&ind_path, true)?.unwrap_or_default();
    let gl_rows = read_rows(&gl_path, true)?.unwrap_or_default();

    let indicator: Vec<usize> = parse_scalars(&ind_path, &ind_rows)?;
    let graph_labels: Vec<i64> = parse_scalars(&gl_path, &gl_rows)?;
    let n_graphs = graph_labels.len();
    let n_nodes = indicator.len();

    // global node -> (graph, local index)
    let mut local = Vec::with_capacity(n_nodes);
    let mut counts = vec![0usize; n_graphs];
    for (row, &gid) in indicator.iter().enumerate() {
        if gid == 0 || gid > n_graphs {
            return Err(Error::Parse {
                file: ind_path.clone(),
                line: ind_rows[row].0,
                msg: format!("graph id {gid} out of range 1..={n_graphs}"),
            });
        }
        local.push((gid - 1, counts[gid - 1]));
        counts[gid - 1] += 1;
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (line, f) in &a_rows {
        if f.len() != 2 {
            return Err(Error::Parse {
                file: a_path.clone(),
                line: *line,
                msg: format!("expected an edge pair, found {} values", f.len()),
            });
        }
        let i: usize = parse_field(&a_path, *line, &f[0])?;
        let j: usize = parse_field(&a_path, *line, &f[1])?;
        for k in [i, j] {
            if k == 0 || k > n_nodes {
                return Err(Error::Parse {
                    file: a_path.clone(),
                    line: *line,
                    msg: format!("node index {k} out of range 1..={n_nodes}"),
                });
            }
        }
        let (gi, li) = local[i - 1];
        let (gj, lj) = local[j - 1];
        if gi != gj {
            return Err(Error::Parse {
                file: a_path.clone(),
                line: *line,
                msg: format!("edge ({i}, {j}) crosses graphs"),
            });
        }
        if li != lj {
            edges[gi].push((li.min(lj), li.max(lj)));
        }
    }

    let node_labels = match read_rows(&nl_path, false)? {
        Some(rows) => {
            let raw: Vec<i64> = parse_scalars(&nl_path, &rows)?;
            if raw.len() != n_nodes {
                return Err(Error::Parse {
                    file: nl_path.clone(),
                    line: rows.last().map_or(0, |r| r.0),
                    msg: format!("{} node labels for {n_nodes} nodes", raw.len()),
                });
            }
            Some(dense_remap(&raw).0)
        }
        None => None,
    };

    let attributes = match read_rows(&at_path, false)? {
        Some(rows) if mode == FeatureMode::Auto => {
            if rows.len() != n_nodes {
                return Err(Error::Parse {
                    file: at_path.clone(),
                    line: rows.last().map_or(0, |r| r.0),
                    msg: format!("{} attribute rows for {n_nodes} nodes", rows.len()),
                });
            }
            let width = rows.first().map_or(0, |r| r.1.len());
            let mut flat = Vec::with_capacity(n_nodes * width);
            for (line, f) in &rows {
                if f.len() != width {
                    return Err(Error::Parse {
                        file: at_path.clone(),
                        line: *line,
                        msg: format!("ragged attribute row: {} values, expected {width}", f.len()),
                    });
                }
                for s in f {
                    flat.push(parse_field::<f64>(&at_path, *line, s)?);
                }
            }
            Some((width, flat))
        }
        _ => None,
    };

    let (width, node_features): (usize, Vec<f64>) = match (&attributes, &node_labels, mode) {
        (Some((w, flat)), _, FeatureMode::Auto) => (*w, flat.clone()),
        (None, Some(labels), FeatureMode::Auto | FeatureMode::NodeLabels) => {
            let w = labels.iter().max().map_or(0, |m| m + 1);
            let mut flat = vec![0.0; n_nodes * w];
            for (v, &l) in labels.iter().enumerate() {
                flat[v * w + l] = 1.0;
            }
            (w, flat)
        }
        _ => (0, Vec::new()),
    };

    let (dense_labels, original) = dense_remap(&graph_labels);
    let mut per_graph_feats: Vec<Vec<f64>> = counts.iter().map(|&c| Vec::with_capacity(c * width)).collect();
    let mut per_graph_nl: Vec<Vec<usize>> = counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    for (v, &(g, _)) in local.iter().enumerate() {
        per_graph_feats[g].extend_from_slice(&node_features[v * width..(v + 1) * width]);
        if let Some(nl) = &node_labels {
            per_graph_nl[g].push(nl[v]);
        }
    }

    let mut graphs = Vec::with_capacity(n_graphs);
    for (g, ((e, feats), nl)) in edges
        .into_iter()
        .zip(per_graph_feats)
        .zip(per_graph_nl)
        .enumerate()
    {
        let mut e = e;
        e.sort_unstable();
        e.dedup();
        let mut graph = Graph::new(counts[g], e, width, feats)?.with_label(dense_labels[g]);
        if node_labels.is_some() {
            graph = graph.with_node_labels(nl)?;
        }
        graphs.push(graph);
    }

    let mut ds = GraphDataset::new(name, graphs, original.len())?;
    ds.feature_width = width;
    ds.original_labels = original;
    Ok(ds)
}

fn is_label_one_hot(g: &Graph) -> bool {
    let Some(labels) = g.node_labels() else {
        return false;
    };
    let w = g.feature_width();
    labels.iter().enumerate().all(|(v, &l)| {
        let row = g.feature_row(v);
        l < w && row.iter().enumerate().all(|(i, &x)| x == if i == l { 1.0 } else { 0.0 })
    })
}

/// Writes `dataset` to `root` in TUDataset format under `dataset.name`.
///
/// Features that are exactly the one-hot of node labels are written as node
/// labels only, so parsing the output reproduces the dataset.
pub fn write_tudataset(dataset: &GraphDataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    let name = &dataset.name;
    let mut a = String::new();
    let mut ind = String::new();
    let mut gl = String::new();
    let mut nl = String::new();
    let mut at = String::new();
    let has_nl = dataset.graphs.iter().all(|g| g.node_labels().is_some()) && !dataset.graphs.is_empty();
    let write_attrs = dataset.feature_width > 0 && !(has_nl && dataset.graphs.iter().all(is_label_one_hot));

    let mut offset = 0;
    for (gi, g) in dataset.graphs.iter().enumerate() {
        for &(u, v) in g.edges() {
            writeln!(a, "{}, {}", u + offset + 1, v + offset + 1).unwrap();
            writeln!(a, "{}, {}", v + offset + 1, u + offset + 1).unwrap();
        }
        for v in 0..g.node_count() {
            writeln!(ind, "{}", gi + 1).unwrap();
            if has_nl {
                writeln!(nl, "{}", g.node_labels().unwrap()[v]).unwrap();
            }
            if write_attrs {
                let row: Vec<String> = g.feature_row(v).iter().map(|x| x.to_string()).collect();
                writeln!(at, "{}", row.join(", ")).unwrap();
            }
        }
        let label = g.label().map_or(0, |l| dataset.original_labels.get(l).copied().unwrap_or(l as i64));
        writeln!(gl, "{label}").unwrap();
        offset += g.node_count();
    }
    fs::write(file(root, name, "A"), a)?;
    fs::write(file(root, name, "graph_indicator"), ind)?;
    fs::write(file(root, name, "graph_labels"), gl)?;
    if has_nl {
        fs::write(file(root, name, "node_labels"), nl)?;
    }
    if write_attrs {
        fs::write(file(root, name, "node_attributes"), at)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, suffix: &str, body: &str) {
        fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
    }

    #[test]
    fn single_node_graph() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ONE", "A", "");
        write(dir.path(), "ONE", "graph_indicator", "1\n");
        write(dir.path(), "ONE", "graph_labels", "1\n");
        let ds = parse_tudataset(dir.path(), "ONE").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.graphs[0].node_count(), 1);
        assert_eq!(ds.feature_width, 0);
    }

    #[test]
    fn triangle_and_path() {
        let dir = tempfile::tempdir().unwrap();
        // triangle on nodes 1..3 (both directions, with a duplicate), path 4-5-6
        write(
            dir.path(),
            "TP",
            "A",
            "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n1,2\n4, 5\n5, 4\n5 6\n6, 5\n",
        );
        write(dir.path(), "TP", "graph_indicator", "1\n1\n1\n2\n2\n2\n");
        write(dir.path(), "TP", "graph_labels", "-1\n1\n");
        write(dir.path(), "TP", "node_labels", "0\n0\n1\n1\n2\n1\n");
        let ds = parse_tudataset(dir.path(), "TP").unwrap();
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.original_labels, vec![-1, 1]);
        let counts: Vec<usize> = ds.graphs.iter().map(Graph::edge_count).collect();
        assert_eq!(counts, vec![3, 2]);
        assert_eq!(ds.graphs[0].label(), Some(0));
        assert_eq!(ds.graphs[1].label(), Some(1));
        assert_eq!(ds.feature_width, 3);
        assert_eq!(ds.graphs[1].feature_row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_file_and_bad_index() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "X", "A", "1, 5\n");
        write(dir.path(), "X", "graph_indicator", "1\n1\n");
        assert!(matches!(parse_tudataset(dir.path(), "X"), Err(Error::MissingFile(_))));
        write(dir.path(), "X", "graph_labels", "0\n");
        assert!(matches!(parse_tudataset(dir.path(), "X"), Err(Error::Parse { .. })));
    }

    #[test]
    fn ragged_attributes() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "R", "A", "1, 2\n2, 1\n");
        write(dir.path(), "R", "graph_indicator", "1\n1\n");
        write(dir.path(), "R", "graph_labels", "0\n");
        write(dir.path(), "R", "node_attributes", "0.5, 1.0\n2.0\n");
        assert!(matches!(parse_tudataset(dir.path(), "R"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn attributes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "F", "A", "1, 2\n2, 1\n");
        write(dir.path(), "F", "graph_indicator", "1\n1\n2\n");
        write(dir.path(), "F", "graph_labels", "3\n7\n");
        write(dir.path(), "F", "node_attributes", "0.1, -2.5\n1e-3, 4\n0.3333333333333333, 0\n");
        let ds = parse_tudataset(dir.path(), "F").unwrap();
        let out = tempfile::tempdir().unwrap();
        write_tudataset(&ds, out.path()).unwrap();
        assert_eq!(parse_tudataset(out.path(), "F").unwrap(), ds);
    }
}
