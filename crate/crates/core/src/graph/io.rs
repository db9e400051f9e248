//! Plain-text dataset files.
//!
//! - edges: one `u<TAB>v` per line, 0-based (any whitespace accepted on read)
//! - features: comma-separated reals, one row per node
//! - labels: one integer per line
//! - masks: one of `train`, `val`, `test`, `none` per line
//! - header (round-trip only): `num_nodes`, `d`, `K` as key=value

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Graph, Split, Topology};
use crate::error::{GtransError, Result};
use crate::kv::{fmt_f64, KvMap};
use crate::linalg::Matrix;

pub const EDGE_FILE: &str = "edges.tsv";
pub const FEATURE_FILE: &str = "features.csv";
pub const LABEL_FILE: &str = "labels.txt";
pub const MASK_FILE: &str = "masks.txt";
pub const HEADER_FILE: &str = "header.txt";

/// Clean-up performed while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GtransError::io(path, e))
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> GtransError {
    GtransError::MalformedInput {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn read_features(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (ln, line) in content_lines(&text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(path, ln, format!("bad number: {e}")))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(GtransError::Dimension(format!(
                    "{}:{ln}: row has {} values, expected {c}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, l)| {
            l.parse::<usize>()
                .map_err(|_| malformed(path, ln, format!("bad label {l:?}")))
        })
        .collect()
}

fn read_masks(path: &Path) -> Result<Vec<Split>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, l)| Split::parse(l).ok_or_else(|| malformed(path, ln, format!("bad mask {l:?}"))))
        .collect()
}

fn read_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (ln, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(malformed(path, ln, "expected two node indices"));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| malformed(path, ln, format!("bad node index {t:?}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= num_nodes || v >= num_nodes {
            return Err(malformed(
                path,
                ln,
                format!("edge ({u},{v}) out of range for {num_nodes} nodes"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Load a dataset from its four files. The node count comes from the
/// feature file; the class count is `max(label) + 1`.
pub fn load_dataset(
    edge_file: &Path,
    feature_file: &Path,
    label_file: &Path,
    mask_file: &Path,
) -> Result<(Graph, LoadReport)> {
    let features = read_features(feature_file)?;
    let n = features.rows();
    let labels = read_labels(label_file)?;
    let splits = read_masks(mask_file)?;
    if labels.len() != n {
        return Err(GtransError::Dimension(format!(
            "{} labels for {n} feature rows",
            labels.len()
        )));
    }
    if splits.len() != n {
        return Err(GtransError::Dimension(format!(
            "{} mask entries for {n} feature rows",
            splits.len()
        )));
    }
    let raw = read_edges(edge_file, n)?;
    let (topology, cleanup) = Topology::new(n, &raw)?;
    if cleanup.self_loops > 0 {
        log::warn!("{}: dropped {} self-loops", edge_file.display(), cleanup.self_loops);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let g = Graph::new(topology, features, labels, k, splits)?;
    Ok((
        g,
        LoadReport {
            self_loops_dropped: cleanup.self_loops,
            duplicates_merged: cleanup.duplicates,
        },
    ))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| GtransError::io(path, e))
}

/// Write the four dataset files plus a header into `dir`.
pub fn save_graph(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GtransError::io(dir, e))?;
    let mut s = String::new();
    for &(u, v) in g.edges() {
        writeln!(s, "{u}\t{v}").unwrap();
    }
    write(dir.join(EDGE_FILE), &s)?;

    s.clear();
    for i in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(i).iter().map(|&x| fmt_f64(x)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write(dir.join(FEATURE_FILE), &s)?;

    s.clear();
    for y in g.labels() {
        writeln!(s, "{y}").unwrap();
    }
    write(dir.join(LABEL_FILE), &s)?;

    s.clear();
    for m in g.splits() {
        writeln!(s, "{}", m.as_str()).unwrap();
    }
    write(dir.join(MASK_FILE), &s)?;

    let mut h = KvMap::new();
    h.insert("num_nodes", g.num_nodes());
    h.insert("d", g.feature_dim());
    h.insert("K", g.num_classes());
    write(dir.join(HEADER_FILE), &h.to_text())
}

/// Inverse of [`save_graph`].
pub fn load_graph(dir: &Path) -> Result<Graph> {
    let header = KvMap::read(&dir.join(HEADER_FILE))?;
    let n: usize = header.require("num_nodes")?;
    let d: usize = header.require("d")?;
    let k: usize = header.require("K")?;
    let (g, _) = load_dataset(
        &dir.join(EDGE_FILE),
        &dir.join(FEATURE_FILE),
        &dir.join(LABEL_FILE),
        &dir.join(MASK_FILE),
    )?;
    if g.num_nodes() != n || (n > 0 && g.feature_dim() != d) {
        return Err(GtransError::Dimension(format!(
            "header says {n}x{d}, files give {}x{}",
            g.num_nodes(),
            g.feature_dim()
        )));
    }
    if k < g.num_classes() {
        return Err(GtransError::Domain(format!("header K={k} below max label")));
    }
    let topology = (**g.topology()).clone();
    Graph::new(topology, g.features().clone(), g.labels().to_vec(), k, g.splits().to_vec())
}
