//! Plain-text network files.
//!
//! * edge lists: one `i j` pair per line, zero-based, whitespace separated;
//!   blank lines and `#` comments are skipped.
//! * labels: one community id per line; `-1`, `NA` or an empty line marks an
//!   unlabeled node.
//! * metadata: `key=value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::netgen::BinaryNetwork;
use crate::privacy::PrivacyParams;

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Raw `(i, j)` pairs in file order.
pub fn read_edge_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_error(path, ln + 1, "expected two node indices"));
        };
        let i = a
            .parse::<usize>()
            .map_err(|e| parse_error(path, ln + 1, format!("{a:?}: {e}")))?;
        let j = b
            .parse::<usize>()
            .map_err(|e| parse_error(path, ln + 1, format!("{b:?}: {e}")))?;
        out.push((i, j));
    }
    Ok(out)
}

/// Load an edge list over `n` nodes. Self-loops are dropped with a warning;
/// duplicates collapse; out-of-range indices are an error.
pub fn read_edge_list(path: &Path, n: usize) -> Result<BinaryNetwork> {
    let pairs = read_edge_pairs(path)?;
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::Dimension(format!(
            "{}: edge ({i},{j}) out of range for {n} nodes",
            path.display()
        )));
    }
    let loops = pairs.iter().filter(|(i, j)| i == j).count();
    if loops > 0 {
        log::warn!("{}: dropped {loops} self-loop(s)", path.display());
    }
    BinaryNetwork::from_edges(n, pairs)
}

pub fn write_edge_list(path: &Path, net: &BinaryNetwork) -> Result<()> {
    let mut s = String::new();
    for (i, j) in net.edges() {
        let _ = writeln!(s, "{i} {j}");
    }
    write_string(path, &s)
}

/// One entry per node; `None` for unlabeled nodes.
pub fn read_labels(path: &Path) -> Result<Vec<Option<i64>>> {
    let text = read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(ln, line)| {
            let t = line.trim();
            if t.is_empty() || t == "-1" || t.eq_ignore_ascii_case("na") {
                Ok(None)
            } else {
                t.parse::<i64>()
                    .map(Some)
                    .map_err(|e| parse_error(path, ln + 1, format!("{t:?}: {e}")))
            }
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut s = String::new();
    for l in labels {
        let _ = writeln!(s, "{l}");
    }
    write_string(path, &s)
}

pub fn read_metadata(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| parse_error(path, ln + 1, "expected key=value"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn layer_file_name(l: usize) -> String {
    format!("layer_{l}.edges")
}

pub const LABELS_FILE: &str = "labels.txt";
pub const META_FILE: &str = "meta.txt";

/// Write layers (index 0 is the target), target labels, and `meta.txt`
/// with `n`, `K`, `L` and per-layer `q_<l>` / `qp_<l>`.
pub fn export_layers(dir: &Path, layers: &[(&BinaryNetwork, PrivacyParams)], labels: &[usize], k: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = layers.first().map_or(labels.len(), |(net, _)| net.n());
    let mut meta = String::new();
    let _ = writeln!(meta, "n={n}");
    let _ = writeln!(meta, "K={k}");
    let _ = writeln!(meta, "L={}", layers.len().saturating_sub(1));
    for (l, (net, params)) in layers.iter().enumerate() {
        write_edge_list(&dir.join(layer_file_name(l)), net)?;
        let _ = writeln!(meta, "q_{l}={:?}", params.q());
        let _ = writeln!(meta, "qp_{l}={:?}", params.q_prime());
    }
    write_labels(&dir.join(LABELS_FILE), labels)?;
    write_string(&dir.join(META_FILE), &meta)
}

/// Layers written by [`export_layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedLayers {
    pub layers: Vec<BinaryNetwork>,
    pub params: Vec<PrivacyParams>,
    pub labels: Vec<Option<i64>>,
    pub k: usize,
}

pub fn import_layers(dir: &Path) -> Result<ExportedLayers> {
    let meta_path = dir.join(META_FILE);
    let meta = read_metadata(&meta_path)?;
    let get = |key: &str| -> Result<&String> {
        meta.get(key)
            .ok_or_else(|| parse_error(&meta_path, 0, format!("missing key {key}")))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|e| parse_error(&meta_path, 0, format!("{key}: {e}")))
    };
    let float = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|e| parse_error(&meta_path, 0, format!("{key}: {e}")))
    };
    let (n, k, l) = (int("n")?, int("K")?, int("L")?);
    let mut layers = Vec::with_capacity(l + 1);
    let mut params = Vec::with_capacity(l + 1);
    for i in 0..=l {
        layers.push(read_edge_list(&dir.join(layer_file_name(i)), n)?);
        params.push(PrivacyParams::new(
            float(&format!("q_{i}"))?,
            float(&format!("qp_{i}"))?,
        )?);
    }
    Ok(ExportedLayers {
        layers,
        params,
        labels: read_labels(&dir.join(LABELS_FILE))?,
        k,
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
