//! Text checkpoints: a key=value header, a `weights` marker line, then one
//! value per line in W1, b1, W2, b2 row-major order (17 significant digits).

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BackboneKind, GcnModel};
use crate::error::{GtransError, Result};
use crate::kv::{fmt_f64, KvMap};
use crate::linalg::Matrix;

const MARKER: &str = "weights";

pub fn to_checkpoint(model: &GcnModel) -> String {
    let mut h = KvMap::new();
    h.insert("kind", model.kind);
    h.insert("d", model.input_dim());
    h.insert("h", model.hidden_dim());
    h.insert("K", model.num_classes());
    h.insert("dropout", fmt_f64(model.dropout));
    let mut s = h.to_text();
    s.push_str(MARKER);
    s.push('\n');
    for x in model.params_vec() {
        s.push_str(&fmt_f64(x));
        s.push('\n');
    }
    s
}

pub fn parse_checkpoint(text: &str) -> Result<GcnModel> {
    let (head, body) = text
        .split_once(&format!("{MARKER}\n"))
        .ok_or_else(|| GtransError::Config("checkpoint lacks weights section".into()))?;
    let h = KvMap::parse(head)?;
    let kind: BackboneKind = h.require::<String>("kind")?.parse()?;
    let d: usize = h.require("d")?;
    let hid: usize = h.require("h")?;
    let k: usize = h.require("K")?;
    let dropout: f64 = h.get_or("dropout", 0.0)?;
    let values: Vec<f64> = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| GtransError::Config(format!("bad checkpoint value {l:?}")))
        })
        .collect::<Result<_>>()?;
    let mut model = GcnModel {
        kind,
        w1: Matrix::zeros(d, hid),
        b1: vec![0.0; hid],
        w2: Matrix::zeros(hid, k),
        b2: vec![0.0; k],
        dropout,
    };
    if values.len() != model.num_params() {
        return Err(GtransError::Dimension(format!(
            "checkpoint has {} values, header implies {}",
            values.len(),
            model.num_params()
        )));
    }
    model.set_params(&values);
    model.validate()?;
    Ok(model)
}

pub fn save_checkpoint(model: &GcnModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_checkpoint(model)).map_err(|e| GtransError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<GcnModel> {
    let text = std::fs::read_to_string(path).map_err(|e| GtransError::io(path, e))?;
    parse_checkpoint(&text)
}

/// SHA-256 of the serialized checkpoint, hex encoded.
pub fn checkpoint_digest(model: &GcnModel) -> String {
    let digest = Sha256::digest(to_checkpoint(model).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
