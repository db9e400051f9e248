//! Test-time corruptions: abnormal Gaussian features and a gradient-based
//! structure evasion attack, plus adversarial-edge bookkeeping.

mod attack;
mod features;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub use attack::{attack_structure, AttackConfig};
pub use features::inject_abnormal_features;

use crate::error::{GtransError, Result};
use crate::graph::{Graph, Topology};
use crate::kv::{fmt_f64, KvMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionKind {
    AbnormalFeatures,
    StructureAttack,
}

impl CorruptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::AbnormalFeatures => "abnormal_features",
            CorruptionKind::StructureAttack => "structure_attack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "abnormal_features" => Some(CorruptionKind::AbnormalFeatures),
            "structure_attack" => Some(CorruptionKind::StructureAttack),
            _ => None,
        }
    }
}

/// What a corruption changed; enough to replay it on the clean graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionRecord {
    pub kind: CorruptionKind,
    /// Noise ratio or perturbation rate.
    pub param: f64,
    pub seed: u64,
    /// Nodes whose features were replaced, ascending.
    pub nodes: Vec<usize>,
    pub injected: Vec<(usize, usize)>,
    pub deleted: Vec<(usize, usize)>,
}

impl CorruptionRecord {
    pub fn to_text(&self) -> String {
        let mut kv = KvMap::new();
        kv.insert("kind", self.kind.as_str());
        kv.insert("param", fmt_f64(self.param));
        kv.insert("seed", self.seed);
        let mut s = kv.to_text();
        s.push_str("[nodes]\n");
        for n in &self.nodes {
            writeln!(s, "{n}").unwrap();
        }
        for (name, list) in [("injected", &self.injected), ("deleted", &self.deleted)] {
            writeln!(s, "[{name}]").unwrap();
            for (u, v) in list {
                writeln!(s, "{u}\t{v}").unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| GtransError::Config(format!("corruption record: {m}"));
        let mut header = String::new();
        let mut section = "";
        let mut nodes = vec![];
        let mut injected = vec![];
        let mut deleted = vec![];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name {
                    "nodes" => "nodes",
                    "injected" => "injected",
                    "deleted" => "deleted",
                    other => return Err(bad(format!("unknown section {other:?}"))),
                };
                continue;
            }
            let num = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("line {}: bad index {t:?}", i + 1)));
            let pair = || -> Result<(usize, usize)> {
                let mut it = line.split_whitespace();
                match (it.next(), it.next(), it.next()) {
                    (Some(a), Some(b), None) => Ok((num(a)?, num(b)?)),
                    _ => Err(bad(format!("line {}: expected an edge", i + 1))),
                }
            };
            match section {
                "" => {
                    header.push_str(line);
                    header.push('\n');
                }
                "nodes" => nodes.push(num(line)?),
                "injected" => injected.push(pair()?),
                _ => deleted.push(pair()?),
            }
        }
        let kv = KvMap::parse(&header)?;
        let kind: String = kv.require("kind")?;
        Ok(Self {
            kind: CorruptionKind::parse(&kind).ok_or_else(|| bad(format!("unknown kind {kind:?}")))?,
            param: kv.require("param")?,
            seed: kv.require("seed")?,
            nodes,
            injected,
            deleted,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| GtransError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| GtransError::io(path, e))?)
    }

    /// Re-apply the recorded corruption to the clean graph.
    pub fn apply(&self, clean: &Graph) -> Result<Graph> {
        match self.kind {
            CorruptionKind::AbnormalFeatures => features::replace_rows(clean, &self.nodes, self.seed),
            CorruptionKind::StructureAttack => {
                let n = clean.num_nodes();
                let gone: HashSet<(usize, usize)> = self.deleted.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
                let mut edges: Vec<(usize, usize)> = clean
                    .edges()
                    .iter()
                    .map(|&(u, v)| (u as usize, v as usize))
                    .filter(|e| !gone.contains(e))
                    .collect();
                edges.extend_from_slice(&self.injected);
                if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
                    return Err(GtransError::Domain(format!("recorded edge ({u},{v}) outside {n} nodes")));
                }
                clean.with_topology(Topology::new(n, &edges)?.0)
            }
        }
    }
}

fn edge_set(g: &Graph) -> HashSet<(u32, u32)> {
    g.edges().iter().copied().collect()
}

/// `(frac_adv_removed, frac_clean_removed)`: the share of injected edges
/// that the defense removed, and the share of surviving clean edges it
/// removed.
pub fn adversarial_edge_removal_fraction(clean: &Graph, attacked: &Graph, defended: &Graph) -> Result<(f64, f64)> {
    if clean.num_nodes() != attacked.num_nodes() || clean.num_nodes() != defended.num_nodes() {
        return Err(GtransError::Domain("graphs have different node counts".into()));
    }
    let (c, a, d) = (edge_set(clean), edge_set(attacked), edge_set(defended));
    let adversarial: Vec<_> = a.difference(&c).collect();
    let kept_clean: Vec<_> = a.intersection(&c).collect();
    if adversarial.is_empty() {
        return Err(GtransError::UndefinedStatistic("attacked graph has no injected edges".into()));
    }
    if kept_clean.is_empty() {
        return Err(GtransError::UndefinedStatistic("attacked graph has no clean edges".into()));
    }
    let removed = |set: &[&(u32, u32)]| set.iter().filter(|e| !d.contains(e)).count() as f64 / set.len() as f64;
    Ok((removed(&adversarial), removed(&kept_clean)))
}

#[cfg(test)]
mod tests;
