use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng as _;

use super::{CorruptionKind, CorruptionRecord};
use crate::error::{GtransError, Result};
use crate::gnn::{masked_cross_entropy, GcnModel};
use crate::graph::{Graph, NormalizedAdjacency, Split, Topology};
use crate::rng::{seeded, sub_seed, Rng};
use crate::transform::project_budget;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Perturbed edges as a fraction of `|E|`.
    pub ptb_rate: f64,
    /// Candidate block size; `None` means four times the budget.
    pub block_size: Option<usize>,
    pub steps: usize,
    /// Ascent step size on the normalized gradient; decays as `1/√(t+1)`.
    pub lr: f64,
    /// Discrete samples, the worst of which is kept.
    pub trials: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            ptb_rate: 0.2,
            block_size: None,
            steps: 50,
            lr: 1.0,
            trials: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Cand {
    u: usize,
    v: usize,
    /// Id in the clean topology for deletions.
    existing: Option<usize>,
}

struct Block {
    cands: Vec<Cand>,
    p: Vec<f64>,
    seen: HashSet<(usize, usize)>,
}

impl Block {
    fn add_existing(&mut self, clean: &Topology, rng: &mut Rng, count: usize) {
        let m = clean.num_edges();
        let mut added = 0;
        for _ in 0..count.saturating_mul(20) {
            if added == count {
                break;
            }
            let e = rng.random_range(0..m);
            let (u, v) = clean.edge(e);
            if self.seen.insert((u, v)) {
                self.cands.push(Cand { u, v, existing: Some(e) });
                self.p.push(0.0);
                added += 1;
            }
        }
    }

    fn add_non_edges(&mut self, clean: &Topology, rng: &mut Rng, count: usize) -> Result<()> {
        let n = clean.num_nodes();
        let mut added = 0;
        for _ in 0..count.saturating_mul(100).max(1000) {
            if added == count {
                return Ok(());
            }
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (u, v) = (a.min(b), a.max(b));
            if u == v || clean.has_edge(u, v) || !self.seen.insert((u, v)) {
                continue;
            }
            self.cands.push(Cand { u, v, existing: None });
            self.p.push(0.0);
            added += 1;
        }
        if added == count {
            Ok(())
        } else {
            Err(GtransError::Sampling(format!("found {added} of {count} non-edges")))
        }
    }

    /// Union of the clean edges and the candidate insertions, with the edge
    /// id of every candidate in it.
    fn union(&self, clean: &Topology) -> Result<(Arc<Topology>, Vec<usize>)> {
        let mut edges: Vec<(usize, usize)> = clean.edges().iter().map(|&(u, v)| (u as usize, v as usize)).collect();
        edges.extend(self.cands.iter().filter(|c| c.existing.is_none()).map(|c| (c.u, c.v)));
        let (topo, _) = Topology::new(clean.num_nodes(), &edges)?;
        let ids = self
            .cands
            .iter()
            .map(|c| topo.find_edge(c.u, c.v).expect("candidate in union"))
            .collect();
        Ok((Arc::new(topo), ids))
    }

    /// Weights on the union topology for perturbation probabilities `p`.
    fn weights(&self, topo: &Topology, ids: &[usize], p: &[f64]) -> Vec<f64> {
        let mut w = vec![1.0; topo.num_edges()];
        for ((c, &id), &pi) in self.cands.iter().zip(ids).zip(p) {
            w[id] = if c.existing.is_some() { 1.0 - pi } else { pi };
        }
        w
    }
}

fn test_loss(model: &GcnModel, g: &Graph, adj: &NormalizedAdjacency, nodes: &[usize]) -> Result<(f64, Vec<f64>)> {
    let trace = model.forward(adj, g.features())?;
    let (ce, d) = masked_cross_entropy(&trace.logits, g.labels(), nodes)?;
    let b = model.backward(&trace, Some(&d), None, false)?;
    Ok((ce, b.d_edge_weights))
}

/// Block-wise projected gradient ascent on the test-node cross entropy over
/// edge deletions and insertions, followed by the worst of several
/// Bernoulli samples. The number of changed edges never exceeds
/// `⌊ptb_rate·|E|⌋`.
pub fn attack_structure(
    model: &GcnModel,
    g: &Graph,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<(Graph, CorruptionRecord)> {
    if !(cfg.ptb_rate > 0.0 && cfg.ptb_rate <= 0.5) {
        return Err(GtransError::Domain(format!("ptb_rate {} outside (0, 0.5]", cfg.ptb_rate)));
    }
    let clean = g.topology();
    let budget = (cfg.ptb_rate * clean.num_edges() as f64).floor() as usize;
    if budget == 0 {
        return Err(GtransError::Domain("attack budget rounds to zero edges".into()));
    }
    if cfg.trials == 0 {
        return Err(GtransError::Config("attack trials must be at least 1".into()));
    }
    let nodes = g.nodes_in(Split::Test);
    let block_size = cfg.block_size.unwrap_or(4 * budget).max(1);
    let n_del = (block_size / 2).min(clean.num_edges());
    let mut rng = seeded(sub_seed(seed, "attack-block", 0));
    let mut block = Block {
        cands: vec![],
        p: vec![],
        seen: HashSet::new(),
    };
    block.add_existing(clean, &mut rng, n_del);
    block.add_non_edges(clean, &mut rng, block_size - block.cands.len())?;

    // Resampling stops halfway so the final steps refine a fixed block.
    let resample_until = cfg.steps / 2;
    for t in 0..cfg.steps {
        let (topo, ids) = block.union(clean)?;
        let w = block.weights(&topo, &ids, &block.p);
        let adj = NormalizedAdjacency::new(topo, Some(&w))?;
        let (_, dw) = test_loss(model, g, &adj, &nodes)?;
        let grad: Vec<f64> = block
            .cands
            .iter()
            .zip(&ids)
            .map(|(c, &id)| if c.existing.is_some() { -dw[id] } else { dw[id] })
            .collect();
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(GtransError::Numerical(format!("non-finite attack gradient at step {t}")));
        }
        let scale = grad.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale > 0.0 {
            let lr = cfg.lr / ((t + 1) as f64).sqrt();
            for (p, g) in block.p.iter_mut().zip(&grad) {
                *p += lr * g / scale;
            }
        }
        block.p = project_budget(&block.p, budget as f64)?;

        if t + 1 < resample_until {
            let mut kept = Block {
                cands: vec![],
                p: vec![],
                seen: HashSet::new(),
            };
            for (c, &p) in block.cands.iter().zip(&block.p) {
                if p > 1e-3 {
                    kept.cands.push(*c);
                    kept.p.push(p);
                    kept.seen.insert((c.u, c.v));
                }
            }
            let dels = kept.cands.iter().filter(|c| c.existing.is_some()).count();
            kept.seen.extend(block.seen.iter().copied());
            kept.add_existing(clean, &mut rng, n_del.saturating_sub(dels));
            let missing = block_size.saturating_sub(kept.cands.len());
            kept.add_non_edges(clean, &mut rng, missing)?;
            kept.seen = kept.cands.iter().map(|c| (c.u, c.v)).collect();
            block = kept;
        }
    }

    let (topo, ids) = block.union(clean)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for k in 0..cfg.trials {
        let mut r = seeded(sub_seed(seed, "attack-sample", k as u64));
        let mut flips: Vec<usize> = (0..block.p.len()).filter(|&i| r.random::<f64>() < block.p[i]).collect();
        if flips.len() > budget {
            flips.sort_by(|&a, &b| block.p[b].total_cmp(&block.p[a]).then(a.cmp(&b)));
            flips.truncate(budget);
        }
        let mut sample_p = vec![0.0; block.p.len()];
        flips.iter().for_each(|&i| sample_p[i] = 1.0);
        let w = block.weights(&topo, &ids, &sample_p);
        let adj = NormalizedAdjacency::new(topo.clone(), Some(&w))?;
        let trace = model.forward(&adj, g.features())?;
        let loss = masked_cross_entropy(&trace.logits, g.labels(), &nodes)?.0;
        if best.as_ref().is_none_or(|(l, _)| loss > *l) {
            best = Some((loss, flips));
        }
    }
    let (_, flips) = best.expect("at least one trial");

    let mut injected = vec![];
    let mut deleted = vec![];
    for &i in &flips {
        let c = block.cands[i];
        if c.existing.is_some() {
            deleted.push((c.u, c.v));
        } else {
            injected.push((c.u, c.v));
        }
    }
    injected.sort_unstable();
    deleted.sort_unstable();
    let record = CorruptionRecord {
        kind: CorruptionKind::StructureAttack,
        param: cfg.ptb_rate,
        seed,
        nodes: vec![],
        injected,
        deleted,
    };
    let attacked = record.apply(g)?;
    Ok((attacked, record))
}
