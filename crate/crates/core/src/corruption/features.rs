use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{CorruptionKind, CorruptionRecord};
use crate::error::{GtransError, Result};
use crate::graph::{Graph, Split};
use crate::rng::{seeded, sub_seed};

/// Replace the feature rows of `⌊ratio·|test|⌋` uniformly chosen test nodes
/// with standard Gaussian draws.
pub fn inject_abnormal_features(g: &Graph, ratio: f64, seed: u64) -> Result<(Graph, CorruptionRecord)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(GtransError::Domain(format!("noise ratio {ratio} outside [0,1]")));
    }
    let mut test = g.nodes_in(Split::Test);
    if test.is_empty() {
        return Err(GtransError::Domain("empty test mask".into()));
    }
    let count = (ratio * test.len() as f64).floor() as usize;
    test.shuffle(&mut seeded(sub_seed(seed, "abnormal-nodes", 0)));
    let mut nodes = test[..count].to_vec();
    nodes.sort_unstable();
    let out = replace_rows(g, &nodes, seed)?;
    Ok((
        out,
        CorruptionRecord {
            kind: CorruptionKind::AbnormalFeatures,
            param: ratio,
            seed,
            nodes,
            injected: vec![],
            deleted: vec![],
        },
    ))
}

/// Rows are drawn in the order of `nodes` from one seeded stream.
pub(super) fn replace_rows(g: &Graph, nodes: &[usize], seed: u64) -> Result<Graph> {
    let mut x = g.features().clone();
    let mut rng = seeded(sub_seed(seed, "abnormal-rows", 0));
    for &i in nodes {
        if i >= g.num_nodes() {
            return Err(GtransError::Domain(format!("node {i} outside {} nodes", g.num_nodes())));
        }
        for v in x.row_mut(i) {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    g.with_features(x)
}
