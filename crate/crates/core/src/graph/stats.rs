use std::collections::HashSet;

use super::Graph;
use crate::error::{GtransError, Result};
use crate::linalg::cosine_or_zero;

/// Interpretation statistics of a graph, optionally against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub homophily: f64,
    pub pairwise_feature_similarity: f64,
    pub num_edges: usize,
    pub edges_added: usize,
    pub edges_removed: usize,
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    if g.num_edges() == 0 {
        return Err(GtransError::UndefinedStatistic("homophily of an edgeless graph".into()));
    }
    let y = g.labels();
    let same = g
        .edges()
        .iter()
        .filter(|&&(u, v)| y[u as usize] == y[v as usize])
        .count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// Mean cosine similarity of features across edges (zero vectors count as 0).
pub fn pairwise_feature_similarity(g: &Graph) -> Result<f64> {
    if g.num_edges() == 0 {
        return Err(GtransError::UndefinedStatistic(
            "feature similarity of an edgeless graph".into(),
        ));
    }
    let x = g.features();
    let total: f64 = g
        .edges()
        .iter()
        .map(|&(u, v)| cosine_or_zero(x.row(u as usize), x.row(v as usize)))
        .sum();
    Ok(total / g.num_edges() as f64)
}

pub fn graph_stats(g: &Graph, reference: Option<&Graph>) -> Result<GraphStats> {
    let (added, removed) = match reference {
        None => (0, 0),
        Some(r) => {
            if r.num_nodes() != g.num_nodes() {
                return Err(GtransError::Domain(format!(
                    "reference has {} nodes, graph has {}",
                    r.num_nodes(),
                    g.num_nodes()
                )));
            }
            let mine: HashSet<_> = g.edges().iter().collect();
            let theirs: HashSet<_> = r.edges().iter().collect();
            (mine.difference(&theirs).count(), theirs.difference(&mine).count())
        }
    };
    Ok(GraphStats {
        homophily: edge_homophily(g)?,
        pairwise_feature_similarity: pairwise_feature_similarity(g)?,
        num_edges: g.num_edges(),
        edges_added: added,
        edges_removed: removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Split, Topology};
    use crate::linalg::Matrix;

    fn graph(n: usize, edges: &[(usize, usize)], feats: Vec<Vec<f64>>, labels: Vec<usize>) -> Graph {
        let k = labels.iter().max().unwrap() + 1;
        Graph::new(
            Topology::new(n, edges).unwrap().0,
            Matrix::from_rows(&feats).unwrap(),
            labels,
            k,
            vec![Split::Test; n],
        )
        .unwrap()
    }

    #[test]
    fn homophily_cases() {
        let f = vec![vec![1.0]; 4];
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)], f[..3].to_vec(), vec![0, 0, 1]);
        assert!((edge_homophily(&tri).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let same = graph(3, &[(0, 1), (1, 2)], f[..3].to_vec(), vec![2, 2, 2]);
        assert_eq!(edge_homophily(&same).unwrap(), 1.0);
        let bip = graph(4, &[(0, 2), (0, 3), (1, 2), (1, 3)], f, vec![0, 0, 1, 1]);
        assert_eq!(edge_homophily(&bip).unwrap(), 0.0);
        let empty = graph(2, &[], vec![vec![1.0]; 2], vec![0, 1]);
        assert!(matches!(edge_homophily(&empty), Err(GtransError::UndefinedStatistic(_))));
    }

    #[test]
    fn similarity_cases() {
        let same = graph(2, &[(0, 1)], vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![0, 0]);
        assert!((pairwise_feature_similarity(&same).unwrap() - 1.0).abs() < 1e-15);
        let orth = graph(2, &[(0, 1)], vec![vec![1.0, 0.0], vec![0.0, 3.0]], vec![0, 0]);
        assert_eq!(pairwise_feature_similarity(&orth).unwrap(), 0.0);
        let opp = graph(2, &[(0, 1)], vec![vec![1.0, -2.0], vec![-1.0, 2.0]], vec![0, 0]);
        assert!((pairwise_feature_similarity(&opp).unwrap() + 1.0).abs() < 1e-15);
        let zero = graph(2, &[(0, 1)], vec![vec![0.0, 0.0], vec![1.0, 2.0]], vec![0, 0]);
        assert_eq!(pairwise_feature_similarity(&zero).unwrap(), 0.0);
    }

    #[test]
    fn added_and_removed_counts() {
        let f = vec![vec![1.0]; 6];
        let clean_edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
        let clean = graph(6, &clean_edges, f.clone(), vec![0, 0, 0, 1, 1, 1]);
        let s = graph_stats(&clean, Some(&clean)).unwrap();
        assert_eq!((s.edges_added, s.edges_removed), (0, 0));

        let minus = graph(6, &clean_edges[1..], f.clone(), vec![0, 0, 0, 1, 1, 1]);
        let s = graph_stats(&minus, Some(&clean)).unwrap();
        assert_eq!((s.edges_added, s.edges_removed), (0, 1));

        // 3 injected, (2,3) deleted.
        let attacked = graph(
            6,
            &[(0, 1), (1, 2), (3, 4), (4, 5), (0, 5), (1, 4), (2, 5)],
            f,
            vec![0, 0, 0, 1, 1, 1],
        );
        let s = graph_stats(&attacked, Some(&clean)).unwrap();
        assert_eq!((s.edges_added, s.edges_removed), (3, 1));
        assert_eq!(s.num_edges, 7);
    }
}
