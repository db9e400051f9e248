use super::*;
use crate::gnn::{accuracy, checkpoint_digest, train, BackboneKind, GcnModel, TrainConfig};
use crate::graph::{generate_sbm, NormalizedAdjacency, SbmParams, Split};
use crate::linalg::Matrix;
use crate::rng::seeded;

fn sbm(seed: u64) -> Graph {
    generate_sbm(
        &SbmParams {
            blocks: 2,
            nodes_per_block: 40,
            p_in: 0.12,
            p_out: 0.02,
            feature_dim: 6,
            feature_shift: 1.5,
        },
        seed,
    )
    .unwrap()
}

fn trained(g: &Graph, seed: u64) -> GcnModel {
    let m0 = GcnModel::init(BackboneKind::Gcn2, g.feature_dim(), 8, 2, 0.0, &mut seeded(seed));
    train(&m0, g, &TrainConfig { epochs: 100, ..TrainConfig::default() }, seed).unwrap().0
}

fn test_accuracy(m: &GcnModel, g: &Graph) -> f64 {
    let adj = NormalizedAdjacency::new(g.topology().clone(), None).unwrap();
    let t = m.forward(&adj, g.features()).unwrap();
    accuracy(&t.logits, g.labels(), &g.nodes_in(Split::Test))
}

#[test]
fn zero_ratio_is_identity() {
    let g = sbm(0);
    let (out, rec) = inject_abnormal_features(&g, 0.0, 3).unwrap();
    assert_eq!(out, g);
    assert!(rec.nodes.is_empty());
}

#[test]
fn full_ratio_replaces_every_test_row() {
    let g = sbm(1);
    let (out, rec) = inject_abnormal_features(&g, 1.0, 3).unwrap();
    let test = g.nodes_in(Split::Test);
    assert_eq!(rec.nodes, test);
    let vals: Vec<f64> = test.iter().flat_map(|&i| out.features().row(i).to_vec()).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!(mean.abs() <= 3.0 / (vals.len() as f64).sqrt(), "mean {mean}");
    for &i in &test {
        assert_ne!(out.features().row(i), g.features().row(i));
    }
}

#[test]
fn non_selected_rows_bitwise_unchanged() {
    let g = sbm(2);
    for ratio in [0.1, 0.3, 0.7] {
        let (out, rec) = inject_abnormal_features(&g, ratio, 9).unwrap();
        assert_eq!(rec.nodes.len(), (ratio * g.nodes_in(Split::Test).len() as f64).floor() as usize);
        for i in 0..g.num_nodes() {
            if !rec.nodes.contains(&i) {
                let a: Vec<u64> = out.features().row(i).iter().map(|x| x.to_bits()).collect();
                let b: Vec<u64> = g.features().row(i).iter().map(|x| x.to_bits()).collect();
                assert_eq!(a, b);
            }
        }
        assert_eq!(out.labels(), g.labels());
        assert_eq!(out.splits(), g.splits());
        assert_eq!(out.topology(), g.topology());
    }
}

#[test]
fn abnormal_features_errors() {
    let g = sbm(3);
    assert!(inject_abnormal_features(&g, 1.5, 0).is_err());
    let no_test = Graph::new(
        (**g.topology()).clone(),
        g.features().clone(),
        g.labels().to_vec(),
        2,
        vec![Split::Train; g.num_nodes()],
    )
    .unwrap();
    assert!(matches!(inject_abnormal_features(&no_test, 0.3, 0), Err(GtransError::Domain(_))));
}

#[test]
fn record_round_trip_and_replay() {
    let g = sbm(4);
    let (out, rec) = inject_abnormal_features(&g, 0.5, 12).unwrap();
    let back = CorruptionRecord::parse(&rec.to_text()).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.apply(&g).unwrap(), out);

    let m = trained(&g, 4);
    let cfg = AttackConfig { steps: 10, ..AttackConfig::default() };
    let (att, rec) = attack_structure(&m, &g, &cfg, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rec.txt");
    rec.write(&p).unwrap();
    let back = CorruptionRecord::read(&p).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.apply(&g).unwrap(), att);
}

#[test]
fn attack_without_steps_is_identity() {
    let g = sbm(5);
    let m = trained(&g, 5);
    let cfg = AttackConfig { steps: 0, ..AttackConfig::default() };
    let (att, rec) = attack_structure(&m, &g, &cfg, 1).unwrap();
    assert_eq!(att, g);
    assert!(rec.injected.is_empty() && rec.deleted.is_empty());
}

#[test]
fn attack_respects_budget_and_model() {
    let g = sbm(6);
    let m = trained(&g, 6);
    let digest = checkpoint_digest(&m);
    for rate in [0.05, 0.1, 0.2] {
        let cfg = AttackConfig { ptb_rate: rate, steps: 20, ..AttackConfig::default() };
        let (att, rec) = attack_structure(&m, &g, &cfg, 2).unwrap();
        let budget = (rate * g.num_edges() as f64).floor() as usize;
        let st = crate::graph::graph_stats(&att, Some(&g)).unwrap();
        assert!(st.edges_added + st.edges_removed <= budget);
        assert_eq!(st.edges_added, rec.injected.len());
        assert_eq!(st.edges_removed, rec.deleted.len());
        for &(u, v) in &rec.injected {
            assert!(!g.topology().has_edge(u, v));
        }
        for &(u, v) in &rec.deleted {
            assert!(g.topology().has_edge(u, v));
        }
    }
    assert_eq!(checkpoint_digest(&m), digest);
}

#[test]
fn attack_is_deterministic_and_hurts() {
    let g = sbm(7);
    let m = trained(&g, 7);
    let cfg = AttackConfig::default();
    let a = attack_structure(&m, &g, &cfg, 3).unwrap();
    let b = attack_structure(&m, &g, &cfg, 3).unwrap();
    assert_eq!(a, b);
    assert!(test_accuracy(&m, &a.0) < test_accuracy(&m, &g));
}

#[test]
fn attack_domain_errors() {
    let g = sbm(8);
    let m = trained(&g, 8);
    for rate in [0.0, 0.6] {
        let cfg = AttackConfig { ptb_rate: rate, ..AttackConfig::default() };
        assert!(attack_structure(&m, &g, &cfg, 0).is_err());
    }
    let (t, _) = Topology::new(4, &[(0, 1), (1, 2)]).unwrap();
    let tiny = Graph::new(t, Matrix::zeros(4, 6), vec![0, 1, 0, 1], 2, vec![Split::Test; 4]).unwrap();
    let cfg = AttackConfig { ptb_rate: 0.2, ..AttackConfig::default() };
    assert!(matches!(attack_structure(&m, &tiny, &cfg, 0), Err(GtransError::Domain(_))));
}

fn graph_with(n: usize, edges: &[(usize, usize)]) -> Graph {
    let (t, _) = Topology::new(n, edges).unwrap();
    Graph::new(t, Matrix::zeros(n, 1), vec![0; n], 1, vec![Split::Test; n]).unwrap()
}

#[test]
fn removal_fraction_examples() {
    let clean_edges: Vec<_> = (0..10).map(|i| (i, i + 1)).collect();
    let adv: Vec<_> = (0..4).map(|i| (i, i + 5)).collect();
    let clean = graph_with(12, &clean_edges);
    let attacked_edges: Vec<_> = clean_edges.iter().chain(&adv).copied().collect();
    let attacked = graph_with(12, &attacked_edges);

    // Defense removes three adversarial edges and one clean edge.
    let defended_edges: Vec<_> = clean_edges[1..].iter().chain(&adv[3..]).copied().collect();
    let defended = graph_with(12, &defended_edges);
    assert_eq!(adversarial_edge_removal_fraction(&clean, &attacked, &defended).unwrap(), (0.75, 0.1));

    assert_eq!(adversarial_edge_removal_fraction(&clean, &attacked, &clean).unwrap(), (1.0, 0.0));
    assert_eq!(adversarial_edge_removal_fraction(&clean, &attacked, &attacked).unwrap(), (0.0, 0.0));
    assert!(matches!(
        adversarial_edge_removal_fraction(&clean, &clean, &clean),
        Err(GtransError::UndefinedStatistic(_))
    ));
}
