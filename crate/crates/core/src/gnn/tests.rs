use std::sync::Arc;

use rand::Rng as _;

use super::*;
use crate::graph::{generate_sbm, Graph, SbmParams, Split, Topology};
use crate::linalg::dot;
use crate::rng::seeded;
use crate::testutil::{assert_grad, gaussian_matrix, random_graph};

fn topo(n: usize, e: &[(usize, usize)]) -> Arc<Topology> {
    Arc::new(Topology::new(n, e).unwrap().0)
}

fn scalar_model(kind: BackboneKind, w1: f64, b1: f64, w2: f64, b2: f64) -> GcnModel {
    GcnModel {
        kind,
        w1: Matrix::from_vec(1, 1, vec![w1]).unwrap(),
        b1: vec![b1],
        w2: Matrix::from_vec(1, 1, vec![w2]).unwrap(),
        b2: vec![b2],
        dropout: 0.0,
    }
}

#[test]
fn isolated_node_hidden_is_xw1() {
    let mut rng = seeded(1);
    let model = GcnModel {
        kind: BackboneKind::Gcn2,
        w1: Matrix::from_rows(&[vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.5]]).unwrap(),
        b1: vec![0.0; 3],
        w2: gaussian_matrix(3, 2, &mut rng),
        b2: vec![0.0; 2],
        dropout: 0.0,
    };
    let adj = NormalizedAdjacency::new(topo(1, &[]), None).unwrap();
    let x = Matrix::from_rows(&[vec![0.7, 1.3]]).unwrap();
    let t = model.forward(&adj, &x).unwrap();
    assert_eq!(t.hidden, x.matmul(&model.w1).unwrap());
}

#[test]
fn two_node_path_by_hand() {
    // Â = [[.5,.5],[.5,.5]], X = [1,3]: XW1 = [2,6], ÂXW1 = [4,4], Z = [4,4],
    // ZW2 = [-6,-6], logits = [-6,-6] + 0.25.
    let adj = NormalizedAdjacency::new(topo(2, &[(0, 1)]), None).unwrap();
    let x = Matrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
    let t = scalar_model(BackboneKind::Gcn2, 2.0, 0.0, -1.5, 0.25).forward(&adj, &x).unwrap();
    for &l in t.logits.as_slice() {
        assert!((l + 5.75).abs() < 1e-12);
    }
    // Negative bias kills the ReLU: logits collapse to b2.
    let t = scalar_model(BackboneKind::Gcn2, 2.0, -4.5, -1.5, 0.25).forward(&adj, &x).unwrap();
    assert_eq!(t.logits.as_slice(), &[0.25, 0.25]);
    // sgc2: ÂÂXW1 = [4,4], logits = -6 + 0.25.
    let t = scalar_model(BackboneKind::Sgc2, 2.0, 0.0, -1.5, 0.25).forward(&adj, &x).unwrap();
    for &l in t.logits.as_slice() {
        assert!((l + 5.75).abs() < 1e-12);
    }
}

#[test]
fn zero_features_zero_logits() {
    let mut rng = seeded(2);
    let g = random_graph(6, 3, 2, &mut rng);
    let model = GcnModel::init(BackboneKind::Gcn2, 3, 4, 2, 0.0, &mut rng);
    let adj = NormalizedAdjacency::new(g.topology().clone(), None).unwrap();
    let t = model.forward(&adj, &Matrix::zeros(6, 3)).unwrap();
    assert!(t.logits.as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn shape_and_domain_errors() {
    let mut rng = seeded(3);
    let model = GcnModel::init(BackboneKind::Gcn2, 3, 4, 2, 0.0, &mut rng);
    let adj = NormalizedAdjacency::new(topo(2, &[(0, 1)]), None).unwrap();
    assert!(matches!(model.forward(&adj, &Matrix::zeros(2, 2)), Err(GtransError::Dimension(_))));
    let mut x = Matrix::zeros(2, 3);
    x[(0, 0)] = f64::NAN;
    assert!(matches!(model.forward(&adj, &x), Err(GtransError::Domain(_))));
}

fn check_gradients(kind: BackboneKind, seed: u64, n: usize, d: usize, h: usize) {
    let mut rng = seeded(seed);
    let k = 3;
    let g = random_graph(n, d, k, &mut rng);
    let model = GcnModel::init(kind, d, h, k, 0.0, &mut rng);
    let m = g.num_edges();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    let x = g.features().clone();
    // L = <C, logits> + <E, Z> exercises both upstream paths.
    let c = gaussian_matrix(n, k, &mut rng);
    let e = gaussian_matrix(n, h, &mut rng);
    let t = g.topology().clone();
    let loss = |w: &[f64], x: &Matrix, model: &GcnModel| {
        let adj = NormalizedAdjacency::new(t.clone(), Some(w)).unwrap();
        let tr = model.forward(&adj, x).unwrap();
        dot(tr.logits.as_slice(), c.as_slice()) + dot(tr.hidden.as_slice(), e.as_slice())
    };
    let adj = NormalizedAdjacency::new(t.clone(), Some(&w)).unwrap();
    let trace = model.forward(&adj, &x).unwrap();
    let grads = model.backward(&trace, Some(&c), Some(&e), true).unwrap();

    assert_grad(
        "features",
        grads.d_features.as_slice(),
        &mut |v| loss(&w, &Matrix::from_vec(n, d, v.to_vec()).unwrap(), &model),
        x.as_slice(),
        1e-4,
    );
    assert_grad("edge weights", &grads.d_edge_weights, &mut |v| loss(v, &x, &model), &w, 1e-4);
    let p = model.params_vec();
    let mut mm = model.clone();
    assert_grad(
        "params",
        &grads.d_weights.unwrap().flatten(),
        &mut |v| {
            mm.set_params(v);
            loss(&w, &x, &mm)
        },
        &p,
        1e-4,
    );
}

#[test]
fn gcn_gradients_match_finite_differences() {
    for seed in 0..20 {
        check_gradients(BackboneKind::Gcn2, seed, 6 + (seed as usize % 7), 2 + seed as usize % 4, 2 + seed as usize % 3);
    }
}

#[test]
fn sgc_gradients_match_finite_differences() {
    for seed in 100..120 {
        check_gradients(BackboneKind::Sgc2, seed, 6 + (seed as usize % 7), 2 + seed as usize % 4, 2 + seed as usize % 3);
    }
}

#[test]
fn zero_upstream_gives_zero_bundle() {
    let mut rng = seeded(4);
    let g = random_graph(6, 3, 2, &mut rng);
    let model = GcnModel::init(BackboneKind::Gcn2, 3, 4, 2, 0.0, &mut rng);
    let adj = NormalizedAdjacency::new(g.topology().clone(), None).unwrap();
    let t = model.forward(&adj, g.features()).unwrap();
    let b = model.backward(&t, Some(&Matrix::zeros(6, 2)), None, true).unwrap();
    assert!(b.d_features.as_slice().iter().all(|&x| x == 0.0));
    assert!(b.d_edge_weights.iter().all(|&x| x == 0.0));
    assert!(b.d_weights.unwrap().flatten().iter().all(|&x| x == 0.0));
}

#[test]
fn mismatched_trace_rejected() {
    let mut rng = seeded(5);
    let g = random_graph(6, 3, 2, &mut rng);
    let a = GcnModel::init(BackboneKind::Gcn2, 3, 4, 2, 0.0, &mut rng);
    let b = GcnModel::init(BackboneKind::Sgc2, 3, 4, 2, 0.0, &mut rng);
    let adj = NormalizedAdjacency::new(g.topology().clone(), None).unwrap();
    let t = a.forward(&adj, g.features()).unwrap();
    assert!(matches!(b.backward(&t, None, None, false), Err(GtransError::Consistency(_))));
}

#[test]
fn permutation_equivariance() {
    let mut rng = seeded(6);
    let g = random_graph(10, 4, 3, &mut rng);
    let mut perm: Vec<usize> = (0..10).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut rng);
    let gp = g.permuted(&perm).unwrap();
    for kind in [BackboneKind::Gcn2, BackboneKind::Sgc2] {
        let model = GcnModel::init(kind, 4, 5, 3, 0.0, &mut rng);
        let l = model
            .forward(&NormalizedAdjacency::new(g.topology().clone(), None).unwrap(), g.features())
            .unwrap()
            .logits;
        let lp = model
            .forward(&NormalizedAdjacency::new(gp.topology().clone(), None).unwrap(), gp.features())
            .unwrap()
            .logits;
        for i in 0..10 {
            for (a, b) in l.row(i).iter().zip(lp.row(perm[i])) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn unit_weights_equal_unweighted_forward() {
    let mut rng = seeded(7);
    let g = random_graph(9, 3, 2, &mut rng);
    let model = GcnModel::init(BackboneKind::Gcn2, 3, 4, 2, 0.0, &mut rng);
    let a = model
        .forward(&NormalizedAdjacency::new(g.topology().clone(), None).unwrap(), g.features())
        .unwrap();
    let ones = vec![1.0; g.num_edges()];
    let b = model
        .forward(&NormalizedAdjacency::new(g.topology().clone(), Some(&ones)).unwrap(), g.features())
        .unwrap();
    assert_eq!(a.logits, b.logits);
}

fn separable_sbm() -> Graph {
    generate_sbm(
        &SbmParams {
            blocks: 2,
            nodes_per_block: 60,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 8,
            feature_shift: 4.0,
        },
        11,
    )
    .unwrap()
}

#[test]
fn training_separable_sbm() {
    let g = separable_sbm();
    let model = GcnModel::init(BackboneKind::Gcn2, 8, 16, 2, 0.5, &mut seeded(1));
    let (trained, hist) = train(&model, &g, &TrainConfig::default(), 1).unwrap();
    assert_eq!(hist.train_acc.len(), 200);
    assert!(*hist.train_acc.last().unwrap() >= 0.95, "{:?}", hist.train_acc.last());
    // Determinism.
    let (again, _) = train(&model, &g, &TrainConfig::default(), 1).unwrap();
    assert_eq!(to_checkpoint(&trained), to_checkpoint(&again));
}

#[test]
fn zero_epochs_or_zero_lr_leave_model() {
    let g = separable_sbm();
    let model = GcnModel::init(BackboneKind::Gcn2, 8, 16, 2, 0.5, &mut seeded(2));
    let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
    assert_eq!(train(&model, &g, &cfg, 0).unwrap().0, model);
    let cfg = TrainConfig { epochs: 5, lr: 0.0, weight_decay: 0.0 };
    assert_eq!(train(&model, &g, &cfg, 0).unwrap().0, model);
}

#[test]
fn empty_train_mask_rejected() {
    let g = separable_sbm();
    let g = Graph::new(
        (**g.topology()).clone(),
        g.features().clone(),
        g.labels().to_vec(),
        2,
        vec![Split::Test; g.num_nodes()],
    )
    .unwrap();
    let model = GcnModel::init(BackboneKind::Gcn2, 8, 4, 2, 0.0, &mut seeded(0));
    assert!(train(&model, &g, &TrainConfig::default(), 0).is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let model = GcnModel::init(BackboneKind::Sgc2, 5, 3, 4, 0.25, &mut seeded(8));
    let text = to_checkpoint(&model);
    let back = parse_checkpoint(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(to_checkpoint(&back), text);
    assert_eq!(checkpoint_digest(&back), checkpoint_digest(&model));
    assert!(parse_checkpoint("kind=gcn2\nd=1\nh=1\nK=1\nweights\n1.0\n").is_err());
}
