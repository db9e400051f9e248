use rand::Rng as _;

use super::compactness::{descend, moving_average, two_class_representations, DescentConfig};
use super::*;
use crate::gnn::BackboneKind;
use crate::rng::seeded;
use crate::testutil::{assert_grad, random_graph};

fn instance(seed: u64, n: usize, kind: BackboneKind) -> (GcnModel, Graph, Vec<f64>) {
    let mut rng = seeded(seed);
    let g = random_graph(n, 4, 3, &mut rng);
    let mut model = GcnModel::init(kind, 4, 6, 3, 0.0, &mut rng);
    // Positive hidden bias keeps ReLU rows alive on tiny graphs.
    model.b1.iter_mut().for_each(|b| *b = 0.5);
    let w = (0..g.num_edges()).map(|_| rng.random_range(0.3..1.0)).collect();
    (model, g, w)
}

fn check_objective(obj: &Objective, seed: u64, n: usize, kind: BackboneKind) {
    let (model, g, w) = instance(seed, n, kind);
    let x = g.features().clone();
    let val = obj.evaluate(&model, &g, &w, &x, 77).unwrap();
    let (rows, cols) = x.shape();
    assert_grad(
        "features",
        val.grads.d_features.as_slice(),
        &mut |v| obj.evaluate(&model, &g, &w, &Matrix::from_vec(rows, cols, v.to_vec()).unwrap(), 77).unwrap().total,
        x.as_slice(),
        1e-4,
    );
    assert_grad(
        "edge weights",
        &val.grads.d_edge_weights,
        &mut |v| obj.evaluate(&model, &g, v, &x, 77).unwrap().total,
        &w,
        1e-4,
    );
}

#[test]
fn registry_lists_and_builds_builtins() {
    let r = SurrogateRegistry::with_builtins();
    assert_eq!(r.names().collect::<Vec<_>>(), vec!["contrastive", "entropy", "reconstruction"]);
    for name in ["contrastive", "entropy", "reconstruction"] {
        assert_eq!(r.build(&SurrogateKind::named(name, 1.0)).unwrap().name(), name);
    }
    assert!(matches!(r.build(&SurrogateKind::named("nope", 1.0)), Err(GtransError::Config(_))));
    assert!(r.build(&SurrogateKind::contrastive(1.0, 1.0)).is_err());
    assert!(r.build(&SurrogateKind::contrastive(0.5, -1.0)).is_err());
}

#[test]
fn custom_surrogates_can_be_registered() {
    let mut r = SurrogateRegistry::empty();
    r.register("ent", |_| Ok(Arc::new(Entropy)));
    assert_eq!(r.build(&SurrogateKind::named("ent", 1.0)).unwrap().name(), "entropy");
}

#[test]
fn contrastive_pipeline_matches_finite_differences() {
    let r = SurrogateRegistry::with_builtins();
    let obj = Objective::new(&r, &SurrogateKind::contrastive(0.5, 1.0), false).unwrap();
    check_objective(&obj, 1, 6, BackboneKind::Gcn2);
    check_objective(&obj, 2, 6, BackboneKind::Sgc2);
}

#[test]
fn combined_objective_matches_finite_differences() {
    let r = SurrogateRegistry::with_builtins();
    for (i, name) in ["contrastive", "entropy", "reconstruction"].iter().enumerate() {
        let obj = Objective::new(&r, &SurrogateKind::named(name, 0.3), true).unwrap();
        check_objective(&obj, 10 + i as u64, 8, BackboneKind::Gcn2);
    }
}

#[test]
fn zero_lambda_reduces_to_cross_entropy() {
    let r = SurrogateRegistry::with_builtins();
    let obj = Objective::new(&r, &SurrogateKind::contrastive(0.5, 0.0), true).unwrap();
    let (model, g, w) = instance(3, 9, BackboneKind::Gcn2);
    let val = obj.evaluate(&model, &g, &w, g.features(), 5).unwrap();
    let adj = NormalizedAdjacency::new(g.topology().clone(), Some(&w)).unwrap();
    let t = model.forward(&adj, g.features()).unwrap();
    let (ce, dl) = masked_cross_entropy(&t.logits, g.labels(), &g.nodes_in(Split::Train)).unwrap();
    let b = model.backward(&t, Some(&dl), None, false).unwrap();
    assert_eq!(val.total, ce);
    assert_eq!(val.grads.d_features, b.d_features);
    assert_eq!(val.grads.d_edge_weights, b.d_edge_weights);
    assert!(val.surrogate_loss.is_none());
}

#[test]
fn surrogate_only_equals_contrastive_pipeline() {
    let r = SurrogateRegistry::with_builtins();
    let obj = Objective::new(&r, &SurrogateKind::contrastive(0.5, 1.0), false).unwrap();
    let (model, g, w) = instance(4, 9, BackboneKind::Gcn2);
    let val = obj.evaluate(&model, &g, &w, g.features(), 5).unwrap();
    let adj = NormalizedAdjacency::new(g.topology().clone(), Some(&w)).unwrap();
    let main = model.forward(&adj, g.features()).unwrap();
    let ctx = SurrogateContext {
        model: &model,
        adj: &adj,
        features: g.features(),
        main: &main,
        seed: 5,
    };
    let (ls, b) = Contrastive { drop_ratio: 0.5 }.value_and_grad(&ctx).unwrap();
    assert_eq!(val.total, ls);
    assert_eq!(val.grads.d_features, b.d_features);
    assert!(val.train_loss.is_none());
}

#[test]
fn gradient_oracle_over_twenty_instances() {
    let r = SurrogateRegistry::with_builtins();
    let objs: Vec<Objective> = ["contrastive", "entropy", "reconstruction"]
        .iter()
        .map(|n| Objective::new(&r, &SurrogateKind::named(n, 1.0), false).unwrap())
        .collect();
    for seed in 0..20u64 {
        let obj = &objs[seed as usize % 3];
        let kind = if seed % 2 == 0 { BackboneKind::Gcn2 } else { BackboneKind::Sgc2 };
        check_objective(obj, 200 + seed, 6 + seed as usize % 6, kind);
    }
}

mod props {
    use proptest::prelude::*;

    use super::*;

    fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(prop_oneof![-3.0..-0.1f64, 0.1..3.0f64], rows * cols)
            .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
    }

    proptest! {
        #[test]
        fn contrastive_is_scale_invariant(z in mat(4, 3), zh in mat(4, 3), zt in mat(4, 3), c in 0.01..100.0f64) {
            let base = contrastive_loss(&z, &zh, &zt).unwrap().0;
            let mut zc = z.clone(); zc.scale(c);
            let mut zhc = zh.clone(); zhc.scale(c);
            let mut ztc = zt.clone(); ztc.scale(c);
            prop_assert!((contrastive_loss(&zc, &zh, &zt).unwrap().0 - base).abs() < 1e-10);
            prop_assert!((contrastive_loss(&z, &zhc, &zt).unwrap().0 - base).abs() < 1e-10);
            prop_assert!((contrastive_loss(&z, &zh, &ztc).unwrap().0 - base).abs() < 1e-10);
        }
    }
}

#[test]
fn alignment_descent_compacts_pure_classes() {
    let (z0, labels) = two_class_representations(30, 8, 0.8, 3);
    let cfg = DescentConfig {
        steps: 50,
        lr: 0.05,
        view_purity: 1.0,
        two_term: false,
        seed: 1,
    };
    let tr = descend(&z0, &labels, &cfg).unwrap();
    let ma = moving_average(&tr.within_variance, 5);
    for w in ma.windows(2) {
        assert!(w[1] <= w[0], "moving average rose: {w:?}");
    }
    assert!(tr.within_variance.last().unwrap() < &tr.within_variance[0]);
}

#[test]
fn second_term_prevents_collapse() {
    let (z0, labels) = two_class_representations(30, 8, 0.3, 4);
    let base = DescentConfig {
        steps: 50,
        lr: 0.05,
        view_purity: 0.7,
        two_term: false,
        seed: 2,
    };
    let one = descend(&z0, &labels, &base).unwrap();
    let two = descend(&z0, &labels, &DescentConfig { two_term: true, ..base }).unwrap();
    let d0 = one.center_distance[0];
    assert!(*one.center_distance.last().unwrap() < d0);
    assert!(*two.center_distance.last().unwrap() > 0.5 * d0);
}

#[test]
fn degenerate_hidden_row_surfaces() {
    let (mut model, g, w) = instance(5, 7, BackboneKind::Gcn2);
    model.b1.iter_mut().for_each(|b| *b = -1e6);
    let r = SurrogateRegistry::with_builtins();
    let obj = Objective::new(&r, &SurrogateKind::contrastive(0.5, 1.0), false).unwrap();
    let err = obj.evaluate(&model, &g, &w, g.features(), 0).unwrap_err();
    assert!(matches!(err, GtransError::DegenerateRepresentation { .. }));
}

