use std::thread;

use gtrans_core::corruption::{
    adversarial_edge_removal_fraction, attack_structure, inject_abnormal_features, CorruptionRecord,
};
use gtrans_core::gnn::{accuracy, checkpoint_digest, train};
use gtrans_core::graph::{generate_sbm, graph_stats, load_dataset, EDGE_FILE, FEATURE_FILE, LABEL_FILE, MASK_FILE};
use gtrans_core::rng::{seeded, sub_seed};
use gtrans_core::{
    gtrans_adapt, AdaptReport, BackboneKind, GcnModel, Graph, GraphStats, GtransError, NormalizedAdjacency, Result,
    Split, SurrogateRegistry, TransformConfig,
};

use crate::config::{DataSource, ExperimentConfig, Scenario};

/// Seed of run `i`.
pub fn run_seed(cfg: &ExperimentConfig, i: usize) -> u64 {
    cfg.base_seed + i as u64
}

pub fn build_data(cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    match &cfg.data {
        DataSource::Sbm(p) => generate_sbm(p, sub_seed(seed, "data", 0)),
        DataSource::Files(dir) => Ok(load_dataset(
            &dir.join(EDGE_FILE),
            &dir.join(FEATURE_FILE),
            &dir.join(LABEL_FILE),
            &dir.join(MASK_FILE),
        )?
        .0),
    }
}

pub fn train_backbone(cfg: &ExperimentConfig, kind: BackboneKind, g: &Graph, seed: u64) -> Result<GcnModel> {
    let tag = kind as u64;
    let m0 = GcnModel::init(
        kind,
        g.feature_dim(),
        cfg.hidden,
        g.num_classes(),
        cfg.dropout,
        &mut seeded(sub_seed(seed, "init", tag)),
    );
    Ok(train(&m0, g, &cfg.train, sub_seed(seed, "train", tag))?.0)
}

/// Apply the scenario's corruption to the clean graph.
pub fn corrupt(cfg: &ExperimentConfig, model: &GcnModel, clean: &Graph, seed: u64) -> Result<(Graph, Option<CorruptionRecord>)> {
    let s = sub_seed(seed, "corrupt", 0);
    match cfg.scenario {
        Scenario::AbnormalFeatures => {
            let (g, r) = inject_abnormal_features(clean, cfg.noise_ratio, s)?;
            Ok((g, Some(r)))
        }
        Scenario::StructureAttack => {
            let (g, r) = attack_structure(model, clean, &cfg.attack, s)?;
            Ok((g, Some(r)))
        }
        Scenario::OodShift => {
            let DataSource::Sbm(p) = &cfg.data else {
                return Err(GtransError::Config("ood_shift needs SBM data".into()));
            };
            Ok((generate_sbm(&cfg.ood.apply(p), s)?, None))
        }
    }
}

pub fn test_accuracy(model: &GcnModel, g: &Graph, nodes: &[usize]) -> Result<f64> {
    let adj = NormalizedAdjacency::new(g.topology().clone(), None)?;
    Ok(accuracy(&model.forward(&adj, g.features())?.logits, g.labels(), nodes))
}

/// Everything a run needs before adaptation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub run: usize,
    pub seed: u64,
    pub clean: Graph,
    pub corrupted: Graph,
    pub model: GcnModel,
    pub record: Option<CorruptionRecord>,
}

pub fn prepare(cfg: &ExperimentConfig, run: usize) -> Result<Prepared> {
    let seed = run_seed(cfg, run);
    let clean = build_data(cfg, seed)?;
    let model = train_backbone(cfg, cfg.backbone, &clean, seed)?;
    let (corrupted, record) = corrupt(cfg, &model, &clean, seed)?;
    Ok(Prepared {
        run,
        seed,
        clean,
        corrupted,
        model,
        record,
    })
}

/// One row of results.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub run: usize,
    pub seed: u64,
    /// Model on the uncorrupted graph (the source graph for the shift).
    pub clean: f64,
    pub vanilla: f64,
    pub adapted: f64,
    /// Accuracy restricted to nodes with replaced features.
    pub vanilla_abnormal: Option<f64>,
    pub adapted_abnormal: Option<f64>,
    pub stats_clean: Option<GraphStats>,
    pub stats_corrupted: Option<GraphStats>,
    pub stats_defended: Option<GraphStats>,
    pub frac_adv_removed: Option<f64>,
    pub frac_clean_removed: Option<f64>,
    pub loss_increased: bool,
    pub error: Option<String>,
}

impl SeedRow {
    pub fn failed(run: usize, seed: u64, e: &GtransError) -> Self {
        Self {
            run,
            seed,
            clean: f64::NAN,
            vanilla: f64::NAN,
            adapted: f64::NAN,
            vanilla_abnormal: None,
            adapted_abnormal: None,
            stats_clean: None,
            stats_corrupted: None,
            stats_defended: None,
            frac_adv_removed: None,
            frac_clean_removed: None,
            loss_increased: false,
            error: Some(e.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Adapt the corrupted graph with the prepared model and score both.
pub fn adapt_and_eval(
    p: &Prepared,
    transform: &TransformConfig,
    registry: &SurrogateRegistry,
) -> Result<(SeedRow, Graph, AdaptReport)> {
    let mut tcfg = transform.clone();
    tcfg.seed = sub_seed(p.seed, "adapt", 0);
    let objective = tcfg.objective(registry)?;
    let digest = checkpoint_digest(&p.model);
    let (defended, report) = gtrans_adapt(&p.model, &p.corrupted, &objective, &tcfg)?;
    if checkpoint_digest(&p.model) != digest {
        return Err(GtransError::Consistency("model checkpoint changed".into()));
    }
    let test = p.corrupted.nodes_in(Split::Test);
    let abnormal = p.record.as_ref().map(|r| r.nodes.clone()).filter(|n| !n.is_empty());
    let (frac_adv, frac_clean) = match adversarial_edge_removal_fraction(&p.clean, &p.corrupted, &defended) {
        Ok((a, c)) if p.record.as_ref().is_some_and(|r| !r.injected.is_empty()) => (Some(a), Some(c)),
        _ => (None, None),
    };
    let row = SeedRow {
        run: p.run,
        seed: p.seed,
        clean: test_accuracy(&p.model, &p.clean, &p.clean.nodes_in(Split::Test))?,
        vanilla: test_accuracy(&p.model, &p.corrupted, &test)?,
        adapted: test_accuracy(&p.model, &defended, &test)?,
        vanilla_abnormal: abnormal.as_ref().map(|n| test_accuracy(&p.model, &p.corrupted, n)).transpose()?,
        adapted_abnormal: abnormal.as_ref().map(|n| test_accuracy(&p.model, &defended, n)).transpose()?,
        stats_clean: graph_stats(&p.clean, None).ok(),
        stats_corrupted: graph_stats(&p.corrupted, Some(&p.clean)).ok(),
        stats_defended: graph_stats(&defended, Some(&p.corrupted)).ok(),
        frac_adv_removed: frac_adv,
        frac_clean_removed: frac_clean,
        loss_increased: report.loss_increased,
        error: None,
    };
    Ok((row, defended, report))
}

/// Results of one configuration over all runs.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<SeedRow>,
    pub records: Vec<Option<CorruptionRecord>>,
    pub reports: Vec<Option<AdaptReport>>,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentResult {
    pub fn ok_rows(&self) -> impl Iterator<Item = &SeedRow> {
        self.rows.iter().filter(|r| r.ok())
    }

    pub fn column(&self, f: impl Fn(&SeedRow) -> Option<f64>) -> Vec<f64> {
        self.ok_rows().filter_map(f).collect()
    }

    pub fn mean_vanilla(&self) -> f64 {
        mean_std(&self.column(|r| Some(r.vanilla))).0
    }

    pub fn mean_adapted(&self) -> f64 {
        mean_std(&self.column(|r| Some(r.adapted))).0
    }
}

/// Run every prepared seed concurrently; `work` maps one seed to its output.
pub fn for_each_run<T: Send>(cfg: &ExperimentConfig, work: impl Fn(usize) -> T + Sync) -> Vec<T> {
    thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.repeat).map(|i| s.spawn({ let w = &work; move || w(i) })).collect();
        handles.into_iter().map(|h| h.join().expect("run panicked")).collect()
    })
}

/// Run several adaptation settings against the same prepared seeds.
pub fn run_variants(
    cfg: &ExperimentConfig,
    variants: &[(String, TransformConfig)],
    registry: &SurrogateRegistry,
) -> Result<Vec<(String, ExperimentResult)>> {
    let per_run = for_each_run(cfg, |i| {
        let prepared = prepare(cfg, i);
        variants
            .iter()
            .map(|(_, t)| match &prepared {
                Ok(p) => match adapt_and_eval(p, t, registry) {
                    Ok((row, _, report)) => (row, p.record.clone(), Some(report)),
                    Err(e) => {
                        log::warn!("run {i}: {e}");
                        (SeedRow::failed(i, p.seed, &e), p.record.clone(), None)
                    }
                },
                Err(e) => {
                    log::warn!("run {i}: {e}");
                    (SeedRow::failed(i, run_seed(cfg, i), e), None, None)
                }
            })
            .collect::<Vec<_>>()
    });
    let mut out = vec![];
    for (v, (name, t)) in variants.iter().enumerate() {
        let mut config = cfg.clone();
        config.transform = t.clone();
        let mut res = ExperimentResult {
            config,
            rows: vec![],
            records: vec![],
            reports: vec![],
        };
        for run in &per_run {
            let (row, rec, rep) = run[v].clone();
            res.rows.push(row);
            res.records.push(rec);
            res.reports.push(rep);
        }
        if res.ok_rows().next().is_none() {
            return Err(GtransError::Consistency(format!(
                "every run failed for {name}: {}",
                res.rows[0].error.clone().unwrap_or_default()
            )));
        }
        out.push((name.clone(), res));
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, &SurrogateRegistry::with_builtins())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, registry: &SurrogateRegistry) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut v = run_variants(cfg, &[("main".into(), cfg.transform.clone())], registry)?;
    Ok(v.remove(0).1)
}
