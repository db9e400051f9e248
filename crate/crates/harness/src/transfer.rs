use gtrans_core::rng::sub_seed;
use gtrans_core::{gtrans_adapt, BackboneKind, Result, Split, SurrogateRegistry};

use crate::config::ExperimentConfig;
use crate::experiment::{build_data, corrupt, for_each_run, run_seed, test_accuracy, train_backbone};

pub const BACKBONES: [BackboneKind; 2] = [BackboneKind::Gcn2, BackboneKind::Sgc2];

/// Mean test accuracy over runs. `adapted[r][c]`: graph adapted with
/// backbone `r`, evaluated with backbone `c`; `noisy[c]`: corrupted graph
/// evaluated with backbone `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub backbones: [BackboneKind; 2],
    pub noisy: [f64; 2],
    pub adapted: [[f64; 2]; 2],
    pub runs: usize,
}

type RunCells = ([f64; 2], [[f64; 2]; 2]);

/// Both backbones are trained on the same clean graph; the corruption is
/// generated once per run (against the first backbone when it needs one).
pub fn cross_architecture(cfg: &ExperimentConfig, registry: &SurrogateRegistry) -> Result<TransferMatrix> {
    cfg.validate()?;
    let objective = cfg.transform.objective(registry)?;
    let runs: Vec<Result<RunCells>> = for_each_run(cfg, |i| {
        let seed = run_seed(cfg, i);
        let clean = build_data(cfg, seed)?;
        let models = [
            train_backbone(cfg, BACKBONES[0], &clean, seed)?,
            train_backbone(cfg, BACKBONES[1], &clean, seed)?,
        ];
        let (corrupted, _) = corrupt(cfg, &models[0], &clean, seed)?;
        let test = corrupted.nodes_in(Split::Test);
        let mut noisy = [0.0; 2];
        let mut adapted = [[0.0; 2]; 2];
        for c in 0..2 {
            noisy[c] = test_accuracy(&models[c], &corrupted, &test)?;
        }
        for r in 0..2 {
            let mut t = cfg.transform.clone();
            t.seed = sub_seed(seed, "adapt", 0);
            let (g, _) = gtrans_adapt(&models[r], &corrupted, &objective, &t)?;
            for c in 0..2 {
                adapted[r][c] = test_accuracy(&models[c], &g, &test)?;
            }
        }
        Ok((noisy, adapted))
    });
    let ok: Vec<RunCells> = runs.into_iter().collect::<Result<_>>()?;
    let n = ok.len() as f64;
    let mut m = TransferMatrix {
        backbones: BACKBONES,
        noisy: [0.0; 2],
        adapted: [[0.0; 2]; 2],
        runs: ok.len(),
    };
    for (noisy, adapted) in &ok {
        for c in 0..2 {
            m.noisy[c] += noisy[c] / n;
            for r in 0..2 {
                m.adapted[r][c] += adapted[r][c] / n;
            }
        }
    }
    Ok(m)
}
