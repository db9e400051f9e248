use std::fmt;
use std::str::FromStr;

use gtrans_core::{GtransError, Result, SurrogateRegistry, TransformConfig};

use crate::config::ExperimentConfig;
use crate::experiment::{run_variants, ExperimentResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Which variables are optimized.
    Params,
    /// Which loss drives the optimization.
    Loss,
}

impl FromStr for Axis {
    type Err = GtransError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "params" => Ok(Axis::Params),
            "loss" => Ok(Axis::Loss),
            _ => Err(GtransError::Config(format!("unknown ablation axis {s:?}"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Params => "params",
            Axis::Loss => "loss",
        })
    }
}

/// The adaptation settings compared along `axis`, derived from `base`.
pub fn variants(base: &TransformConfig, axis: Axis) -> Vec<(String, TransformConfig)> {
    let v = |name: &str, t: TransformConfig| (name.to_string(), t);
    match axis {
        Axis::Params => vec![
            v("features_only", TransformConfig { tau1: 1, tau2: 0, ..base.clone() }),
            v("structure_only", TransformConfig { tau1: 0, tau2: 1, ..base.clone() }),
            v("both", base.clone()),
        ],
        Axis::Loss => vec![
            v(
                "surrogate_only",
                TransformConfig {
                    include_train_loss: false,
                    ..base.clone()
                },
            ),
            v(
                "train_only",
                TransformConfig {
                    include_train_loss: true,
                    lambda: 0.0,
                    ..base.clone()
                },
            ),
            v(
                "combined",
                TransformConfig {
                    include_train_loss: true,
                    ..base.clone()
                },
            ),
            v(
                "entropy",
                TransformConfig {
                    surrogate: "entropy".into(),
                    ..base.clone()
                },
            ),
            v(
                "reconstruction",
                TransformConfig {
                    surrogate: "reconstruction".into(),
                    ..base.clone()
                },
            ),
        ],
    }
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub axis: Axis,
    pub cells: Vec<(String, ExperimentResult)>,
}

impl AblationResult {
    pub fn get(&self, name: &str) -> Option<&ExperimentResult> {
        self.cells.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

/// Every variant runs on the same trained models and corrupted graphs.
pub fn ablation(cfg: &ExperimentConfig, axis: Axis, registry: &SurrogateRegistry) -> Result<AblationResult> {
    cfg.validate()?;
    Ok(AblationResult {
        axis,
        cells: run_variants(cfg, &variants(&cfg.transform, axis), registry)?,
    })
}
