use std::path::Path;

use crate::error::{GtransError, Result};
use crate::kv::{fmt_f64, KvMap};
use crate::surrogate::{Objective, SurrogateKind, SurrogateRegistry};

/// Adaptation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformConfig {
    /// Feature step size.
    pub eta1: f64,
    /// Structure step size.
    pub eta2: f64,
    /// Feature epochs per alternation cycle.
    pub tau1: usize,
    /// Structure epochs per alternation cycle.
    pub tau2: usize,
    pub epochs: usize,
    /// Bernoulli trials for the final discretization.
    pub samples: usize,
    /// Budget as a fraction of the test graph's edge count.
    pub budget_fraction: f64,
    pub surrogate: String,
    pub drop_ratio: f64,
    pub lambda: f64,
    pub include_train_loss: bool,
    /// Record the gradient correlation against test labels every epoch
    /// (reporting only).
    pub track_rho: bool,
    pub seed: u64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            eta1: 0.01,
            eta2: 0.1,
            tau1: 4,
            tau2: 1,
            epochs: 10,
            samples: 20,
            budget_fraction: 0.05,
            surrogate: "contrastive".into(),
            drop_ratio: 0.5,
            lambda: 1.0,
            include_train_loss: false,
            track_rho: false,
            seed: 0,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GtransError::Config(m));
        if self.tau1 + self.tau2 < 1 {
            return bad("tau1 + tau2 must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.samples < 1 {
            return bad("samples must be at least 1".into());
        }
        if !(self.budget_fraction > 0.0) || !self.budget_fraction.is_finite() {
            return bad(format!("budget_fraction {} must be positive", self.budget_fraction));
        }
        if !(self.eta1 >= 0.0 && self.eta2 >= 0.0) {
            return bad("step sizes must be non-negative".into());
        }
        self.surrogate_kind().validate().map_err(|e| GtransError::Config(e.to_string()))
    }

    pub fn surrogate_kind(&self) -> SurrogateKind {
        SurrogateKind {
            name: self.surrogate.clone(),
            drop_ratio: self.drop_ratio,
            lambda: self.lambda,
        }
    }

    pub fn objective(&self, registry: &SurrogateRegistry) -> Result<Objective> {
        Objective::new(registry, &self.surrogate_kind(), self.include_train_loss)
    }

    /// Read overrides from a key=value map; unknown keys are ignored so the
    /// same file can carry other sections' settings.
    pub fn from_kv(kv: &KvMap, base: TransformConfig) -> Result<Self> {
        Ok(Self {
            eta1: kv.get_or("eta1", base.eta1)?,
            eta2: kv.get_or("eta2", base.eta2)?,
            tau1: kv.get_or("tau1", base.tau1)?,
            tau2: kv.get_or("tau2", base.tau2)?,
            epochs: kv.get_or("epochs", base.epochs)?,
            samples: kv.get_or("samples", base.samples)?,
            budget_fraction: kv.get_or("budget_fraction", base.budget_fraction)?,
            surrogate: kv.get_or("surrogate", base.surrogate)?,
            drop_ratio: kv.get_or("drop_ratio", base.drop_ratio)?,
            lambda: kv.get_or("lambda", base.lambda)?,
            include_train_loss: kv.get_or("include_train_loss", base.include_train_loss)?,
            track_rho: kv.get_or("track_rho", base.track_rho)?,
            seed: kv.get_or("seed", base.seed)?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let cfg = Self::from_kv(&KvMap::read(path)?, Self::default())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("eta1", fmt_f64(self.eta1));
        kv.insert("eta2", fmt_f64(self.eta2));
        kv.insert("tau1", self.tau1);
        kv.insert("tau2", self.tau2);
        kv.insert("epochs", self.epochs);
        kv.insert("samples", self.samples);
        kv.insert("budget_fraction", fmt_f64(self.budget_fraction));
        kv.insert("surrogate", &self.surrogate);
        kv.insert("drop_ratio", fmt_f64(self.drop_ratio));
        kv.insert("lambda", fmt_f64(self.lambda));
        kv.insert("include_train_loss", self.include_train_loss);
        kv.insert("track_rho", self.track_rho);
        kv.insert("seed", self.seed);
        kv
    }
}
