use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gtrans_core::corruption::AttackConfig;
use gtrans_core::gnn::TrainConfig;
use gtrans_core::graph::SbmParams;
use gtrans_core::kv::{fmt_f64, KvMap};
use gtrans_core::{BackboneKind, GtransError, Result, TransformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Train on one SBM draw, test on a second draw with shifted parameters.
    OodShift,
    AbnormalFeatures,
    StructureAttack,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::OodShift => "ood_shift",
            Scenario::AbnormalFeatures => "abnormal_features",
            Scenario::StructureAttack => "structure_attack",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = GtransError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ood_shift" => Ok(Scenario::OodShift),
            "abnormal_features" => Ok(Scenario::AbnormalFeatures),
            "structure_attack" => Ok(Scenario::StructureAttack),
            _ => Err(GtransError::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Sbm(SbmParams),
    /// Directory holding `edges.tsv`, `features.csv`, `labels.txt`, `masks.txt`.
    Files(PathBuf),
}

/// Test-graph parameters for the shift scenario; unset fields copy the
/// training SBM.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OodShift {
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub feature_shift: Option<f64>,
}

impl OodShift {
    pub fn apply(&self, base: &SbmParams) -> SbmParams {
        SbmParams {
            p_in: self.p_in.unwrap_or(base.p_in),
            p_out: self.p_out.unwrap_or(base.p_out),
            feature_shift: self.feature_shift.unwrap_or(base.feature_shift),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub data: DataSource,
    pub ood: OodShift,
    pub backbone: BackboneKind,
    pub hidden: usize,
    pub dropout: f64,
    pub train: TrainConfig,
    pub transform: TransformConfig,
    pub noise_ratio: f64,
    pub attack: AttackConfig,
    pub repeat: usize,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::AbnormalFeatures,
            data: DataSource::Sbm(SbmParams {
                blocks: 2,
                nodes_per_block: 150,
                p_in: 0.05,
                p_out: 0.005,
                feature_dim: 32,
                feature_shift: 1.5,
            }),
            ood: OodShift::default(),
            backbone: BackboneKind::Gcn2,
            hidden: 32,
            dropout: 0.5,
            train: TrainConfig::default(),
            transform: TransformConfig {
                include_train_loss: true,
                ..TransformConfig::default()
            },
            noise_ratio: 0.3,
            attack: AttackConfig::default(),
            repeat: 10,
            base_seed: 0,
            out_dir: None,
        }
    }
}

fn opt<T: FromStr>(kv: &KvMap, key: &str) -> Result<Option<T>> {
    kv.get(key)
}

impl ExperimentConfig {
    /// Build from a flat key=value map. Keys absent from the map keep their
    /// defaults; `include_train_loss` defaults per scenario (on for the
    /// corruption scenarios, off for the shift).
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let d = Self::default();
        let scenario: Scenario = match kv.get_str("scenario") {
            Some(s) => s.parse()?,
            None => d.scenario,
        };
        let data = match kv.get_str("data") {
            None | Some("sbm") => {
                let DataSource::Sbm(s) = d.data.clone() else { unreachable!() };
                DataSource::Sbm(SbmParams {
                    blocks: kv.get_or("sbm_blocks", s.blocks)?,
                    nodes_per_block: kv.get_or("sbm_nodes_per_block", s.nodes_per_block)?,
                    p_in: kv.get_or("sbm_p_in", s.p_in)?,
                    p_out: kv.get_or("sbm_p_out", s.p_out)?,
                    feature_dim: kv.get_or("sbm_feature_dim", s.feature_dim)?,
                    feature_shift: kv.get_or("sbm_feature_shift", s.feature_shift)?,
                })
            }
            Some(dir) => DataSource::Files(PathBuf::from(dir)),
        };
        let ood = OodShift {
            p_in: opt(kv, "ood_p_in")?,
            p_out: opt(kv, "ood_p_out")?,
            feature_shift: opt(kv, "ood_feature_shift")?,
        };
        let mut transform_base = d.transform.clone();
        transform_base.include_train_loss = scenario != Scenario::OodShift;
        let transform = TransformConfig::from_kv(kv, transform_base)?;
        let attack = AttackConfig {
            ptb_rate: kv.get_or("ptb_rate", d.attack.ptb_rate)?,
            block_size: opt(kv, "attack_block_size")?,
            steps: kv.get_or("attack_steps", d.attack.steps)?,
            lr: kv.get_or("attack_lr", d.attack.lr)?,
            trials: kv.get_or("attack_trials", d.attack.trials)?,
        };
        let cfg = Self {
            scenario,
            data,
            ood,
            backbone: kv.get_or("backbone", d.backbone)?,
            hidden: kv.get_or("hidden", d.hidden)?,
            dropout: kv.get_or("dropout", d.dropout)?,
            train: TrainConfig {
                epochs: kv.get_or("train_epochs", d.train.epochs)?,
                lr: kv.get_or("train_lr", d.train.lr)?,
                weight_decay: kv.get_or("weight_decay", d.train.weight_decay)?,
            },
            transform,
            noise_ratio: kv.get_or("noise_ratio", d.noise_ratio)?,
            attack,
            repeat: kv.get_or("repeat", d.repeat)?,
            base_seed: kv.get_or("base_seed", d.base_seed)?,
            out_dir: opt::<String>(kv, "out")?.map(PathBuf::from),
        };
        let misplaced = match scenario {
            Scenario::StructureAttack => ["noise_ratio", "ood_p_in", "ood_p_out", "ood_feature_shift"].as_slice(),
            Scenario::AbnormalFeatures => ["ptb_rate", "ood_p_in", "ood_p_out", "ood_feature_shift"].as_slice(),
            Scenario::OodShift => ["ptb_rate", "noise_ratio"].as_slice(),
        };
        if let Some(k) = misplaced.iter().find(|k| kv.contains(k)) {
            return Err(GtransError::Config(format!("{k} does not apply to scenario {scenario}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvMap::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GtransError::Config(m.into()));
        if self.repeat < 1 {
            return bad("repeat must be at least 1");
        }
        if self.hidden < 1 {
            return bad("hidden must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0,1)");
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return bad("noise_ratio must lie in [0,1]");
        }
        if self.scenario == Scenario::StructureAttack && !(self.attack.ptb_rate > 0.0 && self.attack.ptb_rate <= 0.5) {
            return bad("ptb_rate must lie in (0, 0.5]");
        }
        if self.scenario == Scenario::OodShift && matches!(self.data, DataSource::Files(_)) {
            return bad("ood_shift needs SBM data");
        }
        self.transform.validate()
    }

    /// Replayable key=value form; scenario-foreign keys are omitted.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = self.transform.to_kv();
        kv.insert("scenario", self.scenario);
        match &self.data {
            DataSource::Sbm(s) => {
                kv.insert("data", "sbm");
                kv.insert("sbm_blocks", s.blocks);
                kv.insert("sbm_nodes_per_block", s.nodes_per_block);
                kv.insert("sbm_p_in", fmt_f64(s.p_in));
                kv.insert("sbm_p_out", fmt_f64(s.p_out));
                kv.insert("sbm_feature_dim", s.feature_dim);
                kv.insert("sbm_feature_shift", fmt_f64(s.feature_shift));
            }
            DataSource::Files(p) => kv.insert("data", p.display()),
        }
        kv.insert("backbone", self.backbone);
        kv.insert("hidden", self.hidden);
        kv.insert("dropout", fmt_f64(self.dropout));
        kv.insert("train_epochs", self.train.epochs);
        kv.insert("train_lr", fmt_f64(self.train.lr));
        kv.insert("weight_decay", fmt_f64(self.train.weight_decay));
        match self.scenario {
            Scenario::AbnormalFeatures => kv.insert("noise_ratio", fmt_f64(self.noise_ratio)),
            Scenario::StructureAttack => kv.insert("ptb_rate", fmt_f64(self.attack.ptb_rate)),
            Scenario::OodShift => {
                for (k, v) in [
                    ("ood_p_in", self.ood.p_in),
                    ("ood_p_out", self.ood.p_out),
                    ("ood_feature_shift", self.ood.feature_shift),
                ] {
                    if let Some(v) = v {
                        kv.insert(k, fmt_f64(v));
                    }
                }
            }
        }
        if let Some(b) = self.attack.block_size {
            kv.insert("attack_block_size", b);
        }
        kv.insert("attack_steps", self.attack.steps);
        kv.insert("attack_lr", fmt_f64(self.attack.lr));
        kv.insert("attack_trials", self.attack.trials);
        kv.insert("repeat", self.repeat);
        kv.insert("base_seed", self.base_seed);
        if let Some(o) = &self.out_dir {
            kv.insert("out", o.display());
        }
        kv
    }
}
