use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{GtransError, Result};
use crate::graph::GraphStats;
use crate::kv::{fmt_f64, KvMap};

use super::config::TransformConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Feature,
    Structure,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Feature => "feature",
            StepKind::Structure => "structure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: StepKind,
    /// Objective on the relaxed graph before this epoch's update.
    pub loss: f64,
    /// Σ δ after the update.
    pub delta_mass: f64,
    pub delta_max: f64,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptReport {
    pub config: TransformConfig,
    pub budget: f64,
    pub trajectory: Vec<EpochRecord>,
    pub final_relaxed_loss: f64,
    pub loss_increased: bool,
    pub chosen_sample: usize,
    pub sample_losses: Vec<f64>,
    pub flipped_edges: Vec<(usize, usize)>,
    pub stats_before: Option<GraphStats>,
    pub stats_after: Option<GraphStats>,
    pub model_digest: String,
    /// Kept out of the deterministic files; written to `timing.txt`.
    pub wall_time_secs: f64,
}

fn put_stats(kv: &mut KvMap, prefix: &str, s: &Option<GraphStats>) {
    match s {
        None => kv.insert(&format!("{prefix}_stats"), "undefined"),
        Some(s) => {
            kv.insert(&format!("{prefix}_homophily"), fmt_f64(s.homophily));
            kv.insert(&format!("{prefix}_feature_similarity"), fmt_f64(s.pairwise_feature_similarity));
            kv.insert(&format!("{prefix}_num_edges"), s.num_edges);
            kv.insert(&format!("{prefix}_edges_added"), s.edges_added);
            kv.insert(&format!("{prefix}_edges_removed"), s.edges_removed);
        }
    }
}

impl AdaptReport {
    pub fn chosen_loss(&self) -> f64 {
        self.sample_losses[self.chosen_sample]
    }

    /// Key=value header.
    pub fn to_text(&self) -> String {
        let mut kv = self.config.to_kv();
        kv.insert("budget", fmt_f64(self.budget));
        kv.insert("initial_loss", fmt_f64(self.trajectory.first().map_or(f64::NAN, |r| r.loss)));
        kv.insert("final_relaxed_loss", fmt_f64(self.final_relaxed_loss));
        kv.insert("loss_increased", self.loss_increased);
        kv.insert("chosen_sample", self.chosen_sample);
        kv.insert("chosen_loss", fmt_f64(self.chosen_loss()));
        kv.insert("num_flipped", self.flipped_edges.len());
        kv.insert("model_digest", &self.model_digest);
        put_stats(&mut kv, "before", &self.stats_before);
        put_stats(&mut kv, "after", &self.stats_after);
        kv.to_text()
    }

    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("epoch,step,loss,delta_mass,delta_max,rho\n");
        for r in &self.trajectory {
            let rho = r.rho.map(fmt_f64).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.epoch,
                r.step.as_str(),
                fmt_f64(r.loss),
                fmt_f64(r.delta_mass),
                fmt_f64(r.delta_max),
                rho
            )
            .unwrap();
        }
        s
    }

    pub fn samples_csv(&self) -> String {
        let mut s = String::from("trial,loss,chosen\n");
        for (t, &l) in self.sample_losses.iter().enumerate() {
            writeln!(s, "{t},{},{}", fmt_f64(l), u8::from(t == self.chosen_sample)).unwrap();
        }
        s
    }

    pub fn flipped_tsv(&self) -> String {
        self.flipped_edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect()
    }

    /// Write `report.txt`, `trajectory.csv`, `samples.csv`,
    /// `flipped_edges.tsv` and `timing.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| GtransError::io(dir, e))?;
        let files = [
            ("report.txt", self.to_text()),
            ("trajectory.csv", self.trajectory_csv()),
            ("samples.csv", self.samples_csv()),
            ("flipped_edges.tsv", self.flipped_tsv()),
            ("timing.txt", format!("wall_time_secs={:.3}\n", self.wall_time_secs)),
        ];
        for (name, text) in files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| GtransError::io(&p, e))?;
        }
        Ok(())
    }
}
