use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gtrans_core::kv::{fmt_f64, KvMap};
use gtrans_core::{GraphStats, GtransError, Result};

use crate::ablation::AblationResult;
use crate::experiment::{mean_std, ExperimentResult, SeedRow};
use crate::transfer::TransferMatrix;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GtransError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| GtransError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const RESULTS_HEADER: &str =
    "run,seed,clean,vanilla,adapted,vanilla_abnormal,adapted_abnormal,frac_adv_removed,frac_clean_removed,loss_increased,error";

pub fn results_csv(rows: &[SeedRow]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.run,
            r.seed,
            fmt_f64(r.clean),
            fmt_f64(r.vanilla),
            fmt_f64(r.adapted),
            opt(r.vanilla_abnormal),
            opt(r.adapted_abnormal),
            opt(r.frac_adv_removed),
            opt(r.frac_clean_removed),
            r.loss_increased,
            err
        )
        .unwrap();
    }
    s
}

type Metric = fn(&SeedRow) -> Option<f64>;
type StatColumn = fn(&SeedRow) -> Option<&GraphStats>;

/// Aggregates as key=value: `<metric>_mean`, `<metric>_std`.
pub fn summary(result: &ExperimentResult) -> KvMap {
    let mut kv = KvMap::new();
    kv.insert("scenario", result.config.scenario);
    kv.insert("runs", result.rows.len());
    kv.insert("runs_ok", result.ok_rows().count());
    let metrics: [(&str, Metric); 7] = [
        ("clean", |r| Some(r.clean)),
        ("vanilla", |r| Some(r.vanilla)),
        ("adapted", |r| Some(r.adapted)),
        ("vanilla_abnormal", |r| r.vanilla_abnormal),
        ("adapted_abnormal", |r| r.adapted_abnormal),
        ("frac_adv_removed", |r| r.frac_adv_removed),
        ("frac_clean_removed", |r| r.frac_clean_removed),
    ];
    for (name, f) in metrics {
        let col = result.column(f);
        if col.is_empty() {
            continue;
        }
        let (m, s) = mean_std(&col);
        kv.insert(&format!("{name}_mean"), fmt_f64(m));
        kv.insert(&format!("{name}_std"), fmt_f64(s));
    }
    let stat_cols: [(&str, StatColumn); 3] = [
        ("clean", |r| r.stats_clean.as_ref()),
        ("corrupted", |r| r.stats_corrupted.as_ref()),
        ("defended", |r| r.stats_defended.as_ref()),
    ];
    for (name, f) in stat_cols {
        let hs: Vec<f64> = result.ok_rows().filter_map(f).map(|s| s.homophily).collect();
        let fs: Vec<f64> = result.ok_rows().filter_map(f).map(|s| s.pairwise_feature_similarity).collect();
        if !hs.is_empty() {
            kv.insert(&format!("{name}_homophily_mean"), fmt_f64(mean_std(&hs).0));
            kv.insert(&format!("{name}_feature_similarity_mean"), fmt_f64(mean_std(&fs).0));
        }
    }
    kv
}

pub fn stats_csv(rows: &[SeedRow]) -> String {
    let mut s = String::from("run,graph,homophily,feature_similarity,num_edges,edges_added,edges_removed\n");
    for r in rows {
        for (name, st) in [
            ("clean", &r.stats_clean),
            ("corrupted", &r.stats_corrupted),
            ("defended", &r.stats_defended),
        ] {
            if let Some(st) = st {
                writeln!(
                    s,
                    "{},{name},{},{},{},{},{}",
                    r.run,
                    fmt_f64(st.homophily),
                    fmt_f64(st.pairwise_feature_similarity),
                    st.num_edges,
                    st.edges_added,
                    st.edges_removed
                )
                .unwrap();
            }
        }
    }
    s
}

/// Write `results.csv`, `summary.txt`, `stats.csv`, `config.txt`, the
/// corruption records and per-run adaptation reports under `out`.
pub fn emit_report(result: &ExperimentResult, out: &Path) -> Result<()> {
    mkdir(out)?;
    write(&out.join("results.csv"), &results_csv(&result.rows))?;
    write(&out.join("summary.txt"), &summary(result).to_text())?;
    write(&out.join("stats.csv"), &stats_csv(&result.rows))?;
    write(&out.join("config.txt"), &result.config.to_kv().to_text())?;
    for (row, rec) in result.rows.iter().zip(&result.records) {
        if let Some(rec) = rec {
            let dir = out.join("corruptions");
            mkdir(&dir)?;
            rec.write(&dir.join(format!("run_{}.txt", row.run)))?;
        }
    }
    for (row, rep) in result.rows.iter().zip(&result.reports) {
        if let Some(rep) = rep {
            rep.write(&out.join("adapt").join(format!("run_{}", row.run)))?;
        }
    }
    Ok(())
}

pub fn ablation_csv(a: &AblationResult) -> String {
    let mut s = String::from("axis,variant,runs_ok,vanilla_mean,adapted_mean,adapted_std,adapted_abnormal_mean\n");
    for (name, r) in &a.cells {
        let (am, asd) = mean_std(&r.column(|x| Some(x.adapted)));
        let ab = r.column(|x| x.adapted_abnormal);
        writeln!(
            s,
            "{},{name},{},{},{},{},{}",
            a.axis,
            r.ok_rows().count(),
            fmt_f64(r.mean_vanilla()),
            fmt_f64(am),
            fmt_f64(asd),
            if ab.is_empty() { String::new() } else { fmt_f64(mean_std(&ab).0) }
        )
        .unwrap();
    }
    s
}

pub fn emit_ablation(a: &AblationResult, out: &Path) -> Result<()> {
    mkdir(out)?;
    write(&out.join("ablation.csv"), &ablation_csv(a))?;
    for (name, r) in &a.cells {
        emit_report(r, &out.join(name))?;
    }
    Ok(())
}

pub fn transfer_csv(m: &TransferMatrix) -> String {
    let mut s = format!("adapted_with,{},{}\n", m.backbones[0], m.backbones[1]);
    writeln!(s, "noisy,{},{}", fmt_f64(m.noisy[0]), fmt_f64(m.noisy[1])).unwrap();
    for r in 0..2 {
        writeln!(s, "{},{},{}", m.backbones[r], fmt_f64(m.adapted[r][0]), fmt_f64(m.adapted[r][1])).unwrap();
    }
    s
}

pub fn emit_transfer(m: &TransferMatrix, out: &Path) -> Result<()> {
    mkdir(out)?;
    write(&out.join("transfer.csv"), &transfer_csv(m))
}
