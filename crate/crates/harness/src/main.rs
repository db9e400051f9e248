use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gtrans_core::corruption::{attack_structure, inject_abnormal_features};
use gtrans_core::gnn::{accuracy, load_checkpoint, save_checkpoint, train};
use gtrans_core::graph::{graph_stats, load_graph, save_graph, HEADER_FILE};
use gtrans_core::kv::{fmt_f64, KvMap};
use gtrans_core::rng::seeded;
use gtrans_core::{
    gtrans_adapt, GcnModel, Graph, GtransError, NormalizedAdjacency, Result, Split, SurrogateRegistry,
};
use gtrans_harness::experiment::build_data;
use gtrans_harness::{
    ablation, cross_architecture, emit_ablation, emit_report, emit_transfer, run_experiment, Axis, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "gtrans", version, about = "Test-time graph transformation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Input {
    /// Graph directory written by a previous command; built from the
    /// config when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate or load data and pre-train a backbone.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Replace test-node features with Gaussian noise.
    Corrupt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Structure evasion attack against a trained model.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        model: PathBuf,
    },
    /// Transform a test graph for a frozen model.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        model: PathBuf,
    },
    /// Accuracy of a model on a graph.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        model: PathBuf,
    },
    /// Ablation grid over adapted parameters or losses.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// `params` or `loss`; falls back to the config's `axis` key.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Cross-backbone transfer matrix.
    Transfer {
        #[command(flatten)]
        common: Common,
    },
    /// Interpretation statistics of a graph.
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        /// Graph the edge changes are counted against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Full experiment: train, corrupt, adapt and evaluate every seed.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

struct Ctx {
    kv: KvMap,
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
}

fn context(c: &Common) -> Result<Ctx> {
    let kv = match &c.config {
        Some(p) => KvMap::read(p)?,
        None => KvMap::new(),
    };
    let mut cfg = ExperimentConfig::from_kv(&kv)?;
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    fs::create_dir_all(&c.out).map_err(|e| GtransError::Io {
        path: c.out.clone(),
        source: e,
    })?;
    Ok(Ctx {
        kv,
        seed: cfg.base_seed,
        cfg,
        out: c.out.clone(),
    })
}

fn graph(ctx: &Ctx, input: &Input) -> Result<Graph> {
    match &input.graph {
        Some(dir) => read_graph(dir),
        None => build_data(&ctx.cfg, ctx.seed),
    }
}

fn read_graph(dir: &Path) -> Result<Graph> {
    if dir.join(HEADER_FILE).exists() {
        load_graph(dir)
    } else {
        let cfg = ExperimentConfig {
            data: gtrans_harness::DataSource::Files(dir.to_path_buf()),
            ..ExperimentConfig::default()
        };
        build_data(&cfg, 0)
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| GtransError::Io { path, source: e })
}

fn split_accuracy(model: &GcnModel, g: &Graph) -> Result<KvMap> {
    let adj = NormalizedAdjacency::new(g.topology().clone(), None)?;
    let logits = model.forward(&adj, g.features())?.logits;
    let mut kv = KvMap::new();
    for s in [Split::Train, Split::Val, Split::Test] {
        let nodes = g.nodes_in(s);
        if !nodes.is_empty() {
            kv.insert(&format!("{}_accuracy", s.as_str()), fmt_f64(accuracy(&logits, g.labels(), &nodes)));
        }
    }
    Ok(kv)
}

fn run(cli: Cli) -> Result<()> {
    let registry = SurrogateRegistry::with_builtins();
    match cli.cmd {
        Cmd::Train { common, input } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let m0 = GcnModel::init(
                ctx.cfg.backbone,
                g.feature_dim(),
                ctx.cfg.hidden,
                g.num_classes(),
                ctx.cfg.dropout,
                &mut seeded(ctx.seed),
            );
            let (model, hist) = train(&m0, &g, &ctx.cfg.train, ctx.seed)?;
            save_graph(&g, &ctx.out.join("graph"))?;
            save_checkpoint(&model, &ctx.out.join("model.ckpt"))?;
            let mut kv = split_accuracy(&model, &g)?;
            if let Some(l) = hist.loss.last() {
                kv.insert("final_train_loss", fmt_f64(*l));
            }
            write(ctx.out.join("train.txt"), &kv.to_text())
        }
        Cmd::Corrupt { common, input } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let (out, rec) = inject_abnormal_features(&g, ctx.cfg.noise_ratio, ctx.seed)?;
            save_graph(&out, &ctx.out.join("graph"))?;
            rec.write(&ctx.out.join("corruption.txt"))
        }
        Cmd::Attack { common, input, model } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let m = load_checkpoint(&model)?;
            let (out, rec) = attack_structure(&m, &g, &ctx.cfg.attack, ctx.seed)?;
            save_graph(&out, &ctx.out.join("graph"))?;
            rec.write(&ctx.out.join("corruption.txt"))
        }
        Cmd::Adapt { common, input, model } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let m = load_checkpoint(&model)?;
            let mut t = ctx.cfg.transform.clone();
            if common.seed.is_some() || !ctx.kv.contains("seed") {
                t.seed = ctx.seed;
            }
            let (out, report) = gtrans_adapt(&m, &g, &t.objective(&registry)?, &t)?;
            save_graph(&out, &ctx.out.join("graph"))?;
            report.write(&ctx.out)
        }
        Cmd::Eval { common, input, model } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let m = load_checkpoint(&model)?;
            write(ctx.out.join("eval.txt"), &split_accuracy(&m, &g)?.to_text())
        }
        Cmd::Ablate { common, axis } => {
            let ctx = context(&common)?;
            let axis: Axis = match axis.or_else(|| ctx.kv.get_str("axis").map(String::from)) {
                Some(a) => a.parse()?,
                None => Axis::Params,
            };
            emit_ablation(&ablation(&ctx.cfg, axis, &registry)?, &ctx.out)
        }
        Cmd::Transfer { common } => {
            let ctx = context(&common)?;
            emit_transfer(&cross_architecture(&ctx.cfg, &registry)?, &ctx.out)
        }
        Cmd::Stats { common, input, reference } => {
            let ctx = context(&common)?;
            let g = graph(&ctx, &input)?;
            let r = reference.as_deref().map(read_graph).transpose()?;
            let s = graph_stats(&g, r.as_ref())?;
            let mut kv = KvMap::new();
            kv.insert("homophily", fmt_f64(s.homophily));
            kv.insert("feature_similarity", fmt_f64(s.pairwise_feature_similarity));
            kv.insert("num_edges", s.num_edges);
            kv.insert("edges_added", s.edges_added);
            kv.insert("edges_removed", s.edges_removed);
            write(ctx.out.join("stats.txt"), &kv.to_text())
        }
        Cmd::Run { common } => {
            let ctx = context(&common)?;
            emit_report(&run_experiment(&ctx.cfg)?, &ctx.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ GtransError::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
