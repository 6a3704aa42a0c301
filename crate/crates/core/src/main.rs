use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use distne::evaluate::{lp_precision, lp_split, node_classification, ClassifyConfig, LabelSet, Similarity};
use distne::fusion::FusedEmbedding;
use distne::graph::{load_edge_list, Graph, PartitionAssignment};
use distne::pipeline::{
    embed_from_manifest, fuse_from_manifest, run_pipeline_with, write_partition_stage, EmbedTask, Manifest,
    PipelineConfig, StatsReport, FINAL_FILE, MANIFEST_FILE,
};
use distne::recursion::{recursive_partition, recursive_partition_from};
use distne::{Error, Result};

const WORK_DIR_ENV: &str = "DISTNE_WORK_DIR";
const DEFAULT_WORK_DIR: &str = "distne-run";

#[derive(Parser, Debug)]
#[command(name = "distne", version, about = "Embed large graphs by recursive partitioning and segment fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition, embed every leaf and fuse the final embedding
    Pipeline(PipelineArgs),
    /// Partition recursively and write leaf files plus manifest.json
    Partition(PipelineArgs),
    /// Embed the leaves listed in a manifest
    Embed(StageArgs),
    /// Fuse segment files listed in a manifest into final.emb
    Fuse(StageArgs),
    /// Link-prediction precision on a held-out edge split
    EvalLp(EvalLpArgs),
    /// Multi-label node classification F1 scores
    EvalNc(EvalNcArgs),
    /// Per-level border ratios, edge cuts and leaf sizes of a run
    Stats(StatsArgs),
}

/// A value that is either a number or `auto`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Auto<T> {
    Auto,
    Value(T),
}

impl<T: FromStr> FromStr for Auto<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Auto::Auto);
        }
        s.parse()
            .map(Auto::Value)
            .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
    }
}

impl<T> Auto<T> {
    fn value(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Final embedding length d
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Level-1 partition count, or `auto` to derive it from --mem-budget
    #[arg(long, default_value = "auto")]
    k: Auto<usize>,
    /// Memory budget per worker in bytes, used when --k is auto
    #[arg(long, default_value_t = 1 << 30)]
    mem_budget: u64,
    /// Border share of each level's length, or `auto` for |Vb|/(|V|+|Vb|)
    #[arg(long, default_value = "auto")]
    delta: Auto<f64>,
    /// Upper limit on recursion depth
    #[arg(long, default_value_t = 5)]
    gamma_max: usize,
    /// Border graphs at most this large are embedded whole; `auto` means ceil(n/k)
    #[arg(long, default_value = "auto")]
    max_leaf_nodes: Auto<usize>,
    /// Worker threads for the embedding phase; `auto` uses all CPUs
    #[arg(long, default_value = "auto")]
    threads: Auto<usize>,
    /// Global random seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Random walks started per node
    #[arg(long, default_value_t = 10)]
    walks: usize,
    /// Nodes per random walk
    #[arg(long, default_value_t = 40)]
    walk_len: usize,
    /// Skip-gram context window
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    neg: usize,
    /// Training passes over the walk corpus
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Return parameter of the biased walk
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// In-out parameter of the biased walk
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Embed only the level-1 induced subgraphs
    #[arg(long, default_value_t = false)]
    skip_border: bool,
}

impl ModelArgs {
    fn config(&self, input: Option<&Path>, out_dir: Option<PathBuf>, keep: bool) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.input = input.map(Path::to_path_buf);
        cfg.recursion.d = self.dim;
        cfg.recursion.k_initial = self.k.value();
        cfg.recursion.mem_budget = self.mem_budget;
        cfg.recursion.delta = self.delta.value();
        cfg.recursion.gamma_cap = self.gamma_max;
        cfg.recursion.max_leaf_nodes = self.max_leaf_nodes.value();
        cfg.recursion.seed = self.seed;
        cfg.walk.walks_per_node = self.walks;
        cfg.walk.walk_length = self.walk_len;
        cfg.walk.return_param = self.p;
        cfg.walk.inout_param = self.q;
        cfg.train.window = self.window;
        cfg.train.negatives = self.neg;
        cfg.train.epochs = self.epochs;
        if let Some(t) = self.threads.value() {
            cfg.worker_count = t;
        }
        cfg.work_dir = out_dir;
        cfg.keep_intermediates = keep;
        cfg.skip_border = self.skip_border;
        cfg
    }
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Edge list of the input graph
    #[arg(long)]
    input: PathBuf,
    /// Output directory [default: $DISTNE_WORK_DIR or ./distne-run]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Level-1 assignment file (`<label> <partition>` lines) to use instead of partitioning
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Keep leaf edge lists and segment files after a successful run
    #[arg(long, default_value_t = false)]
    keep_intermediates: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct StageArgs {
    /// manifest.json written by `partition` or `pipeline`
    #[arg(long)]
    manifest: PathBuf,
    /// Worker threads; `auto` uses the manifest's worker count
    #[arg(long, default_value = "auto")]
    threads: Auto<usize>,
}

#[derive(Args, Debug)]
struct EvalLpArgs {
    /// Full graph to split into training edges and held-out edges
    #[arg(long)]
    graph: PathBuf,
    /// Precomputed embedding; when absent the training graph is embedded here
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Fraction of edges held out
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// cosine or euclidean
    #[arg(long, default_value = "cosine")]
    similarity: Similarity,
    /// Output directory for the embedding run
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EvalNcArgs {
    /// Embedding file
    #[arg(long)]
    emb: PathBuf,
    /// Label file with `<node> <class> [<class> ...]` lines
    #[arg(long)]
    labels: PathBuf,
    /// Seed of the train/test split
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// manifest.json of a run
    #[arg(long)]
    manifest: PathBuf,
    /// Print the JSON report instead of the table
    #[arg(long, default_value_t = false)]
    json: bool,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

fn load_graph(path: &Path) -> Result<Graph> {
    load_edge_list(open(path)?)
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(WORK_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_WORK_DIR))
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn read_assignment(g: &Graph, path: Option<&Path>) -> Result<Option<PartitionAssignment>> {
    path.map(|p| PartitionAssignment::read(g, open(p)?)).transpose()
}

fn cmd_pipeline(args: PipelineArgs, out: &mut impl Write) -> Result<()> {
    let g = load_graph(&args.input)?;
    let dir = out_dir(args.out_dir);
    let cfg = args.model.config(Some(&args.input), Some(dir.clone()), args.keep_intermediates);
    let forced = read_assignment(&g, args.assignment.as_deref())?;
    let task = EmbedTask {
        walk: cfg.walk.clone(),
        train: cfg.train.clone(),
    };
    let run = run_pipeline_with(&g, &cfg, forced, &task)?;
    writeln!(out, "nodes={}", g.node_count())?;
    writeln!(out, "edges={}", g.edge_count())?;
    writeln!(out, "k={}", run.manifest.k_initial)?;
    writeln!(out, "delta={:.6}", run.manifest.delta)?;
    writeln!(out, "gamma={}", run.manifest.gamma)?;
    writeln!(out, "leaves_embedded={}", run.tasks.len())?;
    writeln!(out, "embed_secs={:.3}", run.timings.embed_secs)?;
    writeln!(out, "final={}", dir.join(FINAL_FILE).display())?;
    Ok(())
}

fn cmd_partition(args: PipelineArgs, out: &mut impl Write) -> Result<()> {
    let g = load_graph(&args.input)?;
    let dir = out_dir(args.out_dir);
    let cfg = args.model.config(Some(&args.input), Some(dir.clone()), true);
    cfg.validate()?;
    let tree = match read_assignment(&g, args.assignment.as_deref())? {
        Some(pa) => recursive_partition_from(&g, &cfg.recursion, pa)?,
        None => recursive_partition(&g, &cfg.recursion)?,
    };
    let manifest = write_partition_stage(&g, &tree, &cfg, &dir)?;
    writeln!(out, "k={}", manifest.k_initial)?;
    writeln!(out, "delta={:.6}", manifest.delta)?;
    writeln!(out, "gamma={}", manifest.gamma)?;
    writeln!(out, "leaves={}", manifest.all_leaves().count())?;
    writeln!(out, "manifest={}", dir.join(MANIFEST_FILE).display())?;
    Ok(())
}

fn cmd_embed(args: StageArgs, out: &mut impl Write) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let workers = args.threads.value().unwrap_or(manifest.config.worker_count);
    if workers == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let records = embed_from_manifest(&manifest_dir(&args.manifest), &manifest, workers)?;
    writeln!(out, "leaves_embedded={}", records.len())?;
    Ok(())
}

fn cmd_fuse(args: StageArgs, out: &mut impl Write) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let dir = manifest_dir(&args.manifest);
    let (emb, diagnostics) = fuse_from_manifest(&dir, &manifest)?;
    let path = dir.join(&manifest.final_path);
    let file = File::create(&path).map_err(|e| Error::file(&path, e))?;
    let mut w = BufWriter::new(file);
    emb.write(&mut w)?;
    w.flush().map_err(|e| Error::file(&path, e))?;
    writeln!(out, "nodes={}", emb.len())?;
    writeln!(out, "empty_nodes={}", diagnostics.empty_nodes)?;
    writeln!(out, "final={}", path.display())?;
    Ok(())
}

fn cmd_eval_lp(args: EvalLpArgs, out: &mut impl Write) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let split = lp_split(&g, args.alpha, args.model.seed)?;
    let emb = match &args.emb {
        Some(path) => FusedEmbedding::read(open(path)?)?,
        None => {
            let cfg = args.model.config(Some(&args.graph), args.out_dir.clone(), false);
            let task = EmbedTask {
                walk: cfg.walk.clone(),
                train: cfg.train.clone(),
            };
            run_pipeline_with(&split.train_graph, &cfg, None, &task)?.embedding
        }
    };
    let precision = lp_precision(&emb, &split, args.similarity)?;
    writeln!(out, "precision={precision:.6}")?;
    Ok(())
}

fn cmd_eval_nc(args: EvalNcArgs, out: &mut impl Write) -> Result<()> {
    let emb = FusedEmbedding::read(open(&args.emb)?)?;
    let labels = LabelSet::read(open(&args.labels)?, None)?;
    let cfg = ClassifyConfig {
        seed: args.seed,
        ..Default::default()
    };
    let report = node_classification(&emb, &labels, &cfg)?;
    if !report.prior_only_classes.is_empty() {
        eprintln!(
            "warning: classes without training examples scored by prior: {}",
            report.prior_only_classes.join(",")
        );
    }
    writeln!(out, "micro_f1={:.6} macro_f1={:.6}", report.micro_f1, report.macro_f1)?;
    Ok(())
}

fn cmd_stats(args: StatsArgs, out: &mut impl Write) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let report = StatsReport::from_manifest(&manifest);
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        write!(out, "{}", report.table())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Pipeline(a) => cmd_pipeline(a, &mut out),
        Command::Partition(a) => cmd_partition(a, &mut out),
        Command::Embed(a) => cmd_embed(a, &mut out),
        Command::Fuse(a) => cmd_fuse(a, &mut out),
        Command::EvalLp(a) => cmd_eval_lp(a, &mut out),
        Command::EvalNc(a) => cmd_eval_nc(a, &mut out),
        Command::Stats(a) => cmd_stats(a, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
