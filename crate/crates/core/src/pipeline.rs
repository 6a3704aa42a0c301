//! End-to-end driver: recursive partitioning, an independent embedding task
//! per leaf (map), grouping of segment records by node (shuffle) and fusion
//! (reduce).
//!
//! Map tasks see only their own leaf. Results are collected in leaf order, and
//! every leaf's seeds derive from the global seed and its id, so the output
//! does not depend on the worker count or on task completion order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::length::{LengthEntry, LengthTable};
use crate::embed::{embed_subgraph, SegmentEmbedding, TrainConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::fusion::{build_layout, fuse_all, FusedEmbedding, FusionDiagnostics, SegmentLayout, SegmentPiece};
use crate::graph::{load_edge_list_with_nodes, Graph, PartitionAssignment};
use crate::recursion::{recursive_partition, recursive_partition_from, Leaf, LeafId, PartitionTree, RecursionConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FINAL_FILE: &str = "final.emb";
pub const STATS_FILE: &str = "stats.json";
/// Labels of the input graph in input order.
pub const NODES_FILE: &str = "nodes.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Edge list the graph was loaded from; informational only.
    pub input: Option<PathBuf>,
    pub recursion: RecursionConfig,
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub worker_count: usize,
    /// Where leaf files, the manifest and the final embedding go; `None` keeps
    /// everything in memory.
    pub work_dir: Option<PathBuf>,
    pub keep_intermediates: bool,
    /// Embed only the level-1 induced leaves; every other slot stays zero.
    pub skip_border: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            recursion: RecursionConfig::default(),
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            work_dir: None,
            keep_intermediates: false,
            skip_border: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.worker_count < 1 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        self.recursion.validate()?;
        self.walk.validate()?;
        self.train.validate()
    }

    /// Whether `leaf` gets a map task.
    pub fn scheduled(&self, leaf: &Leaf) -> bool {
        leaf.ell > 0 && (!self.skip_border || (leaf.id.j == 1 && leaf.id.q == 0))
    }
}

/// One node's contribution from one leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyValueRecord {
    pub key: Arc<str>,
    pub j: usize,
    pub q: u8,
    pub vector: Vec<f32>,
}

pub fn emit_records(seg: &SegmentEmbedding) -> impl Iterator<Item = KeyValueRecord> + '_ {
    seg.labels.iter().enumerate().map(move |(i, label)| KeyValueRecord {
        key: label.clone(),
        j: seg.j(),
        q: seg.q(),
        vector: seg.row(i).to_vec(),
    })
}

/// Groups records by node; each group is sorted by `(j, q)`.
pub fn shuffle_group<I>(records: I) -> Result<BTreeMap<Arc<str>, Vec<SegmentPiece>>>
where
    I: IntoIterator<Item = KeyValueRecord>,
{
    let mut grouped: BTreeMap<Arc<str>, Vec<SegmentPiece>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.key).or_default().push(SegmentPiece {
            j: r.j,
            q: r.q,
            values: r.vector,
        });
    }
    for (key, pieces) in grouped.iter_mut() {
        pieces.sort_by_key(|p| (p.j, p.q));
        if let Some(w) = pieces.windows(2).find(|w| (w[0].j, w[0].q) == (w[1].j, w[1].q)) {
            return Err(Error::DataCorruption(format!(
                "node `{key}` has two segments for (j, q) = ({}, {})",
                w[0].j, w[0].q
            )));
        }
    }
    Ok(grouped)
}

/// The work a map task performs on one leaf.
pub trait MapTask: Sync {
    fn run(&self, leaf: &Leaf, leaf_seed: u64) -> Result<SegmentEmbedding>;
}

/// The default map task: walks plus SGNS.
pub struct EmbedTask {
    pub walk: WalkConfig,
    pub train: TrainConfig,
}

impl MapTask for EmbedTask {
    fn run(&self, leaf: &Leaf, leaf_seed: u64) -> Result<SegmentEmbedding> {
        embed_subgraph(leaf, &self.walk, &self.train, leaf_seed)
    }
}

/// What one map task did, for auditing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskRecord {
    pub leaf: LeafId,
    pub attempts: usize,
    /// Labels of the nodes present in the task's output.
    pub output_nodes: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PhaseTimings {
    pub partition_secs: f64,
    pub embed_secs: f64,
    pub fuse_secs: f64,
}

pub struct PipelineOutput {
    pub embedding: FusedEmbedding,
    pub tree: PartitionTree,
    pub manifest: Manifest,
    pub diagnostics: FusionDiagnostics,
    pub tasks: Vec<TaskRecord>,
    pub timings: PhaseTimings,
}

pub fn run_pipeline(g: &Graph, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline_with(g, cfg, None, &default_task(cfg))
}

/// Like [`run_pipeline`], with the level-1 partition given.
pub fn run_pipeline_forced(
    g: &Graph,
    cfg: &PipelineConfig,
    first_level: PartitionAssignment,
) -> Result<PipelineOutput> {
    run_pipeline_with(g, cfg, Some(first_level), &default_task(cfg))
}

fn default_task(cfg: &PipelineConfig) -> EmbedTask {
    EmbedTask {
        walk: cfg.walk.clone(),
        train: cfg.train.clone(),
    }
}

pub fn run_pipeline_with(
    g: &Graph,
    cfg: &PipelineConfig,
    first_level: Option<PartitionAssignment>,
    task: &dyn MapTask,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let tree = match first_level {
        Some(pa) => recursive_partition_from(g, &cfg.recursion, pa)?,
        None => recursive_partition(g, &cfg.recursion)?,
    };
    let partition_secs = start.elapsed().as_secs_f64();
    let mut out = run_pipeline_on_tree(g, tree, cfg, task)?;
    out.timings.partition_secs = partition_secs;
    Ok(out)
}

/// Map, shuffle and reduce over an existing tree.
pub fn run_pipeline_on_tree(
    g: &Graph,
    tree: PartitionTree,
    cfg: &PipelineConfig,
    task: &dyn MapTask,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    if let Some(dir) = &cfg.work_dir {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_tree_files(&tree, g, dir)?;
    }

    let start = Instant::now();
    let scheduled: Vec<&Leaf> = tree.leaves().filter(|l| cfg.scheduled(l)).collect();
    let (segments, tasks) = map_phase(&scheduled, cfg.recursion.seed, cfg.worker_count, task)?;
    if let Some(dir) = &cfg.work_dir {
        for seg in &segments {
            let path = dir.join(segment_file(&seg.leaf));
            write_with(&path, |w| seg.write(w))?;
        }
    }
    let embed_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let layout = build_layout(&tree.length_table, tree.d, tree.gamma)?;
    let (embedding, diagnostics) = reduce_phase(g.labels(), &segments, &layout)?;
    let fuse_secs = start.elapsed().as_secs_f64();

    let manifest = Manifest::new(g, &tree, cfg);
    if let Some(dir) = &cfg.work_dir {
        write_with(&dir.join(FINAL_FILE), |w| embedding.write(w))?;
        manifest.save(&dir.join(MANIFEST_FILE))?;
        let stats = StatsReport::from_tree(&tree);
        write_with(&dir.join(STATS_FILE), |w| {
            serde_json::to_writer_pretty(w, &stats).map_err(Error::from)
        })?;
        if !cfg.keep_intermediates {
            remove_intermediates(dir, &manifest)?;
        }
    }

    Ok(PipelineOutput {
        embedding,
        tree,
        manifest,
        diagnostics,
        tasks,
        timings: PhaseTimings {
            partition_secs: 0.0,
            embed_secs,
            fuse_secs,
        },
    })
}

/// Runs `task` on every leaf with up to `workers` threads. Each failing task
/// is retried once; a second failure aborts naming the leaf.
pub fn map_phase(
    leaves: &[&Leaf],
    global_seed: u64,
    workers: usize,
    task: &dyn MapTask,
) -> Result<(Vec<SegmentEmbedding>, Vec<TaskRecord>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(SegmentEmbedding, TaskRecord)>> = pool.install(|| {
        leaves
            .par_iter()
            .map(|leaf| {
                let seed = leaf.id.seed(global_seed);
                let mut attempts = 0;
                let seg = loop {
                    attempts += 1;
                    match task.run(leaf, seed).and_then(|s| check_segment(leaf, s)) {
                        Ok(s) => break s,
                        Err(e) if attempts >= 2 => {
                            return Err(Error::LeafFailed {
                                leaf: leaf.id.to_string(),
                                source: Box::new(e),
                            })
                        }
                        Err(_) => continue,
                    }
                };
                let record = TaskRecord {
                    leaf: leaf.id,
                    attempts,
                    output_nodes: seg.len(),
                };
                Ok((seg, record))
            })
            .collect()
    });
    let mut segments = Vec::with_capacity(results.len());
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        let (s, t) = r?;
        segments.push(s);
        records.push(t);
    }
    Ok((segments, records))
}

fn check_segment(leaf: &Leaf, seg: SegmentEmbedding) -> Result<SegmentEmbedding> {
    if seg.leaf != leaf.id || seg.ell != leaf.ell || seg.labels.as_slice() != leaf.graph.labels() {
        return Err(Error::Integrity(format!(
            "output of leaf {} does not match its node set or length",
            leaf.id
        )));
    }
    if seg.vectors.len() != seg.len() * seg.ell || seg.vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity(format!("leaf {} produced malformed vectors", leaf.id)));
    }
    Ok(seg)
}

/// Shuffles the segments' records and fuses one vector per label in `nodes`.
pub fn reduce_phase(
    nodes: &[Arc<str>],
    segments: &[SegmentEmbedding],
    layout: &SegmentLayout,
) -> Result<(FusedEmbedding, FusionDiagnostics)> {
    let mut grouped = shuffle_group(segments.iter().flat_map(emit_records))?;
    for label in nodes {
        grouped.entry(label.clone()).or_default();
    }
    if grouped.len() != nodes.len() {
        let known: std::collections::HashSet<&str> = nodes.iter().map(|l| &**l).collect();
        let stray = grouped.keys().find(|k| !known.contains(&***k)).unwrap();
        return Err(Error::Integrity(format!("segment for unknown node `{stray}`")));
    }
    let (fused, diagnostics) = fuse_all(&grouped, layout)?;
    // restore input order
    let mut ordered = FusedEmbedding::new(layout.d());
    for label in nodes {
        ordered.push(label.clone(), fused.get(label).unwrap())?;
    }
    Ok((ordered, diagnostics))
}

pub fn segment_file(id: &LeafId) -> String {
    format!("sub_{id}.emb")
}

pub fn edges_file(id: &LeafId) -> String {
    format!("sub_{id}.edges")
}

pub fn nodes_file(id: &LeafId) -> String {
    format!("sub_{id}.nodes")
}

pub fn assignment_file(j: usize) -> String {
    format!("assign_{j}.txt")
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::file(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

/// Writes leaf files, `manifest.json` and `stats.json` for a tree whose
/// leaves have not been embedded yet.
pub fn write_partition_stage(g: &Graph, tree: &PartitionTree, cfg: &PipelineConfig, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_tree_files(tree, g, dir)?;
    let manifest = Manifest::new(g, tree, cfg);
    manifest.save(&dir.join(MANIFEST_FILE))?;
    let stats = StatsReport::from_tree(tree);
    write_with(&dir.join(STATS_FILE), |w| {
        serde_json::to_writer_pretty(w, &stats).map_err(Error::from)
    })?;
    Ok(manifest)
}

/// The input node list, leaf edge/node lists and per-level assignment files.
pub fn write_tree_files(tree: &PartitionTree, g: &Graph, dir: &Path) -> Result<()> {
    write_with(&dir.join(NODES_FILE), |w| g.write_node_list(w))?;
    for leaf in tree.leaves() {
        write_with(&dir.join(edges_file(&leaf.id)), |w| leaf.graph.write_edge_list(w))?;
        write_with(&dir.join(nodes_file(&leaf.id)), |w| leaf.graph.write_node_list(w))?;
    }
    for level in &tree.levels {
        let level_graph = crate::graph::induced_subgraph(g, &level.nodes)?;
        write_with(&dir.join(assignment_file(level.j)), |w| {
            level.assignment.write(&level_graph, w)
        })?;
    }
    Ok(())
}

fn remove_intermediates(dir: &Path, manifest: &Manifest) -> Result<()> {
    for leaf in manifest.all_leaves() {
        for name in [&leaf.path, &leaf.nodes_path, &segment_file(&leaf.leaf_id()?)] {
            let p = dir.join(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::file(&p, e))?;
            }
        }
    }
    let names = manifest.levels.iter().map(|l| &l.assignment_path);
    for name in names.chain([&manifest.nodes_path]) {
        let p = dir.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::file(&p, e))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafEntry {
    pub id: String,
    pub j: usize,
    pub q: u8,
    pub index: usize,
    pub node_count: usize,
    pub edge_count: usize,
    pub ell: usize,
    pub path: String,
    pub nodes_path: String,
    pub seed: u64,
    pub scheduled: bool,
}

impl LeafEntry {
    pub fn leaf_id(&self) -> Result<LeafId> {
        LeafId::parse(&self.id).ok_or_else(|| Error::Contract(format!("bad leaf id `{}`", self.id)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub j: usize,
    pub k: usize,
    pub node_count: usize,
    pub edge_count: usize,
    pub edge_cut: usize,
    pub border_count: usize,
    pub border_ratio: f64,
    pub assignment_path: String,
    pub leaves: Vec<LeafEntry>,
}

/// Full description of a run: the configuration and every leaf it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub node_count: usize,
    pub edge_count: usize,
    pub d: usize,
    pub k_initial: usize,
    pub max_leaf_nodes: usize,
    pub delta: f64,
    pub gamma: usize,
    pub length_table: Vec<LengthEntry>,
    /// The border leaf, when present, is listed under level `gamma`.
    pub levels: Vec<LevelEntry>,
    pub config: PipelineConfig,
    pub nodes_path: String,
    pub final_path: String,
}

impl Manifest {
    pub fn new(g: &Graph, tree: &PartitionTree, cfg: &PipelineConfig) -> Self {
        let entry = |leaf: &Leaf| LeafEntry {
            id: leaf.id.to_string(),
            j: leaf.id.j,
            q: leaf.id.q,
            index: leaf.id.index,
            node_count: leaf.graph.node_count(),
            edge_count: leaf.graph.edge_count(),
            ell: leaf.ell,
            path: edges_file(&leaf.id),
            nodes_path: nodes_file(&leaf.id),
            seed: leaf.id.seed(cfg.recursion.seed),
            scheduled: cfg.scheduled(leaf),
        };
        let mut levels: Vec<LevelEntry> = tree
            .levels
            .iter()
            .map(|l| LevelEntry {
                j: l.j,
                k: l.k,
                node_count: l.nodes.len(),
                edge_count: l.edge_count,
                edge_cut: l.edge_cut,
                border_count: l.border.len(),
                border_ratio: l.border_ratio(),
                assignment_path: assignment_file(l.j),
                leaves: l.leaves.iter().map(entry).collect(),
            })
            .collect();
        if let (Some(b), Some(last)) = (&tree.border_leaf, levels.last_mut()) {
            last.leaves.push(entry(b));
        }
        Manifest {
            node_count: g.node_count(),
            edge_count: g.edge_count(),
            d: tree.d,
            k_initial: tree.k_initial,
            max_leaf_nodes: tree.max_leaf_nodes,
            delta: tree.delta,
            gamma: tree.gamma,
            length_table: tree.length_table.entries(),
            levels,
            config: cfg.clone(),
            nodes_path: NODES_FILE.into(),
            final_path: FINAL_FILE.into(),
        }
    }

    pub fn all_leaves(&self) -> impl Iterator<Item = &LeafEntry> {
        self.levels.iter().flat_map(|l| l.leaves.iter())
    }

    pub fn length_table(&self) -> Result<LengthTable> {
        LengthTable::from_entries(self.d, self.gamma, &self.length_table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_with(path, |w| serde_json::to_writer_pretty(w, self).map_err(Error::from))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(open(path)?)?)
    }
}

/// Rebuilds a leaf from its files in `dir`.
pub fn load_leaf(dir: &Path, entry: &LeafEntry) -> Result<Leaf> {
    let graph = load_edge_list_with_nodes(open(&dir.join(&entry.path))?, open(&dir.join(&entry.nodes_path))?)?;
    if graph.node_count() != entry.node_count || graph.edge_count() != entry.edge_count {
        return Err(Error::DataCorruption(format!(
            "leaf {} files disagree with the manifest",
            entry.id
        )));
    }
    Ok(Leaf {
        id: entry.leaf_id()?,
        graph,
        ell: entry.ell,
    })
}

/// Embeds every leaf the manifest schedules and writes its segment file.
pub fn embed_from_manifest(dir: &Path, manifest: &Manifest, workers: usize) -> Result<Vec<TaskRecord>> {
    let leaves: Vec<Leaf> = manifest
        .all_leaves()
        .filter(|e| e.scheduled)
        .map(|e| load_leaf(dir, e))
        .collect::<Result<_>>()?;
    let refs: Vec<&Leaf> = leaves.iter().collect();
    let task = default_task(&manifest.config);
    let (segments, records) = map_phase(&refs, manifest.config.recursion.seed, workers, &task)?;
    for seg in &segments {
        write_with(&dir.join(segment_file(&seg.leaf)), |w| seg.write(w))?;
    }
    Ok(records)
}

/// Reads every scheduled segment file and fuses the final embedding.
pub fn fuse_from_manifest(dir: &Path, manifest: &Manifest) -> Result<(FusedEmbedding, FusionDiagnostics)> {
    let layout = build_layout(&manifest.length_table()?, manifest.d, manifest.gamma)?;
    let mut segments = Vec::new();
    for entry in manifest.all_leaves().filter(|e| e.scheduled) {
        let id = entry.leaf_id()?;
        let path = dir.join(segment_file(&id));
        let file = File::open(&path).map_err(|source| Error::MissingSegment {
            leaf: entry.id.clone(),
            path: path.display().to_string(),
            source,
        })?;
        segments.push(SegmentEmbedding::read(id, BufReader::new(file))?);
    }
    let nodes = load_edge_list_with_nodes(std::io::empty(), open(&dir.join(&manifest.nodes_path))?)?;
    if nodes.node_count() != manifest.node_count {
        return Err(Error::DataCorruption(format!(
            "{} lists {} nodes, the manifest {}",
            manifest.nodes_path,
            nodes.node_count(),
            manifest.node_count
        )));
    }
    reduce_phase(nodes.labels(), &segments, &layout)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub j: usize,
    pub k: usize,
    pub node_count: usize,
    pub edge_count: usize,
    pub edge_cut: usize,
    pub border_count: usize,
    pub border_ratio: f64,
    pub min_leaf: usize,
    pub max_leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower bound on leaf node count.
    pub lo: usize,
    /// Exclusive upper bound.
    pub hi: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub delta: f64,
    pub gamma: usize,
    pub levels: Vec<LevelStats>,
    pub border_leaf_nodes: Option<usize>,
    /// Power-of-two buckets over all leaf sizes.
    pub leaf_size_histogram: Vec<HistogramBin>,
}

impl StatsReport {
    pub fn from_tree(tree: &PartitionTree) -> Self {
        let levels = tree
            .levels
            .iter()
            .map(|l| {
                let sizes = l.leaves.iter().map(|x| x.graph.node_count());
                LevelStats {
                    j: l.j,
                    k: l.k,
                    node_count: l.nodes.len(),
                    edge_count: l.edge_count,
                    edge_cut: l.edge_cut,
                    border_count: l.border.len(),
                    border_ratio: l.border_ratio(),
                    min_leaf: sizes.clone().min().unwrap_or(0),
                    max_leaf: sizes.max().unwrap_or(0),
                }
            })
            .collect();
        let sizes: Vec<usize> = tree.leaves().map(|l| l.graph.node_count()).collect();
        StatsReport {
            delta: tree.delta,
            gamma: tree.gamma,
            levels,
            border_leaf_nodes: tree.border_leaf.as_ref().map(|b| b.graph.node_count()),
            leaf_size_histogram: histogram(&sizes),
        }
    }

    pub fn from_manifest(m: &Manifest) -> Self {
        let levels = m
            .levels
            .iter()
            .map(|l| {
                let sizes = l.leaves.iter().filter(|x| x.q == 0).map(|x| x.node_count);
                LevelStats {
                    j: l.j,
                    k: l.k,
                    node_count: l.node_count,
                    edge_count: l.edge_count,
                    edge_cut: l.edge_cut,
                    border_count: l.border_count,
                    border_ratio: l.border_ratio,
                    min_leaf: sizes.clone().min().unwrap_or(0),
                    max_leaf: sizes.max().unwrap_or(0),
                }
            })
            .collect();
        let sizes: Vec<usize> = m.all_leaves().map(|l| l.node_count).collect();
        StatsReport {
            delta: m.delta,
            gamma: m.gamma,
            levels,
            border_leaf_nodes: m.all_leaves().find(|l| l.q == 1).map(|l| l.node_count),
            leaf_size_histogram: histogram(&sizes),
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "delta={:.4} gamma={}", self.delta, self.gamma);
        let _ = writeln!(
            s,
            "{:>3} {:>6} {:>10} {:>12} {:>10} {:>10} {:>12} {:>9} {:>9}",
            "j", "k", "nodes", "edges", "edge_cut", "border", "border_ratio", "min_leaf", "max_leaf"
        );
        for l in &self.levels {
            let _ = writeln!(
                s,
                "{:>3} {:>6} {:>10} {:>12} {:>10} {:>10} {:>12.4} {:>9} {:>9}",
                l.j, l.k, l.node_count, l.edge_count, l.edge_cut, l.border_count, l.border_ratio, l.min_leaf, l.max_leaf
            );
        }
        match self.border_leaf_nodes {
            Some(n) => {
                let _ = writeln!(s, "border leaf: {n} nodes");
            }
            None => {
                let _ = writeln!(s, "border leaf: none");
            }
        }
        let _ = writeln!(s, "leaf sizes:");
        for b in &self.leaf_size_histogram {
            let _ = writeln!(s, "  [{}, {}) {}", b.lo, b.hi, b.count);
        }
        s
    }
}

fn histogram(sizes: &[usize]) -> Vec<HistogramBin> {
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for &s in sizes {
        let b = if s == 0 { 0 } else { usize::BITS - s.leading_zeros() };
        *bins.entry(b).or_default() += 1;
    }
    bins.into_iter()
        .map(|(b, count)| HistogramBin {
            lo: if b == 0 { 0 } else { 1 << (b - 1) },
            hi: 1 << b,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: &str, j: usize, q: u8, v: f32) -> KeyValueRecord {
        KeyValueRecord {
            key: Arc::from(key),
            j,
            q,
            vector: vec![v],
        }
    }

    #[test]
    fn shuffle_orders_by_slot() {
        let g = shuffle_group(vec![rec("a", 2, 1, 2.0), rec("b", 1, 0, 0.0), rec("a", 1, 0, 1.0)]).unwrap();
        let a = &g[&Arc::<str>::from("a")];
        assert_eq!(a.iter().map(|p| (p.j, p.q)).collect::<Vec<_>>(), vec![(1, 0), (2, 1)]);
        assert_eq!(g.len(), 2);
        assert!(shuffle_group(Vec::new()).unwrap().is_empty());
    }

    #[test]
    fn shuffle_rejects_duplicates() {
        let err = shuffle_group(vec![rec("a", 1, 0, 1.0), rec("a", 1, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::DataCorruption(_)));
    }

    #[test]
    fn histogram_uses_power_of_two_bins() {
        let h = histogram(&[1, 2, 3, 4, 9]);
        assert_eq!(
            h,
            vec![
                HistogramBin { lo: 1, hi: 2, count: 1 },
                HistogramBin { lo: 2, hi: 4, count: 2 },
                HistogramBin { lo: 4, hi: 8, count: 1 },
                HistogramBin { lo: 8, hi: 16, count: 1 },
            ]
        );
    }
}
