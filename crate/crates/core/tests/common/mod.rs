#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use distne::graph::{load_edge_list, Graph, NodeId, PartitionAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// The ten-node, three-community example graph.
pub fn example_graph() -> Graph {
    load_edge_list(BufReader::new(File::open(data_path("example.edges")).unwrap())).unwrap()
}

/// The example's level-1 assignment {v1..v4}, {v5..v7}, {v8..v10}.
pub fn example_partition(g: &Graph) -> PartitionAssignment {
    PartitionAssignment::read(g, BufReader::new(File::open(data_path("example.partition")).unwrap())).unwrap()
}

/// G(n, p) over labels `"0".."n-1"`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        for v in u + 1..n as NodeId {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_indexed_edges(n, &edges).unwrap()
}

/// Two `size`-cliques joined by one edge between node 0 and node `size`.
pub fn barbell(size: usize) -> Graph {
    let mut edges = Vec::new();
    for base in [0, size] {
        for u in 0..size {
            for v in u + 1..size {
                edges.push(((base + u) as NodeId, (base + v) as NodeId));
            }
        }
    }
    edges.push((0, size as NodeId));
    Graph::from_indexed_edges(2 * size, &edges).unwrap()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Minimum edge cut over all 2-way splits whose part sizes differ by at most 1.
pub fn brute_force_balanced_cut(g: &Graph) -> usize {
    let n = g.node_count();
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones() as usize;
        if ones.abs_diff(n - ones) > 1 {
            continue;
        }
        let cut = edges
            .iter()
            .filter(|&&(u, v)| (mask >> u) & 1 != (mask >> v) & 1)
            .count();
        best = best.min(cut);
    }
    best
}

/// The fixed small-graph suite: 50 graphs with 4 to 10 nodes.
pub fn small_graph_suite() -> Vec<Graph> {
    (0..50u64)
        .map(|i| {
            let n = 4 + (i % 7) as usize;
            let p = [0.3, 0.5, 0.7][(i % 3) as usize];
            gnp(n, p, 1000 + i)
        })
        .collect()
}

/// Largest relative error between the SGNS step's implied gradient and a
/// central finite difference, over `probes` random coordinates in f64.
pub fn sgns_gradient_max_rel_error(probes: usize, seed: u64) -> f64 {
    use distne::embed::sgns::sgns_step;
    use rand::seq::SliceRandom;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0f64;
    for _ in 0..probes {
        let dim = rng.gen_range(4..=32);
        let rows = 8;
        let input: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let context: Vec<f64> = (0..rows * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ids: Vec<usize> = (0..rows).collect();
        ids.shuffle(&mut rng);
        let target = ids[0];
        let negatives = ids[1..4].to_vec();
        let mut scratch = vec![0f64; dim];

        let loss_at = |x: &[f64], c: &[f64]| {
            let (mut x, mut c, mut s) = (x.to_vec(), c.to_vec(), vec![0f64; dim]);
            sgns_step(&mut x, &mut c, target, &negatives, 0.0, &mut s)
        };
        // with lr = 1 the applied update is minus the gradient
        let (mut x1, mut c1) = (input.clone(), context.clone());
        sgns_step(&mut x1, &mut c1, target, &negatives, 1.0, &mut scratch);

        let (analytic, numeric) = if rng.gen_bool(0.5) {
            let i = rng.gen_range(0..dim);
            let (mut plus, mut minus) = (input.clone(), input.clone());
            plus[i] += h;
            minus[i] -= h;
            (input[i] - x1[i], (loss_at(&plus, &context) - loss_at(&minus, &context)) / (2.0 * h))
        } else {
            let row = ids[rng.gen_range(0..4)];
            let i = row * dim + rng.gen_range(0..dim);
            let (mut plus, mut minus) = (context.clone(), context.clone());
            plus[i] += h;
            minus[i] -= h;
            (context[i] - c1[i], (loss_at(&input, &plus) - loss_at(&input, &minus)) / (2.0 * h))
        };
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    worst
}

/// Wraps the default embedding task and keeps a copy of every segment it returns.
pub struct RecordingTask {
    pub inner: distne::pipeline::EmbedTask,
    pub seen: std::sync::Mutex<Vec<distne::embed::SegmentEmbedding>>,
}

impl RecordingTask {
    pub fn new(cfg: &distne::PipelineConfig) -> Self {
        RecordingTask {
            inner: distne::pipeline::EmbedTask {
                walk: cfg.walk.clone(),
                train: cfg.train.clone(),
            },
            seen: Default::default(),
        }
    }
}

impl distne::pipeline::MapTask for RecordingTask {
    fn run(&self, leaf: &distne::recursion::Leaf, seed: u64) -> distne::Result<distne::embed::SegmentEmbedding> {
        let seg = self.inner.run(leaf, seed)?;
        self.seen.lock().unwrap().push(seg.clone());
        Ok(seg)
    }
}

/// Small, fast pipeline settings.
pub fn quick_config(d: usize, k: usize, seed: u64) -> distne::PipelineConfig {
    let mut cfg = distne::PipelineConfig::default();
    cfg.recursion.d = d;
    cfg.recursion.k_initial = Some(k);
    cfg.recursion.seed = seed;
    cfg.walk.walks_per_node = 2;
    cfg.walk.walk_length = 10;
    cfg.train.epochs = 1;
    cfg.worker_count = 2;
    cfg
}

/// Runs a pipeline with random shape on a random graph and checks that every
/// fused vector holds each of its segments bit-exactly at the layout offsets,
/// with zeros everywhere else. Returns a description of the first mismatch.
pub fn fusion_round_trip_case(seed: u64) -> Result<(), String> {
    use distne::fusion::build_layout;
    use distne::pipeline::run_pipeline_with;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(30..120);
    let g = gnp(n, rng.gen_range(0.03..0.15), seed);
    let d = [16, 32, 48, 64, 128][rng.gen_range(0..5)];
    let k = rng.gen_range(2..6);
    let mut cfg = quick_config(d, k, seed);
    cfg.recursion.max_leaf_nodes = Some(rng.gen_range(5..40));
    if rng.gen_bool(0.5) {
        cfg.recursion.delta = Some([0.1, 0.25, 0.4][rng.gen_range(0..3)]);
    }
    let task = RecordingTask::new(&cfg);
    let out = run_pipeline_with(&g, &cfg, None, &task).map_err(|e| e.to_string())?;
    let layout = build_layout(&out.tree.length_table, out.tree.d, out.tree.gamma).map_err(|e| e.to_string())?;

    let mut covered: Vec<Vec<bool>> = vec![vec![false; d]; g.node_count()];
    for seg in task.seen.lock().unwrap().iter() {
        let slot = layout
            .slot(seg.j(), seg.q())
            .ok_or_else(|| format!("no slot for leaf {}", seg.leaf))?;
        for (i, label) in seg.labels.iter().enumerate() {
            let fused = out.embedding.get(label).ok_or_else(|| format!("{label} missing"))?;
            let piece = &fused[slot.start..slot.start + slot.len];
            if piece.iter().map(|x| x.to_bits()).ne(seg.row(i).iter().map(|x| x.to_bits())) {
                return Err(format!("seed {seed}: node {label} leaf {} differs", seg.leaf));
            }
            let u = g.id_of(label).unwrap() as usize;
            covered[u][slot.start..slot.start + slot.len].iter_mut().for_each(|c| *c = true);
        }
    }
    for u in g.nodes() {
        let row = out.embedding.get(g.label(u)).unwrap();
        for (x, &c) in row.iter().zip(&covered[u as usize]) {
            if !c && x.to_bits() != 0 {
                return Err(format!("seed {seed}: node {} has a nonzero unowned position", g.label(u)));
            }
        }
    }
    Ok(())
}
