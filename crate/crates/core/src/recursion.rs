//! Recursive partitioning of a graph into induced leaves plus one final
//! border leaf, and the `k` / `δ` / `γ` schedule that drives it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embed::length::LengthTable;
use crate::error::{Error, Result};
use crate::graph::{border_nodes, induced_subgraph, Graph, NodeId, NodeSet, PartitionAssignment};
use crate::partition::{edge_cut, partition, PartitionConfig};
use crate::seed::mix_seed;

/// Minimum useful length of the deepest border segment.
pub const MIN_BORDER_SEGMENT: usize = 10;
pub const DELTA_MIN: f64 = 0.05;
pub const DELTA_MAX: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionConfig {
    pub d: usize,
    /// `None` picks `k` from the memory budget.
    pub k_initial: Option<usize>,
    pub mem_budget: u64,
    /// Bytes per node; `None` measures the input's CSR footprint.
    pub bytes_per_node: Option<f64>,
    /// `None` derives δ from level-1 border counts.
    pub delta: Option<f64>,
    pub gamma_cap: usize,
    /// `None` means `⌈n / k₁⌉`.
    pub max_leaf_nodes: Option<usize>,
    pub max_sweeps: usize,
    pub patience: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for RecursionConfig {
    fn default() -> Self {
        RecursionConfig {
            d: 128,
            k_initial: None,
            mem_budget: 1 << 30,
            bytes_per_node: None,
            delta: None,
            gamma_cap: 5,
            max_leaf_nodes: None,
            max_sweeps: 100,
            patience: 10,
            sample_size: 4,
            seed: 42,
        }
    }
}

impl RecursionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 16 {
            return Err(Error::Config(format!("d must be at least 16, got {}", self.d)));
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
            }
        }
        if self.gamma_cap < 1 {
            return Err(Error::Config("gamma cap must be at least 1".into()));
        }
        if self.mem_budget == 0 {
            return Err(Error::Config("memory budget must be positive".into()));
        }
        if self.k_initial == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_leaf_nodes == Some(0) {
            return Err(Error::Config("max leaf nodes must be positive".into()));
        }
        if matches!(self.bytes_per_node, Some(b) if !(b > 0.0)) {
            return Err(Error::Config("bytes per node must be positive".into()));
        }
        Ok(())
    }

    fn partition_config(&self, k: usize, j: usize) -> PartitionConfig {
        PartitionConfig {
            k,
            max_sweeps: self.max_sweeps,
            patience: self.patience,
            sample_size: self.sample_size,
            seed: mix_seed(self.seed, 0x5041_5254 ^ j as u64),
        }
    }
}

/// `⌈nΔ/M⌉`, clamped to `[1, n]`.
pub fn estimate_k(n: usize, delta_bytes: f64, mem: u64) -> Result<usize> {
    if n == 0 || !(delta_bytes > 0.0) || mem == 0 {
        return Err(Error::Config(
            "estimate_k needs positive node count, bytes per node and memory".into(),
        ));
    }
    let k = (n as f64 * delta_bytes / mem as f64).ceil();
    Ok((k as usize).clamp(1, n))
}

/// `|V_b| / (|V| + |V_b|)`, clamped to `[0.05, 0.5]`.
pub fn compute_delta(n: usize, nb: usize) -> Result<f64> {
    if n == 0 || nb > n {
        return Err(Error::Contract(format!("need 0 <= nb <= n, n > 0 (n={n}, nb={nb})")));
    }
    let raw = nb as f64 / (n + nb) as f64;
    Ok(raw.clamp(DELTA_MIN, DELTA_MAX))
}

/// Largest `γ` with `d·δ^γ >= 10`, but at least 1.
pub fn gamma_bound(d: usize, delta: f64) -> Result<usize> {
    if d < MIN_BORDER_SEGMENT {
        return Err(Error::Config(format!(
            "d={d} leaves no room for a border segment of {MIN_BORDER_SEGMENT}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let raw = ((d as f64 / MIN_BORDER_SEGMENT as f64).ln() / (1.0 / delta).ln() + 1e-9).floor();
    let mut gamma = (raw as usize).max(1);
    while gamma > 1 && (d as f64) * delta.powi(gamma as i32) < MIN_BORDER_SEGMENT as f64 - 1e-9 {
        gamma -= 1;
    }
    Ok(gamma)
}

/// Partition count for the next level so its leaves stay about as large as
/// the previous level's: `⌈(nb / n_prev)·k_prev⌉`, at least 1, at most `nb`.
pub fn next_k(k_prev: usize, nb: usize, n_prev: usize) -> Result<usize> {
    if k_prev < 1 || n_prev == 0 {
        return Err(Error::Contract("next_k needs k_prev >= 1 and n_prev > 0".into()));
    }
    let k = (nb * k_prev).div_ceil(n_prev).max(1);
    Ok(if nb > 0 { k.min(nb) } else { k })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeafId {
    pub j: usize,
    pub q: u8,
    pub index: usize,
}

impl fmt::Display for LeafId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.j, self.q, self.index)
    }
}

impl LeafId {
    /// Per-leaf seed; depends only on the global seed and the leaf's identity.
    pub fn seed(&self, global: u64) -> u64 {
        mix_seed(global, ((self.j as u64) << 40) | ((self.q as u64) << 32) | self.index as u64)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split('_');
        let id = LeafId {
            j: it.next()?.parse().ok()?,
            q: it.next()?.parse().ok()?,
            index: it.next()?.parse().ok()?,
        };
        it.next().is_none().then_some(id)
    }
}

/// A subgraph handed to one embedding task. Its `parent_ids` are ids of the
/// original input graph.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub id: LeafId,
    pub graph: Graph,
    pub ell: usize,
}

#[derive(Clone, Debug)]
pub struct Level {
    pub j: usize,
    pub k: usize,
    /// Ids (in the input graph) of the nodes partitioned at this level.
    pub nodes: NodeSet,
    pub edge_count: usize,
    pub assignment: PartitionAssignment,
    pub edge_cut: usize,
    /// Border nodes of this level, as input-graph ids.
    pub border: NodeSet,
    pub leaves: Vec<Leaf>,
}

impl Level {
    pub fn border_ratio(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            self.border.len() as f64 / self.nodes.len() as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartitionTree {
    pub d: usize,
    pub k_initial: usize,
    pub max_leaf_nodes: usize,
    pub delta: f64,
    pub gamma: usize,
    pub levels: Vec<Level>,
    pub border_leaf: Option<Leaf>,
    pub length_table: LengthTable,
}

impl PartitionTree {
    /// Induced leaves of every level, then the border leaf.
    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.levels
            .iter()
            .flat_map(|l| l.leaves.iter())
            .chain(self.border_leaf.iter())
    }

    pub fn border_ratios(&self) -> Vec<f64> {
        self.levels.iter().map(Level::border_ratio).collect()
    }
}

pub fn recursive_partition(g: &Graph, cfg: &RecursionConfig) -> Result<PartitionTree> {
    run(g, cfg, None)
}

/// Same as [`recursive_partition`] but with the level-1 assignment given.
pub fn recursive_partition_from(
    g: &Graph,
    cfg: &RecursionConfig,
    first_level: PartitionAssignment,
) -> Result<PartitionTree> {
    first_level.check_graph(g)?;
    run(g, cfg, Some(first_level))
}

/// Maps level-local ids to input-graph ids; `None` is the identity.
fn to_original(level_ids: Option<&NodeSet>, local: &NodeSet) -> NodeSet {
    match level_ids {
        Some(ids) => local.iter().map(|u| ids.as_slice()[u as usize]).collect(),
        None => local.clone(),
    }
}

fn run(g: &Graph, cfg: &RecursionConfig, forced: Option<PartitionAssignment>) -> Result<PartitionTree> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Config("cannot partition an empty graph".into()));
    }
    let k_initial = match (&forced, cfg.k_initial) {
        (Some(pa), _) => pa.k(),
        (None, Some(k)) => k,
        (None, None) => {
            let bytes = cfg
                .bytes_per_node
                .unwrap_or_else(|| g.csr_bytes() as f64 / n as f64);
            estimate_k(n, bytes, cfg.mem_budget)?
        }
    };
    let max_leaf_nodes = cfg.max_leaf_nodes.unwrap_or_else(|| n.div_ceil(k_initial));

    let mut levels = Vec::new();
    let mut level_graph = g.clone();
    let mut level_ids: Option<NodeSet> = None;
    let mut k = k_initial;
    let mut forced = forced;
    let mut delta = cfg.delta.unwrap_or(DELTA_MIN);
    let mut gamma_max = cfg.gamma_cap;
    let mut j = 1;

    let (gamma, border_leaf_nodes) = loop {
        let pa = match forced.take() {
            Some(pa) => pa,
            None => partition(&level_graph, &cfg.partition_config(k, j))?,
        };
        let cut = edge_cut(&level_graph, &pa)?;
        let level_nodes = to_original(level_ids.as_ref(), &NodeSet::all(level_graph.node_count()));
        let border = to_original(level_ids.as_ref(), &border_nodes(&level_graph, &pa)?);

        if j == 1 {
            if cfg.delta.is_none() {
                delta = compute_delta(n, border.len())?;
            }
            gamma_max = cfg.gamma_cap.min(gamma_bound(cfg.d, delta)?);
        }

        let mut leaves = Vec::with_capacity(pa.k());
        for p in 0..pa.k() {
            let members = to_original(level_ids.as_ref(), &pa.members(p as u32));
            leaves.push(Leaf {
                id: LeafId { j, q: 0, index: p },
                graph: induced_subgraph(g, &members)?,
                ell: 0,
            });
        }
        let n_level = level_graph.node_count();
        levels.push(Level {
            j,
            k: pa.k(),
            nodes: level_nodes,
            edge_count: level_graph.edge_count(),
            assignment: pa,
            edge_cut: cut,
            border: border.clone(),
            leaves,
        });

        if border.is_empty() {
            break (j, None);
        }
        if border.len() <= max_leaf_nodes || j >= gamma_max {
            break (j, Some(border));
        }
        k = next_k(k, border.len(), n_level)?;
        level_graph = induced_subgraph(g, &border)?;
        level_ids = Some(border);
        j += 1;
    };

    let length_table = LengthTable::compute(cfg.d, delta, gamma, border_leaf_nodes.is_none())?;
    for level in &mut levels {
        for leaf in &mut level.leaves {
            leaf.ell = length_table.get(leaf.id.j, 0);
        }
    }
    let border_leaf = match border_leaf_nodes {
        Some(nodes) => Some(Leaf {
            id: LeafId { j: gamma, q: 1, index: 0 },
            graph: induced_subgraph(g, &nodes)?,
            ell: length_table.get(gamma, 1),
        }),
        None => None,
    };

    Ok(PartitionTree {
        d: cfg.d,
        k_initial,
        max_leaf_nodes,
        delta,
        gamma,
        levels,
        border_leaf,
        length_table,
    })
}

/// Maps a leaf's local ids back to input-graph ids.
pub fn leaf_members(leaf: &Leaf) -> &[NodeId] {
    leaf.graph.parent_ids().unwrap_or(&[])
}
