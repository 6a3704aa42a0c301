//! Second-order (node2vec) random walks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter `p`.
    pub return_param: f64,
    /// In-out parameter `q`.
    pub inout_param: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 40,
            return_param: 1.0,
            inout_param: 1.0,
            seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 || self.walk_length < 1 {
            return Err(Error::Config("walks per node and walk length must be >= 1".into()));
        }
        if !(self.return_param > 0.0 && self.inout_param > 0.0) {
            return Err(Error::Config("p and q must be positive".into()));
        }
        Ok(())
    }
}

/// Flat storage for a set of walks over local node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    node_count: usize,
    tokens: Vec<NodeId>,
    offsets: Vec<usize>,
}

impl WalkCorpus {
    pub fn new(node_count: usize) -> Self {
        WalkCorpus {
            node_count,
            tokens: Vec::new(),
            offsets: vec![0],
        }
    }

    pub fn push(&mut self, walk: &[NodeId]) {
        debug_assert!(walk.iter().all(|&u| (u as usize) < self.node_count));
        self.tokens.extend_from_slice(walk);
        self.offsets.push(self.tokens.len());
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn walk(&self, i: usize) -> &[NodeId] {
        &self.tokens[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[NodeId]> {
        (0..self.len()).map(move |i| self.walk(i))
    }
}

/// `walks_per_node` rounds; each round starts one walk from every node, in a
/// freshly shuffled order. Walks stop early at nodes without neighbors.
pub fn random_walks(g: &Graph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut corpus = WalkCorpus::new(g.node_count());
    let unbiased = cfg.return_param == 1.0 && cfg.inout_param == 1.0;
    let mut starts: Vec<NodeId> = g.nodes().collect();
    let mut walk = Vec::with_capacity(cfg.walk_length);
    let mut weights = Vec::new();

    for _ in 0..cfg.walks_per_node {
        starts.shuffle(&mut rng);
        for &start in &starts {
            walk.clear();
            walk.push(start);
            while walk.len() < cfg.walk_length {
                let cur = *walk.last().unwrap();
                let adj = g.neighbors(cur);
                if adj.is_empty() {
                    break;
                }
                let next = match (walk.len() >= 2, unbiased) {
                    (true, false) => {
                        let prev = walk[walk.len() - 2];
                        biased_step(g, prev, adj, cfg, &mut weights, &mut rng)
                    }
                    _ => adj[rng.gen_range(0..adj.len())],
                };
                walk.push(next);
            }
            corpus.push(&walk);
        }
    }
    Ok(corpus)
}

fn biased_step(
    g: &Graph,
    prev: NodeId,
    adj: &[NodeId],
    cfg: &WalkConfig,
    weights: &mut Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> NodeId {
    weights.clear();
    let mut total = 0.0;
    for &x in adj {
        let w = if x == prev {
            1.0 / cfg.return_param
        } else if g.has_edge(prev, x) {
            1.0
        } else {
            1.0 / cfg.inout_param
        };
        total += w;
        weights.push(total);
    }
    let r = rng.gen::<f64>() * total;
    let i = weights.partition_point(|&c| c <= r).min(adj.len() - 1);
    adj[i]
}
