//! Balanced k-way partitioning by pairwise color swaps.
//!
//! Nodes start round-robin over a seeded permutation, so partition sizes
//! differ by at most one. A sweep visits every node in seeded random order
//! and looks for a partner of another color among its neighbors plus a few
//! random members of the foreign color it has most neighbors in; the pair
//! trades colors when that strictly lowers the edge cut. A node may also move
//! alone into a color holding one node fewer than its own, which keeps every
//! size within one of every other.
//!
//! Nodes that found no step are remembered for the rest of the sweep. They
//! serve as swap partners for later nodes and as members of 3-way rotations
//! `a→b→c→a`, which escape states no single swap improves. After a sweep
//! without progress, non-adjacent swaps that leave the cut unchanged are also
//! taken, so plateaus get explored. The cut never increases.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, PartitionAssignment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k: usize,
    pub max_sweeps: usize,
    /// Consecutive sweeps without a cut reduction before stopping.
    pub patience: usize,
    /// Random swap candidates tried per node, on top of its neighbors.
    pub sample_size: usize,
    pub seed: u64,
}

impl PartitionConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        PartitionConfig {
            k,
            max_sweeps: 100,
            patience: 10,
            sample_size: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_sweeps < 1 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cut after initialization followed by the cut after each sweep.
#[derive(Clone, Debug, Default)]
pub struct PartitionTrace {
    pub cut_per_sweep: Vec<usize>,
    pub swaps: usize,
    pub moves: usize,
    pub rotations: usize,
}

pub fn partition(g: &Graph, cfg: &PartitionConfig) -> Result<PartitionAssignment> {
    partition_traced(g, cfg).map(|(pa, _)| pa)
}

pub fn partition_traced(
    g: &Graph,
    cfg: &PartitionConfig,
) -> Result<(PartitionAssignment, PartitionTrace)> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Ok((PartitionAssignment::new(g, cfg.k, Vec::new())?, PartitionTrace::default()));
    }
    if cfg.k > n {
        return Err(Error::InfeasibleBalance { k: cfg.k, n });
    }
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut order: Vec<NodeId> = g.nodes().collect();
    order.shuffle(&mut rng);
    let mut initial = vec![0u32; n];
    for (i, &u) in order.iter().enumerate() {
        initial[u as usize] = (i % k) as u32;
    }
    let mut st = Coloring::new(initial, k);

    let mut cut = cut_of(g, &st.color);
    let mut trace = PartitionTrace {
        cut_per_sweep: vec![cut],
        ..Default::default()
    };
    if k == 1 {
        return Ok((PartitionAssignment::new(g, k, st.color)?, trace));
    }

    // neighbor color histogram of the node being visited
    let mut hist = vec![0usize; k];
    let mut touched: Vec<u32> = Vec::new();
    let mut candidates: Vec<(NodeId, bool)> = Vec::new();
    // unhappy[c]: (node, preferred color) for nodes of color c left without a step this sweep
    let mut unhappy: Vec<Vec<(NodeId, u32)>> = vec![Vec::new(); k];
    let mut idle = 0;

    for _ in 0..cfg.max_sweeps {
        let before = cut;
        unhappy.iter_mut().for_each(Vec::clear);
        order.shuffle(&mut rng);
        for &u in &order {
            let a = st.color[u as usize];
            for &v in g.neighbors(u) {
                let c = st.color[v as usize];
                if hist[c as usize] == 0 {
                    touched.push(c);
                }
                hist[c as usize] += 1;
            }
            // the foreign color u has most neighbors in
            let target = touched
                .iter()
                .copied()
                .filter(|&c| c != a)
                .max_by_key(|&c| (hist[c as usize], std::cmp::Reverse(c)));

            candidates.clear();
            candidates.extend(
                g.neighbors(u)
                    .iter()
                    .filter(|&&v| st.color[v as usize] != a)
                    .map(|&v| (v, true)),
            );
            for _ in 0..cfg.sample_size {
                let v = match target {
                    Some(b) => {
                        let pool = &st.members[b as usize];
                        pool[rng.gen_range(0..pool.len())]
                    }
                    None => rng.gen_range(0..n) as NodeId,
                };
                if st.color[v as usize] != a {
                    candidates.push((v, g.has_edge(u, v)));
                }
            }
            if let Some(b) = target {
                for &(v, _) in unhappy[b as usize].iter().rev().take(cfg.sample_size) {
                    if st.color[v as usize] != a {
                        candidates.push((v, g.has_edge(u, v)));
                    }
                }
            }

            let mut best_swap: Option<(i64, NodeId)> = None;
            for &(v, adjacent) in &candidates {
                let b = st.color[v as usize];
                let (v_in_a, v_in_b) = g.neighbors(v).iter().fold((0i64, 0i64), |(x, y), &w| {
                    let c = st.color[w as usize];
                    (x + (c == a) as i64, y + (c == b) as i64)
                });
                let delta = hist[a as usize] as i64 - hist[b as usize] as i64 + v_in_b - v_in_a
                    + 2 * adjacent as i64;
                let accept = delta < 0 || (delta == 0 && idle > 0 && !adjacent);
                if accept && best_swap.is_none_or(|(d, _)| delta < d) {
                    best_swap = Some((delta, v));
                }
            }

            let mut best_move: Option<(i64, u32)> = None;
            let own = st.members[a as usize].len();
            for &b in &touched {
                if b == a || st.members[b as usize].len() >= own {
                    continue;
                }
                let delta = hist[a as usize] as i64 - hist[b as usize] as i64;
                if delta <= 0 && best_move.is_none_or(|(d, _)| delta < d) {
                    best_move = Some((delta, b));
                }
            }

            let unhappy_toward = target.filter(|&b| hist[b as usize] > hist[a as usize]);
            for c in touched.drain(..) {
                hist[c as usize] = 0;
            }

            match (best_move, best_swap) {
                (Some((dm, b)), swap) if swap.is_none_or(|(ds, _)| dm <= ds) => {
                    st.relocate(u, b);
                    cut = (cut as i64 + dm) as usize;
                    trace.moves += 1;
                }
                (_, Some((ds, v))) => {
                    st.swap(u, v);
                    cut = (cut as i64 + ds) as usize;
                    trace.swaps += 1;
                }
                _ => {
                    let Some(b) = unhappy_toward else { continue };
                    match find_rotation(g, &st, u, b, &unhappy, cfg.sample_size) {
                        Some((delta, v, w)) => {
                            st.rotate(u, v, w);
                            cut = (cut as i64 + delta) as usize;
                            trace.rotations += 1;
                        }
                        None => unhappy[a as usize].push((u, b)),
                    }
                }
            }
        }
        trace.cut_per_sweep.push(cut);
        debug_assert_eq!(cut, cut_of(g, &st.color));
        if cut == 0 {
            break;
        }
        if cut < before {
            idle = 0;
        } else {
            idle += 1;
            if idle >= cfg.patience.max(1) {
                break;
            }
        }
    }

    Ok((PartitionAssignment::new(g, k, st.color)?, trace))
}

/// Colors plus per-color member lists; `slot[u]` is u's index in its list.
struct Coloring {
    color: Vec<u32>,
    members: Vec<Vec<NodeId>>,
    slot: Vec<usize>,
}

impl Coloring {
    fn new(color: Vec<u32>, k: usize) -> Self {
        let mut members: Vec<Vec<NodeId>> = vec![Vec::with_capacity(color.len() / k + 1); k];
        let mut slot = vec![0usize; color.len()];
        for (u, &c) in color.iter().enumerate() {
            slot[u] = members[c as usize].len();
            members[c as usize].push(u as NodeId);
        }
        Coloring { color, members, slot }
    }

    /// u and v trade colors.
    fn swap(&mut self, u: NodeId, v: NodeId) {
        let (a, b) = (self.color[u as usize], self.color[v as usize]);
        let (su, sv) = (self.slot[u as usize], self.slot[v as usize]);
        self.members[a as usize][su] = v;
        self.members[b as usize][sv] = u;
        self.slot.swap(u as usize, v as usize);
        self.color[u as usize] = b;
        self.color[v as usize] = a;
    }

    /// u alone changes to color b.
    fn relocate(&mut self, u: NodeId, b: u32) {
        let a = self.color[u as usize];
        let su = self.slot[u as usize];
        self.members[a as usize].swap_remove(su);
        if let Some(&moved) = self.members[a as usize].get(su) {
            self.slot[moved as usize] = su;
        }
        self.slot[u as usize] = self.members[b as usize].len();
        self.members[b as usize].push(u);
        self.color[u as usize] = b;
    }

    /// u takes v's color, v takes w's, w takes u's.
    fn rotate(&mut self, u: NodeId, v: NodeId, w: NodeId) {
        let (a, b, c) = (self.color[u as usize], self.color[v as usize], self.color[w as usize]);
        let (su, sv, sw) = (self.slot[u as usize], self.slot[v as usize], self.slot[w as usize]);
        self.members[b as usize][sv] = u;
        self.members[c as usize][sw] = v;
        self.members[a as usize][su] = w;
        self.slot[u as usize] = sv;
        self.slot[v as usize] = sw;
        self.slot[w as usize] = su;
        self.color[u as usize] = b;
        self.color[v as usize] = c;
        self.color[w as usize] = a;
    }
}

/// A strictly improving 3-cycle `u: a→b, v: b→c, w: c→a` built from nodes
/// recorded as unhappy this sweep.
fn find_rotation(
    g: &Graph,
    st: &Coloring,
    u: NodeId,
    b: u32,
    unhappy: &[Vec<(NodeId, u32)>],
    limit: usize,
) -> Option<(i64, NodeId, NodeId)> {
    let a = st.color[u as usize];
    let mut best: Option<(i64, NodeId, NodeId)> = None;
    for &(v, c) in unhappy[b as usize].iter().rev().take(limit) {
        if st.color[v as usize] != b || c == a || c == b {
            continue;
        }
        for &(w, want) in unhappy[c as usize].iter().rev().take(limit) {
            if want != a || st.color[w as usize] != c {
                continue;
            }
            let delta = reassignment_delta(g, &st.color, &[(u, b), (v, c), (w, a)]);
            if delta < 0 && best.is_none_or(|(d, _, _)| delta < d) {
                best = Some((delta, v, w));
            }
        }
    }
    best
}

/// Cut change from recoloring the given distinct nodes simultaneously.
fn reassignment_delta(g: &Graph, color: &[u32], changes: &[(NodeId, u32)]) -> i64 {
    let new_color = |x: NodeId| {
        changes
            .iter()
            .find(|&&(y, _)| y == x)
            .map_or(color[x as usize], |&(_, c)| c)
    };
    let mut twice = 0i64;
    for &(x, cx) in changes {
        let old_x = color[x as usize];
        for &y in g.neighbors(x) {
            let inside = changes.iter().any(|&(z, _)| z == y);
            let before = (old_x != color[y as usize]) as i64;
            let after = (cx != new_color(y)) as i64;
            // edges inside the changed set are visited from both ends
            twice += if inside { after - before } else { 2 * (after - before) };
        }
    }
    twice / 2
}

fn cut_of(g: &Graph, color: &[u32]) -> usize {
    g.edges()
        .filter(|&(u, v)| color[u as usize] != color[v as usize])
        .count()
}

/// Number of edges whose endpoints lie in different partitions.
pub fn edge_cut(g: &Graph, pa: &PartitionAssignment) -> Result<usize> {
    pa.check_graph(g)?;
    Ok(cut_of(g, pa.assignment()))
}
