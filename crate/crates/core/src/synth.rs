//! Stochastic block model graphs with planted communities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Sbm {
    pub graph: Graph,
    /// Community of each node, by internal id.
    pub community: Vec<usize>,
}

/// `blocks` communities of `block_size` nodes. Node ids are contiguous per
/// block and labels are the decimal ids. Edges inside a block appear with
/// probability `p_in`, across blocks with `p_out`.
pub fn sbm(blocks: usize, block_size: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Sbm> {
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let n = blocks * block_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..blocks {
        let base_a = (a * block_size) as NodeId;
        within(block_size, p_in, &mut rng, |u, v| edges.push((base_a + u, base_a + v)));
        for b in a + 1..blocks {
            let base_b = (b * block_size) as NodeId;
            between(block_size, block_size, p_out, &mut rng, |u, v| {
                edges.push((base_a + u, base_b + v))
            });
        }
    }
    let graph = Graph::from_indexed_edges(n, &edges)?;
    let community = (0..n).map(|u| u / block_size.max(1)).collect();
    Ok(Sbm { graph, community })
}

/// Number of candidates skipped before the next success of a Bernoulli(p) run.
fn skip(rng: &mut ChaCha8Rng, log_q: f64) -> u64 {
    let r: f64 = rng.gen();
    ((1.0 - r).ln() / log_q).floor() as u64
}

/// Each pair `v < u` of `0..n` independently with probability `p`.
fn within(n: usize, p: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(NodeId, NodeId)) {
    if p <= 0.0 || n < 2 {
        return;
    }
    if p >= 1.0 {
        for u in 1..n {
            for v in 0..u {
                emit(u as NodeId, v as NodeId);
            }
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let (mut u, mut v) = (1u64, 0u64);
    let n = n as u64;
    let mut pending = skip(rng, log_q);
    loop {
        v += pending;
        while v >= u && u < n {
            v -= u;
            u += 1;
        }
        if u >= n {
            return;
        }
        emit(u as NodeId, v as NodeId);
        v += 1;
        pending = skip(rng, log_q);
    }
}

/// Each pair in `0..n × 0..m` independently with probability `p`.
fn between(n: usize, m: usize, p: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(NodeId, NodeId)) {
    let total = (n * m) as u64;
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..total {
            emit((i / m as u64) as NodeId, (i % m as u64) as NodeId);
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut i = skip(rng, log_q);
    while i < total {
        emit((i / m as u64) as NodeId, (i % m as u64) as NodeId);
        i += 1 + skip(rng, log_q);
    }
}
