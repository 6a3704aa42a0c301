//! Link prediction: hold out a fraction of edges, embed the largest component
//! of what remains, and rank held-out edges against sampled non-edges.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedEmbedding;
use crate::graph::{largest_connected_component, Graph, NodeId};

pub type LabelPair = (Arc<str>, Arc<str>);

#[derive(Clone, Debug)]
pub struct LinkPredSplit {
    /// Largest component of the graph left after removing the held-out edges.
    pub train_graph: Graph,
    /// Held-out edges with both endpoints in `train_graph`.
    pub positives: Vec<LabelPair>,
    /// Non-edges of the original graph, as many as `positives`.
    pub negatives: Vec<LabelPair>,
    /// `⌊α|E|⌋`.
    pub removed: usize,
    pub alpha: f64,
    pub seed: u64,
}

fn ordered(g: &Graph, u: NodeId, v: NodeId) -> LabelPair {
    let (a, b) = (g.label(u).clone(), g.label(v).clone());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn lp_split(g: &Graph, alpha: f64, seed: u64) -> Result<LinkPredSplit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if g.edge_count() < 10 {
        return Err(Error::Config(format!(
            "link prediction needs at least 10 edges, graph has {}",
            g.edge_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    edges.shuffle(&mut rng);
    let removed = (alpha * g.edge_count() as f64).floor() as usize;
    let (held_out, residual) = edges.split_at(removed);

    let residual_graph = Graph::from_edges(g.labels().to_vec(), residual)?;
    let (train_graph, component) = largest_connected_component(&residual_graph)?;

    let positives: Vec<LabelPair> = held_out
        .iter()
        .filter(|&&(u, v)| component.contains(u) && component.contains(v))
        .map(|&(u, v)| ordered(g, u, v))
        .collect();
    if positives.is_empty() {
        return Err(Error::SplitDegenerate(
            "no held-out edge has both endpoints in the largest component".into(),
        ));
    }

    let members = component.as_slice();
    let c = members.len() as u64;
    let available = c * (c - 1) / 2 - train_graph.edge_count() as u64 - positives.len() as u64;
    if available < positives.len() as u64 {
        return Err(Error::SplitDegenerate(format!(
            "component has {available} non-edges, {} needed",
            positives.len()
        )));
    }
    let mut chosen: HashSet<(NodeId, NodeId)> = HashSet::with_capacity(positives.len());
    let mut negatives = Vec::with_capacity(positives.len());
    while negatives.len() < positives.len() {
        let u = members[rng.gen_range(0..members.len())];
        let v = members[rng.gen_range(0..members.len())];
        if u == v || g.has_edge(u, v) {
            continue;
        }
        if chosen.insert((u.min(v), u.max(v))) {
            negatives.push(ordered(g, u, v));
        }
    }

    Ok(LinkPredSplit {
        train_graph,
        positives,
        negatives,
        removed,
        alpha,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Cosine,
    /// Negative Euclidean distance.
    Euclidean,
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Cosine => "cosine",
            Similarity::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "euclidean" => Ok(Similarity::Euclidean),
            other => Err(Error::Config(format!("unknown similarity `{other}`"))),
        }
    }
}

/// Cosine is 0 when either vector is zero.
pub fn similarity(x: &[f32], y: &[f32], kind: Similarity) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "vectors of length {} and {} are not comparable",
            x.len(),
            y.len()
        )));
    }
    let pairs = x.iter().zip(y).map(|(&a, &b)| (a as f64, b as f64));
    Ok(match kind {
        Similarity::Cosine => {
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for (a, b) in pairs {
                dot += a * b;
                nx += a * a;
                ny += b * b;
            }
            if nx == 0.0 || ny == 0.0 {
                0.0
            } else {
                dot / (nx.sqrt() * ny.sqrt())
            }
        }
        Similarity::Euclidean => -pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    })
}

/// Fraction of positives among the `|positives|` most similar test pairs.
/// Equal scores are ordered by pair label.
pub fn lp_precision(emb: &FusedEmbedding, split: &LinkPredSplit, kind: Similarity) -> Result<f64> {
    let lookup = |label: &Arc<str>| {
        emb.get(label)
            .ok_or_else(|| Error::Integrity(format!("no embedding for node `{label}`")))
    };
    let mut scored = Vec::with_capacity(split.positives.len() + split.negatives.len());
    for (pairs, positive) in [(&split.positives, true), (&split.negatives, false)] {
        for pair in pairs {
            let s = similarity(lookup(&pair.0)?, lookup(&pair.1)?, kind)?;
            scored.push((s, pair, positive));
        }
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    let top = split.positives.len();
    if top == 0 {
        return Ok(0.0);
    }
    let hits = scored[..top].iter().filter(|x| x.2).count();
    Ok(hits as f64 / top as f64)
}
