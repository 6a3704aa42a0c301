//! Per-leaf embedding: walk generation, SGNS training and the segment files
//! a leaf's map task emits.

pub mod length;
pub mod sgns;
pub mod walk;

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::recursion::{Leaf, LeafId};
use crate::seed::mix_seed;

pub use length::{embed_length, LengthTable};
pub use sgns::{train_sgns, TrainConfig, TrainOutput};
pub use walk::{random_walks, WalkConfig, WalkCorpus};

/// Vectors one leaf produced, all of length `ℓ(j, q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentEmbedding {
    pub leaf: LeafId,
    pub ell: usize,
    pub labels: Vec<Arc<str>>,
    /// Row-major, `labels.len() * ell` entries.
    pub vectors: Vec<f32>,
}

impl SegmentEmbedding {
    pub fn j(&self) -> usize {
        self.leaf.j
    }

    pub fn q(&self) -> u8 {
        self.leaf.q
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.ell..(i + 1) * self.ell]
    }

    /// Header `<count> <ell> <j> <q>`, then `<label> <v1> … <v_ell>` rows.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {} {}", self.len(), self.ell, self.j(), self.q())?;
        for (i, label) in self.labels.iter().enumerate() {
            write_row(&mut out, label, self.row(i))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(leaf: LeafId, source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(parse_err(1, "missing segment header".into())),
        };
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
        let [count, ell, j, q] = nums[..] else {
            return Err(parse_err(1, "header must be `<count> <ell> <j> <q>`".into()));
        };
        if j != leaf.j || q != leaf.q as usize {
            return Err(Error::DataCorruption(format!(
                "segment file for leaf {leaf} carries (j, q) = ({j}, {q})"
            )));
        }
        let mut labels = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * ell);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (label, row) = parse_row(&line, ell).map_err(|m| parse_err(i + 1, m))?;
            labels.push(Arc::from(label));
            vectors.extend(row);
        }
        if labels.len() != count {
            return Err(Error::DataCorruption(format!(
                "segment file for leaf {leaf} declares {count} rows but holds {}",
                labels.len()
            )));
        }
        Ok(SegmentEmbedding {
            leaf,
            ell,
            labels,
            vectors,
        })
    }
}

pub(crate) fn write_row<W: Write>(out: &mut W, label: &str, values: &[f32]) -> Result<()> {
    write!(out, "{label}")?;
    for v in values {
        write!(out, " {v}")?;
    }
    writeln!(out)?;
    Ok(())
}

pub(crate) fn parse_row(line: &str, width: usize) -> std::result::Result<(&str, Vec<f32>), String> {
    let mut tokens = line.split_whitespace();
    let label = tokens.next().ok_or("empty row")?;
    let values = tokens
        .map(|t| t.parse::<f32>().map_err(|e| format!("bad value `{t}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != width {
        return Err(format!("expected {width} values, found {}", values.len()));
    }
    Ok((label, values))
}

/// Embeds one leaf on its own: walks over the leaf graph, then SGNS with the
/// leaf's segment length as dimension. Seeds derive from `leaf_seed` only.
pub fn embed_subgraph(
    leaf: &Leaf,
    walk_cfg: &WalkConfig,
    train_cfg: &TrainConfig,
    leaf_seed: u64,
) -> Result<SegmentEmbedding> {
    if leaf.ell == 0 {
        return Err(Error::Contract(format!(
            "leaf {} has zero embedding length and must not be scheduled",
            leaf.id
        )));
    }
    let g = &leaf.graph;
    let walk_cfg = WalkConfig {
        seed: mix_seed(leaf_seed, 1),
        ..walk_cfg.clone()
    };
    let train_cfg = TrainConfig {
        dim: leaf.ell,
        seed: mix_seed(leaf_seed, 2),
        ..train_cfg.clone()
    };
    let corpus = random_walks(g, &walk_cfg)?;
    let degrees: Vec<usize> = g.nodes().map(|u| g.degree(u)).collect();
    let trained = train_sgns(&corpus, &degrees, &train_cfg)?;
    if trained.vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity(format!("leaf {} produced non-finite vectors", leaf.id)));
    }
    Ok(SegmentEmbedding {
        leaf: leaf.id,
        ell: leaf.ell,
        labels: g.labels().to_vec(),
        vectors: trained.vectors,
    })
}
