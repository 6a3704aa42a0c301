//! Assembling final length-`d` vectors from per-leaf segments.
//!
//! Induced segments are laid out by iteration, the border segment last:
//! `s(j, 0) = Σ_{j' < j} ℓ(j', 0)` and `s(γ, 1) = Σ_{j' <= γ} ℓ(j', 0)`.
//! A node's vector starts at zero and each segment it owns overwrites its
//! slot, so fusion is a single `O(d)` pass.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::embed::length::{LengthTable, SlotKey};
use crate::embed::{parse_row, write_row};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub j: usize,
    pub q: u8,
    pub start: usize,
    pub len: usize,
}

/// Start offsets of every non-empty `(j, q)` slot within `[0, d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentLayout {
    d: usize,
    gamma: usize,
    slots: BTreeMap<SlotKey, Slot>,
}

impl SegmentLayout {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn slot(&self, j: usize, q: u8) -> Option<Slot> {
        self.slots.get(&SlotKey { j, q }).copied()
    }

    /// Slots in position order.
    pub fn slots(&self) -> Vec<Slot> {
        let mut v: Vec<Slot> = self.slots.values().copied().collect();
        v.sort_by_key(|s| s.start);
        v
    }
}

pub fn build_layout(lengths: &LengthTable, d: usize, gamma: usize) -> Result<SegmentLayout> {
    if lengths.total() != d {
        return Err(Error::Contract(format!(
            "segment lengths sum to {} instead of d={d}",
            lengths.total()
        )));
    }
    if lengths.gamma() != gamma {
        return Err(Error::Contract(format!(
            "length table covers {} iterations, expected {gamma}",
            lengths.gamma()
        )));
    }
    let mut slots = BTreeMap::new();
    let mut offset = 0;
    for j in 1..=gamma {
        let len = lengths.get(j, 0);
        if len > 0 {
            slots.insert(SlotKey { j, q: 0 }, Slot { j, q: 0, start: offset, len });
        }
        offset += len;
    }
    for j in 1..=gamma {
        let len = lengths.get(j, 1);
        if len == 0 {
            continue;
        }
        if j != gamma {
            return Err(Error::Contract(format!("border segment at iteration {j} < γ={gamma}")));
        }
        slots.insert(SlotKey { j, q: 1 }, Slot { j, q: 1, start: offset, len });
        offset += len;
    }
    debug_assert_eq!(offset, d);
    Ok(SegmentLayout { d, gamma, slots })
}

/// One `(j, q)` piece of a node's embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPiece {
    pub j: usize,
    pub q: u8,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FusionDiagnostics {
    /// Nodes fused from an empty segment set.
    pub empty_nodes: usize,
}

/// Scatters `segments` into a zeroed length-`d` vector.
pub fn fuse_node(
    segments: &[SegmentPiece],
    layout: &SegmentLayout,
    diagnostics: &mut FusionDiagnostics,
) -> Result<Vec<f32>> {
    let mut out = vec![0f32; layout.d];
    if segments.is_empty() {
        diagnostics.empty_nodes += 1;
        return Ok(out);
    }
    let mut seen: u64 = 0;
    for seg in segments {
        let slot = layout.slot(seg.j, seg.q).ok_or_else(|| {
            Error::Contract(format!("no slot for segment ({}, {})", seg.j, seg.q))
        })?;
        if seg.values.len() != slot.len {
            return Err(Error::Contract(format!(
                "segment ({}, {}) has length {}, slot expects {}",
                seg.j,
                seg.q,
                seg.values.len(),
                slot.len
            )));
        }
        let bit = 1u64 << ((2 * seg.j + seg.q as usize) % 64);
        if seen & bit != 0 {
            return Err(Error::DataCorruption(format!(
                "duplicate segment ({}, {})",
                seg.j, seg.q
            )));
        }
        seen |= bit;
        out[slot.start..slot.start + slot.len].copy_from_slice(&seg.values);
    }
    Ok(out)
}

/// Final node vectors, all of length `d`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FusedEmbedding {
    d: usize,
    labels: Vec<Arc<str>>,
    index: BTreeMap<Arc<str>, usize>,
    vectors: Vec<f32>,
}

impl FusedEmbedding {
    pub fn new(d: usize) -> Self {
        FusedEmbedding {
            d,
            ..Default::default()
        }
    }

    pub fn push(&mut self, label: Arc<str>, vector: &[f32]) -> Result<()> {
        if vector.len() != self.d {
            return Err(Error::Contract(format!(
                "vector for `{label}` has length {}, expected {}",
                vector.len(),
                self.d
            )));
        }
        if self.index.contains_key(&label) {
            return Err(Error::DataCorruption(format!("node `{label}` fused twice")));
        }
        self.index.insert(label.clone(), self.labels.len());
        self.labels.push(label);
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Arc<str>] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, label: &str) -> Option<&[f32]> {
        self.index.get(label).map(|&i| self.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<str>, &[f32])> {
        self.labels.iter().enumerate().map(move |(i, l)| (l, self.row(i)))
    }

    /// Text format: `<n> <d>` header, then `<label> <v1> … <v_d>`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.d)?;
        for (label, row) in self.iter() {
            write_row(&mut out, label, row)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Ok(FusedEmbedding::default()),
        };
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: 1,
                message: format!("bad header: {e}"),
            })?;
        let [n, d] = nums[..] else {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `<n> <d>`".into(),
            });
        };
        let mut emb = FusedEmbedding::new(d);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (label, row) = parse_row(&line, d).map_err(|message| Error::Parse {
                line: i + 1,
                message,
            })?;
            emb.push(Arc::from(label), &row)?;
        }
        if emb.len() != n {
            return Err(Error::DataCorruption(format!(
                "embedding declares {n} rows but holds {}",
                emb.len()
            )));
        }
        Ok(emb)
    }

    /// Binary variant: little-endian `f32` rows, plus one label per line in
    /// `labels` in row order.
    pub fn write_binary<W: Write, L: Write>(&self, mut rows: W, mut labels: L) -> Result<()> {
        for v in &self.vectors {
            rows.write_all(&v.to_le_bytes())?;
        }
        for l in &self.labels {
            writeln!(labels, "{l}")?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read, L: BufRead>(d: usize, mut rows: R, labels: L) -> Result<Self> {
        let mut bytes = Vec::new();
        rows.read_to_end(&mut bytes)?;
        if d == 0 || bytes.len() % (4 * d) != 0 {
            return Err(Error::DataCorruption("binary rows are not a multiple of d floats".into()));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut emb = FusedEmbedding::new(d);
        let mut rows_iter = values.chunks_exact(d);
        for label in labels.lines() {
            let label = label?;
            let row = rows_iter
                .next()
                .ok_or_else(|| Error::DataCorruption("more labels than rows".into()))?;
            emb.push(Arc::from(label.as_str()), row)?;
        }
        if rows_iter.next().is_some() {
            return Err(Error::DataCorruption("more rows than labels".into()));
        }
        Ok(emb)
    }
}

/// Fuses every node of `grouped`. Each node must own its level-1 induced segment.
pub fn fuse_all(
    grouped: &BTreeMap<Arc<str>, Vec<SegmentPiece>>,
    layout: &SegmentLayout,
) -> Result<(FusedEmbedding, FusionDiagnostics)> {
    let mut out = FusedEmbedding::new(layout.d);
    let mut diagnostics = FusionDiagnostics::default();
    let level_one = layout.slot(1, 0).is_some();
    for (label, pieces) in grouped {
        if level_one && !pieces.iter().any(|p| p.j == 1 && p.q == 0) {
            return Err(Error::Integrity(format!(
                "node `{label}` is missing its level-1 segment"
            )));
        }
        let v = fuse_node(pieces, layout, &mut diagnostics)?;
        out.push(label.clone(), &v)?;
    }
    Ok((out, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_96_24_8() -> SegmentLayout {
        let t = LengthTable::compute(128, 0.25, 2, false).unwrap();
        build_layout(&t, 128, 2).unwrap()
    }

    #[test]
    fn prefix_sum_offsets() {
        let l = layout_96_24_8();
        assert_eq!(l.slot(1, 0).unwrap().start, 0);
        assert_eq!(l.slot(2, 0).unwrap().start, 96);
        assert_eq!(l.slot(2, 1).unwrap().start, 120);
        assert!(l.slot(1, 1).is_none());

        let t = LengthTable::compute(128, 4.0 / 14.0, 1, false).unwrap();
        let l = build_layout(&t, 128, 1).unwrap();
        assert_eq!(l.slot(1, 0).unwrap(), Slot { j: 1, q: 0, start: 0, len: 91 });
        assert_eq!(l.slot(1, 1).unwrap(), Slot { j: 1, q: 1, start: 91, len: 37 });

        let t = LengthTable::compute(128, 0.3, 1, true).unwrap();
        let l = build_layout(&t, 128, 1).unwrap();
        assert_eq!(l.slots(), vec![Slot { j: 1, q: 0, start: 0, len: 128 }]);
    }

    #[test]
    fn wrong_total_is_rejected() {
        let t = LengthTable::compute(128, 0.25, 2, false).unwrap();
        assert!(matches!(build_layout(&t, 127, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn single_segment_leaves_tail_zero() {
        let l = layout_96_24_8();
        let mut diag = FusionDiagnostics::default();
        let seg = SegmentPiece { j: 1, q: 0, values: vec![1.0; 96] };
        let v = fuse_node(&[seg], &l, &mut diag).unwrap();
        assert!(v[..96].iter().all(|&x| x == 1.0));
        assert!(v[96..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_segment_set_is_counted() {
        let l = layout_96_24_8();
        let mut diag = FusionDiagnostics::default();
        let v = fuse_node(&[], &l, &mut diag).unwrap();
        assert_eq!(v, vec![0.0; 128]);
        assert_eq!(diag.empty_nodes, 1);
    }

    #[test]
    fn duplicate_and_misfit_segments_fail() {
        let l = layout_96_24_8();
        let mut diag = FusionDiagnostics::default();
        let a = SegmentPiece { j: 2, q: 0, values: vec![0.5; 24] };
        let err = fuse_node(&[a.clone(), a], &l, &mut diag).unwrap_err();
        assert!(matches!(err, Error::DataCorruption(_)));
        let short = SegmentPiece { j: 2, q: 1, values: vec![0.5; 7] };
        assert!(matches!(fuse_node(&[short], &l, &mut diag), Err(Error::Contract(_))));
    }

    #[test]
    fn missing_level_one_is_integrity_error() {
        let l = layout_96_24_8();
        let mut grouped = BTreeMap::new();
        grouped.insert(Arc::from("v"), vec![SegmentPiece { j: 2, q: 1, values: vec![0.0; 8] }]);
        let err = fuse_all(&grouped, &l).unwrap_err();
        assert!(err.to_string().contains("`v`"));
        let (emb, _) = fuse_all(&BTreeMap::new(), &l).unwrap();
        assert!(emb.is_empty());
    }

    #[test]
    fn text_and_binary_round_trip() {
        let mut emb = FusedEmbedding::new(2);
        emb.push(Arc::from("x"), &[0.25, -1.5]).unwrap();
        emb.push(Arc::from("y"), &[3.0, 0.0]).unwrap();
        let mut text = Vec::new();
        emb.write(&mut text).unwrap();
        assert_eq!(FusedEmbedding::read(text.as_slice()).unwrap(), emb);

        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        emb.write_binary(&mut rows, &mut labels).unwrap();
        assert_eq!(rows.len(), 16);
        let back = FusedEmbedding::read_binary(2, rows.as_slice(), labels.as_slice()).unwrap();
        assert_eq!(back, emb);
    }
}
