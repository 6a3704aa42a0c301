//! Segment-length allocation across recursion levels.
//!
//! Level `j` induced leaves get `⌈δ^{j-1}d⌉ - ⌈δ^j d⌉` positions and the final
//! border leaf gets `⌈δ^γ d⌉`, so the lengths telescope to exactly `d`. When
//! the recursion stops because the border set emptied, the last induced level
//! absorbs the border share and takes `⌈δ^{γ-1}d⌉`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `⌈x⌉` with a little slack so that values like `3.0000000000000004`
/// produced by `δ^j · d` round to the integer they represent.
fn ceil_len(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn scaled(d: usize, delta: f64, power: usize) -> usize {
    ceil_len(delta.powi(power as i32) * d as f64)
}

/// Embedding length `ℓ(j, q)` for leaves of iteration `j` with border flag `q`.
pub fn embed_length(
    j: usize,
    q: u8,
    d: usize,
    delta: f64,
    gamma: usize,
    border_empty: bool,
) -> Result<usize> {
    if j < 1 || j > gamma {
        return Err(Error::Contract(format!("iteration {j} outside 1..={gamma}")));
    }
    if q > 1 {
        return Err(Error::Contract(format!("border flag must be 0 or 1, got {q}")));
    }
    let len = match (q, j == gamma) {
        (1, false) => 0,
        (1, true) if border_empty => 0,
        (1, true) => scaled(d, delta, gamma),
        (_, true) if border_empty => scaled(d, delta, gamma - 1),
        _ => scaled(d, delta, j - 1) - scaled(d, delta, j),
    };
    Ok(len)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    pub j: usize,
    pub q: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthEntry {
    pub j: usize,
    pub q: u8,
    pub ell: usize,
}

/// `ℓ(j, q)` for every `1 <= j <= γ`, `q ∈ {0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthTable {
    d: usize,
    gamma: usize,
    lengths: BTreeMap<SlotKey, usize>,
}

impl LengthTable {
    pub fn compute(d: usize, delta: f64, gamma: usize, border_empty: bool) -> Result<Self> {
        if gamma < 1 {
            return Err(Error::Contract("gamma must be at least 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Contract(format!("delta {delta} outside (0, 1)")));
        }
        let mut lengths = BTreeMap::new();
        for j in 1..=gamma {
            for q in 0..=1u8 {
                lengths.insert(SlotKey { j, q }, embed_length(j, q, d, delta, gamma, border_empty)?);
            }
        }
        Ok(LengthTable { d, gamma, lengths })
    }

    /// Rebuilds a table from explicit entries; missing slots are zero.
    pub fn from_entries(d: usize, gamma: usize, entries: &[LengthEntry]) -> Result<Self> {
        let mut lengths = BTreeMap::new();
        for j in 1..=gamma {
            for q in 0..=1u8 {
                lengths.insert(SlotKey { j, q }, 0);
            }
        }
        for e in entries {
            let key = SlotKey { j: e.j, q: e.q };
            match lengths.get_mut(&key) {
                Some(slot) => *slot = e.ell,
                None => {
                    return Err(Error::Contract(format!(
                        "length entry ({}, {}) outside 1..={gamma}",
                        e.j, e.q
                    )))
                }
            }
        }
        Ok(LengthTable { d, gamma, lengths })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn get(&self, j: usize, q: u8) -> usize {
        self.lengths.get(&SlotKey { j, q }).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.lengths.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SlotKey, usize)> + '_ {
        self.lengths.iter().map(|(k, v)| (*k, *v))
    }

    pub fn entries(&self) -> Vec<LengthEntry> {
        self.iter()
            .map(|(k, ell)| LengthEntry { j: k.j, q: k.q, ell })
            .collect()
    }
}
