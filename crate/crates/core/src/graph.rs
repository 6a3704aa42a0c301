//! Undirected simple graphs in CSR form, edge-list ingestion, and the
//! partition-derived constructions (induced subgraphs, border nodes, border
//! subgraphs) that the recursion is built from.
//!
//! Internal ids are dense `u32` values in `[0, n)`. External labels are kept
//! alongside, so any subgraph can be written back out with the labels of the
//! graph it was cut from.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Immutable undirected simple graph.
///
/// Neighbor lists are sorted ascending, contain no duplicates and no
/// self-loops, and the adjacency is symmetric.
#[derive(Clone, Debug)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    labels: Vec<Arc<str>>,
    index: HashMap<Arc<str>, NodeId>,
    /// For subgraphs: local id -> id in the graph this one was cut from.
    parent_ids: Option<Vec<NodeId>>,
    fingerprint: u64,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
            && self.neighbors == other.neighbors
            && self.labels == other.labels
    }
}

impl Graph {
    pub fn empty() -> Self {
        Self::from_parts(vec![0], Vec::new(), Vec::new(), None)
    }

    fn from_parts(
        offsets: Vec<usize>,
        neighbors: Vec<NodeId>,
        labels: Vec<Arc<str>>,
        parent_ids: Option<Vec<NodeId>>,
    ) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as NodeId))
            .collect();
        let fingerprint = fingerprint(&offsets, &neighbors);
        Graph {
            offsets,
            neighbors,
            labels,
            index,
            parent_ids,
            fingerprint,
        }
    }

    /// Builds a graph over `labels.len()` nodes from an arbitrary edge list.
    /// Self-loops are dropped and duplicate or reversed edges collapsed.
    pub fn from_edges(labels: Vec<Arc<str>>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let n = labels.len();
        let mut arcs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for id in [u, v] {
                if id as usize >= n {
                    return Err(Error::InvalidNode {
                        id: id as u64,
                        node_count: n,
                    });
                }
            }
            if u != v {
                arcs.push((u, v));
                arcs.push((v, u));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &arcs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = arcs.into_iter().map(|(_, v)| v).collect();
        Ok(Self::from_parts(offsets, neighbors, labels, None))
    }

    /// Graph over nodes labelled `"0".."n-1"`.
    pub fn from_indexed_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let labels = (0..n).map(|i| Arc::from(i.to_string())).collect();
        Self::from_edges(labels, edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u as usize + 1] - self.offsets[u as usize]
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[u as usize]..self.offsets[u as usize + 1]]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn adjacency(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn label(&self, u: NodeId) -> &Arc<str> {
        &self.labels[u as usize]
    }

    pub fn labels(&self) -> &[Arc<str>] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn parent_ids(&self) -> Option<&[NodeId]> {
        self.parent_ids.as_deref()
    }

    /// Content hash of the CSR arrays; used to tie assignments to graphs.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    /// Every undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Serialized size of the CSR arrays in bytes.
    pub fn csr_bytes(&self) -> usize {
        self.offsets.len() * std::mem::size_of::<usize>()
            + self.neighbors.len() * std::mem::size_of::<NodeId>()
    }

    /// Full scan of the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if self.offsets.len() != n + 1 || self.offsets[0] != 0 {
            return Err(Error::Contract("offsets length/start mismatch".into()));
        }
        if self.offsets[n] != self.neighbors.len() || !self.neighbors.len().is_multiple_of(2) {
            return Err(Error::Contract("offsets[n] != 2|E|".into()));
        }
        for u in self.nodes() {
            if self.offsets[u as usize] > self.offsets[u as usize + 1] {
                return Err(Error::Contract(format!("offsets decrease at {u}")));
            }
            let adj = self.neighbors(u);
            for w in adj.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Contract(format!("N({u}) not strictly sorted")));
                }
            }
            for &v in adj {
                if v as usize >= n {
                    return Err(Error::Contract(format!("neighbor {v} of {u} out of range")));
                }
                if v == u {
                    return Err(Error::Contract(format!("self-loop at {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Contract(format!("edge {u}-{v} not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Writes the graph as an edge list with external labels, one edge per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", self.label(u), self.label(v))?;
        }
        Ok(())
    }

    /// Writes one label per line, in internal id order.
    pub fn write_node_list<W: Write>(&self, mut out: W) -> Result<()> {
        for l in &self.labels {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

fn fingerprint(offsets: &[usize], neighbors: &[NodeId]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    mix(offsets.len() as u64);
    for &o in offsets {
        mix(o as u64);
    }
    for &v in neighbors {
        mix(v as u64);
    }
    h
}

/// Incremental label interning, ids in order of first appearance.
#[derive(Default)]
struct LabelInterner {
    labels: Vec<Arc<str>>,
    index: HashMap<Arc<str>, NodeId>,
}

impl LabelInterner {
    fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as NodeId;
        let label: Arc<str> = Arc::from(label);
        self.labels.push(label.clone());
        self.index.insert(label, id);
        id
    }
}

fn read_edges<R: BufRead>(source: R, interner: &mut LabelInterner) -> Result<Vec<(NodeId, NodeId)>> {
    let mut edges = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => {
                let u = interner.intern(a);
                let v = interner.intern(b);
                edges.push((u, v));
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!(
                        "expected 2 tokens, found {}",
                        trimmed.split_whitespace().count()
                    ),
                })
            }
        }
    }
    Ok(edges)
}

/// Loads an undirected simple graph from an edge-list stream.
///
/// Lines starting with `#` and blank lines are skipped. Internal ids follow
/// the order in which labels first appear.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<Graph> {
    let mut interner = LabelInterner::default();
    let edges = read_edges(source, &mut interner)?;
    Graph::from_edges(interner.labels, &edges)
}

/// Like [`load_edge_list`], but first admits every label of `nodes` (one per
/// line) so that nodes without edges survive. Node-file order fixes the ids.
pub fn load_edge_list_with_nodes<R: BufRead, N: BufRead>(source: R, nodes: N) -> Result<Graph> {
    let mut interner = LabelInterner::default();
    for line in nodes.lines() {
        let line = line?;
        let label = line.trim();
        if !label.is_empty() && !label.starts_with('#') {
            interner.intern(label);
        }
    }
    let edges = read_edges(source, &mut interner)?;
    Graph::from_edges(interner.labels, &edges)
}

/// Sorted, deduplicated set of internal node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeSet(Vec<NodeId>);

impl NodeSet {
    pub fn new(mut ids: Vec<NodeId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        NodeSet(ids)
    }

    pub fn all(n: usize) -> Self {
        NodeSet((0..n as NodeId).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Position of `id` within the set, which is also its id in the induced subgraph.
    pub fn rank(&self, id: NodeId) -> Option<usize> {
        self.0.binary_search(&id).ok()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        NodeSet::new(iter.into_iter().collect())
    }
}

/// Disjoint cover of a graph's nodes by `k` partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionAssignment {
    graph_fingerprint: u64,
    k: usize,
    assign: Vec<u32>,
    sizes: Vec<usize>,
}

impl PartitionAssignment {
    /// Wraps an explicit assignment. Every index must be `< k`; sizes may be
    /// unbalanced here (balance is the partitioner's contract, not the type's).
    pub fn new(g: &Graph, k: usize, assign: Vec<u32>) -> Result<Self> {
        if assign.len() != g.node_count() {
            return Err(Error::Contract(format!(
                "assignment has {} entries for {} nodes",
                assign.len(),
                g.node_count()
            )));
        }
        let mut sizes = vec![0usize; k];
        for (u, &p) in assign.iter().enumerate() {
            let slot = sizes.get_mut(p as usize).ok_or_else(|| {
                Error::Contract(format!("node {u} assigned to partition {p} >= k={k}"))
            })?;
            *slot += 1;
        }
        Ok(PartitionAssignment {
            graph_fingerprint: g.fingerprint(),
            k,
            assign,
            sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn part_of(&self, u: NodeId) -> u32 {
        self.assign[u as usize]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assign
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `max(sizes) - min(sizes)`.
    pub fn imbalance(&self) -> usize {
        let max = self.sizes.iter().copied().max().unwrap_or(0);
        let min = self.sizes.iter().copied().min().unwrap_or(0);
        max - min
    }

    pub fn members(&self, part: u32) -> NodeSet {
        NodeSet(
            self.assign
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p == part)
                .map(|(u, _)| u as NodeId)
                .collect(),
        )
    }

    pub fn check_graph(&self, g: &Graph) -> Result<()> {
        if self.graph_fingerprint != g.fingerprint() || self.assign.len() != g.node_count() {
            return Err(Error::Contract(
                "partition assignment belongs to a different graph".into(),
            ));
        }
        Ok(())
    }

    /// Writes `<label> <partition_index>` per node.
    pub fn write<W: Write>(&self, g: &Graph, mut out: W) -> Result<()> {
        self.check_graph(g)?;
        for u in g.nodes() {
            writeln!(out, "{} {}", g.label(u), self.part_of(u))?;
        }
        Ok(())
    }

    /// Reads the `<label> <partition_index>` format back against `g`.
    pub fn read<R: BufRead>(g: &Graph, source: R) -> Result<Self> {
        let mut assign = vec![u32::MAX; g.node_count()];
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let mut it = t.split_whitespace();
            let (label, part) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(parse_err("expected `<label> <partition>`".into())),
            };
            let u = g
                .id_of(label)
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            assign[u as usize] = part
                .parse()
                .map_err(|e| parse_err(format!("bad partition index: {e}")))?;
        }
        if let Some(u) = assign.iter().position(|&p| p == u32::MAX) {
            return Err(Error::Contract(format!(
                "node `{}` has no partition",
                g.label(u as NodeId)
            )));
        }
        let k = assign.iter().copied().max().map_or(0, |m| m as usize + 1);
        Self::new(g, k, assign)
    }
}

/// Subgraph on `nodes` keeping exactly the edges with both endpoints inside.
/// Local id `i` corresponds to the `i`-th smallest id in `nodes`.
pub fn induced_subgraph(g: &Graph, nodes: &NodeSet) -> Result<Graph> {
    if let Some(&last) = nodes.as_slice().last() {
        if last as usize >= g.node_count() {
            return Err(Error::InvalidNode {
                id: last as u64,
                node_count: g.node_count(),
            });
        }
    }
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    offsets.push(0);
    let mut neighbors = Vec::new();
    for u in nodes.iter() {
        // both lists are sorted, so local ids come out sorted too
        neighbors.extend(
            g.neighbors(u)
                .iter()
                .filter_map(|&v| nodes.rank(v).map(|r| r as NodeId)),
        );
        offsets.push(neighbors.len());
    }
    let labels = nodes.iter().map(|u| g.label(u).clone()).collect();
    Ok(Graph::from_parts(
        offsets,
        neighbors,
        labels,
        Some(nodes.as_slice().to_vec()),
    ))
}

/// Nodes with at least one neighbor in a different partition.
pub fn border_nodes(g: &Graph, pa: &PartitionAssignment) -> Result<NodeSet> {
    pa.check_graph(g)?;
    Ok(NodeSet(
        g.nodes()
            .filter(|&u| {
                let pu = pa.part_of(u);
                g.neighbors(u).iter().any(|&v| pa.part_of(v) != pu)
            })
            .collect(),
    ))
}

pub fn border_subgraph(g: &Graph, pa: &PartitionAssignment) -> Result<Graph> {
    let border = border_nodes(g, pa)?;
    induced_subgraph(g, &border)
}

/// Connected components as node sets, ordered by smallest member.
pub fn connected_components(g: &Graph) -> Vec<NodeSet> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in g.nodes() {
        if seen[start as usize] {
            continue;
        }
        seen[start as usize] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(u) = stack.pop() {
            members.push(u);
            for &v in g.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        components.push(NodeSet::new(members));
    }
    components
}

/// The component with the most nodes; ties go to the one holding the smallest id.
pub fn largest_connected_component(g: &Graph) -> Result<(Graph, NodeSet)> {
    let mut best: Option<NodeSet> = None;
    for c in connected_components(g) {
        if best.as_ref().is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    let nodes = best.unwrap_or_default();
    let sub = induced_subgraph(g, &nodes)?;
    Ok((sub, nodes))
}
