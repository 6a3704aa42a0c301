//! Network embedding for graphs that outgrow a single machine's memory.
//!
//! The input graph is split by a balanced min-cut partitioner into parts that
//! fit a memory budget. Each part is embedded on its own into a short segment,
//! the nodes on cut edges form a border graph that is partitioned again, and
//! the process repeats on shrinking border graphs with shrinking segment
//! lengths. Every node's final vector is the concatenation of the segments it
//! belongs to, placed at fixed offsets and zero elsewhere.
//!
//! ```
//! use distne::pipeline::{run_pipeline, PipelineConfig};
//! use distne::synth::sbm;
//!
//! let g = sbm(4, 30, 0.3, 0.01, 7).unwrap().graph;
//! let mut cfg = PipelineConfig::default();
//! cfg.recursion.d = 32;
//! cfg.recursion.k_initial = Some(4);
//! cfg.walk.walks_per_node = 2;
//! cfg.walk.walk_length = 10;
//! cfg.train.epochs = 1;
//! let out = run_pipeline(&g, &cfg).unwrap();
//! assert_eq!(out.embedding.len(), 120);
//! assert_eq!(out.embedding.d(), 32);
//! ```

pub mod embed;
pub mod error;
pub mod evaluate;
pub mod fusion;
pub mod graph;
pub mod partition;
pub mod pipeline;
pub mod recursion;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use fusion::FusedEmbedding;
pub use graph::{load_edge_list, Graph, NodeId, NodeSet, PartitionAssignment};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use recursion::{recursive_partition, PartitionTree, RecursionConfig};
