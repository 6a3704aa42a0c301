mod common;

use distne::embed::{embed_length, random_walks, train_sgns, LengthTable, SegmentEmbedding, TrainConfig, WalkConfig};
use distne::graph::{Graph, NodeId};
use distne::recursion::{Leaf, LeafId};
use distne::synth::sbm;
use distne::Error;

fn degrees(g: &Graph) -> Vec<usize> {
    g.nodes().map(|u| g.degree(u)).collect()
}

#[test]
fn sgns_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let err = common::sgns_gradient_max_rel_error(100, seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

/// Second-order transition out of `v` after arriving from `t`. Neighbors of
/// `v`: `t` itself (weight 1/p), `x1` adjacent to `t` (weight 1) and `x2` not
/// adjacent to `t` (weight 1/q).
#[test]
fn biased_step_frequencies_follow_return_and_inout_weights() {
    let (t, v, x1, x2) = (0 as NodeId, 1, 2, 3);
    let g = Graph::from_indexed_edges(4, &[(t, v), (v, x1), (v, x2), (t, x1)]).unwrap();
    let (p, q) = (0.5, 2.0);
    let cfg = WalkConfig {
        walks_per_node: 40_000,
        walk_length: 3,
        return_param: p,
        inout_param: q,
        seed: 5,
    };
    let corpus = random_walks(&g, &cfg).unwrap();
    let mut counts = [0usize; 4];
    for w in corpus.iter() {
        if w[0] == t && w[1] == v {
            counts[w[2] as usize] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let weights = [1.0 / p, 0.0, 1.0, 1.0 / q];
    let norm: f64 = weights.iter().sum();
    assert!(total > 10_000);
    for node in [t, x1, x2] {
        let expect = weights[node as usize] / norm;
        let sd = (expect * (1.0 - expect) / total as f64).sqrt();
        let got = counts[node as usize] as f64 / total as f64;
        assert!((got - expect).abs() < 3.0 * sd, "node {node}: {got} vs {expect}");
    }
    assert_eq!(counts[v as usize], 0);
}

#[test]
fn unbiased_walks_pick_neighbors_uniformly() {
    let g = Graph::from_indexed_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let cfg = WalkConfig {
        walks_per_node: 30_000,
        walk_length: 2,
        ..Default::default()
    };
    let corpus = random_walks(&g, &cfg).unwrap();
    let mut counts = [0usize; 4];
    for w in corpus.iter().filter(|w| w[0] == 0) {
        counts[w[1] as usize] += 1;
    }
    let expect: f64 = 1.0 / 3.0;
    let sd = (expect * (1.0 - expect) / 30_000.0).sqrt();
    for c in &counts[1..] {
        assert!((*c as f64 / 30_000.0 - expect).abs() < 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn walks_stay_on_edges_and_stop_at_isolated_nodes() {
    let g = Graph::from_indexed_edges(5, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let cfg = WalkConfig {
        walks_per_node: 3,
        walk_length: 10,
        return_param: 0.25,
        inout_param: 4.0,
        seed: 1,
    };
    let corpus = random_walks(&g, &cfg).unwrap();
    assert_eq!(corpus.len(), 15);
    for w in corpus.iter() {
        if w[0] == 4 {
            assert_eq!(w.len(), 1);
            continue;
        }
        assert_eq!(w.len(), 10);
        assert!(w.windows(2).all(|e| g.has_edge(e[0], e[1])));
    }
}

#[test]
fn cliques_joined_by_a_bridge_separate_in_embedding_space() {
    let g = common::barbell(10);
    for seed in 0..5 {
        let corpus = random_walks(
            &g,
            &WalkConfig {
                walks_per_node: 20,
                walk_length: 20,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let out = train_sgns(
            &corpus,
            &degrees(&g),
            &TrainConfig {
                dim: 16,
                epochs: 3,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for u in 0..20 {
            for v in u + 1..20 {
                let c = common::cosine(out.row(u), out.row(v));
                if (u < 10) == (v < 10) {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) > mean(&inter), "seed {seed}: {} vs {}", mean(&intra), mean(&inter));
    }
}

#[test]
fn epoch_losses_decline() {
    let s = sbm(4, 100, 0.1, 0.005, 3).unwrap();
    let corpus = random_walks(
        &s.graph,
        &WalkConfig {
            walks_per_node: 5,
            walk_length: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let out = train_sgns(
        &corpus,
        &degrees(&s.graph),
        &TrainConfig {
            dim: 32,
            epochs: 6,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.epoch_losses.len(), 6);
    let rises = out.epoch_losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 1, "{:?}", out.epoch_losses);
    assert!(out.epoch_losses[5] < out.epoch_losses[0]);
}

#[test]
fn training_is_reproducible() {
    let g = common::gnp(60, 0.1, 2);
    let corpus = random_walks(&g, &WalkConfig::default()).unwrap();
    let cfg = TrainConfig {
        dim: 8,
        ..Default::default()
    };
    let a = train_sgns(&corpus, &degrees(&g), &cfg).unwrap();
    let b = train_sgns(&corpus, &degrees(&g), &cfg).unwrap();
    assert_eq!(a.vectors, b.vectors);
    assert_eq!(random_walks(&g, &WalkConfig::default()).unwrap(), corpus);
}

#[test]
fn lengths_sum_to_d_across_the_grid() {
    for d in [16, 32, 64, 128, 256] {
        for delta in [0.05, 0.1, 0.25, 0.5] {
            for gamma in 1..=5 {
                for border_empty in [false, true] {
                    let t = LengthTable::compute(d, delta, gamma, border_empty).unwrap();
                    assert_eq!(t.total(), d, "d={d} delta={delta} gamma={gamma}");
                    for j in 1..gamma {
                        assert_eq!(t.get(j, 1), 0);
                    }
                }
            }
        }
    }
    assert!(embed_length(0, 0, 128, 0.25, 2, false).is_err());
    assert!(embed_length(3, 0, 128, 0.25, 2, false).is_err());
}

#[test]
fn segment_files_round_trip_and_reject_mismatches() {
    let leaf = Leaf {
        id: LeafId { j: 2, q: 0, index: 3 },
        graph: common::gnp(12, 0.4, 8),
        ell: 6,
    };
    let seg = distne::embed::embed_subgraph(&leaf, &WalkConfig::default(), &TrainConfig::default(), 99).unwrap();
    assert_eq!((seg.len(), seg.ell, seg.j(), seg.q()), (12, 6, 2, 0));
    let mut buf = Vec::new();
    seg.write(&mut buf).unwrap();
    let back = SegmentEmbedding::read(leaf.id, buf.as_slice()).unwrap();
    assert_eq!(back.labels, seg.labels);
    assert_eq!(
        back.vectors.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        seg.vectors.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    let other = LeafId { j: 1, q: 0, index: 3 };
    assert!(matches!(SegmentEmbedding::read(other, buf.as_slice()), Err(Error::DataCorruption(_))));

    let zero = Leaf { ell: 0, ..leaf };
    assert!(matches!(
        distne::embed::embed_subgraph(&zero, &WalkConfig::default(), &TrainConfig::default(), 1),
        Err(Error::Contract(_))
    ));
}
