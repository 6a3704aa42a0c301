//! Multi-label node classification with one-vs-rest logistic regression.
//!
//! Labeled nodes are split in half at random. One binary classifier per class
//! is fit on the first half by full-batch gradient descent on
//!
//! ```text
//! Σ_i logloss(w·x_i + b, y_i) + (λ/2)‖w‖²
//! ```
//!
//! A test node with `t` true labels is predicted to carry its `t`
//! highest-scoring classes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedEmbedding;
use crate::graph::Graph;

/// Node → classes, with classes indexed densely in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSet {
    classes: Vec<String>,
    class_index: BTreeMap<String, usize>,
    nodes: BTreeMap<Arc<str>, BTreeSet<usize>>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: &str, class: &str) {
        let next = self.classes.len();
        let c = *self.class_index.entry(class.to_string()).or_insert(next);
        if c == next {
            self.classes.push(class.to_string());
        }
        self.nodes.entry(Arc::from(node)).or_default().insert(c);
    }

    /// Reads `<node> <class> [<class> ...]` lines. With `graph`, every node
    /// must exist in it.
    pub fn read<R: BufRead>(source: R, graph: Option<&Graph>) -> Result<Self> {
        let mut set = LabelSet::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let node = tokens.next().unwrap();
            let classes: Vec<&str> = tokens.collect();
            if classes.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("node `{node}` has no class"),
                });
            }
            if let Some(g) = graph {
                if g.id_of(node).is_none() {
                    return Err(Error::UnknownLabel(node.to_string()));
                }
            }
            for c in classes {
                set.insert(node, c);
            }
        }
        Ok(set)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn labels_of(&self, node: &str) -> Option<&BTreeSet<usize>> {
        self.nodes.get(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<str>, &BTreeSet<usize>)> {
        self.nodes.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            lambda: 1.0,
            epochs: 200,
            lr: 0.1,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub micro_f1: f64,
    /// Mean F1 over classes that occur in the test half or among its predictions.
    pub macro_f1: f64,
    pub train_nodes: usize,
    pub test_nodes: usize,
    /// Classes with no positive training example; scored by their prior only.
    pub prior_only_classes: Vec<String>,
    pub seed: u64,
}

/// Binary logistic regression weights plus bias.
#[derive(Clone, Debug)]
pub struct Logistic {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Logistic {
    pub fn score(&self, x: &[f32]) -> f64 {
        self.w.iter().zip(x).map(|(w, &v)| w * v as f64).sum::<f64>() + self.b
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Full-batch gradient descent; the averaged gradient is
/// `(1/n)(Σ_i (σ(z_i) − y_i) x_i + λ w)`, bias unregularized.
pub fn fit_logistic(xs: &[&[f32]], ys: &[bool], cfg: &ClassifyConfig) -> Logistic {
    let dim = xs.first().map_or(0, |x| x.len());
    let n = xs.len().max(1) as f64;
    let mut model = Logistic {
        w: vec![0.0; dim],
        b: 0.0,
    };
    let mut grad = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let err = sigmoid(model.score(x)) - y as u8 as f64;
            for (g, &v) in grad.iter_mut().zip(x.iter()) {
                *g += err * v as f64;
            }
            grad_b += err;
        }
        for (w, g) in model.w.iter_mut().zip(&grad) {
            *w -= cfg.lr * (g + cfg.lambda * *w) / n;
        }
        model.b -= cfg.lr * grad_b / n;
    }
    model
}

/// Micro and macro F1 of predicted against true label sets.
pub fn f1_scores(truth: &[BTreeSet<usize>], predicted: &[BTreeSet<usize>], classes: usize) -> (f64, f64) {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fnn = vec![0usize; classes];
    for (t, p) in truth.iter().zip(predicted) {
        for &c in p {
            if t.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in t.difference(p) {
            fnn[c] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fnn: usize| {
        let denom = 2 * tp + fp + fnn;
        if denom == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / denom as f64)
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fnn.iter().sum()).unwrap_or(0.0);
    let per_class: Vec<f64> = (0..classes).filter_map(|c| f1(tp[c], fp[c], fnn[c])).collect();
    let macro_ = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    };
    (micro, macro_)
}

pub fn node_classification(
    emb: &FusedEmbedding,
    labels: &LabelSet,
    cfg: &ClassifyConfig,
) -> Result<ClassificationReport> {
    let k = labels.class_count();
    let mut support = vec![0usize; k];
    for (_, cs) in labels.iter() {
        for &c in cs {
            support[c] += 1;
        }
    }
    if k < 2 || support.iter().filter(|&&s| s >= 2).count() < 2 {
        return Err(Error::Config(
            "node classification needs at least 2 classes with 2 labeled nodes each".into(),
        ));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::Config("train fraction must lie in (0, 1)".into()));
    }

    let mut nodes: Vec<(&[f32], &BTreeSet<usize>)> = Vec::with_capacity(labels.node_count());
    for (node, cs) in labels.iter() {
        let x = emb
            .get(node)
            .ok_or_else(|| Error::Integrity(format!("no embedding for labeled node `{node}`")))?;
        nodes.push((x, cs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    nodes.shuffle(&mut rng);
    let n_train = ((nodes.len() as f64 * cfg.train_fraction).round() as usize).clamp(1, nodes.len() - 1);
    let (train, test) = nodes.split_at(n_train);

    let xs: Vec<&[f32]> = train.iter().map(|(x, _)| *x).collect();
    let mut prior_only = Vec::new();
    let mut models = Vec::with_capacity(k);
    for c in 0..k {
        let ys: Vec<bool> = train.iter().map(|(_, cs)| cs.contains(&c)).collect();
        let positives = ys.iter().filter(|&&y| y).count();
        if positives == 0 {
            prior_only.push(labels.classes()[c].clone());
            // smoothed log-odds of a class never seen in training
            let p = 0.5 / (train.len() as f64 + 1.0);
            models.push(Logistic {
                w: vec![0.0; emb.d()],
                b: (p / (1.0 - p)).ln(),
            });
        } else {
            models.push(fit_logistic(&xs, &ys, cfg));
        }
    }

    let mut truth = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    let mut scores: Vec<(f64, usize)> = Vec::with_capacity(k);
    for (x, cs) in test {
        scores.clear();
        scores.extend(models.iter().enumerate().map(|(c, m)| (m.score(x), c)));
        scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        predicted.push(scores.iter().take(cs.len()).map(|&(_, c)| c).collect());
        truth.push((*cs).clone());
    }
    let (micro_f1, macro_f1) = f1_scores(&truth, &predicted, k);
    Ok(ClassificationReport {
        micro_f1,
        macro_f1,
        train_nodes: train.len(),
        test_nodes: test.len(),
        prior_only_classes: prior_only,
        seed: cfg.seed,
    })
}
