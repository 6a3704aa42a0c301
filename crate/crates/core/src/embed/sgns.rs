//! Skip-gram with negative sampling over walk corpora.
//!
//! For every co-occurring pair `(u, v)` inside the (randomly shrunk) window,
//! the trainer takes one SGD step on
//!
//! ```text
//! -log σ(x_u · y_v) - Σ_z log σ(-x_u · y_z)
//! ```
//!
//! where `x` are input vectors, `y` output (context) vectors and the `z` are
//! negatives drawn from the degree^0.75 distribution of the leaf.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::walk::WalkCorpus;
use crate::error::{Error, Result};

const MAX_NEGATIVE_TABLE: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Decays linearly to `lr_initial / 100` over the run.
    pub lr_initial: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 3,
            lr_initial: 0.025,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 || self.negatives < 1 {
            return Err(Error::Config("window and negatives must be >= 1".into()));
        }
        if !(self.lr_initial > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub dim: usize,
    /// Row-major input vectors, one row per local node id.
    pub vectors: Vec<f32>,
    /// Mean pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainOutput {
    pub fn row(&self, u: usize) -> &[f32] {
        &self.vectors[u * self.dim..(u + 1) * self.dim]
    }
}

/// Input vectors as initialized before training: uniform in `±0.5/dim`.
pub fn init_vectors(node_count: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim.max(1) as f32;
    (0..node_count * dim)
        .map(|_| rng.gen_range(-half..half))
        .collect()
}

/// `log(1 + e^x)` without overflow.
fn softplus<F: Float>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// One SGD step for the pair `(input, target)` with the given negatives.
///
/// `input` is the center node's input row; `context` is the whole output
/// table with rows of length `input.len()`. Every coefficient is computed from
/// pre-step values, so for distinct rows the applied update is exactly
/// `-lr` times the gradient of the returned loss. `scratch` must have the
/// row length.
pub fn sgns_step<F: Float>(
    input: &mut [F],
    context: &mut [F],
    target: usize,
    negatives: &[usize],
    lr: F,
    scratch: &mut [F],
) -> F {
    let dim = input.len();
    scratch.iter_mut().for_each(|s| *s = F::zero());
    let mut loss = F::zero();
    let labelled = std::iter::once((target, F::one())).chain(negatives.iter().map(|&z| (z, F::zero())));
    for (row, label) in labelled {
        let out = &mut context[row * dim..(row + 1) * dim];
        let score = dot(input, out);
        loss = loss
            + if label > F::zero() {
                softplus(-score)
            } else {
                softplus(score)
            };
        // d loss / d score
        let coeff = sigmoid(score) - label;
        for ((s, o), &x) in scratch.iter_mut().zip(out.iter_mut()).zip(input.iter()) {
            *s = *s + coeff * *o;
            *o = *o - lr * coeff * x;
        }
    }
    for (x, &s) in input.iter_mut().zip(scratch.iter()) {
        *x = *x - lr * s;
    }
    loss
}

/// Unigram^0.75 sampling table over the given weights (degrees).
pub fn negative_table(degrees: &[usize]) -> Vec<u32> {
    let n = degrees.len();
    let size = MAX_NEGATIVE_TABLE.min(100 * n);
    let powered: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(0.75)).collect();
    let total: f64 = powered.iter().sum();
    if size == 0 || total <= 0.0 {
        return Vec::new();
    }
    let mut table = Vec::with_capacity(size);
    let mut cumulative = 0.0;
    for (u, &w) in powered.iter().enumerate() {
        cumulative += w / total;
        let upto = ((cumulative * size as f64).round() as usize).min(size);
        while table.len() < upto {
            table.push(u as u32);
        }
    }
    if let Some(last) = powered.iter().rposition(|&w| w > 0.0) {
        table.resize(size, last as u32);
    }
    table
}

/// Trains input vectors for every node of the corpus.
pub fn train_sgns(corpus: &WalkCorpus, degrees: &[usize], cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let n = corpus.node_count();
    if degrees.len() != n {
        return Err(Error::Contract(format!(
            "{} degrees for a corpus over {n} nodes",
            degrees.len()
        )));
    }
    let dim = cfg.dim;
    let mut input = init_vectors(n, dim, cfg.seed);
    if dim == 0 || n == 0 {
        return Ok(TrainOutput {
            dim,
            vectors: input,
            epoch_losses: Vec::new(),
        });
    }
    let mut context = vec![0f32; n * dim];
    let table = negative_table(degrees);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5347_4e53);
    let mut scratch = vec![0f32; dim];
    let mut negatives = Vec::with_capacity(cfg.negatives);

    let total = (cfg.epochs * corpus.token_count()).max(1) as f32;
    let floor = cfg.lr_initial / 100.0;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0f64;
        let mut pairs = 0usize;
        for walk in corpus.iter() {
            for (i, &center) in walk.iter().enumerate() {
                let lr = (cfg.lr_initial * (1.0 - processed as f32 / total)).max(floor);
                processed += 1;
                let span = cfg.window - rng.gen_range(0..cfg.window);
                let lo = i.saturating_sub(span);
                let hi = (i + span).min(walk.len() - 1);
                for (jj, &target) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if jj == i || table.is_empty() {
                        continue;
                    }
                    negatives.clear();
                    for _ in 0..cfg.negatives {
                        for _ in 0..8 {
                            let z = table[rng.gen_range(0..table.len())];
                            if z != target {
                                negatives.push(z as usize);
                                break;
                            }
                        }
                    }
                    let c = center as usize;
                    let loss = sgns_step(
                        &mut input[c * dim..(c + 1) * dim],
                        &mut context,
                        target as usize,
                        &negatives,
                        lr,
                        &mut scratch,
                    );
                    loss_sum += loss as f64;
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 });
    }

    Ok(TrainOutput {
        dim,
        vectors: input,
        epoch_losses,
    })
}
