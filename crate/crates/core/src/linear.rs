//! One-vs-all hinge-loss perceptron.
//!
//! The same model type serves as the final classifier (one output per class)
//! and as each region-selection policy (one output per region). The bias is
//! stored as an extra trailing column of the weight matrix, so an input `x`
//! is scored as `w_c . [x; 1]`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::AggregatedFeatures;

/// Scale below which lazily-shrunk weights are folded back into storage.
/// Keeping the scale near 1 bounds cancellation in the lazy iterate sums.
const MIN_SCALE: f64 = 0.5;

/// Dense `n_outputs x (dim + 1)` weight matrix, row-major, bias last.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    n_outputs: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_outputs: usize, dim: usize) -> Self {
        LinearModel {
            n_outputs,
            dim,
            weights: vec![0.0; n_outputs * (dim + 1)],
        }
    }

    pub fn new(n_outputs: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if n_outputs == 0 {
            return Err(Error::InvalidParameter("model needs at least one output".into()));
        }
        if weights.len() != n_outputs * (dim + 1) {
            return Err(Error::DimensionMismatch {
                expected: n_outputs * (dim + 1),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(LinearModel {
            n_outputs,
            dim,
            weights,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights of output `c`, bias last.
    pub fn row(&self, c: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.weights[c * w..(c + 1) * w]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        let w = self.dim + 1;
        &mut self.weights[c * w..(c + 1) * w]
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> LinearModel {
        LinearModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    pub fn score_values(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: input.len(),
            });
        }
        Ok((0..self.n_outputs)
            .map(|c| {
                let row = self.row(c);
                let dot: f64 = row[..self.dim].iter().zip(input).map(|(w, x)| w * x).sum();
                dot + row[self.dim]
            })
            .collect())
    }

    pub fn score(&self, input: &AggregatedFeatures) -> Result<Vec<f64>> {
        self.score_values(input.values())
    }

    /// Highest-scoring output, lowest index on ties.
    pub fn predict_class(&self, input: &AggregatedFeatures) -> Result<usize> {
        let scores = self.score(input)?;
        Ok(argmax(scores.iter().copied().enumerate()).expect("at least one output"))
    }

    /// Highest-scoring region outside `acquired`, lowest index on ties.
    pub fn predict_region(&self, input: &AggregatedFeatures, acquired: &[usize]) -> Result<usize> {
        let mut mask = vec![false; self.n_outputs];
        let mut taken = 0;
        for &r in acquired {
            if r >= self.n_outputs {
                return Err(Error::RegionOutOfRange {
                    index: r,
                    count: self.n_outputs,
                });
            }
            if !std::mem::replace(&mut mask[r], true) {
                taken += 1;
            }
        }
        if taken >= self.n_outputs {
            return Err(Error::AllRegionsAcquired(self.n_outputs));
        }
        let scores = self.score(input)?;
        Ok(argmax(scores.into_iter().enumerate().filter(|(i, _)| !mask[*i]))
            .expect("at least one free region"))
    }
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in it {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Return the mean of the weight iterates instead of the last one.
    pub averaged: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-5,
            seed: 0,
            averaged: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.learning_rate * self.l2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "l2 must satisfy 0 <= learning_rate * l2 < 1, got l2 = {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// A training input in coordinate form; zero entries may be omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub label: usize,
}

impl SparseExample {
    pub fn from_dense(input: &AggregatedFeatures, label: usize) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in input.values().iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32);
                values.push(v);
            }
        }
        SparseExample {
            indices,
            values,
            label,
        }
    }
}

/// Fits a one-vs-all hinge perceptron on dense examples.
pub fn fit(
    examples: &[(AggregatedFeatures, usize)],
    n_outputs: usize,
    config: &TrainConfig,
) -> Result<LinearModel> {
    let Some((first, _)) = examples.first() else {
        return Err(Error::EmptyDataset("no training examples".into()));
    };
    let dim = first.len();
    let mut sparse = Vec::with_capacity(examples.len());
    for (x, y) in examples {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        sparse.push(SparseExample::from_dense(x, *y));
    }
    fit_sparse(&sparse, dim, n_outputs, config)
}

/// Per-step SGD on the hinge loss, one binary problem per output.
///
/// At each step every output `c` shrinks by `1 - lr*l2`, then, if
/// `t * (w_c . [x; 1]) < 1` for the pre-step weights and `t = +1` iff the
/// label is `c` (else `-1`), adds `lr * t * [x; 1]`. Example order is
/// reshuffled every epoch from `config.seed`.
///
/// Shrinkage is kept as a shared scale factor and the iterate average is
/// accumulated lazily, so a step costs time proportional to the nonzeros of
/// `x` rather than to `dim`.
pub fn fit_sparse(
    examples: &[SparseExample],
    dim: usize,
    n_outputs: usize,
    config: &TrainConfig,
) -> Result<LinearModel> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyDataset("no training examples".into()));
    }
    if n_outputs == 0 {
        return Err(Error::InvalidParameter("model needs at least one output".into()));
    }
    for ex in examples {
        if ex.label >= n_outputs {
            return Err(Error::LabelOutOfRange {
                label: ex.label,
                n_outputs,
            });
        }
        if ex.indices.len() != ex.values.len() {
            return Err(Error::DimensionMismatch {
                expected: ex.indices.len(),
                actual: ex.values.len(),
            });
        }
        if let Some(&i) = ex.indices.iter().find(|&&i| i as usize >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: i as usize + 1,
            });
        }
    }

    let width = dim + 1;
    let lr = config.learning_rate;
    let decay = 1.0 - lr * config.l2;
    let averaged = config.averaged;

    // w_c = scale * v_c
    let mut v = vec![0.0; n_outputs * width];
    let mut scale = 1.0;
    // running sum of scales, and per-weight sum of iterates up to `synced`
    let mut scale_sum = 0.0;
    let mut acc = if averaged { vec![0.0; v.len()] } else { Vec::new() };
    let mut synced = if averaged { vec![0.0; v.len()] } else { Vec::new() };
    let mut steps: u64 = 0;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &e in &order {
            let ex = &examples[e];
            let prev_scale = scale;
            scale *= decay;
            for c in 0..n_outputs {
                let base = c * width;
                let row = &v[base..base + width];
                let mut dot = row[dim];
                for (&i, &x) in ex.indices.iter().zip(&ex.values) {
                    dot += row[i as usize] * x;
                }
                let margin = prev_scale * dot;
                let target = if ex.label == c { 1.0 } else { -1.0 };
                if target * margin < 1.0 {
                    let step = lr * target / scale;
                    let coords = ex
                        .indices
                        .iter()
                        .map(|&i| i as usize)
                        .zip(ex.values.iter().copied())
                        .chain(std::iter::once((dim, 1.0)));
                    for (i, x) in coords {
                        let j = base + i;
                        if averaged {
                            acc[j] += v[j] * (scale_sum - synced[j]);
                            synced[j] = scale_sum;
                        }
                        v[j] += step * x;
                    }
                }
            }
            scale_sum += scale;
            steps += 1;

            if scale < MIN_SCALE {
                for j in 0..v.len() {
                    if averaged {
                        acc[j] += v[j] * (scale_sum - synced[j]);
                        synced[j] = 0.0;
                    }
                    v[j] *= scale;
                }
                scale = 1.0;
                scale_sum = 0.0;
            }
        }
    }

    let weights = if averaged {
        let n = steps as f64;
        v.iter()
            .zip(&acc)
            .zip(&synced)
            .map(|((&vj, &aj), &sj)| (aj + vj * (scale_sum - sj)) / n)
            .collect()
    } else {
        v.iter().map(|&vj| vj * scale).collect()
    };
    LinearModel::new(n_outputs, dim, weights)
}

/// Summed one-vs-all hinge loss of `model` over `examples`.
pub fn hinge_loss(model: &LinearModel, examples: &[(AggregatedFeatures, usize)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in examples {
        for (c, s) in model.score(x)?.into_iter().enumerate() {
            let t = if *y == c { 1.0 } else { -1.0 };
            total += (1.0 - t * s).max(0.0);
        }
    }
    Ok(total)
}
