//! Two-pathway neural collaborative filtering.
//!
//! A user embedding `p` and an item embedding `q` are concatenated and fed
//! through one ReLU hidden layer (with inverted dropout during training) and a
//! ReLU output unit:
//!
//! ```text
//! score = relu(w_out . dropout(relu(W^T [p; q] + b)) + b_out)
//! ```
//!
//! Training minimizes mean squared error against 1 (like) / 0 (sampled
//! negative) targets plus `l2 * sum(theta^2)` over every parameter, taking one
//! full-batch Adam step per epoch.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_negative_positions, InteractionDataset};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, Matrix};

const INIT_RANGE: f64 = 0.05;
const INIT_OUTPUT_BIAS: f64 = 0.5;

// RNG streams derived from the single configured seed.
const STREAM_INIT: u64 = 0;
const STREAM_NEGATIVES: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_FOLD_IN: u64 = 3;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NcfConfig {
    pub embedding_dim: usize,
    pub hidden_units: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Negatives sampled per like; 0 disables negative sampling.
    pub negative_ratio: f64,
    pub fold_in_iterations: usize,
    pub seed: u64,
}

impl Default for NcfConfig {
    fn default() -> Self {
        NcfConfig {
            embedding_dim: 100,
            hidden_units: 10,
            dropout_p: 0.1,
            learning_rate: 0.001,
            epochs: 20,
            l2: 0.0001,
            negative_ratio: 0.1,
            fold_in_iterations: 100,
            seed: 0,
        }
    }
}

impl NcfConfig {
    /// Settings for corpora of a few thousand users: 200 epochs at learning
    /// rate 0.01 with one negative per like.
    pub fn desk_scale() -> Self {
        NcfConfig {
            epochs: 200,
            learning_rate: 0.01,
            negative_ratio: 1.0,
            fold_in_iterations: 200,
            ..NcfConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_units == 0 {
            return Err(Error::invalid("embedding_dim and hidden_units must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::invalid("l2 must be >= 0"));
        }
        if !(self.negative_ratio >= 0.0) {
            return Err(Error::invalid("negative_ratio must be >= 0"));
        }
        Ok(())
    }
}

/// Mean squared error of each training epoch, measured on the forward pass
/// that produced that epoch's gradient.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcfModel {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    item_index: HashMap<String, usize>,
    pub(crate) user_embeddings: Matrix,
    pub(crate) item_embeddings: Matrix,
    /// `2d x h`; rows `0..d` act on the user half of the concatenation.
    pub(crate) hidden_weights: Matrix,
    pub(crate) hidden_bias: Vec<f64>,
    pub(crate) output_weights: Vec<f64>,
    pub(crate) output_bias: f64,
    config: NcfConfig,
}

/// One (user position, item position, target) training example.
pub type Sample = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
struct Grads {
    user: Matrix,
    item: Matrix,
    hidden_weights: Matrix,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
}

impl NcfModel {
    /// Seeded initialization: embeddings uniform in (-0.05, 0.05), dense
    /// weights Glorot-uniform, hidden biases zero, output bias 0.5 so the
    /// output unit starts in its active region.
    pub fn initialize(user_ids: Vec<String>, item_ids: Vec<String>, config: NcfConfig) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let h = config.hidden_units;
        let mut rng = rng_for(config.seed, STREAM_INIT);
        let mut uniform = |n: usize, lim: f64| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-lim..lim)).collect()
        };
        let user_embeddings = Matrix::from_vec(user_ids.len(), d, uniform(user_ids.len() * d, INIT_RANGE))?;
        let item_embeddings = Matrix::from_vec(item_ids.len(), d, uniform(item_ids.len() * d, INIT_RANGE))?;
        let glorot_hidden = (6.0 / (2 * d + h) as f64).sqrt();
        let hidden_weights = Matrix::from_vec(2 * d, h, uniform(2 * d * h, glorot_hidden))?;
        let glorot_out = (6.0 / (h + 1) as f64).sqrt();
        let output_weights = uniform(h, glorot_out);
        let item_index = index_of(&item_ids);
        Ok(NcfModel {
            user_ids,
            item_ids,
            item_index,
            user_embeddings,
            item_embeddings,
            hidden_weights,
            hidden_bias: vec![0.0; h],
            output_weights,
            output_bias: INIT_OUTPUT_BIAS,
            config,
        })
    }

    /// Assemble a model from explicit parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        user_embeddings: Matrix,
        item_embeddings: Matrix,
        hidden_weights: Matrix,
        hidden_bias: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
        config: NcfConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let h = config.hidden_units;
        check_dim(user_ids.len(), user_embeddings.rows())?;
        check_dim(d, user_embeddings.cols())?;
        check_dim(item_ids.len(), item_embeddings.rows())?;
        check_dim(d, item_embeddings.cols())?;
        check_dim(2 * d, hidden_weights.rows())?;
        check_dim(h, hidden_weights.cols())?;
        check_dim(h, hidden_bias.len())?;
        check_dim(h, output_weights.len())?;
        let item_index = index_of(&item_ids);
        if item_index.len() != item_ids.len() {
            return Err(Error::Artifact("duplicate item ids".into()));
        }
        Ok(NcfModel {
            user_ids,
            item_ids,
            item_index,
            user_embeddings,
            item_embeddings,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            config,
        })
    }

    pub fn config(&self) -> &NcfConfig {
        &self.config
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.config.hidden_units
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_position(&self, item_id: &str) -> Option<usize> {
        self.item_index.get(item_id).copied()
    }

    pub fn user_embeddings(&self) -> &Matrix {
        &self.user_embeddings
    }

    pub fn item_embeddings(&self) -> &Matrix {
        &self.item_embeddings
    }

    pub fn hidden_weights(&self) -> &Matrix {
        &self.hidden_weights
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output_weights
    }

    pub fn output_bias(&self) -> f64 {
        self.output_bias
    }

    pub fn user_embedding(&self, user_id: &str) -> Option<&[f64]> {
        self.user_ids
            .iter()
            .position(|u| u == user_id)
            .map(|i| self.user_embeddings.row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.user_embeddings.is_finite()
            && self.item_embeddings.is_finite()
            && self.hidden_weights.is_finite()
            && self.hidden_bias.iter().all(|x| x.is_finite())
            && self.output_weights.iter().all(|x| x.is_finite())
            && self.output_bias.is_finite()
    }

    /// Inference-mode score of an arbitrary (user, item) embedding pair.
    pub fn forward(&self, user_emb: &[f64], item_emb: &[f64]) -> Result<f64> {
        self.forward_impl(user_emb, item_emb, None::<&mut ChaCha8Rng>)
    }

    /// Training-mode score: hidden activations pass through an inverted
    /// dropout mask drawn from `rng`.
    pub fn forward_train<R: Rng>(&self, user_emb: &[f64], item_emb: &[f64], rng: &mut R) -> Result<f64> {
        self.forward_impl(user_emb, item_emb, Some(rng))
    }

    fn forward_impl<R: Rng>(&self, user_emb: &[f64], item_emb: &[f64], rng: Option<&mut R>) -> Result<f64> {
        let d = self.embedding_dim();
        check_dim(d, user_emb.len())?;
        check_dim(d, item_emb.len())?;
        let mut pre = self.hidden_bias.clone();
        self.add_half(&mut pre, user_emb, 0);
        self.add_half(&mut pre, item_emb, d);
        let keep = 1.0 - self.config.dropout_p;
        let mut rng = rng;
        let mut z = self.output_bias;
        for (k, &a) in pre.iter().enumerate() {
            let mut act = a.max(0.0);
            if let Some(r) = rng.as_deref_mut() {
                act = if r.random_bool(keep) { act / keep } else { 0.0 };
            }
            z += self.output_weights[k] * act;
        }
        Ok(z.max(0.0))
    }

    /// Score of a known (user, item) pair by position.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.forward(self.user_embeddings.row(user), self.item_embeddings.row(item))
            .expect("stored embeddings have model dimension")
    }

    /// `out += W[offset..offset+d]^T x`
    fn add_half(&self, out: &mut [f64], x: &[f64], offset: usize) {
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.hidden_weights.row(offset + r)) {
                *o += xr * w;
            }
        }
    }

    fn half_products(&self, emb: &Matrix, offset: usize) -> Matrix {
        let h = self.hidden_units();
        let mut out = Matrix::zeros(emb.rows(), h);
        for r in 0..emb.rows() {
            let mut row = vec![0.0; h];
            self.add_half(&mut row, emb.row(r), offset);
            out.row_mut(r).copy_from_slice(&row);
        }
        out
    }

    /// Mean-squared-error loss over `samples` plus `l2 * ||theta||^2`, and its
    /// gradient with respect to every parameter. `masks`, when given, holds
    /// one inverted-dropout multiplier per (sample, hidden unit).
    fn loss_and_grad(&self, samples: &[Sample], masks: Option<&[f64]>, l2: f64) -> (f64, f64, Grads) {
        let d = self.embedding_dim();
        let h = self.hidden_units();
        let n = samples.len().max(1) as f64;
        let user_part = self.half_products(&self.user_embeddings, 0);
        let item_part = self.half_products(&self.item_embeddings, d);

        let mut g_user_pre = Matrix::zeros(self.user_embeddings.rows(), h);
        let mut g_item_pre = Matrix::zeros(self.item_embeddings.rows(), h);
        let mut g_hb = vec![0.0; h];
        let mut g_wo = vec![0.0; h];
        let mut g_bo = 0.0;
        let mut sse = 0.0;
        let mut pre = vec![0.0; h];
        let mut act = vec![0.0; h];
        let mut g_pre = vec![0.0; h];

        for (s, &(u, i, target)) in samples.iter().enumerate() {
            let mask = masks.map(|m| &m[s * h..(s + 1) * h]);
            let mut z = self.output_bias;
            for k in 0..h {
                pre[k] = user_part.get(u, k) + item_part.get(i, k) + self.hidden_bias[k];
                act[k] = pre[k].max(0.0) * mask.map_or(1.0, |m| m[k]);
                z += self.output_weights[k] * act[k];
            }
            let score = z.max(0.0);
            let err = score - target;
            sse += err * err;
            if z <= 0.0 {
                continue;
            }
            let gz = 2.0 * err / n;
            g_bo += gz;
            for k in 0..h {
                g_wo[k] += gz * act[k];
                g_pre[k] = if pre[k] > 0.0 {
                    gz * self.output_weights[k] * mask.map_or(1.0, |m| m[k])
                } else {
                    0.0
                };
                g_hb[k] += g_pre[k];
            }
            for (acc, g) in g_user_pre.row_mut(u).iter_mut().zip(&g_pre) {
                *acc += g;
            }
            for (acc, g) in g_item_pre.row_mut(i).iter_mut().zip(&g_pre) {
                *acc += g;
            }
        }

        let mut g_w = Matrix::zeros(2 * d, h);
        let g_user = self.backprop_half(&self.user_embeddings, &g_user_pre, &mut g_w, 0);
        let g_item = self.backprop_half(&self.item_embeddings, &g_item_pre, &mut g_w, d);
        let mut grads = Grads {
            user: g_user,
            item: g_item,
            hidden_weights: g_w,
            hidden_bias: g_hb,
            output_weights: g_wo,
            output_bias: g_bo,
        };

        let mse = sse / n;
        let mut penalty = 0.0;
        if l2 > 0.0 {
            for (g, p) in grads.params_mut().into_iter().zip(self.params()) {
                for (gi, &pi) in g.iter_mut().zip(p) {
                    *gi += 2.0 * l2 * pi;
                    penalty += pi * pi;
                }
            }
        }
        (mse + l2 * penalty, mse, grads)
    }

    /// Pushes pre-activation gradients of one pathway back to its embeddings
    /// and its half of the hidden weights.
    fn backprop_half(&self, emb: &Matrix, g_pre: &Matrix, g_w: &mut Matrix, offset: usize) -> Matrix {
        let d = self.embedding_dim();
        let mut g_emb = Matrix::zeros(emb.rows(), d);
        for r in 0..emb.rows() {
            let gp = g_pre.row(r);
            if gp.iter().all(|&g| g == 0.0) {
                continue;
            }
            for (c, &e) in emb.row(r).iter().enumerate() {
                let w = self.hidden_weights.row(offset + c);
                g_emb.set(r, c, dot(w, gp));
                for (gw, &g) in g_w.row_mut(offset + c).iter_mut().zip(gp) {
                    *gw += e * g;
                }
            }
        }
        g_emb
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.user_embeddings.as_slice(),
            self.item_embeddings.as_slice(),
            self.hidden_weights.as_slice(),
            &self.hidden_bias,
            &self.output_weights,
            std::slice::from_ref(&self.output_bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.user_embeddings.as_mut_slice(),
            self.item_embeddings.as_mut_slice(),
            self.hidden_weights.as_mut_slice(),
            &mut self.hidden_bias,
            &mut self.output_weights,
            std::slice::from_mut(&mut self.output_bias),
        ]
    }

    /// Euclidean norm of all parameters taken together.
    pub fn parameter_norm(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|p| p.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Learn an embedding for a user outside the training set from their
    /// liked items. Every model parameter stays frozen; only the fresh
    /// embedding is optimized with Adam against targets 1 for the likes and 0
    /// for an equal-size seeded sample of other items.
    pub fn fold_in_user<S: AsRef<str>>(&self, liked_items: &[S], c: &NcfConfig) -> Result<Vec<f64>> {
        if liked_items.is_empty() {
            return Err(Error::Empty("fold-in needs at least one liked item".into()));
        }
        let mut liked = BTreeSet::new();
        for id in liked_items {
            let id = id.as_ref();
            let pos = self.item_position(id).ok_or_else(|| Error::UnknownId {
                kind: "item",
                id: id.to_string(),
            })?;
            liked.insert(pos);
        }
        let d = self.embedding_dim();
        let h = self.hidden_units();
        let mut rng = rng_for(c.seed, STREAM_FOLD_IN);
        let mut p: Vec<f64> = (0..d).map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE)).collect();
        let mut pool: Vec<usize> = (0..self.item_ids.len()).filter(|i| !liked.contains(i)).collect();
        let n_neg = liked.len().min(pool.len());
        let (negatives, _) = pool.partial_shuffle(&mut rng, n_neg);

        // Item pathway contributions are constant while the model is frozen.
        let mut fixed: Vec<(Vec<f64>, f64)> = Vec::with_capacity(liked.len() + n_neg);
        let targets = liked.iter().map(|&i| (i, 1.0)).chain(negatives.iter().map(|&i| (i, 0.0)));
        for (i, t) in targets {
            let mut part = self.hidden_bias.clone();
            self.add_half(&mut part, self.item_embeddings.row(i), d);
            fixed.push((part, t));
        }
        let n = fixed.len() as f64;

        let mut adam = Adam::new(&[d], c.learning_rate);
        let mut g_pre_sum = vec![0.0; h];
        let mut grad = vec![0.0; d];
        for _ in 0..c.fold_in_iterations {
            let mut user_part = vec![0.0; h];
            self.add_half(&mut user_part, &p, 0);
            g_pre_sum.iter_mut().for_each(|g| *g = 0.0);
            for (part, target) in &fixed {
                let mut z = self.output_bias;
                for k in 0..h {
                    z += self.output_weights[k] * (user_part[k] + part[k]).max(0.0);
                }
                if z <= 0.0 {
                    continue;
                }
                let gz = 2.0 * (z - target) / n;
                for k in 0..h {
                    if user_part[k] + part[k] > 0.0 {
                        g_pre_sum[k] += gz * self.output_weights[k];
                    }
                }
            }
            for (r, g) in grad.iter_mut().enumerate() {
                let w = self.hidden_weights.row(r);
                *g = w.iter().zip(&g_pre_sum).map(|(a, b)| a * b).sum::<f64>() + 2.0 * c.l2 * p[r];
            }
            adam.step(&mut [&mut p], &[&grad]);
        }
        Ok(p)
    }

    /// Compare the backpropagated gradient of the single-sample squared error
    /// `(score - target)^2` to central finite differences (step 1e-5) over
    /// the sample's user row, its item row and every dense parameter. Returns
    /// the largest relative error `|a - n| / max(|a|, |n|, 1e-6)`.
    pub fn gradient_check(&self, sample: Sample) -> f64 {
        const STEP: f64 = 1e-5;
        let (u, i, target) = sample;
        let (_, _, g) = self.loss_and_grad(&[sample], None, 0.0);
        let loss = |m: &NcfModel| {
            let e = m.score(u, i) - target;
            e * e
        };
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        let mut check = |probe: &mut NcfModel, group: usize, idx: usize, analytic: f64| {
            let orig = probe.params()[group][idx];
            probe.params_mut()[group][idx] = orig + STEP;
            let up = loss(probe);
            probe.params_mut()[group][idx] = orig - STEP;
            let down = loss(probe);
            probe.params_mut()[group][idx] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        };
        let d = self.embedding_dim();
        for c in 0..d {
            check(&mut probe, 0, u * d + c, g.user.get(u, c));
            check(&mut probe, 1, i * d + c, g.item.get(i, c));
        }
        let dense: [(usize, &[f64]); 4] = [
            (2, g.hidden_weights.as_slice()),
            (3, &g.hidden_bias),
            (4, &g.output_weights),
            (5, std::slice::from_ref(&g.output_bias)),
        ];
        for (group, grads) in dense {
            for (idx, &a) in grads.iter().enumerate() {
                check(&mut probe, group, idx, a);
            }
        }
        worst
    }
}

impl Grads {
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.user.as_mut_slice(),
            self.item.as_mut_slice(),
            self.hidden_weights.as_mut_slice(),
            &mut self.hidden_bias,
            &mut self.output_weights,
            std::slice::from_mut(&mut self.output_bias),
        ]
    }
}

fn index_of(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
}

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub(crate) fn new(sizes: &[usize], lr: f64) -> Self {
        Adam {
            lr,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub(crate) fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        for (g_idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[g_idx];
            let v = &mut self.v[g_idx];
            for j in 0..p.len() {
                m[j] = Self::BETA1 * m[j] + (1.0 - Self::BETA1) * g[j];
                v[j] = Self::BETA2 * v[j] + (1.0 - Self::BETA2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
            }
        }
    }
}

/// Train on explicit samples. Used directly by tests that need corpora
/// `train` would reject (e.g. negatives only).
pub fn train_samples(
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    samples: &[Sample],
    c: &NcfConfig,
) -> Result<(NcfModel, TrainingLog)> {
    let mut model = NcfModel::initialize(user_ids, item_ids, c.clone())?;
    for &(u, i, _) in samples {
        if u >= model.user_ids.len() || i >= model.item_ids.len() {
            return Err(Error::invalid(format!("sample ({u}, {i}) out of range")));
        }
    }
    let h = c.hidden_units;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(&sizes, c.learning_rate);
    let mut dropout_rng = rng_for(c.seed, STREAM_DROPOUT);
    let keep = 1.0 - c.dropout_p;
    let mut masks = vec![1.0; samples.len() * h];
    let mut log = TrainingLog::default();
    for _ in 0..c.epochs {
        let masks = if c.dropout_p > 0.0 {
            for m in masks.iter_mut() {
                *m = if dropout_rng.random_bool(keep) { 1.0 / keep } else { 0.0 };
            }
            Some(masks.as_slice())
        } else {
            None
        };
        let (_, mse, mut grads) = model.loss_and_grad(samples, masks, c.l2);
        log.epoch_mse.push(mse);
        let g = grads.params_mut();
        let g: Vec<&[f64]> = g.into_iter().map(|s| &*s).collect();
        adam.step(&mut model.params_mut(), &g);
    }
    if !model.is_finite() {
        return Err(Error::invalid("training diverged to non-finite parameters"));
    }
    Ok((model, log))
}

/// Train on every like in `d` (target 1) plus a seeded sample of
/// `negative_ratio * |likes|` unobserved pairs (target 0).
pub fn train(d: &InteractionDataset, c: &NcfConfig) -> Result<(NcfModel, TrainingLog)> {
    c.validate()?;
    if d.likes().is_empty() {
        return Err(Error::Empty("dataset has no likes to train on".into()));
    }
    let mut samples: Vec<Sample> = d.like_positions().into_iter().map(|(u, i)| (u, i, 1.0)).collect();
    if c.negative_ratio > 0.0 {
        let neg_seed = rng_for(c.seed, STREAM_NEGATIVES).random::<u64>();
        let negatives = sample_negative_positions(d, c.negative_ratio, neg_seed)?;
        samples.extend(negatives.into_iter().map(|(u, i)| (u, i, 0.0)));
    }
    let user_ids = d.users().iter().map(|u| u.user_id.clone()).collect();
    let item_ids = d.items().iter().map(|i| i.item_id.clone()).collect();
    train_samples(user_ids, item_ids, &samples, c)
}
