//! Multinomial logistic regression from user embeddings to concentrations.
//!
//! The objective is mean softmax cross-entropy plus `l2 * ||W||^2` (the
//! intercepts are not penalized). It is minimized with the stochastic average
//! gradient method: every epoch visits the samples once in a seeded shuffled
//! order, refreshing that sample's stored gradient and stepping along the
//! average of all stored gradients. For a linear model the per-sample gradient
//! is `x_i r_i^T` with `r_i = softmax(z_i) - onehot(y_i)`, so only `r_i` is
//! stored.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, softmax, Matrix};
use crate::ncf::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            learning_rate: 0.001,
            epochs: 500,
            l2: 0.0001,
            seed: 0,
        }
    }
}

impl LrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::invalid("l2 must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationClassifier {
    /// `d x C`, column `c` scores `class_ids[c]`.
    weights: Matrix,
    intercepts: Vec<f64>,
    class_ids: Vec<String>,
    config: LrConfig,
}

impl ConcentrationClassifier {
    pub fn from_parts(weights: Matrix, intercepts: Vec<f64>, class_ids: Vec<String>, config: LrConfig) -> Result<Self> {
        check_dim(class_ids.len(), weights.cols())?;
        check_dim(class_ids.len(), intercepts.len())?;
        if !weights.is_finite() || !intercepts.iter().all(|x| x.is_finite()) {
            return Err(Error::Artifact("non-finite classifier parameters".into()));
        }
        Ok(ConcentrationClassifier {
            weights,
            intercepts,
            class_ids,
            config,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn config(&self) -> &LrConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    /// `W^T p (+ b)`
    pub fn logits(&self, p: &[f64], drop_intercept: bool) -> Result<Vec<f64>> {
        check_dim(self.dim(), p.len())?;
        let mut z = if drop_intercept {
            vec![0.0; self.n_classes()]
        } else {
            self.intercepts.clone()
        };
        add_logits(&self.weights, p, &mut z);
        Ok(z)
    }

    pub fn predict_proba(&self, p: &[f64], drop_intercept: bool) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(p, drop_intercept)?))
    }

    /// Top-`n` classes by probability, ties broken by ascending class id.
    pub fn rank_concentrations(&self, p: &[f64], n: usize, drop_intercept: bool) -> Result<Vec<(String, f64)>> {
        let z = self.logits(p, drop_intercept)?;
        let probs = softmax(&z);
        let order = rank_order(&z, &self.class_ids);
        Ok(order
            .into_iter()
            .take(n)
            .map(|c| (self.class_ids[c].clone(), probs[c]))
            .collect())
    }

    /// Mean cross-entropy plus `l2 * ||W||^2` on labelled rows.
    pub fn objective<S: AsRef<str>>(&self, x: &Matrix, labels: &[S]) -> Result<f64> {
        let y = self.label_positions(labels)?;
        Ok(self.objective_and_grad(x, &y).0)
    }

    pub fn accuracy<S: AsRef<str>>(&self, x: &Matrix, labels: &[S], drop_intercept: bool) -> Result<f64> {
        check_dim(x.rows(), labels.len())?;
        let mut hits = 0usize;
        for (row, label) in x.iter_rows().zip(labels) {
            let top = self.rank_concentrations(row, 1, drop_intercept)?;
            if top.first().map(|(c, _)| c.as_str()) == Some(label.as_ref()) {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    fn label_positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.class_ids
                    .binary_search_by(|c| c.as_str().cmp(l.as_ref()))
                    .map_err(|_| Error::UnknownId {
                        kind: "concentration",
                        id: l.as_ref().to_string(),
                    })
            })
            .collect()
    }

    fn objective_and_grad(&self, x: &Matrix, y: &[usize]) -> (f64, Matrix, Vec<f64>) {
        let n = x.rows().max(1) as f64;
        let l2 = self.config.l2;
        let mut g_w = Matrix::zeros(self.dim(), self.n_classes());
        let mut g_b = vec![0.0; self.n_classes()];
        let mut loss = 0.0;
        for (row, &label) in x.iter_rows().zip(y) {
            let z = self.logits(row, false).expect("row dimension checked");
            let mut r = softmax(&z);
            loss -= r[label].ln();
            r[label] -= 1.0;
            accumulate_outer(&mut g_w, row, &r, 1.0 / n);
            for (g, ri) in g_b.iter_mut().zip(&r) {
                *g += ri / n;
            }
        }
        let mut penalty = 0.0;
        for (g, w) in g_w.as_mut_slice().iter_mut().zip(self.weights.as_slice()) {
            *g += 2.0 * l2 * w;
            penalty += w * w;
        }
        (loss / n + l2 * penalty, g_w, g_b)
    }

    /// Largest relative error between the analytic objective gradient and
    /// central finite differences (step 1e-5), relative error taken as
    /// `|a - n| / max(|a|, |n|, 1e-6)`.
    pub fn gradient_check<S: AsRef<str>>(&self, x: &Matrix, labels: &[S]) -> Result<f64> {
        const STEP: f64 = 1e-5;
        let y = self.label_positions(labels)?;
        check_dim(x.rows(), y.len())?;
        check_dim(self.dim(), x.cols())?;
        let (_, g_w, g_b) = self.objective_and_grad(x, &y);
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        let mut compare = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        };
        for k in 0..g_w.as_slice().len() {
            let orig = probe.weights.as_slice()[k];
            probe.weights.as_mut_slice()[k] = orig + STEP;
            let up = probe.objective_and_grad(x, &y).0;
            probe.weights.as_mut_slice()[k] = orig - STEP;
            let down = probe.objective_and_grad(x, &y).0;
            probe.weights.as_mut_slice()[k] = orig;
            compare(g_w.as_slice()[k], (up - down) / (2.0 * STEP));
        }
        for (k, &g) in g_b.iter().enumerate() {
            let orig = probe.intercepts[k];
            probe.intercepts[k] = orig + STEP;
            let up = probe.objective_and_grad(x, &y).0;
            probe.intercepts[k] = orig - STEP;
            let down = probe.objective_and_grad(x, &y).0;
            probe.intercepts[k] = orig;
            compare(g, (up - down) / (2.0 * STEP));
        }
        Ok(worst)
    }
}

/// Indices ordered by descending logit, ties by ascending id.
fn rank_order(z: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| {
        z[b].partial_cmp(&z[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order
}

fn add_logits(w: &Matrix, p: &[f64], z: &mut [f64]) {
    for (r, &pr) in p.iter().enumerate() {
        if pr == 0.0 {
            continue;
        }
        for (zc, wc) in z.iter_mut().zip(w.row(r)) {
            *zc += pr * wc;
        }
    }
}

/// `m += scale * x r^T`
fn accumulate_outer(m: &mut Matrix, x: &[f64], r: &[f64], scale: f64) {
    for (row, &xv) in x.iter().enumerate() {
        let s = xv * scale;
        if s == 0.0 {
            continue;
        }
        for (mc, rc) in m.row_mut(row).iter_mut().zip(r) {
            *mc += s * rc;
        }
    }
}

/// Fit on one embedding row per label. Classes are the distinct labels in
/// ascending id order; at least two are required.
pub fn train_classifier<S: AsRef<str>>(
    embeddings: &Matrix,
    labels: &[S],
    c: &LrConfig,
) -> Result<ConcentrationClassifier> {
    c.validate()?;
    check_dim(embeddings.rows(), labels.len())?;
    let mut class_ids: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    class_ids.sort();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::invalid(format!(
            "classifier needs at least two distinct labels, got {}",
            class_ids.len()
        )));
    }
    let d = embeddings.cols();
    let n_classes = class_ids.len();
    let mut model = ConcentrationClassifier {
        weights: Matrix::zeros(d, n_classes),
        intercepts: vec![0.0; n_classes],
        class_ids,
        config: c.clone(),
    };
    let y = model.label_positions(labels)?;
    let n = embeddings.rows();

    let mut stored = Matrix::zeros(n, n_classes);
    let mut visited = vec![false; n];
    let mut n_seen = 0usize;
    let mut sum_w = Matrix::zeros(d, n_classes);
    let mut sum_b = vec![0.0; n_classes];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(c.seed, 0);
    let mut delta = vec![0.0; n_classes];

    for _ in 0..c.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = embeddings.row(i);
            let mut z = model.intercepts.clone();
            add_logits(&model.weights, x, &mut z);
            let mut r = softmax(&z);
            r[y[i]] -= 1.0;
            for ((dl, new), old) in delta.iter_mut().zip(&r).zip(stored.row(i)) {
                *dl = new - old;
            }
            stored.row_mut(i).copy_from_slice(&r);
            accumulate_outer(&mut sum_w, x, &delta, 1.0);
            for (s, dl) in sum_b.iter_mut().zip(&delta) {
                *s += dl;
            }
            if !visited[i] {
                visited[i] = true;
                n_seen += 1;
            }
            let step = c.learning_rate / n_seen as f64;
            let decay = 1.0 - 2.0 * c.learning_rate * c.l2;
            for (w, s) in model.weights.as_mut_slice().iter_mut().zip(sum_w.as_slice()) {
                *w = decay * *w - step * s;
            }
            for (b, s) in model.intercepts.iter_mut().zip(&sum_b) {
                *b -= step * s;
            }
        }
    }
    if !model.weights.is_finite() {
        return Err(Error::invalid("classifier training diverged"));
    }
    Ok(model)
}
