//! Linear projection debiasing of user embeddings.
//!
//! The bias direction is the normalized difference between the mean female
//! and mean male embedding; debiasing removes each embedding's component along
//! it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm};

const DEGENERATE_NORM: f64 = 1e-12;

/// Unit-length gender bias direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BiasDirection {
    v: Vec<f64>,
}

impl BiasDirection {
    /// Normalizes `v`; fails when it is (numerically) zero.
    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !(n >= DEGENERATE_NORM) || !n.is_finite() {
            return Err(Error::DegenerateDirection { norm: n });
        }
        Ok(BiasDirection {
            v: v.into_iter().map(|x| x / n).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Signed component of `p` along the direction.
    pub fn project(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.v.len(), p.len())?;
        Ok(dot(p, &self.v))
    }
}

impl TryFrom<Vec<f64>> for BiasDirection {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Artifact(format!("bias direction has norm {n}, expected 1")));
        }
        Ok(BiasDirection { v })
    }
}

impl From<BiasDirection> for Vec<f64> {
    fn from(b: BiasDirection) -> Self {
        b.v
    }
}

/// Arithmetic mean of equal-length vectors.
pub fn group_mean<V: AsRef<[f64]>>(embeddings: &[V]) -> Result<Vec<f64>> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::Empty("group mean of zero embeddings".into()))?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for e in embeddings {
        let e = e.as_ref();
        check_dim(d, e.len())?;
        for (s, x) in sum.iter_mut().zip(e) {
            *s += x;
        }
    }
    let n = embeddings.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// `(mean(female) - mean(male)) / ||mean(female) - mean(male)||`
pub fn compute_bias_direction<V: AsRef<[f64]>>(female_embs: &[V], male_embs: &[V]) -> Result<BiasDirection> {
    let f = group_mean(female_embs)?;
    let m = group_mean(male_embs)?;
    check_dim(f.len(), m.len())?;
    let diff: Vec<f64> = f.iter().zip(&m).map(|(a, b)| a - b).collect();
    BiasDirection::from_vector(diff)
}

/// `p - (p . v) v`
pub fn debias_embedding(p: &[f64], b: &BiasDirection) -> Result<Vec<f64>> {
    let c = b.project(p)?;
    Ok(p.iter().zip(&b.v).map(|(x, v)| x - c * v).collect())
}
