//! Welch's t-test and ordinary least squares with Wald tests.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, Matrix};

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() || !(df > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateVariance(format!(
            "each group needs at least 2 values (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if !(se2 > 0.0) {
        return Err(Error::DegenerateVariance("both groups are constant".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(TTest {
        t,
        df,
        p: t_two_sided_p(t, df),
        mean_a: ma,
        mean_b: mb,
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n: usize,
    pub df_resid: usize,
    pub residual_variance: f64,
}

impl GlmFit {
    pub fn coefficient(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn gram(x: &Matrix) -> Matrix {
    let k = x.cols();
    let mut g = Matrix::zeros(k, k);
    for row in x.iter_rows() {
        for i in 0..k {
            for j in 0..=i {
                let v = g.get(i, j) + row[i] * row[j];
                g.set(i, j, v);
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            g.set(j, i, g.get(i, j));
        }
    }
    g
}

fn leading_block(g: &Matrix, m: usize) -> Matrix {
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out.set(i, j, g.get(i, j));
        }
    }
    out
}

/// Gaussian identity-link GLM, i.e. ordinary least squares via the normal
/// equations, with Wald t tests on `n - k` degrees of freedom.
///
/// `design` must already contain the intercept column if one is wanted.
pub fn glm_fit(design: &Matrix, response: &[f64], names: &[String]) -> Result<GlmFit> {
    let (n, k) = (design.rows(), design.cols());
    crate::linalg::check_dim(n, response.len())?;
    crate::linalg::check_dim(k, names.len())?;
    if n <= k {
        return Err(Error::invalid(format!("need more rows than columns ({n} <= {k})")));
    }
    let g = gram(design);
    let l = match cholesky(&g) {
        Ok(l) => l,
        Err(j) => {
            // Regress the offending column on the ones before it to name
            // its partners.
            let mut others = Vec::new();
            if j > 0 {
                if let Ok(lj) = cholesky(&leading_block(&g, j)) {
                    let rhs: Vec<f64> = (0..j).map(|i| g.get(i, j)).collect();
                    let coef = cholesky_solve(&lj, &rhs);
                    others = coef
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.abs() > 1e-8)
                        .map(|(i, _)| names[i].clone())
                        .collect();
                }
            }
            return Err(Error::RankDeficient {
                column: names[j].clone(),
                others,
            });
        }
    };
    let xty: Vec<f64> = (0..k)
        .map(|c| design.iter_rows().zip(response).map(|(r, y)| r[c] * y).sum())
        .collect();
    let beta = cholesky_solve(&l, &xty);
    let rss: f64 = design
        .iter_rows()
        .zip(response)
        .map(|(r, y)| (y - dot(r, &beta)).powi(2))
        .sum();
    let df_resid = n - k;
    let sigma2 = rss / df_resid as f64;
    let mut std_errors = Vec::with_capacity(k);
    for c in 0..k {
        let mut e = vec![0.0; k];
        e[c] = 1.0;
        let inv_col = cholesky_solve(&l, &e);
        std_errors.push((sigma2 * inv_col[c]).max(0.0).sqrt());
    }
    let t_values: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            if se > 0.0 {
                b / se
            } else if b == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(b)
            }
        })
        .collect();
    let p_values = t_values.iter().map(|&t| t_two_sided_p(t, df_resid as f64)).collect();
    Ok(GlmFit {
        names: names.to_vec(),
        estimates: beta,
        std_errors,
        t_values,
        p_values,
        n,
        df_resid,
        residual_variance: sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_groups() {
        let r = welch_t_test(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_variance() {
        assert!(matches!(
            welch_t_test(&[1.0, 1.0], &[1.0, 1.0]),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn swap_negates_t() {
        let a = [0.1, 0.5, 0.9, 0.4];
        let b = [1.2, 0.8, 1.9];
        let x = welch_t_test(&a, &b).unwrap();
        let y = welch_t_test(&b, &a).unwrap();
        assert_eq!(x.t, -y.t);
        assert_eq!(x.p, y.p);
        assert_eq!(x.df, y.df);
    }

    #[test]
    fn exact_line() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = glm_fit(&x, &y, &names(&["intercept", "x"])).unwrap();
        assert!((f.estimates[0] - 1.0).abs() < 1e-12);
        assert!((f.estimates[1] - 2.0).abs() < 1e-12);
        assert!(f.residual_variance < 1e-20);
    }

    #[test]
    fn orthogonal_predictor_gets_zero() {
        // Centered x is orthogonal to a response symmetric about its mean.
        let x = Matrix::from_rows(&[
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let y = [2.0, 2.0, 5.0, 5.0];
        let f = glm_fit(&x, &y, &names(&["intercept", "x"])).unwrap();
        assert!(f.estimates[1].abs() < 1e-9);
        assert!((f.p_values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![1.0, 1.0, 2.0],
            vec![1.0, 2.0, 2.0],
            vec![1.0, 4.0, 2.0],
        ])
        .unwrap();
        match glm_fit(&x, &[1.0, 2.0, 3.0, 4.0], &names(&["intercept", "a", "b"])) {
            Err(Error::RankDeficient { column, others }) => {
                assert_eq!(column, "b");
                assert_eq!(others, vec!["intercept"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(glm_fit(&x, &[0.0, 1.0], &names(&["a", "b"])).is_err());
    }
}
