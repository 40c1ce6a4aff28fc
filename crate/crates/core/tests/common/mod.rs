#![allow(dead_code)]

use careerrec::classifier::{ConcentrationClassifier, LrConfig};
use careerrec::dataset::{Concentration, Gender, InteractionDataset, Item, UserRecord};
use careerrec::linalg::Matrix;
use careerrec::ncf::{NcfConfig, NcfModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, random_vec(rng, rows * cols, scale)).unwrap()
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// NCF model with every parameter drawn uniformly from (-1, 1).
pub fn random_ncf(seed: u64, users: usize, items: usize, d: usize, h: usize) -> NcfModel {
    let mut r = rng(seed);
    let config = NcfConfig {
        embedding_dim: d,
        hidden_units: h,
        ..NcfConfig::default()
    };
    NcfModel::from_parts(
        ids("u", users),
        ids("i", items),
        random_matrix(&mut r, users, d, 1.0),
        random_matrix(&mut r, items, d, 1.0),
        random_matrix(&mut r, 2 * d, h, 1.0),
        random_vec(&mut r, h, 1.0),
        random_vec(&mut r, h, 1.0),
        r.random_range(0.5..1.5),
        config,
    )
    .unwrap()
}

pub fn random_classifier(seed: u64, d: usize, c: usize, l2: f64) -> ConcentrationClassifier {
    let mut r = rng(seed);
    ConcentrationClassifier::from_parts(
        random_matrix(&mut r, d, c, 1.0),
        random_vec(&mut r, c, 1.0),
        ids("c", c),
        LrConfig {
            l2,
            ..LrConfig::default()
        },
    )
    .unwrap()
}

/// Small configuration that trains in milliseconds.
pub fn toy_ncf_config(seed: u64) -> NcfConfig {
    NcfConfig {
        embedding_dim: 8,
        hidden_units: 6,
        dropout_p: 0.0,
        learning_rate: 0.01,
        epochs: 300,
        l2: 1e-5,
        negative_ratio: 1.0,
        fold_in_iterations: 300,
        seed,
    }
}

/// Build a dataset from `(user, gender, concentration, liked item indices)`.
pub fn dataset(
    n_items: usize,
    users: &[(&str, Gender, Option<&str>, &[usize])],
) -> InteractionDataset {
    let items = (0..n_items)
        .map(|i| Item {
            item_id: format!("i{i}"),
            name: format!("Item {i}"),
        })
        .collect();
    let mut concs: Vec<String> = users.iter().filter_map(|u| u.2.map(str::to_string)).collect();
    concs.sort();
    concs.dedup();
    let concentrations = concs
        .iter()
        .map(|c| Concentration {
            concentration_id: c.clone(),
            name: c.to_uppercase(),
        })
        .collect();
    let records = users
        .iter()
        .map(|(id, g, c, _)| UserRecord {
            user_id: id.to_string(),
            gender: *g,
            concentration: c.map(str::to_string),
        })
        .collect();
    let likes: Vec<(String, String)> = users
        .iter()
        .flat_map(|(id, _, _, items)| items.iter().map(move |i| (id.to_string(), format!("i{i}"))))
        .collect();
    InteractionDataset::new(records, items, concentrations, likes).unwrap()
}

/// Solve the normal equations by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn normal_equation_oracle(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let k = x.cols();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, yi) in x.iter_rows().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

/// DCG of a ranking with a single relevant item, summed term by term over
/// the top k, divided by the ideal DCG (relevant item first).
pub fn brute_ndcg(ranking: &[String], truth: &str, k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, c)| if c == truth { 1.0 / ((i + 2) as f64).log2() } else { 0.0 })
        .sum();
    let idcg = 1.0 / 2f64.log2();
    dcg / idcg
}
