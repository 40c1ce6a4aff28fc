//! Metric, statistics and gradient checks against independent oracles.

mod common;

use careerrec::fairmetrics::{ndcg_at_k, ndcg_from_rank, u_par};
use careerrec::linalg::Matrix;
use careerrec::study::{glm_fit, welch_t_test};
use common::*;
use rand::Rng;

#[test]
fn ndcg_matches_brute_force_for_all_ranks_and_cutoffs() {
    for c in 1..=20 {
        let ranking = ids("c", c);
        for truth_pos in 0..c {
            for k in 0..=c + 1 {
                let got = ndcg_at_k(&ranking, &ranking[truth_pos], k);
                assert_eq!(got, brute_ndcg(&ranking, &ranking[truth_pos], k), "C={c} rank={truth_pos} k={k}");
                assert_eq!(ndcg_from_rank(Some(truth_pos + 1), k), got);
            }
        }
        assert_eq!(ndcg_at_k(&ranking, "absent", c), 0.0);
    }
}

#[test]
fn u_par_matches_hand_and_brute_force() {
    let female = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.7, 0.3]]).unwrap();
    let male = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
    assert!((u_par(&female, &male).unwrap() - 0.3).abs() < 1e-12);

    let mut r = rng(5);
    let f = random_matrix(&mut r, 5, 4, 2.0);
    let m = random_matrix(&mut r, 3, 4, 2.0);
    let mut expected = 0.0;
    for c in 0..4 {
        let mf: f64 = (0..5).map(|i| f.get(i, c)).sum::<f64>() / 5.0;
        let mm: f64 = (0..3).map(|i| m.get(i, c)).sum::<f64>() / 3.0;
        expected += (mf - mm).abs() / 4.0;
    }
    assert!((u_par(&f, &m).unwrap() - expected).abs() < 1e-12);
}

/// Two-sided Student-t tail by Simpson integration of the density.
fn t_tail_by_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let n = 200_000;
    let a = 0.0;
    let b = t.abs();
    let h = (b - a) / n as f64;
    let mut s = density(a) + density(b);
    for i in 1..n {
        s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let central = s * h / 3.0;
    1.0 - 2.0 * central
}

/// Lanczos approximation, independent of the library's special functions.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[test]
fn welch_matches_closed_form_and_quadrature() {
    let r = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    // Means 2 and 5, sample variances 1: t = -3 / sqrt(2/3), df = 4.
    assert!((r.t - (-3.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
    assert!((r.df - 4.0).abs() < 1e-12);
    assert!((r.p - t_tail_by_quadrature(r.t, r.df)).abs() < 1e-8);
    assert!((r.t - -3.674).abs() < 1e-3);
    assert!((r.p - 0.0214).abs() < 1e-3);

    let mut g = rng(11);
    for _ in 0..10 {
        let na = g.random_range(2..12);
        let nb = g.random_range(2..12);
        let a: Vec<f64> = (0..na).map(|_| g.random_range(0.0..3.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| g.random_range(0.5..4.0)).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.p - t_tail_by_quadrature(r.t, r.df)).abs() < 1e-7, "{r:?}");
    }
}

#[test]
fn ols_matches_normal_equation_oracle() {
    let mut g = rng(21);
    let n = 50;
    let mut data = Vec::new();
    for _ in 0..n {
        data.extend([1.0, g.random_range(-2.0..2.0), g.random_range(0.0..5.0)]);
    }
    let x = Matrix::from_vec(n, 3, data).unwrap();
    let y: Vec<f64> = x
        .iter_rows()
        .map(|r| 0.5 - 1.5 * r[1] + 0.25 * r[2] + g.random_range(-0.3..0.3))
        .collect();
    let names = vec!["intercept".to_string(), "a".into(), "b".into()];
    let fit = glm_fit(&x, &y, &names).unwrap();
    let oracle = normal_equation_oracle(&x, &y);
    for (a, b) in fit.estimates.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    // Residuals are orthogonal to every column.
    for c in 0..3 {
        let s: f64 = x
            .iter_rows()
            .zip(&y)
            .map(|(r, yi)| r[c] * (yi - careerrec::linalg::dot(r, &fit.estimates)))
            .sum();
        assert!(s.abs() < 1e-8);
    }
    assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(fit.n, 50);
}

#[test]
fn ncf_gradient_check_on_random_instances() {
    for seed in 0..20 {
        let m = random_ncf(seed, 3, 4, 3, 5);
        let mut g = rng(seed + 100);
        let sample = (g.random_range(0..3), g.random_range(0..4), if g.random_bool(0.5) { 1.0 } else { 0.0 });
        let err = m.gradient_check(sample);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn lr_gradient_check_on_random_instances() {
    for seed in 0..20 {
        let c = random_classifier(seed, 4, 3, 1e-2);
        let mut g = rng(seed + 200);
        let x = random_matrix(&mut g, 10, 4, 1.0);
        let labels: Vec<String> = (0..10).map(|_| format!("c{}", g.random_range(0..3))).collect();
        let err = c.gradient_check(&x, &labels).unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}
