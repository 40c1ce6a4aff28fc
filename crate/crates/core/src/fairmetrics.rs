//! Offline accuracy and fairness evaluation.
//!
//! Accuracy is the single-ground-truth NDCG@K: `1 / log2(i + 1)` when the true
//! concentration sits at 1-based rank `i <= K`, else 0. Fairness is the
//! non-parity unfairness: the mean over concentrations of the absolute gap
//! between the female and male average score.
//!
//! U_PAR is computed on pre-softmax logits, under each variant's own intercept
//! policy. The probability-based value is reported alongside it.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::LrConfig;
use crate::dataset::{filter_rare_concentrations, split, Gender, InteractionDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::linalg::{softmax, Matrix};
use crate::ncf::NcfConfig;
use crate::pipeline::{build_variant, SystemVariant, VariantKind};

/// Cut-offs reported by [`evaluate`].
pub const REPORT_KS: [usize; 3] = [3, 10, 20];

/// NDCG@k for a known 1-based rank of the ground truth (`None` = absent).
pub fn ndcg_from_rank(rank: Option<usize>, k: usize) -> f64 {
    match rank {
        Some(i) if i >= 1 && i <= k => 1.0 / ((i + 1) as f64).log2(),
        _ => 0.0,
    }
}

pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], ground_truth: &str, k: usize) -> f64 {
    let rank = ranking.iter().position(|c| c.as_ref() == ground_truth).map(|i| i + 1);
    ndcg_from_rank(rank, k)
}

/// `(1/C) * sum_n |mean_female(score_n) - mean_male(score_n)|` over rows of
/// per-user score vectors.
pub fn u_par(female_scores: &Matrix, male_scores: &Matrix) -> Result<f64> {
    if female_scores.rows() == 0 || male_scores.rows() == 0 {
        return Err(Error::Empty("U_PAR needs users in both groups".into()));
    }
    crate::linalg::check_dim(female_scores.cols(), male_scores.cols())?;
    let c = female_scores.cols();
    if c == 0 {
        return Err(Error::Empty("U_PAR needs at least one concentration".into()));
    }
    let f = column_means(female_scores);
    let m = column_means(male_scores);
    Ok(f.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() / c as f64)
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    sums.into_iter().map(|s| s / m.rows() as f64).collect()
}

/// Mean NDCG over evaluable users, with skip counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcgSummary {
    pub mean: f64,
    pub evaluated: usize,
    /// Users whose true concentration is outside the variant's label space.
    pub skipped_unseen: usize,
    /// Users without likes or without a declared concentration.
    pub skipped_unusable: usize,
}

/// Mean NDCG@k of one variant over the test users, using full rankings from
/// fold-in recommendations.
pub fn mean_ndcg(v: &SystemVariant, test: &InteractionDataset, k: usize) -> Result<NdcgSummary> {
    let mut total = 0.0;
    let mut summary = NdcgSummary {
        mean: 0.0,
        evaluated: 0,
        skipped_unseen: 0,
        skipped_unusable: 0,
    };
    for u in test.users() {
        let likes = test.liked_items(&u.user_id);
        let Some(truth) = u.concentration.as_deref().filter(|_| !likes.is_empty()) else {
            summary.skipped_unusable += 1;
            continue;
        };
        if !v.class_ids().iter().any(|c| c == truth) {
            summary.skipped_unseen += 1;
            continue;
        }
        let ranking = v.recommend(&likes, v.class_ids().len())?;
        let ids: Vec<&str> = ranking.iter().map(|r| r.concentration_id.as_str()).collect();
        total += ndcg_at_k(&ids, truth, k);
        summary.evaluated += 1;
    }
    if summary.evaluated == 0 {
        return Err(Error::Empty("no evaluable test users".into()));
    }
    summary.mean = total / summary.evaluated as f64;
    Ok(summary)
}

/// A system under evaluation. The gender-aware system routes each user to
/// the model of their own gender.
#[derive(Debug, Clone, Copy)]
pub enum EvaluatedSystem<'a> {
    GenderAware {
        female: &'a SystemVariant,
        male: &'a SystemVariant,
    },
    GenderDebiased(&'a SystemVariant),
}

impl<'a> EvaluatedSystem<'a> {
    pub fn label(&self) -> &'static str {
        match self {
            EvaluatedSystem::GenderAware { .. } => "GenderAware",
            EvaluatedSystem::GenderDebiased(_) => "GenderDebiased",
        }
    }

    pub fn route(&self, g: Gender) -> Option<&'a SystemVariant> {
        match (self, g) {
            (EvaluatedSystem::GenderAware { female, .. }, Gender::Female) => Some(female),
            (EvaluatedSystem::GenderAware { male, .. }, Gender::Male) => Some(male),
            (EvaluatedSystem::GenderAware { .. }, _) => None,
            (EvaluatedSystem::GenderDebiased(v), _) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub ndcg_at: BTreeMap<usize, f64>,
    /// Logit-based non-parity unfairness; `None` when a gender group is empty.
    pub u_par: Option<f64>,
    pub u_par_probability: Option<f64>,
    /// Concentrations entering U_PAR (shared by both groups' models).
    pub u_par_classes: usize,
    pub n_test_users: usize,
    pub n_evaluated: usize,
    pub n_skipped_unseen: usize,
    pub n_skipped_unusable: usize,
}

struct GroupScores {
    class_ids: Vec<String>,
    logits: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

impl GroupScores {
    fn new(class_ids: &[String]) -> Self {
        GroupScores {
            class_ids: class_ids.to_vec(),
            logits: Vec::new(),
            probs: Vec::new(),
        }
    }

    /// Scores restricted to `shared` class ids, in that order.
    fn aligned(&self, shared: &[String]) -> (Matrix, Matrix) {
        let pos: HashMap<&str, usize> = self
            .class_ids
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let idx: Vec<usize> = shared.iter().map(|c| pos[c.as_str()]).collect();
        let pick = |rows: &[Vec<f64>]| {
            let data: Vec<f64> = rows.iter().flat_map(|r| idx.iter().map(|&i| r[i])).collect();
            Matrix::from_vec(rows.len(), idx.len(), data).expect("aligned shape")
        };
        (pick(&self.logits), pick(&self.probs))
    }
}

/// NDCG at [`REPORT_KS`] and U_PAR for one system over the test users.
pub fn evaluate(system: EvaluatedSystem<'_>, test: &InteractionDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Empty("empty test set".into()));
    }
    let mut sums: BTreeMap<usize, f64> = REPORT_KS.iter().map(|&k| (k, 0.0)).collect();
    let mut report = EvalReport {
        system: system.label().to_string(),
        ndcg_at: BTreeMap::new(),
        u_par: None,
        u_par_probability: None,
        u_par_classes: 0,
        n_test_users: test.n_users(),
        n_evaluated: 0,
        n_skipped_unseen: 0,
        n_skipped_unusable: 0,
    };
    let mut female = system.route(Gender::Female).map(|v| GroupScores::new(v.class_ids()));
    let mut male = system.route(Gender::Male).map(|v| GroupScores::new(v.class_ids()));

    for u in test.users() {
        let likes = test.liked_items(&u.user_id);
        let Some(v) = system.route(u.gender).filter(|_| !likes.is_empty()) else {
            report.n_skipped_unusable += 1;
            continue;
        };
        let raw = v.fold_in(&likes)?;
        let logits = v.logits_for_embedding(&raw)?;
        let probs = softmax(&logits);
        let group = match u.gender {
            Gender::Female => female.as_mut(),
            Gender::Male => male.as_mut(),
            _ => None,
        };
        if let Some(g) = group {
            g.logits.push(logits.clone());
            g.probs.push(probs);
        }
        let Some(truth) = u.concentration.as_deref() else {
            report.n_skipped_unusable += 1;
            continue;
        };
        let Some(truth_pos) = v.class_ids().iter().position(|c| c == truth) else {
            report.n_skipped_unseen += 1;
            continue;
        };
        // 1-based rank under the same order rank_concentrations uses.
        let ids = v.class_ids();
        let better = (0..logits.len())
            .filter(|&c| {
                logits[c] > logits[truth_pos] || (logits[c] == logits[truth_pos] && ids[c] < ids[truth_pos])
            })
            .count();
        for (&k, s) in sums.iter_mut() {
            *s += ndcg_from_rank(Some(better + 1), k);
        }
        report.n_evaluated += 1;
    }
    if report.n_evaluated == 0 {
        return Err(Error::Empty("no evaluable test users".into()));
    }
    report.ndcg_at = sums
        .into_iter()
        .map(|(k, s)| (k, s / report.n_evaluated as f64))
        .collect();

    if let (Some(f), Some(m)) = (&female, &male) {
        if !f.logits.is_empty() && !m.logits.is_empty() {
            let shared: Vec<String> = f
                .class_ids
                .iter()
                .filter(|c| m.class_ids.contains(c))
                .cloned()
                .collect();
            let (fl, fp) = f.aligned(&shared);
            let (ml, mp) = m.aligned(&shared);
            report.u_par = Some(u_par(&fl, &ml)?);
            report.u_par_probability = Some(u_par(&fp, &mp)?);
            report.u_par_classes = shared.len();
        }
    }
    Ok(report)
}

/// Settings of the offline comparison between the gender-aware and the
/// gender-debiased system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub ncf: NcfConfig,
    pub lr: LrConfig,
    pub train_fraction: f64,
    pub min_concentration_count: usize,
    pub seed: u64,
}

impl ComparisonConfig {
    pub fn new(ncf: NcfConfig, lr: LrConfig, seed: u64) -> Self {
        ComparisonConfig {
            ncf,
            lr,
            train_fraction: 0.7,
            min_concentration_count: 3,
            seed,
        }
    }
}

/// Trained variants and their reports.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub variants: BTreeMap<VariantKind, SystemVariant>,
    pub reports: Vec<EvalReport>,
    pub train: InteractionDataset,
    pub test: InteractionDataset,
}

/// Filter rare concentrations, split users, build all three variants, and
/// evaluate the gender-aware and the gender-debiased system.
pub fn run_comparison(d: &InteractionDataset, c: &ComparisonConfig) -> Result<Comparison> {
    let filtered = filter_rare_concentrations(d, c.min_concentration_count);
    let (train, test) = split(&filtered, &SplitSpec::new(c.train_fraction, c.seed)?)?;
    let mut variants = BTreeMap::new();
    for kind in VariantKind::ALL {
        variants.insert(kind, build_variant(&train, kind, &c.ncf, &c.lr)?);
    }
    let aware = EvaluatedSystem::GenderAware {
        female: &variants[&VariantKind::GenderAwareFemale],
        male: &variants[&VariantKind::GenderAwareMale],
    };
    let debiased = EvaluatedSystem::GenderDebiased(&variants[&VariantKind::GenderDebiased]);
    let reports = vec![evaluate(aware, &test)?, evaluate(debiased, &test)?];
    Ok(Comparison {
        variants,
        reports,
        train,
        test,
    })
}

/// Aligned text table with one row per system.
pub fn render_table(reports: &[EvalReport]) -> String {
    let fmt_opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "System");
    for k in REPORT_KS {
        let _ = write!(out, "{:>10}", format!("NDCG@{k}"));
    }
    let _ = writeln!(out, "{:>10}{:>14}", "U_PAR", "U_PAR(prob)");
    for r in reports {
        let _ = write!(out, "{:<16}", r.system);
        for k in REPORT_KS {
            let _ = write!(out, "{:>10}", fmt_opt(r.ndcg_at.get(&k).copied()));
        }
        let _ = writeln!(out, "{:>10}{:>14}", fmt_opt(r.u_par), fmt_opt(r.u_par_probability));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_examples() {
        let ranking = ["a", "b", "c", "d"];
        assert_eq!(ndcg_at_k(&ranking, "a", 3), 1.0);
        assert_eq!(ndcg_at_k(&ranking, "c", 10), 0.5);
        assert_eq!(ndcg_at_k(&ranking, "d", 3), 0.0);
        assert_eq!(ndcg_at_k(&ranking, "zz", 10), 0.0);
    }

    #[test]
    fn u_par_examples() {
        let f = Matrix::from_rows(&[vec![0.8, 0.2]]).unwrap();
        let m = Matrix::from_rows(&[vec![0.6, 0.6]]).unwrap();
        assert!((u_par(&f, &m).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(u_par(&f, &f).unwrap(), 0.0);
        assert!(u_par(&f, &Matrix::zeros(0, 2)).is_err());
        assert!(u_par(&f, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn u_par_uses_group_means() {
        let f = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.4]]).unwrap();
        let m = Matrix::from_rows(&[vec![0.6, 0.6]]).unwrap();
        // female means (0.8, 0.2)
        assert!((u_par(&f, &m).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn table_has_header_and_rows() {
        let r = EvalReport {
            system: "GenderAware".into(),
            ndcg_at: REPORT_KS.iter().map(|&k| (k, 0.5)).collect(),
            u_par: None,
            u_par_probability: Some(0.1),
            u_par_classes: 2,
            n_test_users: 1,
            n_evaluated: 1,
            n_skipped_unseen: 0,
            n_skipped_unusable: 0,
        };
        let t = render_table(&[r]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("NDCG@10") && lines[0].contains("U_PAR"));
        assert!(lines[1].starts_with("GenderAware") && lines[1].contains("n/a"));
    }
}
