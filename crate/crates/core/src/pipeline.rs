//! System variants: the two gender-aware recommenders (one per gender, each
//! trained only on that gender's users) and the gender-debiased recommender.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{train_classifier, ConcentrationClassifier, LrConfig};
use crate::dataset::{Gender, InteractionDataset};
use crate::debias::{compute_bias_direction, debias_embedding, BiasDirection};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ncf::{train, NcfConfig, NcfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    GenderAwareFemale,
    GenderAwareMale,
    GenderDebiased,
}

impl VariantKind {
    pub const ALL: [VariantKind; 3] = [
        VariantKind::GenderAwareFemale,
        VariantKind::GenderAwareMale,
        VariantKind::GenderDebiased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::GenderAwareFemale => "gender_aware_female",
            VariantKind::GenderAwareMale => "gender_aware_male",
            VariantKind::GenderDebiased => "gender_debiased",
        }
    }

    pub fn is_debiased(self) -> bool {
        self == VariantKind::GenderDebiased
    }

    /// Training population of a gender-aware variant.
    pub fn training_gender(self) -> Option<Gender> {
        match self {
            VariantKind::GenderAwareFemale => Some(Gender::Female),
            VariantKind::GenderAwareMale => Some(Gender::Male),
            VariantKind::GenderDebiased => None,
        }
    }

    /// Gender-aware variant serving participants of gender `g`.
    pub fn aware_for(g: Gender) -> Option<VariantKind> {
        match g {
            Gender::Female => Some(VariantKind::GenderAwareFemale),
            Gender::Male => Some(VariantKind::GenderAwareMale),
            _ => None,
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        VariantKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown variant kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub concentration_id: String,
    pub display_name: String,
    pub probability: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemVariant {
    kind: VariantKind,
    ncf: NcfModel,
    bias: Option<BiasDirection>,
    classifier: ConcentrationClassifier,
    display_names: BTreeMap<String, String>,
}

impl SystemVariant {
    pub fn new(
        kind: VariantKind,
        ncf: NcfModel,
        bias: Option<BiasDirection>,
        classifier: ConcentrationClassifier,
        display_names: BTreeMap<String, String>,
    ) -> Result<Self> {
        if kind.is_debiased() != bias.is_some() {
            return Err(Error::Artifact(format!(
                "{kind} must {} a bias direction",
                if kind.is_debiased() { "carry" } else { "not carry" }
            )));
        }
        if let Some(b) = &bias {
            crate::linalg::check_dim(ncf.embedding_dim(), b.dim())?;
        }
        crate::linalg::check_dim(ncf.embedding_dim(), classifier.dim())?;
        Ok(SystemVariant {
            kind,
            ncf,
            bias,
            classifier,
            display_names,
        })
    }

    pub fn kind(&self) -> VariantKind {
        self.kind
    }

    pub fn ncf(&self) -> &NcfModel {
        &self.ncf
    }

    pub fn bias(&self) -> Option<&BiasDirection> {
        self.bias.as_ref()
    }

    pub fn classifier(&self) -> &ConcentrationClassifier {
        &self.classifier
    }

    pub fn display_names(&self) -> &BTreeMap<String, String> {
        &self.display_names
    }

    pub fn class_ids(&self) -> &[String] {
        self.classifier.class_ids()
    }

    /// Debiased variants predict without intercepts.
    pub fn drop_intercept(&self) -> bool {
        self.kind.is_debiased()
    }

    /// Fold-in embedding of a new user, in the raw NCF space.
    pub fn fold_in<S: AsRef<str>>(&self, liked_items: &[S]) -> Result<Vec<f64>> {
        self.ncf.fold_in_user(liked_items, self.ncf.config())
    }

    /// Embedding fed to the classifier: projected when debiased.
    pub fn classifier_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        match &self.bias {
            Some(b) => debias_embedding(raw, b),
            None => Ok(raw.to_vec()),
        }
    }

    /// Pre-softmax class scores for a raw embedding, under this variant's
    /// projection and intercept policy.
    pub fn logits_for_embedding(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let x = self.classifier_input(raw)?;
        self.classifier.logits(&x, self.drop_intercept())
    }

    pub fn rank_embedding(&self, raw: &[f64], n: usize) -> Result<Vec<Recommendation>> {
        let x = self.classifier_input(raw)?;
        let ranked = self.classifier.rank_concentrations(&x, n, self.drop_intercept())?;
        Ok(ranked
            .into_iter()
            .enumerate()
            .map(|(i, (id, probability))| Recommendation {
                display_name: self.display_names.get(&id).cloned().unwrap_or_else(|| id.clone()),
                concentration_id: id,
                probability,
                rank: i + 1,
            })
            .collect())
    }

    /// Top-`n` concentrations for a new user described by liked item ids.
    pub fn recommend<S: AsRef<str>>(&self, liked_items: &[S], n: usize) -> Result<Vec<Recommendation>> {
        let raw = self.fold_in(liked_items)?;
        self.rank_embedding(&raw, n)
    }
}

/// Users that carry a concentration label, with their embedding rows.
fn labelled_rows(d: &InteractionDataset, emb: &Matrix) -> (Matrix, Vec<String>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, u) in d.users().iter().enumerate() {
        if let Some(c) = &u.concentration {
            rows.push(i);
            labels.push(c.clone());
        }
    }
    (emb.select_rows(&rows), labels)
}

/// Train one system variant.
///
/// `gender_aware_*` trains NCF and the classifier on that gender's users only.
/// `gender_debiased` trains NCF on everyone, derives the bias direction from
/// the female and male user embeddings, projects every user embedding and
/// trains the classifier on the projections.
pub fn build_variant(
    d: &InteractionDataset,
    kind: VariantKind,
    ncf_cfg: &NcfConfig,
    lr_cfg: &LrConfig,
) -> Result<SystemVariant> {
    let display_names: BTreeMap<String, String> = d
        .concentrations()
        .iter()
        .map(|c| (c.concentration_id.clone(), c.name.clone()))
        .collect();
    match kind.training_gender() {
        Some(g) => {
            let part = d.retain_users(|u| u.gender == g);
            if part.is_empty() {
                return Err(Error::Empty(format!("no {g} users to train {kind}")));
            }
            log::info!("{kind}: training NCF on {} users", part.n_users());
            let (ncf, _) = train(&part, ncf_cfg)?;
            let (x, labels) = labelled_rows(&part, ncf.user_embeddings());
            let classifier = train_classifier(&x, &labels, lr_cfg)?;
            SystemVariant::new(kind, ncf, None, classifier, display_names)
        }
        None => {
            log::info!("{kind}: training NCF on {} users", d.n_users());
            let (ncf, _) = train(d, ncf_cfg)?;
            let emb = ncf.user_embeddings();
            let rows_of = |g: Gender| -> Vec<&[f64]> {
                d.users()
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| u.gender == g)
                    .map(|(i, _)| emb.row(i))
                    .collect()
            };
            let (female, male) = (rows_of(Gender::Female), rows_of(Gender::Male));
            if female.is_empty() || male.is_empty() {
                return Err(Error::Empty(
                    "bias direction needs both female and male users".into(),
                ));
            }
            let bias = compute_bias_direction(&female, &male)?;
            let projected: Vec<Vec<f64>> = emb
                .iter_rows()
                .map(|p| debias_embedding(p, &bias))
                .collect::<Result<_>>()?;
            let projected = Matrix::from_rows(&projected)?;
            let (x, labels) = labelled_rows(d, &projected);
            let classifier = train_classifier(&x, &labels, lr_cfg)?;
            SystemVariant::new(kind, ncf, Some(bias), classifier, display_names)
        }
    }
}
