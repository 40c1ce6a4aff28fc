//! Versioned JSON model container.
//!
//! Layout (format_version 1):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "variant_kind": "gender_debiased",
//!   "concentrations": [{"concentration_id": "...", "name": "..."}],
//!   "ncf": {
//!     "config": {...},
//!     "user_ids": [...], "item_ids": [...],
//!     "shapes": {"user_embeddings": [U, d], "item_embeddings": [I, d],
//!                "hidden_weights": [2d, h], "hidden_bias": [h],
//!                "output_weights": [h], "output_bias": [1]},
//!     "arrays": {<same keys>: [row-major numbers]}
//!   },
//!   "bias_direction": [d numbers] | null,
//!   "classifier": {
//!     "config": {...},
//!     "class_ids": [...],
//!     "shapes": {"weights": [d, C], "intercepts": [C]},
//!     "arrays": {"weights": [...], "intercepts": [...]}
//!   }
//! }
//! ```
//!
//! Matrices are flattened row-major. Floats are written with shortest
//! round-trip formatting, so a save/load cycle reproduces every bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{ConcentrationClassifier, LrConfig};
use crate::dataset::Concentration;
use crate::debias::BiasDirection;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ncf::{NcfConfig, NcfModel};
use crate::pipeline::{SystemVariant, VariantKind};

pub const FORMAT_VERSION: u32 = 1;

type Shapes = BTreeMap<String, Vec<usize>>;
type Arrays = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
struct VariantFile {
    format_version: u32,
    variant_kind: VariantKind,
    concentrations: Vec<Concentration>,
    ncf: NcfSection,
    bias_direction: Option<BiasDirection>,
    classifier: ClassifierSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct NcfSection {
    config: NcfConfig,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    shapes: Shapes,
    arrays: Arrays,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifierSection {
    config: LrConfig,
    class_ids: Vec<String>,
    shapes: Shapes,
    arrays: Arrays,
}

fn put_matrix(shapes: &mut Shapes, arrays: &mut Arrays, key: &str, m: &Matrix) {
    shapes.insert(key.into(), vec![m.rows(), m.cols()]);
    arrays.insert(key.into(), m.as_slice().to_vec());
}

fn put_vector(shapes: &mut Shapes, arrays: &mut Arrays, key: &str, v: &[f64]) {
    shapes.insert(key.into(), vec![v.len()]);
    arrays.insert(key.into(), v.to_vec());
}

fn take(shapes: &Shapes, arrays: &mut Arrays, key: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let shape = shapes
        .get(key)
        .ok_or_else(|| Error::Artifact(format!("missing shape `{key}`")))?
        .clone();
    let data = arrays
        .remove(key)
        .ok_or_else(|| Error::Artifact(format!("missing array `{key}`")))?;
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Artifact(format!(
            "`{key}` has {} values but shape {shape:?}",
            data.len()
        )));
    }
    Ok((shape, data))
}

fn take_matrix(shapes: &Shapes, arrays: &mut Arrays, key: &str) -> Result<Matrix> {
    let (shape, data) = take(shapes, arrays, key)?;
    match shape[..] {
        [r, c] => Matrix::from_vec(r, c, data),
        _ => Err(Error::Artifact(format!("`{key}` must be 2-D, got {shape:?}"))),
    }
}

fn take_vector(shapes: &Shapes, arrays: &mut Arrays, key: &str) -> Result<Vec<f64>> {
    let (shape, data) = take(shapes, arrays, key)?;
    if shape.len() != 1 {
        return Err(Error::Artifact(format!("`{key}` must be 1-D, got {shape:?}")));
    }
    Ok(data)
}

fn to_file(v: &SystemVariant) -> VariantFile {
    let m = v.ncf();
    let mut shapes = Shapes::new();
    let mut arrays = Arrays::new();
    put_matrix(&mut shapes, &mut arrays, "user_embeddings", m.user_embeddings());
    put_matrix(&mut shapes, &mut arrays, "item_embeddings", m.item_embeddings());
    put_matrix(&mut shapes, &mut arrays, "hidden_weights", m.hidden_weights());
    put_vector(&mut shapes, &mut arrays, "hidden_bias", m.hidden_bias());
    put_vector(&mut shapes, &mut arrays, "output_weights", m.output_weights());
    put_vector(&mut shapes, &mut arrays, "output_bias", &[m.output_bias()]);
    let ncf = NcfSection {
        config: m.config().clone(),
        user_ids: m.user_ids().to_vec(),
        item_ids: m.item_ids().to_vec(),
        shapes,
        arrays,
    };

    let c = v.classifier();
    let mut shapes = Shapes::new();
    let mut arrays = Arrays::new();
    put_matrix(&mut shapes, &mut arrays, "weights", c.weights());
    put_vector(&mut shapes, &mut arrays, "intercepts", c.intercepts());
    let classifier = ClassifierSection {
        config: c.config().clone(),
        class_ids: c.class_ids().to_vec(),
        shapes,
        arrays,
    };

    VariantFile {
        format_version: FORMAT_VERSION,
        variant_kind: v.kind(),
        concentrations: v
            .display_names()
            .iter()
            .map(|(id, name)| Concentration {
                concentration_id: id.clone(),
                name: name.clone(),
            })
            .collect(),
        ncf,
        bias_direction: v.bias().cloned(),
        classifier,
    }
}

fn from_file(f: VariantFile) -> Result<SystemVariant> {
    if f.format_version != FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            f.format_version
        )));
    }
    let NcfSection {
        config,
        user_ids,
        item_ids,
        shapes,
        mut arrays,
    } = f.ncf;
    let output_bias = take_vector(&shapes, &mut arrays, "output_bias")?;
    if output_bias.len() != 1 {
        return Err(Error::Artifact("output_bias must hold one value".into()));
    }
    let ncf = NcfModel::from_parts(
        user_ids,
        item_ids,
        take_matrix(&shapes, &mut arrays, "user_embeddings")?,
        take_matrix(&shapes, &mut arrays, "item_embeddings")?,
        take_matrix(&shapes, &mut arrays, "hidden_weights")?,
        take_vector(&shapes, &mut arrays, "hidden_bias")?,
        take_vector(&shapes, &mut arrays, "output_weights")?,
        output_bias[0],
        config,
    )?;

    let ClassifierSection {
        config,
        class_ids,
        shapes,
        mut arrays,
    } = f.classifier;
    let classifier = ConcentrationClassifier::from_parts(
        take_matrix(&shapes, &mut arrays, "weights")?,
        take_vector(&shapes, &mut arrays, "intercepts")?,
        class_ids,
        config,
    )?;
    let names = f
        .concentrations
        .into_iter()
        .map(|c| (c.concentration_id, c.name))
        .collect();
    SystemVariant::new(f.variant_kind, ncf, f.bias_direction, classifier, names)
}

pub fn variant_to_json(v: &SystemVariant) -> Result<String> {
    Ok(serde_json::to_string(&to_file(v))?)
}

pub fn variant_from_json(s: &str) -> Result<SystemVariant> {
    from_file(serde_json::from_str(s)?)
}

pub fn save_variant(v: &SystemVariant, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, variant_to_json(v)?).map_err(|e| Error::io(path, e))
}

pub fn load_variant(path: impl AsRef<Path>) -> Result<SystemVariant> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    variant_from_json(&text)
}

/// Conventional file name of a variant artifact inside a model directory.
pub fn variant_file_name(kind: VariantKind) -> String {
    format!("{}.json", kind.as_str())
}
