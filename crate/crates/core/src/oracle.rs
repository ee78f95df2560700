//! Reference evaluation by direct per-object traversal, and deviation metrics.
//!
//! The oracle never quantizes: each condition is evaluated on the raw value as
//! `value > borders[ordinal]`, which makes it an independent check of the
//! quantize-then-index pipeline.

use crate::evaluator::PredictionVector;
use crate::leaf_bank::{f16_bits_to_f32, LeafBank, LeafPrecision};
use crate::model::ObliviousModel;
use crate::quantizer::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("matrix has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("prediction vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("deviation metrics need at least one prediction")]
    Empty,
}

/// Leaf index of `object` in `tree`, root condition at bit 0.
pub fn leaf_index(model: &ObliviousModel, tree: usize, matrix: &FeatureMatrix, object: usize) -> usize {
    model.trees[tree].splits.iter().enumerate().fold(0, |idx, (d, s)| {
        let border = model.float_features[s.feature_index].borders[s.border_ordinal];
        idx | (((matrix.get(object, s.feature_index) > border) as usize) << d)
    })
}

/// Scalar ground truth. Binary64 sums the model's leaves in binary64; binary16
/// widens the binary16 leaf bank to binary32 and sums in binary32. Trees are summed
/// in model order, then `scale * sum + bias` is applied in binary64.
pub fn evaluate_scalar(
    model: &ObliviousModel,
    matrix: &FeatureMatrix,
    precision: LeafPrecision,
) -> Result<PredictionVector, OracleError> {
    if matrix.n_features() != model.n_features() {
        return Err(OracleError::DimensionMismatch {
            expected: model.n_features(),
            found: matrix.n_features(),
        });
    }
    let n_trees = model.trees.len();
    let out = match precision {
        LeafPrecision::Binary64 => (0..matrix.n_objects())
            .map(|o| {
                let sum = (0..n_trees).fold(0.0f64, |s, t| {
                    s + model.trees[t].leaf_values[leaf_index(model, t, matrix, o)]
                });
                model.scale * sum + model.bias
            })
            .collect(),
        LeafPrecision::Binary16 => {
            let bank = LeafBank::build(model, LeafPrecision::Binary16);
            (0..matrix.n_objects())
                .map(|o| {
                    let sum = (0..n_trees).fold(0.0f32, |s, t| {
                        s + f16_bits_to_f32(bank.table16(t)[leaf_index(model, t, matrix, o)])
                    });
                    model.scale * sum as f64 + model.bias
                })
                .collect()
        }
    };
    Ok(out)
}

/// Summary of `|a_i - b_i|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationMetrics {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Lower middle element for even lengths.
    pub median_abs: f64,
    pub rms: f64,
}

pub fn deviation_metrics(a: &[f64], b: &[f64]) -> Result<DeviationMetrics, OracleError> {
    if a.len() != b.len() {
        return Err(OracleError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(OracleError::Empty);
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let n = diffs.len() as f64;
    let mean_abs = diffs.iter().sum::<f64>() / n;
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    diffs.sort_by(f64::total_cmp);
    Ok(DeviationMetrics {
        max_abs: diffs[diffs.len() - 1],
        mean_abs,
        median_abs: diffs[(diffs.len() - 1) / 2],
        rms,
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Objects where `a` and `b` fall on different sides of `threshold`.
pub fn classification_flip_count(a: &[f64], b: &[f64], threshold: f64) -> Result<usize, OracleError> {
    if a.len() != b.len() {
        return Err(OracleError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .filter(|(x, y)| sign(*x - threshold) != sign(*y - threshold))
        .count())
}

/// Bounds on `|binary64 prediction - binary16 prediction|` for a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fp16Bound {
    /// `|scale| * (Σ_t max(max_t * 2^-11, 2^-24) + binary32 summation slack)`.
    pub per_tree: f64,
    /// `|scale| * T * max_abs_leaf * 2^-10`.
    pub closed_form: f64,
}

/// Error bound for binary16 leaves without saturation (all `|leaf| <= 65504`).
pub fn fp16_error_bound(model: &ObliviousModel) -> Fp16Bound {
    const HALF_ULP: f64 = 1.0 / 2048.0; // 2^-11
    const F16_TINY: f64 = 1.0 / 16777216.0; // 2^-24
    const F32_EPS: f64 = 1.0 / 16777216.0; // 2^-24, binary32 unit roundoff
    let maxima: Vec<f64> = model
        .trees
        .iter()
        .map(|t| t.leaf_values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let n = maxima.len() as f64;
    let total: f64 = maxima.iter().sum();
    let conversion: f64 = maxima.iter().map(|m| (m * HALF_ULP).max(F16_TINY)).sum();
    // Each of the n binary32 additions rounds a partial sum bounded by `total`.
    let summation = n * total * F32_EPS;
    let scale = model.scale.abs();
    let max_abs_leaf = maxima.iter().copied().fold(0.0, f64::max);
    Fp16Bound {
        per_tree: scale * (conversion + summation),
        closed_form: scale * n * max_abs_leaf / 1024.0,
    }
}
