//! Canonical text form of [`ObliviousModel`].
//!
//! JSON-shaped, with every float carried as its lowercase hex bit pattern
//! (8 digits for binary32 borders, 16 for binary64 leaves, scale and bias):
//!
//! ```text
//! {
//!   "float_features": [{ "index": 0, "borders_hex": ["3f000000"] }],
//!   "trees": [{ "depth": 1, "splits": [{ "feature": 0, "border": 0 }],
//!               "leaves_hex": ["bff0000000000000", "3ff0000000000000"] }],
//!   "scale_hex": "3ff0000000000000",
//!   "bias_hex": "0000000000000000"
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::model::{
    validate_model, FloatFeatureBorders, ObliviousModel, ObliviousTree, SplitCondition, ValidationErrors,
};

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    /// Malformed JSON, a missing field or a wrong type; the message carries line and column.
    #[error("model document parse error: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("model document field `{field}`: invalid hex value {value:?} (expected {digits} lowercase hex digits)")]
    Hex {
        field: String,
        value: String,
        digits: usize,
    },
    #[error("model document describes an invalid model: {0}")]
    Invalid(#[from] ValidationErrors),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    float_features: Vec<FeatureDoc>,
    trees: Vec<TreeDoc>,
    scale_hex: String,
    bias_hex: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureDoc {
    index: usize,
    borders_hex: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    depth: usize,
    splits: Vec<SplitDoc>,
    leaves_hex: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitDoc {
    feature: usize,
    border: usize,
}

fn hex32(v: f32) -> String {
    format!("{:08x}", v.to_bits())
}

fn hex64(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn parse_hex(value: &str, digits: usize, field: impl FnOnce() -> String) -> Result<u64, DocumentError> {
    let well_formed = value.len() == digits && value.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
    match well_formed.then(|| u64::from_str_radix(value, 16)) {
        Some(Ok(bits)) => Ok(bits),
        _ => Err(DocumentError::Hex {
            field: field(),
            value: value.to_owned(),
            digits,
        }),
    }
}

/// Writes the canonical document. Output is a pure function of the model's bits.
pub fn serialize_model(model: &ObliviousModel) -> String {
    let doc = ModelDoc {
        float_features: model
            .float_features
            .iter()
            .map(|f| FeatureDoc {
                index: f.feature_index,
                borders_hex: f.borders.iter().map(|&b| hex32(b)).collect(),
            })
            .collect(),
        trees: model
            .trees
            .iter()
            .map(|t| TreeDoc {
                depth: t.depth,
                splits: t
                    .splits
                    .iter()
                    .map(|s| SplitDoc {
                        feature: s.feature_index,
                        border: s.border_ordinal,
                    })
                    .collect(),
                leaves_hex: t.leaf_values.iter().map(|&v| hex64(v)).collect(),
            })
            .collect(),
        scale_hex: hex64(model.scale),
        bias_hex: hex64(model.bias),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("model document serializes");
    out.push('\n');
    out
}

/// Parses a document and validates the resulting model.
pub fn deserialize_model(text: &str) -> Result<ObliviousModel, DocumentError> {
    let doc: ModelDoc = serde_json::from_str(text)?;

    let mut float_features = Vec::with_capacity(doc.float_features.len());
    for (i, f) in doc.float_features.iter().enumerate() {
        let borders = f
            .borders_hex
            .iter()
            .enumerate()
            .map(|(k, h)| {
                parse_hex(h, 8, || format!("float_features[{i}].borders_hex[{k}]")).map(|b| f32::from_bits(b as u32))
            })
            .collect::<Result<_, _>>()?;
        float_features.push(FloatFeatureBorders {
            feature_index: f.index,
            borders,
        });
    }

    let mut trees = Vec::with_capacity(doc.trees.len());
    for (t, tree) in doc.trees.iter().enumerate() {
        let leaf_values = tree
            .leaves_hex
            .iter()
            .enumerate()
            .map(|(k, h)| parse_hex(h, 16, || format!("trees[{t}].leaves_hex[{k}]")).map(f64::from_bits))
            .collect::<Result<_, _>>()?;
        trees.push(ObliviousTree {
            depth: tree.depth,
            splits: tree
                .splits
                .iter()
                .map(|s| SplitCondition {
                    feature_index: s.feature,
                    border_ordinal: s.border,
                })
                .collect(),
            leaf_values,
        });
    }

    let model = ObliviousModel {
        float_features,
        trees,
        scale: f64::from_bits(parse_hex(&doc.scale_hex, 16, || "scale_hex".into())?),
        bias: f64::from_bits(parse_hex(&doc.bias_hex, 16, || "bias_hex".into())?),
    };
    validate_model(&model)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TREE: &str = r#"{
        "float_features": [{ "index": 0, "borders_hex": ["3f000000"] }],
        "trees": [{ "depth": 1, "splits": [{ "feature": 0, "border": 0 }],
                    "leaves_hex": ["bff0000000000000", "3ff0000000000000"] }],
        "scale_hex": "3ff0000000000000",
        "bias_hex": "0000000000000000"
    }"#;

    #[test]
    fn hand_written_depth_one_document() {
        let m = deserialize_model(ONE_TREE).unwrap();
        assert_eq!(m.float_features[0].borders, vec![0.5]);
        assert_eq!(m.trees.len(), 1);
        assert_eq!(m.trees[0].leaf_values, vec![-1.0, 1.0]);
        assert_eq!(m.scale, 1.0);
        assert!(validate_model(&m).is_ok());
        assert!(deserialize_model(&serialize_model(&m)).unwrap().bitwise_eq(&m));
    }

    #[test]
    fn missing_scale_names_the_field() {
        let text = ONE_TREE.replace(r#""scale_hex": "3ff0000000000000","#, "");
        let err = deserialize_model(&text).unwrap_err();
        assert!(matches!(err, DocumentError::Syntax(_)));
        let msg = err.to_string();
        assert!(msg.contains("scale_hex") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn bad_hex_reports_location() {
        for (bad, field) in [
            ("\"3FF0000000000000\"", "scale_hex"),
            ("\"3ff00000\"", "scale_hex"),
            ("\"+ff0000000000000\"", "scale_hex"),
        ] {
            let text = ONE_TREE.replace(
                "\"3ff0000000000000\",\n        \"bias_hex\"",
                &format!("{bad},\n        \"bias_hex\""),
            );
            match deserialize_model(&text) {
                Err(DocumentError::Hex { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected hex error, got {other:?}"),
            }
        }
        let text = ONE_TREE.replace("bff0000000000000", "bff000000000000g");
        match deserialize_model(&text) {
            Err(DocumentError::Hex { field, .. }) => assert_eq!(field, "trees[0].leaves_hex[0]"),
            other => panic!("expected hex error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_model_surfaces_validation_errors() {
        let text = ONE_TREE.replace(r#""border": 0"#, r#""border": 1"#);
        let err = deserialize_model(&text).unwrap_err();
        assert!(matches!(err, DocumentError::Invalid(_)));
        assert!(err.to_string().contains("border ordinal 1 out of range"));
    }

    #[test]
    fn special_values_round_trip_bit_exact() {
        let mut m = deserialize_model(ONE_TREE).unwrap();
        m.float_features[0].borders = vec![f32::NEG_INFINITY, -0.0, f32::from_bits(1), f32::INFINITY];
        m.trees[0].leaf_values = vec![-0.0, f64::from_bits(1)];
        m.bias = f64::MIN_POSITIVE;
        let text = serialize_model(&m);
        assert!(text.contains("\"80000000\"") && text.contains("\"8000000000000000\""));
        assert!(deserialize_model(&text).unwrap().bitwise_eq(&m));
    }
}
