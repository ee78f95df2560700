//! Oblivious ensemble model types and structural validation.

use std::fmt;

/// Maximum number of borders a single float feature may carry; quantiles must fit a byte.
pub const MAX_BORDERS: usize = 254;
/// Maximum tree depth; leaf indices are stored as bytes.
pub const MAX_DEPTH: usize = 8;

/// Sorted split thresholds of one float feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatFeatureBorders {
    pub feature_index: usize,
    pub borders: Vec<f32>,
}

/// One level of an oblivious tree: `value(feature) > borders[feature][border_ordinal]`,
/// equivalently `quantile(feature) > border_ordinal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitCondition {
    pub feature_index: usize,
    pub border_ordinal: usize,
}

/// A perfect binary tree testing the same condition at every node of a level.
///
/// The condition at depth `d` contributes bit `d` of the leaf index (the root is the
/// least-significant bit), so `leaf_values[index]` is the tree's contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousTree {
    pub depth: usize,
    pub splits: Vec<SplitCondition>,
    pub leaf_values: Vec<f64>,
}

impl ObliviousTree {
    pub fn new(splits: Vec<SplitCondition>, leaf_values: Vec<f64>) -> Self {
        Self {
            depth: splits.len(),
            splits,
            leaf_values,
        }
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }
}

/// Ensemble of oblivious trees over float features, with the final affine map
/// `prediction = scale * sum + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousModel {
    pub float_features: Vec<FloatFeatureBorders>,
    pub trees: Vec<ObliviousTree>,
    pub scale: f64,
    pub bias: f64,
}

impl ObliviousModel {
    pub fn n_features(&self) -> usize {
        self.float_features.len()
    }

    /// Bit-exact comparison, distinguishing `0.0` from `-0.0`.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        fn f32s(a: &[f32], b: &[f32]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        fn f64s(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.scale.to_bits() == other.scale.to_bits()
            && self.bias.to_bits() == other.bias.to_bits()
            && self.float_features.len() == other.float_features.len()
            && self
                .float_features
                .iter()
                .zip(&other.float_features)
                .all(|(a, b)| a.feature_index == b.feature_index && f32s(&a.borders, &b.borders))
            && self.trees.len() == other.trees.len()
            && self
                .trees
                .iter()
                .zip(&other.trees)
                .all(|(a, b)| a.depth == b.depth && a.splits == b.splits && f64s(&a.leaf_values, &b.leaf_values))
    }
}

/// A single violated model invariant, with the coordinates needed to find it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("model has no float features")]
    NoFeatures,
    #[error("feature {position}: index field is {found}, expected {position}")]
    FeatureIndexMismatch { position: usize, found: usize },
    #[error("feature {feature}: {count} borders exceed the limit of {MAX_BORDERS}")]
    TooManyBorders { feature: usize, count: usize },
    #[error("feature {feature}: border {ordinal} is NaN")]
    NanBorder { feature: usize, ordinal: usize },
    #[error("feature {feature}: non-ascending borders at ordinal {ordinal}")]
    NonAscendingBorders { feature: usize, ordinal: usize },
    #[error("tree {tree}: depth {depth} outside 1..={MAX_DEPTH}")]
    DepthOutOfRange { tree: usize, depth: usize },
    #[error("tree {tree}: {found} splits for depth {depth}")]
    SplitCountMismatch { tree: usize, depth: usize, found: usize },
    #[error("tree {tree}: {found} leaves, expected {expected}")]
    LeafCountMismatch { tree: usize, expected: usize, found: usize },
    #[error("tree {tree} split {level}: feature {feature} out of range")]
    FeatureOutOfRange { tree: usize, level: usize, feature: usize },
    #[error(
        "tree {tree} split {level}: border ordinal {ordinal} out of range (feature {feature} has {borders} borders)"
    )]
    BorderOrdinalOutOfRange {
        tree: usize,
        level: usize,
        feature: usize,
        ordinal: usize,
        borders: usize,
    },
    #[error("tree {tree}: leaf {leaf} is NaN")]
    NanLeaf { tree: usize, leaf: usize },
    #[error("{field} is NaN")]
    NanAffine { field: &'static str },
}

/// Every violation found by [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} model validation error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "; {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// Checks every structural invariant of `model` and lists all violations.
pub fn validate_model(model: &ObliviousModel) -> Result<(), ValidationErrors> {
    let mut errors = Vec::new();
    if model.float_features.is_empty() {
        errors.push(ValidationError::NoFeatures);
    }
    for (position, feature) in model.float_features.iter().enumerate() {
        if feature.feature_index != position {
            errors.push(ValidationError::FeatureIndexMismatch {
                position,
                found: feature.feature_index,
            });
        }
        if feature.borders.len() > MAX_BORDERS {
            errors.push(ValidationError::TooManyBorders {
                feature: position,
                count: feature.borders.len(),
            });
        }
        for (ordinal, b) in feature.borders.iter().enumerate() {
            if b.is_nan() {
                errors.push(ValidationError::NanBorder {
                    feature: position,
                    ordinal,
                });
            } else if ordinal > 0 && feature.borders[ordinal - 1] >= *b {
                errors.push(ValidationError::NonAscendingBorders {
                    feature: position,
                    ordinal,
                });
            }
        }
    }
    for (t, tree) in model.trees.iter().enumerate() {
        if tree.depth == 0 || tree.depth > MAX_DEPTH {
            errors.push(ValidationError::DepthOutOfRange {
                tree: t,
                depth: tree.depth,
            });
        }
        if tree.splits.len() != tree.depth {
            errors.push(ValidationError::SplitCountMismatch {
                tree: t,
                depth: tree.depth,
                found: tree.splits.len(),
            });
        }
        if tree.depth <= MAX_DEPTH && tree.leaf_values.len() != 1 << tree.depth {
            errors.push(ValidationError::LeafCountMismatch {
                tree: t,
                expected: 1 << tree.depth,
                found: tree.leaf_values.len(),
            });
        }
        for (level, split) in tree.splits.iter().enumerate() {
            match model.float_features.get(split.feature_index) {
                None => errors.push(ValidationError::FeatureOutOfRange {
                    tree: t,
                    level,
                    feature: split.feature_index,
                }),
                Some(f) if split.border_ordinal >= f.borders.len() => {
                    errors.push(ValidationError::BorderOrdinalOutOfRange {
                        tree: t,
                        level,
                        feature: split.feature_index,
                        ordinal: split.border_ordinal,
                        borders: f.borders.len(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(leaf) = tree.leaf_values.iter().position(|v| v.is_nan()) {
            errors.push(ValidationError::NanLeaf { tree: t, leaf });
        }
    }
    if model.scale.is_nan() {
        errors.push(ValidationError::NanAffine { field: "scale" });
    }
    if model.bias.is_nan() {
        errors.push(ValidationError::NanAffine { field: "bias" });
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errors))
    }
}
