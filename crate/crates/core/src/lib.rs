//! Single-core batch evaluation of oblivious decision-tree ensembles.
//!
//! Evaluation runs in three stages over blocks of objects:
//!
//! 1. [`quantizer`]: binary32 feature values become one-byte quantiles, the count
//!    of borders each value strictly exceeds.
//! 2. [`leaf_indexer`]: per tree, quantiles are compared with the split ordinals
//!    and the condition bits assembled into a leaf index (root = bit 0).
//! 3. [`accumulator`]: per tree, leaf values are fetched by index and added to
//!    per-object sums, using one of several lane-parallel strategies.
//!
//! [`evaluator`] drives the stages; [`oracle`] is the scalar reference they are
//! tested against.

pub mod accumulator;
pub mod aligned;
pub mod document;
pub mod error;
pub mod evaluator;
pub mod leaf_bank;
pub mod leaf_indexer;
pub mod model;
pub mod oracle;
pub mod quantizer;
pub mod synthetic;
pub mod width;

pub use accumulator::{accumulate, Accumulator, LeafStrategy, PermuteLayout};
pub use document::{deserialize_model, serialize_model, DocumentError};
pub use error::KernelError;
pub use evaluator::{
    apply_tail_policy, evaluate, plan_blocks, EvalConfig, EvalError, Evaluator, PredictionVector, TailPlan, TailPolicy,
    BLOCK_SIZES,
};
pub use leaf_bank::{LeafBank, LeafPrecision};
pub use leaf_indexer::{compute_leaf_indices, condition_bits, LeafIndexVector};
pub use model::{validate_model, FloatFeatureBorders, ObliviousModel, ObliviousTree, SplitCondition, ValidationError};
pub use oracle::{classification_flip_count, deviation_metrics, evaluate_scalar, DeviationMetrics};
pub use quantizer::{quantize_block, quantize_value, FeatureMatrix, Layout, QuantizedBlock};
pub use synthetic::{generate_features, generate_synthetic_model, SyntheticSpec};
pub use width::VectorWidth;
