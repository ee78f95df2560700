use crate::accumulator::LeafStrategy;
use crate::leaf_bank::LeafPrecision;
use crate::width::VectorWidth;

/// Precondition failures of the stage-2/stage-3 kernel entry points.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("vector width {0} is not supported on this host")]
    UnsupportedWidth(VectorWidth),
    #[error("strategy {strategy} cannot run at width {width}")]
    IncompatibleStrategy { strategy: LeafStrategy, width: VectorWidth },
    #[error("strategy {strategy} needs a {expected:?} leaf bank, got {found:?}")]
    PrecisionMismatch {
        strategy: LeafStrategy,
        expected: LeafPrecision,
        found: LeafPrecision,
    },
    #[error("split references feature {feature} but the block holds {n_features}")]
    FeatureOutOfRange { feature: usize, n_features: usize },
    #[error("buffer sized for block {found}, expected {expected}")]
    BlockSizeMismatch { expected: usize, found: usize },
    #[error("tree {0} is not in the leaf bank")]
    TreeOutOfRange(usize),
    #[error("leaf index {index} at slot {slot} exceeds the {leaves} leaves of the tree")]
    LeafIndexOutOfRange { slot: usize, index: u8, leaves: usize },
    #[error("tree depth {0} outside 1..=8")]
    Depth(usize),
}
