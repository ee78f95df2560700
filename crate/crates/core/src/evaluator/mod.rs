//! Blockwise three-stage evaluation.
//!
//! For each block of the batch: quantize every feature, then for each tree in
//! order compute leaf indices and add the leaf values into the block's
//! accumulator, then write `scale * sum + bias` for the block's live objects.

mod plan;

use std::fmt;

pub use plan::{apply_tail_policy, plan_blocks, TailPlan, TailPolicy};

use crate::accumulator::{accumulate_unchecked, Accumulator, LeafStrategy};
use crate::error::KernelError;
use crate::leaf_bank::LeafBank;
use crate::leaf_indexer::{compute_leaf_indices_unchecked, LeafIndexVector};
use crate::model::{validate_model, ObliviousModel, ValidationErrors};
use crate::quantizer::{quantize_block_unchecked, FeatureMatrix, QuantizeError, QuantizedBlock};
use crate::width::VectorWidth;

/// Raw scores, one per input object.
pub type PredictionVector = Vec<f64>;

/// Block sizes the evaluator accepts.
pub const BLOCK_SIZES: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalConfig {
    pub block_size: usize,
    pub width: VectorWidth,
    pub strategy: LeafStrategy,
    pub tail_policy: TailPolicy,
}

impl Default for EvalConfig {
    /// Block 128, widest host width, naive leaf loads, scalar tails.
    fn default() -> Self {
        Self {
            block_size: 128,
            width: VectorWidth::widest_supported(),
            strategy: LeafStrategy::Naive,
            tail_policy: TailPolicy::ScalarTail,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !BLOCK_SIZES.contains(&self.block_size) {
            return Err(EvalError::BlockSize(self.block_size));
        }
        self.strategy.check(self.width)?;
        if !self.width.is_supported() {
            return Err(KernelError::UnsupportedWidth(self.width).into());
        }
        let group = self.strategy.group_size(self.width).max(self.width.byte_lanes());
        if self.block_size < group {
            return Err(EvalError::BlockSize(self.block_size));
        }
        Ok(())
    }

    /// Every configuration with a kernel on this host.
    pub fn all_on_host() -> Vec<EvalConfig> {
        let mut out = Vec::new();
        for strategy in LeafStrategy::ALL {
            for width in VectorWidth::ALL {
                if !strategy.runs_on_host(width) {
                    continue;
                }
                for block_size in BLOCK_SIZES {
                    for tail_policy in [TailPolicy::ScalarTail, TailPolicy::PaddedGroup] {
                        out.push(EvalConfig {
                            block_size,
                            width,
                            strategy,
                            tail_policy,
                        });
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for EvalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "w{}-{}-b{}-{}",
            self.width.name(),
            self.strategy.name(),
            self.block_size,
            self.tail_policy.name()
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("block size {0} not in {BLOCK_SIZES:?} or smaller than the strategy's object group")]
    BlockSize(usize),
    #[error("matrix has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    InvalidModel(#[from] ValidationErrors),
}

/// A model prepared for repeated evaluation under one configuration: leaf bank
/// built once, block scratch buffers reused across calls.
pub struct Evaluator<'m> {
    model: &'m ObliviousModel,
    config: EvalConfig,
    bank: LeafBank,
    block: QuantizedBlock,
    indices: LeafIndexVector,
    acc: Accumulator,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m ObliviousModel, config: EvalConfig) -> Result<Self, EvalError> {
        validate_model(model)?;
        config.validate()?;
        let precision = config.strategy.precision();
        Ok(Self {
            model,
            config,
            bank: LeafBank::build(model, precision),
            block: QuantizedBlock::new(config.block_size, model.n_features())?,
            indices: LeafIndexVector::new(config.block_size),
            acc: Accumulator::new(config.block_size, precision),
        })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn leaf_bank(&self) -> &LeafBank {
        &self.bank
    }

    pub fn evaluate(&mut self, matrix: &FeatureMatrix) -> Result<PredictionVector, EvalError> {
        let mut out = vec![0.0; matrix.n_objects()];
        self.evaluate_into(matrix, &mut out)?;
        Ok(out)
    }

    /// Writes one prediction per object of `matrix` into `out`.
    pub fn evaluate_into(&mut self, matrix: &FeatureMatrix, out: &mut [f64]) -> Result<(), EvalError> {
        if matrix.n_features() != self.model.n_features() {
            return Err(EvalError::DimensionMismatch {
                expected: self.model.n_features(),
                found: matrix.n_features(),
            });
        }
        if out.len() != matrix.n_objects() {
            return Err(EvalError::DimensionMismatch {
                expected: matrix.n_objects(),
                found: out.len(),
            });
        }
        let EvalConfig {
            block_size,
            width,
            strategy,
            tail_policy,
        } = self.config;
        for range in plan_blocks(matrix.n_objects(), block_size) {
            let live = range.len();
            quantize_block_unchecked(
                matrix,
                range.clone(),
                &self.model.float_features,
                width,
                &mut self.block,
            );
            self.acc.reset();
            let index_plan = apply_tail_policy(tail_policy, width.byte_lanes(), live);
            let leaf_plan = apply_tail_policy(tail_policy, strategy.group_size(width), live);
            for (t, tree) in self.model.trees.iter().enumerate() {
                compute_leaf_indices_unchecked(&self.block, &tree.splits, width, &index_plan, &mut self.indices);
                accumulate_unchecked(
                    strategy,
                    width,
                    &leaf_plan,
                    self.indices.as_slice(),
                    &self.bank,
                    t,
                    &mut self.acc,
                );
            }
            self.acc.finalize(self.model.scale, self.model.bias, &mut out[range]);
        }
        Ok(())
    }
}

/// One-shot evaluation of `matrix` under `config`.
pub fn evaluate(
    model: &ObliviousModel,
    matrix: &FeatureMatrix,
    config: &EvalConfig,
) -> Result<PredictionVector, EvalError> {
    Evaluator::new(model, *config)?.evaluate(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FloatFeatureBorders, ObliviousTree, SplitCondition};
    use crate::quantizer::Layout;

    fn tiny_model() -> ObliviousModel {
        ObliviousModel {
            float_features: vec![FloatFeatureBorders {
                feature_index: 0,
                borders: vec![0.0],
            }],
            trees: vec![],
            scale: 0.5,
            bias: 1.0,
        }
    }

    #[test]
    fn empty_ensemble_predicts_bias() {
        let m = tiny_model();
        let x = FeatureMatrix::new(Layout::ObjectMajor, 3, 1, vec![-1.0, 0.0, 1.0]).unwrap();
        for config in EvalConfig::all_on_host() {
            assert_eq!(evaluate(&m, &x, &config).unwrap(), vec![1.0; 3], "{config}");
        }
    }

    #[test]
    fn affine_map_applied_to_tree_sum() {
        let mut m = tiny_model();
        let split = SplitCondition {
            feature_index: 0,
            border_ordinal: 0,
        };
        m.trees.push(ObliviousTree::new(vec![split], vec![0.0, 1.5]));
        m.trees.push(ObliviousTree::new(vec![split], vec![0.0, 0.5]));
        let x = FeatureMatrix::new(Layout::ObjectMajor, 2, 1, vec![1.0, -1.0]).unwrap();
        for config in EvalConfig::all_on_host() {
            assert_eq!(evaluate(&m, &x, &config).unwrap(), vec![2.0, 1.0], "{config}");
        }
    }

    #[test]
    fn config_validation() {
        let bad_block = EvalConfig {
            block_size: 100,
            ..EvalConfig::default()
        };
        assert!(matches!(bad_block.validate(), Err(EvalError::BlockSize(100))));
        let bad_combo = EvalConfig {
            width: VectorWidth::W128,
            strategy: LeafStrategy::Permute16,
            ..EvalConfig::default()
        };
        assert!(matches!(
            bad_combo.validate(),
            Err(EvalError::Kernel(KernelError::IncompatibleStrategy { .. }))
        ));
        assert!(EvalConfig::default().validate().is_ok());
        assert_eq!(EvalConfig::default().block_size, 128);
        assert_eq!(EvalConfig::default().strategy, LeafStrategy::Naive);
    }

    #[test]
    fn dimension_mismatch() {
        let m = tiny_model();
        let x = FeatureMatrix::new(Layout::ObjectMajor, 1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            evaluate(&m, &x, &EvalConfig::default()),
            Err(EvalError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn invalid_model_rejected() {
        let mut m = tiny_model();
        m.float_features[0].borders = vec![1.0, 1.0];
        assert!(matches!(
            Evaluator::new(&m, EvalConfig::default()),
            Err(EvalError::InvalidModel(_))
        ));
    }

    #[test]
    fn config_ids_are_distinct() {
        let all = EvalConfig::all_on_host();
        let ids: std::collections::HashSet<String> = all.iter().map(|c| c.to_string()).collect();
        assert_eq!(ids.len(), all.len());
        assert_eq!(EvalConfig::default().to_string().split('-').count(), 4);
    }
}
