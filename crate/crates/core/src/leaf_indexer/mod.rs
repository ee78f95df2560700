//! Stage 2: quantile bytes to per-object leaf indices for one tree.
//!
//! `index(o) = Σ_d [quantile(split_d.feature, o) > split_d.border_ordinal] << d`,
//! with the root split at bit 0. Kernels compare a lane group of quantile bytes
//! against the broadcast ordinal and OR the masked bit into the index vector,
//! without branches.

use crate::aligned::AlignedBuf;
use crate::error::KernelError;
use crate::evaluator::{apply_tail_policy, TailPlan, TailPolicy};
use crate::model::{ObliviousTree, SplitCondition, MAX_DEPTH};
use crate::quantizer::QuantizedBlock;
use crate::width::VectorWidth;

#[cfg(target_arch = "x86_64")]
mod x86;

/// One leaf index byte per object slot of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafIndexVector {
    block_size: usize,
    indices: AlignedBuf<u8>,
}

impl LeafIndexVector {
    pub fn new(block_size: usize) -> Self {
        Self {
            block_size,
            indices: AlignedBuf::zeroed(block_size),
        }
    }

    /// `indices` followed by zero padding up to `block_size`.
    pub fn from_slice(block_size: usize, indices: &[u8]) -> Self {
        assert!(indices.len() <= block_size, "more indices than block slots");
        let mut out = Self::new(block_size);
        out.indices[..indices.len()].copy_from_slice(indices);
        out
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.indices
    }
}

/// A split resolved against a block: that feature's quantile row and the ordinal.
#[derive(Clone, Copy)]
pub(crate) struct ResolvedSplit<'a> {
    row: &'a [u8],
    ordinal: u8,
}

fn check_splits(block: &QuantizedBlock, splits: &[SplitCondition], width: VectorWidth) -> Result<(), KernelError> {
    if !width.is_supported() {
        return Err(KernelError::UnsupportedWidth(width));
    }
    if splits.is_empty() || splits.len() > MAX_DEPTH {
        return Err(KernelError::Depth(splits.len()));
    }
    match splits.iter().find(|s| s.feature_index >= block.n_features()) {
        Some(s) => Err(KernelError::FeatureOutOfRange {
            feature: s.feature_index,
            n_features: block.n_features(),
        }),
        None => Ok(()),
    }
}

/// Leaf index of every live object of `block` for `tree`; padding slots are 0.
pub fn compute_leaf_indices(
    block: &QuantizedBlock,
    tree: &ObliviousTree,
    width: VectorWidth,
    tail: TailPolicy,
    out: &mut LeafIndexVector,
) -> Result<(), KernelError> {
    check_splits(block, &tree.splits, width)?;
    if out.block_size != block.block_size() {
        return Err(KernelError::BlockSizeMismatch {
            expected: block.block_size(),
            found: out.block_size,
        });
    }
    let plan = apply_tail_policy(tail, width.byte_lanes(), block.live());
    compute_leaf_indices_unchecked(block, &tree.splits, width, &plan, out);
    Ok(())
}

/// Per-object 0/1 bytes: `quantile(split.feature, o) > split.border_ordinal`.
/// The result has `block_size` entries, zero beyond the live range.
pub fn condition_bits(
    block: &QuantizedBlock,
    split: &SplitCondition,
    width: VectorWidth,
) -> Result<Vec<u8>, KernelError> {
    let splits = std::slice::from_ref(split);
    check_splits(block, splits, width)?;
    let mut out = LeafIndexVector::new(block.block_size());
    let plan = apply_tail_policy(TailPolicy::ScalarTail, width.byte_lanes(), block.live());
    compute_leaf_indices_unchecked(block, splits, width, &plan, &mut out);
    Ok(out.indices.to_vec())
}

/// Kernel entry after setup validation. `plan` must cover `block.live()` objects
/// with groups of `width.byte_lanes()`.
pub(crate) fn compute_leaf_indices_unchecked(
    block: &QuantizedBlock,
    splits: &[SplitCondition],
    width: VectorWidth,
    plan: &TailPlan,
    out: &mut LeafIndexVector,
) {
    let mut resolved = [ResolvedSplit { row: &[], ordinal: 0 }; MAX_DEPTH];
    for (r, s) in resolved.iter_mut().zip(splits) {
        // Valid models keep ordinals below 254, so they fit a byte.
        *r = ResolvedSplit {
            row: block.row(s.feature_index),
            ordinal: s.border_ordinal as u8,
        };
    }
    let resolved = &resolved[..splits.len()];
    let indices = &mut out.indices[..];
    let live = block.live();

    let covered = if width == VectorWidth::Scalar {
        scalar_indices(resolved, 0..live, indices);
        live
    } else {
        assert!(plan.vector_objects() <= indices.len() && plan.group_size == width.byte_lanes());
        vector_indices(resolved, width, plan.vector_groups, indices);
        scalar_indices(resolved, plan.scalar_range(), indices);
        plan.vector_objects() + plan.scalar_objects
    };
    indices[covered..].fill(0);
}

fn scalar_indices(splits: &[ResolvedSplit<'_>], objects: std::ops::Range<usize>, out: &mut [u8]) {
    for o in objects {
        out[o] = splits
            .iter()
            .enumerate()
            .fold(0u8, |idx, (d, s)| idx | (((s.row[o] > s.ordinal) as u8) << d));
    }
}

#[cfg(target_arch = "x86_64")]
fn vector_indices(splits: &[ResolvedSplit<'_>], width: VectorWidth, groups: usize, out: &mut [u8]) {
    // SAFETY: width support was checked at setup; every quantile row and `out` hold
    // block_size >= groups * lanes bytes.
    unsafe {
        match width {
            VectorWidth::W128 => x86::indices_w128(splits, groups, out),
            VectorWidth::W256 => x86::indices_w256(splits, groups, out),
            VectorWidth::W512 => x86::indices_w512(splits, groups, out),
            VectorWidth::Scalar => unreachable!(),
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn vector_indices(splits: &[ResolvedSplit<'_>], width: VectorWidth, groups: usize, out: &mut [u8]) {
    scalar_indices(splits, 0..groups * width.byte_lanes(), out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FloatFeatureBorders;
    use crate::quantizer::{quantize_block, FeatureMatrix, Layout};

    /// Block whose quantiles equal the given per-feature rows.
    fn block_from_values(rows: &[Vec<f32>]) -> QuantizedBlock {
        let n_objects = rows[0].len();
        let values: Vec<f32> = rows.iter().flatten().copied().collect();
        let m = FeatureMatrix::new(Layout::FeatureMajor, n_objects, rows.len(), values).unwrap();
        let borders: Vec<FloatFeatureBorders> = (0..rows.len())
            .map(|f| FloatFeatureBorders {
                feature_index: f,
                borders: (0..8).map(|b| b as f32 + 0.5).collect(),
            })
            .collect();
        let mut block = QuantizedBlock::new(64, rows.len()).unwrap();
        quantize_block(&m, 0..n_objects, &borders, VectorWidth::Scalar, &mut block).unwrap();
        block
    }

    fn split(feature_index: usize, border_ordinal: usize) -> SplitCondition {
        SplitCondition {
            feature_index,
            border_ordinal,
        }
    }

    #[test]
    fn root_is_least_significant_bit() {
        // Feature quantiles: f0 = 1, f1 = 0, f2 = 1; every split tests "> 0".
        let block = block_from_values(&[vec![1.0], vec![0.0], vec![1.0]]);
        let tree = ObliviousTree::new(
            vec![split(0, 0), split(1, 0), split(2, 0)],
            (0..8).map(f64::from).collect(),
        );
        for width in VectorWidth::supported() {
            for tail in [TailPolicy::ScalarTail, TailPolicy::PaddedGroup] {
                let mut out = LeafIndexVector::new(64);
                compute_leaf_indices(&block, &tree, width, tail, &mut out).unwrap();
                assert_eq!(out.as_slice()[0], 5);
                assert!(out.as_slice()[1..].iter().all(|&i| i == 0));
            }
        }
    }

    #[test]
    fn all_false_is_zero() {
        let block = block_from_values(&[vec![0.0; 40]]);
        let tree = ObliviousTree::new(vec![split(0, 0), split(0, 3)], vec![0.0; 4]);
        let mut out = LeafIndexVector::new(64);
        compute_leaf_indices(
            &block,
            &tree,
            VectorWidth::widest_supported(),
            TailPolicy::ScalarTail,
            &mut out,
        )
        .unwrap();
        assert!(out.as_slice().iter().all(|&i| i == 0));
    }

    #[test]
    fn condition_bit_examples() {
        let block = block_from_values(&[vec![0.0, 1.0, 8.0]]);
        for width in VectorWidth::supported() {
            let bits = condition_bits(&block, &split(0, 0), width).unwrap();
            assert_eq!(&bits[..4], &[0, 1, 1, 0]);
            let bits = condition_bits(&block, &split(0, 7), width).unwrap();
            assert_eq!(&bits[..3], &[0, 0, 1]);
        }
    }

    #[test]
    fn setup_errors() {
        let block = block_from_values(&[vec![0.0]]);
        assert_eq!(
            condition_bits(&block, &split(3, 0), VectorWidth::Scalar),
            Err(KernelError::FeatureOutOfRange {
                feature: 3,
                n_features: 1
            })
        );
        let tree = ObliviousTree::new(vec![split(0, 0)], vec![0.0; 2]);
        let mut wrong = LeafIndexVector::new(128);
        assert_eq!(
            compute_leaf_indices(&block, &tree, VectorWidth::Scalar, TailPolicy::ScalarTail, &mut wrong),
            Err(KernelError::BlockSizeMismatch {
                expected: 64,
                found: 128
            })
        );
    }
}
