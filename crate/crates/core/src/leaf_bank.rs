//! Per-tree leaf tables laid out for the stage-3 kernels.
//!
//! Every tree's table starts on a 64-byte boundary and is padded with zeros to a
//! whole number of 64-byte lines, so a 512-bit load of the table (8 binary64 or
//! 32 binary16 values) never crosses into the next tree.

use half::f16;

use crate::aligned::{round_up, AlignedBuf, ALIGN};
use crate::model::ObliviousModel;

/// Largest finite binary16 magnitude; larger leaves saturate to it.
pub const F16_MAX: f64 = 65504.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafPrecision {
    Binary64,
    Binary16,
}

/// Round-to-nearest-even binary16 conversion, saturating to `±65504`.
/// Returns the raw half bits. NaN input yields the canonical quiet NaN.
///
/// Rounds directly from binary64 (no intermediate binary32 step, which would
/// double-round).
pub fn f64_to_f16_saturating(value: f64) -> u16 {
    if value.is_nan() {
        return 0x7e00;
    }
    let sign = ((value.to_bits() >> 63) as u16) << 15;
    let a = value.abs().min(F16_MAX);
    if a == 0.0 {
        return sign;
    }
    // Below 2^-14 the binary16 grid is uniform with spacing 2^-24.
    if a < MIN_NORMAL_F16 {
        // Result <= 1024, where 1024 encodes the smallest normal exactly.
        let steps = (a * TWO_POW_24).round_ties_even() as u16;
        return sign | steps;
    }
    let exp = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let mut mantissa = (a * 2f64.powi(10 - exp)).round_ties_even() as u16;
    let mut exp = exp;
    if mantissa == 2048 {
        mantissa = 1024;
        exp += 1;
    }
    sign | (((exp + 15) as u16) << 10) | (mantissa - 1024)
}

const MIN_NORMAL_F16: f64 = 6.103515625e-05; // 2^-14
const TWO_POW_24: f64 = 16777216.0;

/// Exact widening of binary16 bits to binary32.
#[inline]
pub fn f16_bits_to_f32(bits: u16) -> f32 {
    f16::from_bits(bits).to_f32()
}

#[derive(Debug, Clone)]
enum Tables {
    Binary64(AlignedBuf<f64>),
    Binary16(AlignedBuf<u16>),
}

/// Contiguous leaf storage for a whole model in one precision.
#[derive(Debug, Clone)]
pub struct LeafBank {
    tables: Tables,
    /// Element offset of each tree's table; `offsets[t + 1] - offsets[t]` is its padded length.
    offsets: Vec<usize>,
    depths: Vec<usize>,
    tree_max_abs: Vec<f64>,
    max_abs_leaf: f64,
    saturated: usize,
}

impl LeafBank {
    /// Lays out the model's leaves in `precision`. The model must already be valid.
    pub fn build(model: &ObliviousModel, precision: LeafPrecision) -> Self {
        let elem = match precision {
            LeafPrecision::Binary64 => 8,
            LeafPrecision::Binary16 => 2,
        };
        let per_line = ALIGN / elem;
        let mut offsets = Vec::with_capacity(model.trees.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for tree in &model.trees {
            total += round_up(tree.leaf_values.len(), per_line);
            offsets.push(total);
        }

        let tree_max_abs: Vec<f64> = model
            .trees
            .iter()
            .map(|t| t.leaf_values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        let max_abs_leaf = tree_max_abs.iter().copied().fold(0.0, f64::max);

        let mut saturated = 0;
        let tables = match precision {
            LeafPrecision::Binary64 => {
                let mut buf = AlignedBuf::<f64>::zeroed(total);
                for (tree, &start) in model.trees.iter().zip(&offsets) {
                    buf[start..start + tree.leaf_values.len()].copy_from_slice(&tree.leaf_values);
                }
                Tables::Binary64(buf)
            }
            LeafPrecision::Binary16 => {
                let mut buf = AlignedBuf::<u16>::zeroed(total);
                for (tree, &start) in model.trees.iter().zip(&offsets) {
                    for (slot, &v) in buf[start..].iter_mut().zip(&tree.leaf_values) {
                        if v.abs() > F16_MAX {
                            saturated += 1;
                        }
                        *slot = f64_to_f16_saturating(v);
                    }
                }
                Tables::Binary16(buf)
            }
        };

        Self {
            tables,
            offsets,
            depths: model.trees.iter().map(|t| t.depth).collect(),
            tree_max_abs,
            max_abs_leaf,
            saturated,
        }
    }

    pub fn precision(&self) -> LeafPrecision {
        match self.tables {
            Tables::Binary64(_) => LeafPrecision::Binary64,
            Tables::Binary16(_) => LeafPrecision::Binary16,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.depths.len()
    }

    pub fn depth(&self, tree: usize) -> usize {
        self.depths[tree]
    }

    /// Padded binary64 table of `tree`. Panics on a binary16 bank.
    pub fn table64(&self, tree: usize) -> &[f64] {
        match &self.tables {
            Tables::Binary64(buf) => &buf[self.offsets[tree]..self.offsets[tree + 1]],
            Tables::Binary16(_) => panic!("table64 requested from a binary16 leaf bank"),
        }
    }

    /// Padded binary16 table (raw half bits) of `tree`. Panics on a binary64 bank.
    pub fn table16(&self, tree: usize) -> &[u16] {
        match &self.tables {
            Tables::Binary16(buf) => &buf[self.offsets[tree]..self.offsets[tree + 1]],
            Tables::Binary64(_) => panic!("table16 requested from a binary64 leaf bank"),
        }
    }

    /// Stored value of one leaf, widened to binary64.
    pub fn leaf(&self, tree: usize, leaf: usize) -> f64 {
        match &self.tables {
            Tables::Binary64(_) => self.table64(tree)[leaf],
            Tables::Binary16(_) => f16_bits_to_f32(self.table16(tree)[leaf]) as f64,
        }
    }

    pub fn max_abs_leaf(&self) -> f64 {
        self.max_abs_leaf
    }

    /// Largest `|leaf|` of each tree in the source model.
    pub fn tree_max_abs(&self) -> &[f64] {
        &self.tree_max_abs
    }

    /// Number of leaves clamped to `±65504` during binary16 conversion.
    pub fn saturated_count(&self) -> usize {
        self.saturated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FloatFeatureBorders, ObliviousTree, SplitCondition};

    fn model_with_leaves(trees: Vec<Vec<f64>>) -> ObliviousModel {
        ObliviousModel {
            float_features: vec![FloatFeatureBorders {
                feature_index: 0,
                borders: vec![0.0],
            }],
            trees: trees
                .into_iter()
                .map(|leaves| {
                    let depth = leaves.len().trailing_zeros() as usize;
                    ObliviousTree::new(
                        vec![
                            SplitCondition {
                                feature_index: 0,
                                border_ordinal: 0
                            };
                            depth
                        ],
                        leaves,
                    )
                })
                .collect(),
            scale: 1.0,
            bias: 0.0,
        }
    }

    #[test]
    fn one_is_exact_in_binary16() {
        let bank = LeafBank::build(&model_with_leaves(vec![vec![1.0, -1.0]]), LeafPrecision::Binary16);
        assert_eq!(bank.table16(0)[0], 0x3c00);
        assert_eq!(bank.leaf(0, 0), 1.0);
        assert_eq!(bank.leaf(0, 1), -1.0);
        assert_eq!(bank.saturated_count(), 0);
    }

    #[test]
    fn overflow_saturates_and_counts() {
        let bank = LeafBank::build(&model_with_leaves(vec![vec![70000.0, -1e300]]), LeafPrecision::Binary16);
        assert_eq!(bank.leaf(0, 0), 65504.0);
        assert_eq!(bank.leaf(0, 1), -65504.0);
        assert_eq!(bank.saturated_count(), 2);
        assert_eq!(bank.max_abs_leaf(), 1e300);
    }

    #[test]
    fn binary64_bank_is_bit_exact_and_aligned() {
        let leaves = vec![
            vec![0.1, -0.0],
            (0..64).map(|i| i as f64 * 1.25e-3).collect(),
            (0..8).map(|i| -(i as f64)).collect(),
        ];
        let m = model_with_leaves(leaves.clone());
        let bank = LeafBank::build(&m, LeafPrecision::Binary64);
        for (t, src) in leaves.iter().enumerate() {
            let table = bank.table64(t);
            assert_eq!(table.as_ptr() as usize % ALIGN, 0);
            assert_eq!(table.len() % 8, 0);
            assert!(table.len() >= src.len());
            for (a, b) in table.iter().zip(src) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert!(table[src.len()..].iter().all(|&v| v == 0.0));
        }
        assert_eq!(bank.tree_max_abs(), &[0.1, 63.0 * 1.25e-3, 7.0]);
    }

    #[test]
    fn binary16_tables_are_aligned_and_padded_to_32() {
        let m = model_with_leaves(vec![vec![0.5; 2], vec![0.25; 64], vec![1.0; 256]]);
        let bank = LeafBank::build(&m, LeafPrecision::Binary16);
        let lens: Vec<usize> = (0..3).map(|t| bank.table16(t).len()).collect();
        assert_eq!(lens, vec![32, 64, 256]);
        for t in 0..3 {
            assert_eq!(bank.table16(t).as_ptr() as usize % ALIGN, 0);
        }
    }

    #[test]
    #[should_panic(expected = "binary16 leaf bank")]
    fn precision_mismatch_panics() {
        let bank = LeafBank::build(&model_with_leaves(vec![vec![0.0; 2]]), LeafPrecision::Binary16);
        let _ = bank.table64(0);
    }
}
