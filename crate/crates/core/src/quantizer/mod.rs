//! Stage 1: feature values to one-byte quantiles.
//!
//! The quantile of a value is the number of the feature's borders it strictly
//! exceeds, so `quantile > k` holds exactly when `value > borders[k]`. NaN
//! exceeds nothing and quantizes to 0, failing every split.
//!
//! Blocks are processed features-outer, objects-inner, borders-innermost. Full
//! lane groups go through the vector kernel; leftover objects of the live range
//! use the scalar kernel.

use std::ops::Range;

use crate::aligned::AlignedBuf;
use crate::model::FloatFeatureBorders;
use crate::width::VectorWidth;

#[cfg(target_arch = "x86_64")]
mod x86;

/// Largest feature count accepted in a [`FeatureMatrix`]; keeps gather offsets in `i32`.
pub const MAX_FEATURES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// `values[o * n_features + f]`: all features of one object are adjacent.
    ObjectMajor,
    /// `values[f * n_objects + o]`: one feature of all objects is adjacent.
    FeatureMajor,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::ObjectMajor => "object-major",
            Layout::FeatureMajor => "feature-major",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuantizeError {
    #[error("matrix of {n_objects}x{n_features} needs {expected} values, got {found}")]
    MatrixLength {
        n_objects: usize,
        n_features: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0} features exceed the supported maximum of {MAX_FEATURES}")]
    TooManyFeatures(usize),
    #[error("block size {0} must be a positive multiple of 64")]
    BlockSize(usize),
    #[error("object range {begin}..{end} is invalid for {n_objects} objects and block size {block_size}")]
    Range {
        begin: usize,
        end: usize,
        n_objects: usize,
        block_size: usize,
    },
    #[error("feature count mismatch: matrix {matrix}, borders {borders}, block {block}")]
    FeatureCount {
        matrix: usize,
        borders: usize,
        block: usize,
    },
    #[error("vector width {0} is not supported on this host")]
    UnsupportedWidth(VectorWidth),
}

/// Batch of binary32 feature values in either layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    layout: Layout,
    n_objects: usize,
    n_features: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(layout: Layout, n_objects: usize, n_features: usize, values: Vec<f32>) -> Result<Self, QuantizeError> {
        if n_features > MAX_FEATURES {
            return Err(QuantizeError::TooManyFeatures(n_features));
        }
        let expected = n_objects.saturating_mul(n_features);
        if values.len() != expected {
            return Err(QuantizeError::MatrixLength {
                n_objects,
                n_features,
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            layout,
            n_objects,
            n_features,
            values,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, object: usize, feature: usize) -> f32 {
        match self.layout {
            Layout::ObjectMajor => self.values[object * self.n_features + feature],
            Layout::FeatureMajor => self.values[feature * self.n_objects + object],
        }
    }

    /// The same logical matrix stored in `layout`.
    pub fn to_layout(&self, layout: Layout) -> FeatureMatrix {
        if layout == self.layout {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.values.len());
        match layout {
            Layout::ObjectMajor => {
                for o in 0..self.n_objects {
                    values.extend((0..self.n_features).map(|f| self.get(o, f)));
                }
            }
            Layout::FeatureMajor => {
                for f in 0..self.n_features {
                    values.extend((0..self.n_objects).map(|o| self.get(o, f)));
                }
            }
        }
        FeatureMatrix {
            layout,
            n_objects: self.n_objects,
            n_features: self.n_features,
            values,
        }
    }

    /// One feature's values for objects `begin..`, as a strided view.
    fn column(&self, feature: usize, begin: usize) -> Column<'_> {
        match self.layout {
            Layout::ObjectMajor => Column {
                values: &self.values,
                start: begin * self.n_features + feature,
                stride: self.n_features,
            },
            Layout::FeatureMajor => Column {
                values: &self.values,
                start: feature * self.n_objects + begin,
                stride: 1,
            },
        }
    }
}

/// Values `values[start + k * stride]` for `k = 0, 1, ...`.
#[derive(Clone, Copy)]
pub(crate) struct Column<'a> {
    values: &'a [f32],
    start: usize,
    stride: usize,
}

impl Column<'_> {
    #[inline]
    fn get(&self, k: usize) -> f32 {
        self.values[self.start + k * self.stride]
    }

    /// Whether elements `0..count` lie inside the backing slice.
    fn covers(&self, count: usize) -> bool {
        count == 0 || self.start + (count - 1) * self.stride < self.values.len()
    }
}

/// Feature-major quantile matrix of one block: byte `(f, o)` at `f * block_size + o`.
#[derive(Debug, Clone)]
pub struct QuantizedBlock {
    block_size: usize,
    n_features: usize,
    live: usize,
    data: AlignedBuf<u8>,
}

impl QuantizedBlock {
    /// Zeroed block; `block_size` must be a positive multiple of 64 so every row is aligned.
    pub fn new(block_size: usize, n_features: usize) -> Result<Self, QuantizeError> {
        if block_size == 0 || !block_size.is_multiple_of(64) {
            return Err(QuantizeError::BlockSize(block_size));
        }
        Ok(Self {
            block_size,
            n_features,
            live: 0,
            data: AlignedBuf::zeroed(block_size * n_features),
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Objects written by the last [`quantize_block`]; slots beyond it are zero.
    pub fn live(&self) -> usize {
        self.live
    }

    /// Quantiles of one feature, padded to `block_size`.
    #[inline]
    pub fn row(&self, feature: usize) -> &[u8] {
        &self.data[feature * self.block_size..(feature + 1) * self.block_size]
    }

    #[inline]
    pub fn get(&self, feature: usize, object: usize) -> u8 {
        self.data[feature * self.block_size + object]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

/// Number of borders `value` strictly exceeds; NaN exceeds none.
#[inline]
pub fn quantize_value(value: f32, borders: &[f32]) -> u8 {
    borders.iter().map(|&b| (value > b) as u8).sum()
}

/// Quantizes objects `range` of `matrix` into `out`, zeroing the padding slots.
pub fn quantize_block(
    matrix: &FeatureMatrix,
    range: Range<usize>,
    borders: &[FloatFeatureBorders],
    width: VectorWidth,
    out: &mut QuantizedBlock,
) -> Result<(), QuantizeError> {
    if range.start > range.end || range.end > matrix.n_objects || range.len() > out.block_size {
        return Err(QuantizeError::Range {
            begin: range.start,
            end: range.end,
            n_objects: matrix.n_objects,
            block_size: out.block_size,
        });
    }
    if matrix.n_features != borders.len() || out.n_features != borders.len() {
        return Err(QuantizeError::FeatureCount {
            matrix: matrix.n_features,
            borders: borders.len(),
            block: out.n_features,
        });
    }
    if !width.is_supported() {
        return Err(QuantizeError::UnsupportedWidth(width));
    }
    quantize_block_unchecked(matrix, range, borders, width, out);
    Ok(())
}

/// [`quantize_block`] after setup validation: dimensions agree and `width` is supported.
pub(crate) fn quantize_block_unchecked(
    matrix: &FeatureMatrix,
    range: Range<usize>,
    borders: &[FloatFeatureBorders],
    width: VectorWidth,
    out: &mut QuantizedBlock,
) {
    let live = range.len();
    let block_size = out.block_size;
    let lanes = width.byte_lanes();
    let vector_objects = if width == VectorWidth::Scalar {
        0
    } else {
        live / lanes * lanes
    };
    out.live = live;

    for (f, feature) in borders.iter().enumerate() {
        let column = matrix.column(f, range.start);
        assert!(column.covers(live), "column exceeds matrix storage");
        let row = &mut out.data[f * block_size..(f + 1) * block_size];
        if vector_objects > 0 {
            quantize_lanes(column, &feature.borders, width, vector_objects / lanes, row);
        }
        for (o, q) in row.iter_mut().enumerate().take(live).skip(vector_objects) {
            *q = quantize_value(column.get(o), &feature.borders);
        }
        row[live..].fill(0);
    }
}

#[cfg(target_arch = "x86_64")]
fn quantize_lanes(column: Column<'_>, borders: &[f32], width: VectorWidth, groups: usize, row: &mut [u8]) {
    debug_assert!(column.covers(groups * width.byte_lanes()) && row.len() >= groups * width.byte_lanes());
    // SAFETY: callers validated `width` against host support; the column covers every
    // object of the `groups` full lane groups and `row` holds at least that many bytes.
    unsafe {
        match width {
            VectorWidth::W128 => x86::quantize_w128(column, borders, groups, row),
            VectorWidth::W256 => x86::quantize_w256(column, borders, groups, row),
            VectorWidth::W512 => x86::quantize_w512(column, borders, groups, row),
            VectorWidth::Scalar => unreachable!("scalar width has no lane groups"),
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn quantize_lanes(column: Column<'_>, borders: &[f32], width: VectorWidth, groups: usize, row: &mut [u8]) {
    for (o, q) in row.iter_mut().enumerate().take(groups * width.byte_lanes()) {
        *q = quantize_value(column.get(o), borders);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(borders: Vec<f32>) -> FloatFeatureBorders {
        FloatFeatureBorders {
            feature_index: 0,
            borders,
        }
    }

    #[test]
    fn quantize_value_examples() {
        assert_eq!(quantize_value(0.7, &[0.5]), 1);
        assert_eq!(quantize_value(2.0, &[1.0, 2.0, 3.0]), 1);
        assert_eq!(quantize_value(f32::NAN, &[1.0, 2.0, 3.0]), 0);
        assert_eq!(quantize_value(f32::INFINITY, &[1.0, 2.0, 3.0]), 3);
        assert_eq!(quantize_value(f32::NEG_INFINITY, &[f32::NEG_INFINITY, 0.0]), 0);
        assert_eq!(quantize_value(5.0, &[]), 0);
    }

    #[test]
    fn sign_against_zero_border() {
        let m = FeatureMatrix::new(Layout::ObjectMajor, 2, 1, vec![-1.0, 1.0]).unwrap();
        for width in VectorWidth::supported() {
            let mut out = QuantizedBlock::new(64, 1).unwrap();
            quantize_block(&m, 0..2, &[feature(vec![0.0])], width, &mut out).unwrap();
            assert_eq!(&out.row(0)[..3], &[0, 1, 0]);
            assert_eq!(out.live(), 2);
        }
    }

    #[test]
    fn padding_is_rezeroed_between_blocks() {
        let values: Vec<f32> = (0..200).map(|i| i as f32).collect();
        let m = FeatureMatrix::new(Layout::FeatureMajor, 200, 1, values).unwrap();
        let borders = [feature(vec![-1.0, 10.0])];
        for width in VectorWidth::supported() {
            let mut out = QuantizedBlock::new(128, 1).unwrap();
            quantize_block(&m, 0..128, &borders, width, &mut out).unwrap();
            assert!(out.row(0).iter().all(|&q| q >= 1));
            quantize_block(&m, 128..200, &borders, width, &mut out).unwrap();
            assert!(out.row(0)[..72].iter().all(|&q| q == 2));
            assert!(out.row(0)[72..].iter().all(|&q| q == 0));
        }
    }

    #[test]
    fn rejects_bad_setup() {
        let m = FeatureMatrix::new(Layout::ObjectMajor, 3, 1, vec![0.0; 3]).unwrap();
        let borders = [feature(vec![0.0])];
        let mut out = QuantizedBlock::new(64, 1).unwrap();
        assert!(matches!(
            quantize_block(&m, 0..4, &borders, VectorWidth::Scalar, &mut out),
            Err(QuantizeError::Range { .. })
        ));
        let mut two = QuantizedBlock::new(64, 2).unwrap();
        assert!(matches!(
            quantize_block(&m, 0..3, &borders, VectorWidth::Scalar, &mut two),
            Err(QuantizeError::FeatureCount { .. })
        ));
        assert_eq!(QuantizedBlock::new(100, 1).unwrap_err(), QuantizeError::BlockSize(100));
        assert!(matches!(
            FeatureMatrix::new(Layout::ObjectMajor, 2, 2, vec![0.0; 3]),
            Err(QuantizeError::MatrixLength {
                expected: 4,
                found: 3,
                ..
            })
        ));
    }

    #[test]
    fn layout_conversion_preserves_elements() {
        let m = FeatureMatrix::new(Layout::ObjectMajor, 3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = m.to_layout(Layout::FeatureMajor);
        assert_eq!(t.values(), &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        for o in 0..3 {
            for f in 0..2 {
                assert_eq!(m.get(o, f), t.get(o, f));
            }
        }
        assert_eq!(t.to_layout(Layout::ObjectMajor), m);
    }
}
