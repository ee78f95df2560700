//! Stage 3: fetch each object's leaf value for one tree and add it to the
//! object's running sum.
//!
//! | strategy  | leaf fetch                                   | widths        | bank      |
//! |-----------|----------------------------------------------|---------------|-----------|
//! | Naive     | scalar indexed loads, vector adds            | any           | binary64  |
//! | Naive16   | scalar indexed loads, widened, vector adds   | any           | binary16  |
//! | Gather    | vector gather by index                       | 256, 512      | binary64  |
//! | Permute64 | whole table in registers, masked permutes    | 512           | binary64  |
//! | Permute16 | whole table in registers, masked permutes    | 512           | binary16  |
//!
//! Every strategy adds exactly one leaf per object per tree, in tree order, so
//! per-object sums do not depend on the strategy. Binary16 leaves are widened to
//! binary32 and summed in binary32.

use std::fmt;
use std::str::FromStr;

use crate::aligned::AlignedBuf;
use crate::error::KernelError;
use crate::evaluator::{apply_tail_policy, TailPlan, TailPolicy};
use crate::leaf_bank::{f16_bits_to_f32, LeafBank, LeafPrecision};
use crate::leaf_indexer::LeafIndexVector;
use crate::width::{has_f16c, VectorWidth};

#[cfg(target_arch = "x86_64")]
mod x86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeafStrategy {
    Naive,
    Gather,
    Permute64,
    Permute16,
    Naive16,
}

impl LeafStrategy {
    pub const ALL: [LeafStrategy; 5] = [
        LeafStrategy::Naive,
        LeafStrategy::Gather,
        LeafStrategy::Permute64,
        LeafStrategy::Permute16,
        LeafStrategy::Naive16,
    ];

    pub fn precision(self) -> LeafPrecision {
        match self {
            LeafStrategy::Naive | LeafStrategy::Gather | LeafStrategy::Permute64 => LeafPrecision::Binary64,
            LeafStrategy::Permute16 | LeafStrategy::Naive16 => LeafPrecision::Binary16,
        }
    }

    /// Whether the strategy has a kernel at `width` at all (independent of the host).
    pub fn accepts_width(self, width: VectorWidth) -> bool {
        match self {
            LeafStrategy::Naive | LeafStrategy::Naive16 => true,
            LeafStrategy::Gather => width >= VectorWidth::W256,
            LeafStrategy::Permute64 | LeafStrategy::Permute16 => width == VectorWidth::W512,
        }
    }

    /// Whether this host can run the strategy at `width`.
    pub fn runs_on_host(self, width: VectorWidth) -> bool {
        let extra = match (self, width) {
            (LeafStrategy::Naive16, VectorWidth::W128 | VectorWidth::W256) => has_f16c(),
            _ => true,
        };
        self.accepts_width(width) && width.is_supported() && extra
    }

    /// Checks width compatibility and host support.
    pub fn check(self, width: VectorWidth) -> Result<(), KernelError> {
        if !self.accepts_width(width) {
            return Err(KernelError::IncompatibleStrategy { strategy: self, width });
        }
        if !self.runs_on_host(width) {
            return Err(KernelError::UnsupportedWidth(width));
        }
        Ok(())
    }

    /// Objects per vector iteration at `width`; 1 for scalar kernels.
    pub fn group_size(self, width: VectorWidth) -> usize {
        match self {
            _ if width == VectorWidth::Scalar => 1,
            LeafStrategy::Permute64 => 8,
            LeafStrategy::Permute16 => 32,
            LeafStrategy::Naive | LeafStrategy::Naive16 | LeafStrategy::Gather => width.byte_lanes(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LeafStrategy::Naive => "naive",
            LeafStrategy::Gather => "gather",
            LeafStrategy::Permute64 => "permute64",
            LeafStrategy::Permute16 => "permute16",
            LeafStrategy::Naive16 => "naive16",
        }
    }
}

impl fmt::Display for LeafStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LeafStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown leaf strategy {s:?}"))
    }
}

/// How a permute strategy splits a leaf index: the high bits select one of
/// `vectors` preloaded registers, the low `lane_bits` select the lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermuteLayout {
    pub lanes: usize,
    pub lane_bits: u32,
    pub vectors: usize,
}

impl PermuteLayout {
    /// 8 binary64 lanes per 512-bit register.
    pub fn binary64(depth: usize) -> Self {
        Self::new(8, depth)
    }

    /// 32 binary16 lanes per 512-bit register.
    pub fn binary16(depth: usize) -> Self {
        Self::new(32, depth)
    }

    fn new(lanes: usize, depth: usize) -> Self {
        Self {
            lanes,
            lane_bits: lanes.trailing_zeros(),
            vectors: ((1usize << depth) / lanes).max(1),
        }
    }

    /// `(register ordinal, lane)` holding leaf `index`.
    #[inline]
    pub fn split(&self, index: u8) -> (usize, usize) {
        ((index as usize) >> self.lane_bits, (index as usize) & (self.lanes - 1))
    }

    /// Merge mask of register `vector` for leaf `index`.
    #[inline]
    pub fn selects(&self, vector: usize, index: u8) -> bool {
        self.split(index).0 == vector
    }
}

/// Per-object running sums of one block.
#[derive(Debug, Clone)]
pub enum Accumulator {
    Binary64(AlignedBuf<f64>),
    Binary32(AlignedBuf<f32>),
}

impl Accumulator {
    /// Zeroed sums for `block_size` objects, in the summation precision of `leaves`.
    pub fn new(block_size: usize, leaves: LeafPrecision) -> Self {
        match leaves {
            LeafPrecision::Binary64 => Accumulator::Binary64(AlignedBuf::zeroed(block_size)),
            LeafPrecision::Binary16 => Accumulator::Binary32(AlignedBuf::zeroed(block_size)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Accumulator::Binary64(a) => a.len(),
            Accumulator::Binary32(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reset(&mut self) {
        match self {
            Accumulator::Binary64(a) => a.fill_zero(),
            Accumulator::Binary32(a) => a.fill_zero(),
        }
    }

    pub fn get(&self, object: usize) -> f64 {
        match self {
            Accumulator::Binary64(a) => a[object],
            Accumulator::Binary32(a) => a[object] as f64,
        }
    }

    /// Writes `scale * sum + bias` for the first `out.len()` objects.
    pub fn finalize(&self, scale: f64, bias: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().enumerate() {
            *p = scale * self.get(o) + bias;
        }
    }
}

/// Adds `bank[tree][indices[o]]` to `acc[o]` for every live object.
#[allow(clippy::too_many_arguments)]
pub fn accumulate(
    strategy: LeafStrategy,
    width: VectorWidth,
    tail: TailPolicy,
    indices: &LeafIndexVector,
    live: usize,
    bank: &LeafBank,
    tree: usize,
    acc: &mut Accumulator,
) -> Result<(), KernelError> {
    strategy.check(width)?;
    if bank.precision() != strategy.precision() {
        return Err(KernelError::PrecisionMismatch {
            strategy,
            expected: strategy.precision(),
            found: bank.precision(),
        });
    }
    if tree >= bank.n_trees() {
        return Err(KernelError::TreeOutOfRange(tree));
    }
    let block = indices.block_size();
    if acc.len() != block || !block.is_multiple_of(64) || live > block {
        return Err(KernelError::BlockSizeMismatch {
            expected: block,
            found: acc.len(),
        });
    }
    let plan = apply_tail_policy(tail, strategy.group_size(width), live);
    let leaves = 1usize << bank.depth(tree);
    let covered = plan.vector_objects() + plan.scalar_objects;
    if let Some(slot) = indices.as_slice()[..covered].iter().position(|&i| i as usize >= leaves) {
        return Err(KernelError::LeafIndexOutOfRange {
            slot,
            index: indices.as_slice()[slot],
            leaves,
        });
    }
    accumulate_unchecked(strategy, width, &plan, indices.as_slice(), bank, tree, acc);
    Ok(())
}

/// Kernel dispatch after setup validation: strategy runs on this host at `width`,
/// the bank precision matches, and `acc`/`indices` have the same block size
/// (a multiple of 64, so padded groups stay in bounds).
pub(crate) fn accumulate_unchecked(
    strategy: LeafStrategy,
    width: VectorWidth,
    plan: &TailPlan,
    indices: &[u8],
    bank: &LeafBank,
    tree: usize,
    acc: &mut Accumulator,
) {
    assert!(plan.vector_objects() <= indices.len() && indices.len() == acc.len());
    match acc {
        Accumulator::Binary64(sums) => {
            let table = bank.table64(tree);
            if width == VectorWidth::Scalar {
                naive64_scalar(indices, table, 0..plan.vector_objects() + plan.scalar_objects, sums);
                return;
            }
            vector64(strategy, width, plan, indices, table, bank.depth(tree), sums);
            naive64_scalar(indices, table, plan.scalar_range(), sums);
        }
        Accumulator::Binary32(sums) => {
            let table = bank.table16(tree);
            if width == VectorWidth::Scalar {
                naive16_scalar(indices, table, 0..plan.vector_objects() + plan.scalar_objects, sums);
                return;
            }
            vector16(strategy, width, plan, indices, table, bank.depth(tree), sums);
            naive16_scalar(indices, table, plan.scalar_range(), sums);
        }
    }
}

fn naive64_scalar(indices: &[u8], table: &[f64], objects: std::ops::Range<usize>, sums: &mut [f64]) {
    for o in objects {
        sums[o] += table[indices[o] as usize];
    }
}

fn naive16_scalar(indices: &[u8], table: &[u16], objects: std::ops::Range<usize>, sums: &mut [f32]) {
    for o in objects {
        sums[o] += f16_bits_to_f32(table[indices[o] as usize]);
    }
}

#[cfg(target_arch = "x86_64")]
fn vector64(
    strategy: LeafStrategy,
    width: VectorWidth,
    plan: &TailPlan,
    indices: &[u8],
    table: &[f64],
    depth: usize,
    sums: &mut [f64],
) {
    let groups = plan.vector_groups;
    assert!(table.len() >= (1 << depth) && table.len().is_multiple_of(8));
    // SAFETY: `strategy.check(width)` passed at setup, so the required extensions are
    // present. Index bytes are < 2^depth <= table.len(), and indices/sums hold at
    // least groups * group_size elements (asserted by the caller).
    unsafe {
        match (strategy, width) {
            (LeafStrategy::Naive, VectorWidth::W128) => x86::naive64_w128(indices, table, groups, sums),
            (LeafStrategy::Naive, VectorWidth::W256) => x86::naive64_w256(indices, table, groups, sums),
            (LeafStrategy::Naive, VectorWidth::W512) => x86::naive64_w512(indices, table, groups, sums),
            (LeafStrategy::Gather, VectorWidth::W256) => x86::gather_w256(indices, table, groups, sums),
            (LeafStrategy::Gather, VectorWidth::W512) => x86::gather_w512(indices, table, groups, sums),
            (LeafStrategy::Permute64, VectorWidth::W512) => {
                x86::permute64_w512(indices, table, PermuteLayout::binary64(depth), groups, sums)
            }
            _ => unreachable!("{strategy} has no binary64 kernel at width {width}"),
        }
    }
}

#[cfg(target_arch = "x86_64")]
fn vector16(
    strategy: LeafStrategy,
    width: VectorWidth,
    plan: &TailPlan,
    indices: &[u8],
    table: &[u16],
    depth: usize,
    sums: &mut [f32],
) {
    let groups = plan.vector_groups;
    assert!(table.len() >= (1 << depth) && table.len().is_multiple_of(32));
    // SAFETY: as in `vector64`.
    unsafe {
        match (strategy, width) {
            (LeafStrategy::Naive16, VectorWidth::W128) => x86::naive16_w128(indices, table, groups, sums),
            (LeafStrategy::Naive16, VectorWidth::W256) => x86::naive16_w256(indices, table, groups, sums),
            (LeafStrategy::Naive16, VectorWidth::W512) => x86::naive16_w512(indices, table, groups, sums),
            (LeafStrategy::Permute16, VectorWidth::W512) => {
                x86::permute16_w512(indices, table, PermuteLayout::binary16(depth), groups, sums)
            }
            _ => unreachable!("{strategy} has no binary16 kernel at width {width}"),
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn vector64(
    _: LeafStrategy,
    _: VectorWidth,
    plan: &TailPlan,
    indices: &[u8],
    table: &[f64],
    _: usize,
    sums: &mut [f64],
) {
    naive64_scalar(indices, table, 0..plan.vector_objects(), sums);
}

#[cfg(not(target_arch = "x86_64"))]
fn vector16(
    _: LeafStrategy,
    _: VectorWidth,
    plan: &TailPlan,
    indices: &[u8],
    table: &[u16],
    _: usize,
    sums: &mut [f32],
) {
    naive16_scalar(indices, table, 0..plan.vector_objects(), sums);
}
