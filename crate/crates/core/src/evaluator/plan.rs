use std::ops::Range;

/// How objects that do not fill a whole lane group are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TailPolicy {
    /// Leftover objects go through the scalar kernel.
    #[default]
    ScalarTail,
    /// One extra vector group runs over zero padding; padded lanes are discarded.
    PaddedGroup,
}

impl TailPolicy {
    pub fn name(self) -> &'static str {
        match self {
            TailPolicy::ScalarTail => "scalar",
            TailPolicy::PaddedGroup => "padded",
        }
    }
}

/// Execution plan for `live` objects at a given lane-group size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailPlan {
    pub group_size: usize,
    pub vector_groups: usize,
    pub scalar_objects: usize,
    /// Lanes of the last vector group that carry no live object.
    pub padded_lanes: usize,
}

impl TailPlan {
    /// Objects covered by vector groups, padding included.
    pub fn vector_objects(&self) -> usize {
        self.vector_groups * self.group_size
    }

    pub fn scalar_range(&self) -> Range<usize> {
        let start = self.vector_objects();
        start..start + self.scalar_objects
    }
}

/// Splits `live` objects into vector groups of `group_size` plus either a scalar
/// remainder or one padded group.
pub fn apply_tail_policy(policy: TailPolicy, group_size: usize, live: usize) -> TailPlan {
    assert!(group_size > 0, "group size must be positive");
    let full = live / group_size;
    let rest = live % group_size;
    match policy {
        TailPolicy::ScalarTail => TailPlan {
            group_size,
            vector_groups: full,
            scalar_objects: rest,
            padded_lanes: 0,
        },
        TailPolicy::PaddedGroup => TailPlan {
            group_size,
            vector_groups: live.div_ceil(group_size),
            scalar_objects: 0,
            padded_lanes: if rest == 0 { 0 } else { group_size - rest },
        },
    }
}

/// Consecutive `[begin, end)` ranges of at most `block_size` objects covering `0..n_objects`.
pub fn plan_blocks(n_objects: usize, block_size: usize) -> Vec<Range<usize>> {
    assert!(block_size > 0, "block size must be positive");
    (0..n_objects)
        .step_by(block_size)
        .map(|begin| begin..(begin + block_size).min(n_objects))
        .collect()
}
