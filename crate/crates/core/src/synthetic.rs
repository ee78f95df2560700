//! Seeded synthetic models and feature batches.
//!
//! All randomness comes from xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). Draws are derived from raw `u64`
//! outputs with fixed formulas so fixtures reproduce on any platform:
//!
//! - unit float: `(x >> 11) * 2^-53`, uniform on `[0, 1)`
//! - bounded integer in `0..n`: `(x as u128 * n as u128) >> 64`

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::model::{FloatFeatureBorders, ObliviousModel, ObliviousTree, SplitCondition, MAX_BORDERS, MAX_DEPTH};
use crate::quantizer::{FeatureMatrix, Layout};

/// Deterministic random source used by every generator in this crate.
#[derive(Debug, Clone)]
pub struct SynthRng(Xoshiro256StarStar);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `0..n`; `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }
}

/// Shape of a generated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub borders_per_feature: usize,
    pub n_trees: usize,
    pub depth: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The shape of the public `epsilon8k_64` benchmark model.
    pub fn epsilon8k64(seed: u64) -> Self {
        Self {
            n_features: 2000,
            borders_per_feature: 64,
            n_trees: 8000,
            depth: 6,
            seed,
        }
    }

    /// A model of the same kind that runs the full benchmark matrix in minutes.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_features: 500,
            borders_per_feature: 64,
            n_trees: 1000,
            depth: 6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntheticError {
    #[error("n_features must be at least 1")]
    NoFeatures,
    #[error("borders_per_feature {0} outside 1..={MAX_BORDERS}")]
    Borders(usize),
    #[error("depth {0} outside 1..={MAX_DEPTH}")]
    Depth(usize),
}

/// Span covered by generated borders; feature batches draw slightly outside it.
pub const BORDER_SPAN: (f32, f32) = (-2.0, 2.0);

/// Draws a model with ascending borders, splits uniform over (feature, border)
/// pairs and leaves uniform on `[-1, 1)`. Scale is 1 and bias 0.
pub fn generate_synthetic_model(spec: &SyntheticSpec) -> Result<ObliviousModel, SyntheticError> {
    if spec.n_features == 0 {
        return Err(SyntheticError::NoFeatures);
    }
    if spec.borders_per_feature == 0 || spec.borders_per_feature > MAX_BORDERS {
        return Err(SyntheticError::Borders(spec.borders_per_feature));
    }
    if spec.depth == 0 || spec.depth > MAX_DEPTH {
        return Err(SyntheticError::Depth(spec.depth));
    }
    let mut rng = SynthRng::new(spec.seed);

    let float_features = (0..spec.n_features)
        .map(|feature_index| FloatFeatureBorders {
            feature_index,
            borders: ascending_borders(&mut rng, spec.borders_per_feature),
        })
        .collect();

    let trees = (0..spec.n_trees)
        .map(|_| {
            let splits = (0..spec.depth)
                .map(|_| SplitCondition {
                    feature_index: rng.below(spec.n_features),
                    border_ordinal: rng.below(spec.borders_per_feature),
                })
                .collect();
            let leaves = (0..1usize << spec.depth).map(|_| rng.uniform(-1.0, 1.0)).collect();
            ObliviousTree::new(splits, leaves)
        })
        .collect();

    Ok(ObliviousModel {
        float_features,
        trees,
        scale: 1.0,
        bias: 0.0,
    })
}

/// `count` strictly ascending binary32 values spread over [`BORDER_SPAN`].
///
/// Built as a running sum of increments in `[0.5, 1) * step`, so consecutive
/// borders differ by far more than one binary32 ulp at this magnitude.
fn ascending_borders(rng: &mut SynthRng, count: usize) -> Vec<f32> {
    let (lo, hi) = BORDER_SPAN;
    let step = (hi - lo) as f64 / count as f64;
    let mut at = lo as f64;
    (0..count)
        .map(|_| {
            at += step * rng.uniform(0.5, 1.0);
            at as f32
        })
        .collect()
}

/// Random batch for `model`: mostly uniform values around the border span, with a
/// sprinkling of exact border values and NaNs so ties and the NaN rule are exercised.
pub fn generate_features(model: &ObliviousModel, n_objects: usize, layout: Layout, seed: u64) -> FeatureMatrix {
    let n_features = model.n_features();
    let mut rng = SynthRng::new(seed);
    let (lo, hi) = BORDER_SPAN;
    let mut object_major = Vec::with_capacity(n_objects * n_features);
    for _ in 0..n_objects {
        for borders in &model.float_features {
            let roll = rng.unit();
            let v = if roll < 0.02 {
                f32::NAN
            } else if roll < 0.12 && !borders.borders.is_empty() {
                borders.borders[rng.below(borders.borders.len())]
            } else {
                rng.uniform(lo as f64 - 0.25, hi as f64 + 0.25) as f32
            };
            object_major.push(v);
        }
    }
    FeatureMatrix::new(Layout::ObjectMajor, n_objects, n_features, object_major)
        .expect("generated matrix has consistent dimensions")
        .to_layout(layout)
}
