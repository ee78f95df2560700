#![allow(dead_code)]

use odt_core::synthetic::SynthRng;
use odt_core::{
    FeatureMatrix, FloatFeatureBorders, Layout, LeafPrecision, ObliviousModel, ObliviousTree, SplitCondition,
};

pub const BATCHES: [usize; 8] = [1, 7, 31, 32, 33, 100, 128, 257];

/// Relative closeness: `|a - b| <= tol * max(|a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn tolerance(precision: LeafPrecision) -> f64 {
    match precision {
        LeafPrecision::Binary64 => 1e-12,
        LeafPrecision::Binary16 => 1e-6,
    }
}

/// First index where the vectors disagree beyond `tol`.
pub fn first_mismatch(a: &[f64], b: &[f64], tol: f64) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.iter().zip(b).position(|(x, y)| !close(*x, *y, tol))
}

/// Strictly ascending borders drawn from a few value regimes.
pub fn random_borders(rng: &mut SynthRng, count: usize) -> Vec<f32> {
    let mut borders: Vec<f32> = (0..count)
        .map(|_| match rng.below(10) {
            0 => rng.uniform(-1e-3, 1e-3) as f32,
            1 => rng.uniform(-1e6, 1e6) as f32,
            _ => rng.uniform(-3.0, 3.0) as f32,
        })
        .collect();
    borders.sort_by(f32::total_cmp);
    // `==` also merges -0.0 with 0.0, which would not be strictly ascending.
    borders.dedup();
    borders
}

/// A random valid model: up to 50 features with up to 64 borders each, up to
/// 200 trees of depth 1..=8, leaves of magnitude in the binary16 normal range.
pub fn random_model(seed: u64) -> ObliviousModel {
    let mut rng = SynthRng::new(seed);
    let n_features = rng.range_inclusive(1, 50);
    let float_features: Vec<FloatFeatureBorders> = (0..n_features)
        .map(|i| {
            let count = if i == 0 {
                rng.range_inclusive(1, 64)
            } else {
                rng.below(65)
            };
            let mut borders = random_borders(&mut rng, count);
            if borders.is_empty() && i == 0 {
                borders.push(0.0);
            }
            FloatFeatureBorders {
                feature_index: i,
                borders,
            }
        })
        .collect();
    let with_borders: Vec<usize> = (0..n_features)
        .filter(|&f| !float_features[f].borders.is_empty())
        .collect();
    let n_trees = if rng.below(20) == 0 {
        rng.below(3)
    } else {
        rng.range_inclusive(1, 200)
    };
    let magnitude = 10f64.powf(rng.uniform(-2.0, 2.0));
    let trees = (0..n_trees)
        .map(|_| {
            let depth = rng.range_inclusive(1, 8);
            let splits = (0..depth)
                .map(|_| {
                    let f = with_borders[rng.below(with_borders.len())];
                    SplitCondition {
                        feature_index: f,
                        border_ordinal: rng.below(float_features[f].borders.len()),
                    }
                })
                .collect();
            let leaves = (0..1usize << depth)
                .map(|_| magnitude * rng.uniform(-1.0, 1.0))
                .collect();
            ObliviousTree::new(splits, leaves)
        })
        .collect();
    ObliviousModel {
        float_features,
        trees,
        scale: rng.uniform(-2.0, 2.0),
        bias: rng.uniform(-5.0, 5.0),
    }
}

/// Object-major inputs mixing NaN, infinities, exact borders, their float
/// neighbours and uniform values.
pub fn random_features(model: &ObliviousModel, n_objects: usize, seed: u64) -> FeatureMatrix {
    let mut rng = SynthRng::new(seed);
    let n_features = model.n_features();
    let mut values = Vec::with_capacity(n_objects * n_features);
    for _ in 0..n_objects {
        for f in 0..n_features {
            let borders = &model.float_features[f].borders;
            let roll = rng.below(100);
            let v = if roll < 4 {
                f32::NAN
            } else if roll < 6 {
                if rng.below(2) == 0 {
                    f32::INFINITY
                } else {
                    f32::NEG_INFINITY
                }
            } else if roll < 30 && !borders.is_empty() {
                let b = borders[rng.below(borders.len())];
                match rng.below(3) {
                    0 => b.next_down(),
                    1 => b.next_up(),
                    _ => b,
                }
            } else {
                rng.uniform(-3.5, 3.5) as f32
            };
            values.push(v);
        }
    }
    FeatureMatrix::new(Layout::ObjectMajor, n_objects, n_features, values).unwrap()
}

/// Model with special leaf values (signed zeros, subnormals, infinities,
/// extreme magnitudes) for serialization tests.
pub fn random_special_model(seed: u64) -> ObliviousModel {
    let mut model = random_model(seed);
    let mut rng = SynthRng::new(seed ^ 0x5eed);
    let specials = [
        0.0,
        -0.0,
        f64::MIN_POSITIVE,
        -f64::MIN_POSITIVE / 4.0,
        5e-324,
        f64::MAX,
        f64::INFINITY,
        f64::NEG_INFINITY,
        1.0 / 3.0,
    ];
    for tree in &mut model.trees {
        for leaf in &mut tree.leaf_values {
            if rng.below(8) == 0 {
                *leaf = specials[rng.below(specials.len())];
            }
        }
    }
    for feature in &mut model.float_features {
        if let Some(b) = feature.borders.first_mut() {
            if rng.below(4) == 0 {
                *b = f32::NEG_INFINITY;
            }
        }
    }
    model.scale = specials[rng.below(6)];
    model
}
