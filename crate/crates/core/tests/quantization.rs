mod common;

use odt_core::synthetic::SynthRng;
use odt_core::{
    quantize_block, quantize_value, FeatureMatrix, FloatFeatureBorders, Layout, QuantizedBlock, VectorWidth,
};
use proptest::prelude::*;

/// Count of ascending borders strictly below `value`, found by binary search.
fn crossed(value: f32, borders: &[f32]) -> u8 {
    borders.partition_point(|&b| b < value) as u8
}

fn pick_value(rng: &mut SynthRng, borders: &[f32]) -> f32 {
    match rng.below(8) {
        0 => f32::NAN,
        1 => f32::INFINITY,
        2 => f32::NEG_INFINITY,
        3 | 4 if !borders.is_empty() => borders[rng.below(borders.len())],
        5 if !borders.is_empty() => borders[rng.below(borders.len())].next_up(),
        _ => rng.uniform(-4.0, 4.0) as f32,
    }
}

#[test]
fn max_border_count_and_extremes() {
    let mut rng = SynthRng::new(254);
    let mut borders = common::random_borders(&mut rng, 400);
    borders.truncate(254);
    assert_eq!(borders.len(), 254);
    assert_eq!(quantize_value(f32::INFINITY, &borders), 254);
    assert_eq!(quantize_value(f32::NEG_INFINITY, &borders), 0);
    for &b in &borders {
        assert_eq!(quantize_value(b, &borders), crossed(b, &borders));
        assert_eq!(quantize_value(b.next_up(), &borders), crossed(b, &borders) + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn blocks_match_border_search(
        seed in any::<u64>(),
        n_features in 1usize..6,
        n_objects in 1usize..300,
        begin in 0usize..40,
        block_size in prop::sample::select(vec![64usize, 128, 256, 512]),
    ) {
        let mut rng = SynthRng::new(seed);
        let features: Vec<FloatFeatureBorders> = (0..n_features)
            .map(|i| {
                let count = rng.below(255);
                FloatFeatureBorders { feature_index: i, borders: common::random_borders(&mut rng, count) }
            })
            .collect();
        let mut values = Vec::new();
        for _ in 0..n_objects {
            for f in &features {
                values.push(pick_value(&mut rng, &f.borders));
            }
        }
        let object_major = FeatureMatrix::new(Layout::ObjectMajor, n_objects, n_features, values).unwrap();
        let begin = begin.min(n_objects - 1);
        let end = (begin + block_size).min(n_objects);
        for layout in [Layout::ObjectMajor, Layout::FeatureMajor] {
            let matrix = object_major.to_layout(layout);
            for width in VectorWidth::supported() {
                let mut block = QuantizedBlock::new(block_size, n_features).unwrap();
                quantize_block(&matrix, begin..end, &features, width, &mut block).unwrap();
                for (f, feature) in features.iter().enumerate() {
                    for o in 0..end - begin {
                        let v = matrix.get(begin + o, f);
                        prop_assert_eq!(block.get(f, o), crossed(v, &feature.borders), "width {} value {}", width, v);
                    }
                    prop_assert!(block.row(f)[end - begin..].iter().all(|&q| q == 0));
                }
            }
        }
    }
}
