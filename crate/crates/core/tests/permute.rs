use odt_core::leaf_bank::{f16_bits_to_f32, f64_to_f16_saturating};
use odt_core::{
    accumulate, Accumulator, FloatFeatureBorders, KernelError, LeafBank, LeafIndexVector, LeafStrategy, ObliviousModel,
    ObliviousTree, PermuteLayout, SplitCondition, TailPolicy, VectorWidth,
};

fn model_with_depths(depths: &[usize]) -> ObliviousModel {
    let trees = depths
        .iter()
        .enumerate()
        .map(|(t, &depth)| {
            let splits = vec![
                SplitCondition {
                    feature_index: 0,
                    border_ordinal: 0
                };
                depth
            ];
            // Distinct, exactly representable in binary16.
            let leaves = (0..1usize << depth)
                .map(|i| (i as f64 + 1.0) * 0.25 + t as f64)
                .collect();
            ObliviousTree::new(splits, leaves)
        })
        .collect();
    ObliviousModel {
        float_features: vec![FloatFeatureBorders {
            feature_index: 0,
            borders: vec![0.0],
        }],
        trees,
        scale: 1.0,
        bias: 0.0,
    }
}

#[test]
fn index_split_is_exhaustive_and_exclusive() {
    for depth in 1..=8 {
        for layout in [PermuteLayout::binary64(depth), PermuteLayout::binary16(depth)] {
            assert!(layout.vectors * layout.lanes >= 1 << depth);
            for index in 0..(1usize << depth) as u16 {
                let index = index as u8;
                let (vector, lane) = layout.split(index);
                assert_eq!(vector * layout.lanes + lane, index as usize);
                assert!(vector < layout.vectors && lane < layout.lanes);
                let selecting = (0..layout.vectors).filter(|&v| layout.selects(v, index)).count();
                assert_eq!(selecting, 1, "depth {depth} index {index}");
            }
        }
    }
    assert_eq!(PermuteLayout::binary64(6).vectors, 8);
    assert_eq!(PermuteLayout::binary64(8).vectors, 32);
    assert_eq!(PermuteLayout::binary16(6).vectors, 2);
    assert_eq!(PermuteLayout::binary16(3).vectors, 1);
}

/// Every leaf of every depth, at every lane position, through every kernel.
#[test]
fn masked_merge_selects_every_leaf() {
    let depths: Vec<usize> = (1..=8).collect();
    let model = model_with_depths(&depths);
    for strategy in LeafStrategy::ALL {
        let bank = LeafBank::build(&model, strategy.precision());
        for width in VectorWidth::ALL.into_iter().filter(|&w| strategy.runs_on_host(w)) {
            for (t, &depth) in depths.iter().enumerate() {
                let leaves = 1usize << depth;
                // Shifted cyclic patterns place each leaf in every lane of a group.
                for shift in 0..leaves.min(64) {
                    let indices: Vec<u8> = (0..512).map(|o| ((o + shift) % leaves) as u8).collect();
                    let iv = LeafIndexVector::from_slice(512, &indices);
                    let mut acc = Accumulator::new(512, strategy.precision());
                    accumulate(strategy, width, TailPolicy::ScalarTail, &iv, 512, &bank, t, &mut acc).unwrap();
                    for (o, &i) in indices.iter().enumerate() {
                        let leaf = model.trees[t].leaf_values[i as usize];
                        let expected = match strategy.precision() {
                            odt_core::LeafPrecision::Binary64 => leaf,
                            odt_core::LeafPrecision::Binary16 => f16_bits_to_f32(f64_to_f16_saturating(leaf)) as f64,
                        };
                        assert_eq!(acc.get(o), expected, "{strategy} w{width} depth {depth} object {o}");
                    }
                }
            }
        }
    }
}

#[test]
fn out_of_range_indices_are_rejected() {
    let model = model_with_depths(&[2]);
    let bank = LeafBank::build(&model, odt_core::LeafPrecision::Binary64);
    let iv = LeafIndexVector::from_slice(64, &[0, 3, 4]);
    let mut acc = Accumulator::new(64, odt_core::LeafPrecision::Binary64);
    let err = accumulate(
        LeafStrategy::Naive,
        VectorWidth::Scalar,
        TailPolicy::ScalarTail,
        &iv,
        3,
        &bank,
        0,
        &mut acc,
    );
    assert_eq!(
        err,
        Err(KernelError::LeafIndexOutOfRange {
            slot: 2,
            index: 4,
            leaves: 4
        })
    );
}
