mod common;

use common::{first_mismatch, random_features, random_model, tolerance};
use odt_core::oracle::leaf_index;
use odt_core::{
    compute_leaf_indices, evaluate_scalar, quantize_block, EvalConfig, Evaluator, Layout, LeafIndexVector,
    QuantizedBlock, TailPolicy, VectorWidth,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_config_matches_oracle(seed in any::<u64>(), n_objects in 1usize..300) {
        let model = random_model(seed);
        let x = random_features(&model, n_objects, seed.wrapping_add(1));
        let configs = EvalConfig::all_on_host();
        for config in &configs {
            let precision = config.strategy.precision();
            let expected = evaluate_scalar(&model, &x, precision).unwrap();
            for layout in [Layout::ObjectMajor, Layout::FeatureMajor] {
                let got = Evaluator::new(&model, *config).unwrap().evaluate(&x.to_layout(layout)).unwrap();
                let bad = first_mismatch(&got, &expected, tolerance(precision));
                prop_assert!(bad.is_none(), "{} {}: object {:?}", config, layout.name(), bad.map(|i| (got[i], expected[i])));
            }
        }
    }

    #[test]
    fn stage_two_matches_raw_traversal(seed in any::<u64>(), n_objects in 1usize..=64) {
        let model = random_model(seed);
        let x = random_features(&model, n_objects, seed ^ 7);
        for width in VectorWidth::supported() {
            let mut block = QuantizedBlock::new(64, model.n_features()).unwrap();
            quantize_block(&x, 0..n_objects, &model.float_features, width, &mut block).unwrap();
            for tail in [TailPolicy::ScalarTail, TailPolicy::PaddedGroup] {
                for (t, tree) in model.trees.iter().enumerate() {
                    let mut out = LeafIndexVector::new(64);
                    compute_leaf_indices(&block, tree, width, tail, &mut out).unwrap();
                    for o in 0..n_objects {
                        prop_assert_eq!(out.as_slice()[o] as usize, leaf_index(&model, t, &x, o));
                    }
                }
            }
        }
    }

    #[test]
    fn reusing_an_evaluator_is_stateless(seed in any::<u64>(), a in 1usize..300, b in 1usize..300) {
        let model = random_model(seed);
        let xa = random_features(&model, a, seed ^ 1);
        let xb = random_features(&model, b, seed ^ 2);
        for config in EvalConfig::all_on_host().into_iter().filter(|c| c.block_size == 64) {
            let mut ev = Evaluator::new(&model, config).unwrap();
            let first = ev.evaluate(&xa).unwrap();
            ev.evaluate(&xb).unwrap();
            prop_assert_eq!(ev.evaluate(&xa).unwrap(), first);
        }
    }
}

#[test]
fn scalar_width_is_always_available() {
    assert!(VectorWidth::Scalar.is_supported());
    assert!(VectorWidth::supported().contains(&VectorWidth::Scalar));
}

#[test]
fn tail_policies_agree_on_every_batch_size() {
    let spec = odt_core::SyntheticSpec {
        n_features: 12,
        borders_per_feature: 20,
        n_trees: 12,
        depth: 8,
        seed: 5,
    };
    let model = odt_core::generate_synthetic_model(&spec).unwrap();
    let x = odt_core::generate_features(&model, 3 * 512, Layout::ObjectMajor, 5);
    for config in EvalConfig::all_on_host()
        .into_iter()
        .filter(|c| c.tail_policy == TailPolicy::ScalarTail)
    {
        let padded = EvalConfig {
            tail_policy: TailPolicy::PaddedGroup,
            ..config
        };
        let mut scalar_ev = Evaluator::new(&model, config).unwrap();
        let mut padded_ev = Evaluator::new(&model, padded).unwrap();
        let full_s = scalar_ev.evaluate(&x).unwrap();
        for n in 1..=3 * config.block_size {
            let sub = odt_core::FeatureMatrix::new(Layout::ObjectMajor, n, 12, x.values()[..n * 12].to_vec()).unwrap();
            let s = scalar_ev.evaluate(&sub).unwrap();
            let p = padded_ev.evaluate(&sub).unwrap();
            assert_eq!(s.len(), n);
            assert_eq!(s, p, "{config} n={n}");
            assert_eq!(s[..], full_s[..n], "{config} n={n}");
        }
    }
}
