mod common;

use bevgrid::completion::{complete, fixpoint_iterations, LabelStrategy};
use bevgrid::RasterSet;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn masked(r: &RasterSet) -> usize {
    r.mask.iter().filter(|&&m| m).count()
}

#[test]
fn filled_set_matches_reference_flood() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (kernel, fill) in [(3, 0.01), (5, 0.003), (7, 0.02)] {
        let r = common::random_raster(&mut rng, 61, 47, fill);
        for k in 0..6 {
            let c = complete(&r, k, kernel, LabelStrategy::Majority).unwrap();
            let levels = common::flood_levels(&r, kernel / 2, k);
            for (o, lvl) in levels.iter().enumerate() {
                assert_eq!(c.mask[o], lvl.is_some(), "kernel {kernel}, k {k}, pixel {o}");
            }
        }
    }
}

#[test]
fn fixpoint_count_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kernel in [3, 5, 9] {
        for _ in 0..10 {
            let r = common::random_raster(&mut rng, 40, 33, 0.004);
            if masked(&r) == 0 {
                continue;
            }
            let n = fixpoint_iterations(&r, kernel).unwrap();
            let full = complete(&r, n, kernel, LabelStrategy::Majority).unwrap();
            assert_eq!(masked(&full), full.len());
            if n > 0 {
                let short = complete(&r, n - 1, kernel, LabelStrategy::Majority).unwrap();
                assert!(masked(&short) < short.len());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn growth_is_monotone_and_observed_pixels_stay(
        seed in any::<u64>(),
        w in 1u32..40,
        h in 1u32..40,
        fill in 0.0f64..0.3,
        max_id in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::random_raster(&mut rng, w, h, fill);
        let strategy = if max_id { LabelStrategy::MaxId } else { LabelStrategy::Majority };
        let mut prev = r.clone();
        for k in 1..4 {
            let c = complete(&r, k, 3, strategy).unwrap();
            for o in 0..r.len() {
                prop_assert!(!prev.mask[o] || c.mask[o]);
                if r.mask[o] {
                    prop_assert_eq!(c.label[o], r.label[o]);
                    prop_assert_eq!(c.rgb[o], r.rgb[o]);
                    prop_assert_eq!(c.alt[o], r.alt[o]);
                    prop_assert_eq!(c.winner_index[o], r.winner_index[o]);
                } else if c.mask[o] {
                    prop_assert!((c.label[o] as usize) < bevgrid::NUM_CLASSES);
                }
            }
            prev = c;
        }
    }

    #[test]
    fn dense_rasters_are_fixed_points(seed in any::<u64>(), w in 1u32..30, h in 1u32..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::random_raster(&mut rng, w, h, 1.0);
        prop_assert_eq!(complete(&r, 5, 3, LabelStrategy::Majority).unwrap(), r);
    }

    #[test]
    fn completing_twice_equals_more_iterations(seed in any::<u64>(), a in 0u32..4, b in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::random_raster(&mut rng, 25, 25, 0.05);
        let twice = complete(&complete(&r, a, 3, LabelStrategy::Majority).unwrap(), b, 3, LabelStrategy::Majority).unwrap();
        let once = complete(&r, a + b, 3, LabelStrategy::Majority).unwrap();
        prop_assert_eq!(twice, once);
    }
}
