use priormvs::prior::{denormalize_value, sample_perturbations, PerturbationTriple};
use priormvs::raster::{DepthMap, Grid};
use priormvs::rng::stream_rng;
use priormvs::synthesis::{
    build_training_sample, forward_warp, multi_scale_loss, LossConfig, SplatState, SynthConfig, HOLE_FILL_RADIUS,
};
use priormvs::synthetic::{PriorStyle, SceneSpec, SyntheticScene};
use proptest::prelude::*;

fn perturbation(d_min: f64, d_max: f64, seed: u64) -> PerturbationTriple {
    sample_perturbations(d_min, d_max, &mut stream_rng(seed, 0)).unwrap()
}

proptest! {
    /// Larger prior values mean nearer surfaces.
    #[test]
    fn denormalization_is_monotone(
        d_min in 0.1f64..10.0,
        span in 0.01f64..100.0,
        seed in any::<u64>(),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let d_max = d_min + span;
        let pert = perturbation(d_min, d_max, seed);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let far = denormalize_value(lo, d_min, d_max, &pert);
        let near = denormalize_value(hi, d_min, d_max, &pert);
        prop_assert!(near <= far, "{hi} -> {near}, {lo} -> {far}");
        prop_assert!(d_min <= near && far <= d_max);
    }

    #[test]
    fn perturbations_respect_their_intervals(d_min in 0.1f64..10.0, span in 0.01f64..100.0, seed in any::<u64>()) {
        let d_max = d_min + span;
        let p = perturbation(d_min, d_max, seed);
        let half = span / 2.0;
        prop_assert!((0.0..=half).contains(&p.eta1));
        prop_assert!((-half..=0.0).contains(&p.eta2));
        prop_assert!(-p.eta1 <= p.eta3 && p.eta3 <= -p.eta2);
        prop_assert!(p.validate(d_min, d_max).is_ok());
    }

    #[test]
    fn loss_is_weighted_sum_of_scale_errors(
        values in prop::collection::vec(0.5f32..10.0, 64),
        offsets in prop::array::uniform3(0.0f32..2.0),
        weights in prop::array::uniform3(0.0f64..4.0),
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let target = DepthMap::from_values(Grid::from_vec(8, 8, values).unwrap());
        let preds: Vec<DepthMap> = (0..3)
            .map(|k| {
                let t = target.downsample_nearest(1 << (2 - k));
                DepthMap::from_values(t.values().map(|&v| v + offsets[k]))
            })
            .collect();
        let cfg = LossConfig { scale_weights: weights.to_vec() };
        let loss = multi_scale_loss(&preds, &target, &cfg).unwrap();
        for (got, want) in loss.per_scale.iter().zip(offsets) {
            prop_assert!((got - want as f64).abs() < 1e-5);
        }
        let expected: f64 = loss.per_scale.iter().zip(&weights).map(|(l, w)| l * w).sum();
        prop_assert!((loss.total - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}

#[test]
fn perfect_predictions_have_zero_loss() {
    let target = DepthMap::from_values(Grid::from_fn(16, 12, |x, y| 1.0 + (x * y) as f32 * 0.1));
    let preds: Vec<DepthMap> = (0..3).map(|k| target.downsample_nearest(1 << (2 - k))).collect();
    let loss = multi_scale_loss(&preds, &target, &LossConfig::default()).unwrap();
    assert_eq!(loss.total, 0.0);
}

#[test]
fn samples_are_reproducible_per_seed() {
    let scene = SyntheticScene::render(SceneSpec::two_planes(5, 1)).unwrap();
    let prior = scene.prior(0, PriorStyle::EXACT).unwrap();
    let pairs = scene.pair_list();
    let build = |seed| {
        build_training_sample(
            &scene.images[0],
            &prior,
            0,
            &scene.cameras,
            Some(&pairs),
            &SynthConfig::default(),
            &mut stream_rng(seed, 0),
        )
        .unwrap()
    };
    let (a, b, c) = (build(5), build(5), build(6));
    assert_eq!(a, b);
    assert_ne!(a.perturbation, c.perturbation);
    assert_eq!(a.source_ids.len(), 2);
    assert!(!a.source_ids.contains(&0));
}

/// Splats copy reference colors; fills copy a splat at most the fill radius away.
#[test]
fn warped_pixels_come_from_the_reference() {
    let scene = SyntheticScene::render(SceneSpec::two_planes(3, 2)).unwrap();
    let warp = forward_warp(&scene.images[0], &scene.depths[0], &scene.cameras[0], &scene.cameras[1]).unwrap();
    let colors: std::collections::HashSet<[u32; 3]> =
        scene.images[0].as_slice().iter().map(|c| c.map(f32::to_bits)).collect();
    let (w, h) = warp.image.dims();
    let r = HOLE_FILL_RADIUS;
    let (mut splats, mut fills) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            let state = *warp.mask.get(x, y);
            assert_eq!(state.is_valid(), warp.depth.is_valid(x, y));
            match state {
                SplatState::Empty => continue,
                SplatState::Splatted => splats += 1,
                SplatState::Filled => {
                    fills += 1;
                    let near_splat = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).any(|(dx, dy)| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        dx * dx + dy * dy <= r * r
                            && nx >= 0
                            && ny >= 0
                            && (nx as usize) < w
                            && (ny as usize) < h
                            && *warp.mask.get(nx as usize, ny as usize) == SplatState::Splatted
                    });
                    assert!(near_splat, "fill at ({x}, {y}) has no splat within the radius");
                }
            }
            assert!(colors.contains(&warp.image.get(x, y).map(f32::to_bits)));
        }
    }
    assert!(splats > w * h / 2, "{splats} splats");
    assert!(fills > 0);
}
