use proptest::prelude::*;
use ucgan::imaging::{bicubic_resize, degrade, high_pass, low_pass, replicate_pan, FilterSpec, Scale};
use ucgan::losses::{spatial_loss, spectral_loss, Pooling};
use ucgan::metrics::{ergas, q_index, sam, ssim};
use ucgan::tensor::{Shape, Tensor};

fn image(n: usize, c: usize, h: usize, w: usize, lo: f64, hi: f64) -> impl Strategy<Value = Tensor<f64>> {
    prop::collection::vec(lo..hi, n * c * h * w).prop_map(move |v| Tensor::from_vec(Shape::new(n, c, h, w), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resampling_preserves_constants(v in 0.0f64..2047.0, side in 1usize..5) {
        let up = Tensor::from_vec(Shape::new(1, 4, side * 4, side * 4), vec![v; 16 * side * side * 4]).unwrap();
        let down = bicubic_resize(&up, Scale::DOWN4).unwrap();
        prop_assert_eq!(down.shape(), Shape::new(1, 4, side, side));
        prop_assert!(down.data().iter().all(|x| (x - v).abs() < 1e-9));
        let back = bicubic_resize(&down, Scale::UP4).unwrap();
        prop_assert!(back.data().iter().all(|x| (x - v).abs() < 1e-9));
    }

    #[test]
    fn low_and_high_pass_sum_to_the_input(x in image(2, 4, 9, 7, -1.0, 1.0), size in prop::sample::select(vec![3usize, 5, 7])) {
        let spec = FilterSpec::boxed(size).unwrap();
        let lp = low_pass(&x, &spec).unwrap();
        let hp = high_pass(&x, &spec).unwrap();
        let sum: Vec<f64> = lp.data().iter().zip(hp.data()).map(|(a, b)| a + b).collect();
        prop_assert!(sum.iter().zip(x.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn degradation_quarters_each_side(x in image(1, 4, 16, 24, 0.0, 1.0)) {
        let d = degrade(&x, &FilterSpec::wald_gaussian()).unwrap();
        prop_assert_eq!(d.shape(), Shape::new(1, 4, 4, 6));
    }

    #[test]
    fn spatial_loss_vanishes_on_replicated_pan(pan in image(2, 1, 16, 16, 0.0, 1.0)) {
        let fused = replicate_pan(&pan).unwrap();
        for pool in [Pooling::Max, Pooling::Avg] {
            prop_assert_eq!(spatial_loss(&pan, &fused, &FilterSpec::averaging(), pool).unwrap().item(), 0.0);
        }
    }

    #[test]
    fn reconstruction_terms_are_non_negative(
        pan in image(1, 1, 16, 16, 0.0, 1.0),
        fused in image(1, 4, 16, 16, 0.0, 1.0),
        lrms in image(1, 4, 4, 4, 0.0, 1.0),
    ) {
        let f = FilterSpec::averaging();
        prop_assert!(spatial_loss(&pan, &fused, &f, Pooling::Max).unwrap().item() >= 0.0);
        prop_assert!(spectral_loss(&lrms, &fused, &f).unwrap().item() >= 0.0);
    }

    #[test]
    fn q_index_is_symmetric_and_scale_free(x in image(1, 2, 8, 8, 0.1, 1.0), y in image(1, 2, 8, 8, 0.1, 1.0), k in 0.5f64..4.0) {
        let a = q_index(&x, &y, 8).unwrap();
        prop_assert!((a - q_index(&y, &x, 8).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
        let scaled = |t: &Tensor<f64>| Tensor::from_vec(t.shape(), t.data().iter().map(|v| v * k).collect()).unwrap();
        prop_assert!((a - q_index(&scaled(&x), &scaled(&y), 8).unwrap()).abs() < 1e-9);
        prop_assert_eq!(q_index(&x, &x, 4).unwrap(), 1.0);
    }

    #[test]
    fn sam_ignores_per_pixel_gain(r in image(1, 4, 6, 6, 0.1, 1.0), f in image(1, 4, 6, 6, 0.1, 1.0), gains in prop::collection::vec(0.2f64..5.0, 36)) {
        let a = sam(&r, &f).unwrap();
        prop_assert!((0.0..=90.0).contains(&a));
        let mut g = f.data().to_vec();
        for (i, v) in g.iter_mut().enumerate() {
            *v *= gains[i % 36];
        }
        let b = sam(&r, &Tensor::from_vec(f.shape(), g).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn reference_metrics_stay_in_range(r in image(1, 4, 12, 12, 1.0, 2047.0), f in image(1, 4, 12, 12, 1.0, 2047.0)) {
        prop_assert!(ergas(&r, &f, 0.25).unwrap() >= 0.0);
        let s = ssim(&r, &f, 2047.0).unwrap();
        prop_assert!(s <= 1.0 && s >= -1.0);
    }
}
