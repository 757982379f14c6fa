use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use throughwall::arraystore::{read_array, write_array, DenseArray};
use throughwall::channel::{sample_values, SampleMode};
use throughwall::dae::{objective, solve_w1, solve_w2, solve_z, MappingFn};
use throughwall::image::FrontalImage;
use throughwall::metrics::{group_correlation, nmse, ssim, SsimParams};
use throughwall::radarsim::{doppler_frontal_image, doppler_frontal_image_raw, synth_narrowband, ImagingParams, PlanarArray, Propagation};
use throughwall::target::{BodyPart, ScattererTrack};

fn pixels(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

fn image(n: usize, m: usize, px: Vec<f64>) -> FrontalImage {
    FrontalImage::from_pixels(n, m, px).unwrap()
}

fn matrix(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_iterator(rows, cols, v.iter().copied().cycle().take(rows * cols))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn array_files_round_trip(
        shape in prop::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
        complex in any::<bool>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let a = if complex {
            DenseArray::complex(shape, "c", (0..n).map(|_| Complex64::new(rng.gen(), rng.gen::<f64>() * -1e5)).collect())
        } else {
            DenseArray::real(shape, "r", (0..n).map(|_| rng.gen::<f64>() * 1e-3 - 7.0).collect())
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.arr");
        write_array(&p, &a).unwrap();
        prop_assert_eq!(read_array(&p).unwrap(), a);
    }

    #[test]
    fn ssim_is_symmetric_and_at_most_one(a in pixels(24 * 20), b in pixels(24 * 20)) {
        let p = SsimParams::default();
        let (a, b) = (image(24, 20, a), image(24, 20, b));
        let ab = ssim(&a, &b, &p).unwrap();
        prop_assert!((ab - ssim(&b, &a, &p).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmse_scale_law(a in pixels(64), alpha in 0.0f64..3.0) {
        prop_assume!(a.iter().any(|&v| v > 1e-3));
        let r = image(8, 8, a.clone());
        let t = image(8, 8, a.iter().map(|v| alpha * v).collect());
        prop_assert!((nmse(&r, &t).unwrap() - (1.0 - alpha).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn group_correlation_ignores_affine_rescaling(
        frames in prop::collection::vec(pixels(30), 2..5),
        a in 0.1f64..10.0,
        b in 0.0f64..2.0,
        which in 0usize..5,
    ) {
        let ims: Vec<FrontalImage> = frames.iter().map(|f| image(6, 5, f.clone())).collect();
        let base = group_correlation(&ims).unwrap();
        let mut scaled = ims.clone();
        let k = which % scaled.len();
        scaled[k] = image(6, 5, frames[k].iter().map(|v| a * v + b).collect());
        prop_assert!((group_correlation(&scaled).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn zero_deviation_realisation_is_the_mean(
        re in prop::collection::vec(-1.0f64..1.0, 1..40),
        seed in any::<u64>(),
        iid in any::<bool>(),
    ) {
        let mean: Vec<Complex64> = re.iter().map(|&r| Complex64::new(r, 0.5 - r)).collect();
        let std = vec![0.0; mean.len()];
        let mode = if iid { SampleMode::Iid } else { SampleMode::Coherent };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(sample_values(&mean, &std, &mut rng, mode), mean);
    }

    #[test]
    fn mapping_round_trip(x in -5.0f64..5.0) {
        for phi in MappingFn::ALL {
            let y = phi.forward(x);
            let (lo, hi) = phi.invertible_range();
            prop_assume!(y > lo && y < hi);
            prop_assert!((phi.inverse(y).0 - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn block_solves_never_raise_the_objective(
        v in prop::collection::vec(-1.0f64..1.0, 97),
        which in 0usize..3,
        lambda in 0.1f64..5.0,
    ) {
        let phi = MappingFn::ALL[which];
        let (n, m, r) = (12, 9, 4);
        let y = matrix(n, m, &v);
        let yhat = matrix(n, m, &v[7..]) + &y * 0.5;
        let w1 = matrix(r, n, &v[13..]) * 0.3;
        let w2 = matrix(n, r, &v[29..]);
        let z = phi.apply(&matrix(r, m, &v[41..]));
        let before = objective(&y, &yhat, &w1, &w2, &z, lambda, phi);
        let tol = 1e-9 * before.abs().max(1e-12);

        let z_new = solve_z(&y, &yhat, &w1, &w2, lambda, phi).unwrap();
        prop_assert!(objective(&y, &yhat, &w1, &w2, &z_new, lambda, phi) <= before + tol);
        let w2_new = solve_w2(&y, &z, 0.0).unwrap();
        prop_assert!(objective(&y, &yhat, &w1, &w2_new, &z, lambda, phi) <= before + tol);
        if phi == MappingFn::Linear {
            let (w1_new, _) = solve_w1(&z, &yhat, phi, 0.0).unwrap();
            prop_assert!(objective(&y, &yhat, &w1_new, &w2, &z, lambda, phi) <= before + tol);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn doppler_image_is_positively_homogeneous(alpha in 0.01f64..100.0, v in 0.3f64..1.5, x in -0.4f64..0.4) {
        let array = PlanarArray::narrowband();
        let c = array.centre;
        let n = 100;
        let track = ScattererTrack {
            parts: vec![BodyPart::Torso, BodyPart::Head],
            fs: 1000.0,
            n_samples: n,
            positions: (0..n)
                .flat_map(|j| {
                    let t = j as f64 / 1000.0;
                    [[c[0] + x, c[1], c[2] + 2.0 - v * t], [c[0] - 0.2, c[1] + 0.6, c[2] + 2.2]]
                })
                .collect(),
            reflectivity: vec![1.0, 0.3].repeat(n),
        };
        let prop = Propagation::FreeSpace { frequency: array.design_frequency };
        let cube = synth_narrowband(&track, &array, &prop).unwrap();
        let mut scaled = cube.clone();
        scaled.scale(alpha);
        let params = ImagingParams { cpi: n, ..ImagingParams::narrowband() };
        let a = &doppler_frontal_image_raw(&cube, &params).unwrap()[0];
        let b = &doppler_frontal_image_raw(&scaled, &params).unwrap()[0];
        let peak = a.peak();
        for i in 0..a.dims().0 {
            for j in 0..a.dims().1 {
                prop_assert!((alpha * a.get(i, j) - b.get(i, j)).abs() <= 1e-9 * alpha * peak);
            }
        }
        let na = &doppler_frontal_image(&cube, &params).unwrap()[0];
        let nb = &doppler_frontal_image(&scaled, &params).unwrap()[0];
        prop_assert!(nmse(na, nb).unwrap() < 1e-20);
    }
}
