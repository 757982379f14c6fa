use super::*;
use crate::channel::{ProbeLattice, TransferBank};
use crate::target::{static_pose, BodyPart, ScattererTrack, StaticPose, SubjectParams};
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single scatterer following `pos(t)`.
fn point_track(n: usize, fs: f64, sigma: f64, pos: impl Fn(f64) -> [f64; 3]) -> ScattererTrack {
    ScattererTrack {
        parts: vec![BodyPart::Torso],
        fs,
        n_samples: n,
        positions: (0..n).map(|j| pos(j as f64 / fs)).collect(),
        reflectivity: vec![sigma; n],
    }
}

fn free() -> Propagation<'static> {
    Propagation::FreeSpace { frequency: NARROWBAND_HZ }
}

#[test]
fn array_geometry() {
    let a = PlanarArray::narrowband();
    assert!((a.spacing - 0.019986).abs() < 1e-5);
    let e0 = a.element(0, 0);
    let e9 = a.element(9, 9);
    assert!((e9[0] - e0[0] - 9.0 * a.spacing).abs() < 1e-12);
    assert!((e0[0] + e9[0]).abs() < 1e-12);
    assert!((e0[1] + e9[1] - 2.0 * a.centre[1]).abs() < 1e-12);
    assert_eq!(a.columns().len(), 10);
}

#[test]
fn static_point_matches_two_way_green() {
    let a = PlanarArray::narrowband();
    let p = [0.3, 1.2, 2.4];
    let cube = synth_narrowband(&point_track(50, 1000.0, 4.0, |_| p), &a, &free()).unwrap();
    let k = 2.0 * PI * NARROWBAND_HZ / crate::consts::C0;
    for m in 0..10 {
        for n in 0..10 {
            let e = a.element(m, n);
            let d = ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2) + (p[2] - e[2]).powi(2)).sqrt();
            let want = c((2.0 * k * d).cos(), -(2.0 * k * d).sin()) * (2.0 / (16.0 * PI * PI * d * d));
            let s = cube.series(m, n);
            for v in s {
                assert!((v - want).norm() < 1e-12 * want.norm());
                assert!((v - s[0]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_reflectivity_gives_zero_cube() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&point_track(20, 1000.0, 0.0, |_| [0.0, 1.0, 2.0]), &a, &free()).unwrap();
    assert!(cube.data.iter().all(|v| *v == c(0.0, 0.0)));
    let imgs = doppler_frontal_image(&RawCube { n_samples: 20, ..cube }, &ImagingParams { cpi: 10, ..ImagingParams::narrowband() }).unwrap();
    assert_eq!(imgs.len(), 2);
    assert!(imgs.iter().all(|im| im.peak() == 0.0));
}

#[test]
fn outside_channel_names_scatterer_and_sample() {
    let a = PlanarArray::narrowband();
    let bank = TransferBank::free_space(ProbeLattice::target_zone(), NARROWBAND_HZ, &a.columns());
    let field = bank.ratio_field(&bank.mean).unwrap();
    let track = point_track(10, 1000.0, 1.0, |t| [0.0, 1.0, 3.0 + 100.0 * t]);
    match synth_narrowband(&track, &a, &Propagation::Channel(&field)) {
        Err(RadarError::Channel { scatterer: 0, sample, .. }) => assert_eq!(sample, 6),
        other => panic!("{other:?}"),
    }
    let wrong = TransferBank::free_space(ProbeLattice::target_zone(), NARROWBAND_HZ, &a.columns()[..4]);
    let wf = wrong.ratio_field(&wrong.mean).unwrap();
    assert!(matches!(synth_narrowband(&track, &a, &Propagation::Channel(&wf)), Err(RadarError::Sources { .. })));
}

#[test]
fn free_space_bank_matches_analytic_path() {
    let a = PlanarArray::narrowband();
    let bank = TransferBank::free_space(ProbeLattice::target_zone(), NARROWBAND_HZ, &a.columns());
    let field = bank.ratio_field(&bank.mean).unwrap();
    let track = point_track(30, 1000.0, 1.0, |t| [0.1 - t, 1.3, 2.53 + t]);
    let x = synth_narrowband(&track, &a, &Propagation::Channel(&field)).unwrap();
    let y = synth_narrowband(&track, &a, &free()).unwrap();
    for (u, v) in x.data.iter().zip(&y.data) {
        assert!((u - v).norm() < 1e-9 * v.norm());
    }
}

/// Scatterer at azimuth `az` (deg), boresight elevation, range `r` from the
/// array centre, approaching at `v`.
fn mover(a: &PlanarArray, az: f64, r: f64, v: f64, n: usize) -> ScattererTrack {
    let (s, co) = az.to_radians().sin_cos();
    let ctr = a.centre;
    point_track(n, 1000.0, 1.0, move |t| {
        let rr = r - v * t;
        [ctr[0] + rr * s, ctr[1], ctr[2] + rr * co]
    })
}

#[test]
fn radial_mover_lands_in_its_doppler_bin_and_direction() {
    let a = PlanarArray::narrowband();
    let v = 1.0;
    let cube = synth_narrowband(&mover(&a, 10.0, 2.0, v, 100), &a, &free()).unwrap();
    let spec = doppler_spectrum(&cube, 0, 100, (92, 92)).unwrap();
    let (q, i, j) = spec.peak(true);
    let fd = 2.0 * v * NARROWBAND_HZ / crate::consts::C0;
    assert!((spec.doppler_hz(q) - fd).abs() <= 10.0, "{} vs {fd}", spec.doppler_hz(q));
    let img = &doppler_frontal_image(&cube, &ImagingParams::narrowband()).unwrap()[0];
    assert_eq!(img.argmax(), (i, j));
    assert!((img.az_deg[i] - 10.0).abs() <= 10.0, "az {}", img.az_deg[i]);
    assert!(img.el_deg[j].abs() <= 10.0);
}

#[test]
fn receding_mover_has_negative_doppler() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&mover(&a, -15.0, 2.0, -2.0, 100), &a, &free()).unwrap();
    let spec = doppler_spectrum(&cube, 0, 100, (92, 92)).unwrap();
    let (q, i, _) = spec.peak(true);
    assert!((spec.doppler_hz(q) + 100.0).abs() <= 10.0);
    let az = (a.bin_sine(ApertureFft::signed_bin(i, 92) as f64, 92, NARROWBAND_HZ)).asin().to_degrees();
    assert!((az + 15.0).abs() <= 10.0);
}

#[test]
fn zero_doppler_notch_removes_static_scene() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&point_track(100, 1000.0, 1.0, |_| [0.2, 1.0, 2.0]), &a, &free()).unwrap();
    let img = doppler_frontal_image_raw(&cube, &ImagingParams::narrowband()).unwrap();
    let ref_peak = cube.energy().sqrt();
    assert!(img[0].peak() < 1e-9 * ref_peak);
}

#[test]
fn cpi_validation() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&point_track(50, 1000.0, 1.0, |_| [0.0, 1.0, 2.0]), &a, &free()).unwrap();
    let p = |cpi| ImagingParams { cpi, ..ImagingParams::narrowband() };
    assert!(matches!(doppler_frontal_image(&cube, &p(100)), Err(RadarError::Cpi { .. })));
    assert!(matches!(doppler_frontal_image(&cube, &p(4)), Err(RadarError::Cpi { .. })));
    assert_eq!(doppler_frontal_image(&cube, &p(25)).unwrap().len(), 2);
}

#[test]
fn doppler_image_is_positively_homogeneous() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&mover(&a, 5.0, 2.2, 1.5, 100), &a, &free()).unwrap();
    let params = ImagingParams::narrowband();
    let base = doppler_frontal_image_raw(&cube, &params).unwrap().remove(0);
    let mut scaled = cube.clone();
    scaled.scale(37.5);
    let s = doppler_frontal_image_raw(&scaled, &params).unwrap().remove(0);
    for (x, y) in base.pixels.iter().zip(&s.pixels) {
        assert!((37.5 * x - y).abs() <= 1e-9 * (37.5 * base.peak()));
    }
    let n0 = base.normalized();
    let n1 = s.normalized();
    for (x, y) in n0.pixels.iter().zip(&n1.pixels) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn aperture_transform_obeys_parseval() {
    let mut planner = rustfft::FftPlanner::new();
    let mut ap = ApertureFft::new((92, 92), &mut planner);
    let input: Vec<Complex64> = (0..100).map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos())).collect();
    let mut out = vec![c(0.0, 0.0); 92 * 92];
    ap.transform(10, 10, |m, n| input[m * 10 + n], &mut out);
    let e_in: f64 = input.iter().map(|v| v.norm_sqr()).sum();
    let e_out: f64 = out.iter().map(|v| v.norm_sqr()).sum();
    assert!((e_out / (92.0 * 92.0) - e_in).abs() < 1e-10 * e_in);
}

#[test]
fn doppler_spectrum_obeys_parseval() {
    let a = PlanarArray::narrowband();
    let cube = synth_narrowband(&mover(&a, 0.0, 2.0, 0.7, 64), &a, &free()).unwrap();
    let spec = doppler_spectrum(&cube, 0, 64, (92, 92)).unwrap();
    let e_in = cube.energy();
    let e_out: f64 = spec.values.iter().map(|v| v.norm_sqr()).sum();
    assert!((e_out / (64.0 * 92.0 * 92.0) - e_in).abs() < 1e-10 * e_in);
}

#[test]
fn wideband_range_profile_obeys_parseval() {
    let a = PlanarArray::wideband();
    let pose = single(&[0.0, 0.9, 2.0]);
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let cube = synth_wideband(&pose, &a, &freqs, None).unwrap();
    let prof = range_profile(&cube, 1, 2).unwrap();
    let e_in: f64 = cube.series(1, 2).iter().map(|v| v.norm_sqr()).sum();
    let e_out: f64 = prof.iter().map(|v| v.norm_sqr()).sum();
    assert!((e_out / 256.0 - e_in).abs() < 1e-10 * e_in);
}

fn single(p: &[f64; 3]) -> StaticPose {
    StaticPose { parts: vec![BodyPart::Torso], positions: vec![*p], reflectivity: vec![1.0], orientation_deg: 0.0 }
}

#[test]
fn wideband_point_range_gate() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let df = freqs[1] - freqs[0];
    let bin = crate::consts::C0 / (2.0 * 256.0 * df);
    for r in [1.5, 2.0, 3.1] {
        let cube = synth_wideband(&single(&[0.0, 0.9, r]), &a, &freqs, None).unwrap();
        let prof = range_profile(&cube, 0, 0).unwrap();
        let (g, _) = prof.iter().enumerate().fold((0, 0.0), |b, (i, v)| if v.norm() > b.1 { (i, v.norm()) } else { b });
        let d = {
            let e = a.element(0, 0);
            ((e[0]).powi(2) + (0.9 - e[1]).powi(2) + r * r).sqrt()
        };
        assert!((g as f64 * bin - d).abs() <= bin, "gate {g} for {d} m");
    }
}

#[test]
fn wideband_point_direction() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let (az, el) = (12.0f64, -8.0f64);
    let r = 2.0;
    let p = [r * az.to_radians().sin(), 0.9 + r * el.to_radians().sin(), r * az.to_radians().cos()];
    let cube = synth_wideband(&single(&p), &a, &freqs, None).unwrap();
    let img = range_frontal_image(&cube, &ImagingParams::wideband()).unwrap();
    assert_eq!(img.dims(), (91, 37));
    let (i, j) = img.argmax();
    // beamwidth of a 4-element aperture is about 29 degrees
    assert!((img.az_deg[i] - az).abs() <= 14.5, "az {}", img.az_deg[i]);
    assert!((img.el_deg[j] - el).abs() <= 14.5, "el {}", img.el_deg[j]);
    assert!((img.peak() - 1.0).abs() < 1e-12);
}

#[test]
fn coherent_gate_sum_adds_targets_along_one_direction() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let params = ImagingParams::wideband();
    let near = single(&[0.0, 0.9, 1.8]);
    // whole number of centre wavelengths of extra round trip: the two add in phase
    let far_z = 1.8 + 36.0 * crate::consts::C0 / (2.0 * WIDEBAND_CENTRE_HZ);
    let far = StaticPose { positions: vec![[0.0, 0.9, far_z]], ..near.clone() };
    let both = StaticPose {
        parts: vec![BodyPart::Torso, BodyPart::Head],
        positions: vec![near.positions[0], far.positions[0]],
        reflectivity: vec![1.0, 1.0],
        orientation_deg: 0.0,
    };
    let img = |p: &StaticPose| range_frontal_image_raw(&synth_wideband(p, &a, &freqs, None).unwrap(), &params).unwrap();
    let (a1, a2, ab) = (img(&near), img(&far), img(&both));
    assert_eq!(ab.argmax(), a1.argmax());
    assert!(ab.peak() > a1.peak().max(a2.peak()));
}

#[test]
fn empty_pose_gives_zero_cube() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 64);
    let cube = synth_wideband(&StaticPose::empty(), &a, &freqs, None).unwrap();
    assert!(cube.data.iter().all(|v| v.norm() == 0.0));
    assert!(matches!(synth_wideband(&StaticPose::empty(), &a, &freqs[..63], None), Err(RadarError::Frequencies { .. })));
}

#[test]
fn glass_attenuates_by_band_averaged_transmission() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let params = ImagingParams::wideband();
    let pose = single(&[0.0, 0.9, 2.0]);
    let glass = SlabSpec { front_echo: false, ..SlabSpec::glass() };
    let free_img = range_frontal_image_raw(&synth_wideband(&pose, &a, &freqs, None).unwrap(), &params).unwrap();
    let wall_img = range_frontal_image_raw(&synth_wideband(&pose, &a, &freqs, Some(&glass)).unwrap(), &params).unwrap();
    let t2: Vec<f64> = freqs.iter().map(|&f| slab_transmission(f, &glass, 0.0).norm_sqr()).collect();
    let (lo, hi) = t2.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let ratio = wall_img.peak() / free_img.peak();
    assert!(ratio > lo && ratio < hi, "ratio {ratio} outside [{lo}, {hi}]");
    // the coherent gate sum weights the band around its centre
    let centre = slab_transmission(WIDEBAND_CENTRE_HZ, &glass, 0.0).norm_sqr();
    assert!((ratio / centre - 1.0).abs() < 0.05, "ratio {ratio}, |T(fc)|^2 {centre}");
}

#[test]
fn scatterer_in_front_of_wall_is_rejected() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 64);
    assert!(matches!(
        synth_wideband(&single(&[0.0, 0.9, 0.5]), &a, &freqs, Some(&SlabSpec::wood())),
        Err(RadarError::Slab(_))
    ));
}

#[test]
fn default_pose_shows_body_and_reflectors() {
    let a = PlanarArray::wideband();
    let freqs = stepped_frequencies(3.3e9, 10.3e9, 256);
    let pose = static_pose(&SubjectParams::default(), 0.0).unwrap();
    let img = range_frontal_image(&synth_wideband(&pose, &a, &freqs, None).unwrap(), &ImagingParams::wideband()).unwrap();
    let at = |x: [f64; 3]| {
        let d = ((x[0] - a.centre[0]).powi(2) + (x[1] - a.centre[1]).powi(2) + (x[2] - a.centre[2]).powi(2)).sqrt();
        let az = ((x[0] - a.centre[0]) / d).asin().to_degrees();
        let el = ((x[1] - a.centre[1]) / d).asin().to_degrees();
        let i = (0..img.n_az).min_by(|&p, &q| (img.az_deg[p] - az).abs().total_cmp(&(img.az_deg[q] - az).abs())).unwrap();
        let j = (0..img.n_el).min_by(|&p, &q| (img.el_deg[p] - el).abs().total_cmp(&(img.el_deg[q] - el).abs())).unwrap();
        img.get(i, j)
    };
    for part in [BodyPart::ReflectorLeft, BodyPart::ReflectorRight, BodyPart::Torso] {
        let v = at(pose.position_of(part).unwrap());
        assert!(v > 0.2, "{part:?} pixel {v}");
    }
}

/// Impedance recursion from the back of the stack, tracking the voltage
/// transfer through each layer.
fn impedance_oracle(f: f64, slab: &SlabSpec, theta: f64) -> (Complex64, Complex64) {
    let k0 = 2.0 * PI * f / crate::consts::C0;
    let w = 2.0 * PI * f;
    let s2 = theta.sin().powi(2);
    let z0 = c(1.0 / theta.cos(), 0.0);
    let mut zl = z0;
    let mut gain = c(1.0, 0.0);
    for l in slab.layers.iter().rev() {
        let eps = c(l.eps_r, -l.sigma / (w * crate::consts::EPS0));
        let kz = (eps - s2).sqrt();
        let zj = 1.0 / kz;
        let delta = kz * k0 * l.thickness;
        let gl = (zl - zj) / (zl + zj);
        let e = (-Complex64::i() * delta).exp();
        gain *= (1.0 + gl) * e / (1.0 + gl * e * e);
        let tan = delta.tan();
        zl = zj * (zl + Complex64::i() * zj * tan) / (zj + Complex64::i() * zl * tan);
    }
    let r = (zl - z0) / (zl + z0);
    let total: f64 = slab.layers.iter().map(|l| l.thickness).sum();
    (gain * (1.0 + r) * Complex64::from_polar(1.0, k0 * total * theta.cos()), r)
}

#[test]
fn slab_limits() {
    let zero = SlabSpec::single(0.0, 4.0, 0.1);
    assert!((slab_transmission(5e9, &zero, 0.3) - c(1.0, 0.0)).norm() < 1e-14);
    let air = SlabSpec::single(0.07, 1.0, 0.0);
    for th in [0.0, 0.4, 1.0] {
        assert!((slab_transmission(7e9, &air, th) - c(1.0, 0.0)).norm() < 1e-12);
        assert!(slab_reflection(7e9, &air, th).norm() < 1e-12);
    }
    let f = 6e9;
    let eps: f64 = 4.0;
    let half = crate::consts::C0 / f / eps.sqrt() / 2.0;
    let t = slab_transmission(f, &SlabSpec::single(half, eps, 0.0), 0.0);
    assert!((t.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn lossless_slab_conserves_power() {
    let s = SlabSpec::single(0.021, 6.5, 0.0);
    for f in [3.3e9, 5e9, 8.7e9] {
        for th in [0.0, 0.5] {
            let t = slab_transmission(f, &s, th).norm_sqr();
            let r = slab_reflection(f, &s, th).norm_sqr();
            assert!((t + r - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn transfer_matrix_matches_impedance_recursion(
        layers in prop::collection::vec((0.001f64..0.05, 1.0f64..9.0, 0.0f64..0.2), 1..4),
        f in 3e9f64..11e9,
        theta in 0.0f64..1.2,
    ) {
        let slab = SlabSpec {
            layers: layers.iter().map(|&(thickness, eps_r, sigma)| SlabLayer { thickness, eps_r, sigma }).collect(),
            distance: 1.0,
            front_echo: true,
        };
        let (t, r) = impedance_oracle(f, &slab, theta);
        prop_assert!((slab_transmission(f, &slab, theta) - t).norm() < 1e-9);
        prop_assert!((slab_reflection(f, &slab, theta) - r).norm() < 1e-9);
    }
}

