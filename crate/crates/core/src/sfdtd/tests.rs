use super::engine::Simulation;
use super::*;
use crate::consts::{EPS0, MU0};

fn small_grid(cell: f64) -> Grid2D {
    Grid2D::new((-0.2, 0.2), (0.0, 0.4), cell).unwrap()
}

fn fast_settings() -> FdtdSettings {
    FdtdSettings {
        stencil: Stencil::Second,
        steps_per_period: 20,
        pml_cells: 10,
        window_periods: 2,
        ..FdtdSettings::default()
    }
}

/// Discrete energy at E^n, bracketed by H^{n-1/2} and H^{n+1/2}.
fn energy(sim: &Simulation<f64>, e_n: &[f64], hx_prev: &[f64], hz_prev: &[f64]) -> f64 {
    let we: f64 = e_n.iter().map(|v| v * v).sum::<f64>() * 0.5 * EPS0;
    let wm: f64 = (0..sim.mean.hx.len())
        .map(|i| hx_prev[i] * sim.mean.hx[i] + hz_prev[i] * sim.mean.hz[i])
        .sum::<f64>()
        * 0.5
        * MU0;
    (we + wm) * sim.h * sim.h
}

#[test]
fn closed_pec_box_conserves_discrete_energy() {
    let grid = Grid2D::new((0.0, 0.16), (0.0, 0.2), 0.004).unwrap();
    let settings = FdtdSettings {
        pml_cells: 0,
        ..fast_settings()
    };
    let src = SourceSpec::carrier(0.06, 0.07);
    let mut sim = Simulation::<f64>::new(&grid, &src, &settings, None, false).unwrap();
    for it in 1..sim.nxt - 1 {
        for kt in 1..sim.nzt - 1 {
            let x = it as f64 / (sim.nxt - 1) as f64;
            let z = kt as f64 / (sim.nzt - 1) as f64;
            sim.mean.e[it * sim.nzt + kt] =
                (PI * x).sin() * (2.0 * PI * z).sin() + 0.3 * (3.0 * PI * x).sin() * (PI * z).sin();
        }
    }
    let mut reference = None;
    for step in 0..1000 {
        let e_n = sim.mean.e.clone();
        let (hx_prev, hz_prev) = (sim.mean.hx.clone(), sim.mean.hz.clone());
        sim.step(0, 0.0);
        let w = energy(&sim, &e_n, &hx_prev, &hz_prev);
        let r = *reference.get_or_insert(w);
        assert!(((w - r) / r).abs() < 1e-6, "step {step}: {w} vs {r}");
    }
}

#[test]
fn zero_variance_gives_identically_zero_std() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let probes = [(0.0, 0.3), (0.1, 0.25)];
    let fs = run_sfdtd(&grid, &src, 12, &probes, &fast_settings()).unwrap();
    assert!(fs.std.iter().all(|&s| s == 0.0));
    assert!(fs.mean.iter().any(|&m| m != 0.0));
}

#[test]
fn sfdtd_std_is_nonnegative_with_a_stochastic_slab() {
    let grid = small_grid(0.004);
    let mut spec = WallSpec::dielectric();
    spec.x_range = (-0.2, 0.2);
    spec.z_range = (0.2, 0.28);
    let grid = build_wall(&grid, &spec).unwrap();
    let src = SourceSpec::carrier(0.0, 0.1);
    let probes = [(0.0, 0.35), (0.05, 0.33)];
    let fs = run_sfdtd(&grid, &src, 16, &probes, &fast_settings()).unwrap();
    assert!(fs.std.iter().all(|&s| s >= 0.0));
    assert!(fs.std.iter().any(|&s| s > 0.0));
}

#[test]
fn monte_carlo_rejects_a_single_run() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let err = run_monte_carlo(&grid, &src, 12, &[(0.0, 0.3)], 1, 7, &fast_settings());
    assert!(matches!(err, Err(FdtdError::TooFewRuns(1))));
}

#[test]
fn monte_carlo_without_variance_matches_deterministic_run() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let probes = [(0.0, 0.3)];
    let s = fast_settings();
    let det = run_fdtd(&grid, &src, 12, &probes, &s).unwrap();
    let mc = run_monte_carlo(&grid, &src, 12, &probes, 5, 3, &s).unwrap();
    assert!(mc.std.iter().all(|&v| v == 0.0));
    for (a, b) in det.mean.iter().zip(&mc.mean) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-30));
    }
}

#[test]
fn courant_violation_is_rejected() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let s = FdtdSettings {
        steps_per_period: 8,
        ..fast_settings()
    };
    let err = run_fdtd(&grid, &src, 12, &[(0.0, 0.3)], &s);
    assert!(matches!(err, Err(FdtdError::Courant { .. })));
}

#[test]
fn runaway_field_aborts_with_diagnostic() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let s = FdtdSettings {
        instability_factor: 1e-9,
        ..fast_settings()
    };
    let err = run_fdtd(&grid, &src, 12, &[(0.0, 0.3)], &s).unwrap_err();
    assert!(matches!(err, FdtdError::Unstable { .. }), "{err}");
    assert!(err.to_string().contains("unstable"));
}

#[test]
fn thin_pml_is_rejected() {
    let grid = small_grid(0.004);
    let src = SourceSpec::carrier(0.0, 0.1);
    let s = FdtdSettings {
        pml_cells: 6,
        ..fast_settings()
    };
    assert!(matches!(
        run_fdtd(&grid, &src, 12, &[(0.0, 0.3)], &s),
        Err(FdtdError::PmlTooThin { cells: 6 })
    ));
}

#[test]
fn source_above_wall_is_rejected() {
    let grid = build_wall(&small_grid(0.004), &{
        let mut w = WallSpec::dielectric();
        w.x_range = (-0.2, 0.2);
        w.z_range = (0.2, 0.28);
        w
    })
    .unwrap();
    let src = SourceSpec::carrier(0.0, 0.3);
    assert!(matches!(
        run_fdtd(&grid, &src, 12, &[(0.0, 0.35)], &fast_settings()),
        Err(FdtdError::SourcePlacement { .. })
    ));
}

#[test]
fn fourth_order_scheme_has_smaller_dispersion_than_yee() {
    let h = Grid2D::cell_for(CARRIER_HZ, 16.0);
    let yee = mean_spatial_dispersion(h, CARRIER_HZ, Stencil::Second);
    let fourth = mean_spatial_dispersion(h, CARRIER_HZ, Stencil::Fourth);
    assert!(yee > 0.0 && fourth > 0.0);
    assert!(fourth < 0.1 * yee);
}

#[test]
fn raised_cosine_ramp_reaches_full_amplitude() {
    let src = SourceSpec::carrier(0.0, 0.5);
    let t_ramp = 5.0 / CARRIER_HZ;
    assert_eq!(src.current(0.0), 0.0);
    let quarter = 0.25 / CARRIER_HZ;
    assert!((src.current(t_ramp + quarter) - 1.0).abs() < 1e-9);
    assert!(src.current(0.5 * quarter).abs() < 2e-3);
    let _ = EPS0;
}
