use serde::{Deserialize, Serialize};

use super::{FdtdError, Grid2D};

/// Internal structure of a wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WallKind {
    Dielectric,
    /// Periodic PEC rods along the wall mid-plane.
    Reinforced { rod_pitch: f64, rod_radius: f64 },
    /// Full-thickness air cavities every pitch, one of them at the wall middle.
    Airgap { gap_width: f64, gap_pitch: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    #[serde(flatten)]
    pub kind: WallKind,
    pub x_range: (f64, f64),
    pub z_range: (f64, f64),
    pub eps_r: f64,
    /// Conductivity in S/m.
    pub sigma: f64,
    pub eps_rel_std: f64,
    pub sigma_rel_std: f64,
}

impl WallSpec {
    fn base(kind: WallKind) -> Self {
        Self {
            kind,
            x_range: (-1.0, 1.0),
            z_range: (1.0, 1.3),
            eps_r: 6.0,
            sigma: 0.022,
            eps_rel_std: 0.1,
            sigma_rel_std: 0.1,
        }
    }

    pub fn dielectric() -> Self {
        Self::base(WallKind::Dielectric)
    }

    pub fn reinforced() -> Self {
        Self::base(WallKind::Reinforced {
            rod_pitch: 0.2,
            rod_radius: 0.01,
        })
    }

    pub fn airgap() -> Self {
        Self::base(WallKind::Airgap {
            gap_width: 0.1,
            gap_pitch: 0.3,
        })
    }

    pub fn thickness(&self) -> f64 {
        self.z_range.1 - self.z_range.0
    }

    pub fn width(&self) -> f64 {
        self.x_range.1 - self.x_range.0
    }

    pub fn deterministic(mut self) -> Self {
        self.eps_rel_std = 0.0;
        self.sigma_rel_std = 0.0;
        self
    }
}

/// Rasterise a wall into a copy of `grid`.
pub fn build_wall(grid: &Grid2D, spec: &WallSpec) -> Result<Grid2D, FdtdError> {
    let h = grid.cell;
    let (x0, x1) = spec.x_range;
    let (z0, z1) = spec.z_range;
    let slack = 0.5 * h;
    if x0 < grid.x_min - slack
        || x1 > grid.x_max() + slack
        || z0 < grid.z_min - slack
        || z1 > grid.z_max() + slack
        || x1 <= x0
        || z1 <= z0
    {
        return Err(FdtdError::WallOutsideGrid {
            x: spec.x_range,
            z: spec.z_range,
        });
    }
    if spec.eps_r < 1.0 || spec.sigma < 0.0 || spec.eps_rel_std < 0.0 || spec.sigma_rel_std < 0.0 {
        return Err(FdtdError::InvalidGrid(format!("wall material {spec:?}")));
    }
    match spec.kind {
        WallKind::Reinforced {
            rod_pitch,
            rod_radius,
        } => {
            if rod_pitch < 2.0 * h {
                return Err(FdtdError::RodSpacing {
                    pitch: rod_pitch,
                    cell: h,
                });
            }
            if rod_radius <= 0.0 || 2.0 * rod_radius >= rod_pitch {
                return Err(FdtdError::InvalidGrid(format!("rod radius {rod_radius} m")));
            }
        }
        WallKind::Airgap {
            gap_width,
            gap_pitch,
        } => {
            if gap_width <= 0.0 || gap_width >= gap_pitch {
                return Err(FdtdError::InvalidGrid(format!(
                    "air gap {gap_width} m at pitch {gap_pitch} m"
                )));
            }
        }
        WallKind::Dielectric => {}
    }

    let mut out = grid.clone();
    let (i0, i1) = Grid2D::span(grid.x_min, h, grid.nx, x0, x1);
    let (k0, k1) = Grid2D::span(grid.z_min, h, grid.nz, z0, z1);
    let z_mid = 0.5 * (z0 + z1);
    for i in i0..i1 {
        let x = grid.x(i);
        for k in k0..k1 {
            let z = grid.z(k);
            let idx = grid.index(i, k);
            let (pec, air) = match spec.kind {
                WallKind::Dielectric => (false, false),
                WallKind::Reinforced {
                    rod_pitch,
                    rod_radius,
                } => {
                    // rods centred at x0 + pitch/2 + j*pitch
                    let u = (x - x0 - 0.5 * rod_pitch) / rod_pitch;
                    let dx = (u - u.round()) * rod_pitch;
                    let j = u.round();
                    let centre = x0 + 0.5 * rod_pitch + j * rod_pitch;
                    let inside_row = j >= 0.0 && centre < x1;
                    let dz = z - z_mid;
                    (inside_row && dx * dx + dz * dz <= rod_radius * rod_radius, false)
                }
                WallKind::Airgap {
                    gap_width,
                    gap_pitch,
                } => {
                    // gaps centred on the wall middle and every pitch from it
                    let d = (x - 0.5 * (x0 + x1) + 0.5 * gap_pitch).rem_euclid(gap_pitch) - 0.5 * gap_pitch;
                    (false, d.abs() < 0.5 * gap_width - 1e-9 * h)
                }
            };
            if pec {
                out.pec[idx] = true;
                out.eps_r[idx] = 1.0;
                out.sigma[idx] = 0.0;
                out.eps_std[idx] = 0.0;
                out.sigma_std[idx] = 0.0;
            } else if air {
                out.pec[idx] = false;
                out.eps_r[idx] = 1.0;
                out.sigma[idx] = 0.0;
                out.eps_std[idx] = 0.0;
                out.sigma_std[idx] = 0.0;
            } else {
                out.pec[idx] = false;
                out.eps_r[idx] = spec.eps_r;
                out.sigma[idx] = spec.sigma;
                out.eps_std[idx] = spec.eps_rel_std * spec.eps_r;
                out.sigma_std[idx] = spec.sigma_rel_std * spec.sigma;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4mm() -> Grid2D {
        Grid2D::room(0.004).unwrap()
    }

    fn count(grid: &Grid2D, pred: impl Fn(usize) -> bool) -> usize {
        (0..grid.nx * grid.nz).filter(|&i| pred(i)).count()
    }

    #[test]
    fn dielectric_slab_is_500_by_75_cells() {
        let g = build_wall(&grid4mm(), &WallSpec::dielectric()).unwrap();
        let n = count(&g, |i| g.eps_r[i] == 6.0);
        assert_eq!(n, 500 * 75);
        let (i0, i1) = Grid2D::span(g.x_min, g.cell, g.nx, -1.0, 1.0);
        let (k0, k1) = Grid2D::span(g.z_min, g.cell, g.nz, 1.0, 1.3);
        assert_eq!((i1 - i0, k1 - k0), (500, 75));
        for i in i0..i1 {
            for k in k0..k1 {
                assert_eq!(g.eps_r[g.index(i, k)], 6.0);
            }
        }
    }

    #[test]
    fn zero_relative_std_gives_zero_std_maps() {
        let g = build_wall(&grid4mm(), &WallSpec::dielectric().deterministic()).unwrap();
        assert!(!g.has_variance());
    }

    #[test]
    fn std_maps_only_over_wall_cells() {
        let g = build_wall(&grid4mm(), &WallSpec::dielectric()).unwrap();
        for idx in 0..g.nx * g.nz {
            assert_eq!(g.eps_std[idx] > 0.0, g.eps_r[idx] > 1.0);
        }
        let n = count(&g, |i| g.eps_std[i] > 0.0);
        assert_eq!(n, 500 * 75);
    }

    fn air_fraction(g: &Grid2D, x: (f64, f64), z: (f64, f64)) -> f64 {
        let (i0, i1) = Grid2D::span(g.x_min, g.cell, g.nx, x.0, x.1);
        let (k0, k1) = Grid2D::span(g.z_min, g.cell, g.nz, z.0, z.1);
        let mut air = 0;
        for i in i0..i1 {
            for k in k0..k1 {
                if g.eps_r[g.index(i, k)] == 1.0 {
                    air += 1;
                }
            }
        }
        air as f64 / ((i1 - i0) * (k1 - k0)) as f64
    }

    #[test]
    fn airgap_fraction_matches_gap_over_pitch() {
        // a whole number of periods: fraction is gap / pitch up to one column
        let mut spec = WallSpec::airgap();
        spec.x_range = (-0.75, 0.75);
        let g = build_wall(&grid4mm(), &spec).unwrap();
        let frac = air_fraction(&g, spec.x_range, spec.z_range);
        let column = 0.004 / 1.5;
        assert!((frac - 1.0 / 3.0).abs() <= column + 1e-12, "air fraction {frac}");
    }

    #[test]
    fn airgap_fraction_on_default_wall_counts_whole_gaps() {
        // gaps at 0, +-0.3, +-0.6 and +-0.9 m all fit inside the 2 m wall
        let spec = WallSpec::airgap();
        let g = build_wall(&grid4mm(), &spec).unwrap();
        let frac = air_fraction(&g, spec.x_range, spec.z_range);
        assert!((frac - 0.7 / 2.0).abs() <= 0.004 / 2.0 + 1e-12, "air fraction {frac}");
    }

    #[test]
    fn reinforced_rods_are_pec_and_periodic() {
        let spec = WallSpec::reinforced();
        let g = build_wall(&grid4mm(), &spec).unwrap();
        let n_pec = count(&g, |i| g.pec[i]);
        // ten rods of radius 1 cm: pi r^2 / h^2 ~= 19.6 nodes each
        let per_rod = std::f64::consts::PI * 0.01f64.powi(2) / 0.004f64.powi(2);
        assert!((n_pec as f64 - 10.0 * per_rod).abs() < 10.0 * 6.0, "{n_pec}");
        let (i, k) = g.nearest_node(-0.9, 1.15).unwrap();
        assert!(g.pec[g.index(i, k)]);
        let (i, k) = g.nearest_node(-0.8, 1.15).unwrap();
        assert!(!g.pec[g.index(i, k)]);
    }

    #[test]
    fn wall_outside_grid_is_rejected() {
        let mut spec = WallSpec::dielectric();
        spec.z_range = (3.9, 4.3);
        assert!(matches!(
            build_wall(&grid4mm(), &spec),
            Err(FdtdError::WallOutsideGrid { .. })
        ));
    }

    #[test]
    fn rod_spacing_below_two_cells_is_rejected() {
        let mut spec = WallSpec::reinforced();
        spec.kind = WallKind::Reinforced {
            rod_pitch: 0.006,
            rod_radius: 0.002,
        };
        assert!(matches!(
            build_wall(&grid4mm(), &spec),
            Err(FdtdError::RodSpacing { .. })
        ));
    }
}
