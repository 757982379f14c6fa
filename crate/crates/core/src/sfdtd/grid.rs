use serde::{Deserialize, Serialize};

use super::FdtdError;
use crate::consts::C0;

/// Material maps on a node-centred 2D grid spanning the physical domain.
///
/// Nodes sit at `x_min + i * cell`, `z_min + k * cell` for `i < nx`, `k < nz`;
/// both domain edges are nodes. Storage is row-major with `k` fastest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub z_min: f64,
    pub cell: f64,
    pub nx: usize,
    pub nz: usize,
    pub eps_r: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eps_std: Vec<f64>,
    pub sigma_std: Vec<f64>,
    pub pec: Vec<bool>,
}

impl Grid2D {
    /// Free-space grid covering `[x0, x1] x [z0, z1]`.
    pub fn new(x_range: (f64, f64), z_range: (f64, f64), cell: f64) -> Result<Self, FdtdError> {
        if !(cell > 0.0) || x_range.1 <= x_range.0 || z_range.1 <= z_range.0 {
            return Err(FdtdError::InvalidGrid(format!(
                "cell {cell} m over x {x_range:?}, z {z_range:?}"
            )));
        }
        let nx = ((x_range.1 - x_range.0) / cell).round() as usize + 1;
        let nz = ((z_range.1 - z_range.0) / cell).round() as usize + 1;
        let n = nx * nz;
        Ok(Self {
            x_min: x_range.0,
            z_min: z_range.0,
            cell,
            nx,
            nz,
            eps_r: vec![1.0; n],
            sigma: vec![0.0; n],
            eps_std: vec![0.0; n],
            sigma_std: vec![0.0; n],
            pec: vec![false; n],
        })
    }

    /// The room cross-section: x in [-1, 1] m, z in [0, 4] m. The x axis is
    /// snapped so that x = 0 is a node.
    pub fn room(cell: f64) -> Result<Self, FdtdError> {
        let half = (1.0 / cell).round() * cell;
        Self::new((-half, half), (0.0, 4.0), cell)
    }

    /// Cell size giving `cells_per_wavelength` samples of the free-space
    /// wavelength at `frequency`.
    pub fn cell_for(frequency: f64, cells_per_wavelength: f64) -> f64 {
        C0 / frequency / cells_per_wavelength
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.nz + k
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.cell
    }

    pub fn z(&self, k: usize) -> f64 {
        self.z_min + k as f64 * self.cell
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.nz - 1)
    }

    /// Nearest node to a physical position, if it lies inside the grid.
    pub fn nearest_node(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.x_min) / self.cell).round();
        let fk = ((z - self.z_min) / self.cell).round();
        if fi < 0.0 || fk < 0.0 || fi >= self.nx as f64 || fk >= self.nz as f64 {
            return None;
        }
        Some((fi as usize, fk as usize))
    }

    /// Node index range `[lo, hi)` of nodes whose coordinate lies in the
    /// half-open interval `[a, b)` along one axis.
    pub(crate) fn span(origin: f64, cell: f64, n: usize, a: f64, b: f64) -> (usize, usize) {
        let tol = 1e-9;
        let lo = ((a - origin) / cell - tol).ceil().max(0.0) as usize;
        let hi = ((b - origin) / cell - tol).ceil().max(0.0) as usize;
        (lo.min(n), hi.min(n))
    }

    pub fn has_variance(&self) -> bool {
        self.eps_std.iter().chain(&self.sigma_std).any(|&s| s > 0.0)
    }

    pub fn validate(&self) -> Result<(), FdtdError> {
        let n = self.nx * self.nz;
        let lens = [
            self.eps_r.len(),
            self.sigma.len(),
            self.eps_std.len(),
            self.sigma_std.len(),
            self.pec.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(FdtdError::InvalidGrid("material map size mismatch".into()));
        }
        if self.eps_r.iter().any(|&e| e < 1.0 || !e.is_finite()) {
            return Err(FdtdError::InvalidGrid("relative permittivity below 1".into()));
        }
        if self
            .sigma
            .iter()
            .chain(&self.eps_std)
            .chain(&self.sigma_std)
            .any(|&s| s < 0.0 || !s.is_finite())
        {
            return Err(FdtdError::InvalidGrid("negative conductivity or std".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_grid_at_4mm_has_501_by_1001_nodes() {
        let g = Grid2D::room(0.004).unwrap();
        assert_eq!((g.nx, g.nz), (501, 1001));
        assert!((g.x_max() - 1.0).abs() < 1e-12);
        assert!((g.z_max() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cell_for_tenth_wavelength_is_4mm() {
        let c = Grid2D::cell_for(7.5e9, 10.0);
        assert!((c - 0.003_997).abs() < 1e-5);
    }

    #[test]
    fn span_is_half_open() {
        assert_eq!(Grid2D::span(0.0, 0.004, 1001, 1.0, 1.3), (250, 325));
        assert_eq!(Grid2D::span(-1.0, 0.004, 501, -1.0, 1.0), (0, 500));
    }

    #[test]
    fn nearest_node_outside_is_none() {
        let g = Grid2D::room(0.01).unwrap();
        assert!(g.nearest_node(1.5, 0.0).is_none());
        assert_eq!(g.nearest_node(0.0, 0.5), Some((100, 50)));
    }
}
