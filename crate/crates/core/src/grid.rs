//! Uniform node grids on rectangles and grid-aligned sub-rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node grid `origin + (i h, j h)`, `0 <= i < nx`, `0 <= j < ny`.
///
/// Both axes share the same spacing, so `extent = ((nx-1) h, (ny-1) h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    origin: [f64; 2],
    nx: usize,
    ny: usize,
    h: f64,
}

impl Grid2D {
    pub fn new(origin: [f64; 2], nx: usize, ny: usize, h: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3x3 nodes, got {nx}x{ny}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { origin, nx, ny, h })
    }

    /// Grid covering `[x0, x0 + lx] x [y0, y0 + ly]`, with `cells_x` cells along x.
    ///
    /// `ly / lx` must be a ratio of whole cell counts (relative mismatch below 1e-9).
    pub fn covering(origin: [f64; 2], extent: [f64; 2], cells_x: usize) -> Result<Self> {
        if cells_x < 2 {
            return Err(Error::InvalidGrid("need at least 2 cells per axis".into()));
        }
        let h = extent[0] / cells_x as f64;
        let cells_y_f = extent[1] / h;
        let cells_y = cells_y_f.round();
        if (cells_y_f - cells_y).abs() > 1e-9 * cells_y_f.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "extent {extent:?} is not commensurate with spacing {h}"
            )));
        }
        Self::new(origin, cells_x + 1, cells_y as usize + 1, h)
    }

    /// Square `(-side/2, side/2)^2` with `cells` cells per axis.
    pub fn centered_square(side: f64, cells: usize) -> Result<Self> {
        Self::covering([-0.5 * side, -0.5 * side], [side, side], cells)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn extent(&self) -> [f64; 2] {
        [(self.nx - 1) as f64 * self.h, (self.ny - 1) as f64 * self.h]
    }

    pub fn area(&self) -> f64 {
        let [lx, ly] = self.extent();
        lx * ly
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major node index (x fastest).
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.h
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    /// Number of x-directed edges `(i,j) -> (i+1,j)`.
    #[inline]
    pub fn n_xedges(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    /// Number of y-directed edges `(i,j) -> (i,j+1)`.
    #[inline]
    pub fn n_yedges(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    #[inline]
    pub fn xedge(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }

    #[inline]
    pub fn yedge(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i) + 0.5 * self.h, self.y(j) + 0.5 * self.h]
    }

    pub fn full_region(&self) -> Region {
        Region { i0: 0, i1: self.nx - 1, j0: 0, j1: self.ny - 1 }
    }

    /// Closest node indices to a physical point, clamped into the grid.
    pub fn nearest_node(&self, p: [f64; 2]) -> (usize, usize) {
        let fi = ((p[0] - self.origin[0]) / self.h).round();
        let fj = ((p[1] - self.origin[1]) / self.h).round();
        let i = fi.clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Grid-aligned region whose node range is the snap of the physical box.
    pub fn snap_region(&self, lo: [f64; 2], hi: [f64; 2]) -> Result<Region> {
        let tol = 1e-9 * self.h;
        let [lx, ly] = self.extent();
        let o = self.origin;
        if lo[0] < o[0] - tol || lo[1] < o[1] - tol || hi[0] > o[0] + lx + tol || hi[1] > o[1] + ly + tol {
            return Err(Error::RegionOutsideGrid(format!("box {lo:?}..{hi:?}")));
        }
        let (i0, j0) = self.nearest_node(lo);
        let (i1, j1) = self.nearest_node(hi);
        Region::new(self, i0, i1, j0, j1)
    }

    /// Trapezoid weight of node index `k` along an axis with `n` nodes.
    #[inline]
    pub(crate) fn trap(k: usize, lo: usize, hi: usize) -> f64 {
        if k == lo || k == hi {
            0.5
        } else {
            1.0
        }
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.origin[0] - other.origin[0]).abs() <= 1e-12 * self.h.max(1.0)
            && (self.origin[1] - other.origin[1]).abs() <= 1e-12 * self.h.max(1.0)
    }

    pub(crate) fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Closed node-index rectangle `[i0, i1] x [j0, j1]`, `i0 < i1`, `j0 < j1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Region {
    pub fn new(grid: &Grid2D, i0: usize, i1: usize, j0: usize, j1: usize) -> Result<Self> {
        if i0 >= i1 || j0 >= j1 {
            return Err(Error::RegionOutsideGrid(format!("empty region [{i0},{i1}]x[{j0},{j1}]")));
        }
        if i1 >= grid.nx() || j1 >= grid.ny() {
            return Err(Error::RegionOutsideGrid(format!(
                "[{i0},{i1}]x[{j0},{j1}] exceeds {}x{} nodes",
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(Self { i0, i1, j0, j1 })
    }

    pub fn area(&self, grid: &Grid2D) -> f64 {
        (self.i1 - self.i0) as f64 * (self.j1 - self.j0) as f64 * grid.h() * grid.h()
    }

    pub fn contains_node(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    /// Boundary node loop, counterclockwise, starting at `(i0, j0)`; not closed
    /// (the first node is not repeated).
    pub fn boundary_loop(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * (self.i1 - self.i0 + self.j1 - self.j0));
        for i in self.i0..self.i1 {
            out.push((i, self.j0));
        }
        for j in self.j0..self.j1 {
            out.push((self.i1, j));
        }
        for i in (self.i0 + 1..=self.i1).rev() {
            out.push((i, self.j1));
        }
        for j in (self.j0 + 1..=self.j1).rev() {
            out.push((self.i0, j));
        }
        out
    }

    /// Inset by `k` nodes on every side, if still non-degenerate.
    pub fn inset(&self, k: usize) -> Option<Region> {
        if self.i0 + k < self.i1.checked_sub(k)? && self.j0 + k < self.j1.checked_sub(k)? {
            Some(Region { i0: self.i0 + k, i1: self.i1 - k, j0: self.j0 + k, j1: self.j1 - k })
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new([0.0, 0.0], 2, 5, 0.1).is_err());
        assert!(Grid2D::new([0.0, 0.0], 5, 2, 0.1).is_err());
        assert!(Grid2D::new([0.0, 0.0], 5, 5, 0.0).is_err());
        assert!(Grid2D::new([0.0, 0.0], 3, 3, 0.1).is_ok());
    }

    #[test]
    fn covering_requires_commensurate_extent() {
        let g = Grid2D::covering([-1.0, -1.0], [2.0, 2.0], 64).unwrap();
        assert_eq!((g.nx(), g.ny()), (65, 65));
        assert!((g.h() - 1.0 / 32.0).abs() < 1e-15);
        assert!(Grid2D::covering([0.0, 0.0], [1.0, 0.3333], 4).is_err());
    }

    #[test]
    fn boundary_loop_is_counterclockwise_perimeter() {
        let g = Grid2D::new([0.0, 0.0], 5, 4, 1.0).unwrap();
        let r = Region::new(&g, 1, 3, 0, 2).unwrap();
        let l = r.boundary_loop();
        assert_eq!(l.len(), 8);
        assert_eq!(l[0], (1, 0));
        assert_eq!(l[2], (3, 0));
        assert_eq!(l[4], (3, 2));
        assert_eq!(l[7], (1, 1));
        assert!(r.inset(1).is_none());
    }

    #[test]
    fn snap_region_rejects_outside() {
        let g = Grid2D::centered_square(2.0, 8).unwrap();
        assert!(g.snap_region([-1.0, -1.0], [0.0, 1.0]).is_ok());
        assert!(g.snap_region([-1.5, -1.0], [0.0, 1.0]).is_err());
    }
}
