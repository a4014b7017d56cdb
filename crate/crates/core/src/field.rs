//! Field containers: complex order parameter, real node scalars, and the
//! gauge field (stream function plus per-edge link variables).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Real scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.point(i, j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Four-corner average at the center of cell `(i, j)`.
    #[inline]
    pub fn cell_average(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        0.25 * (self.values[g.idx(i, j)]
            + self.values[g.idx(i + 1, j)]
            + self.values[g.idx(i, j + 1)]
            + self.values[g.idx(i + 1, j + 1)])
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Complex order parameter, one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderParameter {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl OrderParameter {
    pub fn new(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("order parameter has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: Complex64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.point(i, j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|z| z.conj()).collect() }
    }

    /// Pointwise projection `psi / max(1, |psi|)`.
    pub fn truncated(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|&z| {
                let m = z.norm();
                if m > 1.0 {
                    z / m
                } else {
                    z
                }
            })
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// One-sided/central first-derivative stencil at index `k` on an axis of `n`
/// nodes, as `(offset, weight)` pairs to be divided by `2h`.
#[inline]
pub(crate) fn deriv_stencil(k: usize, n: usize) -> [(isize, f64); 3] {
    if k == 0 {
        [(0, -3.0), (1, 4.0), (2, -1.0)]
    } else if k == n - 1 {
        [(0, 3.0), (-1, -4.0), (-2, 1.0)]
    } else {
        [(-1, -1.0), (1, 1.0), (0, 0.0)]
    }
}

/// Vector potential `A = (-d2 xi, d1 xi)` given by a node stream function `xi`,
/// plus a pure-gauge part stored as per-edge increments of a scalar `phi`.
///
/// Link variables are `U_e = exp(-i kappa_h (int_e A.dl + dphi_e))`, with the
/// line integral taken by the midpoint rule.
#[derive(Debug, Clone)]
pub struct GaugeField {
    grid: Grid2D,
    kappa_h: f64,
    stream: Vec<f64>,
    line_x: Vec<f64>,
    line_y: Vec<f64>,
    gauge_x: Vec<f64>,
    gauge_y: Vec<f64>,
    links_x: Vec<Complex64>,
    links_y: Vec<Complex64>,
}

impl GaugeField {
    pub fn from_stream(grid: Grid2D, stream: Vec<f64>, kappa_h: f64) -> Result<Self> {
        if stream.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(kappa_h.is_finite() && kappa_h != 0.0) {
            return Err(Error::InvalidParameter(format!("kappa*H must be finite and nonzero, got {kappa_h}")));
        }
        let gauge_x = vec![0.0; grid.n_xedges()];
        let gauge_y = vec![0.0; grid.n_yedges()];
        Ok(Self::assemble(grid, kappa_h, stream, gauge_x, gauge_y))
    }

    pub fn zero(grid: Grid2D, kappa_h: f64) -> Result<Self> {
        Self::from_stream(grid, vec![0.0; grid.len()], kappa_h)
    }

    /// `scale * A0(x - center)` with `A0(x) = (-x2, x1)/2`, i.e. stream
    /// `scale |x - center|^2 / 4`. Line integrals are exact for this field.
    pub fn symmetric(grid: Grid2D, kappa_h: f64, center: [f64; 2], scale: f64) -> Result<Self> {
        let stream = crate::field::ScalarField::from_fn(grid, |p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            0.25 * scale * (dx * dx + dy * dy)
        });
        Self::from_stream(grid, stream.into_values(), kappa_h)
    }

    fn assemble(grid: Grid2D, kappa_h: f64, stream: Vec<f64>, gauge_x: Vec<f64>, gauge_y: Vec<f64>) -> Self {
        let (line_x, line_y) = stream_line_integrals(&grid, &stream);
        let links_x = line_x.iter().zip(&gauge_x).map(|(&t, &g)| Complex64::from_polar(1.0, -kappa_h * (t + g))).collect();
        let links_y = line_y.iter().zip(&gauge_y).map(|(&t, &g)| Complex64::from_polar(1.0, -kappa_h * (t + g))).collect();
        Self { grid, kappa_h, stream, line_x, line_y, gauge_x, gauge_y, links_x, links_y }
    }

    /// Same pure-gauge part, new stream function.
    pub fn with_stream(&self, stream: Vec<f64>) -> Result<Self> {
        if stream.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self::assemble(self.grid, self.kappa_h, stream, self.gauge_x.clone(), self.gauge_y.clone()))
    }

    /// `-A`: negated stream and gauge part, conjugated links.
    pub fn negated(&self) -> Self {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        Self::assemble(self.grid, self.kappa_h, neg(&self.stream), neg(&self.gauge_x), neg(&self.gauge_y))
    }

    /// `A + grad(phi)`, realized on the links only.
    pub fn add_gradient(&self, phi: &[f64]) -> Result<Self> {
        let g = &self.grid;
        if phi.len() != g.len() {
            return Err(Error::GridMismatch);
        }
        let mut gauge_x = self.gauge_x.clone();
        let mut gauge_y = self.gauge_y.clone();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if i + 1 < g.nx() {
                    gauge_x[g.xedge(i, j)] += phi[g.idx(i + 1, j)] - phi[g.idx(i, j)];
                }
                if j + 1 < g.ny() {
                    gauge_y[g.yedge(i, j)] += phi[g.idx(i, j + 1)] - phi[g.idx(i, j)];
                }
            }
        }
        Ok(Self::assemble(*g, self.kappa_h, self.stream.clone(), gauge_x, gauge_y))
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn kappa_h(&self) -> f64 {
        self.kappa_h
    }

    #[inline]
    pub fn stream(&self) -> &[f64] {
        &self.stream
    }

    #[inline]
    pub fn links_x(&self) -> &[Complex64] {
        &self.links_x
    }

    #[inline]
    pub fn links_y(&self) -> &[Complex64] {
        &self.links_y
    }

    /// Midpoint-rule `int_e A.dl` of the stream part on x-edges.
    #[inline]
    pub fn line_x(&self) -> &[f64] {
        &self.line_x
    }

    #[inline]
    pub fn line_y(&self) -> &[f64] {
        &self.line_y
    }

    /// Total line integral on x-edge including the pure-gauge part.
    #[inline]
    pub fn total_line_x(&self, e: usize) -> f64 {
        self.line_x[e] + self.gauge_x[e]
    }

    #[inline]
    pub fn total_line_y(&self, e: usize) -> f64 {
        self.line_y[e] + self.gauge_y[e]
    }

    pub fn has_gauge_part(&self) -> bool {
        self.gauge_x.iter().chain(&self.gauge_y).any(|&g| g != 0.0)
    }

    /// Discrete curl at the center of cell `(i, j)`: circulation over `h^2`.
    #[inline]
    pub fn curl(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let c = self.line_x[g.xedge(i, j)] + self.line_y[g.yedge(i + 1, j)]
            - self.line_x[g.xedge(i, j + 1)]
            - self.line_y[g.yedge(i, j)];
        c / (g.h() * g.h())
    }

    pub fn curl_field(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.n_cells());
        for j in 0..g.ny() - 1 {
            for i in 0..g.nx() - 1 {
                out.push(self.curl(i, j));
            }
        }
        out
    }

    /// Vector potential at node `(i, j)` from the stream (pure-gauge part excluded).
    pub fn potential_at(&self, i: usize, j: usize) -> [f64; 2] {
        let g = &self.grid;
        let d1 = axis_derivative(&self.stream, g, i, j, 0);
        let d2 = axis_derivative(&self.stream, g, i, j, 1);
        [-d2, d1]
    }

    /// Discrete divergence of the stream part at interior node `(i, j)`:
    /// central differences of the node potential.
    pub fn divergence_at(&self, i: usize, j: usize) -> f64 {
        let h = self.grid.h();
        let a_e = self.potential_at(i + 1, j)[0];
        let a_w = self.potential_at(i - 1, j)[0];
        let a_n = self.potential_at(i, j + 1)[1];
        let a_s = self.potential_at(i, j - 1)[1];
        (a_e - a_w + a_n - a_s) / (2.0 * h)
    }
}

/// Derivative of a node field along `axis` (0 = x, 1 = y) at `(i, j)`.
pub(crate) fn axis_derivative(f: &[f64], g: &Grid2D, i: usize, j: usize, axis: usize) -> f64 {
    let inv = 0.5 / g.h();
    let mut acc = 0.0;
    if axis == 0 {
        for (o, w) in deriv_stencil(i, g.nx()) {
            if w != 0.0 {
                acc += w * f[g.idx((i as isize + o) as usize, j)];
            }
        }
    } else {
        for (o, w) in deriv_stencil(j, g.ny()) {
            if w != 0.0 {
                acc += w * f[g.idx(i, (j as isize + o) as usize)];
            }
        }
    }
    acc * inv
}

/// Midpoint-rule line integrals of `A = (-d2 xi, d1 xi)` along every edge.
pub fn stream_line_integrals(g: &Grid2D, stream: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    let mut d1 = vec![0.0; g.len()];
    let mut d2 = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            d1[g.idx(i, j)] = axis_derivative(stream, g, i, j, 0);
            d2[g.idx(i, j)] = axis_derivative(stream, g, i, j, 1);
        }
    }
    let mut lx = Vec::with_capacity(g.n_xedges());
    for j in 0..ny {
        for i in 0..nx - 1 {
            lx.push(-0.5 * h * (d2[g.idx(i, j)] + d2[g.idx(i + 1, j)]));
        }
    }
    let mut ly = Vec::with_capacity(g.n_yedges());
    for j in 0..ny - 1 {
        for i in 0..nx {
            ly.push(0.5 * h * (d1[g.idx(i, j)] + d1[g.idx(i, j + 1)]));
        }
    }
    (lx, ly)
}

/// Adjoint of [`stream_line_integrals`]: maps per-edge sensitivities to a
/// node field.
pub fn stream_line_adjoint(g: &Grid2D, gx: &[f64], gy: &[f64]) -> Vec<f64> {
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    // Sensitivities with respect to the node derivatives d1, d2.
    let mut s1 = vec![0.0; g.len()];
    let mut s2 = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let c = -0.5 * h * gx[g.xedge(i, j)];
            s2[g.idx(i, j)] += c;
            s2[g.idx(i + 1, j)] += c;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let c = 0.5 * h * gy[g.yedge(i, j)];
            s1[g.idx(i, j)] += c;
            s1[g.idx(i, j + 1)] += c;
        }
    }
    let inv = 0.5 / h;
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let a = s1[g.idx(i, j)] * inv;
            if a != 0.0 {
                for (o, w) in deriv_stencil(i, nx) {
                    if w != 0.0 {
                        out[g.idx((i as isize + o) as usize, j)] += w * a;
                    }
                }
            }
            let b = s2[g.idx(i, j)] * inv;
            if b != 0.0 {
                for (o, w) in deriv_stencil(j, ny) {
                    if w != 0.0 {
                        out[g.idx(i, (j as isize + o) as usize)] += w * b;
                    }
                }
            }
        }
    }
    out
}

/// Cell curls `circulation / h^2` of the potential given by a stream function.
pub(crate) fn stream_curl(g: &Grid2D, stream: &[f64]) -> Vec<f64> {
    let (lx, ly) = stream_line_integrals(g, stream);
    let inv = 1.0 / (g.h() * g.h());
    let mut out = Vec::with_capacity(g.n_cells());
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            out.push((lx[g.xedge(i, j)] + ly[g.yedge(i + 1, j)] - lx[g.xedge(i, j + 1)] - ly[g.yedge(i, j)]) * inv);
        }
    }
    out
}

/// Adjoint of [`stream_curl`].
pub(crate) fn stream_curl_adjoint(g: &Grid2D, cells: &[f64]) -> Vec<f64> {
    let inv = 1.0 / (g.h() * g.h());
    let mut gx = vec![0.0; g.n_xedges()];
    let mut gy = vec![0.0; g.n_yedges()];
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let c = cells[g.cell(i, j)] * inv;
            gx[g.xedge(i, j)] += c;
            gy[g.yedge(i + 1, j)] += c;
            gx[g.xedge(i, j + 1)] -= c;
            gy[g.yedge(i, j)] -= c;
        }
    }
    stream_line_adjoint(g, &gx, &gy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links_are_unimodular() {
        let g = Grid2D::centered_square(2.0, 16).unwrap();
        let s = ScalarField::from_fn(g, |p| (3.0 * p[0]).sin() * p[1] * p[1]);
        let a = GaugeField::from_stream(g, s.into_values(), 37.0).unwrap();
        for u in a.links_x().iter().chain(a.links_y()) {
            assert!((u.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_potential_has_unit_curl_and_exact_lines() {
        let g = Grid2D::centered_square(3.0, 12).unwrap();
        let a = GaugeField::symmetric(g, 1.0, [0.0, 0.0], 1.0).unwrap();
        for c in a.curl_field() {
            assert!((c - 1.0).abs() < 1e-12, "{c}");
        }
        // x-edge at height y: int A1 dx = -y h / 2.
        let e = g.xedge(3, 5);
        assert!((a.line_x()[e] + 0.5 * g.y(5) * g.h()).abs() < 1e-14);
    }

    #[test]
    fn constant_stream_on_boundary_gives_no_normal_component() {
        let g = Grid2D::centered_square(2.0, 10).unwrap();
        let s = ScalarField::from_fn(g, |p| (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1]) * (1.0 + p[0]));
        let a = GaugeField::from_stream(g, s.into_values(), 1.0).unwrap();
        for k in 0..g.ny() {
            assert!(a.potential_at(0, k)[0].abs() < 1e-14);
            assert!(a.potential_at(g.nx() - 1, k)[0].abs() < 1e-14);
        }
        for k in 0..g.nx() {
            assert!(a.potential_at(k, 0)[1].abs() < 1e-14);
            assert!(a.potential_at(k, g.ny() - 1)[1].abs() < 1e-14);
        }
    }

    #[test]
    fn line_adjoint_matches_inner_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = Grid2D::new([0.0, 0.0], 7, 5, 0.3).unwrap();
        let xi: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gx: Vec<f64> = (0..g.n_xedges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gy: Vec<f64> = (0..g.n_yedges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (lx, ly) = stream_line_integrals(&g, &xi);
        let lhs: f64 = lx.iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>() + ly.iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>();
        let adj = stream_line_adjoint(&g, &gx, &gy);
        let rhs: f64 = adj.iter().zip(&xi).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
