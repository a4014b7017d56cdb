//! Applied-field profiles, the reference potential `F` with `curl F = B0`,
//! admissible square lattices and the parameter schedules tied to `(kappa, H)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{axis_derivative, stream_curl, stream_curl_adjoint, GaugeField, ScalarField};
use crate::grid::Grid2D;
use crate::linalg::{conjugate_gradient, poisson_dirichlet};

/// Analytic description of a profile, when one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `B0 = beta`.
    Constant { beta: f64 },
    /// `B0 = offset + slope . x`; `x1` is `offset = 0, slope = (1, 0)`.
    Affine { offset: f64, slope: [f64; 2] },
    /// Node samples only.
    Custom,
}

/// Applied field sampled on a grid, validated against
/// `min (|B0| + |grad B0|) > threshold`.
#[derive(Debug, Clone)]
pub struct MagneticProfile {
    kind: ProfileKind,
    values: ScalarField,
    grad_norm: Vec<f64>,
    threshold: f64,
}

/// Default lower bound for `|B0| + |grad B0|` at every node.
pub const DEFAULT_NONDEGENERACY: f64 = 1e-8;

impl MagneticProfile {
    pub fn constant(grid: Grid2D, beta: f64, threshold: f64) -> Result<Self> {
        let values = ScalarField::from_fn(grid, |_| beta);
        Self::validated(ProfileKind::Constant { beta }, values, vec![0.0; grid.len()], threshold)
    }

    pub fn affine(grid: Grid2D, offset: f64, slope: [f64; 2], threshold: f64) -> Result<Self> {
        let values = ScalarField::from_fn(grid, |p| offset + slope[0] * p[0] + slope[1] * p[1]);
        let gn = slope[0].hypot(slope[1]);
        Self::validated(ProfileKind::Affine { offset, slope }, values, vec![gn; grid.len()], threshold)
    }

    /// `B0(x) = x1`.
    pub fn x1(grid: Grid2D, threshold: f64) -> Result<Self> {
        Self::affine(grid, 0.0, [1.0, 0.0], threshold)
    }

    /// Node samples; the gradient norm is estimated with central differences
    /// (second-order one-sided at the boundary).
    pub fn custom(values: ScalarField, threshold: f64) -> Result<Self> {
        let g = *values.grid();
        let mut grad_norm = Vec::with_capacity(g.len());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let d1 = axis_derivative(values.values(), &g, i, j, 0);
                let d2 = axis_derivative(values.values(), &g, i, j, 1);
                grad_norm.push(d1.hypot(d2));
            }
        }
        Self::validated(ProfileKind::Custom, values, grad_norm, threshold)
    }

    fn validated(kind: ProfileKind, values: ScalarField, grad_norm: Vec<f64>, threshold: f64) -> Result<Self> {
        let g = *values.grid();
        if values.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("applied field has non-finite samples".into()));
        }
        let (k, min) = values
            .values()
            .iter()
            .zip(&grad_norm)
            .map(|(v, d)| v.abs() + d)
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
        if !(min > threshold) {
            let [x, y] = g.point(k % g.nx(), k / g.nx());
            return Err(Error::DegenerateField { min, x, y });
        }
        Ok(Self { kind, values, grad_norm, threshold })
    }

    /// The same profile on the grid of every other node; needs even cell
    /// counts.
    pub fn coarsened(&self) -> Result<Self> {
        let g = self.grid();
        let (cx, cy) = (g.nx() - 1, g.ny() - 1);
        if cx % 2 != 0 || cy % 2 != 0 {
            return Err(Error::InvalidGrid(format!("cannot coarsen {cx} x {cy} cells")));
        }
        let gc = Grid2D::new(g.origin(), cx / 2 + 1, cy / 2 + 1, 2.0 * g.h())?;
        match self.kind {
            ProfileKind::Constant { beta } => Self::constant(gc, beta, self.threshold),
            ProfileKind::Affine { offset, slope } => Self::affine(gc, offset, slope, self.threshold),
            ProfileKind::Custom => {
                let v = ScalarField::from_fn(gc, |_| 0.0).into_values();
                let v = v
                    .iter()
                    .enumerate()
                    .map(|(k, _)| self.values.at(2 * (k % gc.nx()), 2 * (k / gc.nx())))
                    .collect();
                Self::custom(ScalarField::new(gc, v)?, self.threshold)
            }
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn grid(&self) -> &Grid2D {
        self.values.grid()
    }

    pub fn field(&self) -> &ScalarField {
        &self.values
    }

    pub fn grad_norm(&self) -> &[f64] {
        &self.grad_norm
    }

    /// `sup |B0|` over the closed domain.
    pub fn sup_abs(&self) -> f64 {
        let [lo, hi] = self.domain_box();
        match self.kind {
            ProfileKind::Constant { beta } => beta.abs(),
            ProfileKind::Affine { .. } => self.box_range_analytic(lo, hi).1,
            ProfileKind::Custom => self.values.values().iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Pointwise value; exact for analytic kinds, bilinear interpolation of
    /// the samples otherwise.
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            ProfileKind::Constant { beta } => beta,
            ProfileKind::Affine { offset, slope } => offset + slope[0] * p[0] + slope[1] * p[1],
            ProfileKind::Custom => {
                let g = self.grid();
                let o = g.origin();
                let fx = ((p[0] - o[0]) / g.h()).clamp(0.0, (g.nx() - 1) as f64);
                let fy = ((p[1] - o[1]) / g.h()).clamp(0.0, (g.ny() - 1) as f64);
                let i = (fx.floor() as usize).min(g.nx() - 2);
                let j = (fy.floor() as usize).min(g.ny() - 2);
                let (s, t) = (fx - i as f64, fy - j as f64);
                let v = |a, b| self.values.at(a, b);
                (1.0 - s) * (1.0 - t) * v(i, j) + s * (1.0 - t) * v(i + 1, j) + (1.0 - s) * t * v(i, j + 1) + s * t * v(i + 1, j + 1)
            }
        }
    }

    fn domain_box(&self) -> [[f64; 2]; 2] {
        let g = self.grid();
        let o = g.origin();
        let [lx, ly] = g.extent();
        [o, [o[0] + lx, o[1] + ly]]
    }

    /// `(inf |B0|, sup |B0|, argmin |B0|)` over an axis-aligned closed box.
    pub fn box_abs_range(&self, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64, [f64; 2]) {
        match self.kind {
            ProfileKind::Constant { beta } => (beta.abs(), beta.abs(), lo),
            ProfileKind::Affine { .. } => {
                let (inf, sup, arg) = self.box_range_analytic_arg(lo, hi);
                (inf, sup, arg)
            }
            ProfileKind::Custom => self.box_range_sampled(lo, hi),
        }
    }

    fn box_range_analytic(&self, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64) {
        let (a, b, _) = self.box_range_analytic_arg(lo, hi);
        (a, b)
    }

    fn box_range_analytic_arg(&self, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64, [f64; 2]) {
        // Affine: extremes of the signed value sit at corners.
        let corners = [lo, [hi[0], lo[1]], [lo[0], hi[1]], hi];
        let vals: Vec<f64> = corners.iter().map(|&c| self.eval(c)).collect();
        let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sup = vmin.abs().max(vmax.abs());
        if vmin <= 0.0 && vmax >= 0.0 {
            (0.0, sup, self.zero_point_in_box(lo, hi))
        } else {
            let k = (0..4).min_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs())).unwrap();
            (vals[k].abs(), sup, corners[k])
        }
    }

    fn zero_point_in_box(&self, lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
        // Closest point to the box center on the zero line, clamped.
        if let ProfileKind::Affine { offset, slope } = self.kind {
            let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let n2 = slope[0] * slope[0] + slope[1] * slope[1];
            let v = offset + slope[0] * c[0] + slope[1] * c[1];
            let p = [c[0] - v * slope[0] / n2, c[1] - v * slope[1] / n2];
            [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])]
        } else {
            lo
        }
    }

    fn box_range_sampled(&self, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64, [f64; 2]) {
        // Nodes in the box enlarged by one cell on every side.
        let g = self.grid();
        let h = g.h();
        let o = g.origin();
        let lo_i = (((lo[0] - h - o[0]) / h).floor().max(0.0)) as usize;
        let lo_j = (((lo[1] - h - o[1]) / h).floor().max(0.0)) as usize;
        let hi_i = ((((hi[0] + h - o[0]) / h).ceil()) as usize).min(g.nx() - 1);
        let hi_j = ((((hi[1] + h - o[1]) / h).ceil()) as usize).min(g.ny() - 1);
        let mut inf = f64::INFINITY;
        let mut sup = 0.0f64;
        let mut arg = lo;
        let mut sign_seen = (false, false);
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                let v = self.values.at(i, j);
                sign_seen.0 |= v < 0.0;
                sign_seen.1 |= v > 0.0;
                if v.abs() < inf {
                    inf = v.abs();
                    arg = g.point(i, j);
                }
                sup = sup.max(v.abs());
            }
        }
        if sign_seen.0 && sign_seen.1 {
            inf = 0.0;
        }
        (inf, sup, arg)
    }

    /// Smallest `|grad B0 . n|` over boundary nodes adjacent to a sign change
    /// of `B0` along the boundary; `None` if the zero set misses the boundary.
    pub fn boundary_transversality(&self) -> Option<f64> {
        let g = self.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let loop_nodes = g.full_region().boundary_loop();
        let mut best: Option<f64> = None;
        for w in 0..loop_nodes.len() {
            let (i, j) = loop_nodes[w];
            let (i2, j2) = loop_nodes[(w + 1) % loop_nodes.len()];
            let (a, b) = (self.values.at(i, j), self.values.at(i2, j2));
            if a == 0.0 || a * b < 0.0 {
                let d1 = axis_derivative(self.values.values(), g, i, j, 0);
                let d2 = axis_derivative(self.values.values(), g, i, j, 1);
                let dn = if i == 0 || i == nx - 1 { d1.abs() } else { 0.0f64 }.max(if j == 0 || j == ny - 1 { d2.abs() } else { 0.0 });
                best = Some(best.map_or(dn, |m: f64| m.min(dn)));
            }
        }
        best
    }
}

/// Reference potential `F`: divergence free, `curl F = B0`, `F.nu = 0` on the
/// boundary. Solved as `Delta xi = B0`, `xi = 0` on the boundary.
pub fn build_f(b0: &MagneticProfile, kappa_h: f64, rel_tol: f64) -> Result<GaugeField> {
    build_f_with(b0, kappa_h, rel_tol, CURL_FIT_ITER)
}

/// Iterations of the curl least-squares correction. The correction is
/// local (corners and edges), so CG captures it in a few hundred steps at
/// any resolution; its residual stalls at the O(h^2) consistency error.
pub const CURL_FIT_ITER: usize = 400;

/// [`build_f`] with an explicit iteration cap for the curl correction
/// (0 keeps the plain Poisson stream).
pub fn build_f_with(b0: &MagneticProfile, kappa_h: f64, rel_tol: f64, lsq_iter: usize) -> Result<GaugeField> {
    let g = *b0.grid();
    let (mut xi, _) = poisson_dirichlet(&g, b0.field().values(), rel_tol)?;
    // Least-squares correction so the discrete cell curls match the cell
    // averages of B0; the Poisson solution alone is off near corners.
    let target: Vec<f64> = (0..g.n_cells()).map(|c| b0.field().cell_average(c % (g.nx() - 1), c / (g.nx() - 1))).collect();
    let interior = |k: usize| {
        let (i, j) = (k % g.nx(), k / g.nx());
        i > 0 && j > 0 && i + 1 < g.nx() && j + 1 < g.ny()
    };
    let resid: Vec<f64> = stream_curl(&g, &xi).iter().zip(&target).map(|(c, t)| t - c).collect();
    let rhs: Vec<f64> = stream_curl_adjoint(&g, &resid).into_iter().enumerate().map(|(k, v)| if interior(k) { v } else { 0.0 }).collect();
    let mut delta = vec![0.0; g.len()];
    let apply = |v: &[f64], out: &mut [f64]| {
        let r = stream_curl_adjoint(&g, &stream_curl(&g, v));
        for (k, o) in out.iter_mut().enumerate() {
            *o = if interior(k) { r[k] } else { 0.0 };
        }
    };
    match conjugate_gradient(apply, &rhs, &mut delta, rel_tol, lsq_iter) {
        Ok(_) | Err(Error::LinearSolve { .. }) => {}
        Err(e) => return Err(e),
    }
    xi.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
    GaugeField::from_stream(g, xi, kappa_h)
}

/// One admissible lattice square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSquare {
    /// Lattice indices `(k, m)` of the square `[k l, (k+1) l] x [m l, (m+1) l]`.
    pub index: [i64; 2],
    pub center: [f64; 2],
    pub sign: i8,
    pub b_inf: f64,
    pub b_sup: f64,
    /// Point of the closed square where `|B0|` attains `b_inf`.
    pub argmin: [f64; 2],
}

impl LatticeSquare {
    pub fn lo(&self, ell: f64) -> [f64; 2] {
        [self.center[0] - 0.5 * ell, self.center[1] - 0.5 * ell]
    }

    pub fn hi(&self, ell: f64) -> [f64; 2] {
        [self.center[0] + 0.5 * ell, self.center[1] + 0.5 * ell]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibleLattice {
    pub ell: f64,
    pub rho: f64,
    pub squares: Vec<LatticeSquare>,
}

impl AdmissibleLattice {
    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    pub fn covered_area(&self) -> f64 {
        self.len() as f64 * self.ell * self.ell
    }

    /// Lower and upper Riemann sums of `g(|B0|)` for a non-decreasing `g`.
    pub fn riemann_sums(&self, g: impl Fn(f64) -> f64) -> (f64, f64) {
        let a = self.ell * self.ell;
        self.squares.iter().fold((0.0, 0.0), |(lo, hi), s| (lo + a * g(s.b_inf), hi + a * g(s.b_sup)))
    }
}

/// All squares of the lattice `l Z x l Z` (anchored at the origin) whose
/// closure lies in the closed domain and on which `|B0| > rho`.
pub fn build_lattice(b0: &MagneticProfile, ell: f64, rho: f64) -> Result<AdmissibleLattice> {
    let g = b0.grid();
    let o = g.origin();
    let [lx, ly] = g.extent();
    let diam = lx.hypot(ly);
    if !(ell > 0.0 && ell < diam) {
        return Err(Error::InvalidParameter(format!("lattice side {ell} must lie in (0, {diam})")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let tol = 1e-9 * ell;
    let k0 = ((o[0] - tol) / ell).ceil() as i64;
    let k1 = ((o[0] + lx + tol) / ell).floor() as i64 - 1;
    let m0 = ((o[1] - tol) / ell).ceil() as i64;
    let m1 = ((o[1] + ly + tol) / ell).floor() as i64 - 1;
    let mut squares = Vec::new();
    for m in m0..=m1 {
        for k in k0..=k1 {
            let lo = [k as f64 * ell, m as f64 * ell];
            let hi = [lo[0] + ell, lo[1] + ell];
            let (inf, sup, argmin) = b0.box_abs_range(lo, hi);
            if inf > rho {
                let center = [lo[0] + 0.5 * ell, lo[1] + 0.5 * ell];
                let sign = if b0.eval(center) > 0.0 { 1 } else { -1 };
                squares.push(LatticeSquare { index: [k, m], center, sign, b_inf: inf, b_sup: sup, argmin });
            }
        }
    }
    Ok(AdmissibleLattice { ell, rho, squares })
}

/// Length scales tied to `(kappa, H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    /// Lattice side `(kappa H)^(-1/4)`.
    pub ell: f64,
    /// Energy-bound threshold `(kappa H)^(-1/3)`.
    pub rho: f64,
    /// `(ln(kappa/H))^(-1/4)`.
    pub delta: f64,
    /// Vortex-analysis threshold `(ln(kappa/H))^(-1/2)`.
    pub rho_vortex: f64,
    /// Subdivision count `[2^(7/8) (kappa H)^(1/4) (ln(kappa/H))^(-7/8)]`.
    pub subdivisions: u64,
    /// Sub-square side `ell / M`; `None` when `M = 0`.
    pub delta_kappa: Option<f64>,
}

pub fn default_schedules(kappa: f64, field: f64) -> Result<Schedules> {
    if !(kappa > 0.0 && field > 0.0) {
        return Err(Error::InvalidParameter("kappa and H must be positive".into()));
    }
    if field >= kappa {
        return Err(Error::Schedule(format!("need H < kappa, got H = {field}, kappa = {kappa}")));
    }
    let kh = kappa * field;
    let log = (kappa / field).ln();
    let ell = kh.powf(-0.25);
    let m = (2f64.powf(7.0 / 8.0) * kh.powf(0.25) * log.powf(-7.0 / 8.0)).floor();
    let subdivisions = m as u64;
    Ok(Schedules {
        ell,
        rho: kh.powf(-1.0 / 3.0),
        delta: log.powf(-0.25),
        rho_vortex: log.powf(-0.5),
        subdivisions,
        delta_kappa: (subdivisions > 0).then(|| ell / m),
    })
}
