//! Descent on the order parameter for frozen link variables: preconditioned
//! Polak-Ribiere+ conjugate gradients with an exact quartic line search and a
//! Barzilai-Borwein fallback.

use std::borrow::Cow;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{line_quartic, psi_gradient_into};
use crate::grid::Grid2D;

/// How the free variables map onto grid nodes.
#[derive(Debug, Clone)]
pub enum Parametrization {
    /// Every node free.
    Free,
    /// Boundary nodes held at their initial values.
    Dirichlet,
    /// Grid of `(n+1)^2` nodes; the free `n x n` block is extended to column
    /// `n` by `psi(n, j) = px[j] psi(0, j)` and to row `n` by
    /// `psi(i, n) = py[i] psi(i, 0)`.
    Periodic { px: Vec<Complex64>, py: Vec<Complex64> },
}

/// Kinetic plus condensation energy of `psi` for fixed links, as a function
/// of the free variables.
pub struct PsiProblem<'a> {
    grid: Grid2D,
    links_x: &'a [Complex64],
    links_y: &'a [Complex64],
    kappa: f64,
    param: Parametrization,
    /// `2 h^2 W` per free variable (total trapezoid weight of its images).
    node_weight: Vec<f64>,
    precond: Vec<f64>,
}

impl<'a> PsiProblem<'a> {
    pub fn new(grid: Grid2D, links_x: &'a [Complex64], links_y: &'a [Complex64], kappa: f64, param: Parametrization) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let h2 = grid.h() * grid.h();
        let tw = |k: usize, n: usize| Grid2D::trap(k, 0, n - 1);
        // Full-grid weights, folded for the periodic case.
        let mut w = vec![0.0; grid.len()];
        let mut edge = vec![0.0; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.idx(i, j);
                w[k] = tw(i, nx) * tw(j, ny);
                let mut e = 0.0;
                if i > 0 {
                    e += tw(j, ny);
                }
                if i + 1 < nx {
                    e += tw(j, ny);
                }
                if j > 0 {
                    e += tw(i, nx);
                }
                if j + 1 < ny {
                    e += tw(i, nx);
                }
                edge[k] = e;
            }
        }
        let fold = |v: &[f64]| -> Vec<f64> {
            match &param {
                Parametrization::Periodic { .. } => {
                    let n = nx - 1;
                    let mut out = vec![0.0; n * n];
                    for j in 0..ny {
                        for i in 0..nx {
                            out[(j % n) * n + (i % n)] += v[grid.idx(i, j)];
                        }
                    }
                    out
                }
                _ => v.to_vec(),
            }
        };
        let (w, edge) = (fold(&w), fold(&edge));
        let node_weight: Vec<f64> = w.iter().map(|&x| 2.0 * h2 * x).collect();
        let precond = w.iter().zip(&edge).map(|(&x, &e)| 2.0 * e + 2.0 * kappa * kappa * h2 * x).collect();
        Self { grid, links_x, links_y, kappa, param, node_weight, precond }
    }

    pub fn dim(&self) -> usize {
        match self.param {
            Parametrization::Periodic { .. } => (self.grid.nx() - 1) * (self.grid.nx() - 1),
            _ => self.grid.len(),
        }
    }

    /// Full-grid field from free variables.
    pub fn expand(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.expanded(x).into_owned()
    }

    fn expanded<'b>(&self, x: &'b [Complex64]) -> Cow<'b, [Complex64]> {
        match &self.param {
            Parametrization::Periodic { px, py } => {
                let g = &self.grid;
                let n = g.nx() - 1;
                let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
                for j in 0..n {
                    out[g.idx(0, j)..g.idx(0, j) + n].copy_from_slice(&x[j * n..(j + 1) * n]);
                    out[g.idx(n, j)] = px[j] * x[j * n];
                }
                for i in 0..n {
                    out[g.idx(i, n)] = py[i] * x[i];
                }
                out[g.idx(n, n)] = px[n] * out[g.idx(0, n)];
                Cow::Owned(out)
            }
            _ => Cow::Borrowed(x),
        }
    }

    /// Adjoint of `expand` for gradients in the `d/dRe + i d/dIm` convention.
    fn fold(&self, full: &[Complex64], out: &mut [Complex64]) {
        match &self.param {
            Parametrization::Periodic { px, py } => {
                let g = &self.grid;
                let n = g.nx() - 1;
                for j in 0..n {
                    out[j * n..(j + 1) * n].copy_from_slice(&full[g.idx(0, j)..g.idx(0, j) + n]);
                }
                // Corner (n, n) = px[n] * py[0] * x(0, 0) via (0, n).
                let corner = full[g.idx(n, n)];
                let mut row_n: Vec<Complex64> = (0..=n).map(|i| full[g.idx(i, n)]).collect();
                row_n[0] += px[n].conj() * corner;
                for i in 0..n {
                    out[i] += py[i].conj() * row_n[i];
                }
                for j in 0..n {
                    out[j * n] += px[j].conj() * full[g.idx(n, j)];
                }
            }
            _ => out.copy_from_slice(full),
        }
    }

    pub fn energy(&self, x: &[Complex64]) -> f64 {
        let zero = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.quartic(x, &zero)[0]
    }

    pub fn gradient(&self, x: &[Complex64], out: &mut [Complex64]) {
        match self.param {
            Parametrization::Periodic { .. } => {
                let full = self.expanded(x);
                let mut gfull = vec![Complex64::new(0.0, 0.0); self.grid.len()];
                psi_gradient_into(&full, self.links_x, self.links_y, &self.grid, self.kappa, &mut gfull);
                self.fold(&gfull, out);
            }
            Parametrization::Free => psi_gradient_into(x, self.links_x, self.links_y, &self.grid, self.kappa, out),
            Parametrization::Dirichlet => {
                psi_gradient_into(x, self.links_x, self.links_y, &self.grid, self.kappa, out);
                let g = &self.grid;
                let (nx, ny) = (g.nx(), g.ny());
                out[..nx].fill(Complex64::new(0.0, 0.0));
                out[(ny - 1) * nx..].fill(Complex64::new(0.0, 0.0));
                for j in 1..ny - 1 {
                    out[j * nx] = Complex64::new(0.0, 0.0);
                    out[j * nx + nx - 1] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Coefficients of `t -> E(x + t d)`.
    pub fn quartic(&self, x: &[Complex64], d: &[Complex64]) -> [f64; 5] {
        let (fx, fd) = (self.expanded(x), self.expanded(d));
        line_quartic(&fx, &fd, self.links_x, self.links_y, &self.grid, self.kappa)
    }

    /// `sup |dE/dx_k| / (2 h^2 W_k)`: a sup-norm of the continuum residual.
    pub fn stationarity(&self, g: &[Complex64]) -> f64 {
        g.par_iter().zip(self.node_weight.par_iter()).map(|(z, w)| z.norm() / w).reduce(|| 0.0, f64::max)
    }
}

#[inline]
fn rdot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Global minimizer over `t >= 0` of a quartic with `c[4] > 0`, or of a
/// quadratic when `c[3] = c[4] = 0` and `c[2] > 0`.
pub(crate) fn quartic_argmin(c: &[f64; 5]) -> Option<f64> {
    let p = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])));
    let mut roots = cubic_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
    roots.retain(|t| t.is_finite() && *t > 0.0);
    let best = roots.into_iter().min_by(|a, b| p(*a).total_cmp(&p(*b)))?;
    (p(best) <= c[0]).then_some(best)
}

/// Real roots of `a t^3 + b t^2 + c t + d`, polished by Newton steps.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return vec![];
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return if c != 0.0 { vec![-d / c] } else { vec![] };
        }
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return vec![];
        }
        let q = -0.5 * (c + c.signum() * disc.sqrt());
        let mut v = vec![];
        if q != 0.0 {
            v.push(q / b);
            v.push(d / q);
        } else {
            v.push(0.0);
        }
        return v;
    }
    let (b, c, d) = (b / a, c / a, d / a);
    let q = (b * b - 3.0 * c) / 9.0;
    let r = (2.0 * b * b * b - 9.0 * b * c + 27.0 * d) / 54.0;
    let mut roots = if r * r < q * q * q {
        let th = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let s = -2.0 * q.sqrt();
        let tau = std::f64::consts::TAU;
        vec![s * (th / 3.0).cos() - b / 3.0, s * ((th + tau) / 3.0).cos() - b / 3.0, s * ((th - tau) / 3.0).cos() - b / 3.0]
    } else {
        let aa = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let bb = if aa != 0.0 { q / aa } else { 0.0 };
        vec![aa + bb - b / 3.0]
    };
    for t in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*t + b) * *t + c) * *t + d;
            let df = (3.0 * *t + 2.0 * b) * *t + c;
            if df != 0.0 {
                *t -= f / df;
            }
        }
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iter: usize,
    /// Stop when `stationarity <= tol`.
    pub tol: f64,
    /// Record every `trace_every`-th iterate (0 disables the trace).
    pub trace_every: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { max_iter: 20_000, tol: 1e-8, trace_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentReport {
    pub iterations: usize,
    pub energy: f64,
    pub stationarity: f64,
    pub converged: bool,
    pub fallback_steps: usize,
    pub trace: Vec<TracePoint>,
}

/// Minimize from `x` (overwritten with the final iterate).
pub fn minimize_psi(problem: &PsiProblem, x: &mut [Complex64], cfg: &DescentConfig) -> DescentReport {
    let n = problem.dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut g = vec![zero; n];
    problem.gradient(x, &mut g);
    let pre = &problem.precond;
    let apply_pre = |g: &[Complex64], z: &mut [Complex64]| {
        z.par_iter_mut().zip(g.par_iter()).zip(pre.par_iter()).for_each(|((zi, gi), p)| *zi = gi / p);
    };
    let mut z = vec![zero; n];
    apply_pre(&g, &mut z);
    let mut d: Vec<Complex64> = z.iter().map(|v| -v).collect();
    let mut gz = rdot(&g, &z);
    let mut g_new = vec![zero; n];
    let mut z_new = vec![zero; n];
    let mut x_prev = x.to_vec();
    let mut g_prev = g.clone();
    let mut trace = Vec::new();
    let mut fallback_steps = 0;
    let mut energy = problem.energy(x);
    let mut stat = problem.stationarity(&g);
    let mut it = 0;
    while it < cfg.max_iter {
        if stat <= cfg.tol {
            break;
        }
        if cfg.trace_every > 0 && it % cfg.trace_every == 0 {
            trace.push(TracePoint { iter: it, energy, grad_norm: stat });
        }
        if rdot(&g, &d) >= 0.0 {
            d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
        }
        let c = problem.quartic(x, &d);
        energy = c[0];
        match quartic_argmin(&c) {
            Some(t) => {
                x_prev.copy_from_slice(x);
                g_prev.copy_from_slice(&g);
                x.par_iter_mut().zip(d.par_iter()).for_each(|(xi, di)| *xi += t * di);
            }
            None => {
                // Barzilai-Borwein step along the preconditioned gradient,
                // halved until the energy decreases.
                fallback_steps += 1;
                let s: Vec<Complex64> = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
                let y: Vec<Complex64> = g.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
                let sy = rdot(&s, &y);
                let mut t = if sy > 0.0 { rdot(&s, &s) / sy } else { 1.0 / pre.iter().cloned().fold(0.0, f64::max) };
                let trial_dir: Vec<Complex64> = g.iter().map(|v| -v).collect();
                let mut accepted = false;
                for _ in 0..60 {
                    let cand: Vec<Complex64> = x.iter().zip(&trial_dir).map(|(a, b)| a + t * b).collect();
                    if problem.energy(&cand) < energy {
                        x_prev.copy_from_slice(x);
                        g_prev.copy_from_slice(&g);
                        x.copy_from_slice(&cand);
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        problem.gradient(x, &mut g_new);
        apply_pre(&g_new, &mut z_new);
        let gz_new = rdot(&g_new, &z_new);
        let cross = rdot(&g_new, &z);
        let beta = ((gz_new - cross) / gz).max(0.0);
        d.par_iter_mut().zip(z_new.par_iter()).for_each(|(di, zi)| *di = -zi + beta * *di);
        std::mem::swap(&mut g, &mut g_new);
        std::mem::swap(&mut z, &mut z_new);
        gz = gz_new;
        stat = problem.stationarity(&g);
        it += 1;
    }
    energy = problem.energy(x);
    if cfg.trace_every > 0 {
        trace.push(TracePoint { iter: it, energy, grad_norm: stat });
    }
    DescentReport { iterations: it, energy, stationarity: stat, converged: stat <= cfg.tol, fallback_steps, trace }
}
