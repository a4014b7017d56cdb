//! Full-domain minimization of the GL energy over `(psi, A)` for a variable
//! applied field.
//!
//! The order parameter is descended on a hierarchy of nested grids (coarse
//! solve, covariant prolongation, refine). In coupled mode the stream
//! function is then updated in alternation with `psi`: each stream step takes
//! a Gauss-Newton direction from a conjugate-gradient solve and a backtracking
//! line search on the total energy.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, gradient, psi_residual, EnergyBreakdown, Params};
use crate::error::{Error, Result};
use crate::field::{stream_line_adjoint, stream_line_integrals, GaugeField, OrderParameter};
use crate::fieldgen::{build_f, MagneticProfile};
use crate::grid::Grid2D;
use crate::linalg::{conjugate_gradient, dot};
use crate::optim::{minimize_psi, DescentConfig, Parametrization, PsiProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PsiOnly,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Uniform,
    RandomPhase,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mode: Mode,
    /// Initialization of restart 0; later restarts use seeded random phases.
    pub init: Init,
    /// Stationarity target relative to `max(1, kappa^2)`.
    pub tol: f64,
    /// Descent iterations per grid level.
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Resolution constant: `h <= c_res (kappa H sup|B0|)^(-1/2)`.
    pub c_res: f64,
    /// Coarsest level has at least this many cells per side.
    pub min_coarse_cells: usize,
    /// Relative stationarity for levels below the finest.
    pub coarse_tol: f64,
    /// Carry only the best restart through the finest level.
    pub prune_before_finest: bool,
    /// Alternations of stream and psi steps in coupled mode.
    pub max_outer: usize,
    /// Descent iterations of each psi step inside the coupled loop.
    pub inner_iter: usize,
    pub trace_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mode: Mode::PsiOnly,
            init: Init::RandomPhase,
            tol: 1e-8,
            max_iter: 20_000,
            restarts: 5,
            seed: 0,
            c_res: 0.25,
            min_coarse_cells: 64,
            coarse_tol: 1e-5,
            prune_before_finest: true,
            max_outer: 8,
            inner_iter: 400,
            trace_every: 10,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restart count must be at least 1".into()));
        }
        Ok(())
    }
}

/// `h <= c_res (kappa H sup|B0|)^(-1/2)`.
pub fn check_resolution(g: &Grid2D, kappa: f64, field: f64, sup_b0: f64, c_res: f64) -> Result<()> {
    let limit = c_res / (kappa * field * sup_b0).sqrt();
    if g.h() > limit * (1.0 + 1e-12) {
        return Err(Error::Resolution { h: g.h(), limit });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub mode: TraceMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    Psi,
    Stream,
}

impl TraceMode {
    fn as_str(&self) -> &'static str {
        match self {
            TraceMode::Psi => "psi",
            TraceMode::Stream => "stream",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub psi: OrderParameter,
    pub a: GaugeField,
    pub energy: EnergyBreakdown,
    /// Finest-level trace of the returned restart.
    pub trace: Vec<TraceRow>,
    /// `sup |dE/dpsi| / (2 h^2 W)` at the end.
    pub psi_stationarity: f64,
    pub converged: bool,
    pub restart: usize,
    /// Energy of every restart at the level where restarts were compared.
    pub restart_energies: Vec<f64>,
}

/// Gauge-covariant prolongation from a grid to the grid with half the
/// spacing, using the fine links to transport values along edges.
pub fn prolong(coarse: &[Complex64], gc: &Grid2D, fine: &GaugeField) -> Vec<Complex64> {
    let gf = fine.grid();
    let (lx, ly) = (fine.links_x(), fine.links_y());
    let mut out = vec![Complex64::new(0.0, 0.0); gf.len()];
    for j in 0..gc.ny() {
        for i in 0..gc.nx() {
            out[gf.idx(2 * i, 2 * j)] = coarse[gc.idx(i, j)];
        }
    }
    // Edge midpoints.
    for j in (0..gf.ny()).step_by(2) {
        for i in (1..gf.nx()).step_by(2) {
            let from_left = lx[gf.xedge(i - 1, j)].conj() * out[gf.idx(i - 1, j)];
            let from_right = lx[gf.xedge(i, j)] * out[gf.idx(i + 1, j)];
            out[gf.idx(i, j)] = 0.5 * (from_left + from_right);
        }
    }
    for j in (1..gf.ny()).step_by(2) {
        for i in (0..gf.nx()).step_by(2) {
            let from_below = ly[gf.yedge(i, j - 1)].conj() * out[gf.idx(i, j - 1)];
            let from_above = ly[gf.yedge(i, j)] * out[gf.idx(i, j + 1)];
            out[gf.idx(i, j)] = 0.5 * (from_below + from_above);
        }
    }
    // Cell centers from the four edge midpoints.
    for j in (1..gf.ny()).step_by(2) {
        for i in (1..gf.nx()).step_by(2) {
            let s = ly[gf.yedge(i, j - 1)].conj() * out[gf.idx(i, j - 1)]
                + ly[gf.yedge(i, j)] * out[gf.idx(i, j + 1)]
                + lx[gf.xedge(i - 1, j)].conj() * out[gf.idx(i - 1, j)]
                + lx[gf.xedge(i, j)] * out[gf.idx(i + 1, j)];
            out[gf.idx(i, j)] = 0.25 * s;
        }
    }
    out
}

struct Level {
    profile: MagneticProfile,
    f: GaugeField,
}

fn hierarchy(b0: &MagneticProfile, kappa_h: f64, min_cells: usize) -> Result<Vec<Level>> {
    let mut profiles = vec![b0.clone()];
    loop {
        let g = profiles.last().unwrap().grid();
        let (cx, cy) = (g.nx() - 1, g.ny() - 1);
        if cx % 2 != 0 || cy % 2 != 0 || cx / 2 < min_cells || cy / 2 < min_cells {
            break;
        }
        let c = profiles.last().unwrap().coarsened()?;
        profiles.push(c);
    }
    profiles.reverse();
    profiles
        .into_iter()
        .map(|profile| {
            let f = build_f(&profile, kappa_h, 1e-10)?;
            Ok(Level { profile, f })
        })
        .collect()
}

fn initial(init: Init, g: &Grid2D, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    match init {
        Init::Uniform => vec![Complex64::new(1.0, 0.0); g.len()],
        Init::Zero => vec![Complex64::new(0.0, 0.0); g.len()],
        Init::RandomPhase => (0..g.len()).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect(),
    }
}

fn descend(level: &Level, kappa: f64, x: &mut Vec<Complex64>, cfg: &DescentConfig) -> crate::optim::DescentReport {
    let g = *level.f.grid();
    let prob = PsiProblem::new(g, level.f.links_x(), level.f.links_y(), kappa, Parametrization::Free);
    let mut rep = minimize_psi(&prob, x, cfg);
    if x.iter().any(|z| z.norm() > 1.0) {
        x.iter_mut().for_each(|z| *z /= z.norm().max(1.0));
        let more = minimize_psi(&prob, x, cfg);
        let mut trace = rep.trace;
        let base = rep.iterations;
        trace.extend(more.trace.into_iter().map(|mut t| {
            t.iter += base;
            t
        }));
        rep = crate::optim::DescentReport { iterations: base + more.iterations, trace, ..more };
    }
    rep
}

/// Minimize over `psi` (and the stream function in coupled mode).
pub fn minimize(b0: &MagneticProfile, kappa: f64, field: f64, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let p = Params::new(kappa, field)?;
    let g = *b0.grid();
    check_resolution(&g, kappa, field, b0.sup_abs(), cfg.c_res)?;
    let kh = p.kappa_h();
    let levels = hierarchy(b0, kh, cfg.min_coarse_cells)?;
    let scale = kappa.powi(2).max(1.0);
    let fine_cfg = DescentConfig { max_iter: cfg.max_iter, tol: cfg.tol * scale, trace_every: cfg.trace_every };
    let coarse_cfg = DescentConfig { max_iter: cfg.max_iter, tol: cfg.coarse_tol.max(cfg.tol) * scale, trace_every: 0 };
    let nlev = levels.len();
    let prune_at = if cfg.prune_before_finest && nlev > 1 { nlev - 1 } else { nlev };

    // Levels below `prune_at` for every restart.
    let staged: Vec<(usize, Vec<Complex64>, f64)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
            let init = if k == 0 { cfg.init } else { Init::RandomPhase };
            let mut x = initial(init, levels[0].f.grid(), &mut rng);
            let mut e = f64::NAN;
            for (l, level) in levels.iter().enumerate().take(prune_at) {
                if l > 0 {
                    x = prolong(&x, levels[l - 1].f.grid(), &level.f);
                }
                let c = if l + 1 == nlev { fine_cfg } else { coarse_cfg };
                e = descend(level, kappa, &mut x, &c).energy;
            }
            (k, x, e)
        })
        .collect();
    let restart_energies: Vec<f64> = staged.iter().map(|s| s.2).collect();
    let survivors: Vec<&(usize, Vec<Complex64>, f64)> = if prune_at < nlev {
        let best = staged.iter().min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0))).unwrap();
        vec![best]
    } else {
        staged.iter().collect()
    };

    let finest = &levels[nlev - 1];
    let b0f = finest.profile.field();
    let finals: Vec<Result<SolveResult>> = survivors
        .into_par_iter()
        .map(|(k, x, _)| {
            let mut x = x.clone();
            let mut trace = Vec::new();
            if prune_at < nlev {
                x = prolong(&x, levels[nlev - 2].f.grid(), &finest.f);
                let rep = descend(finest, kappa, &mut x, &fine_cfg);
                trace.extend(rep.trace.iter().map(|t| TraceRow { iter: t.iter, energy: t.energy, grad_norm: t.grad_norm, mode: TraceMode::Psi }));
            } else {
                // Already descended on the finest level; re-evaluate for the trace.
                let prob = PsiProblem::new(g, finest.f.links_x(), finest.f.links_y(), kappa, Parametrization::Free);
                let mut gr = vec![Complex64::new(0.0, 0.0); g.len()];
                prob.gradient(&x, &mut gr);
                trace.push(TraceRow { iter: 0, energy: prob.energy(&x), grad_norm: prob.stationarity(&gr), mode: TraceMode::Psi });
            }
            let mut a = finest.f.clone();
            if cfg.mode == Mode::Coupled {
                coupled_loop(&mut x, &mut a, finest, &p, cfg, &fine_cfg, &mut trace)?;
            }
            let psi = OrderParameter::new(g, x)?;
            let e = energy(&psi, &a, b0f, &p, None)?;
            let prob = PsiProblem::new(g, a.links_x(), a.links_y(), kappa, Parametrization::Free);
            let mut gr = vec![Complex64::new(0.0, 0.0); g.len()];
            prob.gradient(psi.values(), &mut gr);
            let stat = prob.stationarity(&gr);
            Ok(SolveResult {
                psi,
                a,
                energy: e,
                trace,
                psi_stationarity: stat,
                converged: stat <= fine_cfg.tol,
                restart: *k,
                restart_energies: vec![],
            })
        })
        .collect();
    let mut best: Option<SolveResult> = None;
    for r in finals {
        let r = r?;
        let better = match &best {
            None => true,
            Some(b) => r.energy.total < b.energy.total,
        };
        if better {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_energies = restart_energies;
    Ok(best)
}

/// Alternate stream steps and psi steps on the finest level, starting from
/// the psi-only result (so the energy can only go down).
fn coupled_loop(
    x: &mut Vec<Complex64>,
    a: &mut GaugeField,
    level: &Level,
    p: &Params,
    cfg: &SolveConfig,
    fine_cfg: &DescentConfig,
    trace: &mut Vec<TraceRow>,
) -> Result<()> {
    let g = *a.grid();
    let b0 = level.profile.field();
    let mut iter = trace.last().map_or(0, |t| t.iter);
    let mut psi = OrderParameter::new(g, x.clone())?;
    let mut e = energy(&psi, a, b0, p, None)?.total;
    for _ in 0..cfg.max_outer {
        let e_start = e;
        let (a_new, e_new, gnorm) = stream_step(&psi, a, b0, p)?;
        iter += 1;
        if e_new < e {
            *a = a_new;
            e = e_new;
        }
        trace.push(TraceRow { iter, energy: e, grad_norm: gnorm, mode: TraceMode::Stream });
        let prob = PsiProblem::new(g, a.links_x(), a.links_y(), p.kappa, Parametrization::Free);
        let inner = DescentConfig { max_iter: cfg.inner_iter, trace_every: 0, ..*fine_cfg };
        let rep = minimize_psi(&prob, x, &inner);
        x.iter_mut().for_each(|z| *z /= z.norm().max(1.0));
        psi = OrderParameter::new(g, x.clone())?;
        e = energy(&psi, a, b0, p, None)?.total;
        iter += rep.iterations;
        trace.push(TraceRow { iter, energy: e, grad_norm: rep.stationarity, mode: TraceMode::Psi });
        if e_start - e <= 1e-12 * e.abs() {
            break;
        }
    }
    Ok(())
}

/// One Gauss-Newton step on the stream function (boundary values fixed).
/// Returns the trial field, its total energy and the sup-norm of the stream
/// gradient before the step.
fn stream_step(psi: &OrderParameter, a: &GaugeField, b0: &crate::field::ScalarField, p: &Params) -> Result<(GaugeField, f64, f64)> {
    let g = *a.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let kh = p.kappa_h();
    let h2 = g.h() * g.h();
    let interior = |k: usize| {
        let (i, j) = (k % nx, k / nx);
        i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
    };
    let grad = gradient(psi, a, b0, p)?;
    let mut rhs: Vec<f64> = grad.stream.iter().enumerate().map(|(k, v)| if interior(k) { -v } else { 0.0 }).collect();
    let gnorm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (h2 * kh * kh);
    // Per-edge curvature of the kinetic term in the line integral.
    let z = psi.values();
    let mx: Vec<f64> = (0..g.n_xedges())
        .map(|e| {
            let (i, j) = (e % (nx - 1), e / (nx - 1));
            let w = Grid2D::trap(j, 0, ny - 1);
            let c = (z[g.idx(i, j)].conj() * a.links_x()[e] * z[g.idx(i + 1, j)]).re;
            2.0 * w * kh * kh * c.max(0.0)
        })
        .collect();
    let my: Vec<f64> = (0..g.n_yedges())
        .map(|e| {
            let (i, j) = (e % nx, e / nx);
            let w = Grid2D::trap(i, 0, nx - 1);
            let c = (z[g.idx(i, j)].conj() * a.links_y()[e] * z[g.idx(i, j + 1)]).re;
            2.0 * w * kh * kh * c.max(0.0)
        })
        .collect();
    let mag = 2.0 * kh * kh / h2;
    let apply = |v: &[f64], out: &mut [f64]| {
        let (lx, ly) = stream_line_integrals(&g, v);
        let mut circ = vec![0.0; g.n_cells()];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                circ[g.cell(i, j)] = lx[g.xedge(i, j)] + ly[g.yedge(i + 1, j)] - lx[g.xedge(i, j + 1)] - ly[g.yedge(i, j)];
            }
        }
        let mut gx: Vec<f64> = lx.iter().zip(&mx).map(|(l, m)| l * m).collect();
        let mut gy: Vec<f64> = ly.iter().zip(&my).map(|(l, m)| l * m).collect();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let c = mag * circ[g.cell(i, j)];
                gx[g.xedge(i, j)] += c;
                gy[g.yedge(i + 1, j)] += c;
                gx[g.xedge(i, j + 1)] -= c;
                gy[g.yedge(i, j)] -= c;
            }
        }
        let r = stream_line_adjoint(&g, &gx, &gy);
        for (k, o) in out.iter_mut().enumerate() {
            *o = if interior(k) { r[k] } else { 0.0 };
        }
    };
    let mut delta = vec![0.0; g.len()];
    let max_iter = 4 * (nx + ny) + 200;
    match conjugate_gradient(apply, &rhs, &mut delta, 1e-6, max_iter) {
        Ok(_) | Err(Error::LinearSolve { .. }) => {}
        Err(e) => return Err(e),
    }
    // Fall back to the gradient direction if the step is not descending.
    if dot(&delta, &rhs) <= 0.0 {
        delta.copy_from_slice(&rhs);
        rhs.iter_mut().for_each(|v| *v = 0.0);
    }
    let e0 = energy(psi, a, b0, p, None)?.total;
    let slope = -dot(&delta, &grad.stream);
    let mut t = 1.0;
    for _ in 0..40 {
        let s: Vec<f64> = a.stream().iter().zip(&delta).map(|(x, d)| x + t * d).collect();
        let trial = a.with_stream(s)?;
        let e = energy(psi, &trial, b0, p, None)?.total;
        if e <= e0 - 1e-4 * t * slope.abs() || (e < e0 && t < 1e-3) {
            return Ok((trial, e, gnorm));
        }
        t *= 0.5;
    }
    Ok((a.clone(), e0, gnorm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerDiagnostics {
    pub max_psi: f64,
    pub total: f64,
    pub magnetic: f64,
    /// `magnetic / (kappa H ln(kappa/H))`; `None` when `H >= kappa`.
    pub magnetic_ratio: Option<f64>,
    /// `||curl(A - F)||_{L^2}`.
    pub curl_diff_l2: f64,
    /// `total^(1/2) / (kappa H)`.
    pub curl_bound: f64,
    /// Sup-norm residual of the first GL equation.
    pub psi_residual: f64,
    /// Sup-norm of `dE/dxi / (h^2 (kappa H)^2)` over interior nodes.
    pub stream_residual: f64,
}

pub fn diagnose_minimizer(psi: &OrderParameter, a: &GaugeField, b0: &MagneticProfile, kappa: f64, field: f64) -> Result<MinimizerDiagnostics> {
    let p = Params::new(kappa, field)?;
    let g = *psi.grid();
    let e = energy(psi, a, b0.field(), &p, None)?;
    let f = build_f(b0, p.kappa_h(), 1e-10)?;
    let h2 = g.h() * g.h();
    let mut acc = 0.0;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let d = a.curl(i, j) - f.curl(i, j);
            acc += d * d;
        }
    }
    let res = psi_residual(psi, a, &p)?;
    let gr = gradient(psi, a, b0.field(), &p)?;
    let (nx, ny) = (g.nx(), g.ny());
    let stream_residual = gr
        .stream
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let (i, j) = (k % nx, k / nx);
            i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
        })
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
        / (h2 * p.kappa_h().powi(2));
    let log = (kappa / field).ln();
    Ok(MinimizerDiagnostics {
        max_psi: psi.max_modulus(),
        total: e.total,
        magnetic: e.magnetic,
        magnetic_ratio: (log > 0.0).then(|| e.magnetic / (p.kappa_h() * log)),
        curl_diff_l2: (acc * h2).sqrt(),
        curl_bound: e.total.sqrt() / p.kappa_h(),
        psi_residual: res.iter().fold(0.0f64, |m, z| m.max(z.norm())),
        stream_residual,
    })
}

pub const TRACE_HEADER: &str = "iter,energy,grad_norm,mode";

pub fn write_trace(mut w: impl Write, trace: &[TraceRow], preamble: &[String]) -> std::io::Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{TRACE_HEADER}")?;
    for t in trace {
        writeln!(w, "{},{:e},{:e},{}", t.iter, t.energy, t.grad_norm, t.mode.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::DEFAULT_NONDEGENERACY;
    use crate::field::ScalarField;

    #[test]
    fn prolongation_is_exact_for_pure_gauge_states() {
        let gf = Grid2D::centered_square(2.0, 16).unwrap();
        let gc = Grid2D::centered_square(2.0, 8).unwrap();
        let kh = 3.0;
        let phi = |p: [f64; 2]| (2.0 * p[0]).sin() + p[0] * p[1];
        let af = GaugeField::zero(gf, kh).unwrap().add_gradient(ScalarField::from_fn(gf, phi).values()).unwrap();
        let coarse: Vec<Complex64> = (0..gc.len()).map(|k| Complex64::from_polar(1.0, kh * phi(gc.point(k % gc.nx(), k / gc.nx())))).collect();
        let fine = prolong(&coarse, &gc, &af);
        for k in 0..gf.len() {
            let want = Complex64::from_polar(1.0, kh * phi(gf.point(k % gf.nx(), k / gf.nx())));
            assert!((fine[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn resolution_rule_is_enforced() {
        let g = Grid2D::centered_square(2.0, 16).unwrap();
        let b0 = MagneticProfile::constant(g, 1.0, DEFAULT_NONDEGENERACY).unwrap();
        let cfg = SolveConfig::default();
        assert!(matches!(minimize(&b0, 100.0, 100.0, &cfg), Err(Error::Resolution { .. })));
    }

    #[test]
    fn weak_field_keeps_superconducting_state() {
        let g = Grid2D::centered_square(2.0, 32).unwrap();
        let b0 = MagneticProfile::constant(g, 1.0, DEFAULT_NONDEGENERACY).unwrap();
        let cfg = SolveConfig { restarts: 2, min_coarse_cells: 16, init: Init::Uniform, ..Default::default() };
        let r = minimize(&b0, 5.0, 0.1, &cfg).unwrap();
        assert!(r.energy.total <= 25.0 * 4.0 * 1e-2, "{:?}", r.energy);
        assert!(r.psi.max_modulus() <= 1.0 + 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn strong_field_gives_normal_state() {
        let g = Grid2D::centered_square(2.0, 64).unwrap();
        let b0 = MagneticProfile::constant(g, 1.0, DEFAULT_NONDEGENERACY).unwrap();
        let cfg = SolveConfig { restarts: 2, min_coarse_cells: 16, ..Default::default() };
        // Above the surface critical field.
        let (k, h) = (4.0, 8.0);
        let r = minimize(&b0, k, h, &cfg).unwrap();
        let normal = k * k * 4.0 / 2.0;
        assert!((r.energy.total - normal).abs() <= 0.02 * normal, "{:?}", r.energy);
    }

    #[test]
    fn coupled_mode_does_not_raise_energy() {
        let g = Grid2D::centered_square(2.0, 64).unwrap();
        let b0 = MagneticProfile::x1(g, DEFAULT_NONDEGENERACY).unwrap();
        let base = SolveConfig { restarts: 1, min_coarse_cells: 16, ..Default::default() };
        let (k, h) = (6.0, 3.0);
        let psi_only = minimize(&b0, k, h, &base).unwrap();
        let coupled = minimize(&b0, k, h, &SolveConfig { mode: Mode::Coupled, ..base }).unwrap();
        assert!(coupled.energy.total <= psi_only.energy.total * (1.0 + 1e-12));
        assert!(coupled.trace.windows(2).all(|w| w[1].energy <= w[0].energy * (1.0 + 1e-12)));
        let d = diagnose_minimizer(&coupled.psi, &coupled.a, &b0, k, h).unwrap();
        assert!(d.max_psi <= 1.0 + 1e-6);
        assert!(d.curl_diff_l2 <= d.curl_bound * 1.01, "{d:?}");
    }

    #[test]
    fn normal_state_diagnostics_vanish() {
        let g = Grid2D::centered_square(2.0, 16).unwrap();
        let b0 = MagneticProfile::x1(g, DEFAULT_NONDEGENERACY).unwrap();
        let f = build_f(&b0, 12.0, 1e-12).unwrap();
        let psi = OrderParameter::constant(g, Complex64::new(0.0, 0.0));
        let d = diagnose_minimizer(&psi, &f, &b0, 4.0, 3.0).unwrap();
        assert_eq!(d.max_psi, 0.0);
        assert!(d.curl_diff_l2 < 1e-8);
        assert_eq!(d.psi_residual, 0.0);
        // F is the discrete least-squares normal-state potential; the leftover
        // curl mismatch is a discretization residue.
        assert!(d.stream_residual < 1e-8, "{d:?}");
        assert!(d.magnetic < 1e-2 * d.total, "{d:?}");
    }
}
