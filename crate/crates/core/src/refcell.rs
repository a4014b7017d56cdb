//! Reference-cell problems: minimize
//! `F(u) = int_Q b |(grad - i sigma A0) u|^2 + (1 - |u|^2)^2 / 2` on the square
//! `Q_R = (-R/2, R/2)^2` under Dirichlet, Neumann or magnetic-periodic
//! boundary conditions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, Params};
use crate::error::{Error, Result};
use crate::field::{GaugeField, OrderParameter, ScalarField};
use crate::grid::Grid2D;
use crate::optim::{minimize_psi, DescentConfig, Parametrization, PsiProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 3] = [Self::Dirichlet, Self::Neumann, Self::Periodic];
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::Periodic => "periodic",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::InvalidParameter(format!("unknown boundary condition '{other}'"))),
        }
    }
}

/// Cells per unit length: 64 cells across `R^2 = 8 pi`.
pub const DEFAULT_DENSITY: f64 = 12.766_152_972_845_177;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProblem {
    pub b: f64,
    pub r: f64,
    pub bc: BoundaryCondition,
    pub sigma: i8,
    pub cells: usize,
    /// Random starts in addition to the constant and zero starts.
    pub random_starts: usize,
    pub seed: u64,
    pub descent: DescentConfig,
    /// Every start is first descended to this residual; only starts within
    /// `screen_gap` (cell-energy units) of the best are then polished to
    /// `descent.tol`.
    pub screen_tol: f64,
    pub screen_gap: f64,
}

impl CellProblem {
    /// Default resolution and restarts; tolerance `1e-8 max(1, 1/b)`.
    pub fn new(b: f64, r: f64, bc: BoundaryCondition) -> Self {
        let cells = ((r * DEFAULT_DENSITY).round() as usize).max(4);
        Self {
            b,
            r,
            bc,
            sigma: 1,
            cells,
            random_starts: 5,
            seed: 0,
            descent: DescentConfig { max_iter: 40_000, tol: 1e-8 * (1.0 / b).max(1.0), trace_every: 0 },
            screen_tol: 1e-4,
            screen_gap: 1e-3 * r * r,
        }
    }

    /// Side from a flux count: `R^2 = 2 pi k`.
    pub fn side_from_flux(k: f64) -> f64 {
        (std::f64::consts::TAU * k).sqrt()
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::centered_square(self.r, self.cells)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {}", self.b)));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::InvalidParameter(format!("R must be positive, got {}", self.r)));
        }
        if self.sigma != 1 && self.sigma != -1 {
            return Err(Error::InvalidParameter(format!("sigma must be +1 or -1, got {}", self.sigma)));
        }
        if self.bc == BoundaryCondition::Periodic {
            let k = self.r * self.r / std::f64::consts::TAU;
            if (k - k.round()).abs() > 1e-12 * k.max(1.0) || k.round() < 1.0 {
                return Err(Error::InvalidPeriodicSize(k));
            }
        }
        Ok(())
    }

    /// `sigma A0` with unit `kappa H`.
    pub fn gauge(&self) -> Result<GaugeField> {
        GaugeField::symmetric(self.grid()?, 1.0, [0.0, 0.0], self.sigma as f64)
    }

    fn parametrization(&self, g: &Grid2D) -> Parametrization {
        match self.bc {
            BoundaryCondition::Dirichlet => Parametrization::Dirichlet,
            BoundaryCondition::Neumann => Parametrization::Free,
            BoundaryCondition::Periodic => {
                let (s, r) = (self.sigma as f64, self.r);
                let n = g.nx() - 1;
                Parametrization::Periodic {
                    px: (0..=n).map(|j| Complex64::from_polar(1.0, s * r * g.y(j) / 2.0)).collect(),
                    py: (0..=n).map(|i| Complex64::from_polar(1.0, -s * r * g.x(i) / 2.0)).collect(),
                }
            }
        }
    }

    /// Cell functional `F = b E` evaluated by the core quadrature.
    pub fn functional(&self, u: &OrderParameter) -> Result<f64> {
        let a = self.gauge()?;
        let p = Params::for_cell(self.b)?;
        let b0 = ScalarField::from_fn(*a.grid(), |_| self.sigma as f64);
        Ok(self.b * energy(u, &a, &b0, &p, None)?.total)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub problem: CellProblem,
    pub energy: f64,
    pub minimizer: OrderParameter,
    /// Sup-norm residual at termination.
    pub residual: f64,
    pub converged: bool,
    /// Number of starts tried.
    pub restarts: usize,
    /// Descent iterations of the winning start.
    pub iterations: usize,
    /// Label of the winning start.
    pub best_start: String,
    pub seconds: f64,
}

impl CellResult {
    pub fn energy_per_area(&self) -> f64 {
        self.energy / (self.problem.r * self.problem.r)
    }
}

struct Run {
    start: usize,
    x: Vec<Complex64>,
    energy: f64,
    residual: f64,
    converged: bool,
    iterations: usize,
}

struct Start {
    label: String,
    psi: Vec<Complex64>,
}

fn default_starts(p: &CellProblem, g: &Grid2D) -> Vec<Start> {
    let mut starts = Vec::new();
    starts.push(Start { label: "zero".into(), psi: vec![Complex64::new(0.0, 0.0); g.len()] });
    starts.push(Start { label: "constant".into(), psi: vec![Complex64::new(1.0, 0.0); g.len()] });
    for k in 0..p.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        let psi = (0..g.len())
            .map(|_| {
                let z = Complex64::from_polar(rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
                // Conjugate starts make the sigma = -1 problem the mirror image.
                if p.sigma < 0 {
                    z.conj()
                } else {
                    z
                }
            })
            .collect();
        starts.push(Start { label: format!("random{k}"), psi });
    }
    starts
}

/// Multi-start minimization with the default starts.
pub fn solve_cell(p: &CellProblem) -> Result<CellResult> {
    solve_cell_with(p, &[])
}

/// Multi-start minimization with extra labelled initial fields (on the
/// problem grid) tried alongside the defaults.
pub fn solve_cell_with(p: &CellProblem, extra: &[(String, OrderParameter)]) -> Result<CellResult> {
    p.validate()?;
    let t0 = Instant::now();
    let g = p.grid()?;
    let a = p.gauge()?;
    let param = p.parametrization(&g);
    let prob = PsiProblem::new(g, a.links_x(), a.links_y(), 1.0 / p.b.sqrt(), param);
    let mut starts = default_starts(p, &g);
    for (label, psi) in extra {
        g.check_same(psi.grid())?;
        starts.push(Start { label: label.clone(), psi: psi.values().to_vec() });
    }
    let screen = DescentConfig { tol: p.screen_tol.max(p.descent.tol), ..p.descent };
    let descend = |x: &mut Vec<Complex64>, cfg: &DescentConfig| {
        let mut rep = minimize_psi(&prob, x, cfg);
        let mut iters = rep.iterations;
        if prob.expand(x).iter().any(|z| z.norm() > 1.0) {
            // Truncation never raises the energy; polish afterwards.
            x.iter_mut().for_each(|z| *z /= z.norm().max(1.0));
            rep = minimize_psi(&prob, x, cfg);
            iters += rep.iterations;
        }
        (rep, iters)
    };
    let mut runs: Vec<Run> = starts
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut x = restrict(p, &g, &s.psi);
            let (rep, iters) = descend(&mut x, &screen);
            Run { start: k, x, energy: rep.energy, residual: rep.stationarity, converged: rep.converged, iterations: iters }
        })
        .collect();
    let lowest = runs.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    let gap = p.screen_gap / p.b;
    runs.par_iter_mut().filter(|r| r.energy <= lowest + gap).for_each(|r| {
        let (rep, iters) = descend(&mut r.x, &p.descent);
        r.energy = rep.energy;
        r.residual = rep.stationarity;
        r.converged = rep.converged;
        r.iterations += iters;
    });
    let best = runs
        .iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.start.cmp(&b.start)))
        .expect("at least one start");
    let minimizer = OrderParameter::new(g, prob.expand(&best.x))?;
    let energy = p.functional(&minimizer)?;
    Ok(CellResult {
        problem: p.clone(),
        energy,
        minimizer,
        residual: best.residual,
        converged: best.residual <= p.descent.tol,
        restarts: starts.len(),
        iterations: best.iterations,
        best_start: starts[best.start].label.clone(),
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Free variables for a full-grid initial field.
fn restrict(p: &CellProblem, g: &Grid2D, psi: &[Complex64]) -> Vec<Complex64> {
    match p.bc {
        BoundaryCondition::Neumann => psi.to_vec(),
        BoundaryCondition::Dirichlet => {
            let mut v = psi.to_vec();
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    if i == 0 || j == 0 || i == g.nx() - 1 || j == g.ny() - 1 {
                        v[g.idx(i, j)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            v
        }
        BoundaryCondition::Periodic => {
            let n = g.nx() - 1;
            (0..n * n).map(|k| psi[g.idx(k % n, k / n)]).collect()
        }
    }
}

/// Tile a Dirichlet minimizer on `Q_R` (even cell count) onto `Q_2R` by the
/// magnetic translations `u(x) -> e^{i sigma A0(c).x} u(x - c)`,
/// `c = (+-R/2, +-R/2)`. The result vanishes on all seams and has exactly
/// four times the energy.
pub fn tile_dirichlet(p: &CellProblem, u: &OrderParameter) -> Result<(CellProblem, OrderParameter)> {
    let n = p.cells;
    let g = p.grid()?;
    g.check_same(u.grid())?;
    let mut big = p.clone();
    big.r = 2.0 * p.r;
    big.cells = 2 * n;
    let gb = big.grid()?;
    let s = p.sigma as f64;
    let half = p.r / 2.0;
    let mut out = vec![Complex64::new(0.0, 0.0); gb.len()];
    for (ci, cx) in [(0usize, -half), (n, half)] {
        for (cj, cy) in [(0usize, -half), (n, half)] {
            for j in 0..=n {
                for i in 0..=n {
                    let [x, y] = gb.point(ci + i, cj + j);
                    // A0(c).x = (-cy x + cx y) / 2
                    let phase = Complex64::from_polar(1.0, s * 0.5 * (-cy * x + cx * y));
                    let v = phase * u.at(i, j);
                    let k = gb.idx(ci + i, cj + j);
                    if i == 0 || j == 0 || i == n || j == n {
                        continue;
                    }
                    out[k] = v;
                }
            }
        }
    }
    Ok((big, OrderParameter::new(gb, out)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub b: f64,
    pub r: f64,
    pub e_dirichlet: f64,
    pub e_periodic: f64,
    pub e_neumann: f64,
    pub ordering_ok: bool,
    /// `(e_D - e_N) / (R sqrt(b))`.
    pub c_hat: f64,
    pub e_dirichlet_2r: Option<f64>,
    pub subadditive_ok: Option<bool>,
    pub all_converged: bool,
}

/// Slack allowed in the ordering checks: `1e-4 R^2`.
pub fn ordering_slack(r: f64) -> f64 {
    1e-4 * r * r
}

/// Solve the three cell problems with nested warm starts (the Dirichlet
/// minimizer seeds the periodic solve, whose minimizer seeds the Neumann
/// solve), and optionally the doubled Dirichlet cell seeded by tiling.
pub fn cell_inequalities(template: &CellProblem, with_doubling: bool) -> Result<(InequalityReport, Vec<CellResult>)> {
    if !(template.b > 0.0 && template.b < 1.0 && template.r >= 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < b < 1 and R >= 1, got b = {}, R = {}", template.b, template.r)));
    }
    let with_bc = |bc| CellProblem { bc, ..template.clone() };
    let d = solve_cell(&with_bc(BoundaryCondition::Dirichlet))?;
    let per = solve_cell_with(&with_bc(BoundaryCondition::Periodic), &[("dirichlet".into(), d.minimizer.clone())])?;
    let neu = solve_cell_with(&with_bc(BoundaryCondition::Neumann), &[("periodic".into(), per.minimizer.clone())])?;
    let slack = ordering_slack(template.r);
    let ordering_ok = neu.energy <= per.energy + slack && per.energy <= d.energy + slack;
    let c_hat = (d.energy - neu.energy) / (template.r * template.b.sqrt());
    let mut results = vec![d, per, neu];
    let (mut e2, mut sub_ok) = (None, None);
    if with_doubling {
        let d1 = &results[0];
        let (big, tiled) = tile_dirichlet(&d1.problem, &d1.minimizer)?;
        let d2 = solve_cell_with(&big, &[("tiled".into(), tiled)])?;
        e2 = Some(d2.energy);
        sub_ok = Some(d2.energy <= 4.0 * d1.energy * (1.0 + 1e-3));
        results.push(d2);
    }
    let all_converged = results.iter().all(|r| r.converged);
    Ok((
        InequalityReport {
            b: template.b,
            r: template.r,
            e_dirichlet: results[0].energy,
            e_periodic: results[1].energy,
            e_neumann: results[2].energy,
            ordering_ok,
            c_hat,
            e_dirichlet_2r: e2,
            subadditive_ok: sub_ok,
            all_converged,
        },
        results,
    ))
}

pub const CSV_HEADER: &str = "bc,sigma,b,R,energy,energy_per_area,residual,converged,restarts,seconds";

/// One CSV row; `seconds` is left empty unless `timings` is set so that
/// repeated runs produce identical files.
pub fn csv_row(r: &CellResult, timings: bool) -> String {
    let p = &r.problem;
    let secs = if timings { format!("{:.3}", r.seconds) } else { String::new() };
    format!(
        "{},{},{:e},{:e},{:e},{:e},{:e},{},{},{}",
        p.bc,
        p.sigma,
        p.b,
        p.r,
        r.energy,
        r.energy_per_area(),
        r.residual,
        r.converged,
        r.restarts,
        secs
    )
}

pub fn write_csv(mut w: impl Write, rows: &[CellResult], preamble: &[String], timings: bool) -> std::io::Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", csv_row(r, timings))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(b: f64, k: f64, bc: BoundaryCondition) -> CellProblem {
        let mut p = CellProblem::new(b, CellProblem::side_from_flux(k), bc);
        p.cells = 24;
        p.random_starts = 2;
        p
    }

    #[test]
    fn zero_field_energy_is_half_area() {
        let p = small(0.5, 4.0, BoundaryCondition::Neumann);
        let u = OrderParameter::constant(p.grid().unwrap(), Complex64::new(0.0, 0.0));
        let e = p.functional(&u).unwrap();
        assert!((e - 0.5 * p.r * p.r).abs() < 1e-12 * e);
    }

    #[test]
    fn periodic_needs_quantized_side() {
        let mut p = small(0.5, 4.0, BoundaryCondition::Periodic);
        p.r = 5.0;
        assert!(matches!(solve_cell(&p), Err(Error::InvalidPeriodicSize(_))));
    }

    #[test]
    fn normal_state_wins_above_unit_field() {
        let p = small(1.5, 4.0, BoundaryCondition::Dirichlet);
        let r = solve_cell(&p).unwrap();
        let d = r.energy_per_area();
        assert!((0.48..=0.5 + 1e-9).contains(&d), "{d}");
    }

    #[test]
    fn tiling_quadruples_energy() {
        let p = small(0.3, 1.0, BoundaryCondition::Dirichlet);
        let r = solve_cell(&p).unwrap();
        let (big, tiled) = tile_dirichlet(&p, &r.minimizer).unwrap();
        let e = big.functional(&tiled).unwrap();
        assert!((e - 4.0 * r.energy).abs() < 1e-10 * e, "{e} vs {}", 4.0 * r.energy);
    }

    #[test]
    fn conjugate_problem_has_same_energy() {
        let mut p = small(0.4, 2.0, BoundaryCondition::Neumann);
        let e1 = solve_cell(&p).unwrap().energy;
        p.sigma = -1;
        let e2 = solve_cell(&p).unwrap().energy;
        assert!((e1 - e2).abs() <= 1e-10 * e1, "{e1} {e2}");
    }

    #[test]
    fn csv_row_is_stable() {
        let p = small(0.5, 1.0, BoundaryCondition::Dirichlet);
        let r = solve_cell(&p).unwrap();
        let line = csv_row(&r, false);
        assert!(line.starts_with("dirichlet,1,5e-1,"));
        assert!(line.ends_with(','));
    }
}
