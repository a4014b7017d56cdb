//! Tabulation of the limiting energy density `f_hat(b)` from Dirichlet cell
//! energies, its brackets, and monotone interpolation.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OrderParameter;
use crate::refcell::{solve_cell_with, tile_dirichlet, BoundaryCondition, CellProblem, CellResult};

pub const TABLE_VERSION: &str = "glvar-fhat-v1";

/// Default `b` grid.
pub const DEFAULT_B: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.85, 1.0];

/// Default side schedule as flux counts `R^2 / 2 pi`.
pub const DEFAULT_FLUX: [f64; 3] = [4.0, 9.0, 16.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhatRow {
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
    pub mid: f64,
    /// Sides used, increasing.
    pub r: Vec<f64>,
    /// `e_D(b, R) / R^2` per side.
    pub density: Vec<f64>,
    /// Slope `c` of the fit `a + c / R` through the two largest sides.
    pub slope: f64,
    pub converged: bool,
}

impl FhatRow {
    /// Bracket width `C_hat sqrt(b) / R` implied at side `r`.
    pub fn width_at(&self, c_hat: f64, r: f64) -> f64 {
        if self.b >= 1.0 {
            0.0
        } else {
            c_hat * self.b.sqrt() / r
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhatTable {
    pub rows: Vec<FhatRow>,
    /// Universal constant in `f_hat >= e_D / R^2 - C_hat sqrt(b) / R`.
    pub c_hat: f64,
}

/// `(b/2) ln(1/b)`.
pub fn fhat_model_smallb(b: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameter(format!("small-b model needs 0 < b < 1, got {b}")));
    }
    Ok(0.5 * b * (1.0 / b).ln())
}

/// Settings shared by every cell solve of a tabulation.
#[derive(Debug, Clone)]
pub struct TabulationConfig {
    pub flux: Vec<f64>,
    pub density: f64,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for TabulationConfig {
    fn default() -> Self {
        Self { flux: DEFAULT_FLUX.to_vec(), density: crate::refcell::DEFAULT_DENSITY, random_starts: 5, seed: 0 }
    }
}

/// Dirichlet solves for every `(b, R)`; a side that doubles an earlier one is
/// also seeded with the tiled smaller minimizer.
pub fn solve_schedule(b: f64, cfg: &TabulationConfig) -> Result<Vec<CellResult>> {
    let mut flux = cfg.flux.clone();
    flux.sort_by(f64::total_cmp);
    let mut done: Vec<CellResult> = Vec::new();
    for &k in &flux {
        let r = CellProblem::side_from_flux(k);
        let mut p = CellProblem::new(b, r, BoundaryCondition::Dirichlet);
        p.cells = ((r * cfg.density).round() as usize).max(4);
        p.random_starts = cfg.random_starts;
        p.seed = cfg.seed;
        let mut extra: Vec<(String, OrderParameter)> = Vec::new();
        for prev in &done {
            let q = &prev.problem;
            if (2.0 * q.r - r).abs() <= 1e-12 * r && 2 * q.cells == p.cells {
                let (_, tiled) = tile_dirichlet(q, &prev.minimizer)?;
                extra.push(("tiled".into(), tiled));
            }
        }
        done.push(solve_cell_with(&p, &extra)?);
    }
    Ok(done)
}

/// Build a table from per-`b` Dirichlet results (each sorted by side).
pub fn table_from_results(results: &[(f64, Vec<CellResult>)]) -> Result<FhatTable> {
    let mut rows = Vec::new();
    for (b, res) in results {
        if res.is_empty() {
            return Err(Error::Table(format!("no cell results for b = {b}")));
        }
        let r: Vec<f64> = res.iter().map(|c| c.problem.r).collect();
        let density: Vec<f64> = res.iter().map(|c| c.energy_per_area()).collect();
        let upper = density.iter().cloned().fold(f64::INFINITY, f64::min);
        let converged = res.iter().all(|c| c.converged);
        let (mid, upper, slope) = if *b >= 1.0 {
            (0.5, upper.max(0.5), 0.0)
        } else if r.len() == 1 {
            (upper.clamp(0.0, 0.5), upper, 0.0)
        } else {
            let n = r.len();
            let (r1, r2, y1, y2) = (r[n - 2], r[n - 1], density[n - 2], density[n - 1]);
            let a = (r2 * y2 - r1 * y1) / (r2 - r1);
            let c = (y1 - y2) / (1.0 / r1 - 1.0 / r2);
            (a.clamp(0.0, 0.5).min(upper), upper, c)
        };
        rows.push(FhatRow { b: *b, lower: 0.0, upper, mid, r, density, slope, converged });
    }
    rows.sort_by(|a, b| a.b.total_cmp(&b.b));
    // Smallest single constant making every per-side lower bracket sit at or
    // below the extrapolated value.
    let c_hat = rows
        .iter()
        .filter(|row| row.b < 1.0)
        .flat_map(|row| row.r.iter().zip(&row.density).map(move |(r, y)| (y - row.mid) * r / row.b.sqrt()))
        .fold(0.0, f64::max);
    for row in &mut rows {
        row.lower = if row.b >= 1.0 {
            0.5f64.min(row.upper)
        } else {
            row.r
                .iter()
                .zip(&row.density)
                .map(|(r, y)| y - c_hat * row.b.sqrt() / r)
                .fold(0.0, f64::max)
                .min(row.mid)
        };
    }
    Ok(FhatTable { rows, c_hat })
}

/// Tabulate over `bs` (rows solved in parallel).
pub fn tabulate_fhat(bs: &[f64], cfg: &TabulationConfig) -> Result<FhatTable> {
    if bs.is_empty() {
        return Err(Error::Table("empty b list".into()));
    }
    if let Some(b) = bs.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
    }
    let results: Vec<(f64, Vec<CellResult>)> =
        bs.par_iter().map(|&b| solve_schedule(b, cfg).map(|r| (b, r))).collect::<Result<_>>()?;
    table_from_results(&results)
}

impl FhatTable {
    /// Interpolation knots `(b, f)` on `[0, 1]` with `f` made non-decreasing.
    fn knots(&self) -> Result<Vec<(f64, f64)>> {
        let inner: Vec<&FhatRow> = self.rows.iter().filter(|r| r.b > 0.0 && r.b < 1.0).collect();
        if self.rows.is_empty() {
            return Err(Error::Table("empty table".into()));
        }
        let mut k = vec![(0.0, 0.0)];
        let mut run = 0.0f64;
        for row in inner {
            run = run.max(row.mid.clamp(0.0, 0.5));
            k.push((row.b, run));
        }
        k.push((1.0, 0.5));
        Ok(k)
    }

    /// Monotone interpolation of the extrapolated values: 0 at `b = 0`,
    /// `1/2` for `b >= 1`, Fritsch-Carlson cubic in between.
    pub fn eval(&self, b: f64) -> Result<f64> {
        if !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!("b must be nonnegative, got {b}")));
        }
        let k = self.knots()?;
        if b >= 1.0 {
            return Ok(0.5);
        }
        Ok(monotone_cubic(&k, b))
    }

    pub fn row(&self, b: f64) -> Option<&FhatRow> {
        self.rows.iter().find(|r| (r.b - b).abs() <= 1e-12 * b.max(1.0))
    }

    pub fn write_csv(&self, mut w: impl Write, preamble: &[String]) -> std::io::Result<()> {
        writeln!(w, "# {TABLE_VERSION}")?;
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# c_hat={:e}", self.c_hat)?;
        writeln!(w, "b,fhat_lower,fhat_upper,fhat_mid,R_used,density_per_R,slope,converged")?;
        for r in &self.rows {
            let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";");
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{},{},{:e},{}",
                r.b,
                r.lower,
                r.upper,
                r.mid,
                join(&r.r),
                join(&r.density),
                r.slope,
                r.converged
            )?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut version_ok = false;
        let mut c_hat = None;
        let mut rows = Vec::new();
        let bad = |m: &str| Error::Table(m.to_string());
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if c == TABLE_VERSION {
                    version_ok = true;
                } else if let Some(v) = c.strip_prefix("c_hat=") {
                    c_hat = Some(v.parse::<f64>().map_err(|_| bad("bad c_hat"))?);
                }
                continue;
            }
            if line.is_empty() || line.starts_with("b,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(&format!("expected 8 columns, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
            let list = |s: &str| -> Result<Vec<f64>> { s.split(';').filter(|t| !t.is_empty()).map(num).collect() };
            rows.push(FhatRow {
                b: num(f[0])?,
                lower: num(f[1])?,
                upper: num(f[2])?,
                mid: num(f[3])?,
                r: list(f[4])?,
                density: list(f[5])?,
                slope: num(f[6])?,
                converged: f[7] == "true",
            });
        }
        if !version_ok {
            return Err(bad(&format!("missing '{TABLE_VERSION}' header")));
        }
        if rows.is_empty() {
            return Err(bad("no rows"));
        }
        Ok(Self { rows, c_hat: c_hat.ok_or_else(|| bad("missing c_hat"))? })
    }
}

/// Fritsch-Carlson monotone cubic Hermite interpolation through sorted knots.
fn monotone_cubic(k: &[(f64, f64)], x: f64) -> f64 {
    let n = k.len();
    let seg = (0..n - 1).find(|&i| x <= k[i + 1].0).unwrap_or(n - 2);
    let delta: Vec<f64> = (0..n - 1).map(|i| (k[i + 1].1 - k[i].1) / (k[i + 1].0 - k[i].0)).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 { 0.0 } else { 0.5 * (delta[i - 1] + delta[i]) };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        } else {
            let (a, b) = (m[i] / delta[i], m[i + 1] / delta[i]);
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[i] = t * a * delta[i];
                m[i + 1] = t * b * delta[i];
            }
        }
    }
    let (x0, y0) = k[seg];
    let (x1, y1) = k[seg + 1];
    let h = x1 - x0;
    let t = ((x - x0) / h).clamp(0.0, 1.0);
    let (t2, t3) = (t * t, t * t * t);
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m[seg] + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m[seg + 1];
    v.clamp(y0.min(y1), y0.max(y1))
}
