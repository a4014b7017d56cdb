//! Winding numbers, vortex disks, the vorticity measure and the nice/bad
//! square diagnostic.
//!
//! Phase increments along an edge are taken gauge-covariantly when a gauge
//! field is supplied: the wrapped phase of `conj(psi_a) U_ab psi_b` plus
//! `kappa_h` times the line integral of `A` along the edge. Around any closed
//! loop the increments add up to an exact multiple of `2 pi`, and on a smooth
//! gauge they agree with the plain phase differences of `psi`.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{local_energy, Params};
use crate::error::{Error, Result};
use crate::fhat::FhatTable;
use crate::field::{GaugeField, OrderParameter};
use crate::fieldgen::{AdmissibleLattice, MagneticProfile};
use crate::grid::{Grid2D, Region};

/// Phase increment from node `p` to the adjacent node `q`.
fn edge_phase(psi: &OrderParameter, a: Option<&GaugeField>, p: (usize, usize), q: (usize, usize)) -> f64 {
    let (zp, zq) = (psi.at(p.0, p.1), psi.at(q.0, q.1));
    let Some(a) = a else {
        return (zp.conj() * zq).arg();
    };
    let g = a.grid();
    let (link, line) = if q.1 == p.1 {
        let (i, forward) = if q.0 == p.0 + 1 { (p.0, true) } else { (q.0, false) };
        let e = g.xedge(i, p.1);
        let (u, l) = (a.links_x()[e], a.line_x()[e]);
        if forward {
            (u, l)
        } else {
            (u.conj(), -l)
        }
    } else {
        let (j, forward) = if q.1 == p.1 + 1 { (p.1, true) } else { (q.1, false) };
        let e = g.yedge(p.0, j);
        let (u, l) = (a.links_y()[e], a.line_y()[e]);
        if forward {
            (u, l)
        } else {
            (u.conj(), -l)
        }
    };
    (zp.conj() * link * zq).arg() + a.kappa_h() * line
}

fn check_loop(g: &Grid2D, path: &[(usize, usize)]) -> Result<()> {
    if path.len() < 4 {
        return Err(Error::InvalidParameter(format!("loop needs at least 4 nodes, got {}", path.len())));
    }
    for (k, &(i, j)) in path.iter().enumerate() {
        let (i2, j2) = path[(k + 1) % path.len()];
        if i >= g.nx() || j >= g.ny() || i2 >= g.nx() || j2 >= g.ny() {
            return Err(Error::RegionOutsideGrid(format!("loop node ({i}, {j})")));
        }
        if i.abs_diff(i2) + j.abs_diff(j2) != 1 {
            return Err(Error::InvalidParameter(format!("loop nodes ({i}, {j}) and ({i2}, {j2}) are not adjacent")));
        }
    }
    Ok(())
}

fn loop_winding(psi: &OrderParameter, a: Option<&GaugeField>, path: &[(usize, usize)]) -> Result<i64> {
    check_loop(psi.grid(), path)?;
    if let Some(a) = a {
        psi.grid().check_same(a.grid())?;
    }
    if let Some(&(i, j)) = path.iter().find(|&&(i, j)| psi.at(i, j).norm() == 0.0) {
        return Err(Error::ZeroOnLoop(i, j));
    }
    let total: f64 = (0..path.len()).map(|k| edge_phase(psi, a, path[k], path[(k + 1) % path.len()])).sum();
    Ok((total / TAU).round() as i64)
}

/// Winding number of `psi / |psi|` along a closed node path (first node not
/// repeated) of grid-adjacent nodes, using plain phase differences.
pub fn winding(psi: &OrderParameter, path: &[(usize, usize)]) -> Result<i64> {
    loop_winding(psi, None, path)
}

/// Gauge-covariant winding along a closed node path.
pub fn covariant_winding(psi: &OrderParameter, a: &GaugeField, path: &[(usize, usize)]) -> Result<i64> {
    loop_winding(psi, Some(a), path)
}

/// Windings of every grid cell (counterclockwise); `None` where a corner
/// vanishes.
pub fn plaquette_windings(psi: &OrderParameter, a: Option<&GaugeField>) -> Vec<Option<i64>> {
    let g = *psi.grid();
    (0..g.ny() - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..g.nx() - 1).map(move |i| {
                let path = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                if path.iter().any(|&(p, q)| psi.at(p, q).norm() == 0.0) {
                    return None;
                }
                let s: f64 = (0..4).map(|k| edge_phase(psi, a, path[k], path[(k + 1) % 4])).sum();
                Some((s / TAU).round() as i64)
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexDisk {
    pub center: [f64; 2],
    pub radius: f64,
    pub degree: i64,
    /// The disk reached the edge of the search region before its boundary
    /// cleared the threshold.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexSet {
    pub disks: Vec<VortexDisk>,
    pub threshold: f64,
}

#[derive(Serialize)]
struct DiskJson {
    x: f64,
    y: f64,
    r: f64,
    d: i64,
}

impl VortexSet {
    pub fn total_degree(&self) -> i64 {
        self.disks.iter().map(|d| d.degree).sum()
    }

    /// `[{x, y, r, d}, ...]`.
    pub fn write_json(&self, w: impl Write) -> Result<()> {
        let v: Vec<DiskJson> = self.disks.iter().map(|d| DiskJson { x: d.center[0], y: d.center[1], r: d.radius, d: d.degree }).collect();
        serde_json::to_writer_pretty(w, &v).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Disk boundaries must satisfy `|psi| > threshold`.
    pub threshold: f64,
    /// Search region; the whole grid when `None`.
    pub region: Option<Region>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { threshold: 0.5, region: None }
    }
}

/// Cells of the search region whose centers lie within `r` of `c`.
struct CellSet {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
    c: [f64; 2],
    r: f64,
}

impl CellSet {
    fn new(g: &Grid2D, reg: &Region, c: [f64; 2], r: f64) -> Self {
        let o = g.origin();
        let h = g.h();
        let lo = |x: f64, o: f64, min: usize| (((x - o) / h - 0.5).ceil().max(min as f64)) as usize;
        let hi = |x: f64, o: f64, max: usize| (((x - o) / h - 0.5).floor().min(max as f64 - 1.0)).max(-1.0) as isize;
        let i0 = lo(c[0] - r, o[0], reg.i0);
        let j0 = lo(c[1] - r, o[1], reg.j0);
        let i1 = (hi(c[0] + r, o[0], reg.i1) + 1).max(0) as usize;
        let j1 = (hi(c[1] + r, o[1], reg.j1) + 1).max(0) as usize;
        Self { i0, i1: i1.max(i0), j0, j1: j1.max(j0), c, r }
    }

    fn contains(&self, g: &Grid2D, i: usize, j: usize) -> bool {
        if i < self.i0 || i >= self.i1 || j < self.j0 || j >= self.j1 {
            return false;
        }
        let p = g.cell_center(i, j);
        (p[0] - self.c[0]).hypot(p[1] - self.c[1]) <= self.r
    }

    /// Counterclockwise boundary edges of the set as node pairs.
    fn boundary(&self, g: &Grid2D) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        for j in self.j0..self.j1 {
            for i in self.i0..self.i1 {
                if !self.contains(g, i, j) {
                    continue;
                }
                if j == 0 || !self.contains(g, i, j - 1) {
                    out.push(((i, j), (i + 1, j)));
                }
                if !self.contains(g, i + 1, j) {
                    out.push(((i + 1, j), (i + 1, j + 1)));
                }
                if !self.contains(g, i, j + 1) {
                    out.push(((i + 1, j + 1), (i, j + 1)));
                }
                if i == 0 || !self.contains(g, i - 1, j) {
                    out.push(((i, j + 1), (i, j)));
                }
            }
        }
        out
    }
}

fn reaches_edge(g: &Grid2D, reg: &Region, c: [f64; 2], r: f64) -> bool {
    let lo = g.point(reg.i0, reg.j0);
    let hi = g.point(reg.i1, reg.j1);
    c[0] - r < lo[0] || c[1] - r < lo[1] || c[0] + r > hi[0] || c[1] + r > hi[1]
}

/// Grow a disk from radius `r` in steps of `h` until its boundary clears the
/// threshold or it reaches the edge of the region.
fn grow(psi: &OrderParameter, reg: &Region, c: [f64; 2], mut r: f64, threshold: f64) -> (f64, bool) {
    let g = psi.grid();
    loop {
        let set = CellSet::new(g, reg, c, r);
        let ok = set.boundary(g).iter().all(|&(p, _)| psi.at(p.0, p.1).norm() > threshold);
        if ok {
            return (r, false);
        }
        if reaches_edge(g, reg, c, r) {
            return (r, true);
        }
        r += g.h();
    }
}

fn disk_degree(psi: &OrderParameter, a: Option<&GaugeField>, reg: &Region, c: [f64; 2], r: f64) -> i64 {
    let g = psi.grid();
    let s: f64 = CellSet::new(g, reg, c, r).boundary(g).iter().map(|&(p, q)| edge_phase(psi, a, p, q)).sum();
    (s / TAU).round() as i64
}

/// Plaquette seeds grown into disjoint disks whose boundaries satisfy
/// `|psi| > threshold`; overlapping disks are merged (degree-weighted center,
/// summed degree) and regrown. Degrees are measured on the final boundaries.
pub fn detect_vortices(psi: &OrderParameter, a: Option<&GaugeField>, cfg: &DetectConfig) -> Result<VortexSet> {
    let g = *psi.grid();
    if let Some(a) = a {
        g.check_same(a.grid())?;
    }
    if !(cfg.threshold >= 0.0 && cfg.threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in [0, 1), got {}", cfg.threshold)));
    }
    let reg = match cfg.region {
        Some(r) => Region::new(&g, r.i0, r.i1, r.j0, r.j1)?,
        None => g.full_region(),
    };
    let w = plaquette_windings(psi, a);
    let cols = g.nx() - 1;
    let seeds: Vec<([f64; 2], i64)> = w
        .iter()
        .enumerate()
        .filter_map(|(k, d)| {
            let (i, j) = (k % cols, k / cols);
            let inside = i >= reg.i0 && i < reg.i1 && j >= reg.j0 && j < reg.j1;
            match d {
                Some(d) if *d != 0 && inside => Some((g.cell_center(i, j), *d)),
                _ => None,
            }
        })
        .collect();
    let h = g.h();
    // (center, radius, seed weight, truncated)
    let mut disks: Vec<([f64; 2], f64, f64, bool)> = seeds
        .par_iter()
        .map(|&(c, d)| {
            let (r, t) = grow(psi, &reg, c, 0.5 * h, cfg.threshold);
            (c, r, d.unsigned_abs() as f64, t)
        })
        .collect();
    loop {
        disks.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));
        let max_r = disks.iter().fold(0.0f64, |m, d| m.max(d.1));
        let mut merged = vec![false; disks.len()];
        let mut next = Vec::with_capacity(disks.len());
        let mut changed = false;
        for k in 0..disks.len() {
            if merged[k] {
                continue;
            }
            let mut cur = disks[k];
            for m in k + 1..disks.len() {
                if disks[m].0[0] - cur.0[0] > cur.1 + max_r {
                    break;
                }
                if merged[m] {
                    continue;
                }
                let o = disks[m];
                let dist = (o.0[0] - cur.0[0]).hypot(o.0[1] - cur.0[1]);
                if dist < cur.1 + o.1 {
                    let (w1, w2) = if cur.2 + o.2 > 0.0 { (cur.2, o.2) } else { (1.0, 1.0) };
                    let c = [(w1 * cur.0[0] + w2 * o.0[0]) / (w1 + w2), (w1 * cur.0[1] + w2 * o.0[1]) / (w1 + w2)];
                    let r = ((c[0] - cur.0[0]).hypot(c[1] - cur.0[1]) + cur.1).max((c[0] - o.0[0]).hypot(c[1] - o.0[1]) + o.1);
                    let (r, t) = grow(psi, &reg, c, r, cfg.threshold);
                    cur = (c, r, cur.2 + o.2, t || cur.3 || o.3);
                    merged[m] = true;
                    changed = true;
                }
            }
            next.push(cur);
        }
        disks = next;
        if !changed {
            break;
        }
    }
    let mut out: Vec<VortexDisk> = disks
        .par_iter()
        .map(|&(c, r, _, t)| VortexDisk { center: c, radius: r, degree: disk_degree(psi, a, &reg, c, r), truncated: t })
        .collect();
    out.sort_by(|a, b| a.center[1].total_cmp(&b.center[1]).then(a.center[0].total_cmp(&b.center[0])));
    Ok(VortexSet { disks: out, threshold: cfg.threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: [f64; 2],
    pub weight: f64,
    pub radius: f64,
}

/// `mu = (2 pi / kappa H) sum d_i delta_{a_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VorticityMeasure {
    pub atoms: Vec<Atom>,
    pub kappa: f64,
    pub field: f64,
}

impl VorticityMeasure {
    pub fn normalization(&self) -> f64 {
        TAU / (self.kappa * self.field)
    }

    /// Mass of the half-open box `[lo, hi)`.
    pub fn eval(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        self.atoms.iter().filter(|a| in_box(a.point, lo, hi)).map(|a| a.weight).sum()
    }

    /// Mass of the box under `|mu|`.
    pub fn eval_abs(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        self.atoms.iter().filter(|a| in_box(a.point, lo, hi)).map(|a| a.weight.abs()).sum()
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }
}

fn in_box(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    p[0] >= lo[0] && p[0] < hi[0] && p[1] >= lo[1] && p[1] < hi[1]
}

pub fn vorticity_measure(vs: &VortexSet, kappa: f64, field: f64) -> Result<VorticityMeasure> {
    if !(kappa > 0.0 && field > 0.0) {
        return Err(Error::InvalidParameter("kappa and H must be positive".into()));
    }
    let w = TAU / (kappa * field);
    let atoms = vs.disks.iter().filter(|d| d.degree != 0).map(|d| Atom { point: d.center, weight: w * d.degree as f64, radius: d.radius }).collect();
    Ok(VorticityMeasure { atoms, kappa, field })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMeasure {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub mu: f64,
    pub integral_b0: f64,
    pub difference: f64,
    pub mu_abs: f64,
    pub integral_abs_b0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub regions: Vec<RegionMeasure>,
    pub radius_sum: f64,
    /// `(kappa H)^(1/2) (ln kappa/H)^(-7/4) int |B0|^(-1/2)` over the domain.
    pub radius_budget_full: f64,
    /// Same with the integral restricted to `|B0| > rho`.
    pub radius_budget_restricted: f64,
    pub rho: f64,
    pub within_budget: bool,
}

pub const MEASURE_CSV_HEADER: &str = "x0,y0,x1,y1,mu,int_b0,difference,mu_abs,int_abs_b0";

impl MeasureReport {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# radius_sum={:e} budget_full={:e} budget_restricted={:e} rho={:e}", self.radius_sum, self.radius_budget_full, self.radius_budget_restricted, self.rho)?;
        writeln!(w, "{MEASURE_CSV_HEADER}")?;
        for r in &self.regions {
            writeln!(w, "{},{},{},{},{:e},{:e},{:e},{:e},{:e}", r.lo[0], r.lo[1], r.hi[0], r.hi[1], r.mu, r.integral_b0, r.difference, r.mu_abs, r.integral_abs_b0)?;
        }
        Ok(())
    }
}

/// Compare `mu` with `B0 dx` on grid-aligned boxes and the disk radii with
/// the radius budget; `rho` is the threshold for the restricted budget.
pub fn measure_convergence_report(mu: &VorticityMeasure, b0: &MagneticProfile, regions: &[([f64; 2], [f64; 2])], rho: f64) -> Result<MeasureReport> {
    let g = b0.grid();
    let h2 = g.h() * g.h();
    let f = b0.field();
    let mut out = Vec::with_capacity(regions.len());
    for &(lo, hi) in regions {
        let r = g.snap_region(lo, hi)?;
        let (lo, hi) = (g.point(r.i0, r.j0), g.point(r.i1, r.j1));
        let (mut s, mut sa) = (0.0, 0.0);
        for j in r.j0..r.j1 {
            for i in r.i0..r.i1 {
                let v = f.cell_average(i, j);
                s += v;
                sa += v.abs();
            }
        }
        let m = mu.eval(lo, hi);
        out.push(RegionMeasure { lo, hi, mu: m, integral_b0: s * h2, difference: m - s * h2, mu_abs: mu.eval_abs(lo, hi), integral_abs_b0: sa * h2 });
    }
    let (mut full, mut restricted) = (0.0, 0.0);
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let v = b0.eval(g.cell_center(i, j)).abs();
            if v > 0.0 {
                full += h2 / v.sqrt();
                if v > rho {
                    restricted += h2 / v.sqrt();
                }
            }
        }
    }
    let (k, hf) = (mu.kappa, mu.field);
    let log = (k / hf).ln();
    let scale = if log > 0.0 { (k * hf).sqrt() * log.powf(-1.75) } else { f64::NAN };
    let radius_sum: f64 = mu.atoms.iter().map(|a| a.radius).sum();
    let radius_budget_restricted = scale * restricted;
    Ok(MeasureReport {
        regions: out,
        radius_sum,
        radius_budget_full: scale * full,
        radius_budget_restricted,
        rho,
        within_budget: radius_sum <= radius_budget_restricted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareClass {
    pub index: [i64; 2],
    pub nice: usize,
    pub bad: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub subdivisions: u64,
    pub delta: f64,
    pub tau: f64,
    pub nice: usize,
    pub bad: usize,
    /// Sub-squares narrower than one grid cell after snapping.
    pub skipped: usize,
    pub squares: Vec<SquareClass>,
}

/// Split each lattice square into `m^2` sub-squares and compare the local
/// energy (kinetic plus condensation, measured with the reference potential
/// `reference`) with `(1 + tau) kappa^2 |Q| f_hat(H inf|B0| / kappa)`, where
/// `|Q|` is the snapped sub-square area.
#[allow(clippy::too_many_arguments)]
pub fn classify_squares(
    psi: &OrderParameter,
    reference: &GaugeField,
    lattice: &AdmissibleLattice,
    table: &FhatTable,
    kappa: f64,
    field: f64,
    subdivisions: u64,
    tau: f64,
) -> Result<Classification> {
    if subdivisions == 0 {
        return Err(Error::Schedule("subdivision count is zero at these parameters".into()));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be nonnegative, got {tau}")));
    }
    let p = Params::new(kappa, field)?;
    let g = *psi.grid();
    let m = subdivisions as usize;
    let delta = lattice.ell / m as f64;
    let per: Vec<Result<(SquareClass, usize)>> = lattice
        .squares
        .par_iter()
        .map(|sq| {
            let f = table.eval(field * sq.b_inf / kappa)?;
            let lo = sq.lo(lattice.ell);
            let (mut nice, mut bad, mut skipped) = (0, 0, 0);
            for b in 0..m {
                for a in 0..m {
                    let q0 = [lo[0] + a as f64 * delta, lo[1] + b as f64 * delta];
                    let q1 = [q0[0] + delta, q0[1] + delta];
                    let (i0, j0) = g.nearest_node(q0);
                    let (i1, j1) = g.nearest_node(q1);
                    let Ok(r) = Region::new(&g, i0, i1, j0, j1) else {
                        skipped += 1;
                        continue;
                    };
                    let e = local_energy(psi, reference, &p, r)?;
                    if e <= (1.0 + tau) * kappa * kappa * r.area(&g) * f {
                        nice += 1;
                    } else {
                        bad += 1;
                    }
                }
            }
            Ok((SquareClass { index: sq.index, nice, bad }, skipped))
        })
        .collect();
    let mut squares = Vec::with_capacity(per.len());
    let mut skipped = 0;
    for r in per {
        let (s, k) = r?;
        squares.push(s);
        skipped += k;
    }
    Ok(Classification {
        subdivisions,
        delta,
        tau,
        nice: squares.iter().map(|s| s.nice).sum(),
        bad: squares.iter().map(|s| s.bad).sum(),
        skipped,
        squares,
    })
}
