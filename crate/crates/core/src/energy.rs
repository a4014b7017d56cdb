//! Gauge-covariant discretization of the Ginzburg-Landau energy
//!
//! ```text
//! E(psi, A) = int |(grad - i kH A) psi|^2 + k^2/2 (1 - |psi|^2)^2 + (kH)^2 int |curl A - B0|^2
//! ```
//!
//! Covariant forward differences `(U_e psi(end) - psi(start)) / h` live on
//! edges and are integrated with the midpoint rule along the edge and the
//! trapezoid rule across it; the condensation term uses the nodal trapezoid
//! rule; the magnetic term is evaluated at cell centers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{stream_line_adjoint, GaugeField, OrderParameter, ScalarField};
use crate::grid::{Grid2D, Region};

/// Ginzburg-Landau parameter `kappa` and applied field strength `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub kappa: f64,
    pub field: f64,
}

impl Params {
    pub fn new(kappa: f64, field: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(field.is_finite() && field > 0.0) {
            return Err(Error::InvalidParameter(format!("H must be positive, got {field}")));
        }
        Ok(Self { kappa, field })
    }

    /// Parameters under which `b * E` is the reference-cell functional with
    /// kinetic weight `b`, unit field and unit-weight condensation.
    pub fn for_cell(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
        }
        Self::new(1.0 / b.sqrt(), b.sqrt())
    }

    #[inline]
    pub fn kappa_h(&self) -> f64 {
        self.kappa * self.field
    }

    /// Reduced field `H |B0| / kappa`.
    #[inline]
    pub fn reduced(&self, b0_abs: f64) -> f64 {
        self.field * b0_abs / self.kappa
    }

    fn check_gauge(&self, a: &GaugeField) -> Result<()> {
        let kh = self.kappa_h();
        if (a.kappa_h() - kh).abs() > 1e-12 * kh.abs() {
            return Err(Error::InvalidParameter(format!(
                "gauge field built for kappa*H = {}, parameters give {kh}",
                a.kappa_h()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub condensation: f64,
    pub magnetic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, condensation: f64, magnetic: f64) -> Self {
        Self { kinetic, condensation, magnetic, total: kinetic + condensation + magnetic }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(s * self.kinetic, s * self.condensation, s * self.magnetic)
    }
}

#[inline]
fn trap(k: usize, lo: usize, hi: usize) -> f64 {
    Grid2D::trap(k, lo, hi)
}

fn check_inputs(psi: &OrderParameter, a: &GaugeField, b0: &ScalarField, p: &Params) -> Result<Grid2D> {
    let g = *psi.grid();
    g.check_same(a.grid())?;
    g.check_same(b0.grid())?;
    p.check_gauge(a)?;
    Ok(g)
}

/// Kinetic and condensation integrals over a region, summed row by row in a
/// fixed order so results do not depend on the thread count.
fn psi_terms(psi: &[Complex64], a: &GaugeField, kappa: f64, r: Region) -> (f64, f64) {
    let g = a.grid();
    let (lx, ly) = (a.links_x(), a.links_y());
    let h2 = g.h() * g.h();
    let rows: Vec<(f64, f64)> = (r.j0..=r.j1)
        .into_par_iter()
        .map(|j| {
            let wj = trap(j, r.j0, r.j1);
            let mut kin = 0.0;
            let mut cond = 0.0;
            for i in r.i0..=r.i1 {
                let wi = trap(i, r.i0, r.i1);
                let z = psi[g.idx(i, j)];
                if i < r.i1 {
                    let d = lx[g.xedge(i, j)] * psi[g.idx(i + 1, j)] - z;
                    kin += wj * d.norm_sqr();
                }
                if j < r.j1 {
                    let d = ly[g.yedge(i, j)] * psi[g.idx(i, j + 1)] - z;
                    kin += wi * d.norm_sqr();
                }
                let s = 1.0 - z.norm_sqr();
                cond += wi * wj * s * s;
            }
            (kin, cond)
        })
        .collect();
    let (mut kin, mut cond) = (0.0, 0.0);
    for (k, c) in rows {
        kin += k;
        cond += c;
    }
    (kin, 0.5 * kappa * kappa * h2 * cond)
}

fn magnetic_term(a: &GaugeField, b0: &ScalarField, kappa_h: f64, r: Region) -> f64 {
    let g = a.grid();
    let h2 = g.h() * g.h();
    let rows: Vec<f64> = (r.j0..r.j1)
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            for i in r.i0..r.i1 {
                let d = a.curl(i, j) - b0.cell_average(i, j);
                acc += d * d;
            }
            acc
        })
        .collect();
    kappa_h * kappa_h * h2 * rows.into_iter().sum::<f64>()
}

/// Energy of `(psi, A)` on the whole grid or on a grid-aligned sub-rectangle.
pub fn energy(
    psi: &OrderParameter,
    a: &GaugeField,
    b0: &ScalarField,
    p: &Params,
    region: Option<Region>,
) -> Result<EnergyBreakdown> {
    let g = check_inputs(psi, a, b0, p)?;
    let r = match region {
        Some(r) => Region::new(&g, r.i0, r.i1, r.j0, r.j1)?,
        None => g.full_region(),
    };
    let (kin, cond) = psi_terms(psi.values(), a, p.kappa, r);
    let mag = magnetic_term(a, b0, p.kappa_h(), r);
    Ok(EnergyBreakdown::new(kin, cond, mag))
}

/// Local energy without the magnetic term (kinetic + condensation).
pub fn local_energy(psi: &OrderParameter, a: &GaugeField, p: &Params, region: Region) -> Result<f64> {
    let g = *psi.grid();
    g.check_same(a.grid())?;
    p.check_gauge(a)?;
    let r = Region::new(&g, region.i0, region.i1, region.j0, region.j1)?;
    let (kin, cond) = psi_terms(psi.values(), a, p.kappa, r);
    Ok(kin + cond)
}

/// Exact gradient of the discrete energy.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// `dE/d(Re psi) + i dE/d(Im psi)` per node.
    pub psi: Vec<Complex64>,
    /// `dE/d(xi)` per node of the stream function.
    pub stream: Vec<f64>,
}

/// Accumulate the order-parameter gradient into `out` (overwritten). Row
/// parallel; each node gathers from its incident edges.
pub(crate) fn psi_gradient_into(psi: &[Complex64], links_x: &[Complex64], links_y: &[Complex64], g: &Grid2D, kappa: f64, out: &mut [Complex64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let h2 = g.h() * g.h();
    let k2 = kappa * kappa;
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let wj = trap(j, 0, ny - 1);
        for (i, slot) in row.iter_mut().enumerate() {
            let wi = trap(i, 0, nx - 1);
            let z = psi[g.idx(i, j)];
            let mut acc = Complex64::new(0.0, 0.0);
            if i + 1 < nx {
                let d = links_x[g.xedge(i, j)] * psi[g.idx(i + 1, j)] - z;
                acc -= 2.0 * wj * d;
            }
            if i > 0 {
                let u = links_x[g.xedge(i - 1, j)];
                let d = u * z - psi[g.idx(i - 1, j)];
                acc += 2.0 * wj * u.conj() * d;
            }
            if j + 1 < ny {
                let d = links_y[g.yedge(i, j)] * psi[g.idx(i, j + 1)] - z;
                acc -= 2.0 * wi * d;
            }
            if j > 0 {
                let u = links_y[g.yedge(i, j - 1)];
                let d = u * z - psi[g.idx(i, j - 1)];
                acc += 2.0 * wi * u.conj() * d;
            }
            acc -= 2.0 * k2 * h2 * wi * wj * (1.0 - z.norm_sqr()) * z;
            *slot = acc;
        }
    });
}

/// Gradient of the full-grid energy with respect to `psi` (as two real
/// fields) and the stream function.
pub fn gradient(psi: &OrderParameter, a: &GaugeField, b0: &ScalarField, p: &Params) -> Result<Gradient> {
    let g = check_inputs(psi, a, b0, p)?;
    let mut dpsi = vec![Complex64::new(0.0, 0.0); g.len()];
    psi_gradient_into(psi.values(), a.links_x(), a.links_y(), &g, p.kappa, &mut dpsi);
    let (gx, gy) = line_sensitivities(psi.values(), a, b0, p.kappa_h());
    let stream = stream_line_adjoint(&g, &gx, &gy);
    Ok(Gradient { psi: dpsi, stream })
}

/// `dE/d(line integral)` per edge: kinetic coupling plus magnetic term.
pub(crate) fn line_sensitivities(psi: &[Complex64], a: &GaugeField, b0: &ScalarField, kappa_h: f64) -> (Vec<f64>, Vec<f64>) {
    let g = a.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let kh2 = 2.0 * kappa_h * kappa_h;
    let curl_err: Vec<f64> = {
        let mut v = Vec::with_capacity(g.n_cells());
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                v.push(a.curl(i, j) - b0.cell_average(i, j));
            }
        }
        v
    };
    let mut gx = vec![0.0; g.n_xedges()];
    gx.par_chunks_mut(nx - 1).enumerate().for_each(|(j, row)| {
        let wj = trap(j, 0, ny - 1);
        for (i, slot) in row.iter_mut().enumerate() {
            let u = a.links_x()[g.xedge(i, j)];
            let w = u * psi[g.idx(i + 1, j)];
            let d = w - psi[g.idx(i, j)];
            let mut acc = 2.0 * wj * kappa_h * (d.conj() * w).im;
            if j + 1 < ny {
                acc += kh2 * curl_err[g.cell(i, j)];
            }
            if j > 0 {
                acc -= kh2 * curl_err[g.cell(i, j - 1)];
            }
            *slot = acc;
        }
    });
    let mut gy = vec![0.0; g.n_yedges()];
    gy.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, slot) in row.iter_mut().enumerate() {
            let wi = trap(i, 0, nx - 1);
            let u = a.links_y()[g.yedge(i, j)];
            let w = u * psi[g.idx(i, j + 1)];
            let d = w - psi[g.idx(i, j)];
            let mut acc = 2.0 * wi * kappa_h * (d.conj() * w).im;
            if i + 1 < nx {
                acc -= kh2 * curl_err[g.cell(i, j)];
            }
            if i > 0 {
                acc += kh2 * curl_err[g.cell(i - 1, j)];
            }
            *slot = acc;
        }
    });
    (gx, gy)
}

/// Gauge transformation `psi -> e^{i kH phi} psi`, `A -> A + grad phi`.
pub fn gauge_transform(psi: &OrderParameter, a: &GaugeField, phi: &ScalarField, p: &Params) -> Result<(OrderParameter, GaugeField)> {
    let g = *psi.grid();
    g.check_same(a.grid())?;
    g.check_same(phi.grid())?;
    p.check_gauge(a)?;
    let kh = p.kappa_h();
    let values = psi
        .values()
        .iter()
        .zip(phi.values())
        .map(|(&z, &f)| Complex64::from_polar(1.0, kh * f) * z)
        .collect();
    let psi2 = OrderParameter::new(g, values)?;
    let a2 = a.add_gradient(phi.values())?;
    Ok((psi2, a2))
}

/// Node residual of the first GL equation, `dE/dpsi / (2 h^2 w_node)`,
/// which approximates `-(grad - i kH A)^2 psi - k^2 (1 - |psi|^2) psi`.
pub fn psi_residual(psi: &OrderParameter, a: &GaugeField, p: &Params) -> Result<Vec<Complex64>> {
    let g = *psi.grid();
    g.check_same(a.grid())?;
    p.check_gauge(a)?;
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    psi_gradient_into(psi.values(), a.links_x(), a.links_y(), &g, p.kappa, &mut out);
    let h2 = g.h() * g.h();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let w = trap(i, 0, g.nx() - 1) * trap(j, 0, g.ny() - 1);
            out[g.idx(i, j)] /= 2.0 * h2 * w;
        }
    }
    Ok(out)
}

/// Coefficients `c[0] + c[1] t + ... + c[4] t^4` of `E(psi + t d)` for fixed
/// links (kinetic + condensation).
pub(crate) fn line_quartic(psi: &[Complex64], dir: &[Complex64], links_x: &[Complex64], links_y: &[Complex64], g: &Grid2D, kappa: f64) -> [f64; 5] {
    let (nx, ny) = (g.nx(), g.ny());
    let h2 = g.h() * g.h();
    let rows: Vec<[f64; 5]> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let wj = trap(j, 0, ny - 1);
            let mut c = [0.0; 5];
            let mut cond = [0.0; 5];
            for i in 0..nx {
                let wi = trap(i, 0, nx - 1);
                let k = g.idx(i, j);
                let (z, d) = (psi[k], dir[k]);
                if i + 1 < nx {
                    let u = links_x[g.xedge(i, j)];
                    let rz = u * psi[k + 1] - z;
                    let rd = u * dir[k + 1] - d;
                    c[0] += wj * rz.norm_sqr();
                    c[1] += 2.0 * wj * (rz.conj() * rd).re;
                    c[2] += wj * rd.norm_sqr();
                }
                if j + 1 < ny {
                    let u = links_y[g.yedge(i, j)];
                    let rz = u * psi[k + nx] - z;
                    let rd = u * dir[k + nx] - d;
                    c[0] += wi * rz.norm_sqr();
                    c[1] += 2.0 * wi * (rz.conj() * rd).re;
                    c[2] += wi * rd.norm_sqr();
                }
                let w = wi * wj;
                let a0 = 1.0 - z.norm_sqr();
                let q = (z.conj() * d).re;
                let s = d.norm_sqr();
                cond[0] += w * a0 * a0;
                cond[1] += w * (-4.0 * a0 * q);
                cond[2] += w * (4.0 * q * q - 2.0 * a0 * s);
                cond[3] += w * (4.0 * q * s);
                cond[4] += w * s * s;
            }
            let f = 0.5 * kappa * kappa * h2;
            for m in 0..5 {
                c[m] += f * cond[m];
            }
            c
        })
        .collect();
    let mut out = [0.0; 5];
    for r in rows {
        for m in 0..5 {
            out[m] += r[m];
        }
    }
    out
}
