//! Ground-state energy predictions `kappa^2 int f_hat(H |B0| / kappa)` and the
//! simplified `(kappa H / 2) int |B0| ln(kappa / (H |B0|))`, with lattice
//! Riemann brackets and gap reports against measured energies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::fhat::FhatTable;
use crate::fieldgen::{build_lattice, default_schedules, MagneticProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeBrackets {
    pub ell: f64,
    pub rho: f64,
    pub squares: usize,
    pub covered_area: f64,
    pub lower: f64,
    pub upper: f64,
}

impl LatticeBrackets {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub kappa: f64,
    pub field: f64,
    /// `kappa^2 int f_hat(H |B0| / kappa) dx` by the composite midpoint rule.
    pub leading: f64,
    /// Simplified form; `None` when `H >= kappa`.
    pub simplified: Option<f64>,
    /// `|Q_h - Q_2h| / 3` for the leading-term quadrature.
    pub quadrature_error: f64,
    pub brackets: Option<LatticeBrackets>,
}

/// Midpoint rule over the cells of the profile grid (pairs of cells along
/// each axis when `coarse`).
fn midpoint(b0: &MagneticProfile, f: &(dyn Fn(f64) -> f64 + Sync), coarse: bool) -> f64 {
    let g = b0.grid();
    let s = if coarse { 2 } else { 1 };
    let (cx, cy) = ((g.nx() - 1) / s, (g.ny() - 1) / s);
    let hs = g.h() * s as f64;
    let o = g.origin();
    let rows: Vec<f64> = (0..cy)
        .into_par_iter()
        .map(|j| {
            (0..cx)
                .map(|i| {
                    let p = [o[0] + (i as f64 + 0.5) * hs, o[1] + (j as f64 + 0.5) * hs];
                    f(b0.eval(p).abs())
                })
                .sum::<f64>()
        })
        .collect();
    rows.into_iter().sum::<f64>() * hs * hs
}

pub fn predict_energy(b0: &MagneticProfile, kappa: f64, field: f64, table: &FhatTable) -> Result<Prediction> {
    if !(kappa > 0.0 && field > 0.0) {
        return Err(Error::InvalidParameter("kappa and H must be positive".into()));
    }
    table.eval(0.5)?;
    let fb = |t: f64| table.eval(field * t / kappa).expect("nonnegative argument");
    let k2 = kappa * kappa;
    let fine = k2 * midpoint(b0, &fb, false);
    let g = b0.grid();
    let quadrature_error = if (g.nx() - 1).is_multiple_of(2) && (g.ny() - 1).is_multiple_of(2) {
        (fine - k2 * midpoint(b0, &fb, true)).abs() / 3.0
    } else {
        f64::NAN
    };
    let simplified = (field < kappa).then(|| {
        let f = |t: f64| if t > 0.0 { t * (kappa / (field * t)).ln() } else { 0.0 };
        0.5 * kappa * field * midpoint(b0, &f, false)
    });
    let brackets = match default_schedules(kappa, field) {
        Ok(s) => Some(lattice_brackets(b0, kappa, field, table, s.ell, s.rho)?),
        Err(_) => None,
    };
    Ok(Prediction { kappa, field, leading: fine, simplified, quadrature_error, brackets })
}

/// Lower sum `kappa^2 sum l^2 f(H inf|B0| / kappa)` over admissible squares;
/// upper sum with `sup|B0|` plus the uncovered area at the global maximum.
pub fn lattice_brackets(b0: &MagneticProfile, kappa: f64, field: f64, table: &FhatTable, ell: f64, rho: f64) -> Result<LatticeBrackets> {
    let lat = build_lattice(b0, ell, rho)?;
    let f = |t: f64| table.eval(field * t / kappa).expect("nonnegative argument");
    let (lo, hi) = lat.riemann_sums(f);
    let uncovered = (b0.grid().area() - lat.covered_area()).max(0.0);
    let k2 = kappa * kappa;
    Ok(LatticeBrackets {
        ell,
        rho,
        squares: lat.len(),
        covered_area: lat.covered_area(),
        lower: k2 * lo,
        upper: k2 * (hi + uncovered * f(b0.sup_abs())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `(total - leading) / (kappa H ln(kappa/H))`.
    pub energy_gap: f64,
    /// `magnetic / (kappa H ln(kappa/H))`.
    pub magnetic_ratio: f64,
    /// `total / leading - 1`.
    pub relative_gap: f64,
}

pub fn compare(measured: &EnergyBreakdown, pred: &Prediction, kappa: f64, field: f64) -> Result<GapReport> {
    let log = (kappa / field).ln();
    if !(log > 0.0) {
        return Err(Error::InvalidParameter(format!("ln(kappa/H) must be positive, got {log}")));
    }
    let scale = kappa * field * log;
    Ok(GapReport {
        energy_gap: (measured.total - pred.leading) / scale,
        magnetic_ratio: measured.magnetic / scale,
        relative_gap: measured.total / pred.leading - 1.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionReport {
    pub schema: String,
    pub params: ReportParams,
    pub leading: f64,
    pub simplified: Option<f64>,
    pub quadrature_error: f64,
    pub brackets: Option<LatticeBrackets>,
    pub measured: Option<EnergyBreakdown>,
    pub gaps: Option<GapReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportParams {
    pub kappa: f64,
    pub field: f64,
    pub profile: crate::fieldgen::ProfileKind,
    pub domain: [[f64; 2]; 2],
    pub cells: [usize; 2],
}

pub const PREDICTION_SCHEMA: &str = "glvar-prediction-v1";

impl PredictionReport {
    pub fn new(b0: &MagneticProfile, pred: &Prediction, measured: Option<EnergyBreakdown>) -> Result<Self> {
        let g = b0.grid();
        let o = g.origin();
        let [lx, ly] = g.extent();
        let gaps = match measured {
            Some(m) => Some(compare(&m, pred, pred.kappa, pred.field)?),
            None => None,
        };
        Ok(Self {
            schema: PREDICTION_SCHEMA.into(),
            params: ReportParams {
                kappa: pred.kappa,
                field: pred.field,
                profile: b0.kind().clone(),
                domain: [o, [o[0] + lx, o[1] + ly]],
                cells: [g.nx() - 1, g.ny() - 1],
            },
            leading: pred.leading,
            simplified: pred.simplified,
            quadrature_error: pred.quadrature_error,
            brackets: pred.brackets,
            measured,
            gaps,
        })
    }
}
