//! Benchmark fixtures shared by the criterion targets.

use glvar::fieldgen::{MagneticProfile, DEFAULT_NONDEGENERACY};
use glvar::{Complex64, GaugeField, Grid2D, OrderParameter, Params};

/// A smooth state with vortex-like phase winding on `(-1, 1)^2` with
/// `B0 = x1` and the reference potential.
pub struct Fixture {
    pub b0: MagneticProfile,
    pub a: GaugeField,
    pub psi: OrderParameter,
    pub params: Params,
}

pub fn fixture(cells: usize) -> Fixture {
    let g = Grid2D::centered_square(2.0, cells).expect("grid");
    let b0 = MagneticProfile::x1(g, DEFAULT_NONDEGENERACY).expect("profile");
    let params = Params::new(20.0, 4.0).expect("params");
    let a = glvar::fieldgen::build_f(&b0, params.kappa_h(), 1e-8).expect("reference potential");
    let psi = OrderParameter::from_fn(g, |[x, y]| Complex64::from_polar((x * x + y * y).sqrt().min(1.0), 7.0 * x * y));
    Fixture { b0, a, psi, params }
}
