use glvar::energy::psi_residual;
use glvar::{energy, gauge_transform, gradient, Complex64, GaugeField, Grid2D, OrderParameter, Params, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    psi: OrderParameter,
    a: GaugeField,
    b0: ScalarField,
    p: Params,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = rng.gen_range(6..14);
    let side = rng.gen_range(1.0..3.0);
    let g = Grid2D::centered_square(side, cells).unwrap();
    let p = Params::new(rng.gen_range(1.0..6.0), rng.gen_range(0.3..2.0)).unwrap();
    let psi = OrderParameter::new(
        g,
        (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2))).collect(),
    )
    .unwrap();
    let amp = rng.gen_range(0.01..0.3);
    let stream: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-amp..amp)).collect();
    let a = GaugeField::from_stream(g, stream, p.kappa_h()).unwrap();
    let (c0, c1, c2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let b0 = ScalarField::from_fn(g, |x| c0 + c1 * x[0] + c2 * x[1] * x[1]);
    Instance { psi, a, b0, p }
}

fn total_at(inst: &Instance, dpsi: &[Complex64], dxi: &[f64], t: f64) -> f64 {
    let g = *inst.psi.grid();
    let psi = OrderParameter::new(g, inst.psi.values().iter().zip(dpsi).map(|(&z, &d)| z + t * d).collect()).unwrap();
    let xi: Vec<f64> = inst.a.stream().iter().zip(dxi).map(|(&x, &d)| x + t * d).collect();
    let a = inst.a.with_stream(xi).unwrap();
    energy(&psi, &a, &inst.b0, &inst.p, None).unwrap().total
}

fn directional_error(seed: u64) -> f64 {
    let inst = instance(seed);
    let g = *inst.psi.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let dpsi: Vec<Complex64> = (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let dxi: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let grad = gradient(&inst.psi, &inst.a, &inst.b0, &inst.p).unwrap();
    let analytic: f64 = grad.psi.iter().zip(&dpsi).map(|(gz, d)| gz.re * d.re + gz.im * d.im).sum::<f64>()
        + grad.stream.iter().zip(&dxi).map(|(a, b)| a * b).sum::<f64>();
    let eps = 1e-6;
    let fd = (total_at(&inst, &dpsi, &dxi, eps) - total_at(&inst, &dpsi, &dxi, -eps)) / (2.0 * eps);
    (analytic - fd).abs() / fd.abs().max(1e-300)
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let err = directional_error(seed);
        assert!(err <= 1e-6, "seed {seed}: relative error {err:.3e}");
    }
}

#[test]
fn gauge_transform_preserves_energy() {
    for seed in 100..120 {
        let inst = instance(seed);
        let g = *inst.psi.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let before = energy(&inst.psi, &inst.a, &inst.b0, &inst.p, None).unwrap();
        let (psi2, a2) = gauge_transform(&inst.psi, &inst.a, &phi, &inst.p).unwrap();
        let after = energy(&psi2, &a2, &inst.b0, &inst.p, None).unwrap();
        assert!((before.total - after.total).abs() <= 1e-10 * before.total.abs(), "seed {seed}");
    }
}

#[test]
fn constant_gauge_leaves_links_and_energy_unchanged() {
    let inst = instance(7);
    let g = *inst.psi.grid();
    let phi = ScalarField::from_fn(g, |_| 0.37);
    let (psi2, a2) = gauge_transform(&inst.psi, &inst.a, &phi, &inst.p).unwrap();
    assert_eq!(a2.links_x(), inst.a.links_x());
    assert_eq!(a2.links_y(), inst.a.links_y());
    let rot = Complex64::from_polar(1.0, inst.p.kappa_h() * 0.37);
    for (z2, z) in psi2.values().iter().zip(inst.psi.values()) {
        assert!((z2 - rot * z).norm() < 1e-15);
    }
    let e1 = energy(&inst.psi, &inst.a, &inst.b0, &inst.p, None).unwrap().total;
    let e2 = energy(&psi2, &a2, &inst.b0, &inst.p, None).unwrap().total;
    assert!((e1 - e2).abs() <= 1e-14 * e1);
}

#[test]
fn plane_wave_phase_is_removed_by_linear_gauge() {
    // psi = exp(i kH c.x) with A = 0 carries kinetic energy close to
    // (kH |c|)^2 |Omega|; the gauge phi = -c.x maps it to psi = 1 with
    // A = -c and the same energy.
    let g = Grid2D::centered_square(2.0, 200).unwrap();
    let p = Params::new(2.0, 1.0).unwrap();
    let c = [0.3, -0.2];
    let kh = p.kappa_h();
    let psi = OrderParameter::from_fn(g, |x| Complex64::from_polar(1.0, kh * (c[0] * x[0] + c[1] * x[1])));
    let a = GaugeField::zero(g, kh).unwrap();
    let b0 = ScalarField::zeros(g);
    let e = energy(&psi, &a, &b0, &p, None).unwrap();
    let expected = kh * kh * (c[0] * c[0] + c[1] * c[1]) * g.area();
    assert!(((e.kinetic - expected) / expected).abs() < 1e-3);
    let phi = ScalarField::from_fn(g, |x| -(c[0] * x[0] + c[1] * x[1]));
    let (psi2, a2) = gauge_transform(&psi, &a, &phi, &p).unwrap();
    assert!(psi2.values().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    let e2 = energy(&psi2, &a2, &b0, &p, None).unwrap();
    assert!((e2.kinetic - e.kinetic).abs() < 1e-10 * e.kinetic);
}

#[test]
fn conjugation_symmetry_is_exact() {
    for seed in 200..205 {
        let inst = instance(seed);
        let g = *inst.psi.grid();
        let neg_b0 = ScalarField::new(g, inst.b0.values().iter().map(|v| -v).collect()).unwrap();
        let e1 = energy(&inst.psi, &inst.a, &inst.b0, &inst.p, None).unwrap();
        let e2 = energy(&inst.psi.conj(), &inst.a.negated(), &neg_b0, &inst.p, None).unwrap();
        assert_eq!(e1, e2);
    }
}

#[test]
fn uniform_state_kinetic_equals_potential_norm() {
    // psi = 1 with A = F: only the kinetic term (kH)^2 int |F|^2 survives.
    let g = Grid2D::centered_square(2.0, 64).unwrap();
    let p = Params::new(3.0, 1.0).unwrap();
    let b0 = ScalarField::from_fn(g, |_| 1.0);
    let a = GaugeField::symmetric(g, p.kappa_h(), [0.0, 0.0], 1.0).unwrap();
    let psi = OrderParameter::constant(g, Complex64::new(1.0, 0.0));
    let e = energy(&psi, &a, &b0, &p, None).unwrap();
    let expected = p.kappa_h().powi(2) * 16.0 / 24.0;
    assert!(((e.kinetic - expected) / expected).abs() < 5e-3);
    assert_eq!(e.condensation, 0.0);
}

#[test]
fn residual_of_uniform_state_without_field_vanishes() {
    let g = Grid2D::centered_square(1.0, 8).unwrap();
    let p = Params::new(2.0, 1.0).unwrap();
    let a = GaugeField::zero(g, p.kappa_h()).unwrap();
    let psi = OrderParameter::constant(g, Complex64::new(0.6, 0.8));
    let r = psi_residual(&psi, &a, &p).unwrap();
    assert!(r.iter().all(|z| z.norm() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truncation_never_increases_energy(seed in 0u64..10_000) {
        let inst = instance(seed);
        let e = energy(&inst.psi, &inst.a, &inst.b0, &inst.p, None).unwrap();
        let et = energy(&inst.psi.truncated(), &inst.a, &inst.b0, &inst.p, None).unwrap();
        prop_assert!(et.total <= e.total * (1.0 + 1e-14));
        prop_assert!(inst.psi.truncated().max_modulus() <= 1.0 + 1e-15);
    }

    #[test]
    fn breakdown_parts_are_nonnegative_and_sum(seed in 0u64..10_000) {
        let inst = instance(seed);
        let e = energy(&inst.psi, &inst.a, &inst.b0, &inst.p, None).unwrap();
        prop_assert!(e.kinetic >= 0.0 && e.condensation >= 0.0 && e.magnetic >= 0.0);
        prop_assert!((e.kinetic + e.condensation + e.magnetic - e.total).abs() <= 1e-12 * e.total);
    }
}
