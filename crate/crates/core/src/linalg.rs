//! Matrix-free conjugate gradients and the 5-point Dirichlet Laplacian.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Chunked so the reduction order is fixed.
    a.par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` for symmetric positive (semi)definite `A` given as a
/// closure; `x` holds the initial guess on entry.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rel = rr.sqrt() / bnorm;
        if rel <= rel_tol {
            return Ok(CgReport { iterations: it, relative_residual: rel });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.par_iter_mut().zip(r.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= rel_tol {
        Ok(CgReport { iterations: max_iter, relative_residual: rel })
    } else {
        Err(Error::LinearSolve { residual: rel, iterations: max_iter })
    }
}

/// Negative 5-point Laplacian on interior nodes with zero boundary values;
/// boundary entries of `out` are set to zero.
pub(crate) fn neg_laplacian_dirichlet(g: &Grid2D, x: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let inv = 1.0 / (g.h() * g.h());
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                *o = 0.0;
                continue;
            }
            let k = j * nx + i;
            let nb = |ii: usize, jj: usize| {
                if ii == 0 || jj == 0 || ii == nx - 1 || jj == ny - 1 {
                    0.0
                } else {
                    x[jj * nx + ii]
                }
            };
            *o = inv * (4.0 * x[k] - nb(i - 1, j) - nb(i + 1, j) - nb(i, j - 1) - nb(i, j + 1));
        }
    });
}

/// Solve `Delta xi = f` on interior nodes with `xi = 0` on the boundary.
pub fn poisson_dirichlet(g: &Grid2D, f: &[f64], rel_tol: f64) -> Result<(Vec<f64>, CgReport)> {
    let (nx, ny) = (g.nx(), g.ny());
    // -Delta xi = -f restricted to the interior.
    let mut rhs = vec![0.0; g.len()];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            rhs[j * nx + i] = -f[j * nx + i];
        }
    }
    let mut x = vec![0.0; g.len()];
    let max_iter = 20 * (nx + ny) + 200;
    let rep = conjugate_gradient(|v, o| neg_laplacian_dirichlet(g, v, o), &rhs, &mut x, rel_tol, max_iter)?;
    Ok((x, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_reproduces_discrete_quadratic() {
        // xi = (1 - x^2)(1 - y^2) on (-1,1)^2 is reproduced exactly by the
        // 5-point stencil since its fourth derivatives vanish per axis.
        let g = Grid2D::centered_square(2.0, 20).unwrap();
        let exact: Vec<f64> = (0..g.len())
            .map(|k| {
                let (i, j) = (k % g.nx(), k / g.nx());
                let [x, y] = g.point(i, j);
                (1.0 - x * x) * (1.0 - y * y)
            })
            .collect();
        let f: Vec<f64> = (0..g.len())
            .map(|k| {
                let (i, j) = (k % g.nx(), k / g.nx());
                let [x, y] = g.point(i, j);
                -2.0 * (1.0 - y * y) - 2.0 * (1.0 - x * x)
            })
            .collect();
        let (xi, rep) = poisson_dirichlet(&g, &f, 1e-12).unwrap();
        assert!(rep.relative_residual <= 1e-12);
        let err = xi.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid2D::centered_square(2.0, 8).unwrap();
        let (xi, rep) = poisson_dirichlet(&g, &vec![0.0; g.len()], 1e-10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(xi.iter().all(|&v| v == 0.0));
    }
}
