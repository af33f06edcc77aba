//! Minimum-residual solver for `(A − σI) x = b` with `A` Hermitian,
//! following Paige and Saunders. Works for indefinite shifted systems.

use super::{axpy, dot, norm};
use crate::error::Result;
use crate::sparse::LinearOperator;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct MinresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Recomputed `‖b − (A − σ)x‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
    /// Estimate of `cond(A − σI)` from the Lanczos process.
    pub condition_estimate: f64,
}

pub fn minres(op: &dyn LinearOperator, shift: f64, b: &[Complex64], tol: f64, max_iterations: usize) -> Result<MinresOutcome> {
    let n = op.dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return Ok(MinresOutcome { x, iterations: 0, relative_residual: 0.0, converged: true, condition_estimate: 1.0 });
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![zero; n];
    let mut w1 = vec![zero; n];
    let mut w2 = vec![zero; n];
    let mut v = vec![zero; n];

    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let (mut gmax, mut gmin) = (0.0f64, f64::MAX);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations {
        iterations += 1;
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = yi * s);
        op.apply_into(&v, &mut y)?;
        axpy(Complex64::new(-shift, 0.0), &v, &mut y);
        if iterations >= 2 {
            axpy(Complex64::new(-beta / oldb, 0.0), &r1, &mut y);
        }
        let alfa = dot(&v, &y).re;
        axpy(Complex64::new(-alfa / beta, 0.0), &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // Rotate search directions: w1 ← w2 ← w, w ← (v − ε w1 − δ w2)/γ.
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        let denom = 1.0 / gamma;
        w.iter_mut()
            .zip(&v)
            .zip(w1.iter().zip(&w2))
            .for_each(|((wi, vi), (a, b2))| *wi = (vi - a * oldeps - b2 * delta) * denom);
        axpy(Complex64::new(phi, 0.0), &w, &mut x);

        gmax = gmax.max(gamma);
        gmin = gmin.min(gamma);
        if phibar <= tol * beta1 {
            converged = true;
            break;
        }
        if beta == 0.0 {
            break;
        }
    }

    let mut ax = vec![zero; n];
    op.apply_into(&x, &mut ax)?;
    axpy(Complex64::new(-shift, 0.0), &x, &mut ax);
    let res: f64 = ax.iter().zip(b).map(|(a, bi)| (bi - a).norm_sqr()).sum::<f64>().sqrt();
    let relative_residual = res / beta1;
    Ok(MinresOutcome {
        x,
        iterations,
        relative_residual,
        converged: converged && relative_residual <= 10.0 * tol,
        condition_estimate: gmax / gmin,
    })
}
