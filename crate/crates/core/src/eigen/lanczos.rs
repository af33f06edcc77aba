//! Thick-restart Lanczos with full reorthogonalization.
//!
//! The projected matrix is kept dense (Krylov–Schur form) so that restarts
//! with several locked Ritz vectors need no special casing. Shift-invert
//! applies `(A − σ)⁻¹` through MINRES; every returned pair is re-verified
//! against the original operator.

use super::{axpy, dense_matrix_eig, dot, minres, norm, rayleigh, scale, EigenResult};
use crate::error::{Error, Result};
use crate::sparse::{LinearOperator, SparseOperator};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which end of the spectrum to compute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Smallest,
    Largest,
    /// Shift-invert around the given shift.
    Nearest(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanczosConfig {
    /// Residual tolerance relative to the operator's max row sum.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov basis size; defaults to `max(2k + 1, 30)`.
    pub ncv: Option<usize>,
    pub seed: u64,
    /// Relative residual for the inner shifted solves.
    pub inner_tol: f64,
    pub inner_max_iterations: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_restarts: 500,
            ncv: None,
            seed: 0x5eed,
            inner_tol: 1e-10,
            inner_max_iterations: 20_000,
        }
    }
}

#[derive(Clone, Copy)]
enum Order {
    Ascending,
    Descending,
    MagnitudeDescending,
}

struct ShiftInvert<'a> {
    op: &'a SparseOperator,
    shift: f64,
    tol: f64,
    max_iterations: usize,
    anorm: f64,
    inner_iterations: AtomicUsize,
}

impl LinearOperator for ShiftInvert<'_> {
    fn dim(&self) -> usize {
        self.op.nrows()
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        let out = minres(self.op, self.shift, x, self.tol, self.max_iterations)?;
        self.inner_iterations.fetch_add(out.iterations, AtomicOrdering::Relaxed);
        let growth = norm(&out.x) / norm(x).max(f64::MIN_POSITIVE);
        let singular = growth * 1e-12 * self.anorm >= 1.0 || out.condition_estimate * 1e-12 >= 1.0;
        if singular {
            return Err(Error::ShiftSingular { shift: self.shift });
        }
        if !out.converged {
            return Err(Error::NoConvergence { iterations: out.iterations, residual: out.relative_residual });
        }
        y.copy_from_slice(&out.x);
        Ok(())
    }
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
    matvecs: usize,
    converged: bool,
    worst_estimate: f64,
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[&[Vec<Complex64>]]) -> Result<Vec<Complex64>> {
    for _ in 0..5 {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        for set in against {
            orthogonalize(&mut v, set);
        }
        let nv = norm(&v);
        if nv > 1e-8 * (n as f64).sqrt() {
            scale(1.0 / nv, &mut v);
            return Ok(v);
        }
    }
    Err(Error::InvalidArgument("cannot extend basis: space exhausted".into()))
}

/// Two passes of classical Gram-Schmidt; returns the accumulated coefficients.
fn orthogonalize(w: &mut [Complex64], basis: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut coef = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let c: Vec<Complex64> = basis.iter().map(|b| dot(b, w)).collect();
        for (b, ci) in basis.iter().zip(&c) {
            axpy(-ci, b, w);
        }
        coef.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    coef
}

fn sorted_indices(theta: &[f64], order: Order) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| {
        let key = match order {
            Order::Ascending => theta[a].total_cmp(&theta[b]),
            Order::Descending => theta[b].total_cmp(&theta[a]),
            Order::MagnitudeDescending => theta[b].abs().total_cmp(&theta[a].abs()),
        };
        key.then(a.cmp(&b))
    });
    idx
}

fn combine(basis: &[Vec<Complex64>], y: &DMatrix<Complex64>, col: usize) -> Vec<Complex64> {
    let mut x = vec![ZERO; basis[0].len()];
    for (l, b) in basis.iter().enumerate().take(y.nrows()) {
        axpy(y[(l, col)], b, &mut x);
    }
    let nx = norm(&x);
    scale(1.0 / nx, &mut x);
    x
}

#[allow(clippy::too_many_arguments)]
fn thick_restart(
    op: &dyn LinearOperator,
    k: usize,
    ncv: usize,
    order: Order,
    accept: &dyn Fn(f64, f64) -> bool,
    max_restarts: usize,
    rng: &mut ChaCha8Rng,
    locked: &[Vec<Complex64>],
) -> Result<Ritz> {
    let n = op.dim();
    let mut basis: Vec<Vec<Complex64>> = vec![random_unit(n, rng, &[locked])?];
    let mut h = DMatrix::<Complex64>::zeros(ncv, ncv);
    let mut kept = 0;
    let mut matvecs = 0;
    let mut restarts = 0;
    loop {
        let mut resid = Vec::new();
        let mut beta = 0.0;
        for j in kept..ncv {
            let mut w = vec![ZERO; n];
            op.apply_into(&basis[j], &mut w)?;
            matvecs += 1;
            orthogonalize(&mut w, locked);
            let coef = orthogonalize(&mut w, &basis[..=j]);
            for (i, c) in coef.iter().enumerate() {
                h[(i, j)] = *c;
                h[(j, i)] = c.conj();
            }
            h[(j, j)] = Complex64::new(coef[j].re, 0.0);
            let b = norm(&w);
            if j + 1 < ncv {
                let scale_ref = h[(j, j)].norm().max(b).max(f64::MIN_POSITIVE);
                let next = if b <= 1e-12 * scale_ref {
                    random_unit(n, rng, &[locked, &basis])?
                } else {
                    scale(1.0 / b, &mut w);
                    w
                };
                basis.push(next);
            } else {
                resid = w;
                beta = b;
            }
        }

        let (theta, y) = dense_matrix_eig(&h, true);
        let y = y.expect("vectors requested");
        let idx = sorted_indices(&theta, order);
        let mut worst = 0.0f64;
        let mut converged = true;
        for &i in idx.iter().take(k) {
            let est = beta * y[(ncv - 1, i)].norm();
            worst = worst.max(est);
            converged &= accept(theta[i], est);
        }
        if converged || restarts >= max_restarts {
            let vectors = idx.iter().take(k).map(|&i| combine(&basis, &y, i)).collect();
            let values = idx.iter().take(k).map(|&i| theta[i]).collect();
            return Ok(Ritz { values, vectors, matvecs, converged, worst_estimate: worst });
        }

        let p = (k + (ncv - k) / 2).max(k).min(ncv - 1);
        let mut next: Vec<Vec<Complex64>> = idx.iter().take(p).map(|&i| combine(&basis, &y, i)).collect();
        h.fill(ZERO);
        for (q, &i) in idx.iter().take(p).enumerate() {
            h[(q, q)] = Complex64::new(theta[i], 0.0);
            let coupling = y[(ncv - 1, i)] * beta;
            h[(p, q)] = coupling;
            h[(q, p)] = coupling.conj();
        }
        let scale_ref = theta.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(f64::MIN_POSITIVE);
        let v_p = if beta <= 1e-12 * scale_ref {
            for q in 0..p {
                h[(p, q)] = ZERO;
                h[(q, p)] = ZERO;
            }
            random_unit(n, rng, &[locked, &next])?
        } else {
            let mut r = resid;
            orthogonalize(&mut r, &next);
            let nr = norm(&r);
            scale(1.0 / nr, &mut r);
            r
        };
        next.push(v_p);
        basis = next;
        kept = p;
        restarts += 1;
    }
}

/// `k` eigenpairs at the requested end of the spectrum, or nearest a shift.
pub fn lanczos_eig(op: &SparseOperator, k: usize, target: Target, cfg: &LanczosConfig) -> Result<EigenResult> {
    lanczos_eig_deflated(op, k, target, cfg, &[])
}

/// As [`lanczos_eig`], restricted to the orthogonal complement of `locked`
/// (orthonormal vectors spanning an invariant subspace).
pub fn lanczos_eig_deflated(
    op: &SparseOperator,
    k: usize,
    target: Target,
    cfg: &LanczosConfig,
    locked: &[Vec<Complex64>],
) -> Result<EigenResult> {
    if !op.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", op.nrows(), op.ncols())));
    }
    if !op.is_flagged_hermitian() {
        let deviation = op.hermitian_deviation();
        if deviation > 1e-13 * op.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
    }
    let n = op.nrows();
    let free = n.saturating_sub(locked.len());
    if k == 0 || k > free {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs from a space of dimension {free}")));
    }
    if cfg.tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let ncv = cfg.ncv.unwrap_or((2 * k + 1).max(30)).max(k + 1).min(free);
    let anorm = op.inf_norm().max(f64::MIN_POSITIVE);
    // A fresh stream per deflation level: reusing the start vector would give
    // it no component in the part of a degenerate eigenspace not yet locked.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (locked.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let threshold = cfg.tol * anorm;

    let shift_invert;
    let (apply, order, method): (&dyn LinearOperator, Order, String) = match target {
        Target::Smallest => (op, Order::Ascending, "lanczos-smallest".into()),
        Target::Largest => (op, Order::Descending, "lanczos-largest".into()),
        Target::Nearest(shift) => {
            shift_invert = ShiftInvert {
                op,
                shift,
                tol: cfg.inner_tol,
                max_iterations: cfg.inner_max_iterations,
                anorm,
                inner_iterations: AtomicUsize::new(0),
            };
            (&shift_invert, Order::MagnitudeDescending, format!("lanczos-shift-invert({shift})"))
        }
    };
    let shifted = matches!(target, Target::Nearest(_));

    let mut factor = 0.1;
    let mut total = 0;
    for _attempt in 0..3 {
        let accept = |theta: f64, est: f64| {
            if shifted {
                est <= factor * cfg.tol * theta.abs()
            } else {
                est <= factor * threshold
            }
        };
        let ritz = thick_restart(apply, k, ncv, order, &accept, cfg.max_restarts, &mut rng, locked)?;
        total += ritz.matvecs;
        let refined: Vec<(f64, f64)> = ritz
            .vectors
            .iter()
            .map(|v| rayleigh(op, v))
            .collect::<Result<_>>()?;
        let worst = refined.iter().map(|r| r.1).fold(0.0, f64::max);
        if worst <= threshold {
            let mut pairs: Vec<(f64, f64, Vec<Complex64>)> = refined
                .into_iter()
                .zip(ritz.vectors)
                .map(|((l, r), v)| (l, r, v))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let _ = ritz.values;
            return Ok(EigenResult {
                eigenvalues: pairs.iter().map(|p| p.0).collect(),
                residuals: pairs.iter().map(|p| p.1).collect(),
                eigenvectors: Some(pairs.into_iter().map(|p| p.2).collect()),
                method,
                iterations: total,
            });
        }
        if !ritz.converged {
            return Err(Error::NoConvergence { iterations: total, residual: worst.max(ritz.worst_estimate) / anorm });
        }
        factor *= 0.01;
    }
    Err(Error::NoConvergence { iterations: total, residual: f64::NAN })
}
