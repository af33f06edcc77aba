//! Hermitian eigensolvers: a dense oracle, thick-restart Lanczos with
//! optional shift-invert, gap-based clustering and kernel counting.

mod cluster;
mod dense;
mod kernel;
mod lanczos;
mod minres;

pub use cluster::{cluster, Cluster, ClusteredSpectrum};
pub use dense::{dense_hermitian_eig, dense_hermitian_eigenvalues, dense_matrix_eig};
pub use kernel::{gram_kernel_dimensions, kernel_dimension, KernelCount, KernelMethod};
pub use lanczos::{lanczos_eig, lanczos_eig_deflated, LanczosConfig, Target};
pub use minres::{minres, MinresOutcome};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

/// Eigenpairs of a Hermitian operator, ascending.
#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// One column per eigenvalue, when requested.
    #[serde(skip)]
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    /// `‖Op v − λ v‖ / ‖v‖` per pair; empty when only eigenvalues were computed.
    pub residuals: Vec<f64>,
    pub method: String,
    pub iterations: usize,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with columns `index,eigenvalue,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,residual\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            let r = self.residuals.get(i).map(|r| format!("{r:e}")).unwrap_or_default();
            let _ = writeln!(out, "{i},{v:.17e},{r}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("eigen result serializes")
    }
}

const CHUNK: usize = 4096;

/// `x† y` with a fixed chunked reduction order, independent of thread count.
pub(crate) fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    let partial: Vec<Complex64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.conj() * q).sum())
        .collect();
    partial.into_iter().sum()
}

pub(crate) fn norm(x: &[Complex64]) -> f64 {
    let partial: Vec<f64> = x
        .par_chunks(CHUNK)
        .map(|a| a.iter().map(|p| p.norm_sqr()).sum())
        .collect();
    partial.into_iter().sum::<f64>().sqrt()
}

/// `y ← y + a x`.
pub(crate) fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(q, p)| *q += a * p));
}

pub(crate) fn scale(a: f64, x: &mut [Complex64]) {
    x.par_iter_mut().for_each(|v| *v *= a);
}

/// Residual `‖A v − θ v‖ / ‖v‖` and Rayleigh quotient `θ = v†Av / v†v`.
pub(crate) fn rayleigh(op: &dyn crate::sparse::LinearOperator, v: &[Complex64]) -> crate::Result<(f64, f64)> {
    let mut av = vec![Complex64::new(0.0, 0.0); v.len()];
    op.apply_into(v, &mut av)?;
    let nv2 = dot(v, v).re;
    if nv2 == 0.0 {
        return Err(crate::Error::ZeroNorm);
    }
    let theta = dot(v, &av).re / nv2;
    axpy(Complex64::new(-theta, 0.0), v, &mut av);
    Ok((theta, norm(&av) / nv2.sqrt()))
}
