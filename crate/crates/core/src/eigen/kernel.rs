use super::{dense_hermitian_eigenvalues, lanczos_eig_deflated, LanczosConfig, Target};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// How a kernel dimension was obtained, from most to least certain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    /// Count of dense eigenvalues below the zero threshold.
    ExactDense,
    /// Deflated Lanczos found an eigenvalue above the threshold.
    LanczosCount,
    /// `dim ker SS* = rows − cols + dim ker S*S` from a counted partner kernel.
    RankNullity,
    /// Only a lower bound is known.
    StructuralLowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCount {
    pub dimension: usize,
    pub method: KernelMethod,
    /// False when `dimension` is only a lower bound.
    pub exact: bool,
}

const BATCH: usize = 8;
const MAX_LOCKED: usize = 512;

/// Number of eigenvalues `≤ zero_tol·‖op‖∞` of a positive semidefinite operator.
pub fn kernel_dimension(op: &SparseOperator, zero_tol: f64, dense_cap: usize, cfg: &LanczosConfig) -> Result<KernelCount> {
    let threshold = zero_tol * op.inf_norm();
    if op.nrows() <= dense_cap {
        let eig = dense_hermitian_eigenvalues(op, dense_cap)?;
        let dimension = eig.eigenvalues.iter().filter(|&&v| v <= threshold).count();
        return Ok(KernelCount { dimension, method: KernelMethod::ExactDense, exact: true });
    }
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    while locked.len() < MAX_LOCKED {
        let free = op.nrows() - locked.len();
        if free == 0 {
            return Ok(KernelCount { dimension: locked.len(), method: KernelMethod::LanczosCount, exact: true });
        }
        let batch = BATCH.min(free);
        let r = lanczos_eig_deflated(op, batch, Target::Smallest, cfg, &locked)?;
        let vectors = r.eigenvectors.expect("lanczos returns vectors");
        // One Krylov run sees a single copy of a repeated eigenvalue, so
        // keep locking until a fresh run finds no further zero.
        let before = locked.len();
        for (v, lambda) in vectors.into_iter().zip(r.eigenvalues) {
            if lambda <= threshold {
                locked.push(v);
            }
        }
        if locked.len() == before {
            return Ok(KernelCount { dimension: locked.len(), method: KernelMethod::LanczosCount, exact: true });
        }
    }
    Ok(KernelCount { dimension: locked.len(), method: KernelMethod::LanczosCount, exact: false })
}

/// Kernel dimensions of `S*S` and `SS*` (in that order). Both are counted
/// densely when they fit; otherwise the smaller Gram operator is counted and
/// the other follows from rank-nullity.
pub fn gram_kernel_dimensions(
    s: &SparseOperator,
    zero_tol: f64,
    dense_cap: usize,
    cfg: &LanczosConfig,
) -> Result<(KernelCount, KernelCount)> {
    let sd = s.adjoint();
    let (rows, cols) = (s.nrows(), s.ncols());
    if rows <= dense_cap && cols <= dense_cap {
        let sts = sd.matmul(s)?;
        let sst = s.matmul(&sd)?;
        return Ok((
            kernel_dimension(&sts.hermitian_part()?, zero_tol, dense_cap, cfg)?,
            kernel_dimension(&sst.hermitian_part()?, zero_tol, dense_cap, cfg)?,
        ));
    }
    let (small, small_is_sts) = if cols <= rows { (sd.matmul(s)?, true) } else { (s.matmul(&sd)?, false) };
    let counted = kernel_dimension(&small.hermitian_part()?, zero_tol, dense_cap, cfg)?;
    let other_dim = if small_is_sts {
        (rows + counted.dimension).checked_sub(cols)
    } else {
        (cols + counted.dimension).checked_sub(rows)
    }
    .ok_or_else(|| Error::InvalidArgument("inconsistent rank count".into()))?;
    let derived = KernelCount { dimension: other_dim, method: KernelMethod::RankNullity, exact: counted.exact };
    Ok(if small_is_sts { (counted, derived) } else { (derived, counted) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_full_kernel() {
        let z = SparseOperator::zeros(7, 7);
        let k = kernel_dimension(&z, 1e-10, 100, &LanczosConfig::default()).unwrap();
        assert_eq!(k.dimension, 7);
        assert_eq!(k.method, KernelMethod::ExactDense);
    }

    #[test]
    fn lanczos_count_matches_dense() {
        let diag: Vec<Complex64> = (0..300).map(|i| Complex64::new(if i % 50 == 0 { 0.0 } else { 1.0 + (i * i) as f64 }, 0.0)).collect();
        let op = SparseOperator::diagonal(&diag).mark_hermitian().unwrap();
        let cfg = LanczosConfig::default();
        let dense = kernel_dimension(&op, 1e-10, 4096, &cfg).unwrap();
        let sparse = kernel_dimension(&op, 1e-10, 10, &cfg).unwrap();
        assert_eq!(dense.dimension, 6);
        assert_eq!(sparse.dimension, 6);
        assert_eq!(sparse.method, KernelMethod::LanczosCount);
    }

    #[test]
    fn rank_nullity_agrees_with_dense() {
        // 5×3 with a zero column: rank 2, ker S*S = 1, ker SS* = 3.
        let one = Complex64::new(1.0, 0.0);
        let s = SparseOperator::from_triplets(5, 3, &[(0, 0, one), (1, 0, one), (2, 2, Complex64::new(0.0, 2.0))]);
        let cfg = LanczosConfig::default();
        let (a, b) = gram_kernel_dimensions(&s, 1e-10, 100, &cfg).unwrap();
        assert_eq!((a.dimension, b.dimension), (1, 3));
        let (a, b) = gram_kernel_dimensions(&s, 1e-10, 4, &cfg).unwrap();
        assert_eq!((a.dimension, b.dimension), (1, 3));
        assert_eq!(b.method, KernelMethod::RankNullity);
    }
}
