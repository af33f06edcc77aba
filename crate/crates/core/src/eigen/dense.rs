use super::EigenResult;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Relative Hermiticity slack for operators produced by floating-point products.
const HERMITIAN_SLACK: f64 = 1e-13;

fn checked_dense(op: &SparseOperator, cap: usize) -> Result<DMatrix<Complex64>> {
    if !op.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", op.nrows(), op.ncols())));
    }
    if op.nrows() > cap {
        return Err(Error::TooLargeForDense { n: op.nrows(), cap });
    }
    if !op.is_flagged_hermitian() {
        let deviation = op.hermitian_deviation();
        if deviation > HERMITIAN_SLACK * op.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
    }
    Ok(op.to_dense())
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Full spectrum of a dense Hermitian matrix, ascending, with optional
/// eigenvectors as columns. The input is symmetrized first.
pub fn dense_matrix_eig(m: &DMatrix<Complex64>, vectors: bool) -> (Vec<f64>, Option<DMatrix<Complex64>>) {
    if m.nrows() == 0 {
        return (Vec::new(), vectors.then(|| DMatrix::zeros(0, 0)));
    }
    // The QR deflation test is relative to neighbouring diagonal entries; a
    // zero diagonal block never deflates and underflows to NaN. Shifting to
    // a positive definite matrix keeps every diagonal entry away from zero.
    let shift = m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max).max(1.0);
    let mut sym = (m + m.adjoint()).scale(0.5);
    for i in 0..sym.nrows() {
        sym[(i, i)] += Complex64::new(shift, 0.0);
    }
    if vectors {
        let eig = sym.symmetric_eigen();
        let vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v - shift).collect();
        let order = sorted_order(&vals);
        let sorted_vals = order.iter().map(|&i| vals[i]).collect();
        let cols: Vec<_> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        (sorted_vals, Some(DMatrix::from_columns(&cols)))
    } else {
        let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().map(|v| v - shift).collect();
        vals.sort_by(f64::total_cmp);
        (vals, None)
    }
}

/// Eigenvalues only; the cheaper path for multiplicity counting.
pub fn dense_hermitian_eigenvalues(op: &SparseOperator, cap: usize) -> Result<EigenResult> {
    let m = checked_dense(op, cap)?;
    let (eigenvalues, _) = dense_matrix_eig(&m, false);
    Ok(EigenResult {
        eigenvalues,
        eigenvectors: None,
        residuals: Vec::new(),
        method: "dense".into(),
        iterations: 0,
    })
}

/// Full eigendecomposition with residuals measured against the sparse operator.
pub fn dense_hermitian_eig(op: &SparseOperator, cap: usize) -> Result<EigenResult> {
    let m = checked_dense(op, cap)?;
    let (eigenvalues, vecs) = dense_matrix_eig(&m, true);
    let vecs = vecs.expect("vectors requested");
    let columns: Vec<Vec<Complex64>> = (0..vecs.ncols()).map(|j| vecs.column(j).iter().copied().collect()).collect();
    let residuals = columns
        .par_iter()
        .zip(&eigenvalues)
        .map(|(v, &lambda)| {
            let av = op.apply(v);
            let r: f64 = av.iter().zip(v).map(|(a, x)| (a - x * lambda).norm_sqr()).sum();
            let nv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            (r / nv).sqrt()
        })
        .collect();
    Ok(EigenResult {
        eigenvalues,
        eigenvectors: Some(columns),
        residuals,
        method: "dense".into(),
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_matrix() {
        let op = SparseOperator::diagonal(&[c(3.0), c(1.0), c(2.0)]);
        let r = dense_hermitian_eig(&op, 10).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert!(r.max_residual() == 0.0);
    }

    #[test]
    fn pauli_x() {
        let op = SparseOperator::from_triplets(2, 2, &[(0, 1, c(1.0)), (1, 0, c(1.0))]);
        let r = dense_hermitian_eig(&op, 10).unwrap();
        assert!((r.eigenvalues[0] + 1.0).abs() < 1e-15 && (r.eigenvalues[1] - 1.0).abs() < 1e-15);
        assert!(r.max_residual() < 1e-15);
    }

    #[test]
    fn complex_hermitian_2x2() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let i = Complex64::new(0.0, 1.0);
        let op = SparseOperator::from_triplets(2, 2, &[(0, 0, c(1.0)), (0, 1, i), (1, 0, -i), (1, 1, c(1.0))]);
        let r = dense_hermitian_eig(&op, 10).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-15 && (r.eigenvalues[1] - 2.0).abs() < 1e-15);
        assert!(r.max_residual() < 1e-15);
    }

    #[test]
    fn zero_diagonal_blocks_do_not_produce_nan() {
        // Dense oracle on a matrix with a large kernel and zero diagonal.
        let one = c(1.0);
        let op = SparseOperator::from_triplets(6, 6, &[(0, 5, one), (5, 0, one), (1, 4, c(2.0)), (4, 1, c(2.0))]);
        let r = dense_hermitian_eig(&op, 10).unwrap();
        let expect = [-2.0, -1.0, 0.0, 0.0, 1.0, 2.0];
        for (a, b) in r.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{:?}", r.eigenvalues);
        }
    }

    #[test]
    fn rejects_non_hermitian_and_oversized() {
        let op = SparseOperator::from_triplets(2, 2, &[(0, 1, c(1.0))]);
        assert!(matches!(dense_hermitian_eigenvalues(&op, 10), Err(Error::NotHermitian { .. })));
        let id = SparseOperator::identity(5);
        assert!(matches!(dense_hermitian_eigenvalues(&id, 4), Err(Error::TooLargeForDense { n: 5, cap: 4 })));
    }
}
