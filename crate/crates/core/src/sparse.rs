//! Compressed sparse row storage for complex operators.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{BufRead, Write};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Rows shorter than this are not worth splitting across threads.
const PAR_MIN_ROWS: usize = 256;

/// Complex CSR matrix. Column indices are sorted within each row and no
/// explicit zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Builds a matrix from per-row `(column, value)` lists. Entries are
    /// sorted, duplicates summed, and exact zeros dropped.
    pub fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        assert_eq!(rows.len(), nrows, "row count mismatch");
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                assert!(c < ncols, "column {c} out of range {ncols}");
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            hermitian: false,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(nrows, ncols, rows)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_rows(nrows, ncols, vec![Vec::new(); nrows])
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, Complex64::new(1.0, 0.0))
    }

    pub fn scaled_identity(n: usize, s: Complex64) -> Self {
        Self::diagonal(&vec![s; n])
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self::from_rows(n, n, diag.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect())
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(m.nrows(), m.ncols(), rows)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => ZERO,
        }
    }

    /// Number of rows holding at least one stored entry.
    pub fn nonzero_rows(&self) -> usize {
        (0..self.nrows).filter(|&i| self.row_ptr[i + 1] > self.row_ptr[i]).count()
    }

    /// Whether the Hermitian flag has been set (and verified) on this operator.
    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Sets the Hermitian flag after checking `‖A − A*‖_max = 0` exactly.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let deviation = self.hermitian_deviation();
        if deviation != 0.0 {
            return Err(Error::NotHermitian { deviation });
        }
        self.hermitian = true;
        Ok(self)
    }

    /// `(A + A*) / 2`, flagged Hermitian. Used for Gram products whose
    /// floating-point sums are Hermitian only up to rounding.
    pub fn hermitian_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", self.nrows, self.ncols)));
        }
        let mut out = self.add(&self.adjoint())?.scale(Complex64::new(0.5, 0.0));
        out.hermitian = true;
        Ok(out)
    }

    /// `max |A_ij − conj(A_ji)|`; infinite for non-square operators.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    /// `y = A x`, rows processed in parallel; each row sum is sequential so
    /// the result does not depend on the thread count.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut()
            .with_min_len(PAR_MIN_ROWS)
            .enumerate()
            .for_each(|(i, yi)| {
                let (cols, vals) = self.row(i);
                let mut acc = ZERO;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * x[c];
                }
                *yi = acc;
            });
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Conjugate transpose. `A.adjoint().adjoint() == A` bit for bit.
    pub fn adjoint(&self) -> Self {
        self.transpose_with(|v| v.conj())
    }

    pub fn transpose(&self) -> Self {
        self.transpose_with(|v| v)
    }

    fn transpose_with(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        // Rows are visited in order, so each output row comes out sorted.
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                col_idx[p] = i;
                values[p] = f(v);
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
            hermitian: self.hermitian,
        }
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = v.conj();
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let rows = (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| (c, v * s)).collect()
            })
            .collect();
        Self::from_rows(self.nrows, self.ncols, rows)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &SparseOperator, s: Complex64) -> Result<Self> {
        self.check_same_shape(other)?;
        let rows = (0..self.nrows)
            .map(|i| {
                let (c1, v1) = self.row(i);
                let (c2, v2) = other.row(i);
                c1.iter()
                    .zip(v1)
                    .map(|(&c, &v)| (c, v))
                    .chain(c2.iter().zip(v2).map(|(&c, &v)| (c, v * s)))
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(self.nrows, self.ncols, rows))
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<Self> {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    fn check_same_shape(&self, other: &SparseOperator) -> Result<()> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        Ok(())
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let ncols = other.ncols;
        let rows: Vec<Vec<(usize, Complex64)>> = (0..self.nrows)
            .into_par_iter()
            .with_min_len(PAR_MIN_ROWS)
            .map_init(
                || (vec![ZERO; ncols], vec![false; ncols], Vec::new()),
                |(acc, seen, touched), i| {
                    let (ca, va) = self.row(i);
                    for (&k, &a) in ca.iter().zip(va) {
                        let (cb, vb) = other.row(k);
                        for (&j, &b) in cb.iter().zip(vb) {
                            if !seen[j] {
                                seen[j] = true;
                                touched.push(j);
                            }
                            acc[j] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let row: Vec<(usize, Complex64)> = touched
                        .iter()
                        .map(|&j| {
                            let v = acc[j];
                            acc[j] = ZERO;
                            seen[j] = false;
                            (j, v)
                        })
                        .collect();
                    touched.clear();
                    row
                },
            )
            .collect();
        Ok(Self::from_rows(self.nrows, ncols, rows))
    }

    /// `max_ij |A_ij − B_ij|` over the union of both sparsity patterns.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let d = if q >= c2.len() || (p < c1.len() && c1[p] < c2[q]) {
                    p += 1;
                    v1[p - 1].norm()
                } else if p >= c1.len() || c2[q] < c1[p] {
                    q += 1;
                    v2[q - 1].norm()
                } else {
                    p += 1;
                    q += 1;
                    (v1[p - 1] - v2[q - 1]).norm()
                };
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum; bounds the spectral norm of a Hermitian operator.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Extracts the block `rows × cols`.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let out_rows = rows
            .clone()
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&c, _)| cols.contains(&c))
                    .map(|(&c, &v)| (c - cols.start, v))
                    .collect()
            })
            .collect();
        Self::from_rows(rows.len(), cols.len(), out_rows)
    }

    /// Assembles a block matrix from a grid of optional blocks. Row and column
    /// sizes are given explicitly so that empty blocks need no placeholder.
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[&[Option<&SparseOperator>]],
    ) -> Result<Self> {
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let col_off: Vec<usize> = col_sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let mut rows = Vec::with_capacity(nrows);
        for (bi, &rs) in row_sizes.iter().enumerate() {
            for (bj, blk) in blocks[bi].iter().enumerate() {
                if let Some(b) = blk {
                    if b.nrows != rs || b.ncols != col_sizes[bj] {
                        return Err(Error::DimensionMismatch(format!(
                            "block ({bi},{bj}) is {}x{}, expected {}x{}",
                            b.nrows, b.ncols, rs, col_sizes[bj]
                        )));
                    }
                }
            }
            for i in 0..rs {
                let mut row = Vec::new();
                for (bj, blk) in blocks[bi].iter().enumerate() {
                    if let Some(b) = blk {
                        let (c, v) = b.row(i);
                        row.extend(c.iter().zip(v).map(|(&c, &v)| (c + col_off[bj], v)));
                    }
                }
                rows.push(row);
            }
        }
        Ok(Self::from_rows(nrows, ncols, rows))
    }

    /// Writes Matrix Market coordinate format. Hermitian operators (flagged
    /// or with zero deviation) are written as `hermitian` with the lower
    /// triangle only.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let herm = self.hermitian || (self.is_square() && self.hermitian_deviation() == 0.0);
        let kind = if herm { "hermitian" } else { "general" };
        writeln!(w, "%%MatrixMarket matrix coordinate complex {kind}")?;
        let entries: Vec<(usize, usize, Complex64)> = (0..self.nrows)
            .flat_map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(move |(&j, &v)| (i, j, v)).collect::<Vec<_>>()
            })
            .filter(|&(i, j, _)| !herm || i >= j)
            .collect();
        writeln!(w, "{} {} {}", self.nrows, self.ncols, entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {} {}", i + 1, j + 1, v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the complex coordinate format written by [`write_matrix_market`](Self::write_matrix_market).
    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("matrix market: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "%%MatrixMarket" || fields[2] != "coordinate" || fields[3] != "complex" {
            return Err(bad("unsupported header"));
        }
        let herm = match fields[4] {
            "hermitian" => true,
            "general" => false,
            _ => return Err(bad("unsupported symmetry")),
        };
        let mut size: Option<(usize, usize)> = None;
        let mut triplets = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if size.is_none() {
                if parts.len() != 3 {
                    return Err(bad("size line"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("size line"));
                size = Some((p(parts[0])?, p(parts[1])?));
                continue;
            }
            if parts.len() != 4 {
                return Err(bad("entry line"));
            }
            let i: usize = parts[0].parse().map_err(|_| bad("row index"))?;
            let j: usize = parts[1].parse().map_err(|_| bad("column index"))?;
            let re: f64 = parts[2].parse().map_err(|_| bad("real part"))?;
            let im: f64 = parts[3].parse().map_err(|_| bad("imaginary part"))?;
            if i == 0 || j == 0 {
                return Err(bad("indices are 1-based"));
            }
            let v = Complex64::new(re, im);
            triplets.push((i - 1, j - 1, v));
            if herm && i != j {
                triplets.push((j - 1, i - 1, v.conj()));
            }
        }
        let (nr, nc) = size.ok_or_else(|| bad("missing size line"))?;
        if triplets.iter().any(|&(i, j, _)| i >= nr || j >= nc) {
            return Err(bad("index out of range"));
        }
        let mut op = Self::from_triplets(nr, nc, &triplets);
        op.hermitian = herm;
        Ok(op)
    }
}

/// Something that can be applied to a vector; implemented by sparse
/// operators and by spectral transformations built on them.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()>;
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.matvec(x, y);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> SparseOperator {
        SparseOperator::from_triplets(
            3,
            4,
            &[(0, 3, c(1., 2.)), (0, 1, c(-1., 0.)), (2, 0, c(0., 3.)), (2, 0, c(0., -3.)), (1, 2, c(5., 0.))],
        )
    }

    #[test]
    fn construction_sorts_and_drops_zeros() {
        let a = sample();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.row(0).0, &[1, 3]);
        assert_eq!(a.get(2, 0), ZERO);
        assert_eq!(a.nonzero_rows(), 2);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let a = sample();
        let ad = a.adjoint();
        assert_eq!((ad.nrows(), ad.ncols()), (4, 3));
        assert_eq!(ad.get(3, 0), c(1., -2.));
        assert_eq!(ad.adjoint(), a);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let b = a.adjoint();
        let p = a.matmul(&b).unwrap();
        let dense = a.to_dense() * b.to_dense();
        assert_eq!(p.to_dense(), dense);
        assert_eq!(p.hermitian_deviation(), 0.0);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn blocks_and_submatrix() {
        let a = sample();
        let ad = a.adjoint();
        let blk = SparseOperator::from_blocks(&[3, 4], &[3, 4], &[&[None, Some(&a)], &[Some(&ad), None]]).unwrap();
        assert_eq!(blk.hermitian_deviation(), 0.0);
        assert_eq!(blk.submatrix(0..3, 3..7), a);
        assert!(blk.clone().mark_hermitian().unwrap().is_flagged_hermitian());
        assert!(a.clone().mark_hermitian().is_err());
    }

    #[test]
    fn matvec_and_norms() {
        let a = sample();
        let y = a.apply(&[c(1., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]);
        assert_eq!(y, vec![c(0., 2.), c(5., 0.), ZERO]);
        assert_eq!(a.max_abs(), 5.0);
        // Row sums are 1 + √5 and 5.
        assert_eq!(a.inf_norm(), 5.0);
    }

    #[test]
    fn hermitian_identity_adjoint_is_itself() {
        let l = SparseOperator::from_triplets(2, 2, &[(0, 0, c(2., 0.)), (0, 1, c(-1., 0.)), (1, 0, c(-1., 0.)), (1, 1, c(2., 0.))]);
        assert_eq!(l.adjoint(), l);
    }

    #[test]
    fn matrix_market_hermitian_writes_lower_triangle() {
        let a = sample();
        let h = SparseOperator::from_blocks(&[3, 4], &[3, 4], &[&[None, Some(&a)], &[Some(&a.adjoint()), None]]).unwrap();
        let mut buf = Vec::new();
        h.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate complex hermitian"));
        assert_eq!(text.lines().nth(1).unwrap(), "7 7 3");
        let back = SparseOperator::read_matrix_market(&buf[..]).unwrap();
        assert_eq!(back.to_dense(), h.to_dense());
    }

    fn arb_sparse() -> impl Strategy<Value = SparseOperator> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, cc)| {
            proptest::collection::vec((0..r, 0..cc, -4i32..5, -4i32..5), 0..20).prop_map(move |t| {
                let trip: Vec<_> = t.into_iter().map(|(i, j, a, b)| (i, j, c(a as f64 * 0.5, b as f64 * 0.25))).collect();
                SparseOperator::from_triplets(r, cc, &trip)
            })
        })
    }

    proptest! {
        #[test]
        fn adjoint_involution_holds(a in arb_sparse()) {
            prop_assert_eq!(a.adjoint().adjoint().max_abs_diff(&a), 0.0);
            prop_assert_eq!(a.adjoint().to_dense(), a.to_dense().adjoint());
        }

        #[test]
        fn matrix_market_round_trip(a in arb_sparse()) {
            let mut buf = Vec::new();
            a.write_matrix_market(&mut buf).unwrap();
            let back = SparseOperator::read_matrix_market(&buf[..]).unwrap();
            prop_assert_eq!(back.to_dense(), a.to_dense());
        }
    }
}
