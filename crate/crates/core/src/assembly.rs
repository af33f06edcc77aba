//! Sparse assembly of the discrete Dirac operators and Laplacians.
//!
//! Unknown layout of the zigzag operator `A_m`: `(f₁ on A, f₂ on A, f₃ on I,
//! f₄ on I)`, each block ordered like the domain's node lists. The
//! derivative `∂_j` is the central difference `(u(x+he_j) − u(x−he_j)) / 2h`
//! with zero extension outside the node set the argument lives on.

use crate::algebra::{constant_matrices, time_reversal_matrix, Mat2, Mat4};
use crate::domain::VoxelDomain;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NEG_I: Complex64 = Complex64::new(0.0, -1.0);

/// Which components carry the Dirichlet condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiracVariant {
    /// Dirichlet on `f₃, f₄` (zigzag): `[[m, S], [S*, −m]]`.
    A,
    /// Dirichlet on `f₁, f₂`: `[[m, S*], [S, −m]]`, upper components on `I`.
    B,
}

fn require_interior(domain: &VoxelDomain) -> Result<()> {
    if domain.num_interior() == 0 {
        Err(Error::EmptyInterior)
    } else {
        Ok(())
    }
}

fn pauli() -> [Mat2; 3] {
    constant_matrices().sigma
}

/// Discrete `T_min = −i σ·∇` from `ℂ^{2|I|}` (f₃, f₄ on I) to `ℂ^{2|A|}` (f₁, f₂ on A).
pub fn assemble_t_min(domain: &VoxelDomain) -> Result<SparseOperator> {
    require_interior(domain)?;
    let na = domain.num_all();
    let ni = domain.num_interior();
    let c = 1.0 / (2.0 * domain.h());
    let sigma = pauli();
    let rows: Vec<Vec<(usize, Complex64)>> = (0..2 * na)
        .into_par_iter()
        .with_min_len(256)
        .map(|row| {
            let (s, a) = (row / na, row % na);
            let mut entries = Vec::with_capacity(6);
            for (axis, sj) in sigma.iter().enumerate() {
                for dir in [1i64, -1] {
                    let Some(y) = domain.neighbor(a, axis, dir) else { continue };
                    let Some(iy) = domain.interior_index(y) else { continue };
                    let w = dir as f64 * c;
                    for t in 0..2 {
                        let p = sj.get(s, t);
                        if p != ZERO {
                            entries.push((t * ni + iy, NEG_I * p * w));
                        }
                    }
                }
            }
            entries
        })
        .collect();
    Ok(SparseOperator::from_rows(2 * na, 2 * ni, rows))
}

/// Conjugate transpose; the discrete `T_max` is `adjoint(T_min)`.
pub fn adjoint(op: &SparseOperator) -> SparseOperator {
    op.adjoint()
}

/// Assembles `A_m` or `B_m`; the Hermitian flag is set only after an exact check.
pub fn assemble_dirac(domain: &VoxelDomain, m: f64, variant: DiracVariant) -> Result<SparseOperator> {
    let s = assemble_t_min(domain)?;
    dirac_from_t_min(&s, m, variant)
}

/// Block operator built from an already assembled `T_min`.
pub fn dirac_from_t_min(s: &SparseOperator, m: f64, variant: DiracVariant) -> Result<SparseOperator> {
    let sd = s.adjoint();
    let (up, lo) = (s.nrows(), s.ncols());
    let mass = |n: usize, v: f64| SparseOperator::scaled_identity(n, Complex64::new(v, 0.0));
    let op = match variant {
        DiracVariant::A => {
            let (pm, nm) = (mass(up, m), mass(lo, -m));
            SparseOperator::from_blocks(&[up, lo], &[up, lo], &[&[Some(&pm), Some(s)], &[Some(&sd), Some(&nm)]])?
        }
        DiracVariant::B => {
            let (pm, nm) = (mass(lo, m), mass(up, -m));
            SparseOperator::from_blocks(&[lo, up], &[lo, up], &[&[Some(&pm), Some(&sd)], &[Some(s), Some(&nm)]])?
        }
    };
    op.mark_hermitian()
}

/// Scalar `L` with `S*S = L ⊗ I₂`, computed from the sparse product and
/// checked to be exactly block scalar.
pub fn induced_laplacian(domain: &VoxelDomain) -> Result<SparseOperator> {
    let s = assemble_t_min(domain)?;
    induced_laplacian_from(&s)
}

pub fn induced_laplacian_from(s: &SparseOperator) -> Result<SparseOperator> {
    let gram = s.adjoint().matmul(s)?;
    let n = s.ncols() / 2;
    let l11 = gram.submatrix(0..n, 0..n);
    let l22 = gram.submatrix(n..2 * n, n..2 * n);
    let deviation = l11
        .max_abs_diff(&l22)
        .max(gram.submatrix(0..n, n..2 * n).max_abs())
        .max(gram.submatrix(n..2 * n, 0..n).max_abs());
    if deviation != 0.0 {
        return Err(Error::NonScalarProduct { deviation });
    }
    l11.mark_hermitian()
}

/// Standard 7-point Dirichlet Laplacian on the node set `A` (spacing `h`,
/// neighbours outside `A` contribute zero).
pub fn reference_laplacian_7pt(domain: &VoxelDomain) -> Result<SparseOperator> {
    require_interior(domain)?;
    let inv_h2 = 1.0 / (domain.h() * domain.h());
    let rows: Vec<Vec<(usize, Complex64)>> = (0..domain.num_all())
        .into_par_iter()
        .with_min_len(256)
        .map(|a| {
            let mut row = vec![(a, Complex64::new(6.0 * inv_h2, 0.0))];
            for axis in 0..3 {
                for dir in [1i64, -1] {
                    if let Some(b) = domain.neighbor(a, axis, dir) {
                        row.push((b, Complex64::new(-inv_h2, 0.0)));
                    }
                }
            }
            row
        })
        .collect();
    SparseOperator::from_rows(domain.num_all(), domain.num_all(), rows).mark_hermitian()
}

/// Applies the `T_max` stencil to upper components `(f₁, f₂)` given on `A`
/// (length `2|A|`), returning values on `I` (length `2|I|`). Equal to
/// `adjoint(T_min) · u` without assembling the matrix.
pub fn apply_t_max(domain: &VoxelDomain, upper: &[Complex64]) -> Vec<Complex64> {
    let na = domain.num_all();
    let ni = domain.num_interior();
    assert_eq!(upper.len(), 2 * na);
    let c = 1.0 / (2.0 * domain.h());
    let sigma = pauli();
    (0..2 * ni)
        .into_par_iter()
        .with_min_len(256)
        .map(|row| {
            let (t, i) = (row / ni, row % ni);
            stencil_at(domain, domain.interior_node(i), t, upper, &sigma, c)
        })
        .collect()
}

/// The same stencil evaluated at every node of `A` (length `2|A|`), with
/// zero extension outside `A`. Rows on the boundary layer pick up the
/// truncation error that the assembled `T_max` does not see.
pub fn apply_t_max_extended(domain: &VoxelDomain, upper: &[Complex64]) -> Vec<Complex64> {
    let na = domain.num_all();
    assert_eq!(upper.len(), 2 * na);
    let c = 1.0 / (2.0 * domain.h());
    let sigma = pauli();
    (0..2 * na)
        .into_par_iter()
        .with_min_len(256)
        .map(|row| stencil_at(domain, row % na, row / na, upper, &sigma, c))
        .collect()
}

fn stencil_at(domain: &VoxelDomain, a: usize, t: usize, upper: &[Complex64], sigma: &[Mat2; 3], c: f64) -> Complex64 {
    let na = domain.num_all();
    let mut acc = ZERO;
    for (axis, sj) in sigma.iter().enumerate() {
        for dir in [1i64, -1] {
            if let Some(b) = domain.neighbor(a, axis, dir) {
                for s in 0..2 {
                    let p = sj.get(t, s);
                    if p != ZERO {
                        acc += NEG_I * p * (dir as f64 * c) * upper[s * na + b];
                    }
                }
            }
        }
    }
    acc
}

/// Row positions of each `A_m` / `B_m` unknown in the padded layout where
/// all four components live on `A` (index `c·|A| + a`).
pub fn padded_positions(domain: &VoxelDomain, variant: DiracVariant) -> Vec<usize> {
    let na = domain.num_all();
    let ni = domain.num_interior();
    let on_all = |c: usize| (0..na).map(move |a| c * na + a);
    let on_int = |c: usize| (0..ni).map(move |i| c * na + domain.interior_node(i));
    match variant {
        DiracVariant::A => on_all(0).chain(on_all(1)).chain(on_int(2)).chain(on_int(3)).collect(),
        DiracVariant::B => on_int(0).chain(on_int(1)).chain(on_all(2)).chain(on_all(3)).collect(),
    }
}

/// Embeds a Dirac operator into the padded `4|A|` layout; rows and columns
/// of constrained components on the boundary layer are zero.
pub fn embed_padded(domain: &VoxelDomain, op: &SparseOperator, variant: DiracVariant) -> Result<SparseOperator> {
    let pos = padded_positions(domain, variant);
    if pos.len() != op.nrows() || !op.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, layout expects {}",
            op.nrows(),
            op.ncols(),
            pos.len()
        )));
    }
    let n = 4 * domain.num_all();
    let mut rows = vec![Vec::new(); n];
    for (r, &pr) in pos.iter().enumerate() {
        let (cols, vals) = op.row(r);
        rows[pr] = cols.iter().zip(vals).map(|(&c, &v)| (pos[c], v)).collect();
    }
    Ok(SparseOperator::from_rows(n, n, rows))
}

/// `U ⊗ I_{|A|}` in the padded layout.
pub fn lift_padded(domain: &VoxelDomain, u: &Mat4) -> SparseOperator {
    let na = domain.num_all();
    let mut rows = vec![Vec::new(); 4 * na];
    for c in 0..4 {
        for d in 0..4 {
            let v = u.get(c, d);
            if v != ZERO {
                for a in 0..na {
                    rows[c * na + a].push((d * na + a, v));
                }
            }
        }
    }
    SparseOperator::from_rows(4 * na, 4 * na, rows)
}

/// Lifts a block-diagonal `diag(U_upper, U_lower)` into the `A_m` layout.
pub fn lift_block_diagonal(domain: &VoxelDomain, u: &Mat4) -> Result<SparseOperator> {
    for i in 0..2 {
        for j in 2..4 {
            if u.get(i, j) != ZERO || u.get(j, i) != ZERO {
                return Err(Error::InvalidArgument("matrix mixes upper and lower components".into()));
            }
        }
    }
    let na = domain.num_all();
    let ni = domain.num_interior();
    let n = 2 * na + 2 * ni;
    let mut rows = vec![Vec::new(); n];
    for c in 0..2 {
        for d in 0..2 {
            let up = u.get(c, d);
            if up != ZERO {
                for a in 0..na {
                    rows[c * na + a].push((d * na + a, up));
                }
            }
            let lo = u.get(c + 2, d + 2);
            if lo != ZERO {
                for i in 0..ni {
                    rows[2 * na + c * ni + i].push((2 * na + d * ni + i, lo));
                }
            }
        }
    }
    Ok(SparseOperator::from_rows(n, n, rows))
}

/// Grid lift of the time-reversal unitary `−iγ₅α₂` in the `A_m` layout.
pub fn time_reversal_lift(domain: &VoxelDomain) -> Result<SparseOperator> {
    lift_block_diagonal(domain, &time_reversal_matrix())
}

/// Grid lift of `β` in the `A_m` layout.
pub fn beta_lift(domain: &VoxelDomain) -> Result<SparseOperator> {
    lift_block_diagonal(domain, &constant_matrices().beta)
}

/// Whether every stored entry of every central-difference block is real.
/// The matrix form of the time-reversal check relies on this.
pub fn stencils_are_real(s: &SparseOperator) -> bool {
    // S = −i Σ σ_j ⊗ D_j; multiplying by i and removing σ₂'s factor i leaves ±1/(2h).
    s.values().iter().all(|v| v.re == 0.0 || v.im == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{voxelize, Aabb, DomainSpec};
    use nalgebra::DMatrix;

    fn cube(n: usize) -> VoxelDomain {
        voxelize(&DomainSpec::unit_cube(), 1.0 / n as f64, &Aabb::new([0.0; 3], [1.0; 3])).unwrap()
    }

    /// Dense oracle: builds −i Σ σ_j ⊗ D_j by looping over all (row, column)
    /// node pairs and testing the neighbour relation by coordinates.
    fn dense_t_min_oracle(d: &VoxelDomain) -> DMatrix<Complex64> {
        let (na, ni, h) = (d.num_all(), d.num_interior(), d.h());
        let sigma = pauli();
        let mut out = DMatrix::zeros(2 * na, 2 * ni);
        for a in 0..na {
            let pa = d.coords(a);
            for i in 0..ni {
                let pi = d.coords(d.interior_node(i));
                for axis in 0..3 {
                    let others_equal = (0..3).filter(|&q| q != axis).all(|q| (pa[q] - pi[q]).abs() < 1e-9);
                    if !others_equal {
                        continue;
                    }
                    let delta = (pi[axis] - pa[axis]) / h;
                    let w = if (delta - 1.0).abs() < 1e-9 {
                        1.0 / (2.0 * h)
                    } else if (delta + 1.0).abs() < 1e-9 {
                        -1.0 / (2.0 * h)
                    } else {
                        continue;
                    };
                    for s in 0..2 {
                        for t in 0..2 {
                            out[(s * na + a, t * ni + i)] += NEG_I * sigma[axis].get(s, t) * w;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn t_min_matches_dense_oracle() {
        for n in [4, 6] {
            let d = cube(n);
            let s = assemble_t_min(&d).unwrap();
            assert_eq!(s.to_dense(), dense_t_min_oracle(&d), "n = {n}");
        }
        let ball = voxelize(&DomainSpec::ball([0.0; 3], 1.0), 0.25, &Aabb::centered(1.0)).unwrap();
        let s = assemble_t_min(&ball).unwrap();
        assert!((s.to_dense() - dense_t_min_oracle(&ball)).norm() < 1e-14);
    }

    #[test]
    fn single_interior_node_stencil() {
        let d = cube(4);
        let s = assemble_t_min(&d).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (54, 2));
        assert_eq!(s.nonzero_rows(), 12);
        assert_eq!(s.nnz(), 12);
        assert!(s.values().iter().all(|v| v.norm() == 2.0));
        let sd = adjoint(&s);
        assert_eq!(sd.nonzero_rows(), 2);
        assert!((0..2).all(|r| sd.row(r).0.len() == 6));
    }

    #[test]
    fn dirac_block_structure() {
        let d = cube(4);
        let a1 = assemble_dirac(&d, 1.0, DiracVariant::A).unwrap();
        assert_eq!(a1.nrows(), 56);
        assert_eq!(a1.nnz(), 56 + 12 + 12);
        assert!(a1.is_flagged_hermitian());

        let a0 = assemble_dirac(&d, 0.0, DiracVariant::A).unwrap();
        assert!((0..56).all(|i| a0.get(i, i) == ZERO));
        assert_eq!(a0.hermitian_deviation(), 0.0);

        let d6 = cube(6);
        let a2 = assemble_dirac(&d6, 2.0, DiracVariant::A).unwrap();
        let up = 2 * d6.num_all();
        for i in 0..a2.nrows() {
            let expect = if i < up { 2.0 } else { -2.0 };
            assert_eq!(a2.get(i, i), Complex64::new(expect, 0.0));
        }
    }

    #[test]
    fn empty_interior_is_rejected() {
        let d = voxelize(&DomainSpec::unit_cube(), 0.5, &Aabb::new([0.0; 3], [1.0; 3])).unwrap();
        assert!(matches!(assemble_t_min(&d), Err(Error::EmptyInterior)));
        assert!(matches!(assemble_dirac(&d, 1.0, DiracVariant::A), Err(Error::EmptyInterior)));
        assert!(matches!(induced_laplacian(&d), Err(Error::EmptyInterior)));
    }

    #[test]
    fn induced_laplacian_single_node() {
        let l = induced_laplacian(&cube(4)).unwrap();
        assert_eq!((l.nrows(), l.nnz()), (1, 1));
        assert_eq!(l.get(0, 0), Complex64::new(24.0, 0.0));
    }

    #[test]
    fn induced_laplacian_is_the_wide_stencil() {
        let d = cube(10);
        let l = induced_laplacian(&d).unwrap();
        let h = d.h();
        let c2 = 1.0 / (4.0 * h * h);
        // Centre node of the 7³ interior block.
        let centre = (0..d.num_interior())
            .find(|&i| d.coords(d.interior_node(i)) == [0.5, 0.5, 0.5])
            .unwrap();
        let (cols, vals) = l.row(centre);
        assert_eq!(cols.len(), 7);
        for (&c, &v) in cols.iter().zip(vals) {
            let expect = if c == centre { 6.0 * c2 } else { -c2 };
            assert!((v.re - expect).abs() <= 1e-12 * expect.abs() && v.im == 0.0);
            if c != centre {
                let p = d.coords(d.interior_node(c));
                let dist: f64 = (0..3).map(|q| (p[q] - 0.5).abs()).sum();
                assert!((dist - 2.0 * h).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_field_has_zero_derivative_deep_inside() {
        let d = cube(10);
        let s = assemble_t_min(&d).unwrap();
        let ni = d.num_interior();
        let x = vec![Complex64::new(1.0, 0.0); 2 * ni];
        let y = s.apply(&x);
        let na = d.num_all();
        for a in 0..na {
            if d.is_interior(a) && d.axis_neighborhood_in_all(a, 2) && (0..3).all(|ax| {
                d.interior_index(d.neighbor(a, ax, 1).unwrap()).is_some()
                    && d.interior_index(d.neighbor(a, ax, -1).unwrap()).is_some()
            }) {
                assert_eq!(y[a], ZERO);
                assert_eq!(y[na + a], ZERO);
            }
        }
    }

    #[test]
    fn linear_field_gives_exact_derivative() {
        // f₃ = x₁, f₄ = 0: σ·∇ (x₁, 0) = σ₁ (1, 0) = (0, 1), so S f = (0, −i).
        let d = cube(10);
        let s = assemble_t_min(&d).unwrap();
        let ni = d.num_interior();
        let mut x = vec![ZERO; 2 * ni];
        for i in 0..ni {
            x[i] = Complex64::new(d.coords(d.interior_node(i))[0], 0.0);
        }
        let y = s.apply(&x);
        let na = d.num_all();
        let a = (0..na).find(|&a| d.coords(a) == [0.5, 0.5, 0.5]).unwrap();
        assert!(y[a].norm() < 1e-13);
        assert!((y[na + a] - NEG_I).norm() < 1e-13);
    }

    #[test]
    fn matrix_free_t_max_matches_adjoint() {
        let d = voxelize(&DomainSpec::ball([0.0; 3], 1.0), 0.2, &Aabb::centered(1.0)).unwrap();
        let s = assemble_t_min(&d).unwrap();
        let u: Vec<Complex64> = (0..2 * d.num_all())
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let a = s.adjoint().apply(&u);
        let b = apply_t_max(&d, &u);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
        let ext = apply_t_max_extended(&d, &u);
        for i in 0..d.num_interior() {
            let a_row = d.interior_node(i);
            assert!((ext[a_row] - b[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn seven_point_matches_separable_formula() {
        let n = 6;
        let d = cube(n);
        let l = reference_laplacian_7pt(&d).unwrap();
        assert_eq!(l.nrows(), 125);
        let h = d.h();
        let mut expected: Vec<f64> = Vec::new();
        for k1 in 1..n {
            for k2 in 1..n {
                for k3 in 1..n {
                    let f = |k: usize| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
                    expected.push(f(k1) + f(k2) + f(k3));
                }
            }
        }
        expected.sort_by(f64::total_cmp);
        let dense = l.to_dense().map(|z| z.re);
        let mut got: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-10 * e.abs());
        }
    }

    #[test]
    fn padded_embedding_round_trip() {
        let d = cube(6);
        let a = assemble_dirac(&d, 1.0, DiracVariant::A).unwrap();
        let p = embed_padded(&d, &a, DiracVariant::A).unwrap();
        assert_eq!(p.nrows(), 4 * d.num_all());
        assert_eq!(p.nnz(), a.nnz());
        let b = assemble_dirac(&d, 1.0, DiracVariant::B).unwrap();
        let pb = embed_padded(&d, &b, DiracVariant::B).unwrap();
        assert_eq!(pb.nnz(), b.nnz());
        let small = SparseOperator::identity(3);
        assert!(embed_padded(&d, &small, DiracVariant::A).is_err());
    }

    #[test]
    fn stencils_are_real_up_to_the_imaginary_unit() {
        let s = assemble_t_min(&cube(6)).unwrap();
        assert!(stencils_are_real(&s));
    }
}
