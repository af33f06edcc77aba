//! Fixed Pauli and Dirac matrices and the antiunitary time reversal.
//!
//! Every entry is 0, ±1 or ±i, so products and sums of these matrices are
//! computed exactly in floating point and identities can be compared with `==`.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense square complex matrix of fixed size, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstMatrix<const N: usize> {
    pub entries: [[Complex64; N]; N],
}

pub type Mat2 = ConstMatrix<2>;
pub type Mat4 = ConstMatrix<4>;

impl<const N: usize> ConstMatrix<N> {
    pub const fn new(entries: [[Complex64; N]; N]) -> Self {
        Self { entries }
    }

    pub fn zeros() -> Self {
        Self::new([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.entries[i][i] = ONE;
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = *self;
        for row in out.entries.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.entries[j][i] = self.entries[i][j].conj();
            }
        }
        out
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = *self;
        for row in out.entries.iter_mut() {
            for v in row.iter_mut() {
                *v = v.conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..N).map(|i| self.entries[i][i]).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        *self == self.adjoint()
    }

    pub fn is_unitary(&self) -> bool {
        *self * self.adjoint() == Self::identity()
    }

    pub fn apply(&self, v: &[Complex64; N]) -> [Complex64; N] {
        let mut out = [ZERO; N];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..N {
                *o += self.entries[i][j] * v[j];
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }
}

impl<const N: usize> Mul for ConstMatrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                let mut acc = ZERO;
                for k in 0..N {
                    acc += self.entries[i][k] * rhs.entries[k][j];
                }
                out.entries[i][j] = acc;
            }
        }
        out
    }
}

impl<const N: usize> Add for ConstMatrix<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..N {
            for j in 0..N {
                out.entries[i][j] += rhs.entries[i][j];
            }
        }
        out
    }
}

impl<const N: usize> Sub for ConstMatrix<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for ConstMatrix<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

/// Builds the 4×4 matrix `[[a, b], [c, d]]` from 2×2 blocks.
pub fn block4(a: &Mat2, b: &Mat2, c: &Mat2, d: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out.entries[i][j] = a.entries[i][j];
            out.entries[i][j + 2] = b.entries[i][j];
            out.entries[i + 2][j] = c.entries[i][j];
            out.entries[i + 2][j + 2] = d.entries[i][j];
        }
    }
    out
}

pub fn sigma1() -> Mat2 {
    Mat2::new([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma2() -> Mat2 {
    Mat2::new([[ZERO, -I], [I, ZERO]])
}

pub fn sigma3() -> Mat2 {
    Mat2::new([[ONE, ZERO], [ZERO, -ONE]])
}

/// The fixed matrices used throughout: Pauli σ_j, Dirac α_j and β, the
/// chiral block swap γ₅ and the chirality map M = βγ₅.
#[derive(Clone, Debug)]
pub struct DiracMatrices {
    pub sigma: [Mat2; 3],
    pub alpha: [Mat4; 3],
    pub beta: Mat4,
    pub gamma5: Mat4,
    pub chirality: Mat4,
}

pub fn constant_matrices() -> DiracMatrices {
    let sigma = [sigma1(), sigma2(), sigma3()];
    let z = Mat2::zeros();
    let id = Mat2::identity();
    let alpha = sigma.map(|s| block4(&z, &s, &s, &z));
    let beta = block4(&id, &z, &z, &(-id));
    let gamma5 = block4(&z, &id, &id, &z);
    let chirality = beta * gamma5;
    DiracMatrices {
        sigma,
        alpha,
        beta,
        gamma5,
        chirality,
    }
}

/// The unitary part −iγ₅α₂ of the time reversal `T f = −iγ₅α₂ f̄`.
///
/// It is block diagonal, `diag(−iσ₂, −iσ₂)`, and real.
pub fn time_reversal_matrix() -> Mat4 {
    let c = constant_matrices();
    (c.gamma5 * c.alpha[1]).scale(-I)
}

/// Applies the antilinear time reversal pointwise: conjugate, then multiply by −iγ₅α₂.
pub fn time_reversal(field: &[[Complex64; 4]]) -> Vec<[Complex64; 4]> {
    let u = time_reversal_matrix();
    field
        .iter()
        .map(|f| u.apply(&f.map(|z| z.conj())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sigma2_matches_printed_form() {
        let s2 = constant_matrices().sigma[1];
        assert_eq!(s2.entries, [[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]);
    }

    #[test]
    fn pauli_anticommutation_is_exact() {
        let s = constant_matrices().sigma;
        for j in 0..3 {
            assert!(s[j].is_hermitian());
            assert!(s[j].is_unitary());
            assert_eq!(s[j].trace(), ZERO);
            for k in 0..3 {
                let anti = s[j] * s[k] + s[k] * s[j];
                let expected = if j == k {
                    Mat2::identity().scale(c(2., 0.))
                } else {
                    Mat2::zeros()
                };
                assert_eq!(anti, expected, "j={j} k={k}");
            }
        }
        assert_eq!(s[0] * s[1] + s[1] * s[0], Mat2::zeros());
    }

    #[test]
    fn dirac_matrices_anticommute_with_beta() {
        let d = constant_matrices();
        assert!(d.beta.is_hermitian() && d.beta.is_unitary());
        for a in &d.alpha {
            assert!(a.is_hermitian() && a.is_unitary());
            assert_eq!(*a * d.beta + d.beta * *a, Mat4::zeros());
        }
        assert!(d.chirality.is_unitary());
        assert_eq!(d.chirality * d.chirality.adjoint(), Mat4::identity());
        assert_eq!(d.chirality, d.beta * d.gamma5);
    }

    #[test]
    fn chirality_squares_to_minus_identity() {
        let m = constant_matrices().chirality;
        assert_eq!(m * m, -Mat4::identity());
    }

    #[test]
    fn time_reversal_by_hand() {
        // conj(1, i, 0, 0) = (1, -i, 0, 0); -iσ₂ = [[0,-1],[1,0]] gives (i, 1).
        let out = time_reversal(&[[c(1., 0.), c(0., 1.), ZERO, ZERO]]);
        assert_eq!(out[0], [c(0., 1.), c(1., 0.), ZERO, ZERO]);
    }

    #[test]
    fn time_reversal_squares_to_minus_one() {
        let f = [[c(0.3, -1.2), c(2.0, 0.5), c(-0.7, 0.1), c(0.0, 4.0)]];
        let tt = time_reversal(&time_reversal(&f));
        for k in 0..4 {
            assert_eq!(tt[0][k], -f[0][k]);
        }
        let u = time_reversal_matrix();
        assert_eq!(u * u.conj(), -Mat4::identity());
    }

    #[test]
    fn unit_vector_is_orthogonal_to_its_reversal() {
        let f = [ONE, ZERO, ZERO, ZERO];
        let tf = time_reversal(&[f])[0];
        let overlap: Complex64 = f.iter().zip(&tf).map(|(a, b)| a.conj() * b).sum();
        assert_eq!(overlap, ZERO);
    }

    proptest! {
        #[test]
        fn kramers_orthogonality(v in proptest::array::uniform8(-10.0f64..10.0)) {
            let f = [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])];
            let tf = time_reversal(&[f])[0];
            let overlap: Complex64 = f.iter().zip(&tf).map(|(a, b)| a.conj() * b).sum();
            let norm2: f64 = f.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!(overlap.norm() <= 1e-14 * norm2.max(1e-300));
        }
    }
}
