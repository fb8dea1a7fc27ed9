//! Small dense complex matrices (dimension 2 and 4 in practice).
//!
//! Matrices are stored inline as a fixed 4×4 buffer with a runtime `dim`,
//! so every value is `Copy` and no operation allocates. The trajectory loop
//! performs a handful of these products per step, which is where almost all
//! of the simulation time goes.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension the inline buffer holds.
pub const MAX_DIM: usize = 4;

/// Entrywise tolerance on `|M - M†|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigenvalues in `[-NEG_CLAMP, 0)` are rounding noise and are clamped to zero.
pub const NEG_CLAMP: f64 = 1e-9;

/// Eigenvalues below `-NEG_ERROR` are reported as a negativity error.
pub const NEG_ERROR: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Calls `$f::<N>(args)` with `N` equal to the runtime dimension, so the hot
/// loops are unrolled for each size.
macro_rules! by_dim {
    ($dim:expr, $f:ident($($arg:expr),*)) => {
        match $dim {
            1 => $f::<1>($($arg),*),
            2 => $f::<2>($($arg),*),
            3 => $f::<3>($($arg),*),
            _ => $f::<4>($($arg),*),
        }
    };
}

type Buf = [[Complex64; MAX_DIM]; MAX_DIM];

#[inline]
fn matmul_n<const N: usize>(a: &Buf, b: &Buf) -> Buf {
    let mut out = [[ZERO; MAX_DIM]; MAX_DIM];
    for i in 0..N {
        for k in 0..N {
            let x = a[i][k];
            for j in 0..N {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

/// `U M U†`
#[inline]
fn conjugate_n<const N: usize>(m: &Buf, u: &Buf) -> Buf {
    let um = matmul_n::<N>(u, m);
    let mut out = [[ZERO; MAX_DIM]; MAX_DIM];
    for i in 0..N {
        for j in 0..N {
            let mut acc = ZERO;
            for k in 0..N {
                acc += um[i][k] * u[j][k].conj();
            }
            out[i][j] = acc;
        }
    }
    out
}

#[inline]
fn frobenius_sq_n<const N: usize>(m: &Buf) -> f64 {
    let mut acc = 0.0;
    for row in m.iter().take(N) {
        for z in row.iter().take(N) {
            acc += z.re * z.re + z.im * z.im;
        }
    }
    acc
}

#[inline]
fn hermitian_part_n<const N: usize>(m: &Buf) -> Buf {
    let mut out = *m;
    for i in 0..N {
        out[i][i] = Complex64::new(m[i][i].re, 0.0);
        for j in (i + 1)..N {
            let z = (m[i][j] + m[j][i].conj()) * 0.5;
            out[i][j] = z;
            out[j][i] = z.conj();
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [[Complex64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self.data[i][j];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "matrix dimension {dim} outside 1..={MAX_DIM}"
        );
        Self {
            dim,
            data: [[ZERO; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i][i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major rows. Panics if the rows are not square.
    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            m.data[i][..dim].copy_from_slice(row);
        }
        m
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, &x) in row.iter().enumerate() {
                m.data[i][j] = Complex64::new(x, 0.0);
            }
        }
        m
    }

    /// Outer product `|v⟩⟨v|`.
    pub fn outer(v: &[Complex64]) -> Self {
        let mut m = Self::zeros(v.len());
        for (i, a) in v.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m.data[i][j] = a * b.conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Backing storage; entries outside `dim × dim` are zero.
    #[inline]
    pub(crate) fn raw(&self) -> &[[Complex64; MAX_DIM]; MAX_DIM] {
        &self.data
    }

    #[inline]
    pub(crate) fn raw_mut(&mut self) -> &mut [[Complex64; MAX_DIM]; MAX_DIM] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of range");
        self.data[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of range");
        self.data[i][j] = z;
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[j][i] = self.data[i][j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i][i]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.data.iter_mut().take(self.dim) {
            for z in row.iter_mut().take(self.dim) {
                *z *= s;
            }
        }
        m
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let mut m = *self;
        for row in m.data.iter_mut().take(self.dim) {
            for z in row.iter_mut().take(self.dim) {
                *z *= s;
            }
        }
        m
    }

    /// `self += s * other`
    #[inline]
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i][j] += other.data[i][j] * s;
            }
        }
    }

    #[inline]
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matmul");
        Self {
            dim: self.dim,
            data: by_dim!(self.dim, matmul_n(&self.data, &rhs.data)),
        }
    }

    /// `Re Tr(self · rhs)` without forming the product.
    #[inline]
    pub fn trace_product_re(&self, rhs: &Self) -> f64 {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self.data[i][k];
                let b = rhs.data[k][i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// `Σ |m_ij|²`, which equals `Tr(M²)` for Hermitian `M`.
    #[inline]
    pub fn frobenius_sq(&self) -> f64 {
        by_dim!(self.dim, frobenius_sq_n(&self.data))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.data[i][j] - other.data[i][j]).norm());
            }
        }
        worst
    }

    /// Largest entrywise `|M - M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.data[i][j] - self.data[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| self.data[i][j].re.is_finite() && self.data[i][j].im.is_finite())
        })
    }

    /// `(M + M†) / 2`
    #[inline]
    pub fn hermitian_part(&self) -> Self {
        Self {
            dim: self.dim,
            data: by_dim!(self.dim, hermitian_part_n(&self.data)),
        }
    }

    /// Conjugation `U M U†`.
    #[inline]
    pub fn conjugate_by(&self, u: &Self) -> Self {
        assert_eq!(self.dim, u.dim, "dimension mismatch in conjugation");
        Self {
            dim: self.dim,
            data: by_dim!(self.dim, conjugate_n(&self.data, &u.data)),
        }
    }

    /// Whether `M + shift·I` admits a Cholesky factorisation with positive
    /// pivots, i.e. every eigenvalue of the Hermitian matrix `M` exceeds
    /// `-shift`. Much cheaper than a full eigendecomposition.
    pub fn min_eigenvalue_exceeds(&self, shift: f64) -> bool {
        let n = self.dim;
        let mut a = *self;
        for i in 0..n {
            a.data[i][i] += shift;
        }
        for j in 0..n {
            let mut d = a.data[j][j].re;
            for k in 0..j {
                d -= a.data[j][k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let ljj = d.sqrt();
            a.data[j][j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a.data[i][j];
                for k in 0..j {
                    s -= a.data[i][k] * a.data[j][k].conj();
                }
                a.data[i][j] = s / ljj;
            }
        }
        true
    }
}

impl Add for ComplexMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ComplexMatrix {
    fn add_assign(&mut self, rhs: Self) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i][j] += rhs.data[i][j];
            }
        }
    }
}

impl Sub for ComplexMatrix {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i][j] -= rhs.data[i][j];
            }
        }
        self
    }
}

impl Mul for ComplexMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Pauli matrices.
pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
}

pub fn sigma_y() -> ComplexMatrix {
    let i = Complex64::i();
    ComplexMatrix::from_rows(&[[ZERO, -i], [i, ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_diag(&[1.0, -1.0])
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: [f64; MAX_DIM],
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values[..self.dim()]
    }

    /// `V f(Λ) V†`
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let fl: Vec<f64> = self.eigenvalues().iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, &lk) in fl.iter().enumerate() {
                    acc += v.data[i][k] * v.data[j][k].conj() * lk;
                }
                out.data[i][j] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|l| l)
    }
}

/// Eigendecomposition of a Hermitian matrix. Closed form for 2×2, cyclic
/// Jacobi otherwise.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let err = m.hermiticity_error();
    if !(err <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { deviation: err });
    }
    let h = m.hermitian_part();
    let eig = match h.dim {
        1 => {
            let mut values = [0.0; MAX_DIM];
            values[0] = h.data[0][0].re;
            HermitianEigen {
                values,
                vectors: ComplexMatrix::identity(1),
            }
        }
        2 => eig2(&h),
        _ => jacobi(&h),
    };
    Ok(eig)
}

/// Eigenvalues only (ascending) for a 2×2 Hermitian matrix.
#[inline]
pub fn eigenvalues_2x2(a: f64, d: f64, b: Complex64) -> (f64, f64) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    (mean - r, mean + r)
}

fn eig2(h: &ComplexMatrix) -> HermitianEigen {
    let a = h.data[0][0].re;
    let d = h.data[1][1].re;
    let b = h.data[0][1];
    let (lo, hi) = eigenvalues_2x2(a, d, b);
    let mut values = [0.0; MAX_DIM];
    values[0] = lo;
    values[1] = hi;

    let bn = b.norm();
    let vectors = if bn <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
        // already diagonal
        if a <= d {
            ComplexMatrix::identity(2)
        } else {
            ComplexMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
        }
    } else {
        // For eigenvalue l, (b, l - a) is an eigenvector; pick the better
        // conditioned of the two equivalent forms per column.
        let col = |l: f64| -> [Complex64; 2] {
            let v1 = [b, Complex64::new(l - a, 0.0)];
            let v2 = [Complex64::new(l - d, 0.0), b.conj()];
            let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
            let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
            let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
            let s = 1.0 / n.sqrt();
            [v[0] * s, v[1] * s]
        };
        let c0 = col(lo);
        let c1 = col(hi);
        ComplexMatrix::from_rows(&[[c0[0], c1[0]], [c0[1], c1[1]]])
    };
    HermitianEigen { values, vectors }
}

fn jacobi(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.dim;
    let mut a = *h;
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.data[p][q].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.data[p][q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // Rotation J acting on the (p, q) plane that zeroes a[p][q]:
                // columns p, q of J are (c, -s·conj(phase))ᵀ and (s·phase, c)ᵀ.
                let phase = apq / mag;
                let app = a.data[p][p].re;
                let aqq = a.data[q][q].re;
                let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                let sp = phase * s;

                // A ← A J (columns)
                for k in 0..n {
                    let akp = a.data[k][p];
                    let akq = a.data[k][q];
                    a.data[k][p] = akp * c - akq * sp.conj();
                    a.data[k][q] = akp * sp + akq * c;
                }
                // A ← J† A (rows)
                for k in 0..n {
                    let apk = a.data[p][k];
                    let aqk = a.data[q][k];
                    a.data[p][k] = apk * c - aqk * sp;
                    a.data[q][k] = apk * sp.conj() + aqk * c;
                }
                a.data[p][q] = ZERO;
                a.data[q][p] = ZERO;
                a.data[p][p] = Complex64::new(a.data[p][p].re, 0.0);
                a.data[q][q] = Complex64::new(a.data[q][q].re, 0.0);
                // V ← V J
                for k in 0..n {
                    let vkp = v.data[k][p];
                    let vkq = v.data[k][q];
                    v.data[k][p] = vkp * c - vkq * sp.conj();
                    v.data[k][q] = vkp * sp + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.data[i][i].re.total_cmp(&a.data[j][j].re));
    let mut values = [0.0; MAX_DIM];
    let mut vectors = ComplexMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a.data[src][src].re;
        for k in 0..n {
            vectors.data[k][dst] = v.data[k][src];
        }
    }
    HermitianEigen { values, vectors }
}

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-1e-9, 0)` are clamped to zero; anything below `-1e-6`
/// is a [`Error::Negativity`].
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let min = eig.eigenvalues()[0];
    if min < -NEG_ERROR {
        return Err(Error::Negativity { eigenvalue: min });
    }
    Ok(eig.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// Kronecker product with A-index major ordering.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim, b.dim);
    let mut out = ComplexMatrix::zeros(na * nb);
    for i in 0..na {
        for j in 0..na {
            let aij = a.data[i][j];
            for k in 0..nb {
                for l in 0..nb {
                    out.data[i * nb + k][j * nb + l] = aij * b.data[k][l];
                }
            }
        }
    }
    out
}

/// Which qubit of a two-qubit state to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Reduced 2×2 state of one qubit of a 4×4 two-qubit matrix.
pub fn partial_trace(rho: &ComplexMatrix, keep: Subsystem) -> ComplexMatrix {
    assert_eq!(rho.dim, 4, "partial_trace expects a two-qubit matrix");
    let mut out = ComplexMatrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                acc += match keep {
                    Subsystem::A => rho.data[2 * i + k][2 * j + k],
                    Subsystem::B => rho.data[2 * k + i][2 * k + j],
                };
            }
            out.data[i][j] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(dim: usize, vals: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim);
        let mut it = vals.iter().copied();
        for i in 0..dim {
            m.set(i, i, c(it.next().unwrap(), 0.0));
            for j in (i + 1)..dim {
                let z = c(it.next().unwrap(), it.next().unwrap());
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues(), &[1.0, 1.0]);
        let e = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(e.eigenvalues(), &[1.0; 4]);
    }

    #[test]
    fn sigma_z_eigenvectors() {
        let e = hermitian_eig(&sigma_z()).unwrap();
        assert_eq!(e.eigenvalues(), &[-1.0, 1.0]);
        // |1⟩ for -1, |0⟩ for +1
        assert!((e.vectors.get(1, 0).norm() - 1.0).abs() < 1e-12);
        assert!((e.vectors.get(0, 1).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_x_eigenvectors() {
        let e = hermitian_eig(&sigma_x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = [e.vectors.get(0, 0), e.vectors.get(1, 0)];
        // (1, -1)/√2 up to phase
        assert!(((v0[0] + v0[1]).norm()) < 1e-12);
        assert!((v0[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(e.reconstruct().max_abs_diff(&sigma_x()) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = matrix_sqrt_psd(&ComplexMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::from_diag(&[2.0, 3.0])) < 1e-14);
        let r = matrix_sqrt_psd(&ComplexMatrix::identity(2)).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn sqrt_negativity_error() {
        let m = ComplexMatrix::from_diag(&[1.0, -1e-3]);
        assert!(matches!(matrix_sqrt_psd(&m), Err(Error::Negativity { .. })));
        // rounding-level negativity is clamped
        let m = ComplexMatrix::from_diag(&[1.0, -1e-10]);
        let r = matrix_sqrt_psd(&m).unwrap();
        assert_eq!(r.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn kron_examples() {
        let zz = kron(&sigma_z(), &sigma_z());
        assert_eq!(zz, ComplexMatrix::from_diag(&[1.0, -1.0, -1.0, 1.0]));
        let ii = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2));
        assert_eq!(ii, ComplexMatrix::identity(4));
        let xi = kron(&sigma_x(), &ComplexMatrix::identity(2));
        assert_eq!(xi.get(0, 2), c(1.0, 0.0));
        assert_eq!(xi.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn partial_trace_examples() {
        let bell = {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            ComplexMatrix::outer(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
        };
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(partial_trace(&bell, Subsystem::A).max_abs_diff(&half) < 1e-15);
        assert!(partial_trace(&bell, Subsystem::B).max_abs_diff(&half) < 1e-15);
        let mixed = ComplexMatrix::identity(4).scale(0.25);
        assert!(partial_trace(&mixed, Subsystem::B).max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn cholesky_negativity_test() {
        let m = ComplexMatrix::from_diag(&[1.04, -0.04]);
        assert!(m.min_eigenvalue_exceeds(0.05));
        let m = ComplexMatrix::from_diag(&[1.06, -0.06]);
        assert!(!m.min_eigenvalue_exceeds(0.05));
        let e = hermitian_eig(&kron(&sigma_x(), &sigma_y())).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12);
        assert!(kron(&sigma_x(), &sigma_y()).min_eigenvalue_exceeds(1.0 + 1e-9));
        assert!(!kron(&sigma_x(), &sigma_y()).min_eigenvalue_exceeds(1.0 - 1e-9));
    }

    fn psd_from(dim: usize, vals: &[f64]) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a.set(i, j, c(vals[2 * (i * dim + j)], vals[2 * (i * dim + j) + 1]));
            }
        }
        a.matmul(&a.adjoint())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn eig_reconstructs(dim in prop::sample::select(vec![2usize, 3, 4]),
                            vals in prop::collection::vec(-3.0f64..3.0, 16)) {
            let m = random_hermitian(dim, &vals);
            let e = hermitian_eig(&m).unwrap();
            prop_assert!(e.reconstruct().max_abs_diff(&m) <= 1e-10);
            let ev = e.eigenvalues();
            prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
            let vv = e.vectors.adjoint().matmul(&e.vectors);
            prop_assert!(vv.max_abs_diff(&ComplexMatrix::identity(dim)) <= 1e-10);
        }

        #[test]
        fn sqrt_squares_back(dim in prop::sample::select(vec![2usize, 4]),
                             vals in prop::collection::vec(-1.0f64..1.0, 32)) {
            let m = psd_from(dim, &vals);
            let r = matrix_sqrt_psd(&m).unwrap();
            prop_assert!(r.matmul(&r).max_abs_diff(&m) <= 1e-8);
            prop_assert!(r.is_hermitian(1e-12));
        }

        #[test]
        fn kron_trace_multiplies(a in prop::collection::vec(-2.0f64..2.0, 8),
                                 b in prop::collection::vec(-2.0f64..2.0, 8)) {
            let ma = random_hermitian(2, &a);
            let mb = random_hermitian(2, &b);
            let t = kron(&ma, &mb).trace();
            let expect = ma.trace() * mb.trace();
            prop_assert!((t - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        }

        #[test]
        fn partial_trace_of_product(a in prop::collection::vec(-1.0f64..1.0, 8),
                                    b in prop::collection::vec(-1.0f64..1.0, 8)) {
            let ra = psd_from(2, &a);
            let ra = ra.scale(1.0 / ra.trace().re);
            let rb = psd_from(2, &b);
            let rb = rb.scale(1.0 / rb.trace().re);
            let rho = kron(&ra, &rb);
            prop_assert!(partial_trace(&rho, Subsystem::A).max_abs_diff(&ra) <= 1e-12);
            prop_assert!(partial_trace(&rho, Subsystem::B).max_abs_diff(&rb) <= 1e-12);
            prop_assert!((partial_trace(&rho, Subsystem::A).trace().re - 1.0).abs() <= 1e-12);
        }
    }
}
