//! Small dense complex linear-algebra helpers shared by the channel and
//! simulator modules.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// The Pauli basis (I, X, Y, Z).
pub fn paulis() -> [Matrix2<C64>; 4] {
    [
        Matrix2::new(ONE, ZERO, ZERO, ONE),
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

pub fn hadamard2() -> Matrix2<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Matrix2::new(r(h), r(h), r(h), r(-h))
}

pub fn to_dynamic(m: &Matrix2<C64>) -> CMatrix {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Kronecker product `a ⊗ b`; `a` occupies the most significant bits.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    if u.nrows() != u.ncols() {
        return false;
    }
    let prod = u.adjoint() * u;
    let n = u.nrows();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            if (prod[(i, j)] - target).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Symmetrize `m` to `(m + m†)/2` to remove round-off before an eigensolve.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * r(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigen-decomposition of a Hermitian matrix (eigenvalues, eigenvectors as columns).
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Schatten 1-norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigvalsh(m).iter().map(|v| v.abs()).sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Matrix absolute value `|m| = sqrt(m† m)` for Hermitian `m`.
pub fn abs_hermitian(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| r(v.abs())),
    ));
    &vecs * d * vecs.adjoint()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Haar-random unitary of dimension `dim` (QR of a complex Ginibre matrix with
/// the phase correction on the diagonal of R).
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * r(std::f64::consts::FRAC_1_SQRT_2)
    });
    let qr = g.qr();
    let q = qr.q();
    let rr = qr.r();
    let mut out = q;
    for j in 0..dim {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// Haar-random pure state vector of dimension `dim`.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let n = v.norm();
    v / r(n)
}

/// A random density matrix of dimension `dim` with full rank almost surely
/// (Hilbert-Schmidt measure, `G G† / tr`).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let m = &g * g.adjoint();
    let t = trace(&m);
    m / t
}

/// Uniform point in the closed unit ball of R³.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let d = random_unit_vector(rng);
    let radius: f64 = rng.random::<f64>().cbrt();
    [d[0] * radius, d[1] * radius, d[2] * radius]
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
