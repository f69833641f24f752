//! Small dense complex linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max |A - A†| entrywise.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

/// (A + A†) / 2
pub fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = C64::new(m[(j, j)].re, 0.0);
        for k in (j + 1)..n {
            let avg = (m[(j, k)] + m[(k, j)].conj()) * 0.5;
            m[(j, k)] = avg;
            m[(k, j)] = avg.conj();
        }
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|j| m[(j, j)]).sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending, with
/// eigenvectors as the columns of the returned matrix in the same order.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Square root of a positive semidefinite Hermitian matrix; eigenvalues below
/// `clip` are set to zero.
pub fn psd_sqrt(m: &CMatrix, clip: f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| if v < clip { 0.0 } else { v.sqrt() })
        .collect();
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (k, r) in roots.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*r);
    }
    let out = scaled * vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}
