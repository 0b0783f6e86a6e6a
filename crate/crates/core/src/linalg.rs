//! 2×2 helpers on top of nalgebra.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// Largest singular value.
pub fn spectral_norm(m: &Mat2) -> f64 {
    m.singular_values().max()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let ev = SymmetricEigen::new(*m).eigenvalues;
    if ev[0] <= ev[1] {
        (ev[0], ev[1])
    } else {
        (ev[1], ev[0])
    }
}

pub fn diag(d: Vec2) -> Mat2 {
    Mat2::from_diagonal(&d)
}

pub(crate) fn to_rows(m: &Mat2) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

pub(crate) fn from_rows(r: [[f64; 2]; 2]) -> Mat2 {
    Mat2::new(r[0][0], r[0][1], r[1][0], r[1][1])
}
