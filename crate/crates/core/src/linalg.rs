//! Small dense helpers on top of faer.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

pub fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub fn lu_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    to_vec(&a.partial_piv_lu().solve(col(b)))
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &Mat<f64>) -> Mat<f64> {
    m.llt(Side::Lower)
        .expect("matrix is positive definite")
        .L()
        .to_owned()
}

/// Solves L X = B in place for lower triangular L.
pub fn lower_solve(l: &Mat<f64>, b: &mut Mat<f64>) {
    l.as_ref().solve_lower_triangular_in_place(b.as_mut());
}

/// L^-1 A L^-T for lower triangular L.
pub fn congruence_inverse(l: &Mat<f64>, a: &Mat<f64>) -> Mat<f64> {
    let mut x = a.clone();
    lower_solve(l, &mut x);
    let mut y = x.transpose().to_owned();
    lower_solve(l, &mut y);
    y
}

pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
