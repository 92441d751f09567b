//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::DVector;

use crate::primitives::{c, CMatrix, C64};

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// Block diagonal `diag(a, b)`.
pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut m = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

/// `[[a, b], [c, d]]` from equally sized square blocks.
pub fn blocks(a: &CMatrix, b: &CMatrix, cm: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(cm);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

pub fn vstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.ncols());
    let mut m = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm.
pub fn norm2(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with singular values above `rel_tol * σ_max` (and above `abs_floor`).
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 1e-300 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn cond2(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 && s.len() == m.nrows().min(m.ncols()) => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `‖m − m^*‖₂`.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    norm2(&(m - m.adjoint()))
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = hermitian_part(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of the Hermitian part with ascending eigenvalues.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let e = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(m.nrows(), m.ncols());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `f(m)` for Hermitian `m` through its eigen-decomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = diag(&vals.iter().map(|&v| c(f(v), 0.0)).collect::<Vec<_>>());
    &vecs * d * vecs.adjoint()
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    a.clone().try_inverse()
}

pub fn det(a: &CMatrix) -> C64 {
    if a.is_empty() {
        return c(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

/// Moore–Penrose pseudo-inverse with relative singular value cutoff.
pub fn pinv(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let (r, cl) = a.shape();
    if r == 0 || cl == 0 {
        return CMatrix::zeros(cl, r);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut out = CMatrix::zeros(cl, r);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            out += vt.row(i).adjoint() * u.column(i).adjoint() * c(1.0 / s, 0.0);
        }
    }
    out
}

/// Orthonormal basis (as columns) of the null space of `a`, using singular values
/// at most `rel_tol * σ_max`. Wide matrices are padded with zero rows first.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> (CMatrix, Vec<f64>) {
    let (r, cl) = a.shape();
    let padded = if r < cl { vstack(a, &CMatrix::zeros(cl - r, cl)) } else { a.clone() };
    let svd = padded.svd(true, true);
    let vt = svd.v_t.unwrap();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let chosen: Vec<usize> = idx.into_iter().filter(|&i| s[i] <= rel_tol * smax || smax == 0.0).collect();
    let mut basis = CMatrix::zeros(cl, chosen.len());
    for (j, &i) in chosen.iter().enumerate() {
        basis.set_column(j, &vt.row(i).adjoint());
    }
    let sv = chosen.iter().map(|&i| s[i]).collect();
    (basis, sv)
}

/// The `k` right singular vectors with smallest singular values (ascending).
pub fn smallest_right_singular_vectors(a: &CMatrix, k: usize) -> (CMatrix, Vec<f64>) {
    let (r, cl) = a.shape();
    let padded = if r < cl { vstack(a, &CMatrix::zeros(cl - r, cl)) } else { a.clone() };
    let svd = padded.svd(true, true);
    let vt = svd.v_t.unwrap();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let k = k.min(cl);
    let mut basis = CMatrix::zeros(cl, k);
    for j in 0..k {
        basis.set_column(j, &vt.row(idx[j]).adjoint());
    }
    (basis, idx[..k].iter().map(|&i| s[i]).collect())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Largest imaginary part in absolute value.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.im.abs()).fold(0.0, f64::max)
}

/// Multiply a matrix by the phase that makes its largest-magnitude entry real positive.
pub fn remove_phase(m: &CMatrix) -> CMatrix {
    let big = m.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(c(1.0, 0.0));
    if big.norm() == 0.0 {
        return m.clone();
    }
    m * (big.conj() / big.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_cond() {
        let a = from_real_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rank(&a, 1e-10), 1);
        assert!(cond2(&a) > 1e12);
        assert_eq!(rank(&identity(3), 1e-10), 3);
        assert!((cond2(&diag(&[c(2.0, 0.0), c(0.5, 0.0)])) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = from_real_rows(1, 3, &[1.0, 1.0, 0.0]);
        let (ns, _) = null_space(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-14);
    }

    #[test]
    fn pinv_solves_least_squares() {
        let a = from_real_rows(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let p = pinv(&a, 1e-12);
        assert!((&p * &a - identity(2)).norm() < 1e-13);
    }

    #[test]
    fn hermitian_sqrt() {
        let h = CMatrix::from_row_slice(2, 2, &[c(2., 0.), c(0., 1.), c(0., -1.), c(2., 0.)]);
        assert_eq!(hermitian_eigenvalues(&h).iter().map(|x| x.round() as i64).collect::<Vec<_>>(), vec![1, 3]);
        let s = hermitian_function(&h, f64::sqrt);
        assert!((&s * &s - &h).norm() < 1e-13);
    }

    #[test]
    fn phase_removal() {
        let m = CMatrix::from_row_slice(1, 2, &[c(0.0, 2.0), c(0.0, 1.0)]);
        let r = remove_phase(&m);
        assert!(max_imag(&r) < 1e-15);
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-15);
    }
}
