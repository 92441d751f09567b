//! Random instances: conjugate symplectic matrices, admissible weights, systems,
//! Sturm–Liouville data and unitary matrices. Used by tests and examples.

use rand::Rng;

use crate::linalg::{self, blocks, block_diag};
use crate::primitives::{c, CMatrix, C64};
use crate::system::{SturmLiouvilleData, SymplecticSystem};

pub fn complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
}

pub fn complex_scalar<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
}

pub fn hermitian<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CMatrix {
    linalg::hermitian_part(&complex_matrix(n, n, scale, rng))
}

/// Product of shears `[[I, H], [0, I]]`, `[[I, 0], [H, I]]` with Hermitian `H`, a block
/// `diag(A, A^{-*})` and a phase `e^{iθ}`. `scale` bounds the perturbation from the identity.
pub fn conjugate_symplectic<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CMatrix {
    let eye = CMatrix::identity(n, n);
    let zero = CMatrix::zeros(n, n);
    let upper = blocks(&eye, &hermitian(n, scale, rng), &zero, &eye);
    let lower = blocks(&eye, &zero, &hermitian(n, scale, rng), &eye);
    let a = &eye + complex_matrix(n, n, scale * 0.5, rng);
    let a_inv_adj = linalg::inverse(&a).expect("perturbed identity is invertible").adjoint();
    let middle = block_diag(&a, &a_inv_adj);
    let theta: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    upper * middle * lower * C64::from_polar(1.0, theta)
}

/// `X^* diag(W, 0) X` with `X` conjugate symplectic and `W` positive definite.
pub fn weight<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CMatrix {
    let b = complex_matrix(n, n, 1.0, rng);
    let w = (&b * b.adjoint()) * c(0.5, 0.0) + CMatrix::identity(n, n) * c(0.2, 0.0);
    let w = w * c(scale, 0.0);
    let x = conjugate_symplectic(n, 0.3, rng);
    let inner = block_diag(&w, &CMatrix::zeros(n, n));
    let psi = x.adjoint() * inner * &x;
    linalg::hermitian_part(&psi)
}

/// A finite system on `[0, n_upper]` with mildly conditioned coefficients.
pub fn system<R: Rng + ?Sized>(n: usize, n_upper: usize, scale: f64, rng: &mut R) -> SymplecticSystem {
    let s = (0..=n_upper).map(|_| conjugate_symplectic(n, scale, rng)).collect();
    let psi = (0..=n_upper).map(|_| weight(n, scale, rng)).collect();
    SymplecticSystem::from_matrices(s, psi).expect("consistent shapes")
}

/// Sturm–Liouville data with `|p| ∈ [0.5, 2]` of random sign, `q ∈ [−1, 1]`, `w ∈ [0.2, 2]`.
pub fn sturm_liouville<R: Rng + ?Sized>(n_upper: usize, rng: &mut R) -> SturmLiouvilleData {
    let p = (0..n_upper + 2)
        .map(|_| {
            let m: f64 = rng.gen_range(0.5..2.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let q = (0..=n_upper).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = (0..=n_upper).map(|_| rng.gen_range(0.2..2.0)).collect();
    SturmLiouvilleData::finite(p, q, w).expect("consistent lengths")
}

/// Haar-like unitary from the QR factorization of a complex Gaussian-ish matrix.
pub fn unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = complex_matrix(n, n, 1.0, rng);
    let qr = a.qr();
    let (q, r) = qr.unpack();
    let phases: Vec<C64> = (0..n)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0, 0.0)
            }
        })
        .collect();
    q * linalg::diag(&phases)
}

/// Real `2 × 2` matrix with unit determinant.
pub fn real_symplectic_2x2<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
    let mag: f64 = rng.gen_range(0.3..2.0);
    let a = if rng.gen_bool(0.5) { mag } else { -mag };
    let b: f64 = rng.gen_range(-2.0..2.0);
    let cc: f64 = rng.gen_range(-2.0..2.0);
    let d = (1.0 + b * cc) / a;
    linalg::from_real_rows(2, 2, &[a, b, cc, d])
}
