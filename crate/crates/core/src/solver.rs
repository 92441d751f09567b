//! Propagation of `z_k = S_k(λ) z_{k+1} − J Ψ_k f_k`, fundamental matrices, the
//! two-point boundary value construction on `[c, d]`, and residual checks for the
//! Lagrange and Wronskian identities.

use crate::error::{Error, Result};
use crate::linalg::{self, cond2, max_abs};
use crate::primitives::{c, j_left, j_right, CMatrix, MatrixSeq, Trajectory, C64};
use crate::system::{forward_from, lambda_matrix, SymplecticSystem};

/// Recursion residuals above this are treated as a violated precondition.
pub const RECURSION_LIMIT: f64 = 1e-8;

/// Gram matrices with a larger condition number are treated as singular.
pub const GRAM_COND_LIMIT: f64 = 1e12;

fn check_f(f: Option<&MatrixSeq>, rows: usize, cols: usize) -> Result<()> {
    if let Some(f) = f {
        if f.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch(format!(
                "inhomogeneity is {}x{}, expected {}x{}",
                f.shape().0,
                f.shape().1,
                rows,
                cols
            )));
        }
    }
    Ok(())
}

/// `J Ψ_k f_k`, or `None` when `f` is absent.
fn forcing(sys: &SymplecticSystem, f: Option<&MatrixSeq>, k: usize) -> Result<Option<CMatrix>> {
    match f {
        None => Ok(None),
        Some(f) => {
            let psi = sys.psi(k)?;
            Ok(Some(j_left(&(psi.as_ref() * f.at(k)?.as_ref()))))
        }
    }
}

/// Solve the initial value problem with `z_{k0} = z0` on `[lo, hi]`. Values below `k0` come
/// from the recursion as written, values above from the inverse `−J S_k^*(λ̄) J`.
pub fn solve_ivp_on(
    sys: &SymplecticSystem,
    lam: C64,
    lo: usize,
    hi: usize,
    k0: usize,
    z0: &CMatrix,
    f: Option<&MatrixSeq>,
) -> Result<Trajectory> {
    if !(lo <= k0 && k0 <= hi) || !sys.interval().contains_plus(hi) {
        return Err(Error::IndexOutOfRange {
            index: k0,
            what: format!("solution range [{}, {}]", lo, hi),
        });
    }
    if z0.nrows() != sys.dim() || z0.ncols() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "initial value is {}x{}, expected {} rows",
            z0.nrows(),
            z0.ncols(),
            sys.dim()
        )));
    }
    check_f(f, sys.dim(), z0.ncols())?;
    let mut values = vec![CMatrix::zeros(0, 0); hi - lo + 1];
    values[k0 - lo] = z0.clone();
    for k in (lo..k0).rev() {
        let mut z = lambda_matrix(sys, lam, k)? * &values[k + 1 - lo];
        if let Some(jf) = forcing(sys, f, k)? {
            z -= jf;
        }
        values[k - lo] = z;
    }
    for k in k0..hi {
        let mut rhs = values[k - lo].clone();
        if let Some(jf) = forcing(sys, f, k)? {
            rhs += jf;
        }
        values[k + 1 - lo] = forward_from(&lambda_matrix(sys, lam.conj(), k)?) * rhs;
    }
    Trajectory::new(lo, values)
}

/// Solve on the whole of `I_Z^+` (`[0, N+1]`, or `[0, truncation]` on unbounded intervals).
pub fn solve_ivp(
    sys: &SymplecticSystem,
    lam: C64,
    k0: usize,
    z0: &CMatrix,
    f: Option<&MatrixSeq>,
    truncation: Option<usize>,
) -> Result<Trajectory> {
    let end = sys.interval().end_plus(truncation)?;
    solve_ivp_on(sys, lam, 0, end, k0, z0, f)
}

/// Columns solve `(S_λ)` with `Φ_0 = I`.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    pub lam: C64,
    pub phi: Trajectory,
}

pub fn fundamental(sys: &SymplecticSystem, lam: C64, truncation: Option<usize>) -> Result<FundamentalMatrix> {
    let phi = solve_ivp(sys, lam, 0, &CMatrix::identity(sys.dim(), sys.dim()), None, truncation)?;
    Ok(FundamentalMatrix { lam, phi })
}

/// `L(z)_k − λ Ψ_k z_k − Ψ_k f_k` with `L(z)_k = J(z_k − S_k z_{k+1})`, at index `k`.
pub fn recursion_defect(sys: &SymplecticSystem, lam: C64, z: &Trajectory, f: Option<&MatrixSeq>, k: usize) -> Result<CMatrix> {
    let zk = z.get(k)?;
    let zk1 = z.get(k + 1)?;
    let s = sys.s(k)?;
    let psi = sys.psi(k)?;
    let mut d = j_left(&(zk - s.as_ref() * zk1)) - psi.as_ref() * zk * lam;
    if let Some(f) = f {
        d -= psi.as_ref() * f.at(k)?.as_ref();
    }
    Ok(d)
}

/// Largest recursion defect over `[lo, hi − 1]`, relative to `1 + max |z|` on the range.
pub fn recursion_residual(
    sys: &SymplecticSystem,
    lam: C64,
    z: &Trajectory,
    f: Option<&MatrixSeq>,
    lo: usize,
    hi: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in lo..hi {
        worst = worst.max(max_abs(&recursion_defect(sys, lam, z, f, k)?));
        scale = scale.max(max_abs(z.get(k)?));
    }
    scale = scale.max(max_abs(z.get(hi)?));
    Ok(worst / (1.0 + scale))
}

fn require_solution(
    sys: &SymplecticSystem,
    lam: C64,
    z: &Trajectory,
    f: Option<&MatrixSeq>,
    lo: usize,
    hi: usize,
    name: &str,
) -> Result<()> {
    let r = recursion_residual(sys, lam, z, f, lo, hi)?;
    if r > RECURSION_LIMIT || r.is_nan() {
        return Err(Error::RecursionResidual {
            residual: r,
            limit: RECURSION_LIMIT,
            context: format!("{} does not solve its recursion on [{}, {}]", name, lo, hi),
        });
    }
    Ok(())
}

/// Residual of the extended Lagrange identity
/// `z_k^* J u_k |_s^{t+1} = Σ_{k=s}^{t} [(λ̄ − ν) z_k^* Ψ_k u_k + f_k^* Ψ_k u_k − z_k^* Ψ_k g_k]`
/// for `z` solving the `λ`-recursion with `f` and `u` the `ν`-recursion with `g`.
#[allow(clippy::too_many_arguments)]
pub fn verify_lagrange(
    sys: &SymplecticSystem,
    lam: C64,
    nu: C64,
    z: &Trajectory,
    u: &Trajectory,
    f: Option<&MatrixSeq>,
    g: Option<&MatrixSeq>,
    s: usize,
    t: usize,
) -> Result<f64> {
    require_solution(sys, lam, z, f, s, t + 1, "z")?;
    require_solution(sys, nu, u, g, s, t + 1, "u")?;
    let bracket = |k: usize| -> Result<CMatrix> { Ok(z.get(k)?.adjoint() * j_left(u.get(k)?)) };
    let lhs = bracket(t + 1)? - bracket(s)?;
    let mut rhs = CMatrix::zeros(z.cols(), u.cols());
    for k in s..=t {
        let psi = sys.psi(k)?;
        let psi = psi.as_ref();
        let zk = z.get(k)?;
        let uk = u.get(k)?;
        rhs += zk.adjoint() * psi * uk * (lam.conj() - nu);
        if let Some(f) = f {
            rhs += f.at(k)?.adjoint() * psi * uk;
        }
        if let Some(g) = g {
            rhs -= zk.adjoint() * psi * g.at(k)?.as_ref();
        }
    }
    Ok(max_abs(&(lhs - rhs)))
}

/// `max_k |z_k^* J u_k − z_0^* J u_0|` for `z` solving at `λ` and `u` at `λ̄`.
pub fn verify_wronskian(sys: &SymplecticSystem, lam: C64, z: &Trajectory, u: &Trajectory) -> Result<f64> {
    if z.start() != u.start() || z.end() != u.end() {
        return Err(Error::ShapeMismatch("solutions cover different ranges".into()));
    }
    let (lo, hi) = (z.start(), z.end());
    require_solution(sys, lam, z, None, lo, hi, "z")?;
    require_solution(sys, lam.conj(), u, None, lo, hi, "u")?;
    let w0 = z.get(lo)?.adjoint() * j_left(u.get(lo)?);
    let mut drift: f64 = 0.0;
    for k in lo..=hi {
        let wk = z.get(k)?.adjoint() * j_left(u.get(k)?);
        drift = drift.max(max_abs(&(wk - &w0)));
    }
    Ok(drift)
}

/// The change of variables `y_k = Φ_k^{-1} z_k` built from the `λ = 0` fundamental matrix,
/// under which the system becomes `−J Δy_k = Ψ̂_k g_k` with `Ψ̂_k = Φ_k^* Ψ_k Φ_k`.
#[derive(Debug, Clone)]
pub struct CanonicalTransform {
    pub phi: Trajectory,
    /// `Q_k = Φ_k^{-1} = −J Φ_k^* J`.
    pub q: Trajectory,
    pub psi_hat: MatrixSeq,
    /// Whether `Ψ̂_k ⪰ 0` agreed with `Ψ_k ⪰ 0` (eigenvalue floor `−1e-10`) at every index.
    pub semidefinite_consistent: bool,
}

impl CanonicalTransform {
    /// `k ↦ Q_k x_k` for a trajectory, or a sequence defined on a subrange.
    pub fn apply(&self, z: &Trajectory) -> Result<Trajectory> {
        let values = z.iter().map(|(k, zk)| Ok(self.q.get(k)? * zk)).collect::<Result<Vec<_>>>()?;
        Trajectory::new(z.start(), values)
    }

    pub fn apply_seq(&self, f: &MatrixSeq, lo: usize, hi: usize) -> Result<MatrixSeq> {
        let values = (lo..=hi).map(|k| Ok(self.q.get(k)? * f.at(k)?.as_ref())).collect::<Result<Vec<_>>>()?;
        MatrixSeq::from_vec_at(lo, values)
    }

    /// Largest `‖−J(y_{k+1} − y_k) − Ψ̂_k g_k‖` over `[y.start, y.end − 1]`.
    pub fn residual(&self, y: &Trajectory, g: Option<&MatrixSeq>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in y.start()..y.end() {
            let mut d = -j_left(&(y.get(k + 1)? - y.get(k)?));
            if let Some(g) = g {
                d -= self.psi_hat.at(k)?.as_ref() * g.at(k)?.as_ref();
            }
            worst = worst.max(max_abs(&d));
        }
        Ok(worst)
    }
}

pub fn canonical_transform(sys: &SymplecticSystem, truncation: Option<usize>) -> Result<CanonicalTransform> {
    let fm = fundamental(sys, c(0.0, 0.0), truncation)?;
    let phi = fm.phi;
    let q_values = phi.values().iter().map(|p| -j_right(&j_left(&p.adjoint()))).collect();
    let q = Trajectory::new(0, q_values)?;
    let mut consistent = true;
    let mut hats = Vec::with_capacity(phi.len() - 1);
    for k in 0..phi.end() {
        let p = phi.get(k)?;
        let psi = sys.psi(k)?;
        let hat = linalg::hermitian_part(&(p.adjoint() * psi.as_ref() * p));
        let a = linalg::min_hermitian_eigenvalue(psi.as_ref()) >= -1e-10;
        let b = linalg::min_hermitian_eigenvalue(&hat) >= -1e-10 * (1.0 + linalg::norm2(p).powi(2));
        consistent &= a == b;
        hats.push(hat);
    }
    Ok(CanonicalTransform {
        phi,
        q,
        psi_hat: MatrixSeq::from_vec(hats)?,
        semidefinite_consistent: consistent,
    })
}

/// A solution of `L(z)_k = Ψ_k f_k` on `[c, d]` together with its inhomogeneity.
#[derive(Debug, Clone)]
pub struct PatchedSolution {
    /// Values on `[c, d+1]` (or the glued range).
    pub z: Trajectory,
    /// Inhomogeneity on `[c, d]` (or the glued range minus its last index).
    pub f: MatrixSeq,
    /// Condition number of the Gram matrix `Σ_{k=c}^{d} Φ_k^* Ψ_k Φ_k`.
    pub gram_cond: f64,
}

/// Construct `{z, f}` with `L(z)_k = Ψ_k f_k` on `[c, d]`, `z_c = α` and `z_{d+1} = β`.
/// Requires the Gram matrix of the fundamental matrix on `[c, d]` to be nonsingular, which
/// holds when `[c, d]` contains an interval where the Atkinson condition is satisfied.
pub fn patching_bvp(sys: &SymplecticSystem, cc: usize, d: usize, alpha: &CMatrix, beta: &CMatrix) -> Result<PatchedSolution> {
    let dim = sys.dim();
    if cc > d || !sys.interval().contains(d) {
        return Err(Error::IndexOutOfRange {
            index: d,
            what: format!("patching interval [{}, {}]", cc, d),
        });
    }
    if alpha.nrows() != dim || beta.shape() != alpha.shape() {
        return Err(Error::ShapeMismatch("alpha and beta must both be 2n x m".into()));
    }
    let zero = c(0.0, 0.0);
    let phi = solve_ivp_on(sys, zero, cc, d + 1, cc, &CMatrix::identity(dim, dim), None)?;
    let mut a = CMatrix::zeros(dim, dim);
    for k in cc..=d {
        let p = phi.get(k)?;
        a += p.adjoint() * sys.psi(k)?.as_ref() * p;
    }
    let a = linalg::hermitian_part(&a);
    let cond = cond2(&a);
    if !(cond <= GRAM_COND_LIMIT) {
        return Err(Error::Singular {
            what: format!("Gram matrix of the fundamental matrix on [{}, {}] (Atkinson condition not met)", cc, d),
            cond,
        });
    }
    let eta = linalg::solve(&a, &(-phi.get(d + 1)?.adjoint() * j_left(beta)))
        .ok_or_else(|| Error::Singular { what: "Gram matrix".into(), cond })?;
    let omega = linalg::solve(&a, &(-phi.get(cc)?.adjoint() * j_left(alpha)))
        .ok_or_else(|| Error::Singular { what: "Gram matrix".into(), cond })?;
    let h1: Vec<CMatrix> = (cc..=d).map(|k| phi.get(k).map(|p| p * &eta)).collect::<Result<_>>()?;
    let h2: Vec<CMatrix> = (cc..=d).map(|k| phi.get(k).map(|p| p * &omega)).collect::<Result<_>>()?;
    let h1 = MatrixSeq::from_vec_at(cc, h1)?;
    let minus_h2 = MatrixSeq::from_vec_at(cc, (cc..=d).map(|k| -h2[k - cc].clone()).collect())?;
    let zeros = CMatrix::zeros(dim, alpha.ncols());
    let z1 = solve_ivp_on(sys, zero, cc, d + 1, cc, &zeros, Some(&h1))?;
    let z2 = solve_ivp_on(sys, zero, cc, d + 1, d + 1, &zeros, Some(&minus_h2))?;
    let z = z1.add(&z2)?;
    let f = MatrixSeq::from_vec_at(cc, (cc..=d).map(|k| h1.at(k).unwrap().into_owned() - &h2[k - cc]).collect())?;
    Ok(PatchedSolution { z, f, gram_cond: cond })
}

/// Join `ẑ` (known on `[0, c]`) and `ŵ` (known from `d+1` on) through a patch on `[c, d]`.
/// `fz`, `gw` are their inhomogeneities (zero when absent). The result lives on
/// `[0, ŵ.end]` and coincides with `ẑ` on `[0, c]` and with `ŵ` on `[d+1, ŵ.end]`.
pub fn glue(
    sys: &SymplecticSystem,
    zhat: &Trajectory,
    fz: Option<&MatrixSeq>,
    cc: usize,
    d: usize,
    what: &Trajectory,
    gw: Option<&MatrixSeq>,
) -> Result<PatchedSolution> {
    if zhat.start() != 0 || zhat.end() < cc || what.start() > d + 1 || what.end() < d + 1 {
        return Err(Error::MissingEndpoint("pieces must cover [0, c] and [d+1, end]".into()));
    }
    let patch = patching_bvp(sys, cc, d, zhat.get(cc)?, what.get(d + 1)?)?;
    let cols = zhat.cols();
    let zero_f = CMatrix::zeros(sys.dim(), cols);
    let mut values = Vec::new();
    let mut fvals = Vec::new();
    for k in 0..=what.end() {
        let v = if k <= cc {
            zhat.get(k)?.clone()
        } else if k <= d {
            patch.z.get(k)?.clone()
        } else {
            what.get(k)?.clone()
        };
        values.push(v);
        if k < what.end() {
            let fk = if k < cc {
                fz.map(|f| f.at(k).map(|m| m.into_owned())).transpose()?.unwrap_or_else(|| zero_f.clone())
            } else if k <= d {
                patch.f.at(k)?.into_owned()
            } else {
                gw.map(|g| g.at(k).map(|m| m.into_owned())).transpose()?.unwrap_or_else(|| zero_f.clone())
            };
            fvals.push(fk);
        }
    }
    Ok(PatchedSolution {
        z: Trajectory::new(0, values)?,
        f: MatrixSeq::from_vec(fvals)?,
        gram_cond: patch.gram_cond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::random;
    use crate::system::{from_sturm_liouville, SturmLiouvilleData};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sl_const(n_upper: usize) -> SymplecticSystem {
        from_sturm_liouville(&SturmLiouvilleData::finite(vec![-1.0; n_upper + 2], vec![0.0; n_upper + 1], vec![1.0; n_upper + 1]).unwrap()).unwrap()
    }

    fn e(i: usize, dim: usize) -> CMatrix {
        let mut v = CMatrix::zeros(dim, 1);
        v[(i, 0)] = c(1.0, 0.0);
        v
    }

    #[test]
    fn identity_system_gives_constant_solution() {
        let sys = SymplecticSystem::from_matrices(vec![CMatrix::identity(2, 2); 4], vec![CMatrix::zeros(2, 2); 4]).unwrap();
        let z0 = from_real_rows(2, 1, &[0.3, -2.0]);
        let z = solve_ivp(&sys, c(3.0, -1.0), 2, &z0, None, None).unwrap();
        assert!(z.values().iter().all(|v| *v == z0));
    }

    #[test]
    fn sl_terminal_value_propagates_unchanged() {
        let sys = sl_const(3);
        let z = solve_ivp(&sys, c(0.0, 0.0), 4, &e(0, 2), None, None).unwrap();
        assert_eq!(z.start(), 0);
        assert!(z.values().iter().all(|v| (v - e(0, 2)).norm() == 0.0));
    }

    #[test]
    fn nonhomogeneous_solution_satisfies_operator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = random::system(2, 10, 0.3, &mut rng);
        let f = MatrixSeq::from_vec((0..=10).map(|_| random::complex_matrix(4, 1, 1.0, &mut rng)).collect()).unwrap();
        let lam = c(0.7, -1.2);
        let z = solve_ivp(&sys, lam, 5, &random::complex_matrix(4, 1, 1.0, &mut rng), Some(&f), None).unwrap();
        assert!(recursion_residual(&sys, lam, &z, Some(&f), 0, 11).unwrap() < 1e-12);
    }

    #[test]
    fn inverse_formula_for_fundamental_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = random::system(1, 8, 0.3, &mut rng);
        let fm = fundamental(&sys, c(0.0, 0.0), None).unwrap();
        for (_, p) in fm.phi.iter() {
            let inv = -j_right(&j_left(&p.adjoint()));
            assert!((inv * p - CMatrix::identity(2, 2)).norm() < 1e-10);
        }
    }

    #[test]
    fn wronskian_of_fundamental_matrices_is_j() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random::system(2, 10, 0.3, &mut rng);
        let lam = c(3.0, -1.0);
        let a = fundamental(&sys, lam, None).unwrap();
        let b = fundamental(&sys, lam.conj(), None).unwrap();
        assert!(verify_wronskian(&sys, lam, &a.phi, &b.phi).unwrap() < 1e-10);
    }

    #[test]
    fn lagrange_rejects_non_solutions() {
        let sys = sl_const(4);
        let bogus = Trajectory::from_values((0..6).map(|k| from_real_rows(2, 1, &[k as f64, 1.0])).collect()).unwrap();
        let err = verify_lagrange(&sys, c(1.0, 0.0), c(1.0, 0.0), &bogus, &bogus, None, None, 0, 4).unwrap_err();
        assert!(matches!(err, Error::RecursionResidual { .. }));
    }

    #[test]
    fn patching_zero_data_gives_zero() {
        let sys = sl_const(4);
        let p = patching_bvp(&sys, 0, 4, &CMatrix::zeros(2, 1), &CMatrix::zeros(2, 1)).unwrap();
        assert!(p.z.max_abs() <= 1e-10);
    }

    #[test]
    fn patching_interpolates_endpoints() {
        let sys = sl_const(4);
        let alpha = e(0, 2);
        let beta = e(1, 2);
        let p = patching_bvp(&sys, 0, 4, &alpha, &beta).unwrap();
        assert!((p.z.get(0).unwrap() - &alpha).norm() < 1e-9);
        assert!((p.z.get(5).unwrap() - &beta).norm() < 1e-9);
        for k in 0..=4 {
            let d = recursion_defect(&sys, c(0.0, 0.0), &p.z, Some(&p.f), k).unwrap();
            assert!(d.norm() < 1e-9);
        }
    }

    #[test]
    fn patching_refuses_without_weight() {
        let sys = SymplecticSystem::from_matrices(vec![CMatrix::identity(2, 2); 3], vec![CMatrix::zeros(2, 2); 3]).unwrap();
        assert!(matches!(patching_bvp(&sys, 0, 2, &e(0, 2), &e(1, 2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn glue_keeps_both_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = random::system(1, 12, 0.3, &mut rng);
        let lam = c(0.5, 0.5);
        let zhat = solve_ivp(&sys, lam, 0, &random::complex_matrix(2, 1, 1.0, &mut rng), None, None).unwrap();
        let what = solve_ivp(&sys, lam.conj(), 13, &random::complex_matrix(2, 1, 1.0, &mut rng), None, None).unwrap();
        let fz = MatrixSeq::from_vec(zhat.values()[..13].iter().map(|z| z * lam).collect()).unwrap();
        let gw = MatrixSeq::from_vec(what.values()[..13].iter().map(|z| z * lam.conj()).collect()).unwrap();
        let y = glue(&sys, &zhat, Some(&fz), 3, 7, &what, Some(&gw)).unwrap();
        for k in 0..=3 {
            assert!((y.z.get(k).unwrap() - zhat.get(k).unwrap()).norm() == 0.0);
        }
        for k in 8..=13 {
            assert!((y.z.get(k).unwrap() - what.get(k).unwrap()).norm() == 0.0);
        }
        assert!(recursion_residual(&sys, c(0.0, 0.0), &y.z, Some(&y.f), 0, 13).unwrap() < 1e-9);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::classify::check_atkinson;
    use crate::primitives::canonical_skew;
    use crate::random;
    use crate::primitives::DiscreteInterval;
    use crate::system::{from_block_special, from_sturm_liouville, BlockSpecialData};
    use rand::Rng;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, rows: usize, cols: usize, len: usize) -> MatrixSeq {
        MatrixSeq::from_vec((0..len).map(|_| random::complex_matrix(rows, cols, 1.0, rng)).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ivp_solution_satisfies_recursion(seed in any::<u64>(), n in 1usize..=3, n_upper in 0usize..=20, re in -3.0..3.0f64, im in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random::system(n, n_upper, 0.3, &mut rng);
            let k0 = rng.gen_range(0..=n_upper + 1);
            let z0 = random::complex_matrix(2 * n, 1, 1.0, &mut rng);
            let f = random_seq(&mut rng, 2 * n, 1, n_upper + 1);
            let lam = c(re, im);
            let z = solve_ivp(&sys, lam, k0, &z0, Some(&f), None).unwrap();
            prop_assert_eq!(z.get(k0).unwrap(), &z0);
            prop_assert!(recursion_residual(&sys, lam, &z, Some(&f), 0, n_upper + 1).unwrap() <= 1e-11);
        }

        #[test]
        fn lagrange_identity_holds(seed in any::<u64>(), n in 1usize..=3, n_upper in 0usize..=15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random::system(n, n_upper, 0.3, &mut rng);
            let lam = random::complex_scalar(2.0, &mut rng);
            let nu = random::complex_scalar(2.0, &mut rng);
            let f = random_seq(&mut rng, 2 * n, 2, n_upper + 1);
            let g = random_seq(&mut rng, 2 * n, 1, n_upper + 1);
            let z = solve_ivp(&sys, lam, 0, &random::complex_matrix(2 * n, 2, 1.0, &mut rng), Some(&f), None).unwrap();
            let u = solve_ivp(&sys, nu, n_upper + 1, &random::complex_matrix(2 * n, 1, 1.0, &mut rng), Some(&g), None).unwrap();
            let s = rng.gen_range(0..=n_upper);
            let t = rng.gen_range(s..=n_upper);
            let scale = 1.0 + z.max_abs() * u.max_abs() * (n_upper + 2) as f64;
            prop_assert!(verify_lagrange(&sys, lam, nu, &z, &u, Some(&f), Some(&g), s, t).unwrap() <= 1e-9 * scale);
        }

        #[test]
        fn fundamental_inverse_is_skew_adjoint(seed in any::<u64>(), n in 1usize..=3, n_upper in 0usize..=15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random::system(n, n_upper, 0.3, &mut rng);
            let j = canonical_skew(n);
            let fm = fundamental(&sys, c(0.0, 0.0), None).unwrap();
            for (_, p) in fm.phi.iter() {
                let inv = -(&j * p.adjoint() * &j);
                let err = linalg::max_abs(&(&inv * p - CMatrix::identity(2 * n, 2 * n)));
                prop_assert!(err <= 1e-10 * (1.0 + linalg::max_abs(p)).powi(2));
            }
        }

        #[test]
        fn patching_meets_both_ends_on_sturm_liouville(seed in any::<u64>(), n_upper in 1usize..=20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = from_sturm_liouville(&random::sturm_liouville(n_upper, &mut rng)).unwrap();
            let cc = rng.gen_range(0..n_upper);
            let d = rng.gen_range(cc + 1..=n_upper);
            prop_assume!(check_atkinson(&sys, cc, d).unwrap().passed);
            let alpha = random::complex_matrix(2, 1, 1.0, &mut rng);
            let beta = random::complex_matrix(2, 1, 1.0, &mut rng);
            let p = patching_bvp(&sys, cc, d, &alpha, &beta).unwrap();
            let scale = 1.0 + p.z.max_abs();
            prop_assert!(linalg::max_abs(&(p.z.get(cc).unwrap() - &alpha)) <= 1e-9 * scale);
            prop_assert!(linalg::max_abs(&(p.z.get(d + 1).unwrap() - &beta)) <= 1e-9 * scale);
            prop_assert!(recursion_residual(&sys, c(0.0, 0.0), &p.z, Some(&p.f), cc, d + 1).unwrap() <= 1e-9);
        }

        #[test]
        fn patching_meets_both_ends_on_block_systems(seed in any::<u64>(), n in 1usize..=3, n_upper in 1usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = n_upper + 1;
            let mut parts: [Vec<CMatrix>; 5] = Default::default();
            for _ in 0..len {
                let s = random::conjugate_symplectic(n, 0.4, &mut rng);
                for (i, (r0, c0)) in [(0, 0), (0, n), (n, 0), (n, n)].into_iter().enumerate() {
                    parts[i].push(s.view((r0, c0), (n, n)).into_owned());
                }
                let b = random::complex_matrix(n, n, 1.0, &mut rng);
                parts[4].push(&b * b.adjoint() + CMatrix::identity(n, n) * c(0.1, 0.0));
            }
            let [a, b, cm, d, w] = parts.map(|v| MatrixSeq::from_vec(v).unwrap());
            let data = BlockSpecialData::new(n, DiscreteInterval::finite(n_upper), a, b, cm, d, w).unwrap();
            let sys = from_block_special(&data).unwrap();
            prop_assume!(check_atkinson(&sys, 0, n_upper).unwrap().passed);
            let alpha = random::complex_matrix(2 * n, n, 1.0, &mut rng);
            let beta = random::complex_matrix(2 * n, n, 1.0, &mut rng);
            let p = patching_bvp(&sys, 0, n_upper, &alpha, &beta).unwrap();
            let scale = 1.0 + p.z.max_abs();
            prop_assert!(linalg::max_abs(&(p.z.get(0).unwrap() - &alpha)) <= 1e-9 * scale);
            prop_assert!(linalg::max_abs(&(p.z.get(n_upper + 1).unwrap() - &beta)) <= 1e-9 * scale);
            prop_assert!(recursion_residual(&sys, c(0.0, 0.0), &p.z, Some(&p.f), 0, n_upper + 1).unwrap() <= 1e-9);
        }
    }
}
