//! Self-adjoint boundary conditions: the endpoint matrices `Ω` and `Υ`, validation of
//! `(M, L)` data, scalar canonical forms, the `(F, G)` and unitary parametrizations,
//! equivalence of pairs, GKN sets, and the Krein–von Neumann extension.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::count_square_summable;
use crate::error::{Error, Result};
use crate::linalg::{self, hstack, max_abs, norm2, rank, vstack};
use crate::primitives::{c, canonical_skew, j_left, CMatrix, MatrixSeq, Trajectory, C64, DEFAULT_TOL};
use crate::solver::{self, fundamental, patching_bvp, solve_ivp, PatchedSolution, RECURSION_LIMIT};
use crate::system::{forward_from, SymplecticSystem};

/// Relative singular value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Boundary data `M ẑ_0 − L (endpoint data) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPair {
    pub m: CMatrix,
    pub l: CMatrix,
}

fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

impl BoundaryPair {
    pub fn new(m: CMatrix, l: CMatrix) -> Result<Self> {
        if m.nrows() != l.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "M has {} rows but L has {}",
                m.nrows(),
                l.nrows()
            )));
        }
        Ok(BoundaryPair { m, l })
    }

    /// `x̂_0 = 0 = x̂_{N+1}`.
    pub fn dirichlet(n: usize) -> Self {
        BoundaryPair {
            m: linalg::blocks(&eye(n), &zeros(n), &zeros(n), &zeros(n)),
            l: linalg::blocks(&zeros(n), &zeros(n), &(-eye(n)), &zeros(n)),
        }
    }

    /// `û_0 = 0 = û_{N+1}`.
    pub fn neumann(n: usize) -> Self {
        BoundaryPair {
            m: linalg::blocks(&zeros(n), &eye(n), &zeros(n), &zeros(n)),
            l: linalg::blocks(&zeros(n), &zeros(n), &zeros(n), &eye(n)),
        }
    }

    /// `ẑ_0 = ẑ_{N+1}`.
    pub fn periodic(n: usize) -> Self {
        BoundaryPair { m: eye(2 * n), l: eye(2 * n) }
    }

    /// `ẑ_0 = −ẑ_{N+1}`.
    pub fn antiperiodic(n: usize) -> Self {
        BoundaryPair { m: eye(2 * n), l: -eye(2 * n) }
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    /// `(M, −L)`.
    pub fn stacked(&self) -> CMatrix {
        hstack(&self.m, &(-&self.l))
    }
}

/// `P(α) = [[cos α, sin α], [0, 0]]`.
pub fn p_matrix(alpha: f64) -> CMatrix {
    linalg::from_real_rows(2, 2, &[alpha.cos(), alpha.sin(), 0.0, 0.0])
}

/// `Q(α) = [[0, 0], [−sin α, cos α]]`.
pub fn q_matrix(alpha: f64) -> CMatrix {
    linalg::from_real_rows(2, 2, &[0.0, 0.0, -alpha.sin(), alpha.cos()])
}

/// Parametrizations of a self-adjoint extension.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtensionForm {
    /// `cos α_0 x̂_0 + sin α_0 û_0 = 0`, `−sin α_{N+1} x̂_{N+1} + cos α_{N+1} û_{N+1} = 0`.
    Separated { alpha0: f64, alpha_n1: f64 },
    /// `ẑ_{N+1} = e^{iβ} R ẑ_0` with real `R`, `det R = 1`, `β ∈ [0, π)`.
    Coupled { r: CMatrix, beta: f64 },
    /// `F γ_x + G γ_u = 0` with `γ_x = (x̂_0, x̂_{N+1})`, `γ_u = (û_0, −û_{N+1})`.
    Fg { f: CMatrix, g: CMatrix },
    /// `i(V − I) γ_x = (V + I) γ_u` with unitary `V`.
    Unitary { v: CMatrix },
    General(BoundaryPair),
}

impl ExtensionForm {
    pub fn to_pair(&self) -> Result<BoundaryPair> {
        match self {
            ExtensionForm::Separated { alpha0, alpha_n1 } => Ok(BoundaryPair {
                m: p_matrix(*alpha0),
                l: q_matrix(*alpha_n1),
            }),
            ExtensionForm::Coupled { r, beta } => Ok(BoundaryPair {
                m: r * C64::from_polar(1.0, *beta),
                l: eye(r.nrows()),
            }),
            ExtensionForm::Fg { f, g } => Ok(from_fg(f, g)?.pair),
            ExtensionForm::Unitary { v } => Ok(from_unitary(v)?.pair),
            ExtensionForm::General(p) => Ok(p.clone()),
        }
    }
}

/// Gram matrix of endpoint brackets `ω_ij = (φ^{[i]}, φ^{[j]})_{end}` of square summable
/// solutions at `λ_0` (first `q_+`) and `λ̄_0` (last `q_−`), arranged so that the first
/// `p − 2n` rows of the off-diagonal block have full rank.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    pub entries: CMatrix,
    pub n: usize,
    pub q_plus: usize,
    pub q_minus: usize,
    pub lam0: C64,
    /// Index where the brackets were evaluated (`N + 1` or the truncation).
    pub endpoint: usize,
    /// Initial values `φ_0` of the arranged basis (columns).
    pub basis_initial: CMatrix,
    /// Values `φ_{end}` of the arranged basis (columns).
    pub basis_end: CMatrix,
    /// Original positions of the arranged `λ_0` solutions.
    pub arrangement: Vec<usize>,
    pub rank_omega: usize,
    pub rank_omega12: usize,
    /// Rank of the leading `(p − 2n) × (p − 2n)` block.
    pub rank_leading: usize,
    /// Relative change between truncations `K` and `2K`; zero on finite intervals.
    pub truncation_change: f64,
}

impl OmegaMatrix {
    pub fn p(&self) -> usize {
        self.q_plus + self.q_minus
    }

    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let (r0, nr) = if i == 1 { (0, self.q_plus) } else { (self.q_plus, self.q_minus) };
        let (c0, nc) = if j == 1 { (0, self.q_plus) } else { (self.q_plus, self.q_minus) };
        self.entries.view((r0, c0), (nr, nc)).into_owned()
    }

    /// Leading `size × size` block, `Ω_{size}`.
    pub fn leading(&self, size: usize) -> CMatrix {
        self.entries.view((0, 0), (size, size)).into_owned()
    }
}

/// Indices of `count` rows chosen greedily by largest residual after projecting out the
/// rows already chosen.
fn pivoted_rows(m: &CMatrix, count: usize) -> Vec<usize> {
    let mut rows: Vec<CMatrix> = (0..m.nrows()).map(|i| m.rows(i, 1).into_owned()).collect();
    let mut chosen = Vec::new();
    for _ in 0..count.min(m.nrows()) {
        let best = (0..rows.len())
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| rows[a].norm().total_cmp(&rows[b].norm()))
            .unwrap();
        let nb = rows[best].norm();
        chosen.push(best);
        if nb == 0.0 {
            continue;
        }
        let unit = &rows[best] / c(nb, 0.0);
        for i in 0..rows.len() {
            if !chosen.contains(&i) {
                let proj = rows[i].dotc(&unit);
                let upd = &rows[i] - &unit * proj.conj();
                rows[i] = upd;
            }
        }
    }
    chosen
}

fn omega_from(n: usize, lam0: C64, q_plus: usize, initial: CMatrix, end_values: CMatrix, endpoint: usize, change: f64) -> OmegaMatrix {
    let p = initial.ncols();
    let q_minus = p - q_plus;
    let raw = end_values.adjoint() * j_left(&end_values);
    let r = p.saturating_sub(2 * n);
    let o12 = raw.view((0, q_plus), (q_plus, q_minus)).into_owned();
    let mut arrangement = pivoted_rows(&o12, r);
    for i in 0..q_plus {
        if !arrangement.contains(&i) {
            arrangement.push(i);
        }
    }
    let mut perm: Vec<usize> = arrangement.clone();
    perm.extend(q_plus..p);
    let pick = |m: &CMatrix| CMatrix::from_fn(m.nrows(), p, |i, j| m[(i, perm[j])]);
    let basis_initial = pick(&initial);
    let basis_end = pick(&end_values);
    let entries = basis_end.adjoint() * j_left(&basis_end);
    let o12 = entries.view((0, q_plus), (q_plus, q_minus)).into_owned();
    OmegaMatrix {
        rank_omega: rank(&entries, RANK_TOL),
        rank_omega12: rank(&o12, RANK_TOL),
        rank_leading: rank(&entries.view((0, 0), (r, r)).into_owned(), RANK_TOL),
        entries,
        n,
        q_plus,
        q_minus,
        lam0,
        endpoint,
        basis_initial,
        basis_end,
        arrangement,
        truncation_change: change,
    }
}

/// Build `Ω` from fundamental matrices at `λ_0` and `λ̄_0`. On finite intervals every
/// solution counts (`q_± = 2n`) and `Ω = Φ_{N+1}^* J Φ_{N+1}` is exact. On unbounded intervals
/// the brackets are evaluated at `K` and `2K`, and only when the limit circle case is
/// certified (both estimates equal `2n` and stable); otherwise the call is refused.
pub fn build_omega(sys: &SymplecticSystem, lam0: C64, truncation: Option<usize>, growth_threshold: f64) -> Result<OmegaMatrix> {
    let n = sys.n();
    let dim = sys.dim();
    if sys.interval().is_finite() {
        let plus = fundamental(sys, lam0, None)?.phi;
        let minus = fundamental(sys, lam0.conj(), None)?.phi;
        let e = plus.end();
        let initial = hstack(plus.get(0)?, minus.get(0)?);
        let end_values = hstack(plus.get(e)?, minus.get(e)?);
        return Ok(omega_from(n, lam0, dim, initial, end_values, e, 0.0));
    }
    let k = truncation.ok_or(Error::TruncationRequired)?;
    let qp = count_square_summable(sys, lam0, k, growth_threshold, None)?;
    let qm = count_square_summable(sys, lam0.conj(), k, growth_threshold, None)?;
    if !(qp.stable && qm.stable && qp.q_estimate == dim && qm.q_estimate == dim) {
        return Err(Error::NotCertified(format!(
            "limit circle case not established at truncation {} (q+ = {}{}, q- = {}{}); endpoint brackets may not converge",
            k,
            qp.q_estimate,
            if qp.stable { "" } else { ", unstable" },
            qm.q_estimate,
            if qm.stable { "" } else { ", unstable" }
        )));
    }
    let at = |t: usize| -> Result<CMatrix> {
        let plus = fundamental(sys, lam0, Some(t))?.phi;
        let minus = fundamental(sys, lam0.conj(), Some(t))?.phi;
        Ok(hstack(plus.get(t)?, minus.get(t)?))
    };
    let e1 = at(k)?;
    let e2 = at(2 * k)?;
    let o1 = e1.adjoint() * j_left(&e1);
    let o2 = e2.adjoint() * j_left(&e2);
    let change = norm2(&(&o2 - &o1)) / norm2(&o2).max(1e-300);
    Ok(omega_from(n, lam0, dim, eye(dim), e2, 2 * k, change))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Upsilon {
    /// `Θ_0^* J Θ_0`.
    pub at_start: CMatrix,
    /// `Θ_e^* J Θ_e` at the last index of the basis.
    pub at_end: CMatrix,
    pub agreement: f64,
}

/// `Υ = Θ_0^* J Θ_0` for solutions `Θ` of the recursion at real `ν`, together with the same
/// matrix evaluated at the far end, which agrees by the Wronskian identity.
pub fn build_upsilon(sys: &SymplecticSystem, nu: f64, theta: &Trajectory) -> Result<Upsilon> {
    if theta.start() != 0 {
        return Err(Error::MissingEndpoint("basis must start at index 0".into()));
    }
    let t0 = theta.get(0)?;
    if rank(t0, RANK_TOL) < t0.ncols() {
        return Err(Error::InvalidInput("solution basis is rank deficient".into()));
    }
    let lam = c(nu, 0.0);
    let r = solver::recursion_residual(sys, lam, theta, None, 0, theta.end())?;
    if r > RECURSION_LIMIT {
        return Err(Error::RecursionResidual {
            residual: r,
            limit: RECURSION_LIMIT,
            context: "basis does not solve the recursion at nu".into(),
        });
    }
    let te = theta.get(theta.end())?;
    let at_start = t0.adjoint() * j_left(t0);
    let at_end = te.adjoint() * j_left(te);
    let agreement = max_abs(&(&at_end - &at_start));
    Ok(Upsilon { at_start, at_end, agreement })
}

/// Which form of the self-adjointness condition applies.
#[derive(Debug, Clone, Copy)]
pub enum ExtensionSetting<'a> {
    /// `q = 2n`, `M J M^* − L J L^* = 0` with `L` acting on `ẑ_{N+1}`.
    Finite,
    /// `q = n`, `rank M = n`, `M J M^* = 0`; `L` is empty.
    LimitPoint,
    /// `M J M^* − L Ω_{2q−2n} L^* = 0` with `L` acting on endpoint brackets.
    General(&'a OmegaMatrix),
}

impl ExtensionSetting<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ExtensionSetting::Finite => "finite interval",
            ExtensionSetting::LimitPoint => "limit point",
            ExtensionSetting::General(_) => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionValidation {
    pub rank: usize,
    pub expected_rank: usize,
    pub residual: f64,
    pub self_adjoint: bool,
    pub setting: &'static str,
}

pub fn validate_extension(sys: &SymplecticSystem, pair: &BoundaryPair, setting: ExtensionSetting) -> Result<ExtensionValidation> {
    validate_extension_tol(sys, pair, setting, DEFAULT_TOL)
}

pub fn validate_extension_tol(sys: &SymplecticSystem, pair: &BoundaryPair, setting: ExtensionSetting, tol: f64) -> Result<ExtensionValidation> {
    let n = sys.n();
    let dim = sys.dim();
    let j = canonical_skew(n);
    let (q, l_cols) = match setting {
        ExtensionSetting::Finite => (dim, dim),
        ExtensionSetting::LimitPoint => (n, 0),
        ExtensionSetting::General(o) => {
            let q = o.q_plus;
            (q, 2 * q - dim)
        }
    };
    if pair.m.shape() != (q, dim) || pair.l.shape() != (q, l_cols) {
        return Err(Error::ShapeMismatch(format!(
            "{} setting needs M {}x{} and L {}x{}, got {}x{} and {}x{}",
            setting.name(),
            q,
            dim,
            q,
            l_cols,
            pair.m.nrows(),
            pair.m.ncols(),
            pair.l.nrows(),
            pair.l.ncols()
        )));
    }
    let mjm = &pair.m * &j * pair.m.adjoint();
    let defect = match setting {
        ExtensionSetting::Finite => mjm - &pair.l * &j * pair.l.adjoint(),
        ExtensionSetting::LimitPoint => mjm,
        ExtensionSetting::General(o) => mjm - &pair.l * o.leading(l_cols) * pair.l.adjoint(),
    };
    let residual = norm2(&defect);
    let r = rank(&hstack(&pair.m, &pair.l), RANK_TOL);
    let scale = 1f64.max(norm2(&pair.m).powi(2)).max(norm2(&pair.l).powi(2));
    Ok(ExtensionValidation {
        rank: r,
        expected_rank: q,
        residual,
        self_adjoint: r == q && residual <= tol * scale,
        setting: setting.name(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub boundary_residual: f64,
    /// Distance of `L(z)_k` from the range of `Ψ_k`, relative to the size of `z`.
    pub admissibility_residual: f64,
}

/// Largest distance of `J(z_k − S_k z_{k+1})` from `range Ψ_k`, relative to `1 + max |z|`.
/// Zero exactly when `z` is the first component of an element of the maximal relation.
pub fn admissibility_residual(sys: &SymplecticSystem, z: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in z.start()..z.end() {
        let s = sys.s(k)?;
        let psi = sys.psi(k)?;
        let ell = j_left(&(z.get(k)? - s.as_ref() * z.get(k + 1)?));
        let proj = psi.as_ref() * linalg::pinv(psi.as_ref(), 1e-10) * &ell;
        worst = worst.max(max_abs(&(ell - proj)));
    }
    Ok(worst / (1.0 + z.max_abs()))
}

/// Check the boundary condition of `pair` for a trajectory on `[0, end]`.
pub fn membership(sys: &SymplecticSystem, pair: &BoundaryPair, setting: ExtensionSetting, z: &Trajectory) -> Result<Membership> {
    membership_tol(sys, pair, setting, z, DEFAULT_TOL)
}

pub fn membership_tol(sys: &SymplecticSystem, pair: &BoundaryPair, setting: ExtensionSetting, z: &Trajectory, tol: f64) -> Result<Membership> {
    if z.start() != 0 {
        return Err(Error::MissingEndpoint("trajectory must start at index 0".into()));
    }
    let adm = admissibility_residual(sys, z)?;
    if adm > RECURSION_LIMIT || adm.is_nan() {
        return Err(Error::RecursionResidual {
            residual: adm,
            limit: RECURSION_LIMIT,
            context: "trajectory is not in the maximal relation".into(),
        });
    }
    let z0 = z.get(0)?;
    let ze = z.get(z.end())?;
    let defect = match setting {
        ExtensionSetting::Finite => {
            let expected = sys.interval().end_plus(None)?;
            if z.end() != expected {
                return Err(Error::MissingEndpoint(format!("trajectory must end at N+1 = {}", expected)));
            }
            &pair.m * z0 - &pair.l * ze
        }
        ExtensionSetting::LimitPoint => &pair.m * z0,
        ExtensionSetting::General(o) => {
            if z.end() != o.endpoint {
                return Err(Error::MissingEndpoint(format!("trajectory must end at {}", o.endpoint)));
            }
            let cols = pair.l.ncols();
            let phi = o.basis_end.columns(0, cols).into_owned();
            let brackets = phi.adjoint() * j_left(ze);
            &pair.m * z0 - &pair.l * brackets
        }
    };
    let r = norm2(&defect);
    Ok(Membership {
        member: r <= tol * (1.0 + z.max_abs()),
        boundary_residual: r,
        admissibility_residual: adm,
    })
}

fn snap(angle: f64, period: f64) -> f64 {
    let a = angle.rem_euclid(period) + 0.0;
    if period - a < 1e-12 {
        0.0
    } else {
        a
    }
}

fn largest_row(m: &CMatrix) -> CMatrix {
    let i = (0..m.nrows())
        .max_by(|&a, &b| m.row(a).norm().total_cmp(&m.row(b).norm()))
        .unwrap();
    linalg::remove_phase(&m.rows(i, 1).into_owned())
}

/// `(β, R)` with `β ∈ [0, π)` and `R = e^{−iβ} K`, from `e^{2iβ} = det K`.
fn coupled_parameters(k: &CMatrix) -> (f64, CMatrix) {
    let delta = snap(linalg::det(k).arg(), 2.0 * PI);
    let beta = delta / 2.0;
    (beta, k * C64::from_polar(1.0, -beta))
}

/// Reduce valid scalar (`n = 1`, finite interval) boundary data to separated angles
/// `(α_0, α_{N+1}) ∈ [0, π)²` when `rank M = 1`, or to `(R, β)` when `rank M = 2`.
pub fn canonicalize_scalar(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<ExtensionForm> {
    if sys.n() != 1 || !sys.interval().is_finite() {
        return Err(Error::Unsupported("scalar canonical forms need n = 1 on a finite interval".into()));
    }
    let v = validate_extension(sys, pair, ExtensionSetting::Finite)?;
    if !v.self_adjoint {
        return Err(Error::InvalidInput(format!(
            "boundary pair is not self-adjoint (rank {}, residual {:.3e})",
            v.rank, v.residual
        )));
    }
    let rm = rank(&pair.m, RANK_TOL);
    let rl = rank(&pair.l, RANK_TOL);
    match (rm, rl) {
        (1, 1) => {
            let b = largest_row(&pair.m);
            let d = largest_row(&pair.l);
            Ok(ExtensionForm::Separated {
                alpha0: snap(b[(0, 1)].re.atan2(b[(0, 0)].re), PI),
                alpha_n1: snap((-d[(0, 0)].re).atan2(d[(0, 1)].re), PI),
            })
        }
        (2, 2) => {
            let k = linalg::solve(&pair.l, &pair.m).ok_or_else(|| Error::Singular {
                what: "L".into(),
                cond: linalg::cond2(&pair.l),
            })?;
            let (beta, r) = coupled_parameters(&k);
            if linalg::max_imag(&r) > 1e-8 * (1.0 + max_abs(&r)) {
                return Err(Error::InvalidInput("coupled form does not reduce to a real matrix".into()));
            }
            Ok(ExtensionForm::Coupled {
                r: r.map(|x| c(x.re, 0.0)),
                beta,
            })
        }
        _ => Err(Error::InvalidInput(format!(
            "rank M = {} and rank L = {}; valid data has rank M = rank L in {{1, 2}}",
            rm, rl
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgPair {
    pub pair: BoundaryPair,
    pub rank_fg: usize,
    /// `‖F G^* − G F^*‖₂`; zero for self-adjoint data.
    pub hermitian_residual: f64,
    /// `‖(M J M^* − L J L^*) − (F G^* − G F^*)‖₂`.
    pub identity_residual: f64,
    pub valid: bool,
}

/// `M = F P_0 + G P_{π/2}`, `L = F Q_{π/2} + G Q_0` with the block versions of `P`, `Q`.
pub fn from_fg(f: &CMatrix, g: &CMatrix) -> Result<FgPair> {
    let dim = f.nrows();
    if f.shape() != (dim, dim) || g.shape() != (dim, dim) || dim % 2 != 0 || dim == 0 {
        return Err(Error::ShapeMismatch("F and G must be square of even size 2n".into()));
    }
    let n = dim / 2;
    let (i, z) = (eye(n), zeros(n));
    let p0 = linalg::blocks(&i, &z, &z, &z);
    let p_half = linalg::blocks(&z, &i, &z, &z);
    let q_half = linalg::blocks(&z, &z, &(-&i), &z);
    let q0 = linalg::blocks(&z, &z, &z, &i);
    let m = f * p0 + g * p_half;
    let l = f * q_half + g * q0;
    let j = canonical_skew(n);
    let herm = f * g.adjoint() - g * f.adjoint();
    let lhs = &m * &j * m.adjoint() - &l * &j * l.adjoint();
    let rank_fg = rank(&hstack(f, g), RANK_TOL);
    let hermitian_residual = norm2(&herm);
    let scale = 1f64.max(norm2(f) * norm2(g));
    Ok(FgPair {
        identity_residual: norm2(&(lhs - &herm)),
        valid: rank_fg == dim && hermitian_residual <= DEFAULT_TOL * scale,
        rank_fg,
        hermitian_residual,
        pair: BoundaryPair { m, l },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryPair {
    pub f: CMatrix,
    pub g: CMatrix,
    pub fg: FgPair,
    pub pair: BoundaryPair,
    /// `‖(F + iG)^{-1}(iG − F) − V‖₂`.
    pub roundtrip_residual: f64,
}

/// `F = (i/2)(I − V)`, `G = (1/2)(I + V)`.
pub fn from_unitary(v: &CMatrix) -> Result<UnitaryPair> {
    let dim = v.nrows();
    if v.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch("V must be square".into()));
    }
    let unitarity = norm2(&(v.adjoint() * v - eye(dim)));
    if unitarity > DEFAULT_TOL {
        return Err(Error::InvalidInput(format!("V is not unitary (residual {:.3e})", unitarity)));
    }
    let f = (eye(dim) - v) * c(0.0, 0.5);
    let g = (eye(dim) + v) * c(0.5, 0.0);
    let back = fg_to_unitary(&f, &g)?;
    let fg = from_fg(&f, &g)?;
    Ok(UnitaryPair {
        roundtrip_residual: norm2(&(back - v)),
        pair: fg.pair.clone(),
        fg,
        f,
        g,
    })
}

/// `V = (F + iG)^{-1}(iG − F)`.
pub fn fg_to_unitary(f: &CMatrix, g: &CMatrix) -> Result<CMatrix> {
    let a = f + g * c(0.0, 1.0);
    let b = g * c(0.0, 1.0) - f;
    linalg::solve(&a, &b).ok_or_else(|| Error::Singular {
        what: "F + iG".into(),
        cond: linalg::cond2(&a),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// `C` with `(M_2, L_2) = C (M_1, L_1)` when equivalent.
    pub c: Option<CMatrix>,
    pub residual: f64,
}

/// Two pairs describe the same extension exactly when `(M_2, L_2) = C (M_1, L_1)` for an
/// invertible `C`, i.e. when the row spaces of `(M, −L)` coincide.
pub fn equivalent(a: &BoundaryPair, b: &BoundaryPair) -> Result<Equivalence> {
    if a.m.shape() != b.m.shape() || a.l.shape() != b.l.shape() {
        return Err(Error::ShapeMismatch("pairs have different shapes".into()));
    }
    let (xa, xb) = (a.stacked(), b.stacked());
    let q = a.rows();
    if rank(&xa, RANK_TOL) != q || rank(&xb, RANK_TOL) != q {
        return Err(Error::InvalidInput("boundary pairs must have full row rank".into()));
    }
    let joint = rank(&vstack(&xa, &xb), RANK_TOL);
    let cm = &xb * linalg::pinv(&xa, RANK_TOL);
    let residual = norm2(&(&xb - &cm * &xa));
    let equivalent = joint == q;
    Ok(Equivalence {
        equivalent,
        c: if equivalent { Some(cm) } else { None },
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GknReport {
    /// Matrix of brackets `[z_i : z_j]`.
    pub brackets: CMatrix,
    pub max_bracket: f64,
    pub brackets_vanish: bool,
    /// Rank of the stacked endpoint vectors `(ẑ_0; ẑ_{N+1})`.
    pub endpoint_rank: usize,
    pub independent: bool,
    pub admissibility_residual: f64,
    pub passed: bool,
}

/// Check that candidate boundary generators have vanishing mutual brackets and are
/// independent modulo the minimal relation (independent endpoint vectors).
pub fn verify_gkn_set(sys: &SymplecticSystem, candidates: &[Trajectory]) -> Result<GknReport> {
    if !sys.interval().is_finite() {
        return Err(Error::Unsupported("GKN verification needs a finite interval".into()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidates".into()));
    }
    let end = sys.interval().end_plus(None)?;
    let dim = sys.dim();
    let mut adm: f64 = 0.0;
    for z in candidates {
        if z.start() != 0 || z.end() != end || z.cols() != 1 {
            return Err(Error::ShapeMismatch(format!("candidates must be vectors on [0, {}]", end)));
        }
        adm = adm.max(admissibility_residual(sys, z)?);
    }
    if adm > RECURSION_LIMIT {
        return Err(Error::RecursionResidual {
            residual: adm,
            limit: RECURSION_LIMIT,
            context: "a candidate is not in the maximal relation".into(),
        });
    }
    let d = candidates.len();
    let ends = CMatrix::from_fn(2 * dim, d, |i, j| {
        let z = &candidates[j];
        if i < dim {
            z.get(0).unwrap()[(i, 0)]
        } else {
            z.get(end).unwrap()[(i - dim, 0)]
        }
    });
    let brackets = CMatrix::from_fn(d, d, |i, j| crate::primitives::boundary_bracket(&candidates[i], &candidates[j]).unwrap());
    let max_bracket = max_abs(&brackets);
    let endpoint_rank = rank(&ends, RANK_TOL);
    let scale = 1f64.max(max_abs(&ends).powi(2));
    let brackets_vanish = max_bracket <= DEFAULT_TOL * scale;
    let independent = endpoint_rank == d;
    Ok(GknReport {
        brackets,
        max_bracket,
        brackets_vanish,
        endpoint_rank,
        independent,
        admissibility_residual: adm,
        passed: brackets_vanish && independent,
    })
}

/// Generators `{z_i, f_i}` with `ẑ_0 = J M^* e_i` and `ẑ_{N+1} = J L^* e_i`, built by the
/// patching construction on `[0, N]`.
pub fn canonical_gkn_set(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<Vec<PatchedSolution>> {
    let n_upper = sys
        .interval()
        .n_upper()
        .ok_or_else(|| Error::Unsupported("canonical GKN set needs a finite interval".into()))?;
    let ma = j_left(&pair.m.adjoint());
    let la = j_left(&pair.l.adjoint());
    (0..pair.rows())
        .map(|i| patching_bvp(sys, 0, n_upper, &ma.columns(i, 1).into_owned(), &la.columns(i, 1).into_owned()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KreinBranch {
    BNonzero,
    BZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivitySample {
    pub samples: usize,
    /// Smallest observed `Re ⟨z̃, f̃⟩_Ψ / ‖z̃‖²_Ψ` over minimal-relation pairs.
    pub min_ratio: f64,
    /// Always false: sampling cannot certify positivity.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KreinExtension {
    pub form: ExtensionForm,
    pub pair: BoundaryPair,
    /// `G = (S_0 S_1 ⋯ S_N)^{-1}`.
    pub g: CMatrix,
    pub branch: KreinBranch,
    /// Initial values of the kernel basis.
    pub kernel_initial: [CMatrix; 2],
    pub kernel: [Trajectory; 2],
    /// `a, b, c, d` real, so the same extension is `T_{G, 0}`.
    pub real_coefficients: bool,
    pub positivity: Option<PositivitySample>,
}

/// The Krein–von Neumann extension `T_min ∔ (ker T_max × {0})` of a positive scalar system on
/// a finite interval, written as `ẑ_{N+1} = e^{iβ} R ẑ_0` with `R = e^{−iβ} G`. Positivity of
/// the minimal relation is the caller's assumption; it is sampled, not certified.
pub fn krein_von_neumann(sys: &SymplecticSystem) -> Result<KreinExtension> {
    if sys.n() != 1 {
        return Err(Error::Unsupported("Krein-von Neumann construction needs n = 1".into()));
    }
    let n_upper = sys
        .interval()
        .n_upper()
        .ok_or_else(|| Error::Unsupported("Krein-von Neumann construction needs a finite interval".into()))?;
    let mut g = eye(2);
    for k in 0..=n_upper {
        g = forward_from(sys.s(k)?.as_ref()) * g;
    }
    let (a, b, cc, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let col = |x: C64, y: C64| CMatrix::from_column_slice(2, 1, &[x, y]);
    let (branch, kernel_initial) = if b.norm() > 1e-12 {
        (KreinBranch::BNonzero, [col(zero, one / b), col(one, -a / b)])
    } else {
        if d.norm() == 0.0 {
            return Err(Error::Singular { what: "G (b = d = 0)".into(), cond: f64::INFINITY });
        }
        (KreinBranch::BZero, [col(zero, one / d), col(one, -cc / d)])
    };
    let (beta, r) = coupled_parameters(&g);
    let kernel = [
        solve_ivp(sys, zero, 0, &kernel_initial[0], None, None)?,
        solve_ivp(sys, zero, 0, &kernel_initial[1], None, None)?,
    ];
    let real_coefficients = linalg::max_imag(&g) <= 1e-12;
    let positivity = sample_positivity(sys, 16, 0x5eed).ok();
    Ok(KreinExtension {
        form: ExtensionForm::Coupled { r, beta },
        pair: BoundaryPair { m: g.clone(), l: eye(2) },
        g,
        branch,
        kernel_initial,
        kernel,
        real_coefficients,
        positivity,
    })
}

/// Sample `Re ⟨z̃, f̃⟩_Ψ / ‖z̃‖²_Ψ` over random elements of the minimal relation: a random
/// forcing `f` with `z_0 = 0`, corrected by a patching solution so that `z_{N+1} = 0`.
pub fn sample_positivity(sys: &SymplecticSystem, samples: usize, seed: u64) -> Result<PositivitySample> {
    let n_upper = sys
        .interval()
        .n_upper()
        .ok_or_else(|| Error::Unsupported("positivity sampling needs a finite interval".into()))?;
    let dim = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let zero = c(0.0, 0.0);
    for _ in 0..samples {
        let f = MatrixSeq::from_vec((0..=n_upper).map(|_| crate::random::complex_matrix(dim, 1, 1.0, &mut rng)).collect())?;
        let z = solve_ivp(sys, zero, 0, &CMatrix::zeros(dim, 1), Some(&f), None)?;
        let patch = patching_bvp(sys, 0, n_upper, &CMatrix::zeros(dim, 1), z.get(n_upper + 1)?)?;
        let zt = z.sub(&patch.z)?;
        let ft = MatrixSeq::from_vec((0..=n_upper).map(|k| f.at(k).unwrap().into_owned() - patch.f.at(k).unwrap().as_ref()).collect())?;
        let ft_traj = Trajectory::new(0, (0..=n_upper).map(|k| ft.at(k).unwrap().into_owned()).chain(std::iter::once(CMatrix::zeros(dim, 1))).collect())?;
        let num = crate::primitives::semi_inner(&zt, &ft_traj, sys.psi_seq(), n_upper)?.re;
        let den = crate::primitives::semi_inner(&zt, &zt, sys.psi_seq(), n_upper)?.re;
        if den > 1e-14 {
            min_ratio = min_ratio.min(num / den);
        }
    }
    Ok(PositivitySample {
        samples,
        min_ratio,
        certified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::random;
    use crate::system::{from_sturm_liouville, SturmLiouvilleData};

    fn sl(n_upper: usize) -> SymplecticSystem {
        from_sturm_liouville(&SturmLiouvilleData::finite(vec![-1.0; n_upper + 2], vec![0.0; n_upper + 1], vec![1.0; n_upper + 1]).unwrap()).unwrap()
    }

    fn shear(bs: &[f64]) -> SymplecticSystem {
        SymplecticSystem::from_matrices(
            bs.iter().map(|&b| from_real_rows(2, 2, &[1.0, -b, 0.0, 1.0])).collect(),
            bs.iter().map(|_| from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn named_pairs_validate() {
        let sys = sl(3);
        for p in [BoundaryPair::dirichlet(1), BoundaryPair::neumann(1), BoundaryPair::periodic(1), BoundaryPair::antiperiodic(1)] {
            let v = validate_extension(&sys, &p, ExtensionSetting::Finite).unwrap();
            assert!(v.self_adjoint && v.residual <= 1e-12, "{:?}", v);
        }
        let bad = BoundaryPair::new(eye(2), eye(2) * c(2.0, 0.0)).unwrap();
        let v = validate_extension(&sys, &bad, ExtensionSetting::Finite).unwrap();
        assert!(!v.self_adjoint);
        assert!((v.residual - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_is_separated_zero_half_pi() {
        let p = ExtensionForm::Separated { alpha0: 0.0, alpha_n1: PI / 2.0 }.to_pair().unwrap();
        assert!(equivalent(&p, &BoundaryPair::dirichlet(1)).unwrap().equivalent);
        let n = ExtensionForm::Separated { alpha0: PI / 2.0, alpha_n1: 0.0 }.to_pair().unwrap();
        assert!(equivalent(&n, &BoundaryPair::neumann(1)).unwrap().equivalent);
    }

    #[test]
    fn canonical_forms_of_named_pairs() {
        let sys = sl(3);
        match canonicalize_scalar(&sys, &BoundaryPair::periodic(1)).unwrap() {
            ExtensionForm::Coupled { r, beta } => {
                assert!((r - eye(2)).norm() < 1e-14);
                assert_eq!(beta, 0.0);
            }
            other => panic!("{:?}", other),
        }
        match canonicalize_scalar(&sys, &BoundaryPair::antiperiodic(1)).unwrap() {
            ExtensionForm::Coupled { r, beta } => {
                assert!((r + eye(2)).norm() < 1e-14);
                assert_eq!(beta, 0.0);
            }
            other => panic!("{:?}", other),
        }
        let pair = BoundaryPair::new(from_real_rows(2, 2, &[2., 0., 0., 0.]), from_real_rows(2, 2, &[0., 0., 3., 0.])).unwrap();
        assert_eq!(canonicalize_scalar(&sys, &pair).unwrap(), ExtensionForm::Separated { alpha0: 0.0, alpha_n1: PI / 2.0 });
        let pair = BoundaryPair::new(from_real_rows(2, 2, &[2., 0., 0., 0.]), from_real_rows(2, 2, &[0., 0., 0., 3.])).unwrap();
        assert_eq!(canonicalize_scalar(&sys, &pair).unwrap(), ExtensionForm::Separated { alpha0: 0.0, alpha_n1: 0.0 });
    }

    #[test]
    fn canonicalize_rejects_invalid() {
        let bad = BoundaryPair::new(eye(2), eye(2) * c(2.0, 0.0)).unwrap();
        assert!(canonicalize_scalar(&sl(2), &bad).is_err());
    }

    #[test]
    fn fg_trivial_cases() {
        let d = from_fg(&eye(2), &zeros(2)).unwrap();
        assert!(d.valid);
        assert!(equivalent(&d.pair, &BoundaryPair::dirichlet(1)).unwrap().equivalent);
        let n = from_fg(&zeros(2), &eye(2)).unwrap();
        assert!(equivalent(&n.pair, &BoundaryPair::neumann(1)).unwrap().equivalent);
    }

    #[test]
    fn unitary_endpoints() {
        let u = from_unitary(&eye(2)).unwrap();
        assert!(u.f.norm() < 1e-15 && (u.g.clone() - eye(2)).norm() < 1e-15);
        let u = from_unitary(&(-eye(2))).unwrap();
        assert!((u.f.clone() - eye(2) * c(0.0, 1.0)).norm() < 1e-15 && u.g.norm() < 1e-15);
        assert!(from_unitary(&(eye(2) * c(2.0, 0.0))).is_err());
    }

    #[test]
    fn fg_identity_for_block_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in [2, 4, 6] {
            let f = random::complex_matrix(dim, dim, 1.0, &mut rng);
            let g = random::complex_matrix(dim, dim, 1.0, &mut rng);
            assert!(from_fg(&f, &g).unwrap().identity_residual < 1e-12);
        }
    }

    #[test]
    fn equivalence_examples() {
        let p = BoundaryPair::periodic(1);
        let e = equivalent(&p, &p).unwrap();
        assert!(e.equivalent && (e.c.unwrap() - eye(2)).norm() < 1e-12);
        let scaled = BoundaryPair::new(&p.m * c(0.0, 3.0), &p.l * c(0.0, 3.0)).unwrap();
        let e = equivalent(&p, &scaled).unwrap();
        assert!(e.equivalent && (e.c.unwrap() - eye(2) * c(0.0, 3.0)).norm() < 1e-12);
        assert!(!equivalent(&BoundaryPair::dirichlet(1), &BoundaryPair::neumann(1)).unwrap().equivalent);
    }

    #[test]
    fn omega_on_finite_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = random::system(1, 6, 0.3, &mut rng);
        let lam0 = c(0.4, 1.1);
        let o = build_omega(&sys, lam0, None, 1e-6).unwrap();
        assert_eq!(o.p(), 4);
        assert_eq!(o.rank_omega, 2);
        assert_eq!(o.rank_omega12, 2);
        assert_eq!(o.rank_leading, 2);
        // the off-diagonal block is constant in k, so it matches the initial values
        let p = &o.basis_initial;
        let expected = p.columns(0, 2).adjoint() * j_left(&p.columns(2, 2).into_owned());
        assert!((o.block(1, 2) - expected).norm() < 1e-10);
        assert_eq!(o.arrangement.len(), 2);
    }

    #[test]
    fn omega_refuses_limit_point() {
        let sys = from_sturm_liouville(&SturmLiouvilleData::inverse_square_weight()).unwrap();
        assert!(matches!(build_omega(&sys, c(0.0, 1.0), Some(1000), 1e-3), Err(Error::NotCertified(_))));
    }

    #[test]
    fn upsilon_identity_basis() {
        let sys = sl(4);
        let theta = solve_ivp(&sys, c(0.5, 0.0), 0, &eye(2), None, None).unwrap();
        let u = build_upsilon(&sys, 0.5, &theta).unwrap();
        assert!((u.at_start - canonical_skew(1)).norm() == 0.0);
        assert!(u.agreement < 1e-12);
    }

    #[test]
    fn krein_for_unit_shears() {
        let sys = shear(&[1.0; 4]);
        let k = krein_von_neumann(&sys).unwrap();
        assert!((k.g.clone() - from_real_rows(2, 2, &[1.0, 4.0, 0.0, 1.0])).norm() < 1e-14);
        assert_eq!(k.branch, KreinBranch::BNonzero);
        match &k.form {
            ExtensionForm::Coupled { r, beta } => {
                assert_eq!(*beta, 0.0);
                assert!((r - from_real_rows(2, 2, &[1.0, 4.0, 0.0, 1.0])).norm() < 1e-14);
            }
            other => panic!("{:?}", other),
        }
        for z in &k.kernel {
            let m = membership(&sys, &k.pair, ExtensionSetting::Finite, z).unwrap();
            assert!(m.member && m.boundary_residual <= 1e-10);
        }
        let pos = k.positivity.unwrap();
        assert!(pos.min_ratio > 0.0 && !pos.certified);
    }

    #[test]
    fn krein_zero_b_branch() {
        let s = from_real_rows(2, 2, &[2.0, 0.0, 0.5, 0.5]);
        let sys = SymplecticSystem::from_matrices(vec![s; 3], vec![from_real_rows(2, 2, &[1., 0., 0., 0.]); 3]).unwrap();
        let k = krein_von_neumann(&sys).unwrap();
        assert_eq!(k.branch, KreinBranch::BZero);
        match &k.form {
            ExtensionForm::Coupled { beta, .. } => assert_eq!(*beta, 0.0),
            other => panic!("{:?}", other),
        }
        let v = validate_extension(&sys, &k.form.to_pair().unwrap(), ExtensionSetting::Finite).unwrap();
        assert!(v.self_adjoint);
    }

    #[test]
    fn gkn_examples() {
        let sys = sl(4);
        let e1 = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let single = patching_bvp(&sys, 0, 4, &e1, &CMatrix::zeros(2, 1)).unwrap();
        let r = verify_gkn_set(&sys, &[single.z.clone()]).unwrap();
        assert!(r.passed);
        let set: Vec<Trajectory> = canonical_gkn_set(&sys, &BoundaryPair::periodic(1)).unwrap().into_iter().map(|p| p.z).collect();
        assert!(verify_gkn_set(&sys, &set).unwrap().passed);
        let dup = vec![set[0].clone(), set[0].clone()];
        let r = verify_gkn_set(&sys, &dup).unwrap();
        assert!(!r.independent && !r.passed);
    }

    #[test]
    fn membership_detects_violation() {
        let sys = sl(4);
        let z = Trajectory::from_values(vec![CMatrix::zeros(2, 1); 6]).unwrap();
        assert!(membership(&sys, &BoundaryPair::dirichlet(1), ExtensionSetting::Finite, &z).unwrap().member);
        let a = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let p = patching_bvp(&sys, 0, 4, &a, &CMatrix::zeros(2, 1)).unwrap();
        let m = membership(&sys, &BoundaryPair::dirichlet(1), ExtensionSetting::Finite, &p.z).unwrap();
        assert!(!m.member && m.boundary_residual > 0.5);
    }
}
