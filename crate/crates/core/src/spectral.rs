//! Eigenvalues of finite-interval boundary value problems through the exact polynomial
//! transfer matrix `Π(λ) = 𝕊_0(λ) ⋯ 𝕊_N(λ)`, for which `ẑ_0 = Π(λ) ẑ_{N+1}`.

use std::f64::consts::PI;

use nalgebra::Schur;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::extensions::{validate_extension, BoundaryPair, ExtensionSetting, ExtensionValidation};
use crate::linalg::{self, max_abs, norm2};
use crate::primitives::{c, semi_inner, CMatrix, Trajectory, C64};
use crate::solver::recursion_residual;
use crate::system::{lambda_matrix, SymplecticSystem};

/// Above this many coefficients the determinant is fitted from samples instead of expanded.
pub const EXACT_LIMIT: usize = 50;
/// Roots closer than `CLUSTER_TOL · (1 + |λ|)` are reported as one eigenvalue.
pub const CLUSTER_TOL: f64 = 1e-7;
const TRIM_TOL: f64 = 1e-12;
const NULL_TOL: f64 = 1e-6;
const POLISH_STEPS: usize = 8;
const ABERTH_ITERATIONS: usize = 200;
/// Trailing coefficients within this many rounding units of their term size are dropped.
const ROUNDING_FACTOR: f64 = 4.0;
/// Largest relative move allowed while polishing a root.
const POLISH_REACH: f64 = 1e-3;
const ROOT_CHECK: f64 = 1e-8;

/// Complex polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(a: C64) -> Self {
        Poly { coeffs: vec![a] }
    }

    /// Index of the highest stored coefficient (trailing zeros are not trimmed).
    pub fn len_degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(j, &a)| a * j as f64).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly { coeffs: vec![] };
        }
        let mut out = vec![c(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: C64) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), c(0.0, 0.0));
        }
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// `Σ_j λ^j C_j` with square matrix coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    pub coeffs: Vec<CMatrix>,
}

impl PolyMatrix {
    pub fn size(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: C64) -> CMatrix {
        let n = self.size();
        self.coeffs.iter().rev().fold(CMatrix::zeros(n, n), |acc, m| acc * x + m)
    }

    pub fn entry(&self, i: usize, j: usize) -> Poly {
        Poly::new(self.coeffs.iter().map(|m| m[(i, j)]).collect())
    }
}

/// Exact coefficients of `Π(λ)` by multiplying out `𝕊_k(λ) = S_k + λ V_k`, accumulated in
/// double-double arithmetic and rounded once at the end.
pub fn transfer_poly(sys: &SymplecticSystem) -> Result<PolyMatrix> {
    Ok(PolyMatrix {
        coeffs: transfer_dd(sys)?.iter().map(DdMat::round).collect(),
    })
}

/// Complex double-double number.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    re: TwoFloat,
    im: TwoFloat,
}

impl Dd {
    fn zero() -> Self {
        Dd::from(c(0.0, 0.0))
    }

    fn round(self) -> C64 {
        c(f64::from(self.re), f64::from(self.im))
    }
}

impl From<C64> for Dd {
    fn from(z: C64) -> Self {
        Dd { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        Dd { re: self.re + o.re, im: self.im + o.im }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        Dd { re: self.re - o.re, im: self.im - o.im }
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        Dd {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

/// Square double-double matrix, row major.
#[derive(Debug, Clone)]
struct DdMat {
    n: usize,
    data: Vec<Dd>,
}

impl DdMat {
    fn zeros(n: usize) -> Self {
        DdMat { n, data: vec![Dd::zero(); n * n] }
    }

    fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        DdMat { n, data: (0..n * n).map(|i| Dd::from(m[(i / n, i % n)])).collect() }
    }

    fn at(&self, i: usize, j: usize) -> Dd {
        self.data[i * self.n + j]
    }

    fn mul(&self, o: &DdMat) -> DdMat {
        let n = self.n;
        let mut out = DdMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = (0..n).fold(Dd::zero(), |acc, l| acc + self.at(i, l) * o.at(l, j));
            }
        }
        out
    }

    fn add_assign(&mut self, o: &DdMat) {
        for (a, &b) in self.data.iter_mut().zip(&o.data) {
            *a = *a + b;
        }
    }

    fn round(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, j| self.at(i, j).round())
    }
}

/// `V_k = −J Ψ_k S_k` with the product formed in double-double; `J` only permutes and negates.
fn v_dd(sys: &SymplecticSystem, k: usize) -> Result<DdMat> {
    let ps = DdMat::from_matrix(sys.psi(k)?.as_ref()).mul(&DdMat::from_matrix(sys.s(k)?.as_ref()));
    let (n, d) = (sys.n(), sys.dim());
    let mut v = DdMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            v.data[i * d + j] = if i < n { Dd::zero() - ps.at(i + n, j) } else { ps.at(i - n, j) };
        }
    }
    Ok(v)
}

fn transfer_dd(sys: &SymplecticSystem) -> Result<Vec<DdMat>> {
    let n_upper = finite_upper(sys)?;
    let dim = sys.dim();
    let mut eye = DdMat::zeros(dim);
    for i in 0..dim {
        eye.data[i * dim + i] = Dd::from(c(1.0, 0.0));
    }
    let mut coeffs = vec![eye];
    for k in 0..=n_upper {
        let s = DdMat::from_matrix(sys.s(k)?.as_ref());
        let v = v_dd(sys, k)?;
        let mut next = vec![DdMat::zeros(dim); coeffs.len() + 1];
        for (j, cj) in coeffs.iter().enumerate() {
            next[j].add_assign(&cj.mul(&s));
            next[j + 1].add_assign(&cj.mul(&v));
        }
        coeffs = next;
    }
    Ok(coeffs)
}

/// The same product over entrywise absolute values: a bound on the size of every term that
/// entered each coefficient.
fn transfer_magnitudes(sys: &SymplecticSystem) -> Result<PolyMatrix> {
    let n_upper = finite_upper(sys)?;
    let dim = sys.dim();
    let mut coeffs = vec![CMatrix::identity(dim, dim)];
    for k in 0..=n_upper {
        let s = abs_entries(sys.s(k)?.as_ref());
        let v = abs_entries(&sys.v(k)?);
        let mut next = vec![CMatrix::zeros(dim, dim); coeffs.len() + 1];
        for (j, cj) in coeffs.iter().enumerate() {
            next[j] += cj * &s;
            next[j + 1] += cj * &v;
        }
        coeffs = next;
    }
    Ok(PolyMatrix { coeffs })
}

fn abs_entries(m: &CMatrix) -> CMatrix {
    m.map(|x| c(x.norm(), 0.0))
}

fn finite_upper(sys: &SymplecticSystem) -> Result<usize> {
    sys.interval()
        .n_upper()
        .ok_or_else(|| Error::Unsupported("spectral computation needs a finite interval".into()))
}

fn check_pair(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<()> {
    let dim = sys.dim();
    if pair.m.shape() != (dim, dim) || pair.l.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch(format!("M and L must be {}x{}", dim, dim)));
    }
    Ok(())
}

/// Determinant of a polynomial matrix by Laplace expansion over column subsets.
pub fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let entries: Vec<Vec<Vec<C64>>> = m.iter().map(|row| row.iter().map(|p| p.coeffs.clone()).collect()).collect();
    Poly::new(expand(&entries, true, c(0.0, 0.0), c(1.0, 0.0)))
}

/// Laplace expansion of a matrix of coefficient lists; unsigned, it gives the permanent.
fn expand<T>(m: &[Vec<Vec<T>>], signed: bool, zero: T, one: T) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
{
    let size = m.len();
    let mut dp: Vec<Option<Vec<T>>> = vec![None; 1 << size];
    dp[0] = Some(vec![one]);
    for mask in 0usize..(1 << size) {
        let Some(cur) = dp[mask].take() else { continue };
        let row = mask.count_ones() as usize;
        if row == size {
            dp[mask] = Some(cur);
            continue;
        }
        for col in 0..size {
            if mask & (1 << col) != 0 {
                continue;
            }
            let negate = signed && (mask >> col).count_ones() % 2 == 1;
            let entry = &m[row][col];
            if entry.is_empty() || cur.is_empty() {
                continue;
            }
            let slot = dp[mask | (1 << col)].get_or_insert_with(Vec::new);
            if slot.len() < cur.len() + entry.len() - 1 {
                slot.resize(cur.len() + entry.len() - 1, zero);
            }
            for (i, &a) in cur.iter().enumerate() {
                for (j, &b) in entry.iter().enumerate() {
                    slot[i + j] = if negate { slot[i + j] - a * b } else { slot[i + j] + a * b };
                }
            }
        }
    }
    dp[(1 << size) - 1].take().unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetMethod {
    /// Monomial coefficients from the exact polynomial product.
    Exact,
    /// Piecewise Chebyshev interpolants of the determinant divided by the product of the row
    /// norms of `M Π(λ) − L`, on the real window `[lo, hi]`; only real eigenvalues inside the
    /// window are searched.
    ChebyshevWindow { lo: f64, hi: f64 },
}

/// Chebyshev series in `x = (2λ − lo − hi)/(hi − lo)` on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<C64>,
}

impl ChebPiece {
    fn local(&self, lam: C64) -> C64 {
        (lam * 2.0 - self.lo - self.hi) / (self.hi - self.lo)
    }
}

/// `det(M Π(λ) − L)` as monomial coefficients (`Exact`) or Chebyshev pieces
/// (`ChebyshevWindow`), negligible trailing terms removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub coeffs: Vec<C64>,
    pub pieces: Vec<ChebPiece>,
    pub degree_bound: usize,
    pub identically_zero: bool,
    pub method: DetMethod,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Value at `λ`; for Chebyshev pieces the piece containing `Re λ` is used.
    pub fn eval(&self, lam: C64) -> C64 {
        match self.method {
            DetMethod::Exact => Poly::new(self.coeffs.clone()).eval(lam),
            DetMethod::ChebyshevWindow { .. } => {
                let piece = self
                    .pieces
                    .iter()
                    .find(|p| lam.re <= p.hi)
                    .or(self.pieces.last())
                    .expect("window has pieces");
                clenshaw(&piece.coeffs, piece.local(lam))
            }
        }
    }

    pub fn roots(&self) -> Vec<C64> {
        match self.method {
            DetMethod::Exact => poly_roots(&Poly::new(self.coeffs.clone())),
            DetMethod::ChebyshevWindow { .. } => {
                let mut out: Vec<(f64, usize)> = Vec::new();
                for (i, p) in self.pieces.iter().enumerate() {
                    for x in colleague_roots(&p.coeffs) {
                        if x.im.abs() <= 1e-6 && x.re.abs() <= 1.0 + 1e-9 {
                            out.push((0.5 * (p.lo + p.hi) + 0.5 * (p.hi - p.lo) * x.re, i));
                        }
                    }
                }
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut kept: Vec<(f64, usize)> = Vec::new();
                for (r, i) in out {
                    let dup = kept
                        .iter()
                        .rev()
                        .take_while(|(q, _)| r - q <= 1e-9 * (1.0 + r.abs()))
                        .any(|(_, j)| *j != i);
                    if !dup {
                        kept.push((r, i));
                    }
                }
                kept.into_iter().map(|(r, _)| c(r, 0.0)).collect()
            }
        }
    }
}

fn clenshaw(coeffs: &[C64], x: C64) -> C64 {
    let (mut b1, mut b2) = (c(0.0, 0.0), c(0.0, 0.0));
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + x * b1 * 2.0 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(c(0.0, 0.0)) + x * b1 - b2
}

/// Drop trailing coefficients whose contribution on `|λ| = radius` is below `1e-12 · scale`.
fn trim(coeffs: &mut Vec<C64>, scale: f64, radius: f64) -> bool {
    let tol = TRIM_TOL * scale;
    while let Some(a) = coeffs.last() {
        if a.norm() * radius.powi(coeffs.len() as i32 - 1) > tol {
            break;
        }
        coeffs.pop();
    }
    coeffs.is_empty()
}

/// Exact coefficients for up to `EXACT_LIMIT` steps; beyond that, Chebyshev pieces on a real
/// window reaching past the roots of the exact expansion.
pub fn characteristic_det(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<CharPoly> {
    let exact = exact_det(sys, pair)?;
    if exact.identically_zero || finite_upper(sys)? + 1 <= EXACT_LIMIT {
        return Ok(exact);
    }
    let reach = exact.roots().iter().map(|r| r.norm()).fold(0.0, f64::max);
    let r = 1.5 * reach.max(1.0);
    chebyshev_det(sys, pair, -r, r)
}

/// Exact monomial coefficients regardless of the interval length.
pub fn exact_det(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<CharPoly> {
    check_pair(sys, pair)?;
    let n_upper = finite_upper(sys)?;
    let dim = sys.dim();
    let m = DdMat::from_matrix(&pair.m);
    let mut d: Vec<DdMat> = transfer_dd(sys)?.iter().map(|cj| m.mul(cj)).collect();
    for (a, &l) in d[0].data.iter_mut().zip(&DdMat::from_matrix(&pair.l).data) {
        *a = *a - l;
    }
    let entries: Vec<Vec<Vec<Dd>>> = (0..dim)
        .map(|i| (0..dim).map(|j| d.iter().map(|cj| cj.at(i, j)).collect()).collect())
        .collect();
    let mut coeffs: Vec<C64> = expand(&entries, true, Dd::zero(), Dd::from(c(1.0, 0.0))).into_iter().map(Dd::round).collect();
    let identically_zero = vanishes_identically(sys, pair)?;
    if !identically_zero {
        let top = coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
        trim(&mut coeffs, top, 1.0);
        let bounds = rounding_bounds(sys, pair)?;
        let ops = (dim * (n_upper + 2)) as f64;
        while let Some(a) = coeffs.last() {
            let j = coeffs.len() - 1;
            if coeffs.len() == 1 || a.norm() > ROUNDING_FACTOR * ops * f64::EPSILON * bounds.get(j).copied().unwrap_or(0.0) {
                break;
            }
            coeffs.pop();
        }
    }
    Ok(CharPoly {
        coeffs,
        pieces: vec![],
        degree_bound: dim * (n_upper + 1),
        identically_zero,
        method: DetMethod::Exact,
    })
}

/// Size of the terms summed into each determinant coefficient: the permanent of
/// `|M| |Π|(λ) + |L|` with `|Π|` the product of entrywise absolute values.
fn rounding_bounds(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<Vec<f64>> {
    let dim = sys.dim();
    let pi = transfer_magnitudes(sys)?;
    let (am, al) = (abs_entries(&pair.m), abs_entries(&pair.l));
    let mut d: Vec<CMatrix> = pi.coeffs.iter().map(|cj| &am * cj).collect();
    d[0] += al;
    let entries: Vec<Vec<Vec<C64>>> = (0..dim)
        .map(|i| (0..dim).map(|j| d.iter().map(|m| m[(i, j)]).collect()).collect())
        .collect();
    Ok(expand(&entries, false, c(0.0, 0.0), c(1.0, 0.0)).iter().map(|a| a.norm()).collect())
}

const PIECE_POINTS: usize = 33;
const MAX_SPLIT_DEPTH: usize = 24;

fn cheb_fit(sys: &SymplecticSystem, pair: &BoundaryPair, lo: f64, hi: f64) -> Result<Vec<C64>> {
    let m = PIECE_POINTS;
    let theta = |i: usize| PI * (i as f64 + 0.5) / m as f64;
    let samples: Vec<C64> = (0..m)
        .map(|i| normalized_det(sys, pair, 0.5 * (lo + hi) + 0.5 * (hi - lo) * theta(i).cos()))
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|j| {
            let sum: C64 = samples.iter().enumerate().map(|(i, &f)| f * (j as f64 * theta(i)).cos()).sum();
            sum * (if j == 0 { 1.0 } else { 2.0 } / m as f64)
        })
        .collect())
}

/// `det(M Π(λ) − L)` divided by the product of row norms: same real roots, bounded by one,
/// and smooth on the real axis.
fn normalized_det(sys: &SymplecticSystem, pair: &BoundaryPair, lam: f64) -> Result<C64> {
    let a = char_matrix(sys, pair, c(lam, 0.0))?;
    Ok(linalg::det(&a) / hadamard_bound(&a).max(1e-300))
}

fn split(sys: &SymplecticSystem, pair: &BoundaryPair, lo: f64, hi: f64, depth: usize, out: &mut Vec<ChebPiece>) -> Result<()> {
    let mut coeffs = cheb_fit(sys, pair, lo, hi)?;
    let top = coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let tail = coeffs[PIECE_POINTS - 3..].iter().map(|a| a.norm()).fold(0.0, f64::max);
    // the normalized determinant is bounded by one, so rounding puts an absolute floor on the tail
    if tail <= (1e-13 * top).max(1e-12) || depth >= MAX_SPLIT_DEPTH {
        trim(&mut coeffs, top.max(1e-300), 1.0);
        out.push(ChebPiece { lo, hi, coeffs });
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    split(sys, pair, lo, mid, depth + 1, out)?;
    split(sys, pair, mid, hi, depth + 1, out)
}

/// Piecewise Chebyshev interpolation of the normalized determinant on `[lo, hi]`, splitting until
/// the coefficients of every piece decay.
pub fn chebyshev_det(sys: &SymplecticSystem, pair: &BoundaryPair, lo: f64, hi: f64) -> Result<CharPoly> {
    check_pair(sys, pair)?;
    let n_upper = finite_upper(sys)?;
    if !(lo < hi) {
        return Err(Error::InvalidInput("Chebyshev window needs lo < hi".into()));
    }
    let identically_zero = vanishes_identically(sys, pair)?;
    let mut pieces = Vec::new();
    if !identically_zero {
        split(sys, pair, lo, hi, 0, &mut pieces)?;
    }
    Ok(CharPoly {
        coeffs: vec![],
        pieces,
        degree_bound: sys.dim() * (n_upper + 1),
        identically_zero,
        method: DetMethod::ChebyshevWindow { lo, hi },
    })
}

/// Product of the row norms, an upper bound for `|det a|`.
fn hadamard_bound(a: &CMatrix) -> f64 {
    a.row_iter().map(|r| r.norm()).product()
}

/// The determinant is treated as identically zero when it is negligible against the product
/// of the row norms at a few fixed non-real test points.
fn vanishes_identically(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<bool> {
    for lam in [c(0.37, 0.61), c(-1.3, 0.2), c(2.1, -0.9)] {
        let a = char_matrix(sys, pair, lam)?;
        if linalg::det(&a).norm() > TRIM_TOL * hadamard_bound(&a) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `det(M Π(λ) − L)` from the product of numeric `𝕊_k(λ)`.
pub fn numeric_det(sys: &SymplecticSystem, pair: &BoundaryPair, lam: C64) -> Result<C64> {
    Ok(linalg::det(&char_matrix(sys, pair, lam)?))
}

fn char_matrix(sys: &SymplecticSystem, pair: &BoundaryPair, lam: C64) -> Result<CMatrix> {
    let n_upper = finite_upper(sys)?;
    let dim = sys.dim();
    let mut p = CMatrix::identity(dim, dim);
    for k in 0..=n_upper {
        p *= lambda_matrix(sys, lam, k)?;
    }
    Ok(&pair.m * p - &pair.l)
}

/// Diagonal similarity balancing.
fn balance(a: &mut CMatrix) {
    let n = a.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let (mut col, mut row) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].norm();
                    row += a[(i, j)].norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = col + row;
            while col < row / 2.0 {
                col *= 2.0;
                row /= 2.0;
                f *= 2.0;
            }
            while col >= row * 2.0 {
                col /= 2.0;
                row *= 2.0;
                f /= 2.0;
            }
            if (col + row) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn schur_diagonal(mut a: CMatrix) -> Vec<C64> {
    balance(&mut a);
    let d = a.nrows();
    let (_, t) = Schur::new(a).unpack();
    (0..d).map(|i| t[(i, i)]).collect()
}

/// Roots from the eigenvalues of the balanced companion matrix.
pub fn poly_roots(p: &Poly) -> Vec<C64> {
    let d = p.len_degree();
    if d == 0 {
        return vec![];
    }
    let lead = p.coeffs[d];
    let mut comp = CMatrix::zeros(d, d);
    for j in 0..d {
        comp[(0, j)] = -p.coeffs[d - 1 - j] / lead;
    }
    for i in 1..d {
        comp[(i, i - 1)] = c(1.0, 0.0);
    }
    schur_diagonal(comp)
}

/// Roots of a Chebyshev series from the eigenvalues of its colleague matrix.
pub fn colleague_roots(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return vec![];
    }
    if d == 1 {
        return vec![-coeffs[0] / coeffs[1]];
    }
    let mut m = CMatrix::zeros(d, d);
    m[(0, 1)] = c(1.0, 0.0);
    for i in 1..d - 1 {
        m[(i, i - 1)] = c(0.5, 0.0);
        m[(i, i + 1)] = c(0.5, 0.0);
    }
    m[(d - 1, d - 2)] = c(0.5, 0.0);
    let lead = coeffs[d] * 2.0;
    for j in 0..d {
        m[(d - 1, j)] -= coeffs[j] / lead;
    }
    schur_diagonal(m)
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: C64,
    /// Number of clustered roots of the characteristic determinant.
    pub multiplicity: usize,
    /// Boundary vectors `ẑ_{N+1}` spanning `ker(M Π(λ) − L)` (columns, not normalized).
    pub vectors: CMatrix,
    pub eigenfunctions: Vec<Trajectory>,
    /// `|det|` at the reported eigenvalue.
    pub det_value: f64,
    /// Largest `‖M ẑ_0 − L ẑ_{N+1}‖ / max |z|` over the eigenfunctions.
    pub boundary_residual: f64,
    pub recursion_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted by real part, then imaginary part.
    pub eigenpairs: Vec<Eigenpair>,
    pub char_poly: CharPoly,
    pub validation: ExtensionValidation,
    pub max_imag: f64,
    /// Normalized Gram matrix `⟨z_i, z_j⟩_Ψ / (‖z_i‖_Ψ ‖z_j‖_Ψ)` of all eigenfunctions.
    pub orthogonality: CMatrix,
    /// Largest off-diagonal entry of `orthogonality` between distinct eigenvalues.
    pub orthogonality_defect: f64,
    /// Largest eigenfunction residual, boundary or recursion.
    pub max_residual: f64,
    /// Candidate roots discarded because the determinant or the pencil is not singular there.
    pub rejected_roots: usize,
}

impl Spectrum {
    pub fn self_adjoint(&self) -> bool {
        self.validation.self_adjoint
    }

    /// Eigenvalues repeated by multiplicity.
    pub fn values(&self) -> Vec<C64> {
        self.eigenpairs.iter().flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity)).collect()
    }
}

fn cluster(mut roots: Vec<C64>) -> Vec<(C64, usize)> {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![roots[i]];
        used[i] = true;
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() <= CLUSTER_TOL * (1.0 + roots[i].norm()) {
                used[j] = true;
                members.push(roots[j]);
            }
        }
        let mean = members.iter().sum::<C64>() / members.len() as f64;
        out.push((mean, members.len()));
    }
    out
}

/// The block bidiagonal pencil `A(λ) = A_0 + λ A_1` acting on `(z_0, …, z_{N+1})` with rows
/// `z_k − 𝕊_k(λ) z_{k+1}` and `M z_0 − L z_{N+1}`. Its determinant is `± det(M Π(λ) − L)` but
/// its entries stay of size `|λ|`, so LU on it is not swamped by the growth of `Π`.
fn block_pencil(sys: &SymplecticSystem, pair: &BoundaryPair, lam: C64) -> Result<(CMatrix, CMatrix)> {
    let n_upper = finite_upper(sys)?;
    let d = sys.dim();
    let size = d * (n_upper + 2);
    let mut a = CMatrix::zeros(size, size);
    let mut a1 = CMatrix::zeros(size, size);
    for k in 0..=n_upper {
        let v = sys.v(k)?;
        a.view_mut((k * d, k * d), (d, d)).copy_from(&CMatrix::identity(d, d));
        a.view_mut((k * d, (k + 1) * d), (d, d)).copy_from(&(-lambda_matrix(sys, lam, k)?));
        a1.view_mut((k * d, (k + 1) * d), (d, d)).copy_from(&(-v));
    }
    let last = (n_upper + 1) * d;
    a.view_mut((last, 0), (d, d)).copy_from(&pair.m);
    a.view_mut((last, last), (d, d)).copy_from(&(-&pair.l));
    Ok((a, a1))
}

/// `d/dλ log det A(λ) = tr(A(λ)^{-1} A_1)`; `None` when `A(λ)` is numerically singular.
fn log_derivative(sys: &SymplecticSystem, pair: &BoundaryPair, x: C64) -> Result<Option<C64>> {
    let (a, a1) = block_pencil(sys, pair, x)?;
    let tr = a.lu().solve(&a1).map(|sol| sol.trace());
    Ok(tr.filter(|t| t.is_finite() && t.norm() > 0.0))
}

/// Aberth–Ehrlich iteration on `det A(λ)` started from `guesses`, one per root. Each update
/// `w_i = 1 / (f'/f(λ_i) − Σ_{j≠i} 1/(λ_i − λ_j))` keeps approximations from collapsing onto
/// the same root, so inaccurate starting values are still led to distinct roots.
fn aberth(sys: &SymplecticSystem, pair: &BoundaryPair, guesses: Vec<C64>) -> Result<Vec<C64>> {
    let mut z = guesses;
    for i in 1..z.len() {
        // separate coincident starting values
        while z[..i].iter().any(|&y| (y - z[i]).norm() <= 1e-12 * (1.0 + y.norm())) {
            let bump = c(1e-8, 1e-8) * (1.0 + z[i].norm());
            z[i] += bump;
        }
    }
    let mut done = vec![false; z.len()];
    for _ in 0..ABERTH_ITERATIONS {
        for i in 0..z.len() {
            if done[i] {
                continue;
            }
            let Some(ld) = log_derivative(sys, pair, z[i])? else {
                done[i] = true;
                continue;
            };
            let repel: C64 = (0..z.len()).filter(|&j| j != i).map(|j| c(1.0, 0.0) / (z[i] - z[j])).sum();
            let w = c(1.0, 0.0) / (ld - repel);
            if !w.is_finite() {
                done[i] = true;
                continue;
            }
            z[i] -= w;
            done[i] = w.norm() <= 1e-15 * (1.0 + z[i].norm());
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(z)
}

/// Newton iteration `λ ← λ − 1/tr(A(λ)^{-1} A_1)` on the block pencil for a root of the
/// Chebyshev fit, stopped when the steps stop shrinking. Clustered roots are left alone.
fn polish(sys: &SymplecticSystem, pair: &BoundaryPair, lam: C64, multiplicity: usize) -> Result<C64> {
    if multiplicity > 1 {
        return Ok(lam);
    }
    let mut x = lam;
    let mut last_step = f64::INFINITY;
    for _ in 0..POLISH_STEPS {
        let Some(ld) = log_derivative(sys, pair, x)? else { break };
        let step = -c(1.0, 0.0) / ld;
        if step.norm() >= last_step {
            break;
        }
        x += step;
        last_step = step.norm();
        if last_step <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    Ok(if (x - lam).norm() > POLISH_REACH * (1.0 + lam.norm()) { lam } else { x })
}

/// Eigenvalues of the boundary value problem `(M Π(λ) − L) ẑ_{N+1} = 0`, each re-verified by
/// rebuilding the eigenfunction as a null vector of the block pencil.
pub fn eigenvalues(sys: &SymplecticSystem, pair: &BoundaryPair) -> Result<Spectrum> {
    let cp = characteristic_det(sys, pair)?;
    if cp.identically_zero {
        return Err(Error::Unsupported(
            "det(M Pi(lambda) - L) vanishes identically; the relation is multivalued and needs a relation-theoretic treatment".into(),
        ));
    }
    let validation = validate_extension(sys, pair, ExtensionSetting::Finite)?;
    let n_upper = finite_upper(sys)?;
    let mut eigenpairs = Vec::new();
    let mut rejected_roots = 0;
    let exact = cp.method == DetMethod::Exact;
    let roots = if exact { aberth(sys, pair, cp.roots())? } else { cp.roots() };
    for (root, mult) in cluster(roots) {
        let lambda = if exact { root } else { polish(sys, pair, root, mult)? };
        let a = char_matrix(sys, pair, lambda)?;
        let det_value = linalg::det(&a).norm();
        if !exact && det_value > ROOT_CHECK * hadamard_bound(&a) {
            rejected_roots += 1;
            continue;
        }
        let (pencil, _) = block_pencil(sys, pair, lambda)?;
        let (cand, sv) = linalg::smallest_right_singular_vectors(&pencil, mult);
        let top = norm2(&pencil);
        if sv[0] > NULL_TOL * top {
            rejected_roots += 1;
            continue;
        }
        let keep = sv.iter().enumerate().filter(|(i, s)| *i == 0 || **s <= NULL_TOL * top).count();
        let dim = sys.dim();
        let mut vectors = CMatrix::zeros(dim, keep);
        let mut eigenfunctions = Vec::new();
        let (mut bres, mut rres): (f64, f64) = (0.0, 0.0);
        for j in 0..keep {
            let col = linalg::remove_phase(&cand.columns(j, 1).into_owned());
            let values = (0..n_upper + 2).map(|k| col.rows(k * dim, dim).into_owned()).collect();
            let z = Trajectory::new(0, values)?;
            vectors.set_column(j, &z.get(n_upper + 1)?.column(0));
            let defect = &pair.m * z.get(0)? - &pair.l * z.get(n_upper + 1)?;
            bres = bres.max(max_abs(&defect) / z.max_abs().max(1e-300));
            rres = rres.max(recursion_residual(sys, lambda, &z, None, 0, n_upper + 1)?);
            eigenfunctions.push(z);
        }
        eigenpairs.push(Eigenpair {
            lambda,
            multiplicity: mult,
            vectors,
            eigenfunctions,
            det_value,
            boundary_residual: bres,
            recursion_residual: rres,
        });
    }
    eigenpairs.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
    let funcs: Vec<(usize, &Trajectory)> = eigenpairs
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.eigenfunctions.iter().map(move |z| (i, z)))
        .collect();
    let psi = sys.psi_seq();
    let norms: Vec<f64> = funcs
        .iter()
        .map(|(_, z)| semi_inner(z, z, psi, n_upper).map(|v| v.re.max(0.0).sqrt()))
        .collect::<Result<_>>()?;
    let m = funcs.len();
    let mut orthogonality = CMatrix::zeros(m, m);
    let mut orthogonality_defect: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let denom = (norms[a] * norms[b]).max(1e-300);
            let g = semi_inner(funcs[a].1, funcs[b].1, psi, n_upper)? / denom;
            orthogonality[(a, b)] = g;
            if funcs[a].0 != funcs[b].0 {
                orthogonality_defect = orthogonality_defect.max(g.norm());
            }
        }
    }
    let max_imag = eigenpairs.iter().map(|e| e.lambda.im.abs()).fold(0.0, f64::max);
    let max_residual = eigenpairs
        .iter()
        .map(|e| e.boundary_residual.max(e.recursion_residual))
        .fold(0.0, f64::max);
    Ok(Spectrum {
        eigenpairs,
        char_poly: cp,
        validation,
        max_imag,
        orthogonality,
        orthogonality_defect,
        max_residual,
        rejected_roots,
    })
}
