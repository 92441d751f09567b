//! Discrete symplectic systems `z_k = (S_k + λ V_k) z_{k+1}` with `V_k = −J Ψ_k S_k`,
//! their structural checks and the Sturm–Liouville and block builders.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::linalg::{self, blocks, hermitian_residual, min_hermitian_eigenvalue, norm2};
use crate::primitives::{c, j_left, j_right, CMatrix, DiscreteInterval, MatrixSeq, RealSeq, C64, DEFAULT_TOL};

/// Number of leading indices inspected when a coefficient property has to be checked on an
/// unbounded interval at construction time.
pub const UNBOUNDED_CHECK_WINDOW: usize = 1000;

#[derive(Debug, Clone)]
pub struct SymplecticSystem {
    n: usize,
    interval: DiscreteInterval,
    s_seq: MatrixSeq,
    psi_seq: MatrixSeq,
}

impl SymplecticSystem {
    /// Build a system from coefficient sequences. Only shapes are checked here;
    /// use [`validate_hypothesis`] for the algebraic conditions.
    pub fn new(n: usize, interval: DiscreteInterval, s_seq: MatrixSeq, psi_seq: MatrixSeq) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("half dimension n must be positive".into()));
        }
        for (name, seq) in [("S", &s_seq), ("Psi", &psi_seq)] {
            if seq.shape() != (2 * n, 2 * n) {
                return Err(Error::ShapeMismatch(format!(
                    "{} entries are {}x{}, expected {}x{}",
                    name,
                    seq.shape().0,
                    seq.shape().1,
                    2 * n,
                    2 * n
                )));
            }
            match (interval, seq.stored_range()) {
                (DiscreteInterval::Finite { n_upper }, Some((lo, hi))) => {
                    if lo != 0 || hi != n_upper + 1 {
                        return Err(Error::ShapeMismatch(format!(
                            "{} covers [{}, {}), interval needs [0, {}]",
                            name, lo, hi, n_upper
                        )));
                    }
                }
                (DiscreteInterval::Unbounded, Some(_)) => {
                    return Err(Error::InvalidInput(format!(
                        "{} must be generator-backed on an unbounded interval",
                        name
                    )))
                }
                _ => {}
            }
        }
        Ok(SymplecticSystem {
            n,
            interval,
            s_seq,
            psi_seq,
        })
    }

    /// Finite system on `[0, N]` with `N + 1 = s.len()`.
    pub fn from_matrices(s: Vec<CMatrix>, psi: Vec<CMatrix>) -> Result<Self> {
        if s.len() != psi.len() || s.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} S matrices but {} weights",
                s.len(),
                psi.len()
            )));
        }
        let n = s[0].nrows() / 2;
        let n_upper = s.len() - 1;
        Self::new(n, DiscreteInterval::finite(n_upper), MatrixSeq::from_vec(s)?, MatrixSeq::from_vec(psi)?)
    }

    pub fn unbounded(
        n: usize,
        s: impl Fn(usize) -> CMatrix + Send + Sync + 'static,
        psi: impl Fn(usize) -> CMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            n,
            DiscreteInterval::Unbounded,
            MatrixSeq::generated(2 * n, 2 * n, s),
            MatrixSeq::generated(2 * n, 2 * n, psi),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn interval(&self) -> DiscreteInterval {
        self.interval
    }

    pub fn s_seq(&self) -> &MatrixSeq {
        &self.s_seq
    }

    pub fn psi_seq(&self) -> &MatrixSeq {
        &self.psi_seq
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if self.interval.contains(k) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                what: format!("coefficient indices [0, {}]", self.interval.n_upper().unwrap_or(usize::MAX)),
            })
        }
    }

    pub fn s(&self, k: usize) -> Result<Cow<'_, CMatrix>> {
        self.check_index(k)?;
        self.s_seq.at(k)
    }

    pub fn psi(&self, k: usize) -> Result<Cow<'_, CMatrix>> {
        self.check_index(k)?;
        self.psi_seq.at(k)
    }

    /// `V_k = −J Ψ_k S_k`.
    pub fn v(&self, k: usize) -> Result<CMatrix> {
        let s = self.s(k)?;
        let psi = self.psi(k)?;
        Ok(-j_left(&(psi.as_ref() * s.as_ref())))
    }

    /// Last index of the coefficient range used for a computation: `N`, or `truncation − 1`.
    pub fn last_coefficient(&self, truncation: Option<usize>) -> Result<usize> {
        let end = self.interval.end_plus(truncation)?;
        end.checked_sub(1)
            .ok_or_else(|| Error::InvalidInput("truncation must be at least 1".into()))
    }

    /// The finite system obtained by keeping coefficients `[0, truncation − 1]`.
    pub fn truncated(&self, truncation: usize) -> Result<SymplecticSystem> {
        let last = self.last_coefficient(Some(truncation))?;
        SymplecticSystem::new(
            self.n,
            DiscreteInterval::finite(last),
            self.s_seq.materialize(0, last)?,
            self.psi_seq.materialize(0, last)?,
        )
    }
}

/// `S_k(λ) = S_k + λ V_k`.
pub fn lambda_matrix(sys: &SymplecticSystem, lam: C64, k: usize) -> Result<CMatrix> {
    let s = sys.s(k)?;
    Ok(s.as_ref() + sys.v(k)? * lam)
}

/// `S_k(λ)^{-1} = −J S_k^*(λ̄) J`.
pub fn to_forward(sys: &SymplecticSystem, lam: C64, k: usize) -> Result<CMatrix> {
    Ok(forward_from(&lambda_matrix(sys, lam.conj(), k)?))
}

/// `−J m^* J`, the inverse of a conjugate symplectic matrix.
pub fn forward_from(m: &CMatrix) -> CMatrix {
    -j_right(&j_left(&m.adjoint()))
}

/// `J S J V^* J`, which recovers `Ψ` from `(S, V)`.
pub fn reconstruct_psi(s: &CMatrix, v: &CMatrix) -> CMatrix {
    j_left(&j_right(&(s * j_left(&v.adjoint()))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// The algebraic condition being tested, written out.
    pub condition: &'static str,
    pub passed: bool,
    /// Worst residual over the inspected range (for the semidefiniteness check: the most
    /// negative eigenvalue, clipped at zero from above).
    pub worst: f64,
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Coefficient indices inspected.
    pub range: (usize, usize),
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

struct Worst {
    value: f64,
    index: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, index: None }
    }
    fn update(&mut self, v: f64, k: usize) {
        if self.index.is_none() || v > self.value || v.is_nan() {
            self.value = v;
            self.index = Some(k);
        }
    }
}

/// Check the standing hypothesis on `S_k`, `Ψ_k` and its consequences for `V_k` on every
/// coefficient index (up to `truncation − 1` for unbounded intervals).
pub fn validate_hypothesis(sys: &SymplecticSystem, truncation: Option<usize>) -> Result<ValidationReport> {
    validate_hypothesis_tol(sys, truncation, DEFAULT_TOL)
}

pub fn validate_hypothesis_tol(sys: &SymplecticSystem, truncation: Option<usize>, tol: f64) -> Result<ValidationReport> {
    let last = sys.last_coefficient(truncation)?;
    let j = crate::primitives::canonical_skew(sys.n());
    let mut symp = Worst::new();
    let mut herm = Worst::new();
    let mut iso = Worst::new();
    let mut psd = Worst::new();
    let mut vcross = Worst::new();
    let mut viso = Worst::new();
    for k in 0..=last {
        let s = sys.s(k)?;
        let psi = sys.psi(k)?;
        let s = s.as_ref();
        let psi = psi.as_ref();
        let v = -j_left(&(psi * s));
        symp.update(norm2(&(s.adjoint() * j_left(s) - &j)), k);
        herm.update(hermitian_residual(psi), k);
        iso.update(norm2(&(psi.adjoint() * j_left(psi))), k);
        psd.update((-min_hermitian_eigenvalue(psi)).max(0.0), k);
        vcross.update(hermitian_residual(&(v.adjoint() * j_left(s))), k);
        viso.update(norm2(&(v.adjoint() * j_left(&v))), k);
    }
    let mk = |name, condition, w: Worst| Check {
        name,
        condition,
        passed: w.value <= tol,
        worst: w.value,
        worst_index: w.index,
    };
    Ok(ValidationReport {
        checks: vec![
            mk("symplectic", "S_k^* J S_k = J", symp),
            mk("psi_hermitian", "Psi_k = Psi_k^*", herm),
            mk("psi_isotropic", "Psi_k^* J Psi_k = 0", iso),
            mk("psi_semidefinite", "Psi_k >= 0", psd),
            mk("v_cross_hermitian", "V_k^* J S_k Hermitian", vcross),
            mk("v_isotropic", "V_k^* J V_k = 0", viso),
        ],
        range: (0, last),
    })
}

/// Second order Sturm–Liouville data `−Δ(p_k Δy_{k−1}) + q_k y_k = λ w_k y_k`.
/// On a finite interval `p` has `N + 2` entries and `q`, `w` have `N + 1`.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleData {
    pub interval: DiscreteInterval,
    pub p: RealSeq,
    pub q: RealSeq,
    pub w: RealSeq,
}

impl SturmLiouvilleData {
    pub fn finite(p: Vec<f64>, q: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.len() != w.len() || p.len() != q.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "need |p| = N+2 and |q| = |w| = N+1, got {}, {}, {}",
                p.len(),
                q.len(),
                w.len()
            )));
        }
        let n_upper = q.len() - 1;
        Ok(SturmLiouvilleData {
            interval: DiscreteInterval::finite(n_upper),
            p: RealSeq::Values(p),
            q: RealSeq::Values(q),
            w: RealSeq::Values(w),
        })
    }

    pub fn unbounded(
        p: impl Fn(usize) -> f64 + Send + Sync + 'static,
        q: impl Fn(usize) -> f64 + Send + Sync + 'static,
        w: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SturmLiouvilleData {
            interval: DiscreteInterval::Unbounded,
            p: RealSeq::generated(p),
            q: RealSeq::generated(q),
            w: RealSeq::generated(w),
        }
    }

    /// `p ≡ −1`, `q ≡ 0`, `w_k = 1/(k+1)²` on the nonnegative integers.
    pub fn inverse_square_weight() -> Self {
        Self::unbounded(|_| -1.0, |_| 0.0, |k| 1.0 / ((k as f64 + 1.0) * (k as f64 + 1.0)))
    }

    pub fn p(&self, k: usize) -> f64 {
        self.p.get(k).expect("p index in range")
    }

    pub fn q(&self, k: usize) -> f64 {
        self.q.get(k).expect("q index in range")
    }

    pub fn w(&self, k: usize) -> f64 {
        self.w.get(k).expect("w index in range")
    }

    /// Last coefficient index checked by [`SturmLiouvilleData::validate`].
    fn check_end(&self) -> usize {
        self.interval.n_upper().unwrap_or(UNBOUNDED_CHECK_WINDOW)
    }

    /// `p_k ≠ 0`, `w_k ≥ 0` and `w` positive at two consecutive indices. Unbounded data is
    /// inspected on its first [`UNBOUNDED_CHECK_WINDOW`] indices.
    pub fn validate(&self) -> Result<()> {
        let last = self.check_end();
        for k in 0..=last + 1 {
            let p = self.p(k);
            if p == 0.0 || !p.is_finite() {
                return Err(Error::InvalidInput(format!("p_{} = {} must be finite and nonzero", k, p)));
            }
        }
        let mut consecutive = false;
        for k in 0..=last {
            let w = self.w(k);
            if w < 0.0 || !w.is_finite() || !self.q(k).is_finite() {
                return Err(Error::InvalidInput(format!("w_{} = {} must be finite and nonnegative", k, w)));
            }
            if k > 0 && w > 0.0 && self.w(k - 1) > 0.0 {
                consecutive = true;
            }
        }
        if !consecutive {
            return Err(Error::InvalidInput(
                "w must be positive at two consecutive indices".into(),
            ));
        }
        Ok(())
    }

    pub fn s_matrix(&self, k: usize) -> CMatrix {
        let p1 = self.p(k + 1);
        let q = self.q(k);
        linalg::from_real_rows(2, 2, &[1.0, -1.0 / p1, -q, 1.0 + q / p1])
    }

    pub fn psi_matrix(&self, k: usize) -> CMatrix {
        linalg::from_real_rows(2, 2, &[self.w(k), 0.0, 0.0, 0.0])
    }

    /// The same system written with `1 × 1` blocks `A = 1`, `B = −1/p_{k+1}`, `C = −q_k`,
    /// `D = 1 + q_k/p_{k+1}`, `W = w_k`.
    pub fn to_block_special(&self) -> BlockSpecialData {
        let one = |x: f64| CMatrix::from_element(1, 1, c(x, 0.0));
        let seq = |f: Box<dyn Fn(usize) -> f64 + Send + Sync>| match self.interval {
            DiscreteInterval::Finite { n_upper } => {
                MatrixSeq::from_vec((0..=n_upper).map(|k| one(f(k))).collect()).expect("nonempty")
            }
            DiscreteInterval::Unbounded => MatrixSeq::generated(1, 1, move |k| one(f(k))),
        };
        let (p, q, w) = (self.p.clone(), self.q.clone(), self.w.clone());
        let (p2, q2, p3) = (p.clone(), q.clone(), p.clone());
        BlockSpecialData {
            n: 1,
            interval: self.interval,
            a: seq(Box::new(|_| 1.0)),
            b: seq(Box::new(move |k| -1.0 / p.get(k + 1).unwrap())),
            c: seq(Box::new(move |k| -q.get(k).unwrap())),
            d: seq(Box::new(move |k| 1.0 + q2.get(k).unwrap() / p2.get(k + 1).unwrap())),
            w: seq(Box::new(move |k| w.get(k).unwrap())),
            p_hint: Some(p3),
        }
    }
}

/// Build the scalar symplectic system of a Sturm–Liouville equation:
/// `S_k = [[1, −1/p_{k+1}], [−q_k, 1 + q_k/p_{k+1}]]`, `Ψ_k = diag(w_k, 0)`.
pub fn from_sturm_liouville(data: &SturmLiouvilleData) -> Result<SymplecticSystem> {
    data.validate()?;
    match data.interval {
        DiscreteInterval::Finite { n_upper } => SymplecticSystem::from_matrices(
            (0..=n_upper).map(|k| data.s_matrix(k)).collect(),
            (0..=n_upper).map(|k| data.psi_matrix(k)).collect(),
        ),
        DiscreteInterval::Unbounded => {
            let d1 = data.clone();
            let d2 = data.clone();
            SymplecticSystem::unbounded(1, move |k| d1.s_matrix(k), move |k| d2.psi_matrix(k))
        }
    }
}

/// Block data `S_k = [[A_k, B_k], [C_k, D_k]]`, `Ψ_k = diag(W_k, 0)` with `n × n` blocks.
#[derive(Debug, Clone)]
pub struct BlockSpecialData {
    pub n: usize,
    pub interval: DiscreteInterval,
    pub a: MatrixSeq,
    pub b: MatrixSeq,
    pub c: MatrixSeq,
    pub d: MatrixSeq,
    pub w: MatrixSeq,
    /// The Sturm–Liouville `p` this data came from, if any.
    pub p_hint: Option<RealSeq>,
}

impl BlockSpecialData {
    pub fn new(n: usize, interval: DiscreteInterval, a: MatrixSeq, b: MatrixSeq, c: MatrixSeq, d: MatrixSeq, w: MatrixSeq) -> Result<Self> {
        for (name, s) in [("A", &a), ("B", &b), ("C", &c), ("D", &d), ("W", &w)] {
            if s.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!("block {} must be {}x{}", name, n, n)));
            }
        }
        Ok(BlockSpecialData {
            n,
            interval,
            a,
            b,
            c,
            d,
            w,
            p_hint: None,
        })
    }

    pub fn blocks_at(&self, k: usize) -> Result<[CMatrix; 5]> {
        Ok([
            self.a.at(k)?.into_owned(),
            self.b.at(k)?.into_owned(),
            self.c.at(k)?.into_owned(),
            self.d.at(k)?.into_owned(),
            self.w.at(k)?.into_owned(),
        ])
    }

    pub fn s_matrix(&self, k: usize) -> Result<CMatrix> {
        let [a, b, cm, d, _] = self.blocks_at(k)?;
        Ok(blocks(&a, &b, &cm, &d))
    }

    pub fn psi_matrix(&self, k: usize) -> Result<CMatrix> {
        let w = self.w.at(k)?;
        Ok(linalg::block_diag(w.as_ref(), &CMatrix::zeros(self.n, self.n)))
    }

    /// Check the block identities and `W_k = W_k^* ≥ 0` on `[0, last]`; the error names the
    /// first failing identity and index.
    pub fn check_identities(&self, last: usize, tol: f64) -> Result<()> {
        let eye = CMatrix::identity(self.n, self.n);
        for k in 0..=last {
            let [a, b, cm, d, w] = self.blocks_at(k)?;
            let tests: [(&str, f64); 8] = [
                ("A^*D - C^*B = I", norm2(&(a.adjoint() * &d - cm.adjoint() * &b - &eye))),
                ("A D^* - B C^* = I", norm2(&(&a * d.adjoint() - &b * cm.adjoint() - &eye))),
                ("A^*C Hermitian", hermitian_residual(&(a.adjoint() * &cm))),
                ("B^*D Hermitian", hermitian_residual(&(b.adjoint() * &d))),
                ("A B^* Hermitian", hermitian_residual(&(&a * b.adjoint()))),
                ("C D^* Hermitian", hermitian_residual(&(&cm * d.adjoint()))),
                ("W Hermitian", hermitian_residual(&w)),
                ("W >= 0", (-min_hermitian_eigenvalue(&w)).max(0.0)),
            ];
            if let Some((name, r)) = tests.iter().find(|(_, r)| *r > tol || r.is_nan()) {
                return Err(Error::InvalidInput(format!(
                    "block identity {} fails at k = {} (residual {:.3e})",
                    name, k, r
                )));
            }
        }
        Ok(())
    }
}

/// Build the system `S_k = [[A, B], [C, D]]`, `Ψ_k = diag(W_k, 0)` after checking the block
/// identities (on the first [`UNBOUNDED_CHECK_WINDOW`] indices for unbounded data).
pub fn from_block_special(data: &BlockSpecialData) -> Result<SymplecticSystem> {
    let last = data.interval.n_upper().unwrap_or(UNBOUNDED_CHECK_WINDOW);
    data.check_identities(last, DEFAULT_TOL)?;
    match data.interval {
        DiscreteInterval::Finite { n_upper } => SymplecticSystem::from_matrices(
            (0..=n_upper).map(|k| data.s_matrix(k)).collect::<Result<_>>()?,
            (0..=n_upper).map(|k| data.psi_matrix(k)).collect::<Result<_>>()?,
        ),
        DiscreteInterval::Unbounded => {
            let d1 = data.clone();
            let d2 = data.clone();
            SymplecticSystem::unbounded(
                data.n,
                move |k| d1.s_matrix(k).expect("generated block"),
                move |k| d2.psi_matrix(k).expect("generated block"),
            )
        }
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::primitives::canonical_skew;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lambda_matrix_is_symplectic(seed in any::<u64>(), n in 1usize..=3, n_upper in 0usize..20, re in -5.0..5.0f64, im in -5.0..5.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = random::system(n, n_upper, 0.5, &mut rng);
            prop_assert!(validate_hypothesis(&sys, None).unwrap().passed());
            let j = canonical_skew(n);
            let lam = c(re, im);
            for k in 0..=n_upper {
                let s = lambda_matrix(&sys, lam, k).unwrap();
                let sb = lambda_matrix(&sys, lam.conj(), k).unwrap();
                let scale = 1.0 + norm2(&s) * norm2(&sb);
                prop_assert!(norm2(&(sb.adjoint() * &j * &s - &j)) <= 1e-10 * scale);
                let v = sys.v(k).unwrap();
                let rebuilt = reconstruct_psi(sys.s(k).unwrap().as_ref(), &v);
                prop_assert!(norm2(&(rebuilt - sys.psi(k).unwrap().as_ref())) <= 1e-12 * (1.0 + norm2(&v) * norm2(sys.s(k).unwrap().as_ref())));
            }
        }

        #[test]
        fn sturm_liouville_systems_pass_hypothesis(seed in any::<u64>(), n_upper in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = random::sturm_liouville(n_upper, &mut rng);
            let sys = from_sturm_liouville(&data).unwrap();
            prop_assert!(validate_hypothesis(&sys, None).unwrap().passed());
        }
    }
}
