//! Intervals, matrix sequences, trajectories, the skew matrix `J`, the weighted
//! semi-inner product and the endpoint bracket.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default absolute tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The index set `[0, N+1)` (finite) or the nonnegative integers (unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscreteInterval {
    Finite { n_upper: usize },
    Unbounded,
}

impl DiscreteInterval {
    pub fn finite(n_upper: usize) -> Self {
        DiscreteInterval::Finite { n_upper }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, DiscreteInterval::Finite { .. })
    }

    pub fn n_upper(&self) -> Option<usize> {
        match self {
            DiscreteInterval::Finite { n_upper } => Some(*n_upper),
            DiscreteInterval::Unbounded => None,
        }
    }

    /// Last index of `I_Z^+`: `N+1` on a finite interval, the truncation otherwise.
    pub fn end_plus(&self, truncation: Option<usize>) -> Result<usize> {
        match (self, truncation) {
            (DiscreteInterval::Finite { n_upper }, None) => Ok(n_upper + 1),
            (DiscreteInterval::Finite { n_upper }, Some(t)) => Ok(t.min(n_upper + 1)),
            (DiscreteInterval::Unbounded, Some(t)) => Ok(t),
            (DiscreteInterval::Unbounded, None) => Err(Error::TruncationRequired),
        }
    }

    /// Whether `k` lies in `I_Z`.
    pub fn contains(&self, k: usize) -> bool {
        match self {
            DiscreteInterval::Finite { n_upper } => k <= *n_upper,
            DiscreteInterval::Unbounded => true,
        }
    }

    /// Whether `k` lies in `I_Z^+`.
    pub fn contains_plus(&self, k: usize) -> bool {
        match self {
            DiscreteInterval::Finite { n_upper } => k <= n_upper + 1,
            DiscreteInterval::Unbounded => true,
        }
    }
}

pub type MatrixGenerator = Arc<dyn Fn(usize) -> CMatrix + Send + Sync>;
pub type RealGenerator = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum SeqStorage {
    Stored { start: usize, values: Vec<CMatrix> },
    Generated(MatrixGenerator),
}

/// A sequence of equally shaped complex matrices, either materialized from a start
/// index or produced on demand by a generator.
#[derive(Clone)]
pub struct MatrixSeq {
    rows: usize,
    cols: usize,
    storage: SeqStorage,
}

impl fmt::Debug for MatrixSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.storage {
            SeqStorage::Stored { start, values } => write!(
                f,
                "MatrixSeq({}x{}, stored [{}, {}))",
                self.rows,
                self.cols,
                start,
                start + values.len()
            ),
            SeqStorage::Generated(_) => write!(f, "MatrixSeq({}x{}, generated)", self.rows, self.cols),
        }
    }
}

impl MatrixSeq {
    pub fn from_vec(values: Vec<CMatrix>) -> Result<Self> {
        Self::from_vec_at(0, values)
    }

    pub fn from_vec_at(start: usize, values: Vec<CMatrix>) -> Result<Self> {
        let first = values
            .first()
            .ok_or_else(|| Error::InvalidInput("empty matrix sequence".into()))?;
        let (rows, cols) = first.shape();
        if let Some((k, m)) = values.iter().enumerate().find(|(_, m)| m.shape() != (rows, cols)) {
            return Err(Error::ShapeMismatch(format!(
                "entry {} is {}x{}, expected {}x{}",
                start + k,
                m.nrows(),
                m.ncols(),
                rows,
                cols
            )));
        }
        Ok(MatrixSeq {
            rows,
            cols,
            storage: SeqStorage::Stored { start, values },
        })
    }

    pub fn generated(rows: usize, cols: usize, gen: impl Fn(usize) -> CMatrix + Send + Sync + 'static) -> Self {
        MatrixSeq {
            rows,
            cols,
            storage: SeqStorage::Generated(Arc::new(gen)),
        }
    }

    pub fn constant(m: CMatrix, len: usize) -> Self {
        let (rows, cols) = m.shape();
        MatrixSeq {
            rows,
            cols,
            storage: SeqStorage::Stored {
                start: 0,
                values: vec![m; len],
            },
        }
    }

    pub fn zeros(rows: usize, cols: usize, len: usize) -> Self {
        Self::constant(CMatrix::zeros(rows, cols), len)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_generated(&self) -> bool {
        matches!(self.storage, SeqStorage::Generated(_))
    }

    /// Index range `[start, end)` of a stored sequence; `None` for generators.
    pub fn stored_range(&self) -> Option<(usize, usize)> {
        match &self.storage {
            SeqStorage::Stored { start, values } => Some((*start, start + values.len())),
            SeqStorage::Generated(_) => None,
        }
    }

    pub fn at(&self, k: usize) -> Result<Cow<'_, CMatrix>> {
        match &self.storage {
            SeqStorage::Stored { start, values } => {
                if k < *start || k >= start + values.len() {
                    return Err(Error::IndexOutOfRange {
                        index: k,
                        what: format!("sequence range [{}, {})", start, start + values.len()),
                    });
                }
                Ok(Cow::Borrowed(&values[k - start]))
            }
            SeqStorage::Generated(g) => {
                let m = g(k);
                debug_assert_eq!(m.shape(), (self.rows, self.cols));
                Ok(Cow::Owned(m))
            }
        }
    }

    /// Materialize indices `[lo, hi]`.
    pub fn materialize(&self, lo: usize, hi: usize) -> Result<MatrixSeq> {
        let values = (lo..=hi).map(|k| self.at(k).map(Cow::into_owned)).collect::<Result<Vec<_>>>()?;
        MatrixSeq::from_vec_at(lo, values)
    }
}

/// A real scalar sequence (Sturm–Liouville coefficients, criterion weights).
#[derive(Clone)]
pub enum RealSeq {
    Values(Vec<f64>),
    Generated(RealGenerator),
}

impl fmt::Debug for RealSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealSeq::Values(v) => write!(f, "RealSeq({:?})", v),
            RealSeq::Generated(_) => write!(f, "RealSeq(generated)"),
        }
    }
}

impl RealSeq {
    pub fn generated(g: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        RealSeq::Generated(Arc::new(g))
    }

    pub fn constant(v: f64) -> Self {
        RealSeq::generated(move |_| v)
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        match self {
            RealSeq::Values(v) => v.get(k).copied(),
            RealSeq::Generated(g) => Some(g(k)),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            RealSeq::Values(v) => Some(v.len()),
            RealSeq::Generated(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

/// Values `z_k` of a (matrix-valued) solution on consecutive indices starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: usize,
    values: Vec<CMatrix>,
}

impl Trajectory {
    pub fn new(start: usize, values: Vec<CMatrix>) -> Result<Self> {
        let first = values
            .first()
            .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
        let shape = first.shape();
        if values.iter().any(|m| m.shape() != shape) {
            return Err(Error::ShapeMismatch("trajectory entries differ in shape".into()));
        }
        Ok(Trajectory { start, values })
    }

    /// Trajectory starting at index 0.
    pub fn from_values(values: Vec<CMatrix>) -> Result<Self> {
        Self::new(0, values)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Last index carrying a value.
    pub fn end(&self) -> usize {
        self.start + self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.values[0].ncols()
    }

    pub fn at(&self, k: usize) -> Option<&CMatrix> {
        k.checked_sub(self.start).and_then(|i| self.values.get(i))
    }

    pub fn get(&self, k: usize) -> Result<&CMatrix> {
        self.at(k).ok_or_else(|| Error::IndexOutOfRange {
            index: k,
            what: format!("trajectory range [{}, {}]", self.start, self.end()),
        })
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn into_values(self) -> Vec<CMatrix> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &CMatrix)> {
        self.values.iter().enumerate().map(move |(i, m)| (self.start + i, m))
    }

    pub fn column(&self, j: usize) -> Trajectory {
        Trajectory {
            start: self.start,
            values: self.values.iter().map(|m| m.columns(j, 1).into_owned()).collect(),
        }
    }

    /// Right-multiply every value by `b`.
    pub fn mul_right(&self, b: &CMatrix) -> Trajectory {
        Trajectory {
            start: self.start,
            values: self.values.iter().map(|m| m * b).collect(),
        }
    }

    pub fn scale(&self, a: C64) -> Trajectory {
        Trajectory {
            start: self.start,
            values: self.values.iter().map(|m| m * a).collect(),
        }
    }

    /// Entrywise sum over a common index range.
    pub fn add(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.start != other.start || self.len() != other.len() {
            return Err(Error::ShapeMismatch("trajectories cover different ranges".into()));
        }
        if self.values[0].shape() != other.values[0].shape() {
            return Err(Error::ShapeMismatch("trajectory values differ in shape".into()));
        }
        Ok(Trajectory {
            start: self.start,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.add(&other.scale(c(-1.0, 0.0)))
    }

    /// Column-wise concatenation of trajectories on a common range.
    pub fn hstack(parts: &[&Trajectory]) -> Result<Trajectory> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to stack".into()))?;
        if parts.iter().any(|t| t.start != first.start || t.len() != first.len() || t.rows() != first.rows()) {
            return Err(Error::ShapeMismatch("trajectories cover different ranges".into()));
        }
        let cols: usize = parts.iter().map(|t| t.cols()).sum();
        let values = (0..first.len())
            .map(|i| {
                let mut m = CMatrix::zeros(first.rows(), cols);
                let mut off = 0;
                for t in parts {
                    let v = &t.values[i];
                    m.columns_mut(off, v.ncols()).copy_from(v);
                    off += v.ncols();
                }
                m
            })
            .collect();
        Ok(Trajectory {
            start: first.start,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|m| m.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }
}

/// `J = [[0, I], [-I, 0]]` of size `2n`.
pub fn canonical_skew(n: usize) -> CMatrix {
    assert!(n >= 1, "canonical_skew needs n >= 1");
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = c(1.0, 0.0);
        j[(n + i, i)] = c(-1.0, 0.0);
    }
    j
}

/// `J * m` without a matrix product.
pub fn j_left(m: &CMatrix) -> CMatrix {
    let n = m.nrows() / 2;
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    out.rows_mut(0, n).copy_from(&m.rows(n, n));
    out.rows_mut(n, n).copy_from(&(-m.rows(0, n)));
    out
}

/// `m * J` without a matrix product.
pub fn j_right(m: &CMatrix) -> CMatrix {
    let n = m.ncols() / 2;
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    out.columns_mut(0, n).copy_from(&(-m.columns(n, n)));
    out.columns_mut(n, n).copy_from(&m.columns(0, n));
    out
}

/// `Σ_{k=0}^{k_max} z_k^* Ψ_k u_k` as an `m_z × m_u` matrix.
pub fn semi_inner_matrix(z: &Trajectory, u: &Trajectory, psi: &MatrixSeq, k_max: usize) -> Result<CMatrix> {
    if z.rows() != u.rows() || psi.shape() != (z.rows(), z.rows()) {
        return Err(Error::ShapeMismatch(format!(
            "z has {} rows, u has {}, weight is {}x{}",
            z.rows(),
            u.rows(),
            psi.shape().0,
            psi.shape().1
        )));
    }
    let mut acc = CMatrix::zeros(z.cols(), u.cols());
    for k in 0..=k_max {
        let zk = z.get(k)?;
        let uk = u.get(k)?;
        let pk = psi.at(k)?;
        acc += zk.adjoint() * (pk.as_ref() * uk);
    }
    Ok(acc)
}

/// `⟨z, u⟩_Ψ = Σ_{k=0}^{k_max} z_k^* Ψ_k u_k` for vector trajectories.
pub fn semi_inner(z: &Trajectory, u: &Trajectory, psi: &MatrixSeq, k_max: usize) -> Result<C64> {
    if z.cols() != 1 || u.cols() != 1 {
        return Err(Error::ShapeMismatch("semi_inner expects single-column trajectories".into()));
    }
    Ok(semi_inner_matrix(z, u, psi, k_max)?[(0, 0)])
}

/// `z_e^* J w_e − z_0^* J w_0` at the common last index `e`, as a matrix.
pub fn boundary_bracket_matrix(z: &Trajectory, w: &Trajectory) -> Result<CMatrix> {
    if z.rows() != w.rows() || z.rows() % 2 != 0 {
        return Err(Error::ShapeMismatch("bracket needs equal, even row counts".into()));
    }
    if z.start() != 0 || w.start() != 0 {
        return Err(Error::MissingEndpoint("value at index 0".into()));
    }
    if z.end() != w.end() {
        return Err(Error::MissingEndpoint(format!(
            "trajectories end at {} and {}",
            z.end(),
            w.end()
        )));
    }
    let e = z.end();
    let at = |k: usize| z.get(k).unwrap().adjoint() * j_left(w.get(k).unwrap());
    Ok(at(e) - at(0))
}

/// Scalar endpoint bracket for vector trajectories.
pub fn boundary_bracket(z: &Trajectory, w: &Trajectory) -> Result<C64> {
    if z.cols() != 1 || w.cols() != 1 {
        return Err(Error::ShapeMismatch("boundary_bracket expects single-column trajectories".into()));
    }
    Ok(boundary_bracket_matrix(z, w)?[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec2(a: f64, b: f64) -> CMatrix {
        CMatrix::from_column_slice(2, 1, &[c(a, 0.0), c(b, 0.0)])
    }

    #[test]
    fn skew_small_cases() {
        let j1 = canonical_skew(1);
        assert_eq!(j1, CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)]));
        let j2 = canonical_skew(2);
        assert!((&j2 * j2.adjoint() - CMatrix::identity(4, 4)).norm() == 0.0);
        let j3 = canonical_skew(3);
        assert!((&j3 * &j3 + CMatrix::identity(6, 6)).norm() == 0.0);
        assert_eq!(j3.adjoint(), -&j3);
    }

    #[test]
    fn j_helpers_match_products() {
        let m = CMatrix::from_fn(4, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let j = canonical_skew(2);
        assert_eq!(j_left(&m), &j * &m);
        let m2 = CMatrix::from_fn(3, 4, |i, j| c(j as f64, i as f64 * 2.0));
        assert_eq!(j_right(&m2), &m2 * &j);
    }

    #[test]
    fn semi_inner_constant_vector() {
        let z = Trajectory::from_values(vec![vec2(1., 0.); 4]).unwrap();
        let psi = MatrixSeq::constant(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1., 0.), c(0., 0.)])), 3);
        assert_eq!(semi_inner(&z, &z, &psi, 2).unwrap(), c(3.0, 0.0));
        let zero = MatrixSeq::zeros(2, 2, 3);
        assert_eq!(semi_inner(&z, &z, &zero, 2).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn semi_inner_partial_sum() {
        let z = Trajectory::from_values((0..5).map(|k| vec2(1.0 / (k as f64 + 1.0), 0.0)).collect()).unwrap();
        let psi = MatrixSeq::constant(CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]), 4);
        let v = semi_inner(&z, &z, &psi, 3).unwrap();
        assert!((v.re - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0)).abs() < 1e-15);
        assert!((v.re - 1.4236111111111112).abs() < 1e-15);
    }

    #[test]
    fn semi_inner_ignores_last_value() {
        let mut vals = vec![vec2(1., 2.); 4];
        let psi = MatrixSeq::constant(CMatrix::identity(2, 2), 3);
        let a = semi_inner(&Trajectory::from_values(vals.clone()).unwrap(), &Trajectory::from_values(vals.clone()).unwrap(), &psi, 2).unwrap();
        vals[3] = vec2(100., -7.);
        let b = semi_inner(&Trajectory::from_values(vals.clone()).unwrap(), &Trajectory::from_values(vals).unwrap(), &psi, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bracket_examples() {
        let z = Trajectory::from_values(vec![vec2(1., 3.), vec2(0.2, 0.1), vec2(1., 3.)]).unwrap();
        assert_eq!(boundary_bracket(&z, &z).unwrap(), c(0., 0.));
        let z = Trajectory::from_values(vec![vec2(1., 0.), vec2(5., 5.), vec2(0., 0.)]).unwrap();
        let w = Trajectory::from_values(vec![vec2(0., 1.), vec2(5., 5.), vec2(0., 0.)]).unwrap();
        assert_eq!(boundary_bracket(&z, &w).unwrap(), c(-1., 0.));
    }

    #[test]
    fn bracket_rejects_mismatched_ends() {
        let z = Trajectory::from_values(vec![vec2(1., 0.); 3]).unwrap();
        let w = Trajectory::from_values(vec![vec2(1., 0.); 4]).unwrap();
        assert!(matches!(boundary_bracket(&z, &w), Err(Error::MissingEndpoint(_))));
    }

    #[test]
    fn interval_index_sets() {
        let i = DiscreteInterval::finite(3);
        assert!(i.contains(3) && !i.contains(4));
        assert!(i.contains_plus(4) && !i.contains_plus(5));
        assert_eq!(i.end_plus(None).unwrap(), 4);
        assert_eq!(DiscreteInterval::Unbounded.end_plus(None), Err(Error::TruncationRequired));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vectors(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Trajectory {
        Trajectory::from_values((0..len).map(|_| random::complex_matrix(dim, 1, 1.0, rng)).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn semi_inner_is_hermitian_and_nonnegative(seed in any::<u64>(), n in 1usize..=3, n_upper in 0usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = MatrixSeq::from_vec((0..=n_upper).map(|_| random::weight(n, 1.0, &mut rng)).collect()).unwrap();
            let z = random_vectors(&mut rng, 2 * n, n_upper + 2);
            let u = random_vectors(&mut rng, 2 * n, n_upper + 2);
            let zu = semi_inner(&z, &u, &psi, n_upper).unwrap();
            let uz = semi_inner(&u, &z, &psi, n_upper).unwrap();
            prop_assert!((zu - uz.conj()).norm() <= 1e-13 * (1.0 + zu.norm()));
            let zz = semi_inner(&z, &z, &psi, n_upper).unwrap();
            prop_assert!(zz.re >= -1e-12 && zz.im.abs() <= 1e-12 * (1.0 + zz.re));
        }

        #[test]
        fn bracket_is_conjugate_linear_in_first_argument(seed in any::<u64>(), n in 1usize..=3, len in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = random_vectors(&mut rng, 2 * n, len);
            let z2 = random_vectors(&mut rng, 2 * n, len);
            let w = random_vectors(&mut rng, 2 * n, len);
            let a = random::complex_scalar(1.0, &mut rng);
            let b = random::complex_scalar(1.0, &mut rng);
            let combo = z.scale(a).add(&z2.scale(b)).unwrap();
            let lhs = boundary_bracket(&combo, &w).unwrap();
            let rhs = a.conj() * boundary_bracket(&z, &w).unwrap() + b.conj() * boundary_bracket(&z2, &w).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
            let skew = boundary_bracket(&w, &z).unwrap();
            prop_assert!((boundary_bracket(&z, &w).unwrap() + skew.conj()).norm() <= 1e-12 * (1.0 + skew.norm()));
        }
    }
}
