//! Command-line front end: spec files, generators, and deterministic reports.
//!
//! Reports are JSON with fixed key order. Floats are written in scientific notation with 15
//! significant digits, except under `"input"`, which holds the parsed spec at full precision
//! so that feeding it back reproduces the report.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::classify::{
    check_atkinson_with, classify, corollary_lpc, find_atkinson_interval, hinton_lewis, limit_point_criterion, AtkinsonResult,
    CriterionReport, LpVerdict, SeriesGrowth, SquareSummableEstimate, DEFAULT_PROBES,
};
use crate::error::Error;
use crate::extensions::{
    self, build_omega, canonicalize_scalar, equivalent, krein_von_neumann, membership_tol, validate_extension_tol, BoundaryPair,
    ExtensionForm, ExtensionSetting, KreinBranch,
};
use crate::linalg::from_real_rows;
use crate::primitives::{boundary_bracket_matrix, c, CMatrix, DiscreteInterval, MatrixSeq, RealSeq, Trajectory, C64, DEFAULT_TOL};
use crate::solver::{recursion_residual, solve_ivp};
use crate::spectral::{eigenvalues, DetMethod, Spectrum};
use crate::system::{
    from_block_special, from_sturm_liouville, validate_hypothesis_tol, BlockSpecialData, SturmLiouvilleData, SymplecticSystem,
    UNBOUNDED_CHECK_WINDOW,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable overriding the default tolerance.
pub const TOL_ENV: &str = "SYMPL_EXT_TOL";

pub const GENERATORS: [&str; 4] = ["sl_inverse_square_weight", "sl_constant", "sl_power_weight", "shear"];

#[derive(Parser, Debug)]
#[command(name = "sympl-ext", version, about = "Discrete symplectic systems: checks, solutions, classification, boundary conditions and spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the structural hypotheses and the Atkinson condition
    Check(CheckArgs),
    /// Solve the recursion from an initial value (fundamental matrix by default)
    Solve(SolveArgs),
    /// Estimate square summable solutions and evaluate limit point criteria
    Classify(ClassifyArgs),
    /// Validate boundary data, with canonical forms, comparison and the Krein extension
    Extension(ExtensionArgs),
    /// Eigenvalues of a finite-interval boundary value problem
    Eigenvalues(EigenvaluesArgs),
    /// Boundary bracket of two trajectories
    Bracket(BracketArgs),
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub spec: PathBuf,
    /// Last index checked on unbounded intervals
    #[arg(long)]
    pub truncation: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    pub spec: PathBuf,
    /// Spectral parameter: `re`, `re,im` or `i`
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub lambda: String,
    #[arg(long, default_value_t = 0)]
    pub k0: usize,
    /// Initial vector as JSON, entries numbers or [re, im]
    #[arg(long)]
    pub z0: Option<String>,
    #[arg(long)]
    pub truncation: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    pub spec: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub truncation: usize,
    #[arg(long, default_value_t = crate::classify::DEFAULT_GROWTH_THRESHOLD)]
    pub threshold: f64,
    /// Sequence h_k: a constant, `const:c` or `linear:a,b` for a + b k
    #[arg(long = "h-sequence", default_value = "1")]
    pub h_sequence: String,
    #[arg(long = "T", default_value_t = 0.0)]
    pub t_const: f64,
}

#[derive(Args, Debug)]
pub struct ExtensionArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub canonicalize: bool,
    #[arg(long)]
    pub krein: bool,
    /// File with a second boundary condition (a spec or {"boundary": ...})
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Point where square summable solutions are taken on unbounded intervals
    #[arg(long, default_value = "i", allow_hyphen_values = true)]
    pub lambda0: String,
    #[arg(long, default_value_t = 20_000)]
    pub truncation: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct EigenvaluesArgs {
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub require_self_adjoint: bool,
}

#[derive(Args, Debug)]
pub struct BracketArgs {
    pub first: PathBuf,
    pub second: PathBuf,
}

/// Complex entry: a plain number or `[re, im]`; always written as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        parse_cx(&Value::deserialize(d)?).map(Cx).map_err(D::Error::custom)
    }
}

fn parse_cx(v: &Value) -> std::result::Result<C64, String> {
    match v {
        Value::Number(x) => Ok(c(x.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number) => Ok(c(a[0].as_f64().unwrap(), a[1].as_f64().unwrap())),
        other => Err(format!("expected a number or [re, im], found {}", other)),
    }
}

/// Matrix given as a list of rows; a bare number or pair is a 1×1 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat(pub CMatrix);

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Cx>> = (0..self.0.nrows()).map(|i| (0..self.0.ncols()).map(|j| Cx(self.0[(i, j)])).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        parse_mat(&Value::deserialize(d)?).map(Mat).map_err(D::Error::custom)
    }
}

fn parse_mat(v: &Value) -> std::result::Result<CMatrix, String> {
    if let Ok(z) = parse_cx(v) {
        return Ok(CMatrix::from_element(1, 1, z));
    }
    let rows = v.as_array().ok_or_else(|| format!("expected a matrix (list of rows), found {}", v))?;
    let parsed: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| format!("expected a matrix row, found {}", r))?
                .iter()
                .map(parse_cx)
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    let ncols = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != ncols) {
        return Err("matrix rows have different lengths".into());
    }
    Ok(CMatrix::from_fn(parsed.len(), ncols, |i, j| parsed[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Raw,
    SturmLiouville,
    BlockSpecial,
}

/// `N` as an integer or the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upper {
    Finite(usize),
    Infinite,
}

impl Serialize for Upper {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Upper::Finite(n) => s.serialize_u64(*n as u64),
            Upper::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Upper {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "infinite" => Ok(Upper::Infinite),
            Value::Number(n) if n.is_u64() => Ok(Upper::Finite(n.as_u64().unwrap() as usize)),
            other => Err(D::Error::custom(format!("N must be a nonnegative integer or \"infinite\", found {}", other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedBoundary {
    Dirichlet,
    Neumann,
    Periodic,
    Antiperiodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaggedBoundary {
    Separated([f64; 2]),
    Coupled {
        #[serde(rename = "R")]
        r: Mat,
        beta: f64,
    },
    Unitary(Mat),
    Fg {
        #[serde(rename = "F")]
        f: Mat,
        #[serde(rename = "G")]
        g: Mat,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(rename = "M")]
    pub m: Mat,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Mat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    Named(NamedBoundary),
    Tagged(TaggedBoundary),
    Pair(PairSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub kind: Kind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(rename = "N")]
    pub upper: Upper,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Mat>>,
    #[serde(rename = "Psi", default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Mat>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Mat>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Mat>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Mat>>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w_blocks: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
}

fn default_n() -> usize {
    1
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular { .. } | Error::RecursionResidual { .. } => EXIT_NUMERICAL,
            Error::NotCertified(_) => EXIT_NEGATIVE,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A parsed spec with the system it describes.
pub struct Model {
    pub spec: SystemSpec,
    pub sys: SymplecticSystem,
    pub sl: Option<SturmLiouvilleData>,
    pub block: Option<BlockSpecialData>,
}

pub fn parse_spec(text: &str) -> CliResult<SystemSpec> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("spec: {}", e)))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    build_model(parse_spec(&read(path)?)?)
}

fn need<'a, T>(field: &'a Option<Vec<T>>, name: &str, len: usize) -> CliResult<&'a [T]> {
    let v = field.as_ref().ok_or_else(|| CliError::input(format!("field {} is required", name)))?;
    if v.len() != len {
        return Err(CliError::input(format!("field {} has {} entries, expected {}", name, v.len(), len)));
    }
    Ok(v)
}

fn mats(v: &[Mat]) -> Vec<CMatrix> {
    v.iter().map(|m| m.0.clone()).collect()
}

fn param(g: &Generator, key: &str, default: f64) -> CliResult<f64> {
    match g.params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| CliError::input(format!("generator {}: parameter {} must be a number", g.name, key))),
    }
}

pub fn build_model(spec: SystemSpec) -> CliResult<Model> {
    let n = spec.n;
    if n == 0 {
        return Err(CliError::input("n must be at least 1"));
    }
    if let Some(g) = &spec.generator {
        return build_generated(spec.clone(), g.clone());
    }
    let n_upper = match spec.upper {
        Upper::Finite(v) => v,
        Upper::Infinite => return Err(CliError::input("N = \"infinite\" needs a generator")),
    };
    match spec.kind {
        Kind::Raw => {
            let s = mats(need(&spec.s, "S", n_upper + 1)?);
            let psi = mats(need(&spec.psi, "Psi", n_upper + 1)?);
            if s[0].nrows() != 2 * n {
                return Err(CliError::input(format!("S must be {}x{} for n = {}", 2 * n, 2 * n, n)));
            }
            let sys = SymplecticSystem::from_matrices(s, psi)?;
            Ok(Model { spec, sys, sl: None, block: None })
        }
        Kind::SturmLiouville => {
            if n != 1 {
                return Err(CliError::input("sturm_liouville data needs n = 1"));
            }
            let data = SturmLiouvilleData::finite(
                need(&spec.p, "p", n_upper + 2)?.to_vec(),
                need(&spec.q, "q", n_upper + 1)?.to_vec(),
                need(&spec.w, "w", n_upper + 1)?.to_vec(),
            )?;
            sl_model(spec, data)
        }
        Kind::BlockSpecial => {
            let w = spec.w_blocks.as_ref().ok_or_else(|| CliError::input("field W is required"))?;
            if w.len() != n_upper + 1 && w.len() != n_upper + 2 {
                return Err(CliError::input(format!("field W has {} entries, expected {} or {}", w.len(), n_upper + 1, n_upper + 2)));
            }
            let seq = |v: Vec<CMatrix>| MatrixSeq::from_vec(v);
            let data = BlockSpecialData::new(
                n,
                DiscreteInterval::finite(n_upper),
                seq(mats(need(&spec.a, "A", n_upper + 1)?))?,
                seq(mats(need(&spec.b, "B", n_upper + 1)?))?,
                seq(mats(need(&spec.c, "C", n_upper + 1)?))?,
                seq(mats(need(&spec.d, "D", n_upper + 1)?))?,
                seq(mats(w))?,
            )?;
            let sys = from_block_special(&data)?;
            Ok(Model { spec, sys, sl: None, block: Some(data) })
        }
    }
}

fn sl_model(spec: SystemSpec, data: SturmLiouvilleData) -> CliResult<Model> {
    data.validate()?;
    let sys = from_sturm_liouville(&data)?;
    let block = data.to_block_special();
    Ok(Model { spec, sys, sl: Some(data), block: Some(block) })
}

fn build_generated(spec: SystemSpec, g: Generator) -> CliResult<Model> {
    let expected_kind = if g.name == "shear" { Kind::Raw } else { Kind::SturmLiouville };
    if !GENERATORS.contains(&g.name.as_str()) {
        return Err(CliError::input(format!("unknown generator {:?}; known: {}", g.name, GENERATORS.join(", "))));
    }
    if spec.kind != expected_kind || spec.n != 1 {
        return Err(CliError::input(format!("generator {} needs kind {:?} and n = 1", g.name, expected_kind)));
    }
    let sl_seq = |p: f64, q: f64, w: Box<dyn Fn(usize) -> f64 + Send + Sync>| -> CliResult<SturmLiouvilleData> {
        match spec.upper {
            Upper::Infinite => Ok(SturmLiouvilleData::unbounded(move |_| p, move |_| q, w)),
            Upper::Finite(nu) => Ok(SturmLiouvilleData::finite(vec![p; nu + 2], vec![q; nu + 1], (0..=nu).map(w).collect())?),
        }
    };
    match g.name.as_str() {
        "sl_inverse_square_weight" => {
            let data = sl_seq(-1.0, 0.0, Box::new(|k| 1.0 / ((k as f64 + 1.0) * (k as f64 + 1.0))))?;
            sl_model(spec, data)
        }
        "sl_constant" => {
            let (p, q, w) = (param(&g, "p", -1.0)?, param(&g, "q", 0.0)?, param(&g, "w", 1.0)?);
            let data = sl_seq(p, q, Box::new(move |_| w))?;
            sl_model(spec, data)
        }
        "sl_power_weight" => {
            let (p, a) = (param(&g, "p", -1.0)?, param(&g, "exponent", 2.0)?);
            let data = sl_seq(p, 0.0, Box::new(move |k| (k as f64 + 1.0).powf(-a)))?;
            sl_model(spec, data)
        }
        _ => {
            let (b, w) = (param(&g, "b", 1.0)?, param(&g, "w", 1.0)?);
            let s = from_real_rows(2, 2, &[1.0, -b, 0.0, 1.0]);
            let psi = from_real_rows(2, 2, &[w, 0.0, 0.0, 0.0]);
            let sys = match spec.upper {
                Upper::Infinite => {
                    let (s2, p2) = (s.clone(), psi.clone());
                    SymplecticSystem::unbounded(1, move |_| s2.clone(), move |_| p2.clone())?
                }
                Upper::Finite(nu) => SymplecticSystem::from_matrices(vec![s; nu + 1], vec![psi; nu + 1])?,
            };
            Ok(Model { spec, sys, sl: None, block: None })
        }
    }
}

/// Boundary data as a pair `(M, L)`.
pub fn boundary_pair(b: &BoundarySpec, n: usize) -> CliResult<BoundaryPair> {
    let scalar_only = |what: &str| -> CliResult<()> {
        if n != 1 {
            Err(CliError::input(format!("{} boundary conditions need n = 1", what)))
        } else {
            Ok(())
        }
    };
    let pair = match b {
        BoundarySpec::Named(NamedBoundary::Dirichlet) => BoundaryPair::dirichlet(n),
        BoundarySpec::Named(NamedBoundary::Neumann) => BoundaryPair::neumann(n),
        BoundarySpec::Named(NamedBoundary::Periodic) => BoundaryPair::periodic(n),
        BoundarySpec::Named(NamedBoundary::Antiperiodic) => BoundaryPair::antiperiodic(n),
        BoundarySpec::Tagged(TaggedBoundary::Separated([a0, a1])) => {
            scalar_only("separated")?;
            ExtensionForm::Separated { alpha0: *a0, alpha_n1: *a1 }.to_pair()?
        }
        BoundarySpec::Tagged(TaggedBoundary::Coupled { r, beta }) => {
            scalar_only("coupled")?;
            ExtensionForm::Coupled { r: r.0.clone(), beta: *beta }.to_pair()?
        }
        BoundarySpec::Tagged(TaggedBoundary::Unitary(v)) => ExtensionForm::Unitary { v: v.0.clone() }.to_pair()?,
        BoundarySpec::Tagged(TaggedBoundary::Fg { f, g }) => ExtensionForm::Fg { f: f.0.clone(), g: g.0.clone() }.to_pair()?,
        BoundarySpec::Pair(p) => {
            let l = p.l.as_ref().map_or_else(|| CMatrix::zeros(p.m.0.nrows(), 0), |l| l.0.clone());
            BoundaryPair::new(p.m.0.clone(), l)?
        }
    };
    Ok(pair)
}

fn require_pair(model: &Model) -> CliResult<BoundaryPair> {
    let b = model.spec.boundary.as_ref().ok_or_else(|| CliError::input("the spec has no boundary field"))?;
    boundary_pair(b, model.spec.n)
}

/// Parse `re`, `re,im`, `i`, `-i` or `a+bi`-free forms used on the command line.
pub fn parse_complex_arg(s: &str) -> CliResult<C64> {
    let t = s.trim();
    match t {
        "i" | "+i" => return Ok(c(0.0, 1.0)),
        "-i" => return Ok(c(0.0, -1.0)),
        _ => {}
    }
    let parts: Vec<&str> = t.split(',').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::input(format!("cannot parse {:?} as a complex number", s)));
    match parts.as_slice() {
        [re] => Ok(c(num(re)?, 0.0)),
        [re, im] => Ok(c(num(re)?, num(im)?)),
        _ => Err(CliError::input(format!("cannot parse {:?} as a complex number", s))),
    }
}

fn parse_h(s: &str) -> CliResult<(RealSeq, Value)> {
    let bad = || CliError::input(format!("cannot parse h-sequence {:?}", s));
    let nums = |x: &str| -> CliResult<Vec<f64>> { x.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect() };
    if let Some(rest) = s.strip_prefix("linear:") {
        let v = nums(rest)?;
        if v.len() != 2 {
            return Err(bad());
        }
        let (a, b) = (v[0], v[1]);
        Ok((RealSeq::generated(move |k| a + b * k as f64), json!({"linear": [a, b]})))
    } else {
        let v = nums(s.strip_prefix("const:").unwrap_or(s))?;
        if v.len() != 1 {
            return Err(bad());
        }
        Ok((RealSeq::constant(v[0]), json!({"const": v[0]})))
    }
}

// ---------------------------------------------------------------- report values

pub fn num(x: f64) -> Value {
    let x = if x == 0.0 { 0.0 } else { x };
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format!("{}", x)), Value::Number)
}

pub fn cx(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn mat(m: &CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| cx(m[(i, j)])).collect())).collect())
}

fn vector(m: &CMatrix) -> Value {
    Value::Array(m.iter().map(|&z| cx(z)).collect())
}

fn trajectory_value(z: &Trajectory) -> Value {
    let values = z
        .values()
        .iter()
        .map(|v| if v.ncols() == 1 { vector(v) } else { mat(v) })
        .collect();
    json!({"start": z.start(), "values": Value::Array(values)})
}

fn parse_trajectory(v: &Value) -> CliResult<Trajectory> {
    let v = v.get("trajectory").unwrap_or(v);
    let start = v.get("start").and_then(Value::as_u64).unwrap_or(0) as usize;
    let values = v
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::input("trajectory needs a values list"))?;
    let parsed: Vec<CMatrix> = values
        .iter()
        .map(|x| {
            let arr = x.as_array().ok_or_else(|| CliError::input("trajectory values must be lists"))?;
            let is_vector = arr.iter().all(|e| parse_cx(e).is_ok());
            if is_vector {
                let entries: Vec<C64> = arr.iter().map(|e| parse_cx(e).unwrap()).collect();
                Ok(CMatrix::from_column_slice(entries.len(), 1, &entries))
            } else {
                parse_mat(x).map_err(CliError::input)
            }
        })
        .collect::<CliResult<_>>()?;
    Ok(Trajectory::new(start, parsed)?)
}

/// Pretty JSON with floats as `{:.14e}` outside the `"input"` subtree.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, false, &mut out);
    out.push('\n');
    out
}

const INLINE_WIDTH: usize = 100;

/// One-line form of an array without objects.
fn inline(v: &Value, raw: bool) -> Option<String> {
    match v {
        Value::Object(_) => None,
        Value::Array(a) => {
            let parts: Option<Vec<String>> = a.iter().map(|x| inline(x, raw)).collect();
            Some(format!("[{}]", parts?.join(", ")))
        }
        scalar => {
            let mut s = String::new();
            write_value(scalar, 0, raw, &mut s);
            Some(s)
        }
    }
}

fn write_value(v: &Value, indent: usize, raw: bool, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Number(x) if !raw && x.is_f64() => out.push_str(&format!("{:.14e}", x.as_f64().unwrap())),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(_) if inline(v, raw).is_some_and(|s| s.len() <= INLINE_WIDTH) => out.push_str(&inline(v, raw).unwrap()),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, raw, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(x, indent + 1, raw || (indent == 0 && k == "input"), out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        other => out.push_str(&serde_json::to_string(other).unwrap()),
    }
}

fn header(command: &str, model: &Model) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("input".into(), serde_json::to_value(&model.spec).expect("spec serializes"));
    m
}

fn atkinson_value(a: &AtkinsonResult) -> Value {
    json!({
        "passed": a.passed,
        "interval": [a.interval.0, a.interval.1],
        "min_eigenvalue": num(a.min_eigenvalue),
        "worst_probe": cx(a.worst_probe),
    })
}

fn estimate_value(e: &SquareSummableEstimate) -> Value {
    json!({
        "lambda": cx(e.lam),
        "q_estimate": e.q_estimate,
        "stable": e.stable,
        "counts": [e.counts.0, e.counts.1],
        "heuristic": e.heuristic,
        "growth_threshold": num(e.growth_threshold),
        "directions": e.profiles.iter().map(|p| json!({
            "pencil_value": num(p.pencil_value),
            "partial_norms": p.partial_norms.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "relative_increment": num(p.relative_increment),
            "convergent": p.convergent,
        })).collect::<Vec<_>>(),
    })
}

fn series_value(s: &SeriesGrowth) -> Value {
    json!({
        "partial_sum": num(s.partial_sum),
        "last_index": s.last_index,
        "checkpoints": s.checkpoints.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "ratio": num(s.ratio),
        "divergent": s.divergent,
        "label": s.label,
    })
}

fn criterion_value(r: &CriterionReport) -> Value {
    json!({
        "truncation": r.truncation,
        "conditions": r.conditions.iter().map(|c| json!({
            "name": c.name,
            "passed": c.passed,
            "margin": num(c.margin),
            "first_failure": c.first_failure,
        })).collect::<Vec<_>>(),
        "h_min": num(r.h_min),
        "series": series_value(&r.series),
        "verdict": match r.verdict {
            LpVerdict::SatisfiedUpToTruncation => "satisfied up to truncation".to_string(),
            LpVerdict::Violated(name) => format!("violated: {}", name),
        },
    })
}

fn or_error<T>(r: crate::Result<T>, f: impl Fn(&T) -> Value) -> Value {
    match r {
        Ok(v) => f(&v),
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn form_value(f: &ExtensionForm) -> Value {
    match f {
        ExtensionForm::Separated { alpha0, alpha_n1 } => json!({"separated": {"alpha0": num(*alpha0), "alpha_end": num(*alpha_n1)}}),
        ExtensionForm::Coupled { r, beta } => json!({"coupled": {"R": mat(r), "beta": num(*beta)}}),
        ExtensionForm::Fg { f, g } => json!({"fg": {"F": mat(f), "G": mat(g)}}),
        ExtensionForm::Unitary { v } => json!({"unitary": mat(v)}),
        ExtensionForm::General(p) => json!({"M": mat(&p.m), "L": mat(&p.l)}),
    }
}

// ---------------------------------------------------------------- commands

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Tolerance from [`TOL_ENV`], or the library default.
pub fn tolerance_from_env() -> CliResult<f64> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(DEFAULT_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(CliError::input(format!("{} must be a positive number, got {:?}", TOL_ENV, s))),
        },
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_INPUT, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: EXIT_PASS, stdout: text, stderr: String::new() }
            };
        }
    };
    let result = tolerance_from_env().and_then(|tol| dispatch(&cli.command, tol));
    match result {
        Ok((code, stdout)) => Outcome { code, stdout, stderr: String::new() },
        Err(e) => Outcome {
            code: e.code,
            stdout: String::new(),
            stderr: format!("error: {}\n", e.message),
        },
    }
}

fn dispatch(cmd: &Command, tol: f64) -> CliResult<(i32, String)> {
    match cmd {
        Command::Check(a) => cmd_check(a, tol),
        Command::Solve(a) => cmd_solve(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Extension(a) => cmd_extension(a, tol),
        Command::Eigenvalues(a) => cmd_eigenvalues(a),
        Command::Bracket(a) => cmd_bracket(a),
    }
}

fn verdict_code(passed: bool) -> i32 {
    if passed {
        EXIT_PASS
    } else {
        EXIT_NEGATIVE
    }
}

pub fn cmd_check(a: &CheckArgs, tol: f64) -> CliResult<(i32, String)> {
    let model = load_model(&a.spec)?;
    let sys = &model.sys;
    let truncation = if sys.interval().is_finite() { None } else { Some(a.truncation.unwrap_or(UNBOUNDED_CHECK_WINDOW)) };
    let report = validate_hypothesis_tol(sys, truncation, tol)?;
    let atkinson = match sys.interval().n_upper() {
        Some(nu) => Some(check_atkinson_with(sys, 0, nu, &DEFAULT_PROBES, tol)?),
        None => find_atkinson_interval(sys, truncation.unwrap_or(UNBOUNDED_CHECK_WINDOW).min(64))?,
    };
    // the Atkinson condition is reported but does not decide the exit code
    let passed = report.passed();
    let mut out = header("check", &model);
    out.insert("tolerance".into(), num(tol));
    out.insert("range".into(), json!([report.range.0, report.range.1]));
    out.insert(
        "checks".into(),
        Value::Array(
            report
                .checks
                .iter()
                .map(|c| json!({"name": c.name, "condition": c.condition, "passed": c.passed, "worst": num(c.worst), "worst_index": c.worst_index}))
                .collect(),
        ),
    );
    out.insert("atkinson".into(), atkinson.as_ref().map_or(Value::Null, atkinson_value));
    if let Some(f) = report.first_failure() {
        out.insert("first_failure".into(), json!({"name": f.name, "worst": num(f.worst), "worst_index": f.worst_index}));
    }
    out.insert("passed".into(), json!(passed));
    Ok((verdict_code(passed), render(&Value::Object(out))))
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<(i32, String)> {
    let model = load_model(&a.spec)?;
    let sys = &model.sys;
    let lam = parse_complex_arg(&a.lambda)?;
    let z0 = match &a.z0 {
        None => CMatrix::identity(sys.dim(), sys.dim()),
        Some(text) => {
            let v: Value = serde_json::from_str(text).map_err(|e| CliError::input(format!("z0: {}", e)))?;
            let entries: Vec<C64> = v
                .as_array()
                .ok_or_else(|| CliError::input("z0 must be a list"))?
                .iter()
                .map(|e| parse_cx(e).map_err(CliError::input))
                .collect::<CliResult<_>>()?;
            CMatrix::from_column_slice(entries.len(), 1, &entries)
        }
    };
    let truncation = if sys.interval().is_finite() { None } else { Some(a.truncation.ok_or(Error::TruncationRequired)?) };
    let z = solve_ivp(sys, lam, a.k0, &z0, None, truncation)?;
    let residual = recursion_residual(sys, lam, &z, None, z.start(), z.end())?;
    let mut out = header("solve", &model);
    out.insert("lambda".into(), cx(lam));
    out.insert("k0".into(), json!(a.k0));
    out.insert("recursion_residual".into(), num(residual));
    out.insert("trajectory".into(), trajectory_value(&z));
    Ok((EXIT_PASS, render(&Value::Object(out))))
}

pub fn cmd_classify(a: &ClassifyArgs) -> CliResult<(i32, String)> {
    let model = load_model(&a.spec)?;
    let (h, h_desc) = parse_h(&a.h_sequence)?;
    let report = classify(&model.sys, a.truncation, a.threshold)?;
    let mut out = header("classify", &model);
    out.insert("truncation".into(), json!(a.truncation));
    out.insert("q_plus".into(), estimate_value(&report.q_plus));
    out.insert("q_minus".into(), estimate_value(&report.q_minus));
    out.insert("atkinson".into(), report.atkinson.as_ref().map_or(Value::Null, atkinson_value));
    let mut criteria = Map::new();
    if model.sys.interval().is_finite() {
        // the criteria concern the behaviour at infinity
    } else if let Some(sl) = &model.sl {
        criteria.insert("hinton_lewis".into(), or_error(hinton_lewis(sl, a.truncation), series_value));
        criteria.insert(
            "new_criterion".into(),
            json!({"h": h_desc, "T": num(a.t_const), "report": or_error(corollary_lpc(sl, &h, a.t_const, a.truncation), criterion_value)}),
        );
    } else if let Some(block) = &model.block {
        criteria.insert(
            "new_criterion".into(),
            json!({"h": h_desc, "T": num(a.t_const), "report": or_error(limit_point_criterion(block, &h, a.t_const, a.truncation), criterion_value)}),
        );
    }
    out.insert("criteria".into(), Value::Object(criteria));
    out.insert("verdict".into(), json!(report.verdict));
    Ok((EXIT_PASS, render(&Value::Object(out))))
}

fn setting_for<'a>(model: &Model, omega: &'a Option<extensions::OmegaMatrix>) -> ExtensionSetting<'a> {
    if model.sys.interval().is_finite() {
        ExtensionSetting::Finite
    } else if let Some(o) = omega {
        ExtensionSetting::General(o)
    } else {
        ExtensionSetting::LimitPoint
    }
}

pub fn cmd_extension(a: &ExtensionArgs, tol: f64) -> CliResult<(i32, String)> {
    let model = load_model(&a.spec)?;
    let sys = &model.sys;
    let n = sys.n();
    let mut out = header("extension", &model);
    out.insert("tolerance".into(), num(tol));
    let mut code = EXIT_PASS;
    if model.spec.boundary.is_none() && !a.krein {
        return Err(CliError::input("nothing to do: the spec has no boundary field and --krein is not set"));
    }
    if model.spec.boundary.is_some() {
        let pair = require_pair(&model)?;
        let lp_shape = pair.m.nrows() == n && pair.l.ncols() == 0;
        let omega = if sys.interval().is_finite() || lp_shape {
            None
        } else {
            Some(build_omega(sys, parse_complex_arg(&a.lambda0)?, Some(a.truncation), crate::classify::DEFAULT_GROWTH_THRESHOLD)?)
        };
        let setting = setting_for(&model, &omega);
        let v = validate_extension_tol(sys, &pair, setting, tol)?;
        code = verdict_code(v.self_adjoint);
        out.insert("M".into(), mat(&pair.m));
        out.insert("L".into(), mat(&pair.l));
        out.insert(
            "validation".into(),
            json!({
                "setting": v.setting,
                "rank": v.rank,
                "expected_rank": v.expected_rank,
                "residual": num(v.residual),
                "self_adjoint": v.self_adjoint,
            }),
        );
        if let Some(o) = &omega {
            out.insert(
                "omega".into(),
                json!({
                    "lambda0": cx(o.lam0),
                    "endpoint": o.endpoint,
                    "entries": mat(&o.entries),
                    "rank": o.rank_omega,
                    "rank_off_diagonal": o.rank_omega12,
                    "rank_leading": o.rank_leading,
                    "truncation_change": num(o.truncation_change),
                }),
            );
        }
        if a.canonicalize {
            out.insert("canonical".into(), or_error(canonicalize_scalar(sys, &pair), form_value));
        }
        if let Some(path) = &a.compare {
            let text = read(path)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
            let b = v.get("boundary").cloned().unwrap_or(v);
            let other: BoundarySpec = serde_json::from_value(b).map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
            let other = boundary_pair(&other, n)?;
            out.insert(
                "comparison".into(),
                or_error(equivalent(&pair, &other), |e| {
                    json!({"equivalent": e.equivalent, "C": e.c.as_ref().map_or(Value::Null, mat), "residual": num(e.residual)})
                }),
            );
        }
    }
    if a.krein {
        let k = krein_von_neumann(sys)?;
        let (r, beta) = match &k.form {
            ExtensionForm::Coupled { r, beta } => (r.clone(), *beta),
            _ => unreachable!("Krein extension is coupled"),
        };
        let mut kernel_residual: f64 = 0.0;
        for z in &k.kernel {
            kernel_residual = kernel_residual.max(membership_tol(sys, &k.pair, ExtensionSetting::Finite, z, tol)?.boundary_residual);
        }
        let lowest = eigenvalues(sys, &BoundaryPair::dirichlet(n))
            .ok()
            .and_then(|s| s.eigenpairs.first().map(|e| num(e.lambda.re)))
            .unwrap_or(Value::Null);
        out.insert(
            "krein".into(),
            json!({
                "G": mat(&k.g),
                "R": mat(&r),
                "beta": num(beta),
                "branch": match k.branch { KreinBranch::BNonzero => "b != 0", KreinBranch::BZero => "b = 0" },
                "real_coefficients": k.real_coefficients,
                "kernel_initial": k.kernel_initial.iter().map(vector).collect::<Vec<_>>(),
                "kernel_boundary_residual": num(kernel_residual),
                "positivity": k.positivity.as_ref().map_or(Value::Null, |p| json!({
                    "samples": p.samples,
                    "min_ratio": num(p.min_ratio),
                    "certified": p.certified,
                })),
                "lowest_dirichlet_eigenvalue": lowest,
            }),
        );
    }
    Ok((code, render(&Value::Object(out))))
}

pub fn spectrum_value(s: &Spectrum) -> Value {
    json!({
        "self_adjoint": s.self_adjoint(),
        "validation_residual": num(s.validation.residual),
        "method": match s.char_poly.method {
            DetMethod::Exact => json!("exact"),
            DetMethod::ChebyshevWindow { lo, hi } => json!({"chebyshev_window": [num(lo), num(hi)], "pieces": s.char_poly.pieces.len()}),
        },
        "count": s.values().len(),
        "eigenvalues": s.eigenpairs.iter().map(|e| json!({
            "lambda": cx(e.lambda),
            "multiplicity": e.multiplicity,
            "boundary_residual": num(e.boundary_residual),
            "recursion_residual": num(e.recursion_residual),
            "det_value": num(e.det_value),
            "vectors": mat(&e.vectors),
        })).collect::<Vec<_>>(),
        "max_imag": num(s.max_imag),
        "orthogonality_defect": num(s.orthogonality_defect),
        "orthogonality": mat(&s.orthogonality),
        "rejected_roots": s.rejected_roots,
    })
}

pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("re,im,multiplicity,boundary_residual,recursion_residual\n");
    for e in &s.eigenpairs {
        out.push_str(&format!(
            "{:.14e},{:.14e},{},{:.14e},{:.14e}\n",
            e.lambda.re, e.lambda.im, e.multiplicity, e.boundary_residual, e.recursion_residual
        ));
    }
    out
}

pub fn cmd_eigenvalues(a: &EigenvaluesArgs) -> CliResult<(i32, String)> {
    let model = load_model(&a.spec)?;
    let pair = require_pair(&model)?;
    let s = eigenvalues(&model.sys, &pair)?;
    let code = if a.require_self_adjoint && !s.self_adjoint() { EXIT_NEGATIVE } else { EXIT_PASS };
    let text = match a.format {
        Format::Csv => spectrum_csv(&s),
        Format::Json => {
            let mut out = header("eigenvalues", &model);
            if let Value::Object(m) = spectrum_value(&s) {
                out.extend(m);
            }
            render(&Value::Object(out))
        }
    };
    Ok((code, text))
}

pub fn cmd_bracket(a: &BracketArgs) -> CliResult<(i32, String)> {
    let load = |p: &Path| -> CliResult<Trajectory> {
        let v: Value = serde_json::from_str(&read(p)?).map_err(|e| CliError::input(format!("{}: {}", p.display(), e)))?;
        parse_trajectory(&v)
    };
    let (z, w) = (load(&a.first)?, load(&a.second)?);
    let b = boundary_bracket_matrix(&z, &w)?;
    let mut out = Map::new();
    out.insert("command".into(), json!("bracket"));
    out.insert("range".into(), json!([z.start(), z.end()]));
    if b.shape() == (1, 1) {
        out.insert("bracket".into(), cx(b[(0, 0)]));
    } else {
        out.insert("bracket".into(), mat(&b));
    }
    Ok((EXIT_PASS, render(&Value::Object(out))))
}
