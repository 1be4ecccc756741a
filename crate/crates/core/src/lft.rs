//! Property-J pairs `(R, Q)`, the linear-fractional map
//! `φ = i(𝔄₁₁R + 𝔄₁₂Q)(𝔄₂₁R + 𝔄₂₂Q)⁻¹`, Herglotz checks and the constant
//! pair attaining equality in the entropy bound.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{self, CircleGrid, DensityGrid, MoebiusMap};
use crate::error::{Error, Result};
use crate::frame;
use crate::linalg::{self, CMatrix, I};
use crate::report::{matrix_from_json, MatrixJson};
use crate::snode::{SNode, SignatureConstants};

/// Disk evaluator `ζ ↦ q(ζ)`.
pub type DiskFn = Arc<dyn Fn(Complex64) -> CMatrix + Send + Sync>;
/// Half-plane evaluator `z ↦ (R(z), Q(z))`.
pub type PairFn = Arc<dyn Fn(Complex64) -> Result<(CMatrix, CMatrix)> + Send + Sync>;
/// Half-plane matrix evaluator.
pub type MatrixFn = Arc<dyn Fn(Complex64) -> Result<CMatrix> + Send + Sync>;

/// Nonsingular pair with property J, given by evaluators.
#[derive(Clone)]
pub enum PairJ {
    Constant {
        r: CMatrix,
        q: CMatrix,
    },
    /// `[R; Q] = KJ[q(ζ)a; a]` with `ζ = ζ(z)`.
    DiskDerived {
        q: DiskFn,
        a: CMatrix,
        map: MoebiusMap,
    },
    Callback {
        p: usize,
        f: PairFn,
    },
}

impl fmt::Debug for PairJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairJ::Constant { r, q } => f.debug_struct("Constant").field("r", r).field("q", q).finish(),
            PairJ::DiskDerived { a, map, .. } => f.debug_struct("DiskDerived").field("a", a).field("map", map).finish(),
            PairJ::Callback { p, .. } => f.debug_struct("Callback").field("p", p).finish(),
        }
    }
}

impl PairJ {
    pub fn constant(r: CMatrix, q: CMatrix) -> Result<Self> {
        if r.shape() != q.shape() || r.nrows() != r.ncols() || r.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "R is {:?}, Q is {:?}",
                r.shape(),
                q.shape()
            )));
        }
        Ok(PairJ::Constant { r, q })
    }

    /// `{I_p, I_p}`.
    pub fn identity(p: usize) -> Self {
        PairJ::Constant {
            r: linalg::identity(p),
            q: linalg::identity(p),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            PairJ::Constant { r, .. } => r.nrows(),
            PairJ::DiskDerived { a, .. } => a.nrows(),
            PairJ::Callback { p, .. } => *p,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PairJ::Constant { .. } => "constant",
            PairJ::DiskDerived { .. } => "disk-derived",
            PairJ::Callback { .. } => "callback",
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<(CMatrix, CMatrix)> {
        let (r, q) = match self {
            PairJ::Constant { r, q } => (r.clone(), q.clone()),
            PairJ::DiskDerived { q, a, map } => {
                let zeta = map.to_disk(z)?;
                disk_pair_value(&q(zeta), a)
            }
            PairJ::Callback { f, .. } => f(z)?,
        };
        if !linalg::is_finite(&r) || !linalg::is_finite(&q) {
            return Err(Error::EvaluatorFailure {
                z,
                reason: "non-finite pair value".into(),
            });
        }
        Ok((r, q))
    }
}

/// `[R; Q] = KJ[q·a; a]`.
fn disk_pair_value(q: &CMatrix, a: &CMatrix) -> (CMatrix, CMatrix) {
    let p = a.nrows();
    let kj = SignatureConstants::new(p).kj();
    let stacked = kj * linalg::vstack(&(q * a), a);
    (stacked.rows(0, p).into_owned(), stacked.rows(p, p).into_owned())
}

/// Pair built from a contractive disk parameter `q` and invertible `a`.
pub fn pair_from_disk_pair(q: DiskFn, a: CMatrix, map: MoebiusMap) -> Result<PairJ> {
    let p = a.nrows();
    if a.ncols() != p || p == 0 {
        return Err(Error::DimensionMismatch(format!("a is {:?}", a.shape())));
    }
    if linalg::sigma_min(&a) <= 1e-12 * linalg::spectral_norm(&a).max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput("scaler a is singular".into()));
    }
    for zeta in contraction_samples() {
        let qv = q(zeta);
        if qv.shape() != (p, p) {
            return Err(Error::DimensionMismatch(format!(
                "q is {:?}, expected ({p}, {p})",
                qv.shape()
            )));
        }
        let norm = linalg::spectral_norm(&qv);
        if !(norm <= 1.0 + 1e-12) {
            return Err(Error::NotContractive { norm });
        }
    }
    Ok(PairJ::DiskDerived { q, a, map })
}

fn contraction_samples() -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for r in [0.5, 0.9, 0.99] {
        for k in 0..16 {
            out.push(Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / 16.0));
        }
    }
    out
}

/// Result of sampling the pair conditions.
#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub samples: usize,
    /// Smallest `λ_min(R*R + Q*Q)` over the samples.
    pub min_nonsingular: f64,
    /// Smallest `λ_min(R*Q + Q*R)` over the samples.
    pub min_property: f64,
    /// Sample points where either condition failed.
    pub failures: Vec<Complex64>,
    pub passed: bool,
}

/// Minimum share of samples that must satisfy the pair conditions.
pub const PAIR_PASS_FRACTION: f64 = 0.95;
/// Failures closer than this count as clustered.
pub const PAIR_CLUSTER_RADIUS: f64 = 1e-3;

pub fn check_pair(pair: &PairJ, samples: &[Complex64]) -> Result<PairReport> {
    let mut min_nonsingular = f64::INFINITY;
    let mut min_property = f64::INFINITY;
    let mut failures = Vec::new();
    for &z in samples {
        let (r, q) = pair.eval(z)?;
        let scale = linalg::spectral_norm(&r).powi(2) + linalg::spectral_norm(&q).powi(2);
        let ns = linalg::lambda_min(&(r.adjoint() * &r + q.adjoint() * &q));
        let pr = linalg::lambda_min(&(r.adjoint() * &q + q.adjoint() * &r));
        min_nonsingular = min_nonsingular.min(ns);
        min_property = min_property.min(pr);
        if !(ns > 1e-12 * scale) || pr < -1e-10 * scale {
            failures.push(z);
        }
    }
    let ok_fraction = if samples.is_empty() {
        1.0
    } else {
        1.0 - failures.len() as f64 / samples.len() as f64
    };
    let clustered = failures
        .iter()
        .enumerate()
        .any(|(i, a)| failures[i + 1..].iter().any(|b| (a - b).norm() < PAIR_CLUSTER_RADIUS));
    Ok(PairReport {
        samples: samples.len(),
        min_nonsingular,
        min_property,
        passed: ok_fraction >= PAIR_PASS_FRACTION && !clustered,
        failures,
    })
}

/// `φ(z)` from frame blocks and pair values, checking the denominator.
pub fn eval_phi(node: &SNode, pair: &PairJ, z: Complex64) -> Result<CMatrix> {
    let p = node.p();
    if pair.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "pair has p = {}, node has p = {p}",
            pair.p()
        )));
    }
    let a = frame::frame_value(node, z)?;
    let (r, q) = pair.eval(z)?;
    let rq = linalg::vstack(&r, &q);
    let prod = &a * rq;
    let num = prod.rows(0, p).into_owned();
    let den = prod.rows(p, p).into_owned();
    let scale = linalg::fro(&a) * (linalg::fro(&r) + linalg::fro(&q));
    let sigma = linalg::sigma_min(&den);
    if !(sigma > 1e-12 * scale) {
        return Err(Error::DenominatorSingular { z, sigma });
    }
    let x = linalg::right_divide(&num, &den).ok_or(Error::DenominatorSingular { z, sigma })?;
    Ok(x * I)
}

/// A matrix function on the upper half-plane expected to be Herglotz.
#[derive(Clone)]
pub struct HerglotzEval {
    p: usize,
    source: Source,
}

#[derive(Clone)]
enum Source {
    Lft { node: Arc<SNode>, pair: PairJ },
    Function(MatrixFn),
}

impl fmt::Debug for HerglotzEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Lft { pair, .. } => write!(f, "HerglotzEval::Lft(p={}, pair={:?})", self.p, pair),
            Source::Function(_) => write!(f, "HerglotzEval::Function(p={})", self.p),
        }
    }
}

impl HerglotzEval {
    /// `φ` generated by a node and a pair.
    pub fn from_lft(node: &SNode, pair: PairJ) -> Result<Self> {
        if pair.p() != node.p() {
            return Err(Error::DimensionMismatch(format!(
                "pair has p = {}, node has p = {}",
                pair.p(),
                node.p()
            )));
        }
        Ok(Self {
            p: node.p(),
            source: Source::Lft {
                node: Arc::new(node.clone()),
                pair,
            },
        })
    }

    /// An arbitrary evaluator.
    pub fn from_fn(p: usize, f: impl Fn(Complex64) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        Self {
            p,
            source: Source::Function(Arc::new(f)),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn node(&self) -> Option<&SNode> {
        match &self.source {
            Source::Lft { node, .. } => Some(node),
            Source::Function(_) => None,
        }
    }

    pub fn pair(&self) -> Option<&PairJ> {
        match &self.source {
            Source::Lft { pair, .. } => Some(pair),
            Source::Function(_) => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        match &self.source {
            Source::Lft { node, pair } => eval_phi(node, pair, z),
            Source::Function(f) => {
                let v = f(z)?;
                if v.shape() != (self.p, self.p) || !linalg::is_finite(&v) {
                    return Err(Error::EvaluatorFailure {
                        z,
                        reason: "bad evaluator output".into(),
                    });
                }
                Ok(v)
            }
        }
    }
}

/// `min λ_min(i(φ* − φ))` over the samples; non-negative for Herglotz `φ`.
pub fn check_herglotz(h: &HerglotzEval, samples: &[Complex64]) -> Result<f64> {
    let mut out = f64::INFINITY;
    for &z in samples {
        let phi = h.eval(z)?;
        out = out.min(linalg::lambda_min(&((phi.adjoint() - phi) * I)));
    }
    Ok(out)
}

/// Height used for the linear-growth coefficient.
pub const GAMMA_HEIGHT: f64 = 1e6;

/// `γ ≈ Im φ(iy)/y` at large `y` and `θ = Re φ(i)`, both Hermitian.
pub fn estimate_gamma_theta(h: &HerglotzEval) -> Result<(CMatrix, CMatrix)> {
    let y = GAMMA_HEIGHT;
    let far = h.eval(Complex64::new(0.0, y))?;
    let gamma = linalg::im_part(&far) / Complex64::new(y, 0.0);
    let theta = linalg::herm_part(&h.eval(I)?);
    Ok((gamma, theta))
}

/// `γ`, `θ` and the absolutely continuous density of a Herglotz function.
#[derive(Debug, Clone, Serialize)]
pub struct HerglotzRepresentation {
    #[serde(with = "crate::report::matrix_serde")]
    pub gamma: CMatrix,
    #[serde(with = "crate::report::matrix_serde")]
    pub theta: CMatrix,
    pub density: DensityGrid,
}

pub fn herglotz_representation(
    h: &HerglotzEval,
    grid: &CircleGrid,
    map: &MoebiusMap,
    eps: f64,
) -> Result<HerglotzRepresentation> {
    let (gamma, theta) = estimate_gamma_theta(h)?;
    let density = conformal::extract_density(h, grid, map, eps)?;
    Ok(HerglotzRepresentation { gamma, theta, density })
}

/// Constant pair `R = 𝔄₂₂(λ)*`, `Q = 𝔄₂₁(λ)*`.
pub fn equality_pair(node: &SNode, lambda: Complex64) -> Result<PairJ> {
    let a = frame::frame_value(node, lambda)?;
    let p = node.p();
    Ok(PairJ::Constant {
        r: linalg::block(&a, p, 1, 1).adjoint(),
        q: linalg::block(&a, p, 1, 0).adjoint(),
    })
}

/// Disk parameter in a pair file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiskParamJson {
    Named(String),
    Matrix(MatrixJson),
}

/// Pair file schema: `{"R", "Q"}` or `{"q", "a"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairJson {
    Constant {
        #[serde(rename = "R")]
        r: MatrixJson,
        #[serde(rename = "Q")]
        q: MatrixJson,
    },
    Disk {
        q: DiskParamJson,
        a: MatrixJson,
    },
}

impl PairJson {
    pub fn into_pair(&self, map: MoebiusMap) -> Result<PairJ> {
        let m = |name: &str, rows: &MatrixJson| {
            matrix_from_json(rows).map_err(|e| Error::InvalidInput(format!("{name}: {e}")))
        };
        match self {
            PairJson::Constant { r, q } => PairJ::constant(m("R", r)?, m("Q", q)?),
            PairJson::Disk { q, a } => {
                let a = m("a", a)?;
                let p = a.nrows();
                let qv = match q {
                    DiskParamJson::Named(name) if name == "zero" => linalg::zeros(p, p),
                    DiskParamJson::Named(name) if name == "identity" => linalg::identity(p),
                    DiskParamJson::Named(name) => {
                        return Err(Error::InvalidInput(format!("unknown disk parameter {name:?}")))
                    }
                    DiskParamJson::Matrix(rows) => m("q", rows)?,
                };
                pair_from_disk_pair(Arc::new(move |_| qv.clone()), a, map)
            }
        }
    }

    /// Serializable form of a constant pair.
    pub fn from_constant(pair: &PairJ) -> Option<Self> {
        match pair {
            PairJ::Constant { r, q } => Some(PairJson::Constant {
                r: crate::report::matrix_to_json(r),
                q: crate::report::matrix_to_json(q),
            }),
            _ => None,
        }
    }
}
