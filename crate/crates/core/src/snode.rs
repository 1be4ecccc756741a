//! Finite-dimensional self-adjoint S-nodes `{A, S, Π = [Φ₁ Φ₂]}` with
//! `AS − SA* = iΠJΠ*`, their validation, a seeded generator of nilpotent
//! ("moment") nodes, the sign flip `{−A, S, [−Φ₂ Φ₁]}`, and the resolvent
//! pole bookkeeping used by every downstream evaluation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE, ZERO};

/// Numerical thresholds used when checking node hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// Relative tolerance for `‖S − S*‖ ≤ τ(1 + ‖S‖)`.
    pub hermitian: f64,
    /// Relative tolerance for `‖AS − SA* − iΠJΠ*‖ ≤ τ(1 + ‖A‖‖S‖)`.
    pub identity: f64,
    /// Floor on the smallest eigenvalue of `S`, scaled by `max(1, ‖S‖)`.
    pub eps_min: f64,
    /// Relative `σ_min` threshold for resolvent singularity.
    pub pole: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            identity: 1e-10,
            eps_min: 1e-12,
            pole: 1e-12,
        }
    }
}

/// The signature matrices `J`, `j` and the unitary `K` with `KjK* = J`.
#[derive(Debug, Clone)]
pub struct SignatureConstants {
    pub p: usize,
    pub big_j: CMatrix,
    pub small_j: CMatrix,
    pub k: CMatrix,
}

impl SignatureConstants {
    pub fn new(p: usize) -> Self {
        let id = linalg::identity(p);
        let z = linalg::zeros(p, p);
        let big_j = linalg::from_blocks(&z, &id, &id, &z);
        let small_j = linalg::from_blocks(&id, &z, &z, &(-&id));
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let k = linalg::from_blocks(&id, &(-&id), &id, &id) * h;
        Self { p, big_j, small_j, k }
    }

    /// `K·J`, the map from property-(−j) pairs to property-J pairs.
    pub fn kj(&self) -> CMatrix {
        &self.k * &self.big_j
    }
}

/// `J = [[0, I],[I, 0]]` of size `2p`.
pub fn signature_j(p: usize) -> CMatrix {
    SignatureConstants::new(p).big_j
}

/// A finite-dimensional S-node. Dimensions and finiteness are enforced on
/// construction; the operator identity is checked by [`validate_node`].
#[derive(Debug, Clone)]
pub struct SNode {
    n: usize,
    p: usize,
    a: CMatrix,
    s: CMatrix,
    phi1: CMatrix,
    phi2: CMatrix,
    a_adj: CMatrix,
    s_inv_pi: Option<CMatrix>,
    eigenvalues: Vec<Complex64>,
    a_norm: f64,
}

impl SNode {
    pub fn new(a: CMatrix, s: CMatrix, phi1: CMatrix, phi2: CMatrix) -> Result<Self> {
        let n = a.nrows();
        let p = phi1.ncols();
        if n == 0 || p == 0 {
            return Err(Error::DimensionMismatch("n and p must be positive".into()));
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if s.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "S is {:?}, expected ({n}, {n})",
                s.shape()
            )));
        }
        if phi1.shape() != (n, p) || phi2.shape() != (n, p) {
            return Err(Error::DimensionMismatch(format!(
                "Phi1 is {:?}, Phi2 is {:?}, expected ({n}, {p})",
                phi1.shape(),
                phi2.shape()
            )));
        }
        for (m, name) in [(&a, "A"), (&s, "S"), (&phi1, "Phi1"), (&phi2, "Phi2")] {
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        let pi = linalg::hstack(&phi1, &phi2);
        let s_inv_pi = linalg::solve(&s, &pi);
        let eigenvalues = linalg::eigenvalues(&a)?;
        let a_norm = linalg::spectral_norm(&a);
        Ok(Self {
            n,
            p,
            a_adj: a.adjoint(),
            a,
            s,
            phi1,
            phi2,
            s_inv_pi,
            eigenvalues,
            a_norm,
        })
    }

    /// Scalar node `{a, s, φ₁, φ₂}` with `n = p = 1`.
    pub fn scalar(a: Complex64, s: Complex64, phi1: Complex64, phi2: Complex64) -> Result<Self> {
        Self::new(
            linalg::scalar(a),
            linalg::scalar(s),
            linalg::scalar(phi1),
            linalg::scalar(phi2),
        )
    }

    /// `E0 = {A=0, S=1, Φ₁=0, Φ₂=1}`.
    pub fn e0() -> Self {
        Self::scalar(ZERO, ONE, ZERO, ONE).expect("E0 is well formed")
    }

    /// `Eβ = {A=0, S=1, Φ₁=i, Φ₂=1}`.
    pub fn e_beta() -> Self {
        Self::scalar(ZERO, ONE, I, ONE).expect("Ebeta is well formed")
    }

    /// `{A=i, S=1, Φ₁=1, Φ₂=1}`: a valid node whose frame has a pole at `z = i`.
    pub fn a_equals_i() -> Self {
        Self::scalar(I, ONE, ONE, ONE).expect("A=i node is well formed")
    }

    /// Block-diagonal direct sum of two nodes.
    pub fn direct_sum(&self, other: &SNode) -> Result<Self> {
        let n = self.n + other.n;
        let p = self.p + other.p;
        let diag = |x: &CMatrix, y: &CMatrix, r: usize, c: usize| {
            let mut m = linalg::zeros(r, c);
            m.view_mut((0, 0), x.shape()).copy_from(x);
            m.view_mut(x.shape(), y.shape()).copy_from(y);
            m
        };
        Self::new(
            diag(&self.a, &other.a, n, n),
            diag(&self.s, &other.s, n, n),
            diag(&self.phi1, &other.phi1, n, p),
            diag(&self.phi2, &other.phi2, n, p),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn a(&self) -> &CMatrix {
        &self.a
    }
    pub fn a_adjoint(&self) -> &CMatrix {
        &self.a_adj
    }
    pub fn s(&self) -> &CMatrix {
        &self.s
    }
    pub fn phi1(&self) -> &CMatrix {
        &self.phi1
    }
    pub fn phi2(&self) -> &CMatrix {
        &self.phi2
    }
    pub fn pi(&self) -> CMatrix {
        linalg::hstack(&self.phi1, &self.phi2)
    }
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }
    /// Eigenvalues of `A` (exact zeros for triangular nilpotent `A`).
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// `S⁻¹Π`, or `ResolventSingular` at 0 if `S` is singular.
    pub fn s_inv_pi(&self) -> Result<&CMatrix> {
        self.s_inv_pi.as_ref().ok_or(Error::ResolventSingular { z: ZERO })
    }

    fn is_zero_eigenvalue(&self, lambda: Complex64) -> bool {
        lambda.norm() <= 1e-12 * (1.0 + self.a_norm)
    }

    /// Points `z = 1/λ̄` where `I − zA*` is singular.
    pub fn frame_poles(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .filter(|l| !self.is_zero_eigenvalue(**l))
            .map(|l| 1.0 / l.conj())
            .collect()
    }

    /// Points `z = 1/λ` where `I − zA` is singular.
    pub fn conjugate_poles(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .filter(|l| !self.is_zero_eigenvalue(**l))
            .map(|l| 1.0 / l)
            .collect()
    }

    /// `I − zA*`.
    pub fn resolvent_base_adj(&self, z: Complex64) -> CMatrix {
        linalg::identity(self.n) - &self.a_adj * z
    }

    /// `I − λA`.
    pub fn resolvent_base(&self, lambda: Complex64) -> CMatrix {
        linalg::identity(self.n) - &self.a * lambda
    }

    /// Residual `‖AS − SA* − iΠJΠ*‖_F`.
    pub fn identity_residual(&self) -> f64 {
        let pi = self.pi();
        let j = signature_j(self.p);
        let lhs = &self.a * &self.s - &self.s * &self.a_adj;
        let rhs = &pi * &j * pi.adjoint() * I;
        linalg::fro(&(lhs - rhs))
    }

    /// Serializable form.
    pub fn to_json(&self) -> NodeJson {
        NodeJson {
            n: self.n,
            p: self.p,
            a: crate::report::matrix_to_json(&self.a),
            s: crate::report::matrix_to_json(&self.s),
            phi1: crate::report::matrix_to_json(&self.phi1),
            phi2: crate::report::matrix_to_json(&self.phi2),
        }
    }

    pub fn from_json(doc: &NodeJson) -> Result<Self> {
        let m = |name: &str, rows: &crate::report::MatrixJson| {
            crate::report::matrix_from_json(rows).map_err(|e| Error::InvalidInput(format!("{name}: {e}")))
        };
        let node = Self::new(
            m("A", &doc.a)?,
            m("S", &doc.s)?,
            m("Phi1", &doc.phi1)?,
            m("Phi2", &doc.phi2)?,
        )?;
        if node.n != doc.n || node.p != doc.p {
            return Err(Error::DimensionMismatch(format!(
                "declared n={}, p={} but matrices give n={}, p={}",
                doc.n, doc.p, node.n, node.p
            )));
        }
        Ok(node)
    }
}

/// File schema for nodes: complex scalars as `[re, im]`, matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeJson {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: crate::report::MatrixJson,
    #[serde(rename = "S")]
    pub s: crate::report::MatrixJson,
    #[serde(rename = "Phi1")]
    pub phi1: crate::report::MatrixJson,
    #[serde(rename = "Phi2")]
    pub phi2: crate::report::MatrixJson,
}

/// One failed node hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ValidationIssue {
    NonHermitianS { residual: f64, tolerance: f64 },
    IdentityViolation { residual: f64, tolerance: f64 },
    SNotPositive { min_eigenvalue: f64 },
    Phi2RankDeficient { rank: usize, p: usize },
}

impl From<&ValidationIssue> for Error {
    fn from(issue: &ValidationIssue) -> Self {
        match *issue {
            ValidationIssue::NonHermitianS { residual, tolerance } => Error::NonHermitianS { residual, tolerance },
            ValidationIssue::IdentityViolation { residual, tolerance } => {
                Error::IdentityViolation { residual, tolerance }
            }
            ValidationIssue::SNotPositive { min_eigenvalue } => Error::SNotPositive { min_eigenvalue },
            ValidationIssue::Phi2RankDeficient { rank, p } => Error::Phi2RankDeficient { rank, p },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub p: usize,
    pub identity_residual: f64,
    pub identity_tolerance: f64,
    pub hermitian_residual: f64,
    pub s_min_eigenvalue: f64,
    pub s_max_eigenvalue: f64,
    pub phi2_rank: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    /// The first failed check as an error, or the report itself.
    pub fn into_result(self) -> Result<Self> {
        match self.issues.first() {
            Some(issue) => Err(issue.into()),
            None => Ok(self),
        }
    }
}

/// Checks every S-node hypothesis and records the measured quantities.
pub fn validate_node(node: &SNode, tol: &ToleranceSet) -> ValidationReport {
    let s = node.s();
    let s_norm = linalg::spectral_norm(s);
    let herm_res = linalg::fro(&(s - s.adjoint()));
    let herm_tol = tol.hermitian * (1.0 + s_norm);

    let id_res = node.identity_residual();
    let id_tol = tol.identity * (1.0 + node.a_norm() * s_norm);

    let ev = linalg::herm_eigenvalues(s);
    let s_min = ev.first().copied().unwrap_or(0.0);
    let s_max = ev.last().copied().unwrap_or(0.0);
    let rank = linalg::rank(node.phi2());

    let mut issues = Vec::new();
    if herm_res > herm_tol {
        issues.push(ValidationIssue::NonHermitianS {
            residual: herm_res,
            tolerance: herm_tol,
        });
    }
    if id_res > id_tol {
        issues.push(ValidationIssue::IdentityViolation {
            residual: id_res,
            tolerance: id_tol,
        });
    }
    if s_min < tol.eps_min * s_max.max(1.0) {
        issues.push(ValidationIssue::SNotPositive { min_eigenvalue: s_min });
    }
    if rank < node.p() {
        issues.push(ValidationIssue::Phi2RankDeficient { rank, p: node.p() });
    }
    ValidationReport {
        n: node.n(),
        p: node.p(),
        identity_residual: id_res,
        identity_tolerance: id_tol,
        hermitian_residual: herm_res,
        s_min_eigenvalue: s_min,
        s_max_eigenvalue: s_max,
        phi2_rank: rank,
        issues,
    }
}

/// `{−A, S, [−Φ₂ Φ₁]}`; preserves the operator identity.
pub fn flip_node(node: &SNode) -> SNode {
    SNode::new(-node.a(), node.s().clone(), -node.phi2(), node.phi1().clone()).expect("flip preserves dimensions")
}

/// Least-squares solve of `i(Φ₁Φ₂* + Φ₂Φ₁*) = AS − SA*` for `Φ₁`.
///
/// Returns the minimum-norm solution and its residual. The map
/// `X ↦ XΦ₂* + Φ₂X*` is only real-linear, so the system is assembled over
/// the real and imaginary parts of `X`.
pub fn solve_phi1(a: &CMatrix, s: &CMatrix, phi2: &CMatrix) -> Result<(CMatrix, f64)> {
    let n = a.nrows();
    let p = phi2.ncols();
    if phi2.nrows() != n || s.shape() != (n, n) || a.ncols() != n {
        return Err(Error::DimensionMismatch("solve_phi1 operands".into()));
    }
    let target = (a * s - s * a.adjoint()) * Complex64::new(0.0, -1.0);
    let unknowns = 2 * n * p;
    let equations = 2 * n * n;
    let mut sys = DMatrix::<f64>::zeros(equations, unknowns);
    for r in 0..n {
        for col in 0..p {
            for (part, unit) in [(0, ONE), (1, I)] {
                let mut e = linalg::zeros(n, p);
                e[(r, col)] = unit;
                let img = &e * phi2.adjoint() + phi2 * e.adjoint();
                let idx = 2 * (r * p + col) + part;
                for (k, z) in img.iter().enumerate() {
                    sys[(2 * k, idx)] = z.re;
                    sys[(2 * k + 1, idx)] = z.im;
                }
            }
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(equations);
    for (k, z) in target.iter().enumerate() {
        rhs[2 * k] = z.re;
        rhs[2 * k + 1] = z.im;
    }
    // Minimum-norm solution through the eigen-decomposition of the normal
    // matrix; the kernel (Φ₂ times skew-Hermitian p×p) is always nontrivial.
    let normal = sys.transpose() * &sys;
    let proj = sys.transpose() * rhs;
    let eig = normal.symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.max().max(f64::MIN_POSITIVE);
    let mut x = nalgebra::DVector::<f64>::zeros(unknowns);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&proj) / l);
        }
    }
    let phi1 = CMatrix::from_fn(n, p, |r, col| {
        let idx = 2 * (r * p + col);
        Complex64::new(x[idx], x[idx + 1])
    });
    let resid = linalg::fro(&(&phi1 * phi2.adjoint() + phi2 * phi1.adjoint() - &target));
    Ok((phi1, resid))
}

fn random_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

/// Seeded nilpotent node: `A` strictly lower triangular, `S ≻ 0` random,
/// `Φ₂` of full column rank, `Φ₁` the minimum-norm least-squares solution
/// of the operator identity.
///
/// The node is produced as a congruence `{TA₀T⁻¹, TT*, TΠ₀}` of a
/// triangular model `{A₀, I, Π₀}` whose rows of `Π₀` are chosen so that the
/// strictly lower part of `iΠ₀JΠ₀*` satisfies the identity with `S = I`.
/// `T` is lower triangular, which keeps `A` strictly lower triangular.
pub fn build_moment_node(p: usize, n: usize, seed: u64) -> Result<SNode> {
    if p == 0 || n == 0 {
        return Err(Error::InvalidInput("n and p must be at least 1".into()));
    }
    if n < p {
        return Err(Error::InvalidInput(format!(
            "n = {n} < p = {p}: Phi2 cannot have full column rank"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi1_0 = CMatrix::from_fn(n, p, |_, _| random_complex(&mut rng, 0.6));
    let phi2_0 = CMatrix::from_fn(n, p, |_, _| random_complex(&mut rng, 0.6));
    // Re<row(Φ₁⁰), row(Φ₂⁰)> = 0 makes the diagonal of iΠ₀JΠ₀* vanish.
    for r in 0..n {
        let inner: Complex64 = (0..p).map(|c| phi1_0[(r, c)] * phi2_0[(r, c)].conj()).sum();
        let norm2: f64 = (0..p).map(|c| phi2_0[(r, c)].norm_sqr()).sum();
        if norm2 > 0.0 {
            let shift = inner.re / norm2;
            for c in 0..p {
                let v = phi2_0[(r, c)];
                phi1_0[(r, c)] -= v * shift;
            }
        }
    }
    let k = (&phi1_0 * phi2_0.adjoint() + &phi2_0 * phi1_0.adjoint()) * I;
    let a0 = CMatrix::from_fn(n, n, |r, c| if r > c { k[(r, c)] } else { ZERO });

    let t = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(rng.random_range(1.0..2.0), 0.0)
        } else if r > c {
            random_complex(&mut rng, 0.3)
        } else {
            ZERO
        }
    });
    let t_inv = t
        .solve_lower_triangular(&linalg::identity(n))
        .ok_or(Error::ConstructionInfeasible {
            residual: f64::INFINITY,
        })?;
    let mut a = &t * &a0 * &t_inv;
    for r in 0..n {
        for c in r..n {
            a[(r, c)] = ZERO;
        }
    }
    let s = linalg::herm_part(&(&t * t.adjoint()));
    let phi2 = &t * &phi2_0;

    // TΦ₁⁰ already solves the identity; the minimum-norm solution is used so
    // that the n = 1 case reduces to E0.
    let (phi1, resid) = solve_phi1(&a, &s, &phi2)?;
    let scale = 1.0 + linalg::spectral_norm(&a) * linalg::spectral_norm(&s);
    if resid > 1e-10 * scale {
        return Err(Error::ConstructionInfeasible { residual: resid });
    }
    SNode::new(a, s, phi1, phi2)
}

/// Eigenvalue-based classification of the resolvent hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Poles of `(I − zA*)⁻¹` in the open upper half-plane.
    pub upper_half_plane_poles: Vec<Complex64>,
    /// `I − zA*` invertible on all of `ℂ₊`.
    pub hypothesis_a: bool,
    /// Poles of `(I − zA)⁻¹` in `{Im z ≤ 0} ∪ {Im z > 0, |z| ≥ r0}`.
    pub region_poles: Vec<Complex64>,
    /// `I − zA` invertible on the region above.
    pub hypothesis_b: bool,
    pub nilpotent: bool,
    pub r0: f64,
}

pub fn spectrum_report(node: &SNode, r0: f64) -> SpectrumReport {
    let upper: Vec<Complex64> = node.frame_poles().into_iter().filter(|z| z.im > 0.0).collect();
    let region: Vec<Complex64> = node
        .conjugate_poles()
        .into_iter()
        .filter(|z| z.im <= 0.0 || z.norm() >= r0)
        .collect();
    let nilpotent = node.frame_poles().is_empty();
    SpectrumReport {
        eigenvalues: node.eigenvalues().to_vec(),
        hypothesis_a: upper.is_empty(),
        upper_half_plane_poles: upper,
        hypothesis_b: region.is_empty(),
        region_poles: region,
        nilpotent,
        r0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn e0_and_ebeta_validate_with_zero_residual() {
        for node in [SNode::e0(), SNode::e_beta()] {
            let rep = validate_node(&node, &ToleranceSet::default());
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(rep.identity_residual, 0.0);
        }
    }

    #[test]
    fn unit_node_violates_identity() {
        let node = SNode::scalar(ONE, ONE, ONE, ONE).unwrap();
        let rep = validate_node(&node, &ToleranceSet::default());
        assert!((rep.identity_residual - 2.0).abs() < 1e-15);
        assert!(matches!(
            rep.clone().into_result(),
            Err(Error::IdentityViolation { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = SNode::new(
            linalg::zeros(2, 2),
            linalg::identity(3),
            linalg::zeros(2, 1),
            linalg::zeros(2, 1),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn non_hermitian_and_indefinite_s_are_reported() {
        let node = SNode::new(
            linalg::zeros(2, 2),
            crate::linalg::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]),
            linalg::zeros(2, 1),
            crate::linalg::from_real_rows(&[&[1.0], &[0.0]]),
        )
        .unwrap();
        let rep = validate_node(&node, &ToleranceSet::default());
        assert!(rep
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NonHermitianS { .. })));
        assert!(rep
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::SNotPositive { .. })));
    }

    #[test]
    fn flip_of_e0_loses_phi2_rank() {
        let f = flip_node(&SNode::e0());
        assert_eq!(f.phi1()[(0, 0)], -ONE);
        assert_eq!(f.phi2()[(0, 0)], ZERO);
        let rep = validate_node(&f, &ToleranceSet::default());
        assert_eq!(rep.identity_residual, 0.0);
        assert_eq!(rep.issues, vec![ValidationIssue::Phi2RankDeficient { rank: 0, p: 1 }]);
    }

    #[test]
    fn flip_of_ebeta() {
        let f = flip_node(&SNode::e_beta());
        assert_eq!(f.a()[(0, 0)], ZERO);
        assert_eq!(f.phi1()[(0, 0)], -ONE);
        assert_eq!(f.phi2()[(0, 0)], I);
        assert_eq!(f.identity_residual(), 0.0);
    }

    #[test]
    fn double_flip_negates_pi() {
        let node = build_moment_node(2, 4, 3).unwrap();
        let ff = flip_node(&flip_node(&node));
        assert_eq!(ff.a(), node.a());
        assert_eq!(ff.phi1(), &(-node.phi1()));
        assert_eq!(ff.phi2(), &(-node.phi2()));
    }

    #[test]
    fn moment_node_single_state_is_e0_type() {
        let node = build_moment_node(1, 1, 42).unwrap();
        assert_eq!(node.a()[(0, 0)], ZERO);
        assert!(node.phi1()[(0, 0)].norm() < 1e-14);
        assert!(validate_node(&node, &ToleranceSet::default()).passed());
    }

    #[test]
    fn moment_node_examples() {
        let node = build_moment_node(1, 2, 7).unwrap();
        let rep = validate_node(&node, &ToleranceSet::default());
        assert!(rep.passed());
        assert!(rep.identity_residual <= 1e-12);

        let node = build_moment_node(2, 4, 1).unwrap();
        assert!(node.eigenvalues().iter().all(|l| *l == ZERO));
        assert!(validate_node(&node, &ToleranceSet::default()).s_min_eigenvalue > 0.0);
    }

    #[test]
    fn moment_node_rejects_n_below_p() {
        assert!(build_moment_node(3, 2, 0).is_err());
    }

    #[test]
    fn phi1_solve_recovers_feasible_nodes() {
        let node = build_moment_node(2, 4, 1).unwrap();
        let (phi1, resid) = solve_phi1(node.a(), node.s(), node.phi2()).unwrap();
        assert!(resid < 1e-10);
        let rebuilt = SNode::new(node.a().clone(), node.s().clone(), phi1, node.phi2().clone()).unwrap();
        assert!(validate_node(&rebuilt, &ToleranceSet::default()).passed());
    }

    #[test]
    fn random_a_makes_phi1_solve_infeasible() {
        let a = crate::linalg::from_real_rows(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.5, 2.0, 0.0]]);
        let s = linalg::identity(3);
        let phi2 = crate::linalg::from_real_rows(&[&[1.0], &[0.0], &[0.0]]);
        let (_, resid) = solve_phi1(&a, &s, &phi2).unwrap();
        assert!(resid > 1e-3);
    }

    #[test]
    fn spectrum_of_e0_and_a_equals_i() {
        let rep = spectrum_report(&SNode::e0(), 1.0);
        assert!(rep.hypothesis_a && rep.hypothesis_b && rep.nilpotent);

        let rep = spectrum_report(&SNode::a_equals_i(), 1.0);
        assert!(!rep.hypothesis_a);
        assert!((rep.upper_half_plane_poles[0] - I).norm() < 1e-15);
        assert!(!rep.hypothesis_b);
        assert!((rep.region_poles[0] + I).norm() < 1e-15);
    }

    #[test]
    fn jordan_block_is_nilpotent() {
        let a = crate::linalg::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let node = SNode::new(a, linalg::identity(2), linalg::zeros(2, 1), linalg::zeros(2, 1)).unwrap();
        let rep = spectrum_report(&node, 1.0);
        assert!(rep.nilpotent && rep.hypothesis_a && rep.hypothesis_b);
    }

    #[test]
    fn signature_constants_relations() {
        for p in 1..4 {
            let sc = SignatureConstants::new(p);
            let id = linalg::identity(2 * p);
            assert!(linalg::fro(&(&sc.big_j * &sc.big_j - &id)) < 1e-14);
            assert!(linalg::fro(&(&sc.small_j * &sc.small_j - &id)) < 1e-14);
            assert!(linalg::fro(&(sc.k.adjoint() * &sc.k - &id)) < 1e-14);
            assert!(linalg::fro(&(&sc.k * &sc.small_j * sc.k.adjoint() - &sc.big_j)) < 1e-14);
        }
    }
}
