//! The frame `𝔄(S,z) = I − izΠ*(I − zA*)⁻¹S⁻¹ΠJ`, the transfer matrix
//! function `w_A`, the kernel `ρ(z,λ)` and the identities tying them together.

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::MoebiusMap;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE};
use crate::snode::{signature_j, SNode};

/// Distance below which a point is treated as sitting on a known pole.
pub const POLE_EXCLUSION: f64 = 1e-8;
/// Relative `σ_min` threshold for resolvent singularity.
pub const POLE_SIGMA: f64 = 1e-12;
/// PSD test threshold, relative to `1 + ‖M‖`.
pub const PSD_TOL: f64 = 1e-10;

/// Value of the frame at one point.
#[derive(Debug, Clone, Serialize)]
pub struct FrameSample {
    pub z: Complex64,
    pub p: usize,
    /// `2p×2p` frame value; NaN-filled when `is_pole`.
    #[serde(with = "crate::report::matrix_serde")]
    pub value: CMatrix,
    pub is_pole: bool,
}

impl FrameSample {
    /// Block `(i, j)` with `i, j ∈ {1, 2}`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        linalg::block(&self.value, self.p, i - 1, j - 1)
    }
    pub fn a11(&self) -> CMatrix {
        self.block(1, 1)
    }
    pub fn a12(&self) -> CMatrix {
        self.block(1, 2)
    }
    pub fn a21(&self) -> CMatrix {
        self.block(2, 1)
    }
    pub fn a22(&self) -> CMatrix {
        self.block(2, 2)
    }
}

fn near_known_pole(poles: &[Complex64], z: Complex64) -> bool {
    poles.iter().any(|p| (z - p).norm() < POLE_EXCLUSION)
}

/// `(I − zA*)⁻¹ X`, refusing poles.
fn resolvent_adj_solve(node: &SNode, z: Complex64, rhs: &CMatrix) -> Result<CMatrix> {
    if near_known_pole(&node.frame_poles(), z) {
        return Err(Error::FramePole { z });
    }
    let m = node.resolvent_base_adj(z);
    if linalg::sigma_min(&m) < POLE_SIGMA * (1.0 + z.norm() * node.a_norm()) {
        return Err(Error::FramePole { z });
    }
    linalg::solve(&m, rhs).ok_or(Error::FramePole { z })
}

/// `(I − λA)⁻¹ X`.
fn resolvent_solve(node: &SNode, lambda: Complex64, rhs: &CMatrix) -> Result<CMatrix> {
    if near_known_pole(&node.conjugate_poles(), lambda) {
        return Err(Error::ResolventSingular { z: lambda });
    }
    let m = node.resolvent_base(lambda);
    if linalg::sigma_min(&m) < POLE_SIGMA * (1.0 + lambda.norm() * node.a_norm()) {
        return Err(Error::ResolventSingular { z: lambda });
    }
    linalg::solve(&m, rhs).ok_or(Error::ResolventSingular { z: lambda })
}

/// `S⁻¹X`.
fn s_solve(node: &SNode, rhs: &CMatrix) -> Result<CMatrix> {
    linalg::solve(node.s(), rhs).ok_or(Error::ResolventSingular {
        z: Complex64::new(0.0, 0.0),
    })
}

/// Frame value, failing with `FramePole` at poles.
pub fn frame_value(node: &SNode, z: Complex64) -> Result<CMatrix> {
    let p = node.p();
    let x = resolvent_adj_solve(node, z, node.s_inv_pi()?)?;
    let j = signature_j(p);
    let corr = node.pi().adjoint() * x * j * (I * z);
    Ok(linalg::identity(2 * p) - corr)
}

/// `w_A(λ) = I − iJΠ*S⁻¹(A − λI)⁻¹Π`.
pub fn eval_transfer(node: &SNode, lambda: Complex64) -> Result<CMatrix> {
    let n = node.n();
    let p = node.p();
    let m = node.a() - linalg::identity(n) * lambda;
    if linalg::sigma_min(&m) < POLE_SIGMA * (1.0 + lambda.norm() + node.a_norm()) {
        return Err(Error::ResolventSingular { z: lambda });
    }
    let pi = node.pi();
    let x = linalg::solve(&m, &pi).ok_or(Error::ResolventSingular { z: lambda })?;
    let y = s_solve(node, &x)?;
    let j = signature_j(p);
    Ok(linalg::identity(2 * p) - j * pi.adjoint() * y * I)
}

/// Frame sample with block access; poles are flagged rather than returned as errors.
pub fn eval_frame(node: &SNode, z: Complex64) -> FrameSample {
    let p = node.p();
    match frame_value(node, z) {
        Ok(value) => FrameSample {
            z,
            p,
            value,
            is_pole: false,
        },
        Err(_) => FrameSample {
            z,
            p,
            value: CMatrix::from_element(2 * p, 2 * p, Complex64::new(f64::NAN, f64::NAN)),
            is_pole: true,
        },
    }
}

/// `Π*(I − zA*)⁻¹S⁻¹(I − λA)⁻¹Π` restricted by `left`/`right` column selections.
fn sandwich(node: &SNode, z: Complex64, lambda: Complex64, left: &CMatrix, right: &CMatrix) -> Result<CMatrix> {
    let y = resolvent_solve(node, lambda, right)?;
    let y = s_solve(node, &y)?;
    let y = resolvent_adj_solve(node, z, &y)?;
    Ok(left.adjoint() * y)
}

/// Right-hand side `J − i(z − λ)Π*(I − zA*)⁻¹S⁻¹(I − λA)⁻¹Π` of the kernel identity.
pub fn kernel_rhs(node: &SNode, z: Complex64, lambda: Complex64) -> Result<CMatrix> {
    let pi = node.pi();
    let mid = sandwich(node, z, lambda, &pi, &pi)?;
    Ok(signature_j(node.p()) - mid * (I * (z - lambda)))
}

/// `‖𝔄(z)J𝔄(λ̄)* − RHS‖_F`.
pub fn kernel_identity_residual(node: &SNode, z: Complex64, lambda: Complex64) -> Result<f64> {
    let az = frame_value(node, z)?;
    let al = frame_value(node, lambda.conj())?;
    let lhs = az * signature_j(node.p()) * al.adjoint();
    let rhs = kernel_rhs(node, z, lambda)?;
    Ok(linalg::fro(&(lhs - rhs)))
}

/// Kernel `ρ(z,λ) = i(λ − z)Φ₂*(I − zA*)⁻¹S⁻¹(I − λA)⁻¹Φ₂`.
#[derive(Debug, Clone, Serialize)]
pub struct RhoValue {
    pub z: Complex64,
    pub lambda: Complex64,
    #[serde(with = "crate::report::matrix_serde")]
    pub value: CMatrix,
}

pub fn rho(node: &SNode, z: Complex64, lambda: Complex64) -> Result<RhoValue> {
    let phi2 = node.phi2();
    let mid = sandwich(node, z, lambda, phi2, phi2)?;
    Ok(RhoValue {
        z,
        lambda,
        value: mid * (I * (lambda - z)),
    })
}

/// `𝔄₂₁𝔄₂₂* + 𝔄₂₂𝔄₂₁*` from a frame value.
pub fn block_form(frame: &CMatrix, p: usize) -> CMatrix {
    let a21 = linalg::block(frame, p, 1, 0);
    let a22 = linalg::block(frame, p, 1, 1);
    &a21 * a22.adjoint() + &a22 * a21.adjoint()
}

/// `‖𝔄(z)J𝔄(z̄)* − J‖_F`.
pub fn conjugate_identity_residual(node: &SNode, z: Complex64) -> Result<f64> {
    let j = signature_j(node.p());
    let a = frame_value(node, z)?;
    let b = frame_value(node, z.conj())?;
    Ok(linalg::fro(&(a * &j * b.adjoint() - j)))
}

/// `‖𝔄₂₁𝔄₂₂* + 𝔄₂₂𝔄₂₁* − ρ(z, z̄)‖_F`.
pub fn block_identity_residual(node: &SNode, z: Complex64) -> Result<f64> {
    let a = frame_value(node, z)?;
    let r = rho(node, z, z.conj())?;
    Ok(linalg::fro(&(block_form(&a, node.p()) - r.value)))
}

/// Eigenvalue checks of the J-inequalities at a non-real point.
#[derive(Debug, Clone, Serialize)]
pub struct JReport {
    pub z: Complex64,
    pub upper: bool,
    /// `λ_min(𝔄*J𝔄 − J)`, upper half-plane only.
    pub j_form_min: Option<f64>,
    /// `λ_min` (upper) or `λ_max` (lower) of `𝔄₂₁𝔄₂₂* + 𝔄₂₂𝔄₂₁*`.
    pub block_extreme: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_j_inequality(node: &SNode, z: Complex64) -> Result<JReport> {
    if z.im == 0.0 {
        return Err(Error::RealAxisPoint { z });
    }
    let p = node.p();
    let a = frame_value(node, z)?;
    let j = signature_j(p);
    let scale = 1.0 + linalg::fro(&a).powi(2);
    let tol = PSD_TOL * scale;
    let form = block_form(&a, p);
    if z.im > 0.0 {
        let jf = linalg::lambda_min(&(a.adjoint() * &j * &a - &j));
        let bmin = linalg::lambda_min(&form);
        Ok(JReport {
            z,
            upper: true,
            j_form_min: Some(jf),
            block_extreme: bmin,
            tolerance: tol,
            passed: jf >= -tol && bmin > 0.0,
        })
    } else {
        let bmax = linalg::lambda_max(&form);
        Ok(JReport {
            z,
            upper: false,
            j_form_min: None,
            block_extreme: bmax,
            tolerance: tol,
            passed: bmax < 0.0,
        })
    }
}

/// `𝔄(S,z)⁻¹ = J𝔄(S,z̄)*J`.
pub fn inverse_frame(node: &SNode, z: Complex64) -> Result<CMatrix> {
    frame_value(node, z)?;
    let j = signature_j(node.p());
    let abar = frame_value(node, z.conj())?;
    Ok(&j * abar.adjoint() * &j)
}

/// `𝒱(z) = [I_p 0] + izΦ₁*S⁻¹(I − zA)⁻¹ΠJ`, a `p×2p` matrix.
pub fn cal_v(node: &SNode, z: Complex64) -> Result<CMatrix> {
    let p = node.p();
    let x = resolvent_solve(node, z, &node.pi())?;
    let y = s_solve(node, &x)?;
    let corr = node.phi1().adjoint() * y * signature_j(p) * (I * z);
    let mut head = linalg::zeros(p, 2 * p);
    head.view_mut((0, 0), (p, p)).copy_from(&linalg::identity(p));
    Ok(head + corr)
}

/// Residual of `c(z)⁻¹ = 𝒱(z)[a(z)c(z)⁻¹; I]`.
pub fn cal_v_residual(node: &SNode, z: Complex64) -> Result<f64> {
    let p = node.p();
    let frame = frame_value(node, z)?;
    let a = linalg::block(&frame, p, 0, 0);
    let c = linalg::block(&frame, p, 1, 0);
    let c_inv = linalg::inverse(&c).ok_or(Error::CBlockSingular { z })?;
    let stacked = linalg::vstack(&(&a * &c_inv), &linalg::identity(p));
    let v = cal_v(node, z)?;
    Ok(linalg::fro(&(v * stacked - &c_inv)) / (1.0 + linalg::fro(&c_inv)))
}

/// `Υ(ζ) = â(ζ)ĉ(ζ)⁻¹` with `a = 𝔄₁₁`, `c = 𝔄₂₁`.
pub fn upsilon(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<CMatrix> {
    let z = map.to_halfplane(zeta)?;
    let p = node.p();
    let frame = frame_value(node, z)?;
    let a = linalg::block(&frame, p, 0, 0);
    let c = linalg::block(&frame, p, 1, 0);
    if linalg::sigma_min(&c) <= POLE_SIGMA * (1.0 + linalg::fro(&c)) {
        return Err(Error::CBlockSingular { z });
    }
    linalg::right_divide(&a, &c).ok_or(Error::CBlockSingular { z })
}

/// Residual of `𝔄(z)·inverse_frame(z) = I`.
pub fn inverse_residual(node: &SNode, z: Complex64) -> Result<f64> {
    let a = frame_value(node, z)?;
    let inv = inverse_frame(node, z)?;
    let id = linalg::identity(2 * node.p());
    Ok(linalg::fro(&(&a * &inv - &id)).max(linalg::fro(&(&inv * &a - id))))
}

/// `‖𝔄(z) − w_A(1/z̄)*‖_F` for `z ≠ 0`.
pub fn duality_residual(node: &SNode, z: Complex64) -> Result<f64> {
    let a = frame_value(node, z)?;
    let w = eval_transfer(node, ONE / z.conj())?;
    Ok(linalg::fro(&(a - w.adjoint())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_rows, ZERO};

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let d = linalg::fro(&(a - b));
        assert!(d <= tol, "residual {d:e}\n{a}\n{b}");
    }

    #[test]
    fn transfer_of_e0() {
        let e0 = SNode::e0();
        close(
            &eval_transfer(&e0, I).unwrap(),
            &from_rows(&[vec![ONE, ONE], vec![ZERO, ONE]]),
            1e-15,
        );
        close(
            &eval_transfer(&e0, c(0.0, 2.0)).unwrap(),
            &from_rows(&[vec![ONE, c(0.5, 0.0)], vec![ZERO, ONE]]),
            1e-15,
        );
    }

    #[test]
    fn transfer_decays_to_identity() {
        let node = crate::snode::build_moment_node(2, 4, 5).unwrap();
        let w = eval_transfer(&node, c(0.0, 1e8)).unwrap();
        close(&w, &linalg::identity(4), 1e-6);
    }

    #[test]
    fn transfer_refuses_eigenvalues() {
        assert!(matches!(
            eval_transfer(&SNode::e0(), ZERO),
            Err(Error::ResolventSingular { .. })
        ));
    }

    #[test]
    fn frame_examples() {
        let node = crate::snode::build_moment_node(2, 4, 9).unwrap();
        close(&eval_frame(&node, ZERO).value, &linalg::identity(4), 0.0);

        let f = eval_frame(&SNode::e0(), c(0.0, 2.0));
        close(&f.value, &from_rows(&[vec![ONE, ZERO], vec![c(2.0, 0.0), ONE]]), 1e-15);
        assert_eq!(f.a21()[(0, 0)], c(2.0, 0.0));

        let z = c(0.3, -1.7);
        let f = eval_frame(&SNode::e_beta(), z);
        let expected = from_rows(&[vec![ONE - z, -I * z], vec![-I * z, ONE + z]]);
        close(&f.value, &expected, 1e-14);
        assert!((linalg::det(&f.value) - ONE).norm() < 1e-14);
    }

    #[test]
    fn frame_pole_is_flagged() {
        let f = eval_frame(&SNode::a_equals_i(), I);
        assert!(f.is_pole);
        let f = eval_frame(&SNode::a_equals_i(), I + c(1e-9, 0.0));
        assert!(f.is_pole);
    }

    #[test]
    fn kernel_identity_on_e0() {
        let e0 = SNode::e0();
        let z = c(0.0, 2.0);
        assert!(kernel_identity_residual(&e0, z, z).unwrap() < 1e-15);
        let a = frame_value(&e0, z).unwrap();
        let j = signature_j(1);
        let m = &a * &j * a.adjoint() - &j;
        assert!((m[(1, 1)] - c(4.0, 0.0)).norm() < 1e-14);
        assert!((m[(1, 1)] - rho(&e0, z, z.conj()).unwrap().value[(0, 0)]).norm() < 1e-14);
        assert_eq!(kernel_identity_residual(&e0, ZERO, ZERO).unwrap(), 0.0);
    }

    #[test]
    fn j_inequality_on_e0() {
        let e0 = SNode::e0();
        let rep = check_j_inequality(&e0, c(0.0, 2.0)).unwrap();
        assert!(rep.passed);
        assert!((rep.block_extreme - 4.0).abs() < 1e-14);
        assert!(rep.j_form_min.unwrap().abs() < 1e-14);
        let rep = check_j_inequality(&e0, c(0.0, -2.0)).unwrap();
        assert!(rep.passed);
        assert!((rep.block_extreme + 4.0).abs() < 1e-14);
        assert!(matches!(
            check_j_inequality(&e0, c(1.0, 0.0)),
            Err(Error::RealAxisPoint { .. })
        ));
    }

    #[test]
    fn rho_examples() {
        let e0 = SNode::e0();
        assert_eq!(rho(&e0, c(0.5, 1.0), c(0.5, 1.0)).unwrap().value[(0, 0)], ZERO);
        assert!((rho(&e0, I, -I).unwrap().value[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        let s2 = SNode::scalar(ZERO, c(2.0, 0.0), ZERO, ONE).unwrap();
        assert!((rho(&s2, I, -I).unwrap().value[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn inverse_frame_of_e0() {
        let e0 = SNode::e0();
        let z = c(0.7, 1.3);
        let inv = inverse_frame(&e0, z).unwrap();
        close(&inv, &from_rows(&[vec![ONE, ZERO], vec![I * z, ONE]]), 1e-15);
        close(&inverse_frame(&e0, ZERO).unwrap(), &linalg::identity(2), 0.0);
    }

    #[test]
    fn cal_v_examples() {
        let z = c(0.4, 0.9);
        close(&cal_v(&SNode::e0(), z).unwrap(), &from_rows(&[vec![ONE, ZERO]]), 0.0);
        let v = cal_v(&SNode::e_beta(), z).unwrap();
        close(&v, &from_rows(&[vec![ONE + z, I * z]]), 1e-15);
        assert!(cal_v_residual(&SNode::e_beta(), z).unwrap() < 1e-14);
    }

    #[test]
    fn upsilon_examples() {
        let map = MoebiusMap::default();
        let u = upsilon(&SNode::e_beta(), ZERO, &map).unwrap();
        assert!((u[(0, 0)] - c(1.0, -1.0)).norm() < 1e-14);
        let u = upsilon(&SNode::e0(), ZERO, &map).unwrap();
        assert!((u[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn duality_with_transfer() {
        let node = crate::snode::build_moment_node(2, 4, 11).unwrap();
        for z in [c(0.3, 0.8), c(-1.2, 0.1), c(2.0, -0.5)] {
            assert!(duality_residual(&node, z).unwrap() < 1e-10);
        }
    }
}
