//! Disk-side objects `𝒜 = 𝔄̂KJ`, `χ`, `Δ`, `f`, the entropy inequality
//! `2πG*G ≤ ρ(z,z̄)⁻¹` and heuristic diagnostics for the outerness of `ĉ = 𝔄̂₂₁`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::{self, CircleGrid, MoebiusMap};
use crate::error::{Error, Result};
use crate::frame;
use crate::lft::{self, HerglotzEval, PairJ};
use crate::linalg::{self, CMatrix, I};
use crate::report::{fmt_real, CsvTable};
use crate::snode::{self, SNode, SignatureConstants, ToleranceSet};
use crate::specfact::{self, CertificateReport, SpectralFactor, SzegoReport};

/// `𝒜(ζ)` with the semi-definiteness check `𝒜*J𝒜 + j ⪰ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct DiskFrameSample {
    pub zeta: Complex64,
    pub z: Complex64,
    pub p: usize,
    #[serde(with = "crate::report::matrix_serde")]
    pub cal_a: CMatrix,
    /// `λ_min(𝒜*J𝒜 + j)`.
    pub form_min: f64,
    pub form_tolerance: f64,
}

impl DiskFrameSample {
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        linalg::block(&self.cal_a, self.p, i - 1, j - 1)
    }
    pub fn form_ok(&self) -> bool {
        self.form_min >= -self.form_tolerance
    }
}

pub fn build_disk_frame(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<DiskFrameSample> {
    let z = map.to_halfplane(zeta)?;
    let p = node.p();
    let sig = SignatureConstants::new(p);
    let cal_a = frame::frame_value(node, z)? * sig.kj();
    let form = cal_a.adjoint() * &sig.big_j * &cal_a + &sig.small_j;
    let form_min = linalg::lambda_min(&form);
    let form_tolerance = 1e-10 * linalg::spectral_norm(&cal_a).powi(2);
    Ok(DiskFrameSample {
        zeta,
        z,
        p,
        cal_a,
        form_min,
        form_tolerance,
    })
}

fn frame_blocks(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<(CMatrix, CMatrix)> {
    let z = map.to_halfplane(zeta)?;
    let a = frame::frame_value(node, z)?;
    let p = node.p();
    Ok((linalg::block(&a, p, 1, 0), linalg::block(&a, p, 1, 1)))
}

/// `χ = (𝔄̂₂₁ + 𝔄̂₂₂)⁻¹(𝔄̂₂₁ − 𝔄̂₂₂)`.
pub fn chi(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<CMatrix> {
    let (c, d) = frame_blocks(node, zeta, map)?;
    let sum = &c + &d;
    if linalg::sigma_min(&sum) <= 1e-12 * (1.0 + linalg::fro(&sum)) {
        return Err(Error::SumBlockSingular { zeta });
    }
    linalg::solve(&sum, &(c - d)).ok_or(Error::SumBlockSingular { zeta })
}

/// Norm of `χ(ζ)` next to `λ_min(𝔄̂₂₁𝔄̂₂₂* + 𝔄̂₂₂𝔄̂₂₁*)`; the two tests
/// `‖χ‖ < 1` and positivity must agree.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiReport {
    pub norm: f64,
    pub block_min: f64,
    pub consistent: bool,
}

pub fn chi_report(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<ChiReport> {
    let x = chi(node, zeta, map)?;
    let (c, d) = frame_blocks(node, zeta, map)?;
    let norm = linalg::spectral_norm(&x);
    let block_min = linalg::lambda_min(&(&c * d.adjoint() + &d * c.adjoint()));
    Ok(ChiReport {
        norm,
        block_min,
        consistent: (norm < 1.0) == (block_min > 0.0),
    })
}

/// `Δ = (𝒜₂₂𝒜₂₂* − 𝒜₂₁𝒜₂₁*)⁻¹`.
pub fn delta(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<CMatrix> {
    let s = build_disk_frame(node, zeta, map)?;
    let (a21, a22) = (s.block(2, 1), s.block(2, 2));
    let form = &a22 * a22.adjoint() - &a21 * a21.adjoint();
    if linalg::sigma_min(&form) <= 1e-12 * (1.0 + linalg::fro(&form)) {
        return Err(Error::SingularForm { zeta });
    }
    linalg::inverse(&form).ok_or(Error::SingularForm { zeta })
}

/// `‖Δ(ζ) − ρ(z, z̄)⁻¹‖_F` with `z = z(ζ)`, relative to `1 + ‖Δ‖`.
pub fn delta_rho_residual(node: &SNode, zeta: Complex64, map: &MoebiusMap) -> Result<f64> {
    let d = delta(node, zeta, map)?;
    let z = map.to_halfplane(zeta)?;
    let r = frame::rho(node, z, z.conj())?.value;
    let r_inv = linalg::inverse(&r).ok_or(Error::SingularForm { zeta })?;
    Ok(linalg::fro(&(&d - r_inv)) / (1.0 + linalg::fro(&d)))
}

/// `f = (𝒜₁₁q̂ + 𝒜₁₂)(𝒜₂₁q̂ + 𝒜₂₂)⁻¹`.
pub fn disk_lft(
    node: &SNode,
    qhat: &dyn Fn(Complex64) -> CMatrix,
    zeta: Complex64,
    map: &MoebiusMap,
) -> Result<CMatrix> {
    let q = qhat(zeta);
    let norm = linalg::spectral_norm(&q);
    if !(norm <= 1.0 + 1e-12) {
        return Err(Error::NotContractive { norm });
    }
    let s = build_disk_frame(node, zeta, map)?;
    let num = s.block(1, 1) * &q + s.block(1, 2);
    let den = s.block(2, 1) * &q + s.block(2, 2);
    let sigma = linalg::sigma_min(&den);
    if !(sigma > 1e-12 * (1.0 + linalg::fro(&den))) {
        return Err(Error::DenominatorSingular { z: s.z, sigma });
    }
    linalg::right_divide(&num, &den).ok_or(Error::DenominatorSingular { z: s.z, sigma })
}

/// One point of the entropy inequality.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub z: Complex64,
    /// `2πG(z)*G(z)`.
    #[serde(with = "crate::report::matrix_serde")]
    pub lhs: CMatrix,
    /// `ρ(z, z̄)⁻¹`.
    #[serde(with = "crate::report::matrix_serde")]
    pub rhs: CMatrix,
    pub lhs_min: f64,
    pub rhs_min: f64,
    /// `λ_min(rhs − lhs)`.
    pub gap: f64,
    pub equality: bool,
    pub violated: bool,
    pub tail_bound: f64,
}

/// Equality is declared when `|gap| ≤ EQUALITY_TOL·‖rhs‖`.
pub const EQUALITY_TOL: f64 = 1e-6;
/// Largest accepted relative residual of `πĜ*Ĝ = Re f` on the grid.
pub const BOUNDARY_TOL: f64 = 1e-6;
/// A gap below `−VIOLATION_TOL·‖rhs‖` is a violation.
pub const VIOLATION_TOL: f64 = 1e-7;

/// Full outcome of the inequality pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyVerification {
    pub reports: Vec<EntropyReport>,
    /// Set when an outerness hypothesis check failed; verification still ran.
    pub hypothesis_fail: bool,
    pub warnings: Vec<String>,
    pub szego: SzegoReport,
    pub certificate: CertificateReport,
    pub density_defect: f64,
    pub flagged_nodes: Vec<usize>,
    pub reconstruction_residual: f64,
    /// `max_k ‖πĜ*Ĝ − Re f‖` on the boundary grid, relative to `max(1, ‖Re f‖)`.
    pub boundary_residual: f64,
    #[serde(skip)]
    pub factor: Option<SpectralFactor>,
}

impl EntropyVerification {
    pub fn any_violation(&self) -> bool {
        self.reports.iter().any(|r| r.violated)
    }
}

/// Evaluates both sides of the bound at one point from a computed factor.
pub fn entropy_point(node: &SNode, factor: &SpectralFactor, z: Complex64) -> Result<EntropyReport> {
    if !(z.im > 0.0) {
        return Err(Error::RealAxisPoint { z });
    }
    let g = specfact::evaluate_interior(factor, z)?;
    let lhs = linalg::herm_part(&(g.value.adjoint() * &g.value)) * Complex64::new(2.0 * PI, 0.0);
    let rho = linalg::herm_part(&frame::rho(node, z, z.conj())?.value);
    let rhs = linalg::herm_part(&linalg::inverse(&rho).ok_or(Error::SingularForm { zeta: g.zeta })?);
    let gap = linalg::lambda_min(&(&rhs - &lhs));
    let scale = linalg::spectral_norm(&rhs);
    Ok(EntropyReport {
        z,
        lhs_min: linalg::lambda_min(&lhs),
        rhs_min: linalg::lambda_min(&rhs),
        lhs,
        rhs,
        gap,
        equality: gap.abs() <= EQUALITY_TOL * scale,
        violated: gap < -VIOLATION_TOL * scale,
        tail_bound: g.tail_bound,
    })
}

/// Runs `φ → μ′ → G → (lhs, rhs)` at every point, collecting hypothesis
/// warnings instead of refusing when outerness checks fail.
pub fn verify_inequality(
    node: &SNode,
    pair: &PairJ,
    z_points: &[Complex64],
    grid: &CircleGrid,
    map: &MoebiusMap,
) -> Result<EntropyVerification> {
    snode::validate_node(node, &ToleranceSet::default()).into_result()?;
    let mut warnings = Vec::new();

    let spec = snode::spectrum_report(node, default_r0(node));
    if !spec.hypothesis_a {
        warnings.push(format!(
            "I - zA* is singular in the upper half-plane at {:?}",
            spec.upper_half_plane_poles
        ));
    }
    let smirnov = smirnov_diagnostics(node, grid, map)?;
    if !smirnov.passed {
        warnings.push(match smirnov.interior_singularity {
            Some(zeta) => format!("c-hat has an interior singularity at zeta = {zeta}"),
            None => format!(
                "log+ integrals of c-hat do not settle (discrepancy {:.3e})",
                smirnov.max_discrepancy
            ),
        });
    }
    let growth = growth_diagnostics(node, default_r0(node), DEFAULT_R_MAX)?;
    if !growth.passed {
        warnings.push(if growth.poles_in_region.is_empty() {
            format!(
                "resolvent growth exponent {:.3} exceeds {GROWTH_KAPPA_MAX}",
                growth.kappa
            )
        } else {
            format!("resolvent poles in the required region: {:?}", growth.poles_in_region)
        });
    }
    let hypothesis_fail = !warnings.is_empty();

    let h = HerglotzEval::from_lft(node, pair.clone())?;
    let density = conformal::extract_density(&h, grid, map, conformal::DEFAULT_EPS)?;
    let szego = specfact::szego_check(&density, map).into_result()?;
    let factor = specfact::wilson_factorize(&density)?;
    let certificate = specfact::outer_certificate(&factor);
    if !certificate.passed {
        warnings.push(format!("outer certificate residual {:.3e}", certificate.residual));
    }

    let reports = z_points
        .par_iter()
        .map(|&z| entropy_point(node, &factor, z))
        .collect::<Result<Vec<_>>>()?;

    let boundary_residual = boundary_identity_residual(&h, &factor, &density.pole_flags);
    if !(boundary_residual <= BOUNDARY_TOL) {
        warnings.push(format!("boundary identity residual {boundary_residual:.3e} exceeds {BOUNDARY_TOL:e}: the grid does not resolve the density"));
    }
    Ok(EntropyVerification {
        reports,
        hypothesis_fail,
        warnings,
        szego,
        certificate,
        density_defect: density.max_defect(),
        flagged_nodes: density.flagged_nodes(),
        reconstruction_residual: factor.reconstruction_residual(&density),
        boundary_residual,
        factor: Some(factor),
    })
}

/// `max_k ‖πĜ(e^{iθ_k})*Ĝ(e^{iθ_k}) − Re f(e^{iθ_k})‖` where `Re f` is the
/// Hermitian imaginary part of `φ` on the axis. Nodes that cannot be
/// evaluated (node 0, flagged poles) are skipped.
pub fn boundary_identity_residual(h: &HerglotzEval, factor: &SpectralFactor, flags: &[bool]) -> f64 {
    let grid = factor.grid;
    let pairs: Vec<(f64, f64)> = (1..grid.len())
        .into_par_iter()
        .filter(|k| !flags.get(*k).copied().unwrap_or(false))
        .filter_map(|k| {
            let t = factor.map.boundary_point(grid.angle(k)).ok()?;
            let re_f = linalg::im_part(&h.eval(Complex64::new(t, 0.0)).ok()?);
            let g = &factor.grid_values[k];
            let lhs = g.adjoint() * g * Complex64::new(PI, 0.0);
            Some((linalg::fro(&(lhs - &re_f)), linalg::fro(&re_f)))
        })
        .collect();
    let scale = pairs.iter().map(|p| p.1).fold(1.0, f64::max);
    pairs.iter().map(|p| p.0).fold(0.0, f64::max) / scale
}

/// CSV with columns `z_re,z_im,lhs_min,rhs_min,gap,equality`.
pub fn entropy_csv(reports: &[EntropyReport]) -> String {
    let mut t = CsvTable::new(&["z_re", "z_im", "lhs_min", "rhs_min", "gap", "equality"]);
    for r in reports {
        t.push(vec![
            fmt_real(r.z.re),
            fmt_real(r.z.im),
            fmt_real(r.lhs_min),
            fmt_real(r.rhs_min),
            fmt_real(r.gap),
            r.equality.to_string(),
        ]);
    }
    t.render()
}

/// Radius used for the hypothesis regions when none is given: twice the
/// largest upper-half-plane pole of `(I − zA)⁻¹`, or 1.
pub fn default_r0(node: &SNode) -> f64 {
    node.conjugate_poles()
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| 2.0 * z.norm())
        .fold(1.0, f64::max)
}

/// Outcome of the Smirnov-class heuristic for `ĉ` and `ĉ⁻¹`.
#[derive(Debug, Clone, Serialize)]
pub struct SmirnovReport {
    /// Interior pole of `ĉ` or zero of `det ĉ`, when found.
    pub interior_singularity: Option<Complex64>,
    pub singularity_kind: Option<&'static str>,
    /// Winding number of `det ĉ` on the inner test circle.
    pub winding: Option<i64>,
    pub radii: Vec<f64>,
    /// `∫ln⁺|ĉ_ij|` per radius (row-major entries), then the boundary row.
    pub entry_integrals: Vec<Vec<f64>>,
    /// Same for the entries of `ĉ⁻¹`.
    pub inverse_integrals: Vec<Vec<f64>>,
    pub boundary_zeros: Vec<Complex64>,
    pub max_discrepancy: f64,
    pub passed: bool,
}

impl SmirnovReport {
    pub fn into_result(self) -> Result<Self> {
        match self.interior_singularity {
            Some(zeta) => Err(Error::InteriorSingularity { zeta }),
            None => Ok(self),
        }
    }
}

/// Radius of the circle used for the interior zero scan.
pub const WINDING_RADIUS: f64 = 1.0 - 1e-3;
/// Relative tolerance for the log⁺ integral convergence test.
pub const LOG_PLUS_TOL: f64 = 1e-3;

fn c_hat(node: &SNode, map: &MoebiusMap, zeta: Complex64) -> Result<CMatrix> {
    let z = map.to_halfplane(zeta)?;
    let a = frame::frame_value(node, z)?;
    Ok(linalg::block(&a, node.p(), 1, 0))
}

/// Frame poles `1/λ̄` in the upper half-plane at which `c` really blows up.
fn interior_poles(node: &SNode, map: &MoebiusMap) -> Vec<Complex64> {
    let phi2 = node.phi2();
    node.frame_poles()
        .into_iter()
        .filter(|z| z.im > 0.0)
        .filter(|&zp| {
            let delta = 1e-6 * (1.0 + zp.norm());
            (0..4).any(|j| {
                let z = zp + Complex64::from_polar(delta, 0.3 + j as f64 * PI / 2.0);
                let m = node.resolvent_base_adj(z);
                let rhs = linalg::solve(node.s(), phi2);
                match rhs.and_then(|r| linalg::solve(&m, &r)) {
                    Some(x) => linalg::fro(&(phi2.adjoint() * x)) * delta > 1e-6,
                    None => true,
                }
            })
        })
        .filter_map(|z| map.to_disk(z).ok())
        .collect()
}

/// Winding number of `det ĉ` around 0 on `|ζ| = radius`, refining the
/// sampling until consecutive phase steps stay below `π/4`.
fn det_winding(node: &SNode, map: &MoebiusMap, radius: f64) -> Result<i64> {
    let mut n = 1024usize;
    loop {
        let dets: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let zeta = Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
                c_hat(node, map, zeta).map(|c| linalg::det(&c))
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let step = (dets[(k + 1) % n] / dets[k]).arg();
            max_step = max_step.max(step.abs());
            total += step;
        }
        if max_step < PI / 4.0 || n >= 1 << 20 {
            return Ok((total / (2.0 * PI)).round() as i64);
        }
        n *= 4;
    }
}

fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// `∫ln⁺|X_ij(re^{iθ})|dθ` for `X = ĉ` and `X = ĉ⁻¹`, over the kept nodes.
fn log_plus_integrals(
    node: &SNode,
    map: &MoebiusMap,
    grid: &CircleGrid,
    r: f64,
    keep: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let p = node.p();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len())
        .into_par_iter()
        .filter(|k| keep[*k])
        .filter_map(|k| {
            let c = c_hat(node, map, grid.zeta(k) * r).ok()?;
            let ci = linalg::inverse(&c)?;
            Some((
                c.iter().map(|x| log_plus(x.norm())).collect(),
                ci.iter().map(|x| log_plus(x.norm())).collect(),
            ))
        })
        .collect();
    let mut direct = vec![0.0; p * p];
    let mut inverse = vec![0.0; p * p];
    for (d, i) in rows {
        for e in 0..p * p {
            direct[e] += d[e];
            inverse[e] += i[e];
        }
    }
    let h = grid.step();
    (
        direct.iter().map(|x| x * h).collect(),
        inverse.iter().map(|x| x * h).collect(),
    )
}

pub fn smirnov_diagnostics(node: &SNode, grid: &CircleGrid, map: &MoebiusMap) -> Result<SmirnovReport> {
    let mut report = SmirnovReport {
        interior_singularity: None,
        singularity_kind: None,
        winding: None,
        radii: (1..=12).map(|k| 1.0 - 0.5f64.powi(k)).collect(),
        entry_integrals: Vec::new(),
        inverse_integrals: Vec::new(),
        boundary_zeros: Vec::new(),
        max_discrepancy: f64::NAN,
        passed: false,
    };
    if let Some(&zeta) = interior_poles(node, map).first() {
        report.interior_singularity = Some(zeta);
        report.singularity_kind = Some("pole");
        return Ok(report);
    }
    let winding = det_winding(node, map, WINDING_RADIUS)?;
    report.winding = Some(winding);
    if winding != 0 {
        report.interior_singularity = Some(locate_det_zero(node, map));
        report.singularity_kind = Some("zero");
        return Ok(report);
    }

    let n = grid.len();
    let boundary: Vec<Option<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                None
            } else {
                c_hat(node, map, grid.zeta(k)).ok().map(|c| linalg::det(&c))
            }
        })
        .collect();
    let mut mags: Vec<f64> = boundary.iter().flatten().map(|d| d.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let typical = mags.get(mags.len() / 2).copied().unwrap_or(1.0);
    let mut zeros = vec![map.to_disk(Complex64::new(0.0, 0.0))?];
    for (k, d) in boundary.iter().enumerate() {
        if let Some(d) = d {
            if d.norm() <= 1e-10 * typical {
                zeros.push(grid.zeta(k));
            }
        }
    }
    let keep: Vec<bool> = (0..n)
        .map(|k| {
            k != 0 && boundary[k].is_some() && zeros.iter().all(|z| (grid.zeta(k) / z).arg().abs() > 2.5 * grid.step())
        })
        .collect();
    report.boundary_zeros = zeros;

    let mut radii = report.radii.clone();
    radii.push(1.0);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = radii
        .iter()
        .map(|&r| log_plus_integrals(node, map, grid, r, &keep))
        .collect();
    let (last_d, last_i) = rows.last().cloned().expect("boundary row");
    let (near_d, near_i) = rows[rows.len() - 2].clone();
    let mut disc: f64 = 0.0;
    for (a, b) in near_d.iter().zip(&last_d).chain(near_i.iter().zip(&last_i)) {
        disc = disc.max((a - b).abs() / b.abs().max(1.0));
    }
    report.entry_integrals = rows.iter().map(|r| r.0.clone()).collect();
    report.inverse_integrals = rows.iter().map(|r| r.1.clone()).collect();
    report.max_discrepancy = disc;
    report.passed = disc <= LOG_PLUS_TOL;
    Ok(report)
}

/// Coarse location of an interior zero of `det ĉ`: the grid point inside
/// the disk with the smallest `|det ĉ|`.
fn locate_det_zero(node: &SNode, map: &MoebiusMap) -> Complex64 {
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
    for i in 0..64 {
        let r = WINDING_RADIUS * (i as f64 + 0.5) / 64.0;
        for j in 0..128 {
            let zeta = Complex64::from_polar(r, 2.0 * PI * j as f64 / 128.0);
            if let Ok(c) = c_hat(node, map, zeta) {
                let d = linalg::det(&c).norm();
                if d < best.0 {
                    best = (d, zeta);
                }
            }
        }
    }
    best.1
}

/// Largest radius sampled by default in the growth test.
pub const DEFAULT_R_MAX: f64 = 1e4;
/// A fitted growth exponent above this fails the test.
pub const GROWTH_KAPPA_MAX: f64 = 0.95;
const GROWTH_ANGLES: usize = 24;
const GROWTH_RADII: usize = 40;

/// Sampled resolvent suprema and fitted growth exponents.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub r0: f64,
    pub r_max: f64,
    pub radii: Vec<f64>,
    /// `sup_{|z|<r, Im z ≥ 0} ‖(I − zA*)⁻¹‖`.
    pub m_upper: Vec<f64>,
    /// `sup_{r₀<|z|<r} ‖(I − zA)⁻¹‖`.
    pub m_annulus: Vec<f64>,
    /// `sup_{Im z ≤ 0, r₀<|z|<r} ‖(I − zA*)⁻¹‖`.
    pub m_lower: Vec<f64>,
    pub kappa_upper: f64,
    pub kappa_annulus: f64,
    pub kappa_lower: f64,
    pub kappa: f64,
    pub bounded: bool,
    pub poles_in_region: Vec<Complex64>,
    pub passed: bool,
}

impl GrowthReport {
    pub fn into_result(self) -> Result<Self> {
        match self.poles_in_region.first() {
            Some(&z) => Err(Error::PoleInRegion { z }),
            None => Ok(self),
        }
    }

    /// CSV with columns `r,M,M_annulus,M_lower`.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["r", "M", "M_annulus", "M_lower"]);
        for i in 0..self.radii.len() {
            t.push_reals(&[self.radii[i], self.m_upper[i], self.m_annulus[i], self.m_lower[i]]);
        }
        t.render()
    }
}

/// `‖M⁻¹‖₂`, infinite when `M` is singular. The inverse is formed first:
/// `1/σ_min(M)` from an SVD loses all accuracy once `M` is far from normal.
fn resolvent_norm(m: &CMatrix) -> f64 {
    match linalg::inverse(m) {
        Some(inv) if linalg::is_finite(&inv) => linalg::spectral_norm(&inv),
        _ => f64::INFINITY,
    }
}

/// Least-squares slope of `ln ln M` against `ln r` over the top decade.
/// Returns `(κ, bounded)`.
fn fit_kappa(radii: &[f64], values: &[f64]) -> (f64, bool) {
    let r_max = radii.last().copied().unwrap_or(1.0);
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .filter(|(r, _)| **r >= r_max / 10.0 * (1.0 - 1e-12))
        .map(|(r, m)| (r.ln(), *m))
        .collect();
    if pts.iter().all(|(_, m)| *m <= 1.0 + 1e-12) {
        return (0.0, true);
    }
    let pts: Vec<(f64, f64)> = pts
        .into_iter()
        .filter(|(_, m)| *m > 1.0 + 1e-12)
        .map(|(x, m)| (x, m.ln().ln()))
        .collect();
    if pts.len() < 2 {
        return (0.0, true);
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return (f64::INFINITY, false);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx, false)
}

pub fn growth_diagnostics(node: &SNode, r0: f64, r_max: f64) -> Result<GrowthReport> {
    if !(r0 > 0.0 && r_max > r0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < r0 < rMax, got r0 = {r0}, rMax = {r_max}"
        )));
    }
    let poles_in_region: Vec<Complex64> = node
        .conjugate_poles()
        .into_iter()
        .filter(|z| z.im <= 0.0 || z.norm() >= r0)
        .collect();

    let radii: Vec<f64> = (0..GROWTH_RADII)
        .map(|i| r0 * (r_max / r0).powf(i as f64 / (GROWTH_RADII - 1) as f64))
        .collect();
    // For each radius: sup over upper angles of (I − zA*)⁻¹, over all angles
    // of (I − zA)⁻¹, and over lower angles of (I − zA*)⁻¹.
    let samples: Vec<(f64, f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let mut up: f64 = 1.0;
            let mut ann: f64 = 1.0;
            let mut low: f64 = 1.0;
            for j in 0..=GROWTH_ANGLES {
                let th = 2.0 * PI * j as f64 / GROWTH_ANGLES as f64;
                let z = Complex64::from_polar(r, th);
                let adj = resolvent_norm(&node.resolvent_base_adj(z));
                ann = ann.max(resolvent_norm(&node.resolvent_base(z)));
                if z.im >= -1e-12 * r {
                    up = up.max(adj);
                }
                if z.im <= 1e-12 * r {
                    low = low.max(adj);
                }
            }
            (up, ann, low)
        })
        .collect();
    let cummax = |f: fn(&(f64, f64, f64)) -> f64| {
        let mut acc: f64 = 1.0;
        samples
            .iter()
            .map(|s| {
                acc = acc.max(f(s));
                acc
            })
            .collect::<Vec<f64>>()
    };
    let m_upper = cummax(|s| s.0);
    let m_annulus = cummax(|s| s.1);
    let m_lower = cummax(|s| s.2);
    let (kappa_upper, b1) = fit_kappa(&radii, &m_upper);
    let (kappa_annulus, b2) = fit_kappa(&radii, &m_annulus);
    let (kappa_lower, b3) = fit_kappa(&radii, &m_lower);
    let kappa = kappa_upper.max(kappa_annulus).max(kappa_lower);
    let sampled_pole = m_upper.iter().chain(&m_annulus).chain(&m_lower).any(|m| !m.is_finite());
    Ok(GrowthReport {
        r0,
        r_max,
        radii,
        m_upper,
        m_annulus,
        m_lower,
        kappa_upper,
        kappa_annulus,
        kappa_lower,
        kappa,
        bounded: b1 && b2 && b3,
        passed: poles_in_region.is_empty() && !sampled_pole && kappa <= GROWTH_KAPPA_MAX,
        poles_in_region,
    })
}

/// Constant disk parameter `q̂ ≡ χ(ζ₀)*`, which attains equality at `ζ₀`.
pub fn extremal_disk_parameter(node: &SNode, zeta0: Complex64, map: &MoebiusMap) -> Result<CMatrix> {
    Ok(chi(node, zeta0, map)?.adjoint())
}

/// `φ̂(ζ) − i f(ζ)` for a disk-derived pair with constant scaler `a`.
pub fn disk_consistency_residual(
    node: &SNode,
    q: lft::DiskFn,
    a: CMatrix,
    zeta: Complex64,
    map: &MoebiusMap,
) -> Result<f64> {
    let pair = lft::pair_from_disk_pair(q.clone(), a, *map)?;
    let z = map.to_halfplane(zeta)?;
    let phi = lft::eval_phi(node, &pair, z)?;
    let f = disk_lft(node, &|s| q(s), zeta, map)?;
    Ok(linalg::fro(&(&phi - f * I)) / (1.0 + linalg::fro(&phi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_rows, scalar, ZERO};

    #[test]
    fn disk_frame_of_e0() {
        let map = MoebiusMap::default();
        let s = build_disk_frame(&SNode::e0(), ZERO, &map).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = from_rows(&[vec![c(-h, 0.0), c(h, 0.0)], vec![ZERO, c(2.0 * h, 0.0)]]);
        assert!(linalg::fro(&(&s.cal_a - expected)) < 1e-15);
        assert!(s.form_ok() && s.form_min.abs() < 1e-14);
        assert!((s.block(2, 2)[(0, 0)] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn chi_of_e0_is_identity_map() {
        let map = MoebiusMap::default();
        for zeta in [ZERO, c(0.5, 0.0), c(-0.3, 0.6)] {
            let x = chi(&SNode::e0(), zeta, &map).unwrap();
            assert!((x[(0, 0)] - zeta).norm() < 1e-12);
            let rep = chi_report(&SNode::e0(), zeta, &map).unwrap();
            assert!(rep.consistent && rep.norm < 1.0);
        }
    }

    #[test]
    fn delta_of_e0() {
        let map = MoebiusMap::default();
        assert!((delta(&SNode::e0(), ZERO, &map).unwrap()[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((delta(&SNode::e0(), c(0.5, 0.0), &map).unwrap()[(0, 0)] - c(1.0 / 6.0, 0.0)).norm() < 1e-14);
        assert!(delta_rho_residual(&SNode::e0(), c(0.2, -0.4), &map).unwrap() < 1e-14);
    }

    #[test]
    fn disk_lft_of_e0() {
        let map = MoebiusMap::default();
        let f = disk_lft(&SNode::e0(), &|_| scalar(ZERO), ZERO, &map).unwrap();
        assert!((f[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(
            disk_lft(&SNode::e0(), &|_| scalar(c(2.0, 0.0)), ZERO, &map),
            Err(Error::NotContractive { .. })
        ));
    }

    #[test]
    fn growth_examples() {
        let g = growth_diagnostics(&SNode::e0(), 1.0, DEFAULT_R_MAX).unwrap();
        assert!(g.passed && g.bounded);
        let jordan = SNode::new(
            linalg::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
            linalg::identity(2),
            linalg::zeros(2, 1),
            linalg::from_real_rows(&[&[1.0], &[0.0]]),
        )
        .unwrap();
        let g = growth_diagnostics(&jordan, 1.0, DEFAULT_R_MAX).unwrap();
        assert!(g.passed && !g.bounded && g.kappa < 0.3, "{g:?}");
        let g = growth_diagnostics(&SNode::a_equals_i(), 1.0, DEFAULT_R_MAX).unwrap();
        assert!(!g.passed);
        assert!((g.poles_in_region[0] + I).norm() < 1e-15);
        assert!(matches!(g.into_result(), Err(Error::PoleInRegion { .. })));
    }

    #[test]
    fn smirnov_examples() {
        let map = MoebiusMap::default();
        let grid = CircleGrid::new(4096).unwrap();
        let rep = smirnov_diagnostics(&SNode::e0(), &grid, &map).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.winding, Some(0));
        let rep = smirnov_diagnostics(&SNode::a_equals_i(), &grid, &map).unwrap();
        assert!(!rep.passed);
        assert!(rep.interior_singularity.unwrap().norm() < 1e-12);
        let both = SNode::e0().direct_sum(&SNode::a_equals_i()).unwrap();
        assert!(!smirnov_diagnostics(&both, &grid, &map).unwrap().passed);
    }
}
