//! Szegő screening and outer spectral factorization `μ̂′ = Ĝ*Ĝ` on the
//! unit circle.
//!
//! Densities transported from the real axis usually vanish at `ζ = 1`
//! (the image of `t = ∞`), often at different rates in different
//! directions. A log-singularity there ruins the trapezoid rule and slows
//! Fourier decay, so boundary zeros found at grid nodes are divided out one
//! order at a time: `μ̂′ = R*WR` with `R(ζ) = Π(I − ζ̄ₖζPᵢ)` outer, `Pᵢ`
//! kernel projectors, and `W` smooth and positive definite. `W` is factored
//! as `H*H` and `Ĝ = H·R`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::conformal::{CircleGrid, DensityGrid, MoebiusMap};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};

/// Per-node floor for `ln det`.
pub const LOG_FLOOR: f64 = -1e6;
/// A Szegő integral below this value fails.
pub const SZEGO_LIMIT: f64 = -1e4;
/// Largest tolerated share of floored nodes.
pub const FLOOR_FRACTION: f64 = 1e-2;
/// Levels below this fraction of the maximum are candidate boundary zeros.
const ZERO_LEVEL: f64 = 1e-10;
/// Eigenvalues above this fraction of the largest are never kernel directions.
const KERNEL_LEVEL: f64 = 5e-2;
/// Largest vanishing order handled by deflation.
const MAX_ORDER: u32 = 16;
/// Even averages below this fraction of the maximum are treated as round-off.
const RESOLVE_LEVEL: f64 = 1e-7;
/// After deflation the fitted order at a zero must be within this of 0.
const LEFTOVER_ORDER: f64 = 0.3;
/// The stencil distance at a zero may not exceed `1/MAX_SPAN` of the grid.
const MAX_SPAN: usize = 64;
/// Nodes per side used to refill the unresolved neighbourhood of a zero.
const REFILL: usize = 4;

/// One order removed at a boundary zero: `Ĝ = Ĝ₁·(I − ζ̄ₖζP)` where `P`
/// projects onto the kernel of the density at `ζₖ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroStep {
    #[serde(with = "crate::report::matrix_serde")]
    pub projector: CMatrix,
    pub rank: usize,
}

/// Zero of a boundary density at a grid node. `order` is the vanishing
/// order of `det`: the density determinant behaves like `|1 − ζ̄ₖζ|^{2·order}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryZero {
    pub index: usize,
    pub zeta: Complex64,
    pub order: u32,
    pub steps: Vec<ZeroStep>,
}

fn symmetric_mean(values: &[CMatrix], k: usize, d: usize) -> CMatrix {
    let n = values.len() as isize;
    let at = |o: isize| &values[((k as isize + o).rem_euclid(n)) as usize];
    let d = d as isize;
    linalg::herm_part(&((at(d) + at(-d)) * Complex64::new(0.5, 0.0)))
}

fn sorted_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Projector onto the `rank` eigenvectors of the smallest eigenvalues.
fn low_projector(m: &CMatrix, rank: usize) -> CMatrix {
    let (_, vecs) = sorted_eigen(m);
    let v = vecs.columns(0, rank);
    v * v.adjoint()
}

/// Smallest stencil distance `d` at node `k` whose even average is resolved
/// above round-off, or `None` when it exceeds `MAX_SPAN` of the grid.
fn resolved_distance(values: &[CMatrix], k: usize, top: f64) -> Option<usize> {
    let limit = (values.len() / MAX_SPAN).max(1);
    (1..=limit).find(|&d| linalg::lambda_min(&symmetric_mean(values, k, d)) >= RESOLVE_LEVEL * top)
}

/// Fitted vanishing order of the `i`-th smallest level of the even
/// averages at distances `d`, `2d`, `3d` around node `k`: the model
/// `c·s^m·(1 + b·s)` in `s = |1 − e^{iθ}|²` is matched exactly. `None` when
/// a level is not positive.
fn fitted_order(levels: &[Vec<f64>], s: &[f64], i: usize) -> Option<f64> {
    let l: Vec<f64> = levels.iter().map(|e| e[i]).collect();
    if !l.iter().all(|x| *x > 0.0) {
        return None;
    }
    let (y1, y2) = ((l[1] / l[0]).ln(), (l[2] / l[0]).ln());
    let (u1, u2) = ((s[1] / s[0]).ln(), (s[2] / s[0]).ln());
    let (v1, v2) = (s[1] - s[0], s[2] - s[0]);
    Some((y1 * v2 - y2 * v1) / (u1 * v2 - u2 * v1))
}

struct Stencil {
    means: Vec<CMatrix>,
    levels: Vec<Vec<f64>>,
    s: Vec<f64>,
}

impl Stencil {
    fn new(values: &[CMatrix], k: usize, d: usize, h: f64) -> Self {
        let means: Vec<CMatrix> = (1..=3).map(|j| symmetric_mean(values, k, j * d)).collect();
        let levels = means.iter().map(|m| sorted_eigen(m).0).collect();
        let s = (1..=3).map(|j| 2.0 - 2.0 * ((j * d) as f64 * h).cos()).collect();
        Self { means, levels, s }
    }
}

/// Kernel of the density at node `k`: the leading sorted levels of the
/// stencil averages that fit an integer order `m ≥ 1`. The projector onto
/// them is extrapolated to `s = 0` from the three averages.
fn kernel_projector(st: &Stencil, top: f64) -> Option<(CMatrix, usize)> {
    let mut rank = 0;
    for i in 0..st.means[0].nrows() {
        if !(st.levels[0][i] <= KERNEL_LEVEL * top) {
            break;
        }
        let Some(est) = fitted_order(&st.levels, &st.s, i) else {
            break;
        };
        let m = est.round();
        if !(m >= 1.0 && (est - m).abs() <= 0.2 && m <= MAX_ORDER as f64) {
            break;
        }
        rank += 1;
    }
    if rank == 0 {
        return None;
    }
    let p: Vec<CMatrix> = st.means.iter().map(|m| low_projector(m, rank)).collect();
    let w = lagrange_weights(&st.s, 0.0);
    let mix = &p[0] * Complex64::new(w[0], 0.0) + &p[1] * Complex64::new(w[1], 0.0) + &p[2] * Complex64::new(w[2], 0.0);
    // The extrapolated mix is a projector up to round-off; snap it to one.
    Some((low_projector(&(-linalg::herm_part(&mix)), rank), rank))
}

/// Weights of the Lagrange interpolant through `nodes`, evaluated at `x`.
fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, xj)| (x - xj) / (xi - xj))
                .product()
        })
        .collect()
}

/// Replaces the nodes strictly inside distance `d` of `k` by polynomial
/// interpolation from the nodes at `±d, ±2d, …` (`REFILL` per side).
fn refill(w: &mut [CMatrix], k: usize, d: usize) {
    let n = w.len() as isize;
    let idx = |o: isize| ((k as isize + o).rem_euclid(n)) as usize;
    let d = d as isize;
    let offsets: Vec<isize> = (1..=REFILL as isize).flat_map(|j| [-j * d, j * d]).collect();
    let xs: Vec<f64> = offsets.iter().map(|o| *o as f64).collect();
    for o in (1 - d)..d {
        let wt = lagrange_weights(&xs, o as f64);
        let mut acc = linalg::zeros(w[0].nrows(), w[0].ncols());
        for (off, c) in offsets.iter().zip(wt) {
            acc += &w[idx(*off)] * Complex64::new(c, 0.0);
        }
        w[idx(o)] = linalg::herm_part(&acc);
    }
}

/// `B(ζ)⁻* W B(ζ)⁻¹` with `B(ζ) = I − ζ̄ₖζP`, i.e. `B⁻¹ = P⊥ + P/(1 − ζ̄ₖζ)`.
fn remove_step(w: &CMatrix, p: &CMatrix, zk: Complex64, zeta: Complex64) -> CMatrix {
    let id = linalg::identity(p.nrows());
    let b_inv = (&id - p) + p / (ONE - zk.conj() * zeta);
    linalg::herm_part(&(b_inv.adjoint() * w * b_inv))
}

/// Boundary zeros divided out of a sampled density.
#[derive(Debug, Clone)]
pub struct Deflation {
    pub zeros: Vec<BoundaryZero>,
    /// Deflated samples, smooth and positive definite when the zeros were resolved.
    pub values: Vec<CMatrix>,
    /// Nodes where the density still vanishes after deflation, with the
    /// fitted leftover order.
    pub unresolved: Vec<(usize, f64)>,
}

impl Deflation {
    fn checked(self) -> Result<Self> {
        match self.unresolved.first() {
            Some(&(index, order)) => Err(Error::UnresolvedZero { index, order }),
            None => Ok(self),
        }
    }
}

/// Finds boundary zeros of matrix samples and divides them out. Node 0 is
/// always examined; other nodes when `λ_min` of the partly deflated samples
/// falls below `ZERO_LEVEL` of the largest level. The stencil distance at a
/// zero is the smallest one whose levels clear `RESOLVE_LEVEL`; nodes closer
/// than that carry mostly round-off and are refilled afterwards.
pub fn extract_boundary_zeros(grid: &CircleGrid, values: &[CMatrix]) -> Deflation {
    let p = values[0].nrows();
    let top = values.iter().map(linalg::lambda_max).fold(0.0, f64::max);
    let candidates: Vec<usize> = (0..values.len())
        .filter(|&k| k == 0 || linalg::lambda_min(&values[k]) <= ZERO_LEVEL * top)
        .collect();
    let mut w = values.to_vec();
    let mut zeros = Vec::new();
    let mut unresolved = Vec::new();
    for k in candidates {
        if k != 0 && linalg::lambda_min(&w[k]) > ZERO_LEVEL * top {
            continue;
        }
        let Some(d) = resolved_distance(&w, k, top) else {
            unresolved.push((k, f64::INFINITY));
            continue;
        };
        let zk = grid.zeta(k);
        let mut steps = Vec::new();
        while steps.len() < MAX_ORDER as usize * p {
            let Some((proj, rank)) = kernel_projector(&Stencil::new(&w, k, d, grid.step()), top) else {
                break;
            };
            for (j, m) in w.iter_mut().enumerate() {
                if j != k {
                    *m = remove_step(m, &proj, zk, grid.zeta(j));
                }
            }
            steps.push(ZeroStep { projector: proj, rank });
        }
        let st = Stencil::new(&w, k, d, grid.step());
        match fitted_order(&st.levels, &st.s, 0) {
            Some(left) if left.abs() <= LEFTOVER_ORDER => {}
            Some(left) => unresolved.push((k, left)),
            None => unresolved.push((k, f64::NAN)),
        }
        if !steps.is_empty() {
            refill(&mut w, k, d);
            let order = steps.iter().map(|s| s.rank as u32).sum();
            zeros.push(BoundaryZero {
                index: k,
                zeta: zk,
                order,
                steps,
            });
        }
    }
    Deflation {
        zeros,
        values: w,
        unresolved,
    }
}

/// Coefficients of `R(ζ) = B_s(ζ)···B_1(ζ)`, the product of all removed
/// steps with the latest on the left, so that `Ĝ = H·R`.
fn zero_polynomial(p: usize, zeros: &[BoundaryZero]) -> Vec<CMatrix> {
    let mut poly = vec![linalg::identity(p)];
    for z in zeros {
        for step in &z.steps {
            let lead = &step.projector * (-z.zeta.conj());
            let mut next = vec![linalg::zeros(p, p); poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] += &lead * c;
            }
            poly = next;
        }
    }
    poly
}

/// Entrywise FFT helpers on sequences of matrices.
struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn entrywise(&self, data: &[CMatrix], fft: &Arc<dyn Fft<f64>>, scale: f64) -> Vec<CMatrix> {
        let (r, c) = data[0].shape();
        let mut out = vec![linalg::zeros(r, c); self.n];
        let mut buf = vec![ZERO; self.n];
        for i in 0..r {
            for j in 0..c {
                buf.iter_mut().for_each(|b| *b = ZERO);
                for (k, m) in data.iter().enumerate() {
                    buf[k] = m[(i, j)];
                }
                fft.process(&mut buf);
                for (k, m) in out.iter_mut().enumerate() {
                    m[(i, j)] = buf[k] * scale;
                }
            }
        }
        out
    }

    /// Fourier coefficients `X_m = (1/N)Σ_k X(θ_k)e^{−imθ_k}`, `m = 0..N−1`.
    fn coeffs(&self, samples: &[CMatrix]) -> Vec<CMatrix> {
        self.entrywise(samples, &self.fwd, 1.0 / self.n as f64)
    }

    /// Samples `Σ_m X_m e^{imθ_k}` from at most `N` coefficients.
    fn samples(&self, coeffs: &[CMatrix]) -> Vec<CMatrix> {
        self.entrywise(coeffs, &self.inv, 1.0)
    }

    /// Analytic projection: `X_0/2 + Σ_{1≤m<N/2} X_m ζ^m`, sampled on the grid.
    fn analytic_part(&self, samples: &[CMatrix]) -> Vec<CMatrix> {
        let mut c = self.coeffs(samples);
        c[0] *= Complex64::new(0.5, 0.0);
        for m in c.iter_mut().skip(self.n / 2) {
            m.fill(ZERO);
        }
        self.samples(&c)
    }
}

/// Result of the Szegő screening.
#[derive(Debug, Clone, Serialize)]
pub struct SzegoReport {
    /// `∫ ln det μ′(t) dt/(1+t²)`.
    pub integral: f64,
    pub floored: usize,
    pub nodes: usize,
    pub boundary_zeros: Vec<BoundaryZero>,
    pub passed: bool,
}

impl SzegoReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::SzegoFail {
                integral: self.integral,
                floored: self.floored,
            })
        }
    }
}

fn log_det_hpd(m: &CMatrix) -> Option<f64> {
    let ev = linalg::herm_eigenvalues(m);
    if ev.iter().any(|l| !(*l > 0.0)) {
        return None;
    }
    Some(ev.iter().map(|l| l.ln()).sum())
}

/// Szegő sum over deflated samples `w`, plus the closed-form contribution
/// of the removed zero factors.
fn szego_from(grid: &CircleGrid, map: &MoebiusMap, w: &[CMatrix], zeros: &[BoundaryZero]) -> SzegoReport {
    let mut floored = 0;
    let mut sum = 0.0;
    for (k, m) in w.iter().enumerate() {
        let ld = match log_det_hpd(m) {
            Some(v) if v >= LOG_FLOOR => v,
            _ => {
                floored += 1;
                LOG_FLOOR
            }
        };
        sum += ld * map.poisson_weight(grid.zeta(k));
    }
    let centre = map.weight_center();
    let analytic: f64 = zeros
        .iter()
        .map(|z| PI * z.order as f64 * (ONE - z.zeta.conj() * centre).norm_sqr().ln())
        .sum();
    let integral = sum * grid.step() + analytic;
    let passed = integral > SZEGO_LIMIT && (floored as f64) <= FLOOR_FRACTION * w.len() as f64;
    SzegoReport {
        integral,
        floored,
        nodes: w.len(),
        boundary_zeros: zeros.to_vec(),
        passed,
    }
}

/// Quadrature of `ln det μ′(t)/(1+t²)` over the axis, with each node's
/// log floored at `LOG_FLOOR`.
pub fn szego_check(d: &DensityGrid, map: &MoebiusMap) -> SzegoReport {
    let defl = extract_boundary_zeros(&d.grid, &d.values);
    szego_from(&d.grid, map, &defl.values, &defl.zeros)
}

/// How the Wilson iteration is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilsonStart {
    /// Constant `(mean W)^{1/2}`.
    Constant,
    /// A seeded outer polynomial of degree one with a random unitary in front.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct WilsonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub start: WilsonStart,
}

impl Default for WilsonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-12,
            start: WilsonStart::Constant,
        }
    }
}

/// Outer factor `Ĝ` with `Ĝ(0)` Hermitian positive definite.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralFactor {
    pub p: usize,
    pub grid: CircleGrid,
    pub map: MoebiusMap,
    /// Taylor coefficients `Ĝ_0, Ĝ_1, …`.
    #[serde(with = "crate::report::matrix_vec_serde")]
    pub coeffs: Vec<CMatrix>,
    /// `Ĝ(e^{iθ_k})`.
    #[serde(skip)]
    pub grid_values: Vec<CMatrix>,
    pub boundary_zeros: Vec<BoundaryZero>,
    pub iterations: usize,
    pub method: &'static str,
    pub normalization: &'static str,
}

impl SpectralFactor {
    /// Factor from given Taylor coefficients (no normalization applied).
    pub fn from_coeffs(coeffs: Vec<CMatrix>, grid: CircleGrid, map: MoebiusMap) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for N = {}",
                coeffs.len(),
                grid.len()
            )));
        }
        let p = coeffs[0].nrows();
        let grid_values = Fourier::new(grid.len()).samples(&coeffs);
        Ok(Self {
            p,
            grid,
            map,
            coeffs,
            grid_values,
            boundary_zeros: Vec::new(),
            iterations: 0,
            method: "given",
            normalization: "none",
        })
    }

    /// `Ĝ(ζ)` by Horner's rule.
    pub fn eval_disk(&self, zeta: Complex64) -> CMatrix {
        let mut acc = linalg::zeros(self.p, self.p);
        for c in self.coeffs.iter().rev() {
            acc = acc * zeta + c;
        }
        acc
    }

    /// `Σ‖Ĝ_m‖²_F` and the grid mean of `‖Ĝ(e^{iθ})‖²_F`.
    pub fn parseval(&self) -> (f64, f64) {
        let coeff = self.coeffs.iter().map(|c| linalg::fro(c).powi(2)).sum();
        let grid = self.grid_values.iter().map(|c| linalg::fro(c).powi(2)).sum::<f64>() / self.grid.len() as f64;
        (coeff, grid)
    }

    /// `max_k ‖Ĝ_k*Ĝ_k − μ̂′_k‖_F`.
    pub fn reconstruction_residual(&self, d: &DensityGrid) -> f64 {
        self.grid_values
            .iter()
            .zip(&d.values)
            .map(|(g, v)| linalg::fro(&(g.adjoint() * g - v)))
            .fold(0.0, f64::max)
    }

    /// Multiplies every coefficient by `D(ζ)` and applies the `Ĝ(0)`-HPD normalization.
    fn finish(mut self, zeros: Vec<BoundaryZero>) -> Self {
        let (u, _) = linalg::polar(&self.coeffs[0]);
        let ua = u.adjoint();
        let poly = zero_polynomial(self.p, &zeros);
        let len = self.coeffs.len() + poly.len() - 1;
        let mut out = vec![linalg::zeros(self.p, self.p); len];
        for (i, c) in self.coeffs.iter().enumerate() {
            let c = &ua * c;
            for (j, d) in poly.iter().enumerate() {
                out[i + j] += &c * d;
            }
        }
        out[0] = linalg::herm_part(&out[0]);
        self.coeffs = out;
        self.grid_values = Fourier::new(self.grid.len()).samples(&self.coeffs);
        self.boundary_zeros = zeros;
        self.normalization = "G0-HPD";
        self
    }
}

fn positive_definite_check(w: &[CMatrix]) -> Result<()> {
    for (k, m) in w.iter().enumerate() {
        let lmin = linalg::lambda_min(m);
        if !(lmin > 1e-12 * linalg::lambda_max(m).abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::DensityNotPD {
                index: k,
                lambda_min: lmin,
            });
        }
    }
    Ok(())
}

/// Scalar outer function with `|h|² = ω` on the circle, via the discrete
/// cepstrum of `ln ω`.
pub fn scalar_outer(omega: &[f64], map: MoebiusMap) -> Result<SpectralFactor> {
    let grid = CircleGrid::new(omega.len())?;
    let values: Vec<CMatrix> = omega.iter().map(|w| linalg::scalar(Complex64::new(*w, 0.0))).collect();
    let Deflation { zeros, values: w, .. } = extract_boundary_zeros(&grid, &values).checked()?;
    szego_from(&grid, &map, &w, &zeros).into_result()?;
    positive_definite_check(&w)?;
    let fourier = Fourier::new(grid.len());
    let logs: Vec<CMatrix> = w
        .iter()
        .map(|m| linalg::scalar(Complex64::new(m[(0, 0)].re.ln(), 0.0)))
        .collect();
    let h: Vec<CMatrix> = fourier
        .analytic_part(&logs)
        .iter()
        .map(|m| m.map(|x| x.exp()))
        .collect();
    let coeffs = truncate(fourier.coeffs(&h), grid.len());
    let mut factor = SpectralFactor::from_coeffs(coeffs, grid, map)?;
    factor.method = "cepstrum";
    Ok(factor.finish(zeros))
}

fn truncate(mut coeffs: Vec<CMatrix>, n: usize) -> Vec<CMatrix> {
    coeffs.truncate(n / 2);
    coeffs
}

fn initial_guess(w: &[CMatrix], grid: &CircleGrid, start: WilsonStart) -> Vec<CMatrix> {
    let p = w[0].nrows();
    let mean = w.iter().fold(linalg::zeros(p, p), |acc, m| acc + m) / Complex64::new(w.len() as f64, 0.0);
    let root = linalg::herm_sqrt(&mean);
    match start {
        WilsonStart::Constant => vec![root; w.len()],
        WilsonStart::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gauss = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let raw = CMatrix::from_fn(p, p, |_, _| gauss());
            let (u, _) = linalg::polar(&(raw + linalg::identity(p) * Complex64::new(0.1, 0.0)));
            let b = CMatrix::from_fn(p, p, |_, _| gauss());
            let b = &b * Complex64::new(0.5 / linalg::spectral_norm(&b).max(1e-300), 0.0);
            let scale = Complex64::new(1.0 + rng.random_range(0.0..1.0), 0.0);
            (0..w.len())
                .map(|k| &u * &root * (linalg::identity(p) + &b * grid.zeta(k)) * scale)
                .collect()
        }
    }
}

/// Matrix spectral factorization by Wilson's Newton iteration on the grid.
pub fn wilson_factorize(d: &DensityGrid) -> Result<SpectralFactor> {
    wilson_factorize_with(d, &WilsonOptions::default())
}

pub fn wilson_factorize_with(d: &DensityGrid, opts: &WilsonOptions) -> Result<SpectralFactor> {
    let grid = d.grid;
    let n = grid.len();
    let p = d.p;
    let Deflation { zeros, values: w, .. } = extract_boundary_zeros(&grid, &d.values).checked()?;
    szego_from(&grid, &d.map, &w, &zeros).into_result()?;
    positive_definite_check(&w)?;

    let fourier = Fourier::new(n);
    let mut h = initial_guess(&w, &grid, opts.start);
    let id = linalg::identity(p);
    let mut iterations = 0;
    let mut prev_step = f64::INFINITY;
    loop {
        iterations += 1;
        let mut g = Vec::with_capacity(n);
        for (hk, wk) in h.iter().zip(&w) {
            let x = linalg::right_divide(wk, hk).ok_or(Error::NotConverged {
                iterations,
                step: f64::NAN,
            })?;
            let y = linalg::solve(&hk.adjoint(), &x).ok_or(Error::NotConverged {
                iterations,
                step: f64::NAN,
            })?;
            g.push(linalg::herm_part(&y) + &id);
        }
        let gp = fourier.analytic_part(&g);
        let next: Vec<CMatrix> = gp.iter().zip(&h).map(|(a, b)| a * b).collect();
        let scale = next.iter().map(linalg::fro).fold(0.0, f64::max);
        let step = next
            .iter()
            .zip(&h)
            .map(|(a, b)| linalg::fro(&(a - b)))
            .fold(0.0, f64::max)
            / scale;
        h = next;
        if !step.is_finite() {
            return Err(Error::NotConverged { iterations, step });
        }
        // Below 1e-9 the update is at round-off level once it stops shrinking.
        if step < opts.tolerance || (step < 1e-9 && step >= 0.5 * prev_step) {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations, step });
        }
        prev_step = step;
    }
    let coeffs = truncate(fourier.coeffs(&h), n);
    let mut factor = SpectralFactor::from_coeffs(coeffs, grid, d.map)?;
    factor.iterations = iterations;
    factor.method = "wilson";
    Ok(factor.finish(zeros))
}

/// Interior value `G(z) = Ĝ(ζ(z))` with a truncation indicator.
#[derive(Debug, Clone, Serialize)]
pub struct InteriorValue {
    pub z: Complex64,
    pub zeta: Complex64,
    #[serde(with = "crate::report::matrix_serde")]
    pub value: CMatrix,
    /// `Σ_{m ≥ M/2} ‖Ĝ_m‖ |ζ|^m`: the weight carried by the upper half of the coefficients.
    pub tail_bound: f64,
}

/// Largest disk modulus accepted by [`evaluate_interior`].
pub const MAX_INTERIOR_MODULUS: f64 = 1.0 - 1e-6;

pub fn evaluate_interior(factor: &SpectralFactor, z: Complex64) -> Result<InteriorValue> {
    let zeta = factor.map.to_disk(z)?;
    evaluate_disk(factor, zeta).map(|mut v| {
        v.z = z;
        v
    })
}

pub fn evaluate_disk(factor: &SpectralFactor, zeta: Complex64) -> Result<InteriorValue> {
    let r = zeta.norm();
    if !(r <= MAX_INTERIOR_MODULUS) {
        return Err(Error::TooCloseToBoundary { modulus: r });
    }
    let half = factor.coeffs.len() / 2;
    let tail_bound = factor
        .coeffs
        .iter()
        .enumerate()
        .skip(half)
        .map(|(m, c)| linalg::fro(c) * r.powi(m as i32))
        .sum();
    let z = factor
        .map
        .to_halfplane(zeta)
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    Ok(InteriorValue {
        z,
        zeta,
        value: factor.eval_disk(zeta),
        tail_bound,
    })
}

/// Mean-log test of outerness for `det Ĝ`.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// `ln|det Ĝ(0)|`.
    pub center_log: f64,
    /// Grid mean of `ln|det Ĝ(e^{iθ})|`.
    pub boundary_mean_log: f64,
    pub residual: f64,
    pub tolerance: f64,
    /// Change of both values when `Ĝ` is replaced by `UĜ` for a fixed unitary `U`.
    pub unitary_residual: f64,
    pub boundary_zeros: Vec<BoundaryZero>,
    pub passed: bool,
}

fn mean_log_values(grid: &CircleGrid, coeff0: &CMatrix, values: &[CMatrix]) -> (f64, f64, Vec<BoundaryZero>) {
    let center = linalg::det(coeff0).norm().ln();
    let dets: Vec<CMatrix> = values
        .iter()
        .map(|m| linalg::scalar(Complex64::new(linalg::det(m).norm_sqr(), 0.0)))
        .collect();
    // Each zero factor has zero mean log on the circle, so the deflated mean is the full mean.
    let Deflation {
        zeros,
        values: deflated,
        ..
    } = extract_boundary_zeros(grid, &dets);
    let mean = deflated.iter().map(|m| 0.5 * m[(0, 0)].re.ln()).sum::<f64>() / grid.len() as f64;
    (center, mean, zeros)
}

fn probe_unitary(p: usize) -> CMatrix {
    let m = CMatrix::from_fn(p, p, |i, j| {
        Complex64::new(1.0 + (i * p + j) as f64, 0.5 * (i as f64 - j as f64) + 0.3)
    });
    linalg::polar(&m).0
}

pub fn outer_certificate(factor: &SpectralFactor) -> CertificateReport {
    let (center, mean, zeros) = mean_log_values(&factor.grid, &factor.coeffs[0], &factor.grid_values);
    let u = probe_unitary(factor.p);
    let rotated: Vec<CMatrix> = factor.grid_values.iter().map(|g| &u * g).collect();
    let (center_u, mean_u, _) = mean_log_values(&factor.grid, &(&u * &factor.coeffs[0]), &rotated);
    let residual = (center - mean).abs();
    let tolerance = 1e-6 * (1.0 + mean.abs());
    let unitary_residual = (center_u - center).abs() + (mean_u - mean).abs();
    CertificateReport {
        center_log: center,
        boundary_mean_log: mean,
        residual,
        tolerance,
        unitary_residual,
        boundary_zeros: zeros,
        passed: residual.is_finite() && residual <= tolerance,
    }
}

/// Export schema `{"p","N","z0","coeffs","certificate"}`.
#[derive(Debug, Clone, Serialize)]
pub struct FactorExport {
    pub p: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub z0: [f64; 2],
    #[serde(with = "crate::report::matrix_vec_serde")]
    pub coeffs: Vec<CMatrix>,
    pub certificate: CertificateReport,
}

impl FactorExport {
    pub fn new(factor: &SpectralFactor, certificate: CertificateReport) -> Self {
        let z0 = factor.map.z0();
        Self {
            p: factor.p,
            n: factor.grid.len(),
            z0: [z0.re, z0.im],
            coeffs: factor.coeffs.clone(),
            certificate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn e0_omega(n: usize) -> Vec<f64> {
        let grid = CircleGrid::new(n).unwrap();
        (0..n).map(|k| (1.0 - grid.angle(k).cos()) / (2.0 * PI)).collect()
    }

    #[test]
    fn zero_detection_on_e0_density() {
        let grid = CircleGrid::new(1024).unwrap();
        let values: Vec<CMatrix> = e0_omega(1024).iter().map(|w| linalg::scalar(c(*w, 0.0))).collect();
        let Deflation {
            zeros,
            values: w,
            unresolved,
        } = extract_boundary_zeros(&grid, &values);
        assert!(unresolved.is_empty());
        assert_eq!(zeros.len(), 1);
        assert_eq!((zeros[0].index, zeros[0].order), (0, 1));
        // (1 − cos θ)/(2π) = |1 − ζ|²/(4π).
        assert!(w.iter().all(|m| (m[(0, 0)].re - 1.0 / (4.0 * PI)).abs() < 1e-12));
    }

    #[test]
    fn mixed_order_zero_is_split_by_direction() {
        // W = V* diag(|1−ζ|², |1−ζ|⁴) V for a fixed unitary V.
        let grid = CircleGrid::new(1024).unwrap();
        let v = linalg::polar(&linalg::from_rows(&[
            vec![c(1.0, 0.5), c(0.3, 0.0)],
            vec![c(-0.2, 0.1), c(0.8, -0.4)],
        ]))
        .0;
        let values: Vec<CMatrix> = (0..1024)
            .map(|k| {
                let a = (ONE - grid.zeta(k)).norm_sqr();
                let d = linalg::from_rows(&[vec![c(a, 0.0), ZERO], vec![ZERO, c(a * a, 0.0)]]);
                v.adjoint() * d * &v
            })
            .collect();
        let Deflation {
            zeros,
            values: w,
            unresolved,
        } = extract_boundary_zeros(&grid, &values);
        assert!(unresolved.is_empty());
        assert_eq!(zeros.len(), 1);
        assert_eq!(zeros[0].order, 3);
        assert_eq!(zeros[0].steps.iter().map(|s| s.rank).collect::<Vec<_>>(), vec![2, 1]);
        let id = linalg::identity(2);
        assert!(w.iter().all(|m| linalg::fro(&(m - &id)) < 1e-9));
    }

    #[test]
    fn zero_polynomial_expands() {
        let step = ZeroStep {
            projector: linalg::identity(1),
            rank: 1,
        };
        let z = BoundaryZero {
            index: 0,
            zeta: ONE,
            order: 2,
            steps: vec![step.clone(), step],
        };
        let poly: Vec<Complex64> = zero_polynomial(1, &[z]).iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(poly, vec![ONE, c(-2.0, 0.0), ONE]);
    }

    #[test]
    fn scalar_outer_examples() {
        let map = MoebiusMap::default();
        let f = scalar_outer(&vec![1.0; 256], map).unwrap();
        assert!((f.coeffs[0][(0, 0)] - ONE).norm() < 1e-14);
        assert!(f.coeffs.iter().skip(1).all(|c| c[(0, 0)].norm() < 1e-14));

        let f = scalar_outer(&e0_omega(4096), map).unwrap();
        let s = 1.0 / (2.0 * PI.sqrt());
        assert!((f.coeffs[0][(0, 0)] - c(s, 0.0)).norm() < 1e-12);
        assert!((f.coeffs[1][(0, 0)] + c(s, 0.0)).norm() < 1e-12);

        let grid = CircleGrid::new(512).unwrap();
        let omega: Vec<f64> = (0..512).map(|k| (c(2.0, 0.0) - grid.zeta(k)).norm_sqr()).collect();
        let f = scalar_outer(&omega, map).unwrap();
        assert!((f.coeffs[0][(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((f.coeffs[1][(0, 0)] + ONE).norm() < 1e-12);
        assert!(f.coeffs.iter().skip(2).all(|c| c[(0, 0)].norm() < 1e-12));
    }

    #[test]
    fn szego_examples() {
        let map = MoebiusMap::default();
        let grid = CircleGrid::for_axis(4096).unwrap();
        let e0 = DensityGrid::from_fn(grid, map, |th| linalg::scalar(c((1.0 - th.cos()) / (2.0 * PI), 0.0))).unwrap();
        let rep = szego_check(&e0, &map);
        assert!(rep.passed);
        assert!((rep.integral - (-2.0 * PI * 2f64.ln() - PI * PI.ln())).abs() < 1e-9);

        let flat = DensityGrid::from_fn(grid, map, |_| linalg::scalar(c(1.0 / PI, 0.0))).unwrap();
        assert!((szego_check(&flat, &map).integral + PI * PI.ln()).abs() < 1e-9);

        let half =
            DensityGrid::from_fn(grid, map, |th| linalg::scalar(c(if th < PI { 1.0 } else { 0.0 }, 0.0))).unwrap();
        let rep = szego_check(&half, &map);
        assert!(!rep.passed && rep.floored > 1000);
    }

    #[test]
    fn wilson_constant_density() {
        let map = MoebiusMap::default();
        let grid = CircleGrid::new(256).unwrap();
        let d = DensityGrid::from_fn(grid, map, |_| linalg::identity(2) * c(4.0, 0.0)).unwrap();
        let f = wilson_factorize(&d).unwrap();
        assert!(linalg::fro(&(&f.coeffs[0] - linalg::identity(2) * c(2.0, 0.0))) < 1e-12);
        assert!(f.coeffs.iter().skip(1).all(|c| linalg::fro(c) < 1e-12));
    }

    #[test]
    fn certificate_examples() {
        let map = MoebiusMap::default();
        let grid = CircleGrid::new(1024).unwrap();
        let s = 1.0 / (2.0 * PI.sqrt());
        let f = SpectralFactor::from_coeffs(vec![linalg::scalar(c(s, 0.0)), linalg::scalar(c(-s, 0.0))], grid, map)
            .unwrap();
        let cert = outer_certificate(&f);
        assert!(cert.passed, "{cert:?}");
        assert!((cert.center_log - s.ln()).abs() < 1e-14);

        let inner = SpectralFactor::from_coeffs(vec![linalg::zeros(2, 2), linalg::identity(2)], grid, map).unwrap();
        let cert = outer_certificate(&inner);
        assert!(!cert.passed && cert.center_log == f64::NEG_INFINITY);

        let flat = SpectralFactor::from_coeffs(vec![linalg::identity(3) * c(1.5, 0.0)], grid, map).unwrap();
        let cert = outer_certificate(&flat);
        assert!(cert.passed && cert.residual < 1e-14 && cert.unitary_residual < 1e-13);
    }

    #[test]
    fn interior_rejects_boundary() {
        let grid = CircleGrid::new(256).unwrap();
        let f = SpectralFactor::from_coeffs(vec![linalg::scalar(ONE)], grid, MoebiusMap::default()).unwrap();
        let z = MoebiusMap::default().to_halfplane(c(0.9999999, 0.0)).unwrap();
        assert!(matches!(
            evaluate_interior(&f, z),
            Err(Error::TooCloseToBoundary { .. })
        ));
        assert!((evaluate_interior(&f, c(0.3, 2.0)).unwrap().value[(0, 0)] - ONE).norm() < 1e-15);
    }
}
