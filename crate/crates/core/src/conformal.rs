//! Transport between the upper half-plane and the unit disk through
//! `z = (z̄₀ζ − z₀)/(ζ − 1)`, uniform circle grids, the `dt/(1+t²)` weight,
//! and boundary-density extraction from Herglotz functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lft::HerglotzEval;
use crate::linalg::{self, CMatrix, I, ONE};
use crate::report::{fmt_real, CsvTable};

/// Default offset above the real axis for boundary-value extraction.
pub const DEFAULT_EPS: f64 = 1e-5;
/// Relative disagreement between the two offset passes that flags a node.
pub const POLE_FLAG_TOL: f64 = 1e-3;

/// Möbius map of the disk onto the upper half-plane with `ζ = 0 ↦ z₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoebiusMap {
    z0: Complex64,
}

impl Default for MoebiusMap {
    fn default() -> Self {
        Self { z0: I }
    }
}

impl MoebiusMap {
    pub fn new(z0: Complex64) -> Result<Self> {
        if !(z0.im > 0.0) || !z0.re.is_finite() || !z0.im.is_finite() {
            return Err(Error::InvalidCenter(z0));
        }
        Ok(Self { z0 })
    }

    pub fn z0(&self) -> Complex64 {
        self.z0
    }

    /// `ζ = (z − z₀)/(z − z̄₀)`.
    pub fn to_disk(&self, z: Complex64) -> Result<Complex64> {
        let den = z - self.z0.conj();
        if den.norm() <= 1e-300 || !den.is_finite() {
            return Err(Error::MapSingularity(z));
        }
        Ok((z - self.z0) / den)
    }

    /// `z = (z̄₀ζ − z₀)/(ζ − 1)`.
    pub fn to_halfplane(&self, zeta: Complex64) -> Result<Complex64> {
        let den = zeta - ONE;
        if den.norm() <= 1e-300 {
            return Err(Error::MapSingularity(zeta));
        }
        Ok((self.z0.conj() * zeta - self.z0) / den)
    }

    /// Real point `t(θ)` hit by `ζ = e^{iθ}`.
    pub fn boundary_point(&self, theta: f64) -> Result<f64> {
        Ok(self.to_halfplane(Complex64::from_polar(1.0, theta))?.re)
    }

    /// Jacobian weight with `dt/(1+t²) = w(θ)dθ`; undefined at `θ = 0`.
    pub fn weight(&self, theta: f64) -> Result<f64> {
        let zeta = Complex64::from_polar(1.0, theta);
        if (zeta - ONE).norm() <= 1e-300 {
            return Err(Error::MapSingularity(zeta));
        }
        Ok(self.poisson_weight(zeta))
    }

    /// The same weight written as a half Poisson kernel, which extends
    /// continuously to `ζ = 1`; used inside quadratures.
    pub fn poisson_weight(&self, zeta: Complex64) -> f64 {
        let num = (I * (self.z0.conj() - self.z0)).re;
        num / ((zeta - ONE).norm_sqr() + (self.z0.conj() * zeta - self.z0).norm_sqr())
    }

    /// Disk point at which the weight is the Poisson kernel: the preimage of `i`.
    pub fn weight_center(&self) -> Complex64 {
        (I - self.z0) / (I - self.z0.conj())
    }
}

/// Disk evaluator `ζ ↦ f(z(ζ))`.
pub fn hat_transport<T, F>(f: F, map: MoebiusMap) -> impl Fn(Complex64) -> Result<T>
where
    F: Fn(Complex64) -> Result<T>,
{
    move |zeta| f(map.to_halfplane(zeta)?)
}

/// Half-plane evaluator `z ↦ g(ζ(z))`.
pub fn breve_transport<T, G>(g: G, map: MoebiusMap) -> impl Fn(Complex64) -> Result<T>
where
    G: Fn(Complex64) -> Result<T>,
{
    move |z| g(map.to_disk(z)?)
}

/// `N` equally spaced angles on the circle, `θ_k = 2πk/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircleGrid {
    n: usize,
    excluded: Option<usize>,
}

impl CircleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {n} must be a power of two ≥ 256")));
        }
        Ok(Self { n, excluded: None })
    }

    /// Grid for half-line data: node 0 (`ζ = 1`, `t = ∞`) is excluded.
    pub fn for_axis(n: usize) -> Result<Self> {
        Ok(Self {
            excluded: Some(0),
            ..Self::new(n)?
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn excluded(&self) -> Option<usize> {
        self.excluded
    }
    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n as f64
    }
    pub fn zeta(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(k))
    }
    pub fn step(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// `Σ_k f(θ_k)·w(θ_k)·(2π/N)` over non-excluded nodes, approximating
    /// `∫ f(t) dt/(1+t²)`.
    pub fn axis_quadrature(&self, map: &MoebiusMap, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.n)
            .filter(|k| Some(*k) != self.excluded)
            .map(|k| f(k) * map.poisson_weight(self.zeta(k)))
            .sum::<f64>()
            * self.step()
    }
}

/// Boundary density sampled on a circle grid; values are shared between the
/// disk (`θ_k`) and axis (`t_k = t(θ_k)`) pictures.
#[derive(Debug, Clone, Serialize)]
pub struct DensityGrid {
    pub grid: CircleGrid,
    pub map: MoebiusMap,
    pub p: usize,
    #[serde(with = "crate::report::matrix_vec_serde")]
    pub values: Vec<CMatrix>,
    /// `t(θ_k)`; `+∞` at node 0.
    pub axis_points: Vec<f64>,
    /// Most negative eigenvalue clipped at each node (0 when none).
    pub psd_defect: Vec<f64>,
    /// Nodes where the two offset passes disagree (likely real-axis poles).
    pub pole_flags: Vec<bool>,
}

impl DensityGrid {
    /// Builds a grid from values given directly on the circle.
    pub fn from_circle(grid: CircleGrid, map: MoebiusMap, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for N = {}",
                values.len(),
                grid.len()
            )));
        }
        let p = values[0].nrows();
        let mut projected = Vec::with_capacity(values.len());
        let mut psd_defect = Vec::with_capacity(values.len());
        for v in &values {
            if v.shape() != (p, p) || !linalg::is_finite(v) {
                return Err(Error::InvalidInput("density values must be finite p×p matrices".into()));
            }
            let (m, d) = linalg::psd_project(v);
            projected.push(m);
            psd_defect.push(d);
        }
        Ok(Self {
            grid,
            map,
            p,
            values: projected,
            axis_points: axis_points(&grid, &map),
            psd_defect,
            pole_flags: vec![false; grid.len()],
        })
    }

    /// Builds a grid from a function of the angle.
    pub fn from_fn(grid: CircleGrid, map: MoebiusMap, f: impl Fn(f64) -> CMatrix + Sync) -> Result<Self> {
        let values = (0..grid.len()).into_par_iter().map(|k| f(grid.angle(k))).collect();
        Self::from_circle(grid, map, values)
    }

    /// `(t_k, μ′(t_k))` pairs on the real axis, skipping the excluded node.
    pub fn axis_values(&self) -> impl Iterator<Item = (f64, &CMatrix)> {
        (0..self.grid.len())
            .filter(move |k| Some(*k) != self.grid.excluded())
            .map(move |k| (self.axis_points[k], &self.values[k]))
    }

    pub fn max_defect(&self) -> f64 {
        self.psd_defect.iter().copied().fold(0.0, f64::max)
    }

    pub fn flagged_nodes(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|k| self.pole_flags[*k]).collect()
    }

    /// CSV with columns `theta, t, re_ij, im_ij…`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["theta".to_owned(), "t".to_owned()];
        for i in 0..self.p {
            for j in 0..self.p {
                header.push(format!("re_{i}{j}"));
                header.push(format!("im_{i}{j}"));
            }
        }
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = CsvTable::new(&refs);
        for k in 0..self.grid.len() {
            let mut row = vec![fmt_real(self.grid.angle(k)), fmt_real(self.axis_points[k])];
            for i in 0..self.p {
                for j in 0..self.p {
                    row.push(fmt_real(self.values[k][(i, j)].re));
                    row.push(fmt_real(self.values[k][(i, j)].im));
                }
            }
            table.push(row);
        }
        table.render()
    }
}

fn axis_points(grid: &CircleGrid, map: &MoebiusMap) -> Vec<f64> {
    (0..grid.len())
        .map(|k| map.boundary_point(grid.angle(k)).unwrap_or(f64::INFINITY))
        .collect()
}

/// `Im φ(t + iε)/π`, Hermitianized.
fn offset_density(h: &HerglotzEval, t: f64, eps: f64) -> Result<CMatrix> {
    let phi = h.eval(Complex64::new(t, eps))?;
    Ok(linalg::im_part(&phi) / Complex64::new(PI, 0.0))
}

/// Boundary density `μ′(t) = Im φ(t + i0)/π` at one real point, with one
/// Richardson step over the offsets `ε` and `ε/2`. Also returns the raw
/// disagreement between the passes.
pub fn density_at(h: &HerglotzEval, t: f64, eps: f64) -> Result<(CMatrix, f64)> {
    let d1 = offset_density(h, t, eps)?;
    let d2 = offset_density(h, t, eps / 2.0)?;
    let diff = linalg::fro(&(&d1 - &d2));
    Ok((&d2 * Complex64::new(2.0, 0.0) - d1, diff))
}

/// Samples the boundary density of `h` on the axis grid. The excluded node
/// (`t = ∞`) is filled by even extrapolation from its neighbours.
pub fn extract_density(h: &HerglotzEval, grid: &CircleGrid, map: &MoebiusMap, eps: f64) -> Result<DensityGrid> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("offset must be positive, got {eps}")));
    }
    let grid = CircleGrid::for_axis(grid.len())?;
    let n = grid.len();
    let ts = axis_points(&grid, map);
    let samples: Vec<(CMatrix, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                Ok((linalg::zeros(h.p(), h.p()), 0.0))
            } else {
                density_at(h, ts[k], eps)
            }
        })
        .collect::<Result<_>>()?;

    let mut norms: Vec<f64> = samples.iter().skip(1).map(|(m, _)| linalg::fro(m)).collect();
    norms.sort_by(f64::total_cmp);
    let typical = norms[norms.len() / 2];

    let mut raw: Vec<CMatrix> = samples.iter().map(|(m, _)| m.clone()).collect();
    raw[0] = even_extrapolate(&raw, 0);
    let pole_flags: Vec<bool> = samples
        .iter()
        .enumerate()
        .map(|(k, (m, diff))| k != 0 && *diff > POLE_FLAG_TOL * linalg::fro(m).max(typical))
        .collect();

    let mut values = Vec::with_capacity(n);
    let mut psd_defect = Vec::with_capacity(n);
    for m in raw {
        let (proj, d) = linalg::psd_project(&m);
        values.push(proj);
        psd_defect.push(d);
    }
    Ok(DensityGrid {
        grid,
        map: *map,
        p: h.p(),
        values,
        axis_points: ts,
        psd_defect,
        pole_flags,
    })
}

/// Fourth-order even extrapolation of node `k` from nodes `k±1`, `k±2`.
pub(crate) fn even_extrapolate(values: &[CMatrix], k: usize) -> CMatrix {
    let n = values.len();
    let at = |d: isize| &values[((k as isize + d).rem_euclid(n as isize)) as usize];
    let a1 = (at(1) + at(-1)) * Complex64::new(0.5, 0.0);
    let a2 = (at(2) + at(-2)) * Complex64::new(0.5, 0.0);
    (a1 * Complex64::new(4.0, 0.0) - a2) / Complex64::new(3.0, 0.0)
}
