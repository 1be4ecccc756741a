//! One function per subcommand. Each returns the rendered report and
//! whether every check passed.

use num_complex::Complex64;
use serde::Serialize;
use snode_core::conformal::{self, CircleGrid, MoebiusMap};
use snode_core::entropy::{self, EntropyVerification, GrowthReport, SmirnovReport};
use snode_core::frame::{self, FrameSample, JReport};
use snode_core::lft::{self, HerglotzEval, PairJ, PairJson, PairReport};
use snode_core::linalg::{self, CMatrix};
use snode_core::report::{self, fmt_real, CsvTable};
use snode_core::snode::{self, NodeJson, SNode, SpectrumReport, ValidationReport};
use snode_core::specfact::{self, FactorExport, InteriorValue, SzegoReport};

use crate::config::{Command, ExperimentConfig, Format, PairSource};
use crate::error::{CliError, Context};
use crate::read_file;

/// Herglotz check threshold on `λ_min(Im φ)`.
pub const HERGLOTZ_TOL: f64 = 1e-10;

pub struct Outcome {
    pub body: String,
    pub passed: bool,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let node = load_node(cfg)?;
    let map = MoebiusMap::new(cfg.z0).context("z0")?;
    match cfg.command {
        Command::Validate => validate(cfg, &node),
        Command::Frame => frame_cmd(cfg, &node),
        Command::Lft => lft_cmd(cfg, &node, &map),
        Command::Factorize => factorize(cfg, &node, &map),
        Command::Entropy => entropy_cmd(cfg, &node, &map),
        Command::Diagnose => diagnose(cfg, &node, &map),
    }
}

fn load_node(cfg: &ExperimentConfig) -> Result<SNode, CliError> {
    let text = read_file(&cfg.node)?;
    let doc: NodeJson = serde_json::from_str(&text).map_err(|e| CliError::ConfigParse {
        path: cfg.node.clone(),
        message: e.to_string(),
    })?;
    SNode::from_json(&doc).context(format!("node {}", cfg.node.display()))
}

fn load_pair(cfg: &ExperimentConfig, node: &SNode, map: &MoebiusMap) -> Result<PairJ, CliError> {
    match cfg.pair.as_ref().expect("checked by validate") {
        PairSource::Identity => Ok(PairJ::identity(node.p())),
        PairSource::Equality => {
            lft::equality_pair(node, cfg.lambda.expect("checked by validate")).context("equality pair")
        }
        PairSource::File(path) => {
            let text = read_file(path)?;
            let doc: PairJson = serde_json::from_str(&text).map_err(|e| CliError::ConfigParse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let pair = doc.into_pair(*map).context(format!("pair {}", path.display()))?;
            if pair.p() != node.p() {
                return Err(CliError::Usage(format!(
                    "pair has p = {}, node has p = {}",
                    pair.p(),
                    node.p()
                )));
            }
            Ok(pair)
        }
    }
}

fn points(cfg: &ExperimentConfig) -> Vec<Complex64> {
    if cfg.z_points.is_empty() {
        vec![Complex64::new(0.0, 1.0)]
    } else {
        cfg.z_points.clone()
    }
}

fn render<T: Serialize>(cfg: &ExperimentConfig, doc: &T, csv: impl FnOnce() -> String, passed: bool) -> Outcome {
    let body = match cfg.format {
        Format::Json => report::to_deterministic_json(doc).expect("reports serialize"),
        Format::Csv => csv(),
    };
    Outcome { body, passed }
}

#[derive(Serialize)]
struct ValidateDoc<'a> {
    command: &'static str,
    passed: bool,
    validation: &'a ValidationReport,
    spectrum: &'a SpectrumReport,
}

fn validate(cfg: &ExperimentConfig, node: &SNode) -> Result<Outcome, CliError> {
    let v = snode::validate_node(node, &cfg.tolerances);
    let spectrum = snode::spectrum_report(node, cfg.r0.unwrap_or_else(|| entropy::default_r0(node)));
    let passed = v.passed();
    let doc = ValidateDoc {
        command: "validate",
        passed,
        validation: &v,
        spectrum: &spectrum,
    };
    let csv = || {
        let mut t = CsvTable::new(&["quantity", "value"]);
        for (k, x) in [
            ("identity_residual", v.identity_residual),
            ("identity_tolerance", v.identity_tolerance),
            ("hermitian_residual", v.hermitian_residual),
            ("s_min_eigenvalue", v.s_min_eigenvalue),
            ("s_max_eigenvalue", v.s_max_eigenvalue),
        ] {
            t.push(vec![k.into(), fmt_real(x)]);
        }
        t.push(vec!["phi2_rank".into(), v.phi2_rank.to_string()]);
        t.push(vec!["passed".into(), passed.to_string()]);
        t.render()
    };
    Ok(render(cfg, &doc, csv, passed))
}

#[derive(Serialize)]
struct FramePoint {
    sample: FrameSample,
    j_inequality: Option<JReport>,
    #[serde(serialize_with = "opt_matrix")]
    rho: Option<CMatrix>,
    inverse_residual: Option<f64>,
    duality_residual: Option<f64>,
    conjugate_residual: Option<f64>,
    block_residual: Option<f64>,
    kernel_residual: Option<f64>,
}

fn opt_matrix<S: serde::Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
    m.as_ref().map(report::matrix_to_json).serialize(s)
}

#[derive(Serialize)]
struct FrameDoc {
    command: &'static str,
    passed: bool,
    lambda: Option<Complex64>,
    points: Vec<FramePoint>,
}

fn frame_cmd(cfg: &ExperimentConfig, node: &SNode) -> Result<Outcome, CliError> {
    let mut out = Vec::new();
    for z in points(cfg) {
        let sample = frame::eval_frame(node, z);
        let point = if sample.is_pole {
            FramePoint {
                sample,
                j_inequality: None,
                rho: None,
                inverse_residual: None,
                duality_residual: None,
                conjugate_residual: None,
                block_residual: None,
                kernel_residual: None,
            }
        } else {
            let at = |what: &str| format!("{what} at z = {z}");
            FramePoint {
                j_inequality: Some(frame::check_j_inequality(node, z).context(at("J-inequality"))?),
                rho: Some(frame::rho(node, z, z.conj()).context(at("rho"))?.value),
                inverse_residual: Some(frame::inverse_residual(node, z).context(at("inverse"))?),
                duality_residual: Some(frame::duality_residual(node, z).context(at("duality"))?),
                conjugate_residual: Some(
                    frame::conjugate_identity_residual(node, z).context(at("conjugate identity"))?,
                ),
                block_residual: Some(frame::block_identity_residual(node, z).context(at("block identity"))?),
                kernel_residual: match cfg.lambda {
                    Some(l) => Some(frame::kernel_identity_residual(node, z, l).context(at("kernel identity"))?),
                    None => None,
                },
                sample,
            }
        };
        out.push(point);
    }
    let passed = out.iter().all(|p| p.j_inequality.as_ref().is_none_or(|j| j.passed));
    let doc = FrameDoc {
        command: "frame",
        passed,
        lambda: cfg.lambda,
        points: out,
    };
    let csv = || {
        let mut t = CsvTable::new(&[
            "z_re",
            "z_im",
            "is_pole",
            "j_form_min",
            "block_extreme",
            "inverse_residual",
            "duality_residual",
            "conjugate_residual",
            "block_residual",
            "kernel_residual",
        ]);
        let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
        for p in &doc.points {
            let j = p.j_inequality.as_ref();
            t.push(vec![
                fmt_real(p.sample.z.re),
                fmt_real(p.sample.z.im),
                p.sample.is_pole.to_string(),
                opt(j.and_then(|j| j.j_form_min)),
                opt(j.map(|j| j.block_extreme)),
                opt(p.inverse_residual),
                opt(p.duality_residual),
                opt(p.conjugate_residual),
                opt(p.block_residual),
                opt(p.kernel_residual),
            ]);
        }
        t.render()
    };
    Ok(render(cfg, &doc, csv, passed))
}

#[derive(Serialize)]
struct PhiPoint {
    z: Complex64,
    #[serde(with = "snode_core::report::matrix_serde")]
    phi: CMatrix,
    /// `λ_min(Im φ)`.
    herglotz_margin: f64,
}

#[derive(Serialize)]
struct LftDoc {
    command: &'static str,
    passed: bool,
    pair_kind: &'static str,
    pair: Option<PairJson>,
    pair_check: PairReport,
    herglotz_min: f64,
    points: Vec<PhiPoint>,
}

fn lft_cmd(cfg: &ExperimentConfig, node: &SNode, map: &MoebiusMap) -> Result<Outcome, CliError> {
    let pair = load_pair(cfg, node, map)?;
    let zs = points(cfg);
    let pair_check = lft::check_pair(&pair, &zs).context("pair check")?;
    let h = HerglotzEval::from_lft(node, pair.clone()).context("LFT")?;
    let mut pts = Vec::new();
    for &z in &zs {
        let phi = h.eval(z).context(format!("phi at z = {z}"))?;
        let herglotz_margin = linalg::lambda_min(&linalg::im_part(&phi));
        pts.push(PhiPoint {
            z,
            phi,
            herglotz_margin,
        });
    }
    let herglotz_min = pts.iter().map(|p| p.herglotz_margin).fold(f64::INFINITY, f64::min);
    let passed = pair_check.passed && herglotz_min >= -HERGLOTZ_TOL;
    let doc = LftDoc {
        command: "lft",
        passed,
        pair_kind: pair.kind(),
        pair: PairJson::from_constant(&pair),
        pair_check,
        herglotz_min,
        points: pts,
    };
    let csv = || {
        let mut t = CsvTable::new(&["z_re", "z_im", "herglotz_margin"]);
        for p in &doc.points {
            t.push_reals(&[p.z.re, p.z.im, p.herglotz_margin]);
        }
        t.render()
    };
    Ok(render(cfg, &doc, csv, passed))
}

#[derive(Serialize)]
struct FactorizeDoc {
    command: &'static str,
    passed: bool,
    grid: usize,
    density_defect: f64,
    flagged_nodes: Vec<usize>,
    szego: SzegoReport,
    factor: Option<FactorExport>,
    reconstruction_residual: Option<f64>,
    interior: Vec<InteriorValue>,
}

fn factorize(cfg: &ExperimentConfig, node: &SNode, map: &MoebiusMap) -> Result<Outcome, CliError> {
    let pair = load_pair(cfg, node, map)?;
    let h = HerglotzEval::from_lft(node, pair).context("LFT")?;
    let grid = CircleGrid::for_axis(cfg.grid).context("grid")?;
    let density = conformal::extract_density(&h, &grid, map, conformal::DEFAULT_EPS).context("density extraction")?;
    let szego = specfact::szego_check(&density, map);
    let mut doc = FactorizeDoc {
        command: "factorize",
        passed: szego.passed,
        grid: cfg.grid,
        density_defect: density.max_defect(),
        flagged_nodes: density.flagged_nodes(),
        szego,
        factor: None,
        reconstruction_residual: None,
        interior: Vec::new(),
    };
    if doc.szego.passed {
        let factor = specfact::wilson_factorize(&density).context("factorization")?;
        let certificate = specfact::outer_certificate(&factor);
        doc.passed = certificate.passed;
        doc.reconstruction_residual = Some(factor.reconstruction_residual(&density));
        for z in &cfg.z_points {
            doc.interior
                .push(specfact::evaluate_interior(&factor, *z).context(format!("G at z = {z}"))?);
        }
        doc.factor = Some(FactorExport::new(&factor, certificate));
    }
    let passed = doc.passed;
    Ok(render(cfg, &doc, || density.to_csv(), passed))
}

#[derive(Serialize)]
struct EntropyDoc<'a> {
    command: &'static str,
    passed: bool,
    grid: usize,
    z0: Complex64,
    verification: &'a EntropyVerification,
}

fn entropy_cmd(cfg: &ExperimentConfig, node: &SNode, map: &MoebiusMap) -> Result<Outcome, CliError> {
    let pair = load_pair(cfg, node, map)?;
    let grid = CircleGrid::for_axis(cfg.grid).context("grid")?;
    let v = entropy::verify_inequality(node, &pair, &points(cfg), &grid, map).context("entropy verification")?;
    let passed = !v.hypothesis_fail && !v.any_violation();
    let doc = EntropyDoc {
        command: "entropy",
        passed,
        grid: cfg.grid,
        z0: cfg.z0,
        verification: &v,
    };
    Ok(render(cfg, &doc, || entropy::entropy_csv(&v.reports), passed))
}

#[derive(Serialize)]
struct DiagnoseDoc<'a> {
    command: &'static str,
    passed: bool,
    spectrum: &'a SpectrumReport,
    smirnov: &'a SmirnovReport,
    growth: &'a GrowthReport,
}

fn diagnose(cfg: &ExperimentConfig, node: &SNode, map: &MoebiusMap) -> Result<Outcome, CliError> {
    let r0 = cfg.r0.unwrap_or_else(|| entropy::default_r0(node));
    let spectrum = snode::spectrum_report(node, r0);
    let grid = CircleGrid::for_axis(cfg.grid).context("grid")?;
    let smirnov = entropy::smirnov_diagnostics(node, &grid, map).context("Smirnov diagnostic")?;
    let growth = entropy::growth_diagnostics(node, r0, entropy::DEFAULT_R_MAX).context("growth diagnostic")?;
    let passed = spectrum.hypothesis_a && spectrum.hypothesis_b && smirnov.passed && growth.passed;
    let doc = DiagnoseDoc {
        command: "diagnose",
        passed,
        spectrum: &spectrum,
        smirnov: &smirnov,
        growth: &growth,
    };
    Ok(render(cfg, &doc, || growth.to_csv(), passed))
}
