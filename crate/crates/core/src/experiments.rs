//! Convergence sweeps over lattice spacings.

use crate::bounded::{build_leray_qi, BoundedConfig, LerayFit};
use crate::error::{Error, Result};
use crate::fields::{BuiltinField, Part};
use crate::kernel::{KernelEvaluator, KernelSpec, Variant};
use crate::lattice::{uniform_mesh, GridField, QiWarning, QuasiInterpolant, Truncation};
use crate::report::{rmse, ConvergenceReport, ReportRow};

#[derive(Clone, Debug)]
pub struct WholespaceParams {
    pub field: BuiltinField,
    pub ell: u32,
    pub k: u32,
    pub alpha: Vec<u32>,
    pub h_list: Vec<f64>,
    pub sample_lo: Vec<f64>,
    pub sample_hi: Vec<f64>,
    pub eval_lo: Vec<f64>,
    pub eval_hi: Vec<f64>,
    pub eval_mesh: usize,
    pub truncation: Truncation,
    /// Operator exponents `(eta, beta, gamma)` of the curl-free kernel.
    pub curl_operator: (u8, u8, u8),
}

impl WholespaceParams {
    /// Sample box `[0,12]^2`, spacings `12/(18+6i)`, `20 x 20` mesh on `[5.5,6.5]^2`.
    pub fn standard(ell: u32, k: u32, alpha: Vec<u32>) -> Self {
        Self {
            field: BuiltinField::WsFull,
            ell,
            k,
            alpha,
            h_list: (0..9).map(|i| 12.0 / (18.0 + 6.0 * i as f64)).collect(),
            sample_lo: vec![0.0, 0.0],
            sample_hi: vec![12.0, 12.0],
            eval_lo: vec![5.5, 5.5],
            eval_hi: vec![6.5, 6.5],
            eval_mesh: 20,
            truncation: Truncation::All,
            curl_operator: (0, 0, 1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.h_list.is_empty() {
            return Err(Error::InvalidParameter("h list is empty".into()));
        }
        if self.h_list.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter("spacings must be positive".into()));
        }
        if self.eval_mesh == 0 {
            return Err(Error::InvalidParameter("evaluation mesh must be nonempty".into()));
        }
        let inside = (0..2).all(|s| {
            self.sample_lo[s] <= self.eval_lo[s]
                && self.eval_hi[s] <= self.sample_hi[s]
                && self.eval_lo[s] <= self.eval_hi[s]
        });
        if self.sample_lo.len() != 2 || self.eval_lo.len() != 2 || !inside {
            return Err(Error::InvalidParameter("evaluation box must lie inside the sample box".into()));
        }
        Ok(())
    }
}

/// Result of one sweep: errors per spacing plus warnings seen along the way.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub report: ConvergenceReport,
    pub warnings: Vec<QiWarning>,
}

fn merge(warnings: &mut Vec<QiWarning>, w: &[QiWarning]) {
    for x in w {
        if !warnings.contains(x) {
            warnings.push(*x);
        }
    }
}

/// Errors of `D^alpha Q^div f`, `D^alpha Q^curl f` and their sum against the exact parts.
pub fn run_wholespace(p: &WholespaceParams) -> Result<SweepOutcome> {
    p.validate()?;
    let div = KernelEvaluator::new(KernelSpec::div(p.ell, p.k, 2)?)?;
    let (eta, beta, gamma) = p.curl_operator;
    let curl_spec = KernelSpec::with_operator(p.ell, p.k, 2, eta, beta, gamma)?;
    if curl_spec.variant() != Variant::Curl {
        return Err(Error::InvalidParameter(format!("{:?} is not a curl-free operator", p.curl_operator)));
    }
    let curl = KernelEvaluator::new(curl_spec)?;
    let points = uniform_mesh(&p.eval_lo, &p.eval_hi, p.eval_mesh);
    let exact = |part: Part| -> Result<Vec<Vec<f64>>> {
        points.iter().map(|x| Ok(p.field.eval_part(part, x, &p.alpha)?.to_vec())).collect()
    };
    let (ex_div, ex_curl, ex_full) = (exact(Part::Div)?, exact(Part::Curl)?, exact(Part::Full)?);
    let mut report = ConvergenceReport::default();
    let mut warnings = Vec::new();
    for &h in &p.h_list {
        let (origin, extents) = GridField::lattice_for_box(&p.sample_lo, &p.sample_hi, h)?;
        let field = p.field;
        let data = GridField::sample(origin, h, extents, |x| field.value(x))?;
        let qd = QuasiInterpolant::new(&div, &data, p.truncation)?.evaluate_many(&points, &p.alpha)?;
        let qc = QuasiInterpolant::new(&curl, &data, p.truncation)?.evaluate_many(&points, &p.alpha)?;
        for e in qd.iter().chain(&qc) {
            merge(&mut warnings, &e.warnings);
        }
        let vd: Vec<Vec<f64>> = qd.into_iter().map(|e| e.value).collect();
        let vc: Vec<Vec<f64>> = qc.into_iter().map(|e| e.value).collect();
        let vf: Vec<Vec<f64>> =
            vd.iter().zip(&vc).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        report.rows.push(ReportRow {
            h,
            error_div: rmse(&vd, &ex_div),
            error_curl: rmse(&vc, &ex_curl),
            error_full: rmse(&vf, &ex_full),
        });
    }
    report.meta = vec![
        ("field".into(), p.field.name().into()),
        ("ell".into(), p.ell.to_string()),
        ("k".into(), p.k.to_string()),
        ("alpha".into(), format!("{:?}", p.alpha)),
        ("curl_operator".into(), format!("{:?}", p.curl_operator)),
    ];
    Ok(SweepOutcome { report, warnings })
}

#[derive(Clone, Debug)]
pub struct BoundedParams {
    pub field: BuiltinField,
    pub ell: u32,
    pub k: u32,
    pub alpha: Vec<u32>,
    pub h_list: Vec<f64>,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub interior_lo: Vec<f64>,
    pub interior_hi: Vec<f64>,
    pub scale_constant: f64,
    pub scale_eps: f64,
    /// Fixed Matérn shape; `None` uses `3 / fill` at each spacing.
    pub matern_shape: Option<f64>,
    pub margin: f64,
    pub eval_mesh: usize,
}

impl BoundedParams {
    /// `bd_full` on `[0,1]^2`, `V = [0.1,0.9]^2`, `h = 1/(5+10i)` for `i = 1..5`, `30 x 30` mesh.
    pub fn standard(ell: u32, k: u32, scale_constant: f64) -> Self {
        Self {
            field: BuiltinField::BdFull,
            ell,
            k,
            alpha: vec![0, 0],
            h_list: (1..=5).map(|i| 1.0 / (5.0 + 10.0 * i as f64)).collect(),
            domain_lo: vec![0.0, 0.0],
            domain_hi: vec![1.0, 1.0],
            interior_lo: vec![0.1, 0.1],
            interior_hi: vec![0.9, 0.9],
            scale_constant,
            scale_eps: 1e-3,
            matern_shape: None,
            margin: 0.0,
            eval_mesh: 30,
        }
    }

    pub fn config(&self, h: f64) -> BoundedConfig {
        BoundedConfig {
            domain_lo: self.domain_lo.clone(),
            domain_hi: self.domain_hi.clone(),
            interior_lo: self.interior_lo.clone(),
            interior_hi: self.interior_hi.clone(),
            h,
            ell: self.ell,
            k: self.k,
            scale_constant: self.scale_constant,
            scale_eps: self.scale_eps,
            kernel_scale: None,
            matern_shape: self.matern_shape,
            margin: self.margin,
        }
    }
}

/// Per-spacing quantities of a bounded sweep besides the errors.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedDiagnostics {
    pub h: f64,
    pub kernel_scale: f64,
    pub matern_shape: f64,
    pub condition: f64,
    pub ring_centers: usize,
    pub ring_residual: f64,
}

#[derive(Clone, Debug)]
pub struct BoundedOutcome {
    pub report: ConvergenceReport,
    pub diagnostics: Vec<BoundedDiagnostics>,
}

/// Errors of `IQ^div f - w`, `IQ^curl f - grad p` and their sum against `f`.
pub fn run_bounded(p: &BoundedParams) -> Result<BoundedOutcome> {
    if p.h_list.is_empty() || p.eval_mesh == 0 {
        return Err(Error::InvalidParameter("need spacings and a nonempty evaluation mesh".into()));
    }
    if p.domain_lo.len() != 2 {
        return Err(Error::InvalidParameter("built-in fields are two-dimensional".into()));
    }
    let mut report = ConvergenceReport::default();
    let mut diagnostics = Vec::new();
    for &h in &p.h_list {
        let cfg = p.config(h);
        let points = cfg.eval_mesh(p.eval_mesh);
        let exact = |part: Part| -> Result<Vec<Vec<f64>>> {
            points.iter().map(|x| Ok(p.field.eval_part(part, x, &p.alpha)?.to_vec())).collect()
        };
        let (ex_div, ex_curl, ex_full) = (exact(Part::Div)?, exact(Part::Curl)?, exact(Part::Full)?);
        let (origin, extents) = cfg.lattice()?;
        let field = p.field;
        let data = GridField::sample(origin, h, extents, |x| field.value(x))?;
        let fit = LerayFit::new(&data, &cfg)?;
        let vd = build_leray_qi(&fit, Part::Div, &p.alpha)?.evaluate_many(&points)?;
        let vc = build_leray_qi(&fit, Part::Curl, &p.alpha)?.evaluate_many(&points)?;
        let vf: Vec<Vec<f64>> =
            vd.iter().zip(&vc).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        report.rows.push(ReportRow {
            h,
            error_div: rmse(&vd, &ex_div),
            error_curl: rmse(&vc, &ex_curl),
            error_full: rmse(&vf, &ex_full),
        });
        diagnostics.push(BoundedDiagnostics {
            h,
            kernel_scale: fit.scale(),
            matern_shape: fit.interpolant().shape(),
            condition: fit.interpolant().condition(),
            ring_centers: fit.interpolant().centers().len(),
            ring_residual: fit.ring_residual(),
        });
    }
    report.meta = vec![
        ("field".into(), p.field.name().into()),
        ("ell".into(), p.ell.to_string()),
        ("k".into(), p.k.to_string()),
        ("alpha".into(), format!("{:?}", p.alpha)),
        ("C".into(), p.scale_constant.to_string()),
        ("eps".into(), p.scale_eps.to_string()),
        ("matern_shape".into(), p.matern_shape.map_or("3/fill".into(), |s| s.to_string())),
        ("margin".into(), p.margin.to_string()),
    ];
    Ok(BoundedOutcome { report, diagnostics })
}
