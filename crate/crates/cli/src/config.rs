//! JSON run configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use hodgeqi_core::{BoundedParams, BuiltinField, GridField, Suite, Truncation, ValidateParams, WholespaceParams};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Wholespace,
    Bounded,
    Validate,
    Decompose,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Wholespace => "wholespace",
            Experiment::Bounded => "bounded",
            Experiment::Validate => "validate",
            Experiment::Decompose => "decompose",
        }
    }
}

/// A built-in field name or a CSV file of lattice samples.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldSource {
    Builtin(String),
    Csv { csv: PathBuf },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub ell: u32,
    pub k: u32,
    /// `(eta, beta, gamma)` of the curl-free kernel.
    #[serde(default = "default_curl_operator")]
    pub curl_operator: [u8; 3],
}

fn default_curl_operator() -> [u8; 3] {
    [0, 0, 1]
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { ell: 2, k: 2, curl_operator: default_curl_operator() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundedSection {
    pub interior: Option<BoxConfig>,
    /// The constant `C` in `H = C h^{1/(2k+d-eps)}`.
    pub scale_constant: f64,
    #[serde(default = "default_scale_eps")]
    pub scale_eps: f64,
    pub matern_shape: Option<f64>,
    #[serde(default)]
    pub margin: f64,
}

fn default_scale_eps() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TruncationConfig {
    All,
    Radius {
        #[serde(default = "default_tail_tol")]
        tail_tol: f64,
        radius: Option<f64>,
    },
}

fn default_tail_tol() -> f64 {
    1e-6
}

impl TruncationConfig {
    fn to_core(&self) -> Truncation {
        match *self {
            TruncationConfig::All => Truncation::All,
            TruncationConfig::Radius { tail_tol, radius } => Truncation::Radius { tail_tol, radius },
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub suites: Option<Vec<String>>,
    pub kernels: Option<Vec<[u32; 2]>>,
    pub identity_points: Option<usize>,
    pub identity_frequencies: Option<usize>,
    pub seed: Option<u64>,
    pub oracle_kernel: Option<[u32; 2]>,
    pub oracle_grid: Option<usize>,
    pub oracle_spacings: Option<Vec<f64>>,
    pub oracle_overhang: Option<f64>,
    pub oracle_stride: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_slopes")]
    pub slopes: String,
    #[serde(default = "default_plot")]
    pub plot: String,
    #[serde(default = "default_fields")]
    pub fields: String,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: String,
}

fn default_report() -> String {
    "report.csv".into()
}
fn default_slopes() -> String {
    "slopes.csv".into()
}
fn default_plot() -> String {
    "convergence.svg".into()
}
fn default_fields() -> String {
    "fields.csv".into()
}
fn default_diagnostics() -> String {
    "diagnostics.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            report: default_report(),
            slopes: default_slopes(),
            plot: default_plot(),
            fields: default_fields(),
            diagnostics: default_diagnostics(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DecomposeMethod {
    #[default]
    Bounded,
    Wholespace,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub field: Option<FieldSource>,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub alpha: Option<Vec<u32>>,
    /// Lattice spacings, strictly decreasing.
    pub h: Option<Vec<f64>>,
    pub sample_box: Option<BoxConfig>,
    pub eval_box: Option<BoxConfig>,
    pub eval_mesh: Option<usize>,
    pub bounded: Option<BoundedSection>,
    pub truncation: Option<TruncationConfig>,
    #[serde(default = "default_window")]
    pub slope_window: usize,
    pub validate: Option<ValidateSection>,
    #[serde(default)]
    pub method: DecomposeMethod,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_window() -> usize {
    5
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid configuration")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    fn check(&self) -> Result<()> {
        if let Some(h) = &self.h {
            ensure!(!h.is_empty(), "h list is empty");
            ensure!(h.iter().all(|&v| v > 0.0 && v.is_finite()), "spacings must be positive");
            ensure!(h.windows(2).all(|w| w[1] < w[0]), "h list must be strictly decreasing");
        }
        ensure!(self.slope_window >= 2, "slope window must be at least 2");
        for b in [&self.sample_box, &self.eval_box].into_iter().flatten() {
            ensure!(b.lo.len() == b.hi.len(), "box corners differ in dimension");
            ensure!(b.lo.iter().zip(&b.hi).all(|(a, c)| a < c), "box corners must satisfy lo < hi");
        }
        if let Some(m) = self.eval_mesh {
            ensure!(m > 0, "evaluation mesh must be nonempty");
        }
        if self.experiment == Experiment::Wholespace {
            if let (Some(s), Some(e)) = (&self.sample_box, &self.eval_box) {
                let inside = s.lo.iter().zip(&e.lo).all(|(a, b)| a <= b) && e.hi.iter().zip(&s.hi).all(|(a, b)| a <= b);
                ensure!(inside, "evaluation box must lie inside the sample box");
            }
        }
        Ok(())
    }

    pub fn builtin_field(&self, default: BuiltinField) -> Result<BuiltinField> {
        match &self.field {
            None => Ok(default),
            Some(FieldSource::Builtin(name)) => BuiltinField::from_name(name).map_err(|e| anyhow!("{e}")),
            Some(FieldSource::Csv { .. }) => {
                bail!("{} needs a built-in field, since errors use its exact parts", self.experiment.name())
            }
        }
    }

    pub fn truncation_mode(&self) -> Truncation {
        self.truncation.as_ref().map_or(Truncation::All, TruncationConfig::to_core)
    }

    pub fn wholespace_params(&self) -> Result<WholespaceParams> {
        let alpha = self.alpha.clone().unwrap_or_else(|| vec![0, 0]);
        let mut p = WholespaceParams::standard(self.kernel.ell, self.kernel.k, alpha);
        p.field = self.builtin_field(BuiltinField::WsFull)?;
        if let Some(h) = &self.h {
            p.h_list = h.clone();
        }
        if let Some(b) = &self.sample_box {
            p.sample_lo = b.lo.clone();
            p.sample_hi = b.hi.clone();
        }
        if let Some(b) = &self.eval_box {
            p.eval_lo = b.lo.clone();
            p.eval_hi = b.hi.clone();
        }
        if let Some(m) = self.eval_mesh {
            p.eval_mesh = m;
        }
        p.truncation = self.truncation_mode();
        let [e, b, g] = self.kernel.curl_operator;
        p.curl_operator = (e, b, g);
        Ok(p)
    }

    fn bounded_section(&self) -> Result<&BoundedSection> {
        self.bounded.as_ref().ok_or_else(|| anyhow!("missing `bounded` section (scale_constant is required)"))
    }

    pub fn bounded_params(&self) -> Result<BoundedParams> {
        let sec = self.bounded_section()?;
        ensure!(self.kernel.curl_operator == default_curl_operator(), "bounded runs use the default curl operator");
        let mut p = BoundedParams::standard(self.kernel.ell, self.kernel.k, sec.scale_constant);
        p.field = self.builtin_field(BuiltinField::BdFull)?;
        if let Some(a) = &self.alpha {
            p.alpha = a.clone();
        }
        if let Some(h) = &self.h {
            p.h_list = h.clone();
        }
        if let Some(b) = &self.sample_box {
            p.domain_lo = b.lo.clone();
            p.domain_hi = b.hi.clone();
        }
        if let Some(v) = &sec.interior {
            p.interior_lo = v.lo.clone();
            p.interior_hi = v.hi.clone();
        }
        if let Some(m) = self.eval_mesh {
            p.eval_mesh = m;
        }
        p.scale_eps = sec.scale_eps;
        p.matern_shape = sec.matern_shape;
        p.margin = sec.margin;
        Ok(p)
    }

    pub fn validate_params(&self) -> Result<ValidateParams> {
        let mut p = ValidateParams::default();
        let Some(v) = &self.validate else { return Ok(p) };
        if let Some(s) = &v.suites {
            p.suites = s.iter().map(|n| Suite::from_name(n).map_err(|e| anyhow!("{e}"))).collect::<Result<_>>()?;
        }
        if let Some(k) = &v.kernels {
            p.kernels = k.iter().map(|&[l, k]| (l, k)).collect();
        }
        if let Some(n) = v.identity_points {
            p.identity_points = n;
        }
        if let Some(n) = v.identity_frequencies {
            p.identity_frequencies = n;
        }
        if let Some(s) = v.seed {
            p.seed = s;
        }
        if let Some([l, k]) = v.oracle_kernel {
            p.oracle_kernel = (l, k);
        }
        if let Some(n) = v.oracle_grid {
            p.oracle_grid = n;
        }
        if let Some(h) = &v.oracle_spacings {
            p.oracle_spacings = h.clone();
        }
        if let Some(l) = v.oracle_overhang {
            p.oracle_overhang = l;
        }
        if let Some(s) = v.oracle_stride {
            p.oracle_stride = s;
        }
        Ok(p)
    }

    /// Samples for `decompose`: a CSV lattice, or a built-in field at the single spacing `h`.
    pub fn decompose_data(&self, base: &Path) -> Result<GridField> {
        match &self.field {
            Some(FieldSource::Csv { csv }) => {
                let path = if csv.is_absolute() { csv.clone() } else { base.join(csv) };
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                GridField::from_csv(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
            }
            _ => {
                let default = match self.method {
                    DecomposeMethod::Bounded => BuiltinField::BdFull,
                    DecomposeMethod::Wholespace => BuiltinField::WsFull,
                };
                let field = self.builtin_field(default)?;
                let h = match self.h.as_deref() {
                    Some([h]) => *h,
                    _ => bail!("decompose of a built-in field needs exactly one spacing in `h`"),
                };
                let b = self.sample_box.as_ref().ok_or_else(|| anyhow!("decompose needs `sample_box`"))?;
                let (origin, extents) = GridField::lattice_for_box(&b.lo, &b.hi, h).map_err(|e| anyhow!("{e}"))?;
                GridField::sample(origin, h, extents, |x| field.value(x)).map_err(|e| anyhow!("{e}"))
            }
        }
    }
}

/// Settings for re-plotting a saved report.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub report: PathBuf,
    #[serde(default = "default_window")]
    pub slope_window: usize,
    pub title: Option<String>,
    #[serde(default = "default_plot")]
    pub output: String,
}

impl PlotConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid plot configuration in {}", path.display()))?;
        ensure!(cfg.slope_window >= 2, "slope window must be at least 2");
        Ok(cfg)
    }
}

/// Settings for sampling one kernel on a mesh.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelDumpConfig {
    pub ell: u32,
    pub k: u32,
    #[serde(default = "default_dim")]
    pub dim: u32,
    /// `scalar`, `div`, `curl`, `harmonic`, or an explicit `[eta, beta, gamma]`.
    pub operator: OperatorChoice,
    pub alpha: Option<Vec<u32>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mesh: usize,
    #[serde(default = "default_kernel_output")]
    pub output: String,
}

fn default_dim() -> u32 {
    2
}

fn default_kernel_output() -> String {
    "kernel.csv".into()
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OperatorChoice {
    Named(String),
    Exponents([u8; 3]),
}

impl KernelDumpConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid kernel-dump configuration in {}", path.display()))?;
        ensure!(
            cfg.lo.len() == cfg.dim as usize && cfg.hi.len() == cfg.dim as usize,
            "box corners must have `dim` entries"
        );
        ensure!(cfg.mesh > 0, "mesh must be nonempty");
        Ok(cfg)
    }
}
