//! One function per subcommand; each writes its files under the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hodgeqi_core::{
    leray_decompose, project_curl, project_div, rmse, run_bounded, run_validate, run_wholespace, uniform_mesh,
    BoundedConfig, BoundedDiagnostics, ConvergenceReport, KernelEvaluator, KernelSpec, Part,
};

use crate::config::{
    DecomposeMethod, Experiment, ExperimentConfig, FieldSource, KernelDumpConfig, OperatorChoice, PlotConfig,
};
use crate::plot::emit_plot;

/// How a successful run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A validation suite reported at least one failed check.
    ValidationFailed,
}

fn core<T>(r: hodgeqi_core::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!("{e}"))
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn load_experiment(config: &Path, expected: Experiment) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(config)?;
    if cfg.experiment != expected {
        bail!("configuration is for `{}`, not `{}`", cfg.experiment.name(), expected.name());
    }
    Ok(cfg)
}

fn slopes_csv(report: &ConvergenceReport, window: usize) -> Result<String> {
    let window = window.min(report.rows.len());
    let s = core(report.slopes(window))?;
    Ok(format!("window,slope_div,slope_curl,slope_full\n{},{:.12e},{:.12e},{:.12e}\n", s.window, s.div, s.curl, s.full))
}

fn meta_line(report: &ConvergenceReport) -> String {
    report.meta.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn emit_report(cfg: &ExperimentConfig, report: &ConvergenceReport, out: &Path, title: &str) -> Result<()> {
    write(out, &cfg.outputs.report, &core(report.to_csv())?)?;
    if report.rows.len() >= 2 {
        let text = slopes_csv(report, cfg.slope_window)?;
        write(out, &cfg.outputs.slopes, &text)?;
        println!("slopes: {}", text.lines().nth(1).unwrap_or_default());
    }
    emit_plot(report, &out.join(&cfg.outputs.plot), cfg.slope_window, title)?;
    for r in &report.rows {
        println!("h={:.6e} div={:.6e} curl={:.6e} full={:.6e}", r.h, r.error_div, r.error_curl, r.error_full);
    }
    Ok(())
}

pub fn wholespace(config: &Path, out: &Path) -> Result<Status> {
    let cfg = load_experiment(config, Experiment::Wholespace)?;
    let p = cfg.wholespace_params()?;
    let outcome = core(run_wholespace(&p))?;
    println!("{}", meta_line(&outcome.report));
    for w in &outcome.warnings {
        eprintln!("warning: {w:?}");
    }
    let title = format!("whole space, ({}, {}), alpha {:?}", p.ell, p.k, p.alpha);
    emit_report(&cfg, &outcome.report, out, &title)?;
    Ok(Status::Success)
}

fn diagnostics_csv(rows: &[BoundedDiagnostics]) -> String {
    let mut s = String::from("h,kernel_scale,matern_shape,condition,ring_centers,ring_residual\n");
    for d in rows {
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}",
            d.h, d.kernel_scale, d.matern_shape, d.condition, d.ring_centers, d.ring_residual
        );
    }
    s
}

pub fn bounded(config: &Path, out: &Path) -> Result<Status> {
    let cfg = load_experiment(config, Experiment::Bounded)?;
    let p = cfg.bounded_params()?;
    let outcome = core(run_bounded(&p))?;
    println!("{}", meta_line(&outcome.report));
    write(out, &cfg.outputs.diagnostics, &diagnostics_csv(&outcome.diagnostics))?;
    let title = format!("bounded domain, ({}, {}), C {}", p.ell, p.k, p.scale_constant);
    emit_report(&cfg, &outcome.report, out, &title)?;
    Ok(Status::Success)
}

pub fn validate(config: &Path, out: &Path) -> Result<Status> {
    let cfg = load_experiment(config, Experiment::Validate)?;
    let report = core(run_validate(&cfg.validate_params()?))?;
    write(out, &cfg.outputs.report, &report.to_csv())?;
    for e in &report.entries {
        let tag = if e.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}/{}: {:.3e} (threshold {:.1e})", e.suite.name(), e.check, e.value, e.threshold);
    }
    Ok(if report.passed() { Status::Success } else { Status::ValidationFailed })
}

fn default_interior(lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.1 * (b - a)).collect();
    (lo.iter().zip(&w).map(|(a, w)| a + w).collect(), hi.iter().zip(&w).map(|(b, w)| b - w).collect())
}

pub fn decompose(config: &Path, out: &Path) -> Result<Status> {
    let cfg = load_experiment(config, Experiment::Decompose)?;
    let data = cfg.decompose_data(&base_dir(config))?;
    let d = data.dim();
    let (lo, hi) = (data.origin().to_vec(), data.upper());
    let points = match &cfg.eval_box {
        Some(b) => uniform_mesh(&b.lo, &b.hi, cfg.eval_mesh.unwrap_or(20)),
        None => uniform_mesh(&lo, &hi, cfg.eval_mesh.unwrap_or(20)),
    };
    if points.iter().any(|p| p.len() != d) {
        bail!("evaluation box dimension differs from the data");
    }
    let (div, curl) = match cfg.method {
        DecomposeMethod::Bounded => {
            let sec = cfg.bounded.as_ref().ok_or_else(|| anyhow!("bounded decomposition needs a `bounded` section"))?;
            let (ilo, ihi) = match &sec.interior {
                Some(v) => (v.lo.clone(), v.hi.clone()),
                None => default_interior(&lo, &hi),
            };
            let bc = BoundedConfig {
                domain_lo: lo.clone(),
                domain_hi: hi.clone(),
                interior_lo: ilo,
                interior_hi: ihi,
                h: data.spacing(),
                ell: cfg.kernel.ell,
                k: cfg.kernel.k,
                scale_constant: sec.scale_constant,
                scale_eps: sec.scale_eps,
                kernel_scale: None,
                matern_shape: sec.matern_shape,
                margin: sec.margin,
            };
            let dec = core(leray_decompose(&data, &bc, &points))?;
            (dec.div, dec.curl)
        }
        DecomposeMethod::Wholespace => {
            let t = cfg.truncation_mode();
            let zero = vec![0; d];
            let (ell, k) = (cfg.kernel.ell, cfg.kernel.k);
            let dv = core(project_div(&data, ell, k, &points, &zero, t))?;
            let cv = core(project_curl(&data, ell, k, &points, &zero, t))?;
            (dv.into_iter().map(|e| e.value).collect::<Vec<_>>(), cv.into_iter().map(|e| e.value).collect::<Vec<_>>())
        }
    };
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    for part in ["div", "curl", "full"] {
        header.extend((1..=d).map(|i| format!("{part}{i}")));
    }
    let mut text = header.join(",");
    text.push('\n');
    for ((x, a), b) in points.iter().zip(&div).zip(&curl) {
        let full: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + v).collect();
        let row: Vec<String> = x.iter().chain(a).chain(b).chain(&full).map(|v| format!("{v:.12e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = write(out, &cfg.outputs.fields, &text)?;
    println!("{} points written to {}", points.len(), path.display());
    if let Some(FieldSource::Builtin(name)) = &cfg.field {
        let field = core(hodgeqi_core::BuiltinField::from_name(name))?;
        let exact = |part: Part| -> Result<Vec<Vec<f64>>> {
            points.iter().map(|x| Ok(core(field.eval_part(part, x, &vec![0; d]))?.to_vec())).collect()
        };
        println!("rmse div={:.6e} curl={:.6e}", rmse(&div, &exact(Part::Div)?), rmse(&curl, &exact(Part::Curl)?));
    }
    Ok(Status::Success)
}

pub fn plot(config: &Path, out: &Path) -> Result<Status> {
    let cfg = PlotConfig::load(config)?;
    let path = if cfg.report.is_absolute() { cfg.report.clone() } else { base_dir(config).join(&cfg.report) };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = core(ConvergenceReport::from_csv(&text))?;
    let title = cfg.title.clone().unwrap_or_else(|| "convergence".into());
    let target = out.join(&cfg.output);
    emit_plot(&report, &target, cfg.slope_window, &title)?;
    println!("wrote {}", target.display());
    Ok(Status::Success)
}

fn dump_spec(cfg: &KernelDumpConfig) -> Result<KernelSpec> {
    let (ell, k, dim) = (cfg.ell, cfg.k, cfg.dim);
    core(match &cfg.operator {
        OperatorChoice::Named(n) => match n.as_str() {
            "scalar" => KernelSpec::scalar(ell, k, dim),
            "div" => KernelSpec::div(ell, k, dim),
            "curl" => KernelSpec::curl(ell, k, dim),
            "harmonic" => KernelSpec::harmonic(ell, k, dim),
            other => bail!("unknown operator `{other}`"),
        },
        OperatorChoice::Exponents([e, b, g]) => KernelSpec::with_operator(ell, k, dim, *e, *b, *g),
    })
}

pub fn kernel_dump(config: &Path, out: &Path) -> Result<Status> {
    let cfg = KernelDumpConfig::load(config)?;
    let ev = core(KernelEvaluator::new(dump_spec(&cfg)?))?;
    let d = cfg.dim as usize;
    let alpha = cfg.alpha.clone().unwrap_or_else(|| vec![0; d]);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    for i in 1..=d {
        header.extend((1..=d).map(|j| format!("psi{i}{j}")));
    }
    let mut text = header.join(",");
    text.push('\n');
    for x in uniform_mesh(&cfg.lo, &cfg.hi, cfg.mesh) {
        let m = core(ev.eval(&x, &alpha)).with_context(|| format!("at {x:?}"))?;
        let row: Vec<String> = x.iter().chain(&m.data).map(|v| format!("{v:.16e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = write(out, &cfg.output, &text)?;
    println!("wrote {}", path.display());
    Ok(Status::Success)
}
