//! Self-checks with measured numbers: moment conditions, kernel identities and the FFT oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{BuiltinField, Part};
use crate::hodge::fft_project;
use crate::kernel::{check_strang_fix, kernel_hat, KernelEvaluator, KernelMatrix, KernelSpec, StrangFixOptions};
use crate::lattice::{project_div, GridField, Truncation};
use crate::report::rmse;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    StrangFix,
    Identities,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::StrangFix, Suite::Identities, Suite::Oracle];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "strangfix" => Ok(Suite::StrangFix),
            "identities" => Ok(Suite::Identities),
            "oracle" => Ok(Suite::Oracle),
            other => Err(Error::InvalidParameter(format!("unknown suite {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::StrangFix => "strangfix",
            Suite::Identities => "identities",
            Suite::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationEntry {
    pub suite: Suite,
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl ValidationEntry {
    /// Passes when `value <= threshold`.
    fn at_most(suite: Suite, check: String, value: f64, threshold: f64) -> Self {
        Self { suite, check, value, threshold, passed: value <= threshold }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("suite,check,value,threshold,passed\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{:.12e},{:.12e},{}\n", e.suite.name(), e.check, e.value, e.threshold, e.passed));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct ValidateParams {
    pub suites: Vec<Suite>,
    /// `(ell, k)` pairs checked by the strangfix and identities suites.
    pub kernels: Vec<(u32, u32)>,
    pub identity_points: usize,
    pub identity_frequencies: usize,
    pub seed: u64,
    /// `(ell, k)` used by the oracle suite.
    pub oracle_kernel: (u32, u32),
    pub oracle_grid: usize,
    pub oracle_spacings: Vec<f64>,
    /// How far the sample box of the quasi-interpolant extends past the unit square.
    pub oracle_overhang: f64,
    /// Compare at every `stride`-th FFT node per axis.
    pub oracle_stride: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            kernels: vec![(2, 2), (3, 3)],
            identity_points: 100,
            identity_frequencies: 20,
            seed: 20240607,
            oracle_kernel: (2, 2),
            oracle_grid: 64,
            oracle_spacings: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            oracle_overhang: 3.0,
            oracle_stride: 4,
        }
    }
}

pub fn run_validate(p: &ValidateParams) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    for suite in &p.suites {
        let entries = match suite {
            Suite::StrangFix => strangfix_suite(p)?,
            Suite::Identities => identities_suite(p)?,
            Suite::Oracle => oracle_suite(p)?.entries,
        };
        report.entries.extend(entries);
    }
    Ok(report)
}

pub fn strangfix_suite(p: &ValidateParams) -> Result<Vec<ValidationEntry>> {
    let mut out = Vec::new();
    for &(ell, k) in &p.kernels {
        let r = check_strang_fix(ell, k, 2, &StrangFixOptions::default())?;
        let tag = format!("({ell};{k})");
        out.push(ValidationEntry::at_most(
            Suite::StrangFix,
            format!("origin_deviation{tag}"),
            r.origin_deviation,
            1e-6,
        ));
        out.push(ValidationEntry::at_most(Suite::StrangFix, format!("lattice_value{tag}"), r.lattice_value, 1e-14));
        out.push(ValidationEntry::at_most(
            Suite::StrangFix,
            format!("lattice_derivative{tag}"),
            r.lattice_derivative,
            1e-5,
        ));
    }
    Ok(out)
}

/// Fourth-order central difference of one kernel entry along `axis`.
fn fd4(ev: &KernelEvaluator, x: &[f64], axis: usize, step: f64) -> Result<KernelMatrix> {
    let at = |t: f64| -> Result<KernelMatrix> {
        let mut y = x.to_vec();
        y[axis] += t * step;
        ev.eval(&y, &[0, 0])
    };
    let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
    let mut out = KernelMatrix::zeros(2);
    for i in 0..4 {
        out.data[i] = (m2.data[i] - 8.0 * m1.data[i] + 8.0 * p1.data[i] - p2.data[i]) / (12.0 * step);
    }
    Ok(out)
}

/// Random points in `[-3, 3]^2` at least `0.1` from every integer point.
fn off_lattice_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let x: [f64; 2] = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let gap = ((x[0] - x[0].round()).powi(2) + (x[1] - x[1].round()).powi(2)).sqrt();
        if gap >= 0.1 {
            pts.push(x);
        }
    }
    pts
}

/// Divergence and curl residuals are relative to the largest entry of the
/// finite-difference Jacobian at each point.
pub fn identities_suite(p: &ValidateParams) -> Result<Vec<ValidationEntry>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let step = 1e-3;
    for &(ell, k) in &p.kernels {
        let tag = format!("({ell};{k})");
        let div = KernelEvaluator::new(KernelSpec::div(ell, k, 2)?)?;
        let curl = KernelEvaluator::new(KernelSpec::curl(ell, k, 2)?)?;
        let pts = off_lattice_points(&mut rng, p.identity_points);
        let (mut div_res, mut curl_res, mut sym): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for x in &pts {
            let (dx, dy) = (fd4(&div, x, 0, step)?, fd4(&div, x, 1, step)?);
            let scale = dx.max_abs().max(dy.max_abs()).max(f64::MIN_POSITIVE);
            for j in 0..2 {
                div_res = div_res.max((dx.get(0, j) + dy.get(1, j)).abs() / scale);
            }
            let (cx, cy) = (fd4(&curl, x, 0, step)?, fd4(&curl, x, 1, step)?);
            let scale = cx.max_abs().max(cy.max_abs()).max(f64::MIN_POSITIVE);
            for j in 0..2 {
                curl_res = curl_res.max((cx.get(1, j) - cy.get(0, j)).abs() / scale);
            }
            for ev in [&div, &curl] {
                let (a, b) = (ev.eval(x, &[0, 0])?, ev.eval(&[-x[0], -x[1]], &[0, 0])?);
                let scale = a.max_abs().max(f64::MIN_POSITIVE);
                let diff = a.data.iter().zip(&b.data).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()));
                sym = sym.max(diff / scale);
            }
        }
        out.push(ValidationEntry::at_most(Suite::Identities, format!("div_residual{tag}"), div_res, 1e-6));
        out.push(ValidationEntry::at_most(Suite::Identities, format!("curl_residual{tag}"), curl_res, 1e-6));
        out.push(ValidationEntry::at_most(Suite::Identities, format!("even_symmetry{tag}"), sym, 1e-12));
        let variants = KernelSpec::curl_variants(ell, k, 2)?;
        let mut spread: f64 = 0.0;
        for _ in 0..p.identity_frequencies {
            let w = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            let reference = kernel_hat(&variants[0], &w)?;
            for v in &variants[1..] {
                let h = kernel_hat(v, &w)?;
                let diff = h.data.iter().zip(&reference.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                spread = spread.max(diff);
            }
        }
        out.push(ValidationEntry::at_most(Suite::Identities, format!("curl_variants{tag}"), spread, 1e-10));
    }
    Ok(out)
}

/// Oracle suite result with the raw discrepancy sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub entries: Vec<ValidationEntry>,
    pub fft_error_div: f64,
    pub fft_error_curl: f64,
    /// `(h, rmse(project_div, fft_project))` per spacing.
    pub discrepancies: Vec<(f64, f64)>,
}

/// FFT oracle on periodic `bd_full`, then `project_div` against it for each spacing.
pub fn oracle_suite(p: &ValidateParams) -> Result<OracleOutcome> {
    let n = p.oracle_grid;
    let field = BuiltinField::BdFull;
    let grid = GridField::sample(vec![0.0, 0.0], 1.0 / n as f64, vec![n, n], |x| field.value(x))?;
    let exact =
        |f: BuiltinField| -> Vec<Vec<f64>> { (0..grid.node_count()).map(|i| f.value(&grid.position(i))).collect() };
    let as_rows = |g: &GridField| -> Vec<Vec<f64>> { (0..g.node_count()).map(|i| g.value(i).to_vec()).collect() };
    let fd = fft_project(&grid, Part::Div)?;
    let fc = fft_project(&grid, Part::Curl)?;
    let fft_error_div = rmse(&as_rows(&fd), &exact(BuiltinField::BdDiv));
    let fft_error_curl = rmse(&as_rows(&fc), &exact(BuiltinField::BdCurl));
    let stride = p.oracle_stride.max(1);
    let nodes: Vec<usize> =
        (0..grid.node_count()).filter(|&i| grid.multi_index(i).iter().all(|&m| m % stride == 0)).collect();
    let points: Vec<Vec<f64>> = nodes.iter().map(|&i| grid.position(i)).collect();
    let reference: Vec<Vec<f64>> = nodes.iter().map(|&i| fd.value(i).to_vec()).collect();
    let (ell, k) = p.oracle_kernel;
    let l = p.oracle_overhang;
    let mut discrepancies = Vec::new();
    for &h in &p.oracle_spacings {
        let (origin, extents) = GridField::lattice_for_box(&[-l, -l], &[1.0 + l, 1.0 + l], h)?;
        let data = GridField::sample(origin, h, extents, |x| field.value(x))?;
        let q = project_div(&data, ell, k, &points, &[0, 0], Truncation::All)?;
        let values: Vec<Vec<f64>> = q.into_iter().map(|e| e.value).collect();
        discrepancies.push((h, rmse(&values, &reference)));
    }
    let mut entries = vec![
        ValidationEntry::at_most(Suite::Oracle, "fft_div_vs_exact".into(), fft_error_div, 1e-10),
        ValidationEntry::at_most(Suite::Oracle, "fft_curl_vs_exact".into(), fft_error_curl, 1e-10),
    ];
    let worst_ratio = discrepancies.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0_f64, f64::max);
    entries.push(ValidationEntry {
        suite: Suite::Oracle,
        check: "qi_vs_fft_decreasing".into(),
        value: worst_ratio,
        threshold: 1.0,
        passed: discrepancies.len() >= 2 && worst_ratio < 1.0,
    });
    if let Some(&(h, d)) = discrepancies.iter().min_by(|a, b| a.0.total_cmp(&b.0)) {
        entries.push(ValidationEntry::at_most(
            Suite::Oracle,
            "qi_vs_fft_budget".into(),
            d,
            10.0 * h.powi(2 * k as i32),
        ));
    }
    Ok(OracleOutcome { entries, fft_error_div, fft_error_curl, discrepancies })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::from_name(s.name()).unwrap(), s);
        }
        assert!(Suite::from_name("nope").is_err());
    }

    #[test]
    fn strangfix_and_identities_pass_for_default_kernels() {
        let p = ValidateParams { identity_points: 10, identity_frequencies: 5, ..Default::default() };
        let e = strangfix_suite(&p).unwrap();
        assert_eq!(e.len(), 6);
        assert!(e.iter().all(|x| x.passed), "{e:?}");
        let e = identities_suite(&p).unwrap();
        assert!(e.iter().all(|x| x.passed), "{e:?}");
    }

    #[test]
    fn small_oracle_run() {
        let p = ValidateParams {
            oracle_grid: 16,
            oracle_spacings: vec![1.0 / 8.0, 1.0 / 16.0],
            oracle_overhang: 1.0,
            ..Default::default()
        };
        let o = oracle_suite(&p).unwrap();
        assert!(o.fft_error_div < 1e-12 && o.fft_error_curl < 1e-12);
        assert_eq!(o.discrepancies.len(), 2);
        assert_eq!(o.entries.len(), 4);
    }

    #[test]
    fn csv_lists_every_entry() {
        let r = ValidationReport { entries: vec![ValidationEntry::at_most(Suite::Oracle, "x".into(), 1.0, 2.0)] };
        assert!(r.passed());
        assert_eq!(r.to_csv().lines().count(), 2);
    }
}
