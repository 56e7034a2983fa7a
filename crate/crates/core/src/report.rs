//! Error norms, slope fits and convergence reports.

use crate::error::{Error, Result};

/// Root mean square of the pointwise Euclidean error.
pub fn rmse(approx: &[Vec<f64>], exact: &[Vec<f64>]) -> f64 {
    let n = approx.len().max(1) as f64;
    let s: f64 =
        approx.iter().zip(exact).map(|(a, e)| a.iter().zip(e).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sum();
    (s / n).sqrt()
}

/// Least-squares line `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log err` against `log h` over the last `window` entries.
pub fn fit_slope(h: &[f64], err: &[f64], window: usize) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 || window < 2 {
        return Err(Error::InvalidParameter("slope fit needs at least two points".into()));
    }
    let start = h.len().saturating_sub(window);
    let pts: Vec<(f64, f64)> = h[start..].iter().zip(&err[start..]).map(|(a, b)| (a.ln(), b.ln())).collect();
    Ok(fit_line(&pts).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub h: f64,
    pub error_div: f64,
    pub error_curl: f64,
    pub error_full: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slopes {
    pub window: usize,
    pub div: f64,
    pub curl: f64,
    pub full: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    /// Free-form parameters recorded alongside the numbers.
    pub meta: Vec<(String, String)>,
}

impl ConvergenceReport {
    pub fn slopes(&self, window: usize) -> Result<Slopes> {
        if self.rows.is_empty() {
            return Err(Error::EmptyReport);
        }
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let col = |f: fn(&ReportRow) -> f64| -> Vec<f64> { self.rows.iter().map(f).collect() };
        Ok(Slopes {
            window,
            div: fit_slope(&h, &col(|r| r.error_div), window)?,
            curl: fit_slope(&h, &col(|r| r.error_curl), window)?,
            full: fit_slope(&h, &col(|r| r.error_full), window)?,
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::EmptyReport);
        }
        let mut s = String::from("h,error_div,error_curl,error_full\n");
        for r in &self.rows {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", r.h, r.error_div, r.error_curl, r.error_full));
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::EmptyReport)?;
        if header.trim() != "h,error_div,error_curl,error_full" {
            return Err(Error::Parse(format!("unexpected report header `{header}`")));
        }
        let mut rows = Vec::new();
        for l in lines {
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{e}: `{t}`"))))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Parse(format!("expected 4 columns, got {}", v.len())));
            }
            rows.push(ReportRow { h: v[0], error_div: v[1], error_curl: v[2], error_full: v[3] });
        }
        if rows.is_empty() {
            return Err(Error::EmptyReport);
        }
        Ok(Self { rows, meta: Vec::new() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x.powi(4)).collect();
        assert!((fit_slope(&h, &e, 5).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let r = ConvergenceReport {
            rows: vec![ReportRow { h: 0.5, error_div: 1e-3, error_curl: 2e-3, error_full: 3e-3 }],
            meta: vec![],
        };
        let back = ConvergenceReport::from_csv(&r.to_csv().unwrap()).unwrap();
        assert_eq!(back.rows, r.rows);
        assert!(matches!(ConvergenceReport::default().to_csv(), Err(Error::EmptyReport)));
    }

    #[test]
    fn rmse_basic() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let b = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
        assert!((rmse(&a, &b) - 1.0).abs() < 1e-15);
    }
}
