//! Sampled vector fields on regular lattices and their quasi-interpolants.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{packed_index, packed_len, KernelEvaluator, KernelSpec};

/// Vector field sampled on `origin + spacing * j`, `0 <= j_s < extents[s]`.
///
/// Node `j` is stored at flat index `j_0 + n_0 (j_1 + n_1 (...))`, with its
/// `dim` components contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    origin: Vec<f64>,
    spacing: f64,
    extents: Vec<usize>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(origin: Vec<f64>, spacing: f64, extents: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let d = origin.len();
        if d == 0 || extents.len() != d {
            return Err(Error::InvalidParameter("origin and extents must share a positive dimension".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        if extents.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("extents must be positive".into()));
        }
        let nodes: usize = extents.iter().product();
        if values.len() != nodes * d {
            return Err(Error::InvalidParameter(format!("expected {} values, got {}", nodes * d, values.len())));
        }
        Ok(Self { origin, spacing, extents, values })
    }

    /// Samples `f` at every node.
    pub fn sample(
        origin: Vec<f64>,
        spacing: f64,
        extents: Vec<usize>,
        f: impl Fn(&[f64]) -> Vec<f64> + Sync,
    ) -> Result<Self> {
        let d = origin.len();
        if extents.len() != d || extents.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("extents must be positive, one per axis".into()));
        }
        let grid = Self { origin, spacing, extents, values: Vec::new() };
        let values: Vec<f64> =
            (0..grid.node_count()).into_par_iter().flat_map_iter(|n| f(&grid.position(n)).into_iter()).collect();
        Self::new(grid.origin, grid.spacing, grid.extents, values)
    }

    /// Lattice covering the box `[lo, hi]` with spacing `h`; the box side must be a multiple of `h`.
    pub fn lattice_for_box(lo: &[f64], hi: &[f64], h: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut extents = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(hi) {
            let steps = (b - a) / h;
            let n = steps.round();
            if n < 1.0 || (steps - n).abs() > 1e-9 * steps.max(1.0) {
                return Err(Error::InvalidParameter(format!("box side {} is not a multiple of h = {h}", b - a)));
            }
            extents.push(n as usize + 1);
        }
        Ok((lo.to_vec(), extents))
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.extents
            .iter()
            .map(|&n| {
                let j = flat % n;
                flat /= n;
                j
            })
            .collect()
    }

    pub fn flat_index(&self, j: &[usize]) -> usize {
        j.iter().zip(&self.extents).rev().fold(0, |acc, (&v, &n)| acc * n + v)
    }

    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.origin).map(|(&j, o)| o + self.spacing * j as f64).collect()
    }

    pub fn value(&self, flat: usize) -> &[f64] {
        let d = self.dim();
        &self.values[flat * d..(flat + 1) * d]
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin.iter().zip(&self.extents).map(|(o, &n)| o + self.spacing * (n - 1) as f64).collect()
    }

    /// CSV with header `x1..xd,f1..fd`, one node per row.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.extend((1..=d).map(|i| format!("f{i}")));
        let mut s = header.join(",");
        s.push('\n');
        for n in 0..self.node_count() {
            let row: Vec<String> = self.position(n).iter().chain(self.value(n)).map(|v| format!("{v:.16e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses a CSV written by [`Self::to_csv`] (rows in any order) and
    /// checks that the points form a full regular lattice.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols = header.split(',').count();
        if cols < 2 || cols % 2 != 0 {
            return Err(Error::Parse(format!("header `{header}` must have 2d columns")));
        }
        let d = cols / 2;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, l) in lines.enumerate() {
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1))))
                .collect::<Result<_>>()?;
            if v.len() != cols {
                return Err(Error::Parse(format!("row {} has {} columns, expected {cols}", i + 1, v.len())));
            }
            rows.push(v);
        }
        if rows.is_empty() {
            return Err(Error::Parse("CSV has no data rows".into()));
        }
        let mut origin = Vec::with_capacity(d);
        let mut extents = Vec::with_capacity(d);
        let mut spacing: Option<f64> = None;
        for s in 0..d {
            let mut c: Vec<f64> = rows.iter().map(|r| r[s]).collect();
            c.sort_by(|a, b| a.total_cmp(b));
            let span = (c[c.len() - 1] - c[0]).abs().max(1.0);
            let mut uniq = vec![c[0]];
            for &v in &c[1..] {
                if (v - uniq[uniq.len() - 1]).abs() > 1e-9 * span {
                    uniq.push(v);
                }
            }
            if uniq.len() < 2 {
                return Err(Error::IrregularGrid(format!("axis {} has a single coordinate", s + 1)));
            }
            let h = (uniq[uniq.len() - 1] - uniq[0]) / (uniq.len() - 1) as f64;
            for (i, v) in uniq.iter().enumerate() {
                if (v - (uniq[0] + h * i as f64)).abs() > 1e-9 * span {
                    return Err(Error::IrregularGrid(format!("axis {} is not uniformly spaced", s + 1)));
                }
            }
            if let Some(h0) = spacing {
                if (h - h0).abs() > 1e-9 * h0 {
                    return Err(Error::IrregularGrid(format!("spacings differ: {h0} vs {h}")));
                }
            } else {
                spacing = Some(h);
            }
            origin.push(uniq[0]);
            extents.push(uniq.len());
        }
        let h = spacing.expect("at least one axis");
        let nodes: usize = extents.iter().product();
        if nodes != rows.len() {
            return Err(Error::IrregularGrid(format!("expected {nodes} nodes, found {} rows", rows.len())));
        }
        let mut values = vec![f64::NAN; nodes * d];
        let mut seen = vec![false; nodes];
        let grid = Self { origin, spacing: h, extents, values: Vec::new() };
        for r in &rows {
            let j: Vec<usize> = (0..d).map(|s| ((r[s] - grid.origin[s]) / h).round() as usize).collect();
            let n = grid.flat_index(&j);
            if seen[n] {
                return Err(Error::IrregularGrid("duplicate lattice node".into()));
            }
            seen[n] = true;
            values[n * d..(n + 1) * d].copy_from_slice(&r[d..]);
        }
        Self::new(grid.origin, grid.spacing, grid.extents, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Sum over every sample.
    All,
    /// Sum over samples with `|x/h - j| <= radius`; the default radius is
    /// `tail_tol^{-1/(d+2k)}`.
    Radius { tail_tol: f64, radius: Option<f64> },
}

impl Truncation {
    pub fn radius(&self, dim: usize, k: u32) -> Option<f64> {
        match *self {
            Truncation::All => None,
            Truncation::Radius { radius: Some(r), .. } => Some(r),
            Truncation::Radius { tail_tol, radius: None } => {
                Some(tail_tol.powf(-1.0 / (dim as f64 + 2.0 * k as f64)).ceil())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QiWarning {
    /// The point is closer to the sample boundary than the truncation radius.
    BoundaryPollution,
    /// The point hit a lattice node where a kernel entry has no limit and was shifted by `1e-9 h`.
    PerturbedNode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QiEval {
    pub value: Vec<f64>,
    pub warnings: Vec<QiWarning>,
}

/// Kernel data prefiltered by the stencil on the zero-extended lattice.
#[derive(Clone, Debug)]
struct Prefiltered {
    reach: usize,
    extents: Vec<usize>,
    values: Vec<f64>,
    nonzero: Vec<usize>,
}

/// `Q f(x) = sum_j Psi((x - x_0)/h - j) f_j` for one kernel and one data set.
pub struct QuasiInterpolant<'a> {
    kernel: &'a KernelEvaluator,
    data: &'a GridField,
    truncation: Truncation,
    prefiltered: Option<Prefiltered>,
}

impl<'a> QuasiInterpolant<'a> {
    pub fn new(kernel: &'a KernelEvaluator, data: &'a GridField, truncation: Truncation) -> Result<Self> {
        if kernel.dim() != data.dim() {
            return Err(Error::InvalidParameter(format!(
                "kernel dimension {} differs from data dimension {}",
                kernel.dim(),
                data.dim()
            )));
        }
        if let Truncation::Radius { tail_tol, radius } = truncation {
            if !(tail_tol > 0.0 && tail_tol < 1.0) && radius.is_none() {
                return Err(Error::InvalidParameter("tail_tol must lie in (0, 1)".into()));
            }
            if matches!(radius, Some(r) if !(r > 0.0)) {
                return Err(Error::InvalidParameter("radius must be positive".into()));
            }
        }
        let prefiltered = match truncation {
            Truncation::All => Some(prefilter(kernel, data)),
            Truncation::Radius { .. } => None,
        };
        Ok(Self { kernel, data, truncation, prefiltered })
    }

    pub fn kernel(&self) -> &KernelEvaluator {
        self.kernel
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.data.origin()).map(|(a, o)| (a - o) / self.data.spacing()).collect()
    }

    fn pollution(&self, y: &[f64]) -> bool {
        let r = self.truncation.radius(self.data.dim(), self.kernel.spec().k).unwrap_or(0.0);
        y.iter().zip(self.data.extents()).any(|(&v, &n)| v < r - 1e-12 || v > (n - 1) as f64 - r + 1e-12)
    }

    /// `D^alpha Q f(x)`.
    pub fn evaluate(&self, x: &[f64], alpha: &[u32]) -> Result<QiEval> {
        match &self.prefiltered {
            Some(p) => self.run(x, alpha, |y, out| self.sum_prefiltered(p, y, alpha, out)),
            None => self.evaluate_direct(x, alpha),
        }
    }

    /// Per-sample evaluation `sum_j Psi(y - j) f_j`, honoring the truncation radius.
    pub fn evaluate_direct(&self, x: &[f64], alpha: &[u32]) -> Result<QiEval> {
        self.run(x, alpha, |y, out| self.sum_direct(y, alpha, out))
    }

    fn run(&self, x: &[f64], alpha: &[u32], sum: impl Fn(&[f64], &mut [f64]) -> Result<()>) -> Result<QiEval> {
        let d = self.data.dim();
        if x.len() != d || alpha.len() != d {
            return Err(Error::InvalidParameter("point or multi-index dimension mismatch".into()));
        }
        let mut warnings = Vec::new();
        let mut y = self.scaled(x);
        if self.pollution(&y) {
            warnings.push(QiWarning::BoundaryPollution);
        }
        let mut value = vec![0.0; d];
        match sum(&y, &mut value) {
            Err(Error::NonremovableSingularity) => {
                y.iter_mut().for_each(|v| *v += 1e-9);
                warnings.push(QiWarning::PerturbedNode);
                sum(&y, &mut value)?;
            }
            other => other?,
        }
        let order: i32 = alpha.iter().map(|&a| a as i32).sum();
        let scale = self.kernel.sign() * self.data.spacing().powi(-order);
        value.iter_mut().for_each(|v| *v *= scale);
        Ok(QiEval { value, warnings })
    }

    fn sum_prefiltered(&self, p: &Prefiltered, y: &[f64], alpha: &[u32], out: &mut [f64]) -> Result<()> {
        let comp = self.kernel.compiled(alpha)?;
        let d = self.data.dim();
        let mut z = vec![0.0; d];
        let mut e = vec![0.0; packed_len(d)];
        out.iter_mut().for_each(|v| *v = 0.0);
        for &n in &p.nonzero {
            let mut rem = n;
            for s in 0..d {
                let m = (rem % p.extents[s]) as f64 - p.reach as f64;
                rem /= p.extents[s];
                z[s] = y[s] - m;
            }
            comp.eval_into(&z, &mut e)?;
            let g = &p.values[n * d..(n + 1) * d];
            accumulate(d, &e, g, out);
        }
        Ok(())
    }

    fn sum_direct(&self, y: &[f64], alpha: &[u32], out: &mut [f64]) -> Result<()> {
        let comp = self.kernel.compiled(alpha)?;
        let (offsets, weights) = self.kernel.stencil_f64();
        let d = self.data.dim();
        let radius = self.truncation.radius(d, self.kernel.spec().k);
        let ext = self.data.extents();
        let (lo, hi): (Vec<usize>, Vec<usize>) = match radius {
            None => (vec![0; d], ext.iter().map(|&n| n - 1).collect()),
            Some(r) => {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for s in 0..d {
                    let a = (y[s] - r).ceil().max(0.0);
                    let b = (y[s] + r).floor().min((ext[s] - 1) as f64);
                    if a > b {
                        return Err(Error::EmptySupport);
                    }
                    lo.push(a as usize);
                    hi.push(b as usize);
                }
                (lo, hi)
            }
        };
        let mut j = lo.clone();
        let mut z = vec![0.0; d];
        let mut e = vec![0.0; packed_len(d)];
        let mut psi = vec![0.0; packed_len(d)];
        let mut any = false;
        out.iter_mut().for_each(|v| *v = 0.0);
        loop {
            let inside = match radius {
                None => true,
                Some(r) => y.iter().zip(&j).map(|(a, &b)| (a - b as f64).powi(2)).sum::<f64>() <= r * r,
            };
            if inside {
                any = true;
                psi.iter_mut().for_each(|v| *v = 0.0);
                for (nu, w) in offsets.iter().zip(weights) {
                    for s in 0..d {
                        z[s] = y[s] - j[s] as f64 - nu[s];
                    }
                    comp.eval_into(&z, &mut e)?;
                    psi.iter_mut().zip(&e).for_each(|(p, v)| *p += w * v);
                }
                accumulate(d, &psi, self.data.value(self.data.flat_index(&j)), out);
            }
            let mut s = 0;
            loop {
                if s == d {
                    return if any { Ok(()) } else { Err(Error::EmptySupport) };
                }
                j[s] += 1;
                if j[s] <= hi[s] {
                    break;
                }
                j[s] = lo[s];
                s += 1;
            }
        }
    }

    /// Evaluates at many points in parallel; warnings are merged per point.
    pub fn evaluate_many(&self, points: &[Vec<f64>], alpha: &[u32]) -> Result<Vec<QiEval>> {
        points.par_iter().map(|x| self.evaluate(x, alpha)).collect()
    }
}

#[inline]
fn accumulate(d: usize, packed: &[f64], g: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += packed[packed_index(d, i, j)] * g[j];
        }
        out[i] += acc;
    }
}

fn prefilter(kernel: &KernelEvaluator, data: &GridField) -> Prefiltered {
    let d = data.dim();
    let reach = kernel.stencil().reach() as usize;
    let extents: Vec<usize> = data.extents().iter().map(|&n| n + 2 * reach).collect();
    let nodes: usize = extents.iter().product();
    let (offsets, weights) = kernel.stencil_f64();
    let mut values = vec![0.0; nodes * d];
    let mut m = vec![0usize; d];
    for n in 0..nodes {
        let mut rem = n;
        for s in 0..d {
            m[s] = rem % extents[s];
            rem /= extents[s];
        }
        let g = &mut values[n * d..(n + 1) * d];
        for (nu, w) in offsets.iter().zip(weights) {
            // data index j = m - reach - nu
            let mut j = Vec::with_capacity(d);
            let mut ok = true;
            for s in 0..d {
                let v = m[s] as i64 - reach as i64 - nu[s] as i64;
                if v < 0 || v >= data.extents()[s] as i64 {
                    ok = false;
                    break;
                }
                j.push(v as usize);
            }
            if ok {
                let f = data.value(data.flat_index(&j));
                g.iter_mut().zip(f).for_each(|(a, b)| *a += w * b);
            }
        }
    }
    let nonzero = (0..nodes).filter(|&n| values[n * d..(n + 1) * d].iter().any(|&v| v != 0.0)).collect();
    Prefiltered { reach, extents, values, nonzero }
}

fn project(
    spec: KernelSpec,
    data: &GridField,
    points: &[Vec<f64>],
    alpha: &[u32],
    truncation: Truncation,
) -> Result<Vec<QiEval>> {
    let kernel = KernelEvaluator::new(spec)?;
    QuasiInterpolant::new(&kernel, data, truncation)?.evaluate_many(points, alpha)
}

/// Divergence-free part `D^alpha Q^div f` at each point.
pub fn project_div(
    data: &GridField,
    ell: u32,
    k: u32,
    points: &[Vec<f64>],
    alpha: &[u32],
    truncation: Truncation,
) -> Result<Vec<QiEval>> {
    project(KernelSpec::div(ell, k, data.dim() as u32)?, data, points, alpha, truncation)
}

/// Curl-free part `D^alpha Q^curl f` at each point.
pub fn project_curl(
    data: &GridField,
    ell: u32,
    k: u32,
    points: &[Vec<f64>],
    alpha: &[u32],
    truncation: Truncation,
) -> Result<Vec<QiEval>> {
    project(KernelSpec::curl(ell, k, data.dim() as u32)?, data, points, alpha, truncation)
}

/// Uniform `m^d` mesh of cell-free points covering `[lo, hi]` inclusive.
pub fn uniform_mesh(lo: &[f64], hi: &[f64], m: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = m.pow(d as u32);
    (0..total)
        .map(|mut n| {
            (0..d)
                .map(|s| {
                    let i = n % m;
                    n /= m;
                    if m == 1 {
                        0.5 * (lo[s] + hi[s])
                    } else {
                        lo[s] + (hi[s] - lo[s]) * i as f64 / (m - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(x: &[f64]) -> Vec<f64> {
        vec![(x[0] * 0.7).sin() + x[1] * 0.1, (x[1] * 0.9).cos() * x[0].cos()]
    }

    #[test]
    fn csv_round_trip_and_shuffle() {
        let g = GridField::sample(vec![0.5, -1.0], 0.25, vec![4, 3], field).unwrap();
        let text = g.to_csv();
        assert_eq!(GridField::from_csv(&text).unwrap(), g);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        assert_eq!(GridField::from_csv(&lines.join("\n")).unwrap(), g);
    }

    #[test]
    fn csv_rejects_irregular() {
        let bad = "x1,x2,f1,f2\n0,0,1,1\n1,0,1,1\n0,1,1,1\n";
        assert!(matches!(GridField::from_csv(bad), Err(Error::IrregularGrid(_))));
        let jitter = "x1,x2,f1,f2\n0,0,1,1\n1,0,1,1\n2.001,0,1,1\n0,1,1,1\n1,1,1,1\n2.001,1,1,1\n";
        assert!(matches!(GridField::from_csv(jitter), Err(Error::IrregularGrid(_))));
    }

    #[test]
    fn fast_path_matches_direct_sum() {
        let g = GridField::sample(vec![0.0, 0.0], 0.2, vec![21, 21], field).unwrap();
        for spec in [KernelSpec::div(2, 2, 2).unwrap(), KernelSpec::curl(3, 3, 2).unwrap()] {
            let ev = KernelEvaluator::new(spec).unwrap();
            let qi = QuasiInterpolant::new(&ev, &g, Truncation::All).unwrap();
            for alpha in [[0u32, 0], [1, 0]] {
                for x in [[1.93, 2.11], [2.0, 2.2]] {
                    let a = qi.evaluate(&x, &alpha).unwrap().value;
                    let b = qi.evaluate_direct(&x, &alpha).unwrap().value;
                    for (u, v) in a.iter().zip(&b) {
                        assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()), "{u} vs {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn div_plus_curl_reproduces_scalar_qi() {
        let g = GridField::sample(vec![0.0, 0.0], 0.25, vec![17, 17], field).unwrap();
        let x = [2.1, 1.9];
        let scal = KernelEvaluator::new(KernelSpec::scalar(2, 2, 2).unwrap()).unwrap();
        let s = QuasiInterpolant::new(&scal, &g, Truncation::All).unwrap().evaluate(&x, &[0, 0]).unwrap();
        let d = project_div(&g, 2, 2, &[x.to_vec()], &[0, 0], Truncation::All).unwrap();
        let c = project_curl(&g, 2, 2, &[x.to_vec()], &[0, 0], Truncation::All).unwrap();
        for i in 0..2 {
            let sum = d[0].value[i] + c[0].value[i];
            assert!((sum - s.value[i]).abs() < 1e-9, "{sum} vs {}", s.value[i]);
        }
    }

    #[test]
    fn empty_support_and_pollution() {
        let g = GridField::sample(vec![0.0, 0.0], 1.0, vec![5, 5], field).unwrap();
        let ev = KernelEvaluator::new(KernelSpec::div(2, 2, 2).unwrap()).unwrap();
        let trunc = Truncation::Radius { tail_tol: 1e-3, radius: Some(1.5) };
        let qi = QuasiInterpolant::new(&ev, &g, trunc).unwrap();
        assert!(matches!(qi.evaluate(&[40.0, 40.0], &[0, 0]), Err(Error::EmptySupport)));
        let r = qi.evaluate(&[0.5, 2.0], &[0, 0]).unwrap();
        assert!(r.warnings.contains(&QiWarning::BoundaryPollution));
        let r = qi.evaluate(&[2.0, 2.1], &[0, 0]).unwrap();
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn default_radius() {
        let t = Truncation::Radius { tail_tol: 1e-6, radius: None };
        assert_eq!(t.radius(2, 2), Some(10.0));
    }

    #[test]
    fn mesh_corners() {
        let m = uniform_mesh(&[0.0, 1.0], &[1.0, 2.0], 3);
        assert_eq!(m.len(), 9);
        assert_eq!(m[0], vec![0.0, 1.0]);
        assert_eq!(m[8], vec![1.0, 2.0]);
    }
}
