//! Two-scale Leray quasi-interpolation on an axis-aligned box.
//!
//! `IQ^part f = I^part f + h^d sum_{j in A} Psi^{part,H}(x - x_j) g_j` with
//! `g = f - I f` on every lattice node and `I` fitted on the ring outside `V`.

use rayon::prelude::*;

use crate::boundary::{default_shape, fit_interpolant, BoundaryInterpolant, InterpolantPart, DEFAULT_MAX_DERIVATIVE};
use crate::error::{Error, Result};
use crate::fields::Part;
use crate::kernel::{packed_index, packed_len, KernelSampler, KernelSpec};
use crate::lattice::{uniform_mesh, GridField};

/// `C h^{1/(2k + d - eps)}`.
pub fn select_kernel_scale(h: f64, k: u32, dim: usize, eps: f64, c: f64) -> Result<f64> {
    if !(h > 0.0 && c > 0.0 && eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("need h > 0, C > 0, 0 < eps < 1; got h={h}, C={c}, eps={eps}")));
    }
    Ok(c * h.powf(1.0 / (2.0 * k as f64 + dim as f64 - eps)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundedConfig {
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub interior_lo: Vec<f64>,
    pub interior_hi: Vec<f64>,
    pub h: f64,
    pub ell: u32,
    pub k: u32,
    /// Constant `C` of the scale rule.
    pub scale_constant: f64,
    /// Exponent slack `eps` of the scale rule.
    pub scale_eps: f64,
    /// Overrides the scale rule when set.
    pub kernel_scale: Option<f64>,
    /// Matérn shape; defaults to [`default_shape`].
    pub matern_shape: Option<f64>,
    /// Width of the strip next to the domain boundary left out of evaluation meshes.
    pub margin: f64,
}

impl BoundedConfig {
    /// `Omega = [0,1]^2`, `V = [0.1,0.9]^2`, `eps = 1e-3`.
    pub fn unit_square(h: f64, ell: u32, k: u32, scale_constant: f64) -> Self {
        Self {
            domain_lo: vec![0.0, 0.0],
            domain_hi: vec![1.0, 1.0],
            interior_lo: vec![0.1, 0.1],
            interior_hi: vec![0.9, 0.9],
            h,
            ell,
            k,
            scale_constant,
            scale_eps: 1e-3,
            kernel_scale: None,
            matern_shape: None,
            margin: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain_lo.len()
    }

    pub fn kernel_scale(&self) -> Result<f64> {
        match self.kernel_scale {
            Some(s) if s > 0.0 => Ok(s),
            Some(s) => Err(Error::InvalidParameter(format!("kernel scale must be positive, got {s}"))),
            None => select_kernel_scale(self.h, self.k, self.dim(), self.scale_eps, self.scale_constant),
        }
    }

    pub fn shape(&self) -> f64 {
        self.matern_shape.unwrap_or_else(|| default_shape(self.h, self.dim()))
    }

    /// Smallest distance between the boundaries of `V` and `Omega`.
    pub fn gap(&self) -> f64 {
        (0..self.dim())
            .map(|s| (self.interior_lo[s] - self.domain_lo[s]).min(self.domain_hi[s] - self.interior_hi[s]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || [&self.domain_hi, &self.interior_lo, &self.interior_hi].iter().any(|v| v.len() != d) {
            return Err(Error::InvalidParameter("box corners must share one dimension".into()));
        }
        if !(self.h > 0.0) || self.margin < 0.0 {
            return Err(Error::InvalidParameter("need h > 0 and a nonnegative margin".into()));
        }
        let nested = (0..d).all(|s| self.interior_lo[s] < self.interior_hi[s]);
        let gap = self.gap();
        if !nested || !(gap > 0.0 && gap < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "interior box must sit strictly inside the domain with gap in (0,1), got {gap}"
            )));
        }
        self.kernel_scale()?;
        Ok(())
    }

    /// Lattice of spacing `h` covering the domain.
    pub fn lattice(&self) -> Result<(Vec<f64>, Vec<usize>)> {
        GridField::lattice_for_box(&self.domain_lo, &self.domain_hi, self.h)
    }

    /// Uniform `m^d` mesh on the domain shrunk by the margin.
    pub fn eval_mesh(&self, m: usize) -> Vec<Vec<f64>> {
        let lo: Vec<f64> = self.domain_lo.iter().map(|v| v + self.margin).collect();
        let hi: Vec<f64> = self.domain_hi.iter().map(|v| v - self.margin).collect();
        uniform_mesh(&lo, &hi, m)
    }

    fn in_interior(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.h;
        x.iter().enumerate().all(|(s, &v)| v >= self.interior_lo[s] - tol && v <= self.interior_hi[s] + tol)
    }
}

/// Fitted ring interpolant and residual data shared by both parts.
#[derive(Clone, Debug)]
pub struct LerayFit {
    config: BoundedConfig,
    scale: f64,
    interpolant: BoundaryInterpolant,
    residual: GridField,
}

impl LerayFit {
    /// Fits `I f` on lattice nodes outside the closed interior box and forms `g = f - I f`.
    pub fn new(data: &GridField, config: &BoundedConfig) -> Result<Self> {
        config.validate()?;
        let (origin, extents) = config.lattice()?;
        let tol = 1e-9 * config.h;
        let matches = data.extents() == extents.as_slice()
            && (data.spacing() - config.h).abs() <= tol
            && data.origin().iter().zip(&origin).all(|(a, b)| (a - b).abs() <= tol);
        if !matches {
            return Err(Error::IrregularGrid("samples must lie on the spacing-h lattice of the domain".into()));
        }
        let d = config.dim();
        let mut centers = Vec::new();
        let mut values = Vec::new();
        for n in 0..data.node_count() {
            let x = data.position(n);
            if !config.in_interior(&x) {
                values.push(data.value(n).to_vec());
                centers.push(x);
            }
        }
        if centers.is_empty() {
            return Err(Error::EmptyRing);
        }
        let interpolant = fit_interpolant(&centers, &values, config.shape())?;
        let full = InterpolantPart::new(&interpolant, Part::Full, &vec![0; d], 0)?;
        let fitted: Vec<Vec<f64>> =
            (0..data.node_count()).into_par_iter().map(|n| full.eval(&data.position(n))).collect();
        let mut residual = data.clone();
        for (n, v) in fitted.iter().enumerate() {
            for s in 0..d {
                residual.values_mut()[n * d + s] -= v[s];
            }
        }
        Ok(Self { config: config.clone(), scale: config.kernel_scale()?, interpolant, residual })
    }

    pub fn config(&self) -> &BoundedConfig {
        &self.config
    }

    /// Kernel scale `H`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn interpolant(&self) -> &BoundaryInterpolant {
        &self.interpolant
    }

    /// `g = f - I f` on every lattice node.
    pub fn residual(&self) -> &GridField {
        &self.residual
    }

    /// Largest `|g|` over the ring nodes; zero up to the solver tolerance.
    pub fn ring_residual(&self) -> f64 {
        let d = self.config.dim();
        (0..self.residual.node_count())
            .filter(|&n| !self.config.in_interior(&self.residual.position(n)))
            .flat_map(|n| self.residual.values()[n * d..(n + 1) * d].iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }
}

/// Evaluator of `D^alpha IQ^part f` for one part.
pub struct LerayQi<'a> {
    fit: &'a LerayFit,
    sampler: KernelSampler,
    ring: InterpolantPart<'a>,
    alpha: Vec<u32>,
}

/// Builds the div or curl evaluator from a shared fit.
pub fn build_leray_qi<'a>(fit: &'a LerayFit, part: Part, alpha: &[u32]) -> Result<LerayQi<'a>> {
    let cfg = &fit.config;
    let d = cfg.dim() as u32;
    let spec = match part {
        Part::Div => KernelSpec::div(cfg.ell, cfg.k, d)?,
        Part::Curl => KernelSpec::curl(cfg.ell, cfg.k, d)?,
        Part::Full => return Err(Error::InvalidParameter("the Leray evaluator needs the div or curl part".into())),
    };
    Ok(LerayQi {
        fit,
        sampler: KernelSampler::new(spec, alpha)?,
        ring: InterpolantPart::new(&fit.interpolant, part, alpha, DEFAULT_MAX_DERIVATIVE)?,
        alpha: alpha.to_vec(),
    })
}

impl<'a> LerayQi<'a> {
    /// `D^alpha I^part f(x)`.
    pub fn interpolant_part(&self, x: &[f64]) -> Vec<f64> {
        self.ring.eval(x)
    }

    /// `D^alpha Q^part_{h,H} g(x) = (h/H)^d H^{-|alpha|} sum_j D^alpha Psi((x - x_j)/H) g_j`.
    pub fn quasi_part(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = &self.fit.residual;
        let d = g.dim();
        let big = self.fit.scale;
        let mut out = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut psi = vec![0.0; packed_len(d)];
        for n in 0..g.node_count() {
            let v = g.value(n);
            if v.iter().all(|&c| c == 0.0) {
                continue;
            }
            let xj = g.position(n);
            for s in 0..d {
                y[s] = (x[s] - xj[s]) / big;
            }
            self.sampler.eval_packed(&y, &mut psi)?;
            for i in 0..d {
                out[i] += (0..d).map(|j| psi[packed_index(d, i, j)] * v[j]).sum::<f64>();
            }
        }
        let order: i32 = self.alpha.iter().map(|&a| a as i32).sum();
        let factor = (self.fit.config.h / big).powi(d as i32) * big.powi(-order);
        out.iter_mut().for_each(|c| *c *= factor);
        Ok(out)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.fit.config.dim() {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        let mut v = self.quasi_part(x)?;
        v.iter_mut().zip(self.interpolant_part(x)).for_each(|(a, b)| *a += b);
        Ok(v)
    }

    pub fn evaluate_many(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.par_iter().map(|x| self.evaluate(x)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub points: Vec<Vec<f64>>,
    pub div: Vec<Vec<f64>>,
    pub curl: Vec<Vec<f64>>,
    pub reconstruction: Vec<Vec<f64>>,
}

/// Div part, curl part and their sum at each point.
pub fn leray_decompose(data: &GridField, config: &BoundedConfig, points: &[Vec<f64>]) -> Result<Decomposition> {
    let fit = LerayFit::new(data, config)?;
    let zero = vec![0; config.dim()];
    let div = build_leray_qi(&fit, Part::Div, &zero)?.evaluate_many(points)?;
    let curl = build_leray_qi(&fit, Part::Curl, &zero)?.evaluate_many(points)?;
    let reconstruction = div.iter().zip(&curl).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    Ok(Decomposition { points: points.to_vec(), div, curl, reconstruction })
}
