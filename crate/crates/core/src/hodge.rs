//! Reference decompositions used to validate the quasi-interpolants.

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fields::Part;
use crate::kernel::{packed_index, packed_len, KernelEvaluator, KernelSampler};
use crate::lattice::GridField;

fn fft_axis(data: &mut [Complex<f64>], extents: &[usize], axis: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let n = extents[axis];
    let stride: usize = extents[..axis].iter().product();
    let total: usize = extents.iter().product();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for start in 0..total {
        if (start / stride) % n != 0 {
            continue;
        }
        for (i, v) in line.iter_mut().enumerate() {
            *v = data[start + i * stride];
        }
        fft.process(&mut line);
        for (i, v) in line.iter().enumerate() {
            data[start + i * stride] = *v;
        }
    }
}

/// Spectral Helmholtz-Hodge projection of a field sampled on one full period.
///
/// The lattice must have the same number of nodes `N` on every axis and no
/// repeated endpoint; the period is `N h`. The mean goes to the
/// divergence-free part.
pub fn fft_project(field: &GridField, part: Part) -> Result<GridField> {
    let d = field.dim();
    let ext = field.extents().to_vec();
    let n = ext[0];
    if n < 2 || ext.iter().any(|&m| m != n) {
        return Err(Error::NonPeriodic(format!("extents {ext:?} are not a uniform N >= 2")));
    }
    if part == Part::Full {
        return Ok(field.clone());
    }
    let total = field.node_count();
    let mut planner = FftPlanner::new();
    let mut comps: Vec<Vec<Complex<f64>>> =
        (0..d).map(|c| (0..total).map(|i| Complex::new(field.value(i)[c], 0.0)).collect()).collect();
    for comp in comps.iter_mut() {
        for axis in 0..d {
            fft_axis(comp, &ext, axis, false, &mut planner);
        }
    }
    let period = n as f64 * field.spacing();
    let mut w = vec![0.0; d];
    let mut v = vec![Complex::new(0.0, 0.0); d];
    for i in 0..total {
        let mut rem = i;
        for s in 0..d {
            let kappa = rem % n;
            rem /= n;
            let signed = if kappa <= n / 2 { kappa as f64 } else { kappa as f64 - n as f64 };
            w[s] = 2.0 * PI * signed / period;
        }
        let w2: f64 = w.iter().map(|x| x * x).sum();
        for s in 0..d {
            v[s] = comps[s][i];
        }
        let proj: Complex<f64> =
            if w2 == 0.0 { Complex::new(0.0, 0.0) } else { (0..d).map(|s| v[s] * w[s]).sum::<Complex<f64>>() / w2 };
        for s in 0..d {
            let curl = proj * w[s];
            comps[s][i] = match part {
                Part::Curl => curl,
                _ => v[s] - curl,
            };
        }
    }
    let scale = 1.0 / total as f64;
    for comp in comps.iter_mut() {
        for axis in 0..d {
            fft_axis(comp, &ext, axis, true, &mut planner);
        }
    }
    let mut values = vec![0.0; total * d];
    for i in 0..total {
        for s in 0..d {
            values[i * d + s] = comps[s][i].re * scale;
        }
    }
    GridField::new(field.origin().to_vec(), field.spacing(), ext, values)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// Half-width `R` of the midpoint box around `x`.
    pub half_width: f64,
    /// Midpoint nodes per axis.
    pub nodes_per_axis: usize,
    /// Outer radius of the multipole correction; `0` disables it.
    pub far_radius: f64,
    /// Side of the Gauss panels tiling `R <= |t - x|_inf <= 2 far_radius`.
    pub panel_width: f64,
}

impl Quadrature {
    /// Ten midpoint cells per `H` on `[x - 2, x + 2]^d`, correction out to 40.
    pub fn for_scale(scale: f64) -> Self {
        Self { half_width: 2.0, nodes_per_axis: (40.0 / scale).ceil() as usize, far_radius: 20.0, panel_width: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionEstimate {
    pub value: Vec<f64>,
    /// Estimated size of everything left out beyond the integrated region.
    pub tail_bound: f64,
    /// Contribution of the multipole correction (zero when disabled).
    pub far_contribution: Vec<f64>,
}

const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_1, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_1, 0.171_324_492_379_170_3),
];

/// Brute-force evaluator of `Psi_H * f`, reusing one multipole expansion.
pub struct ConvolutionOracle<'a> {
    kernel: &'a KernelEvaluator,
    sampler: KernelSampler,
}

impl<'a> ConvolutionOracle<'a> {
    pub fn new(kernel: &'a KernelEvaluator) -> Result<Self> {
        Ok(Self { kernel, sampler: KernelSampler::new(*kernel.spec(), &vec![0; kernel.dim()])? })
    }

    fn psi(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.sampler.eval_packed(y, out)
    }

    /// `H^{-d} ∫ Psi((x - t)/H) f(t) dt`.
    ///
    /// The box `|t - x|_inf <= R` uses the midpoint rule. When enabled, the
    /// shell out to `2 far_radius` uses Gauss panels on the multipole form, and
    /// the remainder is extrapolated from its `far_radius^{-2}` decay.
    pub fn convolve(
        &self,
        scale: f64,
        f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
        x: &[f64],
        quad: Quadrature,
    ) -> Result<ConvolutionEstimate> {
        let d = self.kernel.dim();
        if x.len() != d {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        if !(scale > 0.0 && quad.half_width > 0.0) || quad.nodes_per_axis < 2 {
            return Err(Error::InvalidParameter("need H > 0, R > 0 and at least two nodes".into()));
        }
        let m = quad.nodes_per_axis;
        let step = 2.0 * quad.half_width / m as f64;
        let near = self.box_sum(scale, f, x, m, |i| (-quad.half_width + (i as f64 + 0.5) * step, step), |_| true)?;
        let hd = scale.powi(-(d as i32));
        let mut value: Vec<f64> = near.iter().map(|v| v * hd).collect();
        let mut far_contribution = vec![0.0; d];
        let tail_bound;
        if quad.far_radius > 0.0 {
            let pw = quad.panel_width;
            let ratio = quad.half_width / pw;
            if !(pw > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || quad.far_radius <= quad.half_width {
                return Err(Error::InvalidParameter(
                    "half-width must be a multiple of the panel width and below the far radius".into(),
                ));
            }
            let panels = |outer: f64| (outer / pw).round() as usize;
            let inner = self.shell(scale, f, x, pw, quad.half_width, panels(quad.far_radius))?;
            let outer = self.shell(scale, f, x, pw, quad.far_radius, panels(2.0 * quad.far_radius))?;
            let mut extra: f64 = 0.0;
            for s in 0..d {
                far_contribution[s] = hd * (inner[s] + outer[s] * 4.0 / 3.0);
                extra = extra.max((hd * outer[s] / 3.0).abs());
            }
            value.iter_mut().zip(&far_contribution).for_each(|(v, c)| *v += c);
            tail_bound = extra;
        } else {
            tail_bound = self.decay_tail_bound(scale, f, x, quad.half_width)?;
        }
        Ok(ConvolutionEstimate { value, tail_bound, far_contribution })
    }

    /// Gauss panels on `inner <= |t - x|_inf <= pw * half_panels`.
    fn shell(
        &self,
        scale: f64,
        f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
        x: &[f64],
        pw: f64,
        inner: f64,
        half_panels: usize,
    ) -> Result<Vec<f64>> {
        let outer = pw * half_panels as f64;
        let n = 2 * half_panels * GAUSS6.len();
        let node = move |i: usize| {
            let (p, g) = (i / GAUSS6.len(), GAUSS6[i % GAUSS6.len()]);
            (-outer + pw * (p as f64 + 0.5 + 0.5 * g.0), 0.5 * pw * g.1)
        };
        let inner_tol = inner - 1e-12;
        self.box_sum(scale, f, x, n, node, move |u| u.iter().any(|v| v.abs() > inner_tol))
    }

    /// `sum_nodes w Psi((x - t)/H) f(t)` over a tensor grid `t = x + u`.
    fn box_sum(
        &self,
        scale: f64,
        f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
        x: &[f64],
        n: usize,
        node: impl Fn(usize) -> (f64, f64) + Sync,
        keep: impl Fn(&[f64]) -> bool + Sync,
    ) -> Result<Vec<f64>> {
        let d = x.len();
        let cells = n.pow(d as u32);
        let parts = (0..n)
            .into_par_iter()
            .map(|slab| {
                let mut acc = vec![0.0; d];
                let mut u = vec![0.0; d];
                let mut t = vec![0.0; d];
                let mut y = vec![0.0; d];
                let mut psi = vec![0.0; packed_len(d)];
                for rest in 0..cells / n {
                    let (u0, w0) = node(slab);
                    u[0] = u0;
                    let mut w = w0;
                    let mut r = rest;
                    for s in 1..d {
                        let (us, ws) = node(r % n);
                        u[s] = us;
                        w *= ws;
                        r /= n;
                    }
                    if !keep(&u) {
                        continue;
                    }
                    for s in 0..d {
                        t[s] = x[s] + u[s];
                        y[s] = -u[s] / scale;
                    }
                    self.psi(&y, &mut psi)?;
                    let fv = f(&t);
                    for i in 0..d {
                        let mut a = 0.0;
                        for j in 0..d {
                            a += psi[packed_index(d, i, j)] * fv[j];
                        }
                        acc[i] += w * a;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mut total = vec![0.0; d];
        for p in parts {
            total.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        Ok(total)
    }

    /// `sup|f| * A |S^{d-1}| rho^{-2k} / 2k` with `A = max |Psi(y)| |y|^{d+2k}` on `|y| = rho`.
    ///
    /// Meaningful for kernels whose tail decays like `|y|^{-d-2k}`, i.e. the scalar one.
    fn decay_tail_bound(
        &self,
        scale: f64,
        f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
        x: &[f64],
        half_width: f64,
    ) -> Result<f64> {
        let d = x.len();
        let k = self.kernel.spec().k as i32;
        let rho = half_width / scale;
        let mut amp: f64 = 0.0;
        let mut fmax: f64 = 0.0;
        let mut psi = vec![0.0; packed_len(d)];
        for i in 0..32 {
            let th = 2.0 * PI * (i as f64 + 0.5) / 32.0;
            let mut u = vec![0.0; d];
            u[0] = th.cos();
            u[1 % d] += th.sin();
            let y: Vec<f64> = u.iter().map(|v| v * rho).collect();
            self.psi(&y, &mut psi)?;
            amp = amp.max(psi.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * rho.powi(d as i32 + 2 * k));
            let t: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b * half_width).collect();
            fmax = fmax.max(f(&t).iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        let sphere = 2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d);
        Ok(d as f64 * fmax * amp * sphere * rho.powi(-2 * k) / (2.0 * k as f64))
    }
}

/// One-shot form of [`ConvolutionOracle::convolve`].
pub fn dense_convolution(
    kernel: &KernelEvaluator,
    scale: f64,
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    x: &[f64],
    quad: Quadrature,
) -> Result<ConvolutionEstimate> {
    ConvolutionOracle::new(kernel)?.convolve(scale, f, x, quad)
}

fn gamma_half(d: usize) -> f64 {
    let mut g = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut a = if d % 2 == 0 { 1.0 } else { 0.5 };
    while a + 1e-9 < d as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BuiltinField;
    use crate::kernel::KernelSpec;

    fn periodic(field: BuiltinField, n: usize) -> GridField {
        GridField::sample(vec![0.0, 0.0], 1.0 / n as f64, vec![n, n], |x| field.value(x)).unwrap()
    }

    #[test]
    fn fft_splits_bounded_field() {
        let g = periodic(BuiltinField::BdFull, 32);
        for (part, exact) in [(Part::Div, BuiltinField::BdDiv), (Part::Curl, BuiltinField::BdCurl)] {
            let p = fft_project(&g, part).unwrap();
            for i in 0..g.node_count() {
                let e = exact.value(&g.position(i));
                for (a, b) in p.value(i).iter().zip(&e) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fft_rejects_ragged() {
        let g = GridField::sample(vec![0.0, 0.0], 0.1, vec![8, 10], |_| vec![0.0, 0.0]).unwrap();
        assert!(matches!(fft_project(&g, Part::Div), Err(Error::NonPeriodic(_))));
    }

    #[test]
    fn constant_field_is_divergence_free() {
        let g = GridField::sample(vec![0.0, 0.0], 0.25, vec![4, 4], |_| vec![1.5, -2.0]).unwrap();
        let div = fft_project(&g, Part::Div).unwrap();
        let curl = fft_project(&g, Part::Curl).unwrap();
        assert!((div.value(5)[0] - 1.5).abs() < 1e-14);
        assert!(curl.value(5)[1].abs() < 1e-14);
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(4) - 1.0).abs() < 1e-15);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn convolution_of_constant() {
        // psi integrates to one.
        let ev = KernelEvaluator::new(KernelSpec::scalar(2, 2, 2).unwrap()).unwrap();
        let f = |_: &[f64]| vec![1.0, 0.0];
        let quad = Quadrature { half_width: 3.0, nodes_per_axis: 90, far_radius: 0.0, panel_width: 0.5 };
        let est = dense_convolution(&ev, 0.2, &f, &[0.0, 0.0], quad).unwrap();
        assert!((est.value[0] - 1.0).abs() < 1e-3, "{:?}", est);
        assert!(est.value[1].abs() < 1e-12);
    }
}
