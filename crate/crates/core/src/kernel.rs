//! Matrix-valued quasi-interpolation kernels.
//!
//! A kernel is `Psi = sign * q(Δ̃) M(∂) phi_{ell+n}` where `M` is the operator
//! matrix `(eta Laplace I - beta grad grad^T)(grad grad^T)^gamma` of order `2n`.
//! The divergence-free kernel uses `(1, 1, 0)` and the curl-free kernel
//! `(0, 0, 1)`. Its Fourier transform is `sign * psi_hat(ω) M(ω) / |ω|^{2n}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, RwLock};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::radial::{
    phi_expr, CompiledExprs, DerivativeTable, MultiIndex, RadialExpr, Rational, DEFAULT_MAX_ORDER, DEFAULT_ORIGIN_TOL,
};
use crate::stencil::{build_q, multi_indices, psi_hat, MultiPoly, Stencil};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Scalar,
    Div,
    Curl,
    Harmonic,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub ell: u32,
    pub k: u32,
    pub dim: u32,
    pub eta: u8,
    pub beta: u8,
    pub gamma: u8,
    pub scalar: bool,
}

impl KernelSpec {
    pub fn with_operator(ell: u32, k: u32, dim: u32, eta: u8, beta: u8, gamma: u8) -> Result<Self> {
        let s = Self { ell, k, dim, eta, beta, gamma, scalar: false };
        s.validate()?;
        Ok(s)
    }

    pub fn div(ell: u32, k: u32, dim: u32) -> Result<Self> {
        Self::with_operator(ell, k, dim, 1, 1, 0)
    }

    pub fn curl(ell: u32, k: u32, dim: u32) -> Result<Self> {
        Self::with_operator(ell, k, dim, 0, 0, 1)
    }

    pub fn harmonic(ell: u32, k: u32, dim: u32) -> Result<Self> {
        Self::with_operator(ell, k, dim, 1, 1, 1)
    }

    /// `psi * I`; the only variant allowed in one dimension.
    pub fn scalar(ell: u32, k: u32, dim: u32) -> Result<Self> {
        let s = Self { ell, k, dim, eta: 0, beta: 0, gamma: 0, scalar: true };
        s.validate()?;
        Ok(s)
    }

    /// The four operator triples that all produce the curl-free kernel.
    pub fn curl_variants(ell: u32, k: u32, dim: u32) -> Result<Vec<Self>> {
        [(0, 0, 1), (0, 1, 1), (1, 0, 1), (0, 1, 0)]
            .iter()
            .map(|&(e, b, g)| Self::with_operator(ell, k, dim, e, b, g))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.k == 0 || self.k > self.ell {
            return Err(Error::InvalidParameter(format!("need 1 <= k <= ell, got ell={}, k={}", self.ell, self.k)));
        }
        if self.eta > 1 || self.beta > 1 || self.gamma > 1 {
            return Err(Error::InvalidParameter("operator exponents must be 0 or 1".into()));
        }
        let min_dim = if self.scalar { 1 } else { 2 };
        if self.dim < min_dim {
            return Err(Error::InvalidParameter(format!("dimension must be at least {min_dim}")));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        if self.scalar {
            return Variant::Scalar;
        }
        match (self.eta, self.beta, self.gamma) {
            (1, 1, 0) => Variant::Div,
            (0, 0, 1) | (0, 1, 1) | (1, 0, 1) | (0, 1, 0) => Variant::Curl,
            (1, 1, 1) => Variant::Harmonic,
            _ => Variant::General,
        }
    }

    /// Normalization making every curl triple reproduce the same projector.
    pub fn sign(&self) -> f64 {
        match (self.scalar, self.eta, self.beta, self.gamma) {
            (false, 0, 1, 1) | (false, 0, 1, 0) => -1.0,
            _ => 1.0,
        }
    }

    /// Half the order of the operator matrix.
    pub fn n(&self) -> u32 {
        if self.scalar {
            0
        } else {
            self.gamma as u32 + self.eta.max(self.beta) as u32
        }
    }

    /// Entries of the operator matrix as polynomials in `ξ`, row-major.
    pub fn operator_matrix(&self) -> Vec<MultiPoly> {
        let d = self.dim as usize;
        let delta = |i: usize, j: usize| if i == j { Rational::one() } else { Rational::zero() };
        let xx = |i: usize, j: usize| MultiPoly::var(d, i).mul(&MultiPoly::var(d, j));
        let norm2 = (0..d).fold(MultiPoly::zero(d), |acc, s| acc.add(&xx(s, s)));
        let mut m: Vec<MultiPoly> = (0..d * d)
            .map(|ij| {
                let (i, j) = (ij / d, ij % d);
                if self.scalar || (self.eta == 0 && self.beta == 0) {
                    MultiPoly::constant(d, delta(i, j))
                } else {
                    norm2
                        .scale(delta(i, j) * Rational::from(self.eta as i128))
                        .add(&xx(i, j).scale(-Rational::from(self.beta as i128)))
                }
            })
            .collect();
        if !self.scalar {
            for _ in 0..self.gamma {
                m = (0..d * d)
                    .map(|ij| {
                        let (i, j) = (ij / d, ij % d);
                        (0..d).fold(MultiPoly::zero(d), |acc, s| acc.add(&m[i * d + s].mul(&xx(s, j))))
                    })
                    .collect();
            }
        }
        m
    }
}

/// Dense `dim x dim` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl KernelMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Upper-triangle position of `(i, j)` in a packed symmetric matrix.
#[inline]
pub fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Groups each offset with its negative so that stencil sums at `x` and `-x`
/// add the same terms in the same order.
fn mirror_pairs(offsets: &[Vec<f64>]) -> Vec<(usize, Option<usize>)> {
    let mut used = vec![false; offsets.len()];
    let mut out = Vec::with_capacity(offsets.len());
    for i in 0..offsets.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let neg: Vec<f64> = offsets[i].iter().map(|v| -v).collect();
        let twin =
            if neg == offsets[i] { None } else { (i + 1..offsets.len()).find(|&j| !used[j] && offsets[j] == neg) };
        if let Some(j) = twin {
            used[j] = true;
        }
        out.push((i, twin));
    }
    out
}

/// Evaluates one kernel and its derivatives, caching compiled expressions.
pub struct KernelEvaluator {
    spec: KernelSpec,
    stencil: Stencil,
    offsets: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Offset indices grouped as `nu` with its mirror `-nu`.
    mirrored: Vec<(usize, Option<usize>)>,
    operator: Vec<MultiPoly>,
    table: Mutex<DerivativeTable>,
    compiled: RwLock<HashMap<MultiIndex, Arc<CompiledExprs>>>,
    max_order: usize,
    origin_tol: f64,
}

impl std::fmt::Debug for KernelEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelEvaluator").field("spec", &self.spec).finish()
    }
}

impl KernelEvaluator {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        Self::with_limits(spec, DEFAULT_MAX_ORDER, DEFAULT_ORIGIN_TOL)
    }

    /// `max_order` caps the total derivative order applied to `phi`.
    pub fn with_limits(spec: KernelSpec, max_order: usize, origin_tol: f64) -> Result<Self> {
        spec.validate()?;
        let stencil = Stencil::for_order(spec.ell, spec.k, spec.dim)?;
        let (offsets, weights) = stencil.to_f64();
        let mirrored = mirror_pairs(&offsets);
        let phi = phi_expr(spec.ell + spec.n(), spec.dim)?;
        let d = spec.dim as usize;
        let full = spec.operator_matrix();
        let mut operator = Vec::with_capacity(packed_len(d));
        for i in 0..d {
            for j in i..d {
                operator.push(full[i * d + j].clone());
            }
        }
        Ok(Self {
            spec,
            stencil,
            offsets,
            weights,
            mirrored,
            operator,
            table: Mutex::new(DerivativeTable::new(phi, max_order)),
            compiled: RwLock::new(HashMap::new()),
            max_order,
            origin_tol,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim as usize
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn stencil_f64(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.offsets, &self.weights)
    }

    pub fn sign(&self) -> f64 {
        self.spec.sign()
    }

    /// Packed upper triangle of `D^alpha M(∂) phi`, before the stencil and sign.
    pub fn base_entries(&self, alpha: &[u32]) -> Result<Vec<RadialExpr>> {
        let d = self.dim();
        if alpha.len() != d {
            return Err(Error::InvalidParameter("multi-index length mismatch".into()));
        }
        let order = 2 * self.spec.n() as usize + alpha.iter().map(|&a| a as usize).sum::<usize>();
        if order > self.max_order {
            return Err(Error::DepthLimit { order, cap: self.max_order });
        }
        let mut table = self.table.lock().expect("derivative table poisoned");
        let pi_power = -((self.spec.dim / 2) as i32);
        self.operator
            .iter()
            .map(|poly| {
                let mut e = RadialExpr::zero(d, pi_power);
                for (m, c) in poly.terms() {
                    let total: MultiIndex = m.iter().zip(alpha).map(|(a, b)| a + b).collect();
                    e.add_scaled(&table.get(&total)?, *c)?;
                }
                Ok(e)
            })
            .collect()
    }

    /// Compiled form of [`Self::base_entries`], cached per multi-index.
    pub fn compiled(&self, alpha: &[u32]) -> Result<Arc<CompiledExprs>> {
        if let Some(c) = self.compiled.read().expect("cache poisoned").get(alpha) {
            return Ok(c.clone());
        }
        let c = Arc::new(CompiledExprs::new(&self.base_entries(alpha)?, self.origin_tol)?);
        self.compiled.write().expect("cache poisoned").insert(alpha.to_vec(), c.clone());
        Ok(c)
    }

    /// Packed `D^alpha Psi(x)` written into `out` (length `d(d+1)/2`).
    pub fn eval_packed(&self, x: &[f64], alpha: &[u32], out: &mut [f64]) -> Result<()> {
        let comp = self.compiled(alpha)?;
        let d = self.dim();
        let np = packed_len(d);
        let mut z = vec![0.0; d];
        let mut buf = vec![0.0; np];
        let mut twin = vec![0.0; np];
        out[..np].iter_mut().for_each(|v| *v = 0.0);
        for &(a, b) in &self.mirrored {
            let nu = &self.offsets[a];
            for s in 0..d {
                z[s] = x[s] - nu[s];
            }
            comp.eval_into(&z, &mut buf)?;
            if let Some(b) = b {
                for s in 0..d {
                    z[s] = x[s] + nu[s];
                }
                comp.eval_into(&z, &mut twin)?;
                for (u, v) in buf.iter_mut().zip(&twin) {
                    *u += v;
                }
                debug_assert_eq!(self.weights[a], self.weights[b]);
            }
            let w = self.weights[a];
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += w * v;
            }
        }
        let sign = self.sign();
        out[..np].iter_mut().for_each(|v| *v *= sign);
        Ok(())
    }

    pub fn eval(&self, x: &[f64], alpha: &[u32]) -> Result<KernelMatrix> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        let mut packed = vec![0.0; packed_len(d)];
        self.eval_packed(x, alpha, &mut packed)?;
        let mut m = KernelMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.data[i * d + j] = packed[packed_index(d, i, j)];
            }
        }
        Ok(m)
    }

    /// Fourier transform at `omega`, from the same operator polynomials.
    pub fn hat(&self, omega: &[f64]) -> Result<KernelMatrix> {
        kernel_hat(&self.spec, omega)
    }

    /// Multipole form `sum_alpha c_alpha D^alpha` of the stencil, exact in rationals.
    ///
    /// Accurate far from the lattice offsets, where the direct stencil sum
    /// cancels catastrophically. Moments of order at least `2 ell + 2k` survive
    /// only through `order`, so the truncation error decays like
    /// `|x|^{2 ell - d - 2n - order - 1}`.
    pub fn far_field(&self, order: u32) -> Result<FarField> {
        let d = self.dim();
        let moments = self.stencil.moments(order);
        let pi_power = -((self.spec.dim / 2) as i32);
        let mut entries = vec![RadialExpr::zero(d, pi_power); packed_len(d)];
        let needed = 2 * self.spec.n() as usize + order as usize;
        let deep = KernelEvaluator::with_limits(self.spec, needed.max(self.max_order), self.origin_tol)?;
        let sign = Rational::from(self.sign() as i128);
        for (alpha, c) in &moments {
            let base = deep.base_entries(alpha)?;
            for (e, b) in entries.iter_mut().zip(&base) {
                e.add_scaled(b, *c * sign)?;
            }
        }
        Ok(FarField { dim: d, compiled: CompiledExprs::new(&entries, self.origin_tol)?, entries })
    }
}

/// Multipole expansion of a kernel for large arguments.
#[derive(Clone, Debug)]
pub struct FarField {
    dim: usize,
    entries: Vec<RadialExpr>,
    compiled: CompiledExprs,
}

impl FarField {
    pub fn entries(&self) -> &[RadialExpr] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper-triangle entries in [`packed_index`] order.
    pub fn eval_packed(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.compiled.eval_into(x, out)
    }

    /// Expansion of `D^alpha Psi`, differentiated term by term.
    pub fn derivative(&self, alpha: &[u32]) -> Result<FarField> {
        let order = alpha.iter().sum::<u32>() as usize;
        let entries = self.entries.iter().map(|e| e.derivative(alpha, order)).collect::<Result<Vec<_>>>()?;
        Ok(FarField { dim: self.dim, compiled: CompiledExprs::new(&entries, DEFAULT_ORIGIN_TOL)?, entries })
    }

    pub fn eval(&self, x: &[f64]) -> Result<KernelMatrix> {
        let d = self.dim;
        let mut packed = vec![0.0; packed_len(d)];
        self.compiled.eval_into(x, &mut packed)?;
        let mut m = KernelMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.data[i * d + j] = packed[packed_index(d, i, j)];
            }
        }
        Ok(m)
    }
}

/// Multipole order used once the argument leaves the stencil neighbourhood.
pub const SAMPLER_FAR_ORDER: u32 = 18;
/// Radius beyond which [`KernelSampler`] uses the multipole form.
pub const SAMPLER_SWITCH: f64 = 14.0;

/// `D^alpha Psi` by stencil sum near the origin and by multipole form far away.
pub struct KernelSampler {
    kernel: KernelEvaluator,
    alpha: Vec<u32>,
    far: FarField,
    switch: f64,
}

impl KernelSampler {
    pub fn new(spec: KernelSpec, alpha: &[u32]) -> Result<Self> {
        let kernel = KernelEvaluator::new(spec)?;
        if alpha.len() != kernel.dim() {
            return Err(Error::InvalidParameter("alpha dimension mismatch".into()));
        }
        let far = kernel.far_field(SAMPLER_FAR_ORDER)?.derivative(alpha)?;
        Ok(Self { kernel, alpha: alpha.to_vec(), far, switch: SAMPLER_SWITCH })
    }

    pub fn kernel(&self) -> &KernelEvaluator {
        &self.kernel
    }

    /// Packed `D^alpha Psi(y)`; a point on a non-removable singularity is shifted by `1e-9`.
    pub fn eval_packed(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 > self.switch * self.switch {
            return self.far.eval_packed(y, out);
        }
        match self.kernel.eval_packed(y, &self.alpha, out) {
            Err(Error::NonremovableSingularity) => {
                let shifted: Vec<f64> = y.iter().map(|v| v + 1e-9).collect();
                self.kernel.eval_packed(&shifted, &self.alpha, out)
            }
            other => other,
        }
    }
}

/// Least-squares decay exponent `p` in `max_dir |Psi(r u)| ~ r^{-p}` on `[r_min, r_max]`.
pub fn fit_decay_exponent(ff: &FarField, r_min: f64, r_max: f64, samples: usize) -> Result<f64> {
    if !(r_min > 0.0 && r_max > r_min) || samples < 2 {
        return Err(Error::InvalidParameter("need 0 < r_min < r_max and two samples".into()));
    }
    let d = ff.dim;
    let dirs: Vec<Vec<f64>> = (0..16)
        .map(|i| {
            let t = 0.1 + i as f64 * PI / 8.0;
            let mut u = vec![0.0; d];
            u[0] = t.cos();
            u[1 % d] += t.sin() * 0.8;
            if d > 2 {
                u[2] = t.sin() * 0.6;
            }
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter().map(|v| v / n).collect()
        })
        .collect();
    let mut pts = Vec::with_capacity(samples);
    for s in 0..samples {
        let r = r_min * (r_max / r_min).powf(s as f64 / (samples - 1) as f64);
        let mut mag: f64 = 0.0;
        for u in &dirs {
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            mag = mag.max(ff.eval(&x)?.max_abs());
        }
        pts.push((r.ln(), mag.ln()));
    }
    Ok(-crate::report::fit_line(&pts).0)
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], alpha: &[u32]) -> Result<KernelMatrix> {
    KernelEvaluator::new(*spec)?.eval(x, alpha)
}

/// The scalar kernel `psi` (or a derivative) at `x`; any dimension `>= 1`.
pub fn eval_scalar_psi(ell: u32, k: u32, x: &[f64], alpha: &[u32]) -> Result<f64> {
    let ev = KernelEvaluator::new(KernelSpec::scalar(ell, k, x.len() as u32)?)?;
    Ok(ev.eval(x, alpha)?.get(0, 0))
}

pub fn kernel_hat(spec: &KernelSpec, omega: &[f64]) -> Result<KernelMatrix> {
    spec.validate()?;
    let d = spec.dim as usize;
    if omega.len() != d {
        return Err(Error::InvalidParameter("frequency dimension mismatch".into()));
    }
    let r2: f64 = omega.iter().map(|w| w * w).sum();
    let ops = spec.operator_matrix();
    if ops.iter().all(|p| p.is_zero()) {
        return Ok(KernelMatrix::zeros(d));
    }
    let n = spec.n() as i32;
    if r2 == 0.0 && n > 0 {
        return Err(Error::DirectionUndefined);
    }
    let q = build_q(spec.ell, spec.k, spec.dim)?;
    let scale = spec.sign() * psi_hat(&q, spec.ell, omega) / r2.powi(n);
    Ok(KernelMatrix { dim: d, data: ops.iter().map(|p| scale * p.eval(omega)).collect() })
}

#[derive(Clone, Debug)]
pub struct StrangFixOptions {
    pub lattice_radius: i32,
    pub fd_step: f64,
    pub max_fd_order: u32,
    pub small_omega: f64,
}

impl Default for StrangFixOptions {
    fn default() -> Self {
        Self { lattice_radius: 3, fd_step: 2e-3, max_fd_order: 3, small_omega: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrangFixReport {
    pub ell: u32,
    pub k: u32,
    pub dim: u32,
    /// `max |psi_hat(ω) - 1|` over a ring of small frequencies.
    pub origin_deviation: f64,
    /// `max |psi_hat(2πj)|` over `1 <= |j|_inf <= lattice_radius`.
    pub lattice_value: f64,
    /// Largest finite-difference derivative of `psi_hat - [j = 0]` at lattice points.
    pub lattice_derivative: f64,
    pub fd_step: f64,
    pub fd_order: u32,
}

impl StrangFixReport {
    pub fn passes(&self, origin_tol: f64, value_tol: f64, derivative_tol: f64) -> bool {
        self.origin_deviation <= origin_tol
            && self.lattice_value <= value_tol
            && self.lattice_derivative <= derivative_tol
    }
}

fn central_weights(order: u32) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// Central finite-difference `D^alpha f(x)` by tensor-product stencils, `alpha_s <= 3`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[u32], step: f64) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    let mut idx = vec![0usize; d];
    let lists: Vec<&[(i32, f64)]> = alpha.iter().map(|&a| central_weights(a)).collect();
    let mut p = x.to_vec();
    loop {
        let mut w = 1.0;
        for s in 0..d {
            let (o, c) = lists[s][idx[s]];
            p[s] = x[s] + o as f64 * step;
            w *= c;
        }
        acc += w * f(&p);
        let mut s = 0;
        loop {
            if s == d {
                let order: i32 = alpha.iter().map(|&a| a as i32).sum();
                return acc / step.powi(order);
            }
            idx[s] += 1;
            if idx[s] < lists[s].len() {
                break;
            }
            idx[s] = 0;
            s += 1;
        }
    }
}

fn lattice_points(dim: usize, radius: i32) -> Vec<Vec<i32>> {
    let side = (2 * radius + 1) as usize;
    (0..side.pow(dim as u32))
        .map(|mut n| {
            (0..dim)
                .map(|_| {
                    let v = (n % side) as i32 - radius;
                    n /= side;
                    v
                })
                .collect()
        })
        .collect()
}

/// Spectral check of the moment conditions of the scalar kernel.
pub fn check_strang_fix(ell: u32, k: u32, dim: u32, opts: &StrangFixOptions) -> Result<StrangFixReport> {
    let q = build_q(ell, k, dim)?;
    let d = dim as usize;
    let mut origin_deviation: f64 = 0.0;
    for i in 0..32 {
        let t = 2.0 * PI * i as f64 / 32.0 + 0.05;
        let mut w = vec![0.0; d];
        w[0] = opts.small_omega * t.cos();
        w[1 % d] += opts.small_omega * t.sin();
        origin_deviation = origin_deviation.max((psi_hat(&q, ell, &w) - 1.0).abs());
    }
    let fd_order = opts.max_fd_order.min(2 * k - 1).min(3);
    let alphas: Vec<MultiIndex> = multi_indices(d, fd_order)
        .into_iter()
        .filter(|a| a.iter().sum::<u32>() > 0 && a.iter().all(|&v| v <= 3))
        .collect();
    let mut lattice_value: f64 = 0.0;
    let mut lattice_derivative: f64 = 0.0;
    for j in lattice_points(d, opts.lattice_radius) {
        let center: Vec<f64> = j.iter().map(|&v| 2.0 * PI * v as f64).collect();
        let is_origin = j.iter().all(|&v| v == 0);
        if !is_origin {
            lattice_value = lattice_value.max(psi_hat(&q, ell, &center).abs());
        }
        let f = |w: &[f64]| psi_hat(&q, ell, w);
        for a in &alphas {
            let v = fd_partial(&f, &center, a, opts.fd_step);
            lattice_derivative = lattice_derivative.max(v.abs());
        }
    }
    Ok(StrangFixReport {
        ell,
        k,
        dim,
        origin_deviation,
        lattice_value,
        lattice_derivative,
        fd_step: opts.fd_step,
        fd_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags() {
        assert_eq!(KernelSpec::div(2, 2, 2).unwrap().variant(), Variant::Div);
        assert_eq!(KernelSpec::curl(2, 2, 2).unwrap().variant(), Variant::Curl);
        assert_eq!(KernelSpec::harmonic(2, 2, 2).unwrap().variant(), Variant::Harmonic);
        assert_eq!(KernelSpec::scalar(2, 2, 1).unwrap().variant(), Variant::Scalar);
        assert_eq!(KernelSpec::with_operator(2, 2, 2, 1, 0, 0).unwrap().variant(), Variant::General);
        assert!(KernelSpec::div(2, 2, 1).is_err());
        assert!(KernelSpec::div(2, 3, 2).is_err());
    }

    #[test]
    fn harmonic_operator_vanishes() {
        let spec = KernelSpec::harmonic(2, 2, 3).unwrap();
        assert!(spec.operator_matrix().iter().all(|p| p.is_zero()));
        let ev = KernelEvaluator::new(spec).unwrap();
        assert_eq!(ev.eval(&[0.3, 0.2, -0.4], &[0, 0, 0]).unwrap().max_abs(), 0.0);
        assert_eq!(kernel_hat(&spec, &[0.0, 0.0, 0.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn zero_frequency_direction() {
        let spec = KernelSpec::div(2, 2, 2).unwrap();
        assert!(matches!(kernel_hat(&spec, &[0.0, 0.0]), Err(Error::DirectionUndefined)));
        let scalar = KernelSpec::scalar(2, 2, 2).unwrap();
        assert_eq!(kernel_hat(&scalar, &[0.0, 0.0]).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn projector_symbols() {
        let w = [0.7, -1.3];
        let n2 = w[0] * w[0] + w[1] * w[1];
        let div = kernel_hat(&KernelSpec::div(2, 2, 2).unwrap(), &w).unwrap();
        let curl = kernel_hat(&KernelSpec::curl(2, 2, 2).unwrap(), &w).unwrap();
        let q = build_q(2, 2, 2).unwrap();
        let ph = psi_hat(&q, 2, &w);
        for i in 0..2 {
            for j in 0..2 {
                let p = w[i] * w[j] / n2;
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((curl.get(i, j) - ph * p).abs() < 1e-14);
                assert!((div.get(i, j) - ph * (id - p)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_partition_of_unity() {
        // sum_j psi(x - j) = 1, which fixes the sign of the spatial kernel.
        for (ell, k) in [(1, 1), (2, 2), (3, 3), (3, 2)] {
            let ev = KernelEvaluator::new(KernelSpec::scalar(ell, k, 1).unwrap()).unwrap();
            let ff = ev.far_field(2 * (ell + k) + 6).unwrap();
            let x = 0.37;
            let mut s = 0.0;
            for j in -400i32..=400 {
                let z = x - j as f64;
                s += if z.abs() > 12.0 {
                    ff.eval(&[z]).unwrap().get(0, 0)
                } else {
                    ev.eval(&[z], &[0]).unwrap().get(0, 0)
                };
            }
            assert!((s - 1.0).abs() < 1e-8, "ell={ell} k={k}: {s}");
        }
    }

    #[test]
    fn far_field_matches_direct() {
        let ev = KernelEvaluator::new(KernelSpec::div(2, 2, 2).unwrap()).unwrap();
        let ff = ev.far_field(18).unwrap();
        for x in [[13.0, 6.0], [-8.5, 12.0]] {
            let a = ev.eval(&x, &[0, 0]).unwrap();
            let b = ff.eval(&x).unwrap();
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn strang_fix_default_orders() {
        for (ell, k) in [(2, 2), (3, 3)] {
            let r = check_strang_fix(ell, k, 2, &StrangFixOptions::default()).unwrap();
            assert!(r.passes(1e-6, 1e-14, 1e-5), "{r:?}");
        }
    }

    #[test]
    fn packed_layout() {
        assert_eq!(packed_index(3, 0, 0), 0);
        assert_eq!(packed_index(3, 1, 0), 1);
        assert_eq!(packed_index(3, 1, 1), 3);
        assert_eq!(packed_index(3, 2, 2), 5);
        assert_eq!(packed_len(3), 6);
    }

    #[test]
    fn curl_variant_agreement() {
        let w = [1.1, -0.4];
        let hats: Vec<KernelMatrix> =
            KernelSpec::curl_variants(2, 2, 2).unwrap().iter().map(|s| kernel_hat(s, &w).unwrap()).collect();
        for h in &hats[1..] {
            for (a, b) in h.data.iter().zip(&hats[0].data) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mirror_pairs_cover_symmetric_stencil() {
        let ev = KernelEvaluator::new(KernelSpec::div(3, 3, 2).unwrap()).unwrap();
        let (offsets, _) = ev.stencil_f64();
        let pairs = mirror_pairs(offsets);
        let covered: usize = pairs.iter().map(|p| 1 + p.1.is_some() as usize).sum();
        assert_eq!(covered, offsets.len());
        let singles: Vec<_> = pairs.iter().filter(|p| p.1.is_none()).collect();
        assert_eq!(singles.len(), 1);
        assert!(offsets[singles[0].0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_is_exactly_even() {
        let ev = KernelEvaluator::new(KernelSpec::curl(2, 2, 2).unwrap()).unwrap();
        for x in [[0.37, -1.21], [2.5, 0.01], [-0.2, 0.9]] {
            let a = ev.eval(&x, &[0, 0]).unwrap();
            let b = ev.eval(&[-x[0], -x[1]], &[0, 0]).unwrap();
            assert_eq!(a, b);
        }
    }
}
