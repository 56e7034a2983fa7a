//! Matrix-valued Matérn interpolation on the boundary ring.
//!
//! The interpolant uses `K = K_div + K_curl = -Delta Phi I` with
//! `K_div = (-Delta I + grad grad^T) Phi` and `K_curl = -grad grad^T Phi`,
//! where `Phi(x) = phi(|x|)` is the normalized C^8 Matérn function. Derivatives
//! are carried as sums of `x^m F^j phi` with `F = r^{-1} d/dr`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::Part;

/// `P_j` in `F^j phi = (-eps^2)^j e^{-s} P_j(s) / 105`, `s = eps r`.
const PROFILE: [&[f64]; 5] =
    [&[105.0, 105.0, 45.0, 10.0, 1.0], &[15.0, 15.0, 6.0, 1.0], &[3.0, 3.0, 1.0], &[1.0, 1.0], &[1.0]];

/// Largest `|alpha|` accepted by [`eval_interpolant`].
pub const DEFAULT_MAX_DERIVATIVE: u32 = 2;

/// `e^{-s}(105 + 105 s + 45 s^2 + 10 s^3 + s^4) / 105` with `s = eps r`.
pub fn matern_c8(r: f64, eps: f64) -> f64 {
    profile(0, r, eps)
}

fn profile(j: usize, r: f64, eps: f64) -> f64 {
    let s = eps * r;
    let poly = PROFILE[j].iter().rev().fold(0.0, |acc, c| acc * s + c);
    (-eps * eps).powi(j as i32) * (-s).exp() * poly / 105.0
}

/// Shape parameter `3 / fill` for a lattice of spacing `h`, with `fill = h sqrt(d) / 2`.
pub fn default_shape(h: f64, dim: usize) -> f64 {
    3.0 / (h * (dim as f64).sqrt() / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    coeff: f64,
    monomial: Vec<u32>,
    order: usize,
}

/// Linear combination of `x^m F^j phi`.
#[derive(Clone, Debug, Default, PartialEq)]
struct ProfileExpr(Vec<Term>);

impl ProfileExpr {
    fn phi(dim: usize) -> Self {
        Self(vec![Term { coeff: 1.0, monomial: vec![0; dim], order: 0 }])
    }

    fn push(&mut self, coeff: f64, monomial: Vec<u32>, order: usize) {
        match self.0.iter_mut().find(|t| t.monomial == monomial && t.order == order) {
            Some(t) => t.coeff += coeff,
            None => self.0.push(Term { coeff, monomial, order }),
        }
    }

    fn differentiate(&self, axis: usize) -> Result<Self> {
        let mut out = Self::default();
        for t in &self.0 {
            let m = t.monomial[axis];
            if m > 0 {
                let mut mono = t.monomial.clone();
                mono[axis] -= 1;
                out.push(t.coeff * m as f64, mono, t.order);
            }
            if t.order + 1 >= PROFILE.len() {
                return Err(Error::DepthLimit { order: t.order + 1, cap: PROFILE.len() - 1 });
            }
            let mut mono = t.monomial.clone();
            mono[axis] += 1;
            out.push(t.coeff, mono, t.order + 1);
        }
        out.0.retain(|t| t.coeff != 0.0);
        Ok(out)
    }

    fn derivative(&self, alpha: &[u32]) -> Result<Self> {
        let mut e = self.clone();
        for (axis, &n) in alpha.iter().enumerate() {
            for _ in 0..n {
                e = e.differentiate(axis)?;
            }
        }
        Ok(e)
    }

    fn add_scaled(&mut self, other: &Self, c: f64) {
        for t in &other.0 {
            self.push(c * t.coeff, t.monomial.clone(), t.order);
        }
    }

    fn eval(&self, x: &[f64], profiles: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|t| {
                let mono: f64 = t.monomial.iter().zip(x).map(|(&m, v)| v.powi(m as i32)).product();
                t.coeff * mono * profiles[t.order]
            })
            .sum()
    }
}

/// Closed-form entries of `D^alpha K_part`, row-major `d x d`.
#[derive(Clone, Debug)]
struct MatrixKernel {
    dim: usize,
    entries: Vec<ProfileExpr>,
}

impl MatrixKernel {
    fn new(dim: usize, part: Part, alpha: &[u32]) -> Result<Self> {
        let phi = ProfileExpr::phi(dim);
        let unit = |i: usize| {
            let mut a = vec![0; dim];
            a[i] += 1;
            a
        };
        let second = |i: usize, j: usize| {
            let mut a = unit(i);
            a[j] += 1;
            phi.derivative(&a)
        };
        let mut laplacian = ProfileExpr::default();
        for s in 0..dim {
            laplacian.add_scaled(&second(s, s)?, 1.0);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut e = ProfileExpr::default();
                if i == j && part != Part::Curl {
                    e.add_scaled(&laplacian, -1.0);
                }
                match part {
                    Part::Div => e.add_scaled(&second(i, j)?, 1.0),
                    Part::Curl => e.add_scaled(&second(i, j)?, -1.0),
                    Part::Full => {}
                }
                entries.push(e.derivative(alpha)?);
            }
        }
        Ok(Self { dim, entries })
    }

    fn eval(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let profiles: Vec<f64> = (0..PROFILE.len()).map(|j| profile(j, r, eps)).collect();
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(x, &profiles);
        }
        debug_assert_eq!(out.len(), self.dim * self.dim);
    }
}

/// Fitted `I f = sum_j K(x - x_j) c_j`.
#[derive(Clone, Debug)]
pub struct BoundaryInterpolant {
    dim: usize,
    eps: f64,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    condition: f64,
}

impl BoundaryInterpolant {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> f64 {
        self.eps
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// 2-norm condition estimate of the assembled system.
    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// Solves `sum_j K(x_i - x_j) c_j = f(x_i)` by Cholesky.
pub fn fit_interpolant(centers: &[Vec<f64>], values: &[Vec<f64>], eps: f64) -> Result<BoundaryInterpolant> {
    let n = centers.len();
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("shape parameter must be positive, got {eps}")));
    }
    let d = centers[0].len();
    if d == 0 || centers.iter().any(|c| c.len() != d) || values.len() != n || values.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidParameter("centers and values must be d-vectors, one value per center".into()));
    }
    let mut sorted: Vec<&Vec<f64>> = centers.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::SingularSystem("duplicate centers".into()));
    }
    let kernel = MatrixKernel::new(d, Part::Full, &vec![0; d])?;
    let nd = n * d;
    let mut a = DMatrix::<f64>::zeros(nd, nd);
    let mut block = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    for i in 0..n {
        for j in 0..=i {
            for s in 0..d {
                diff[s] = centers[i][s] - centers[j][s];
            }
            kernel.eval(&diff, eps, &mut block);
            for p in 0..d {
                for q in 0..d {
                    a[(i * d + p, j * d + q)] = block[p * d + q];
                    a[(j * d + q, i * d + p)] = block[p * d + q];
                }
            }
        }
    }
    let rhs = DVector::from_iterator(nd, values.iter().flatten().copied());
    let lambda_max = power_iteration(|v| &a * v, nd);
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem(format!("Cholesky failed; largest eigenvalue {lambda_max:.3e}")))?;
    let lambda_min = 1.0 / power_iteration(|v| chol.solve(v), nd);
    let condition = lambda_max / lambda_min;
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::SingularSystem(format!("condition estimate {condition:.3e}")));
    }
    let c = chol.solve(&rhs);
    let coefficients = (0..n).map(|i| c.rows(i * d, d).iter().copied().collect()).collect();
    Ok(BoundaryInterpolant { dim: d, eps, centers: centers.to_vec(), coefficients, condition })
}

fn power_iteration(apply: impl Fn(&DVector<f64>) -> DVector<f64>, n: usize) -> f64 {
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = apply(&v);
        let next = w.dot(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-6 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Kernel columns of one part, ready to evaluate many points.
#[derive(Clone, Debug)]
pub struct InterpolantPart<'a> {
    interp: &'a BoundaryInterpolant,
    kernel: MatrixKernel,
}

impl<'a> InterpolantPart<'a> {
    pub fn new(interp: &'a BoundaryInterpolant, part: Part, alpha: &[u32], max_derivative: u32) -> Result<Self> {
        if alpha.len() != interp.dim {
            return Err(Error::InvalidParameter("alpha dimension mismatch".into()));
        }
        let order: u32 = alpha.iter().sum();
        if order > max_derivative {
            return Err(Error::DepthLimit { order: order as usize, cap: max_derivative as usize });
        }
        Ok(Self { interp, kernel: MatrixKernel::new(interp.dim, part, alpha)? })
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let d = self.interp.dim;
        let mut out = vec![0.0; d];
        let mut block = vec![0.0; d * d];
        let mut diff = vec![0.0; d];
        for (xj, cj) in self.interp.centers.iter().zip(&self.interp.coefficients) {
            for s in 0..d {
                diff[s] = x[s] - xj[s];
            }
            self.kernel.eval(&diff, self.interp.eps, &mut block);
            for p in 0..d {
                out[p] += (0..d).map(|q| block[p * d + q] * cj[q]).sum::<f64>();
            }
        }
        out
    }

    pub fn eval_many(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points.par_iter().map(|x| self.eval(x)).collect()
    }
}

/// `D^alpha I^part f(x)` with `|alpha| <= 2`.
pub fn eval_interpolant(interp: &BoundaryInterpolant, x: &[f64], part: Part, alpha: &[u32]) -> Result<Vec<f64>> {
    if x.len() != interp.dim {
        return Err(Error::InvalidParameter("point dimension mismatch".into()));
    }
    Ok(InterpolantPart::new(interp, part, alpha, DEFAULT_MAX_DERIVATIVE)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(h: f64) -> Vec<Vec<f64>> {
        let m = (1.0 / h).round() as usize;
        let mut pts = Vec::new();
        for i in 0..=m {
            for j in 0..=m {
                let (x, y) = (i as f64 * h, j as f64 * h);
                if !(0.1..=0.9).contains(&x) || !(0.1..=0.9).contains(&y) {
                    pts.push(vec![x, y]);
                }
            }
        }
        pts
    }

    #[test]
    fn matern_values() {
        assert_eq!(matern_c8(0.0, 2.0), 1.0);
        assert!((matern_c8(0.5, 2.0) - 266.0 / 105.0 / std::f64::consts::E).abs() < 1e-15);
        let mut last = 1.0;
        for i in 1..200 {
            let v = matern_c8(i as f64 * 0.1, 1.3);
            assert!(v > 0.0 && v < last);
            last = v;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let (eps, r, h) = (1.7, 0.8, 1e-5);
        for j in 0..4 {
            let fd = (profile(j, r + h, eps) - profile(j, r - h, eps)) / (2.0 * h) / r;
            assert!((fd - profile(j + 1, r, eps)).abs() < 1e-7 * (1.0 + fd.abs()), "j = {j}");
        }
    }

    #[test]
    fn kernel_entries_match_finite_differences() {
        let eps = 2.3;
        let x = [0.31, -0.22];
        let base = MatrixKernel::new(2, Part::Div, &[0, 0]).unwrap();
        let dx = MatrixKernel::new(2, Part::Div, &[1, 0]).unwrap();
        let (mut p, mut m, mut g) = (vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]);
        let h = 1e-5;
        base.eval(&[x[0] + h, x[1]], eps, &mut p);
        base.eval(&[x[0] - h, x[1]], eps, &mut m);
        dx.eval(&x, eps, &mut g);
        for i in 0..4 {
            assert!(((p[i] - m[i]) / (2.0 * h) - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn full_is_minus_laplacian_times_identity() {
        let k = MatrixKernel::new(2, Part::Full, &[0, 0]).unwrap();
        let mut v = vec![0.0; 4];
        k.eval(&[0.2, 0.1], 3.0, &mut v);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
        assert!((v[0] - v[3]).abs() < 1e-14);
        assert!(v[0] > 0.0);
    }

    #[test]
    fn single_center_reproduces_value() {
        let it = fit_interpolant(&[vec![0.3, 0.4]], &[vec![1.0, 0.0]], 2.0).unwrap();
        let v = eval_interpolant(&it, &[0.3, 0.4], Part::Full, &[0, 0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn duplicates_and_bad_input_rejected() {
        let c = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(matches!(fit_interpolant(&c, &[vec![1.0, 0.0], vec![0.0, 1.0]], 1.0), Err(Error::SingularSystem(_))));
        assert!(matches!(fit_interpolant(&[], &[], 1.0), Err(Error::EmptySupport)));
        assert!(fit_interpolant(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]], 0.0).is_err());
    }

    #[test]
    fn interpolates_random_data_on_ring() {
        let h = 1.0 / 15.0;
        let centers = ring(h);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<Vec<f64>> =
            centers.iter().map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let it = fit_interpolant(&centers, &values, default_shape(h, 2)).unwrap();
        assert!(it.condition() > 1.0);
        let full = InterpolantPart::new(&it, Part::Full, &[0, 0], 2).unwrap();
        let scale = values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, v) in centers.iter().zip(&values) {
            let e = full.eval(x);
            assert!((e[0] - v[0]).abs().max((e[1] - v[1]).abs()) <= 1e-8 * scale);
        }
    }

    #[test]
    fn parts_are_structured_and_sum_to_full() {
        let h = 0.125;
        let centers = ring(h);
        let values: Vec<Vec<f64>> = centers.iter().map(|x| vec![(3.0 * x[1]).sin(), x[0] * x[1]]).collect();
        let it = fit_interpolant(&centers, &values, default_shape(h, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let d = eval_interpolant(&it, &x, Part::Div, &[0, 0]).unwrap();
            let c = eval_interpolant(&it, &x, Part::Curl, &[0, 0]).unwrap();
            let f = eval_interpolant(&it, &x, Part::Full, &[0, 0]).unwrap();
            assert!((d[0] + c[0] - f[0]).abs() < 1e-12 && (d[1] + c[1] - f[1]).abs() < 1e-12);
            let dx = eval_interpolant(&it, &x, Part::Div, &[1, 0]).unwrap();
            let dy = eval_interpolant(&it, &x, Part::Div, &[0, 1]).unwrap();
            let scale = dx.iter().chain(&dy).fold(1e-300_f64, |m, v| m.max(v.abs()));
            assert!((dx[0] + dy[1]).abs() <= 1e-10 * scale);
            let cx = eval_interpolant(&it, &x, Part::Curl, &[1, 0]).unwrap();
            let cy = eval_interpolant(&it, &x, Part::Curl, &[0, 1]).unwrap();
            let scale = cx.iter().chain(&cy).fold(1e-300_f64, |m, v| m.max(v.abs()));
            assert!((cx[1] - cy[0]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn derivative_cap_enforced() {
        let it = fit_interpolant(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]], 1.0).unwrap();
        assert!(matches!(eval_interpolant(&it, &[0.1, 0.1], Part::Div, &[2, 1]), Err(Error::DepthLimit { .. })));
        assert!(InterpolantPart::new(&it, Part::Div, &[2, 1], 3).is_err());
    }

    #[test]
    fn ring_error_decreases_with_fill_distance() {
        let f = |x: &[f64]| vec![(2.0 * x[1]).sin() * x[0], (x[0] + x[1]).cos()];
        let probe: Vec<Vec<f64>> = (0..40).map(|i| vec![0.013 + 0.024 * i as f64, 0.043]).collect();
        let mut last = f64::INFINITY;
        for m in [8usize, 12, 16] {
            let h = 1.0 / m as f64;
            let centers = ring(h);
            let values: Vec<Vec<f64>> = centers.iter().map(|x| f(x)).collect();
            let it = fit_interpolant(&centers, &values, default_shape(h, 2)).unwrap();
            let full = InterpolantPart::new(&it, Part::Full, &[0, 0], 2).unwrap();
            let err = probe
                .iter()
                .map(|x| {
                    let (a, b) = (full.eval(x), f(x));
                    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
                })
                .fold(0.0_f64, f64::max);
            assert!(err < last, "m = {m}: {err} vs {last}");
            last = err;
        }
    }
}
