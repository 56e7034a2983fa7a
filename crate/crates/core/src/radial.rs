//! Exact calculus for polyharmonic fundamental solutions.
//!
//! An expression is a finite sum of terms `c * x^m * r^p * (ln r)^q` with
//! `q` in `{0, 1}`, exact rational `c`, and one shared factor `pi^k`.
//! Terms are stored in a canonical form in which the last coordinate never
//! appears squared (`x_d^2` is rewritten as `r^2 - x_1^2 - ... - x_{d-1}^2`),
//! so identities such as `Laplace(1/r) = 0` in three dimensions cancel exactly.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;
pub type MultiIndex = Vec<u32>;

pub const DEFAULT_ORIGIN_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ORDER: usize = 8;
pub const DEFAULT_TERM_LIMIT: usize = 100_000;

pub(crate) fn rat(n: i128, d: i128) -> Rational {
    Ratio::new(n, d)
}

pub(crate) fn rat_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TermKey {
    monomial: MultiIndex,
    rpow: i32,
    log: bool,
}

/// One term `coeff * x^monomial * r^rpow * (ln r)^logpow`, without the `pi` factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadialTerm {
    pub coeff: Rational,
    pub monomial: MultiIndex,
    pub rpow: i32,
    pub logpow: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadialExpr {
    dim: usize,
    pi_power: i32,
    term_limit: usize,
    terms: BTreeMap<TermKey, Rational>,
}

impl RadialExpr {
    pub fn zero(dim: usize, pi_power: i32) -> Self {
        Self { dim, pi_power, term_limit: DEFAULT_TERM_LIMIT, terms: BTreeMap::new() }
    }

    /// Builds an expression from raw terms and brings it to canonical form.
    pub fn from_terms(dim: usize, pi_power: i32, terms: &[RadialTerm]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut out = Self::zero(dim, pi_power);
        for t in terms {
            if t.monomial.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "monomial has {} exponents, expected {dim}",
                    t.monomial.len()
                )));
            }
            if t.logpow > 1 {
                return Err(Error::InvalidParameter("log power must be 0 or 1".into()));
            }
            out.push(t.coeff, t.monomial.clone(), t.rpow, t.logpow == 1)?;
        }
        Ok(out)
    }

    pub fn with_term_limit(mut self, limit: usize) -> Self {
        self.term_limit = limit;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pi_power(&self) -> i32 {
        self.pi_power
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> Vec<RadialTerm> {
        self.terms
            .iter()
            .map(|(k, c)| RadialTerm { coeff: *c, monomial: k.monomial.clone(), rpow: k.rpow, logpow: k.log as u8 })
            .collect()
    }

    /// Canonical form is maintained on every update, so this is a copy.
    pub fn simplify(&self) -> Self {
        self.clone()
    }

    fn push(&mut self, coeff: Rational, mut monomial: MultiIndex, rpow: i32, log: bool) -> Result<()> {
        if coeff.is_zero() {
            return Ok(());
        }
        let last = self.dim - 1;
        if monomial[last] >= 2 {
            monomial[last] -= 2;
            for s in 0..last {
                let mut m = monomial.clone();
                m[s] += 2;
                self.push(-coeff, m, rpow, log)?;
            }
            return self.push(coeff, monomial, rpow + 2, log);
        }
        let key = TermKey { monomial, rpow, log };
        let value = self.terms.get(&key).copied().unwrap_or_else(Rational::zero) + coeff;
        if value.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, value);
            if self.terms.len() > self.term_limit {
                return Err(Error::TermLimit { limit: self.term_limit });
            }
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.pi_power != other.pi_power {
            return Err(Error::InvalidParameter("expressions differ in dimension or pi factor".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.push(*c, k.monomial.clone(), k.rpow, k.log)?;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Rational) -> Self {
        let mut out = self.clone();
        if factor.is_zero() {
            out.terms.clear();
        } else {
            for c in out.terms.values_mut() {
                *c *= factor;
            }
        }
        out
    }

    /// Adds `factor * other` in place.
    pub fn add_scaled(&mut self, other: &Self, factor: Rational) -> Result<()> {
        self.check_compatible(other)?;
        for (k, c) in &other.terms {
            self.push(*c * factor, k.monomial.clone(), k.rpow, k.log)?;
        }
        Ok(())
    }

    /// Partial derivative along `axis` (zero-based).
    pub fn differentiate(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range for dimension {}", self.dim)));
        }
        let mut out = Self { terms: BTreeMap::new(), ..self.clone() };
        for (k, c) in &self.terms {
            let ms = k.monomial[axis];
            if ms > 0 {
                let mut m = k.monomial.clone();
                m[axis] -= 1;
                out.push(*c * Rational::from(ms as i128), m, k.rpow, k.log)?;
            }
            let mut up = k.monomial.clone();
            up[axis] += 1;
            if k.rpow != 0 {
                out.push(*c * Rational::from(k.rpow as i128), up.clone(), k.rpow - 2, k.log)?;
            }
            if k.log {
                out.push(*c, up, k.rpow - 2, false)?;
            }
        }
        Ok(out)
    }

    /// Mixed partial derivative `D^alpha`, rejecting orders above `max_order`.
    pub fn derivative(&self, alpha: &[u32], max_order: usize) -> Result<Self> {
        if alpha.len() != self.dim {
            return Err(Error::InvalidParameter("multi-index length mismatch".into()));
        }
        let order: usize = alpha.iter().map(|&a| a as usize).sum();
        if order > max_order {
            return Err(Error::DepthLimit { order, cap: max_order });
        }
        let mut out = self.clone();
        for (axis, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                out = out.differentiate(axis)?;
            }
        }
        Ok(out)
    }

    pub fn laplacian(&self) -> Result<Self> {
        let mut out = Self { terms: BTreeMap::new(), ..self.clone() };
        for s in 0..self.dim {
            let second = self.differentiate(s)?.differentiate(s)?;
            out.add_scaled(&second, Rational::one())?;
        }
        Ok(out)
    }

    /// Value at the origin under the limit rule, `None` when no limit exists.
    pub fn origin_limit(&self) -> Option<f64> {
        let mut value = Rational::zero();
        for (k, c) in &self.terms {
            let deg = k.monomial.iter().map(|&m| m as i64).sum::<i64>() + k.rpow as i64;
            if deg > 0 {
                continue;
            }
            if deg == 0 && !k.log && k.monomial.iter().all(|&m| m == 0) {
                value += *c;
            } else {
                return None;
            }
        }
        Some(rat_to_f64(&value) * PI.powi(self.pi_power))
    }

    pub fn evaluate(&self, point: &[f64], origin_tol: f64) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        let r = point.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r <= origin_tol {
            return self.origin_limit().ok_or(Error::NonremovableSingularity);
        }
        let lnr = r.ln();
        let mut acc = 0.0;
        for (k, c) in &self.terms {
            let mut v = rat_to_f64(c) * r.powi(k.rpow);
            for (x, &m) in point.iter().zip(&k.monomial) {
                v *= x.powi(m as i32);
            }
            if k.log {
                v *= lnr;
            }
            acc += v;
        }
        Ok(acc * PI.powi(self.pi_power))
    }

    pub fn max_abs_coeff(&self) -> Rational {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_else(Rational::zero)
    }
}

/// Memoized mixed partials of one expression.
#[derive(Debug)]
pub struct DerivativeTable {
    base: RadialExpr,
    max_order: usize,
    cache: HashMap<MultiIndex, RadialExpr>,
}

impl DerivativeTable {
    pub fn new(base: RadialExpr, max_order: usize) -> Self {
        Self { base, max_order, cache: HashMap::new() }
    }

    pub fn get(&mut self, alpha: &[u32]) -> Result<RadialExpr> {
        let order: usize = alpha.iter().map(|&a| a as usize).sum();
        if order > self.max_order {
            return Err(Error::DepthLimit { order, cap: self.max_order });
        }
        if order == 0 {
            return Ok(self.base.clone());
        }
        if let Some(e) = self.cache.get(alpha) {
            return Ok(e.clone());
        }
        let axis = alpha.iter().position(|&a| a > 0).expect("nonzero order");
        let mut lower = alpha.to_vec();
        lower[axis] -= 1;
        let out = self.get(&lower)?.differentiate(axis)?;
        self.cache.insert(alpha.to_vec(), out.clone());
        Ok(out)
    }
}

/// Constants of `phi = r^(2l-d) (C ln r + D)` with `Laplace^l phi = delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalConstants {
    pub ell: u32,
    pub dim: u32,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// `E = e_rational * pi^pi_power`.
    pub e_rational: Rational,
    pub pi_power: i32,
    pub logarithmic: bool,
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

pub fn fundamental_constant(ell: u32, dim: u32) -> Result<FundamentalConstants> {
    if ell == 0 || dim == 0 {
        return Err(Error::InvalidParameter("ell and dim must be positive".into()));
    }
    let (l, d) = (ell as i128, dim as i128);
    // Gamma(d/2) / pi^(d/2) = gamma_part * pi^(-floor(d/2))
    let gamma_part = if dim % 2 == 0 {
        Rational::from(factorial(dim / 2 - 1))
    } else {
        let double_fact: i128 = (1..=d - 2).rev().step_by(2).product();
        rat(double_fact, 1 << ((dim - 1) / 2))
    };
    let mut denom = Rational::from((1i128 << ell) * factorial(ell - 1));
    for j in 0..l {
        let f = 2 * l - 2 * j - d;
        if f != 0 {
            denom *= Rational::from(f);
        }
    }
    let e_rational = gamma_part / denom;
    let pi_power = -((dim / 2) as i32);
    let e = rat_to_f64(&e_rational) * PI.powi(pi_power);
    let logarithmic = dim % 2 == 0 && 2 * ell >= dim;
    let (c, dconst) = if logarithmic { (e, 0.0) } else { (0.0, e) };
    Ok(FundamentalConstants { ell, dim, c, d: dconst, e, e_rational, pi_power, logarithmic })
}

/// The fundamental solution of `Laplace^ell` in `dim` dimensions.
pub fn phi_expr(ell: u32, dim: u32) -> Result<RadialExpr> {
    let k = fundamental_constant(ell, dim)?;
    let term = RadialTerm {
        coeff: k.e_rational,
        monomial: vec![0; dim as usize],
        rpow: 2 * ell as i32 - dim as i32,
        logpow: k.logarithmic as u8,
    };
    RadialExpr::from_terms(dim as usize, k.pi_power, &[term])
}

#[derive(Clone, Debug)]
struct Basis {
    monomial: Vec<i32>,
    rpow: i32,
    log: bool,
    outs: Vec<(usize, f64)>,
}

/// Floating-point evaluator for a batch of expressions sharing one basis.
#[derive(Clone, Debug)]
pub struct CompiledExprs {
    dim: usize,
    n_out: usize,
    basis: Vec<Basis>,
    origin: Vec<Option<f64>>,
    origin_tol: f64,
    any_log: bool,
}

impl CompiledExprs {
    pub fn new(exprs: &[RadialExpr], origin_tol: f64) -> Result<Self> {
        let dim = exprs.first().map(|e| e.dim).unwrap_or(1);
        let mut index: BTreeMap<TermKey, usize> = BTreeMap::new();
        let mut basis: Vec<Basis> = Vec::new();
        for (o, e) in exprs.iter().enumerate() {
            if e.dim != dim {
                return Err(Error::InvalidParameter("mixed dimensions in batch".into()));
            }
            let scale = PI.powi(e.pi_power);
            for (k, c) in &e.terms {
                let id = *index.entry(k.clone()).or_insert_with(|| {
                    basis.push(Basis {
                        monomial: k.monomial.iter().map(|&m| m as i32).collect(),
                        rpow: k.rpow,
                        log: k.log,
                        outs: Vec::new(),
                    });
                    basis.len() - 1
                });
                basis[id].outs.push((o, rat_to_f64(c) * scale));
            }
        }
        let any_log = basis.iter().any(|b| b.log);
        let origin = exprs.iter().map(|e| e.origin_limit()).collect();
        Ok(Self { dim, n_out: exprs.len(), basis, origin, origin_tol, any_log })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes all outputs at `z` into `out` (overwriting).
    #[inline]
    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let r2: f64 = z.iter().map(|x| x * x).sum();
        let r = r2.sqrt();
        if r <= self.origin_tol {
            for (o, v) in out.iter_mut().zip(&self.origin) {
                *o = v.ok_or(Error::NonremovableSingularity)?;
            }
            return Ok(());
        }
        out[..self.n_out].iter_mut().for_each(|o| *o = 0.0);
        let lnr = if self.any_log { r.ln() } else { 0.0 };
        for b in &self.basis {
            let mut v = r.powi(b.rpow);
            for (x, &m) in z.iter().zip(&b.monomial) {
                if m > 0 {
                    v *= x.powi(m);
                }
            }
            if b.log {
                v *= lnr;
            }
            for &(o, c) in &b.outs {
                out[o] += c * v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[axis] += h;
        m[axis] -= h;
        let mut p2 = x.to_vec();
        let mut m2 = x.to_vec();
        p2[axis] += 2.0 * h;
        m2[axis] -= 2.0 * h;
        (8.0 * (f(&p) - f(&m)) - (f(&p2) - f(&m2))) / (12.0 * h)
    }

    #[test]
    fn newton_kernel_constants() {
        let k = fundamental_constant(1, 3).unwrap();
        assert_eq!(k.e_rational, rat(-1, 4));
        assert_eq!(k.pi_power, -1);
        assert!((k.d + 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert_eq!(k.c, 0.0);
        let k = fundamental_constant(1, 2).unwrap();
        assert_eq!(k.e_rational, rat(1, 2));
        assert!((k.c - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert_eq!(k.d, 0.0);
        assert_eq!(fundamental_constant(2, 2).unwrap().e_rational, rat(1, 8));
        assert_eq!(fundamental_constant(3, 2).unwrap().e_rational, rat(1, 128));
        assert_eq!(fundamental_constant(1, 4).unwrap().e_rational, rat(-1, 4));
    }

    #[test]
    fn constants_reject_zero() {
        assert!(fundamental_constant(0, 2).is_err());
        assert!(fundamental_constant(2, 0).is_err());
    }

    #[test]
    fn iterated_laplacian_lowers_order() {
        // Laplace phi_l = phi_{l-1} up to a polynomial, exactly when d is odd.
        for dim in 2..=5u32 {
            for ell in 2..=4u32 {
                let phi = phi_expr(ell, dim).unwrap();
                let lower = phi_expr(ell - 1, dim).unwrap();
                let diff = phi.laplacian().unwrap().add(&lower.scale(rat(-1, 1))).unwrap();
                if dim % 2 == 1 {
                    assert!(diff.is_zero(), "l={ell} d={dim}");
                }
                assert!(diff.terms().iter().all(|t| t.logpow == 0 && t.rpow >= 0));
                let mut top = phi.clone();
                for _ in 0..ell {
                    top = top.laplacian().unwrap();
                }
                assert!(top.is_zero(), "l={ell} d={dim}");
            }
        }
    }

    #[test]
    fn newton_kernel_is_harmonic_exactly() {
        for dim in 2..=5u32 {
            let lap = phi_expr(1, dim).unwrap().laplacian().unwrap();
            assert!(lap.is_zero(), "d={dim}: {:?}", lap.terms());
        }
    }

    #[test]
    fn canonical_form_reduces_last_axis() {
        let t = |m: Vec<u32>, c: i128| RadialTerm { coeff: c.into(), monomial: m, rpow: -2, logpow: 0 };
        let e = RadialExpr::from_terms(2, 0, &[t(vec![2, 0], 1), t(vec![0, 2], 1)]).unwrap();
        let terms = e.terms();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].monomial, vec![0, 0]);
        assert_eq!(terms[0].rpow, 0);
        assert_eq!(e.origin_limit(), Some(1.0));
    }

    #[test]
    fn limit_rule() {
        let t = |m: Vec<u32>, p: i32, q: u8| RadialTerm { coeff: 3.into(), monomial: m, rpow: p, logpow: q };
        let origin = [0.0, 0.0];
        let ok = RadialExpr::from_terms(2, 0, &[t(vec![0, 0], 0, 0), t(vec![1, 0], 2, 1)]).unwrap();
        assert_eq!(ok.evaluate(&origin, 1e-12).unwrap(), 3.0);
        for bad in [t(vec![0, 0], 0, 1), t(vec![1, 0], -1, 0), t(vec![0, 0], -1, 0)] {
            let e = RadialExpr::from_terms(2, 0, &[bad]).unwrap();
            assert!(matches!(e.evaluate(&origin, 1e-12), Err(Error::NonremovableSingularity)));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let phi = phi_expr(3, 2).unwrap();
        let x = [0.37, -0.81];
        for alpha in [[1u32, 0], [0, 1], [2, 0], [1, 1], [2, 1], [3, 2]] {
            let d = phi.derivative(&alpha, 8).unwrap();
            let lower_axis = if alpha[0] > 0 { 0 } else { 1 };
            let mut lower = alpha;
            lower[lower_axis] -= 1;
            let g = phi.derivative(&lower, 8).unwrap();
            let fd = fd_partial(&|p| g.evaluate(p, 1e-12).unwrap(), &x, lower_axis, 1e-3);
            let exact = d.evaluate(&x, 1e-12).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{alpha:?}: {fd} vs {exact}");
        }
    }

    #[test]
    fn depth_and_term_limits() {
        let phi = phi_expr(2, 2).unwrap();
        assert!(matches!(phi.derivative(&[5, 4], 8), Err(Error::DepthLimit { order: 9, cap: 8 })));
        let small = phi.clone().with_term_limit(1);
        assert!(matches!(small.derivative(&[1, 1], 8), Err(Error::TermLimit { limit: 1 })));
    }

    #[test]
    fn derivative_table_matches_direct() {
        let phi = phi_expr(2, 3).unwrap();
        let mut table = DerivativeTable::new(phi.clone(), 8);
        for alpha in [[1u32, 0, 2], [0, 2, 1], [2, 2, 0]] {
            assert_eq!(table.get(&alpha).unwrap(), phi.derivative(&alpha, 8).unwrap());
        }
    }

    #[test]
    fn compiled_matches_exact() {
        let phi = phi_expr(2, 2).unwrap();
        let exprs: Vec<RadialExpr> =
            [[2u32, 0], [1, 1], [0, 2]].iter().map(|a| phi.derivative(a, 8).unwrap()).collect();
        let c = CompiledExprs::new(&exprs, 1e-12).unwrap();
        let mut out = [0.0; 3];
        for z in [[0.4, -1.3], [2.0, 0.1]] {
            c.eval_into(&z, &mut out).unwrap();
            for (o, e) in out.iter().zip(&exprs) {
                let v = e.evaluate(&z, 1e-12).unwrap();
                assert!((o - v).abs() < 1e-13 * (1.0 + v.abs()));
            }
        }
        assert!(c.eval_into(&[0.0, 0.0], &mut out).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mixed_partials_commute(ell in 1u32..4, dim in 2u32..4, a in 0usize..3, b in 0usize..3) {
                let phi = phi_expr(ell, dim).unwrap();
                let a = a % dim as usize;
                let b = b % dim as usize;
                let ab = phi.differentiate(a).unwrap().differentiate(b).unwrap();
                let ba = phi.differentiate(b).unwrap().differentiate(a).unwrap();
                prop_assert_eq!(ab, ba);
            }

            #[test]
            fn simplify_idempotent(ell in 1u32..4, dim in 1u32..4, ax in 0usize..3) {
                let e = phi_expr(ell, dim).unwrap().differentiate(ax % dim as usize).unwrap();
                prop_assert_eq!(e.simplify().simplify(), e.simplify());
            }

            #[test]
            fn phi_is_radial(ell in 1u32..4, theta in 0.0f64..std::f64::consts::TAU, r in 0.1f64..3.0) {
                let phi = phi_expr(ell, 2).unwrap();
                let a = phi.evaluate(&[r * theta.cos(), r * theta.sin()], 1e-12).unwrap();
                let b = phi.evaluate(&[r, 0.0], 1e-12).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
