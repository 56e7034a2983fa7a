//! Rational polynomials and the lattice stencils they induce.
//!
//! The polynomial `q` is a truncated power of the series for the second
//! derivative in terms of the centered difference `Δ̃ = {1, -2, 1}`. Replacing
//! every variable `x_s` by `Δ̃` along axis `s` gives a finite stencil whose
//! symbol matches `(-|ω|^2)^ell` up to order `2 ell + 2k`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::radial::{rat, rat_to_f64, MultiIndex, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPoly {
    dim: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl MultiPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    pub fn var(dim: usize, axis: usize) -> Self {
        let mut m = vec![0; dim];
        m[axis] = 1;
        let mut p = Self::zero(dim);
        p.add_term(m, Rational::one());
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &[u32]) -> Rational {
        self.terms.get(m).copied().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: MultiIndex, c: Rational) {
        let v = self.coeff(&m) + c;
        if v.is_zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, v);
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.iter().sum()).max()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: Rational) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), *v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_truncated(other, u32::MAX)
    }

    /// Product with every monomial of total degree above `max_degree` dropped.
    pub fn mul_truncated(&self, other: &Self, max_degree: u32) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, ca) in &self.terms {
            let da: u32 = a.iter().sum();
            for (b, cb) in &other.terms {
                let db: u32 = b.iter().sum();
                if da.saturating_add(db) > max_degree {
                    continue;
                }
                let m = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(m, *ca * *cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| rat_to_f64(c) * m.iter().zip(x).map(|(&e, v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }
}

/// Coefficients `a_i = (-1)^i 2 (i!)^2 / (2i+2)!` for `i < k`.
pub fn rabut_coefficients(k: u32) -> Vec<Rational> {
    let fact = |n: u32| -> i128 { (1..=n as i128).product() };
    (0..k)
        .map(|i| {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            rat(sign * 2 * fact(i) * fact(i), fact(2 * i + 2))
        })
        .collect()
}

fn check_order(ell: u32, k: u32, dim: u32) -> Result<()> {
    if ell == 0 || k == 0 || dim == 0 {
        return Err(Error::InvalidParameter("ell, k and dim must be positive".into()));
    }
    Ok(())
}

/// The polynomial `q_{d,ell,k}`: `(sum_i a_i sum_s x_s^(i+1))^ell` cut at degree `ell + k - 1`.
pub fn build_q(ell: u32, k: u32, dim: u32) -> Result<MultiPoly> {
    check_order(ell, k, dim)?;
    let d = dim as usize;
    let max_deg = ell + k - 1;
    let mut base = MultiPoly::zero(d);
    for (i, a) in rabut_coefficients(k).into_iter().enumerate() {
        for s in 0..d {
            let mut m = vec![0; d];
            m[s] = i as u32 + 1;
            base.add_term(m, a);
        }
    }
    let mut q = MultiPoly::one(d);
    for _ in 0..ell {
        q = q.mul_truncated(&base, max_deg);
    }
    Ok(q)
}

/// Finite lattice stencil with exact weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    dim: usize,
    weights: BTreeMap<Vec<i32>, Rational>,
}

fn conv1d(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += *x * *y;
        }
    }
    out
}

impl Stencil {
    /// Substitutes the centered second difference for each variable of `q`.
    pub fn from_poly(q: &MultiPoly) -> Self {
        let d = q.dim();
        let max_exp = q.terms().flat_map(|(m, _)| m.iter().copied()).max().unwrap_or(0);
        let second = [Rational::one(), rat(-2, 1), Rational::one()];
        // powers[n] holds Δ̃^n centered at index n.
        let mut powers = vec![vec![Rational::one()]];
        for n in 1..=max_exp as usize {
            powers.push(conv1d(&powers[n - 1], &second));
        }
        let mut weights: BTreeMap<Vec<i32>, Rational> = BTreeMap::new();
        for (m, c) in q.terms() {
            let mut partial: Vec<(Vec<i32>, Rational)> = vec![(Vec::with_capacity(d), *c)];
            for &e in m.iter() {
                let e = e as usize;
                let mut next = Vec::with_capacity(partial.len() * (2 * e + 1));
                for (off, w) in &partial {
                    for (j, pw) in powers[e].iter().enumerate() {
                        let mut o = off.clone();
                        o.push(j as i32 - e as i32);
                        next.push((o, *w * *pw));
                    }
                }
                partial = next;
            }
            for (off, w) in partial {
                let v = weights.get(&off).copied().unwrap_or_else(Rational::zero) + w;
                if v.is_zero() {
                    weights.remove(&off);
                } else {
                    weights.insert(off, v);
                }
            }
        }
        Self { dim: d, weights }
    }

    pub fn for_order(ell: u32, k: u32, dim: u32) -> Result<Self> {
        Ok(Self::from_poly(&build_q(ell, k, dim)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = (&Vec<i32>, &Rational)> {
        self.weights.iter()
    }

    pub fn weight(&self, offset: &[i32]) -> Rational {
        self.weights.get(offset).copied().unwrap_or_else(Rational::zero)
    }

    /// Largest `|offset|_inf` with a nonzero weight.
    pub fn reach(&self) -> i32 {
        self.weights.keys().flat_map(|o| o.iter().map(|v| v.abs())).max().unwrap_or(0)
    }

    pub fn weight_sum(&self) -> Rational {
        self.weights.values().fold(Rational::zero(), |a, w| a + *w)
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights.iter().all(|(o, w)| {
            let neg: Vec<i32> = o.iter().map(|v| -v).collect();
            self.weight(&neg) == *w
        })
    }

    /// Offsets and weights in floating point.
    pub fn to_f64(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.weights.iter().map(|(o, w)| (o.iter().map(|&v| v as f64).collect::<Vec<f64>>(), rat_to_f64(w))).unzip()
    }

    /// Taylor moments `c_alpha = sum_nu w_nu (-nu)^alpha / alpha!` for `|alpha| <= order`.
    pub fn moments(&self, order: u32) -> BTreeMap<MultiIndex, Rational> {
        let fact = |n: u32| -> i128 { (1..=n as i128).product() };
        let mut out = BTreeMap::new();
        for alpha in multi_indices(self.dim, order) {
            let mut c = Rational::zero();
            for (nu, w) in &self.weights {
                let mut p: i128 = 1;
                for (&v, &a) in nu.iter().zip(&alpha) {
                    p *= (-(v as i128)).pow(a);
                }
                c += *w * Rational::from(p);
            }
            let denom: i128 = alpha.iter().map(|&a| fact(a)).product();
            c /= Rational::from(denom);
            if !c.is_zero() {
                out.insert(alpha, c);
            }
        }
        out
    }

    /// Fourier symbol `sum_nu w_nu e^{-i nu.ω}`, real because the stencil is symmetric.
    pub fn symbol(&self, omega: &[f64]) -> f64 {
        self.weights
            .iter()
            .map(|(o, w)| {
                let phase: f64 = o.iter().zip(omega).map(|(&v, x)| v as f64 * x).sum();
                rat_to_f64(w) * phase.cos()
            })
            .sum()
    }
}

/// All multi-indices in `dim` variables with total degree at most `order`.
pub fn multi_indices(dim: usize, order: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    fn rec(cur: &mut Vec<u32>, axis: usize, left: u32, out: &mut Vec<MultiIndex>) {
        if axis == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[axis] = e;
            rec(cur, axis + 1, left - e, out);
        }
        cur[axis] = 0;
    }
    if dim > 0 {
        rec(&mut cur, 0, order, &mut out);
    }
    out
}

/// Fourier transform of the scalar quasi-interpolation kernel.
pub fn psi_hat(q: &MultiPoly, ell: u32, omega: &[f64]) -> f64 {
    let r2: f64 = omega.iter().map(|w| w * w).sum();
    if r2 == 0.0 {
        return 1.0;
    }
    let t: Vec<f64> = omega.iter().map(|w| -4.0 * (w / 2.0).sin().powi(2)).collect();
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    sign * q.eval(&t) / r2.powi(ell as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rabut_values() {
        assert_eq!(rabut_coefficients(3), vec![rat(1, 1), rat(-1, 12), rat(1, 90)]);
    }

    #[test]
    fn q_small_cases() {
        let q = build_q(1, 1, 1).unwrap();
        assert_eq!(q, MultiPoly::var(1, 0));
        let q = build_q(2, 2, 1).unwrap();
        // (x - x^2/12)^2 cut at degree 3
        assert_eq!(q.coeff(&[2]), rat(1, 1));
        assert_eq!(q.coeff(&[3]), rat(-1, 6));
        assert_eq!(q.degree(), Some(3));
    }

    #[test]
    fn q_requires_positive_orders() {
        assert!(build_q(0, 1, 2).is_err());
        assert!(build_q(1, 0, 2).is_err());
        assert!(build_q(1, 1, 0).is_err());
        assert_eq!(build_q(1, 2, 1).unwrap().degree(), Some(2));
    }

    #[test]
    fn psi_hat_one_dimensional_example() {
        let q = build_q(1, 1, 1).unwrap();
        assert!((psi_hat(&q, 1, &[PI]) - 4.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn stencil_annihilates_constants() {
        for (ell, k) in [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3)] {
            for dim in 1..=3 {
                let s = Stencil::for_order(ell, k, dim).unwrap();
                assert!(s.weight_sum().is_zero());
                assert!(s.is_symmetric());
                assert_eq!(s.reach(), (ell + k - 1) as i32);
            }
        }
    }

    #[test]
    fn laplacian_stencil() {
        let s = Stencil::for_order(1, 1, 2).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.weight(&[0, 0]), rat(-4, 1));
        assert_eq!(s.weight(&[1, 0]), rat(1, 1));
    }

    #[test]
    fn symbol_matches_polynomial() {
        let q = build_q(2, 2, 2).unwrap();
        let s = Stencil::from_poly(&q);
        for w in [[0.3, -1.1], [2.0, 2.9]] {
            let t: Vec<f64> = w.iter().map(|x: &f64| -4.0 * (x / 2.0).sin().powi(2)).collect();
            assert!((s.symbol(&w) - q.eval(&t)).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_vanish_below_order() {
        let s = Stencil::for_order(2, 2, 2).unwrap();
        let m = s.moments(8);
        let low = m.keys().map(|a| a.iter().sum::<u32>()).min().unwrap();
        assert_eq!(low, 4);
        // Order-4 moments reproduce Laplace^2: x^4, 2 x^2 y^2, y^4 with unit weights.
        assert_eq!(m[&vec![4, 0]], rat(1, 1));
        assert_eq!(m[&vec![2, 2]], rat(2, 1));
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }
}
