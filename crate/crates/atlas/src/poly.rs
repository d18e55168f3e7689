//! Dense complex polynomials with ascending coefficients.

use crate::error::{Error, Result};
use crate::roots;
use crate::sphere::C64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Invariant: the last stored coefficient is nonzero; the zero polynomial stores nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolynomial {
    coefficients: Vec<C64>,
}

impl ComplexPolynomial {
    pub fn new(mut coefficients: Vec<C64>) -> Self {
        while coefficients.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coefficients.pop();
        }
        ComplexPolynomial { coefficients }
    }

    pub fn from_real(coefficients: &[f64]) -> Self {
        Self::new(coefficients.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        ComplexPolynomial { coefficients: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial z.
    pub fn z() -> Self {
        Self::from_real(&[0.0, 1.0])
    }

    /// The monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Self::one();
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, C64::new(1.0, 0.0)]));
        }
        p
    }

    /// Parses `re:im` pairs in ascending powers; `:im` may be omitted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut coefficients = Vec::new();
        for term in text.split(',') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Parse(format!("empty coefficient in {text:?}")));
            }
            let mut parts = term.splitn(2, ':');
            let re = parse_f64(parts.next().unwrap_or(""))?;
            let im = match parts.next() {
                Some(s) => parse_f64(s)?,
                None => 0.0,
            };
            coefficients.push(C64::new(re, im));
        }
        let p = Self::new(coefficients);
        if p.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(p)
    }

    /// Inverse of `parse`, with shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        self.coefficients
            .iter()
            .map(|c| format!("{:?}:{:?}", c.re, c.im))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coefficients.last().copied().unwrap_or_default()
    }

    /// Coefficient of z^i, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> C64 {
        self.coefficients.get(i).copied().unwrap_or_default()
    }

    /// Largest coefficient modulus.
    pub fn norm_inf(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coefficients
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_d(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coefficients.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coefficients.len().max(other.coefficients.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coefficients.len().max(other.coefficients.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coefficients.len() + other.coefficients.len() - 1];
        for (i, &a) in self.coefficients.iter().enumerate() {
            for (j, &b) in other.coefficients.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coefficients.iter().map(|&c| c * s).collect())
    }

    /// z^n p(1/z) for n >= degree.
    pub fn reversed(&self, n: usize) -> Self {
        assert!(n >= self.degree() || self.is_zero());
        Self::new((0..=n).map(|i| self.coeff(n - i)).collect())
    }

    /// Coefficients of u -> p(a + u).
    pub fn taylor_shift(&self, a: C64) -> Self {
        let mut c = self.coefficients.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let t = c[j + 1] * a;
                c[j] += t;
            }
        }
        Self::new(c)
    }

    /// All complex roots, with multiplicity, by Aberth–Ehrlich iteration.
    pub fn roots(&self) -> Vec<C64> {
        roots::aberth(&self.coefficients)
    }

    /// Drops leading coefficients below `rel` times the coefficient norm.
    pub fn trimmed(&self, rel: f64) -> Self {
        let scale = self.norm_inf();
        let mut c = self.coefficients.clone();
        while c.last().is_some_and(|x| x.norm() <= rel * scale) {
            c.pop();
        }
        Self::new(c)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("bad number {s:?}")))
}

impl fmt::Display for ComplexPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn parse_z3_minus_1() {
        let p = ComplexPolynomial::parse("-1:0,0:0,0:0,1:0").unwrap();
        assert_eq!(p.degree(), 3);
        assert_eq!(p.eval(c(2.0, 0.0)), c(7.0, 0.0));
        let q = ComplexPolynomial::parse(" -1, 0 ,0,1 ").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(ComplexPolynomial::parse("1:x").is_err());
        assert!(ComplexPolynomial::parse("").is_err());
        assert!(matches!(ComplexPolynomial::parse("0,0"), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn text_round_trip() {
        let p = ComplexPolynomial::new(vec![c(0.1, -3.0), c(1e-17, 2.5), c(-7.0, 0.0)]);
        assert_eq!(ComplexPolynomial::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn shift_and_reverse() {
        let p = ComplexPolynomial::from_real(&[2.0, -2.0, 0.0, 1.0]);
        let a = c(0.3, 0.7);
        let s = p.taylor_shift(a);
        let u = c(-0.2, 0.1);
        assert!((s.eval(u) - p.eval(a + u)).norm() < 1e-13);
        let r = p.reversed(3);
        let w = c(0.5, 0.25);
        assert!((r.eval(w) - w.powi(3) * p.eval(w.inv())).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_horner() {
        let p = ComplexPolynomial::new(vec![c(1.0, 1.0), c(0.0, 2.0), c(3.0, 0.0), c(-1.0, 0.5)]);
        let z = c(0.7, -0.4);
        let (v, d) = p.eval_d(z);
        assert!((v - p.eval(z)).norm() < 1e-14);
        assert!((d - p.derivative().eval(z)).norm() < 1e-14);
    }
}
