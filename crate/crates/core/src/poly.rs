//! Dense real polynomials, coefficients stored low-to-high.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sum_j coeffs[j] X^j`. Trailing zeros are trimmed, the zero polynomial is `[0.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    /// `X - root`.
    pub fn linear(root: f64) -> Self {
        Self::new(vec![-root, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `X^j`, zero beyond the degree.
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|j| self.coeff(j) - other.coeff(j)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `(X - shift) * self`.
    pub fn mul_linear(&self, shift: f64) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            out[j + 1] += c;
            out[j] -= shift * c;
        }
        Self::new(out)
    }

    /// Coefficientwise derivative.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| j as f64 * c)
                .collect(),
        )
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match j {
                0 => write!(f, "{a}")?,
                _ if a == 1.0 => {}
                _ => write!(f, "{a}*")?,
            }
            match j {
                0 => {}
                1 => write!(f, "X")?,
                _ => write!(f, "X^{j}")?,
            }
        }
        Ok(())
    }
}

/// A polynomial whose leading coefficient is exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MonicPolynomial(Polynomial);

impl MonicPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let p = Polynomial::new(coeffs);
        Self::from_polynomial(p)
    }

    pub fn from_polynomial(p: Polynomial) -> Result<Self> {
        if p.leading() != 1.0 {
            return Err(Error::InvalidInput(format!(
                "leading coefficient {} is not 1",
                p.leading()
            )));
        }
        Ok(Self(p))
    }

    pub fn one() -> Self {
        Self(Polynomial::one())
    }

    pub fn as_poly(&self) -> &Polynomial {
        &self.0
    }

    pub fn coeffs(&self) -> &[f64] {
        self.0.coeffs()
    }

    pub fn coeff(&self, j: usize) -> f64 {
        self.0.coeff(j)
    }

    pub fn degree(&self) -> usize {
        self.0.degree()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    pub fn mul(&self, other: &Self) -> Self {
        // product of monic polynomials is monic, and 1*1 is exact
        Self(self.0.mul(&other.0))
    }

    /// `(X - shift) * self`.
    pub fn mul_linear(&self, shift: f64) -> Self {
        Self(self.0.mul_linear(shift))
    }

    /// `self - other` where `other` has lower degree.
    pub fn sub_lower(&self, other: &Polynomial) -> Result<Self> {
        if other.degree() >= self.degree() && other.leading() != 0.0 {
            return Err(Error::InvalidInput(
                "subtracted polynomial must have lower degree".into(),
            ));
        }
        Ok(Self(self.0.sub(other)))
    }

    /// `self + other` where `other` has lower degree.
    pub fn add_lower(&self, other: &Polynomial) -> Result<Self> {
        self.sub_lower(&other.scale(-1.0))
    }

    /// Horner tails `T_k(X) = sum_{j>k} c_j X^(j-k-1)` for `k = 0..=deg-1`.
    /// `T_{deg-1} = 1`.
    pub fn tails(&self) -> Vec<Polynomial> {
        let c = self.coeffs();
        let d = self.degree();
        (0..d)
            .map(|k| Polynomial::new(c[k + 1..].to_vec()))
            .collect()
    }
}

impl TryFrom<Vec<f64>> for MonicPolynomial {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MonicPolynomial> for Vec<f64> {
    fn from(p: MonicPolynomial) -> Self {
        p.0.coeffs
    }
}

impl fmt::Display for MonicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
