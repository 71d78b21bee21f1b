//! Monic orthogonal polynomials, their roots through symmetric tridiagonal
//! (Jacobi) eigenproblems, and Gauss quadrature rules.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_algebra::{moments_to_recurrence, MomentVector, RecurrenceCoefficients};
use crate::poly::{MonicPolynomial, Polynomial};

/// Relative gap below which two roots are reported as nearly coincident.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-8;

/// Nodes and weights of a discrete measure `sum_i w_i delta(xi - u_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i u_i^k`.
    pub fn power_sum(&self, k: usize) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * u.powi(k as i32))
            .sum()
    }

    /// `sum_i w_i |u_i|^k`, the natural scale for comparing `power_sum(k)`.
    pub fn abs_power_sum(&self, k: usize) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w.abs() * u.abs().powi(k as i32))
            .sum()
    }

    /// Moments `M_0..M_{len-1}` of the discrete measure.
    pub fn moments(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            let mut p = *w;
            for slot in out.iter_mut() {
                *slot += p;
                p *= u;
            }
        }
        out
    }

    pub fn max_abs_node(&self) -> f64 {
        self.nodes.iter().fold(0.0_f64, |m, u| m.max(u.abs()))
    }

    /// Nodes strictly increasing and weights positive.
    pub fn is_valid(&self) -> bool {
        self.nodes.len() == self.weights.len()
            && self.nodes.windows(2).all(|w| w[0] < w[1])
            && self.weights.iter().all(|w| *w > 0.0)
    }
}

/// Smallest gap between sorted roots relative to the spectral radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSeparation {
    pub min_gap: f64,
    pub spectral_radius: f64,
    pub near_degenerate: bool,
}

pub fn root_separation(sorted_roots: &[f64]) -> RootSeparation {
    let radius = sorted_roots.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let min_gap = sorted_roots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    RootSeparation {
        min_gap,
        spectral_radius: radius,
        near_degenerate: min_gap <= NEAR_DEGENERATE_GAP * radius,
    }
}

/// `Q_0 .. Q_{up_to}` from `Q_{k+1} = (X - a_k) Q_k - b_k Q_{k-1}`.
/// Uses `a_0..a_{up_to-1}` and `b_1..b_{up_to-1}`; `b_0` is not needed.
pub fn build_polynomials(
    rc: &RecurrenceCoefficients,
    up_to: usize,
) -> Result<Vec<MonicPolynomial>> {
    build_from_slices(rc.a(), rc.b(), up_to)
}

/// Same as [`build_polynomials`] on raw slices; `b[0]` is ignored.
pub fn build_from_slices(a: &[f64], b: &[f64], up_to: usize) -> Result<Vec<MonicPolynomial>> {
    if a.len() < up_to || (up_to >= 2 && b.len() < up_to) {
        return Err(Error::InvalidInput(format!(
            "degree {up_to} needs {up_to} a-coefficients and b_1..b_{}, got {} and {}",
            up_to.saturating_sub(1),
            a.len(),
            b.len()
        )));
    }
    let mut out = vec![MonicPolynomial::one()];
    for k in 0..up_to {
        let mut next = out[k].mul_linear(a[k]);
        if k >= 1 {
            next = next.sub_lower(&out[k - 1].as_poly().scale(b[k]))?;
        }
        out.push(next);
    }
    Ok(out)
}

/// `(X - alpha) Q_k - beta Q_{k-1}` built from the same sequence.
pub fn modified_next(
    q: &[MonicPolynomial],
    k: usize,
    alpha: f64,
    beta: f64,
) -> Result<MonicPolynomial> {
    let mut p = q[k].mul_linear(alpha);
    if k >= 1 {
        p = p.sub_lower(&q[k - 1].as_poly().scale(beta))?;
    }
    Ok(p)
}

/// Eigenvalues (ascending) and squared first eigenvector components of the
/// Jacobi matrix with diagonal `diag` and off-diagonals `sqrt(offdiag_sq)`.
pub fn jacobi_eigen(diag: &[f64], offdiag_sq: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty Jacobi matrix".into()));
    }
    if offdiag_sq.len() != n - 1 {
        return Err(Error::InvalidInput(format!(
            "a {n}x{n} Jacobi matrix needs {} off-diagonal entries, got {}",
            n - 1,
            offdiag_sq.len()
        )));
    }
    if let Some(i) = offdiag_sq.iter().position(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "off-diagonal weight {} = {} must be positive",
            i + 1,
            offdiag_sq[i]
        )));
    }
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite diagonal entry".into()));
    }
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = diag[i];
    }
    for i in 0..n - 1 {
        let s = offdiag_sq[i].sqrt();
        t[(i, i + 1)] = s;
        t[(i + 1, i)] = s;
    }
    let eig = SymmetricEigen::new(t);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let first = idx
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i);
            v[0] * v[0] / v.norm_squared()
        })
        .collect();
    Ok((values, first))
}

/// Sorted roots of the monic polynomial generated by the recursion with
/// diagonal `a` and off-diagonal weights `b` (`b[i]` couples rows `i` and `i+1`).
pub fn jacobi_roots(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    jacobi_eigen(a, b).map(|(v, _)| v)
}

/// `n`-point Gauss rule of the functional with recurrence `rc`: nodes are the
/// zeros of `Q_n`, weights `b_0 * v_0^2` (Golub-Welsch).
pub fn gauss_rule(rc: &RecurrenceCoefficients, n: usize) -> Result<Quadrature> {
    if n == 0 || rc.a().len() < n || rc.b().len() < n {
        return Err(Error::InvalidInput(format!(
            "an {n}-point rule needs a_0..a_{{n-1}} and b_0..b_{{n-1}}"
        )));
    }
    let (nodes, first) = jacobi_eigen(&rc.a()[..n], &rc.b()[1..n])?;
    let b0 = rc.b()[0];
    Ok(Quadrature {
        nodes,
        weights: first.into_iter().map(|v| b0 * v).collect(),
    })
}

/// Gauss quadrature reproducing `M_0..M_{2n-1}` of an even-length vector.
pub fn gauss_quadrature(m: &MomentVector) -> Result<Quadrature> {
    if !m.len().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "Gauss quadrature needs an even number of moments, got {}",
            m.len()
        )));
    }
    let rc = moments_to_recurrence(m)?;
    gauss_rule(&rc, m.len() / 2)
}

/// `outer_0 < inner_0 < outer_1 < ... < inner_{k-1} < outer_k`.
pub fn check_interlacing(inner: &[f64], outer: &[f64]) -> Result<bool> {
    if outer.len() != inner.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "interlacing needs |outer| = |inner| + 1, got {} and {}",
            outer.len(),
            inner.len()
        )));
    }
    Ok(inner
        .iter()
        .enumerate()
        .all(|(i, x)| outer[i] < *x && *x < outer[i + 1]))
}

/// Merges two interlacing root sets into `(outer_0, inner_0, outer_1, ...)`.
pub fn merge_interlaced(inner: &[f64], outer: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inner.len() + outer.len());
    for i in 0..outer.len() {
        out.push(outer[i]);
        if i < inner.len() {
            out.push(inner[i]);
        }
    }
    out
}

/// Polishes a root of `p` with a few Newton steps; used to cross-check
/// eigenvalue-based roots against the coefficient form.
pub fn newton_polish(p: &Polynomial, x0: f64, steps: usize) -> f64 {
    let dp = p.derivative();
    let mut x = x0;
    for _ in 0..steps {
        let d = dp.eval(x);
        if d == 0.0 {
            break;
        }
        let next = x - p.eval(x) / d;
        if !next.is_finite() {
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rc(a: &[f64], b: &[f64]) -> RecurrenceCoefficients {
        RecurrenceCoefficients::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn hermite_polynomials() {
        let q = build_polynomials(&rc(&[0.0, 0.0, 0.0], &[1.0, 1.0, 2.0]), 3).unwrap();
        assert_eq!(q[1].coeffs(), &[0.0, 1.0]);
        assert_eq!(q[2].coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(q[3].coeffs(), &[0.0, -3.0, 0.0, 1.0]);

        let q = build_polynomials(&rc(&[0.4], &[1.0]), 1).unwrap();
        assert_eq!(q[1].coeffs(), &[-0.4, 1.0]);

        assert!(build_polynomials(&rc(&[0.0], &[1.0]), 2).is_err());
    }

    #[test]
    fn jacobi_root_examples() {
        let r = jacobi_roots(&[0.0, 0.0], &[1.0]).unwrap();
        assert_relative_eq!(r[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-15);

        let r = jacobi_roots(&[0.0, 0.0, 0.0], &[1.0, 2.0]).unwrap();
        let s3 = 3.0_f64.sqrt();
        assert_relative_eq!(r[0], -s3, epsilon = 1e-14);
        assert!(r[1].abs() < 1e-14);
        assert_relative_eq!(r[2], s3, epsilon = 1e-14);

        let (u, t) = (1.5, 0.49);
        let r = jacobi_roots(&[u, u], &[t]).unwrap();
        assert_relative_eq!(r[0], u - 0.7, epsilon = 1e-14);
        assert_relative_eq!(r[1], u + 0.7, epsilon = 1e-14);

        assert!(matches!(
            jacobi_roots(&[0.0, 0.0], &[0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            jacobi_roots(&[0.0, 0.0], &[-1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gauss_examples() {
        let q = gauss_quadrature(&MomentVector::new(vec![1.0, 0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(q.nodes[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(q.nodes[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(q.weights[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(q.weights[1], 0.5, epsilon = 1e-15);

        let q = gauss_quadrature(&MomentVector::new(vec![2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(q.nodes, vec![1.5]);
        assert_eq!(q.weights, vec![2.0]);

        let q = gauss_quadrature(&MomentVector::new(vec![1.0, 0.0, 1.0, 0.0, 3.0, 0.0]).unwrap())
            .unwrap();
        let s3 = 3.0_f64.sqrt();
        for (x, e) in q.nodes.iter().zip([-s3, 0.0, s3]) {
            assert!((x - e).abs() < 1e-14);
        }
        for (w, e) in q.weights.iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert_relative_eq!(*w, e, max_relative = 1e-13);
        }
        assert!(gauss_quadrature(&MomentVector::new(vec![1.0, 0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn interlacing_examples() {
        let s3 = 3.0_f64.sqrt();
        let s6 = 6.0_f64.sqrt();
        assert!(check_interlacing(&[0.0], &[-s3, s3]).unwrap());
        assert!(check_interlacing(&[-1.0, 1.0], &[-s6, 0.0, s6]).unwrap());
        assert!(!check_interlacing(&[0.0], &[0.0, 1.0]).unwrap());
        assert!(check_interlacing(&[0.0], &[1.0]).is_err());
        assert_eq!(merge_interlaced(&[0.0], &[-1.0, 1.0]), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn separation_flags_clusters() {
        let s = root_separation(&[-1.0, 0.0, 1e-9, 1.0]);
        assert!(s.near_degenerate);
        assert!(!root_separation(&[-1.0, 0.0, 1.0]).near_degenerate);
    }

    #[test]
    fn quadrature_moments() {
        let q = Quadrature {
            nodes: vec![-1.0, 2.0],
            weights: vec![0.5, 0.25],
        };
        assert_eq!(q.moments(3), vec![0.75, 0.0, 1.5]);
        assert_eq!(q.power_sum(2), 1.5);
        assert!(q.is_valid());
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, r#"{"nodes":[-1.0,2.0],"weights":[0.5,0.25]}"#);
    }
}
