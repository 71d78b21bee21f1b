//! Moment closures, the characteristic polynomial of the closed system, its
//! spectrum and reconstruction weights, and affine-invariance checks.
//!
//! A closure maps `(M_0..M_N)` to `M_{N+1}`. The closed system's coefficient
//! matrix is a companion matrix whose last row is `-c_j = dM_{N+1}/dM_j`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moment_algebra::{
    affine_transform, expand_moments, moments_to_recurrence, recurrence_with_diagnostics,
    MomentVector, RecurrenceCoefficients, DEFAULT_REALIZABILITY_TOL,
};
use crate::orthopoly::{
    build_from_slices, check_interlacing, jacobi_eigen, merge_interlaced, modified_next,
    root_separation, RootSeparation,
};
use crate::poly::MonicPolynomial;
use crate::vandermonde::solve_power_system;

/// Tolerance on the finite-difference residual of `<dG/dM> = 0`.
pub const POLYNOMIAL_CLOSURE_TOL: f64 = 1e-6;

/// Maps a moment vector of length `N+1` to a monic polynomial `G` of degree `N+1`.
pub type PolynomialBuilder = Arc<dyn Fn(&MomentVector) -> Result<MonicPolynomial> + Send + Sync>;

/// Closure defined by `<G(X; M)> = 0`, i.e. `M_{N+1} = -sum_k g_k M_k`.
#[derive(Clone)]
pub struct PolynomialClosure {
    pub name: String,
    pub builder: PolynomialBuilder,
}

impl PolynomialClosure {
    pub fn new(
        name: impl Into<String>,
        builder: impl Fn(&MomentVector) -> Result<MonicPolynomial> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            builder: Arc::new(builder),
        }
    }
}

impl fmt::Debug for PolynomialClosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolynomialClosure")
            .field("name", &self.name)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum ClosureSpec {
    /// `n`-point Gauss reconstruction of `(M_0..M_{2n-1})`; closes `M_2n`.
    Qmom,
    /// Closes `M_{2n+1}` of `(M_0..M_2n)` by `a_n = (gamma/n) sum_{k<n} a_k`.
    HyQmom {
        gamma: f64,
    },
    Polynomial(PolynomialClosure),
    /// `M_2n = <X^2n - Q_n^2 + Q_{n-1}^2>` on `(M_0..M_{2n-1})`.
    NewClosure,
}

impl ClosureSpec {
    pub fn hyqmom(gamma: f64) -> Self {
        Self::HyQmom { gamma }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Qmom => "qmom".into(),
            Self::HyQmom { gamma } => format!("hyqmom(gamma={gamma})"),
            Self::Polynomial(p) => format!("polynomial({})", p.name),
            Self::NewClosure => "new".into(),
        }
    }
}

fn half_order(m: &MomentVector, odd: bool, what: &str) -> Result<usize> {
    let len = m.len();
    match (odd, len % 2) {
        (true, 1) if len >= 3 => Ok((len - 1) / 2),
        (false, 0) => Ok(len / 2),
        _ => Err(Error::InvalidInput(format!(
            "{what} needs an {} number of moments{}, got {len}",
            if odd { "odd" } else { "even" },
            if odd { " (at least 3)" } else { "" }
        ))),
    }
}

fn check_gamma(gamma: f64, n: usize) -> Result<()> {
    if !(gamma.is_finite() && gamma > -2.0 * n as f64) {
        return Err(Error::Domain(format!(
            "gamma = {gamma} must exceed -2n = {}",
            -2.0 * n as f64
        )));
    }
    Ok(())
}

/// The `a_n` prescribed by the hyperbolic closure.
pub fn hyqmom_next_a(rc: &RecurrenceCoefficients, gamma: f64) -> f64 {
    let n = rc.a().len();
    gamma / n as f64 * rc.a().iter().sum::<f64>()
}

/// Boundary closure: the `M_2n` that makes `<Q_n^2>` vanish.
pub fn close_qmom(m: &MomentVector) -> Result<f64> {
    let n = half_order(m, false, "QMOM")?;
    let rc = moments_to_recurrence(m)?;
    let mut b = rc.b().to_vec();
    b.push(0.0);
    Ok(expand_moments(rc.a(), &b, 2 * n + 1)[2 * n])
}

/// `M_{2n+1}` whose induced `a_n` is `(gamma/n) sum_{k<n} a_k`.
pub fn close_hyqmom(m: &MomentVector, gamma: f64) -> Result<f64> {
    let n = half_order(m, true, "HyQMOM")?;
    check_gamma(gamma, n)?;
    let rc = moments_to_recurrence(m)?;
    let rc = rc.with_next_a(hyqmom_next_a(&rc, gamma))?;
    Ok(expand_moments(rc.a(), rc.b(), 2 * n + 2)[2 * n + 1])
}

/// QMOM value plus `<Q_{n-1}^2>`; equivalently the next recurrence
/// coefficient is set to `b_n = 1`.
pub fn close_new(m: &MomentVector) -> Result<f64> {
    let n = half_order(m, false, "the difference-of-squares closure")?;
    let rc = moments_to_recurrence(m)?;
    let mut b = rc.b().to_vec();
    b.push(1.0);
    Ok(expand_moments(rc.a(), &b, 2 * n + 1)[2 * n])
}

fn close_polynomial(m: &MomentVector, p: &PolynomialClosure) -> Result<f64> {
    let g = build_g(m, p)?;
    Ok(-(0..m.len()).map(|k| g.coeff(k) * m.get(k)).sum::<f64>())
}

fn build_g(m: &MomentVector, p: &PolynomialClosure) -> Result<MonicPolynomial> {
    let g = (p.builder)(m)?;
    if g.degree() != m.len() {
        return Err(Error::InvalidInput(format!(
            "closure polynomial '{}' has degree {}, expected {}",
            p.name,
            g.degree(),
            m.len()
        )));
    }
    Ok(g)
}

/// `M_{N+1}` for the given closure.
pub fn close(m: &MomentVector, spec: &ClosureSpec) -> Result<f64> {
    match spec {
        ClosureSpec::Qmom => close_qmom(m),
        ClosureSpec::HyQmom { gamma } => close_hyqmom(m, *gamma),
        ClosureSpec::Polynomial(p) => close_polynomial(m, p),
        ClosureSpec::NewClosure => close_new(m),
    }
}

/// `m` with the closed moment appended.
pub fn augment(m: &MomentVector, spec: &ClosureSpec) -> Result<MomentVector> {
    m.augmented(close(m, spec)?)
}

/// How the characteristic polynomial splits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Factorization {
    /// `F = Q_n R_{n+1}`, `R_{n+1} = (X - a_n) Q_n - coupling Q_{n-1}`.
    OrthogonalTimesModified {
        qn: MonicPolynomial,
        rn1: MonicPolynomial,
        a_next: f64,
        coupling: f64,
    },
    /// `F = Q_n^2`.
    Square { qn: MonicPolynomial },
    /// `F = (Q_n - Q_{n-1})(Q_n + Q_{n-1})`.
    DifferenceOfSquares {
        minus: MonicPolynomial,
        plus: MonicPolynomial,
    },
    /// A user-supplied `G`, validated but not factored.
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicPolynomial {
    pub polynomial: MonicPolynomial,
    pub factorization: Factorization,
}

impl CharacteristicPolynomial {
    /// `c_0..c_{N+1}`.
    pub fn coefficients(&self) -> Vec<f64> {
        let d = self.polynomial.degree();
        (0..=d).map(|j| self.polynomial.coeff(j)).collect()
    }
}

struct HyQmomParts {
    rc: RecurrenceCoefficients,
    a_next: f64,
    coupling: f64,
    q: Vec<MonicPolynomial>,
}

fn hyqmom_parts(m: &MomentVector, gamma: f64) -> Result<HyQmomParts> {
    hyqmom_parts_tol(m, gamma, DEFAULT_REALIZABILITY_TOL)
}

fn hyqmom_parts_tol(m: &MomentVector, gamma: f64, tol: f64) -> Result<HyQmomParts> {
    let n = half_order(m, true, "HyQMOM")?;
    check_gamma(gamma, n)?;
    let (rc, _) = recurrence_with_diagnostics(m, tol)?;
    let a_next = hyqmom_next_a(&rc, gamma);
    let coupling = (2.0 * n as f64 + gamma) / n as f64 * rc.b()[n];
    let q = build_from_slices(rc.a(), rc.b(), n)?;
    Ok(HyQmomParts {
        rc,
        a_next,
        coupling,
        q,
    })
}

/// Characteristic polynomial `F(X; M) = sum_j c_j X^j` of the closed system.
///
/// For a polynomial closure the supplied `G` is returned only after checking
/// `<dG/dM_i> = 0` by central differences, since otherwise `G` is not the
/// characteristic polynomial.
pub fn characteristic_polynomial(
    m: &MomentVector,
    spec: &ClosureSpec,
) -> Result<CharacteristicPolynomial> {
    match spec {
        ClosureSpec::HyQmom { gamma } => {
            let p = hyqmom_parts(m, *gamma)?;
            let n = p.q.len() - 1;
            let rn1 = modified_next(&p.q, n, p.a_next, p.coupling)?;
            Ok(CharacteristicPolynomial {
                polynomial: p.q[n].mul(&rn1),
                factorization: Factorization::OrthogonalTimesModified {
                    qn: p.q[n].clone(),
                    rn1,
                    a_next: p.a_next,
                    coupling: p.coupling,
                },
            })
        }
        ClosureSpec::Qmom => {
            let n = half_order(m, false, "QMOM")?;
            let rc = moments_to_recurrence(m)?;
            let q = build_from_slices(rc.a(), rc.b(), n)?;
            Ok(CharacteristicPolynomial {
                polynomial: q[n].mul(&q[n]),
                factorization: Factorization::Square { qn: q[n].clone() },
            })
        }
        ClosureSpec::NewClosure => {
            let n = half_order(m, false, "the difference-of-squares closure")?;
            let rc = moments_to_recurrence(m)?;
            let q = build_from_slices(rc.a(), rc.b(), n)?;
            let minus = q[n].sub_lower(q[n - 1].as_poly())?;
            let plus = q[n].add_lower(q[n - 1].as_poly())?;
            Ok(CharacteristicPolynomial {
                polynomial: minus.mul(&plus),
                factorization: Factorization::DifferenceOfSquares { minus, plus },
            })
        }
        ClosureSpec::Polynomial(p) => {
            let g = build_g(m, p)?;
            let residuals = polynomial_closure_residuals(m, p)?;
            if let Some((index, r)) = residuals
                .iter()
                .copied()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(&y.1))
            {
                if r > POLYNOMIAL_CLOSURE_TOL {
                    return Err(Error::InconsistentClosure {
                        index,
                        residual: r,
                        tolerance: POLYNOMIAL_CLOSURE_TOL,
                    });
                }
            }
            Ok(CharacteristicPolynomial {
                polynomial: g,
                factorization: Factorization::Opaque,
            })
        }
    }
}

/// Relative size of `<dG/dM_i> = sum_j (dg_j/dM_i) M_j` for each `i`, by
/// central differences, normalized by `sum_j |dg_j/dM_i M_j|`.
pub fn polynomial_closure_residuals(m: &MomentVector, p: &PolynomialClosure) -> Result<Vec<f64>> {
    let len = m.len();
    let spread = if len > 2 {
        (m.get(2).abs() / m.get(0).abs()).sqrt()
    } else {
        1.0
    }
    .max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let scale = m.get(i).abs().max(m.get(0).abs() * spread.powi(i as i32));
        let mut h = 1e-4 * scale;
        let mut done = None;
        for _ in 0..20 {
            let mut plus = m.values().to_vec();
            let mut minus = m.values().to_vec();
            plus[i] += h;
            minus[i] -= h;
            let gp = MomentVector::new(plus).and_then(|v| build_g(&v, p));
            let gm = MomentVector::new(minus).and_then(|v| build_g(&v, p));
            if let (Ok(gp), Ok(gm)) = (gp, gm) {
                done = Some((gp, gm));
                break;
            }
            h *= 0.5;
        }
        let (gp, gm) = done.ok_or_else(|| {
            Error::InvalidInput(format!(
                "closure polynomial undefined near M (perturbing M_{i})"
            ))
        })?;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..len {
            let d = (gp.coeff(j) - gm.coeff(j)) / (2.0 * h) * m.get(j);
            num += d;
            den += d.abs();
        }
        out.push(if den == 0.0 { 0.0 } else { num.abs() / den });
    }
    Ok(out)
}

/// Companion-form coefficient matrix: `A[k][k+1] = 1`, last row `-c_0..-c_N`.
pub fn jacobian_matrix(m: &MomentVector, spec: &ClosureSpec) -> Result<DMatrix<f64>> {
    Ok(companion(&characteristic_polynomial(m, spec)?.polynomial))
}

pub fn companion(f: &MonicPolynomial) -> DMatrix<f64> {
    let d = f.degree();
    let mut a = DMatrix::zeros(d, d);
    for k in 0..d.saturating_sub(1) {
        a[(k, k + 1)] = 1.0;
    }
    for j in 0..d {
        a[(d - 1, j)] = -f.coeff(j);
    }
    a
}

/// Eigenvalues, reconstruction weights and characteristic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDecomposition {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub factors: BTreeMap<String, MonicPolynomial>,
    pub diagnostics: SpectralDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDiagnostics {
    pub interlaced: bool,
    pub separation: RootSeparation,
    pub weights_positive: bool,
    /// False when the closure gives no positivity guarantee (e.g. `gamma <= -n`).
    pub positivity_expected: bool,
    /// `max_k |sum_i omega_i lambda_i^k - M_k| / max(|M_k|, sum_i |omega_i| |lambda_i|^k)`.
    pub moment_residual: f64,
}

/// Relative moment-reproduction error of a weighted node set.
pub fn reproduction_residual(nodes: &[f64], weights: &[f64], m: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for (k, mk) in m.iter().enumerate() {
        let mut s = 0.0;
        let mut a = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let p = x.powi(k as i32);
            s += w * p;
            a += w.abs() * p.abs();
        }
        let scale = mk.abs().max(a);
        if scale > 0.0 {
            worst = worst.max((s - mk).abs() / scale);
        }
    }
    worst
}

/// Eigenvalues and weights with `sum_i omega_i lambda_i^k = M_k`, `k <= N`.
///
/// Hyperbolic QMOM: eigenvalues are the zeros of `Q_n` and `R_{n+1}`, which
/// interlace; weights combine the Gauss rules of both factors as
/// `(n+gamma)/(2n+gamma) w'` and `n/(2n+gamma) w''`. For `gamma <= -n` the
/// first factor is non-positive and positivity is reported, not enforced.
///
/// Difference-of-squares closure: eigenvalues from the two factors, weights
/// by a Vandermonde solve.
pub fn spectral_decomposition(
    m: &MomentVector,
    spec: &ClosureSpec,
) -> Result<SpectralDecomposition> {
    spectral_decomposition_with_tol(m, spec, DEFAULT_REALIZABILITY_TOL)
}

/// [`spectral_decomposition`] with an explicit Hankel pivot tolerance
/// (pivots must exceed `tol * M_0`).
pub fn spectral_decomposition_with_tol(
    m: &MomentVector,
    spec: &ClosureSpec,
    tol: f64,
) -> Result<SpectralDecomposition> {
    match spec {
        ClosureSpec::HyQmom { gamma } => hyqmom_spectrum(m, *gamma, tol),
        ClosureSpec::NewClosure => new_closure_spectrum(m, tol),
        ClosureSpec::Qmom => Err(Error::Unsupported(
            "QMOM has repeated eigenvalues; no spectral decomposition".into(),
        )),
        ClosureSpec::Polynomial(_) => Err(Error::Unsupported(
            "spectral decomposition of an arbitrary polynomial closure".into(),
        )),
    }
}

fn hyqmom_spectrum(m: &MomentVector, gamma: f64, tol: f64) -> Result<SpectralDecomposition> {
    let p = hyqmom_parts_tol(m, gamma, tol)?;
    let n = p.q.len() - 1;
    let nf = n as f64;
    let a = p.rc.a();
    let b = p.rc.b();
    let b0 = b[0];

    let (q_roots, q_first) = jacobi_eigen(a, &b[1..n])?;
    let mut r_diag = a.to_vec();
    r_diag.push(p.a_next);
    let mut r_off = b[1..n].to_vec();
    r_off.push(p.coupling);
    let (r_roots, r_first) = jacobi_eigen(&r_diag, &r_off)?;

    let interlaced = check_interlacing(&q_roots, &r_roots)?;
    if !interlaced {
        return Err(Error::InternalConsistency(format!(
            "roots of Q_n {q_roots:?} and R_(n+1) {r_roots:?} do not interlace"
        )));
    }
    let lambda = merge_interlaced(&q_roots, &r_roots);

    let f_inner = (nf + gamma) / (2.0 * nf + gamma);
    let f_outer = nf / (2.0 * nf + gamma);
    let mut omega = Vec::with_capacity(2 * n + 1);
    for i in 0..=n {
        omega.push(f_outer * b0 * r_first[i]);
        if i < n {
            omega.push(f_inner * b0 * q_first[i]);
        }
    }
    let positivity_expected = gamma > -nf;
    let weights_positive = omega.iter().all(|w| *w > 0.0);
    if positivity_expected && !weights_positive {
        return Err(Error::InternalConsistency(format!(
            "non-positive reconstruction weight in {omega:?}"
        )));
    }

    let qn = p.q[n].clone();
    let rn1 = modified_next(&p.q, n, p.a_next, p.coupling)?;
    let f = qn.mul(&rn1);
    let mut factors = BTreeMap::new();
    factors.insert("Qn".to_string(), qn);
    factors.insert("Rn1".to_string(), rn1);

    Ok(SpectralDecomposition {
        c: (0..=f.degree()).map(|j| f.coeff(j)).collect(),
        diagnostics: SpectralDiagnostics {
            interlaced,
            separation: root_separation(&lambda),
            weights_positive,
            positivity_expected,
            moment_residual: reproduction_residual(&lambda, &omega, m.values()),
        },
        lambda,
        omega,
        factors,
    })
}

fn new_closure_spectrum(m: &MomentVector, tol: f64) -> Result<SpectralDecomposition> {
    let n = half_order(m, false, "the difference-of-squares closure")?;
    let (rc, _) = recurrence_with_diagnostics(m, tol)?;
    let a = rc.a();
    let off = &rc.b()[1..n];
    let mut minus_diag = a.to_vec();
    minus_diag[n - 1] += 1.0;
    let mut plus_diag = a.to_vec();
    plus_diag[n - 1] -= 1.0;
    let (minus_roots, _) = jacobi_eigen(&minus_diag, off)?;
    let (plus_roots, _) = jacobi_eigen(&plus_diag, off)?;
    let mut lambda: Vec<f64> = minus_roots.iter().chain(&plus_roots).copied().collect();
    lambda.sort_by(f64::total_cmp);
    let omega = solve_power_system(&lambda, m.values())?;
    let cp = characteristic_polynomial(m, &ClosureSpec::NewClosure)?;
    let mut factors = BTreeMap::new();
    if let Factorization::DifferenceOfSquares { minus, plus } = cp.factorization.clone() {
        factors.insert("QnMinusQn1".to_string(), minus);
        factors.insert("QnPlusQn1".to_string(), plus);
    }
    Ok(SpectralDecomposition {
        c: cp.coefficients(),
        diagnostics: SpectralDiagnostics {
            interlaced: false,
            separation: root_separation(&lambda),
            weights_positive: omega.iter().all(|w| *w > 0.0),
            positivity_expected: false,
            moment_residual: reproduction_residual(&lambda, &omega, m.values()),
        },
        lambda,
        omega,
        factors,
    })
}

/// `|close(S m) - [S (m, close(m))]_{N+1}|`, relative to `Mbar_0 s^{N+1}`
/// with `s = sqrt(Mbar_2 / Mbar_0)` the root-mean-square speed of `S m`.
pub fn verify_affine_invariance(
    m: &MomentVector,
    spec: &ClosureSpec,
    shift: f64,
    scale: f64,
) -> Result<f64> {
    let transformed = affine_transform(m, shift, scale)?;
    let closed_after = close(&transformed, spec)?;
    let closed_before = affine_transform(&augment(m, spec)?, shift, scale)?;
    let top = closed_before.order();
    let diff = (closed_after - closed_before.get(top)).abs();
    let m0 = transformed.get(0);
    let speed = if transformed.len() > 2 {
        (transformed.get(2) / m0).abs().sqrt()
    } else {
        (transformed.get(1) / m0).abs()
    };
    let norm = m0.abs() * speed.powi(top as i32);
    Ok(if norm > 0.0 { diff / norm } else { diff })
}
