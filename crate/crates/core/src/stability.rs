//! Numerical check of the structural stability condition for the
//! hyperbolic QMOM system (closure parameter 1) at equilibrium states.
//!
//! Three conditions are checked at a Maxwellian state `rho * Delta(U, theta)`:
//! the source Jacobian is block-diagonalizable with a `-I` relaxing block
//! (Condition I), `A_0 = L^T D L` symmetrizes the coefficient matrix
//! (Condition II), and `K = P^{-T} A_0 P^{-1}` is block diagonal with `A_0`
//! positive definite (Condition III). `L` has rows `(F_k(lambda_i))_k`, the
//! Horner tails of the characteristic polynomial evaluated at its roots.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::closure::companion;
use crate::error::{Error, Result};
use crate::moment_algebra::{gaussian_moment_u_derivative, gaussian_moments, EquilibriumState};
use crate::orthopoly::{build_from_slices, jacobi_eigen, merge_interlaced, modified_next};
use crate::poly::{MonicPolynomial, Polynomial};
use crate::vandermonde::solve_power_system;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityTolerances {
    /// `||A_0 A - A^T A_0||_F / ||A_0||_F`.
    pub symmetrizer: f64,
    /// `||K_offblock||_F / ||K||_F`.
    pub off_block: f64,
    /// `||S P^{-1} - P^{-1} diag(0, -I)||_F / ||P^{-1}||_F`.
    pub condition_one: f64,
    /// Smallest eigenvalue of `A_0` must exceed this times `||A_0||_2`.
    pub spd: f64,
}

impl Default for StabilityTolerances {
    fn default() -> Self {
        Self {
            symmetrizer: 1e-8,
            off_block: 1e-8,
            condition_one: 1e-9,
            spd: 1e-12,
        }
    }
}

/// Characteristic polynomial at an equilibrium state, `Q_n R_{n+1}` with
/// `a_k = U`, `b_k = k theta`, `a_n = gamma U` and coupling `(2n+gamma) theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSpectrum {
    pub polynomial: MonicPolynomial,
    pub qn: MonicPolynomial,
    pub rn1: MonicPolynomial,
    /// Merged roots `(r_0, q_0, r_1, ..., r_n)`.
    pub eigenvalues: Vec<f64>,
}

pub fn equilibrium_spectrum(
    state: &EquilibriumState,
    n: usize,
    gamma: f64,
) -> Result<EquilibriumSpectrum> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let nf = n as f64;
    if !(gamma > -2.0 * nf) {
        return Err(Error::Domain(format!("gamma = {gamma} must exceed -2n")));
    }
    let u = state.velocity;
    let theta = state.theta;
    let a = vec![u; n];
    let b: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { state.rho } else { k as f64 * theta })
        .collect();
    let q = build_from_slices(&a, &b, n)?;
    let a_next = gamma * u;
    let coupling = (2.0 * nf + gamma) * theta;
    let rn1 = modified_next(&q, n, a_next, coupling)?;
    let (q_roots, _) = jacobi_eigen(&a, &b[1..n])?;
    let mut r_diag = a.clone();
    r_diag.push(a_next);
    let mut r_off = b[1..n].to_vec();
    r_off.push(coupling);
    let (r_roots, _) = jacobi_eigen(&r_diag, &r_off)?;
    Ok(EquilibriumSpectrum {
        polynomial: q[n].mul(&rn1),
        qn: q[n].clone(),
        rn1,
        eigenvalues: merge_interlaced(&q_roots, &r_roots),
    })
}

/// `F_0..F_N` (Horner tails of `F`) and `h_0, h_1, h_2` with
/// `h_j = sum_k F_k d^j/dU^j Delta_k(U, theta)`, of degree `N - j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPolynomials {
    pub f: Vec<Polynomial>,
    pub h: Vec<Polynomial>,
}

pub fn tail_polynomials(state: &EquilibriumState, n: usize) -> Result<TailPolynomials> {
    tails_for(state, n, 1.0)
}

fn tails_for(state: &EquilibriumState, n: usize, gamma: f64) -> Result<TailPolynomials> {
    let spec = equilibrium_spectrum(state, n, gamma)?;
    let f = spec.polynomial.tails();
    let big_n = 2 * n;
    let mut h = Vec::with_capacity(3);
    for j in 0..3 {
        let mut acc = Polynomial::zero();
        for (k, fk) in f.iter().enumerate().take(big_n + 1) {
            let d = gaussian_moment_u_derivative(k, j, state.velocity, state.theta)?;
            if d != 0.0 {
                acc = acc.add(&fk.scale(d));
            }
        }
        // the k > N - j terms vanish identically; drop their rounding residue
        let mut c = acc.coeffs().to_vec();
        c.truncate(big_n - j.min(big_n) + 1);
        h.push(Polynomial::new(c));
    }
    Ok(TailPolynomials { f, h })
}

/// Source Jacobian `S_M` of the BGK relaxation `rho Delta_k(U, theta) - M_k`
/// and the matrix `P^{-1}` that block-diagonalizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceJacobian {
    pub s: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
    /// `||S P^{-1} - P^{-1} diag(0_3, -I)||_F / ||P^{-1}||_F`.
    pub residual: f64,
}

/// `d(M_0, M_1, M_2)/d(rho, U, theta)`.
fn primitive_jacobian(state: &EquilibriumState) -> DMatrix<f64> {
    let (rho, u, t) = (state.rho, state.velocity, state.theta);
    DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, 0.0, u, rho, 0.0, u * u + t, 2.0 * rho * u, rho],
    )
}

/// Rows `(Delta_k, rho dDelta_k/dU, (rho/2) d^2Delta_k/dU^2)` for `k = 0..=big_n`.
fn equilibrium_tangents(state: &EquilibriumState, big_n: usize) -> Result<DMatrix<f64>> {
    let (rho, u, t) = (state.rho, state.velocity, state.theta);
    let d = gaussian_moments(big_n + 1, u, t)?;
    let mut g = DMatrix::zeros(big_n + 1, 3);
    for k in 0..=big_n {
        g[(k, 0)] = d[k];
        g[(k, 1)] = rho * gaussian_moment_u_derivative(k, 1, u, t)?;
        g[(k, 2)] = 0.5 * rho * gaussian_moment_u_derivative(k, 2, u, t)?;
    }
    Ok(g)
}

pub fn source_jacobian(state: &EquilibriumState, n: usize) -> Result<SourceJacobian> {
    if n < 2 {
        return Err(Error::Unsupported(
            "n < 2 has no relaxing block; Conditions I and III hold trivially".into(),
        ));
    }
    let big_n = 2 * n;
    let dim = big_n + 1;
    let y = primitive_jacobian(state);
    let y_inv = y
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular primitive-variable Jacobian".into()))?;
    let g = equilibrium_tangents(state, big_n)?;
    let s_hat = g.rows(3, dim - 3) * &y_inv;

    let mut s = DMatrix::zeros(dim, dim);
    let mut p_inv = DMatrix::zeros(dim, dim);
    for k in 3..dim {
        for j in 0..3 {
            s[(k, j)] = s_hat[(k - 3, j)];
        }
        s[(k, k)] = -1.0;
        p_inv[(k, k)] = 1.0;
    }
    for k in 0..dim {
        for j in 0..3 {
            p_inv[(k, j)] = g[(k, j)];
        }
    }
    let mut target = DMatrix::zeros(dim, dim);
    for k in 3..dim {
        target[(k, k)] = -1.0;
    }
    let residual = (&s * &p_inv - &p_inv * target).norm() / p_inv.norm();
    Ok(SourceJacobian { s, p_inv, residual })
}

/// Targets `p_k = Delta_k(0,1)` for `k < 2n` and `p_2n = Delta_2n + (n-1)!`.
pub fn symmetrizer_targets(n: usize) -> Vec<f64> {
    let mut p = gaussian_moments(2 * n + 1, 0.0, 1.0).expect("unit variance");
    let fact: f64 = (1..n).map(|i| i as f64).product();
    p[2 * n] += fact;
    p
}

/// Standard-state eigenvalues `lambda_hat` and weights with
/// `sum_i omega_i lambda_hat_i^k = p_k`, `k = 0..2n`.
pub fn symmetrizer_weights(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let spec = equilibrium_spectrum(&EquilibriumState::standard(), n, 1.0)?;
    let omega = solve_power_system(&spec.eigenvalues, &symmetrizer_targets(n))?;
    if let Some(i) = omega.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::InternalConsistency(format!(
            "symmetrizer weight {i} = {} is not positive",
            omega[i]
        )));
    }
    Ok((spec.eigenvalues, omega))
}

/// The same weights from two Gauss-type rules: `n/(2n+1)` times the
/// `n`-point Gauss–Hermite rule on the `Q_n` zeros, and `(n+1)/(2n+1)` times
/// the rule of the Jacobi matrix whose last off-diagonal weight is `2n+1`.
pub fn symmetrizer_weights_split(n: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    let a = vec![0.0; n + 1];
    let mut off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let (_, inner) = jacobi_eigen(&a[..n], &off)?;
    off.push(2.0 * nf + 1.0);
    let (_, outer) = jacobi_eigen(&a, &off)?;
    let inner_scale = nf / (2.0 * nf + 1.0);
    let outer_scale = (nf + 1.0) / (2.0 * nf + 1.0);
    let mut omega = Vec::with_capacity(2 * n + 1);
    for i in 0..=n {
        omega.push(outer_scale * outer[i]);
        if i < n {
            omega.push(inner_scale * inner[i]);
        }
    }
    Ok(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityResiduals {
    pub symmetrizer_asymmetry: f64,
    #[serde(rename = "K_offblock_norm")]
    pub k_offblock_norm: f64,
    #[serde(rename = "conditionI_residual")]
    pub condition_one_residual: f64,
    /// Smallest eigenvalue of `A_0` divided by `||A_0||_2`.
    pub spd_min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityChecks {
    #[serde(rename = "conditionI")]
    pub condition_one: bool,
    pub symmetric_positive_definite: bool,
    #[serde(rename = "conditionII_symmetrizer")]
    pub symmetrizer: bool,
    #[serde(rename = "conditionIII_block_diagonal")]
    pub block_diagonal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub n: usize,
    pub state: EquilibriumState,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub residuals: StabilityResiduals,
    pub checks: StabilityChecks,
    pub tolerances: StabilityTolerances,
    pub passed: bool,
}

/// All matrices assembled for a certificate; exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct StabilityMatrices {
    pub a: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub source: SourceJacobian,
    pub omega: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// `L[i][k] = F_k(lambda_i)`.
fn tail_matrix(tails: &[Polynomial], lambda: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(lambda.len(), tails.len(), |i, k| tails[k].eval(lambda[i]))
}

pub fn stability_matrices(state: &EquilibriumState, n: usize) -> Result<StabilityMatrices> {
    let source = source_jacobian(state, n)?;
    let spec = equilibrium_spectrum(state, n, 1.0)?;
    let (_, omega) = symmetrizer_weights(n)?;
    let tails = spec.polynomial.tails();
    let l = tail_matrix(&tails, &spec.eigenvalues);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(omega.clone()));
    let a0 = l.transpose() * &d * &l;
    let lp = &l * &source.p_inv;
    let k = lp.transpose() * &d * &lp;
    Ok(StabilityMatrices {
        a: companion(&spec.polynomial),
        l,
        a0,
        k,
        source,
        omega,
        eigenvalues: spec.eigenvalues,
    })
}

/// Builds `A_0 = L^T D L` with the standard-state weights and checks all
/// three conditions. A failed check is reported in the certificate, not as
/// an error.
pub fn certify(
    state: &EquilibriumState,
    n: usize,
    tol: &StabilityTolerances,
) -> Result<StabilityCertificate> {
    let mats = stability_matrices(state, n)?;
    let a0_norm = mats.a0.norm();
    let asym = (&mats.a0 * &mats.a - mats.a.transpose() * &mats.a0).norm() / a0_norm;

    let dim = mats.k.nrows();
    let off = mats.k.view((0, 3), (3, dim - 3)).norm() / mats.k.norm();

    let sym = (&mats.a0 + mats.a0.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let max_abs = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min_eig = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v)) / max_abs;

    let residuals = StabilityResiduals {
        symmetrizer_asymmetry: asym,
        k_offblock_norm: off,
        condition_one_residual: mats.source.residual,
        spd_min_eigenvalue: min_eig,
    };
    let checks = StabilityChecks {
        condition_one: mats.source.residual < tol.condition_one,
        symmetric_positive_definite: min_eig > tol.spd,
        symmetrizer: asym < tol.symmetrizer,
        block_diagonal: off < tol.off_block,
    };
    let passed = checks.condition_one
        && checks.symmetric_positive_definite
        && checks.symmetrizer
        && checks.block_diagonal
        && mats.omega.iter().all(|w| *w > 0.0);
    Ok(StabilityCertificate {
        n,
        state: *state,
        d: mats.omega,
        eigenvalues: mats.eigenvalues,
        residuals,
        checks,
        tolerances: *tol,
        passed,
    })
}

/// Standard-state identities behind the block-diagonal form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardStateIdentities {
    pub n: usize,
    /// `A[j][beta] = sum_i omega_i h_j(lambda_i) lambda_i^beta`, `beta = 0..N-1`.
    pub moments_of_h: Vec<Vec<f64>>,
    /// Scale for `moments_of_h`: `sum_i omega_i |h_j(lambda_i)| |lambda_i|^beta`.
    pub moments_of_h_scale: Vec<Vec<f64>>,
    /// `sum_l c_l Delta_l` and `sum_l c_l Delta_{l+1}`.
    pub zero_sums: [f64; 2],
    /// `max_beta |sum_k c_k p_{k+beta}|` relative to `sum_k |c_k| sum_i omega_i |lambda_i|^(k+beta)`.
    pub power_sum_residual: f64,
}

pub fn standard_state_identities(n: usize) -> Result<StandardStateIdentities> {
    let st = EquilibriumState::standard();
    let spec = equilibrium_spectrum(&st, n, 1.0)?;
    let (lambda, omega) = symmetrizer_weights(n)?;
    let tails = tails_for(&st, n, 1.0)?;
    let big_n = 2 * n;
    let mut a = vec![vec![0.0; big_n]; 3];
    let mut scale = vec![vec![0.0; big_n]; 3];
    for j in 0..3 {
        for beta in 0..big_n {
            for (x, w) in lambda.iter().zip(&omega) {
                let t = w * tails.h[j].eval(*x) * x.powi(beta as i32);
                a[j][beta] += t;
                scale[j][beta] += t.abs();
            }
        }
    }
    let c: Vec<f64> = (0..=big_n + 1).map(|j| spec.polynomial.coeff(j)).collect();
    let delta = gaussian_moments(big_n + 3, 0.0, 1.0)?;
    let s0: f64 = c.iter().enumerate().map(|(l, cl)| cl * delta[l]).sum();
    let s1: f64 = c.iter().enumerate().map(|(l, cl)| cl * delta[l + 1]).sum();

    let power = |k: usize, f: fn(f64) -> f64| -> f64 {
        lambda
            .iter()
            .zip(&omega)
            .map(|(x, w)| w * f(*x).powi(k as i32))
            .sum()
    };
    let p: Vec<f64> = (0..2 * big_n + 3).map(|k| power(k, |x| x)).collect();
    let p_abs: Vec<f64> = (0..2 * big_n + 3).map(|k| power(k, f64::abs)).collect();
    let mut worst = 0.0_f64;
    for beta in 0..=big_n {
        let mut s = 0.0;
        let mut mag = 0.0;
        for (k, ck) in c.iter().enumerate() {
            s += ck * p[k + beta];
            mag += ck.abs() * p_abs[k + beta];
        }
        worst = worst.max(s.abs() / mag);
    }
    Ok(StandardStateIdentities {
        n,
        moments_of_h: a,
        moments_of_h_scale: scale,
        zero_sums: [s0, s1],
        power_sum_residual: worst,
    })
}

/// Result of searching for a positive diagonal symmetrizer for a closure
/// parameter other than 1. No stability claim is attached to the outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetrizerProbe {
    pub n: usize,
    pub gamma: f64,
    pub state: EquilibriumState,
    /// Number of block-diagonality relations `sum_i omega_i h_j(lambda_i) lambda_i^beta = 0`.
    pub relations: usize,
    /// Dimension of their common null space (relative singular-value cutoff `1e-10`).
    pub null_dimension: usize,
    /// A null vector normalized to sum 1, when the null space is one-dimensional.
    pub candidate: Option<Vec<f64>>,
    /// Whether that candidate has all entries strictly positive.
    pub positive_candidate: bool,
    pub singular_values: Vec<f64>,
}

pub fn probe_symmetrizer(
    state: &EquilibriumState,
    n: usize,
    gamma: f64,
) -> Result<SymmetrizerProbe> {
    if n < 2 {
        return Err(Error::Unsupported("n < 2 has no relaxing block".into()));
    }
    let spec = equilibrium_spectrum(state, n, gamma)?;
    let tails = tails_for(state, n, gamma)?;
    let big_n = 2 * n;
    let lambda = &spec.eigenvalues;
    let rows = 3 * (big_n - 2);
    let cols = big_n + 1;
    let sigma = state.sigma();
    // rescaled rows keep the singular values comparable across j and beta
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..3 {
        for beta in 0..big_n - 2 {
            let r = j * (big_n - 2) + beta;
            for (i, x) in lambda.iter().enumerate() {
                let xs = (x - state.velocity) / sigma;
                let hv = tails.h[j].eval(*x) / sigma.powi((big_n - j) as i32);
                m[(r, i)] = hv * xs.powi(beta as i32);
            }
            let norm = m.row(r).norm();
            if norm > 0.0 {
                for i in 0..cols {
                    m[(r, i)] /= norm;
                }
            }
        }
    }
    // pad to at least `cols` rows so the SVD exposes the full right null space
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(&m);
        p
    } else {
        m
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let top = sv.iter().fold(0.0_f64, |a, b| a.max(*b));
    let null: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= 1e-10 * top).collect();
    let mut candidate = None;
    let mut positive = false;
    if null.len() == 1 {
        let v: Vec<f64> = v_t.row(null[0]).iter().copied().collect();
        let s: f64 = v.iter().sum();
        if s != 0.0 {
            let v: Vec<f64> = v.iter().map(|x| x / s).collect();
            positive = v.iter().all(|x| *x > 0.0);
            candidate = Some(v);
        }
    }
    let mut singular_values = sv;
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(SymmetrizerProbe {
        n,
        gamma,
        state: *state,
        relations: rows,
        null_dimension: null.len(),
        candidate,
        positive_candidate: positive,
        singular_values,
    })
}
