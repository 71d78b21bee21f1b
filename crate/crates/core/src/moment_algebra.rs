//! Realizable velocity moments and their three-term recurrence coordinates.
//!
//! A moment vector `(M_0, ..., M_N)` is strictly realizable when its Hankel
//! matrix `H[i][j] = M_{i+j}` is positive definite. Odd-length vectors
//! `(M_0..M_2n)` test `H_n`; even-length vectors `(M_0..M_2n-1)` test
//! `H_{n-1}`. Strictly realizable vectors are in bijection with recurrence
//! coefficients `(a_k, b_k)` with every `b_k > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default pivot threshold, relative to `M_0`, for realizability tests.
pub const DEFAULT_REALIZABILITY_TOL: f64 = 1e-12;

/// Largest recurrence depth handled in double precision. Vectors may carry
/// up to `2 * MAX_HALF_ORDER + 2` entries so that the augmented vector of an
/// order-`MAX_HALF_ORDER` closure is still accepted.
pub const MAX_HALF_ORDER: usize = 10;

const MAX_LEN: usize = 2 * MAX_HALF_ORDER + 2;

/// Ordered raw moments `M_0, ..., M_N`. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MomentVector(Vec<f64>);

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("moment vector is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "moment M_{i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest moment index `N`.
    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Returns `c * m`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| c * v).collect())
    }

    /// Appends one moment (e.g. a closed `M_{N+1}`).
    pub fn augmented(&self, next: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v.push(next);
        Self::new(v)
    }

    /// Drops trailing entries so that `len` moments remain.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate a length-{} vector to length {len}",
                self.len()
            )));
        }
        Ok(Self(self.0[..len].to_vec()))
    }

    /// Single CSV row, `M_0..M_N`, shortest round-trip decimals.
    pub fn to_csv_row(&self) -> String {
        self.0
            .iter()
            .map(|v| format_f64(*v))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let values = row
            .trim()
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad moment '{}': {e}", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl TryFrom<Vec<f64>> for MomentVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<MomentVector> for Vec<f64> {
    fn from(m: MomentVector) -> Self {
        m.0
    }
}

impl AsRef<[f64]> for MomentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Recurrence coefficients of the monic orthogonal polynomials
/// `Q_{k+1} = (X - a_k) Q_k - b_k Q_{k-1}`, with `b_0 = M_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl RecurrenceCoefficients {
    /// Every `b_i` must be finite and strictly positive.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if let Some(i) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("a_{i} is not finite")));
        }
        if let Some(i) = b.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "b_{i} = {} must be finite and positive",
                b[i]
            )));
        }
        Ok(Self { a, b })
    }

    /// Coefficients of the scaled Maxwellian `rho * Delta_k(U, theta)`:
    /// `a_k = U`, `b_0 = rho`, `b_k = k theta`.
    pub fn equilibrium(state: &EquilibriumState, n_a: usize, n_b: usize) -> Self {
        let a = vec![state.velocity; n_a];
        let b = (0..n_b)
            .map(|k| {
                if k == 0 {
                    state.rho
                } else {
                    k as f64 * state.theta
                }
            })
            .collect();
        Self { a, b }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Number of moments this coefficient set determines: `2n+1` when it
    /// holds `(a_0..a_{n-1}, b_0..b_n)`, `2n` for `(a_0..a_{n-1}, b_0..b_{n-1})`.
    pub fn moment_count(&self) -> usize {
        (2 * self.a.len() + 1).min(2 * self.b.len())
    }

    /// `<Q_k^2> = b_0 b_1 ... b_k`.
    pub fn norm_squared(&self, k: usize) -> f64 {
        self.b[..=k].iter().product()
    }

    /// Returns a copy with `a_n` appended.
    pub fn with_next_a(&self, a_next: f64) -> Result<Self> {
        let mut a = self.a.clone();
        a.push(a_next);
        Self::new(a, self.b.clone())
    }

    /// Returns a copy with `b_n` appended (must be positive).
    pub fn with_next_b(&self, b_next: f64) -> Result<Self> {
        let mut b = self.b.clone();
        b.push(b_next);
        Self::new(self.a.clone(), b)
    }
}

/// Hankel matrix `H[i][j] = M_{i+j}` of order `size`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    size: usize,
    moments: Vec<f64>,
}

impl HankelMatrix {
    /// The largest Hankel matrix the vector fills: `H_n` for length `2n+1`,
    /// `H_{n-1}` for length `2n`.
    pub fn from_moments(m: &MomentVector) -> Self {
        let size = m.len().div_ceil(2);
        Self {
            size,
            moments: m.values()[..2 * size - 1].to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.moments[i + j]
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.size, self.size, |i, j| self.entry(i, j))
    }

    /// Pivots of the `L D L^T` factorization, stopping at the first pivot that
    /// is not above `threshold`. The second value is that pivot's index.
    pub fn ldl_pivots(&self, threshold: f64) -> (Vec<f64>, Option<usize>) {
        let n = self.size;
        let mut l = vec![vec![0.0; n]; n];
        let mut d = Vec::with_capacity(n);
        for j in 0..n {
            let mut dj = self.entry(j, j);
            for k in 0..j {
                dj -= l[j][k] * l[j][k] * d[k];
            }
            d.push(dj);
            if !(dj > threshold) {
                return (d, Some(j));
            }
            for i in j + 1..n {
                let mut s = self.entry(i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k] * d[k];
                }
                l[i][j] = s / dj;
            }
        }
        (d, None)
    }
}

/// Outcome of a realizability test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizabilityReport {
    pub realizable: bool,
    /// Hankel pivots computed before stopping (all of them when realizable).
    pub pivots: Vec<f64>,
    pub failing_pivot: Option<usize>,
    pub threshold: f64,
}

/// Positive-definiteness test of the Hankel matrix via `L D L^T`, requiring
/// every pivot to exceed `tol * M_0`.
pub fn is_strictly_realizable(m: &MomentVector, tol: f64) -> Result<RealizabilityReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be >= 0")));
    }
    let threshold = tol * m.get(0);
    let (pivots, failing_pivot) = HankelMatrix::from_moments(m).ldl_pivots(threshold);
    Ok(RealizabilityReport {
        realizable: failing_pivot.is_none(),
        pivots,
        failing_pivot,
        threshold,
    })
}

/// `Delta_k(U, theta)`, the `k`-th moment of the normal density with mean `U`
/// and variance `theta`, from `Delta_{k+1} = U Delta_k + k theta Delta_{k-1}`.
pub fn gaussian_moment(k: usize, velocity: f64, theta: f64) -> Result<f64> {
    Ok(*gaussian_moments(k + 1, velocity, theta)?.last().unwrap())
}

/// `Delta_0 .. Delta_{count-1}` at `(U, theta)`.
pub fn gaussian_moments(count: usize, velocity: f64, theta: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta = {theta} must be positive")));
    }
    if !velocity.is_finite() {
        return Err(Error::Domain(format!("U = {velocity} must be finite")));
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let next = match k {
            0 => 1.0,
            1 => velocity,
            _ => velocity * out[k - 1] + (k - 1) as f64 * theta * out[k - 2],
        };
        out.push(next);
    }
    Ok(out)
}

/// `d^j/dU^j Delta_k(U, theta) = k!/(k-j)! Delta_{k-j}(U, theta)`, zero for `j > k`.
pub fn gaussian_moment_u_derivative(k: usize, j: usize, velocity: f64, theta: f64) -> Result<f64> {
    if j > k {
        // still validate the state
        gaussian_moments(1, velocity, theta)?;
        return Ok(0.0);
    }
    let falling: f64 = ((k - j + 1)..=k).map(|i| i as f64).product();
    Ok(falling * gaussian_moment(k - j, velocity, theta)?)
}

/// The operator `S^{[u, sigma]}`: moments of `xi -> sigma * xi + u`,
/// `Mbar_k = sum_j C(k, j) sigma^j M_j u^(k-j)`.
pub fn affine_transform(m: &MomentVector, shift: f64, scale: f64) -> Result<MomentVector> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("sigma = {scale} must be positive")));
    }
    if !shift.is_finite() {
        return Err(Error::Domain(format!("u = {shift} must be finite")));
    }
    let mv = m.values();
    let mut binom = vec![1.0_f64];
    let mut out = Vec::with_capacity(mv.len());
    for k in 0..mv.len() {
        if k > 0 {
            let mut next = vec![1.0; k + 1];
            for j in 1..k {
                next[j] = binom[j - 1] + binom[j];
            }
            binom = next;
        }
        // sum_j C(k,j) (sigma^j M_j) u^(k-j), evaluated Horner-style in u
        let mut acc = 0.0;
        for j in 0..=k {
            acc = acc * shift + binom[j] * scale.powi(j as i32) * mv[j];
        }
        // Horner above multiplies the j=0 term by u^k, ..., the j=k term by u^0
        out.push(acc);
    }
    MomentVector::new(out)
}

/// Mass, mean velocity and temperature of a Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub rho: f64,
    #[serde(rename = "U")]
    pub velocity: f64,
    pub theta: f64,
}

impl EquilibriumState {
    pub fn new(rho: f64, velocity: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho = {rho} must be positive")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("theta = {theta} must be positive")));
        }
        if !velocity.is_finite() {
            return Err(Error::Domain(format!("U = {velocity} must be finite")));
        }
        Ok(Self {
            rho,
            velocity,
            theta,
        })
    }

    /// The standard state `(1, 0, 1)`.
    pub fn standard() -> Self {
        Self {
            rho: 1.0,
            velocity: 0.0,
            theta: 1.0,
        }
    }

    /// `rho = M_0`, `U = M_1/M_0`, `theta = (M_0 M_2 - M_1^2)/M_0^2`.
    pub fn from_moments(m: &MomentVector) -> Result<Self> {
        if m.len() < 3 {
            return Err(Error::InvalidInput(
                "need M_0, M_1, M_2 to recover (rho, U, theta)".into(),
            ));
        }
        let (m0, m1, m2) = (m.get(0), m.get(1), m.get(2));
        let velocity = m1 / m0;
        let theta = (m0 * m2 - m1 * m1) / (m0 * m0);
        Self::new(m0, velocity, theta)
    }

    pub fn sigma(&self) -> f64 {
        self.theta.sqrt()
    }

    /// `rho * Delta_k(U, theta)` for `k < len`.
    pub fn moments(&self, len: usize) -> MomentVector {
        let d = gaussian_moments(len, self.velocity, self.theta).expect("validated state");
        MomentVector(d.into_iter().map(|v| self.rho * v).collect())
    }
}

/// Conditioning information reported alongside recurrence coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceDiagnostics {
    /// `<Q_k^2>` for each computed `k` (the Hankel pivots).
    pub pivots: Vec<f64>,
    /// `max_k M_2k / <Q_k^2>`: amplification of relative moment perturbations
    /// into relative errors of `b_k`.
    pub condition_estimate: f64,
}

/// Recurrence coefficients of a strictly realizable vector, with the default
/// pivot tolerance.
pub fn moments_to_recurrence(m: &MomentVector) -> Result<RecurrenceCoefficients> {
    recurrence_with_diagnostics(m, DEFAULT_REALIZABILITY_TOL).map(|(rc, _)| rc)
}

/// Chebyshev (mixed-moment) algorithm on `sigma_{k,l} = <Q_k X^l>`:
/// `b_k = sigma_{k,k}/sigma_{k-1,k-1}` and
/// `a_k = sigma_{k,k+1}/sigma_{k,k} - sigma_{k-1,k}/sigma_{k-1,k-1}`.
///
/// Length `2n+1` yields `(a_0..a_{n-1}, b_0..b_n)`; length `2n` yields
/// `(a_0..a_{n-1}, b_0..b_{n-1})`.
pub fn recurrence_with_diagnostics(
    m: &MomentVector,
    tol: f64,
) -> Result<(RecurrenceCoefficients, RecurrenceDiagnostics)> {
    let len = m.len();
    if len > MAX_LEN {
        return Err(Error::Unsupported(format!(
            "moment vectors longer than {MAX_LEN} are not supported in double precision"
        )));
    }
    let mv = m.values();
    let threshold = tol * mv[0];
    let n_a = len / 2;
    let n_b = len.div_ceil(2);

    if !(mv[0] > threshold) || mv[0] <= 0.0 {
        return Err(Error::NotRealizable {
            pivot: 0,
            value: mv[0],
            threshold,
        });
    }
    let mut a = Vec::with_capacity(n_a);
    let mut b = Vec::with_capacity(n_b);
    let mut pivots = vec![mv[0]];
    let mut condition: f64 = 1.0;

    b.push(mv[0]);
    if n_a > 0 {
        a.push(mv[1] / mv[0]);
    }
    let mut prev = vec![0.0; len];
    let mut cur = mv.to_vec();
    for k in 1..n_b {
        let mut next = vec![0.0; len];
        for l in k..len - k {
            next[l] = cur[l + 1] - a[k - 1] * cur[l] - b[k - 1] * prev[l];
        }
        let pivot = next[k];
        if !(pivot > threshold) {
            return Err(Error::NotRealizable {
                pivot: k,
                value: pivot,
                threshold,
            });
        }
        pivots.push(pivot);
        condition = condition.max(mv[2 * k] / pivot);
        b.push(pivot / cur[k - 1]);
        if k < n_a {
            a.push(next[k + 1] / pivot - cur[k] / cur[k - 1]);
        }
        prev = cur;
        cur = next;
    }
    let rc = RecurrenceCoefficients::new(a, b)?;
    Ok((
        rc,
        RecurrenceDiagnostics {
            pivots,
            condition_estimate: condition,
        },
    ))
}

/// The unique moment vector of length `len` whose recurrence coefficients are
/// `rc`. Expands `X^l` in the orthogonal basis, `X Q_k = Q_{k+1} + a_k Q_k +
/// b_k Q_{k-1}`, and reads `M_l = b_0 * [coefficient of Q_0]`.
pub fn recurrence_to_moments(rc: &RecurrenceCoefficients, len: usize) -> Result<MomentVector> {
    if len == 0 {
        return Err(Error::InvalidInput(
            "requested an empty moment vector".into(),
        ));
    }
    let need_a = len / 2;
    let need_b = len.div_ceil(2);
    if rc.a.len() < need_a || rc.b.len() < need_b {
        return Err(Error::InvalidInput(format!(
            "{len} moments need {need_a} a-coefficients and {need_b} b-coefficients, got {} and {}",
            rc.a.len(),
            rc.b.len()
        )));
    }
    MomentVector::new(expand_moments(&rc.a, &rc.b, len))
}

/// Core of [`recurrence_to_moments`] on raw slices, with no sign checks on `b`.
/// Setting a trailing `b_n = 0` yields the boundary (quadrature) closure.
/// Callers must supply `len / 2` entries of `a` and `(len + 1) / 2` of `b`.
pub fn expand_moments(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    out.push(b[0]);
    let mut alpha = vec![1.0_f64];
    for l in 1..len {
        let kmax = l.min(len - 1 - l);
        let mut next = vec![0.0; kmax + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            let mut v = 0.0;
            if k >= 1 && k - 1 < alpha.len() {
                v += alpha[k - 1];
            }
            if k < alpha.len() {
                v += a[k] * alpha[k];
            }
            if k + 1 < alpha.len() {
                v += b[k + 1] * alpha[k + 1];
            }
            *slot = v;
        }
        out.push(b[0] * next[0]);
        alpha = next;
    }
    out
}
