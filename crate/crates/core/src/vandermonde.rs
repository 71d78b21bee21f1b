//! Björck–Pereyra elimination for transposed Vandermonde systems.

use crate::error::{Error, Result};

/// Solves `sum_j x_j^k z_j = rhs_k` for `k = 0..n` with distinct nodes `x`.
///
/// Progressive Newton-form elimination in `O(n^2)`; for ordered nodes it is
/// far more accurate than a general LU solve of the same system.
pub fn solve_power_system(x: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let len = x.len();
    if rhs.len() != len {
        return Err(Error::InvalidInput(format!(
            "{} nodes but {} right-hand-side entries",
            len,
            rhs.len()
        )));
    }
    if len == 0 {
        return Ok(vec![]);
    }
    let n = len - 1;
    let mut f = rhs.to_vec();
    for k in 0..n {
        for i in (k + 1..=n).rev() {
            f[i] -= x[k] * f[i - 1];
        }
    }
    for k in (0..n).rev() {
        for i in k + 1..=n {
            let d = x[i] - x[i - k - 1];
            if d == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "nodes {} and {} coincide",
                    i - k - 1,
                    i
                )));
            }
            f[i] /= d;
        }
        for i in k..n {
            f[i] -= f[i + 1];
        }
    }
    Ok(f)
}
