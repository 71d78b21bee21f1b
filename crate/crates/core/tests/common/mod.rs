//! Corpus generators and finite-difference oracles shared by the
//! integration tests.

#![allow(dead_code)]

use hyqmom::closure::{close, ClosureSpec};
use hyqmom::moment_algebra::{MomentVector, RecurrenceCoefficients};
use hyqmom::sampling::{rng, RecurrenceSampler};

/// `count` moment vectors of length `len` drawn through the `(a, b)`
/// bijection with the default coefficient box.
pub fn corpus(len: usize, seed: u64, count: usize) -> Vec<(RecurrenceCoefficients, MomentVector)> {
    let sampler = RecurrenceSampler::default();
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            sampler
                .moments(&mut r, len)
                .expect("sampled coefficients are realizable")
        })
        .collect()
}

/// Root-mean-square speed `sqrt(M_2 / M_0)`.
pub fn rms_speed(m: &MomentVector) -> f64 {
    (m.get(2) / m.get(0)).sqrt()
}

/// Pivots `d_0..d_{h-1}` of the Hankel matrix `(M_{i+j})`, as squared
/// Cholesky diagonals.
pub fn hankel_pivots(m: &MomentVector) -> Vec<f64> {
    let h = m.len().div_ceil(2);
    let mat = nalgebra::DMatrix::from_fn(h, h, |i, j| m.get(i + j));
    let l = mat
        .cholesky()
        .expect("positive definite Hankel matrix")
        .unpack();
    (0..h).map(|i| l[(i, i)] * l[(i, i)]).collect()
}

/// Step for `M_j`: `delta d_k` for `j = 2k` and `delta sqrt(d_k d_{k+1})`
/// for `j = 2k+1`, so each step moves one recurrence coefficient by a
/// relative amount near `delta`.
pub fn pivot_steps(m: &MomentVector, delta: f64) -> Vec<f64> {
    let d = hankel_pivots(m);
    (0..m.len())
        .map(|j| {
            let k = j / 2;
            if j % 2 == 0 || k + 1 >= d.len() {
                delta * d[k]
            } else {
                delta * (d[k] * d[k + 1]).sqrt()
            }
        })
        .collect()
}

/// Five-point central difference of `f` at 0 with step `h`.
fn five_point(f: &impl Fn(f64) -> Option<f64>, h: f64) -> Option<f64> {
    Some((8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h))
}

/// Derivative of `f` at 0 from five-point stencils on the step ladder
/// `h0 * 10^(-k/2)`, stopping above `h_min`: returns the estimate at the
/// rung where two consecutive rungs agree best. Rungs with an unrealizable
/// stencil point are skipped.
pub fn stable_derivative(f: impl Fn(f64) -> Option<f64>, h0: f64, h_min: f64) -> Option<f64> {
    let ladder: Vec<Option<f64>> = (0..24)
        .map(|k| h0 * 10f64.powf(-0.5 * k as f64))
        .take_while(|h| *h >= h_min)
        .map(|h| five_point(&f, h))
        .collect();
    ladder
        .windows(2)
        .filter_map(|w| Some(((w[0]? - w[1]?).abs(), w[1]?)))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, d)| d)
}

/// `d M_{N+1} / d M_j` by [`stable_derivative`] starting from
/// [`pivot_steps`] with relative size `delta`. Steps stay above
/// `1e-9 (|M_j| + d_k)` so that the stencil still resolves `M_j`.
pub fn fd_closure_gradient(m: &MomentVector, spec: &ClosureSpec, delta: f64) -> Vec<f64> {
    let eval = |j: usize, h: f64| {
        let mut v = m.values().to_vec();
        v[j] += h;
        close(&MomentVector::new(v).ok()?, spec).ok()
    };
    pivot_steps(m, delta)
        .into_iter()
        .enumerate()
        .map(|(j, h)| {
            let floor = 1e-9 * (m.get(j).abs() + h / delta);
            stable_derivative(|t| eval(j, t), h, floor)
                .unwrap_or_else(|| panic!("no realizable stencil around M_{j}"))
        })
        .collect()
}

/// Coefficients `c_0..c_{N+1}` of `det(X I - A)` for the companion matrix
/// whose last row is `grad`.
pub fn characteristic_from_gradient(grad: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = grad.iter().map(|g| -g).collect();
    c.push(1.0);
    c
}

/// `max_j |x_j - y_j| s^j / max_j |y_j| s^j`: coefficient error after
/// rescaling the variable by `s`.
pub fn scaled_coefficient_error(x: &[f64], y: &[f64], s: f64) -> f64 {
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for (j, (a, b)) in x.iter().zip(y).enumerate() {
        let w = s.powi(j as i32);
        num = num.max((a - b).abs() * w);
        den = den.max(b.abs() * w);
    }
    num / den
}

/// Sorted roots grouped into clusters whose consecutive members differ by
/// at most `tol * scale`.
pub fn cluster(sorted: &[f64], tol: f64, scale: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &x in sorted {
        match out.last_mut() {
            Some(c) if (x - c.last().unwrap()).abs() <= tol * scale => c.push(x),
            _ => out.push(vec![x]),
        }
    }
    out
}

/// Real parts of the eigenvalues of a companion matrix for `c` (monic,
/// ascending), sorted, with the largest imaginary part seen.
pub fn companion_roots(c: &[f64]) -> (Vec<f64>, f64) {
    let d = c.len() - 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        a[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        a[(i, d - 1)] = -c[i];
    }
    let ev = a.complex_eigenvalues();
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    let im = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    (re, im)
}

/// Coefficients of `F(mu + s Y) / s^d` for `F` monic ascending of degree `d`.
pub fn shift_scale(c: &[f64], mu: f64, s: f64) -> Vec<f64> {
    let d = c.len() - 1;
    let mut t = c.to_vec();
    // Taylor shift by repeated synthetic division
    for k in 0..d {
        for i in (k..d).rev() {
            t[i] += mu * t[i + 1];
        }
    }
    (0..=d)
        .map(|j| t[j] * s.powi(j as i32 - d as i32))
        .collect()
}

/// `Delta_k(U, theta) = sum_{j even} C(k, j) U^{k-j} theta^{j/2} (j-1)!!`.
pub fn gaussian_moment_oracle(k: usize, u: f64, theta: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut double_fact = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom = binom * (k - j + 1) as f64 / j as f64;
        }
        if j % 2 == 0 {
            if j >= 2 {
                double_fact *= (j - 1) as f64;
            }
            total += binom * u.powi((k - j) as i32) * theta.powi((j / 2) as i32) * double_fact;
        }
    }
    total
}
