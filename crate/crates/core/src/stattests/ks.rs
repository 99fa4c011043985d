//! One-sample Kolmogorov-Smirnov statistic against the uniform distribution
//! and the null distribution of `D` for sample size `n`.
//!
//! For `n <= EXACT_MAX_N` the distribution is exact: the Durbin matrix
//! formula (Marsaglia, Tsang and Wang 2003) below `d = 1/2`, and twice the
//! Birnbaum-Tingey one-sided tail above it, where the two tails cannot
//! overlap. Larger samples use the Kolmogorov limit with Stephens'
//! finite-sample scaling.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest sample size evaluated with the exact distribution.
pub const EXACT_MAX_N: usize = 140;

const SCALE: f64 = 1e140;
const SCALE_EXP: i32 = 140;

/// `D = sup_t |F_k(t) - t|` of the empirical cdf of `taus` against U(0, 1).
pub fn ks_statistic(taus: &[f64]) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ks_statistic_sorted(&sorted))
}

pub(crate) fn ks_statistic_sorted(sorted: &[f64]) -> f64 {
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let upper = (j + 1) as f64 / k - t;
            let lower = t - j as f64 / k;
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// `P(D_n < d)` under the null hypothesis.
pub fn ks_cdf(n: usize, d: f64) -> f64 {
    assert!(n >= 1, "sample size must be positive");
    if n <= EXACT_MAX_N {
        exact_cdf(n, d)
    } else {
        1.0 - kolmogorov_tail(stephens_scale(n) * d)
    }
}

/// `P(D_n >= d)` under the null hypothesis.
pub fn ks_p_value(n: usize, d: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(p_value(n, d))
}

fn p_value(n: usize, d: f64) -> f64 {
    if n <= EXACT_MAX_N {
        (1.0 - exact_cdf(n, d)).clamp(0.0, 1.0)
    } else {
        kolmogorov_tail(stephens_scale(n) * d)
    }
}

/// Upper-`alpha` critical value `T(n, alpha)`: the `d` with `P(D_n >= d) = alpha`.
///
/// Values are memoised per `(n, alpha)`.
pub fn ks_critical(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (n, alpha.to_bits());
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let v = critical_uncached(n, alpha);
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

fn critical_uncached(n: usize, alpha: f64) -> f64 {
    if n > EXACT_MAX_N {
        let x = kolmogorov_tail_inverse(alpha);
        return x / stephens_scale(n);
    }
    // D_n is supported on [1/(2n), 1]
    let mut lo = 0.5 / n as f64;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p_value(n, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn stephens_scale(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    s + 0.12 + 0.11 / s
}

/// Kolmogorov limiting tail `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi theta form of the cdf converges fast for small x
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let w = (2.0 * std::f64::consts::PI).sqrt() / x;
        let mut sum = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * x * x)).exp();
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        return (1.0 - w * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn kolmogorov_tail_inverse(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kolmogorov_tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Exact `P(D_n < d)` by the Durbin matrix method.
fn exact_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    if d <= 0.5 / nf {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    // for d >= 1/2 the one-sided excursions are disjoint events
    if d >= 0.5 {
        return 1.0 - 2.0 * one_sided_tail(n, d);
    }
    durbin_cdf(n, d)
}

/// `P(D_n^+ >= d)` by the Birnbaum-Tingey finite sum.
fn one_sided_tail(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    let jmax = (nf * (1.0 - d)).floor() as usize;
    let mut ln_binom = 0.0;
    let mut sum = 0.0;
    for j in 0..=jmax.min(n) {
        if j > 0 {
            ln_binom += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        let left = 1.0 - d - j as f64 / nf;
        let right = d + j as f64 / nf;
        if left <= 0.0 && n > j {
            continue;
        }
        let ln_term = ln_binom
            + if n > j { (n - j) as f64 * left.ln() } else { 0.0 }
            + (j as f64 - 1.0) * right.ln();
        sum += ln_term.exp();
    }
    (d * sum).clamp(0.0, 1.0)
}

fn durbin_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;

    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }

    let (q, mut exp) = matrix_power(&hm, 0, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1.0 / SCALE {
            s *= SCALE;
            exp -= SCALE_EXP;
        }
    }
    (s * 10f64.powi(exp)).clamp(0.0, 1.0)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == 0.0 {
                continue;
            }
            let row = &b[l * m..(l + 1) * m];
            for (cij, blj) in c[i * m..(i + 1) * m].iter_mut().zip(row) {
                *cij += ail * blj;
            }
        }
    }
    c
}

/// `a^n` with a decimal exponent carried alongside to avoid overflow.
fn matrix_power(a: &[f64], a_exp: i32, m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), a_exp);
    }
    let (v, v_exp) = matrix_power(a, a_exp, m, n / 2);
    let b = mat_mul(&v, &v, m);
    let b_exp = 2 * v_exp;
    let (mut out, mut exp) = if n.is_multiple_of(2) {
        (b, b_exp)
    } else {
        (mat_mul(a, &b, m), a_exp + b_exp)
    };
    if out[(m / 2) * m + m / 2] > SCALE {
        out.iter_mut().for_each(|x| *x /= SCALE);
        exp += SCALE_EXP;
    }
    (out, exp)
}
