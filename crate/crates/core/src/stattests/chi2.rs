//! Chi-squared upper-tail probabilities and quantiles.

use super::special::gamma_q;

/// Absolute tolerance of [`chi2_quantile`].
pub const QUANTILE_TOL: f64 = 1e-10;

/// `P(X > x)` for `X ~ chi2(dof)`.
pub fn chi2_p_value(dof: usize, x: f64) -> f64 {
    assert!(dof >= 1, "chi-squared needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// Upper-`alpha` critical value: the `x` with `P(X > x) = alpha`, found by
/// bisection on the incomplete gamma function.
pub fn chi2_quantile(dof: usize, alpha: f64) -> f64 {
    assert!(dof >= 1, "chi-squared needs at least one degree of freedom");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0;
    while chi2_p_value(dof, hi) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_p_value(dof, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
