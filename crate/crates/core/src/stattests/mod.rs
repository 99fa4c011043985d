//! Per-interval statistical tests: the conditional-uniform Kolmogorov-Smirnov
//! test of the Poisson hypothesis and the dispersion test for equal weekly
//! means.

mod chi2;
mod ks;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ArrivalDataset;

pub use chi2::{chi2_p_value, chi2_quantile, QUANTILE_TOL};
pub use ks::{kolmogorov_tail, ks_cdf, ks_critical, ks_p_value, ks_statistic, EXACT_MAX_N};
pub(crate) use ks::ks_statistic_sorted;

/// Significance level shared by both tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    alpha: f64,
}

impl TestConfig {
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
        }
    }
}

/// Result of a test that may lack the data to be run at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Tested(T),
    /// No arrivals in the interval: the test gives no evidence either way.
    Untestable,
}

impl<T> Outcome<T> {
    pub fn tested(&self) -> Option<&T> {
        match self {
            Outcome::Tested(r) => Some(r),
            Outcome::Untestable => None,
        }
    }

    pub fn is_untestable(&self) -> bool {
        matches!(self, Outcome::Untestable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Pooled sample size.
    pub k: usize,
    pub d_stat: f64,
    pub critical: f64,
    pub p_value: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub m: usize,
    pub ds_stat: f64,
    pub critical: f64,
    pub p_value: f64,
    pub accepted: bool,
}

/// Maps arrival times in `[a, b)` onto `[0, 1)`.
pub fn rescale_times(times: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    if !(a < b) {
        return Err(Error::Interval { a, b });
    }
    if let Some(&t) = times.iter().find(|&&t| t < a || t >= b) {
        return Err(Error::InvalidArgument(format!("time {t} outside [{a}, {b})")));
    }
    Ok(rescale_unchecked(times, a, b))
}

fn rescale_unchecked(times: &[f64], a: f64, b: f64) -> Vec<f64> {
    let width = b - a;
    times.iter().map(|t| ((t - a) / width).min(1.0_f64.next_down())).collect()
}

/// KS test of pre-sorted pooled arrival times in `[a, b)`.
pub fn ks_test_times(sorted_times: &[f64], a: f64, b: f64, cfg: &TestConfig) -> Outcome<KsResult> {
    if sorted_times.is_empty() {
        return Outcome::Untestable;
    }
    let taus = rescale_unchecked(sorted_times, a, b);
    let k = taus.len();
    let d_stat = ks_statistic_sorted(&taus);
    let critical = ks_critical(k, cfg.alpha()).expect("non-empty sample");
    let p_value = ks_p_value(k, d_stat).expect("non-empty sample");
    Outcome::Tested(KsResult {
        k,
        d_stat,
        critical,
        p_value,
        accepted: d_stat <= critical,
    })
}

/// Conditional-uniform KS test on the arrivals in `[a, b)` pooled over weeks.
pub fn cu_ks_test(ds: &ArrivalDataset, a: f64, b: f64, cfg: &TestConfig) -> Result<Outcome<KsResult>> {
    let times = ds.pooled_times(a, b)?;
    Ok(ks_test_times(&times, a, b, cfg))
}

/// Dispersion test of the per-week counts in one interval.
///
/// Fails for fewer than two weeks; all-zero counts are untestable.
pub fn dispersion_test(counts: &[usize], cfg: &TestConfig) -> Result<Outcome<DispersionResult>> {
    let m = counts.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "dispersion test needs at least 2 weeks, got {m}"
        )));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Ok(Outcome::Untestable);
    }
    let mean = total as f64 / m as f64;
    let ds_stat = counts
        .iter()
        .map(|&k| {
            let dev = k as f64 - mean;
            dev * dev
        })
        .sum::<f64>()
        / mean;
    let critical = chi2_quantile(m - 1, cfg.alpha());
    Ok(Outcome::Tested(DispersionResult {
        m,
        ds_stat,
        critical,
        p_value: chi2_p_value(m - 1, ds_stat),
        accepted: ds_stat <= critical,
    }))
}
