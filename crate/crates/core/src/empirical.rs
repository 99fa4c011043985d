//! Fine-grid empirical arrival rate model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ArrivalDataset;

/// Default number of fine cells per day (15 minute cells).
pub const DEFAULT_CELLS: usize = 96;

const ALIGN_TOL: f64 = 1e-9;

/// Average arrival rate per fine cell, in arrivals per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRate {
    cell_width: f64,
    rates: Vec<f64>,
}

impl EmpiricalRate {
    /// Wraps explicit per-cell rates covering the whole day.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidArgument("at least one cell is required".into()));
        }
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument("rates must be finite and non-negative".into()));
        }
        Ok(Self {
            cell_width: 24.0 / rates.len() as f64,
            rates,
        })
    }

    pub fn cells(&self) -> usize {
        self.rates.len()
    }

    /// Cell width in hours.
    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn cell_start(&self, c: usize) -> f64 {
        c as f64 * self.cell_width
    }

    /// Expected arrivals over the cell-aligned interval `[a, b)`.
    pub fn rate_mass(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.cell_range(a, b)?;
        Ok(self.rates[lo..hi].iter().map(|r| r * self.cell_width).sum())
    }

    /// Indices of the cells covering the aligned interval `[a, b)`.
    pub fn cell_range(&self, a: f64, b: f64) -> Result<(usize, usize)> {
        if !(a >= 0.0 && a < b && b <= 24.0) {
            return Err(Error::Interval { a, b });
        }
        let misaligned = || Error::Misaligned {
            a,
            b,
            cell_width: self.cell_width,
        };
        let lo = aligned_index(a, self.cell_width).ok_or_else(misaligned)?;
        let hi = aligned_index(b, self.cell_width).ok_or_else(misaligned)?;
        Ok((lo, hi))
    }

    /// Averages groups of `factor` adjacent cells into a coarser model.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.cells().is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} cells by {factor}",
                self.cells()
            )));
        }
        let rates = self
            .rates
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        Self::from_rates(rates)
    }
}

fn aligned_index(t: f64, width: f64) -> Option<usize> {
    let q = t / width;
    let r = q.round();
    ((q - r).abs() <= ALIGN_TOL).then_some(r as usize)
}

/// Builds the fine-grid model: each cell's rate is the mean weekly count in
/// the cell divided by the cell width.
pub fn build_empirical(ds: &ArrivalDataset, cells: usize) -> Result<EmpiricalRate> {
    if cells == 0 {
        return Err(Error::InvalidArgument("cells must be positive".into()));
    }
    let width = 24.0 / cells as f64;
    let mut counts = vec![0usize; cells];
    for week in ds.iter_weeks() {
        for &t in week {
            // guard against t / width rounding up to `cells` just below 24
            let mut c = ((t / width) as usize).min(cells - 1);
            // keep the [a, b) convention consistent with `c as f64 * width` edges
            while c > 0 && t < c as f64 * width {
                c -= 1;
            }
            while c + 1 < cells && t >= (c + 1) as f64 * width {
                c += 1;
            }
            counts[c] += 1;
        }
    }
    let m = ds.weeks().max(1) as f64;
    let rates = counts.into_iter().map(|k| k as f64 / m / width).collect();
    EmpiricalRate::from_rates(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Weekday;
    use approx::assert_relative_eq;

    #[test]
    fn mean_count_over_width() {
        let ds = ArrivalDataset::new(Weekday::Mon, vec![vec![0.1], vec![]]).unwrap();
        let er = build_empirical(&ds, 96).unwrap();
        assert_eq!(er.rates()[0], 2.0);
        assert!(er.rates()[1..].iter().all(|&r| r == 0.0));
    }

    #[test]
    fn empty_dataset_is_all_zero() {
        let er = build_empirical(&ArrivalDataset::empty(Weekday::Mon, 4), 96).unwrap();
        assert!(er.rates().iter().all(|&r| r == 0.0));
        assert_eq!(er.cell_width() * er.cells() as f64, 24.0);
    }

    #[test]
    fn concentrated_single_week() {
        let ds = ArrivalDataset::new(Weekday::Mon, vec![vec![5.0, 5.1, 5.2]]).unwrap();
        let er = build_empirical(&ds, 96).unwrap();
        assert_eq!(er.rates()[20], 12.0);
        assert_eq!(er.rates().iter().filter(|&&r| r > 0.0).count(), 1);
    }

    #[test]
    fn boundary_arrival_goes_right() {
        let ds = ArrivalDataset::new(Weekday::Mon, vec![vec![0.25, 23.75]]).unwrap();
        let er = build_empirical(&ds, 96).unwrap();
        assert_eq!(er.rates()[0], 0.0);
        assert_eq!(er.rates()[1], 4.0);
        assert_eq!(er.rates()[95], 4.0);
    }

    #[test]
    fn mass() {
        let er = EmpiricalRate::from_rates(vec![4.0; 96]).unwrap();
        assert_eq!(er.rate_mass(0.0, 6.0).unwrap(), 24.0);
        let zero = EmpiricalRate::from_rates(vec![0.0; 96]).unwrap();
        assert_eq!(zero.rate_mass(0.0, 24.0).unwrap(), 0.0);
        let mut two = vec![0.0; 96];
        two[0] = 2.0;
        two[1] = 4.0;
        let er = EmpiricalRate::from_rates(two).unwrap();
        assert_relative_eq!(er.rate_mass(0.0, 0.5).unwrap(), 1.5);
    }

    #[test]
    fn misaligned_mass() {
        let er = EmpiricalRate::from_rates(vec![1.0; 96]).unwrap();
        assert!(matches!(er.rate_mass(0.1, 1.0), Err(Error::Misaligned { .. })));
        assert!(matches!(er.rate_mass(1.0, 1.0), Err(Error::Interval { .. })));
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(EmpiricalRate::from_rates(vec![]).is_err());
        assert!(EmpiricalRate::from_rates(vec![-1.0]).is_err());
        assert!(build_empirical(&ArrivalDataset::empty(Weekday::Mon, 1), 0).is_err());
    }
}
