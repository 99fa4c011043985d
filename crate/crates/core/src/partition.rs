//! Candidate partitions of the day and their evaluation: interval rates, fit
//! error, smoothness, objective and the per-interval constraints.

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalRate;
use crate::error::{Error, Result};
use crate::ingest::ArrivalDataset;
use crate::stattests::{
    dispersion_test, ks_test_times, DispersionResult, KsResult, Outcome, TestConfig,
};

/// Integer grid on which partition boundaries live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionGrid {
    units: u32,
    max_intervals: usize,
    ell_units: u32,
}

impl PartitionGrid {
    /// `units` grid units per day (G), at most `max_intervals` intervals (B),
    /// minimum interval length `ell_units`.
    pub fn new(units: u32, max_intervals: usize, ell_units: u32) -> Result<Self> {
        if max_intervals < 2 || (units as usize) < max_intervals {
            return Err(Error::Grid(format!(
                "need G >= B >= 2, got G = {units}, B = {max_intervals}"
            )));
        }
        let min_ell = units.div_ceil(96).max(1);
        if ell_units < min_ell || ell_units > units {
            return Err(Error::Grid(format!(
                "minimum interval length must be between {min_ell} and {units} units \
                 (at least 15 minutes), got {ell_units}"
            )));
        }
        Ok(Self {
            units,
            max_intervals,
            ell_units,
        })
    }

    /// Like [`PartitionGrid::new`] with the minimum length given in hours.
    pub fn with_ell_hours(units: u32, max_intervals: usize, ell_hours: f64) -> Result<Self> {
        let unit_hours = 24.0 / f64::from(units);
        let q = ell_hours / unit_hours;
        if !(q.is_finite() && q >= 0.0 && (q - q.round()).abs() < 1e-9) {
            return Err(Error::Grid(format!(
                "minimum length {ell_hours} h is not a multiple of the {unit_hours} h grid unit"
            )));
        }
        Self::new(units, max_intervals, q.round() as u32)
    }

    /// Grid units per day (G).
    pub fn units(&self) -> u32 {
        self.units
    }

    /// Maximum number of intervals (B).
    pub fn max_intervals(&self) -> usize {
        self.max_intervals
    }

    pub fn ell_units(&self) -> u32 {
        self.ell_units
    }

    pub fn unit_hours(&self) -> f64 {
        24.0 / f64::from(self.units)
    }

    pub fn ell_hours(&self) -> f64 {
        f64::from(self.ell_units) * self.unit_hours()
    }

    pub fn to_hours(&self, unit: u32) -> f64 {
        f64::from(unit) * 24.0 / f64::from(self.units)
    }
}

impl Default for PartitionGrid {
    /// Hourly grid with up to 24 intervals of at least one hour.
    fn default() -> Self {
        Self {
            units: 24,
            max_intervals: 24,
            ell_units: 1,
        }
    }
}

/// A canonical boundary vector `x` of length B + 1: `x[0] = 0`, `x[B] = G`,
/// non-decreasing. Equal neighbours form a collapsed pair and add no interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    x: Vec<u32>,
}

impl Partition {
    pub fn as_slice(&self) -> &[u32] {
        &self.x
    }

    /// Non-collapsed intervals as `(lo, hi)` grid units.
    pub fn intervals(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.x.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1]))
    }

    /// Number of non-collapsed intervals N.
    pub fn interval_count(&self) -> usize {
        self.intervals().count()
    }

    /// Distinct boundaries in hours, from 0 to 24.
    pub fn boundaries_hours(&self, grid: &PartitionGrid) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.intervals().map(|(_, hi)| grid.to_hours(hi)));
        out
    }

    /// Builds a partition from distinct boundaries in hours (`0, ..., 24`),
    /// padding with collapsed pairs up to B + 1 entries.
    pub fn from_hours(hours: &[f64], grid: &PartitionGrid) -> Result<Self> {
        let mut units = Vec::with_capacity(hours.len());
        for &h in hours {
            let q = h / grid.unit_hours();
            if !(q.is_finite() && (q - q.round()).abs() < 1e-9 && q >= -0.5 && q <= f64::from(grid.units) + 0.5) {
                return Err(Error::Grid(format!(
                    "boundary {h} h is not on the {} h grid within [0, 24]",
                    grid.unit_hours()
                )));
            }
            units.push(q.round() as u32);
        }
        units.sort_unstable();
        units.dedup();
        if units.first() != Some(&0) || units.last() != Some(&grid.units) {
            return Err(Error::Grid("boundaries must start at 0 and end at 24".into()));
        }
        if units.len() - 1 > grid.max_intervals {
            return Err(Error::Grid(format!(
                "{} intervals exceed the maximum of {}",
                units.len() - 1,
                grid.max_intervals
            )));
        }
        units.resize(grid.max_intervals + 1, grid.units);
        Ok(Self { x: units })
    }
}

/// Clamps the endpoints to `0` and `G`, clamps interior entries into `[0, G]`
/// and sorts them.
pub fn canonicalize(raw: &[i64], grid: &PartitionGrid) -> Result<Partition> {
    let b = grid.max_intervals;
    if raw.len() != b + 1 {
        return Err(Error::Grid(format!(
            "boundary vector has {} entries, expected {}",
            raw.len(),
            b + 1
        )));
    }
    let g = i64::from(grid.units);
    let mut x: Vec<u32> = raw.iter().map(|&v| v.clamp(0, g) as u32).collect();
    x[0] = 0;
    x[b] = grid.units;
    x[1..b].sort_unstable();
    Ok(Partition { x })
}

/// The hourly partition `x_i = (i - 1) G / 24`.
pub fn starting_point(grid: &PartitionGrid) -> Result<Partition> {
    if grid.max_intervals != 24 || !grid.units.is_multiple_of(24) {
        return Err(Error::Grid(format!(
            "hourly start needs B = 24 and G divisible by 24, got B = {}, G = {}",
            grid.max_intervals, grid.units
        )));
    }
    let step = grid.units / 24;
    Ok(Partition {
        x: (0..=24).map(|i| i * step).collect(),
    })
}

/// `B` near-equal intervals, `x_i = floor(i G / B)`. Coincides with
/// [`starting_point`] whenever the latter is defined.
pub fn uniform_partition(grid: &PartitionGrid) -> Partition {
    let g = u64::from(grid.units);
    let b = grid.max_intervals as u64;
    Partition {
        x: (0..=b).map(|i| (i * g / b) as u32).collect(),
    }
}

/// Evaluation of one non-collapsed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEval {
    pub lo_unit: u32,
    pub hi_unit: u32,
    pub start_hour: f64,
    pub end_hour: f64,
    pub week_counts: Vec<usize>,
    pub pooled: usize,
    /// Mean weekly count.
    pub mean: f64,
    /// Arrivals per hour.
    pub rate: f64,
    pub ks: Outcome<KsResult>,
    pub dispersion: Outcome<DispersionResult>,
    /// `D - T(k, alpha)`, absent when untestable.
    pub g: Option<f64>,
    /// `Ds - chi2_{m-1, alpha}`, absent when untestable.
    pub h: Option<f64>,
    /// Hours missing to reach the minimum length (0 when long enough).
    pub length_shortfall: f64,
    /// This interval's share of the fit error.
    pub fit_error: f64,
}

impl IntervalEval {
    pub fn is_untestable(&self) -> bool {
        self.g.is_none() || self.h.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub x: Vec<u32>,
    pub intervals: Vec<IntervalEval>,
    pub weight: f64,
    /// Fit error E.
    pub fit_error: f64,
    /// Smoothness S.
    pub smoothness: f64,
    /// Objective f = E + w S.
    pub objective: f64,
    /// `max_j max(g_j, h_j, 0)` over testable intervals.
    pub max_violation: f64,
    pub feasible: bool,
}

/// Compact JSON view of an evaluated partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub boundaries_hours: Vec<f64>,
    pub rates_per_hour: Vec<f64>,
    pub feasible: bool,
    #[serde(rename = "E")]
    pub fit_error: f64,
    #[serde(rename = "S")]
    pub smoothness: f64,
    #[serde(rename = "f")]
    pub objective: f64,
}

impl EvalResult {
    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.rate).collect()
    }

    pub fn untestable_count(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.is_untestable()).count()
    }

    /// Constraint values `(g_i, h_i)` per consecutive boundary pair; collapsed
    /// pairs give `(0, 0)`, untestable intervals `None`.
    pub fn pair_constraints(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let mut intervals = self.intervals.iter();
        self.x
            .windows(2)
            .map(|w| {
                if w[0] == w[1] {
                    (Some(0.0), Some(0.0))
                } else {
                    let iv = intervals.next().expect("interval per non-collapsed pair");
                    (iv.g, iv.h)
                }
            })
            .collect()
    }

    pub fn summary(&self) -> PartitionSummary {
        let mut boundaries_hours = vec![0.0];
        boundaries_hours.extend(self.intervals.iter().map(|iv| iv.end_hour));
        PartitionSummary {
            boundaries_hours,
            rates_per_hour: self.rates(),
            feasible: self.feasible,
            fit_error: self.fit_error,
            smoothness: self.smoothness,
            objective: self.objective,
        }
    }
}

/// Bundles the data and settings shared by every evaluation of one problem.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    ds: &'a ArrivalDataset,
    er: &'a EmpiricalRate,
    weight: f64,
    cfg: TestConfig,
    grid: PartitionGrid,
    cells_per_unit: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        ds: &'a ArrivalDataset,
        er: &'a EmpiricalRate,
        weight: f64,
        cfg: TestConfig,
        grid: PartitionGrid,
    ) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight must be non-negative, got {weight}")));
        }
        let g = grid.units as usize;
        if !er.cells().is_multiple_of(g) {
            return Err(Error::Grid(format!(
                "{} fine cells do not refine a {g}-unit partition grid",
                er.cells()
            )));
        }
        Ok(Self {
            ds,
            er,
            weight,
            cfg,
            grid,
            cells_per_unit: er.cells() / g,
        })
    }

    pub fn grid(&self) -> &PartitionGrid {
        &self.grid
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dataset(&self) -> &ArrivalDataset {
        self.ds
    }

    pub fn evaluate(&self, p: &Partition) -> EvalResult {
        debug_assert_eq!(p.x.len(), self.grid.max_intervals + 1);
        let m = self.ds.weeks();
        let fine = self.er.rates();
        let mut fit_error = 0.0;
        let mut intervals = Vec::with_capacity(self.grid.max_intervals);

        for (lo, hi) in p.intervals() {
            let a = self.grid.to_hours(lo);
            let b = self.grid.to_hours(hi);
            let counts = self.ds.counts_unchecked(a, b);
            let mean = if m == 0 { 0.0 } else { counts.total as f64 / m as f64 };
            let rate = mean / (b - a);

            let times = self.ds.pooled_unchecked(a, b);
            let ks = ks_test_times(&times, a, b, &self.cfg);
            let dispersion = dispersion_test(&counts.per_week, &self.cfg).unwrap_or(Outcome::Untestable);
            let g = ks.tested().map(|r| r.d_stat - r.critical);
            let h = dispersion.tested().map(|r| r.ds_stat - r.critical);

            let len = hi - lo;
            let length_shortfall = if len < self.grid.ell_units {
                f64::from(self.grid.ell_units - len) * self.grid.unit_hours()
            } else {
                0.0
            };

            // one running sum in cell order keeps E bit-identical to a
            // cell-by-cell evaluation
            let cells = lo as usize * self.cells_per_unit..hi as usize * self.cells_per_unit;
            let mut own = 0.0;
            for &fc in &fine[cells] {
                let gap = rate - fc;
                fit_error += gap * gap;
                own += gap * gap;
            }

            intervals.push(IntervalEval {
                lo_unit: lo,
                hi_unit: hi,
                start_hour: a,
                end_hour: b,
                week_counts: counts.per_week,
                pooled: counts.total,
                mean,
                rate,
                ks,
                dispersion,
                g,
                h,
                length_shortfall,
                fit_error: own,
            });
        }

        let smoothness = intervals
            .windows(2)
            .map(|w| {
                let jump = w[1].rate - w[0].rate;
                jump * jump
            })
            .sum::<f64>();
        let max_violation = intervals
            .iter()
            .flat_map(|iv| [iv.g, iv.h])
            .flatten()
            .fold(0.0, f64::max);
        let feasible = max_violation == 0.0
            && intervals
                .iter()
                .all(|iv| iv.length_shortfall == 0.0 && !iv.is_untestable());

        EvalResult {
            x: p.x.clone(),
            intervals,
            weight: self.weight,
            fit_error,
            smoothness,
            objective: fit_error + self.weight * smoothness,
            max_violation,
            feasible,
        }
    }
}

/// Evaluates a single partition; see [`Evaluator`] for repeated use.
pub fn evaluate(
    p: &Partition,
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
) -> Result<EvalResult> {
    if p.x.len() != grid.max_intervals + 1 {
        return Err(Error::Grid("partition does not match the grid".into()));
    }
    Ok(Evaluator::new(ds, er, w, *cfg, *grid)?.evaluate(p))
}
