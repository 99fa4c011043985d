//! Tables and plot data for an evaluated partition.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalRate;
use crate::error::Result;
use crate::partition::EvalResult;
use crate::stattests::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Untestable,
}

impl Decision {
    fn of<T>(outcome: &Outcome<T>, accepted: impl Fn(&T) -> bool) -> Self {
        match outcome {
            Outcome::Tested(r) if accepted(r) => Decision::Accept,
            Outcome::Tested(_) => Decision::Reject,
            Outcome::Untestable => Decision::Untestable,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Untestable => "untestable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub interval: String,
    pub k: usize,
    pub ks_p_value: Option<f64>,
    pub ks: Decision,
    pub dispersion_p_value: Option<f64>,
    pub dispersion: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub start_hour: f64,
    pub end_hour: f64,
    pub rate_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineCell {
    pub cell_start_hour: f64,
    pub rate_per_hour: f64,
}

/// Run settings echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub weight: f64,
    pub weeks: usize,
    pub alpha: f64,
    pub ell_hours: f64,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    /// Filled from the evaluation by [`render`].
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: ReportMeta,
    pub fit_error: f64,
    pub smoothness: f64,
    pub objective: f64,
    pub test_table: Vec<TestRow>,
    pub step_function: Vec<Step>,
    pub fine_rate: Vec<FineCell>,
}

/// Formats an hour boundary as `HH:MM`.
pub fn clock(hours: f64) -> String {
    let minutes = (hours * 60.0).round() as u32;
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

pub fn render(e: &EvalResult, er: &EmpiricalRate, meta: &ReportMeta) -> ReportBundle {
    let test_table = e
        .intervals
        .iter()
        .map(|iv| TestRow {
            interval: format!("{} – {}", clock(iv.start_hour), clock(iv.end_hour)),
            k: iv.pooled,
            ks_p_value: iv.ks.tested().map(|r| r.p_value),
            ks: Decision::of(&iv.ks, |r| r.accepted),
            dispersion_p_value: iv.dispersion.tested().map(|r| r.p_value),
            dispersion: Decision::of(&iv.dispersion, |r| r.accepted),
        })
        .collect();
    let step_function = e
        .intervals
        .iter()
        .map(|iv| Step {
            start_hour: iv.start_hour,
            end_hour: iv.end_hour,
            rate_per_hour: iv.rate,
        })
        .collect();
    let fine_rate = er
        .rates()
        .iter()
        .enumerate()
        .map(|(c, &r)| FineCell {
            cell_start_hour: er.cell_start(c),
            rate_per_hour: r,
        })
        .collect();
    ReportBundle {
        metadata: ReportMeta {
            feasible: e.feasible,
            ..meta.clone()
        },
        fit_error: e.fit_error,
        smoothness: e.smoothness,
        objective: e.objective,
        test_table,
        step_function,
        fine_rate,
    }
}

fn p3(p: Option<f64>) -> String {
    p.map_or_else(|| "-".to_owned(), |p| format!("{p:.3}"))
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Test table as CSV with p-values to three decimals.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("interval,k,ks_p_value,ks,dispersion_p_value,dispersion\n");
        for row in &self.test_table {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.interval,
                row.k,
                p3(row.ks_p_value),
                row.ks.as_str(),
                p3(row.dispersion_p_value),
                row.dispersion.as_str()
            );
        }
        out
    }

    /// Piecewise-constant rate, one row per interval.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("start_hour,end_hour,rate_per_hour\n");
        for s in &self.step_function {
            let _ = writeln!(out, "{},{},{}", s.start_hour, s.end_hour, s.rate_per_hour);
        }
        out
    }

    /// Fine-grid empirical rate, one row per cell.
    pub fn fine_csv(&self) -> String {
        fine_csv(self.fine_rate.iter().map(|c| (c.cell_start_hour, c.rate_per_hour)))
    }

    pub fn to_text(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "w = {}  m = {}  alpha = {}  ell = {} h  budget = {}  seed = {}",
            m.weight,
            m.weeks,
            m.alpha,
            m.ell_hours,
            m.budget.map_or_else(|| "-".into(), |b| b.to_string()),
            m.seed.map_or_else(|| "-".into(), |s| s.to_string()),
        );
        let _ = writeln!(
            out,
            "feasible = {}  intervals = {}  E = {:.4}  S = {:.4}  f = {:.4}",
            m.feasible,
            self.test_table.len(),
            self.fit_error,
            self.smoothness,
            self.objective
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<15} {:>6} {:>8} {:>10} {:>8} {:>10} {:>10}",
            "interval", "k", "KS p", "KS", "disp p", "disp", "rate/h"
        );
        for (row, step) in self.test_table.iter().zip(&self.step_function) {
            let _ = writeln!(
                out,
                "{:<15} {:>6} {:>8} {:>10} {:>8} {:>10} {:>10.3}",
                row.interval,
                row.k,
                p3(row.ks_p_value),
                row.ks.as_str(),
                p3(row.dispersion_p_value),
                row.dispersion.as_str(),
                step.rate_per_hour
            );
        }
        out
    }
}

/// `cell_start_hour,rate_per_hour` CSV.
pub fn fine_csv(cells: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("cell_start_hour,rate_per_hour\n");
    for (start, rate) in cells {
        let _ = writeln!(out, "{start},{rate}");
    }
    out
}

/// The empirical model as `cell_start_hour,rate_per_hour` CSV.
pub fn empirical_csv(er: &EmpiricalRate) -> String {
    fine_csv(er.rates().iter().enumerate().map(|(c, &r)| (er.cell_start(c), r)))
}
