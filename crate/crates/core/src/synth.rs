//! Synthetic nonhomogeneous Poisson arrivals with a known rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ArrivalDataset, Weekday};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Arrivals per hour.
    pub rate: f64,
}

/// Piecewise-constant rate covering `[0, 24)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueRate {
    segments: Vec<Segment>,
}

impl TrueRate {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if segments.is_empty() {
            return bad("at least one segment is required".into());
        }
        let mut at = 0.0;
        for s in &segments {
            if s.start != at {
                return bad(format!("segment starting at {} leaves a gap or overlap at {at}", s.start));
            }
            if !(s.end > s.start) {
                return bad(format!("empty segment [{}, {})", s.start, s.end));
            }
            if !(s.rate.is_finite() && s.rate >= 0.0) {
                return bad(format!("rate {} must be finite and non-negative", s.rate));
            }
            at = s.end;
        }
        if at != 24.0 {
            return bad(format!("segments end at {at}, expected 24"));
        }
        Ok(Self { segments })
    }

    pub fn constant(rate: f64) -> Self {
        Self::new(vec![Segment { start: 0.0, end: 24.0, rate }]).expect("valid constant rate")
    }

    /// Parses `"0-12:2,12-24:6"` (start-end:rate, hours and arrivals/hour).
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |part: &str| Error::InvalidArgument(format!("malformed segment {part:?}, expected start-end:rate"));
        let mut segments = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (span, rate) = part.split_once(':').ok_or_else(|| bad(part))?;
            let (start, end) = span.split_once('-').ok_or_else(|| bad(part))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(part));
            segments.push(Segment {
                start: num(start)?,
                end: num(end)?,
                rate: num(rate)?,
            });
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Interior change points in hours.
    pub fn change_points(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    pub fn max_rate(&self) -> f64 {
        self.segments.iter().map(|s| s.rate).fold(0.0, f64::max)
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .map_or(0.0, |s| s.rate)
    }

    /// `integral_a^b rate(s) ds`.
    pub fn expected_counts(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && a < b && b <= 24.0) {
            return Err(Error::Interval { a, b });
        }
        Ok(self
            .segments
            .iter()
            .map(|s| (b.min(s.end) - a.max(s.start)).max(0.0) * s.rate)
            .sum())
    }
}

/// Per-week multiplicative rate factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverdispersionSpec {
    week_scale: Vec<f64>,
}

impl OverdispersionSpec {
    pub fn new(week_scale: Vec<f64>) -> Result<Self> {
        if week_scale.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidArgument("week scale factors must be positive".into()));
        }
        Ok(Self { week_scale })
    }

    /// All factors 1: no overdispersion.
    pub fn identity(m: usize) -> Self {
        Self {
            week_scale: vec![1.0; m],
        }
    }

    /// Alternates the given factors over `m` weeks.
    pub fn cycling(factors: &[f64], m: usize) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("no scale factors given".into()));
        }
        Self::new(factors.iter().copied().cycle().take(m).collect())
    }

    pub fn week_scale(&self) -> &[f64] {
        &self.week_scale
    }
}

/// Simulates `m` independent weeks by thinning a homogeneous process at the
/// maximum rate. Week `r` uses ChaCha stream `r` of `seed`, so weeks are
/// independent of each other and of `m`.
pub fn generate(rate: &TrueRate, m: usize, od: &OverdispersionSpec, seed: u64) -> Result<ArrivalDataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of weeks must be positive".into()));
    }
    if od.week_scale.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} week scale factors for {m} weeks",
            od.week_scale.len()
        )));
    }
    let weeks = od
        .week_scale
        .iter()
        .enumerate()
        .map(|(r, &scale)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            simulate_day(rate, scale, &mut rng)
        })
        .collect();
    ArrivalDataset::new(Weekday::Mon, weeks)
}

fn simulate_day(rate: &TrueRate, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let lambda_max = rate.max_rate() * scale;
    if lambda_max <= 0.0 {
        return Vec::new();
    }
    let gaps = Exp::new(lambda_max).expect("positive rate");
    let mut out: Vec<f64> = Vec::new();
    let mut t = 0.0;
    loop {
        t += gaps.sample(rng);
        if t >= 24.0 {
            break;
        }
        let keep = rate.rate_at(t) * scale / lambda_max;
        if rng.gen::<f64>() < keep {
            let mut s = t;
            if let Some(&last) = out.last() {
                if s <= last {
                    s = last.next_up();
                }
            }
            if s < 24.0 {
                out.push(s);
            }
        }
    }
    out
}
