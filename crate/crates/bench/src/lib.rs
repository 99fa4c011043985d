//! Fixtures shared by the benchmarks.

use arrivalfit::{build_empirical, generate, ArrivalDataset, EmpiricalRate, OverdispersionSpec, TrueRate};

/// A four-segment day simulated over `m` weeks.
pub fn fixture(m: usize, seed: u64) -> (ArrivalDataset, EmpiricalRate) {
    let rate = TrueRate::parse("0-6:2,6-11:12,11-18:6,18-24:10").expect("valid rate");
    let ds = generate(&rate, m, &OverdispersionSpec::identity(m), seed).expect("simulated data");
    let er = build_empirical(&ds, 96).expect("empirical rate");
    (ds, er)
}
