//! Integer derivative-free search for the best feasible partition.
//!
//! [`solve`] runs a coordinate line search over the interior boundaries with
//! step expansion, nonmonotone acceptance against the last few accepted
//! values, and a sequential exterior penalty for the constraints.
//! [`brute_force`] enumerates every partition of a small grid and serves as
//! the reference optimum.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalRate;
use crate::error::{Error, Result};
use crate::ingest::ArrivalDataset;
use crate::partition::{
    canonicalize, starting_point, uniform_partition, EvalResult, Evaluator, Partition, PartitionGrid,
};
use crate::stattests::TestConfig;

/// Violation charged for an interval that cannot be tested.
pub const UNTESTABLE_VIOLATION: f64 = 1.0;

/// Default cap on the number of partitions [`brute_force`] will enumerate.
pub const BRUTE_FORCE_CAP: u128 = 2_000_000;

// sufficient decrease coefficient: accept when P <= ref - GAMMA * s^2
const GAMMA: f64 = 1e-9;
const MIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_evals: usize,
    /// Initial penalty parameter.
    pub penalty_eps: f64,
    /// Factor applied to the penalty parameter when the search stalls
    /// without a feasible point.
    pub penalty_shrink: f64,
    /// Number of recent accepted values defining the acceptance reference.
    pub memory: usize,
    pub initial_step: u32,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            penalty_eps: 1.0,
            penalty_shrink: 0.1,
            memory: 4,
            initial_step: 2,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.max_evals == 0 {
            return bad("evaluation budget must be at least 1".into());
        }
        if !(self.penalty_eps > 0.0 && self.penalty_eps.is_finite()) {
            return bad(format!("penalty parameter must be positive, got {}", self.penalty_eps));
        }
        if !(self.penalty_shrink > 0.0 && self.penalty_shrink < 1.0) {
            return bad(format!("penalty shrink must lie in (0, 1), got {}", self.penalty_shrink));
        }
        if self.memory == 0 {
            return bad("nonmonotone memory must be at least 1".into());
        }
        if self.initial_step == 0 {
            return bad("initial step must be at least 1".into());
        }
        Ok(())
    }
}

/// One evaluated point in the order it was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 1-based evaluation index.
    pub eval: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub best_x: Partition,
    pub best: EvalResult,
    pub feasible: bool,
    pub history: Vec<HistoryEntry>,
    pub evals_used: usize,
    /// No unit move improves the incumbent and it is feasible.
    pub converged: bool,
    pub final_eps: f64,
    pub seed: u64,
}

/// Sum of constraint violations of an evaluated partition: positive parts of
/// `g` and `h`, length shortfalls in hours, and a unit charge per untestable
/// interval.
pub fn constraint_violation(e: &EvalResult) -> f64 {
    e.intervals
        .iter()
        .map(|iv| {
            let tests = iv.g.map_or(0.0, |g| g.max(0.0)) + iv.h.map_or(0.0, |h| h.max(0.0));
            let untestable = if iv.is_untestable() { UNTESTABLE_VIOLATION } else { 0.0 };
            tests + iv.length_shortfall + untestable
        })
        .sum()
}

/// Exterior penalty function `f + violation / eps`.
pub fn penalized_value(e: &EvalResult, eps: f64) -> f64 {
    assert!(eps > 0.0, "penalty parameter must be positive");
    let v = constraint_violation(e);
    if v == 0.0 {
        e.objective
    } else {
        e.objective + v / eps
    }
}

/// Total order used to pick the reported point: feasible beats infeasible;
/// feasible points by objective, then fewer intervals, then smaller `x`;
/// infeasible points by total violation, then objective.
fn rank(a: &EvalResult, b: &EvalResult) -> Ordering {
    match (a.feasible, b.feasible) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => a
            .objective
            .total_cmp(&b.objective)
            .then(a.interval_count().cmp(&b.interval_count()))
            .then_with(|| a.x.cmp(&b.x)),
        (false, false) => constraint_violation(a)
            .total_cmp(&constraint_violation(b))
            .then(a.objective.total_cmp(&b.objective))
            .then_with(|| a.x.cmp(&b.x)),
    }
}

/// Memoised, budgeted evaluation.
struct Oracle<'a> {
    evaluator: Evaluator<'a>,
    memo: HashMap<Partition, Rc<EvalResult>>,
    history: Vec<HistoryEntry>,
    best: Option<Rc<EvalResult>>,
    max_evals: usize,
}

impl<'a> Oracle<'a> {
    fn exhausted(&self) -> bool {
        self.history.len() >= self.max_evals
    }

    /// `None` when the point is new and the budget is spent.
    fn eval(&mut self, p: &Partition) -> Option<Rc<EvalResult>> {
        if let Some(e) = self.memo.get(p) {
            return Some(Rc::clone(e));
        }
        if self.exhausted() {
            return None;
        }
        let e = Rc::new(self.evaluator.evaluate(p));
        self.history.push(HistoryEntry {
            eval: self.history.len() + 1,
            objective: e.objective,
            max_violation: e.max_violation,
            feasible: e.feasible,
        });
        if self.best.as_ref().is_none_or(|b| rank(&e, b) == Ordering::Less) {
            self.best = Some(Rc::clone(&e));
        }
        self.memo.insert(p.clone(), Rc::clone(&e));
        Some(e)
    }
}

fn shifted(x: &Partition, coord: usize, delta: i64, grid: &PartitionGrid) -> Partition {
    let mut raw: Vec<i64> = x.as_slice().iter().map(|&v| i64::from(v)).collect();
    raw[coord] += delta;
    canonicalize(&raw, grid).expect("length preserved")
}

enum Polish {
    Improved(Partition, f64),
    Stationary,
    Exhausted,
}

/// Neighbourhood tried once the coordinate search stalls: boundary
/// insertions at every free unit, interval merges, then `x +- e_i +- e_j`
/// over all coordinate pairs. Returns the first point beating `f_ref`,
/// restricted to feasible points when `feasible_only`.
#[allow(clippy::too_many_arguments)]
fn polish(
    oracle: &mut Oracle<'_>,
    x: &Partition,
    f_ref: f64,
    eps: f64,
    feasible_only: bool,
    grid: &PartitionGrid,
    rng: &mut ChaCha8Rng,
    probes: &mut usize,
) -> Polish {
    let b = grid.max_intervals();
    let base: Vec<i64> = x.as_slice().iter().map(|&v| i64::from(v)).collect();
    let mut local: Vec<Vec<i64>> = Vec::new();
    if let Some(spare) = (1..b).find(|&i| base[i] == base[i - 1] || base[i] == base[i + 1]) {
        for u in 1..i64::from(grid.units()) {
            if !base.contains(&u) {
                let mut raw = base.clone();
                raw[spare] = u;
                local.push(raw);
            }
        }
    }
    for i in 1..b {
        if base[i] != base[i - 1] && base[i] != base[i + 1] {
            let mut raw = base.clone();
            raw[i] = base[i + 1];
            local.push(raw);
        }
    }
    local.shuffle(rng);
    let mut pairs: Vec<Vec<i64>> = Vec::new();
    for i in 1..b {
        for j in i + 1..b {
            for (di, dj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let mut raw = base.clone();
                raw[i] += di;
                raw[j] += dj;
                pairs.push(raw);
            }
        }
    }
    pairs.shuffle(rng);
    for raw in local.into_iter().chain(pairs) {
        let cand = canonicalize(&raw, grid).expect("length preserved");
        if &cand == x {
            continue;
        }
        *probes += 1;
        let Some(e) = oracle.eval(&cand) else { return Polish::Exhausted };
        let fc = penalized_value(&e, eps);
        if fc < f_ref - GAMMA && (e.feasible || !feasible_only) {
            return Polish::Improved(cand, fc);
        }
    }
    Polish::Stationary
}

/// Solves the constrained problem from the hourly starting point, or from
/// [`uniform_partition`] on grids where the hourly start is undefined.
pub fn solve(
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
    scfg: &SolverConfig,
) -> Result<SolverRun> {
    let start = starting_point(grid).unwrap_or_else(|_| uniform_partition(grid));
    solve_from(ds, er, w, cfg, grid, scfg, start)
}

/// Solves the constrained problem from an explicit starting partition.
pub fn solve_from(
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
    scfg: &SolverConfig,
    start: Partition,
) -> Result<SolverRun> {
    scfg.validate()?;
    if start.as_slice().len() != grid.max_intervals() + 1 {
        return Err(Error::Grid("starting point does not match the grid".into()));
    }
    let mut oracle = Oracle {
        evaluator: Evaluator::new(ds, er, w, *cfg, *grid)?,
        memo: HashMap::new(),
        history: Vec::new(),
        best: None,
        max_evals: scfg.max_evals,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
    let b = grid.max_intervals();
    let mut eps = scfg.penalty_eps;

    let mut x = start;
    let mut fx = penalized_value(&oracle.eval(&x).expect("budget >= 1"), eps);
    let mut memory: VecDeque<f64> = VecDeque::from([fx]);
    let mut steps = vec![scfg.initial_step; b + 1];
    let mut coords: Vec<usize> = (1..b).collect();
    let mut converged = false;
    // memo hits cost no budget; bound the total number of probes as well
    let max_probes = scfg.max_evals.saturating_mul(50).max(1000);
    let mut probes = 0usize;

    'outer: while !oracle.exhausted() && probes < max_probes {
        coords.shuffle(&mut rng);
        let mut accepted_any = false;
        for &i in &coords {
            let reference = memory.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s = steps[i];
            let mut dirs = [1i64, -1];
            dirs.shuffle(&mut rng);
            let mut moved = false;
            for dir in dirs {
                let cand = shifted(&x, i, dir * i64::from(s), grid);
                if cand == x {
                    continue;
                }
                probes += 1;
                let Some(e) = oracle.eval(&cand) else { break 'outer };
                let fc = penalized_value(&e, eps);
                if fc > reference - GAMMA * f64::from(s) * f64::from(s) {
                    continue;
                }
                // expand while the line keeps improving
                let (mut best_x, mut best_f, mut step) = (cand, fc, s);
                loop {
                    let next_step = step.saturating_mul(2);
                    let further = shifted(&x, i, dir * i64::from(next_step), grid);
                    if further == best_x {
                        break;
                    }
                    probes += 1;
                    let Some(e) = oracle.eval(&further) else { break };
                    let ff = penalized_value(&e, eps);
                    if ff > best_f - GAMMA * f64::from(next_step) * f64::from(next_step) {
                        break;
                    }
                    (best_x, best_f, step) = (further, ff, next_step);
                }
                x = best_x;
                fx = best_f;
                steps[i] = step;
                memory.push_back(fx);
                while memory.len() > scfg.memory {
                    memory.pop_front();
                }
                moved = true;
                break;
            }
            if moved {
                accepted_any = true;
            } else {
                steps[i] = (steps[i] / 2).max(1);
            }
            if oracle.exhausted() {
                break 'outer;
            }
        }

        if !accepted_any && coords.iter().all(|&i| steps[i] == 1) {
            let have_feasible = oracle.best.as_ref().is_some_and(|e| e.feasible);
            if have_feasible {
                let incumbent = oracle.best.as_ref().expect("feasible best");
                let from = canonicalize(&incumbent.x.iter().map(|&v| i64::from(v)).collect::<Vec<_>>(), grid)?;
                let f_best = incumbent.objective;
                match polish(&mut oracle, &from, f_best, eps, true, grid, &mut rng, &mut probes) {
                    Polish::Improved(px, pf) => {
                        x = px;
                        fx = pf;
                        memory = VecDeque::from([fx]);
                        steps.iter_mut().for_each(|s| *s = scfg.initial_step);
                        continue;
                    }
                    Polish::Stationary => {
                        converged = true;
                        break;
                    }
                    Polish::Exhausted => break,
                }
            }
            match polish(&mut oracle, &x, fx, eps, false, grid, &mut rng, &mut probes) {
                Polish::Improved(px, pf) => {
                    x = px;
                    fx = pf;
                    memory = VecDeque::from([fx]);
                    steps.iter_mut().for_each(|s| *s = scfg.initial_step);
                    continue;
                }
                Polish::Stationary => {}
                Polish::Exhausted => break,
            }
            if eps * scfg.penalty_shrink < MIN_EPS {
                break;
            }
            eps *= scfg.penalty_shrink;
            fx = penalized_value(&oracle.eval(&x).expect("memoised"), eps);
            memory = VecDeque::from([fx]);
            steps.iter_mut().for_each(|s| *s = scfg.initial_step);
        }
    }

    let best = oracle.best.expect("at least one evaluation");
    let best_x = canonicalize(
        &best.x.iter().map(|&v| i64::from(v)).collect::<Vec<_>>(),
        grid,
    )?;
    Ok(SolverRun {
        best_x,
        feasible: best.feasible,
        best: (*best).clone(),
        evals_used: oracle.history.len(),
        history: oracle.history,
        converged,
        final_eps: eps,
        seed: scfg.seed,
    })
}

/// Runs [`solve`] with seeds `seed, seed + 1, ...` and keeps the best run.
pub fn solve_restarts(
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
    scfg: &SolverConfig,
    restarts: usize,
) -> Result<SolverRun> {
    let mut best: Option<SolverRun> = None;
    for r in 0..restarts.max(1) {
        let run_cfg = SolverConfig {
            seed: scfg.seed.wrapping_add(r as u64),
            ..scfg.clone()
        };
        let run = solve(ds, er, w, cfg, grid, &run_cfg)?;
        if best.as_ref().is_none_or(|b| rank(&run.best, &b.best) == Ordering::Less) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Exhaustive search result.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Optimal feasible partition, or `None` when no partition is feasible.
    pub best: Option<(Partition, EvalResult)>,
    pub evaluated: usize,
}

/// Number of partitions with at most `b` intervals on a `g`-unit grid.
pub fn partition_count(g: u32, b: usize) -> u128 {
    let n = u128::from(g.saturating_sub(1));
    let mut total = 0u128;
    let mut binom = 1u128;
    for j in 0..b.min(g as usize) as u128 {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(n - j) / (j + 1);
    }
    total
}

/// Enumerates every partition of the grid and returns the best feasible one
/// (minimum objective, then fewer intervals, then smallest `x`).
pub fn brute_force(
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
) -> Result<BruteForceResult> {
    brute_force_capped(ds, er, w, cfg, grid, BRUTE_FORCE_CAP)
}

pub fn brute_force_capped(
    ds: &ArrivalDataset,
    er: &EmpiricalRate,
    w: f64,
    cfg: &TestConfig,
    grid: &PartitionGrid,
    cap: u128,
) -> Result<BruteForceResult> {
    let size = partition_count(grid.units(), grid.max_intervals());
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let evaluator = Evaluator::new(ds, er, w, *cfg, *grid)?;
    let mut best: Option<EvalResult> = None;
    let mut evaluated = 0usize;
    let mut interior = Vec::with_capacity(grid.max_intervals());
    let mut visit = |interior: &[u32]| {
        let mut raw = Vec::with_capacity(grid.max_intervals() + 1);
        raw.push(0);
        raw.extend(interior.iter().map(|&v| i64::from(v)));
        raw.resize(grid.max_intervals() + 1, i64::from(grid.units()));
        let p = canonicalize(&raw, grid).expect("length matches");
        let e = evaluator.evaluate(&p);
        evaluated += 1;
        if e.feasible && best.as_ref().is_none_or(|b| rank(&e, b) == Ordering::Less) {
            best = Some(e);
        }
    };
    enumerate(1, grid.units(), grid.max_intervals() - 1, &mut interior, &mut visit);
    let best = best.map(|e| {
        let raw: Vec<i64> = e.x.iter().map(|&v| i64::from(v)).collect();
        (canonicalize(&raw, grid).expect("length matches"), e)
    });
    Ok(BruteForceResult { best, evaluated })
}

/// Visits every increasing subset of `from..units` with at most `left` items.
fn enumerate(from: u32, units: u32, left: usize, chosen: &mut Vec<u32>, visit: &mut impl FnMut(&[u32])) {
    visit(chosen);
    if left == 0 {
        return;
    }
    for v in from..units {
        chosen.push(v);
        enumerate(v + 1, units, left - 1, chosen, visit);
        chosen.pop();
    }
}
