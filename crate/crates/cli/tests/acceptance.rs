//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use arrivalfit::solver::{brute_force, constraint_violation};
use arrivalfit::stattests::{chi2_quantile, cu_ks_test, dispersion_test, ks_critical};
use arrivalfit::{
    build_empirical, canonicalize, evaluate, generate, load_arrivals, solve, starting_point, ArrivalDataset,
    EmpiricalRate, OverdispersionSpec, PartitionGrid, SolverConfig, TestConfig, TrueRate, Weekday,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_arrivalfit");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn data(rate: &TrueRate, m: usize, seed: u64) -> (ArrivalDataset, EmpiricalRate) {
    let ds = generate(rate, m, &OverdispersionSpec::identity(m), seed).unwrap();
    let er = build_empirical(&ds, 96).unwrap();
    (ds, er)
}

fn ks_size() -> Verdict {
    let t = Instant::now();
    let cfg = TestConfig::default();
    let rate = TrueRate::constant(1.25);
    let (mut accepted, mut pooled) = (0, 0);
    for seed in 0..1000 {
        let ds = generate(&rate, 10, &OverdispersionSpec::identity(10), seed).unwrap();
        let r = cu_ks_test(&ds, 8.0, 12.0, &cfg).unwrap();
        let r = r.tested().expect("k > 0");
        pooled += r.k;
        accepted += usize::from(r.accepted);
    }
    let frac = accepted as f64 / 1000.0;
    let el = t.elapsed();
    verdict(
        (0.93..=0.97).contains(&frac) && within(el, 10),
        format!("acceptance {frac:.3} (mean k {:.1}) in {el:.2?}", pooled as f64 / 1000.0),
    )
}

fn dispersion_size_power() -> Verdict {
    let t = Instant::now();
    let cfg = TestConfig::default();
    let rate = TrueRate::constant(2.5);
    let m = 13;
    let run = |od: &OverdispersionSpec| {
        let mut accepted = 0;
        for seed in 0..1000 {
            let ds = generate(&rate, m, od, seed).unwrap();
            let counts = ds.count_in_interval(8.0, 12.0).unwrap().per_week;
            accepted += usize::from(dispersion_test(&counts, &cfg).unwrap().tested().unwrap().accepted);
        }
        accepted as f64 / 1000.0
    };
    let size = run(&OverdispersionSpec::identity(m));
    let power = 1.0 - run(&OverdispersionSpec::cycling(&[1.0, 3.0], m).unwrap());
    let el = t.elapsed();
    verdict(
        (0.93..=0.97).contains(&size) && power > 0.9 && within(el, 10),
        format!("acceptance {size:.3}, rejection with scales {{1,3}} {power:.3}, in {el:.2?}"),
    )
}

// upper tail of chi-squared with even dof: e^{-x/2} sum_{k<dof/2} (x/2)^k / k!
fn chi2_sf_even(dof: usize, x: f64) -> f64 {
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..dof / 2 {
        term *= h / k as f64;
        sum += term;
    }
    (-h).exp() * sum
}

fn distribution_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10;
    let mut draws: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            u.sort_by(f64::total_cmp);
            u.iter()
                .enumerate()
                .map(|(j, &t)| ((j + 1) as f64 / n as f64 - t).max(t - j as f64 / n as f64))
                .fold(0.0, f64::max)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let mc = draws[(0.95 * draws.len() as f64).ceil() as usize - 1];
    let crit = ks_critical(n, 0.05).unwrap();

    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf_even(12, mid) > 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let q = chi2_quantile(12, 0.05);
    verdict(
        (crit - mc).abs() <= 0.003 && (q - 21.026).abs() <= 1e-3 && (q - oracle).abs() <= 1e-6,
        format!("ks_critical(10) {crit:.4} vs Monte Carlo {mc:.4}; chi2 quantile {q:.5} vs oracle {oracle:.5}"),
    )
}

fn fit_error_identity() -> Verdict {
    let rate = TrueRate::parse("0-5:1,5-9:9,9-17:5,17-24:7").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rel: f64 = 0.0;
    let mut bit_exact = true;
    let mut checked = 0;
    for (g, b) in [(24u32, 24usize), (96, 24), (48, 10), (8, 8)] {
        let grid = PartitionGrid::new(g, b, 1).unwrap();
        let cells_per_unit = 96 / g as usize;
        for seed in 0..50 {
            let (ds, er) = data(&rate, 9, 300 + seed);
            let raw: Vec<i64> = (0..=b).map(|_| rng.gen_range(0..=i64::from(g))).collect();
            let p = canonicalize(&raw, &grid).unwrap();
            let e = evaluate(&p, &ds, &er, 1.0, &TestConfig::default(), &grid).unwrap();
            let fine = er.rates();

            let mut variance_sum = 0.0;
            for iv in &e.intervals {
                let cells = &fine[iv.lo_unit as usize * cells_per_unit..iv.hi_unit as usize * cells_per_unit];
                let n = cells.len() as f64;
                let mean = cells.iter().sum::<f64>() / n;
                variance_sum += n * (cells.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n);
            }
            worst_rel = worst_rel.max((e.fit_error - variance_sum).abs() / variance_sum.max(f64::MIN_POSITIVE));

            let mut cell_sum = 0.0;
            for (c, &fc) in fine.iter().enumerate() {
                let unit = (c / cells_per_unit) as u32;
                let iv = e.intervals.iter().find(|iv| iv.lo_unit <= unit && unit < iv.hi_unit).unwrap();
                cell_sum += (iv.rate - fc) * (iv.rate - fc);
            }
            bit_exact &= cell_sum.to_bits() == e.fit_error.to_bits();
            checked += 1;
        }
    }
    verdict(
        worst_rel <= 1e-10 && bit_exact,
        format!("{checked} partitions, worst relative gap {worst_rel:.2e}, cell-by-cell bit-exact {bit_exact}"),
    )
}

fn oracle_equivalence() -> Verdict {
    let t = Instant::now();
    let grid = PartitionGrid::new(8, 8, 1).unwrap();
    let cfg = TestConfig::default();
    let specs = [
        "0-6:1,6-12:8,12-18:4,18-24:6",
        "0-9:2,9-15:10,15-24:5",
        "0-3:0.5,3-12:6,12-21:9,21-24:3",
        "0-12:4,12-24:7",
        "0-6:3,6-9:12,9-18:6,18-24:2",
        "0-24:5",
    ];
    let mut instances = 0;
    let mut worst = 20;
    let mut beaten = false;
    let mut notes = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let (ds, er) = data(&TrueRate::parse(spec).unwrap(), 10, 100 + i as u64);
        let bf = brute_force(&ds, &er, 1.0, &cfg, &grid).unwrap();
        let Some((_, opt)) = bf.best else {
            notes.push(format!("instance {i} has no feasible partition"));
            continue;
        };
        instances += 1;
        let mut hits = 0;
        for seed in 0..20 {
            let run = solve(&ds, &er, 1.0, &cfg, &grid, &SolverConfig { seed, ..Default::default() }).unwrap();
            let tol = 1e-9 * opt.objective.abs().max(1.0);
            if run.feasible && (run.best.objective - opt.objective).abs() <= tol {
                hits += 1;
            }
            beaten |= run.feasible && run.best.objective < opt.objective - tol;
        }
        worst = worst.min(hits);
    }
    let el = t.elapsed();
    notes.insert(0, format!("{instances} instances, worst {worst}/20 runs at the optimum, in {el:.2?}"));
    verdict(instances >= 5 && worst >= 18 && !beaten && within(el, 60), notes.join("; "))
}

fn ground_truth_recovery() -> Verdict {
    let t = Instant::now();
    let truth = TrueRate::parse("0-6:2,6-11:12,11-18:6,18-24:10").unwrap();
    let grid = PartitionGrid::default();
    let cfg = TestConfig::default();
    let mut recovered = 0;
    let mut feasible = 0;
    for seed in 0..20u64 {
        let (ds, er) = data(&truth, 13, 1000 + seed);
        let run = solve(&ds, &er, 1.0, &cfg, &grid, &SolverConfig { seed, ..Default::default() }).unwrap();
        let b = run.best_x.boundaries_hours(&grid);
        let unit = grid.unit_hours();
        if truth.change_points().iter().all(|c| b.iter().any(|x| (x - c).abs() <= unit + 1e-9)) {
            recovered += 1;
        }
        feasible += usize::from(run.feasible);
    }
    let el = t.elapsed();
    verdict(
        recovered >= 16 && within(el, 300),
        format!("{recovered}/20 runs place a boundary within one unit of every change point ({feasible}/20 feasible) in {el:.2?}"),
    )
}

fn infeasible_start_recovery() -> Verdict {
    let rate = TrueRate::parse("0-6:0.15,6-20:8,20-24:3").unwrap();
    let grid = PartitionGrid::default();
    let cfg = TestConfig::default();
    let (ds, er) = data(&rate, 13, 77);
    let start = evaluate(&starting_point(&grid).unwrap(), &ds, &er, 1.0, &cfg, &grid).unwrap();
    let ks_failures = start
        .intervals
        .iter()
        .filter(|iv| iv.ks.tested().is_none_or(|r| !r.accepted))
        .count();
    let run = solve(&ds, &er, 1.0, &cfg, &grid, &SolverConfig::default()).unwrap();
    verdict(
        !start.feasible && ks_failures >= 1 && run.feasible && run.evals_used <= 5000,
        format!(
            "hourly start fails {ks_failures} KS constraints; solve returns feasible={} with {} intervals after {} evaluations",
            run.feasible,
            run.best.interval_count(),
            run.evals_used
        ),
    )
}

fn weight_monotonicity() -> Verdict {
    let grid = PartitionGrid::new(8, 8, 1).unwrap();
    let cfg = TestConfig::default();
    // a gentle ramp: neighbouring units can merge and still pass both tests
    let rate = TrueRate::parse("0-3:2,3-6:3,6-9:4,9-12:5,12-15:6,15-18:5,18-21:4,21-24:3").unwrap();
    let (ds, er) = data(&rate, 6, 100);
    let mut es = Vec::new();
    let mut ss = Vec::new();
    for w in [0.0, 0.1, 1.0, 10.0, 1000.0] {
        let (_, e) = brute_force(&ds, &er, w, &cfg, &grid).unwrap().best.expect("feasible toy instance");
        es.push(e.fit_error);
        ss.push(e.smoothness);
    }
    let s_ok = ss.windows(2).all(|p| p[1] <= p[0]);
    let e_ok = es.windows(2).all(|p| p[1] >= p[0]);
    let strict = ss.windows(2).any(|p| p[1] < p[0]) && es.windows(2).any(|p| p[1] > p[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    verdict(s_ok && e_ok && strict, format!("S = [{}], E = [{}]", fmt(&ss), fmt(&es)))
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn overdispersion_refusal(dir: &Path) -> Verdict {
    let csv = dir.join("overdispersed.csv");
    let csv_s = csv.to_str().unwrap();
    let sim = run_cli(&[
        "simulate", "--segments", "0-6:2,6-11:12,11-18:6,18-24:10", "--weeks", "13", "--seed", "3", "--scales", "1,3",
        "--weekday", "tue", "--out", csv_s,
    ]);
    if !sim.status.success() {
        return verdict(false, format!("simulate failed: {}", String::from_utf8_lossy(&sim.stderr)));
    }
    let fit = run_cli(&["fit", "--input", csv_s, "--weekday", "tue", "--weeks", "13", "--seed", "1"]);
    let report = dir.join("overdispersed.report.json");
    let Ok(text) = std::fs::read_to_string(&report) else {
        return verdict(false, "no report written".into());
    };
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let violation = doc["solver"]["violation"].as_f64().unwrap();
    let reported_feasible = doc["solver"]["feasible"].as_bool().unwrap();

    let ds = load_arrivals(&csv, Weekday::Tue, 13).unwrap();
    let er = build_empirical(&ds, 96).unwrap();
    let grid = PartitionGrid::default();
    let start = evaluate(&starting_point(&grid).unwrap(), &ds, &er, 1.0, &TestConfig::default(), &grid).unwrap();
    let start_violation = constraint_violation(&start);
    let code = fit.status.code();
    verdict(
        code == Some(2) && !reported_feasible && violation > 0.0 && violation <= start_violation,
        format!("exit {code:?}, incumbent violation {violation:.3} (hourly start {start_violation:.3})"),
    )
}

fn determinism(dir: &Path) -> Verdict {
    let csv = dir.join("plain.csv");
    let csv_s = csv.to_str().unwrap();
    run_cli(&["simulate", "--segments", "0-7:2,7-12:9,12-24:5", "--weeks", "13", "--seed", "8", "--out", csv_s]);
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let out_s = out.to_str().unwrap();
        run_cli(&["fit", "--input", csv_s, "--seed", "7", "--restarts", "2", "--out-dir", out_s]);
        run_cli(&["sweep", "--input", csv_s, "--seed", "7", "--weights", "0,1,10", "--out-dir", out_s]);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        reports.push(files);
    }
    let same = reports[0] == reports[1];
    verdict(
        same && reports[0].len() == 12,
        format!("{} output files, byte-identical across runs: {same}", reports[0].len()),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("KS size calibration", Box::new(ks_size)),
        ("dispersion size and power", Box::new(dispersion_size_power)),
        ("distribution oracles", Box::new(distribution_oracles)),
        ("fit-error identity", Box::new(fit_error_identity)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("ground-truth recovery", Box::new(ground_truth_recovery)),
        ("infeasible-start recovery", Box::new(infeasible_start_recovery)),
        ("w-monotonicity", Box::new(weight_monotonicity)),
        ("overdispersion refusal", Box::new(|| overdispersion_refusal(dir.path()))),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!("{} criterion {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
