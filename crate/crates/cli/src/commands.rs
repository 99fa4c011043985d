use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use arrivalfit::ingest::write_arrivals;
use arrivalfit::partition::uniform_partition;
use arrivalfit::report::empirical_csv;
use arrivalfit::solver::{constraint_violation, solve_restarts};
use arrivalfit::{
    build_empirical, evaluate, generate, load_arrivals, render, starting_point, ArrivalDataset, OverdispersionSpec,
    Partition, ReportBundle, ReportMeta, SolverConfig, SolverRun, TrueRate,
};
use chrono::Datelike;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{FileConfig, Format, Overrides, RunConfig};
use crate::output::{sibling, write_atomic};
use crate::{Cli, Command};

/// Exit status when no feasible partition was found.
pub const EXIT_INFEASIBLE: u8 = 2;

pub fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => {
            let o = Overrides {
                weekday: a.weekday.clone(),
                weeks: a.weeks,
                seed: a.seed,
                ..Default::default()
            };
            let cfg = RunConfig::resolve(&o, &file)?;
            simulate(&cfg, &a.segments, &a.scales, a.start, &a.out)
        }
        Command::Bin(a) => {
            let o = Overrides {
                weekday: a.data.weekday.clone(),
                weeks: a.weeks,
                cells: a.cells,
                ..Default::default()
            };
            let cfg = RunConfig::resolve(&o, &file)?;
            let ds = load(&a.data.input, &cfg)?;
            let csv = empirical_csv(&build_empirical(&ds, cfg.cells)?);
            match &a.out {
                Some(path) => write_atomic(path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(a) => {
            let mut o = Overrides {
                weekday: a.data.weekday.clone(),
                weeks: a.weeks,
                weight: a.weight,
                format: a.format,
                ..Default::default()
            };
            a.model.apply(&mut o);
            let cfg = RunConfig::resolve(&o, &file)?;
            check(&cfg, &a.data.input, &a.boundaries)
        }
        Command::Fit(a) => {
            let mut o = Overrides {
                weekday: a.data.weekday.clone(),
                weeks: a.weeks,
                weight: a.weight,
                ..Default::default()
            };
            a.model.apply(&mut o);
            a.solver.apply(&mut o);
            a.output.apply(&mut o);
            let cfg = RunConfig::resolve(&o, &file)?;
            fit(&cfg, &a.data.input)
        }
        Command::Sweep(a) => {
            let mut o = Overrides {
                weekday: a.data.weekday.clone(),
                ..Default::default()
            };
            a.model.apply(&mut o);
            a.solver.apply(&mut o);
            a.output.apply(&mut o);
            let cfg = RunConfig::resolve(&o, &file)?;
            sweep(&cfg, &a.data.input, &a.weeks, &a.weights)
        }
    }
}

fn load(input: &Path, cfg: &RunConfig) -> Result<ArrivalDataset> {
    load_arrivals(input, cfg.weekday, cfg.weeks).with_context(|| format!("loading {}", input.display()))
}

fn simulate(cfg: &RunConfig, segments: &str, scales: &[f64], start: chrono::NaiveDate, out: &Path) -> Result<ExitCode> {
    let rate = TrueRate::parse(segments)?;
    let od = if scales.is_empty() {
        OverdispersionSpec::identity(cfg.weeks)
    } else {
        OverdispersionSpec::cycling(scales, cfg.weeks)?
    };
    let ds = generate(&rate, cfg.weeks, &od, cfg.seed)?;
    let offset = (7 + cfg.weekday.num_days_from_monday() - start.weekday().num_days_from_monday()) % 7;
    let first = start + chrono::Days::new(u64::from(offset));
    let mut buf = Vec::new();
    write_arrivals(&ds, first, &mut buf)?;
    write_atomic(out, &buf)?;
    eprintln!(
        "wrote {} arrivals over {} weeks from {} to {}",
        ds.total_arrivals(),
        cfg.weeks,
        first,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn meta(cfg: &RunConfig, solver: bool) -> ReportMeta {
    ReportMeta {
        weight: cfg.weight,
        weeks: cfg.weeks,
        alpha: cfg.alpha,
        ell_hours: cfg.ell_hours,
        budget: solver.then_some(cfg.budget),
        seed: solver.then_some(cfg.seed),
        feasible: false,
    }
}

fn check(cfg: &RunConfig, input: &Path, boundaries: &[f64]) -> Result<ExitCode> {
    let grid = cfg.partition_grid()?;
    let p = if boundaries.is_empty() {
        starting_point(&grid).context("the hourly partition needs --grid to be a multiple of 24; pass --boundaries")?
    } else {
        Partition::from_hours(boundaries, &grid)?
    };
    let ds = load(input, cfg)?;
    let er = build_empirical(&ds, cfg.cells)?;
    let e = evaluate(&p, &ds, &er, cfg.weight, &cfg.test_config()?, &grid)?;
    let bundle = render(&e, &er, &meta(cfg, false));
    match cfg.format {
        Format::Json => print!("{}", bundle.to_json()?),
        Format::Csv => print!("{}", bundle.table_csv()),
        Format::Text => print!("{}", bundle.to_text()),
    }
    Ok(ExitCode::SUCCESS)
}

struct FitOutcome {
    bundle: ReportBundle,
    json: String,
    feasible: bool,
    violation: f64,
}

fn fit_dataset(ds: &ArrivalDataset, cfg: &RunConfig) -> Result<FitOutcome> {
    let grid = cfg.partition_grid()?;
    let er = build_empirical(ds, cfg.cells)?;
    let scfg = SolverConfig {
        max_evals: cfg.budget,
        seed: cfg.seed,
        ..SolverConfig::default()
    };
    let run: SolverRun = solve_restarts(ds, &er, cfg.weight, &cfg.test_config()?, &grid, &scfg, cfg.restarts)?;
    let bundle = render(&run.best, &er, &meta(cfg, true));
    let violation = constraint_violation(&run.best);
    let doc = json!({
        "report": &bundle,
        "solver": {
            "best_x": run.best_x.as_slice(),
            "feasible": run.feasible,
            "violation": violation,
            "converged": run.converged,
            "evals_used": run.evals_used,
            "final_eps": run.final_eps,
            "seed": run.seed,
            "restarts": cfg.restarts,
            "start": starting_point(&grid).unwrap_or_else(|_| uniform_partition(&grid)).as_slice(),
            "history": &run.history,
        }
    });
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    Ok(FitOutcome {
        feasible: run.feasible,
        violation,
        bundle,
        json,
    })
}

fn write_outputs(input: &Path, cfg: &RunConfig, tag: &str, out: &FitOutcome) -> Result<()> {
    let dir = cfg.out_dir.as_deref();
    for (suffix, contents) in [
        (".report.json", out.json.clone()),
        (".steps.csv", out.bundle.steps_csv()),
        (".fine.csv", out.bundle.fine_csv()),
    ] {
        let path = sibling(input, dir, tag, suffix);
        write_atomic(&path, contents.as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn fit(cfg: &RunConfig, input: &Path) -> Result<ExitCode> {
    let ds = load(input, cfg)?;
    let out = fit_dataset(&ds, cfg)?;
    write_outputs(input, cfg, "", &out)?;
    match cfg.format {
        Format::Json => print!("{}", out.json),
        Format::Csv => print!("{}", out.bundle.table_csv()),
        Format::Text => print!("{}", out.bundle.to_text()),
    }
    if out.feasible {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "no feasible partition found within the budget; reported the incumbent with the smallest violation ({:.6})",
            out.violation
        );
        Ok(ExitCode::from(EXIT_INFEASIBLE))
    }
}

fn sweep(cfg: &RunConfig, input: &Path, weeks: &[usize], weights: &[f64]) -> Result<ExitCode> {
    let week_list = if weeks.is_empty() { vec![cfg.weeks] } else { weeks.to_vec() };
    let weight_list = if weights.is_empty() { vec![cfg.weight] } else { weights.to_vec() };
    let mut settings = Vec::new();
    for &m in &week_list {
        for &w in &weight_list {
            let mut tag = String::new();
            if !weeks.is_empty() {
                let _ = write!(tag, ".m{m}");
            }
            if !weights.is_empty() {
                let _ = write!(tag, ".w{w}");
            }
            let c = RunConfig {
                weeks: m,
                weight: w,
                ..cfg.clone()
            };
            c.validate()?;
            settings.push((tag, c));
        }
    }
    let mut data = Vec::new();
    for &m in &week_list {
        data.push((m, load(input, &RunConfig { weeks: m, ..cfg.clone() })?));
    }
    let results: Vec<Result<FitOutcome>> = settings
        .par_iter()
        .map(|(_, c)| {
            let ds = &data.iter().find(|(m, _)| *m == c.weeks).expect("loaded").1;
            fit_dataset(ds, c)
        })
        .collect();

    let mut all_feasible = true;
    let mut summary = String::from("setting,weeks,weight,feasible,intervals,E,S,f\n");
    let mut text = format!(
        "{:<14} {:>5} {:>8} {:>9} {:>9} {:>12} {:>12} {:>12}\n",
        "setting", "m", "w", "feasible", "intervals", "E", "S", "f"
    );
    let mut rows = Vec::new();
    for ((tag, c), res) in settings.iter().zip(results) {
        let out = res?;
        write_outputs(input, c, tag, &out)?;
        all_feasible &= out.feasible;
        let b = &out.bundle;
        let name = if tag.is_empty() { "-" } else { tag.trim_start_matches('.') };
        let _ = writeln!(
            summary,
            "{name},{},{},{},{},{},{},{}",
            c.weeks,
            c.weight,
            out.feasible,
            b.step_function.len(),
            b.fit_error,
            b.smoothness,
            b.objective
        );
        rows.push(json!({
            "setting": name,
            "weeks": c.weeks,
            "weight": c.weight,
            "feasible": out.feasible,
            "intervals": b.step_function.len(),
            "E": b.fit_error,
            "S": b.smoothness,
            "f": b.objective,
        }));
        let _ = writeln!(
            text,
            "{name:<14} {:>5} {:>8} {:>9} {:>9} {:>12.3} {:>12.3} {:>12.3}",
            c.weeks,
            c.weight,
            out.feasible,
            b.step_function.len(),
            b.fit_error,
            b.smoothness,
            b.objective
        );
    }
    match cfg.format {
        Format::Csv => print!("{summary}"),
        Format::Text => print!("{text}"),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rows)?;
            s.push('\n');
            print!("{s}");
        }
    }
    if all_feasible {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("at least one setting has no feasible partition within the budget");
        Ok(ExitCode::from(EXIT_INFEASIBLE))
    }
}
