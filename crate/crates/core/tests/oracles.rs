use arrivalfit::stattests::special::{gamma_p, ln_gamma};
use arrivalfit::stattests::{
    chi2_p_value, chi2_quantile, cu_ks_test, dispersion_test, kolmogorov_tail, ks_cdf, ks_critical, ks_p_value,
};
use arrivalfit::{generate, OverdispersionSpec, TestConfig, TrueRate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma;

fn mc_ks_sample(n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    u.iter()
        .enumerate()
        .map(|(j, &t)| ((j + 1) as f64 / nf - t).max(t - j as f64 / nf))
        .fold(0.0, f64::max)
}

#[test]
fn chi2_against_statrs() {
    for dof in [1usize, 2, 4, 7, 12, 25, 60] {
        let dist = ChiSquared::new(dof as f64).unwrap();
        for alpha in [0.01, 0.05, 0.5] {
            // statrs' own inverse is coarse, so go through its cdf
            let q = chi2_quantile(dof, alpha);
            assert!((1.0 - dist.cdf(q) - alpha).abs() < 1e-9, "dof {dof} alpha {alpha}: {q}");
        }
        for x in [0.5, 3.0, 11.0, 40.0] {
            assert!((chi2_p_value(dof, x) - (1.0 - dist.cdf(x))).abs() < 1e-10);
        }
    }
}

#[test]
fn special_functions_against_statrs() {
    for x in [0.1, 0.5, 1.0, 2.5, 7.0, 31.5, 170.2] {
        assert!((ln_gamma(x) - gamma::ln_gamma(x)).abs() < 1e-10 * gamma::ln_gamma(x).abs().max(1.0));
    }
    for (a, x) in [(0.5, 0.2), (3.0, 2.0), (6.0, 9.0), (30.0, 25.0), (0.5, 40.0)] {
        assert!((gamma_p(a, x) - gamma::gamma_lr(a, x)).abs() < 1e-12);
    }
}

#[test]
fn ks_cdf_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [3usize, 8, 25] {
        let draws: Vec<f64> = (0..200_000).map(|_| mc_ks_sample(n, &mut rng)).collect();
        for d in [0.15, 0.25, 0.4, 0.6] {
            let emp = draws.iter().filter(|&&x| x <= d).count() as f64 / draws.len() as f64;
            // 4 standard errors of a binomial proportion
            let se = (emp * (1.0 - emp) / draws.len() as f64).sqrt().max(1e-4);
            assert!((ks_cdf(n, d) - emp).abs() < 4.0 * se, "n {n} d {d}: {} vs {emp}", ks_cdf(n, d));
        }
    }
}

#[test]
fn ks_large_n_close_to_kolmogorov() {
    for n in [141usize, 400, 2000] {
        for x in [0.8, 1.0, 1.36] {
            let d = x / (n as f64).sqrt();
            assert!((ks_p_value(n, d).unwrap() - kolmogorov_tail(x)).abs() < 0.02);
        }
        let c = ks_critical(n, 0.05).unwrap();
        assert!((c * (n as f64).sqrt() - 1.358).abs() < 0.02, "n {n}: {c}");
    }
}

#[test]
fn synthetic_counts_are_poisson() {
    let rate = TrueRate::parse("0-8:1.5,8-16:5,16-24:3").unwrap();
    let m = 400;
    let ds = generate(&rate, m, &OverdispersionSpec::identity(m), 21).unwrap();
    for (a, b) in [(0.0, 8.0), (9.0, 12.0), (16.0, 24.0)] {
        let counts = ds.count_in_interval(a, b).unwrap().per_week;
        let mu = rate.expected_counts(a, b).unwrap();
        let mean = counts.iter().sum::<usize>() as f64 / m as f64;
        let var = counts.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!((mean - mu).abs() < 4.0 * (mu / m as f64).sqrt(), "[{a},{b}) mean {mean} vs {mu}");
        assert!((var / mean - 1.0).abs() < 0.25, "[{a},{b}) var/mean {}", var / mean);
    }
}

#[test]
fn thinning_times_are_uniform_within_segments() {
    let rate = TrueRate::parse("0-10:2,10-24:6").unwrap();
    let ds = generate(&rate, 30, &OverdispersionSpec::identity(30), 4).unwrap();
    let cfg = TestConfig::new(0.01).unwrap();
    for (a, b) in [(0.0, 10.0), (10.0, 24.0)] {
        assert!(cu_ks_test(&ds, a, b, &cfg).unwrap().tested().unwrap().accepted);
    }
    // straddling the jump, the times are far from uniform
    assert!(!cu_ks_test(&ds, 4.0, 16.0, &cfg).unwrap().tested().unwrap().accepted);
}

#[test]
fn dispersion_power_grows_with_scale_spread() {
    let rate = TrueRate::constant(2.0);
    let cfg = TestConfig::default();
    let reject_rate = |factors: &[f64]| {
        let mut rejected = 0;
        for seed in 0..200 {
            let od = OverdispersionSpec::cycling(factors, 10).unwrap();
            let ds = generate(&rate, 10, &od, seed).unwrap();
            let counts = ds.count_in_interval(6.0, 10.0).unwrap().per_week;
            if !dispersion_test(&counts, &cfg).unwrap().tested().unwrap().accepted {
                rejected += 1;
            }
        }
        f64::from(rejected) / 200.0
    };
    let none = reject_rate(&[1.0]);
    let mild = reject_rate(&[1.0, 1.5]);
    let strong = reject_rate(&[1.0, 3.0]);
    assert!(none < 0.1, "{none}");
    assert!(none < mild && mild < strong, "{none} {mild} {strong}");
    assert!(strong > 0.9, "{strong}");
}
