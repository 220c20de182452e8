mod common;

use common::*;
use slcogarch::cogarch::{ensemble_volatility, simulate_path};
use slcogarch::coherence::{acf_band, sample_acf, significant_pairs, threshold, CoherencePlan};
use slcogarch::conditions::check;
use slcogarch::exec::{path_rng, replication_rng};
use slcogarch::{Classification, CoherenceConfig, Execution};

#[test]
fn counting_process_has_periodic_increments() {
    let cfg = example_driver();
    let reps = 4000;
    let (mut first, mut later) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    let t = 2.3;
    for i in 0..reps {
        let path = cfg.simulate(2, &mut replication_rng(3, i as u64)).unwrap();
        first.push(path.count(TAU) as f64);
        later.push((path.count(t + TAU) - path.count(t)) as f64);
    }
    let (m1, v1) = mean_var(&first);
    let (m2, v2) = mean_var(&later);
    let mean_se = ((v1 + v2) / reps as f64).sqrt();
    let var_se = (var_se(&first).powi(2) + var_se(&later).powi(2)).sqrt();
    assert!((m1 - m2).abs() < 4.0 * mean_se, "{m1} vs {m2}");
    assert!((v1 - v2).abs() < 4.0 * var_se, "{v1} vs {v2}");
    // Poisson counts: mean = variance = Λ(τ)
    let lambda = cfg.cumulative_intensity(TAU).unwrap();
    assert!((m1 - lambda).abs() < 4.0 * (lambda / reps as f64).sqrt());
}

#[test]
fn empirical_cf_matches_closed_form() {
    let cfg = example_driver();
    let n = 20_000;
    let us: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
    for t in [1.0, 6.5, 9.0] {
        let emp = cfg
            .empirical_char_function(&us, t, n, 17, Execution::default())
            .unwrap();
        for (&u, e) in us.iter().zip(&emp) {
            let exact = cfg.char_function(u, t).unwrap();
            assert!(
                (e - exact).norm() < 5.0 / (n as f64).sqrt(),
                "t={t} u={u}: {e} vs {exact}"
            );
        }
    }
}

/// Windows inside `1..n/2` and `M` apart never share an ordinate or its mirror.
fn disjoint_windows(n: usize, m: usize) -> Vec<usize> {
    (0..)
        .map(|k| 1 + k * m)
        .take_while(|p| p + m < n / 2)
        .collect()
}

#[test]
fn white_noise_false_positive_rate() {
    let (n, m, alpha) = (780, 24, 0.05);
    let thr = threshold(alpha, m).unwrap();
    let starts = disjoint_windows(n, m);
    let (mut hits, mut total) = (0usize, 0usize);
    for rep in 0..200 {
        let plan = CoherencePlan::new(&white_noise(n, 500 + rep), m, true).unwrap();
        for (i, &p) in starts.iter().enumerate() {
            for &q in &starts[..i] {
                hits += (plan.coherence(p, q).unwrap() > thr) as usize;
                total += 1;
            }
        }
    }
    let rate = hits as f64 / total as f64;
    assert!((alpha / 2.0..=2.0 * alpha).contains(&rate), "rate {rate}");
    // the Beta(1, M−1) tail is exact for Gaussian noise, so it is tighter still
    let se = (alpha * (1.0 - alpha) / total as f64).sqrt();
    assert!((rate - alpha).abs() < 6.0 * se, "rate {rate}");
}

fn period_hits(period: usize, m: usize) -> usize {
    (0..100)
        .filter(|&s| {
            let r = significant_pairs(
                &am_noise(30 * period, period, s),
                &CoherenceConfig::new(m, 0.05),
            )
            .unwrap();
            r.classification == Classification::Pc(period)
        })
        .count()
}

#[test]
fn period_estimator_recovers_13_and_26() {
    let h13 = period_hits(13, 130);
    let h26 = period_hits(26, 240);
    assert!(h13 >= 90, "{h13}/100");
    assert!(h26 >= 90, "{h26}/100");
}

#[test]
#[ignore = "n = 120 leaves a single line against an estimated background; about 20/100"]
fn period_estimator_recovers_4() {
    let h = period_hits(4, 60);
    assert!(h >= 90, "{h}/100");
}

#[test]
fn white_noise_is_mostly_stationary() {
    let ok = (0..100)
        .filter(|&s| {
            let r = significant_pairs(&white_noise(780, 700 + s), &CoherenceConfig::new(240, 0.05))
                .unwrap();
            r.classification == Classification::Stationary
        })
        .count();
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn acf_of_white_noise_stays_in_band() {
    let mut inside = 0;
    let mut total = 0;
    for s in 0..20 {
        let x = white_noise(1000, 900 + s);
        let acf = sample_acf(&x, 50).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!(acf.iter().all(|r| r.abs() <= 1.0));
        let band = acf_band(x.len());
        inside += acf[1..].iter().filter(|r| r.abs() <= band).count();
        total += 50;
    }
    let frac = inside as f64 / total as f64;
    assert!((0.93..=0.97).contains(&frac), "{frac}");
}

#[test]
fn volatility_respects_the_certified_floor() {
    let cfg = example_driver();
    let params = example_params();
    let report = check(&cfg, &params);
    assert!(report.nonneg.ok);
    let floor = report.nonneg.floor;
    for seed in 0..50 {
        let jp = cfg.simulate(30, &mut path_rng(seed)).unwrap();
        let path = simulate_path(&jp, &params, SAMPLE_INTERVAL, TAU).unwrap();
        assert!(path.min_volatility() >= floor - 1e-9, "seed {seed}");
    }
}

#[test]
fn long_paths_stay_bounded() {
    let cfg = example_driver();
    let params = example_params();
    let report = check(&cfg, &params);
    assert!(report.eigen.ok);
    for seed in 0..20 {
        let jp = cfg.simulate(100, &mut path_rng(seed)).unwrap();
        let path = simulate_path(&jp, &params, SAMPLE_INTERVAL, TAU).unwrap();
        let max = path
            .states
            .iter()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max.is_finite() && max < 1.0, "seed {seed}: {max}");
        assert!(path.v_grid.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn ensemble_settles_into_periodic_law() {
    let cfg = example_driver();
    let params = example_params();
    let phase = 2.0;
    let probes = [phase + 20.0 * TAU, phase + 40.0 * TAU];
    let v =
        ensemble_volatility(&cfg, &params, 41, &probes, 2000, 23, Execution::default()).unwrap();
    let a: Vec<f64> = v.iter().map(|r| r[0]).collect();
    let b: Vec<f64> = v.iter().map(|r| r[1]).collect();
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let se = ((va + vb) / a.len() as f64).sqrt();
    assert!((ma - mb).abs() < 3.0 * se, "{ma} vs {mb} (se {se})");
}

#[test]
fn zero_mean_driver_decorrelates_returns_but_not_squares() {
    let cfg = zero_mean_driver();
    let params = zero_mean_params();
    let jp = cfg.simulate(735, &mut path_rng(0)).unwrap();
    let x = simulate_path(&jp, &params, SAMPLE_INTERVAL, TAU)
        .unwrap()
        .increments();
    let band = acf_band(x.len());
    let acf = sample_acf(&x, 104).unwrap();
    let inside = acf[26..=104].iter().filter(|r| r.abs() <= band).count();
    assert!(inside as f64 >= 0.9 * 79.0, "{inside}/79");
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let acf2 = sample_acf(&sq, 78).unwrap();
    for lag in [26, 52, 78] {
        assert!(acf2[lag] > band, "lag {lag}: {}", acf2[lag]);
    }
}
