use subradiance::analysis::{fit_decay_time, DecayWindow};
use subradiance::dicke_ladder::{
    count_crossings, effective_rate, run_cascade, LadderConfig, RateSource, TimeGrid,
};

fn config(n: usize, rho: f64, source: RateSource, shots: usize) -> LadderConfig {
    LadderConfig {
        atom_count: n,
        excited_fraction: rho,
        source,
        shots,
        grid: TimeGrid::Linear {
            t_max: 6.0,
            bins: 120,
        },
        record_times: false,
    }
}

#[test]
fn single_atom_histogram_is_exponential() {
    let r = run_cascade(&config(1, 1.0, RateSource::Independent, 100_000), 1).unwrap();
    let fit = fit_decay_time(&r.trace, DecayWindow::default()).unwrap();
    assert!(
        (fit.tau_over_tau_a - 1.0).abs() < 0.02,
        "{}",
        fit.tau_over_tau_a
    );
}

#[test]
fn independent_emitters_pool_to_an_exponential() {
    let mut cfg = config(100, 1.0, RateSource::Independent, 100_000);
    cfg.record_times = true;
    let r = run_cascade(&cfg, 2).unwrap();
    let mut all: Vec<f64> = r.emission_times.unwrap().into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    let n = all.len() as f64;
    let ks = all
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let cdf = 1.0 - (-t).exp();
            (cdf - i as f64 / n)
                .abs()
                .max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn photons_are_conserved_and_times_sorted() {
    let mut cfg = config(60, 0.3, RateSource::dicke_symmetric(), 500);
    cfg.record_times = true;
    let r = run_cascade(&cfg, 3).unwrap();
    assert_eq!(r.initial_excitations, r.emitted);
    for (m0, times) in r
        .initial_excitations
        .iter()
        .zip(r.emission_times.as_ref().unwrap())
    {
        assert_eq!(*m0 as usize, times.len());
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        assert!(times.iter().all(|t| *t > 0.0));
    }
    assert!(r.trace.intensity.iter().all(|v| *v >= 0.0));
}

#[test]
fn independent_rate_is_flat() {
    let r = run_cascade(&config(50, 1.0, RateSource::Independent, 20_000), 4).unwrap();
    let curve = effective_rate(&r, 5).unwrap();
    for ((t, g), e) in curve.times.iter().zip(&curve.rate).zip(&curve.rate_err) {
        if *t > 1e-3 && *t < 3.5 {
            assert!((g - 1.0).abs() < 4.0 * e + 0.02, "t = {t}: {g} ± {e}");
        }
    }
    assert_eq!(count_crossings(&r.reference_signs(3.5, 4.0)), 0);
}

#[test]
fn runs_are_deterministic() {
    let rates = RateSource::from_rates(vec![0.2, 0.5, 1.0, 3.0, -1.0]).unwrap();
    let cfg = config(40, 0.3, rates, 3000);
    assert_eq!(run_cascade(&cfg, 9).unwrap(), run_cascade(&cfg, 9).unwrap());
    assert!(RateSource::from_rates(vec![-1.0, 0.0]).is_err());
}
