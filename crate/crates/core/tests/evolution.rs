mod support;

use proptest::prelude::*;
use subradiance::coupled_dipole::{
    build_exchange_matrix, diagonalize, evolve, evolve_stepping, initial_amplitudes,
    simulate_decay, Detector, InitialMode,
};
use subradiance::ensemble::sample_cloud;
use subradiance::{CloudGeometry, PhysicalConstants, C64};

fn relative_error(a: &[C64], b: &[C64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    diff / norm
}

fn compare_with_ode(n: usize, seed: u64, mode: InitialMode, tol: f64) {
    let c = PhysicalConstants::default();
    let geometry = CloudGeometry::new([0.6e-6, 0.6e-6, 1.5e-6], n, 0.0).unwrap();
    let atoms = sample_cloud(&geometry, &c, seed).unwrap();
    let g = build_exchange_matrix(&atoms, &c).unwrap();
    let s = diagonalize(&g, &c).unwrap();
    let beta0 = initial_amplitudes(&atoms, &c, mode, seed).unwrap();
    let times = [0.0, 0.5, 1.7, 3.5];
    let traj = evolve(&g, &s, &beta0, &times).unwrap();
    let reference = support::rkf45(
        &support::exchange_dense(&atoms.positions),
        &beta0,
        &times,
        1e-12,
    );
    for (t, (got, want)) in times.iter().zip(traj.amplitudes.iter().zip(&reference)) {
        let e = relative_error(got, want);
        assert!(
            e < tol,
            "N = {n}, seed {seed}, t = {t}: relative error {e:e}"
        );
    }
}

#[test]
fn small_clouds_match_adaptive_integration() {
    for n in 1..=8 {
        for seed in 0..3 {
            compare_with_ode(n, seed, InitialMode::default(), 1e-8);
        }
    }
}

#[test]
fn fifty_atoms_match_adaptive_integration() {
    for seed in 0..3 {
        compare_with_ode(50, seed, InitialMode::RandomPhase, 1e-6);
    }
}

#[test]
fn stepping_fallback_matches_ode() {
    let c = PhysicalConstants::default();
    let atoms = sample_cloud(&CloudGeometry::new([0.4e-6; 3], 12, 0.0).unwrap(), &c, 4).unwrap();
    let g = build_exchange_matrix(&atoms, &c).unwrap();
    let beta0 = initial_amplitudes(&atoms, &c, InitialMode::Uniform, 0).unwrap();
    let times = [0.0, 1.0, 3.5];
    let traj = evolve_stepping(&g, &beta0, &times).unwrap();
    let reference = support::rkf45(
        &support::exchange_dense(&atoms.positions),
        &beta0,
        &times,
        1e-12,
    );
    for (got, want) in traj.amplitudes.iter().zip(&reference) {
        assert!(relative_error(got, want) < 1e-8);
    }
}

#[test]
fn total_intensity_is_the_excitation_loss_rate() {
    let c = PhysicalConstants::default();
    let atoms = sample_cloud(&CloudGeometry::new([1e-6; 3], 40, 0.0).unwrap(), &c, 9).unwrap();
    let g = build_exchange_matrix(&atoms, &c).unwrap();
    let s = diagonalize(&g, &c).unwrap();
    let beta0 = initial_amplitudes(&atoms, &c, InitialMode::default(), 0).unwrap();
    let h = 1e-4;
    for t in [0.3, 1.0, 2.5] {
        let traj = evolve(&g, &s, &beta0, &[0.0, t - h, t, t + h]).unwrap();
        let e = traj.excitation();
        let numeric = -(e[3] - e[1]) / (2.0 * h);
        assert!((traj.total_intensity[2] - numeric).abs() < 1e-6 * numeric.abs().max(1e-3));
    }
}

#[test]
fn directed_trace_is_the_far_field_sum() {
    let c = PhysicalConstants::default();
    let atoms = sample_cloud(&CloudGeometry::new([1e-6; 3], 10, 0.0).unwrap(), &c, 2).unwrap();
    let times: Vec<f64> = (0..8).map(|i| 0.5 * i as f64).collect();
    let n = [0.0, 1.0, 0.0];
    let trace = simulate_decay(
        &atoms,
        &c,
        InitialMode::Uniform,
        0,
        &times,
        Detector::Directed {
            direction: n,
            drift: false,
        },
    )
    .unwrap();
    let beta0 = initial_amplitudes(&atoms, &c, InitialMode::Uniform, 0).unwrap();
    let reference = support::rkf45(
        &support::exchange_dense(&atoms.positions),
        &beta0,
        &times,
        1e-12,
    );
    let k = support::wavenumber();
    for (i, b) in reference.iter().enumerate() {
        let field: C64 = b
            .iter()
            .zip(&atoms.positions)
            .map(|(bj, r)| bj * C64::from_polar(1.0, -k * r[1]))
            .sum();
        let want = field.norm_sqr();
        assert!((trace.intensity[i] - want).abs() < 1e-9 * want.max(1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn excitation_never_grows(
        n in 1usize..30,
        radius_wl in 0.1f64..3.0,
        seed in any::<u64>(),
        mode in prop_oneof![
            Just(InitialMode::Uniform),
            Just(InitialMode::RandomPhase),
            Just(InitialMode::default()),
        ],
    ) {
        let c = PhysicalConstants::default();
        let r = radius_wl * c.wavelength;
        let atoms = sample_cloud(&CloudGeometry::new([r, r, r], n, 0.0).unwrap(), &c, seed).unwrap();
        let g = build_exchange_matrix(&atoms, &c).unwrap();
        let s = diagonalize(&g, &c).unwrap();
        let beta0 = initial_amplitudes(&atoms, &c, mode, seed).unwrap();
        let norm0: f64 = beta0.iter().map(|b| b.norm_sqr()).sum();
        prop_assert!((norm0 - 1.0).abs() < 1e-12);
        let times: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
        let traj = evolve(&g, &s, &beta0, &times).unwrap();
        prop_assert!(traj.check_monotone(1e-10).is_ok());
        prop_assert!((traj.excitation()[0] - norm0).abs() < 1e-10);
        prop_assert!(traj.total_intensity.iter().all(|i| *i >= -1e-12));
    }
}
