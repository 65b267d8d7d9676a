use rayon::prelude::*;
use serde::Serialize;

use super::decay::{fit_decay_time, DecayFit, DecayWindow};
use crate::constants::PhysicalConstants;
use crate::coupled_dipole::{
    average_traces, simulate_decay, Detector, FluorescenceTrace, InitialMode,
};
use crate::ensemble::{
    expand_cloud, figure_of_merit, optical_depth, sample_cloud, Axis, CloudGeometry,
};
use crate::error::{invalid, Result};
use crate::rng::{purpose_seed, stream_seed};
use crate::stats::{mean, std_error};

/// Uniform grid from 0 to `window.end()` with spacing `dt` (τ_a units).
pub fn default_decay_times(window: DecayWindow, dt: f64) -> Vec<f64> {
    let steps = (window.end() / dt).ceil() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayEnsembleConfig {
    pub constants: PhysicalConstants,
    pub mode: InitialMode,
    pub detector: Detector,
    pub seeds: usize,
    pub master_seed: u64,
    pub times: Vec<f64>,
    pub window: DecayWindow,
    /// Every sampled position is multiplied by this factor before the
    /// matrix is built.
    pub position_scale: f64,
}

impl Default for DecayEnsembleConfig {
    fn default() -> Self {
        let window = DecayWindow::default();
        Self {
            constants: PhysicalConstants::default(),
            mode: InitialMode::default(),
            detector: Detector::Total,
            seeds: 20,
            master_seed: 0,
            times: default_decay_times(window, 0.05),
            window,
            position_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayEnsemble {
    /// One fit per realization, in seed order.
    pub fits: Vec<DecayFit>,
    pub mean_tau: f64,
    /// Standard error of `mean_tau` over realizations.
    pub tau_err: f64,
    pub mean_trace: FluorescenceTrace,
    pub mean_trace_fit: DecayFit,
}

impl DecayEnsemble {
    pub fn taus(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.tau_over_tau_a).collect()
    }
}

/// Independent realizations of `geometry`, each evolved and fitted.
/// Realization `s` uses the atom seed `stream_seed(master_seed, s)`.
pub fn decay_ensemble(
    geometry: &CloudGeometry,
    config: &DecayEnsembleConfig,
) -> Result<DecayEnsemble> {
    geometry.validate()?;
    if config.seeds == 0 {
        return invalid("decay ensemble needs at least one seed");
    }
    if !(config.position_scale > 0.0 && config.position_scale.is_finite()) {
        return invalid("position scale must be positive");
    }
    let traces: Vec<FluorescenceTrace> = (0..config.seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = stream_seed(config.master_seed, s);
            let mut atoms = sample_cloud(geometry, &config.constants, seed)?;
            if config.position_scale != 1.0 {
                atoms = atoms.scaled(config.position_scale);
            }
            simulate_decay(
                &atoms,
                &config.constants,
                config.mode,
                purpose_seed(seed, "amplitudes"),
                &config.times,
                config.detector,
            )
        })
        .collect::<Result<_>>()?;
    let fits = traces
        .iter()
        .map(|t| fit_decay_time(t, config.window))
        .collect::<Result<Vec<_>>>()?;
    let taus: Vec<f64> = fits.iter().map(|f| f.tau_over_tau_a).collect();
    let mean_trace = average_traces(&traces)?;
    let mean_trace_fit = fit_decay_time(&mean_trace, config.window)?;
    Ok(DecayEnsemble {
        mean_tau: mean(&taus),
        tau_err: if taus.len() > 1 {
            std_error(&taus)
        } else {
            fits[0].tau_err
        },
        fits,
        mean_trace,
        mean_trace_fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub t_expand_s: f64,
    pub peak_density_m3: f64,
    /// Optical depth along the detection axis (y).
    pub od_radial: f64,
    pub fom: f64,
    pub tau_over_tau_a: f64,
    pub tau_err: f64,
}

/// Expands the base cloud for each time, runs a decay ensemble and tabulates
/// the result. Rows follow the input order.
pub fn sweep_subradiance(
    base: &CloudGeometry,
    expansion_times_s: &[f64],
    config: &DecayEnsembleConfig,
) -> Result<Vec<SweepRow>> {
    if expansion_times_s.is_empty() {
        return invalid("sweep needs at least one expansion time");
    }
    expansion_times_s
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let geometry = expand_cloud(base, &config.constants, t)?;
            let cfg = DecayEnsembleConfig {
                master_seed: stream_seed(config.master_seed, 1_000_000 + i as u64),
                ..config.clone()
            };
            let ens = decay_ensemble(&geometry, &cfg)?;
            Ok(SweepRow {
                t_expand_s: t,
                peak_density_m3: geometry.peak_density(),
                od_radial: optical_depth(&geometry, &config.constants, Axis::Y),
                fom: figure_of_merit(&geometry, &config.constants),
                tau_over_tau_a: ens.mean_tau,
                tau_err: ens.tau_err,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_reaches_window_end() {
        let t = default_decay_times(DecayWindow::default(), 0.05);
        assert_eq!(t[0], 0.0);
        assert!(*t.last().unwrap() >= 3.7 - 1e-12);
    }

    #[test]
    fn single_atom_ensemble() {
        let geo = CloudGeometry::new([1e-6; 3], 1, 0.0).unwrap();
        let cfg = DecayEnsembleConfig {
            seeds: 3,
            ..Default::default()
        };
        let e = decay_ensemble(&geo, &cfg).unwrap();
        assert!((e.mean_tau - 1.0).abs() < 1e-9);
        assert_eq!(e.fits.len(), 3);
    }

    #[test]
    fn sweep_columns_are_monotone() {
        let geo = CloudGeometry::new([2e-6, 2e-6, 20e-6], 30, 40e-6).unwrap();
        let cfg = DecayEnsembleConfig {
            seeds: 2,
            ..Default::default()
        };
        let rows = sweep_subradiance(&geo, &[1e-4, 1e-3, 1e-2], &cfg).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| w[1].peak_density_m3 < w[0].peak_density_m3));
        assert!(rows.windows(2).all(|w| w[1].fom <= w[0].fom));
        assert!(rows.windows(2).all(|w| w[1].od_radial < w[0].od_radial));
    }
}
