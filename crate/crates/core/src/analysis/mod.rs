//! Decay-time, saturation and power-law fits, and the expansion sweep.

mod decay;
mod power_law;
mod saturation;
mod sweep;

pub use decay::{fit_decay_time, DecayFit, DecayWindow, MAX_EXCLUDED_FRACTION, MIN_FIT_BINS};
pub use power_law::{fit_power_law, PowerLawFit};
pub use saturation::{excited_fraction, fit_saturation, SaturationFit};
pub use sweep::{
    decay_ensemble, default_decay_times, sweep_subradiance, DecayEnsemble, DecayEnsembleConfig,
    SweepRow,
};
