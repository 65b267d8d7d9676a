//! Coupled-dipole model: exchange matrix, spectrum, amplitude evolution and
//! fluorescence traces.

mod evolve;
mod matrix;
mod spectrum;
mod trace;

pub use evolve::{
    evolve, evolve_stepping, expm, initial_amplitudes, AmplitudeTrajectory, InitialMode,
    Propagation, MAX_EIGENBASIS_CONDITION,
};
pub use matrix::{
    build_exchange_matrix, build_exchange_matrix_capped, kernel, ExchangeMatrix, DEFAULT_MAX_ORDER,
};
pub use spectrum::{
    diagonalize, eigenvalues_only, spectrum_width, ModeSpectrum, SpectrumWidth,
    MIN_WIDTH_REALIZATIONS, POSITIVITY_TOLERANCE, TRACE_TOLERANCE,
};
pub use trace::{
    average_traces, fluorescence_trace, simulate_decay, Detector, FluorescenceTrace,
    NEGATIVE_INTENSITY_TOLERANCE,
};
