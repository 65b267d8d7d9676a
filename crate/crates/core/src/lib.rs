//! Collective spontaneous emission from dilute, ultracold atomic clouds.
//!
//! The crate is organized along the simulation pipeline:
//!
//! - [`ensemble`]: cloud geometry, stochastic atom realizations, ballistic
//!   expansion and the scalar figures of merit.
//! - [`coupled_dipole`]: the photon-exchange matrix, its mode spectrum,
//!   amplitude evolution after switch-off and fluorescence traces.
//! - [`dicke_ladder`]: a stochastic excitation-ladder cascade with collective
//!   rates drawn from a mode spectrum.
//! - [`optics`]: finite-NA imaging, a misaligned Michelson interferometer and
//!   fringe-contrast extraction.
//! - [`analysis`]: decay-time, saturation and power-law fits plus the
//!   expansion sweep.
//!
//! Lengths are SI (metres) everywhere; evolution times are in units of the
//! natural lifetime unless a name says otherwise.

pub mod analysis;
pub mod constants;
pub mod coupled_dipole;
pub mod dicke_ladder;
pub mod ensemble;
pub mod error;
pub mod optics;
pub mod rng;
pub mod stats;

pub use constants::PhysicalConstants;
pub use ensemble::{AtomSet, Axis, CloudGeometry};
pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Cartesian 3-vector in metres (positions) or metres per second (velocities).
pub type Vec3 = [f64; 3];

/// Restricts dense linear algebra to a single thread so that results do not
/// depend on the worker count. Parallelism is applied across shots instead.
pub fn use_sequential_linalg() {
    faer::set_global_parallelism(faer::Par::Seq);
}
