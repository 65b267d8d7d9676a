//! Weak-excitation amplitude evolution after switch-off,
//! `dβ/dt = −(Γ_a/2) G β`, with time measured in units of τ_a.

use std::collections::HashMap;
use std::f64::consts::TAU;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::ExchangeMatrix;
use super::spectrum::ModeSpectrum;
use crate::constants::PhysicalConstants;
use crate::ensemble::AtomSet;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::{Vec3, C64};

/// Eigenbases with a mode condition number above this are not trusted.
pub const MAX_EIGENBASIS_CONDITION: f64 = 1e12;

/// Initial single-excitation amplitudes at switch-off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialMode {
    /// Laser phase imprint `exp(i k k̂_L·r)/√N`.
    PlaneWave { direction: Vec3 },
    /// `1/√N` on every atom.
    Uniform,
    /// Independent uniformly random phases, `1/√N` magnitude.
    RandomPhase,
}

impl Default for InitialMode {
    /// Excitation laser propagating along +x.
    fn default() -> Self {
        InitialMode::PlaneWave {
            direction: [1.0, 0.0, 0.0],
        }
    }
}

/// Unit-norm initial amplitudes. `seed` is only used by [`InitialMode::RandomPhase`].
pub fn initial_amplitudes(
    atoms: &AtomSet,
    constants: &PhysicalConstants,
    mode: InitialMode,
    seed: u64,
) -> Result<Vec<C64>> {
    let n = atoms.len();
    if n == 0 {
        return invalid("no atoms");
    }
    let scale = 1.0 / (n as f64).sqrt();
    let amps = match mode {
        InitialMode::Uniform => vec![C64::new(scale, 0.0); n],
        InitialMode::PlaneWave { direction } => {
            let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return invalid("plane-wave direction must be a nonzero vector");
            }
            let k = constants.wavenumber() / norm;
            atoms
                .positions
                .iter()
                .map(|r| {
                    let phase =
                        k * (direction[0] * r[0] + direction[1] * r[1] + direction[2] * r[2]);
                    C64::from_polar(scale, phase)
                })
                .collect()
        }
        InitialMode::RandomPhase => {
            let mut rng = rng_from_seed(seed);
            (0..n)
                .map(|_| C64::from_polar(scale, TAU * rng.gen::<f64>()))
                .collect()
        }
    };
    Ok(amps)
}

/// How a trajectory was propagated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Propagation {
    Spectral {
        max_condition: f64,
    },
    /// Matrix-exponential stepping; `error_estimate` is the step-doubling
    /// difference on the first interval relative to `‖β₀‖`.
    Stepping {
        max_condition: f64,
        error_estimate: f64,
    },
}

#[derive(Clone, Debug)]
pub struct AmplitudeTrajectory {
    /// Times in units of τ_a.
    pub times: Vec<f64>,
    /// `amplitudes[t][i]` is β_i at `times[t]`.
    pub amplitudes: Vec<Vec<C64>>,
    /// Total emission rate `−d/dt Σ|β_i|² = Re(β† G β)` in units of Γ_a.
    pub total_intensity: Vec<f64>,
    pub initial: Option<InitialMode>,
    pub propagation: Propagation,
}

impl AmplitudeTrajectory {
    pub fn excitation(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .map(|b| b.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Verifies that Σ|β_i|² never increases by more than `tol` between
    /// consecutive time points.
    pub fn check_monotone(&self, tol: f64) -> Result<()> {
        let e = self.excitation();
        for (i, w) in e.windows(2).enumerate() {
            if w[1] > w[0] + tol {
                return Err(Error::SpectralInvariant(format!(
                    "excitation grew from {} to {} at t = {}",
                    w[0],
                    w[1],
                    self.times[i + 1]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return invalid("time grid is empty");
    }
    if times[0] != 0.0 {
        return invalid(format!("time grid must start at 0, starts at {}", times[0]));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("time grid must be strictly increasing");
    }
    Ok(())
}

/// Propagates `beta0` to every time in `times`.
///
/// Uses `β(t) = V e^{−λt/2} V⁻¹ β₀`. If the eigenbasis is too ill-conditioned
/// the trajectory is instead built by stepping with `exp(−G Δt/2)`.
pub fn evolve(
    g: &ExchangeMatrix,
    spectrum: &ModeSpectrum,
    beta0: &[C64],
    times: &[f64],
) -> Result<AmplitudeTrajectory> {
    validate_times(times)?;
    let n = g.order();
    if beta0.len() != n || spectrum.order() != n {
        return invalid(format!(
            "amplitudes ({}) and spectrum ({}) must match the matrix order {n}",
            beta0.len(),
            spectrum.order()
        ));
    }
    let Some(v) = spectrum.eigenvectors() else {
        return invalid("spectrum carries no eigenvectors");
    };
    let max_condition = spectrum
        .mode_condition_numbers()
        .unwrap_or_default()
        .into_iter()
        .fold(1.0, f64::max);
    if !(max_condition <= MAX_EIGENBASIS_CONDITION) {
        log::warn!("eigenbasis condition {max_condition:e}; falling back to stepping");
        return evolve_by_stepping(g, beta0, times, max_condition);
    }

    let rhs = Mat::from_fn(n, 1, |j, _| beta0[j]);
    let coeffs = v.partial_piv_lu().solve(&rhs);
    let lambda = spectrum.eigenvalues();
    let t_count = times.len();
    let modal = Mat::from_fn(n, t_count, |m, t| {
        (-0.5 * lambda[m] * times[t]).exp() * coeffs[(m, 0)]
    });
    let modal_rate = Mat::from_fn(n, t_count, |m, t| lambda[m] * modal[(m, t)]);
    let beta = v * &modal;
    let g_beta = v * &modal_rate;

    let mut amplitudes = Vec::with_capacity(t_count);
    let mut total_intensity = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let b: Vec<C64> = (0..n).map(|j| beta[(j, t)]).collect();
        let rate: f64 = (0..n).map(|j| (b[j].conj() * g_beta[(j, t)]).re).sum();
        amplitudes.push(b);
        total_intensity.push(rate);
    }
    Ok(AmplitudeTrajectory {
        times: times.to_vec(),
        amplitudes,
        total_intensity,
        initial: None,
        propagation: Propagation::Spectral { max_condition },
    })
}

/// `exp(a)` by scaling and squaring with a degree-18 Taylor polynomial.
pub fn expm(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled;
        let inv = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn matvec(m: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        for (j, o) in out.iter_mut().enumerate() {
            *o += m[(j, k)] * x[k];
        }
    }
    out
}

fn evolve_by_stepping(
    g: &ExchangeMatrix,
    beta0: &[C64],
    times: &[f64],
    max_condition: f64,
) -> Result<AmplitudeTrajectory> {
    let n = g.order();
    let generator = |dt: f64| Mat::from_fn(n, n, |i, j| g.get(i, j) * (-0.5 * dt));
    let mut propagators: HashMap<u64, Mat<C64>> = HashMap::new();
    let mut beta = beta0.to_vec();
    let mut amplitudes = vec![beta.clone()];
    let mut error_estimate: f64 = 0.0;
    let norm0 = beta0
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        let p = propagators
            .entry(dt.to_bits())
            .or_insert_with(|| expm(&generator(dt)));
        let next = matvec(p, &beta);
        if i == 0 {
            let half = expm(&generator(0.5 * dt));
            let twice = matvec(&half, &matvec(&half, &beta));
            let diff: f64 = next
                .iter()
                .zip(&twice)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            error_estimate = diff / norm0;
        }
        beta = next;
        amplitudes.push(beta.clone());
    }
    let total_intensity = amplitudes
        .iter()
        .map(|b| {
            let gb = g.apply(b);
            b.iter().zip(&gb).map(|(x, y)| (x.conj() * y).re).sum()
        })
        .collect();
    Ok(AmplitudeTrajectory {
        times: times.to_vec(),
        amplitudes,
        total_intensity,
        initial: None,
        propagation: Propagation::Stepping {
            max_condition,
            error_estimate,
        },
    })
}

/// Forces the stepping propagator (for diagnostics and cross-checks).
pub fn evolve_stepping(
    g: &ExchangeMatrix,
    beta0: &[C64],
    times: &[f64],
) -> Result<AmplitudeTrajectory> {
    validate_times(times)?;
    if beta0.len() != g.order() {
        return invalid("amplitude length does not match the matrix order");
    }
    evolve_by_stepping(g, beta0, times, f64::NAN)
}
