use serde::Serialize;

use super::evolve::{evolve, initial_amplitudes, AmplitudeTrajectory, InitialMode};
use super::matrix::build_exchange_matrix;
use super::spectrum::diagonalize;
use crate::constants::PhysicalConstants;
use crate::ensemble::AtomSet;
use crate::error::{invalid, Error, Result};
use crate::stats::{mean, std_error};
use crate::{Vec3, C64};

/// Computed intensities below `−NEGATIVE_INTENSITY_TOLERANCE` abort the trace.
pub const NEGATIVE_INTENSITY_TOLERANCE: f64 = 1e-12;

/// What is detected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    /// Total emission rate into all directions.
    Total,
    /// Far-field intensity along `direction`. With `drift` the atoms move
    /// ballistically during the decay.
    Directed { direction: Vec3, drift: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluorescenceTrace {
    /// Bin times in units of τ_a.
    pub times: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Standard error over shots; zero for a single shot.
    pub intensity_err: Vec<f64>,
    /// Whether `intensity` was divided by its first bin.
    pub normalized: bool,
    pub shots: usize,
    /// Photon counts per bin, when the trace comes from counting.
    pub counts: Option<Vec<u64>>,
}

impl FluorescenceTrace {
    pub fn new(times: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        let n = times.len();
        let trace = Self {
            times,
            intensity,
            intensity_err: vec![0.0; n],
            normalized: false,
            shots: 1,
            counts: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.intensity.len() != n || self.intensity_err.len() != n {
            return invalid("trace columns have different lengths");
        }
        if self.counts.as_ref().is_some_and(|c| c.len() != n) {
            return invalid("trace counts have the wrong length");
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("trace times must be strictly increasing");
        }
        if let Some(i) = self.intensity.iter().position(|v| !(*v >= 0.0)) {
            return invalid(format!(
                "trace intensity {} at t = {} is not non-negative",
                self.intensity[i], self.times[i]
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Divides by the first bin.
    pub fn normalized(&self) -> Result<Self> {
        let first = *self.intensity.first().unwrap_or(&0.0);
        if !(first > 0.0) {
            return invalid("cannot normalize a trace whose first bin is not positive");
        }
        Ok(Self {
            times: self.times.clone(),
            intensity: self.intensity.iter().map(|v| v / first).collect(),
            intensity_err: self.intensity_err.iter().map(|v| v / first).collect(),
            normalized: true,
            shots: self.shots,
            counts: self.counts.clone(),
        })
    }
}

fn clamp_intensity(time: f64, value: f64) -> Result<f64> {
    if value < -NEGATIVE_INTENSITY_TOLERANCE || !value.is_finite() {
        return Err(Error::NegativeIntensity {
            time,
            value,
            tolerance: NEGATIVE_INTENSITY_TOLERANCE,
        });
    }
    Ok(value.max(0.0))
}

/// Single-shot trace on the trajectory's grid.
pub fn fluorescence_trace(
    traj: &AmplitudeTrajectory,
    detector: Detector,
    atoms: &AtomSet,
    constants: &PhysicalConstants,
) -> Result<FluorescenceTrace> {
    let n = atoms.len();
    if traj.amplitudes.first().map_or(0, |a| a.len()) != n {
        return invalid("trajectory and atom set have different sizes");
    }
    let raw: Vec<f64> = match detector {
        Detector::Total => traj.total_intensity.clone(),
        Detector::Directed { direction, drift } => {
            let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return invalid("detector direction must be a nonzero vector");
            }
            let k = constants.wavenumber() / norm;
            traj.times
                .iter()
                .zip(&traj.amplitudes)
                .map(|(&t, beta)| {
                    let dt = if drift { t * constants.lifetime } else { 0.0 };
                    let field: C64 = beta
                        .iter()
                        .zip(atoms.positions.iter().zip(&atoms.velocities))
                        .map(|(b, (r, v))| {
                            let proj: f64 = (0..3).map(|a| direction[a] * (r[a] + v[a] * dt)).sum();
                            b * C64::from_polar(1.0, -k * proj)
                        })
                        .sum();
                    field.norm_sqr()
                })
                .collect()
        }
    };
    let intensity = traj
        .times
        .iter()
        .zip(raw)
        .map(|(&t, v)| clamp_intensity(t, v))
        .collect::<Result<Vec<_>>>()?;
    FluorescenceTrace::new(traj.times.clone(), intensity)
}

/// Mean over shots in the given order, with the standard error as the error
/// column.
pub fn average_traces(traces: &[FluorescenceTrace]) -> Result<FluorescenceTrace> {
    let Some(first) = traces.first() else {
        return invalid("no traces to average");
    };
    if traces.iter().any(|t| t.times != first.times) {
        return invalid("traces are on different time grids");
    }
    let m = first.len();
    let mut intensity = Vec::with_capacity(m);
    let mut intensity_err = Vec::with_capacity(m);
    let mut column = vec![0.0; traces.len()];
    for i in 0..m {
        for (c, t) in column.iter_mut().zip(traces) {
            *c = t.intensity[i];
        }
        intensity.push(mean(&column));
        intensity_err.push(if traces.len() > 1 {
            std_error(&column)
        } else {
            0.0
        });
    }
    let counts = if traces.iter().all(|t| t.counts.is_some()) {
        Some(
            (0..m)
                .map(|i| traces.iter().map(|t| t.counts.as_ref().unwrap()[i]).sum())
                .collect(),
        )
    } else {
        None
    };
    Ok(FluorescenceTrace {
        times: first.times.clone(),
        intensity,
        intensity_err,
        normalized: false,
        shots: traces.iter().map(|t| t.shots).sum(),
        counts,
    })
}

/// Matrix, spectrum, evolution and trace for one realization.
pub fn simulate_decay(
    atoms: &AtomSet,
    constants: &PhysicalConstants,
    mode: InitialMode,
    amplitude_seed: u64,
    times: &[f64],
    detector: Detector,
) -> Result<FluorescenceTrace> {
    let g = build_exchange_matrix(atoms, constants)?;
    let spectrum = diagonalize(&g, constants)?;
    let beta0 = initial_amplitudes(atoms, constants, mode, amplitude_seed)?;
    let mut traj = evolve(&g, &spectrum, &beta0, times)?;
    traj.initial = Some(mode);
    fluorescence_trace(&traj, detector, atoms, constants)
}
