//! Python bindings: the main simulation types plus a runner for the
//! configured experiments.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use subradiance::analysis::{self, DecayWindow};
use subradiance::coupled_dipole::{
    build_exchange_matrix, eigenvalues_only, simulate_decay, Detector, FluorescenceTrace,
    InitialMode,
};
use subradiance::dicke_ladder::{self, LadderConfig, RateSource, TimeGrid};
use subradiance::{ensemble, optics, AtomSet, Axis, CloudGeometry, PhysicalConstants};
use subradiance_cli::{run_experiment, Experiment, ExperimentConfig};

fn py_err(e: subradiance::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn axis(name: &str) -> PyResult<Axis> {
    match name {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(PyValueError::new_err(format!("unknown axis {name:?}"))),
    }
}

fn initial_mode(name: &str, direction: [f64; 3]) -> PyResult<InitialMode> {
    match name {
        "plane_wave" => Ok(InitialMode::PlaneWave { direction }),
        "uniform" => Ok(InitialMode::Uniform),
        "random_phase" => Ok(InitialMode::RandomPhase),
        _ => Err(PyValueError::new_err(format!("unknown initial mode {name:?}"))),
    }
}

#[pyclass(name = "Constants", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConstants(PhysicalConstants);

#[pymethods]
impl PyConstants {
    /// SI units: metres, seconds, kilograms. Defaults to the 87Rb D2 line.
    #[new]
    #[pyo3(signature = (wavelength=780e-9, lifetime=26.2e-9, mass=subradiance::constants::RB87_MASS))]
    fn new(wavelength: f64, lifetime: f64, mass: f64) -> PyResult<Self> {
        PhysicalConstants::new(wavelength, lifetime, mass)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength
    }

    #[getter]
    fn lifetime(&self) -> f64 {
        self.0.lifetime
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    fn wavenumber(&self) -> f64 {
        self.0.wavenumber()
    }

    fn cross_section(&self) -> f64 {
        self.0.cross_section()
    }

    fn mean_speed(&self, temperature: f64) -> f64 {
        self.0.mean_speed(temperature)
    }

    fn dephasing_length(&self, temperature: f64) -> f64 {
        self.0.dephasing_length(temperature)
    }

    fn __repr__(&self) -> String {
        format!(
            "Constants(wavelength={:e}, lifetime={:e}, mass={:e})",
            self.0.wavelength, self.0.lifetime, self.0.mass
        )
    }
}

fn constants_or_default(c: Option<&PyConstants>) -> PhysicalConstants {
    c.map(|c| c.0).unwrap_or_default()
}

#[pyclass(name = "CloudGeometry", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCloud(CloudGeometry);

#[pymethods]
impl PyCloud {
    /// 1/e density radii in metres, temperature in kelvin.
    #[new]
    fn new(radii: [f64; 3], atom_count: usize, temperature: f64) -> PyResult<Self> {
        CloudGeometry::new(radii, atom_count, temperature)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn radii(&self) -> [f64; 3] {
        self.0.radii
    }

    #[getter]
    fn atom_count(&self) -> usize {
        self.0.atom_count
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.0.temperature
    }

    fn peak_density(&self) -> f64 {
        self.0.peak_density()
    }

    fn radial_size(&self) -> f64 {
        self.0.radial_size()
    }

    #[pyo3(signature = (constants=None))]
    fn figure_of_merit(&self, constants: Option<&PyConstants>) -> f64 {
        ensemble::figure_of_merit(&self.0, &constants_or_default(constants))
    }

    #[pyo3(signature = (axis="y", constants=None))]
    fn optical_depth(&self, axis: &str, constants: Option<&PyConstants>) -> PyResult<f64> {
        Ok(ensemble::optical_depth(
            &self.0,
            &constants_or_default(constants),
            self::axis(axis)?,
        ))
    }

    /// Cloud after `t_expand` seconds of free expansion.
    #[pyo3(signature = (t_expand, constants=None))]
    fn expand(&self, t_expand: f64, constants: Option<&PyConstants>) -> PyResult<Self> {
        ensemble::expand_cloud(&self.0, &constants_or_default(constants), t_expand)
            .map(Self)
            .map_err(py_err)
    }

    #[pyo3(signature = (seed, constants=None))]
    fn sample(&self, seed: u64, constants: Option<&PyConstants>) -> PyResult<PyAtoms> {
        ensemble::sample_cloud(&self.0, &constants_or_default(constants), seed)
            .map(PyAtoms)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "CloudGeometry(radii={:?}, atom_count={}, temperature={:e})",
            self.0.radii, self.0.atom_count, self.0.temperature
        )
    }
}

#[pyclass(name = "AtomSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAtoms(AtomSet);

#[pymethods]
impl PyAtoms {
    /// Atoms at rest at the given positions (metres).
    #[new]
    fn new(positions: Vec<[f64; 3]>) -> Self {
        Self(AtomSet::at_rest(positions))
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        self.0.positions.clone()
    }

    #[getter]
    fn velocities(&self) -> Vec<[f64; 3]> {
        self.0.velocities.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scaled(factor))
    }

    fn min_separation(&self) -> Option<f64> {
        self.0.min_separation()
    }

    /// Eigenvalues of the exchange matrix, in units of the natural rate.
    #[pyo3(signature = (constants=None))]
    fn eigenvalues(&self, constants: Option<&PyConstants>) -> PyResult<Vec<(f64, f64)>> {
        let c = constants_or_default(constants);
        let g = build_exchange_matrix(&self.0, &c).map_err(py_err)?;
        let s = eigenvalues_only(&g, &c).map_err(py_err)?;
        Ok(s.eigenvalues().iter().map(|l| (l.re, l.im)).collect())
    }

    /// Total emission rate after switch-off at `times` (units of τ_a).
    #[pyo3(signature = (times, mode="plane_wave", laser_direction=[1.0, 0.0, 0.0], seed=0, constants=None))]
    fn decay_trace(
        &self,
        times: Vec<f64>,
        mode: &str,
        laser_direction: [f64; 3],
        seed: u64,
        constants: Option<&PyConstants>,
    ) -> PyResult<PyTrace> {
        let c = constants_or_default(constants);
        let mode = initial_mode(mode, laser_direction)?;
        simulate_decay(&self.0, &c, mode, seed, &times, Detector::Total)
            .map(PyTrace)
            .map_err(py_err)
    }
}

#[pyclass(name = "FluorescenceTrace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTrace(FluorescenceTrace);

#[pymethods]
impl PyTrace {
    #[new]
    fn new(times: Vec<f64>, intensity: Vec<f64>) -> PyResult<Self> {
        FluorescenceTrace::new(times, intensity)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn intensity(&self) -> Vec<f64> {
        self.0.intensity.clone()
    }

    #[getter]
    fn intensity_err(&self) -> Vec<f64> {
        self.0.intensity_err.clone()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Log-linear 1/e fit; returns `(tau_over_tau_a, tau_err)`.
    #[pyo3(signature = (start=0.2, duration=3.5))]
    fn fit_decay_time(&self, start: f64, duration: f64) -> PyResult<(f64, f64)> {
        let f = analysis::fit_decay_time(&self.0, DecayWindow { start, duration })
            .map_err(py_err)?;
        Ok((f.tau_over_tau_a, f.tau_err))
    }
}

/// Ladder cascade; returns `(times, intensity, intensity_err)` per shot and τ_a.
#[pyfunction]
#[pyo3(signature = (atom_count, excited_fraction, shots, seed, source="independent", rates=None, t_max=5.0, bins=50))]
#[allow(clippy::too_many_arguments)]
fn ladder_trace(
    atom_count: usize,
    excited_fraction: f64,
    shots: usize,
    seed: u64,
    source: &str,
    rates: Option<Vec<f64>>,
    t_max: f64,
    bins: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let source = match source {
        "independent" => RateSource::Independent,
        "dicke_symmetric" => RateSource::dicke_symmetric(),
        "empirical" => RateSource::from_rates(rates.unwrap_or_default()).map_err(py_err)?,
        _ => return Err(PyValueError::new_err(format!("unknown rate source {source:?}"))),
    };
    let cfg = LadderConfig {
        atom_count,
        excited_fraction,
        source,
        shots,
        grid: TimeGrid::Linear { t_max, bins },
        record_times: false,
    };
    let r = dicke_ladder::run_cascade(&cfg, seed).map_err(py_err)?;
    Ok((r.trace.times, r.trace.intensity, r.trace.intensity_err))
}

/// Sinusoid fit; returns `(contrast, uncertainty, raw_contrast)`.
#[pyfunction]
#[pyo3(signature = (phases, signal, signal_err=None))]
fn fringe_contrast(
    phases: Vec<f64>,
    signal: Vec<f64>,
    signal_err: Option<Vec<f64>>,
) -> PyResult<(f64, f64, f64)> {
    let f = optics::fringe_contrast(&phases, &signal, signal_err.as_deref()).map_err(py_err)?;
    Ok((f.contrast, f.uncertainty, f.raw))
}

/// Steady-state excited fraction at saturation parameter `s`.
#[pyfunction]
fn excited_fraction(s: f64) -> f64 {
    analysis::excited_fraction(s)
}

/// `(exponent, exponent_err, prefactor)` of `y = A x^p`.
#[pyfunction]
fn fit_power_law(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = analysis::fit_power_law(&x, &y).map_err(py_err)?;
    Ok((f.exponent, f.exponent_err, f.prefactor))
}

/// Runs an experiment from TOML text. Returns `(outputs, manifest_json)`
/// with outputs keyed by file name; nothing is written to disk.
#[pyfunction]
#[pyo3(signature = (experiment, config="", workers=1, plots=false))]
fn run(
    py: Python<'_>,
    experiment: &str,
    config: &str,
    workers: usize,
    plots: bool,
) -> PyResult<(HashMap<String, Vec<u8>>, String)> {
    let exp = match experiment {
        "decay" => Experiment::Decay,
        "spectrum" => Experiment::Spectrum,
        "michelson" => Experiment::Michelson,
        "ladder" => Experiment::Ladder,
        "sweep" => Experiment::Sweep,
        _ => return Err(PyValueError::new_err(format!("unknown experiment {experiment:?}"))),
    };
    let cfg = ExperimentConfig::from_toml(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = py.detach(|| run_experiment(exp, &cfg, workers, plots));
    let r = result.map_err(|e| match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    let outputs = r
        .outputs
        .names()
        .into_iter()
        .map(|n| (n.to_string(), r.outputs.get(n).unwrap_or_default().to_vec()))
        .collect();
    let manifest =
        serde_json::to_string_pretty(&r.manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((outputs, manifest))
}

#[pymodule]
fn subradiance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConstants>()?;
    m.add_class::<PyCloud>()?;
    m.add_class::<PyAtoms>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(ladder_trace, m)?)?;
    m.add_function(wrap_pyfunction!(fringe_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(excited_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
