//! Experiment configuration file.
//!
//! Every physical quantity carries its unit in the key name (`_um`, `_ms`,
//! `_uk`, `_tau`, ...). Unknown keys are rejected, so a misspelt or
//! wrongly-suffixed key fails loudly instead of silently taking a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use subradiance::analysis::{default_decay_times, DecayEnsembleConfig, DecayWindow};
use subradiance::coupled_dipole::{Detector, InitialMode};
use subradiance::dicke_ladder::TimeGrid;
use subradiance::optics::{DetectionGeometry, EmissionModel, PsfModel, Scan, ScanConfig};
use subradiance::{Axis, CloudGeometry, PhysicalConstants};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub constants: ConstantsSection,
    pub cloud: CloudSection,
    pub decay: DecaySection,
    pub spectrum: SpectrumSection,
    pub ladder: LadderSection,
    pub detection: DetectionSection,
    pub michelson: MichelsonSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            constants: ConstantsSection::default(),
            cloud: CloudSection::default(),
            decay: DecaySection::default(),
            spectrum: SpectrumSection::default(),
            ladder: LadderSection::default(),
            detection: DetectionSection::default(),
            michelson: MichelsonSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub wavelength_nm: f64,
    pub lifetime_ns: f64,
    pub mass_kg: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let c = PhysicalConstants::default();
        Self {
            wavelength_nm: c.wavelength * 1e9,
            lifetime_ns: c.lifetime * 1e9,
            mass_kg: c.mass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudSection {
    pub radius_x_um: f64,
    pub radius_y_um: f64,
    pub radius_z_um: f64,
    pub atom_count: usize,
    pub temperature_uk: f64,
    /// Free expansion applied before anything else.
    pub expansion_ms: f64,
    /// Refuse to build exchange matrices larger than this.
    pub max_atoms: usize,
}

impl Default for CloudSection {
    fn default() -> Self {
        Self {
            radius_x_um: 6.3,
            radius_y_um: 6.3,
            radius_z_um: 360.0,
            atom_count: 11_000,
            temperature_uk: 40.0,
            expansion_ms: 0.0,
            max_atoms: 12_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialModeName {
    PlaneWave,
    Uniform,
    RandomPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorName {
    Total,
    Directed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub initial_mode: InitialModeName,
    pub laser_direction: [f64; 3],
    pub detector: DetectorName,
    pub detector_direction: [f64; 3],
    pub drift: bool,
    pub seeds: usize,
    pub dt_tau: f64,
    pub window_start_tau: f64,
    pub window_duration_tau: f64,
    pub position_scale: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            initial_mode: InitialModeName::PlaneWave,
            laser_direction: [1.0, 0.0, 0.0],
            detector: DetectorName::Total,
            detector_direction: [0.0, 1.0, 0.0],
            drift: false,
            seeds: 20,
            dt_tau: 0.05,
            window_start_tau: 0.2,
            window_duration_tau: 3.5,
            position_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Empty means the cloud's own atom count.
    pub atom_counts: Vec<usize>,
    pub seeds: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            atom_counts: vec![250, 500, 1000, 2000, 4000],
            seeds: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSourceName {
    Empirical,
    Independent,
    DickeSymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridName {
    Linear,
    Logarithmic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    pub excited_fraction: f64,
    pub source: RateSourceName,
    pub dicke_exponent: f64,
    /// Cloud realizations pooled into the empirical rate distribution.
    pub spectrum_realizations: usize,
    pub shots: usize,
    pub grid: GridName,
    pub t_min_tau: f64,
    pub t_max_tau: f64,
    pub bins: usize,
    pub record_times: bool,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            excited_fraction: 0.3,
            source: RateSourceName::Empirical,
            dicke_exponent: 1.0,
            spectrum_realizations: 1,
            shots: 100_000,
            grid: GridName::Logarithmic,
            t_min_tau: 1e-3,
            t_max_tau: 5.0,
            bins: 60,
            record_times: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub axis: Axis,
    pub numerical_aperture: f64,
    pub psf: PsfModel,
    pub width_scale: f64,
    pub magnification: f64,
    pub pitch_um: f64,
    pub half_width_um: [f64; 2],
    pub center_um: [f64; 2],
    pub cutoff_zeros: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionGeometry::default();
        Self {
            axis: d.axis,
            numerical_aperture: d.numerical_aperture,
            psf: d.psf,
            width_scale: d.width_scale,
            magnification: d.magnification,
            pitch_um: d.pitch * 1e6,
            half_width_um: d.half_width.map(|h| h * 1e6),
            center_um: d.center.map(|c| c * 1e6),
            cutoff_zeros: d.cutoff_zeros,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    Displacement,
    AtomNumber,
    Temperature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MichelsonSection {
    pub emission: EmissionModel,
    pub initial_mode: InitialModeName,
    pub laser_direction: [f64; 3],
    pub gates_tau: Vec<f64>,
    pub drift: bool,
    /// Arm displacement when the scan runs over atom number or temperature.
    pub displacement_um: f64,
    pub phase_points: usize,
    pub phase_span_rad: f64,
    pub shots: usize,
    pub photon_budget: Option<f64>,
    pub scan: ScanAxis,
    pub displacements_um: Vec<f64>,
    pub atom_counts: Vec<usize>,
    pub temperatures_uk: Vec<f64>,
}

impl Default for MichelsonSection {
    fn default() -> Self {
        Self {
            emission: EmissionModel::Collective,
            initial_mode: InitialModeName::PlaneWave,
            laser_direction: [1.0, 0.0, 0.0],
            gates_tau: vec![0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
            drift: true,
            displacement_um: 10.0,
            phase_points: 16,
            phase_span_rad: 5.0 * std::f64::consts::PI,
            shots: 1000,
            photon_budget: None,
            scan: ScanAxis::Displacement,
            displacements_um: vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0],
            atom_counts: vec![],
            temperatures_uk: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub expansion_ms: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            expansion_ms: vec![0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

fn initial_mode(name: InitialModeName, direction: [f64; 3]) -> InitialMode {
    match name {
        InitialModeName::PlaneWave => InitialMode::PlaneWave { direction },
        InitialModeName::Uniform => InitialMode::Uniform,
        InitialModeName::RandomPhase => InitialMode::RandomPhase,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            wavelength: self.constants.wavelength_nm * 1e-9,
            lifetime: self.constants.lifetime_ns * 1e-9,
            mass: self.constants.mass_kg,
        }
    }

    /// The cloud after the configured free expansion.
    pub fn geometry(&self) -> Result<CloudGeometry, CliError> {
        let c = &self.cloud;
        let base = CloudGeometry::new(
            [c.radius_x_um, c.radius_y_um, c.radius_z_um].map(|r| r * 1e-6),
            c.atom_count,
            c.temperature_uk * 1e-6,
        )?;
        Ok(subradiance::ensemble::expand_cloud(
            &base,
            &self.constants(),
            c.expansion_ms * 1e-3,
        )?)
    }

    pub fn check_atoms(&self, n: usize) -> Result<(), CliError> {
        if n > self.cloud.max_atoms {
            return Err(subradiance::Error::TooManyAtoms {
                requested: n,
                cap: self.cloud.max_atoms,
            }
            .into());
        }
        Ok(())
    }

    pub fn decay_window(&self) -> DecayWindow {
        DecayWindow {
            start: self.decay.window_start_tau,
            duration: self.decay.window_duration_tau,
        }
    }

    pub fn decay_config(&self) -> Result<DecayEnsembleConfig, CliError> {
        let d = &self.decay;
        if !(d.dt_tau > 0.0 && d.dt_tau.is_finite()) {
            return Err(CliError::Config(format!(
                "decay.dt_tau must be positive, got {}",
                d.dt_tau
            )));
        }
        let window = self.decay_window();
        if !(window.start >= 0.0 && window.duration > 0.0) {
            return Err(CliError::Config(
                "decay window needs start >= 0 and a positive duration".into(),
            ));
        }
        let detector = match d.detector {
            DetectorName::Total => Detector::Total,
            DetectorName::Directed => Detector::Directed {
                direction: d.detector_direction,
                drift: d.drift,
            },
        };
        Ok(DecayEnsembleConfig {
            constants: self.constants(),
            mode: initial_mode(d.initial_mode, d.laser_direction),
            detector,
            seeds: d.seeds,
            master_seed: self.seed,
            times: default_decay_times(window, d.dt_tau),
            window,
            position_scale: d.position_scale,
        })
    }

    pub fn ladder_grid(&self) -> TimeGrid {
        let l = &self.ladder;
        match l.grid {
            GridName::Linear => TimeGrid::Linear {
                t_max: l.t_max_tau,
                bins: l.bins,
            },
            GridName::Logarithmic => TimeGrid::Logarithmic {
                t_min: l.t_min_tau,
                t_max: l.t_max_tau,
                bins: l.bins,
            },
        }
    }

    pub fn detection(&self) -> DetectionGeometry {
        let d = &self.detection;
        DetectionGeometry {
            axis: d.axis,
            numerical_aperture: d.numerical_aperture,
            psf: d.psf,
            width_scale: d.width_scale,
            magnification: d.magnification,
            pitch: d.pitch_um * 1e-6,
            half_width: d.half_width_um.map(|h| h * 1e-6),
            center: d.center_um.map(|c| c * 1e-6),
            cutoff_zeros: d.cutoff_zeros,
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        let m = &self.michelson;
        let n = m.phase_points;
        (0..n)
            .map(|i| m.phase_span_rad * i as f64 / (n.max(2) - 1) as f64)
            .collect()
    }

    pub fn scan_config(&self) -> Result<ScanConfig, CliError> {
        let m = &self.michelson;
        if let Some(b) = m.photon_budget {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::Config(format!(
                    "michelson.photon_budget must be positive, got {b}"
                )));
            }
        }
        Ok(ScanConfig {
            geometry: self.geometry()?,
            constants: self.constants(),
            detection: self.detection(),
            emission: m.emission,
            initial: initial_mode(m.initial_mode, m.laser_direction),
            gates: m.gates_tau.clone(),
            drift: m.drift,
            displacement: m.displacement_um * 1e-6,
            phases: self.phases(),
            shots: m.shots,
            photon_budget: m.photon_budget,
            seed: self.seed,
        })
    }

    pub fn scan(&self) -> Result<Scan, CliError> {
        let m = &self.michelson;
        let scan = match m.scan {
            ScanAxis::Displacement => {
                Scan::Displacement(m.displacements_um.iter().map(|d| d * 1e-6).collect())
            }
            ScanAxis::AtomNumber => Scan::AtomNumber(m.atom_counts.clone()),
            ScanAxis::Temperature => {
                Scan::Temperature(m.temperatures_uk.iter().map(|t| t * 1e-6).collect())
            }
        };
        if scan.is_empty() {
            let key = match m.scan {
                ScanAxis::Displacement => "displacements_um",
                ScanAxis::AtomNumber => "atom_counts",
                ScanAxis::Temperature => "temperatures_uk",
            };
            return Err(CliError::Config(format!(
                "michelson.{key} must list at least one value for a {:?} scan",
                m.scan
            )));
        }
        Ok(scan)
    }

    pub fn expansion_times_s(&self) -> Vec<f64> {
        self.sweep.expansion_ms.iter().map(|t| t * 1e-3).collect()
    }
}
