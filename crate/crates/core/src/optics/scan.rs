use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::michelson::{
    assemble_interferogram, check_displacement, shot_moments, shot_moments_many,
    warn_on_phase_span, EmitterSnapshot, Interferogram, MichelsonSettings, ShotMoments, ShotSource,
};
use super::psf::{coherent_psf, CoherentPsf, DetectionGeometry};
use crate::constants::PhysicalConstants;
use crate::coupled_dipole::{
    build_exchange_matrix, diagonalize, evolve, initial_amplitudes, InitialMode,
};
use crate::ensemble::{sample_cloud, AtomSet, CloudGeometry};
use crate::error::{invalid, Result};
use crate::rng::{purpose_seed, rng_from_seed, stream_seed};
use crate::C64;

/// Where the emitter amplitudes come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionModel {
    /// Coupled-dipole amplitudes at the gate times.
    Collective,
    /// Collective magnitudes with i.i.d. uniform phases (the uncorrelated control).
    PhaseRandomized,
    /// Equal magnitudes and i.i.d. phases, single gate, no evolution.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanConfig {
    pub geometry: CloudGeometry,
    pub constants: PhysicalConstants,
    pub detection: DetectionGeometry,
    pub emission: EmissionModel,
    pub initial: InitialMode,
    /// Gate times in units of τ_a.
    pub gates: Vec<f64>,
    /// Move atoms ballistically up to each gate time.
    pub drift: bool,
    /// Arm displacement for atom-number and temperature scans, metres.
    pub displacement: f64,
    pub phases: Vec<f64>,
    pub shots: usize,
    pub photon_budget: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum Scan {
    /// Metres.
    Displacement(Vec<f64>),
    AtomNumber(Vec<usize>),
    /// Kelvin.
    Temperature(Vec<f64>),
}

impl Scan {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Scan::Displacement(v) | Scan::Temperature(v) => v.clone(),
            Scan::AtomNumber(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Scan::Displacement(v) | Scan::Temperature(v) => v.len(),
            Scan::AtomNumber(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scan::Displacement(_) => "displacement_m",
            Scan::AtomNumber(_) => "atom_number",
            Scan::Temperature(_) => "temperature_k",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContrastCurve {
    pub parameter: &'static str,
    pub values: Vec<f64>,
    /// Fitted fringe contrast.
    pub contrast: Vec<f64>,
    /// Bootstrap over shots, combined with the fit error when counts are sampled.
    pub contrast_err: Vec<f64>,
    pub raw: Vec<f64>,
    pub interferograms: Vec<Interferogram>,
}

const BOOTSTRAP_ROUNDS: usize = 200;

/// Trapezoid weights over the gate times.
pub fn gate_weights(gates: &[f64]) -> Vec<f64> {
    let n = gates.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { gates[0] } else { gates[i - 1] };
            let hi = if i + 1 == n {
                gates[n - 1]
            } else {
                gates[i + 1]
            };
            0.5 * (hi - lo)
        })
        .collect()
}

fn random_phases(magnitudes: impl Iterator<Item = f64>, rng: &mut impl Rng) -> Vec<C64> {
    magnitudes
        .map(|m| C64::from_polar(m, TAU * rng.gen::<f64>()))
        .collect()
}

/// Amplitudes per gate for one realization; `(time, weight, amplitudes)`.
fn gate_amplitudes(
    cfg: &ScanConfig,
    atoms: &AtomSet,
    seed: u64,
) -> Result<Vec<(f64, f64, Vec<C64>)>> {
    let n = atoms.len();
    if cfg.emission == EmissionModel::Independent {
        let mut rng = rng_from_seed(purpose_seed(seed, "independent"));
        let m = 1.0 / (n as f64).sqrt();
        return Ok(vec![(
            0.0,
            1.0,
            random_phases(std::iter::repeat_n(m, n), &mut rng),
        )]);
    }
    let g = build_exchange_matrix(atoms, &cfg.constants)?;
    let spectrum = diagonalize(&g, &cfg.constants)?;
    let beta0 = initial_amplitudes(
        atoms,
        &cfg.constants,
        cfg.initial,
        purpose_seed(seed, "amplitudes"),
    )?;
    let mut times = Vec::with_capacity(cfg.gates.len() + 1);
    let offset = usize::from(cfg.gates[0] != 0.0);
    if offset == 1 {
        times.push(0.0);
    }
    times.extend_from_slice(&cfg.gates);
    let traj = evolve(&g, &spectrum, &beta0, &times)?;
    let weights = gate_weights(&cfg.gates);
    let mut rng = rng_from_seed(purpose_seed(seed, "control"));
    Ok(cfg
        .gates
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let beta = &traj.amplitudes[i + offset];
            let amps = match cfg.emission {
                EmissionModel::PhaseRandomized => {
                    random_phases(beta.iter().map(|b| b.norm()), &mut rng)
                }
                _ => beta.clone(),
            };
            (t, weights[i], amps)
        })
        .collect())
}

fn snapshots(
    cfg: &ScanConfig,
    atoms: &AtomSet,
    gates: &[(f64, f64, Vec<C64>)],
) -> Vec<EmitterSnapshot> {
    gates
        .iter()
        .map(|(t, w, amps)| {
            let dt = if cfg.drift {
                t * cfg.constants.lifetime
            } else {
                0.0
            };
            let positions = atoms
                .positions
                .iter()
                .zip(&atoms.velocities)
                .map(|(r, v)| [0, 1, 2].map(|a| r[a] + v[a] * dt))
                .collect();
            EmitterSnapshot {
                positions,
                amplitudes: amps.clone(),
                weight: *w,
            }
        })
        .collect()
}

/// One fresh realization per shot of `cfg.geometry`.
pub struct CloudShots<'a> {
    pub config: &'a ScanConfig,
}

impl ShotSource for CloudShots<'_> {
    fn snapshots(&self, index: u64) -> Result<Vec<EmitterSnapshot>> {
        let seed = stream_seed(self.config.seed, index);
        let atoms = sample_cloud(&self.config.geometry, &self.config.constants, seed)?;
        let gates = gate_amplitudes(self.config, &atoms, seed)?;
        Ok(snapshots(self.config, &atoms, &gates))
    }
}

fn validate(cfg: &ScanConfig) -> Result<()> {
    cfg.geometry.validate()?;
    cfg.constants.validate()?;
    cfg.detection.validate(&cfg.constants)?;
    if cfg.shots == 0 {
        return invalid("scan needs at least one shot");
    }
    if cfg.gates.is_empty() || cfg.gates[0] < 0.0 || cfg.gates.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("gate times must be non-negative and strictly increasing");
    }
    warn_on_phase_span(&cfg.phases);
    Ok(())
}

fn settings(cfg: &ScanConfig, displacement: f64, point: usize) -> MichelsonSettings {
    MichelsonSettings {
        displacement,
        phases: cfg.phases.clone(),
        shots: cfg.shots,
        photon_budget: cfg.photon_budget,
        seed: stream_seed(purpose_seed(cfg.seed, "scan-point"), point as u64),
    }
}

/// Per shot (outer, parallel) and scan point (inner) moments.
fn collect<F>(cfg: &ScanConfig, points: usize, shot: F) -> Result<Vec<Vec<ShotMoments>>>
where
    F: Fn(u64, u64) -> Result<Vec<ShotMoments>> + Sync,
{
    let per_shot: Vec<Vec<ShotMoments>> = (0..cfg.shots as u64)
        .into_par_iter()
        .map(|s| shot(s, stream_seed(cfg.seed, s)))
        .collect::<Result<_>>()?;
    Ok((0..points)
        .map(|p| per_shot.iter().map(|m| m[p]).collect())
        .collect())
}

fn displacement_moments(
    cfg: &ScanConfig,
    psf: &CoherentPsf,
    displacements: &[f64],
) -> Result<Vec<Vec<ShotMoments>>> {
    collect(cfg, displacements.len(), |_, seed| {
        let atoms = sample_cloud(&cfg.geometry, &cfg.constants, seed)?;
        let snaps = snapshots(cfg, &atoms, &gate_amplitudes(cfg, &atoms, seed)?);
        shot_moments_many(&snaps, displacements, &cfg.detection, &cfg.constants, psf)
    })
}

/// Phases and magnitudes do not depend on temperature: positions drawn from
/// one seed are identical at every temperature, so one evolution per shot
/// serves every scan point.
fn temperature_moments(
    cfg: &ScanConfig,
    psf: &CoherentPsf,
    temps: &[f64],
) -> Result<Vec<Vec<ShotMoments>>> {
    collect(cfg, temps.len(), |_, seed| {
        let sets = temps
            .iter()
            .map(|&t| sample_cloud(&cfg.geometry.with_temperature(t), &cfg.constants, seed))
            .collect::<Result<Vec<_>>>()?;
        let shared = sets.iter().all(|a| a.positions == sets[0].positions);
        let common = if shared {
            Some(gate_amplitudes(cfg, &sets[0], seed)?)
        } else {
            None
        };
        sets.iter()
            .map(|atoms| {
                let gates = match &common {
                    Some(g) => g.clone(),
                    None => gate_amplitudes(cfg, atoms, seed)?,
                };
                let snaps = snapshots(cfg, atoms, &gates);
                shot_moments(
                    &snaps,
                    cfg.displacement,
                    &cfg.detection,
                    &cfg.constants,
                    psf,
                )
            })
            .collect()
    })
}

fn atom_number_moments(
    cfg: &ScanConfig,
    psf: &CoherentPsf,
    counts: &[usize],
) -> Result<Vec<Vec<ShotMoments>>> {
    collect(cfg, counts.len(), |_, seed| {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let geometry = cfg.geometry.with_atom_count(n);
                geometry.validate()?;
                let s = stream_seed(seed, i as u64);
                let atoms = sample_cloud(&geometry, &cfg.constants, s)?;
                let snaps = snapshots(cfg, &atoms, &gate_amplitudes(cfg, &atoms, s)?);
                shot_moments(
                    &snaps,
                    cfg.displacement,
                    &cfg.detection,
                    &cfg.constants,
                    psf,
                )
            })
            .collect()
    })
}

/// Fringe contrast for each scan value.
pub fn contrast_scan(cfg: &ScanConfig, scan: &Scan) -> Result<ContrastCurve> {
    validate(cfg)?;
    if scan.is_empty() {
        return invalid("scan has no values");
    }
    let psf = coherent_psf(&cfg.detection, &cfg.constants)?;
    let (moments, displacements) = match scan {
        Scan::Displacement(d) => {
            for &x in d {
                check_displacement(&cfg.detection, x)?;
            }
            (displacement_moments(cfg, &psf, d)?, d.clone())
        }
        Scan::Temperature(t) => {
            check_displacement(&cfg.detection, cfg.displacement)?;
            if t.iter().any(|v| !(*v >= 0.0)) {
                return invalid("temperatures must be non-negative");
            }
            (
                temperature_moments(cfg, &psf, t)?,
                vec![cfg.displacement; t.len()],
            )
        }
        Scan::AtomNumber(n) => {
            check_displacement(&cfg.detection, cfg.displacement)?;
            (
                atom_number_moments(cfg, &psf, n)?,
                vec![cfg.displacement; n.len()],
            )
        }
    };
    let mut curve = ContrastCurve {
        parameter: scan.name(),
        values: scan.values(),
        contrast: Vec::new(),
        contrast_err: Vec::new(),
        raw: Vec::new(),
        interferograms: Vec::new(),
    };
    for (i, (m, d)) in moments.into_iter().zip(displacements).enumerate() {
        let s = settings(cfg, d, i);
        let gram = assemble_interferogram(m, &s)?;
        let fit = gram.contrast()?;
        let boot = gram.bootstrap_contrast_err(BOOTSTRAP_ROUNDS, purpose_seed(s.seed, "bootstrap"));
        let err = if gram.counts.is_some() {
            boot.hypot(fit.uncertainty)
        } else {
            boot
        };
        curve.contrast.push(fit.contrast);
        curve.contrast_err.push(err);
        curve.raw.push(fit.raw);
        curve.interferograms.push(gram);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::michelson::{default_phases, michelson_interferogram};

    fn config(emission: EmissionModel) -> ScanConfig {
        ScanConfig {
            geometry: CloudGeometry::new([3e-6, 3e-6, 3e-6], 40, 50e-6).unwrap(),
            constants: PhysicalConstants::default(),
            detection: DetectionGeometry {
                half_width: [15e-6, 15e-6],
                pitch: 0.5e-6,
                cutoff_zeros: 4.0,
                ..Default::default()
            },
            emission,
            initial: InitialMode::default(),
            gates: vec![1.0, 2.0, 3.0],
            drift: true,
            displacement: 4e-6,
            phases: default_phases(),
            shots: 6,
            photon_budget: None,
            seed: 17,
        }
    }

    #[test]
    fn trapezoid_weights() {
        assert_eq!(gate_weights(&[2.0]), vec![1.0]);
        assert_eq!(gate_weights(&[0.0, 1.0, 3.0]), vec![0.5, 1.5, 1.0]);
    }

    #[test]
    fn zero_displacement_scan_is_coherent() {
        for model in [
            EmissionModel::Collective,
            EmissionModel::PhaseRandomized,
            EmissionModel::Independent,
        ] {
            let c = contrast_scan(&config(model), &Scan::Displacement(vec![0.0])).unwrap();
            assert!((c.contrast[0] - 1.0).abs() < 1e-10, "{model:?}");
        }
    }

    #[test]
    fn scan_matches_single_interferogram() {
        let cfg = config(EmissionModel::Collective);
        let curve = contrast_scan(&cfg, &Scan::Displacement(vec![0.0, 4e-6])).unwrap();
        let s = settings(&cfg, 4e-6, 1);
        let gram = michelson_interferogram(
            &CloudShots { config: &cfg },
            &s,
            &cfg.detection,
            &cfg.constants,
        )
        .unwrap();
        assert_eq!(gram.moments, curve.interferograms[1].moments);
    }

    #[test]
    fn temperature_scan_shares_evolution_exactly() {
        let cfg = config(EmissionModel::Collective);
        let temps = vec![45e-6, 100e-6];
        let curve = contrast_scan(&cfg, &Scan::Temperature(temps.clone())).unwrap();
        for (i, &t) in temps.iter().enumerate() {
            let mut single = cfg.clone();
            single.geometry = cfg.geometry.with_temperature(t);
            let s = settings(&cfg, cfg.displacement, i);
            let gram = michelson_interferogram(
                &CloudShots { config: &single },
                &s,
                &cfg.detection,
                &cfg.constants,
            )
            .unwrap();
            assert_eq!(gram.moments, curve.interferograms[i].moments);
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let cfg = config(EmissionModel::PhaseRandomized);
        let scan = Scan::AtomNumber(vec![5, 30]);
        let a = contrast_scan(&cfg, &scan).unwrap();
        let b = contrast_scan(&cfg, &scan).unwrap();
        assert_eq!(a, b);
        assert!(a
            .contrast
            .iter()
            .chain(&a.raw)
            .all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn rejects_displacement_beyond_grid() {
        let cfg = config(EmissionModel::Independent);
        assert!(contrast_scan(&cfg, &Scan::Displacement(vec![1e-4])).is_err());
        assert!(contrast_scan(&cfg, &Scan::Displacement(vec![])).is_err());
    }
}
