use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::contrast::{fringe_contrast, FringeContrast};
use super::image::{form_image, form_image_on, ImageGrid};
use super::psf::{coherent_psf, CoherentPsf, DetectionGeometry};
use crate::constants::PhysicalConstants;
use crate::error::{invalid, Error, Result};
use crate::rng::{purpose_seed, rng_from_seed};
use crate::stats::{mean, std_error};
use crate::{Vec3, C64};

/// Emitters at one gate time of one shot.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterSnapshot {
    pub positions: Vec<Vec3>,
    pub amplitudes: Vec<C64>,
    /// Quadrature weight of the gate.
    pub weight: f64,
}

/// Produces the emitters of shot `index`; must be deterministic in `index`.
pub trait ShotSource: Sync {
    fn snapshots(&self, index: u64) -> Result<Vec<EmitterSnapshot>>;
}

/// Sixteen phases over 2.5 fringe periods.
pub fn default_phases() -> Vec<f64> {
    let span = 2.5 * TAU;
    (0..16).map(|i| span * i as f64 / 15.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MichelsonSettings {
    /// Transverse shift of the second arm's image, metres.
    pub displacement: f64,
    pub phases: Vec<f64>,
    pub shots: usize,
    /// Mean detected photons per shot; `None` disables Poisson sampling.
    pub photon_budget: Option<f64>,
    pub seed: u64,
}

/// Gate-summed arm energies and cross term of one shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotMoments {
    pub e1: f64,
    pub e2: f64,
    /// `∫ conj(U)·U_Δ`.
    pub cross: C64,
}

impl ShotMoments {
    pub fn signal(&self, phi: f64) -> f64 {
        (0.25 * (self.e1 + self.e2 + 2.0 * (C64::from_polar(1.0, phi) * self.cross).re)).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interferogram {
    pub displacement: f64,
    pub phases: Vec<f64>,
    /// Mean output per shot, or total counts with Poisson sampling.
    pub signal: Vec<f64>,
    pub signal_err: Vec<f64>,
    pub shots: usize,
    pub counts: Option<Vec<u64>>,
    pub moments: Vec<ShotMoments>,
}

impl Interferogram {
    pub fn contrast(&self) -> Result<FringeContrast> {
        let err = (self.shots > 1 || self.counts.is_some()).then_some(self.signal_err.as_slice());
        fringe_contrast(&self.phases, &self.signal, err)
    }

    /// Shot-averaged contrast `2|⟨C⟩|/⟨E₁ + E₂⟩`.
    pub fn moment_contrast(&self) -> f64 {
        moment_contrast(&self.moments, None)
    }

    /// Bootstrap standard deviation of [`Self::moment_contrast`] over shots.
    pub fn bootstrap_contrast_err(&self, rounds: usize, seed: u64) -> f64 {
        let n = self.moments.len();
        if n < 2 {
            return 0.0;
        }
        let mut rng = rng_from_seed(seed);
        let mut idx = vec![0usize; n];
        let samples: Vec<f64> = (0..rounds)
            .map(|_| {
                for v in idx.iter_mut() {
                    *v = rng.gen_range(0..n);
                }
                moment_contrast(&self.moments, Some(&idx))
            })
            .collect();
        crate::stats::std_dev(&samples)
    }
}

fn moment_contrast(moments: &[ShotMoments], idx: Option<&[usize]>) -> f64 {
    let mut e = 0.0;
    let mut c = C64::new(0.0, 0.0);
    let mut add = |m: &ShotMoments| {
        e += m.e1 + m.e2;
        c += m.cross;
    };
    match idx {
        Some(idx) => idx.iter().for_each(|&i| add(&moments[i])),
        None => moments.iter().for_each(&mut add),
    }
    if e > 0.0 {
        (2.0 * c.norm() / e).min(1.0)
    } else {
        0.0
    }
}

pub(crate) fn check_displacement(geometry: &DetectionGeometry, displacement: f64) -> Result<()> {
    let b = ImageGrid::from_geometry(geometry).bounds();
    let width = b[0][1] - b[0][0];
    if !displacement.is_finite() || displacement.abs() > width {
        return invalid(format!(
            "displacement {displacement} m exceeds the {width} m grid"
        ));
    }
    Ok(())
}

pub(crate) fn warn_on_phase_span(phases: &[f64]) {
    let (lo, hi) = phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| {
            (l.min(p), h.max(p))
        });
    if hi - lo < TAU * (1.0 - 1e-9) {
        log::warn!("piezo phases span only {:.2}π", (hi - lo) / PI);
    }
}

/// Moments of a single shot. The second arm is the image of the emitters
/// shifted by `displacement` along the first transverse axis.
pub fn shot_moments(
    snapshots: &[EmitterSnapshot],
    displacement: f64,
    geometry: &DetectionGeometry,
    constants: &PhysicalConstants,
    psf: &CoherentPsf,
) -> Result<ShotMoments> {
    Ok(shot_moments_many(snapshots, &[displacement], geometry, constants, psf)?[0])
}

/// Whole-pixel shift for `displacement`, if it lies on the pixel lattice.
fn lattice_shift(displacement: f64, pitch: f64) -> Option<i64> {
    let s = displacement / pitch;
    ((s - s.round()).abs() < 1e-9).then(|| s.round() as i64)
}

/// [`shot_moments`] for several displacements at once. Displacements on the
/// pixel lattice share one image per gate, formed on a grid extended by the
/// largest shift; the others get an explicitly shifted second image.
pub fn shot_moments_many(
    snapshots: &[EmitterSnapshot],
    displacements: &[f64],
    geometry: &DetectionGeometry,
    constants: &PhysicalConstants,
    psf: &CoherentPsf,
) -> Result<Vec<ShotMoments>> {
    let grid = ImageGrid::from_geometry(geometry);
    let shift_axis = geometry.axis.transverse().0.index();
    let shifts: Vec<Option<i64>> = displacements
        .iter()
        .map(|&d| lattice_shift(d, grid.pitch))
        .collect();
    let s_max = shifts.iter().flatten().copied().fold(0, i64::max);
    let s_min = shifts.iter().flatten().copied().fold(0, i64::min);
    let [nx, nz] = grid.shape;
    let ext = ImageGrid {
        shape: [nx + (s_max - s_min) as usize, nz],
        pitch: grid.pitch,
        origin: [grid.origin[0] - s_max as f64 * grid.pitch, grid.origin[1]],
    };
    let area = grid.pixel_area();
    let zero = ShotMoments {
        e1: 0.0,
        e2: 0.0,
        cross: C64::new(0.0, 0.0),
    };
    let mut out = vec![zero; displacements.len()];
    for snap in snapshots {
        let u = form_image_on(
            ext,
            &snap.positions,
            &snap.amplitudes,
            geometry,
            psf,
            constants,
        )?;
        let row = |j: usize, offset: usize| {
            &u.data[j * ext.shape[0] + offset..j * ext.shape[0] + offset + nx]
        };
        let core = s_max as usize;
        let e1: f64 = (0..nz)
            .map(|j| row(j, core).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * area;
        for (m, (shift, &d)) in out.iter_mut().zip(shifts.iter().zip(displacements)) {
            let (e2, cross) = match shift {
                Some(0) => (e1, C64::new(e1, 0.0)),
                Some(s) => {
                    let off = (s_max - s) as usize;
                    let mut e2 = 0.0;
                    let mut cross = C64::new(0.0, 0.0);
                    for j in 0..nz {
                        for (a, b) in row(j, core).iter().zip(row(j, off)) {
                            e2 += b.norm_sqr();
                            cross += a.conj() * b;
                        }
                    }
                    (e2 * area, cross * area)
                }
                None => {
                    let own =
                        form_image(&snap.positions, &snap.amplitudes, geometry, psf, constants)?;
                    let shifted: Vec<Vec3> = snap
                        .positions
                        .iter()
                        .map(|r| {
                            let mut s = *r;
                            s[shift_axis] += d;
                            s
                        })
                        .collect();
                    let v = form_image(&shifted, &snap.amplitudes, geometry, psf, constants)?;
                    (v.energy(), own.overlap(&v))
                }
            };
            m.e1 += snap.weight * e1;
            m.e2 += snap.weight * e2;
            m.cross += snap.weight * cross;
        }
    }
    Ok(out)
}

/// Accumulates the Michelson output over shots; shots run in parallel and are
/// reduced in shot order.
pub fn michelson_interferogram(
    source: &dyn ShotSource,
    settings: &MichelsonSettings,
    geometry: &DetectionGeometry,
    constants: &PhysicalConstants,
) -> Result<Interferogram> {
    if settings.shots == 0 {
        return invalid("interferogram needs at least one shot");
    }
    if settings.phases.is_empty() {
        return invalid("interferogram needs at least one phase");
    }
    check_displacement(geometry, settings.displacement)?;
    warn_on_phase_span(&settings.phases);
    let psf = coherent_psf(geometry, constants)?;
    let moments: Vec<ShotMoments> = (0..settings.shots as u64)
        .into_par_iter()
        .map(|s| {
            let snaps = source.snapshots(s)?;
            shot_moments(&snaps, settings.displacement, geometry, constants, &psf)
        })
        .collect::<Result<_>>()?;

    assemble_interferogram(moments, settings)
}

/// Builds the interferogram from per-shot moments (in shot order).
pub fn assemble_interferogram(
    moments: Vec<ShotMoments>,
    settings: &MichelsonSettings,
) -> Result<Interferogram> {
    if moments.is_empty() {
        return invalid("interferogram needs at least one shot");
    }
    let mut signal = Vec::with_capacity(settings.phases.len());
    let mut signal_err = Vec::with_capacity(settings.phases.len());
    let mut column = vec![0.0; moments.len()];
    for &phi in &settings.phases {
        for (c, m) in column.iter_mut().zip(&moments) {
            *c = m.signal(phi);
        }
        signal.push(mean(&column));
        signal_err.push(if moments.len() > 1 {
            std_error(&column)
        } else {
            0.0
        });
    }

    let mut counts = None;
    if let Some(budget) = settings.photon_budget {
        if !(budget > 0.0) {
            return invalid("photon budget must be positive");
        }
        let avg = mean(&signal);
        if !(avg > 0.0) {
            return Err(Error::Fit("interferogram carries no light".into()));
        }
        let mut rng = rng_from_seed(purpose_seed(settings.seed, "photon-counts"));
        let scale = budget * settings.shots as f64 / avg;
        let sampled: Vec<u64> = signal
            .iter()
            .map(|&s| {
                let lambda = s * scale;
                if lambda > 0.0 {
                    Poisson::new(lambda)
                        .map(|d| d.sample(&mut rng) as u64)
                        .unwrap_or(0)
                } else {
                    0
                }
            })
            .collect();
        signal = sampled.iter().map(|&c| c as f64).collect();
        signal_err = sampled
            .iter()
            .map(|&c| (c as f64).sqrt().max(1.0))
            .collect();
        counts = Some(sampled);
    }
    Ok(Interferogram {
        displacement: settings.displacement,
        phases: settings.phases.clone(),
        signal,
        signal_err,
        shots: moments.len(),
        counts,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<EmitterSnapshot>);

    impl ShotSource for Fixed {
        fn snapshots(&self, _: u64) -> Result<Vec<EmitterSnapshot>> {
            Ok(self.0.clone())
        }
    }

    fn geometry() -> DetectionGeometry {
        DetectionGeometry {
            half_width: [20e-6, 8e-6],
            ..Default::default()
        }
    }

    fn settings(displacement: f64) -> MichelsonSettings {
        MichelsonSettings {
            displacement,
            phases: default_phases(),
            shots: 1,
            photon_budget: None,
            seed: 0,
        }
    }

    #[test]
    fn lattice_and_explicit_shifts_agree() {
        let c = PhysicalConstants::default();
        let g = geometry();
        let psf = coherent_psf(&g, &c).unwrap();
        let snaps = vec![EmitterSnapshot {
            positions: vec![[0.0; 3], [3e-6, 1e-7, 1e-6], [-2e-6, 4e-7, -3e-6]],
            amplitudes: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(-0.3, 0.2)],
            weight: 0.7,
        }];
        let d = [0.0, 4.0 * g.pitch, -7.0 * g.pitch, 2.0e-6 + 0.1 * g.pitch];
        let many = shot_moments_many(&snaps, &d, &g, &c, &psf).unwrap();
        for (m, &di) in many.iter().zip(&d) {
            let shifted: Vec<Vec3> = snaps[0]
                .positions
                .iter()
                .map(|r| [r[0] + di, r[1], r[2]])
                .collect();
            let u = form_image(&snaps[0].positions, &snaps[0].amplitudes, &g, &psf, &c).unwrap();
            let v = form_image(&shifted, &snaps[0].amplitudes, &g, &psf, &c).unwrap();
            let cross = u.overlap(&v) * 0.7;
            assert!((m.e1 - 0.7 * u.energy()).abs() < 1e-9 * m.e1);
            assert!((m.e2 - 0.7 * v.energy()).abs() < 1e-9 * m.e1);
            assert!((m.cross - cross).norm() < 1e-9 * m.e1);
        }
    }

    #[test]
    fn zero_displacement_is_fully_coherent() {
        let c = PhysicalConstants::default();
        let src = Fixed(vec![EmitterSnapshot {
            positions: vec![[0.0; 3], [3e-6, 1e-7, 1e-6], [-2e-6, 4e-7, 0.0]],
            amplitudes: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(-0.3, 0.2)],
            weight: 1.0,
        }]);
        let g = michelson_interferogram(&src, &settings(0.0), &geometry(), &c).unwrap();
        let f = g.contrast().unwrap();
        assert!((f.contrast - 1.0).abs() < 1e-12);
        let e = g.moments[0].e1;
        for (phi, s) in g.phases.iter().zip(&g.signal) {
            assert!((s - e * (1.0 + phi.cos()) / 2.0).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn displaced_single_atom_has_no_fringe() {
        let c = PhysicalConstants::default();
        let src = Fixed(vec![EmitterSnapshot {
            positions: vec![[0.0; 3]],
            amplitudes: vec![C64::new(1.0, 0.0)],
            weight: 1.0,
        }]);
        let psf = coherent_psf(&geometry(), &c).unwrap();
        let d = 5.0 * psf.intensity_fwhm();
        let g = michelson_interferogram(&src, &settings(d), &geometry(), &c).unwrap();
        assert!(g.contrast().unwrap().contrast < 0.03);
    }

    #[test]
    fn displacement_beyond_grid_is_rejected() {
        let c = PhysicalConstants::default();
        let src = Fixed(vec![]);
        assert!(michelson_interferogram(&src, &settings(41e-6), &geometry(), &c).is_err());
    }

    #[test]
    fn phase_average_is_half_the_arm_energy() {
        let c = PhysicalConstants::default();
        let src = Fixed(vec![EmitterSnapshot {
            positions: vec![[0.0; 3], [1e-6, 0.3e-6, 0.0]],
            amplitudes: vec![C64::new(1.0, 0.0), C64::new(0.2, 0.7)],
            weight: 1.0,
        }]);
        let phases: Vec<f64> = (0..32).map(|i| TAU * i as f64 / 32.0).collect();
        let s = MichelsonSettings {
            phases,
            ..settings(0.0)
        };
        let g = michelson_interferogram(&src, &s, &geometry(), &c).unwrap();
        let avg = mean(&g.signal);
        assert!((avg - 0.5 * g.moments[0].e1).abs() < 1e-8 * avg);
    }

    #[test]
    fn poisson_counts_track_budget() {
        let c = PhysicalConstants::default();
        let src = Fixed(vec![EmitterSnapshot {
            positions: vec![[0.0; 3]],
            amplitudes: vec![C64::new(1.0, 0.0)],
            weight: 1.0,
        }]);
        let s = MichelsonSettings {
            photon_budget: Some(1e4),
            shots: 3,
            ..settings(0.0)
        };
        let g = michelson_interferogram(&src, &s, &geometry(), &c).unwrap();
        let total: u64 = g.counts.as_ref().unwrap().iter().sum();
        let expect = 1e4 * 3.0 * 16.0;
        assert!((total as f64 - expect).abs() < 5.0 * expect.sqrt());
        let again = michelson_interferogram(&src, &s, &geometry(), &c).unwrap();
        assert_eq!(g.counts, again.counts);
    }
}
