use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::ensemble::Axis;
use crate::error::{invalid, Result};

/// First zero of J₁.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfModel {
    Airy,
    /// Gaussian amplitude with the same intensity FWHM as the Airy profile.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionGeometry {
    pub axis: Axis,
    pub numerical_aperture: f64,
    pub psf: PsfModel,
    /// Inflates the PSF radius (1 for a perfect lens).
    pub width_scale: f64,
    /// Image-plane scale factor; the simulation itself works in object-plane
    /// coordinates.
    pub magnification: f64,
    /// Object-plane pixel pitch, metres.
    pub pitch: f64,
    /// Half widths of the grid along the two transverse axes, metres.
    pub half_width: [f64; 2],
    /// Grid centre in transverse coordinates, metres.
    pub center: [f64; 2],
    /// PSF support radius in units of the Airy first-zero radius.
    pub cutoff_zeros: f64,
}

impl Default for DetectionGeometry {
    fn default() -> Self {
        Self {
            axis: Axis::Y,
            numerical_aperture: 0.19,
            psf: PsfModel::Airy,
            width_scale: 1.0,
            magnification: 1.0,
            pitch: 0.25e-6,
            half_width: [40e-6, 40e-6],
            center: [0.0, 0.0],
            cutoff_zeros: 8.0,
        }
    }
}

impl DetectionGeometry {
    pub fn nyquist_pitch(&self, constants: &PhysicalConstants) -> f64 {
        constants.wavelength / (4.0 * self.numerical_aperture)
    }

    pub fn validate(&self, constants: &PhysicalConstants) -> Result<()> {
        let na = self.numerical_aperture;
        if !(na > 0.0 && na < 1.0) {
            return invalid(format!("numerical aperture {na} outside (0, 1)"));
        }
        if !(self.pitch > 0.0) || self.pitch > self.nyquist_pitch(constants) * (1.0 + 1e-12) {
            return invalid(format!(
                "pixel pitch {} m must be positive and at most λ/(4 NA) = {} m",
                self.pitch,
                self.nyquist_pitch(constants)
            ));
        }
        if !(self.width_scale > 0.0 && self.magnification > 0.0 && self.cutoff_zeros > 0.0) {
            return invalid("width scale, magnification and PSF cutoff must be positive");
        }
        if self.half_width.iter().any(|h| !(*h >= self.pitch)) {
            return invalid("grid half widths must be at least one pixel");
        }
        Ok(())
    }

    /// Transverse coordinates of a 3-D point.
    pub fn project(&self, r: [f64; 3]) -> [f64; 2] {
        let (a, b) = self.axis.transverse();
        [r[a.index()], r[b.index()]]
    }

    /// Coordinate along the detection axis.
    pub fn longitudinal(&self, r: [f64; 3]) -> f64 {
        r[self.axis.index()]
    }
}

/// Radial coherent PSF `h(ρ)`, unit peak.
#[derive(Clone, Debug)]
pub struct CoherentPsf {
    model: PsfModel,
    /// `v = scale·ρ` for the Airy form.
    scale: f64,
    /// Gaussian amplitude `exp(−ρ²/(2s²))`.
    sigma: f64,
    cutoff: f64,
    step: f64,
    table: Vec<f64>,
}

const TABLE_SIZE: usize = 1 << 15;

fn jinc(v: f64) -> f64 {
    if v.abs() < 1e-8 {
        1.0 - v * v / 8.0
    } else {
        2.0 * libm::j1(v) / v
    }
}

/// Half-maximum radius of `jinc(v)²`, found by bisection.
fn airy_intensity_half_radius() -> f64 {
    let (mut lo, mut hi) = (0.0, J1_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if jinc(mid).powi(2) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl CoherentPsf {
    pub fn model(&self) -> PsfModel {
        self.model
    }

    /// Closed-form value.
    pub fn exact(&self, rho: f64) -> f64 {
        match self.model {
            PsfModel::Airy => jinc(self.scale * rho),
            PsfModel::Gaussian => (-rho * rho / (2.0 * self.sigma * self.sigma)).exp(),
        }
    }

    /// Tabulated value with linear interpolation; zero beyond the cutoff.
    pub fn value(&self, rho: f64) -> f64 {
        if rho >= self.cutoff {
            return 0.0;
        }
        let x = rho / self.step;
        let i = x as usize;
        let f = x - i as f64;
        self.table[i] * (1.0 - f) + self.table[i + 1] * f
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// First zero of the Airy profile (`None` for the Gaussian).
    pub fn first_zero(&self) -> Option<f64> {
        match self.model {
            PsfModel::Airy => Some(J1_FIRST_ZERO / self.scale),
            PsfModel::Gaussian => None,
        }
    }

    /// FWHM of `|h|²`.
    pub fn intensity_fwhm(&self) -> f64 {
        match self.model {
            PsfModel::Airy => 2.0 * airy_intensity_half_radius() / self.scale,
            PsfModel::Gaussian => 2.0 * self.sigma * std::f64::consts::LN_2.sqrt(),
        }
    }
}

/// Coherent PSF of the detection lens.
pub fn coherent_psf(
    geometry: &DetectionGeometry,
    constants: &PhysicalConstants,
) -> Result<CoherentPsf> {
    geometry.validate(constants)?;
    let scale = constants.wavenumber() * geometry.numerical_aperture / geometry.width_scale;
    let fwhm = 2.0 * airy_intensity_half_radius() / scale;
    let sigma = fwhm / (2.0 * std::f64::consts::LN_2.sqrt());
    let cutoff = geometry.cutoff_zeros * J1_FIRST_ZERO / scale;
    let step = cutoff / (TABLE_SIZE - 1) as f64;
    let mut psf = CoherentPsf {
        model: geometry.psf,
        scale,
        sigma,
        cutoff,
        step,
        table: Vec::new(),
    };
    psf.table = (0..=TABLE_SIZE)
        .map(|i| psf.exact(i as f64 * step))
        .collect();
    Ok(psf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airy_landmarks() {
        let c = PhysicalConstants::default();
        let psf = coherent_psf(&DetectionGeometry::default(), &c).unwrap();
        assert_eq!(psf.exact(0.0), 1.0);
        let z = psf.first_zero().unwrap();
        assert!((z - 0.61 * c.wavelength / 0.19).abs() / z < 2e-3);
        assert!(psf.exact(z).abs() < 1e-14);
        let fwhm = psf.intensity_fwhm();
        assert!((fwhm - 0.514 * c.wavelength / 0.19).abs() / fwhm < 2e-3);
        assert!((psf.exact(0.5 * fwhm).powi(2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_matches_fwhm() {
        let c = PhysicalConstants::default();
        let airy = coherent_psf(&DetectionGeometry::default(), &c).unwrap();
        let g = DetectionGeometry {
            psf: PsfModel::Gaussian,
            ..Default::default()
        };
        let gauss = coherent_psf(&g, &c).unwrap();
        let half = 0.5 * airy.intensity_fwhm();
        assert!((gauss.exact(half).powi(2) - 0.5).abs() < 1e-12);
        assert_eq!(gauss.first_zero(), None);
    }

    #[test]
    fn table_tracks_closed_form() {
        let psf =
            coherent_psf(&DetectionGeometry::default(), &PhysicalConstants::default()).unwrap();
        for i in 0..1000 {
            let rho = psf.cutoff() * i as f64 / 1000.0;
            assert!((psf.value(rho) - psf.exact(rho)).abs() < 1e-7);
        }
        assert_eq!(psf.value(psf.cutoff()), 0.0);
    }

    #[test]
    fn nyquist_is_enforced() {
        let c = PhysicalConstants::default();
        let g = DetectionGeometry {
            pitch: 1.1e-6,
            ..Default::default()
        };
        assert!(g.validate(&c).is_err());
        let g = DetectionGeometry {
            numerical_aperture: 1.0,
            ..Default::default()
        };
        assert!(g.validate(&c).is_err());
    }
}
