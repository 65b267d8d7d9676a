use serde::Serialize;

use super::psf::{CoherentPsf, DetectionGeometry};
use crate::constants::PhysicalConstants;
use crate::error::{invalid, Result};
use crate::{Vec3, C64};

/// Fraction of `Σ|β|²` from atoms outside the grid above which a warning is logged.
pub const OUTSIDE_WARNING_FRACTION: f64 = 0.01;

/// Square-pixel grid in transverse object-plane coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImageGrid {
    /// Pixels along the first and second transverse axes.
    pub shape: [usize; 2],
    pub pitch: f64,
    /// Coordinates of pixel (0, 0).
    pub origin: [f64; 2],
}

impl ImageGrid {
    pub fn from_geometry(geometry: &DetectionGeometry) -> Self {
        let n = |h: f64| 2 * (h / geometry.pitch).round() as usize + 1;
        let shape = [n(geometry.half_width[0]), n(geometry.half_width[1])];
        let origin = [
            geometry.center[0] - (shape[0] / 2) as f64 * geometry.pitch,
            geometry.center[1] - (shape[1] / 2) as f64 * geometry.pitch,
        ];
        Self {
            shape,
            pitch: geometry.pitch,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinate(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.pitch,
            self.origin[1] + j as f64 * self.pitch,
        ]
    }

    /// Full extent `[min, max]` along each axis.
    pub fn bounds(&self) -> [[f64; 2]; 2] {
        let last = self.coordinate(self.shape[0] - 1, self.shape[1] - 1);
        [[self.origin[0], last[0]], [self.origin[1], last[1]]]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let b = self.bounds();
        (b[0][0]..=b[0][1]).contains(&p[0]) && (b[1][0]..=b[1][1]).contains(&p[1])
    }

    pub fn pixel_area(&self) -> f64 {
        self.pitch * self.pitch
    }
}

/// Complex image field, stored with the first transverse index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageField {
    pub grid: ImageGrid,
    pub data: Vec<C64>,
    pub gate: Option<f64>,
    pub shot: Option<u64>,
}

impl ImageField {
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[j * self.grid.shape[0] + i]
    }

    /// `∫|U|²`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }

    /// `∫ conj(U)·V` over the common grid.
    pub fn overlap(&self, other: &ImageField) -> C64 {
        let s: C64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(u, v)| u.conj() * v)
            .sum();
        s * self.grid.pixel_area()
    }
}

/// `U(p) = Σ_i β_i e^{iθ_i} h(|p − p_i|)` with `θ_i = −k n̂·r_i`.
pub fn form_image(
    positions: &[Vec3],
    amplitudes: &[C64],
    geometry: &DetectionGeometry,
    psf: &CoherentPsf,
    constants: &PhysicalConstants,
) -> Result<ImageField> {
    if positions.len() != amplitudes.len() {
        return invalid(format!(
            "{} amplitudes for {} atoms",
            amplitudes.len(),
            positions.len()
        ));
    }
    form_image_on(
        ImageGrid::from_geometry(geometry),
        positions,
        amplitudes,
        geometry,
        psf,
        constants,
    )
}

pub(crate) fn form_image_on(
    grid: ImageGrid,
    positions: &[Vec3],
    amplitudes: &[C64],
    geometry: &DetectionGeometry,
    psf: &CoherentPsf,
    constants: &PhysicalConstants,
) -> Result<ImageField> {
    if positions.len() != amplitudes.len() {
        return invalid("amplitude and position counts differ");
    }
    let mut data = vec![C64::new(0.0, 0.0); grid.len()];
    let k = constants.wavenumber();
    let cutoff = psf.cutoff();
    let reach = (cutoff / grid.pitch).ceil() as i64;
    let [nx, nz] = [grid.shape[0] as i64, grid.shape[1] as i64];
    let mut total = 0.0;
    let mut outside = 0.0;
    for (r, b) in positions.iter().zip(amplitudes) {
        let weight = b.norm_sqr();
        total += weight;
        let p = geometry.project(*r);
        if !grid.contains(p) {
            outside += weight;
        }
        let source = b * C64::from_polar(1.0, -k * geometry.longitudinal(*r));
        let ci = ((p[0] - grid.origin[0]) / grid.pitch).round() as i64;
        let cj = ((p[1] - grid.origin[1]) / grid.pitch).round() as i64;
        for j in (cj - reach).max(0)..(cj + reach + 1).min(nz) {
            let dz = grid.origin[1] + j as f64 * grid.pitch - p[1];
            let row = (j * nx) as usize;
            for i in (ci - reach).max(0)..(ci + reach + 1).min(nx) {
                let dx = grid.origin[0] + i as f64 * grid.pitch - p[0];
                let rho = (dx * dx + dz * dz).sqrt();
                if rho < cutoff {
                    data[row + i as usize] += source * psf.value(rho);
                }
            }
        }
    }
    if total > 0.0 && outside > OUTSIDE_WARNING_FRACTION * total {
        log::warn!(
            "{:.1}% of the emitter weight lies outside the image grid",
            100.0 * outside / total
        );
    }
    Ok(ImageField {
        grid,
        data,
        gate: None,
        shot: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::psf::coherent_psf;

    fn setup() -> (PhysicalConstants, DetectionGeometry, CoherentPsf) {
        let c = PhysicalConstants::default();
        let g = DetectionGeometry {
            half_width: [20e-6, 10e-6],
            ..Default::default()
        };
        let psf = coherent_psf(&g, &c).unwrap();
        (c, g, psf)
    }

    #[test]
    fn grid_is_centred() {
        let (_, g, _) = setup();
        let grid = ImageGrid::from_geometry(&g);
        assert_eq!(grid.shape, [161, 81]);
        let mid = grid.coordinate(80, 40);
        assert!(mid[0].abs() < 1e-18 && mid[1].abs() < 1e-18);
    }

    #[test]
    fn single_atom_is_the_psf() {
        let (c, g, psf) = setup();
        let u = form_image(&[[0.0; 3]], &[C64::new(1.0, 0.0)], &g, &psf, &c).unwrap();
        for j in (0..81).step_by(7) {
            for i in (0..161).step_by(5) {
                let p = u.grid.coordinate(i, j);
                let want = psf.value((p[0] * p[0] + p[1] * p[1]).sqrt());
                assert!((u.at(i, j) - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn distant_pair_superposes() {
        let (c, g, psf) = setup();
        let a = [-12e-6, 0.0, 0.0];
        let b = [12e-6, 0.0, 0.0];
        let one = C64::new(1.0, 0.0);
        let both = form_image(&[a, b], &[one, one], &g, &psf, &c).unwrap();
        let left = form_image(&[a], &[one], &g, &psf, &c).unwrap();
        let right = form_image(&[b], &[one], &g, &psf, &c).unwrap();
        for idx in 0..both.data.len() {
            assert!((both.data[idx] - left.data[idx] - right.data[idx]).norm() < 1e-10);
        }
    }

    #[test]
    fn half_wave_depth_cancels_on_axis() {
        let (c, g, psf) = setup();
        let one = C64::new(1.0, 0.0);
        let u = form_image(
            &[[0.0; 3], [0.0, c.wavelength / 2.0, 0.0]],
            &[one, one],
            &g,
            &psf,
            &c,
        )
        .unwrap();
        assert!(u.at(80, 40).norm() < 1e-14);
    }

    #[test]
    fn energy_and_overlap_agree() {
        let (c, g, psf) = setup();
        let u = form_image(&[[1e-6, 0.0, 2e-6]], &[C64::new(0.3, 0.4)], &g, &psf, &c).unwrap();
        assert!((u.overlap(&u).re - u.energy()).abs() < 1e-12 * u.energy());
    }
}
