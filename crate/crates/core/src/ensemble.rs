//! Atomic cloud model: geometry, stochastic realizations, free expansion and
//! scalar figures of merit.
//!
//! Radii are 1/e density radii `w`, so the density is
//! `n(r) = n_peak · exp(−x²/w_x² − y²/w_y² − z²/w_z²)` and each coordinate is
//! Gaussian with standard deviation `w/√2`.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::Vec3;

/// Minimum allowed pairwise separation, in wavelengths.
pub const MIN_SEPARATION_WAVELENGTHS: f64 = 1e-3;

/// Consecutive rejections tolerated before a placement gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut u = [0.0; 3];
        u[self.index()] = 1.0;
        u
    }

    /// The two remaining axes in cyclic order, used as image-plane coordinates.
    pub fn transverse(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

/// Anisotropic Gaussian cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudGeometry {
    /// 1/e density radii (w_x, w_y, w_z), m.
    pub radii: Vec3,
    pub atom_count: usize,
    /// Kelvin.
    pub temperature: f64,
}

impl CloudGeometry {
    pub fn new(radii: Vec3, atom_count: usize, temperature: f64) -> Result<Self> {
        let g = Self {
            radii,
            atom_count,
            temperature,
        };
        g.validate()?;
        Ok(g)
    }

    /// The trapped cloud: 11,000 atoms, 6.3 × 6.3 × 360 μm, 40 μK.
    pub fn trapped() -> Self {
        Self {
            radii: [6.3e-6, 6.3e-6, 360e-6],
            atom_count: 11_000,
            temperature: 40e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return invalid(format!("cloud radii must be > 0, got {:?}", self.radii));
        }
        if self.atom_count == 0 {
            return invalid("cloud must contain at least one atom");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return invalid(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        Ok(())
    }

    pub fn with_atom_count(mut self, n: usize) -> Self {
        self.atom_count = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    /// Radial size R = sqrt(w_x² + w_y² + w_z²).
    pub fn radial_size(&self) -> f64 {
        self.radii.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Peak density N / (π^{3/2} w_x w_y w_z), 1/m³.
    pub fn peak_density(&self) -> f64 {
        self.atom_count as f64 / (PI.powf(1.5) * self.radii[0] * self.radii[1] * self.radii[2])
    }

    /// Density at a point, 1/m³.
    pub fn density(&self, r: Vec3) -> f64 {
        let q: f64 = (0..3).map(|i| (r[i] / self.radii[i]).powi(2)).sum();
        self.peak_density() * (-q).exp()
    }
}

/// One stochastic realization of the cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSet {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub seed: u64,
    /// Number of draws rejected by the separation guard.
    pub resampled: usize,
}

impl AtomSet {
    pub fn from_parts(positions: Vec<Vec3>, velocities: Vec<Vec3>, seed: u64) -> Result<Self> {
        if positions.len() != velocities.len() {
            return invalid(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            ));
        }
        Ok(Self {
            positions,
            velocities,
            seed,
            resampled: 0,
        })
    }

    /// Atoms at rest at the given positions.
    pub fn at_rest(positions: Vec<Vec3>) -> Self {
        let velocities = vec![[0.0; 3]; positions.len()];
        Self {
            positions,
            velocities,
            seed: 0,
            resampled: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Scales every position about the origin.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            for c in p.iter_mut() {
                *c *= factor;
            }
        }
        out
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            for i in 0..3 {
                p[i] += offset[i];
            }
        }
        out
    }

    /// Smallest pairwise distance (brute force), `None` for fewer than two atoms.
    pub fn min_separation(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                let d = distance(*a, *b);
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
        best
    }
}

pub(crate) fn distance(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Hash grid with cell size equal to the exclusion distance, so only the 27
/// neighbouring cells need checking.
struct ExclusionGrid {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<Vec3>>,
}

impl ExclusionGrid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: Vec3) -> (i64, i64, i64) {
        (
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
            (p[2] / self.cell).floor() as i64,
        )
    }

    fn is_free(&self, p: Vec3) -> bool {
        let (a, b, c) = self.key(p);
        for i in a - 1..=a + 1 {
            for j in b - 1..=b + 1 {
                for k in c - 1..=c + 1 {
                    if let Some(pts) = self.cells.get(&(i, j, k)) {
                        if pts.iter().any(|q| distance(p, *q) <= self.cell) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: Vec3) {
        let key = self.key(p);
        self.cells.entry(key).or_default().push(p);
    }
}

/// Draws `N` atoms from the Gaussian density and the Maxwell–Boltzmann
/// velocity distribution `∝ exp(−v²/v_w²)` per component.
///
/// Draws landing within 10⁻³ λ of an accepted atom are redrawn, which keeps
/// the position distribution exact apart from the excluded volume.
pub fn sample_cloud(
    geometry: &CloudGeometry,
    constants: &PhysicalConstants,
    seed: u64,
) -> Result<AtomSet> {
    geometry.validate()?;
    constants.validate()?;
    let n = geometry.atom_count;
    let min_sep = MIN_SEPARATION_WAVELENGTHS * constants.wavelength;
    let sigma = geometry.radii.map(|w| w / 2f64.sqrt());
    let v_sigma = constants.velocity_width(geometry.temperature) / 2f64.sqrt();

    let mut rng = rng_from_seed(seed);
    let mut grid = ExclusionGrid::new(min_sep);
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut resampled = 0;
    for index in 0..n {
        let mut attempts = 0;
        let p = loop {
            let p: Vec3 = [0, 1, 2].map(|i| sigma[i] * rng.sample::<f64, _>(StandardNormal));
            if grid.is_free(p) {
                break p;
            }
            attempts += 1;
            resampled += 1;
            if attempts >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::Crowded {
                    index,
                    attempts,
                    min_separation: min_sep,
                });
            }
        };
        grid.insert(p);
        positions.push(p);
        velocities.push([0, 1, 2].map(|_| v_sigma * rng.sample::<f64, _>(StandardNormal)));
    }
    if resampled > 0 {
        log::debug!("sample_cloud: {resampled} draw(s) rejected by the separation guard");
    }
    Ok(AtomSet {
        positions,
        velocities,
        seed,
        resampled,
    })
}

/// Free ballistic expansion: `w(t) = sqrt(w₀² + v_w² t²)` on every axis.
pub fn expand_cloud(
    geometry: &CloudGeometry,
    constants: &PhysicalConstants,
    t_expand: f64,
) -> Result<CloudGeometry> {
    geometry.validate()?;
    if !(t_expand >= 0.0 && t_expand.is_finite()) {
        return invalid(format!("expansion time must be >= 0, got {t_expand}"));
    }
    let v = constants.velocity_width(geometry.temperature);
    let spread = v * v * t_expand * t_expand;
    Ok(CloudGeometry {
        radii: geometry.radii.map(|w| (w * w + spread).sqrt()),
        ..*geometry
    })
}

/// Coherent-emission figure of merit `(N λ / R)²`.
pub fn figure_of_merit(geometry: &CloudGeometry, constants: &PhysicalConstants) -> f64 {
    let x = geometry.atom_count as f64 * constants.wavelength / geometry.radial_size();
    x * x
}

/// Resonant optical depth through the cloud centre along `axis`:
/// `n_peak σ₀ √π w_axis`.
pub fn optical_depth(geometry: &CloudGeometry, constants: &PhysicalConstants, axis: Axis) -> f64 {
    geometry.peak_density() * constants.cross_section() * PI.sqrt() * geometry.radii[axis.index()]
}

/// Ballistic drift `r ← r + v·dt` with `dt` in seconds.
pub fn drift_atoms(atoms: &AtomSet, dt: f64) -> Result<AtomSet> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return invalid(format!("drift time must be >= 0, got {dt}"));
    }
    let mut out = atoms.clone();
    for (p, v) in out.positions.iter_mut().zip(&atoms.velocities) {
        for i in 0..3 {
            p[i] += v[i] * dt;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn um(x: f64) -> f64 {
        x * 1e-6
    }

    #[test]
    fn rejects_empty_cloud() {
        let g = CloudGeometry {
            atom_count: 0,
            ..CloudGeometry::trapped()
        };
        assert!(sample_cloud(&g, &PhysicalConstants::default(), 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = CloudGeometry::trapped().with_atom_count(500);
        let c = PhysicalConstants::default();
        let a = sample_cloud(&g, &c, 42).unwrap();
        let b = sample_cloud(&g, &c, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_cloud(&g, &c, 43).unwrap());
    }

    #[test]
    fn crowded_cloud_fails_loudly() {
        // a cloud far smaller than the exclusion distance cannot host two atoms
        let g = CloudGeometry::new([1e-15; 3], 2, 0.0).unwrap();
        let err = sample_cloud(&g, &PhysicalConstants::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Crowded { index: 1, .. }));
    }

    #[test]
    fn guard_keeps_atoms_apart() {
        let c = PhysicalConstants::default();
        let g = CloudGeometry::new([3e-9; 3], 40, 0.0).unwrap();
        let atoms = sample_cloud(&g, &c, 5).unwrap();
        assert!(atoms.min_separation().unwrap() > 1e-3 * c.wavelength);
    }

    #[test]
    fn expansion_to_michelson_size() {
        let c = PhysicalConstants::default();
        let g = expand_cloud(&CloudGeometry::trapped(), &c, 0.2e-3).unwrap();
        assert!((g.radii[0] - um(18.6)).abs() < um(0.1), "{}", g.radii[0]);
        assert!((g.radii[0] / um(18.0) - 1.0).abs() < 0.05);
        let major = (g.radii[2] - um(360.0)) / um(360.0);
        assert!(major > 0.0 && major < 2e-3, "{major}");
    }

    #[test]
    fn zero_expansion_is_identity() {
        let c = PhysicalConstants::default();
        let g = CloudGeometry::trapped();
        assert_eq!(expand_cloud(&g, &c, 0.0).unwrap(), g);
        assert!(expand_cloud(&g, &c, -1.0).is_err());
    }

    #[test]
    fn figure_of_merit_at_michelson_geometry() {
        let g = CloudGeometry::new([um(18.0), um(18.0), um(360.0)], 11_000, 40e-6).unwrap();
        let fom = figure_of_merit(&g, &PhysicalConstants::default());
        assert!((fom - 565.0).abs() < 1.0, "{fom}");
        assert!((fom / 550.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn figure_of_merit_scaling() {
        let c = PhysicalConstants::default();
        let g = CloudGeometry::new([um(5.0), um(7.0), um(11.0)], 100, 0.0).unwrap();
        let base = figure_of_merit(&g, &c);
        let doubled = figure_of_merit(&g.with_atom_count(200), &c);
        assert!((doubled / base - 4.0).abs() < 1e-12);
        let big = CloudGeometry {
            radii: g.radii.map(|w| 2.0 * w),
            ..g
        };
        assert!((base / figure_of_merit(&big, &c) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn optical_depth_vanishes_with_density() {
        let c = PhysicalConstants::default();
        let g = CloudGeometry::trapped();
        let od1 = optical_depth(&g, &c, Axis::Y);
        let od_small = optical_depth(&g.with_atom_count(1), &c, Axis::Y);
        assert!(od_small < od1 / 10_000.0);
    }

    #[test]
    fn drift_moves_by_velocity_times_time() {
        let atoms = AtomSet::from_parts(vec![[0.0; 3]], vec![[1.0, 0.0, 0.0]], 0).unwrap();
        let moved = drift_atoms(&atoms, 1e-9).unwrap();
        assert_eq!(moved.positions[0], [1e-9, 0.0, 0.0]);
        assert_eq!(drift_atoms(&atoms, 0.0).unwrap(), atoms);
    }

    #[test]
    fn mismatched_parts_rejected() {
        assert!(AtomSet::from_parts(vec![[0.0; 3]], vec![], 0).is_err());
    }
}
