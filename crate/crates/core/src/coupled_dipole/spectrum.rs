use std::io::Write;

use faer::Mat;
use rand::Rng;
use serde::Serialize;

use super::matrix::ExchangeMatrix;
use crate::constants::PhysicalConstants;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::stats::{quantile_sorted, sort_floats, std_dev};
use crate::C64;

/// Relative tolerance of the trace identity `Σ λ_n = N`.
pub const TRACE_TOLERANCE: f64 = 1e-8;
/// Lower bound accepted for `Re λ_n` (the decay kernel is positive semidefinite).
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Eigen-decomposition of an exchange matrix.
///
/// Eigenvalues are sorted by real part, largest first. `Re λ > 1` are
/// superradiant modes, `Re λ < 1` subradiant ones.
#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    eigenvalues: Vec<C64>,
    eigenvectors: Option<Mat<C64>>,
    natural_rate: f64,
}

impl ModeSpectrum {
    /// Builds a spectrum from eigenvalues alone (no propagation possible).
    pub fn from_eigenvalues(mut eigenvalues: Vec<C64>, constants: &PhysicalConstants) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re));
        Self {
            eigenvalues,
            eigenvectors: None,
            natural_rate: constants.natural_rate(),
        }
    }

    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> Option<&Mat<C64>> {
        self.eigenvectors.as_ref()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.re).collect()
    }

    /// Γ_n = Γ_a Re λ_n, 1/s.
    pub fn decay_rates(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| self.natural_rate * l.re)
            .collect()
    }

    /// δ_n = (Γ_a/2) Im λ_n, rad/s.
    pub fn shifts(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| 0.5 * self.natural_rate * l.im)
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.eigenvalues.iter().sum()
    }

    pub fn min_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the trace identity and positivity.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.order() as f64;
        let tr = self.trace();
        if (tr - C64::new(n, 0.0)).norm() > TRACE_TOLERANCE * n {
            return Err(Error::SpectralInvariant(format!(
                "trace {tr} differs from N = {n}"
            )));
        }
        let min = self.min_real();
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::SpectralInvariant(format!(
                "eigenvalue with Re λ = {min:e} < 0"
            )));
        }
        Ok(())
    }

    /// Per-mode residuals `‖G v_n − λ_n v_n‖ / ‖v_n‖`.
    pub fn residuals(&self, g: &ExchangeMatrix) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        let gv = g.matrix() * v;
        Some(
            (0..self.order())
                .map(|n| {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for j in 0..self.order() {
                        num += (gv[(j, n)] - self.eigenvalues[n] * v[(j, n)]).norm_sqr();
                        den += v[(j, n)].norm_sqr();
                    }
                    (num / den).sqrt()
                })
                .collect(),
        )
    }

    /// Eigenvalue condition numbers `‖v_n‖² / |v_nᵀ v_n|`. For a complex
    /// symmetric matrix the left eigenvectors are the transposed right ones,
    /// so these are the usual Wilkinson condition numbers.
    pub fn mode_condition_numbers(&self) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        Some(
            (0..self.order())
                .map(|n| {
                    let col = v.col(n);
                    let mut norm2 = 0.0;
                    let mut bilinear = C64::new(0.0, 0.0);
                    for j in 0..self.order() {
                        norm2 += col[j].norm_sqr();
                        bilinear += col[j] * col[j];
                    }
                    norm2 / bilinear.norm()
                })
                .collect(),
        )
    }
}

fn dump_matrix(g: &ExchangeMatrix) -> Option<std::path::PathBuf> {
    let path = std::env::temp_dir().join(format!(
        "exchange_matrix_n{}_{}.bin",
        g.order(),
        std::process::id()
    ));
    let mut f = std::fs::File::create(&path).ok()?;
    let n = g.order();
    f.write_all(&(n as u64).to_le_bytes()).ok()?;
    for k in 0..n {
        for j in 0..n {
            let z = g.get(j, k);
            f.write_all(&z.re.to_le_bytes()).ok()?;
            f.write_all(&z.im.to_le_bytes()).ok()?;
        }
    }
    Some(path)
}

/// Full eigen-decomposition (values and right eigenvectors).
///
/// On solver failure the matrix is written to the temp directory as
/// little-endian `u64 n` followed by column-major `(re, im)` f64 pairs.
pub fn diagonalize(g: &ExchangeMatrix, constants: &PhysicalConstants) -> Result<ModeSpectrum> {
    let evd = g.matrix().eigen().map_err(|_| Error::Eigensolver {
        order: g.order(),
        dump: dump_matrix(g),
    })?;
    let n = g.order();
    let values: Vec<C64> = (0..n).map(|i| evd.S()[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].re.total_cmp(&values[a].re));
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |j, m| u[(j, order[m])]);
    let spectrum = ModeSpectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: Some(vectors),
        natural_rate: constants.natural_rate(),
    };
    spectrum.check_invariants()?;
    Ok(spectrum)
}

/// Eigenvalues only; roughly half the cost of [`diagonalize`].
pub fn eigenvalues_only(g: &ExchangeMatrix, constants: &PhysicalConstants) -> Result<ModeSpectrum> {
    let values = g.matrix().eigenvalues().map_err(|_| Error::Eigensolver {
        order: g.order(),
        dump: dump_matrix(g),
    })?;
    let spectrum = ModeSpectrum::from_eigenvalues(values, constants);
    spectrum.check_invariants()?;
    Ok(spectrum)
}

/// Width of the pooled `Re λ` distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumWidth {
    /// Half the distance between the 2.5% and 97.5% quantiles.
    pub width: f64,
    /// Bootstrap standard deviation over resampled realizations.
    pub uncertainty: f64,
    pub realizations: usize,
    pub modes: usize,
}

pub const MIN_WIDTH_REALIZATIONS: usize = 5;
const BOOTSTRAP_ROUNDS: usize = 200;

fn quantile_width(values: &mut [f64]) -> f64 {
    sort_floats(values);
    0.5 * (quantile_sorted(values, 0.975) - quantile_sorted(values, 0.025))
}

/// Quantile width of `Re λ` pooled over realizations, with a bootstrap over
/// realizations for the uncertainty.
pub fn spectrum_width(spectra: &[ModeSpectrum], seed: u64) -> Result<SpectrumWidth> {
    if spectra.len() < MIN_WIDTH_REALIZATIONS {
        return invalid(format!(
            "spectrum width needs at least {MIN_WIDTH_REALIZATIONS} realizations, got {}",
            spectra.len()
        ));
    }
    let parts: Vec<Vec<f64>> = spectra.iter().map(|s| s.real_parts()).collect();
    let mut pooled: Vec<f64> = parts.iter().flatten().copied().collect();
    let modes = pooled.len();
    let width = quantile_width(&mut pooled);

    let mut rng = rng_from_seed(seed);
    let widths: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|_| {
            let mut sample = Vec::with_capacity(modes);
            for _ in 0..parts.len() {
                sample.extend_from_slice(&parts[rng.gen_range(0..parts.len())]);
            }
            quantile_width(&mut sample)
        })
        .collect();
    Ok(SpectrumWidth {
        width,
        uncertainty: std_dev(&widths),
        realizations: spectra.len(),
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupled_dipole::matrix::{build_exchange_matrix, kernel};
    use crate::ensemble::{sample_cloud, AtomSet, CloudGeometry};

    #[test]
    fn single_atom_spectrum() {
        let c = PhysicalConstants::default();
        let g = build_exchange_matrix(&AtomSet::at_rest(vec![[0.0; 3]]), &c).unwrap();
        let s = diagonalize(&g, &c).unwrap();
        assert_eq!(s.order(), 1);
        assert!((s.eigenvalues()[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((s.decay_rates()[0] - c.natural_rate()).abs() < 1e-6);
    }

    #[test]
    fn two_atoms_match_closed_form() {
        let c = PhysicalConstants::default();
        let r = 0.3 * c.wavelength;
        let g =
            build_exchange_matrix(&AtomSet::at_rest(vec![[0.0; 3], [r, 0.0, 0.0]]), &c).unwrap();
        let s = diagonalize(&g, &c).unwrap();
        let off = kernel(c.wavenumber() * r);
        let mut expect = [C64::new(1.0, 0.0) + off, C64::new(1.0, 0.0) - off];
        expect.sort_by(|a, b| b.re.total_cmp(&a.re));
        for (got, want) in s.eigenvalues().iter().zip(expect) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn sorted_and_consistent() {
        let c = PhysicalConstants::default();
        let geo = CloudGeometry::new([1.5e-6, 1.5e-6, 4e-6], 120, 0.0).unwrap();
        let atoms = sample_cloud(&geo, &c, 11).unwrap();
        let g = build_exchange_matrix(&atoms, &c).unwrap();
        let s = diagonalize(&g, &c).unwrap();
        assert!(s.eigenvalues().windows(2).all(|w| w[0].re >= w[1].re));
        let bound = 1e-8 * g.norm();
        assert!(s.residuals(&g).unwrap().iter().all(|&r| r <= bound));
        let vals = eigenvalues_only(&g, &c).unwrap();
        for (a, b) in vals.eigenvalues().iter().zip(s.eigenvalues()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(s
            .mode_condition_numbers()
            .unwrap()
            .iter()
            .all(|&k| k >= 1.0 - 1e-9));
    }

    #[test]
    fn width_needs_five_realizations() {
        let c = PhysicalConstants::default();
        let s = ModeSpectrum::from_eigenvalues(vec![C64::new(1.0, 0.0)], &c);
        assert!(spectrum_width(&vec![s.clone(); 4], 0).is_err());
        let w = spectrum_width(&vec![s; 5], 0).unwrap();
        assert_eq!(w.width, 0.0);
        assert_eq!(w.uncertainty, 0.0);
    }

    #[test]
    fn two_point_width_is_sinc() {
        let c = PhysicalConstants::default();
        let r = 0.37 * c.wavelength;
        let g =
            build_exchange_matrix(&AtomSet::at_rest(vec![[0.0; 3], [0.0, r, 0.0]]), &c).unwrap();
        let s = diagonalize(&g, &c).unwrap();
        let w = spectrum_width(&vec![s; 5], 1).unwrap();
        let kr = c.wavenumber() * r;
        assert!((w.width - (kr.sin() / kr).abs()).abs() < 1e-14);
    }
}
