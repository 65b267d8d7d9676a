use faer::Mat;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::ensemble::{distance, AtomSet, MIN_SEPARATION_WAVELENGTHS};
use crate::error::{Error, Result};
use crate::{Vec3, C64};

/// Default cap on the matrix order (a 12,000² complex matrix is ≈ 2.3 GB).
pub const DEFAULT_MAX_ORDER: usize = 12_000;

/// Scalar photon-exchange kernel `e^{ikr}/(ikr)` as a function of `kr`.
///
/// Written as `sin(kr)/(kr) − i·cos(kr)/(kr)`, i.e. the real part is the
/// decay (sinc) kernel and minus the imaginary part the shift kernel.
pub fn kernel(kr: f64) -> C64 {
    let (s, c) = kr.sin_cos();
    C64::new(s / kr, -c / kr)
}

/// Complex-symmetric exchange matrix `G` with unit diagonal.
#[derive(Clone, Debug)]
pub struct ExchangeMatrix {
    matrix: Mat<C64>,
    positions: Vec<Vec3>,
}

impl ExchangeMatrix {
    pub fn order(&self) -> usize {
        self.positions.len()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.matrix[(j, k)]
    }

    /// Real symmetric decay part `S = Re G`.
    pub fn decay_part(&self) -> Mat<f64> {
        let n = self.order();
        Mat::from_fn(n, n, |j, k| self.matrix[(j, k)].re)
    }

    /// Real symmetric shift part `C` with `G = S − iC`.
    pub fn shift_part(&self) -> Mat<f64> {
        let n = self.order();
        Mat::from_fn(n, n, |j, k| -self.matrix[(j, k)].im)
    }

    /// `G·x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.order();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let col = self.matrix.col(k);
            let xk = x[k];
            for (j, o) in out.iter_mut().enumerate() {
                *o += col[j] * xk;
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm_l2()
    }
}

/// Builds `G` for a realization. Each pair is evaluated once (upper triangle,
/// columns in parallel) and mirrored, so `G = Gᵀ` holds bit for bit.
pub fn build_exchange_matrix(
    atoms: &AtomSet,
    constants: &PhysicalConstants,
) -> Result<ExchangeMatrix> {
    build_exchange_matrix_capped(atoms, constants, DEFAULT_MAX_ORDER)
}

pub fn build_exchange_matrix_capped(
    atoms: &AtomSet,
    constants: &PhysicalConstants,
    max_order: usize,
) -> Result<ExchangeMatrix> {
    let n = atoms.len();
    if n > max_order {
        return Err(Error::TooManyAtoms {
            requested: n,
            cap: max_order,
        });
    }
    let k = constants.wavenumber();
    let min_sep = MIN_SEPARATION_WAVELENGTHS * constants.wavelength;
    let pos = &atoms.positions;

    let columns: Vec<(Vec<C64>, Vec<(usize, usize, f64)>)> = (0..n)
        .into_par_iter()
        .map(|col| {
            let mut entries = Vec::with_capacity(col);
            let mut bad = Vec::new();
            for row in 0..col {
                let r = distance(pos[row], pos[col]);
                if r <= min_sep {
                    bad.push((row, col, r));
                }
                entries.push(kernel(k * r));
            }
            (entries, bad)
        })
        .collect();

    let offending: Vec<_> = columns
        .iter()
        .flat_map(|(_, b)| b.iter().copied())
        .collect();
    if !offending.is_empty() {
        return Err(Error::SeparationViolation {
            min_separation: min_sep,
            pairs: offending,
        });
    }

    let mut matrix = Mat::<C64>::zeros(n, n);
    for (col, (entries, _)) in columns.iter().enumerate() {
        matrix[(col, col)] = C64::new(1.0, 0.0);
        for (row, &v) in entries.iter().enumerate() {
            matrix[(row, col)] = v;
            matrix[(col, row)] = v;
        }
    }
    Ok(ExchangeMatrix {
        matrix,
        positions: pos.clone(),
    })
}
