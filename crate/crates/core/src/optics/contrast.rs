use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const MIN_FRINGE_PHASES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FringeContrast {
    /// `|b|/a` from the sinusoid fit, clipped to [0, 1].
    pub contrast: f64,
    pub uncertainty: f64,
    /// `(n_max − n_min)/(n_max + n_min)` over the sampled points.
    pub raw: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase_offset: f64,
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (a0, a1) = ((j + 1) % 3, (j + 2) % 3);
            let (b0, b1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[a0][b0] * m[a1][b1] - m[a0][b1] * m[a1][b0]) / det;
        }
    }
    Some(inv)
}

/// Fits `a + b·cos(φ + φ₀)` by linear least squares in `(1, cos φ, sin φ)`.
///
/// With `signal_err` the points are inverse-variance weighted and the
/// covariance is absolute; otherwise it is scaled by the residual variance.
pub fn fringe_contrast(
    phases: &[f64],
    signal: &[f64],
    signal_err: Option<&[f64]>,
) -> Result<FringeContrast> {
    let n = phases.len();
    if signal.len() != n || signal_err.is_some_and(|e| e.len() != n) {
        return invalid("interferogram columns differ in length");
    }
    if n < MIN_FRINGE_PHASES {
        return invalid(format!(
            "fringe fit needs at least {MIN_FRINGE_PHASES} phases, got {n}"
        ));
    }
    let (lo, hi) = phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| {
            (l.min(p), h.max(p))
        });
    if hi - lo < TAU * (1.0 - 1e-9) {
        return invalid(format!("phases span {} rad, less than 2π", hi - lo));
    }
    if signal.iter().any(|s| !(*s >= 0.0)) {
        return invalid("interferogram signal must be non-negative");
    }
    let weights: Option<Vec<f64>> = signal_err
        .filter(|e| e.iter().all(|v| *v > 0.0))
        .map(|e| e.iter().map(|v| 1.0 / (v * v)).collect());
    let w = |i: usize| weights.as_ref().map_or(1.0, |w| w[i]);

    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for i in 0..n {
        let row = [1.0, phases[i].cos(), phases[i].sin()];
        for a in 0..3 {
            aty[a] += w(i) * row[a] * signal[i];
            for b in 0..3 {
                ata[a][b] += w(i) * row[a] * row[b];
            }
        }
    }
    let inv = invert3(ata).ok_or_else(|| Error::Fit("singular fringe design matrix".into()))?;
    let coef: Vec<f64> = (0..3)
        .map(|a| (0..3).map(|b| inv[a][b] * aty[b]).sum())
        .collect();
    let (a, p, q) = (coef[0], coef[1], coef[2]);
    if !(a > 0.0) {
        return Err(Error::Fit(format!("fringe offset {a} is not positive")));
    }
    let ssr: f64 = (0..n)
        .map(|i| {
            let r = signal[i] - a - p * phases[i].cos() - q * phases[i].sin();
            w(i) * r * r
        })
        .sum();
    let scale = if weights.is_some() {
        1.0
    } else {
        ssr / (n - 3) as f64
    };
    let cov = |x: usize, y: usize| scale * inv[x][y];

    let b = p.hypot(q);
    let contrast = b / a;
    let var = if b > 0.0 {
        let g = [-b / (a * a), p / (a * b), q / (a * b)];
        (0..3)
            .map(|x| (0..3).map(|y| g[x] * g[y] * cov(x, y)).sum::<f64>())
            .sum::<f64>()
    } else {
        (cov(1, 1) + cov(2, 2)) / (a * a)
    };
    let max = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = signal.iter().copied().fold(f64::INFINITY, f64::min);
    let raw = if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    };
    Ok(FringeContrast {
        contrast: contrast.clamp(0.0, 1.0),
        uncertainty: var.max(0.0).sqrt(),
        raw: raw.clamp(0.0, 1.0),
        offset: a,
        amplitude: b,
        phase_offset: (-q).atan2(p),
    })
}
