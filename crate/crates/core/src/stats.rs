//! Small statistics helpers shared by the fitting code.

use crate::error::{invalid, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile of already sorted data (the usual "type 7").
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.total_cmp(b));
}

/// Result of a straight-line least-squares fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// Unweighted RMS of the residuals.
    pub residual_rms: f64,
    pub n: usize,
}

/// Weighted linear least squares. With `weights = None` every point has unit
/// weight and the parameter errors are scaled by the residual variance;
/// with explicit inverse-variance weights they come straight from the
/// normal-equation covariance.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return invalid("fit_line: mismatched lengths");
    }
    if n < 2 {
        return invalid("fit_line: need at least two points");
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sw += w(i);
        sx += w(i) * x[i];
        sy += w(i) * y[i];
    }
    let (xm, ym) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - xm;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (y[i] - ym);
    }
    if sxx <= 0.0 {
        return invalid("fit_line: degenerate abscissa");
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut ss = 0.0;
    let mut wss = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        ss += r * r;
        wss += w(i) * r * r;
    }
    let residual_rms = (ss / n as f64).sqrt();
    let scale = if weights.is_some() {
        1.0
    } else if n > 2 {
        wss / (n - 2) as f64
    } else {
        0.0
    };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xm * xm / sxx);
    Ok(LineFit {
        slope,
        intercept,
        slope_err: slope_var.sqrt(),
        intercept_err: intercept_var.sqrt(),
        residual_rms,
        n,
    })
}

/// Two-sided Student-t critical value at 95% confidence.
pub fn t_critical_95(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        d if d <= 30 => TABLE[d - 1],
        _ => 1.96,
    }
}
