use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::fit_line;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_err: f64,
    pub prefactor: f64,
    pub n_points: usize,
}

/// `y = A·x^p` by least squares on `(ln x, ln y)`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return invalid("power law: x and y differ in length");
    }
    if x.len() < 4 {
        return invalid(format!(
            "power law needs at least 4 points, got {}",
            x.len()
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("power law needs strictly positive finite data");
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if hi / lo < 2.0 {
        return invalid(format!(
            "power law: x range {lo}..{hi} spans less than a factor 2"
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = fit_line(&lx, &ly, None)?;
    Ok(PowerLawFit {
        exponent: f.slope,
        exponent_err: f.slope_err,
        prefactor: f.intercept.exp(),
        n_points: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_law() {
        let x = [1.0, 2.0, 3.0, 5.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.exponent_err < 1e-10);
        assert!((f.prefactor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_exponent() {
        let f = fit_power_law(&[1.0, 2.0, 4.0, 8.0], &[3.0; 4]).unwrap();
        assert!(f.exponent.abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[1.0, 1.5, 1.2, 1.9], &[1.0; 4]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 4.0], &[1.0; 3]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 4.0, 8.0], &[1.0, 0.0, 1.0, 1.0]).is_err());
    }
}
