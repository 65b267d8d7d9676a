use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats::{quantile_sorted, sort_floats};

/// Steady-state excited fraction `½ s/(1+s)` for saturation parameter `s`.
pub fn excited_fraction(s: f64) -> f64 {
    0.5 * s / (1.0 + s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaturationFit {
    /// Saturation power, same units as the input powers.
    pub p0: f64,
    pub p0_err: f64,
    /// Asymptotic fluorescence `A`.
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// Covariance of `(A, P₀)`.
    pub covariance: [[f64; 2]; 2],
    /// `ρ_e` at each input power.
    pub excited_fraction: Vec<f64>,
    pub iterations: usize,
    pub residual_rms: f64,
}

const MAX_ITERATIONS: usize = 500;

fn residuals(p: &[f64], f: &[f64], a: f64, p0: f64) -> (Vec<f64>, f64) {
    let r: Vec<f64> = p
        .iter()
        .zip(f)
        .map(|(&p, &f)| f - a * p / (p + p0))
        .collect();
    let ss = r.iter().map(|v| v * v).sum();
    (r, ss)
}

fn best_amplitude(p: &[f64], f: &[f64], p0: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&p, &f) in p.iter().zip(f) {
        let g = p / (p + p0);
        num += f * g;
        den += g * g;
    }
    num / den
}

/// Least-squares fit of `F(P) = A·(P/P₀)/(1 + P/P₀)` by Levenberg–Marquardt in
/// `(A, ln P₀)`, started from `P₀ = median(P)`.
pub fn fit_saturation(powers: &[f64], fluorescence: &[f64]) -> Result<SaturationFit> {
    let n = powers.len();
    if fluorescence.len() != n {
        return invalid("saturation: powers and fluorescence differ in length");
    }
    if powers.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return invalid("saturation: powers must be positive");
    }
    if fluorescence.iter().any(|f| !f.is_finite()) {
        return invalid("saturation: fluorescence must be finite");
    }
    let mut sorted = powers.to_vec();
    sort_floats(&mut sorted);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return invalid(format!(
            "saturation needs at least 4 distinct powers, got {}",
            distinct.len()
        ));
    }
    let p_init = quantile_sorted(&sorted, 0.5);
    let mut u = p_init.ln();
    let mut a = best_amplitude(powers, fluorescence, p_init);
    let (_, mut ss) = residuals(powers, fluorescence, a, u.exp());
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let p0 = u.exp();
        let (r, _) = residuals(powers, fluorescence, a, p0);
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (&p, &ri) in powers.iter().zip(&r) {
            let ja = p / (p + p0);
            let ju = -a * p * p0 / ((p + p0) * (p + p0));
            let j = [ja, ju];
            for x in 0..2 {
                jtr[x] += j[x] * ri;
                for y in 0..2 {
                    jtj[x][y] += j[x] * j[y];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let m = [
                [jtj[0][0] * (1.0 + mu), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + mu)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det == 0.0 || !det.is_finite() {
                mu *= 10.0;
                continue;
            }
            let da = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
            let du = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
            let (_, trial) = residuals(powers, fluorescence, a + da, (u + du).exp());
            if trial <= ss {
                let small = da.abs() <= 1e-13 * a.abs().max(1e-300) && du.abs() <= 1e-13;
                a += da;
                u += du;
                converged = small || (ss - trial) <= 1e-30 * ss.max(1e-300) || trial == 0.0;
                ss = trial;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged || !(a.is_finite() && u.is_finite()) {
        return Err(Error::Fit(format!(
            "saturation fit did not converge after {iterations} iterations \
             (initial P0 = {p_init}, A = {})",
            best_amplitude(powers, fluorescence, p_init)
        )));
    }

    let p0 = u.exp();
    let mut jtj = [[0.0; 2]; 2];
    for &p in powers {
        let j = [p / (p + p0), -a * p / ((p + p0) * (p + p0))];
        for x in 0..2 {
            for y in 0..2 {
                jtj[x][y] += j[x] * j[y];
            }
        }
    }
    let s2 = if n > 2 { ss / (n - 2) as f64 } else { 0.0 };
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let covariance = [
        [s2 * jtj[1][1] / det, -s2 * jtj[0][1] / det],
        [-s2 * jtj[1][0] / det, s2 * jtj[0][0] / det],
    ];
    Ok(SaturationFit {
        p0,
        p0_err: covariance[1][1].max(0.0).sqrt(),
        amplitude: a,
        amplitude_err: covariance[0][0].max(0.0).sqrt(),
        covariance,
        excited_fraction: powers.iter().map(|p| excited_fraction(p / p0)).collect(),
        iterations,
        residual_rms: (ss / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_limits() {
        assert_eq!(excited_fraction(0.0), 0.0);
        assert!((excited_fraction(2.0) - 1.0 / 3.0).abs() < 1e-16);
        assert!((excited_fraction(100.0) - 0.495_049_504_950_495).abs() < 1e-15);
    }

    #[test]
    fn recovers_exact_model() {
        let p = [0.1, 0.3, 0.7, 1.0, 2.0, 4.0, 9.0];
        let f: Vec<f64> = p.iter().map(|p| 5.0 * p / (p + 1.3)).collect();
        let fit = fit_saturation(&p, &f).unwrap();
        assert!((fit.p0 - 1.3).abs() < 1e-9);
        assert!((fit.amplitude - 5.0).abs() < 1e-9);
    }

    #[test]
    fn needs_four_distinct_powers() {
        assert!(fit_saturation(&[1.0, 1.0, 2.0, 3.0], &[1.0, 1.0, 2.0, 2.5]).is_err());
        assert!(fit_saturation(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 2.5]).is_err());
    }
}
