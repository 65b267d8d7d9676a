use serde::{Deserialize, Serialize};

use crate::coupled_dipole::FluorescenceTrace;
use crate::error::{invalid, Error, Result};
use crate::stats::fit_line;

pub const MIN_FIT_BINS: usize = 10;
/// A fit fails if more than this fraction of in-window bins is non-positive.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.3;

/// Fit window in units of τ_a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayWindow {
    pub start: f64,
    pub duration: f64,
}

impl Default for DecayWindow {
    fn default() -> Self {
        Self {
            start: 0.2,
            duration: 3.5,
        }
    }
}

impl DecayWindow {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted 1/e time in units of τ_a.
    pub tau_over_tau_a: f64,
    pub tau_err: f64,
    pub window: DecayWindow,
    pub n_points: usize,
    pub excluded: usize,
    /// RMS residual of ln(intensity).
    pub residual_rms: f64,
    pub weighted: bool,
}

const WINDOW_SLACK: f64 = 1e-9;

/// Log-linear 1/e fit over the window.
///
/// Bins with photon counts are weighted by those counts (the variance of
/// `ln n` is `1/n`); otherwise every bin has unit weight.
pub fn fit_decay_time(trace: &FluorescenceTrace, window: DecayWindow) -> Result<DecayFit> {
    trace.validate()?;
    if !(window.start >= 0.0 && window.duration > 0.0) {
        return invalid("decay window needs start ≥ 0 and positive duration");
    }
    let (Some(&first), Some(&last)) = (trace.times.first(), trace.times.last()) else {
        return invalid("empty trace");
    };
    if first > window.start + WINDOW_SLACK || last < window.end() - WINDOW_SLACK {
        return invalid(format!(
            "window [{}, {}] not inside trace support [{first}, {last}]",
            window.start,
            window.end()
        ));
    }
    let inside: Vec<usize> = (0..trace.len())
        .filter(|&i| {
            let t = trace.times[i];
            t >= window.start - WINDOW_SLACK && t <= window.end() + WINDOW_SLACK
        })
        .collect();
    let kept: Vec<usize> = inside
        .iter()
        .copied()
        .filter(|&i| trace.intensity[i] > 0.0)
        .collect();
    let excluded = inside.len() - kept.len();
    if !inside.is_empty() && excluded as f64 > MAX_EXCLUDED_FRACTION * inside.len() as f64 {
        return Err(Error::Fit(format!(
            "{excluded} of {} bins in the window are non-positive",
            inside.len()
        )));
    }
    if kept.len() < MIN_FIT_BINS {
        return Err(Error::Fit(format!(
            "only {} positive bins in the window, need {MIN_FIT_BINS}",
            kept.len()
        )));
    }
    let x: Vec<f64> = kept.iter().map(|&i| trace.times[i]).collect();
    let y: Vec<f64> = kept.iter().map(|&i| trace.intensity[i].ln()).collect();
    let weights: Option<Vec<f64>> = trace
        .counts
        .as_ref()
        .map(|c| kept.iter().map(|&i| c[i] as f64).collect());
    let weights = weights.filter(|w: &Vec<f64>| w.iter().all(|&v| v > 0.0));
    let line = fit_line(&x, &y, weights.as_deref())?;
    if !(line.slope < 0.0) {
        return Err(Error::Fit(format!(
            "log-intensity slope {} is not negative",
            line.slope
        )));
    }
    let tau = -1.0 / line.slope;
    Ok(DecayFit {
        tau_over_tau_a: tau,
        tau_err: tau * tau * line.slope_err,
        window,
        n_points: kept.len(),
        excluded,
        residual_rms: line.residual_rms,
        weighted: weights.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(f: impl Fn(f64) -> f64) -> FluorescenceTrace {
        let t: Vec<f64> = (0..=80).map(|i| i as f64 * 0.05).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        FluorescenceTrace::new(t, y).unwrap()
    }

    #[test]
    fn exact_exponentials() {
        let f = fit_decay_time(&trace(|t| (-t).exp()), DecayWindow::default()).unwrap();
        assert!((f.tau_over_tau_a - 1.0).abs() < 1e-10);
        let f = fit_decay_time(&trace(|t| (-t / 1.2).exp()), DecayWindow::default()).unwrap();
        assert!((f.tau_over_tau_a - 1.2).abs() < 1e-10);
        assert_eq!(f.n_points, 71);
    }

    #[test]
    fn too_many_empty_bins_fails() {
        let tr = trace(|t| {
            if (t * 20.0).round() as i64 % 2 == 0 {
                0.0
            } else {
                (-t).exp()
            }
        });
        assert!(matches!(
            fit_decay_time(&tr, DecayWindow::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn window_must_be_covered() {
        let w = DecayWindow {
            start: 0.2,
            duration: 10.0,
        };
        assert!(fit_decay_time(&trace(|t| (-t).exp()), w).is_err());
    }
}
