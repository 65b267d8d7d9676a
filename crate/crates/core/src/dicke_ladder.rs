//! Stochastic excitation-ladder cascade.
//!
//! Each shot starts with `m₀ ~ Binomial(N, ρ_e)` excitations and emits one
//! photon per rung, waiting an exponential time with the rung's collective
//! rate.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled_dipole::{FluorescenceTrace, ModeSpectrum};
use crate::error::{invalid, Error, Result};
use crate::rng::{rng_from_seed, stream_seed, SimRng};
use crate::stats::{fit_line, std_dev};

/// Per-rung rate law, in units of Γ_a.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSource {
    /// `rate(m) = m`.
    Independent,
    /// `rate(m) = m(N − m + 1)/N^γ`; `γ = 1` makes the last photon decay at Γ_a.
    DickeSymmetric { exponent: f64 },
    /// `rate(m) = m·X`, with `X` drawn per rung from these positive values.
    Empirical { rates: Vec<f64> },
}

impl RateSource {
    pub fn dicke_symmetric() -> Self {
        RateSource::DickeSymmetric { exponent: 1.0 }
    }

    /// Positive `Re λ` of a spectrum.
    pub fn empirical(spectrum: &ModeSpectrum) -> Result<Self> {
        Self::from_rates(spectrum.real_parts())
    }

    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        let rates: Vec<f64> = rates
            .into_iter()
            .filter(|r| *r > 0.0 && r.is_finite())
            .collect();
        if rates.is_empty() {
            return Err(Error::NoPositiveRates);
        }
        Ok(RateSource::Empirical { rates })
    }

    fn rate(&self, m: u64, n: u64, rng: &mut SimRng) -> f64 {
        let mf = m as f64;
        match self {
            RateSource::Independent => mf,
            RateSource::DickeSymmetric { exponent } => {
                mf * (n - m + 1) as f64 / (n as f64).powf(*exponent)
            }
            RateSource::Empirical { rates } => mf * rates[rng.gen_range(0..rates.len())],
        }
    }
}

/// Histogram bin edges in units of τ_a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeGrid {
    Linear { t_max: f64, bins: usize },
    Logarithmic { t_min: f64, t_max: f64, bins: usize },
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeGrid::Linear { t_max, bins } if t_max > 0.0 && bins > 0 => Ok(()),
            TimeGrid::Logarithmic { t_min, t_max, bins }
                if t_min > 0.0 && t_max > t_min && bins > 0 =>
            {
                Ok(())
            }
            _ => invalid(format!("invalid time grid {self:?}")),
        }
    }

    /// `bins + 1` edges. Logarithmic grids start with a `[0, t_min)` bin.
    pub fn edges(&self) -> Vec<f64> {
        match *self {
            TimeGrid::Linear { t_max, bins } => {
                (0..=bins).map(|i| t_max * i as f64 / bins as f64).collect()
            }
            TimeGrid::Logarithmic { t_min, t_max, bins } => {
                let r = (t_max / t_min).ln();
                let mut e: Vec<f64> = std::iter::once(0.0)
                    .chain(
                        (0..bins).map(|i| t_min * (r * i as f64 / (bins - 1).max(1) as f64).exp()),
                    )
                    .collect();
                e[bins] = t_max;
                e
            }
        }
    }

    fn centers(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| match self {
                TimeGrid::Logarithmic { .. } if w[0] > 0.0 => (w[0] * w[1]).sqrt(),
                _ => 0.5 * (w[0] + w[1]),
            })
            .collect()
    }
}

fn bin_index(edges: &[f64], t: f64) -> Option<usize> {
    if t < edges[0] || t >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= t) - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub atom_count: usize,
    pub excited_fraction: f64,
    pub source: RateSource,
    pub shots: usize,
    pub grid: TimeGrid,
    /// Keep every emission time of every shot.
    pub record_times: bool,
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.atom_count == 0 {
            return invalid("ladder needs at least one atom");
        }
        if !(0.0..=1.0).contains(&self.excited_fraction) {
            return invalid(format!(
                "excited fraction {} outside [0, 1]",
                self.excited_fraction
            ));
        }
        if self.shots == 0 {
            return invalid("ladder needs at least one shot");
        }
        if let RateSource::DickeSymmetric { exponent } = self.source {
            if !exponent.is_finite() {
                return invalid("Dicke normalization exponent must be finite");
            }
        }
        if let RateSource::Empirical { rates } = &self.source {
            if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(Error::NoPositiveRates);
            }
        }
        self.grid.validate()
    }
}

/// Number of shot batches kept separately for the bootstrap.
pub const RATE_BATCHES: usize = 64;

/// Grid used for effective-rate estimation.
pub const RATE_GRID: TimeGrid = TimeGrid::Logarithmic {
    t_min: 1e-4,
    t_max: 5.0,
    bins: 48,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeResult {
    pub seed: u64,
    pub shots: usize,
    pub initial_excitations: Vec<u64>,
    /// Photons emitted per shot (equal to `initial_excitations` by construction).
    pub emitted: Vec<u64>,
    /// Per-shot sorted emission times, if requested.
    pub emission_times: Option<Vec<Vec<f64>>>,
    pub edges: Vec<f64>,
    /// Photons per τ_a per shot, with counting errors.
    pub trace: FluorescenceTrace,
    rate_edges: Vec<f64>,
    /// `rate_counts[b][i]` counts photons of batch `b` in rate-grid bin `i`.
    rate_counts: Vec<Vec<u64>>,
}

struct Tally {
    m0: Vec<u64>,
    emitted: Vec<u64>,
    counts: Vec<u64>,
    rate_counts: Vec<Vec<u64>>,
    times: Vec<Vec<f64>>,
}

impl Tally {
    fn new(nb: usize, nr: usize) -> Self {
        Self {
            m0: Vec::new(),
            emitted: Vec::new(),
            counts: vec![0; nb],
            rate_counts: vec![vec![0; nr]; RATE_BATCHES],
            times: Vec::new(),
        }
    }

    fn shot(
        &mut self,
        config: &LadderConfig,
        edges: &[f64],
        rate_edges: &[f64],
        index: u64,
        seed: u64,
    ) -> Result<()> {
        let n = config.atom_count as u64;
        let mut rng = rng_from_seed(seed);
        let m0 = Binomial::new(n, config.excited_fraction)
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .sample(&mut rng);
        let batch = (index % RATE_BATCHES as u64) as usize;
        let mut t = 0.0;
        let mut m = m0;
        let mut emitted = 0;
        let mut times = Vec::new();
        while m > 0 {
            let rate = config.source.rate(m, n, &mut rng);
            let wait: f64 = Exp1.sample(&mut rng);
            t += wait / rate;
            if let Some(i) = bin_index(edges, t) {
                self.counts[i] += 1;
            }
            if let Some(r) = bin_index(rate_edges, t) {
                self.rate_counts[batch][r] += 1;
            }
            if config.record_times {
                times.push(t);
            }
            emitted += 1;
            m -= 1;
        }
        self.m0.push(m0);
        self.emitted.push(emitted);
        if config.record_times {
            self.times.push(times);
        }
        Ok(())
    }

    fn merge(mut self, other: Tally) -> Self {
        self.m0.extend(other.m0);
        self.emitted.extend(other.emitted);
        self.times.extend(other.times);
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (ra, rb) in self.rate_counts.iter_mut().zip(other.rate_counts) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self
    }
}

const SHOT_CHUNK: u64 = 1024;

/// Runs every shot. Shot `s` draws from `stream_seed(seed, s)`, and all
/// accumulation is integer or in shot order, so the result does not depend
/// on how shots are scheduled.
pub fn run_cascade(config: &LadderConfig, seed: u64) -> Result<CascadeResult> {
    config.validate()?;
    let edges = config.grid.edges();
    let rate_edges = RATE_GRID.edges();
    let nb = edges.len() - 1;
    let nr = rate_edges.len() - 1;
    let total = config.shots as u64;
    let chunks = total.div_ceil(SHOT_CHUNK);

    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::new(nb, nr);
            for s in c * SHOT_CHUNK..((c + 1) * SHOT_CHUNK).min(total) {
                tally.shot(config, &edges, &rate_edges, s, stream_seed(seed, s))?;
            }
            Ok(tally)
        })
        .collect::<Result<_>>()?;
    let tally = tallies.into_iter().fold(Tally::new(nb, nr), Tally::merge);

    let shots = config.shots as f64;
    let times = config.grid.centers(&edges);
    let width: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let intensity = tally
        .counts
        .iter()
        .zip(&width)
        .map(|(&c, w)| c as f64 / (shots * w))
        .collect();
    let intensity_err = tally
        .counts
        .iter()
        .zip(&width)
        .map(|(&c, w)| (c as f64).sqrt() / (shots * w))
        .collect();
    let trace = FluorescenceTrace {
        times,
        intensity,
        intensity_err,
        normalized: false,
        shots: config.shots,
        counts: Some(tally.counts),
    };
    Ok(CascadeResult {
        seed,
        shots: config.shots,
        initial_excitations: tally.m0,
        emitted: tally.emitted,
        emission_times: config.record_times.then_some(tally.times),
        edges,
        trace,
        rate_edges,
        rate_counts: tally.rate_counts,
    })
}

impl CascadeResult {
    pub fn mean_initial_excitation(&self) -> f64 {
        self.initial_excitations.iter().sum::<u64>() as f64 / self.shots as f64
    }

    /// Bin-averaged independent-decay trace with the same initial excitations,
    /// `m̄₀ e^{−t}`.
    pub fn independent_reference(&self) -> Vec<f64> {
        let m0 = self.mean_initial_excitation();
        self.edges
            .windows(2)
            .map(|w| m0 * ((-w[0]).exp() - (-w[1]).exp()) / (w[1] - w[0]))
            .collect()
    }

    /// Signs of `I − I_ref` over bins whose end lies at or before `t_max`,
    /// keeping only bins where the difference exceeds `sigmas` counting errors.
    pub fn reference_signs(&self, t_max: f64, sigmas: f64) -> Vec<(f64, i8)> {
        let reference = self.independent_reference();
        (0..self.trace.len())
            .filter(|&i| self.edges[i + 1] <= t_max + 1e-12)
            .filter_map(|i| {
                let d = self.trace.intensity[i] - reference[i];
                let err = self.trace.intensity_err[i];
                (err > 0.0 && d.abs() > sigmas * err)
                    .then(|| (self.trace.times[i], d.signum() as i8))
            })
            .collect()
    }
}

/// Sign changes in a sequence of significant signs.
pub fn count_crossings(signs: &[(f64, i8)]) -> usize {
    signs.windows(2).filter(|w| w[0].1 != w[1].1).count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateCurve {
    /// Window centres, τ_a units.
    pub times: Vec<f64>,
    /// `Γ_eff/Γ_a`.
    pub rate: Vec<f64>,
    /// Bootstrap standard deviation over shot batches.
    pub rate_err: Vec<f64>,
}

impl RateCurve {
    /// Mean rate and its error over points with `t0 ≤ t ≤ t1`.
    pub fn window_mean(&self, t0: f64, t1: f64) -> Option<(f64, f64)> {
        let idx: Vec<usize> = (0..self.times.len())
            .filter(|&i| self.times[i] >= t0 && self.times[i] <= t1)
            .collect();
        if idx.is_empty() {
            return None;
        }
        let n = idx.len() as f64;
        let m = idx.iter().map(|&i| self.rate[i]).sum::<f64>() / n;
        let e = idx
            .iter()
            .map(|&i| self.rate_err[i].powi(2))
            .sum::<f64>()
            .sqrt()
            / n;
        Some((m, e))
    }
}

pub const MIN_RATE_SHOTS: usize = 1000;
const RATE_WINDOW: usize = 5;
const RATE_BOOTSTRAP: usize = 200;

/// Merges empty bins into their right neighbour (a trailing empty run is
/// merged leftwards) and returns `(edges, counts)`.
fn merge_empty(edges: &[f64], counts: &[u64]) -> (Vec<f64>, Vec<u64>) {
    let mut e = vec![edges[0]];
    let mut c = Vec::new();
    let mut acc = 0;
    for i in 0..counts.len() {
        acc += counts[i];
        if acc > 0 {
            e.push(edges[i + 1]);
            c.push(acc);
            acc = 0;
        }
    }
    if acc == 0 && !c.is_empty() {
        *e.last_mut().unwrap() = edges[counts.len()];
    }
    (e, c)
}

fn rate_curve(edges: &[f64], counts: &[u64], shots: f64) -> (Vec<f64>, Vec<f64>) {
    let (e, c) = merge_empty(edges, counts);
    let t: Vec<f64> = e
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                (w[0] * w[1]).sqrt()
            } else {
                0.5 * w[1]
            }
        })
        .collect();
    let ln_i: Vec<f64> = c
        .iter()
        .zip(e.windows(2))
        .map(|(&n, w)| (n as f64 / (shots * (w[1] - w[0]))).ln())
        .collect();
    let half = RATE_WINDOW / 2;
    let mut times = Vec::new();
    let mut rates = Vec::new();
    for i in half..c.len().saturating_sub(half) {
        let r = i - half..=i + half;
        let w: Vec<f64> = c[r.clone()].iter().map(|&n| n as f64).collect();
        if let Ok(f) = fit_line(&t[r.clone()], &ln_i[r], Some(&w)) {
            times.push(t[i]);
            rates.push(-f.slope);
        }
    }
    (times, rates)
}

/// `Γ_eff(t) = −d ln I/dt` from sliding five-bin weighted regressions on the
/// log-binned counts, with a bootstrap over shot batches.
pub fn effective_rate(result: &CascadeResult, seed: u64) -> Result<RateCurve> {
    if result.shots < MIN_RATE_SHOTS {
        return invalid(format!(
            "effective rate needs at least {MIN_RATE_SHOTS} shots, got {}",
            result.shots
        ));
    }
    let nr = result.rate_edges.len() - 1;
    let total: Vec<u64> = (0..nr)
        .map(|i| result.rate_counts.iter().map(|b| b[i]).sum())
        .collect();
    let (times, rate) = rate_curve(&result.rate_edges, &total, result.shots as f64);

    let mut rng = rng_from_seed(seed);
    let batches = result.rate_counts.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); times.len()];
    for _ in 0..RATE_BOOTSTRAP {
        let mut resampled = vec![0u64; nr];
        for _ in 0..batches {
            let b = &result.rate_counts[rng.gen_range(0..batches)];
            for (r, v) in resampled.iter_mut().zip(b) {
                *r += v;
            }
        }
        let (bt, br) = rate_curve(&result.rate_edges, &resampled, result.shots as f64);
        for (j, t) in times.iter().enumerate() {
            if let Some(k) = bt.iter().position(|x| x == t) {
                samples[j].push(br[k]);
            }
        }
    }
    let rate_err = samples.iter().map(|s| std_dev(s)).collect();
    Ok(RateCurve {
        times,
        rate,
        rate_err,
    })
}
