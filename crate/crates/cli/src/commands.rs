//! One runner per experiment family.

use rayon::prelude::*;
use serde::Serialize;

use subradiance::analysis::{decay_ensemble, fit_power_law, sweep_subradiance, PowerLawFit};
use subradiance::coupled_dipole::{
    build_exchange_matrix_capped, eigenvalues_only, spectrum_width, ModeSpectrum,
    MIN_WIDTH_REALIZATIONS,
};
use subradiance::dicke_ladder::{
    count_crossings, effective_rate, run_cascade, LadderConfig, RateSource, MIN_RATE_SHOTS,
};
use subradiance::ensemble::sample_cloud;
use subradiance::optics::{
    coherent_psf, contrast_scan, form_image, CloudShots, FringeContrast, Scan, ShotSource,
};
use subradiance::rng::{purpose_seed, stream_seed};
use subradiance::stats::t_critical_95;
use subradiance::{AtomSet, CloudGeometry};

use crate::config::{ExperimentConfig, RateSourceName};
use crate::error::CliError;
use crate::output::{
    combined_digest, num, Assumptions, OutputSet, RunManifest, Stages, MANIFEST,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Decay,
    Spectrum,
    Michelson,
    Ladder,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::Spectrum => "spectrum",
            Experiment::Michelson => "michelson",
            Experiment::Ladder => "ladder",
            Experiment::Sweep => "sweep",
        }
    }
}

pub struct Run {
    pub outputs: OutputSet,
    pub manifest: RunManifest,
}

impl Run {
    pub fn write(&self, dir: &std::path::Path) -> Result<(), CliError> {
        self.outputs.write_all(dir, &self.manifest)
    }
}

/// Runs an experiment on a pool of `workers` threads and returns the outputs
/// without touching the filesystem.
pub fn run_experiment(
    experiment: Experiment,
    config: &ExperimentConfig,
    workers: usize,
    plots: bool,
) -> Result<Run, CliError> {
    subradiance::use_sequential_linalg();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let mut stages = Stages::default();
    let mut out = OutputSet::default();
    pool.install(|| {
        let r = &mut stages;
        let o = &mut out;
        match experiment {
            Experiment::Decay => decay(config, plots, r, o),
            Experiment::Spectrum => spectrum(config, r, o),
            Experiment::Michelson => michelson(config, plots, r, o),
            Experiment::Ladder => ladder(config, plots, r, o),
            Experiment::Sweep => sweep(config, r, o),
        }
    })?;
    if out.names().contains(&MANIFEST) {
        return Err(CliError::Io(format!("{MANIFEST} is reserved")));
    }
    let outputs = out.digests();
    let manifest = RunManifest {
        tool: "subradiance",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: experiment.name(),
        master_seed: config.seed,
        workers: workers.max(1),
        config: config.clone(),
        assumptions: Assumptions::default(),
        total_seconds: stages.elapsed(),
        stages: stages.into_timings(),
        outputs_digest: combined_digest(&outputs),
        outputs,
    };
    Ok(Run {
        outputs: out,
        manifest,
    })
}

fn checked_geometry(config: &ExperimentConfig) -> Result<CloudGeometry, CliError> {
    let g = config.geometry()?;
    config.check_atoms(g.atom_count)?;
    Ok(g)
}

fn atoms_csv(out: &mut OutputSet, name: &str, atoms: &AtomSet) -> Result<(), CliError> {
    out.csv(
        name,
        &["x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps"],
        atoms
            .positions
            .iter()
            .zip(&atoms.velocities)
            .map(|(r, v)| r.iter().chain(v).map(|x| num(*x)).collect::<Vec<_>>()),
    )
}

#[derive(Serialize)]
struct DecayReport<'a> {
    atom_count: usize,
    peak_density_m3: f64,
    seeds: usize,
    mean_tau_over_tau_a: f64,
    tau_err: f64,
    /// Student-t interval on the mean over realizations.
    confidence_95: [f64; 2],
    mean_trace_fit: &'a subradiance::analysis::DecayFit,
    fits: &'a [subradiance::analysis::DecayFit],
}

fn decay(
    config: &ExperimentConfig,
    plots: bool,
    stages: &mut Stages,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let geometry = checked_geometry(config)?;
    let dc = config.decay_config()?;
    let ens = stages.run("decay", || decay_ensemble(&geometry, &dc))?;
    let t = &ens.mean_trace;
    out.csv(
        "trace.csv",
        &["t_over_tau_a", "intensity", "intensity_err"],
        (0..t.len()).map(|i| {
            [t.times[i], t.intensity[i], t.intensity_err[i]]
                .into_iter()
                .map(num)
        }),
    )?;
    let half = if ens.fits.len() > 1 {
        t_critical_95(ens.fits.len() - 1) * ens.tau_err
    } else {
        1.96 * ens.tau_err
    };
    out.json(
        "decay_fit.json",
        &DecayReport {
            atom_count: geometry.atom_count,
            peak_density_m3: geometry.peak_density(),
            seeds: dc.seeds,
            mean_tau_over_tau_a: ens.mean_tau,
            tau_err: ens.tau_err,
            confidence_95: [ens.mean_tau - half, ens.mean_tau + half],
            mean_trace_fit: &ens.mean_trace_fit,
            fits: &ens.fits,
        },
    )?;
    if plots {
        let atoms = stages.run("atoms", || {
            sample_cloud(&geometry, &dc.constants, stream_seed(config.seed, 0))
        })?;
        atoms_csv(out, "atoms_realization0.csv", &atoms.scaled(dc.position_scale))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct WidthRow {
    atom_count: usize,
    width: Option<f64>,
    uncertainty: Option<f64>,
    realizations: usize,
    modes: usize,
}

#[derive(Serialize)]
struct WidthReport {
    rows: Vec<WidthRow>,
    power_law: Option<PowerLawFit>,
}

fn spectrum(
    config: &ExperimentConfig,
    stages: &mut Stages,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let base = config.geometry()?;
    let constants = config.constants();
    let counts = if config.spectrum.atom_counts.is_empty() {
        vec![base.atom_count]
    } else {
        config.spectrum.atom_counts.clone()
    };
    let seeds = config.spectrum.seeds;
    if seeds == 0 {
        return Err(CliError::Config("spectrum.seeds must be at least 1".into()));
    }
    for &n in &counts {
        config.check_atoms(n)?;
    }
    let mut all: Vec<(usize, Vec<ModeSpectrum>)> = Vec::new();
    for (ni, &n) in counts.iter().enumerate() {
        let geometry = base.with_atom_count(n);
        let master = stream_seed(config.seed, ni as u64);
        let spectra = stages.run("spectrum", || {
            (0..seeds as u64)
                .into_par_iter()
                .map(|s| {
                    let atoms = sample_cloud(&geometry, &constants, stream_seed(master, s))?;
                    let g = build_exchange_matrix_capped(&atoms, &constants, config.cloud.max_atoms)?;
                    let spec = eigenvalues_only(&g, &constants)?;
                    spec.check_invariants()?;
                    Ok(spec)
                })
                .collect::<subradiance::Result<Vec<_>>>()
        })?;
        all.push((n, spectra));
    }

    let mut rows = Vec::new();
    for (n, spectra) in &all {
        for (s, spec) in spectra.iter().enumerate() {
            for l in spec.eigenvalues() {
                rows.push([n.to_string(), s.to_string(), num(l.re), num(l.im)]);
            }
        }
    }
    out.csv(
        "eigenvalues.csv",
        &["atom_count", "realization", "re_lambda", "im_lambda"],
        rows,
    )?;

    let mut widths = Vec::new();
    for (n, spectra) in &all {
        let modes = spectra.iter().map(|s| s.order()).sum();
        if spectra.len() < MIN_WIDTH_REALIZATIONS {
            log::warn!(
                "N = {n}: {} realization(s), width needs {MIN_WIDTH_REALIZATIONS}",
                spectra.len()
            );
            widths.push(WidthRow {
                atom_count: *n,
                width: None,
                uncertainty: None,
                realizations: spectra.len(),
                modes,
            });
            continue;
        }
        let w = stages.run("width", || {
            spectrum_width(spectra, purpose_seed(config.seed, "width"))
        })?;
        widths.push(WidthRow {
            atom_count: *n,
            width: Some(w.width),
            uncertainty: Some(w.uncertainty),
            realizations: w.realizations,
            modes: w.modes,
        });
    }
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    out.csv(
        "widths.csv",
        &["atom_count", "width", "width_err", "realizations"],
        widths.iter().map(|w| {
            [
                w.atom_count.to_string(),
                opt(w.width),
                opt(w.uncertainty),
                w.realizations.to_string(),
            ]
        }),
    )?;
    let fitted: Vec<(f64, f64)> = widths
        .iter()
        .filter_map(|w| w.width.filter(|v| *v > 0.0).map(|v| (w.atom_count as f64, v)))
        .collect();
    let power_law = if fitted.len() >= 4 {
        let (x, y): (Vec<f64>, Vec<f64>) = fitted.into_iter().unzip();
        Some(stages.run("power_law", || fit_power_law(&x, &y))?)
    } else {
        None
    };
    out.json(
        "width_fit.json",
        &WidthReport {
            rows: widths,
            power_law,
        },
    )
}

#[derive(Serialize)]
struct ContrastPoint {
    scan_value: f64,
    contrast: f64,
    contrast_err: f64,
    raw_contrast: f64,
    moment_contrast: f64,
    fit: FringeContrast,
}

#[derive(Serialize)]
struct ContrastReport {
    parameter: &'static str,
    emission: subradiance::optics::EmissionModel,
    shots: usize,
    displacement_m: Option<f64>,
    psf_intensity_fwhm_m: f64,
    psf_first_zero_m: Option<f64>,
    points: Vec<ContrastPoint>,
}

#[derive(Serialize)]
struct ImageHeader {
    format: &'static str,
    shape: [usize; 2],
    pitch_m: f64,
    origin_m: [f64; 2],
    axis: subradiance::Axis,
    shot: u64,
    gate_tau: f64,
}

fn michelson(
    config: &ExperimentConfig,
    plots: bool,
    stages: &mut Stages,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let sc = config.scan_config()?;
    let scan = config.scan()?;
    config.check_atoms(sc.geometry.atom_count)?;
    if let Scan::AtomNumber(ns) = &scan {
        for &n in ns {
            config.check_atoms(n)?;
        }
    }
    let psf = stages.run("psf", || coherent_psf(&sc.detection, &sc.constants))?;
    let curve = stages.run("michelson", || contrast_scan(&sc, &scan))?;

    let mut rows = Vec::new();
    for (v, ig) in curve.values.iter().zip(&curve.interferograms) {
        for i in 0..ig.phases.len() {
            rows.push([num(*v), num(ig.phases[i]), num(ig.signal[i]), num(ig.signal_err[i])]);
        }
    }
    out.csv(
        "interferogram.csv",
        &["scan_value", "phase_rad", "signal", "signal_err"],
        rows,
    )?;
    out.csv(
        "contrast_curve.csv",
        &["scan_value", "contrast", "contrast_err", "raw_contrast"],
        (0..curve.values.len()).map(|i| {
            [
                curve.values[i],
                curve.contrast[i],
                curve.contrast_err[i],
                curve.raw[i],
            ]
            .map(num)
        }),
    )?;
    let points = curve
        .interferograms
        .iter()
        .enumerate()
        .map(|(i, ig)| {
            Ok(ContrastPoint {
                scan_value: curve.values[i],
                contrast: curve.contrast[i],
                contrast_err: curve.contrast_err[i],
                raw_contrast: curve.raw[i],
                moment_contrast: ig.moment_contrast(),
                fit: stages.run("contrast", || ig.contrast())?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.json(
        "contrast.json",
        &ContrastReport {
            parameter: curve.parameter,
            emission: sc.emission,
            shots: sc.shots,
            displacement_m: (!matches!(scan, Scan::Displacement(_))).then_some(sc.displacement),
            psf_intensity_fwhm_m: psf.intensity_fwhm(),
            psf_first_zero_m: psf.first_zero(),
            points,
        },
    )?;

    if plots {
        let steps = 400;
        out.csv(
            "psf_profile.csv",
            &["rho_m", "amplitude", "intensity"],
            (0..=steps).map(|i| {
                let rho = psf.cutoff() * i as f64 / steps as f64;
                let h = psf.exact(rho);
                [rho, h, h * h].map(num)
            }),
        )?;
        let shots = CloudShots { config: &sc };
        let snaps = stages.run("image", || shots.snapshots(0))?;
        let snap = snaps.last().expect("at least one gate");
        let field = stages.run("image", || {
            form_image(&snap.positions, &snap.amplitudes, &sc.detection, &psf, &sc.constants)
        })?;
        let mut bin = Vec::with_capacity(field.data.len() * 16);
        for z in &field.data {
            bin.extend_from_slice(&z.re.to_le_bytes());
            bin.extend_from_slice(&z.im.to_le_bytes());
        }
        out.bytes("image_field.bin", bin);
        out.json(
            "image_field.json",
            &ImageHeader {
                format: "complex128 little-endian (re, im) pairs, first transverse index fastest",
                shape: field.grid.shape,
                pitch_m: field.grid.pitch,
                origin_m: field.grid.origin,
                axis: sc.detection.axis,
                shot: 0,
                gate_tau: *sc.gates.last().unwrap(),
            },
        )?;
        let atoms = stages.run("atoms", || {
            sample_cloud(&sc.geometry, &sc.constants, stream_seed(sc.seed, 0))
        })?;
        atoms_csv(out, "atoms_shot0.csv", &atoms)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RateWindow {
    t_from_tau_a: f64,
    t_to_tau_a: f64,
    rate_over_gamma_a: f64,
    rate_err: f64,
}

#[derive(Serialize)]
struct LadderSummary {
    atom_count: usize,
    shots: usize,
    excited_fraction: f64,
    source: RateSourceName,
    empirical_rates: Option<usize>,
    mean_initial_excitation: f64,
    /// Significant (3σ) sign changes of the trace minus `m̄₀ e^{−t}`.
    reference_crossings: usize,
    rate_windows: Vec<RateWindow>,
}

fn ladder(
    config: &ExperimentConfig,
    plots: bool,
    stages: &mut Stages,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let l = &config.ladder;
    let geometry = config.geometry()?;
    let constants = config.constants();
    let source = match l.source {
        RateSourceName::Independent => RateSource::Independent,
        RateSourceName::DickeSymmetric => RateSource::DickeSymmetric {
            exponent: l.dicke_exponent,
        },
        RateSourceName::Empirical => {
            config.check_atoms(geometry.atom_count)?;
            if l.spectrum_realizations == 0 {
                return Err(CliError::Config(
                    "ladder.spectrum_realizations must be at least 1".into(),
                ));
            }
            let master = purpose_seed(config.seed, "ladder-spectrum");
            let rates = stages.run("spectrum", || {
                let parts = (0..l.spectrum_realizations as u64)
                    .into_par_iter()
                    .map(|s| {
                        let atoms = sample_cloud(&geometry, &constants, stream_seed(master, s))?;
                        let g = build_exchange_matrix_capped(
                            &atoms,
                            &constants,
                            config.cloud.max_atoms,
                        )?;
                        Ok(eigenvalues_only(&g, &constants)?.real_parts())
                    })
                    .collect::<subradiance::Result<Vec<_>>>()?;
                RateSource::from_rates(parts.concat())
            })?;
            rates
        }
    };
    let empirical_rates = match &source {
        RateSource::Empirical { rates } => Some(rates.len()),
        _ => None,
    };
    let lc = LadderConfig {
        atom_count: geometry.atom_count,
        excited_fraction: l.excited_fraction,
        source,
        shots: l.shots,
        grid: config.ladder_grid(),
        record_times: l.record_times,
    };
    let result = stages.run("cascade", || {
        run_cascade(&lc, purpose_seed(config.seed, "cascade"))
    })?;
    let t = &result.trace;
    out.csv(
        "ladder_trace.csv",
        &["t_over_tau_a", "intensity", "intensity_err"],
        (0..t.len()).map(|i| [t.times[i], t.intensity[i], t.intensity_err[i]].map(num)),
    )?;

    let mut rate_windows = Vec::new();
    if result.shots >= MIN_RATE_SHOTS {
        let rate = stages.run("rate", || {
            effective_rate(&result, purpose_seed(config.seed, "rate"))
        })?;
        out.csv(
            "ladder_rate.csv",
            &["t_over_tau_a", "rate_over_gamma_a", "rate_err"],
            (0..rate.times.len()).map(|i| [rate.times[i], rate.rate[i], rate.rate_err[i]].map(num)),
        )?;
        for (a, b) in [(0.0, 0.05), (0.05, 0.5), (0.5, 2.0), (2.0, 5.0)] {
            if let Some((m, e)) = rate.window_mean(a, b) {
                rate_windows.push(RateWindow {
                    t_from_tau_a: a,
                    t_to_tau_a: b,
                    rate_over_gamma_a: m,
                    rate_err: e,
                });
            }
        }
    } else {
        log::warn!("ladder: fewer than {MIN_RATE_SHOTS} shots, no effective-rate curve");
    }

    let t_max = result.edges.last().copied().unwrap_or(0.0);
    out.json(
        "ladder_summary.json",
        &LadderSummary {
            atom_count: lc.atom_count,
            shots: result.shots,
            excited_fraction: lc.excited_fraction,
            source: l.source,
            empirical_rates,
            mean_initial_excitation: result.mean_initial_excitation(),
            reference_crossings: count_crossings(&result.reference_signs(t_max, 3.0)),
            rate_windows,
        },
    )?;

    if plots {
        let reference = result.independent_reference();
        out.csv(
            "ladder_reference.csv",
            &["t_over_tau_a", "intensity"],
            t.times.iter().zip(&reference).map(|(a, b)| [*a, *b].map(num)),
        )?;
        if let Some(times) = &result.emission_times {
            out.csv(
                "emission_times.csv",
                &["shot", "t_over_tau_a"],
                times.iter().enumerate().flat_map(|(s, ts)| {
                    ts.iter().map(move |t| [s.to_string(), num(*t)])
                }),
            )?;
        }
    }
    Ok(())
}

fn sweep(
    config: &ExperimentConfig,
    stages: &mut Stages,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let geometry = checked_geometry(config)?;
    let dc = config.decay_config()?;
    let times = config.expansion_times_s();
    let rows = stages.run("sweep", || sweep_subradiance(&geometry, &times, &dc))?;
    out.csv(
        "sweep.csv",
        &[
            "t_expand_s",
            "peak_density_m3",
            "od_radial",
            "fom",
            "tau_over_tau_a",
            "tau_err",
        ],
        rows.iter().map(|r| {
            [
                r.t_expand_s,
                r.peak_density_m3,
                r.od_radial,
                r.fom,
                r.tau_over_tau_a,
                r.tau_err,
            ]
            .map(num)
        }),
    )?;
    out.json("sweep.json", &rows)
}
