//! One function per subcommand. Each writes its files into the run directory.

use anyhow::{bail, Context};
use cavity_array::fit::{chi_square, fit_spectrum};
use cavity_array::loading::{run_loading_campaign, run_trials, simulate_trial, trial_rng};
use cavity_array::pipeline::{defect_free_curve, CouplingModel, ScalingCampaign};
use cavity_array::rearrange::{
    crest_factor, crest_grid_size, optimize_tone_phases, plan_rearrangement, synthesize_tone_sweeps,
    total_displacement,
};
use cavity_array::spectra::{synthesize_spectrum, transmission, transmission_peaks, SpectrumParams};
use cavity_array::{Error, Spectrum};
use serde::Serialize;
use serde_json::json;

use crate::run::RunDir;
use crate::{Command, CouplingArg, Invocation, UsageError};

pub fn dispatch(inv: &Invocation, dir: &mut RunDir) -> anyhow::Result<()> {
    match &inv.command {
        Command::LoadSim => load_sim(inv, dir),
        Command::DefectFreeCurve { n_min, n_max } => defect_free(inv, *n_min, *n_max, dir),
        Command::Spectrum {
            omega,
            atoms,
            delta_ca,
            noise,
        } => spectrum(inv, *omega, *atoms, *delta_ca, *noise, dir),
        Command::Fit { input } => fit(inv, input, dir),
        Command::Scaling {
            n_min,
            n_max,
            coupling,
        } => scaling(inv, *n_min, *n_max, *coupling, dir),
        Command::Plan { n_target } => plan(inv, *n_target, dir),
        Command::Replay { .. } => bail!(UsageError("replay cannot be nested".into())),
    }
}

fn trials(inv: &Invocation) -> u64 {
    inv.trials
        .or_else(|| inv.command.default_trials())
        .expect("command has a trial count")
}

fn check_range(name: &str, lo: usize, hi: usize, n_traps: usize) -> anyhow::Result<()> {
    if lo == 0 || lo > hi || hi > n_traps {
        bail!(UsageError(format!(
            "{name}: need 1 <= n-min <= n-max <= tweezer.n_traps ({n_traps}), got {lo}..={hi}"
        )));
    }
    Ok(())
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

fn load_sim(inv: &Invocation, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = inv.config.loading();
    let n = trials(inv);
    let states = run_trials(&cfg, n, inv.master_seed)?;
    let stats = run_loading_campaign(&cfg, n, inv.master_seed)?;

    dir.write_with("trials.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["trial_id", "atom_count", "occupancy_bitstring"])?;
        for s in &states {
            w.write_record([s.trial_id.to_string(), s.atom_count().to_string(), s.bitstring()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_with("histogram.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["atom_count", "trials"])?;
        for (k, c) in stats.histogram.iter().enumerate() {
            w.write_record([k.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_json(
        "stats.json",
        &json!({
            "n_trials": stats.n_trials,
            "n_traps": cfg.n_traps,
            "p": cfg.p,
            "expected_mean": cfg.p * cfg.n_traps as f64,
            "mean": stats.mean,
            "std": stats.std,
            "histogram": stats.histogram,
        }),
    )?;
    Ok(())
}

fn defect_free(inv: &Invocation, n_min: usize, n_max: usize, dir: &mut RunDir) -> anyhow::Result<()> {
    let loading = inv.config.loading();
    let geometry = inv.config.tweezer();
    check_range("defect-free-curve", n_min, n_max, loading.n_traps)?;
    let (survival, calibrated) = inv.config.survival()?;
    let n_trials = trials(inv);
    let rows = defect_free_curve(&loading, &geometry, survival, n_min..=n_max, n_trials, inv.master_seed)?;

    dir.write_with("defect_free.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["N", "p_pow_N", "analytic_rearranged", "mc_rearranged", "mc_std_error"])?;
        for r in &rows {
            w.write_record([
                r.n.to_string(),
                r.analytic_no_rearrangement.to_string(),
                r.analytic_rearranged.to_string(),
                r.mc_rearranged.to_string(),
                r.mc_std_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_json(
        "summary.json",
        &json!({
            "p": loading.p,
            "n_traps": loading.n_traps,
            "survival": survival,
            "survival_calibrated": calibrated,
            "calibration_n": inv.config.rearrange.calibration_n,
            "calibration_target": inv.config.rearrange.calibration_target,
            "trials_per_n": n_trials,
        }),
    )?;
    Ok(())
}

fn spectrum(
    inv: &Invocation,
    omega: Option<f64>,
    atoms: usize,
    delta_ca: Option<f64>,
    noise: Option<f64>,
    dir: &mut RunDir,
) -> anyhow::Result<()> {
    let cfg = &inv.config;
    let cavity = cfg.cavity();
    let omega = match omega {
        Some(o) => o,
        None if atoms == 0 => bail!(UsageError("--atoms must be at least 1".into())),
        None => cfg.spectrum.g_mhz * (atoms as f64).sqrt(),
    };
    let noise = noise.unwrap_or(cfg.noise.sigma);
    if !(noise >= 0.0 && noise.is_finite()) {
        bail!(UsageError(format!("--noise must be non-negative, got {noise}")));
    }
    let params = SpectrumParams {
        omega_eff: omega,
        delta_ca: delta_ca.unwrap_or(cfg.spectrum.delta_ca_mhz),
        kappa: cavity.kappa,
        gamma: cavity.gamma,
        amplitude_scale: cfg.spectrum.amplitude_scale,
    };
    params.validate().map_err(|e| UsageError(e.to_string()))?;
    let grid = cfg.grid()?;
    let mut rng = trial_rng(inv.master_seed, 0);
    let spec = synthesize_spectrum(&grid, &params, noise, &mut rng)?;
    let peaks = transmission_peaks(&params)?;

    // Highest sample of the synthesized data on each side of the mid-point.
    let mid = params.delta_ca / 2.0;
    let grid_peak = |left: bool| {
        spec.detuning
            .iter()
            .zip(&spec.transmission)
            .filter(|(&d, _)| if left { d < mid } else { d >= mid })
            .fold(None::<(f64, f64)>, |best, (&d, &t)| match best {
                Some((_, bt)) if bt >= t => best,
                _ => Some((d, t)),
            })
            .map(|(d, _)| d)
    };

    dir.write_with("spectrum.csv", |buf| Ok(spec.write_csv(buf)?))?;
    dir.write_json(
        "summary.json",
        &json!({
            "params": params,
            "noise_sigma": noise,
            "grid_step_MHz": grid[1] - grid[0],
            "model_peaks": peaks.iter().map(|&(d, t)| json!({"detuning_MHz": d, "transmission": t})).collect::<Vec<_>>(),
            "grid_peak_low_MHz": grid_peak(true),
            "grid_peak_high_MHz": grid_peak(false),
        }),
    )?;
    Ok(())
}

fn fit(inv: &Invocation, input: &std::path::Path, dir: &mut RunDir) -> anyhow::Result<()> {
    let file = std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let spec = Spectrum::<f64>::read_csv(file).map_err(|e| match e {
        Error::Input(_) | Error::Csv(_) => anyhow::Error::new(UsageError(format!("{}: {e}", input.display()))),
        other => other.into(),
    })?;
    let cavity = inv.config.cavity();
    let result = fit_spectrum(&spec, cavity.kappa, cavity.gamma, None)?;
    let model = result.params(cavity.kappa, cavity.gamma);

    dir.write_json(
        "fit.json",
        &json!({
            "input": input.display().to_string(),
            "n_points": spec.len(),
            "kappa_MHz": cavity.kappa,
            "gamma_MHz": cavity.gamma,
            "chi_square": chi_square(&spec, &model),
            "result": result,
        }),
    )?;
    dir.write_with("fit_curve.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["detuning_MHz", "transmission", "model", "residual"])?;
        for (&d, &t) in spec.detuning.iter().zip(&spec.transmission) {
            let m = transmission(d, &model);
            w.write_record([d.to_string(), t.to_string(), m.to_string(), (t - m).to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

#[derive(Serialize)]
struct ScalingSummary<'a> {
    coupling: CouplingArg,
    #[serde(rename = "g_single_MHz")]
    g_single_mhz: f64,
    true_omegas: Vec<(usize, f64)>,
    scaling: &'a cavity_array::ScalingFit<f64>,
}

fn scaling(inv: &Invocation, n_min: usize, n_max: usize, coupling: CouplingArg, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = &inv.config;
    check_range("scaling", n_min, n_max, cfg.tweezer.n_traps)?;
    if n_max - n_min < 1 {
        bail!(UsageError("scaling needs at least two atom numbers".into()));
    }
    let campaign = ScalingCampaign {
        cavity: cfg.cavity(),
        tweezer: cfg.tweezer(),
        g_single: cfg.spectrum.g_mhz,
        n_values: (n_min..=n_max).collect(),
        coupling: match coupling {
            CouplingArg::Uniform => CouplingModel::Uniform,
            CouplingArg::Geometric => CouplingModel::Geometric,
        },
        delta_ca: cfg.spectrum.delta_ca_mhz,
        amplitude_scale: cfg.spectrum.amplitude_scale,
        noise_sigma: cfg.noise.sigma,
        jitter_um: cfg.noise.jitter_um,
        grid: cfg.grid()?,
    };
    let out = campaign.run(inv.master_seed)?;

    dir.write_with("scaling.csv", |buf| Ok(out.scaling.write_csv(buf)?))?;
    dir.write_json(
        "scaling.json",
        &ScalingSummary {
            coupling,
            g_single_mhz: cfg.spectrum.g_mhz,
            true_omegas: out.points.iter().map(|p| (p.n, p.true_omega)).collect(),
            scaling: &out.scaling,
        },
    )?;
    dir.write_with("fits.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record([
            "N",
            "true_omega",
            "omega_eff",
            "omega_sigma",
            "delta_ca",
            "amplitude_scale",
            "reduced_chi_square",
            "converged",
            "iterations",
        ])?;
        for p in &out.points {
            let f = &p.fit;
            w.write_record([
                p.n.to_string(),
                p.true_omega.to_string(),
                f.omega_eff.to_string(),
                f.uncertainties.omega_eff.to_string(),
                f.delta_ca.to_string(),
                f.amplitude_scale.to_string(),
                f.reduced_chi_square.to_string(),
                f.converged.to_string(),
                f.iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    for p in &out.points {
        dir.write_with(&format!("spectrum_N{:02}.csv", p.n), |buf| Ok(p.spectrum.write_csv(buf)?))?;
    }
    Ok(())
}

fn plan(inv: &Invocation, n_target: usize, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = &inv.config;
    let loading = cfg.loading();
    let geometry = cfg.tweezer();
    if n_target == 0 || n_target > geometry.n_traps {
        bail!(UsageError(format!(
            "--n-target must lie in 1..={}, got {n_target}",
            geometry.n_traps
        )));
    }
    let max_attempts = trials(inv);
    let mut found = None;
    for id in 0..max_attempts {
        let (_, seen, _) = simulate_trial(&loading, inv.master_seed, id)?;
        match plan_rearrangement(&seen, n_target, &geometry) {
            Ok(p) => {
                found = Some((seen, p));
                break;
            }
            Err(Error::InsufficientAtoms { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let Some((seen, plan)) = found else {
        bail!("no loading trial among {max_attempts} held {n_target} atoms");
    };
    let plan = plan.with_duration(cfg.rearrange.sweep_duration_us);

    let amplitudes = vec![1.0; n_target];
    let phases = optimize_tone_phases(&amplitudes)?;
    let samples = crest_grid_size(n_target);
    let crest_zero = crest_factor(&amplitudes, &vec![0.0; n_target], samples);
    let crest_opt = crest_factor(&amplitudes, &phases, samples);

    let schedule = synthesize_tone_sweeps(
        &plan,
        &geometry,
        cfg.rearrange.sweep_duration_us,
        cfg.rearrange.sample_rate_msps,
        &cfg.aod(),
        Some(&amplitudes),
        Some(&phases),
    )?;
    schedule.check_no_crossing()?;

    dir.write("plan.json", format!("{}\n", plan.to_json()?).as_bytes())?;
    dir.write_with("tones.csv", |buf| Ok(schedule.write_csv(buf)?))?;
    dir.write_json(
        "plan_summary.json",
        &json!({
            "trial_id": seen.trial_id,
            "attempts": seen.trial_id + 1,
            "loaded": seen.atom_count(),
            "occupancy_bitstring": seen.bitstring(),
            "n_target": n_target,
            "total_displacement_um": total_displacement(&plan, &geometry),
            "crest_factor_zero_phase": crest_zero,
            "crest_factor_optimized": crest_opt,
            "phases_rad": phases,
        }),
    )?;
    Ok(())
}
