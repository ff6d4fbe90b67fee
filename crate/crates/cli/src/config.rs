//! Run configuration: a closed TOML schema with one table per subsystem.
//!
//! ```toml
//! [cavity]
//! kappa_MHz = 2.6
//!
//! [loading]
//! p = 0.6
//! ```
//!
//! Missing keys take the `paper-2024` preset values; unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context};
use cavity_array::loading::{calibrate_survival, LoadingConfig, ReadoutErrors};
use cavity_array::rearrange::{AodCalibration, DEFAULT_SWEEP_US};
use cavity_array::spectra::linear_grid;
use cavity_array::{CavityParams, TweezerParams};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const PRESETS: &[&str] = &["paper-2024"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    #[serde(rename = "g0_max_MHz")]
    pub g0_max_mhz: f64,
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
    pub lambda_probe_nm: f64,
    pub lambda_lock_nm: f64,
    pub waist_um: f64,
    pub cavity_length_mm: f64,
    pub finesse: f64,
    pub beat_cycle_um: f64,
}

impl Default for CavitySection {
    fn default() -> Self {
        let c = CavityParams::<f64>::paper_2024();
        Self {
            g0_max_mhz: c.g0_max,
            kappa_mhz: c.kappa,
            gamma_mhz: c.gamma,
            lambda_probe_nm: c.lambda_probe_nm,
            lambda_lock_nm: c.lambda_lock_nm,
            waist_um: c.waist_um,
            cavity_length_mm: c.cavity_length_mm,
            finesse: c.finesse,
            beat_cycle_um: c.beat_cycle_um,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TweezerSection {
    pub n_traps: usize,
    pub spacing_um: f64,
    #[serde(rename = "trap_depth_mK")]
    pub trap_depth_mk: f64,
    pub waist_um: f64,
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
}

impl Default for TweezerSection {
    fn default() -> Self {
        let t = TweezerParams::<f64>::paper_2024();
        Self {
            n_traps: t.n_traps,
            spacing_um: t.spacing_um,
            trap_depth_mk: t.trap_depth_mk,
            waist_um: t.tweezer_waist_um,
            power_mw: t.power_per_trap_mw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadingSection {
    pub p: f64,
    pub false_positive: f64,
    pub false_negative: f64,
}

impl Default for LoadingSection {
    fn default() -> Self {
        Self {
            p: 0.6,
            false_positive: 0.0,
            false_negative: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RearrangeSection {
    /// Per-atom survival of the move-and-verify cycle. When absent it is
    /// calibrated so that `calibration_n` atoms succeed with `calibration_target`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival: Option<f64>,
    pub calibration_n: usize,
    pub calibration_target: f64,
    pub sweep_duration_us: f64,
    #[serde(rename = "sample_rate_MSps")]
    pub sample_rate_msps: f64,
    #[serde(rename = "aod_MHz_per_um")]
    pub aod_mhz_per_um: f64,
    #[serde(rename = "aod_center_MHz")]
    pub aod_center_mhz: f64,
}

impl Default for RearrangeSection {
    fn default() -> Self {
        let aod = AodCalibration::<f64>::default();
        Self {
            survival: None,
            calibration_n: 20,
            calibration_target: 0.38,
            sweep_duration_us: DEFAULT_SWEEP_US,
            sample_rate_msps: 1.0,
            aod_mhz_per_um: aod.mhz_per_um,
            aod_center_mhz: aod.center_mhz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Additive transmission noise, absolute.
    pub sigma: f64,
    /// Per-shot positional jitter of every atom (μm).
    pub jitter_um: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            jitter_um: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Single-atom coupling used to synthesize spectra (MHz).
    #[serde(rename = "g_MHz")]
    pub g_mhz: f64,
    #[serde(rename = "delta_ca_MHz")]
    pub delta_ca_mhz: f64,
    pub amplitude_scale: f64,
    #[serde(rename = "grid_min_MHz")]
    pub grid_min_mhz: f64,
    #[serde(rename = "grid_max_MHz")]
    pub grid_max_mhz: f64,
    pub grid_points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            g_mhz: 2.62,
            delta_ca_mhz: 0.2,
            amplitude_scale: 1.0,
            grid_min_mhz: -25.0,
            grid_max_mhz: 25.0,
            grid_points: 201,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub cavity: CavitySection,
    pub tweezer: TweezerSection,
    pub loading: LoadingSection,
    pub rearrange: RearrangeSection,
    pub noise: NoiseSection,
    pub spectrum: SpectrumSection,
}

impl Config {
    pub fn preset(name: &str) -> anyhow::Result<Self> {
        match name {
            "paper-2024" => Ok(Self::default()),
            other => Err(UsageError(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            ))
            .into()),
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn cavity(&self) -> CavityParams<f64> {
        let c = &self.cavity;
        CavityParams {
            g0_max: c.g0_max_mhz,
            kappa: c.kappa_mhz,
            gamma: c.gamma_mhz,
            lambda_probe_nm: c.lambda_probe_nm,
            lambda_lock_nm: c.lambda_lock_nm,
            waist_um: c.waist_um,
            cavity_length_mm: c.cavity_length_mm,
            finesse: c.finesse,
            beat_cycle_um: c.beat_cycle_um,
        }
    }

    pub fn tweezer(&self) -> TweezerParams<f64> {
        let t = &self.tweezer;
        TweezerParams {
            n_traps: t.n_traps,
            spacing_um: t.spacing_um,
            trap_depth_mk: t.trap_depth_mk,
            tweezer_waist_um: t.waist_um,
            power_per_trap_mw: t.power_mw,
        }
    }

    pub fn loading(&self) -> LoadingConfig<f64> {
        LoadingConfig {
            n_traps: self.tweezer.n_traps,
            p: self.loading.p,
            readout: ReadoutErrors {
                false_positive: self.loading.false_positive,
                false_negative: self.loading.false_negative,
            },
        }
    }

    pub fn aod(&self) -> AodCalibration<f64> {
        AodCalibration {
            mhz_per_um: self.rearrange.aod_mhz_per_um,
            center_mhz: self.rearrange.aod_center_mhz,
        }
    }

    pub fn grid(&self) -> anyhow::Result<Vec<f64>> {
        let s = &self.spectrum;
        linear_grid(s.grid_min_mhz, s.grid_max_mhz, s.grid_points)
            .map_err(|e| UsageError(format!("spectrum.grid_*: {e}")).into())
    }

    /// Survival from the config, or calibrated against the reference point.
    pub fn survival(&self) -> anyhow::Result<(f64, bool)> {
        if let Some(s) = self.rearrange.survival {
            return Ok((s, false));
        }
        let r = &self.rearrange;
        let s = calibrate_survival(r.calibration_n, r.calibration_target, self.tweezer.n_traps, self.loading.p)
            .map_err(|e| UsageError(format!("rearrange.calibration_target: {e}")))?;
        Ok((s, true))
    }

    /// Checks every field, naming the first offending key.
    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |e: cavity_array::Error| UsageError(e.to_string());
        self.cavity().validate().map_err(usage)?;
        self.tweezer().validate().map_err(usage)?;
        self.loading().validate().map_err(usage)?;
        let r = &self.rearrange;
        if let Some(s) = r.survival {
            if !(0.0..=1.0).contains(&s) {
                bail!(UsageError(format!("rearrange.survival must lie in [0, 1], got {s}")));
            }
        }
        if r.calibration_n > self.tweezer.n_traps {
            bail!(UsageError("rearrange.calibration_n exceeds tweezer.n_traps".into()));
        }
        for (key, v) in [
            ("rearrange.sweep_duration_us", r.sweep_duration_us),
            ("rearrange.sample_rate_MSps", r.sample_rate_msps),
            ("rearrange.aod_MHz_per_um", r.aod_mhz_per_um),
            ("spectrum.g_MHz", self.spectrum.g_mhz),
            ("spectrum.amplitude_scale", self.spectrum.amplitude_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(UsageError(format!("{key} must be positive, got {v}")));
            }
        }
        for (key, v) in [("noise.sigma", self.noise.sigma), ("noise.jitter_um", self.noise.jitter_um)] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!(UsageError(format!("{key} must be non-negative, got {v}")));
            }
        }
        if !self.spectrum.delta_ca_mhz.is_finite() {
            bail!(UsageError("spectrum.delta_ca_MHz must be finite".into()));
        }
        self.grid()?;
        Ok(())
    }
}
