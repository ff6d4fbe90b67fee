//! End-to-end campaigns built from the individual modules: the defect-free
//! success curve and the collective-coupling scaling series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fit::{fit_spectrum, sqrt_scaling_fit, FitResult, ScalingFit};
use crate::loading::{
    defect_free_probability, mc_rearranged_success, rearranged_success_probability, trial_rng,
    LoadingConfig,
};
use crate::physics::{array_couplings, effective_collective_coupling, CavityParams, TweezerParams};
use crate::rearrange::target_block_start;
use crate::scalar::Real;
use crate::spectra::{synthesize_spectrum, Spectrum, SpectrumParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectFreeRow<T> {
    pub n: usize,
    /// pⁿ: a fixed block fully loaded without rearrangement.
    pub analytic_no_rearrangement: T,
    pub analytic_rearranged: T,
    pub mc_rearranged: f64,
    pub mc_std_error: f64,
}

/// Success probability against target length, analytic and simulated.
pub fn defect_free_curve<T: Real>(
    loading: &LoadingConfig<T>,
    geometry: &TweezerParams<T>,
    survival: T,
    ns: impl IntoIterator<Item = usize>,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<DefectFreeRow<T>>> {
    ns.into_iter()
        .map(|n| {
            // Each length gets its own seed family so rows are independent.
            let seed = master_seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mc = mc_rearranged_success(loading, geometry, n, survival, n_trials, seed)?;
            Ok(DefectFreeRow {
                n,
                analytic_no_rearrangement: defect_free_probability(n, loading.p)?,
                analytic_rearranged: rearranged_success_probability(n, loading.n_traps, loading.p, survival)?,
                mc_rearranged: mc.frequency,
                mc_std_error: mc.std_error,
            })
        })
        .collect()
}

/// How per-atom couplings are assigned in a scaling campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingModel {
    /// Every atom couples with the configured single-atom g.
    Uniform,
    /// g scaled by the axial and transverse mode factors at each rearranged site.
    Geometric,
}

/// Synthesize-then-fit series over atom numbers, followed by the √N regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCampaign<T> {
    pub cavity: CavityParams<T>,
    pub tweezer: TweezerParams<T>,
    /// Coupling of a single atom at the cavity center (MHz).
    pub g_single: T,
    pub n_values: Vec<usize>,
    pub coupling: CouplingModel,
    pub delta_ca: T,
    pub amplitude_scale: T,
    pub noise_sigma: T,
    pub jitter_um: T,
    pub grid: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint<T> {
    pub n: usize,
    pub true_omega: T,
    pub spectrum: Spectrum<T>,
    pub fit: FitResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingOutcome<T> {
    pub points: Vec<ScalingPoint<T>>,
    pub scaling: ScalingFit<T>,
}

impl<T: Real> ScalingCampaign<T> {
    /// Couplings of the `n` atoms after rearrangement into the central block.
    pub fn couplings<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<T>> {
        match self.coupling {
            CouplingModel::Uniform => Ok(vec![self.g_single; n]),
            CouplingModel::Geometric => {
                let start = target_block_start(self.tweezer.n_traps, n)?;
                let positions: Vec<T> = (start..start + n)
                    .map(|i| self.tweezer.trap_position_um(i))
                    .collect();
                array_couplings(&self.cavity, self.g_single, &positions, self.jitter_um, rng)
            }
        }
    }

    fn point(&self, n: usize, master_seed: u64) -> Result<ScalingPoint<T>> {
        let mut rng = trial_rng(master_seed, n as u64);
        let g = self.couplings(n, &mut rng)?;
        let omega = effective_collective_coupling(&g)?;
        let params = SpectrumParams {
            omega_eff: omega,
            delta_ca: self.delta_ca,
            kappa: self.cavity.kappa,
            gamma: self.cavity.gamma,
            amplitude_scale: self.amplitude_scale,
        };
        let spectrum = synthesize_spectrum(&self.grid, &params, self.noise_sigma, &mut rng)?;
        let fit = fit_spectrum(&spectrum, self.cavity.kappa, self.cavity.gamma, None)?;
        Ok(ScalingPoint {
            n,
            true_omega: omega,
            spectrum,
            fit,
        })
    }

    pub fn run(&self, master_seed: u64) -> Result<ScalingOutcome<T>> {
        self.cavity.validate()?;
        self.tweezer.validate()?;
        if self.n_values.len() < 2 {
            return Err(domain("a scaling campaign needs at least two atom numbers"));
        }
        let points: Vec<ScalingPoint<T>> = self
            .n_values
            .par_iter()
            .map(|&n| self.point(n, master_seed))
            .collect::<Result<_>>()?;
        let pairs: Vec<(usize, T)> = points.iter().map(|p| (p.n, p.fit.omega_eff)).collect();
        let scaling = sqrt_scaling_fit(&pairs)?;
        Ok(ScalingOutcome { points, scaling })
    }
}
