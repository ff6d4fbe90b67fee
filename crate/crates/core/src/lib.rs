//! Simulation and analysis of a one-dimensional tweezer array of single atoms
//! strongly coupled to a Fabry–Pérot cavity.
//!
//! The crate covers the whole chain from stochastic tweezer loading through
//! defect-free rearrangement to vacuum Rabi splitting spectra, their fits, and
//! the √N scaling of the collective coupling.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64` and `*F32`
//! aliases below name the common concrete instantiations.
//!
//! ```
//! use cavity_array::{spectra, SpectrumParamsF64};
//!
//! let p = SpectrumParamsF64::new(4.6, 0.0, 2.6, 1.1);
//! let splitting = spectra::expected_splitting(&p).unwrap();
//! assert!((splitting - 9.73).abs() < 0.01);
//! ```

pub mod error;
pub mod fit;
pub mod loading;
pub mod physics;
pub mod pipeline;
pub mod rearrange;
pub mod scalar;
pub mod spectra;

pub use error::{Error, Result};
pub use fit::{FitResult, ScalingFit};
pub use loading::{LoadingStats, OccupancyState};
pub use physics::{AtomSite, CavityParams, TweezerParams};
pub use rearrange::{Move, MovePlan, ToneSchedule};
pub use scalar::Real;
pub use spectra::{Spectrum, SpectrumParams};

pub type CavityParamsF64 = CavityParams<f64>;
pub type CavityParamsF32 = CavityParams<f32>;
pub type TweezerParamsF64 = TweezerParams<f64>;
pub type TweezerParamsF32 = TweezerParams<f32>;
pub type AtomSiteF64 = AtomSite<f64>;
pub type LoadingConfigF64 = loading::LoadingConfig<f64>;
pub type MovePlanF64 = MovePlan<f64>;
pub type ToneScheduleF64 = ToneSchedule<f64>;
pub type SpectrumParamsF64 = SpectrumParams<f64>;
pub type SpectrumParamsF32 = SpectrumParams<f32>;
pub type SpectrumF64 = Spectrum<f64>;
pub type SpectrumF32 = Spectrum<f32>;
pub type FitResultF64 = FitResult<f64>;
pub type FitResultF32 = FitResult<f32>;
pub type ScalingFitF64 = ScalingFit<f64>;
pub type ScalingCampaignF64 = pipeline::ScalingCampaign<f64>;
