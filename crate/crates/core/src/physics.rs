//! Physical constants and the position-dependent atom–cavity coupling model.
//!
//! Every frequency is stored as an ordinary frequency ν = ω/2π in MHz. Lengths
//! carry their unit in the field name.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Cavity and atomic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    /// Maximum single-atom coupling at a cavity antinode on the mode axis (MHz).
    pub g0_max: T,
    /// Cavity field decay rate (MHz).
    pub kappa: T,
    /// Atomic dipole decay rate (MHz).
    pub gamma: T,
    pub lambda_probe_nm: T,
    pub lambda_lock_nm: T,
    /// TEM00 mode waist (μm).
    pub waist_um: T,
    pub cavity_length_mm: T,
    pub finesse: T,
    /// Spatial period over which lattice nodes walk through the cavity antinodes (μm).
    pub beat_cycle_um: T,
}

impl<T: Real> CavityParams<T> {
    /// Parameters of the 1.16 mm Cs cavity with the 40-site tweezer array.
    pub fn paper_2024() -> Self {
        Self {
            g0_max: T::lit(3.4),
            kappa: T::lit(2.6),
            gamma: T::lit(1.1),
            lambda_probe_nm: T::lit(852.0),
            lambda_lock_nm: T::lit(851.4),
            waist_um: T::lit(45.3),
            cavity_length_mm: T::lit(1.16),
            finesse: T::lit(5.8e4),
            beat_cycle_um: T::lit(386.8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g0_max", self.g0_max),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("lambda_probe_nm", self.lambda_probe_nm),
            ("lambda_lock_nm", self.lambda_lock_nm),
            ("waist_um", self.waist_um),
            ("cavity_length_mm", self.cavity_length_mm),
            ("finesse", self.finesse),
            ("beat_cycle_um", self.beat_cycle_um),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(domain(format!("cavity.{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.finesse > T::one()) {
            return Err(domain(format!("cavity.finesse must exceed 1, got {}", self.finesse)));
        }
        if self.lambda_probe_nm == self.lambda_lock_nm {
            return Err(domain("probe and lock wavelengths must differ"));
        }
        Ok(())
    }

    pub fn cooperativity(&self) -> Result<T> {
        cooperativity(self.g0_max, self.kappa, self.gamma)
    }

    /// Coupling of an atom at `site`, in MHz.
    pub fn site_coupling(&self, site: &AtomSite<T>) -> Result<T> {
        site_coupling(self, site)
    }
}

impl<T: Real> Default for CavityParams<T> {
    fn default() -> Self {
        Self::paper_2024()
    }
}

/// Position of one trapped atom relative to the cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSite<T> {
    pub index: usize,
    /// Displacement along the cavity axis from the cavity center (μm).
    pub axial_x_um: T,
    /// Radial distance from the mode axis (μm), never negative.
    pub transverse_r_um: T,
}

impl<T: Real> AtomSite<T> {
    pub fn new(index: usize, axial_x_um: T, transverse_r_um: T) -> Result<Self> {
        if !(transverse_r_um >= T::zero()) {
            return Err(domain(format!(
                "transverse offset must be non-negative, got {transverse_r_um}"
            )));
        }
        Ok(Self {
            index,
            axial_x_um,
            transverse_r_um,
        })
    }
}

/// One-dimensional tweezer array geometry, centered on the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweezerParams<T> {
    pub n_traps: usize,
    pub spacing_um: T,
    pub trap_depth_mk: T,
    pub tweezer_waist_um: T,
    pub power_per_trap_mw: T,
}

impl<T: Real> TweezerParams<T> {
    pub fn paper_2024() -> Self {
        Self {
            n_traps: 40,
            spacing_um: T::lit(4.26),
            trap_depth_mk: T::lit(0.9),
            tweezer_waist_um: T::lit(1.6),
            power_per_trap_mw: T::lit(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traps == 0 {
            return Err(domain("tweezer.n_traps must be at least 1"));
        }
        for (name, v) in [
            ("spacing_um", self.spacing_um),
            ("trap_depth_mK", self.trap_depth_mk),
            ("waist_um", self.tweezer_waist_um),
            ("power_mW", self.power_per_trap_mw),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(domain(format!("tweezer.{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Distance between the outermost traps.
    pub fn extent_um(&self) -> T {
        T::of_usize(self.n_traps.saturating_sub(1)) * self.spacing_um
    }

    /// Axial position of trap `index`; the array is symmetric about x = 0.
    pub fn trap_position_um(&self, index: usize) -> T {
        let half = T::of_usize(self.n_traps - 1) / T::lit(2.0);
        (T::of_usize(index) - half) * self.spacing_um
    }

    pub fn trap_positions_um(&self) -> Vec<T> {
        (0..self.n_traps).map(|i| self.trap_position_um(i)).collect()
    }
}

impl<T: Real> Default for TweezerParams<T> {
    fn default() -> Self {
        Self::paper_2024()
    }
}

/// Single-atom cooperativity g²/(2κγ).
pub fn cooperativity<T: Real>(g0: T, kappa: T, gamma: T) -> Result<T> {
    if !(g0 > T::zero() && kappa > T::zero() && gamma > T::zero()) {
        return Err(domain(format!(
            "cooperativity needs positive rates, got g0={g0}, kappa={kappa}, gamma={gamma}"
        )));
    }
    Ok(g0 * g0 / (T::lit(2.0) * kappa * gamma))
}

/// Gaussian fall-off of the coupling with radial distance `r` from the mode axis.
pub fn transverse_coupling_factor<T: Real>(r_um: T, waist_um: T) -> Result<T> {
    if !(waist_um > T::zero()) {
        return Err(domain(format!("mode waist must be positive, got {waist_um}")));
    }
    if !(r_um >= T::zero()) {
        return Err(domain(format!("radial offset must be non-negative, got {r_um}")));
    }
    let u = r_um / waist_um;
    Ok((-u * u).exp())
}

/// Overlap between lattice node and cavity antinode at axial displacement `x`.
///
/// Unity at the cavity center, zero half a beat cycle away.
pub fn axial_coupling_factor<T: Real>(x_um: T, beat_cycle_um: T) -> Result<T> {
    if !(beat_cycle_um > T::zero()) {
        return Err(domain(format!("beat cycle must be positive, got {beat_cycle_um}")));
    }
    Ok((T::PI() * x_um / beat_cycle_um).cos().abs())
}

/// Displacement (μm) at which a lattice node of the lock light sits on a node of
/// the probe mode. The full beat cycle is twice this distance.
pub fn beat_decoupling_distance<T: Real>(lambda_lock_nm: T, lambda_probe_nm: T) -> Result<T> {
    if !(lambda_lock_nm > T::zero() && lambda_probe_nm > T::zero()) {
        return Err(domain("wavelengths must be positive"));
    }
    let diff = (lambda_probe_nm - lambda_lock_nm).abs();
    if diff == T::zero() {
        return Err(domain("beat length is undefined for equal wavelengths"));
    }
    let nm = lambda_lock_nm * lambda_probe_nm / (T::lit(4.0) * diff);
    Ok(nm / T::lit(1000.0))
}

pub fn site_coupling<T: Real>(params: &CavityParams<T>, site: &AtomSite<T>) -> Result<T> {
    let axial = axial_coupling_factor(site.axial_x_um, params.beat_cycle_um)?;
    let transverse = transverse_coupling_factor(site.transverse_r_um, params.waist_um)?;
    Ok(params.g0_max * axial * transverse)
}

/// Collective coupling √(Σ gᵢ²); an empty array gives zero.
pub fn effective_collective_coupling<T: Real>(g: &[T]) -> Result<T> {
    if let Some(bad) = g.iter().find(|&&x| !(x >= T::zero())) {
        return Err(domain(format!("couplings must be non-negative, got {bad}")));
    }
    Ok(g.iter().map(|&x| x * x).sum::<T>().sqrt())
}

/// Couplings of atoms held at `positions_um` on the mode axis, scaled so that an
/// atom at the cavity center couples with `g_center`.
///
/// `jitter_um` adds independent zero-mean Gaussian noise to both coordinates of
/// every atom (the radial coordinate is folded to |r|).
pub fn array_couplings<T: Real, R: Rng + ?Sized>(
    params: &CavityParams<T>,
    g_center: T,
    positions_um: &[T],
    jitter_um: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    if !(jitter_um >= T::zero()) {
        return Err(domain(format!("jitter must be non-negative, got {jitter_um}")));
    }
    let scaled = CavityParams {
        g0_max: g_center,
        ..*params
    };
    positions_um
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (dx, dr) = if jitter_um > T::zero() {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (T::lit(a) * jitter_um, T::lit(b) * jitter_um)
            } else {
                (T::zero(), T::zero())
            };
            let site = AtomSite::new(i, x + dx, dr.abs())?;
            site_coupling(&scaled, &site)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cooperativity_values() {
        let c: f64 = cooperativity(3.4, 2.6, 1.1).unwrap();
        assert_relative_eq!(c, 2.020979, epsilon = 1e-6);
        assert!((1.95..=2.05).contains(&c));
        assert_eq!(cooperativity(1.0, 0.5, 1.0).unwrap(), 1.0);
        assert_eq!(cooperativity(2.0, 1.0, 1.0).unwrap(), 2.0);
        assert!(cooperativity(0.0, 1.0, 1.0).is_err());
        assert!(cooperativity(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn transverse_factor_values() {
        assert_eq!(transverse_coupling_factor(0.0, 45.3).unwrap(), 1.0);
        assert_relative_eq!(
            transverse_coupling_factor(45.3, 45.3).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(transverse_coupling_factor(1.0, 45.3).unwrap(), 0.999513, epsilon = 1e-6);
        assert!(transverse_coupling_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn axial_factor_values() {
        assert_eq!(axial_coupling_factor(0.0, 386.8).unwrap(), 1.0);
        assert!(axial_coupling_factor(193.4, 386.8).unwrap() < 1e-15);
        assert_relative_eq!(axial_coupling_factor(56.0, 386.8).unwrap(), 0.898335, epsilon = 1e-6);
        assert!(axial_coupling_factor(0.0, 0.0).is_err());
    }

    #[test]
    fn beat_distance() {
        let d: f64 = beat_decoupling_distance(851.4, 852.347).unwrap();
        assert_relative_eq!(d, 191.5756, epsilon = 1e-3);
        assert!((2.0 * d - 383.2).abs() < 0.1);
        assert_relative_eq!(beat_decoupling_distance(800.0, 1600.0).unwrap(), 0.4, epsilon = 1e-12);
        assert!(beat_decoupling_distance(852.0, 852.0).is_err());
    }

    #[test]
    fn site_coupling_values() {
        let p = CavityParams::<f64>::paper_2024();
        let at = |x, r| p.site_coupling(&AtomSite::new(0, x, r).unwrap()).unwrap();
        assert_relative_eq!(at(0.0, 0.0), 3.4);
        assert!(at(193.4, 0.0) < 1e-14);
        assert_relative_eq!(at(0.0, 45.3), 1.250_790, epsilon = 1e-5);
        assert!(AtomSite::new(0, 0.0, -1.0).is_err());
    }

    #[test]
    fn collective_coupling_values() {
        let g = effective_collective_coupling(&[2.62f64; 3]).unwrap();
        assert_relative_eq!(g, 4.537973, epsilon = 1e-6);
        assert_eq!(effective_collective_coupling::<f64>(&[]).unwrap(), 0.0);
        assert_eq!(effective_collective_coupling(&[3.0f64, 4.0]).unwrap(), 5.0);
        assert!(effective_collective_coupling(&[1.0f64, -1.0]).is_err());
    }

    #[test]
    fn defaults_are_valid_and_extent_matches() {
        let c = CavityParams::<f64>::default();
        c.validate().unwrap();
        let t = TweezerParams::<f64>::default();
        t.validate().unwrap();
        assert!((t.extent_um() - 166.1).abs() < 0.05);
        assert_relative_eq!(t.trap_position_um(0), -t.trap_position_um(39), epsilon = 1e-12);

        let mut bad = c;
        bad.finesse = 0.5;
        assert!(bad.validate().is_err());
        bad = c;
        bad.lambda_lock_nm = bad.lambda_probe_nm;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn f32_paths_agree() {
        let c: f32 = cooperativity(3.4f32, 2.6, 1.1).unwrap();
        assert!((c - 2.02098).abs() < 1e-4);
        let a: f32 = axial_coupling_factor(56.0f32, 386.8).unwrap();
        assert!((a - 0.898335).abs() < 1e-5);
    }

    #[test]
    fn array_couplings_without_jitter_are_geometric() {
        let p = CavityParams::<f64>::default();
        let mut rng = rand::thread_rng();
        let g = array_couplings(&p, 2.62, &[0.0, 56.0, 193.4], 0.0, &mut rng).unwrap();
        assert_relative_eq!(g[0], 2.62);
        assert_relative_eq!(g[1], 2.62 * 0.898335, epsilon = 1e-5);
        assert!(g[2] < 1e-14);
    }

    proptest! {
        #[test]
        fn axial_factor_even_periodic_bounded(x in -2000.0f64..2000.0, k in -3i32..3) {
            let b = 386.8;
            let f = axial_coupling_factor(x, b).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - axial_coupling_factor(-x, b).unwrap()).abs() < 1e-12);
            let shifted = axial_coupling_factor(x + k as f64 * b, b).unwrap();
            prop_assert!((f - shifted).abs() < 1e-9);
        }

        #[test]
        fn transverse_factor_monotone(r in 0.0f64..200.0, dr in 0.0f64..50.0, w in 1.0f64..100.0) {
            let a = transverse_coupling_factor(r, w).unwrap();
            let b = transverse_coupling_factor(r + dr, w).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn uniform_collective_coupling_is_sqrt_n(g in 1e-3f64..10.0, n in 1usize..64) {
            let omega = effective_collective_coupling(&vec![g; n]).unwrap();
            prop_assert!((omega / (g * (n as f64).sqrt()) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn collective_coupling_permutation_and_append(
            mut g in proptest::collection::vec(0.0f64..5.0, 0..30),
            extra in 0.0f64..5.0,
        ) {
            let a = effective_collective_coupling(&g).unwrap();
            let mut rev = g.clone();
            rev.reverse();
            let b = effective_collective_coupling(&rev).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            g.push(extra);
            prop_assert!(effective_collective_coupling(&g).unwrap() >= a);
        }

        #[test]
        fn site_coupling_bounded_by_max(x in -1000.0f64..1000.0, r in 0.0f64..100.0) {
            let p = CavityParams::<f64>::default();
            let g = p.site_coupling(&AtomSite::new(0, x, r).unwrap()).unwrap();
            prop_assert!(g <= p.g0_max);
            if r > 1e-6 {
                prop_assert!(g < p.g0_max);
            }
        }
    }
}
