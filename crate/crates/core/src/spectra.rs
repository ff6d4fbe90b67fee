//! Steady-state cavity transmission of N atoms and synthetic vacuum Rabi
//! splitting spectra.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Parameters of the transmission lineshape. All rates in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams<T> {
    /// Collective coupling Ω_N.
    pub omega_eff: T,
    /// Cavity–atom detuning Δ_ca.
    pub delta_ca: T,
    pub kappa: T,
    pub gamma: T,
    pub amplitude_scale: T,
}

impl<T: Real> SpectrumParams<T> {
    pub fn new(omega_eff: T, delta_ca: T, kappa: T, gamma: T) -> Self {
        Self {
            omega_eff,
            delta_ca,
            kappa,
            gamma,
            amplitude_scale: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_eff >= T::zero()) {
            return Err(domain(format!("omega_eff must be non-negative, got {}", self.omega_eff)));
        }
        if !(self.kappa > T::zero() && self.gamma > T::zero()) {
            return Err(domain("kappa and gamma must be positive"));
        }
        if !(self.amplitude_scale > T::zero()) {
            return Err(domain("amplitude_scale must be positive"));
        }
        if !self.delta_ca.is_finite() {
            return Err(domain("delta_ca must be finite"));
        }
        Ok(())
    }
}

struct Parts<T> {
    num: T,
    re: T,
    im: T,
}

fn parts<T: Real>(delta_pa: T, p: &SpectrumParams<T>) -> Parts<T> {
    let (k, g, d, dc, om) = (p.kappa, p.gamma, delta_pa, p.delta_ca, p.omega_eff);
    Parts {
        num: k * k * (g * g + d * d),
        re: om * om - d * d + dc * d + g * k,
        im: k * d + g * d - g * dc,
    }
}

/// Probe transmission at probe–atom detuning `delta_pa`:
///
/// ```text
///            κ²(γ² + Δpa²)
/// T = s · ─────────────────────────────────────────────────────
///         (Ω² − Δpa² + Δca·Δpa + γκ)² + (κΔpa + γΔpa − γΔca)²
/// ```
pub fn transmission<T: Real>(delta_pa: T, params: &SpectrumParams<T>) -> T {
    let Parts { num, re, im } = parts(delta_pa, params);
    params.amplitude_scale * num / (re * re + im * im)
}

/// Analytic gradient of [`transmission`] with respect to (Ω, Δca, scale).
pub fn transmission_gradient<T: Real>(delta_pa: T, params: &SpectrumParams<T>) -> [T; 3] {
    let Parts { num, re, im } = parts(delta_pa, params);
    let two = T::lit(2.0);
    let den = re * re + im * im;
    let outer = -params.amplitude_scale * num / (den * den);
    let d_omega = outer * two * re * two * params.omega_eff;
    let d_delta_ca = outer * (two * re * delta_pa - two * im * params.gamma);
    [d_omega, d_delta_ca, num / den]
}

/// Bare-cavity Lorentzian κ²/(κ² + Δ²).
pub fn empty_cavity_lorentzian<T: Real>(delta_pa: T, kappa: T) -> Result<T> {
    if !(kappa > T::zero()) {
        return Err(domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(kappa * kappa / (kappa * kappa + delta_pa * delta_pa))
}

/// Transmission samples on a detuning grid with per-point noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub detuning: Vec<T>,
    pub transmission: Vec<T>,
    pub sigma: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow<T> {
    #[serde(rename = "detuning_MHz")]
    detuning: T,
    transmission: T,
    sigma: T,
}

impl<T: Real> Spectrum<T> {
    pub fn new(detuning: Vec<T>, transmission: Vec<T>, sigma: Vec<T>) -> Result<Self> {
        let s = Self {
            detuning,
            transmission,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.detuning.len();
        if self.transmission.len() != n || self.sigma.len() != n {
            return Err(Error::Input("spectrum columns have different lengths".into()));
        }
        if !is_monotone(&self.detuning) {
            return Err(Error::Input("detuning grid must be strictly monotone".into()));
        }
        if self.transmission.iter().any(|&t| !(t >= T::zero())) {
            return Err(Error::Input("transmission values must be non-negative".into()));
        }
        if self.sigma.iter().any(|&s| !(s >= T::zero())) {
            return Err(Error::Input("sigma values must be non-negative".into()));
        }
        Ok(())
    }

    /// CSV with columns `detuning_MHz,transmission,sigma`. Values use the
    /// shortest representation that parses back to the same float.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["detuning_MHz", "transmission", "sigma"])?;
        for i in 0..self.len() {
            w.write_record([
                self.detuning[i].to_string(),
                self.transmission[i].to_string(),
                self.sigma[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut s = Self {
            detuning: Vec::new(),
            transmission: Vec::new(),
            sigma: Vec::new(),
        };
        for row in reader.deserialize::<SpectrumRow<T>>() {
            let row = row?;
            s.detuning.push(row.detuning);
            s.transmission.push(row.transmission);
            s.sigma.push(row.sigma);
        }
        s.validate()?;
        Ok(s)
    }
}

fn is_monotone<T: Real>(x: &[T]) -> bool {
    x.windows(2).all(|w| w[0] < w[1]) || x.windows(2).all(|w| w[0] > w[1])
}

/// `points` evenly spaced detunings from `lo` to `hi` inclusive.
pub fn linear_grid<T: Real>(lo: T, hi: T, points: usize) -> Result<Vec<T>> {
    if points < 2 || !(hi > lo) {
        return Err(domain("grid needs hi > lo and at least two points"));
    }
    let step = (hi - lo) / T::of_usize(points - 1);
    Ok((0..points).map(|i| lo + step * T::of_usize(i)).collect())
}

/// ±25 MHz in 201 points.
pub fn default_grid<T: Real>() -> Vec<T> {
    linear_grid(T::lit(-25.0), T::lit(25.0), 201).expect("static grid is valid")
}

/// Model curve plus additive Gaussian noise of width `noise_sigma`, clamped at zero.
pub fn synthesize_spectrum<T: Real, R: Rng + ?Sized>(
    grid: &[T],
    params: &SpectrumParams<T>,
    noise_sigma: T,
    rng: &mut R,
) -> Result<Spectrum<T>> {
    params.validate()?;
    if !(noise_sigma >= T::zero()) {
        return Err(domain(format!("noise sigma must be non-negative, got {noise_sigma}")));
    }
    if !is_monotone(grid) {
        return Err(domain("detuning grid must be strictly monotone"));
    }
    let transmission = grid
        .iter()
        .map(|&d| {
            let clean = transmission(d, params);
            if noise_sigma > T::zero() {
                let z: f64 = rng.sample(StandardNormal);
                (clean + noise_sigma * T::lit(z)).max(T::zero())
            } else {
                clean
            }
        })
        .collect();
    Ok(Spectrum {
        detuning: grid.to_vec(),
        transmission,
        sigma: vec![noise_sigma; grid.len()],
    })
}

/// Local maxima of the noiseless curve as (detuning, transmission), highest first.
pub fn transmission_peaks<T: Real>(params: &SpectrumParams<T>) -> Result<Vec<(T, T)>> {
    params.validate()?;
    let half_span = T::lit(2.0)
        * (params.omega_eff + params.delta_ca.abs() + params.kappa + params.gamma)
        + T::lit(5.0);
    let points = 20_001;
    let grid = linear_grid(-half_span, half_span, points)?;
    let h = grid[1] - grid[0];
    let values: Vec<T> = grid.iter().map(|&d| transmission(d, params)).collect();
    let mut peaks: Vec<(T, T)> = (1..points - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| refine_max(|d| transmission(d, params), grid[i] - h, grid[i] + h))
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(peaks)
}

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
fn refine_max<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> (T, T) {
    let ratio = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= T::epsilon() * (T::one() + lo.abs().max(hi.abs())) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        }
    }
    let x = (lo + hi) / T::lit(2.0);
    (x, f(x))
}

/// Separation of the two transmission maxima (MHz).
pub fn expected_splitting<T: Real>(params: &SpectrumParams<T>) -> Result<T> {
    let peaks = transmission_peaks(params)?;
    match peaks.as_slice() {
        [a, b, ..] => Ok((a.0 - b.0).abs()),
        _ => Err(Error::Unresolved),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loading::trial_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(omega: f64, delta_ca: f64) -> SpectrumParams<f64> {
        SpectrumParams::new(omega, delta_ca, 2.6, 1.1)
    }

    #[test]
    fn resonance_values() {
        assert_relative_eq!(transmission(0.0, &params(0.0, 0.0)), 1.0, epsilon = 1e-15);
        let t0 = transmission(0.0, &params(4.6, 0.0));
        assert_relative_eq!(t0, (2.86f64 / 24.02).powi(2), max_relative = 1e-12);
        assert_relative_eq!(t0, 0.014_177_056_172_3, max_relative = 1e-8);
    }

    #[test]
    fn lorentzian_values() {
        assert_eq!(empty_cavity_lorentzian(0.0, 2.6).unwrap(), 1.0);
        assert_relative_eq!(empty_cavity_lorentzian(2.6, 2.6).unwrap(), 0.5);
        assert_relative_eq!(empty_cavity_lorentzian(5.2, 2.6).unwrap(), 0.2, epsilon = 1e-15);
        assert!(empty_cavity_lorentzian(1.0, 0.0).is_err());
    }

    #[test]
    fn reduces_to_lorentzian_without_atoms() {
        let grid = linear_grid(-50.0, 50.0, 2001).unwrap();
        let p = params(0.0, 0.0);
        for d in grid {
            let diff = (transmission(d, &p) - empty_cavity_lorentzian(d, 2.6).unwrap()).abs();
            assert!(diff < 1e-12, "at {d}: {diff}");
        }
    }

    #[test]
    fn splitting_values() {
        // The lineshape maxima sit slightly outside ±Ω because of the γ² + Δ² numerator.
        let s = expected_splitting(&params(4.6, 0.0)).unwrap();
        assert!(s > 9.2 && s < 9.2 * 1.07, "{s}");
        assert_relative_eq!(s, 9.7344, epsilon = 1e-3);
        let s = expected_splitting(&params(13.36, 0.0)).unwrap();
        assert!((s / 26.72 - 1.0).abs() < 0.02, "{s}");
        assert!(matches!(expected_splitting(&params(0.0, 0.0)), Err(Error::Unresolved)));
    }

    #[test]
    fn splitting_matches_dense_grid_oracle() {
        let p = params(13.36, 0.0);
        let grid = linear_grid(-40.0, 40.0, 800_001).unwrap();
        let v: Vec<f64> = grid.iter().map(|&d| transmission(d, &p)).collect();
        let right = (400_001..800_000).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        let left = (0..400_000).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        let oracle = grid[right] - grid[left];
        assert_relative_eq!(expected_splitting(&p).unwrap(), oracle, epsilon = 2e-4);
    }

    #[test]
    fn noiseless_synthesis_is_model_curve() {
        let grid = default_grid::<f64>();
        let p = params(4.6, 0.2);
        let s = synthesize_spectrum(&grid, &p, 0.0, &mut trial_rng(0, 0)).unwrap();
        for (d, t) in s.detuning.iter().zip(&s.transmission) {
            assert_eq!(*t, transmission(*d, &p));
        }
    }

    #[test]
    fn synthesized_peaks_for_26_atoms() {
        let grid = default_grid::<f64>();
        let omega = 2.62 * 26f64.sqrt();
        let s = synthesize_spectrum(&grid, &params(omega, 0.0), 0.0, &mut trial_rng(0, 0)).unwrap();
        let step = grid[1] - grid[0];
        let mid = grid.len() / 2;
        let argmax = |r: std::ops::Range<usize>| r.max_by(|&a, &b| s.transmission[a].total_cmp(&s.transmission[b])).unwrap();
        let sep = grid[argmax(mid..grid.len())] - grid[argmax(0..mid)];
        // grid maxima bracket the continuous maxima, which lie just outside ±Ω
        let exact = expected_splitting(&params(omega, 0.0)).unwrap();
        assert!((sep - exact).abs() <= step, "separation {sep} vs {exact}");
        assert!((sep / (2.0 * omega) - 1.0).abs() < 0.015, "separation {sep}");
    }

    #[test]
    fn seeded_synthesis_is_reproducible() {
        let grid = default_grid::<f64>();
        let p = params(4.6, 0.1);
        let a = synthesize_spectrum(&grid, &p, 0.02, &mut trial_rng(9, 1)).unwrap();
        let b = synthesize_spectrum(&grid, &p, 0.02, &mut trial_rng(9, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.transmission.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let grid = default_grid::<f64>();
        let s = synthesize_spectrum(&grid, &params(7.1, 0.3), 0.02, &mut trial_rng(4, 2)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(std::str::from_utf8(&buf).unwrap().starts_with("detuning_MHz,transmission,sigma\n"));
        let back = Spectrum::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0], vec![0.0, 0.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![-1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(synthesize_spectrum(&[1.0, 0.0, 2.0], &params(1.0, 0.0), 0.0, &mut trial_rng(0, 0)).is_err());
        let mut p = params(1.0, 0.0);
        p.kappa = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = SpectrumParams { amplitude_scale: 0.9, ..params(6.0, 0.3) };
        for d in [-9.0, -6.1, -1.0, 0.0, 0.7, 5.9, 12.0] {
            let g = transmission_gradient(d, &p);
            let h = 1e-6;
            let fd = |f: &dyn Fn(f64) -> SpectrumParams<f64>| {
                (transmission(d, &f(h)) - transmission(d, &f(-h))) / (2.0 * h)
            };
            let d_om = fd(&|e| SpectrumParams { omega_eff: p.omega_eff + e, ..p });
            let d_dc = fd(&|e| SpectrumParams { delta_ca: p.delta_ca + e, ..p });
            let d_s = fd(&|e| SpectrumParams { amplitude_scale: p.amplitude_scale + e, ..p });
            assert_relative_eq!(g[0], d_om, epsilon = 1e-7, max_relative = 1e-5);
            assert_relative_eq!(g[1], d_dc, epsilon = 1e-7, max_relative = 1e-5);
            assert_relative_eq!(g[2], d_s, epsilon = 1e-7, max_relative = 1e-5);
        }
    }

    proptest! {
        #[test]
        fn symmetric_without_detuning(d in -50.0f64..50.0, om in 0.0f64..20.0) {
            let p = params(om, 0.0);
            prop_assert!((transmission(d, &p) - transmission(-d, &p)).abs() < 1e-12);
        }

        #[test]
        fn bounded_by_one(d in -50.0f64..50.0, om in 0.0f64..20.0, dc in -2.0f64..2.0,
                          k in 0.1f64..10.0, g in 0.1f64..10.0) {
            let t = transmission(d, &SpectrumParams::new(om, dc, k, g));
            prop_assert!(t > 0.0 && t <= 1.0 + 1e-12);
        }

        #[test]
        fn resonance_suppression(om in 0.0f64..20.0) {
            let (k, g) = (2.6, 1.1);
            let expected = (g * k / (om * om + g * k)).powi(2);
            prop_assert!((transmission(0.0, &params(om, 0.0)) - expected).abs() < 1e-14);
        }

        #[test]
        fn peak_asymmetry_follows_detuning_sign(om in 4.0f64..15.0, dc in 0.05f64..0.6) {
            let heights = |dc: f64| {
                let mut peaks = transmission_peaks(&params(om, dc)).unwrap();
                peaks.truncate(2);
                peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
                peaks[1].1 - peaks[0].1
            };
            let pos = heights(dc);
            let neg = heights(-dc);
            prop_assert!(pos.abs() > 1e-9);
            prop_assert!(pos.signum() == -neg.signum());
        }
    }
}
