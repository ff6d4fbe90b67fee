//! Recovering (Ω_N, Δ_ca, scale) from transmission spectra and the √N
//! collective-coupling regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectra::{transmission, Spectrum, SpectrumParams};

/// Per-parameter 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties<T> {
    pub omega_eff: T,
    pub delta_ca: T,
    pub amplitude_scale: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub omega_eff: T,
    pub delta_ca: T,
    pub amplitude_scale: T,
    /// √χ² of the weighted residuals at the returned parameters.
    pub residual_norm: T,
    pub reduced_chi_square: T,
    pub uncertainties: Uncertainties<T>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> FitResult<T> {
    pub fn params(&self, kappa: T, gamma: T) -> SpectrumParams<T> {
        SpectrumParams {
            omega_eff: self.omega_eff,
            delta_ca: self.delta_ca,
            kappa,
            gamma,
            amplitude_scale: self.amplitude_scale,
        }
    }
}

/// Stopping rules of the damped least-squares iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub max_iterations: usize,
    /// Relative parameter step below which the fit is converged.
    pub step_tolerance: T,
    /// Gradient norm of χ²/2 below which the fit is converged.
    pub gradient_tolerance: T,
    pub initial_damping: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: T::lit(1e-8).max(T::epsilon() * T::lit(16.0)),
            gradient_tolerance: T::lit(1e-10),
            initial_damping: T::lit(1e-3),
        }
    }
}

const MIN_POINTS: usize = 5;

/// Seeds a fit from the two highest well-separated maxima of the data.
///
/// The dressed-state peaks of the lineshape sit at (Δca ± √(Δca² + 4Ω²))/2, so
/// half their separation estimates Ω and their sum estimates Δca.
pub fn initial_guess<T: Real>(spectrum: &Spectrum<T>, kappa: T, gamma: T) -> Result<SpectrumParams<T>> {
    spectrum.validate()?;
    let n = spectrum.len();
    if n < MIN_POINTS {
        return Err(Error::Input(format!("need at least {MIN_POINTS} points, got {n}")));
    }
    let (x, y) = ordered(spectrum);
    let smooth: Vec<T> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            y[lo..=hi].iter().copied().sum::<T>() / T::of_usize(hi - lo + 1)
        })
        .collect();
    let scale0 = y.iter().copied().fold(T::zero(), T::max);

    let mut maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| smooth[b].partial_cmp(&smooth[a]).unwrap_or(std::cmp::Ordering::Equal));

    let single = SpectrumParams {
        omega_eff: T::zero(),
        delta_ca: T::zero(),
        kappa,
        gamma,
        amplitude_scale: scale0.max(T::epsilon()),
    };
    let Some(&first) = maxima.first() else {
        return Ok(single);
    };
    // The partner peak must be separated from the first by a real dip.
    let second = maxima.iter().skip(1).copied().find(|&j| {
        let (lo, hi) = (first.min(j), first.max(j));
        let dip = smooth[lo..=hi].iter().copied().fold(T::infinity(), T::min);
        dip < T::lit(0.5) * smooth[j]
    });
    let Some(second) = second else {
        return Ok(single);
    };
    let (left, right) = (x[first.min(second)], x[first.max(second)]);
    Ok(SpectrumParams {
        omega_eff: (right - left) / T::lit(2.0),
        delta_ca: left + right,
        kappa,
        gamma,
        amplitude_scale: scale0.max(T::epsilon()),
    })
}

/// Detuning and data sorted by ascending detuning.
fn ordered<T: Real>(s: &Spectrum<T>) -> (Vec<T>, Vec<T>) {
    if s.detuning.first() <= s.detuning.last() {
        (s.detuning.clone(), s.transmission.clone())
    } else {
        (
            s.detuning.iter().rev().copied().collect(),
            s.transmission.iter().rev().copied().collect(),
        )
    }
}

fn pack<T: Real>(p: &SpectrumParams<T>) -> [T; 3] {
    [p.omega_eff, p.delta_ca, p.amplitude_scale]
}

fn unpack<T: Real>(v: [T; 3], kappa: T, gamma: T) -> SpectrumParams<T> {
    SpectrumParams {
        omega_eff: v[0],
        delta_ca: v[1],
        kappa,
        gamma,
        amplitude_scale: v[2],
    }
}

/// Central-difference Jacobian of the model with respect to (Ω, Δca, scale),
/// one row per detuning.
pub fn numeric_jacobian<T: Real>(detuning: &[T], params: &SpectrumParams<T>) -> Vec<[T; 3]> {
    let base = pack(params);
    let h_rel = T::epsilon().cbrt();
    let steps: [T; 3] = std::array::from_fn(|j| h_rel * base[j].abs().max(T::one()));
    detuning
        .iter()
        .map(|&d| {
            std::array::from_fn(|j| {
                let mut up = base;
                let mut down = base;
                up[j] = up[j] + steps[j];
                down[j] = down[j] - steps[j];
                let pu = unpack(up, params.kappa, params.gamma);
                let pd = unpack(down, params.kappa, params.gamma);
                (transmission(d, &pu) - transmission(d, &pd)) / (steps[j] + steps[j])
            })
        })
        .collect()
}

struct Problem<'a, T> {
    x: &'a [T],
    y: &'a [T],
    weight: Vec<T>,
    kappa: T,
    gamma: T,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(s: &'a Spectrum<T>, kappa: T, gamma: T) -> Self {
        // Fall back to unit weights when any sigma is missing (zero).
        let weight = if s.sigma.iter().all(|&v| v > T::zero()) {
            s.sigma.iter().map(|&v| T::one() / v).collect()
        } else {
            vec![T::one(); s.len()]
        };
        Self {
            x: &s.detuning,
            y: &s.transmission,
            weight,
            kappa,
            gamma,
        }
    }

    fn residuals(&self, v: [T; 3]) -> Vec<T> {
        let p = unpack(v, self.kappa, self.gamma);
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.weight)
            .map(|((&d, &y), &w)| (transmission(d, &p) - y) * w)
            .collect()
    }

    fn chi_square(&self, v: [T; 3]) -> T {
        self.residuals(v).iter().map(|&r| r * r).sum()
    }

    /// Normal matrix JᵀJ and gradient Jᵀr of the weighted problem.
    fn normal_equations(&self, v: [T; 3], r: &[T]) -> ([[T; 3]; 3], [T; 3]) {
        let jac = numeric_jacobian(self.x, &unpack(v, self.kappa, self.gamma));
        let mut a = [[T::zero(); 3]; 3];
        let mut g = [T::zero(); 3];
        for ((row, &w), &ri) in jac.iter().zip(&self.weight).zip(r) {
            for i in 0..3 {
                let ji = row[i] * w;
                g[i] = g[i] + ji * ri;
                for k in 0..3 {
                    a[i][k] = a[i][k] + ji * row[k] * w;
                }
            }
        }
        (a, g)
    }
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[pivot][col].abs() > T::min_positive_value()) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Diagonal of the inverse of `a`, or infinities for the parameters it cannot constrain.
fn inverse_diagonal<T: Real>(a: [[T; 3]; 3]) -> [T; 3] {
    std::array::from_fn(|j| {
        let mut e = [T::zero(); 3];
        e[j] = T::one();
        solve3(a, e).map_or(T::infinity(), |col| col[j])
    })
}

/// Fits Ω, Δca and the amplitude scale with κ and γ held fixed.
///
/// Damped Gauss–Newton with Marquardt diagonal scaling: the damping grows ×10 on
/// a rejected step and shrinks ÷10 on an accepted one. Ω is kept non-negative by
/// reflection (the lineshape depends on Ω² only). A fit that runs out of
/// iterations returns its last accepted parameters with `converged = false`.
pub fn fit_spectrum<T: Real>(
    spectrum: &Spectrum<T>,
    kappa: T,
    gamma: T,
    init: Option<SpectrumParams<T>>,
) -> Result<FitResult<T>> {
    fit_spectrum_with(spectrum, kappa, gamma, init, &FitOptions::default())
}

pub fn fit_spectrum_with<T: Real>(
    spectrum: &Spectrum<T>,
    kappa: T,
    gamma: T,
    init: Option<SpectrumParams<T>>,
    options: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let start = match init {
        Some(p) => SpectrumParams { kappa, gamma, ..p },
        None => initial_guess(spectrum, kappa, gamma)?,
    };
    start.validate()?;
    spectrum.validate()?;
    if spectrum.len() < MIN_POINTS {
        return Err(Error::Input(format!("need at least {MIN_POINTS} points")));
    }

    let problem = Problem::new(spectrum, kappa, gamma);
    let ten = T::lit(10.0);
    let mut v = pack(&start);
    let mut r = problem.residuals(v);
    let mut chi2: T = r.iter().map(|&x| x * x).sum();
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let (a, g) = problem.normal_equations(v, &r);
        let gnorm = g.iter().map(|&x| x * x).sum::<T>().sqrt();
        if gnorm < options.gradient_tolerance {
            converged = true;
            break;
        }
        let diag_floor = T::lit(1e-12) * a[0][0].max(a[1][1]).max(a[2][2]).max(T::min_positive_value());
        let mut stepped = false;
        while lambda < T::lit(1e16) {
            let mut damped = a;
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] = row[j] + lambda * a[j][j].max(diag_floor);
            }
            let Some(delta) = solve3(damped, [-g[0], -g[1], -g[2]]) else {
                lambda = lambda * ten;
                continue;
            };
            let mut trial = [v[0] + delta[0], v[1] + delta[1], v[2] + delta[2]];
            trial[0] = trial[0].abs();
            let small_step = (0..3).all(|j| {
                delta[j].abs() <= options.step_tolerance * (v[j].abs() + options.step_tolerance)
            });
            let trial_chi2 = if trial[2] > T::zero() {
                problem.chi_square(trial)
            } else {
                T::infinity()
            };
            if trial_chi2 < chi2 {
                v = trial;
                r = problem.residuals(v);
                chi2 = trial_chi2;
                lambda = (lambda / ten).max(T::lit(1e-12));
                stepped = true;
                converged = small_step;
                break;
            }
            if small_step {
                // No representable improvement left along the damped direction.
                converged = true;
                break;
            }
            lambda = lambda * ten;
        }
        if converged || !stepped {
            break;
        }
    }

    let (a, _) = problem.normal_equations(v, &r);
    let dof = spectrum.len().saturating_sub(3).max(1);
    let reduced = chi2 / T::of_usize(dof);
    let inv = inverse_diagonal(a);
    let sd = |j: usize| (inv[j] * reduced).sqrt();
    Ok(FitResult {
        omega_eff: v[0],
        delta_ca: v[1],
        amplitude_scale: v[2],
        residual_norm: chi2.sqrt(),
        reduced_chi_square: reduced,
        uncertainties: Uncertainties {
            omega_eff: sd(0),
            delta_ca: sd(1),
            amplitude_scale: sd(2),
        },
        converged,
        iterations,
    })
}

/// Weighted χ² of `params` against the data, as minimized by [`fit_spectrum`].
pub fn chi_square<T: Real>(spectrum: &Spectrum<T>, params: &SpectrumParams<T>) -> T {
    Problem::new(spectrum, params.kappa, params.gamma).chi_square(pack(params))
}

/// Fits many spectra in parallel; results keep the keys and order of the input.
pub fn fit_batch<T: Real>(
    spectra: &[(usize, Spectrum<T>)],
    kappa: T,
    gamma: T,
) -> Result<Vec<(usize, FitResult<T>)>> {
    spectra
        .par_iter()
        .map(|(n, s)| fit_spectrum(s, kappa, gamma, None).map(|f| (*n, f)))
        .collect()
}

/// Single-atom coupling implied by each collective coupling, g = Ω_N/√N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homogeneity<T> {
    pub mean_g: T,
    /// max |g_N / mean − 1|.
    pub max_rel_dev: T,
    pub per_n_g: Vec<T>,
}

/// Least-squares fit of Ω_N = g√N together with the homogeneity of g_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    /// (N, Ω_N) sorted by N.
    pub pairs: Vec<(usize, T)>,
    pub g0_hat: T,
    /// 1σ of `g0_hat` from the regression residuals.
    pub g0_sigma: T,
    pub per_n_g: Vec<T>,
    pub mean_g: T,
    pub max_rel_dev: T,
}

impl<T: Real> ScalingFit<T> {
    /// Rows of (N, Ω_N, Ω_N/√N, g0_hat·√N).
    pub fn rows(&self) -> Vec<(usize, T, T, T)> {
        self.pairs
            .iter()
            .zip(&self.per_n_g)
            .map(|(&(n, om), &g)| (n, om, g, self.g0_hat * T::of_usize(n).sqrt()))
            .collect()
    }

    /// CSV with columns `N,omega_N,g_per_N,model_g_sqrtN`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "omega_N", "g_per_N", "model_g_sqrtN"])?;
        for (n, om, g, model) in self.rows() {
            w.write_record([n.to_string(), om.to_string(), g.to_string(), model.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sorted_pairs<T: Real>(pairs: &[(usize, T)]) -> Result<Vec<(usize, T)>> {
    if pairs.len() < 2 {
        return Err(Error::Input(format!("need at least two (N, Ω_N) pairs, got {}", pairs.len())));
    }
    if let Some(bad) = pairs.iter().find(|(n, om)| *n == 0 || !(*om > T::zero())) {
        return Err(Error::Input(format!("invalid pair (N={}, Ω={})", bad.0, bad.1)));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(sorted)
}

pub fn homogeneity_stats<T: Real>(pairs: &[(usize, T)]) -> Result<Homogeneity<T>> {
    let pairs = sorted_pairs(pairs)?;
    Ok(homogeneity_of_sorted(&pairs))
}

fn homogeneity_of_sorted<T: Real>(pairs: &[(usize, T)]) -> Homogeneity<T> {
    let per_n_g: Vec<T> = pairs.iter().map(|&(n, om)| om / T::of_usize(n).sqrt()).collect();
    let mean_g = per_n_g.iter().copied().sum::<T>() / T::of_usize(per_n_g.len());
    let max_rel_dev = per_n_g
        .iter()
        .fold(T::zero(), |acc, &g| acc.max((g / mean_g - T::one()).abs()));
    Homogeneity {
        mean_g,
        max_rel_dev,
        per_n_g,
    }
}

/// g0_hat = Σ Ω_N √N / Σ N, the least-squares slope of Ω against √N.
pub fn sqrt_scaling_fit<T: Real>(pairs: &[(usize, T)]) -> Result<ScalingFit<T>> {
    let pairs = sorted_pairs(pairs)?;
    let sum_n: T = pairs.iter().map(|&(n, _)| T::of_usize(n)).sum();
    let cross: T = pairs.iter().map(|&(n, om)| om * T::of_usize(n).sqrt()).sum();
    let g0_hat = cross / sum_n;
    let ss: T = pairs
        .iter()
        .map(|&(n, om)| (om - g0_hat * T::of_usize(n).sqrt()).powi(2))
        .sum();
    let g0_sigma = (ss / T::of_usize(pairs.len() - 1) / sum_n).sqrt();
    let h = homogeneity_of_sorted(&pairs);
    Ok(ScalingFit {
        pairs,
        g0_hat,
        g0_sigma,
        per_n_g: h.per_n_g,
        mean_g: h.mean_g,
        max_rel_dev: h.max_rel_dev,
    })
}
