//! Defect-free rearrangement: choosing which loaded tweezers move where, the
//! RF tone sweeps that move them, and the static multi-tone waveform settings.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::loading::OccupancyState;
use crate::physics::TweezerParams;
use crate::scalar::Real;

/// Default duration of the adiabatic RF sweep (μs).
pub const DEFAULT_SWEEP_US: f64 = 800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub source: usize,
    pub target: usize,
}

/// Which traps move where, and which are switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovePlan<T> {
    /// Sorted by source; order preserving, so also sorted by target.
    pub moves: Vec<Move>,
    pub switch_off: BTreeSet<usize>,
    #[serde(rename = "duration_us")]
    pub sweep_duration_us: T,
    pub target_positions_um: Vec<T>,
}

impl<T: Real> MovePlan<T> {
    pub fn n_atoms(&self) -> usize {
        self.moves.len()
    }

    pub fn with_duration(mut self, duration_us: T) -> Self {
        self.sweep_duration_us = duration_us;
        self
    }

    /// Checks distinctness, order preservation, and contiguity of targets.
    pub fn validate(&self, occupancy: Option<&OccupancyState>) -> Result<()> {
        for w in self.moves.windows(2) {
            if !(w[0].source < w[1].source && w[0].target < w[1].target) {
                return Err(domain(format!("moves {:?} and {:?} are not order preserving", w[0], w[1])));
            }
            if w[1].target != w[0].target + 1 {
                return Err(domain("targets do not form a contiguous block"));
            }
        }
        if let Some(occ) = occupancy {
            for m in &self.moves {
                if !occ.occupied.get(m.source).copied().unwrap_or(false) {
                    return Err(domain(format!("source trap {} is empty", m.source)));
                }
            }
        }
        if self.moves.iter().any(|m| self.switch_off.contains(&m.source)) {
            return Err(domain("a retained trap is also switched off"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// First trap of the `n`-site block whose center is nearest the cavity center;
/// ties go to the block on the negative-x side.
pub fn target_block_start(n_traps: usize, n: usize) -> Result<usize> {
    if n == 0 || n > n_traps {
        return Err(domain(format!("cannot place {n} atoms in {n_traps} traps")));
    }
    // Block center offset in half-sites is |2s + n - n_traps|; minimizing it
    // gives s = floor((n_traps - n) / 2).
    Ok((n_traps - n) / 2)
}

/// Plans the rearrangement that keeps `n_target` loaded atoms with the least total
/// displacement into the central block, switching every other trap off.
pub fn plan_rearrangement<T: Real>(
    occupancy: &OccupancyState,
    n_target: usize,
    geometry: &TweezerParams<T>,
) -> Result<MovePlan<T>> {
    if n_target == 0 {
        return Err(domain("target array length must be at least 1"));
    }
    if occupancy.n_traps() != geometry.n_traps {
        return Err(domain(format!(
            "occupancy has {} traps but geometry has {}",
            occupancy.n_traps(),
            geometry.n_traps
        )));
    }
    let sources = occupancy.occupied_indices();
    if sources.len() < n_target {
        return Err(Error::InsufficientAtoms {
            loaded: sources.len(),
            required: n_target,
        });
    }
    let start = target_block_start(geometry.n_traps, n_target)?;
    let chosen = min_displacement_subset(&sources, start, n_target);

    let moves: Vec<Move> = chosen
        .iter()
        .enumerate()
        .map(|(j, &source)| Move {
            source,
            target: start + j,
        })
        .collect();
    let kept: BTreeSet<usize> = chosen.iter().copied().collect();
    let switch_off = (0..geometry.n_traps).filter(|i| !kept.contains(i)).collect();
    let target_positions_um = (start..start + n_target)
        .map(|i| geometry.trap_position_um(i))
        .collect();
    Ok(MovePlan {
        moves,
        switch_off,
        sweep_duration_us: T::lit(DEFAULT_SWEEP_US),
        target_positions_um,
    })
}

/// Chooses `n` of the sorted `sources` to fill targets `start..start+n` in order,
/// minimizing Σ|source − target| in sites.
///
/// `cost[i][j]` is the best cost using the first `i` sources for the first `j`
/// targets; each source is either skipped or matched to the next target.
fn min_displacement_subset(sources: &[usize], start: usize, n: usize) -> Vec<usize> {
    let m = sources.len();
    const INF: usize = usize::MAX / 2;
    let mut cost = vec![vec![INF; n + 1]; m + 1];
    for row in cost.iter_mut() {
        row[0] = 0;
    }
    for i in 1..=m {
        for j in 1..=n.min(i) {
            let skip = cost[i - 1][j];
            let take = cost[i - 1][j - 1] + sources[i - 1].abs_diff(start + j - 1);
            cost[i][j] = skip.min(take);
        }
    }
    let mut chosen = Vec::with_capacity(n);
    let (mut i, mut j) = (m, n);
    while j > 0 {
        let take = cost[i - 1][j - 1] + sources[i - 1].abs_diff(start + j - 1);
        if cost[i][j] == take {
            chosen.push(sources[i - 1]);
            j -= 1;
        }
        i -= 1;
    }
    chosen.reverse();
    chosen
}

/// Σ |source position − target position| over all moves (μm).
pub fn total_displacement<T: Real>(plan: &MovePlan<T>, geometry: &TweezerParams<T>) -> T {
    plan.moves
        .iter()
        .map(|m| (geometry.trap_position_um(m.source) - geometry.trap_position_um(m.target)).abs())
        .sum()
}

/// Linear map from tweezer position to AOD drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AodCalibration<T> {
    pub mhz_per_um: T,
    /// Drive frequency of a tweezer at x = 0.
    pub center_mhz: T,
}

impl<T: Real> AodCalibration<T> {
    pub fn frequency_mhz(&self, x_um: T) -> T {
        self.center_mhz + self.mhz_per_um * x_um
    }
}

impl<T: Real> Default for AodCalibration<T> {
    /// One MHz per 4.26 μm site around a 100 MHz center.
    fn default() -> Self {
        Self {
            mhz_per_um: T::one() / T::lit(4.26),
            center_mhz: T::lit(100.0),
        }
    }
}

/// Minimum-jerk profile 10τ³ − 15τ⁴ + 6τ⁵ on τ ∈ [0, 1].
pub fn min_jerk<T: Real>(tau: T) -> T {
    let t = tau.max(T::zero()).min(T::one());
    t * t * t * (T::lit(10.0) + t * (T::lit(-15.0) + T::lit(6.0) * t))
}

/// d/dτ of [`min_jerk`]: 30τ² − 60τ³ + 30τ⁴.
pub fn min_jerk_rate<T: Real>(tau: T) -> T {
    let t = tau.max(T::zero()).min(T::one());
    T::lit(30.0) * t * t * (T::one() - t) * (T::one() - t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneTrack<T> {
    pub source: usize,
    pub target: usize,
    pub amplitude: T,
    pub phase_rad: T,
    pub start_mhz: T,
    pub end_mhz: T,
    /// Frequency at each schedule time.
    pub freqs_mhz: Vec<T>,
}

impl<T: Real> ToneTrack<T> {
    /// Frequency at an arbitrary time `t` within the sweep.
    pub fn frequency_at(&self, t_us: T, duration_us: T) -> T {
        self.start_mhz + (self.end_mhz - self.start_mhz) * min_jerk(t_us / duration_us)
    }

    /// Sweep rate df/dt (MHz/μs) at time `t`.
    pub fn rate_at(&self, t_us: T, duration_us: T) -> T {
        (self.end_mhz - self.start_mhz) * min_jerk_rate(t_us / duration_us) / duration_us
    }
}

/// Sampled frequency trajectories of every retained tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSchedule<T> {
    pub duration_us: T,
    pub times_us: Vec<T>,
    /// Ordered by source trap, hence by frequency at every instant.
    pub tones: Vec<ToneTrack<T>>,
}

impl<T: Real> ToneSchedule<T> {
    /// Fails on the first sample at which neighbouring tones are not strictly ordered.
    pub fn check_no_crossing(&self) -> Result<()> {
        for (k, _) in self.times_us.iter().enumerate() {
            for (i, pair) in self.tones.windows(2).enumerate() {
                if !(pair[0].freqs_mhz[k] < pair[1].freqs_mhz[k]) {
                    return Err(Error::Crossing {
                        lower: i,
                        upper: i + 1,
                        sample: k,
                    });
                }
            }
        }
        Ok(())
    }

    /// CSV with columns `time_us,tone_index,freq_MHz,amplitude,phase_rad`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_us", "tone_index", "freq_MHz", "amplitude", "phase_rad"])?;
        for (k, t) in self.times_us.iter().enumerate() {
            for (i, tone) in self.tones.iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    tone.freqs_mhz[k].to_string(),
                    tone.amplitude.to_string(),
                    tone.phase_rad.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples the minimum-jerk frequency sweep of every move at `sample_rate_msps`
/// (samples per μs), including both endpoints.
///
/// `amplitudes` and `phases` are per retained tone; `None` means unit amplitude
/// and zero phase.
pub fn synthesize_tone_sweeps<T: Real>(
    plan: &MovePlan<T>,
    geometry: &TweezerParams<T>,
    duration_us: T,
    sample_rate_msps: T,
    aod: &AodCalibration<T>,
    amplitudes: Option<&[T]>,
    phases: Option<&[T]>,
) -> Result<ToneSchedule<T>> {
    if !(duration_us > T::zero()) {
        return Err(domain(format!("sweep duration must be positive, got {duration_us}")));
    }
    if !(sample_rate_msps > T::zero()) {
        return Err(domain(format!("sample rate must be positive, got {sample_rate_msps}")));
    }
    plan.validate(None)?;
    let n = plan.moves.len();
    for (name, v) in [("amplitudes", amplitudes), ("phases", phases)] {
        if v.is_some_and(|v| v.len() != n) {
            return Err(domain(format!("{name} must have one entry per move ({n})")));
        }
    }

    let steps = (duration_us * sample_rate_msps)
        .floor()
        .to_usize()
        .ok_or_else(|| domain("sample count overflow"))?;
    let dt = T::one() / sample_rate_msps;
    let mut times_us: Vec<T> = (0..=steps).map(|k| T::of_usize(k) * dt).collect();
    if times_us.last().is_some_and(|&t| t < duration_us) {
        times_us.push(duration_us);
    }

    let tones = plan
        .moves
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let start_mhz = aod.frequency_mhz(geometry.trap_position_um(m.source));
            let end_mhz = aod.frequency_mhz(geometry.trap_position_um(m.target));
            let mut track = ToneTrack {
                source: m.source,
                target: m.target,
                amplitude: amplitudes.map_or(T::one(), |a| a[i]),
                phase_rad: phases.map_or(T::zero(), |p| p[i]),
                start_mhz,
                end_mhz,
                freqs_mhz: Vec::new(),
            };
            track.freqs_mhz = times_us
                .iter()
                .map(|&t| track.frequency_at(t, duration_us))
                .collect();
            track
        })
        .collect();

    let schedule = ToneSchedule {
        duration_us,
        times_us,
        tones,
    };
    schedule.check_no_crossing()?;
    Ok(schedule)
}

/// Multi-tone waveform Σₖ aₖ cos(2πk t + φₖ), k = 1..n, sampled on one period.
struct MultiTone<T> {
    cos_t: Vec<T>,
    sin_t: Vec<T>,
    amplitudes: Vec<T>,
}

impl<T: Real> MultiTone<T> {
    fn new(amplitudes: &[T], samples: usize) -> Self {
        let tau = T::lit(std::f64::consts::TAU);
        let m = T::of_usize(samples);
        let angle = |j: usize| tau * T::of_usize(j) / m;
        Self {
            cos_t: (0..samples).map(|j| angle(j).cos()).collect(),
            sin_t: (0..samples).map(|j| angle(j).sin()).collect(),
            amplitudes: amplitudes.to_vec(),
        }
    }

    fn samples(&self) -> usize {
        self.cos_t.len()
    }

    fn eval(&self, phases: &[T]) -> Vec<T> {
        let m = self.samples();
        let mut out = vec![T::zero(); m];
        for (k, (&a, &phi)) in self.amplitudes.iter().zip(phases).enumerate() {
            let (ca, sa) = (a * phi.cos(), a * phi.sin());
            let h = k + 1;
            for (j, v) in out.iter_mut().enumerate() {
                let idx = (h * j) % m;
                *v = *v + ca * self.cos_t[idx] - sa * self.sin_t[idx];
            }
        }
        out
    }

    fn crest(&self, phases: &[T]) -> T {
        crest_of(&self.eval(phases))
    }

    /// Lp norm of the normalized waveform and its gradient in the phases.
    fn lp_and_grad(&self, phases: &[T], p: i32) -> (T, Vec<T>) {
        let s = self.eval(phases);
        let m = self.samples();
        let rms = rms_of(&s);
        let mean_p = s.iter().map(|&v| (v / rms).powi(p)).sum::<T>() / T::of_usize(m);
        let norm = mean_p.powf(T::one() / T::from_i32(p).unwrap());
        // d norm / d s_j = norm^(1-p) s_j^(p-1) / (M rms^p); rms is phase independent.
        let scale = norm.powi(1 - p) / (T::of_usize(m) * rms);
        let w: Vec<T> = s.iter().map(|&v| (v / rms).powi(p - 1) * scale).collect();
        let grad = self
            .amplitudes
            .iter()
            .zip(phases)
            .enumerate()
            .map(|(k, (&a, &phi))| {
                let (c, sn) = (phi.cos(), phi.sin());
                let h = k + 1;
                let acc: T = w
                    .iter()
                    .enumerate()
                    .map(|(j, &wj)| {
                        let idx = (h * j) % m;
                        wj * (self.sin_t[idx] * c + self.cos_t[idx] * sn)
                    })
                    .sum();
                -a * acc
            })
            .collect();
        (norm, grad)
    }
}

fn rms_of<T: Real>(s: &[T]) -> T {
    (s.iter().map(|&v| v * v).sum::<T>() / T::of_usize(s.len())).sqrt()
}

fn crest_of<T: Real>(s: &[T]) -> T {
    let peak = s.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    peak / rms_of(s)
}

/// Samples per fundamental period used when scoring a multi-tone waveform:
/// 64 per period of the highest tone.
pub fn crest_grid_size(n_tones: usize) -> usize {
    64 * n_tones.max(1)
}

/// Peak-to-RMS ratio of Σₖ aₖ cos(2πk t + φₖ) evaluated on `samples` points of one period.
pub fn crest_factor<T: Real>(amplitudes: &[T], phases: &[T], samples: usize) -> T {
    MultiTone::new(amplitudes, samples).crest(phases)
}

/// Quadratic phases φₖ = −2π Σ_{l<k} (k − l) pₗ with pₗ the power share of tone l.
pub fn quadratic_phases<T: Real>(amplitudes: &[T]) -> Vec<T> {
    let total: T = amplitudes.iter().map(|&a| a * a).sum();
    let tau = T::lit(std::f64::consts::TAU);
    (0..amplitudes.len())
        .map(|k| {
            let acc: T = (0..k)
                .map(|l| T::of_usize(k - l) * amplitudes[l] * amplitudes[l] / total)
                .sum();
            -(tau * acc)
        })
        .collect()
}

/// Phases that keep the peak of the summed equally spaced tones low.
///
/// Starts from quadratic phases and descends on an Lp norm of the waveform with
/// increasing p; a step is only kept if it lowers the sampled crest factor.
pub fn optimize_tone_phases<T: Real>(amplitudes: &[T]) -> Result<Vec<T>> {
    let n = amplitudes.len();
    if n == 0 {
        return Err(domain("need at least one tone"));
    }
    if amplitudes.iter().any(|&a| !(a >= T::zero())) || amplitudes.iter().all(|&a| a == T::zero()) {
        return Err(domain("amplitudes must be non-negative and not all zero"));
    }
    if n == 1 {
        return Ok(vec![T::zero()]);
    }
    let wave = MultiTone::new(amplitudes, crest_grid_size(n));
    let mut best = quadratic_phases(amplitudes);
    let mut best_crest = wave.crest(&best);

    let mut phases = best.clone();
    for p in [8, 16, 32, 64] {
        let mut step = T::lit(0.5);
        let (mut f, mut g) = wave.lp_and_grad(&phases, p);
        for _ in 0..150 {
            let gnorm = g.iter().map(|&x| x * x).sum::<T>().sqrt();
            if gnorm < T::lit(1e-12) {
                break;
            }
            // Armijo backtracking along the normalized gradient.
            let mut accepted = false;
            while step > T::lit(1e-6) {
                let trial: Vec<T> = phases
                    .iter()
                    .zip(&g)
                    .map(|(&ph, &gk)| ph - step * gk / gnorm)
                    .collect();
                let (ft, gt) = wave.lp_and_grad(&trial, p);
                if ft < f - T::lit(1e-4) * step * gnorm {
                    phases = trial;
                    f = ft;
                    g = gt;
                    accepted = true;
                    step = (step * T::lit(1.5)).min(T::one());
                    break;
                }
                step = step / T::lit(2.0);
            }
            if !accepted {
                break;
            }
            let c = wave.crest(&phases);
            if c < best_crest {
                best_crest = c;
                best = phases.clone();
            }
        }
        phases = best.clone();
    }
    Ok(best)
}

/// Maps per-tone amplitudes to per-trap intensities.
pub trait IntensityModel<T> {
    fn intensities(&self, amplitudes: &[T]) -> Vec<T>;
}

impl<T, F> IntensityModel<T> for F
where
    F: Fn(&[T]) -> Vec<T>,
{
    fn intensities(&self, amplitudes: &[T]) -> Vec<T> {
        self(amplitudes)
    }
}

/// Iₖ = gₖ (aₖ + c(aₖ₋₁ + aₖ₊₁))²: per-channel gain with nearest-neighbour
/// amplitude leakage `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledGainModel<T> {
    pub gains: Vec<T>,
    pub crosstalk: T,
}

impl<T: Real> IntensityModel<T> for CoupledGainModel<T> {
    fn intensities(&self, a: &[T]) -> Vec<T> {
        let n = a.len();
        (0..n)
            .map(|k| {
                let left = if k > 0 { a[k - 1] } else { T::zero() };
                let right = if k + 1 < n { a[k + 1] } else { T::zero() };
                let field = a[k] + self.crosstalk * (left + right);
                self.gains[k] * field * field
            })
            .collect()
    }
}

/// max |Iₖ/Ī − 1|.
pub fn intensity_spread<T: Real>(intensities: &[T]) -> T {
    let mean = intensities.iter().copied().sum::<T>() / T::of_usize(intensities.len());
    intensities
        .iter()
        .fold(T::zero(), |acc, &i| acc.max((i / mean - T::one()).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedAmplitudes<T> {
    pub amplitudes: Vec<T>,
    pub iterations: usize,
    pub spread: T,
    /// Spread before each update, then the final spread.
    pub history: Vec<T>,
}

pub const BALANCE_MAX_ITERATIONS: usize = 100;
const BALANCE_GAIN: f64 = 0.5;

/// Proportional amplitude feedback aₖ ← aₖ (Ī/Iₖ)^½ until the intensity spread
/// drops below `target_uniformity`.
pub fn balance_amplitudes<T: Real, M: IntensityModel<T> + ?Sized>(
    target_uniformity: T,
    model: &M,
    initial: &[T],
) -> Result<BalancedAmplitudes<T>> {
    if initial.is_empty() {
        return Err(domain("need at least one channel"));
    }
    if !(target_uniformity > T::zero()) {
        return Err(domain("target uniformity must be positive"));
    }
    let eta = T::lit(BALANCE_GAIN);
    let mut a = initial.to_vec();
    let mut history = Vec::new();
    for iteration in 0..=BALANCE_MAX_ITERATIONS {
        let intensities = model.intensities(&a);
        let spread = intensity_spread(&intensities);
        history.push(spread);
        if spread < target_uniformity {
            return Ok(BalancedAmplitudes {
                amplitudes: a,
                iterations: iteration,
                spread,
                history,
            });
        }
        if iteration == BALANCE_MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations: iteration,
                spread: spread.as_f64(),
            });
        }
        let mean = intensities.iter().copied().sum::<T>() / T::of_usize(intensities.len());
        for (ak, &ik) in a.iter_mut().zip(&intensities) {
            // A dark channel cannot be corrected by feedback.
            if ik > T::zero() {
                *ak = *ak * (mean / ik).powf(eta);
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}
