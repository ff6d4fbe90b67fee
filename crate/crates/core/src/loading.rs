//! Stochastic single-atom loading of the tweezer array and defect-free success
//! probabilities with and without rearrangement.
//!
//! Every trial draws from its own ChaCha stream keyed by `(master_seed, trial_id)`,
//! so campaign results do not depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::physics::TweezerParams;
use crate::rearrange::plan_rearrangement;
use crate::scalar::Real;

/// Which traps hold an atom after one loading cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyState {
    pub occupied: Vec<bool>,
    pub trial_id: u64,
}

impl OccupancyState {
    pub fn new(occupied: Vec<bool>, trial_id: u64) -> Self {
        Self { occupied, trial_id }
    }

    /// Builds a state of `n_traps` sites with the listed traps occupied.
    pub fn from_indices(n_traps: usize, indices: &[usize], trial_id: u64) -> Result<Self> {
        let mut occupied = vec![false; n_traps];
        for &i in indices {
            let slot = occupied
                .get_mut(i)
                .ok_or_else(|| domain(format!("trap {i} outside array of {n_traps}")))?;
            *slot = true;
        }
        Ok(Self { occupied, trial_id })
    }

    pub fn n_traps(&self) -> usize {
        self.occupied.len()
    }

    pub fn atom_count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn occupied_indices(&self) -> Vec<usize> {
        self.occupied
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// `1` for an occupied trap, `0` for an empty one, trap 0 first.
    pub fn bitstring(&self) -> String {
        self.occupied.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Imaging errors applied when reading out an occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadoutErrors<T> {
    /// Probability that an empty trap is reported as occupied.
    pub false_positive: T,
    /// Probability that an occupied trap is reported as empty.
    pub false_negative: T,
}

impl<T: Real> ReadoutErrors<T> {
    pub fn is_ideal(&self) -> bool {
        self.false_positive == T::zero() && self.false_negative == T::zero()
    }

    pub fn apply<R: Rng + ?Sized>(&self, truth: &OccupancyState, rng: &mut R) -> OccupancyState {
        if self.is_ideal() {
            return truth.clone();
        }
        let fp = self.false_positive.as_f64();
        let fneg = self.false_negative.as_f64();
        let occupied = truth
            .occupied
            .iter()
            .map(|&b| if b { !rng.gen_bool(fneg) } else { rng.gen_bool(fp) })
            .collect();
        OccupancyState::new(occupied, truth.trial_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadingConfig<T> {
    pub n_traps: usize,
    /// Per-trap loading probability.
    pub p: T,
    pub readout: ReadoutErrors<T>,
}

impl<T: Real> LoadingConfig<T> {
    pub fn paper_2024() -> Self {
        Self {
            n_traps: 40,
            p: T::lit(0.6),
            readout: ReadoutErrors::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traps == 0 {
            return Err(domain("loading needs at least one trap"));
        }
        check_probability("loading.p", self.p)?;
        check_probability("loading.false_positive", self.readout.false_positive)?;
        check_probability("loading.false_negative", self.readout.false_negative)?;
        Ok(())
    }
}

impl<T: Real> Default for LoadingConfig<T> {
    fn default() -> Self {
        Self::paper_2024()
    }
}

fn check_probability<T: Real>(name: &str, p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Histogram of loaded atom numbers over a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingStats {
    /// `histogram[k]` counts trials that loaded exactly `k` atoms; length `n_traps + 1`.
    pub histogram: Vec<u64>,
    pub n_trials: u64,
    pub mean: f64,
    /// Sample standard deviation of the atom number.
    pub std: f64,
}

impl LoadingStats {
    pub fn from_histogram(histogram: Vec<u64>) -> Self {
        let n_trials: u64 = histogram.iter().sum();
        let n = n_trials as f64;
        let mean = histogram
            .iter()
            .enumerate()
            .map(|(k, &c)| k as f64 * c as f64)
            .sum::<f64>()
            / n;
        let ss = histogram
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * (k as f64 - mean).powi(2))
            .sum::<f64>();
        let std = if n_trials > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        Self {
            histogram,
            n_trials,
            mean,
            std,
        }
    }
}

/// Independent random stream for one trial of a campaign.
pub fn trial_rng(master_seed: u64, trial_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_id);
    rng
}

/// Loads each of `n_traps` traps independently with probability `p`.
pub fn sample_occupancy<T: Real, R: Rng + ?Sized>(
    n_traps: usize,
    p: T,
    trial_id: u64,
    rng: &mut R,
) -> Result<OccupancyState> {
    check_probability("p", p)?;
    let p = p.as_f64();
    let occupied = (0..n_traps).map(|_| rng.gen_bool(p)).collect();
    Ok(OccupancyState::new(occupied, trial_id))
}

/// True and imaged occupancy of trial `trial_id`, plus the stream positioned after
/// both draws so callers can continue the trial deterministically.
pub fn simulate_trial<T: Real>(
    config: &LoadingConfig<T>,
    master_seed: u64,
    trial_id: u64,
) -> Result<(OccupancyState, OccupancyState, ChaCha8Rng)> {
    let mut rng = trial_rng(master_seed, trial_id);
    let truth = sample_occupancy(config.n_traps, config.p, trial_id, &mut rng)?;
    let seen = config.readout.apply(&truth, &mut rng);
    Ok((truth, seen, rng))
}

/// Imaged occupancies of trials `0..n_trials`, in trial order.
pub fn run_trials<T: Real>(
    config: &LoadingConfig<T>,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<OccupancyState>> {
    config.validate()?;
    (0..n_trials)
        .into_par_iter()
        .map(|id| simulate_trial(config, master_seed, id).map(|(_, seen, _)| seen))
        .collect()
}

/// Histogram of imaged atom numbers over `n_trials` loading cycles.
pub fn run_loading_campaign<T: Real>(
    config: &LoadingConfig<T>,
    n_trials: u64,
    master_seed: u64,
) -> Result<LoadingStats> {
    config.validate()?;
    if n_trials == 0 {
        return Err(domain("a campaign needs at least one trial"));
    }
    let bins = config.n_traps + 1;
    let histogram = (0..n_trials)
        .into_par_iter()
        .map(|id| simulate_trial(config, master_seed, id).map(|(_, seen, _)| seen.atom_count()))
        .try_fold(
            || vec![0u64; bins],
            |mut h, count| {
                h[count?] += 1;
                Ok::<_, Error>(h)
            },
        )
        .try_reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(LoadingStats::from_histogram(histogram))
}

/// Probability that a fixed block of `n` traps is fully loaded: pⁿ.
pub fn defect_free_probability<T: Real>(n: usize, p: T) -> Result<T> {
    check_probability("p", p)?;
    let exp = i32::try_from(n).map_err(|_| domain(format!("array length {n} too large")))?;
    Ok(p.powi(exp))
}

/// P(X ≥ k_min) for X ~ Binomial(n, p), summed in log space.
pub fn binomial_tail<T: Real>(n: usize, k_min: usize, p: T) -> Result<T> {
    check_probability("p", p)?;
    if k_min == 0 {
        return Ok(T::one());
    }
    if k_min > n {
        return Ok(T::zero());
    }
    if p == T::zero() {
        return Ok(T::zero());
    }
    if p == T::one() {
        return Ok(T::one());
    }
    let ln_p = p.ln();
    let ln_q = (T::one() - p).ln();
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(T::zero());
    for i in 1..=n {
        ln_fact.push(ln_fact[i - 1] + T::of_usize(i).ln());
    }
    let pmf = |k: usize| {
        let ln_choose = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
        (ln_choose + T::of_usize(k) * ln_p + T::of_usize(n - k) * ln_q).exp()
    };
    // Sum whichever side of the mean is the smaller tail.
    if T::of_usize(k_min) > T::of_usize(n) * p {
        Ok((k_min..=n).map(pmf).sum())
    } else {
        Ok((T::one() - (0..k_min).map(pmf).sum::<T>()).max(T::zero()))
    }
}

/// Probability that one loading cycle yields at least `n` atoms and all `n`
/// retained atoms survive the move-and-verify cycle.
pub fn rearranged_success_probability<T: Real>(
    n: usize,
    n_traps: usize,
    p: T,
    survival: T,
) -> Result<T> {
    if n > n_traps {
        return Err(domain(format!("cannot assemble {n} atoms from {n_traps} traps")));
    }
    check_probability("survival", survival)?;
    let exp = i32::try_from(n).map_err(|_| domain(format!("array length {n} too large")))?;
    Ok(binomial_tail(n_traps, n, p)? * survival.powi(exp))
}

/// Per-atom survival that makes the rearranged success probability at `n_ref`
/// equal `target`. Solved by bisection down to floating point resolution.
pub fn calibrate_survival<T: Real>(n_ref: usize, target: T, n_traps: usize, p: T) -> Result<T> {
    let tail = rearranged_success_probability(n_ref, n_traps, p, T::one())?;
    if !(target > T::zero() && target <= tail) {
        return Err(Error::Infeasible {
            target: target.as_f64(),
            max: tail.as_f64(),
        });
    }
    if target == tail {
        return Ok(T::one());
    }
    let f = |s: T| rearranged_success_probability(n_ref, n_traps, p, s);
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket end reproduces the target more closely.
    let (flo, fhi) = (f(lo)?, f(hi)?);
    Ok(if (target - flo).abs() <= (fhi - target).abs() { lo } else { hi })
}

/// Monte Carlo estimate of a success frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
}

impl McEstimate {
    fn new(successes: u64, trials: u64) -> Self {
        let f = successes as f64 / trials as f64;
        Self {
            successes,
            trials,
            frequency: f,
            std_error: (f * (1.0 - f) / trials as f64).sqrt(),
        }
    }
}

fn count_successes<F>(n_trials: u64, f: F) -> Result<McEstimate>
where
    F: Fn(u64) -> Result<bool> + Sync,
{
    if n_trials == 0 {
        return Err(domain("a campaign needs at least one trial"));
    }
    let successes = (0..n_trials)
        .into_par_iter()
        .map(|id| f(id).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(McEstimate::new(successes, n_trials))
}

/// Frequency with which the `len` traps starting at `first` are all loaded,
/// without any rearrangement.
pub fn mc_block_loaded<T: Real>(
    config: &LoadingConfig<T>,
    first: usize,
    len: usize,
    n_trials: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    config.validate()?;
    if first + len > config.n_traps {
        return Err(domain("block extends past the end of the array"));
    }
    count_successes(n_trials, |id| {
        let (truth, _, _) = simulate_trial(config, master_seed, id)?;
        Ok(truth.occupied[first..first + len].iter().all(|&b| b))
    })
}

/// Frequency of producing a defect-free `n`-atom block after rearrangement.
///
/// The imaged occupancy drives the planner; the trial succeeds when every source
/// trap of the plan truly held an atom and each retained atom survives with
/// probability `survival`. Too few imaged atoms counts as a failed cycle.
pub fn mc_rearranged_success<T: Real>(
    config: &LoadingConfig<T>,
    geometry: &TweezerParams<T>,
    n: usize,
    survival: T,
    n_trials: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    config.validate()?;
    check_probability("survival", survival)?;
    if geometry.n_traps != config.n_traps {
        return Err(domain("loading and tweezer trap counts differ"));
    }
    if n == 0 {
        return Err(domain("target array length must be at least 1"));
    }
    let s = survival.as_f64();
    count_successes(n_trials, |id| {
        let (truth, seen, mut rng) = simulate_trial(config, master_seed, id)?;
        let plan = match plan_rearrangement(&seen, n, geometry) {
            Ok(plan) => plan,
            Err(Error::InsufficientAtoms { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        let mut ok = true;
        for m in &plan.moves {
            // Draw for every move so the stream position is independent of outcome.
            let survived = rng.gen_bool(s);
            ok &= truth.occupied[m.source] && survived;
        }
        Ok(ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    /// Exact binomial tail over rationals.
    fn exact_tail(n: u32, k_min: u32, p_num: i64, p_den: i64) -> f64 {
        let p = BigRational::new(BigInt::from(p_num), BigInt::from(p_den));
        let q = BigRational::from_integer(BigInt::from(1)) - p.clone();
        let mut total = BigRational::from_integer(BigInt::from(0));
        for k in k_min..=n {
            let mut c = BigInt::from(1);
            for i in 0..k {
                c = c * BigInt::from(n - i) / BigInt::from(i + 1);
            }
            total += BigRational::from_integer(c) * num_traits::pow(p.clone(), k as usize)
                * num_traits::pow(q.clone(), (n - k) as usize);
        }
        let num: f64 = total.numer().to_string().parse().unwrap();
        let den: f64 = total.denom().to_string().parse().unwrap();
        num / den
    }

    #[test]
    fn sampling_extremes() {
        let mut rng = trial_rng(1, 0);
        assert_eq!(sample_occupancy(40, 0.0f64, 0, &mut rng).unwrap().atom_count(), 0);
        assert_eq!(sample_occupancy(40, 1.0f64, 0, &mut rng).unwrap().atom_count(), 40);
        assert!(sample_occupancy(40, 1.5f64, 0, &mut rng).is_err());
        assert!(sample_occupancy(40, -0.1f64, 0, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let a = sample_occupancy(40, 0.6f64, 7, &mut trial_rng(11, 7)).unwrap();
        let b = sample_occupancy(40, 0.6f64, 7, &mut trial_rng(11, 7)).unwrap();
        let c = sample_occupancy(40, 0.6f64, 8, &mut trial_rng(11, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.occupied, c.occupied);
    }

    #[test]
    fn defect_free_values() {
        assert_relative_eq!(defect_free_probability(20, 0.6f64).unwrap(), 3.656158e-5, max_relative = 1e-6);
        assert_eq!(defect_free_probability(0, 0.3f64).unwrap(), 1.0);
        assert_eq!(defect_free_probability(1, 0.6f64).unwrap(), 0.6);
    }

    #[test]
    fn tail_matches_exact_rational_sum() {
        for (n, k) in [(40, 20), (40, 1), (40, 40), (40, 24), (10, 3)] {
            let exact = exact_tail(n, k, 3, 5);
            let got = binomial_tail(n as usize, k as usize, 0.6f64).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-12);
        }
        assert_relative_eq!(exact_tail(40, 20, 3, 5), 0.925_648_443_243_086, max_relative = 1e-12);
    }

    #[test]
    fn rearranged_values() {
        assert_relative_eq!(
            rearranged_success_probability(20, 40, 0.6f64, 1.0).unwrap(),
            0.925_648_443,
            max_relative = 1e-8
        );
        assert_eq!(rearranged_success_probability(0, 40, 0.6f64, 0.3).unwrap(), 1.0);
        assert!(rearranged_success_probability(41, 40, 0.6f64, 1.0).is_err());
    }

    #[test]
    fn calibration_against_closed_form() {
        let s = calibrate_survival(20, 0.38f64, 40, 0.6).unwrap();
        let closed = (0.38f64 / 0.925_648_443_243_086).powf(1.0 / 20.0);
        assert_relative_eq!(s, closed, max_relative = 1e-9);
        assert_relative_eq!(s, 0.95646, epsilon = 1e-5);

        let tail = binomial_tail(40, 20, 0.6f64).unwrap();
        assert_eq!(calibrate_survival(20, tail, 40, 0.6).unwrap(), 1.0);

        let tiny = calibrate_survival(20, 1e-9f64, 40, 0.6).unwrap();
        let back = rearranged_success_probability(20, 40, 0.6, tiny).unwrap();
        assert_relative_eq!(back, 1e-9, max_relative = 1e-9);

        assert!(matches!(
            calibrate_survival(20, 0.99f64, 40, 0.6),
            Err(Error::Infeasible { .. })
        ));
        assert!(calibrate_survival(20, 0.0f64, 40, 0.6).is_err());
    }

    #[test]
    fn campaign_extremes_and_reproducibility() {
        let mut cfg = LoadingConfig::<f64>::default();
        cfg.p = 1.0;
        let s = run_loading_campaign(&cfg, 50, 3).unwrap();
        assert_eq!(s.histogram[40], 50);
        assert_eq!(s.mean, 40.0);
        assert_eq!(s.std, 0.0);

        cfg.p = 0.6;
        let a = run_loading_campaign(&cfg, 890, 42).unwrap();
        let b = run_loading_campaign(&cfg, 890, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.histogram.iter().sum::<u64>(), 890);
        let sigma = (40.0f64 * 0.6 * 0.4).sqrt() / 890f64.sqrt();
        assert!((a.mean - 24.0).abs() < 3.0 * sigma, "mean {}", a.mean);

        let trials = run_trials(&cfg, 890, 42).unwrap();
        let mut h = vec![0u64; 41];
        trials.iter().for_each(|t| h[t.atom_count()] += 1);
        assert_eq!(h, a.histogram);
        assert!(run_loading_campaign(&cfg, 0, 1).is_err());
    }

    #[test]
    fn campaign_is_independent_of_thread_count() {
        let cfg = LoadingConfig::<f64>::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_loading_campaign(&cfg, 5000, 9).unwrap());
        let b = four.install(|| run_loading_campaign(&cfg, 5000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn readout_errors_change_images_only() {
        let cfg = LoadingConfig {
            readout: ReadoutErrors {
                false_positive: 0.0,
                false_negative: 1.0,
            },
            ..LoadingConfig::<f64>::default()
        };
        let (truth, seen, _) = simulate_trial(&cfg, 5, 0).unwrap();
        assert!(truth.atom_count() > 0);
        assert_eq!(seen.atom_count(), 0);
    }

    #[test]
    fn histogram_matches_binomial_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let cfg = LoadingConfig::<f64>::default();
        let n_trials = 100_000u64;
        let stats = run_loading_campaign(&cfg, n_trials, 2024).unwrap();
        // merge sparse tail bins so every expected count is at least 5
        let expected: Vec<f64> = (0..=40)
            .map(|k| {
                let pk = binomial_tail(40, k, 0.6f64).unwrap() - binomial_tail(40, k + 1, 0.6f64).unwrap();
                pk * n_trials as f64
            })
            .collect();
        let mut bins: Vec<(f64, f64)> = Vec::new();
        let (mut e_acc, mut o_acc) = (0.0, 0.0);
        for k in 0..=40 {
            e_acc += expected[k];
            o_acc += stats.histogram[k] as f64;
            if e_acc >= 5.0 {
                bins.push((o_acc, e_acc));
                e_acc = 0.0;
                o_acc = 0.0;
            }
        }
        if let Some(last) = bins.last_mut() {
            last.0 += o_acc;
            last.1 += e_acc;
        }
        let chi2: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
        let dof = (bins.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "chi2 {chi2} vs critical {critical} (dof {dof})");
    }

    #[test]
    fn block_frequency_converges_to_power_law() {
        let cfg = LoadingConfig::<f64>::default();
        let est = mc_block_loaded(&cfg, 0, 5, 1_000_000, 77).unwrap();
        let analytic = 0.6f64.powi(5);
        assert!((est.frequency / analytic - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn rearranged_mc_matches_analytic() {
        let cfg = LoadingConfig::<f64>::default();
        let geo = TweezerParams::<f64>::default();
        let s = 0.95;
        for n in [10, 20, 26] {
            let est = mc_rearranged_success(&cfg, &geo, n, s, 20_000, 5).unwrap();
            let exact = rearranged_success_probability(n, 40, 0.6, s).unwrap();
            assert!(
                (est.frequency - exact).abs() < 4.0 * est.std_error.max(1e-4),
                "n={n}: mc {} vs exact {exact}",
                est.frequency
            );
        }
    }

    proptest! {
        #[test]
        fn rearranged_monotonicity(n in 0usize..40, p in 0.0f64..1.0, s in 0.0f64..1.0, dp in 0.0f64..0.2, ds in 0.0f64..0.2) {
            let base = rearranged_success_probability(n, 40, p, s).unwrap();
            let next_n = rearranged_success_probability(n + 1, 40, p, s).unwrap();
            // monotone up to summation rounding
            let tol = 1e-13 * base.max(1e-300);
            prop_assert!(next_n <= base + tol);
            let more_p = rearranged_success_probability(n, 40, (p + dp).min(1.0), s).unwrap();
            prop_assert!(more_p >= base - tol);
            let more_s = rearranged_success_probability(n, 40, p, (s + ds).min(1.0)).unwrap();
            prop_assert!(more_s >= base - tol);
        }

        #[test]
        fn rearrangement_never_hurts(n in 0usize..=40, p in 0.01f64..0.99) {
            let with = rearranged_success_probability(n, 40, p, 1.0).unwrap();
            let without = defect_free_probability(n, p).unwrap();
            prop_assert!(with >= without * (1.0 - 1e-12));
            if n > 1 && n < 40 {
                prop_assert!(with > without);
            }
        }

        #[test]
        fn calibration_round_trip(n in 1usize..=40, frac in 1e-6f64..1.0) {
            let tail = binomial_tail(40, n, 0.6f64).unwrap();
            let target = tail * frac;
            let s = calibrate_survival(n, target, 40, 0.6).unwrap();
            let back = rearranged_success_probability(n, 40, 0.6, s).unwrap();
            prop_assert!((back / target - 1.0).abs() < 1e-9);
        }
    }
}
