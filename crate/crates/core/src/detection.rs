//! Excitation and detection probabilities under Poisson photon arrivals.
//!
//! Two independent routes are provided. The analytic route conditions on the
//! number of arrivals `N`, averages the renewal dynamic program over sorted
//! uniform arrival times and mixes over `N ~ Poisson(λT_c)`. The oracle route
//! is an event-driven simulation of one detection cycle with explicit
//! exponential transition and decay clocks.
//!
//! Within a capture window only a detector sitting idle in ground can start a
//! transition: photons that arrive while a transition is in flight, or while
//! the qubit is excited, are lost.

use rand::Rng;
use rayon::prelude::*;

use crate::capture::{excitation_poisson_exact, Level};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{bernoulli, exp_time, parallel_mean, parallel_moments, sorted_uniforms, Estimate, StreamKey};
use crate::params::{CycleTiming, DeviceParams};
use crate::physics::{detection_prob_single, excited_prob, ground_return_prob};
use crate::quadrature::{integrate, QuadConfig};
use crate::report::{Record, Value};
use crate::scalar::{clamp_unit, Real};

/// Photon arrival instants inside one capture window `[0, t_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTrace<T = f64> {
    times: Vec<T>,
    t_c: T,
}

impl<T: Real> ArrivalTrace<T> {
    pub fn new(times: Vec<T>, t_c: T) -> Result<Self> {
        if !(t_c > T::zero()) || !t_c.is_finite() {
            return Err(invalid("t_c", format!("capture window must be positive, got {t_c}")));
        }
        if let Some(bad) = times.iter().find(|&&t| !(t >= T::zero() && t <= t_c)) {
            return Err(Error::InvalidTrace(format!("arrival {bad} outside [0, {t_c}]")));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTrace("arrival times must be nondecreasing".into()));
        }
        Ok(Self { times, t_c })
    }

    pub fn empty(t_c: T) -> Result<Self> {
        Self::new(Vec::new(), t_c)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn t_c(&self) -> T {
        self.t_c
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Renewal weights: `w[j]` is the probability that photon `j` starts a
/// transition. The first photon always does.
fn renewal_weights<T: Real>(times: &[T], dev: &DeviceParams<T>, w: &mut Vec<T>) {
    w.clear();
    if times.is_empty() {
        return;
    }
    w.push(T::one());
    // returned[i] holds f_b(t_{j-1} - t_i) on entry to step j
    let mut returned: Vec<T> = Vec::with_capacity(times.len());
    returned.push(T::zero());
    for j in 1..times.len() {
        let mut s = T::zero();
        for i in 0..j {
            let returned_by_now = ground_return_prob(times[j] - times[i], dev);
            if w[i] != T::zero() {
                s = s + w[i] * (returned_by_now - returned[i]).max(T::zero());
            }
            returned[i] = returned_by_now;
        }
        w.push(clamp_unit(s));
        returned.push(T::zero());
    }
}

pub(crate) fn excitation_from_times<T: Real>(times: &[T], t_c: T, dev: &DeviceParams<T>, w: &mut Vec<T>) -> T {
    renewal_weights(times, dev, w);
    let total = times
        .iter()
        .zip(w.iter())
        .fold(T::zero(), |acc, (&t, &wj)| acc + wj * excited_prob(t_c - t, dev));
    clamp_unit(total)
}

/// Probability of being excited at `T_c` given the arrival instants.
///
/// Sums over every admissible set of transition-starting photons. The sum is
/// evaluated in `O(N²)`: the probability that photon `j` starts a transition
/// is accumulated from every earlier transition photon `i` through the factor
/// `f_b(t_j − t_i) − f_b(t_{j−1} − t_i)`, and the excitation contribution of
/// a last transition at `t_j` is `f₂(T_c − t_j)`.
pub fn excitation_given_arrivals<T: Real>(trace: &ArrivalTrace<T>, dev: &DeviceParams<T>) -> T {
    let mut w = Vec::with_capacity(trace.len());
    excitation_from_times(&trace.times, trace.t_c, dev, &mut w)
}

/// Excitation probability at `T_c` given exactly `n` arrivals, uniform on the
/// window. Exact for `n ≤ 1`; Monte Carlo over sorted uniforms otherwise.
pub fn excitation_given_count(n: usize, t_c: f64, dev: &DeviceParams, mc_samples: u64, key: StreamKey) -> Estimate {
    match n {
        0 => Estimate::exact(0.0),
        1 => {
            let r = integrate(|u| excited_prob(u, dev), 0.0, t_c, &QuadConfig::tight());
            Estimate::exact(r.value / t_c)
        }
        _ => parallel_mean(key, mc_samples.max(2), |rng| {
            let mut times = Vec::with_capacity(n);
            let mut w = Vec::with_capacity(n);
            sorted_uniforms(rng, n, t_c, &mut times);
            excitation_from_times(&times, t_c, dev, &mut w)
        }),
    }
}

fn ln_poisson_pmf(n: usize, mean: f64, ln_fact: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + n as f64 * mean.ln() - ln_fact
}

/// Smallest `N` with `P(X > N) < eps` for `X ~ Poisson(mean)`.
///
/// A Chernoff bound gives a safe upper index; the exact tail is then summed
/// downward from there.
pub fn poisson_truncation(mean: f64, eps: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let eps = eps.clamp(f64::MIN_POSITIVE, 0.5);
    // P(X ≥ μ + x) ≤ exp(−x² / (2(μ + x)))
    let mut hi = mean.ceil() as usize;
    loop {
        let x = hi as f64 + 1.0 - mean;
        if x > 0.0 && -x * x / (2.0 * (mean + x)) < (eps * 1e-3).ln() {
            break;
        }
        hi += 1 + hi / 64;
    }
    let mut ln_fact = vec![0.0; hi + 1];
    for n in 1..=hi {
        ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
    }
    let mut tail = eps * 1e-3;
    let mut n = hi;
    while n > 0 {
        let next = tail + ln_poisson_pmf(n, mean, ln_fact[n]).exp();
        if next >= eps {
            break;
        }
        tail = next;
        n -= 1;
    }
    n
}

/// Poisson weights `P(N = n)` for `n = 0..=n_max`.
pub fn poisson_pmf_table(mean: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut ln_fact = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        out.push(ln_poisson_pmf(n, mean, ln_fact).exp());
    }
    out
}

/// Accuracy controls for the conditional-on-count mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureConfig {
    /// Poisson tail mass left out of the sum.
    pub eps_trunc: f64,
    /// Sorted-uniform samples per photon count `N ≥ 2`.
    pub mc_samples: u64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            eps_trunc: 1e-12,
            mc_samples: 100_000,
        }
    }
}

/// Excitation probability at the observation instant under Poisson arrivals,
/// from the mixture over photon counts. Each `N ≥ 2` term is estimated on its
/// own substream `key.child(N)`; the standard error combines them.
pub fn excitation_poisson(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    cfg: &MixtureConfig,
    key: StreamKey,
) -> Estimate {
    if lambda <= 0.0 {
        return Estimate::exact(0.0);
    }
    let mean = lambda * timing.t_c;
    let n_max = poisson_truncation(mean, cfg.eps_trunc);
    let weights = poisson_pmf_table(mean, n_max);
    let terms: Vec<Estimate> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            if weights[n] == 0.0 {
                Estimate::exact(0.0)
            } else {
                excitation_given_count(n, timing.t_c, dev, cfg.mc_samples, key.child(n as u64))
            }
        })
        .collect();
    let decay = (-dev.gamma * timing.delta_o).exp();
    let mut mean_sum = 0.0;
    let mut var_sum = 0.0;
    let mut samples = 0;
    for (w, e) in weights.iter().zip(&terms) {
        mean_sum += w * e.mean;
        var_sum += (w * e.stderr).powi(2);
        samples += e.samples;
    }
    Estimate {
        mean: clamp_unit(decay * mean_sum),
        stderr: decay * var_sum.sqrt(),
        samples,
    }
}

/// Everything that happened in one simulated detection cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorOutcome {
    pub excited_at_tc: bool,
    pub excited_at_obs: bool,
    /// Level reported at observation, including a dark flip.
    pub captured: bool,
    pub readout_bit: bool,
    /// The reset returned the qubit to ground.
    pub reset_ok: bool,
    pub exit_level: Level,
}

/// Transition and decay clocks of the detector during capture.
pub(crate) struct Absorber {
    k: f64,
    g: f64,
    locked: bool,
    excited_from: f64,
    busy_until: f64,
}

impl Absorber {
    pub(crate) fn new<R: Rng + ?Sized>(rng: &mut R, dev: &DeviceParams, entry: Level) -> Self {
        let k = dev.transition_rate();
        let g = dev.gamma;
        match entry {
            Level::Ground => Self {
                k,
                g,
                locked: false,
                excited_from: f64::INFINITY,
                busy_until: f64::NEG_INFINITY,
            },
            Level::Excited => Self {
                k,
                g,
                locked: true,
                excited_from: 0.0,
                busy_until: exp_time(rng, g),
            },
        }
    }

    /// A photon arriving at `s`; absorbed only if the detector is idle.
    #[inline]
    pub(crate) fn offer<R: Rng + ?Sized>(&mut self, rng: &mut R, s: f64) {
        if !self.locked && s >= self.busy_until {
            self.excited_from = s + exp_time(rng, self.k);
            self.busy_until = self.excited_from + exp_time(rng, self.g);
        }
    }

    /// No later arrival can change the outcome.
    #[inline]
    pub(crate) fn frozen(&self) -> bool {
        self.locked || self.busy_until == f64::INFINITY
    }

    pub(crate) fn excited_at(&self, t: f64) -> bool {
        self.excited_from <= t && self.busy_until > t
    }

    /// Readout and reset after a capture window ending at `timing.t_c`.
    pub(crate) fn finish<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        timing: &CycleTiming,
        dev: &DeviceParams,
    ) -> DetectorOutcome {
        let excited_at_tc = self.excited_at(timing.t_c);
        let t_o = timing.t_obs();
        let excited_at_obs = excited_at_tc && self.busy_until > t_o;
        let flipped = bernoulli(rng, dev.p0);
        let captured = excited_at_obs != flipped;
        let readout_bit = if !captured {
            false
        } else if excited_at_obs {
            self.busy_until > t_o + timing.t_w
        } else {
            bernoulli(rng, dev.readout_success(timing))
        };
        let stays_excited = bernoulli(rng, if readout_bit { dev.p_reset_e } else { dev.p_reset_g });
        DetectorOutcome {
            excited_at_tc,
            excited_at_obs,
            captured,
            readout_bit,
            reset_ok: !stays_excited,
            exit_level: if stays_excited { Level::Excited } else { Level::Ground },
        }
    }
}

/// Feeds Poisson arrivals on `[0, t_c)` to the absorber. With a saturation
/// window `tau`, a photon is passed on only if no other arrival lies within
/// `tau` of it on either side.
pub(crate) fn feed_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64, t_c: f64, tau: Option<f64>, a: &mut Absorber) {
    if lambda <= 0.0 || a.frozen() {
        return;
    }
    let mut t = 0.0;
    let mut pending: Option<(f64, bool)> = None;
    loop {
        t += exp_time(rng, lambda);
        if t >= t_c {
            break;
        }
        match tau {
            None => a.offer(rng, t),
            Some(tau) => {
                if let Some((p, clear_before)) = pending {
                    let gap = t - p;
                    if clear_before && gap >= tau {
                        a.offer(rng, p);
                    }
                    pending = Some((t, gap >= tau));
                } else {
                    pending = Some((t, true));
                }
            }
        }
        if a.frozen() {
            return;
        }
    }
    if let Some((p, true)) = pending {
        a.offer(rng, p);
    }
}

/// Simulates one detection cycle with Poisson arrivals at rate `lambda`.
pub fn run_cycle<R: Rng + ?Sized>(
    rng: &mut R,
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    saturation_tau: Option<f64>,
) -> DetectorOutcome {
    let mut a = Absorber::new(rng, dev, entry);
    feed_poisson(rng, lambda, timing.t_c, saturation_tau, &mut a);
    a.finish(rng, timing, dev)
}

/// Simulates the capture stage for fixed arrival instants, starting in
/// ground; returns whether the qubit is excited at `T_c`.
pub fn simulate_trace<R: Rng + ?Sized>(rng: &mut R, trace: &ArrivalTrace, dev: &DeviceParams) -> bool {
    let mut a = Absorber::new(rng, dev, Level::Ground);
    for &s in trace.times() {
        a.offer(rng, s);
        if a.frozen() {
            break;
        }
    }
    a.excited_at(trace.t_c())
}

/// Empirical frequencies of the cycle outcome flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorStats {
    pub excited_at_tc: Estimate,
    pub excited_at_obs: Estimate,
    pub captured: Estimate,
    pub readout_bit: Estimate,
    pub reset_ok: Estimate,
}

/// Event-driven Monte Carlo over `replicas` independent cycles.
pub fn mc_detector(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    replicas: u64,
    key: StreamKey,
) -> DetectorStats {
    mc_detector_with(lambda, timing, dev, entry, None, replicas, key)
}

pub(crate) fn mc_detector_with(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    saturation_tau: Option<f64>,
    replicas: u64,
    key: StreamKey,
) -> DetectorStats {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let [tc, obs, cap, bit, ok] = parallel_moments::<5, _>(key, replicas.max(1), |rng| {
        let o = run_cycle(rng, lambda, timing, dev, entry, saturation_tau);
        [
            ind(o.excited_at_tc),
            ind(o.excited_at_obs),
            ind(o.captured),
            ind(o.readout_bit),
            ind(o.reset_ok),
        ]
    });
    DetectorStats {
        excited_at_tc: tc,
        excited_at_obs: obs,
        captured: cap,
        readout_bit: bit,
        reset_ok: ok,
    }
}

/// Capture, readout and reset probabilities of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageProbabilities {
    /// Excitation probability at the observation instant.
    pub p_excited_obs: f64,
    /// Excited level reported at observation, dark counts included.
    pub p_capture: f64,
    /// Readout reports a detection: `p_w · p_capture`.
    pub p_readout: f64,
    /// Reset leaves the qubit excited.
    pub p_reset_err: f64,
}

impl StageProbabilities {
    /// Chains the stages from a given excitation probability at observation.
    pub fn from_excitation(p_excited_obs: f64, timing: &CycleTiming, dev: &DeviceParams) -> Self {
        let p_capture = detection_prob_single(p_excited_obs, dev);
        let p_readout = dev.readout_success(timing) * p_capture;
        Self {
            p_excited_obs,
            p_capture,
            p_readout,
            p_reset_err: dev.p_reset_g * (1.0 - p_readout) + dev.p_reset_e * p_readout,
        }
    }

    pub fn p_miss(&self) -> f64 {
        1.0 - self.p_readout
    }
}

/// Stage probabilities for a cycle entered in ground.
pub fn stage_probabilities(lambda: f64, timing: &CycleTiming, dev: &DeviceParams) -> StageProbabilities {
    stage_probabilities_from(lambda, timing, dev, Level::Ground)
}

pub fn stage_probabilities_from(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
) -> StageProbabilities {
    let p = excitation_poisson_exact(lambda, timing, dev, entry);
    StageProbabilities::from_excitation(p, timing, dev)
}

/// One `(λ, κ, γ)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissPoint {
    pub lambda: f64,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MissMethod {
    /// Transient solution of the capture chain; zero standard error.
    Exact,
    /// Event-driven simulation with the given replica count per point.
    MonteCarlo { replicas: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissRow {
    pub lambda: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub t_c: f64,
    pub delta_o: f64,
    pub t_w: f64,
    pub p_capture: f64,
    pub p_readout: f64,
    pub p_miss: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub seed: u64,
}

impl Record for MissRow {
    fn columns() -> &'static [&'static str] {
        &[
            "lambda",
            "kappa",
            "gamma",
            "t_c",
            "delta_o",
            "t_w",
            "p_capture",
            "p_readout",
            "p_miss",
            "stderr",
            "replicas",
            "seed",
        ]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            self.lambda.into(),
            self.kappa.into(),
            self.gamma.into(),
            self.t_c.into(),
            self.delta_o.into(),
            self.t_w.into(),
            self.p_capture.into(),
            self.p_readout.into(),
            self.p_miss.into(),
            self.stderr.into(),
            self.replicas.into(),
            self.seed.into(),
        ]
    }
}

/// Miss probability `1 − p_readout` over a grid of rates. Point `i` uses
/// substream `key.child(i)`.
pub fn miss_probability_sweep(
    points: &[MissPoint],
    timing: &CycleTiming,
    template: &DeviceParams,
    method: MissMethod,
    key: StreamKey,
) -> Result<Vec<MissRow>> {
    if points.is_empty() {
        return Err(Error::EmptySweep);
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            if !(pt.lambda >= 0.0) {
                return Err(invalid(
                    "lambda",
                    format!("arrival rate must be non-negative, got {}", pt.lambda),
                ));
            }
            let dev = template.with_rates(pt.kappa, pt.gamma).validated()?;
            let (p_capture, p_readout, stderr, replicas) = match method {
                MissMethod::Exact => {
                    let s = stage_probabilities(pt.lambda, timing, &dev);
                    (s.p_capture, s.p_readout, 0.0, 0)
                }
                MissMethod::MonteCarlo { replicas } => {
                    let s = mc_detector(pt.lambda, timing, &dev, Level::Ground, replicas, key.child(i as u64));
                    (
                        s.captured.mean,
                        s.readout_bit.mean,
                        s.readout_bit.stderr,
                        s.readout_bit.samples,
                    )
                }
            };
            Ok(MissRow {
                lambda: pt.lambda,
                kappa: pt.kappa,
                gamma: pt.gamma,
                t_c: timing.t_c,
                delta_o: timing.delta_o,
                t_w: timing.t_w,
                p_capture,
                p_readout,
                p_miss: 1.0 - p_readout,
                stderr,
                replicas,
                seed: key.root_seed(),
            })
        })
        .collect()
}
