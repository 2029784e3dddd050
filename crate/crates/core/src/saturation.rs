//! Dead-time saturation: surviving-photon statistics and saturated excitation.
//!
//! Two arrivals closer than `τ = α/κ` destroy each other's transitions. A
//! photon survives iff no other arrival lies in the open interval
//! `(t − τ, t + τ)`. Only survivors can drive the detector.

use rayon::prelude::*;

use crate::capture::excitation_poisson_exact;
use crate::capture::Level;
use crate::detection::{excitation_from_times, mc_detector_with, poisson_pmf_table, poisson_truncation, ArrivalTrace};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{exp_time, parallel_mean, parallel_moments, sorted_uniforms, Estimate, StreamKey};
use crate::params::{CycleTiming, DeviceParams};
use crate::quadrature::{integrate_2d, QuadConfig};
use crate::scalar::Real;

/// Fixed dead-time window around each arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationWindow<T = f64> {
    pub tau: T,
}

impl<T: Real> SaturationWindow<T> {
    pub fn new(tau: T) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(invalid("tau", format!("saturation window must be positive, got {tau}")));
        }
        Ok(Self { tau })
    }

    /// `τ = α_sat / κ`.
    pub fn from_device(dev: &DeviceParams<T>) -> Self {
        Self {
            tau: dev.alpha_sat / dev.kappa,
        }
    }
}

/// Sign of `mean − variance` of the survivor count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    SubPoisson,
    PoissonBoundary,
    SuperPoisson,
}

impl Regime {
    fn classify<T: Real>(delta: T, mean: T) -> Self {
        if delta.abs() <= T::lit(1e-12) * mean.abs() || delta == T::zero() {
            Regime::PoissonBoundary
        } else if delta > T::zero() {
            Regime::SubPoisson
        } else {
            Regime::SuperPoisson
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SubPoisson => "sub-poisson",
            Regime::PoissonBoundary => "poisson-boundary",
            Regime::SuperPoisson => "super-poisson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivorMoments<T = f64> {
    pub mean: T,
    pub second_moment: T,
    pub variance: T,
    pub regime: Regime,
}

impl<T: Real> SurvivorMoments<T> {
    fn new(mean: T, second_moment: T, delta: Option<T>) -> Self {
        let variance = (second_moment - mean * mean).max(T::zero());
        let delta = delta.unwrap_or(mean - variance);
        Self {
            mean,
            second_moment,
            variance,
            regime: Regime::classify(delta, mean),
        }
    }
}

/// Indices of the photons that survive, for sorted `times`.
fn survivor_mask<T: Real>(times: &[T], tau: T) -> impl Iterator<Item = bool> + '_ {
    let n = times.len();
    (0..n).map(move |i| {
        let clear_before = i == 0 || times[i] - times[i - 1] >= tau;
        let clear_after = i + 1 == n || times[i + 1] - times[i] >= tau;
        clear_before && clear_after
    })
}

/// Surviving sub-sequence of a trace.
pub fn filter_survivors<T: Real>(trace: &ArrivalTrace<T>, window: &SaturationWindow<T>) -> ArrivalTrace<T> {
    let times = trace.times();
    let kept: Vec<T> = times
        .iter()
        .zip(survivor_mask(times, window.tau))
        .filter_map(|(&t, keep)| keep.then_some(t))
        .collect();
    ArrivalTrace::new(kept, trace.t_c()).expect("a subsequence of a valid trace is valid")
}

fn check_ratio<T: Real>(tau: T, t_c: T) -> Result<T> {
    if !(tau > T::zero()) || !(t_c > T::zero()) {
        return Err(invalid("tau", "window and capture length must be positive"));
    }
    if !(t_c >= T::lit(4.0) * tau) {
        return Err(Error::Precondition(format!(
            "survivor moments need t_c/tau >= 4, got {}",
            t_c / tau
        )));
    }
    Ok(tau / t_c)
}

/// Survivor-count moments given exactly `n` uniform arrivals.
pub fn survivor_moments_given_count<T: Real>(n: usize, tau: T, t_c: T) -> Result<SurvivorMoments<T>> {
    let r = check_ratio(tau, t_c)?;
    let nf = T::from_usize(n).expect("count fits the float type");
    let ni = i32::try_from(n).map_err(|_| invalid("n", "photon count too large"))?;
    let c = |j: f64| (T::one() - T::lit(j) * r).powi(ni);
    let two = T::lit(2.0);
    let mean = two * c(1.0) + (nf - two) * c(2.0);
    let second = two * c(1.0)
        + (nf + T::lit(4.0)) * c(2.0)
        + (nf * nf - T::lit(7.0) * nf + T::lit(12.0)) * c(4.0)
        + (T::lit(6.0) * nf - T::lit(18.0)) * c(3.0);
    Ok(SurvivorMoments::new(mean, second, None))
}

/// `(E[αᴺ], E[Nαᴺ], E[N²αᴺ])` for `N ~ Poisson(Λ)`.
pub fn poisson_weighted_moments<T: Real>(alpha: T, big_lambda: T) -> [T; 3] {
    let base = (-(T::one() - alpha) * big_lambda).exp();
    let m = alpha * big_lambda;
    [base, m * base, (m * m + m) * base]
}

/// `Δ = E − σ²` in the form `S(a)e^{−4a}`, `a = λτ`, `β = T_c/τ`, which
/// stays accurate as `a → 0`.
fn delta_from_a<T: Real>(a: T, beta: T) -> T {
    let e1 = a.exp_m1();
    let e2 = (a + a).exp_m1();
    let s = -T::lit(2.0) * e2 + T::lit(10.0) * e1 - T::lit(6.0) * a - (T::lit(2.0) * beta - T::lit(10.0)) * a * e1
        + (T::lit(4.0) * beta - T::lit(12.0)) * a * a;
    s * (-T::lit(4.0) * a).exp()
}

/// Survivor-count moments under Poisson arrivals at rate `lambda`.
pub fn survivor_moments_poisson<T: Real>(lambda: T, tau: T, t_c: T) -> Result<SurvivorMoments<T>> {
    check_ratio(tau, t_c)?;
    if !(lambda >= T::zero()) {
        return Err(invalid("lambda", "arrival rate must be non-negative"));
    }
    let a = lambda * tau;
    let e = |j: f64| (-T::lit(j) * a).exp();
    let rest = |j: f64| lambda * (t_c - T::lit(j) * tau);
    let two = T::lit(2.0);
    let mean = two * e(1.0) + (rest(2.0) - two) * e(2.0);
    let r4 = rest(4.0);
    let second = two * e(1.0)
        + (rest(2.0) + T::lit(4.0)) * e(2.0)
        + (r4 * r4 - T::lit(6.0) * r4 + T::lit(12.0)) * e(4.0)
        + (T::lit(6.0) * rest(3.0) - T::lit(18.0)) * e(3.0);
    let delta = delta_from_a(a, t_c / tau);
    Ok(SurvivorMoments::new(mean, second, Some(delta)))
}

/// Mean minus variance of the survivor count, `Δ_λ = E_λ − σ²_λ`. Positive
/// means sub-Poisson.
pub fn delta_lambda<T: Real>(lambda: T, tau: T, t_c: T) -> Result<T> {
    check_ratio(tau, t_c)?;
    Ok(delta_from_a(lambda * tau, t_c / tau))
}

/// Largest `a = λτ` searched for the crossover.
pub const LAMBDA0_MAX_A: f64 = 50.0;

/// Crossover rate `λ₀` where the survivor count turns from sub- to
/// super-Poisson.
pub fn find_lambda0<T: Real>(tau: T, t_c: T) -> Result<T> {
    check_ratio(tau, t_c)?;
    let beta = t_c / tau;
    let f = |a: T| delta_from_a(a, beta);
    // log-spaced scan of a ∈ [1e-6, 50] for the first + → − change
    let steps = 4000;
    let lo_exp = T::lit(-6.0);
    let hi_exp = T::lit(LAMBDA0_MAX_A.log10());
    let at = |i: usize| {
        let u = T::from_usize(i).unwrap() / T::from_usize(steps).unwrap();
        T::lit(10.0).powf(lo_exp + (hi_exp - lo_exp) * u)
    };
    let mut prev_a = at(0);
    let mut prev = f(prev_a);
    for i in 1..=steps {
        let a = at(i);
        let v = f(a);
        if prev > T::zero() && v <= T::zero() {
            let (mut lo, mut hi) = (prev_a, a);
            for _ in 0..200 {
                let mid = (lo + hi) / T::lit(2.0);
                if f(mid) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= T::lit(1e-10) * hi || hi - lo <= T::epsilon() * hi {
                    break;
                }
            }
            return Ok((lo + hi) / T::lit(2.0) / tau);
        }
        prev_a = a;
        prev = v;
    }
    Err(Error::RootNotFound { max_a: LAMBDA0_MAX_A })
}

/// The four regional pieces of the pair-survival probability, each already
/// scaled by `2/T_c²`, so that `E(I₁I₂) = A + B + C + D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivorPieces {
    pub numeric: [f64; 4],
    pub closed: [f64; 4],
    /// Published closed form of piece C, which drops a `3τ` term.
    pub closed_c_as_printed: f64,
}

impl SurvivorPieces {
    pub fn pair_survival_numeric(&self) -> f64 {
        self.numeric.iter().sum()
    }

    pub fn pair_survival_closed(&self) -> f64 {
        self.closed.iter().sum()
    }
}

/// Numeric and closed-form evaluation of the four pair-survival regions for
/// `n` uniform arrivals (`t₁ ≤ t₂`, split by the position of `t₁`).
pub fn survivor_piece_integrals(n: usize, tau: f64, t_c: f64) -> Result<SurvivorPieces> {
    let r = check_ratio(tau, t_c)?;
    if n < 2 {
        return Err(invalid("n", "pair survival needs at least two photons"));
    }
    let m = (n - 2) as i32;
    let cfg = QuadConfig::tight();
    let p = |x: f64| x.max(0.0).powi(m);
    let quad = |f: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, lo: &dyn Fn(f64) -> f64, hi: &dyn Fn(f64) -> f64| {
        integrate_2d(f, a, b, lo, hi, &cfg).value
    };
    // lengths in units of T_c
    let a_piece = quad(&|_, t2| 2.0 * p(1.0 - t2 - r), 0.0, r, &|t1| t1 + r, &|t1| t1 + 2.0 * r)
        + quad(&|t1, _| p(1.0 - t1 - 3.0 * r), 0.0, r, &|t1| t1 + 2.0 * r, &|_| 1.0 - r);
    let b_piece = quad(
        &|t1, t2| 2.0 * p(1.0 - (t2 - t1 + 2.0 * r)),
        r,
        1.0 - 3.0 * r,
        &|t1| t1 + r,
        &|t1| t1 + 2.0 * r,
    ) + quad(&|_, _| p(1.0 - 4.0 * r), r, 1.0 - 3.0 * r, &|t1| t1 + 2.0 * r, &|_| {
        1.0 - r
    });
    let c_piece = quad(
        &|t1, t2| 2.0 * p(1.0 - (t2 - t1 + 2.0 * r)),
        1.0 - 3.0 * r,
        1.0 - 2.0 * r,
        &|t1| t1 + r,
        &|_| 1.0 - r,
    ) + quad(&|t1, _| p(t1 - r), 1.0 - 3.0 * r, 1.0 - 2.0 * r, &|_| 1.0 - r, &|t1| {
        t1 + 2.0 * r
    });
    let d_piece = quad(&|t1, _| p(t1 - r), 1.0 - 2.0 * r, 1.0 - r, &|t1| t1 + r, &|_| 1.0);
    let numeric = [a_piece, b_piece, c_piece, d_piece].map(|x| 2.0 * x);

    let nf = n as f64;
    let ni = n as i32;
    let nn = nf * (nf - 1.0);
    let c2 = 1.0 - 2.0 * r;
    let c3 = 1.0 - 3.0 * r;
    let c4 = 1.0 - 4.0 * r;
    let closed_a = 4.0 / nn * c2.powi(ni) + (2.0 * nf - 10.0) / nn * c3.powi(ni) + (6.0 - 2.0 * nf) / nn * c4.powi(ni);
    let closed_b = 4.0 / (nf - 1.0) * c4 * c3.powi(ni - 1) + (nf - 5.0) / (nf - 1.0) * c4.powi(ni);
    let closed_c = 6.0 * r / (nf - 1.0) * c3.powi(ni - 1) - 6.0 / nn * c3.powi(ni) + 6.0 / nn * c4.powi(ni);
    let closed_d = 2.0 / nn * (c2.powi(ni) - c3.powi(ni)) - 2.0 * r / (nf - 1.0) * c3.powi(ni - 1);
    let printed_c = (6.0 * nf * r - 6.0) / nn * c3.powi(ni - 1) + 6.0 / nn * c4.powi(ni);
    Ok(SurvivorPieces {
        numeric,
        closed: [closed_a, closed_b, closed_c, closed_d],
        closed_c_as_printed: printed_c,
    })
}

/// Monte Carlo survivor mean and variance with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivorSample {
    pub mean: Estimate,
    pub variance: Estimate,
}

fn summarize_counts(raw: [Estimate; 4]) -> SurvivorSample {
    let n = raw[0].samples as f64;
    let mu = raw[0].mean;
    let m2 = raw[1].mean;
    let m3 = raw[2].mean;
    let m4 = raw[3].mean;
    let var = (m2 - mu * mu).max(0.0);
    let central4 = m4 - 4.0 * mu * m3 + 6.0 * mu * mu * m2 - 3.0 * mu.powi(4);
    let var_unbiased = var * n / (n - 1.0).max(1.0);
    SurvivorSample {
        mean: raw[0],
        variance: Estimate {
            mean: var_unbiased,
            stderr: ((central4 - var * var).max(0.0) / n).sqrt(),
            samples: raw[0].samples,
        },
    }
}

fn count_powers(k: usize) -> [f64; 4] {
    let x = k as f64;
    [x, x * x, x * x * x, x * x * x * x]
}

/// Survivor counts over `replicas` traces of exactly `n` uniform arrivals.
pub fn mc_survivors_given_count(n: usize, tau: f64, t_c: f64, replicas: u64, key: StreamKey) -> SurvivorSample {
    let raw = parallel_moments::<4, _>(key, replicas, |rng| {
        let mut times = Vec::with_capacity(n);
        crate::montecarlo::sorted_uniforms(rng, n, t_c, &mut times);
        count_powers(survivor_mask(&times, tau).filter(|&s| s).count())
    });
    summarize_counts(raw)
}

/// Survivor counts over `replicas` Poisson traces on `[0, t_c]`.
pub fn mc_survivors_poisson(lambda: f64, tau: f64, t_c: f64, replicas: u64, key: StreamKey) -> SurvivorSample {
    let raw = parallel_moments::<4, _>(key, replicas, |rng| {
        let mut survivors = 0;
        let mut prev: Option<(f64, bool)> = None;
        let mut t = 0.0;
        loop {
            t += exp_time(rng, lambda);
            if t > t_c {
                break;
            }
            if let Some((p, clear_before)) = prev {
                let gap = t - p;
                if clear_before && gap >= tau {
                    survivors += 1;
                }
                prev = Some((t, gap >= tau));
            } else {
                prev = Some((t, true));
            }
        }
        if let Some((_, true)) = prev {
            survivors += 1;
        }
        count_powers(survivors)
    });
    summarize_counts(raw)
}

/// Mean photon count per window up to which [`saturated_excitation`] scores
/// each trace twice and returns a correction to the exact unsaturated value.
/// The renewal sum is quadratic in the trace length, so larger counts use
/// event-driven simulation instead.
const COUPLED_MAX_MEAN: f64 = 16.0;

/// Poisson mass left out of the count strata of [`saturated_excitation_with`].
const STRATA_EPS: f64 = 1e-12;

/// Excitation probability at the observation instant when only survivors of
/// a dead-time window `tau` can drive the detector.
///
/// Up to [`COUPLED_MAX_MEAN`] photons per window the estimate is the exact
/// unsaturated value plus a correction `E[score(survivors) − score(trace)]`,
/// where `score` is the exact renewal sum for one trace. The correction is
/// stratified by photon count: each count `n ≥ 2` is sampled with `replicas`
/// sorted-uniform traces and weighted by its Poisson probability, and traces
/// without collisions contribute exactly zero. Larger photon numbers use
/// event-driven simulation on the survivors. An excited entry absorbs
/// nothing and is returned exactly.
pub fn saturated_excitation_with(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    tau: f64,
    replicas: u64,
    key: StreamKey,
) -> Estimate {
    let exact = excitation_poisson_exact(lambda, timing, dev, entry);
    if entry == Level::Excited || lambda == 0.0 {
        return Estimate::exact(exact);
    }
    let t_c = timing.t_c;
    let mean = lambda * t_c;
    if mean > COUPLED_MAX_MEAN {
        return mc_detector_with(lambda, timing, dev, entry, Some(tau), replicas, key).excited_at_obs;
    }
    let n_max = poisson_truncation(mean, STRATA_EPS).max(2);
    let pmf = poisson_pmf_table(mean, n_max);
    let (mut correction, mut var) = (0.0, 0.0);
    for n in 2..=n_max {
        let e = parallel_mean(key.child(n as u64), replicas.max(2), |rng| {
            let (mut all, mut w) = (Vec::with_capacity(n), Vec::new());
            sorted_uniforms(rng, n, t_c, &mut all);
            let kept: Vec<f64> = all
                .iter()
                .zip(survivor_mask(&all, tau))
                .filter_map(|(&t, keep)| keep.then_some(t))
                .collect();
            if kept.len() == n {
                return 0.0;
            }
            excitation_from_times(&kept, t_c, dev, &mut w) - excitation_from_times(&all, t_c, dev, &mut w)
        });
        correction += pmf[n] * e.mean;
        var += (pmf[n] * e.stderr).powi(2);
    }
    let decay = (-dev.gamma * timing.delta_o).exp();
    Estimate {
        mean: (exact + decay * correction).clamp(0.0, 1.0),
        stderr: decay * var.sqrt(),
        samples: replicas.max(2) * (n_max as u64 - 1),
    }
}

/// [`saturated_excitation_with`] for the device's own window `α/κ`.
pub fn saturated_excitation(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    replicas: u64,
    key: StreamKey,
) -> Estimate {
    let tau = SaturationWindow::from_device(dev).tau;
    saturated_excitation_with(lambda, timing, dev, entry, tau, replicas, key)
}

/// Event-driven counterpart of [`saturated_excitation`]: simulates the qubit
/// on the surviving photons and reports the excited fraction.
pub fn saturated_excitation_mc(
    lambda: f64,
    timing: &CycleTiming,
    dev: &DeviceParams,
    entry: Level,
    replicas: u64,
    key: StreamKey,
) -> Estimate {
    let tau = SaturationWindow::from_device(dev).tau;
    mc_detector_with(lambda, timing, dev, entry, Some(tau), replicas, key).excited_at_obs
}

/// Log grid of mean photon numbers for the cutoff search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSweep {
    pub n_min: f64,
    pub n_max: f64,
    pub points_per_decade: usize,
    pub replicas: u64,
}

impl Default for CutoffSweep {
    fn default() -> Self {
        Self {
            n_min: 0.1,
            n_max: 1e7,
            points_per_decade: 40,
            replicas: 2000,
        }
    }
}

impl CutoffSweep {
    pub fn grid(&self) -> Vec<f64> {
        let decades = (self.n_max / self.n_min).log10();
        let steps = (decades * self.points_per_decade as f64).ceil() as usize;
        (0..=steps)
            .map(|i| self.n_min * 10f64.powf(i as f64 / self.points_per_decade as f64))
            .collect()
    }
}

/// Position of the 3 dB drop on a sampled excitation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffLocation {
    pub n_cutoff: f64,
    pub peak_index: usize,
    pub peak: f64,
}

/// Finds the first mean photon number after the curve maximum where the value
/// has fallen to half the maximum, interpolating linearly in `(ln n, ln p)`
/// (or in `(ln n, p)` when the lower point is zero).
pub fn locate_cutoff(curve: &[(f64, f64)]) -> Result<CutoffLocation> {
    if curve.is_empty() {
        return Err(Error::EmptySweep);
    }
    let (peak_index, peak) =
        curve.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &(_, p))| if p > best.1 { (i, p) } else { best },
        );
    let half = peak / 2.0;
    let max_n = curve[curve.len() - 1].0;
    let j = (peak_index + 1..curve.len())
        .find(|&j| curve[j].1 <= half)
        .ok_or(Error::NotSaturating { max_n })?;
    let (n0, p0) = curve[j - 1];
    let (n1, p1) = curve[j];
    let (x0, x1) = (n0.ln(), n1.ln());
    let frac = if p1 > 0.0 && p0 > 0.0 && p0 != p1 {
        (half.ln() - p0.ln()) / (p1.ln() - p0.ln())
    } else if p0 != p1 {
        (half - p0) / (p1 - p0)
    } else {
        1.0
    };
    Ok(CutoffLocation {
        n_cutoff: (x0 + frac.clamp(0.0, 1.0) * (x1 - x0)).exp(),
        peak_index,
        peak,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffResult {
    pub n_cutoff: f64,
    pub peak_n: f64,
    pub peak_excitation: f64,
    /// `(n̄, excitation)` for every evaluated grid point.
    pub curve: Vec<(f64, Estimate)>,
}

/// Sweeps the saturated excitation probability over mean photon number
/// `n̄ = λT_c` and returns the 3 dB cutoff. Grid point `i` uses substream
/// `key.child(i)`; the sweep stops at the first point at or below half the
/// running maximum.
pub fn cutoff_photon_number(
    dev: &DeviceParams,
    timing: &CycleTiming,
    sweep: &CutoffSweep,
    key: StreamKey,
) -> Result<CutoffResult> {
    if !(sweep.n_min > 0.0) || !(sweep.n_max > sweep.n_min) || sweep.points_per_decade == 0 {
        return Err(invalid("sweep", "need 0 < n_min < n_max and a positive grid density"));
    }
    let grid = sweep.grid();
    let mut curve: Vec<(f64, Estimate)> = Vec::new();
    let mut running_max = f64::NEG_INFINITY;
    // evaluate a handful of points at a time; the stopping rule is applied in grid order
    for chunk in grid.chunks(4).enumerate().map(|(c, pts)| (c * 4, pts)) {
        let (offset, pts) = chunk;
        let values: Vec<Estimate> = pts
            .par_iter()
            .enumerate()
            .map(|(k, &n)| {
                saturated_excitation(
                    n / timing.t_c,
                    timing,
                    dev,
                    Level::Ground,
                    sweep.replicas,
                    key.child((offset + k) as u64),
                )
            })
            .collect();
        let mut done = false;
        for (&n, e) in pts.iter().zip(values) {
            curve.push((n, e));
            if e.mean > running_max {
                running_max = e.mean;
            } else if e.mean <= running_max / 2.0 {
                done = true;
                break;
            }
        }
        if done {
            break;
        }
    }
    let samples: Vec<(f64, f64)> = curve.iter().map(|(n, e)| (*n, e.mean)).collect();
    let loc = locate_cutoff(&samples)?;
    Ok(CutoffResult {
        n_cutoff: loc.n_cutoff,
        peak_n: samples[loc.peak_index].0,
        peak_excitation: loc.peak,
        curve,
    })
}
