//! Closed-form single-photon and single-cycle physics.
//!
//! A photon that starts a transition at time 0 drives the detector to the
//! excited level after an exponential delay with rate `κ/4`; the excited
//! level then decays back to ground with rate `γ`. Everything in this module
//! follows from that two-step exponential picture.

use crate::error::{invalid, Error, Result};
use crate::params::{DeviceParams, Environment, PulseProfile, BOLTZMANN, PLANCK};
use crate::quadrature::{integrate, integrate_2d, QuadConfig};
use crate::scalar::{clamp_unit, one_minus_exp_over, Real};

/// `(e^{-a t} - e^{-b t}) / (b - a)`, stable for all `a, b ≥ 0`, including `a = b`.
#[inline]
pub(crate) fn exp_difference<T: Real>(a: T, b: T, t: T) -> T {
    let slow = a.min(b);
    let gap = (b - a).abs();
    t * (-slow * t).exp() * one_minus_exp_over(gap * t)
}

/// Probability that a transition started at time 0 has reached the excited
/// level and is still there at time `t`.
///
/// `f₂(t) = κ/(κ−4γ)·(e^{−γt} − e^{−κt/4})`.
pub fn excited_prob<T: Real>(t: T, dev: &DeviceParams<T>) -> T {
    let k = dev.transition_rate();
    clamp_unit(k * exp_difference(dev.gamma, k, t))
}

/// Probability that a transition started at time 0 has completed and decayed
/// back to ground before `t` (`f_b`).
pub fn ground_return_prob<T: Real>(t: T, dev: &DeviceParams<T>) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let k = dev.transition_rate();
    clamp_unit(-(-k * t).exp_m1() - excited_prob(t, dev))
}

/// The two conditional kernels of a transition started at time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKernels<T = f64> {
    /// Not excited at `t`, and not yet returned to ground by `t₀`.
    pub idle: T,
    /// Excited at `t`.
    pub excited: T,
}

impl<T: Real> TransitionKernels<T> {
    /// Probability of being excited at `t` given no return to ground by `t₀`.
    pub fn conditional_excitation(&self) -> T {
        let total = self.idle + self.excited;
        if total > T::zero() {
            self.excited / total
        } else {
            T::zero()
        }
    }
}

/// Kernels for a transition that started at 0 and has not handed the
/// detector back to ground before `t0`, evaluated at `t ≥ t0`.
///
/// `idle + excited = 1 − f_b(t0)`, the probability of the conditioning event.
pub fn transition_kernels<T: Real>(t: T, t0: T, dev: &DeviceParams<T>) -> Result<TransitionKernels<T>> {
    if !(t0 >= T::zero()) || !(t0 <= t) {
        return Err(Error::Precondition(format!(
            "transition kernels need 0 <= t0 <= t, got t0 = {t0}, t = {t}"
        )));
    }
    let k = dev.transition_rate();
    let excited = excited_prob(t, dev);
    // 1 - f_b(t0) = e^{-k t0} + f2(t0)
    let survive = (-k * t0).exp() + excited_prob(t0, dev);
    let idle = (survive - excited).max(T::zero());
    Ok(TransitionKernels {
        idle: clamp_unit(idle),
        excited,
    })
}

fn check_observation<T: Real>(pulse: &PulseProfile<T>, t_obs: T) -> Result<T> {
    let t_i = pulse.half_window();
    if !(t_obs > t_i) {
        return Err(invalid(
            "t_obs",
            format!("observation time {t_obs} must follow the drive window end {t_i}"),
        ));
    }
    Ok(t_i)
}

/// Excitation probability at `t_obs` for a single photon whose arrival time
/// is drawn from the pulse density, with absorption only while the drive is
/// on (`|t| < t_i`).
pub fn single_photon_excitation<T: Real>(
    pulse: &PulseProfile<T>,
    t_obs: T,
    dev: &DeviceParams<T>,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    let t_i = check_observation(pulse, t_obs)?;
    let tail = (-dev.gamma * (t_obs - t_i)).exp();
    let r = integrate(|t| pulse.density(t) * excited_prob(t_i - t, dev), -t_i, t_i, cfg);
    Ok(clamp_unit(tail * r.value))
}

/// Same quantity as [`single_photon_excitation`], from the unreduced double
/// integral over arrival time `t` and transition time `q`.
pub fn single_photon_excitation_direct<T: Real>(
    pulse: &PulseProfile<T>,
    t_obs: T,
    dev: &DeviceParams<T>,
    cfg: &QuadConfig<T>,
) -> Result<T> {
    let t_i = check_observation(pulse, t_obs)?;
    let k = dev.transition_rate();
    let g = dev.gamma;
    let r = integrate_2d(
        |t, q| pulse.density(t) * k * (-k * (q - t)).exp() * (-g * (t_obs - q)).exp(),
        -t_i,
        t_i,
        |t| t,
        |_| t_i,
        cfg,
    );
    Ok(clamp_unit(r.value))
}

/// `P₁ = (1 − P₀)·p + P₀·(1 − p)`.
#[inline]
pub fn detection_prob_single<T: Real>(p_exc: T, dev: &DeviceParams<T>) -> T {
    (T::one() - dev.p0) * p_exc + dev.p0 * (T::one() - p_exc)
}

/// Mean thermal photon count per capture window, `k_B T_e / (N h ν)`.
pub fn thermal_photon_rate<T: Real>(env: &Environment<T>) -> T {
    let n = T::from_usize(env.cycles_per_symbol).expect("cycle count fits the float type");
    T::lit(BOLTZMANN) * env.t_e / (n * T::lit(PLANCK) * env.nu)
}

/// Photon arrival rate (1/s) carried by `power_dbm` at carrier `nu`.
/// `-∞` dBm maps to zero.
pub fn power_to_rate<T: Real>(power_dbm: T, nu: T) -> T {
    if power_dbm == T::neg_infinity() {
        return T::zero();
    }
    let watts = T::lit(10.0).powf((power_dbm - T::lit(30.0)) / T::lit(10.0));
    watts / (T::lit(PLANCK) * nu)
}
