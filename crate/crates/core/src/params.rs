//! Device, timing, environment and pulse descriptions.

use crate::error::{invalid, Result};
use crate::quadrature::{integrate, QuadConfig};
use crate::scalar::Real;

/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Planck constant, J·s (CODATA 2018, exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Default saturation window coefficient: `τ = α / κ`.
pub const DEFAULT_ALPHA_SAT: f64 = 1.14;

/// Effective detector rates and error probabilities.
///
/// `kappa` and `gamma` are angular rates in rad/s. The photon-driven
/// transition proceeds at `kappa / 4`; that rate is always derived, never
/// stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams<T = f64> {
    pub kappa: T,
    pub gamma: T,
    /// Dark (false) excitation probability.
    pub p0: T,
    /// Probability the reset leaves the qubit excited when it was read as ground.
    pub p_reset_g: T,
    /// Probability the reset leaves the qubit excited when it was read as excited.
    pub p_reset_e: T,
    pub alpha_sat: T,
}

impl<T: Real> DeviceParams<T> {
    /// Device with no dark counts and a perfect reset.
    pub fn ideal(kappa: T, gamma: T) -> Result<Self> {
        Self {
            kappa,
            gamma,
            p0: T::zero(),
            p_reset_g: T::zero(),
            p_reset_e: T::zero(),
            alpha_sat: T::lit(DEFAULT_ALPHA_SAT),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(invalid(
                "kappa",
                format!("must be positive and finite, got {}", self.kappa),
            ));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(invalid(
                "gamma",
                format!("must be non-negative and finite, got {}", self.gamma),
            ));
        }
        for (name, p) in [
            ("p0", self.p0),
            ("p_reset_g", self.p_reset_g),
            ("p_reset_e", self.p_reset_e),
        ] {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(invalid(name, format!("probability outside [0, 1]: {p}")));
            }
        }
        if !(self.alpha_sat > T::zero()) {
            return Err(invalid("alpha_sat", "must be positive"));
        }
        Ok(self)
    }

    /// Effective `|1̃⟩ → |2̃⟩` transition rate, `κ/4`.
    #[inline]
    pub fn transition_rate(&self) -> T {
        self.kappa / T::lit(4.0)
    }

    /// Probability the readout phase lock succeeds before the qubit decays.
    #[inline]
    pub fn readout_success(&self, timing: &CycleTiming<T>) -> T {
        (-self.gamma * timing.t_w).exp()
    }

    pub fn with_rates(self, kappa: T, gamma: T) -> Self {
        Self { kappa, gamma, ..self }
    }
}

/// Durations of one detection cycle, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTiming<T = f64> {
    /// Capture stage length `T_c`.
    pub t_c: T,
    /// Delay from the end of capture to observation.
    pub delta_o: T,
    /// Readout phase-lock time.
    pub t_w: T,
}

impl<T: Real> CycleTiming<T> {
    pub fn new(t_c: T, delta_o: T, t_w: T) -> Result<Self> {
        for (name, v) in [("t_c", t_c), ("delta_o", delta_o), ("t_w", t_w)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(name, format!("duration must be positive, got {v}")));
            }
        }
        Ok(Self { t_c, delta_o, t_w })
    }

    pub fn period(&self) -> T {
        self.t_c + self.delta_o + self.t_w
    }

    /// Observation instant measured from the start of capture.
    pub fn t_obs(&self) -> T {
        self.t_c + self.delta_o
    }
}

/// Thermal environment and symbol framing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment<T = f64> {
    /// Noise temperature, K.
    pub t_e: T,
    /// Carrier frequency, Hz.
    pub nu: T,
    pub cycles_per_symbol: usize,
}

impl<T: Real> Environment<T> {
    pub fn new(t_e: T, nu: T, cycles_per_symbol: usize) -> Result<Self> {
        if !(t_e >= T::zero()) {
            return Err(invalid("t_e", "temperature must be non-negative"));
        }
        if !(nu > T::zero()) {
            return Err(invalid("nu", "carrier frequency must be positive"));
        }
        if cycles_per_symbol == 0 {
            return Err(invalid("cycles_per_symbol", "must be at least 1"));
        }
        Ok(Self {
            t_e,
            nu,
            cycles_per_symbol,
        })
    }
}

/// Received power: either a finite dBm level or no signal at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Power {
    Off,
    Dbm(f64),
}

impl Power {
    pub fn dbm(self) -> f64 {
        match self {
            Power::Off => f64::NEG_INFINITY,
            Power::Dbm(p) => p,
        }
    }
}

impl From<f64> for Power {
    fn from(dbm: f64) -> Self {
        if dbm == f64::NEG_INFINITY {
            Power::Off
        } else {
            Power::Dbm(dbm)
        }
    }
}

/// Shape of the single-photon arrival density.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape<T = f64> {
    Rectangular,
    /// Centred gaussian with `σ = l/4`, truncated to the drive window and renormalised.
    Gaussian,
    /// Piecewise-linear density through `(t, ρ)` points spanning the drive window.
    Tabulated(Vec<(T, T)>),
}

/// Photon arrival density `ρ(t)` on `[-t_i, t_i]`, `t_i = (βl + w)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProfile<T = f64> {
    pub shape: PulseShape<T>,
    pub beta: T,
    pub length: T,
    pub pad: T,
    norm: T,
}

impl<T: Real> PulseProfile<T> {
    pub fn new(shape: PulseShape<T>, beta: T, length: T, pad: T) -> Result<Self> {
        if !(beta > T::zero()) || !(length >= T::zero()) || !(pad >= T::zero()) {
            return Err(invalid("pulse", "beta must be positive, l and w non-negative"));
        }
        let half = (beta * length + pad) / T::lit(2.0);
        if !(half > T::zero()) {
            return Err(invalid("pulse", "drive half-window t_i must be positive"));
        }
        if let PulseShape::Tabulated(points) = &shape {
            if points.len() < 2 {
                return Err(invalid("pulse", "tabulated profile needs at least two points"));
            }
            if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(invalid("pulse", "tabulated times must be strictly increasing"));
            }
            if points.iter().any(|p| !(p.1 >= T::zero())) {
                return Err(invalid("pulse", "tabulated density must be non-negative"));
            }
            let tol = half * T::lit(1e-9);
            if (points[0].0 + half).abs() > tol || (points[points.len() - 1].0 - half).abs() > tol {
                return Err(invalid("pulse", "tabulated profile must span [-t_i, t_i]"));
            }
        }
        if matches!(shape, PulseShape::Gaussian) && !(length > T::zero()) {
            return Err(invalid("pulse", "gaussian profile needs l > 0"));
        }
        let mut profile = Self {
            shape,
            beta,
            length,
            pad,
            norm: T::one(),
        };
        let mass = integrate(|t| profile.raw_density(t), -half, half, &QuadConfig::tight()).value;
        if !(mass > T::zero()) {
            return Err(invalid("pulse", "density has zero mass"));
        }
        profile.norm = T::one() / mass;
        Ok(profile)
    }

    /// Rectangular pulse of length `l` with `β = 1`, `w = 0`.
    pub fn rectangular(length: T) -> Result<Self> {
        Self::new(PulseShape::Rectangular, T::one(), length, T::zero())
    }

    pub fn half_window(&self) -> T {
        (self.beta * self.length + self.pad) / T::lit(2.0)
    }

    fn raw_density(&self, t: T) -> T {
        let half = self.half_window();
        if t < -half || t > half {
            return T::zero();
        }
        match &self.shape {
            PulseShape::Rectangular => T::one(),
            PulseShape::Gaussian => {
                let sigma = self.length / T::lit(4.0);
                (-(t * t) / (T::lit(2.0) * sigma * sigma)).exp()
            }
            PulseShape::Tabulated(points) => {
                let idx = points.partition_point(|p| p.0 <= t);
                if idx == 0 {
                    points[0].1
                } else if idx == points.len() {
                    points[points.len() - 1].1
                } else {
                    let (t0, r0) = points[idx - 1];
                    let (t1, r1) = points[idx];
                    r0 + (r1 - r0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Normalised density `ρ(t)`; zero outside the drive window.
    pub fn density(&self, t: T) -> T {
        self.raw_density(t) * self.norm
    }
}
