//! Exact capture-stage occupation under Poisson arrivals.
//!
//! With Poisson arrivals and the one-transition-at-a-time rule the detector is
//! a three-state Markov chain: idle ground `I`, transition in flight `T`, and
//! excited `E`, with rates `I→T = λ`, `T→E = κ/4`, `E→I = γ`. Its transient
//! solution gives the same excitation probability as the conditional-on-count
//! decomposition in [`crate::detection`], without Monte Carlo.
//!
//! A cycle entered in the excited level absorbs nothing: the qubit only
//! decays during capture.

use crate::params::{CycleTiming, DeviceParams};
use crate::scalar::{clamp_unit, Real};

/// Qubit level at the start of a detection cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Ground = 0,
    Excited = 1,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Ground, Level::Excited];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Level {
        if i == 0 {
            Level::Ground
        } else {
            Level::Excited
        }
    }
}

/// Occupation probabilities of the capture chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureState<T = f64> {
    pub idle: T,
    pub transit: T,
    pub excited: T,
}

type Mat3<T> = [[T; 3]; 3];

fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s = s + a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

fn identity<T: Real>() -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
fn expm<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let norm = a
        .iter()
        .map(|row| row.iter().fold(T::zero(), |s, x| s + x.abs()))
        .fold(T::zero(), T::max);
    let mut squarings = 0u32;
    let mut scale = T::one();
    let quarter = T::lit(0.25);
    while norm * scale > quarter {
        scale = scale * T::lit(0.5);
        squarings += 1;
    }
    let scaled: Mat3<T> = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * scale));
    let mut result = identity::<T>();
    let mut term = identity::<T>();
    for n in 1..=30 {
        term = mat_mul(&term, &scaled);
        let inv = T::one() / T::from_usize(n).expect("small integer");
        let mut biggest = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                term[i][j] = term[i][j] * inv;
                result[i][j] = result[i][j] + term[i][j];
                biggest = biggest.max(term[i][j].abs());
            }
        }
        if biggest < T::epsilon() * T::lit(1e-3) {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

/// Chain occupation after a capture window of length `t` with arrival rate
/// `lambda`, starting idle (ground entry) or excited.
pub fn capture_state<T: Real>(lambda: T, t: T, dev: &DeviceParams<T>, entry: Level) -> CaptureState<T> {
    let g = dev.gamma;
    if entry == Level::Excited {
        let stay = (-g * t).exp();
        return CaptureState {
            idle: T::one() - stay,
            transit: T::zero(),
            excited: stay,
        };
    }
    let k = dev.transition_rate();
    let z = T::zero();
    let q: Mat3<T> = [[-lambda * t, lambda * t, z], [z, -k * t, k * t], [g * t, z, -g * t]];
    let p = expm(&q);
    CaptureState {
        idle: clamp_unit(p[0][0]),
        transit: clamp_unit(p[0][1]),
        excited: clamp_unit(p[0][2]),
    }
}

/// Probability the qubit is excited at the observation instant `T_c + Δ_o`.
///
/// A transition still in flight when the drive stops at `T_c` is lost; the
/// excited population then decays for `Δ_o`.
pub fn excitation_poisson_exact<T: Real>(lambda: T, timing: &CycleTiming<T>, dev: &DeviceParams<T>, entry: Level) -> T {
    let at_tc = capture_state(lambda, timing.t_c, dev, entry).excited;
    at_tc * (-dev.gamma * timing.delta_o).exp()
}
