//! Brute-force reference implementations, exponential in the problem size,
//! used to check the fast routines on small inputs.

use crate::capture::Level;
use crate::detection::ArrivalTrace;
use crate::error::Result;
use crate::link::hmm::{state_parts, FrameStats, HmmSpec};
use crate::params::DeviceParams;
use crate::physics::{ground_return_prob, transition_kernels};
use crate::saturation::SaturationWindow;

/// Result of summing over every set of transition-starting photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetEnumeration {
    /// Excitation probability at `T_c`.
    pub excitation: f64,
    /// Total probability of all subsets; 1 up to rounding.
    pub mass: f64,
    pub subsets: usize,
}

/// Enumerates every subset `K = {k₁ = 1 < k₂ < … < k_p}` of photons that
/// start a transition. A subset has probability
/// `(1 − f_b(t_N − t_{k_p})) · Π_i (f_b(t_{k_i} − t_{k_{i−1}}) − f_b(t_{k_i − 1} − t_{k_{i−1}}))`
/// and, given `K`, the detector is excited at `T_c` with the conditional
/// probability of the last transition.
///
/// Panics for more than 20 arrivals.
pub fn excitation_by_subsets(trace: &ArrivalTrace, dev: &DeviceParams) -> Result<SubsetEnumeration> {
    let t = trace.times();
    let n = t.len();
    assert!(n <= 20, "subset enumeration is limited to 20 arrivals");
    if n == 0 {
        return Ok(SubsetEnumeration {
            excitation: 0.0,
            mass: 1.0,
            subsets: 1,
        });
    }
    let fb = |x: f64| ground_return_prob(x, dev);
    let mut excitation = 0.0;
    let mut mass = 0.0;
    let subsets = 1usize << (n - 1);
    for mask in 0..subsets {
        let members: Vec<usize> = std::iter::once(0)
            .chain((1..n).filter(|i| mask >> (i - 1) & 1 == 1))
            .collect();
        let mut p = 1.0;
        for w in members.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            p *= fb(t[cur] - t[prev]) - fb(t[cur - 1] - t[prev]);
        }
        let last = members[members.len() - 1];
        let t0 = t[n - 1] - t[last];
        p *= 1.0 - fb(t0);
        mass += p;
        if p > 0.0 {
            let k = transition_kernels(trace.t_c() - t[last], t0, dev)?;
            excitation += p * k.conditional_excitation();
        }
    }
    Ok(SubsetEnumeration {
        excitation,
        mass,
        subsets,
    })
}

/// Survivor arrivals by checking every pair: an arrival survives when no
/// other arrival lies strictly closer than `τ`.
pub fn survivors_pairwise(trace: &ArrivalTrace, window: &SaturationWindow) -> Vec<f64> {
    let t = trace.times();
    t.iter()
        .enumerate()
        .filter(|&(i, &ti)| {
            t.iter()
                .enumerate()
                .all(|(j, &tj)| i == j || (ti - tj).abs() >= window.tau)
        })
        .map(|(_, &ti)| ti)
        .collect()
}

/// Best state path found by scoring all `4^T` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveMap {
    pub symbols: Vec<u8>,
    pub states: Vec<usize>,
    /// Natural-log joint probability of the best path and the frames.
    pub log_score: f64,
}

/// `ln P(path, frames)` for a state path over the four-state chain starting
/// from ground with uniform symbol priors.
pub fn path_log_score(spec: &HmmSpec, frames: &[FrameStats], states: &[usize]) -> f64 {
    let ln_half = -std::f64::consts::LN_2;
    if states.is_empty() || state_parts(states[0]).0 != Level::Ground {
        return f64::NEG_INFINITY;
    }
    let mut s = 0.0;
    for (j, (&st, frame)) in states.iter().zip(frames).enumerate() {
        let (level, symbol) = state_parts(st);
        s += ln_half + spec.log_emission(level, symbol, frame);
        if let Some(&next) = states.get(j + 1) {
            s += spec.reset_ln[frame.last as usize][state_parts(next).0.index()];
        }
    }
    s
}

/// Exhaustive maximum a posteriori decoding; the first path in
/// lexicographic order wins ties. Panics for more than 10 frames.
pub fn exhaustive_map(spec: &HmmSpec, frames: &[FrameStats]) -> ExhaustiveMap {
    let t = frames.len();
    assert!((1..=10).contains(&t), "exhaustive MAP needs 1 to 10 frames");
    let mut best = ExhaustiveMap {
        symbols: Vec::new(),
        states: Vec::new(),
        log_score: f64::NEG_INFINITY,
    };
    let mut states = vec![0usize; t];
    for code in 0..1usize << (2 * t) {
        for (j, s) in states.iter_mut().enumerate() {
            *s = code >> (2 * (t - 1 - j)) & 3;
        }
        let score = path_log_score(spec, frames, &states);
        if score > best.log_score {
            best = ExhaustiveMap {
                symbols: states.iter().map(|&s| state_parts(s).1).collect(),
                states: states.clone(),
                log_score: score,
            };
        }
    }
    best
}
