//! Viterbi decoding and forward recursions over the link HMM.

use super::hmm::{state_parts, FrameStats, HmmSpec};
use crate::capture::Level;
use crate::error::{Error, Result};

const LN_HALF: f64 = -std::f64::consts::LN_2;

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln P(frame, exit | state)` for all `(from, to)` state pairs; the symbol
/// of `to` is free here, its prior is added by the callers.
fn step_scores(spec: &HmmSpec, frame: &FrameStats) -> [[f64; 4]; 4] {
    std::array::from_fn(|from| {
        let (level, symbol) = state_parts(from);
        let emit = spec.log_emission(level, symbol, frame);
        std::array::from_fn(|to| emit + spec.reset_ln[frame.last as usize][state_parts(to).0.index()])
    })
}

/// Maximum a posteriori state path; returns the symbol of every step.
///
/// Scores stay in the log domain with `−∞` for impossible branches. Ties go
/// to the smaller state index `2·level + symbol`.
pub fn viterbi_decode(spec: &HmmSpec, frames: &[FrameStats]) -> Result<Vec<u8>> {
    if frames.is_empty() {
        return Err(Error::Precondition("nothing to decode".into()));
    }
    // every frame starts from ground before the first symbol
    let mut delta: [f64; 4] = std::array::from_fn(|s| {
        if state_parts(s).0 == Level::Ground {
            LN_HALF
        } else {
            f64::NEG_INFINITY
        }
    });
    let mut back: Vec<[u8; 4]> = Vec::with_capacity(frames.len());
    for frame in &frames[..frames.len() - 1] {
        let w = step_scores(spec, frame);
        let mut next = [f64::NEG_INFINITY; 4];
        let mut arg = [0u8; 4];
        for to in 0..4 {
            for from in 0..4 {
                let v = delta[from] + w[from][to];
                if v > next[to] {
                    next[to] = v;
                    arg[to] = from as u8;
                }
            }
            next[to] += LN_HALF;
        }
        back.push(arg);
        delta = next;
    }
    let last = &frames[frames.len() - 1];
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for s in 0..4 {
        let (level, symbol) = state_parts(s);
        let v = delta[s] + spec.log_emission(level, symbol, last);
        if v > best_v {
            best_v = v;
            best = s;
        }
    }
    let mut out = vec![0u8; frames.len()];
    let mut s = best;
    for j in (0..frames.len()).rev() {
        out[j] = state_parts(s).1;
        if j > 0 {
            s = back[j - 1][s] as usize;
        }
    }
    Ok(out)
}

/// Per-symbol natural-log predictive likelihoods `ln P(o_j | o_<j)` with
/// the symbols hidden.
pub fn forward_increments(spec: &HmmSpec, frames: &[FrameStats]) -> Result<Vec<f64>> {
    let mut alpha: [f64; 4] = std::array::from_fn(|s| {
        if state_parts(s).0 == Level::Ground {
            LN_HALF
        } else {
            f64::NEG_INFINITY
        }
    });
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let w = step_scores(spec, frame);
        let next: [f64; 4] = std::array::from_fn(|to| {
            let terms: [f64; 4] = std::array::from_fn(|from| alpha[from] + w[from][to]);
            log_sum_exp(&terms) + LN_HALF
        });
        let norm = log_sum_exp(&next);
        if norm == f64::NEG_INFINITY {
            return Err(Error::Precondition(
                "observation sequence has zero probability under the model".into(),
            ));
        }
        alpha = next.map(|x| x - norm);
        out.push(norm);
    }
    Ok(out)
}

/// Per-symbol `ln P(o_j | o_<j, S)` with the transmitted symbols known and
/// only the qubit level hidden.
pub fn conditional_increments(spec: &HmmSpec, frames: &[FrameStats], symbols: &[u8]) -> Result<Vec<f64>> {
    if frames.len() != symbols.len() {
        return Err(Error::Precondition("frames and symbols differ in length".into()));
    }
    let mut alpha = [0.0, f64::NEG_INFINITY];
    let mut out = Vec::with_capacity(frames.len());
    for (frame, &sym) in frames.iter().zip(symbols) {
        let next: [f64; 2] = std::array::from_fn(|to| {
            let terms: [f64; 2] = std::array::from_fn(|from| {
                alpha[from] + spec.log_joint(Level::from_index(from), sym, frame, Level::from_index(to))
            });
            log_sum_exp(&terms)
        });
        let norm = log_sum_exp(&next);
        if norm == f64::NEG_INFINITY {
            return Err(Error::Precondition(
                "observation sequence has zero probability given the symbols".into(),
            ));
        }
        alpha = next.map(|x| x - norm);
        out.push(norm);
    }
    Ok(out)
}
