//! Four-state hidden Markov model over (qubit level, OOK symbol).
//!
//! A frame of `N` readout bits depends on the cycle kernel only through the
//! first bit, the last bit and the four bigram counts: the level entering
//! cycle `n + 1` is drawn from the reset row of bit `n`, so consecutive bits
//! form a Markov chain with transition `T_S(b, b') = Σ_l P(l | b) P(b' | l, S)`.

use super::kernel::CycleKernel;
use crate::capture::Level;
use crate::error::{Error, Result};

/// State index `2·level + symbol`.
#[inline]
pub fn state_index(level: Level, symbol: u8) -> usize {
    2 * level.index() + symbol as usize
}

#[inline]
pub fn state_parts(index: usize) -> (Level, u8) {
    (Level::from_index(index / 2), (index % 2) as u8)
}

/// Sufficient statistics of one observation frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FrameStats {
    pub first: bool,
    pub last: bool,
    /// `counts[b][b']`: number of adjacent bit pairs `(b, b')`.
    pub counts: [[u32; 2]; 2],
}

impl FrameStats {
    pub fn from_bits(bits: &[bool]) -> Self {
        assert!(!bits.is_empty(), "a frame holds at least one cycle");
        let mut counts = [[0u32; 2]; 2];
        for w in bits.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1;
        }
        Self {
            first: bits[0],
            last: bits[bits.len() - 1],
            counts,
        }
    }

    pub fn len(&self) -> usize {
        1 + self.counts.iter().flatten().map(|&c| c as usize).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ones(&self) -> usize {
        self.first as usize + self.counts[0][1] as usize + self.counts[1][1] as usize
    }
}

/// Per-symbol quantities derived from a cycle kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SymbolLaw {
    /// `ln P(first bit | entry level)`, `[level][bit]`.
    pub first: [[f64; 2]; 2],
    /// `ln T_S(b, b')`.
    pub step: [[f64; 2]; 2],
    /// Plain `T_S(b, b')`.
    pub step_p: [[f64; 2]; 2],
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

impl SymbolLaw {
    fn new(k: &CycleKernel) -> Self {
        let step_p: [[f64; 2]; 2] = std::array::from_fn(|b| {
            std::array::from_fn(|b2| {
                Level::ALL
                    .iter()
                    .map(|&l| k.exit_prob(b == 1, l) * k.bit_prob(l, b2 == 1))
                    .sum()
            })
        });
        Self {
            first: std::array::from_fn(|l| std::array::from_fn(|b| ln(k.bit_prob(Level::from_index(l), b == 1)))),
            step: step_p.map(|row| row.map(ln)),
            step_p,
        }
    }

    /// `ln P(frame | entry level)`; products with a zero count are skipped so
    /// an impossible but unused transition does not poison the sum.
    fn log_emission(&self, entry: Level, f: &FrameStats) -> f64 {
        let mut s = self.first[entry.index()][f.first as usize];
        for b in 0..2 {
            for b2 in 0..2 {
                let c = f.counts[b][b2];
                if c > 0 {
                    s += c as f64 * self.step[b][b2];
                }
            }
        }
        s
    }
}

/// The link HMM: two per-symbol kernels sharing one reset law, `N` cycles per
/// symbol, uniform symbol prior.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSpec {
    pub kernels: [CycleKernel; 2],
    pub cycles_per_symbol: usize,
    pub(crate) laws: [SymbolLaw; 2],
    /// `ln P(exit | last bit)`, `[bit][exit level]`.
    pub(crate) reset_ln: [[f64; 2]; 2],
}

impl HmmSpec {
    /// Exit-level distribution `P(exit | entry, symbol)` after a whole frame.
    pub fn exit_distribution(&self, entry: Level, symbol: u8) -> [f64; 2] {
        let law = &self.laws[symbol as usize];
        let k = &self.kernels[symbol as usize];
        let mut last = [k.bit_prob(entry, false), k.bit_prob(entry, true)];
        for _ in 1..self.cycles_per_symbol {
            last = std::array::from_fn(|b2| last[0] * law.step_p[0][b2] + last[1] * law.step_p[1][b2]);
        }
        std::array::from_fn(|e| {
            (0..2)
                .map(|b| last[b] * k.exit_prob(b == 1, Level::from_index(e)))
                .sum()
        })
    }

    /// Symbol-level transition matrix over the four states.
    pub fn transition_matrix(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|from| {
            let (level, symbol) = state_parts(from);
            let exit = self.exit_distribution(level, symbol);
            std::array::from_fn(|to| {
                let (l2, _) = state_parts(to);
                exit[l2.index()] * 0.5
            })
        })
    }

    /// `ln P(frame | entry, symbol)`.
    pub fn log_emission(&self, entry: Level, symbol: u8, frame: &FrameStats) -> f64 {
        self.laws[symbol as usize].log_emission(entry, frame)
    }

    /// `ln P(frame, exit | entry, symbol)`.
    pub fn log_joint(&self, entry: Level, symbol: u8, frame: &FrameStats, exit: Level) -> f64 {
        self.log_emission(entry, symbol, frame) + self.reset_ln[frame.last as usize][exit.index()]
    }

    /// `P(bits, exit | entry, symbol)` by an explicit forward product of the
    /// per-cycle kernel over the hidden level of every cycle.
    pub fn block_emission_explicit(&self, bits: &[bool], entry: Level, symbol: u8) -> [f64; 2] {
        let k = &self.kernels[symbol as usize];
        let mut level = [0.0; 2];
        level[entry.index()] = 1.0;
        for &b in bits {
            level = std::array::from_fn(|e| {
                Level::ALL
                    .iter()
                    .map(|&l| level[l.index()] * k.joint(l, b, Level::from_index(e)))
                    .sum()
            });
        }
        level
    }
}

/// Assembles the HMM from the symbol-0 and symbol-1 kernels.
pub fn build_hmm(kernel0: CycleKernel, kernel1: CycleKernel, n: usize) -> Result<HmmSpec> {
    if n == 0 {
        return Err(crate::error::invalid("cycles_per_symbol", "must be at least 1"));
    }
    if kernel0.reset != kernel1.reset {
        return Err(Error::Precondition(
            "both symbol kernels must share the reset probabilities".into(),
        ));
    }
    let reset_ln =
        std::array::from_fn(|b| std::array::from_fn(|e| ln(kernel0.exit_prob(b == 1, Level::from_index(e)))));
    Ok(HmmSpec {
        kernels: [kernel0, kernel1],
        cycles_per_symbol: n,
        laws: [SymbolLaw::new(&kernel0), SymbolLaw::new(&kernel1)],
        reset_ln,
    })
}
