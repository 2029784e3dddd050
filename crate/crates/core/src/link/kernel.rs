//! Per-cycle emission kernel: entry level → (readout bit, exit level).

use crate::capture::Level;
use crate::detection::StageProbabilities;
use crate::error::{invalid, Result};
use crate::montecarlo::StreamKey;
use crate::params::{CycleTiming, DeviceParams};
use crate::saturation::{saturated_excitation_with, SaturationWindow};

/// Monte Carlo settings for a capture stage with dead-time saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturatedCapture {
    pub window: SaturationWindow,
    pub replicas: u64,
    pub key: StreamKey,
}

/// Joint distribution of the readout bit and the exit level for one cycle,
/// factored as `P(bit | entry) · P(exit | bit)`: the reset acts only on what
/// the readout reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleKernel {
    /// Total arrival rate during capture (signal plus thermal), 1/s.
    pub rate: f64,
    /// `P(bit = 1 | entry level)`, indexed by [`Level::index`].
    pub readout: [f64; 2],
    /// `P(exit excited | bit)`, indexed by the bit.
    pub reset: [f64; 2],
}

impl CycleKernel {
    pub fn bit_prob(&self, entry: Level, bit: bool) -> f64 {
        let p = self.readout[entry.index()];
        if bit {
            p
        } else {
            1.0 - p
        }
    }

    pub fn exit_prob(&self, bit: bool, exit: Level) -> f64 {
        let p = self.reset[bit as usize];
        match exit {
            Level::Excited => p,
            Level::Ground => 1.0 - p,
        }
    }

    /// `P(bit, exit | entry)`.
    pub fn joint(&self, entry: Level, bit: bool, exit: Level) -> f64 {
        self.bit_prob(entry, bit) * self.exit_prob(bit, exit)
    }

    /// Full table `[entry][bit][exit]`.
    pub fn table(&self) -> [[[f64; 2]; 2]; 2] {
        std::array::from_fn(|i| {
            std::array::from_fn(|b| {
                std::array::from_fn(|e| self.joint(Level::from_index(i), b == 1, Level::from_index(e)))
            })
        })
    }
}

/// Builds the kernel for a capture window receiving `lambda_signal` plus a
/// thermal background of `n_e` photons per window.
pub fn build_cycle_kernel(
    dev: &DeviceParams,
    timing: &CycleTiming,
    lambda_signal: f64,
    n_e: f64,
    saturation: Option<&SaturatedCapture>,
) -> Result<CycleKernel> {
    if !(lambda_signal >= 0.0) || !(n_e >= 0.0) {
        return Err(invalid("rate", "signal rate and thermal count must be non-negative"));
    }
    let rate = lambda_signal + n_e / timing.t_c;
    let readout = std::array::from_fn(|i| {
        let entry = Level::from_index(i);
        let stages = match (saturation, entry) {
            (Some(sat), Level::Ground) => {
                let p = saturated_excitation_with(rate, timing, dev, entry, sat.window.tau, sat.replicas, sat.key);
                StageProbabilities::from_excitation(p.mean, timing, dev)
            }
            // an excited entry absorbs nothing, so the window is irrelevant
            _ => crate::detection::stage_probabilities_from(rate, timing, dev, entry),
        };
        stages.p_readout
    });
    Ok(CycleKernel {
        rate,
        readout,
        reset: [dev.p_reset_g, dev.p_reset_e],
    })
}
