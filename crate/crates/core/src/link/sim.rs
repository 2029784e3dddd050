//! Symbol-level link simulation, either by sampling the HMM or by running
//! the event-driven detector for every cycle.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::decode::viterbi_decode;
use super::hmm::{FrameStats, HmmSpec};
use super::kernel::{build_cycle_kernel, SaturatedCapture};
use crate::capture::Level;
use crate::detection::run_cycle;
use crate::error::Result;
use crate::montecarlo::{bernoulli, SimRng, StreamKey};
use crate::params::{CycleTiming, DeviceParams, Environment, Power};
use crate::physics::{power_to_rate, thermal_photon_rate};
use crate::saturation::SaturationWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Hmm,
    Physical,
}

/// Everything needed to simulate one received power level.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub device: DeviceParams,
    pub timing: CycleTiming,
    pub environment: Environment,
    /// Replicas for the saturated capture kernel; `None` ignores saturation.
    pub saturation_replicas: Option<u64>,
}

/// HMM plus the physical parameters it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub hmm: HmmSpec,
    pub device: DeviceParams,
    pub timing: CycleTiming,
    /// Capture arrival rate for symbol 0 and symbol 1, 1/s.
    pub rates: [f64; 2],
    pub lambda_signal: f64,
    pub n_e: f64,
    pub tau: Option<f64>,
}

impl LinkModel {
    /// Builds the model at `power`; `key` seeds the saturated-capture kernel
    /// estimate when saturation is enabled.
    pub fn new(cfg: &LinkConfig, power: Power, key: StreamKey) -> Result<Self> {
        let lambda_signal = power_to_rate(power.dbm(), cfg.environment.nu);
        let n_e = thermal_photon_rate(&cfg.environment);
        Self::from_rates(cfg, lambda_signal, n_e, key)
    }

    pub fn from_rates(cfg: &LinkConfig, lambda_signal: f64, n_e: f64, key: StreamKey) -> Result<Self> {
        let sat = cfg.saturation_replicas.map(|replicas| SaturatedCapture {
            window: SaturationWindow::from_device(&cfg.device),
            replicas,
            key,
        });
        let k0 = build_cycle_kernel(&cfg.device, &cfg.timing, 0.0, n_e, sat.as_ref())?;
        let sat1 = sat.map(|s| SaturatedCapture { key: key.child(1), ..s });
        let k1 = build_cycle_kernel(&cfg.device, &cfg.timing, lambda_signal, n_e, sat1.as_ref())?;
        let hmm = super::hmm::build_hmm(k0, k1, cfg.environment.cycles_per_symbol)?;
        Ok(Self {
            hmm,
            device: cfg.device,
            timing: cfg.timing,
            rates: [k0.rate, k1.rate],
            lambda_signal,
            n_e,
            tau: sat.map(|s| s.window.tau),
        })
    }
}

/// Transmitted symbols, received frames and their decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRun {
    pub symbols: Vec<u8>,
    pub frames: Vec<FrameStats>,
    /// Raw frame bits, kept only on request.
    pub bits: Option<Vec<Vec<bool>>>,
    pub decoded: Vec<u8>,
    pub seed: u64,
    pub cycles_per_symbol: usize,
}

impl LinkRun {
    pub fn symbol_errors(&self) -> usize {
        self.symbols.iter().zip(&self.decoded).filter(|(a, b)| a != b).count()
    }

    /// One line per symbol: the symbol bit, a space, then the frame bits.
    pub fn frame_dump(&self) -> Option<String> {
        let bits = self.bits.as_ref()?;
        let mut out = String::with_capacity(bits.len() * (self.cycles_per_symbol + 3));
        for (s, frame) in self.symbols.iter().zip(bits) {
            out.push(if *s == 1 { '1' } else { '0' });
            out.push(' ');
            out.extend(frame.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        Some(out)
    }
}

/// Number of further repeats of the current bit before it switches, capped
/// at `cap`.
fn stays<R: Rng + ?Sized>(rng: &mut R, p_switch: f64, cap: u64) -> u64 {
    if p_switch <= 0.0 {
        return cap;
    }
    if p_switch >= 1.0 {
        return 0;
    }
    Geometric::new(p_switch)
        .expect("switch probability in (0, 1)")
        .sample(rng)
        .min(cap)
}

fn sample_frame_hmm(
    rng: &mut SimRng,
    hmm: &HmmSpec,
    entry: Level,
    symbol: u8,
    keep: bool,
) -> (FrameStats, Option<Vec<bool>>) {
    let k = &hmm.kernels[symbol as usize];
    let step = &hmm.laws[symbol as usize].step_p;
    let n = hmm.cycles_per_symbol;
    let first = bernoulli(rng, k.bit_prob(entry, true));
    if keep {
        let mut bits = Vec::with_capacity(n);
        bits.push(first);
        let mut b = first;
        for _ in 1..n {
            b = bernoulli(rng, step[b as usize][1]);
            bits.push(b);
        }
        return (FrameStats::from_bits(&bits), Some(bits));
    }
    let mut counts = [[0u32; 2]; 2];
    let mut b = first as usize;
    let mut remaining = (n - 1) as u64;
    while remaining > 0 {
        let k = stays(rng, step[b][1 - b], remaining);
        counts[b][b] += k as u32;
        remaining -= k;
        if remaining > 0 {
            counts[b][1 - b] += 1;
            remaining -= 1;
            b = 1 - b;
        }
    }
    (
        FrameStats {
            first,
            last: b == 1,
            counts,
        },
        None,
    )
}

fn sample_frame_physical(rng: &mut SimRng, model: &LinkModel, entry: Level, symbol: u8) -> (Vec<bool>, Level) {
    let n = model.hmm.cycles_per_symbol;
    let rate = model.rates[symbol as usize];
    let mut bits = Vec::with_capacity(n);
    let mut level = entry;
    for _ in 0..n {
        let o = run_cycle(rng, rate, &model.timing, &model.device, level, model.tau);
        bits.push(o.readout_bit);
        level = o.exit_level;
    }
    (bits, level)
}

/// Simulates `n_symbols` equiprobable OOK symbols starting from ground and
/// decodes them with Viterbi. Symbol `t` draws from `key.child(t)`.
pub fn simulate_link(
    model: &LinkModel,
    mode: SimMode,
    n_symbols: usize,
    keep_bits: bool,
    key: StreamKey,
) -> Result<LinkRun> {
    if n_symbols == 0 {
        return Err(crate::error::invalid("n_symbols", "must be at least 1"));
    }
    let mut symbols = Vec::with_capacity(n_symbols);
    let mut frames = Vec::with_capacity(n_symbols);
    let mut all_bits = keep_bits.then(|| Vec::with_capacity(n_symbols));
    let mut level = Level::Ground;
    // one substream per symbol, so runs of nearly equal models stay coupled
    for t in 0..n_symbols {
        let mut rng = key.child(t as u64).rng();
        let symbol = rng.random::<bool>() as u8;
        symbols.push(symbol);
        match mode {
            SimMode::Hmm => {
                let (stats, bits) = sample_frame_hmm(&mut rng, &model.hmm, level, symbol, keep_bits);
                let exit_excited = bernoulli(&mut rng, model.hmm.kernels[symbol as usize].reset[stats.last as usize]);
                level = if exit_excited { Level::Excited } else { Level::Ground };
                frames.push(stats);
                if let (Some(all), Some(bits)) = (all_bits.as_mut(), bits) {
                    all.push(bits);
                }
            }
            SimMode::Physical => {
                let (bits, exit) = sample_frame_physical(&mut rng, model, level, symbol);
                level = exit;
                frames.push(FrameStats::from_bits(&bits));
                if let Some(all) = all_bits.as_mut() {
                    all.push(bits);
                }
            }
        }
    }
    let decoded = viterbi_decode(&model.hmm, &frames)?;
    Ok(LinkRun {
        symbols,
        frames,
        bits: all_bits,
        decoded,
        seed: key.root_seed(),
        cycles_per_symbol: model.hmm.cycles_per_symbol,
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn config(n: usize) -> LinkConfig {
        LinkConfig {
            device: DeviceParams {
                p_reset_g: 0.01,
                p_reset_e: 0.05,
                ..DeviceParams::ideal(2.0 * PI * 1e9, 2.0 * PI * 1e5).unwrap()
            },
            timing: CycleTiming::new(230e-9, 35e-9, 48e-9).unwrap(),
            environment: Environment::new(8.0, 10e9, n).unwrap(),
            saturation_replicas: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::config;
    use super::*;

    #[test]
    fn deterministic_kernels_repeat_symbols() {
        let mut model = LinkModel::from_rates(&config(5), 0.0, 0.0, StreamKey::new(0)).unwrap();
        let k0 = super::super::hmm::tests::kernel(0.0, 0.0, [0.0, 0.0]);
        let k1 = super::super::hmm::tests::kernel(1.0, 1.0, [0.0, 0.0]);
        model.hmm = super::super::hmm::build_hmm(k0, k1, 5).unwrap();
        let run = simulate_link(&model, SimMode::Hmm, 200, true, StreamKey::new(3)).unwrap();
        for (s, bits) in run.symbols.iter().zip(run.bits.as_ref().unwrap()) {
            assert!(bits.iter().all(|&b| b == (*s == 1)));
        }
        assert_eq!(run.symbol_errors(), 0);
    }

    #[test]
    fn geometric_runs_match_bitwise_sampling() {
        let model = LinkModel::from_rates(&config(40), 3e6, 0.3, StreamKey::new(0)).unwrap();
        let a = simulate_link(&model, SimMode::Hmm, 20_000, false, StreamKey::new(1)).unwrap();
        let b = simulate_link(&model, SimMode::Hmm, 20_000, true, StreamKey::new(2)).unwrap();
        let ones = |r: &LinkRun| r.frames.iter().map(|f| f.ones() as f64).sum::<f64>() / r.frames.len() as f64;
        let var = |r: &LinkRun| {
            let m = ones(r);
            r.frames.iter().map(|f| (f.ones() as f64 - m).powi(2)).sum::<f64>() / r.frames.len() as f64
        };
        let se = (var(&a) / 20_000.0).sqrt().hypot((var(&b) / 20_000.0).sqrt());
        assert!((ones(&a) - ones(&b)).abs() < 4.0 * se);
        assert!(a.frames.iter().all(|f| f.len() == 40));
    }

    #[test]
    fn reproducible() {
        let model = LinkModel::from_rates(&config(20), 1e6, 0.02, StreamKey::new(0)).unwrap();
        let a = simulate_link(&model, SimMode::Physical, 300, true, StreamKey::new(8)).unwrap();
        let b = simulate_link(&model, SimMode::Physical, 300, true, StreamKey::new(8)).unwrap();
        assert_eq!(a, b);
        assert!(a.frame_dump().unwrap().lines().all(|l| l.len() == 22));
    }
}
