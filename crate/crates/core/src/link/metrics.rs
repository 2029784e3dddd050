//! Bit error rate and achievable-rate estimation over received-power grids.

use rand::Rng;
use rayon::prelude::*;

use super::decode::{conditional_increments, forward_increments};
use super::sim::{simulate_link, LinkConfig, LinkModel, LinkRun, SimMode};
use crate::error::{Error, Result};
use crate::montecarlo::StreamKey;
use crate::params::Power;
use crate::report::{Record, Value};

/// Half-width of the Wilson score interval at `z = 1`, used as the standard
/// error of an error-rate estimate. Stays positive when no errors occur.
pub fn wilson_stderr(errors: usize, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let n = n as f64;
    let p = errors as f64 / n;
    (p * (1.0 - p) / n + 1.0 / (4.0 * n * n)).sqrt() / (1.0 + 1.0 / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub power_dbm: f64,
    pub lambda_t_c: f64,
    pub n_e: f64,
    pub ber: f64,
    pub stderr: f64,
    pub n_symbols: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub n_cycles: usize,
    pub seed: u64,
}

fn link_values(r: [f64; 5], n_symbols: usize, kappa: f64, gamma: f64, n_cycles: usize, seed: u64) -> Vec<Value> {
    let mut v: Vec<Value> = r.iter().map(|&x| x.into()).collect();
    v.push(n_symbols.into());
    v.push(kappa.into());
    v.push(gamma.into());
    v.push(n_cycles.into());
    v.push(seed.into());
    v
}

impl Record for BerRow {
    fn columns() -> &'static [&'static str] {
        &[
            "power_dbm",
            "lambda_t_c",
            "n_e",
            "ber",
            "stderr",
            "n_symbols",
            "kappa",
            "gamma",
            "n_cycles",
            "seed",
        ]
    }

    fn values(&self) -> Vec<Value> {
        link_values(
            [self.power_dbm, self.lambda_t_c, self.n_e, self.ber, self.stderr],
            self.n_symbols,
            self.kappa,
            self.gamma,
            self.n_cycles,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub power_dbm: f64,
    pub lambda_t_c: f64,
    pub n_e: f64,
    pub rate: f64,
    pub stderr: f64,
    pub n_symbols: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub n_cycles: usize,
    pub seed: u64,
}

impl Record for RateRow {
    fn columns() -> &'static [&'static str] {
        &[
            "power_dbm",
            "lambda_t_c",
            "n_e",
            "rate",
            "stderr",
            "n_symbols",
            "kappa",
            "gamma",
            "n_cycles",
            "seed",
        ]
    }

    fn values(&self) -> Vec<Value> {
        link_values(
            [self.power_dbm, self.lambda_t_c, self.n_e, self.rate, self.stderr],
            self.n_symbols,
            self.kappa,
            self.gamma,
            self.n_cycles,
            self.seed,
        )
    }
}

/// Point `i` of a power sweep: model kernel on `child(i).child(0)`, symbols
/// on `child(i).child(1)`, bootstrap on `child(i).child(2)`.
fn point_keys(key: StreamKey, i: usize) -> [StreamKey; 3] {
    let k = key.child(i as u64);
    [k.child(0), k.child(1), k.child(2)]
}

fn check_grid(powers: &[f64], n_symbols: usize) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::EmptySweep);
    }
    if n_symbols == 0 {
        return Err(crate::error::invalid("n_symbols", "must be at least 1"));
    }
    Ok(())
}

/// Empirical symbol error rate of Viterbi decoding at each received power.
pub fn estimate_ber(
    cfg: &LinkConfig,
    powers: &[f64],
    n_symbols: usize,
    mode: SimMode,
    key: StreamKey,
) -> Result<Vec<BerRow>> {
    check_grid(powers, n_symbols)?;
    powers
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let [k_model, k_sim, _] = point_keys(key, i);
            let model = LinkModel::new(cfg, Power::from(p), k_model)?;
            let run = simulate_link(&model, mode, n_symbols, false, k_sim)?;
            let errors = run.symbol_errors();
            Ok(BerRow {
                power_dbm: p,
                lambda_t_c: model.lambda_signal * cfg.timing.t_c,
                n_e: model.n_e,
                ber: errors as f64 / n_symbols as f64,
                stderr: wilson_stderr(errors, n_symbols),
                n_symbols,
                kappa: cfg.device.kappa,
                gamma: cfg.device.gamma,
                n_cycles: cfg.environment.cycles_per_symbol,
                seed: key.root_seed(),
            })
        })
        .collect()
}

/// Mutual information per symbol with its ingredients, all in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// `Ĥ(O) − Ĥ(O|S)`, clamped to `[0, 1]`.
    pub rate: f64,
    pub stderr: f64,
    pub h_obs: f64,
    pub h_obs_given_symbols: f64,
    pub used_symbols: usize,
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Ergodic-average estimate of `I(S; O)` from one long run, discarding the
/// first `burn_in` symbols. The standard error is a moving-block bootstrap
/// over per-symbol information increments.
pub fn estimate_rate_from_run(
    model: &LinkModel,
    run: &LinkRun,
    burn_in: usize,
    key: StreamKey,
) -> Result<RateEstimate> {
    let all = forward_increments(&model.hmm, &run.frames)?;
    let cond = conditional_increments(&model.hmm, &run.frames, &run.symbols)?;
    if burn_in >= all.len() {
        return Err(Error::Precondition(format!(
            "burn-in of {burn_in} symbols leaves nothing of a {}-symbol run",
            all.len()
        )));
    }
    let log2e = std::f64::consts::LOG2_E;
    let info: Vec<f64> = cond[burn_in..]
        .iter()
        .zip(&all[burn_in..])
        .map(|(c, a)| (c - a) * log2e)
        .collect();
    let n = info.len();
    let mean = info.iter().sum::<f64>() / n as f64;
    let h_obs = -all[burn_in..].iter().sum::<f64>() * log2e / n as f64;
    let h_cond = -cond[burn_in..].iter().sum::<f64>() * log2e / n as f64;

    let block = ((n as f64).sqrt() as usize).clamp(1, 1000);
    let n_blocks = n / block;
    let stderr = if n_blocks < 2 {
        f64::NAN
    } else {
        let block_means: Vec<f64> = (0..n_blocks)
            .map(|b| info[b * block..(b + 1) * block].iter().sum::<f64>() / block as f64)
            .collect();
        let mut rng = key.rng();
        let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                (0..n_blocks)
                    .map(|_| block_means[rng.random_range(0..n_blocks)])
                    .sum::<f64>()
                    / n_blocks as f64
            })
            .collect();
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        (reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
    };
    Ok(RateEstimate {
        rate: mean.clamp(0.0, 1.0),
        stderr,
        h_obs,
        h_obs_given_symbols: h_cond,
        used_symbols: n,
    })
}

/// Achievable rate at each received power, from HMM-sampled runs.
pub fn estimate_rate(
    cfg: &LinkConfig,
    powers: &[f64],
    n_symbols: usize,
    burn_in: usize,
    key: StreamKey,
) -> Result<Vec<RateRow>> {
    check_grid(powers, n_symbols)?;
    powers
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let [k_model, k_sim, k_boot] = point_keys(key, i);
            let model = LinkModel::new(cfg, Power::from(p), k_model)?;
            let run = simulate_link(&model, SimMode::Hmm, n_symbols, false, k_sim)?;
            let est = estimate_rate_from_run(&model, &run, burn_in, k_boot)?;
            Ok(RateRow {
                power_dbm: p,
                lambda_t_c: model.lambda_signal * cfg.timing.t_c,
                n_e: model.n_e,
                rate: est.rate,
                stderr: est.stderr,
                n_symbols,
                kappa: cfg.device.kappa,
                gamma: cfg.device.gamma,
                n_cycles: cfg.environment.cycles_per_symbol,
                seed: key.root_seed(),
            })
        })
        .collect()
}
