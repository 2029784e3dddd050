//! Closed-form versus oracle checks run by the `validate` command.

use rand::Rng;

use photonlink::detection::{excitation_poisson, MixtureConfig};
use photonlink::link::hmm::{build_hmm, FrameStats};
use photonlink::link::{forward_increments, viterbi_decode};
use photonlink::oracle::{excitation_by_subsets, exhaustive_map};
use photonlink::saturation::{mc_survivors_given_count, survivor_piece_integrals};
use photonlink::*;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Observed discrepancy, in the units of `tolerance`.
    pub error: f64,
    pub tolerance: f64,
    pub detail: String,
}

fn check(name: &'static str, error: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: error <= tolerance,
        error,
        tolerance,
        detail,
    }
}

fn identities() -> Result<CheckResult, CliError> {
    let dev = DeviceParams64::ideal(8.0, 1.0)?;
    let env = Environment64::new(0.0, 10e9, 800)?;
    let errs: [f64; 8] = [
        ground_return_prob(0.0, &dev).abs(),
        excited_prob(0.0, &dev).abs(),
        survivor_moments_given_count(0, 0.1f64, 1.0)?.mean.abs(),
        (survivor_moments_given_count(1, 0.1f64, 1.0)?.mean - 1.0).abs(),
        (survivor_moments_given_count(1, 0.1f64, 1.0)?.second_moment - 1.0).abs(),
        (survivor_moments_given_count(9, 1e-15f64, 1.0)?.mean - 9.0).abs(),
        delta_lambda(0.0f64, 0.1, 1.0)?.abs(),
        thermal_photon_rate(&env).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(check(
        "identities",
        worst,
        1e-12,
        format!("max deviation {worst:.2e} over 8 identities"),
    ))
}

fn renewal_vs_subsets(key: StreamKey) -> Result<CheckResult, CliError> {
    let mut rng = key.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let dev = DeviceParams::ideal(rng.random_range(0.5..40.0), rng.random_range(0.0..4.0))?;
        let n = rng.random_range(0..=6);
        let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        times.sort_by(f64::total_cmp);
        let trace = ArrivalTrace::new(times, 2.0)?;
        let brute = excitation_by_subsets(&trace, &dev)?;
        worst = worst
            .max((brute.excitation - excitation_given_arrivals(&trace, &dev)).abs())
            .max((brute.mass - 1.0).abs());
    }
    Ok(check(
        "renewal_vs_subsets",
        worst,
        1e-12,
        format!("300 random traces, max deviation {worst:.2e}"),
    ))
}

fn survivor_pieces() -> Result<CheckResult, CliError> {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 7] {
        for ratio in [0.05, 0.2] {
            let p = survivor_piece_integrals(n, ratio, 1.0)?;
            for (a, b) in p.numeric.iter().zip(&p.closed) {
                let scale = b.abs().max(1e-300);
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    Ok(check(
        "survivor_pieces",
        worst,
        1e-8,
        format!("max relative deviation {worst:.2e}"),
    ))
}

fn survivor_moments_mc(replicas: u64, key: StreamKey) -> Result<CheckResult, CliError> {
    let mut worst: f64 = 0.0;
    for (i, n) in [2usize, 5, 20].into_iter().enumerate() {
        let closed = survivor_moments_given_count(n, 1.0, 8.0)?;
        let mc = mc_survivors_given_count(n, 1.0, 8.0, replicas, key.child(i as u64));
        worst = worst
            .max(mc.mean.z_against(closed.mean))
            .max(mc.variance.z_against(closed.variance));
    }
    Ok(check(
        "survivor_moments_mc",
        worst,
        4.0,
        format!("N in {{2, 5, 20}}, T/tau = 8, {replicas} replicas, max |z| {worst:.2}"),
    ))
}

fn single_crossing() -> Result<CheckResult, CliError> {
    let mut bad = 0.0;
    let mut detail = Vec::new();
    for ratio in [4.0, 10.0, 100.0] {
        let grid: Vec<f64> = (0..1000)
            .map(|i| (1e-4f64.ln() + (50f64.ln() - 1e-4f64.ln()) * i as f64 / 999.0).exp())
            .collect();
        let signs: Vec<bool> = grid
            .iter()
            .map(|&a| delta_lambda(a, 1.0, ratio).map(|d| d > 0.0))
            .collect::<Result<_, _>>()?;
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        let root = find_lambda0(1.0, ratio)?;
        let below_sub = grid.iter().zip(&signs).all(|(&a, &pos)| a >= root || pos);
        let above_super = grid.iter().zip(&signs).all(|(&a, &pos)| a <= root || !pos);
        if changes != 1 || !below_sub || !above_super {
            bad += 1.0;
        }
        detail.push(format!("T/tau={ratio}: {changes} change(s), lambda0*tau={root:.4}"));
    }
    Ok(check("single_crossing", bad, 0.0, detail.join("; ")))
}

fn mixture_vs_oracles(cfg: &ExperimentConfig, key: StreamKey) -> Result<[CheckResult; 2], CliError> {
    let dev = cfg.device()?;
    let timing = cfg.timing()?;
    let lambda = 0.5 / timing.t_c;
    let mix = MixtureConfig {
        eps_trunc: cfg.mc.eps_trunc,
        mc_samples: cfg.mc.replicas,
    };
    let mixture = excitation_poisson(lambda, &timing, &dev, &mix, key.child(0));
    let mc = mc_detector(lambda, &timing, &dev, Level::Ground, cfg.mc.replicas, key.child(1)).excited_at_obs;
    let exact = excitation_poisson_exact(lambda, &timing, &dev, Level::Ground);
    let z_mc = mixture.z_score(&mc);
    let z_exact = mixture.z_against(exact);
    Ok([
        check(
            "mixture_vs_event_mc",
            z_mc,
            4.0,
            format!(
                "lambda*T_c = 0.5: mixture {:.6} vs event-driven {:.6}, |z| {z_mc:.2}",
                mixture.mean, mc.mean
            ),
        ),
        check(
            "mixture_vs_ctmc",
            z_exact,
            4.0,
            format!(
                "lambda*T_c = 0.5: mixture {:.6} vs exact {exact:.6}, |z| {z_exact:.2}",
                mixture.mean
            ),
        ),
    ])
}

fn kernel(p: (f64, f64), reset: [f64; 2]) -> CycleKernel {
    CycleKernel {
        rate: 0.0,
        readout: [p.0, p.1],
        reset,
    }
}

fn frames_of_length(n: usize) -> Vec<FrameStats> {
    (0..1u32 << n)
        .map(|m| FrameStats::from_bits(&(0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
        .collect()
}

fn viterbi_vs_map(key: StreamKey) -> Result<CheckResult, CliError> {
    let mut rng = key.rng();
    let mut mismatches = 0.0;
    let mut cases = 0;
    for _ in 0..20 {
        let reset = [rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)];
        let k0 = kernel((rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)), reset);
        let k1 = kernel((rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)), reset);
        let spec = build_hmm(k0, k1, 3)?;
        let frames = frames_of_length(3);
        for a in &frames {
            for b in &frames {
                let obs = [*a, *b];
                cases += 1;
                if viterbi_decode(&spec, &obs)? != exhaustive_map(&spec, &obs).symbols {
                    mismatches += 1.0;
                }
            }
        }
    }
    Ok(check(
        "viterbi_vs_exhaustive_map",
        mismatches,
        0.0,
        format!("{mismatches} mismatches in {cases} two-symbol sequences"),
    ))
}

fn forward_normalisation() -> Result<CheckResult, CliError> {
    let spec = build_hmm(kernel((0.1, 0.7), [0.05, 0.2]), kernel((0.6, 0.9), [0.05, 0.2]), 2)?;
    let frames = frames_of_length(2);
    let mut total = 0.0;
    for a in &frames {
        for b in &frames {
            for c in &frames {
                total += forward_increments(&spec, &[*a, *b, *c])?.iter().sum::<f64>().exp();
            }
        }
    }
    let err = (total - 1.0).abs();
    Ok(check(
        "forward_normalisation",
        err,
        1e-12,
        format!("sum over all observations {total:.15}"),
    ))
}

fn kernel_rows(cfg: &ExperimentConfig) -> Result<CheckResult, CliError> {
    let link = cfg.link(false)?;
    let n_e = thermal_photon_rate(&link.environment);
    let mut worst: f64 = 0.0;
    for p in [-170.0, -155.0, -148.3, -140.0, -120.0] {
        let lambda = power_to_rate(p, link.environment.nu);
        let k = build_cycle_kernel(&link.device, &link.timing, lambda, n_e, None)?;
        for row in k.table() {
            worst = worst.max((row.iter().flatten().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(check(
        "kernel_rows",
        worst,
        1e-12,
        format!("max row-sum deviation {worst:.2e}"),
    ))
}

fn fit_recovery() -> Result<CheckResult, CliError> {
    let reference = CutoffFit::reference();
    let samples: Vec<(f64, f64)> = (0..13)
        .map(|i| 10f64.powf(2.0 + 0.25 * i as f64))
        .map(|x| (x, reference.eval(x)))
        .collect();
    let fit = fit_cutoff_curve(&samples)?;
    let err = [
        (fit.a - reference.a) / reference.a,
        (fit.b - reference.b) / reference.b,
        (fit.c - reference.c) / reference.c,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(check(
        "fit_recovery",
        err,
        1e-6,
        format!("a = {:.6}, b = {:.6}, c = {:.6}", fit.a, fit.b, fit.c),
    ))
}

/// Runs every check; check `i` draws from `key.child(i)`.
pub fn run_checks(cfg: &ExperimentConfig, key: StreamKey) -> Result<Vec<CheckResult>, CliError> {
    let mut out = vec![
        identities()?,
        renewal_vs_subsets(key.child(1))?,
        survivor_pieces()?,
        survivor_moments_mc(cfg.mc.replicas, key.child(3))?,
        single_crossing()?,
    ];
    out.extend(mixture_vs_oracles(cfg, key.child(5))?);
    out.push(viterbi_vs_map(key.child(6))?);
    out.push(forward_normalisation()?);
    out.push(kernel_rows(cfg)?);
    out.push(fit_recovery()?);
    Ok(out)
}
