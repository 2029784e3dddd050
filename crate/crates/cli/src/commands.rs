//! The experiment commands. Each returns the reports it produced; writing
//! them out is left to the caller.

use rayon::prelude::*;

use photonlink::fit::fit_cutoff_curve;
use photonlink::quadrature::QuadConfig;
use photonlink::saturation::{find_lambda0, CutoffSweep};
use photonlink::*;

use crate::config::ExperimentConfig;
use crate::figures::emit_figure_data;
use crate::validate::{run_checks, CheckResult};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Detect,
    MissSweep,
    BerSweep,
    RateSweep,
    SaturationSweep,
    CutoffFit,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Detect => "detect",
            Command::MissSweep => "miss-sweep",
            Command::BerSweep => "ber-sweep",
            Command::RateSweep => "rate-sweep",
            Command::SaturationSweep => "saturation-sweep",
            Command::CutoffFit => "cutoff-fit",
            Command::Validate => "validate",
        }
    }
}

/// One CSV file to write.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub file: String,
    pub csv: String,
    pub rows: usize,
}

impl Output {
    fn table(file: &str, report: &SweepReport) -> Self {
        Self {
            file: file.to_string(),
            csv: report.to_csv(),
            rows: report.len(),
        }
    }

    fn figure(id: &str, report: &SweepReport) -> Result<Self, CliError> {
        Ok(Self {
            file: format!("fig{id}.csv"),
            csv: emit_figure_data(report, id)?,
            rows: report.len(),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub outputs: Vec<Output>,
    /// Names of failed validation checks.
    pub failed: Vec<String>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let key = StreamKey::new(cfg.seed);
    match cmd {
        Command::Detect => detect(cfg, key),
        Command::MissSweep => miss_sweep(cfg, key),
        Command::BerSweep => ber_sweep(cfg, key),
        Command::RateSweep => rate_sweep(cfg, key),
        Command::SaturationSweep => saturation_sweep(cfg, key),
        Command::CutoffFit => cutoff_fit(cfg, key),
        Command::Validate => validate(cfg, key),
    }
}

/// Grid of `name`, or the single configured value when the axis is absent.
fn axis_or(cfg: &ExperimentConfig, name: &str, fallback: f64) -> Result<Vec<f64>, CliError> {
    match cfg.sweep.get(name) {
        Some(axis) => axis.grid(name),
        None => Ok(vec![fallback]),
    }
}

fn detect(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let dev = cfg.device()?;
    let timing = cfg.timing()?;
    let env = cfg.environment()?;
    let lambda = match (cfg.point.power_dbm, cfg.point.lambda_per_s) {
        (Some(p), None) => power_to_rate(p, env.nu),
        (None, Some(l)) => l.0,
        _ => {
            return Err(CliError::Config(
                "detect needs point.power_dbm or point.lambda_per_s".into(),
            ))
        }
    };
    let entry: Level = cfg.point.entry.into();
    let st = stage_probabilities_from(lambda, &timing, &dev, entry);
    let mc = mc_detector(lambda, &timing, &dev, entry, cfg.mc.replicas, key.child(0));
    let mut report = SweepReport::new(&[
        "lambda",
        "lambda_t_c",
        "entry",
        "p_excited_obs",
        "p_capture",
        "p_readout",
        "p_reset_err",
        "p_miss",
        "mc_readout",
        "mc_stderr",
        "replicas",
        "seed",
    ]);
    report.push(vec![
        lambda.into(),
        (lambda * timing.t_c).into(),
        format!("{entry:?}").to_lowercase().into(),
        st.p_excited_obs.into(),
        st.p_capture.into(),
        st.p_readout.into(),
        st.p_reset_err.into(),
        st.p_miss().into(),
        mc.readout_bit.mean.into(),
        mc.readout_bit.stderr.into(),
        cfg.mc.replicas.into(),
        cfg.seed.into(),
    ]);
    let mut out = Outcome {
        summary: vec![format!(
            "lambda*T_c = {:.4}: P_out = {:.6} (MC {:.6} ± {:.1e}), miss = {:.6}",
            lambda * timing.t_c,
            st.p_readout,
            mc.readout_bit.mean,
            mc.readout_bit.stderr,
            st.p_miss()
        )],
        ..Outcome::default()
    };
    out.outputs.push(Output::table("detect.csv", &report));

    if cfg.sweep.contains_key("pulse_length_ns") {
        let lengths = cfg.axis("pulse_length_ns")?;
        let gammas = axis_or(cfg, "gamma_rad_per_s", dev.gamma)?;
        let points: Vec<(f64, f64)> = gammas
            .iter()
            .flat_map(|&g| lengths.iter().map(move |&l| (g, l)))
            .collect();
        let rows = points
            .par_iter()
            .map(|&(g, l)| -> Result<Vec<Value>, CliError> {
                let d = dev.with_rates(dev.kappa, g);
                let pulse = cfg.pulse(l)?;
                let t_obs = pulse.half_window() + cfg.pulse.obs_offset_ns * 1e-9;
                let p = single_photon_excitation(&pulse, t_obs, &d, &QuadConfig::default())?;
                Ok(vec![
                    g.into(),
                    l.into(),
                    t_obs.into(),
                    p.into(),
                    detection_prob_single(p, &d).into(),
                ])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut eff = SweepReport::new(&["gamma", "pulse_length_ns", "t_obs", "excitation", "efficiency"]);
        rows.into_iter().for_each(|r| eff.push(r));
        out.outputs.push(Output::table("efficiency.csv", &eff));
        out.outputs.push(Output::figure("5", &eff)?);
    }
    Ok(out)
}

fn miss_sweep(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let dev = cfg.device()?;
    let timing = cfg.timing()?;
    let lambdas = cfg.axis("lambda_per_s")?;
    let kappas = axis_or(cfg, "kappa_rad_per_s", dev.kappa)?;
    let gammas = axis_or(cfg, "gamma_rad_per_s", dev.gamma)?;
    let mut points = Vec::with_capacity(lambdas.len() * kappas.len() * gammas.len());
    for &gamma in &gammas {
        for &kappa in &kappas {
            for &lambda in &lambdas {
                points.push(MissPoint { lambda, kappa, gamma });
            }
        }
    }
    let method = match cfg.mc.miss_method {
        crate::config::MissMethodName::Exact => MissMethod::Exact,
        crate::config::MissMethodName::Mc => MissMethod::MonteCarlo {
            replicas: cfg.mc.replicas,
        },
    };
    let rows = miss_probability_sweep(&points, &timing, &dev, method, key)?;
    let report = SweepReport::from_records(&rows);
    Ok(Outcome {
        outputs: vec![Output::table("miss.csv", &report), Output::figure("6", &report)?],
        summary: vec![format!("{} miss-probability points", rows.len())],
        ..Outcome::default()
    })
}

fn ber_sweep(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let powers = cfg.axis("power_dbm")?;
    let rows = estimate_ber(&cfg.link(true)?, &powers, cfg.mc.n_symbols, cfg.link_mode(), key)?;
    let report = SweepReport::from_records(&rows);
    let summary = rows
        .iter()
        .map(|r| format!("{:>9.3} dBm  BER {:.3e} ± {:.1e}", r.power_dbm, r.ber, r.stderr))
        .collect();
    Ok(Outcome {
        outputs: vec![Output::table("ber.csv", &report), Output::figure("9", &report)?],
        summary,
        ..Outcome::default()
    })
}

fn rate_sweep(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let powers = cfg.axis("power_dbm")?;
    let rows = estimate_rate(&cfg.link(true)?, &powers, cfg.mc.n_symbols, cfg.mc.burn_in, key)?;
    let report = SweepReport::from_records(&rows);
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{:>9.3} dBm  I = {:.4} ± {:.1e} bit/symbol",
                r.power_dbm, r.rate, r.stderr
            )
        })
        .collect();
    Ok(Outcome {
        outputs: vec![Output::table("rate.csv", &report), Output::figure("10", &report)?],
        summary,
        ..Outcome::default()
    })
}

fn saturation_sweep(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let dev = cfg.device()?;
    let timing = cfg.timing()?;
    let figs = &cfg.saturation.figures;
    let want = |id: &str| figs.iter().any(|f| f == id);
    let mut out = Outcome::default();

    if want("8") {
        let ratios = cfg.axis("t_over_tau")?;
        let lts = cfg.axis("lambda_tau")?;
        let mut report = SweepReport::new(&["t_over_tau", "lambda_tau", "delta", "regime", "lambda0_tau"]);
        for &r in &ratios {
            let l0 = find_lambda0(1.0, r)?;
            for &a in &lts {
                let m = survivor_moments_poisson(a, 1.0, r)?;
                report.push(vec![
                    r.into(),
                    a.into(),
                    delta_lambda(a, 1.0, r)?.into(),
                    m.regime.as_str().into(),
                    l0.into(),
                ]);
            }
            out.summary.push(format!("T/tau = {r}: lambda0*tau = {l0:.6}"));
        }
        out.outputs.push(Output::table("saturation_delta.csv", &report));
        out.outputs.push(Output::figure("8", &report)?);
    }

    for (id, entry) in [("11", Level::Ground), ("12", Level::Excited)] {
        if !want(id) {
            continue;
        }
        let photons = cfg.axis("mean_photons")?;
        let kappas = axis_or(cfg, "kappa_rad_per_s", dev.kappa)?;
        let points: Vec<(f64, f64)> = kappas
            .iter()
            .flat_map(|&k| photons.iter().map(move |&n| (k, n)))
            .collect();
        let fig_key = key.child(id.parse::<u64>().expect("numeric figure id"));
        let rows: Vec<Vec<Value>> = points
            .par_iter()
            .enumerate()
            .map(|(i, &(kappa, n))| {
                let d = dev.with_rates(kappa, dev.gamma);
                let lambda = n / timing.t_c;
                let sat = saturated_excitation(
                    lambda,
                    &timing,
                    &d,
                    entry,
                    cfg.saturation.replicas,
                    fig_key.child(i as u64),
                );
                let plain = stage_probabilities_from(lambda, &timing, &d, entry).p_excited_obs;
                vec![kappa.into(), n.into(), sat.mean.into(), sat.stderr.into(), plain.into()]
            })
            .collect();
        let mut report = SweepReport::new(&["kappa", "mean_photons", "p_saturated", "stderr", "p_unsaturated"]);
        rows.into_iter().for_each(|r| report.push(r));
        let name = if entry == Level::Ground {
            "correct_reset"
        } else {
            "wrong_reset"
        };
        out.outputs
            .push(Output::table(&format!("saturation_{name}.csv"), &report));
        out.outputs.push(Output::figure(id, &report)?);
    }

    if want("13") {
        let powers = cfg.axis("power_dbm")?;
        let kappas = axis_or(cfg, "kappa_rad_per_s", dev.kappa)?;
        let mut report = SweepReport::new(&[
            "kappa",
            "power_dbm",
            "lambda_t_c",
            "rate_saturated",
            "stderr_saturated",
            "rate_unsaturated",
            "stderr_unsaturated",
        ]);
        for (ki, &kappa) in kappas.iter().enumerate() {
            let mut link = cfg.link(false)?;
            link.device = link.device.with_rates(kappa, link.device.gamma);
            let plain = estimate_rate(
                &link,
                &powers,
                cfg.mc.n_symbols,
                cfg.mc.burn_in,
                key.child(13).child(ki as u64),
            )?;
            link.saturation_replicas = Some(cfg.saturation.replicas);
            let sat = estimate_rate(
                &link,
                &powers,
                cfg.mc.n_symbols,
                cfg.mc.burn_in,
                key.child(13).child(ki as u64),
            )?;
            for (s, p) in sat.iter().zip(&plain) {
                report.push(vec![
                    kappa.into(),
                    s.power_dbm.into(),
                    s.lambda_t_c.into(),
                    s.rate.into(),
                    s.stderr.into(),
                    p.rate.into(),
                    p.stderr.into(),
                ]);
            }
        }
        out.outputs.push(Output::table("saturation_rate.csv", &report));
        out.outputs.push(Output::figure("13", &report)?);
    }

    if want("14") {
        let kappas = axis_or(cfg, "kappa_rad_per_s", dev.kappa)?;
        let gammas = axis_or(cfg, "gamma_rad_per_s", dev.gamma)?;
        let t_cs = axis_or(cfg, "t_c_ns", cfg.timing.t_c_ns)?;
        let sweep = cutoff_sweep(cfg);
        let mut report = SweepReport::new(&[
            "gamma",
            "kappa",
            "t_c",
            "kappa_t_c",
            "n_cutoff",
            "peak_n",
            "peak_excitation",
        ]);
        let mut i = 0u64;
        for &gamma in &gammas {
            for &kappa in &kappas {
                for &t_c_ns in &t_cs {
                    let tm = CycleTiming::new(t_c_ns * 1e-9, timing.delta_o, timing.t_w)?;
                    let d = dev.with_rates(kappa, gamma);
                    let res = cutoff_photon_number(&d, &tm, &sweep, key.child(14).child(i))?;
                    i += 1;
                    report.push(vec![
                        gamma.into(),
                        kappa.into(),
                        tm.t_c.into(),
                        (kappa * tm.t_c).into(),
                        res.n_cutoff.into(),
                        res.peak_n.into(),
                        res.peak_excitation.into(),
                    ]);
                }
            }
        }
        out.outputs.push(Output::table("saturation_cutoff.csv", &report));
        out.outputs.push(Output::figure("14", &report)?);
    }
    if out.outputs.is_empty() {
        return Err(CliError::Config("saturation.figures selects nothing".into()));
    }
    Ok(out)
}

fn cutoff_sweep(cfg: &ExperimentConfig) -> CutoffSweep {
    CutoffSweep {
        n_min: cfg.cutoff.n_min,
        n_max: cfg.cutoff.n_max,
        points_per_decade: cfg.cutoff.points_per_decade,
        replicas: cfg.cutoff.replicas,
    }
}

fn cutoff_fit(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let dev = cfg.device()?;
    let timing = cfg.timing()?;
    let xs = cfg.axis("kappa_t_c")?;
    let gamma = cfg.cutoff.gamma_rad_per_s.0;
    let sweep = cutoff_sweep(cfg);
    let reference = CutoffFit::reference();
    let mut cutoffs = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let d = dev.with_rates(x / timing.t_c, gamma).validated()?;
        let res = cutoff_photon_number(&d, &timing, &sweep, key.child(i as u64))?;
        cutoffs.push((x, res));
    }
    let samples: Vec<(f64, f64)> = cutoffs.iter().map(|(x, r)| (*x, r.n_cutoff)).collect();
    let fit = fit_cutoff_curve(&samples)?;

    let mut table = SweepReport::new(&[
        "kappa_t_c",
        "kappa",
        "gamma",
        "t_c",
        "n_cutoff",
        "peak_n",
        "peak_excitation",
        "reference_fit",
        "relative_gap",
        "replicas",
        "seed",
    ]);
    let mut summary = Vec::new();
    for (x, r) in &cutoffs {
        let pred = reference.eval(*x);
        let gap = (r.n_cutoff - pred).abs() / r.n_cutoff;
        summary.push(format!(
            "kappa*T_c = {x:>9.3e}: n_cutoff = {:.4e} (reference fit {pred:.4e})",
            r.n_cutoff
        ));
        table.push(vec![
            (*x).into(),
            (x / timing.t_c).into(),
            gamma.into(),
            timing.t_c.into(),
            r.n_cutoff.into(),
            r.peak_n.into(),
            r.peak_excitation.into(),
            pred.into(),
            gap.into(),
            cfg.cutoff.replicas.into(),
            cfg.seed.into(),
        ]);
    }
    summary.push(format!(
        "fit: a = {:.4}, b = {:.4}, c = {:.4} (rms relative residual {:.2e})",
        fit.a, fit.b, fit.c, fit.residual
    ));

    let mut params = SweepReport::new(&["source", "a", "b", "c", "residual", "x_min", "x_max"]);
    for (name, f) in [("simulated", &fit), ("reference", &reference)] {
        params.push(vec![
            name.into(),
            f.a.into(),
            f.b.into(),
            f.c.into(),
            f.residual.into(),
            f.range.0.into(),
            f.range.1.into(),
        ]);
    }

    let mut fig = SweepReport::new(&["kind", "kappa_t_c", "n_cutoff"]);
    for (x, r) in &cutoffs {
        fig.push(vec!["simulated".into(), (*x).into(), r.n_cutoff.into()]);
    }
    let (lo, hi) = fit.range;
    let m = cfg.cutoff.fit_samples.max(2);
    for (kind, f) in [("fit", &fit), ("reference_fit", &reference)] {
        for j in 0..m {
            let x = (lo.ln() + (hi.ln() - lo.ln()) * j as f64 / (m - 1) as f64).exp();
            fig.push(vec![kind.into(), x.into(), f.eval(x).into()]);
        }
    }
    Ok(Outcome {
        outputs: vec![
            Output::table("cutoff.csv", &table),
            Output::table("cutoff_fit.csv", &params),
            Output::figure("15", &fig)?,
        ],
        summary,
        ..Outcome::default()
    })
}

fn validate(cfg: &ExperimentConfig, key: StreamKey) -> Result<Outcome, CliError> {
    let checks: Vec<CheckResult> = run_checks(cfg, key)?;
    let mut report = SweepReport::new(&["check", "status", "error", "tolerance", "detail"]);
    let mut out = Outcome::default();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        report.push(vec![
            c.name.into(),
            status.into(),
            c.error.into(),
            c.tolerance.into(),
            c.detail.clone().into(),
        ]);
        out.summary.push(format!("{status} {}: {}", c.name, c.detail));
        if !c.passed {
            out.failed.push(c.name.to_string());
        }
    }
    out.outputs.push(Output::table("validate.csv", &report));
    Ok(out)
}
