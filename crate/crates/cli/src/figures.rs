//! Plot-ready CSV extracts, one fixed column layout per figure.

use photonlink::{Error, SweepReport};

/// `(source column, output column)` pairs for each figure id.
pub fn figure_columns(id: &str) -> Option<&'static [(&'static str, &'static str)]> {
    let cols: &'static [(&str, &str)] = match id {
        "5" => &[
            ("pulse_length_ns", "pulse_length_ns"),
            ("gamma", "gamma"),
            ("efficiency", "efficiency"),
        ],
        "6" => &[
            ("gamma", "gamma"),
            ("kappa", "kappa"),
            ("lambda", "lambda"),
            ("p_miss", "p_miss"),
            ("stderr", "stderr"),
        ],
        "8" => &[
            ("t_over_tau", "t_over_tau"),
            ("lambda_tau", "lambda_tau"),
            ("delta", "delta"),
        ],
        "9" => &[("power_dbm", "power_dbm"), ("ber", "ber"), ("stderr", "stderr")],
        "10" => &[("power_dbm", "power_dbm"), ("rate", "rate"), ("stderr", "stderr")],
        "11" | "12" => &[
            ("kappa", "kappa"),
            ("mean_photons", "mean_photons"),
            ("p_saturated", "p_saturated"),
            ("stderr", "stderr"),
            ("p_unsaturated", "p_unsaturated"),
        ],
        "13" => &[
            ("kappa", "kappa"),
            ("power_dbm", "power_dbm"),
            ("rate_saturated", "rate_saturated"),
            ("rate_unsaturated", "rate_unsaturated"),
        ],
        "14" => &[
            ("gamma", "gamma"),
            ("kappa", "kappa"),
            ("t_c", "t_c"),
            ("kappa_t_c", "kappa_t_c"),
            ("n_cutoff", "n_cutoff"),
        ],
        "15" => &[("kind", "kind"), ("kappa_t_c", "kappa_t_c"), ("n_cutoff", "n_cutoff")],
        _ => return None,
    };
    Some(cols)
}

pub const FIGURES: &[&str] = &["5", "6", "8", "9", "10", "11", "12", "13", "14", "15"];

/// Projects `report` onto the column layout of figure `id` and renders it as
/// CSV.
pub fn emit_figure_data(report: &SweepReport, id: &str) -> Result<String, Error> {
    let cols = figure_columns(id).ok_or_else(|| Error::UnknownFigure(id.to_string()))?;
    Ok(report.project(cols)?.to_csv())
}
