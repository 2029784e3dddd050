//! Experiment configuration: a TOML file with unit-suffixed keys, optional
//! `--set key=value` overrides, and conversion into the model types.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use photonlink::{CycleTiming, DeviceParams, Environment, Level, LinkConfig, PulseProfile, PulseShape, SimMode};

use crate::CliError;

/// A number that may also be written as `"2pi*<x>"`, meaning `2π·x`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Num(pub f64);

impl Num {
    pub fn parse(s: &str) -> Result<f64, String> {
        let t = s.trim();
        let (factor, rest) = match t.strip_prefix("2pi*").or_else(|| t.strip_prefix("2π*")) {
            Some(r) => (2.0 * PI, r.trim()),
            None => (1.0, t),
        };
        rest.parse::<f64>()
            .map(|x| factor * x)
            .map_err(|_| format!("`{s}` is neither a number nor `2pi*<number>`"))
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a \"2pi*<number>\" string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                Num::parse(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub kappa_rad_per_s: Num,
    pub gamma_rad_per_s: Num,
    #[serde(default)]
    pub p0: f64,
    #[serde(default = "default_p_reset_g")]
    pub p_reset_g: f64,
    #[serde(default = "default_p_reset_e")]
    pub p_reset_e: f64,
    #[serde(default = "default_alpha_sat")]
    pub alpha_sat: f64,
}

fn default_p_reset_g() -> f64 {
    0.01
}
fn default_p_reset_e() -> f64 {
    0.05
}
fn default_alpha_sat() -> f64 {
    photonlink::params::DEFAULT_ALPHA_SAT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub t_c_ns: f64,
    pub delta_o_ns: f64,
    pub t_w_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub t_e_k: f64,
    #[serde(default = "default_nu")]
    pub nu_hz: f64,
    pub cycles_per_symbol: usize,
}

fn default_nu() -> f64 {
    10e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Rectangular,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub shape: ShapeName,
    pub beta: f64,
    pub pad_ns: f64,
    /// Observation instant after the end of the drive window.
    pub obs_offset_ns: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            shape: ShapeName::Rectangular,
            beta: 1.0,
            pad_ns: 0.0,
            obs_offset_ns: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissMethodName {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkModeName {
    Hmm,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub replicas: u64,
    pub n_symbols: usize,
    pub burn_in: usize,
    pub eps_trunc: f64,
    pub miss_method: MissMethodName,
    pub link_mode: LinkModeName,
    /// Replicas for the saturated capture kernel in link sweeps; absent
    /// means saturation is ignored there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_replicas: Option<u64>,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            replicas: 100_000,
            n_symbols: 100_000,
            burn_in: 1000,
            eps_trunc: 1e-12,
            miss_method: MissMethodName::Exact,
            link_mode: LinkModeName::Hmm,
            saturation_replicas: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryName {
    #[default]
    Ground,
    Excited,
}

impl From<EntryName> for Level {
    fn from(e: EntryName) -> Self {
        match e {
            EntryName::Ground => Level::Ground,
            EntryName::Excited => Level::Excited,
        }
    }
}

/// Operating point for `detect`, given as a received power or a photon
/// rate, not both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_s: Option<Num>,
    pub entry: EntryName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffSection {
    pub gamma_rad_per_s: Num,
    pub replicas: u64,
    pub n_min: f64,
    pub n_max: f64,
    pub points_per_decade: usize,
    /// Number of fit-curve samples written next to the simulated cutoffs.
    pub fit_samples: usize,
}

impl Default for CutoffSection {
    fn default() -> Self {
        Self {
            gamma_rad_per_s: Num(0.0),
            replicas: 1000,
            n_min: 0.1,
            n_max: 1e7,
            points_per_decade: 40,
            fit_samples: 50,
        }
    }
}

/// Figures produced by `saturation-sweep`.
pub const SATURATION_FIGURES: &[&str] = &["8", "11", "12", "13", "14"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationSection {
    /// Subset of `8`, `11`, `12`, `13`, `14`.
    pub figures: Vec<String>,
    /// Replicas per point of the saturated excitation estimates.
    pub replicas: u64,
}

impl Default for SaturationSection {
    fn default() -> Self {
        Self {
            figures: SATURATION_FIGURES.iter().map(|s| s.to_string()).collect(),
            replicas: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// One sweep axis: either explicit `values`, or `start`/`stop`/`points`
/// with a linear or logarithmic `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
}

impl Axis {
    pub fn grid(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let bad = |msg: &str| CliError::Config(format!("sweep.{name}: {msg}"));
        if let Some(values) = &self.values {
            if self.start.is_some() || self.stop.is_some() || self.points.is_some() || self.scale.is_some() {
                return Err(bad("give either `values` or a range, not both"));
            }
            if values.is_empty() {
                return Err(bad("`values` is empty"));
            }
            return Ok(values.iter().map(|v| v.0).collect());
        }
        let (Some(start), Some(stop), Some(points)) = (self.start, self.stop, self.points) else {
            return Err(bad("a range needs `start`, `stop` and `points`"));
        };
        let (a, b) = (start.0, stop.0);
        if points == 0 {
            return Err(bad("`points` must be at least 1"));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(bad("range ends must be finite"));
        }
        let scale = self.scale.unwrap_or(Scale::Linear);
        if scale == Scale::Log && !(a > 0.0 && b > 0.0) {
            return Err(bad("a log range needs positive ends"));
        }
        if points == 1 {
            return Ok(vec![a]);
        }
        let step = |i: usize| i as f64 / (points - 1) as f64;
        Ok((0..points)
            .map(|i| match scale {
                Scale::Linear => a + (b - a) * step(i),
                Scale::Log => (a.ln() + (b.ln() - a.ln()) * step(i)).exp(),
            })
            .collect())
    }
}

/// Axis names understood by the commands.
pub const AXES: &[&str] = &[
    "power_dbm",
    "lambda_per_s",
    "kappa_rad_per_s",
    "gamma_rad_per_s",
    "pulse_length_ns",
    "t_over_tau",
    "lambda_tau",
    "mean_photons",
    "t_c_ns",
    "kappa_t_c",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    pub device: DeviceSection,
    pub timing: TimingSection,
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub point: PointSection,
    #[serde(default)]
    pub saturation: SaturationSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
    #[serde(default)]
    pub sweep: BTreeMap<String, Axis>,
}

fn default_out_dir() -> String {
    "out".into()
}

/// Writes `value` at the dotted `path` inside `table`, creating tables on
/// the way. The value is read as a TOML literal, or as a bare string when it
/// is not one.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key `{path}` is malformed")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{path}`: `{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical serialisation, leaving out the settings that
    /// cannot change any output (worker count and output directory).
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = None;
        canon.out_dir = String::new();
        hex::encode(Sha256::digest(canon.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, axis) in &self.sweep {
            if !AXES.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown sweep axis `{name}`; expected one of {}",
                    AXES.join(", ")
                )));
            }
            axis.grid(name)?;
        }
        if let Some(bad) = self
            .saturation
            .figures
            .iter()
            .find(|f| !SATURATION_FIGURES.contains(&f.as_str()))
        {
            return Err(CliError::Config(format!(
                "saturation.figures: `{bad}` is not one of {}",
                SATURATION_FIGURES.join(", ")
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.point.power_dbm.is_some() && self.point.lambda_per_s.is_some() {
            return Err(CliError::Config(
                "point: give power_dbm or lambda_per_s, not both".into(),
            ));
        }
        self.device()?;
        self.timing()?;
        self.environment()?;
        Ok(())
    }

    pub fn device(&self) -> Result<DeviceParams, CliError> {
        let d = &self.device;
        Ok(DeviceParams {
            kappa: d.kappa_rad_per_s.0,
            gamma: d.gamma_rad_per_s.0,
            p0: d.p0,
            p_reset_g: d.p_reset_g,
            p_reset_e: d.p_reset_e,
            alpha_sat: d.alpha_sat,
        }
        .validated()?)
    }

    pub fn timing(&self) -> Result<CycleTiming, CliError> {
        let t = &self.timing;
        Ok(CycleTiming::new(t.t_c_ns * 1e-9, t.delta_o_ns * 1e-9, t.t_w_ns * 1e-9)?)
    }

    pub fn environment(&self) -> Result<Environment, CliError> {
        let e = &self.environment;
        Ok(Environment::new(e.t_e_k, e.nu_hz, e.cycles_per_symbol)?)
    }

    pub fn link(&self, saturation: bool) -> Result<LinkConfig, CliError> {
        Ok(LinkConfig {
            device: self.device()?,
            timing: self.timing()?,
            environment: self.environment()?,
            saturation_replicas: if saturation { self.mc.saturation_replicas } else { None },
        })
    }

    pub fn link_mode(&self) -> SimMode {
        match self.mc.link_mode {
            LinkModeName::Hmm => SimMode::Hmm,
            LinkModeName::Physical => SimMode::Physical,
        }
    }

    /// Pulse of length `length_ns` with the configured shape, in seconds.
    pub fn pulse(&self, length_ns: f64) -> Result<PulseProfile, CliError> {
        let shape = match self.pulse.shape {
            ShapeName::Rectangular => PulseShape::Rectangular,
            ShapeName::Gaussian => PulseShape::Gaussian,
        };
        Ok(PulseProfile::new(
            shape,
            self.pulse.beta,
            length_ns * 1e-9,
            self.pulse.pad_ns * 1e-9,
        )?)
    }

    /// Grid of a named axis; a missing axis is a configuration error.
    pub fn axis(&self, name: &str) -> Result<Vec<f64>, CliError> {
        self.sweep
            .get(name)
            .ok_or_else(|| CliError::Config(format!("this command needs the sweep axis `sweep.{name}`")))?
            .grid(name)
    }
}
