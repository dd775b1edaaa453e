//! Flat key-value run configuration.
//!
//! Every knob of every experiment lives under one flat key. Values come from,
//! in increasing precedence: built-in defaults, a TOML file, `AJSCC_<KEY>`
//! environment variables, and explicit `key=value` overrides.
//!
//! List-valued keys take a TOML array or, as a string, comma-separated
//! numbers (`"0.1,0.2,0.3"`). Optional keys (`delta`, `s_c`, `t_c`,
//! `workers`) are cleared with the string `none`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::DopplerMode;
use crate::codec::Interval;
use crate::error::{Error, Result};
use crate::experiments::{
    default_bandwidths, default_delta_grid, default_lambda_grid, default_snr_grid, vds_grid,
    ChannelExperiment, ChannelTemplate, NoiselessSetup,
};
use crate::mosfet::MosfetParams;
use crate::phenomenon::Geometry;

/// Prefix of environment-variable overrides.
pub const ENV_PREFIX: &str = "AJSCC_";

/// Resolved configuration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k_gain: f64,
    pub v_th: f64,
    pub lambda: f64,

    pub noiseless_levels: Vec<f64>,
    pub noiseless_vds_start: f64,
    pub noiseless_vds_step: f64,
    pub noiseless_vds_count: usize,
    pub lambda_grid: Vec<f64>,

    pub vgs_lo: f64,
    pub vgs_hi: f64,
    pub vds_lo: f64,
    pub vds_hi: f64,
    /// Pins the Δ sweep to this single value when set.
    pub delta: Option<f64>,
    pub delta_grid: Vec<f64>,
    /// Δ used by the SNR sweep.
    pub snr_delta: f64,

    pub bandwidth: f64,
    pub snr_db: f64,
    pub snr_grid: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub doppler_fraction: f64,
    pub doppler_mode: DopplerMode,
    pub rician_k_db: f64,
    pub fft_len: usize,
    pub oversample: f64,
    pub fm_fraction: f64,
    pub ideal_channel: bool,
    pub s_c: Option<f64>,
    pub t_c: Option<f64>,

    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub s_p: usize,
    pub t_p: usize,
    pub jitter: f64,

    pub seed: u64,
    pub repetitions: usize,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = MosfetParams::default();
        let n = NoiselessSetup::default();
        let e = ChannelExperiment::default();
        let t = e.channel;
        let g = e.geometry;
        Self {
            k_gain: p.k_gain,
            v_th: p.v_th,
            lambda: p.lambda,
            noiseless_levels: n.levels,
            noiseless_vds_start: 5.0,
            noiseless_vds_step: 0.1,
            noiseless_vds_count: 50,
            lambda_grid: default_lambda_grid(),
            vgs_lo: e.vgs_range.lo,
            vgs_hi: e.vgs_range.hi,
            vds_lo: e.vds_range.lo,
            vds_hi: e.vds_range.hi,
            delta: None,
            delta_grid: default_delta_grid(),
            snr_delta: 0.41,
            bandwidth: 410e3,
            snr_db: -20.0,
            snr_grid: default_snr_grid(),
            bandwidths: default_bandwidths(),
            doppler_fraction: t.doppler_fraction,
            doppler_mode: t.doppler_mode,
            rician_k_db: t.rician_k_db,
            fft_len: t.fft_len,
            oversample: t.oversample,
            fm_fraction: t.fm_fraction,
            ideal_channel: t.ideal,
            s_c: t.s_c,
            t_c: t.t_c,
            nx: g.nx,
            ny: g.ny,
            nt: g.nt,
            s_p: g.s_p,
            t_p: g.t_p,
            jitter: e.field_jitter,
            seed: e.seed,
            repetitions: e.repetitions,
            workers: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Every recognised key, in metadata order.
pub const KEYS: &[&str] = &[
    "k_gain",
    "v_th",
    "lambda",
    "noiseless_levels",
    "noiseless_vds_start",
    "noiseless_vds_step",
    "noiseless_vds_count",
    "lambda_grid",
    "vgs_lo",
    "vgs_hi",
    "vds_lo",
    "vds_hi",
    "delta",
    "delta_grid",
    "snr_delta",
    "bandwidth",
    "snr_db",
    "snr_grid",
    "bandwidths",
    "doppler_fraction",
    "doppler_mode",
    "rician_k_db",
    "fft_len",
    "oversample",
    "fm_fraction",
    "ideal_channel",
    "s_c",
    "t_c",
    "nx",
    "ny",
    "nt",
    "s_p",
    "t_p",
    "jitter",
    "seed",
    "repetitions",
    "workers",
    "output_dir",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse {value:?}: {e}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match value.trim() {
        "" | "none" => Ok(None),
        v => scalar(key, v).map(Some),
    }
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| scalar(key, s)).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

/// TOML value as the string form accepted by [`RunConfig::set`].
fn toml_to_string(key: &str, value: &toml::Value) -> Result<String> {
    Ok(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(Error::config(key, "array elements must be numbers")),
            })
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => return Err(Error::config(key, "tables and datetimes are not supported")),
    })
}

impl RunConfig {
    /// Set one key from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key;
        match key {
            "k_gain" => self.k_gain = scalar(k, value)?,
            "v_th" => self.v_th = scalar(k, value)?,
            "lambda" => self.lambda = scalar(k, value)?,
            "noiseless_levels" => self.noiseless_levels = list(k, value)?,
            "noiseless_vds_start" => self.noiseless_vds_start = scalar(k, value)?,
            "noiseless_vds_step" => self.noiseless_vds_step = scalar(k, value)?,
            "noiseless_vds_count" => self.noiseless_vds_count = scalar(k, value)?,
            "lambda_grid" => self.lambda_grid = list(k, value)?,
            "vgs_lo" => self.vgs_lo = scalar(k, value)?,
            "vgs_hi" => self.vgs_hi = scalar(k, value)?,
            "vds_lo" => self.vds_lo = scalar(k, value)?,
            "vds_hi" => self.vds_hi = scalar(k, value)?,
            "delta" => self.delta = optional(k, value)?,
            "delta_grid" => self.delta_grid = list(k, value)?,
            "snr_delta" => self.snr_delta = scalar(k, value)?,
            "bandwidth" => self.bandwidth = scalar(k, value)?,
            "snr_db" => self.snr_db = scalar(k, value)?,
            "snr_grid" => self.snr_grid = list(k, value)?,
            "bandwidths" => self.bandwidths = list(k, value)?,
            "doppler_fraction" => self.doppler_fraction = scalar(k, value)?,
            "doppler_mode" => self.doppler_mode = scalar(k, value)?,
            "rician_k_db" => self.rician_k_db = scalar(k, value)?,
            "fft_len" => self.fft_len = scalar(k, value)?,
            "oversample" => self.oversample = scalar(k, value)?,
            "fm_fraction" => self.fm_fraction = scalar(k, value)?,
            "ideal_channel" => self.ideal_channel = scalar(k, value)?,
            "s_c" => self.s_c = optional(k, value)?,
            "t_c" => self.t_c = optional(k, value)?,
            "nx" => self.nx = scalar(k, value)?,
            "ny" => self.ny = scalar(k, value)?,
            "nt" => self.nt = scalar(k, value)?,
            "s_p" => self.s_p = scalar(k, value)?,
            "t_p" => self.t_p = scalar(k, value)?,
            "jitter" => self.jitter = scalar(k, value)?,
            "seed" => self.seed = scalar(k, value)?,
            "repetitions" => self.repetitions = scalar(k, value)?,
            "workers" => self.workers = optional(k, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// String form of one key, as echoed in CSV metadata.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "k_gain" => self.k_gain.to_string(),
            "v_th" => self.v_th.to_string(),
            "lambda" => self.lambda.to_string(),
            "noiseless_levels" => fmt_list(&self.noiseless_levels),
            "noiseless_vds_start" => self.noiseless_vds_start.to_string(),
            "noiseless_vds_step" => self.noiseless_vds_step.to_string(),
            "noiseless_vds_count" => self.noiseless_vds_count.to_string(),
            "lambda_grid" => fmt_list(&self.lambda_grid),
            "vgs_lo" => self.vgs_lo.to_string(),
            "vgs_hi" => self.vgs_hi.to_string(),
            "vds_lo" => self.vds_lo.to_string(),
            "vds_hi" => self.vds_hi.to_string(),
            "delta" => fmt_opt(&self.delta),
            "delta_grid" => fmt_list(&self.delta_grid),
            "snr_delta" => self.snr_delta.to_string(),
            "bandwidth" => self.bandwidth.to_string(),
            "snr_db" => self.snr_db.to_string(),
            "snr_grid" => fmt_list(&self.snr_grid),
            "bandwidths" => fmt_list(&self.bandwidths),
            "doppler_fraction" => self.doppler_fraction.to_string(),
            "doppler_mode" => self.doppler_mode.to_string(),
            "rician_k_db" => self.rician_k_db.to_string(),
            "fft_len" => self.fft_len.to_string(),
            "oversample" => self.oversample.to_string(),
            "fm_fraction" => self.fm_fraction.to_string(),
            "ideal_channel" => self.ideal_channel.to_string(),
            "s_c" => fmt_opt(&self.s_c),
            "t_c" => fmt_opt(&self.t_c),
            "nx" => self.nx.to_string(),
            "ny" => self.ny.to_string(),
            "nt" => self.nt.to_string(),
            "s_p" => self.s_p.to_string(),
            "t_p" => self.t_p.to_string(),
            "jitter" => self.jitter.to_string(),
            "seed" => self.seed.to_string(),
            "repetitions" => self.repetitions.to_string(),
            "workers" => fmt_opt(&self.workers),
            "output_dir" => self.output_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Apply every key of a flat TOML document.
    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        for (key, value) in &table {
            self.set(key, &toml_to_string(key, value)?)?;
        }
        Ok(())
    }

    /// Defaults overlaid with the TOML file at `path`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.merge_toml(&text)?;
        Ok(cfg)
    }

    /// Apply `AJSCC_<KEY>` variables from `vars`; other variables are ignored.
    pub fn merge_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.as_ref().strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
                Some((key, v.as_ref().to_string()))
            })
            .collect();
        found.sort();
        for (key, value) in found {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(pair, "expected key=value"))?;
        self.set(key.trim(), value)
    }

    pub fn params(&self) -> MosfetParams {
        MosfetParams {
            k_gain: self.k_gain,
            v_th: self.v_th,
            lambda: self.lambda,
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            nx: self.nx,
            ny: self.ny,
            nt: self.nt,
            s_p: self.s_p,
            t_p: self.t_p,
        }
    }

    pub fn noiseless_setup(&self) -> NoiselessSetup {
        NoiselessSetup {
            params: self.params(),
            levels: self.noiseless_levels.clone(),
            vds_grid: vds_grid(
                self.noiseless_vds_start,
                self.noiseless_vds_step,
                self.noiseless_vds_count,
            ),
            vds_range: Interval::new(self.vds_lo, self.vds_hi),
        }
    }

    pub fn channel_experiment(&self) -> ChannelExperiment {
        ChannelExperiment {
            params: self.params(),
            geometry: self.geometry(),
            vgs_range: Interval::new(self.vgs_lo, self.vgs_hi),
            vds_range: Interval::new(self.vds_lo, self.vds_hi),
            field_jitter: self.jitter,
            channel: ChannelTemplate {
                doppler_fraction: self.doppler_fraction,
                doppler_mode: self.doppler_mode,
                rician_k_db: self.rician_k_db,
                fft_len: self.fft_len,
                oversample: self.oversample,
                fm_fraction: self.fm_fraction,
                ideal: self.ideal_channel,
                s_c: self.s_c,
                t_c: self.t_c,
            },
            seed: self.seed,
            repetitions: self.repetitions,
        }
    }

    /// Δ values of the Δ sweep: the pinned `delta` alone, or the grid.
    pub fn effective_delta_grid(&self) -> Vec<f64> {
        match self.delta {
            Some(d) => vec![d],
            None => self.delta_grid.clone(),
        }
    }

    /// Check every key against the preconditions of the modules that use it.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        let ascending = |key: &str, v: &[f64]| {
            if v.is_empty() {
                return Err(Error::config(key, "must not be empty"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(key, "values must be finite"));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config(key, "values must be strictly ascending"));
            }
            Ok(())
        };

        positive("k_gain", self.k_gain)?;
        if !(self.v_th.is_finite() && self.v_th >= 0.0) {
            return Err(Error::config("v_th", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("lambda", "must be finite and >= 0"));
        }

        ascending("noiseless_levels", &self.noiseless_levels)?;
        if self.noiseless_levels[0] <= self.v_th {
            return Err(Error::config("noiseless_levels", "levels must exceed v_th"));
        }
        if !(self.noiseless_vds_start.is_finite() && self.noiseless_vds_start >= 0.0) {
            return Err(Error::config(
                "noiseless_vds_start",
                "must be finite and >= 0",
            ));
        }
        positive("noiseless_vds_step", self.noiseless_vds_step)?;
        if self.noiseless_vds_count == 0 {
            return Err(Error::config("noiseless_vds_count", "must be >= 1"));
        }
        ascending("lambda_grid", &self.lambda_grid)?;
        if self.lambda_grid[0] <= 0.0 {
            return Err(Error::config("lambda_grid", "values must be > 0"));
        }

        if !(self.vgs_lo.is_finite() && self.vgs_lo > self.v_th) {
            return Err(Error::config("vgs_lo", "must exceed v_th"));
        }
        if !(self.vgs_hi.is_finite() && self.vgs_hi > self.vgs_lo) {
            return Err(Error::config("vgs_hi", "must exceed vgs_lo"));
        }
        if !(self.vds_lo.is_finite() && self.vds_lo >= 0.0) {
            return Err(Error::config("vds_lo", "must be finite and >= 0"));
        }
        if !(self.vds_hi.is_finite() && self.vds_hi > self.vds_lo) {
            return Err(Error::config("vds_hi", "must exceed vds_lo"));
        }
        if let Some(d) = self.delta {
            positive("delta", d)?;
        }
        ascending("delta_grid", &self.delta_grid)?;
        if self.delta_grid[0] <= 0.0 {
            return Err(Error::config("delta_grid", "values must be > 0"));
        }
        positive("snr_delta", self.snr_delta)?;

        positive("bandwidth", self.bandwidth)?;
        if self.snr_db.is_nan() {
            return Err(Error::config("snr_db", "must be a number"));
        }
        ascending("snr_grid", &self.snr_grid)?;
        ascending("bandwidths", &self.bandwidths)?;
        if self.bandwidths[0] <= 0.0 {
            return Err(Error::config("bandwidths", "values must be > 0"));
        }
        if !(self.doppler_fraction.is_finite() && (0.0..1.0).contains(&self.doppler_fraction)) {
            return Err(Error::config("doppler_fraction", "must lie in [0, 1)"));
        }
        if self.rician_k_db.is_nan() {
            return Err(Error::config(
                "rician_k_db",
                "must be a number (inf disables fading)",
            ));
        }
        if self.fft_len < 2 {
            return Err(Error::config("fft_len", "must be >= 2"));
        }
        if !(self.oversample.is_finite() && self.oversample >= 2.0) {
            return Err(Error::config(
                "oversample",
                "must be >= 2 to keep the band below Nyquist",
            ));
        }
        if !(self.fm_fraction > 0.0 && self.fm_fraction * (1.0 + self.doppler_fraction) <= 1.0) {
            return Err(Error::config(
                "fm_fraction",
                "must be > 0 and leave room for Doppler inside the bandwidth",
            ));
        }
        if let Some(s) = self.s_c {
            positive("s_c", s)?;
        }
        if let Some(t) = self.t_c {
            positive("t_c", t)?;
        }

        for (key, v) in [
            ("nx", self.nx),
            ("ny", self.ny),
            ("s_p", self.s_p),
            ("t_p", self.t_p),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        if self.nt < 2 {
            return Err(Error::config(
                "nt",
                "sensor streams need at least 2 instants",
            ));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::config("jitter", "must be finite and >= 0"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be >= 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// `# key=value ...` over every key, for CSV headers.
    pub fn metadata_line(&self) -> String {
        let mut s = String::from("#");
        for key in KEYS {
            let _ = write!(s, " {key}={}", self.get(key).unwrap_or_default());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let mut c = RunConfig::default();
        c.merge_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.k_gain, 155e-6);
        assert_eq!(c.v_th, 0.74);
        assert_eq!(c.lambda, 0.037);
        assert_eq!((c.vds_lo, c.vds_hi), (5.0, 10.0));
        assert_eq!(c.bandwidth, 410e3);
        assert_eq!(c.snr_db, -20.0);
        assert_eq!((c.nx, c.ny, c.nt, c.s_p, c.t_p), (20, 20, 20, 10, 10));
        assert_eq!(c.doppler_fraction, 0.02);
        c.validate().unwrap();
    }

    #[test]
    fn bad_value_names_the_key() {
        let mut c = RunConfig::default();
        let err = c.set("snr_db", "abc").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "snr_db"));
        assert!(err.to_string().contains("snr_db"));

        let err = c.merge_toml("snr_db = \"abc\"").unwrap_err();
        assert!(err.to_string().contains("snr_db"));

        let err = c.set("nope", "1").unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn validation_names_the_key() {
        let c = RunConfig {
            fft_len: 1,
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("fft_len"));
        let c = RunConfig {
            delta_grid: vec![0.5, 0.2],
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("delta_grid"));
    }

    #[test]
    fn delta_pins_the_sweep() {
        let mut c = RunConfig::default();
        assert_eq!(c.effective_delta_grid().len(), 25);
        c.merge_toml("delta = 0.41").unwrap();
        assert_eq!(c.effective_delta_grid(), vec![0.41]);
        c.set("delta", "none").unwrap();
        assert_eq!(c.effective_delta_grid().len(), 25);
    }

    #[test]
    fn toml_arrays_and_types() {
        let mut c = RunConfig::default();
        c.merge_toml(
            "snr_grid = [-50, -10]\nbandwidths = [50e3, 410e3]\nideal_channel = true\ndoppler_mode = \"fixed\"\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.snr_grid, vec![-50.0, -10.0]);
        assert_eq!(c.bandwidths, vec![50e3, 410e3]);
        assert!(c.ideal_channel);
        assert_eq!(c.doppler_mode, DopplerMode::Fixed);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn env_overrides() {
        let mut c = RunConfig::default();
        c.merge_env([
            ("AJSCC_SNR_DB", "-30"),
            ("HOME", "/x"),
            ("AJSCC_DELTA_GRID", "0.1,0.2"),
        ])
        .unwrap();
        assert_eq!(c.snr_db, -30.0);
        assert_eq!(c.delta_grid, vec![0.1, 0.2]);
        assert!(c.merge_env([("AJSCC_BOGUS", "1")]).is_err());
    }

    #[test]
    fn metadata_round_trips() {
        let mut c = RunConfig::default();
        c.set("delta", "0.41").unwrap();
        c.set("s_c", "3").unwrap();
        let line = c.metadata_line();
        let mut back = RunConfig::default();
        for kv in line.trim_start_matches('#').split_whitespace() {
            back.set_pair(kv).unwrap();
        }
        assert_eq!(back, c);
    }
}
