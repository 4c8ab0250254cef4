//! Line-oriented `key=value` experiment configuration.
//!
//! Every key has a default; a file or `--set` overrides only what it names.
//! [`ExperimentConfig::to_text`] renders the fully resolved configuration in
//! a fixed key order, which is what commands dump before doing any work.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::arima::ArimaConfig;
use crate::error::{Error, Result};
use crate::eval::{DetectorKind, PipelineConfig, SweepSpec};
use crate::flatline::FlatlineConfig;
use crate::model::LatentMode;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindChoice {
    Vae,
    Ae,
    Arima,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub beta_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub include_ae: bool,
    pub include_arima: bool,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub kind: KindChoice,
    pub beta: f64,
    pub q: f64,
    pub data_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub threshold: Option<PathBuf>,
    pub labels_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            beta_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            q_grid: vec![90.0, 92.0, 94.0, 96.0, 98.0],
            include_ae: true,
            include_arima: true,
            seeds: vec![1, 2, 3, 4, 5],
            jobs: 1,
            kind: KindChoice::Vae,
            beta: 0.1,
            q: 90.0,
            data_dir: None,
            model: None,
            threshold: None,
            labels_dir: None,
        }
    }
}

/// Every accepted key, in dump order.
pub const KEYS: &[&str] = &[
    "seed",
    "n_records",
    "record_len",
    "baseline_min",
    "baseline_max",
    "drift_amp_min",
    "drift_amp_max",
    "drift_period_min",
    "drift_period_max",
    "ar_phi",
    "ar_sigma",
    "quantization",
    "flatline_rate",
    "flatline_min",
    "flatline_max",
    "spike_rate",
    "spike_amp_min",
    "spike_amp_max",
    "spike_min",
    "spike_max",
    "missing_rate",
    "missing_min",
    "missing_max",
    "max_missing_fraction",
    "event_gap",
    "split_ratios",
    "window_len",
    "flatline_window",
    "flatline_eps",
    "flatline_on",
    "hidden_dim",
    "latent_dim",
    "num_layers",
    "epochs",
    "batch_size",
    "learning_rate",
    "deploy_latent",
    "arima_p",
    "arima_d",
    "arima_window",
    "beta_grid",
    "q_grid",
    "include_ae",
    "include_arima",
    "seeds",
    "jobs",
    "kind",
    "beta",
    "q",
    "data_dir",
    "model",
    "threshold",
    "labels_dir",
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key}={value}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value, what))
}

fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value, "a number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "a finite number"))
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(bad(key, value, what));
    }
    items.iter().map(|s| num(key, s, what)).collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.synth;
        let p = &mut self.pipeline;
        let v = value.trim();
        match key {
            "seed" => {
                self.seed = num(key, v, "an unsigned integer")?;
                s.seed = self.seed;
                if let LatentMode::Sampled { seed } = &mut p.latent {
                    *seed = self.seed;
                }
            }
            "n_records" => s.n_records = num(key, v, "an unsigned integer")?,
            "record_len" => s.record_len = num(key, v, "an unsigned integer")?,
            "baseline_min" => s.baseline.0 = float(key, v)?,
            "baseline_max" => s.baseline.1 = float(key, v)?,
            "drift_amp_min" => s.drift_amplitude.0 = float(key, v)?,
            "drift_amp_max" => s.drift_amplitude.1 = float(key, v)?,
            "drift_period_min" => s.drift_period.0 = float(key, v)?,
            "drift_period_max" => s.drift_period.1 = float(key, v)?,
            "ar_phi" => s.ar_phi = float(key, v)?,
            "ar_sigma" => s.ar_sigma = float(key, v)?,
            "quantization" => s.quantization = float(key, v)?,
            "flatline_rate" => s.flatline_rate = float(key, v)?,
            "flatline_min" => s.flatline_duration.0 = num(key, v, "an unsigned integer")?,
            "flatline_max" => s.flatline_duration.1 = num(key, v, "an unsigned integer")?,
            "spike_rate" => s.spike_rate = float(key, v)?,
            "spike_amp_min" => s.spike_amplitude.0 = float(key, v)?,
            "spike_amp_max" => s.spike_amplitude.1 = float(key, v)?,
            "spike_min" => s.spike_duration.0 = num(key, v, "an unsigned integer")?,
            "spike_max" => s.spike_duration.1 = num(key, v, "an unsigned integer")?,
            "missing_rate" => s.missing_rate = float(key, v)?,
            "missing_min" => s.missing_duration.0 = num(key, v, "an unsigned integer")?,
            "missing_max" => s.missing_duration.1 = num(key, v, "an unsigned integer")?,
            "max_missing_fraction" => s.max_missing_fraction = float(key, v)?,
            "event_gap" => s.event_gap = num(key, v, "an unsigned integer")?,
            "split_ratios" => {
                let r: Vec<f64> = list(key, v, "three comma-separated numbers")?;
                s.split_ratios = r
                    .try_into()
                    .map_err(|_| bad(key, v, "three comma-separated numbers"))?;
            }
            "window_len" => p.window_len = num(key, v, "an unsigned integer")?,
            "flatline_window" => p.flatline.window_size = num(key, v, "an unsigned integer")?,
            "flatline_eps" => p.flatline.eps = float(key, v)?,
            "flatline_on" => {
                p.flatline_on_scaled = match v {
                    "raw" => false,
                    "scaled" => true,
                    _ => return Err(bad(key, v, "raw or scaled")),
                }
            }
            "hidden_dim" => p.hidden_dim = num(key, v, "an unsigned integer")?,
            "latent_dim" => p.latent_dim = num(key, v, "an unsigned integer")?,
            "num_layers" => p.num_layers = num(key, v, "an unsigned integer")?,
            "epochs" => p.epochs = num(key, v, "an unsigned integer")?,
            "batch_size" => p.batch_size = num(key, v, "an unsigned integer")?,
            "learning_rate" => p.learning_rate = float(key, v)?,
            "deploy_latent" => {
                p.latent = match v {
                    "mean" => LatentMode::Mean,
                    "sampled" => LatentMode::Sampled { seed: self.seed },
                    _ => return Err(bad(key, v, "mean or sampled")),
                }
            }
            "arima_p" => p.arima.p = num(key, v, "an unsigned integer")?,
            "arima_d" => p.arima.d = num(key, v, "an unsigned integer")?,
            "arima_window" => p.arima.window_len = num(key, v, "an unsigned integer")?,
            "beta_grid" => self.beta_grid = list(key, v, "comma-separated numbers")?,
            "q_grid" => self.q_grid = list(key, v, "comma-separated numbers")?,
            "include_ae" => self.include_ae = boolean(key, v)?,
            "include_arima" => self.include_arima = boolean(key, v)?,
            "seeds" => self.seeds = list(key, v, "comma-separated unsigned integers")?,
            "jobs" => self.jobs = num(key, v, "an unsigned integer")?,
            "kind" => {
                self.kind = match v.to_ascii_lowercase().as_str() {
                    "vae" => KindChoice::Vae,
                    "ae" => KindChoice::Ae,
                    "arima" => KindChoice::Arima,
                    _ => return Err(bad(key, v, "vae, ae or arima")),
                }
            }
            "beta" => self.beta = float(key, v)?,
            "q" => self.q = float(key, v)?,
            "data_dir" => self.data_dir = path(v),
            "model" => self.model = path(v),
            "threshold" => self.threshold = path(v),
            "labels_dir" => self.labels_dir = path(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.synth;
        let p = &self.pipeline;
        Some(match key {
            "seed" => self.seed.to_string(),
            "n_records" => s.n_records.to_string(),
            "record_len" => s.record_len.to_string(),
            "baseline_min" => s.baseline.0.to_string(),
            "baseline_max" => s.baseline.1.to_string(),
            "drift_amp_min" => s.drift_amplitude.0.to_string(),
            "drift_amp_max" => s.drift_amplitude.1.to_string(),
            "drift_period_min" => s.drift_period.0.to_string(),
            "drift_period_max" => s.drift_period.1.to_string(),
            "ar_phi" => s.ar_phi.to_string(),
            "ar_sigma" => s.ar_sigma.to_string(),
            "quantization" => s.quantization.to_string(),
            "flatline_rate" => s.flatline_rate.to_string(),
            "flatline_min" => s.flatline_duration.0.to_string(),
            "flatline_max" => s.flatline_duration.1.to_string(),
            "spike_rate" => s.spike_rate.to_string(),
            "spike_amp_min" => s.spike_amplitude.0.to_string(),
            "spike_amp_max" => s.spike_amplitude.1.to_string(),
            "spike_min" => s.spike_duration.0.to_string(),
            "spike_max" => s.spike_duration.1.to_string(),
            "missing_rate" => s.missing_rate.to_string(),
            "missing_min" => s.missing_duration.0.to_string(),
            "missing_max" => s.missing_duration.1.to_string(),
            "max_missing_fraction" => s.max_missing_fraction.to_string(),
            "event_gap" => s.event_gap.to_string(),
            "split_ratios" => join(&s.split_ratios),
            "window_len" => p.window_len.to_string(),
            "flatline_window" => p.flatline.window_size.to_string(),
            "flatline_eps" => p.flatline.eps.to_string(),
            "flatline_on" => if p.flatline_on_scaled {
                "scaled"
            } else {
                "raw"
            }
            .into(),
            "hidden_dim" => p.hidden_dim.to_string(),
            "latent_dim" => p.latent_dim.to_string(),
            "num_layers" => p.num_layers.to_string(),
            "epochs" => p.epochs.to_string(),
            "batch_size" => p.batch_size.to_string(),
            "learning_rate" => p.learning_rate.to_string(),
            "deploy_latent" => match p.latent {
                LatentMode::Mean => "mean".into(),
                LatentMode::Sampled { .. } => "sampled".into(),
            },
            "arima_p" => p.arima.p.to_string(),
            "arima_d" => p.arima.d.to_string(),
            "arima_window" => p.arima.window_len.to_string(),
            "beta_grid" => join(&self.beta_grid),
            "q_grid" => join(&self.q_grid),
            "include_ae" => self.include_ae.to_string(),
            "include_arima" => self.include_arima.to_string(),
            "seeds" => join(&self.seeds),
            "jobs" => self.jobs.to_string(),
            "kind" => match self.kind {
                KindChoice::Vae => "vae",
                KindChoice::Ae => "ae",
                KindChoice::Arima => "arima",
            }
            .into(),
            "beta" => self.beta.to_string(),
            "q" => self.q.to_string(),
            "data_dir" => show_path(&self.data_dir),
            "model" => show_path(&self.model),
            "threshold" => show_path(&self.threshold),
            "labels_dir" => show_path(&self.labels_dir),
            _ => return None,
        })
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", i + 1))
            })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// One `--set` style override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Resolved configuration in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            writeln!(
                s,
                "{k}={}",
                self.get(k).expect("every listed key is readable")
            )
            .unwrap();
        }
        s
    }

    /// Stable hash of everything that can change results (`jobs` excluded).
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for line in self.to_text().lines().filter(|l| !l.starts_with("jobs=")) {
            for b in line.bytes().chain(std::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.pipeline.flatline.validate()?;
        self.pipeline.arima.validate()?;
        if self.pipeline.window_len == 0 {
            return Err(Error::Config("window_len must be >= 1".into()));
        }
        if self.pipeline.epochs == 0 || self.pipeline.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.pipeline.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if let Some(b) = self
            .beta_grid
            .iter()
            .chain([&self.beta])
            .find(|b| **b < 0.0)
        {
            return Err(Error::Config(format!("beta must be >= 0, got {b}")));
        }
        if let Some(q) = self
            .q_grid
            .iter()
            .chain([&self.q])
            .find(|q| !(0.0..=100.0).contains(*q))
        {
            return Err(Error::Config(format!("percentile {q} outside [0, 100]")));
        }
        Ok(())
    }

    pub fn detector_kind(&self) -> DetectorKind {
        match self.kind {
            KindChoice::Vae => DetectorKind::Vae { beta: self.beta },
            KindChoice::Ae => DetectorKind::Ae,
            KindChoice::Arima => DetectorKind::Arima,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            betas: self.beta_grid.clone(),
            qs: self.q_grid.clone(),
            include_ae: self.include_ae,
            include_arima: self.include_arima,
            seeds: self.seeds.clone(),
            threads: self.jobs,
            fingerprint: self.fingerprint(),
        }
    }

    pub fn arima(&self) -> ArimaConfig {
        self.pipeline.arima
    }

    pub fn flatline(&self) -> FlatlineConfig {
        self.pipeline.flatline
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(text)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let c = parse_config("beta_grid=0.1,0.2\n").unwrap();
        assert_eq!(c.beta_grid, vec![0.1, 0.2]);
        let c = parse_config("q_grid=90,92,94,96,98").unwrap();
        assert_eq!(c.q_grid, vec![90.0, 92.0, 94.0, 96.0, 98.0]);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let dump = c.to_text();
        assert!(dump.contains("window_len=60\n"));
        assert!(dump.contains("flatline_window=10\n"));
        assert!(dump.contains("flatline_eps=0.000000001\n"));
        assert!(dump.contains("hidden_dim=64\nlatent_dim=12\nnum_layers=2\n"));
        assert_eq!(dump.lines().count(), KEYS.len());
    }

    #[test]
    fn dump_round_trips() {
        let mut c = parse_config(
            "seed=9\nkind=arima\ndata_dir=/tmp/x\nsplit_ratios=1,1,1\nflatline_on=scaled\n",
        )
        .unwrap();
        c.apply_override("epochs=3").unwrap();
        let back = parse_config(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# header\n\nepochs = 7  # trailing\n").unwrap();
        assert_eq!(c.pipeline.epochs, 7);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        for text in [
            "bogus=1",
            "epochs=abc",
            "epochs",
            "include_ae=maybe",
            "split_ratios=1,2",
            "beta_grid=",
        ] {
            assert!(
                matches!(parse_config(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = ExperimentConfig::default();
        c.set("q_grid", "90,101").unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.set("jobs", "0").unwrap();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn fingerprint_ignores_thread_count() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.set("jobs", "4").unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.set("epochs", "3").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
