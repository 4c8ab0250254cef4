//! Seeded generator of BPm-like records with exact ground-truth artifacts.
//!
//! Clean signal: per-record baseline, one slow sinusoid and AR(1)
//! fluctuation, quantized. A single left-to-right scan then draws, at every
//! free minute, one categorical trial that may start a flatline, a spike or
//! a missing run. Events never overlap and are separated by at least
//! `event_gap` clean minutes.

use crate::error::{Error, Result};
use crate::preprocess::{split_records, SplitIds, DEFAULT_SPLIT_RATIOS};
use crate::prng::Rng;
use crate::signal::{Label, LabelMask, LabelSource, Record};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_records: usize,
    pub record_len: usize,
    pub seed: u64,
    pub baseline: (f64, f64),
    pub drift_amplitude: (f64, f64),
    pub drift_period: (f64, f64),
    pub ar_phi: f64,
    pub ar_sigma: f64,
    pub quantization: f64,
    /// Expected event starts per 1000 trial minutes.
    pub flatline_rate: f64,
    pub flatline_duration: (usize, usize),
    pub spike_rate: f64,
    pub spike_amplitude: (f64, f64),
    pub spike_duration: (usize, usize),
    pub missing_rate: f64,
    pub missing_duration: (usize, usize),
    /// Upper bound on the missing fraction of any record.
    pub max_missing_fraction: f64,
    pub event_gap: usize,
    pub split_ratios: [f64; 3],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_records: 85,
            record_len: 480,
            seed: 1,
            baseline: (60.0, 100.0),
            drift_amplitude: (3.0, 10.0),
            drift_period: (120.0, 480.0),
            ar_phi: 0.8,
            ar_sigma: 2.0,
            quantization: 0.1,
            flatline_rate: 1.0,
            flatline_duration: (5, 120),
            spike_rate: 4.0,
            spike_amplitude: (15.0, 60.0),
            spike_duration: (1, 3),
            missing_rate: 1.0,
            missing_duration: (1, 10),
            max_missing_fraction: 0.05,
            event_gap: 10,
            split_ratios: DEFAULT_SPLIT_RATIOS,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.record_len < 2 {
            return err("record_len must be >= 2");
        }
        for (name, rate) in [
            ("flatline_rate", self.flatline_rate),
            ("spike_rate", self.spike_rate),
            ("missing_rate", self.missing_rate),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if (self.flatline_rate + self.spike_rate + self.missing_rate) / 1000.0 > 1.0 {
            return err("combined event rate exceeds one per minute");
        }
        for (name, (lo, hi)) in [
            ("flatline duration", self.flatline_duration),
            ("spike duration", self.spike_duration),
            ("missing duration", self.missing_duration),
        ] {
            if lo < 1 || hi < lo {
                return Err(Error::Config(format!(
                    "{name} range must satisfy 1 <= min <= max"
                )));
            }
        }
        for (name, (lo, hi)) in [
            ("baseline", self.baseline),
            ("drift amplitude", self.drift_amplitude),
            ("drift period", self.drift_period),
            ("spike amplitude", self.spike_amplitude),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "{name} range must satisfy min <= max"
                )));
            }
        }
        if !(self.drift_period.0 > 0.0) {
            return err("drift period must be positive");
        }
        if !(self.quantization >= 0.0 && self.quantization.is_finite()) {
            return err("quantization must be finite and >= 0");
        }
        if !(self.ar_sigma >= 0.0) || !(self.ar_phi.abs() < 1.0) {
            return err("AR(1) needs |phi| < 1 and sigma >= 0");
        }
        if !(0.0..=0.1).contains(&self.max_missing_fraction) {
            return err("max_missing_fraction must lie in [0, 0.1]");
        }
        if self.event_gap < 1 {
            return err("event_gap must be >= 1");
        }
        Ok(())
    }

    fn event_probabilities(&self) -> [f64; 3] {
        [
            self.flatline_rate / 1000.0,
            self.spike_rate / 1000.0,
            self.missing_rate / 1000.0,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Flatline,
    Spike,
    Missing,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Flatline => "flatline",
            EventKind::Spike => "spike",
            EventKind::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedEvent {
    pub kind: EventKind,
    pub start: usize,
    pub len: usize,
}

/// Per-record audit trail of the random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationLog {
    pub record_id: String,
    pub index: usize,
    /// Categorical trials drawn during the event scan.
    pub trials: usize,
    pub events: Vec<InjectedEvent>,
    /// Missing runs drawn but dropped by the missing-fraction cap.
    pub missing_suppressed: usize,
    /// Events drawn too long to fit before the record end; never clipped,
    /// so every injected duration lies in its configured range.
    pub overflow_suppressed: usize,
    /// Runs of at least `audit_run` identical consecutive clean values.
    pub clean_constant_runs: usize,
}

impl GenerationLog {
    pub fn starts(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn samples(&self, kind: EventKind) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.len)
            .sum()
    }
}

/// Run length used for the clean-segment collision audit.
pub const AUDIT_RUN: usize = 10;

pub fn record_id(index: usize) -> String {
    format!("rec{index:04}")
}

fn quantize(v: f64, step: f64) -> f64 {
    if step > 0.0 {
        (v / step).round() * step
    } else {
        v
    }
}

pub fn gen_record(cfg: &SynthConfig, index: usize) -> Result<(Record, GenerationLog)> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed).derive(index as u64);
    let n = cfg.record_len;

    let baseline = rng.uniform_range(cfg.baseline.0, cfg.baseline.1);
    let amplitude = rng.uniform_range(cfg.drift_amplitude.0, cfg.drift_amplitude.1);
    let period = rng.uniform_range(cfg.drift_period.0, cfg.drift_period.1);
    let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
    // Start the AR(1) state from its stationary distribution.
    let mut ar = cfg.ar_sigma / (1.0 - cfg.ar_phi * cfg.ar_phi).sqrt() * rng.next_gaussian();
    let mut clean = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            ar = cfg.ar_phi * ar + cfg.ar_sigma * rng.next_gaussian();
        }
        let drift = amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin();
        clean.push(quantize(baseline + drift + ar, cfg.quantization));
    }

    let mut values: Vec<Option<f64>> = clean.iter().map(|&v| Some(v)).collect();
    let mut labels = vec![Label::Valid; n];
    let mut in_event = vec![false; n];
    let probs = cfg.event_probabilities();
    let missing_budget = (cfg.max_missing_fraction * n as f64).floor() as usize;
    let mut missing_used = 0;
    let mut log = GenerationLog {
        record_id: record_id(index),
        index,
        trials: 0,
        events: Vec::new(),
        missing_suppressed: 0,
        overflow_suppressed: 0,
        clean_constant_runs: 0,
    };

    let mut t = 1;
    while t < n {
        log.trials += 1;
        let u = rng.next_uniform();
        let kind = if u < probs[0] {
            EventKind::Flatline
        } else if u < probs[0] + probs[1] {
            EventKind::Spike
        } else if u < probs[0] + probs[1] + probs[2] {
            EventKind::Missing
        } else {
            t += 1;
            continue;
        };
        let (lo, hi) = match kind {
            EventKind::Flatline => cfg.flatline_duration,
            EventKind::Spike => cfg.spike_duration,
            EventKind::Missing => cfg.missing_duration,
        };
        let mut len = rng.int_range(lo, hi);
        if len > n - t {
            log.overflow_suppressed += 1;
            t += 1;
            continue;
        }
        match kind {
            EventKind::Flatline => {
                let held = clean[t - 1];
                for i in t..t + len {
                    values[i] = Some(held);
                    labels[i] = Label::Artifact;
                }
            }
            EventKind::Spike => {
                let magnitude = rng.uniform_range(cfg.spike_amplitude.0, cfg.spike_amplitude.1);
                let sign = if rng.next_uniform() < 0.5 { -1.0 } else { 1.0 };
                let step = quantize(sign * magnitude, cfg.quantization);
                for i in t..t + len {
                    values[i] = Some(quantize(clean[i] + step, cfg.quantization));
                    labels[i] = Label::Artifact;
                }
            }
            EventKind::Missing => {
                len = len.min(missing_budget - missing_used);
                if len == 0 {
                    log.missing_suppressed += 1;
                    t += 1;
                    continue;
                }
                missing_used += len;
                for i in t..t + len {
                    values[i] = None;
                    labels[i] = Label::Unknown;
                }
            }
        }
        in_event[t..t + len].iter_mut().for_each(|e| *e = true);
        log.events.push(InjectedEvent {
            kind,
            start: t,
            len,
        });
        t += len + cfg.event_gap;
    }

    log.clean_constant_runs = count_constant_runs(&values, &in_event, AUDIT_RUN);
    let record = Record::contiguous(record_id(index), 0, values)
        .with_truth(LabelMask::new(labels, LabelSource::Truth))?;
    Ok((record, log))
}

/// Maximal runs of identical values, outside events, of length >= `min_len`.
fn count_constant_runs(values: &[Option<f64>], in_event: &[bool], min_len: usize) -> usize {
    let mut count = 0;
    let mut run = 0;
    let mut prev: Option<f64> = None;
    for (v, &e) in values.iter().zip(in_event) {
        match (*v, e) {
            (Some(x), false) if prev == Some(x) => run += 1,
            (Some(x), false) => {
                count += usize::from(run >= min_len);
                run = 1;
                prev = Some(x);
            }
            _ => {
                count += usize::from(run >= min_len);
                run = 0;
                prev = None;
            }
        }
    }
    count + usize::from(run >= min_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub records: Vec<Record>,
    pub logs: Vec<GenerationLog>,
    pub splits: SplitIds,
}

pub fn gen_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.n_records);
    let mut logs = Vec::with_capacity(cfg.n_records);
    for i in 0..cfg.n_records {
        let (r, log) = gen_record(cfg, i)?;
        records.push(r);
        logs.push(log);
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let splits = split_records(&ids, &cfg.split_ratios, cfg.seed)?;
    Ok(SynthDataset {
        records,
        logs,
        splits,
    })
}
