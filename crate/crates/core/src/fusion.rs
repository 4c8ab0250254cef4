//! Threshold calibration on flatline-filtered validation errors, spike
//! labelling and OR-fusion of the two components.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal::{or_merge, DeltaTrace, Label, LabelMask, LabelSource};
use crate::stats::percentile_sorted;

/// Percentile threshold on δ, frozen after calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub q: f64,
    pub value: f64,
    pub model_id: String,
    pub validation_id: String,
}

impl Threshold {
    /// `key=value` sidecar; floats use shortest round-trip formatting.
    pub fn to_sidecar(&self) -> String {
        let mut s = String::new();
        writeln!(s, "model_id={}", self.model_id).unwrap();
        writeln!(s, "validation_id={}", self.validation_id).unwrap();
        writeln!(s, "q={}", self.q).unwrap();
        writeln!(s, "value={}", self.value).unwrap();
        s
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let (mut model_id, mut validation_id, mut q, mut value) = (None, None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got {line:?}")))?;
            let number = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(format!("bad number {v:?} for {k}")))
            };
            match k {
                "model_id" => model_id = Some(v.to_string()),
                "validation_id" => validation_id = Some(v.to_string()),
                "q" => q = Some(number(v)?),
                "value" => value = Some(number(v)?),
                _ => return Err(parse_err(format!("unknown threshold key {k:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 0,
            msg: format!("threshold file lacks {k}"),
        };
        Ok(Self {
            model_id: model_id.ok_or_else(|| missing("model_id"))?,
            validation_id: validation_id.ok_or_else(|| missing("validation_id"))?,
            q: q.ok_or_else(|| missing("q"))?,
            value: value.ok_or_else(|| missing("value"))?,
        })
    }
}

/// Pooled δ values at positions that are defined and not flatline-labelled,
/// sorted ascending.
pub fn filtered_validation_deltas(
    deltas: &[DeltaTrace],
    flatline: &[LabelMask],
) -> Result<Vec<f64>> {
    if deltas.len() != flatline.len() {
        return Err(Error::LengthMismatch {
            expected: deltas.len(),
            actual: flatline.len(),
        });
    }
    let mut pool = Vec::new();
    for (d, m) in deltas.iter().zip(flatline) {
        if d.len() != m.len() {
            return Err(Error::LengthMismatch {
                expected: d.len(),
                actual: m.len(),
            });
        }
        pool.extend(
            d.values
                .iter()
                .zip(&m.labels)
                .filter(|(_, l)| !l.is_artifact())
                .filter_map(|(v, _)| *v),
        );
    }
    if pool.is_empty() {
        return Err(Error::Empty(
            "no validation delta left after flatline filtering".into(),
        ));
    }
    pool.sort_by(f64::total_cmp);
    Ok(pool)
}

/// Thresholds for every `q`, sharing one sorted pool.
pub fn calibrate_thresholds(
    deltas: &[DeltaTrace],
    flatline: &[LabelMask],
    qs: &[f64],
    model_id: &str,
    validation_id: &str,
) -> Result<Vec<Threshold>> {
    let pool = filtered_validation_deltas(deltas, flatline)?;
    qs.iter()
        .map(|&q| {
            let value = percentile_sorted(&pool, q)
                .ok_or_else(|| Error::Config(format!("percentile {q} outside [0, 100]")))?;
            Ok(Threshold {
                q,
                value,
                model_id: model_id.to_string(),
                validation_id: validation_id.to_string(),
            })
        })
        .collect()
}

pub fn calibrate_threshold(
    deltas: &[DeltaTrace],
    flatline: &[LabelMask],
    q: f64,
    model_id: &str,
    validation_id: &str,
) -> Result<Threshold> {
    Ok(calibrate_thresholds(deltas, flatline, &[q], model_id, validation_id)?.remove(0))
}

/// ARTIFACT where `δ > value` (strict), VALID otherwise, UNKNOWN where
/// undefined.
pub fn detect_spikes(delta: &DeltaTrace, threshold: f64) -> LabelMask {
    let labels = delta
        .values
        .iter()
        .map(|v| match v {
            None => Label::Unknown,
            Some(d) if *d > threshold => Label::Artifact,
            Some(_) => Label::Valid,
        })
        .collect();
    LabelMask::new(labels, LabelSource::Spike)
}

pub fn fuse(flatline: &LabelMask, spikes: &LabelMask) -> Result<LabelMask> {
    or_merge(flatline, spikes)
}
