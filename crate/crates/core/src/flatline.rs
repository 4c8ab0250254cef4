//! Statistical flatline component: a line is fitted to every unit-step
//! window and the whole window is labelled artifactual when the fitted
//! gradient magnitude falls below `eps`.

use crate::error::{Error, Result};
use crate::signal::{Label, LabelMask, LabelSource, Record};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatlineConfig {
    pub window_size: usize,
    pub eps: f64,
}

impl Default for FlatlineConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW,
            eps: DEFAULT_EPS,
        }
    }
}

impl FlatlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config(format!(
                "flatline window must be >= 2, got {}",
                self.window_size
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "flatline eps must be > 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Ordinary least-squares slope of `values` against abscissae `0, 1, ..., L-1`.
pub fn fit_slope(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Shape(format!("slope needs >= 2 samples, got {n}")));
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

/// Label every sample of each numeric window whose `|slope| < eps`.
/// Windows touching a missing sample are skipped; missing samples are UNKNOWN.
pub fn detect_flatline(record: &Record, cfg: &FlatlineConfig) -> Result<LabelMask> {
    cfg.validate()?;
    let n = record.len();
    let w = cfg.window_size;
    let mut labels: Vec<Label> = record
        .values
        .iter()
        .map(|v| {
            if v.is_some() {
                Label::Valid
            } else {
                Label::Unknown
            }
        })
        .collect();
    let mut buf = Vec::with_capacity(w);
    let mut s = 0;
    while s + w <= n {
        let window = &record.values[s..s + w];
        if let Some(k) = window.iter().rposition(Option::is_none) {
            s += k + 1;
            continue;
        }
        buf.clear();
        buf.extend(window.iter().map(|v| v.expect("checked")));
        if fit_slope(&buf)?.abs() < cfg.eps {
            labels[s..s + w].fill(Label::Artifact);
        }
        s += 1;
    }
    Ok(LabelMask::new(labels, LabelSource::Flatline))
}
