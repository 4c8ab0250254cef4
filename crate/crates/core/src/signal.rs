//! Core domain types: records, per-sample label masks and scaling statistics.

use crate::error::{Error, Result};

/// Minimum fraction of numeric samples for a record to enter any pipeline.
pub const MIN_NUMERIC_FRACTION: f64 = 0.90;

/// One patient's minute-resolution mean blood pressure signal.
///
/// `values[i]` is `None` for a missing sample. Gaps are represented as
/// missing values, never as skipped minute indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub minutes: Vec<i64>,
    pub values: Vec<Option<f64>>,
    pub truth: Option<LabelMask>,
}

impl Record {
    pub fn new(id: impl Into<String>, minutes: Vec<i64>, values: Vec<Option<f64>>) -> Result<Self> {
        if minutes.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: minutes.len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            minutes,
            values,
            truth: None,
        })
    }

    /// Record with minute indices `start, start+1, ...`.
    pub fn contiguous(id: impl Into<String>, start: i64, values: Vec<Option<f64>>) -> Self {
        let minutes = (0..values.len() as i64).map(|i| start + i).collect();
        Self {
            id: id.into(),
            minutes,
            values,
            truth: None,
        }
    }

    /// Convenience constructor for a gap-free record.
    pub fn from_values(id: impl Into<String>, values: &[f64]) -> Self {
        Self::contiguous(id, 0, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn with_truth(mut self, truth: LabelMask) -> Result<Self> {
        if truth.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: truth.len(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn numeric_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Copy with every value passed through `f`; missing samples stay missing.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Record {
        Record {
            id: self.id.clone(),
            minutes: self.minutes.clone(),
            values: self.values.iter().map(|v| v.map(&f)).collect(),
            truth: self.truth.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Artifact,
    Valid,
    Unknown,
}

impl Label {
    pub fn is_artifact(self) -> bool {
        self == Label::Artifact
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelSource {
    Truth,
    Flatline,
    Spike,
    Fused,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Truth => "truth",
            LabelSource::Flatline => "flatline",
            LabelSource::Spike => "spike",
            LabelSource::Fused => "fused",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "truth" => Some(LabelSource::Truth),
            "flatline" => Some(LabelSource::Flatline),
            "spike" => Some(LabelSource::Spike),
            "fused" => Some(LabelSource::Fused),
            _ => None,
        }
    }
}

/// Per-sample label sequence aligned 1:1 with a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub labels: Vec<Label>,
    pub source: LabelSource,
}

impl LabelMask {
    pub fn new(labels: Vec<Label>, source: LabelSource) -> Self {
        Self { labels, source }
    }

    pub fn filled(len: usize, label: Label, source: LabelSource) -> Self {
        Self::new(vec![label; len], source)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn artifact_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_artifact()).count()
    }

    pub fn is_artifact(&self, i: usize) -> bool {
        self.labels[i].is_artifact()
    }
}

/// Robust per-record scaling statistics (mmHg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleStats {
    pub median: f64,
    pub iqr: f64,
}

impl ScaleStats {
    /// Divisor actually used for scaling: a zero IQR falls back to 1.0.
    pub fn divisor(&self) -> f64 {
        if self.iqr > 0.0 {
            self.iqr
        } else {
            1.0
        }
    }
}

/// Per-sample reconstruction or forecast error; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaTrace {
    pub values: Vec<Option<f64>>,
}

impl DeltaTrace {
    pub fn undefined(len: usize) -> Self {
        Self {
            values: vec![None; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    Empty,
    IndexGap { position: usize },
    InsufficientData { numeric_fraction: f64 },
    TruthLength { expected: usize, actual: usize },
    MissingNotUnknown { position: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationResult {
    Accept,
    Reject(RejectReason),
}

impl ValidationResult {
    pub fn is_accept(&self) -> bool {
        matches!(self, ValidationResult::Accept)
    }
}

/// Admission check: unit-step indices and at least 90% numeric samples.
pub fn validate_record(record: &Record) -> ValidationResult {
    use ValidationResult::Reject;
    if record.is_empty() {
        return Reject(RejectReason::Empty);
    }
    if let Some(pos) = record.minutes.windows(2).position(|w| w[1] != w[0] + 1) {
        return Reject(RejectReason::IndexGap { position: pos + 1 });
    }
    if let Some(truth) = &record.truth {
        if truth.len() != record.len() {
            return Reject(RejectReason::TruthLength {
                expected: record.len(),
                actual: truth.len(),
            });
        }
        if let Some(pos) = record
            .values
            .iter()
            .zip(&truth.labels)
            .position(|(v, l)| v.is_none() && *l != Label::Unknown)
        {
            return Reject(RejectReason::MissingNotUnknown { position: pos });
        }
    }
    let fraction = record.numeric_count() as f64 / record.len() as f64;
    if fraction < MIN_NUMERIC_FRACTION {
        return Reject(RejectReason::InsufficientData {
            numeric_fraction: fraction,
        });
    }
    ValidationResult::Accept
}

/// Sample-wise logical OR: artifact if either side is, unknown only if both are.
pub fn or_merge(a: &LabelMask, b: &LabelMask) -> Result<LabelMask> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let labels = a
        .labels
        .iter()
        .zip(&b.labels)
        .map(|(&x, &y)| match (x, y) {
            (Label::Artifact, _) | (_, Label::Artifact) => Label::Artifact,
            (Label::Unknown, Label::Unknown) => Label::Unknown,
            _ => Label::Valid,
        })
        .collect();
    Ok(LabelMask::new(labels, LabelSource::Fused))
}
