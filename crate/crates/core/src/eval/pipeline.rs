use std::collections::HashMap;

use super::{confusion, sensitivity, specificity, summarize, ConfusionCounts, ExperimentStats};
use crate::arima::{arima_delta_trace_with_report, ArimaConfig};
use crate::error::{Error, Result};
use crate::flatline::{detect_flatline, FlatlineConfig};
use crate::fusion::{calibrate_thresholds, detect_spikes, fuse};
use crate::model::{
    reconstruct_record_with, train, Architecture, LatentMode, Mode, ModelParams, TrainConfig,
    TrainOutcome,
};
use crate::preprocess::{clean_training_windows, scale_record, shuffle_and_pool, SplitIds};
use crate::signal::{
    validate_record, DeltaTrace, LabelMask, Record, RejectReason, ValidationResult,
};

/// Which δ source feeds the spike component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    Vae { beta: f64 },
    Ae,
    Arima,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Vae { .. } => "VAE",
            DetectorKind::Ae => "AE",
            DetectorKind::Arima => "ARIMA",
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            DetectorKind::Vae { beta } => Some(*beta),
            _ => None,
        }
    }

    /// Stable identifier used for job and model file names.
    pub fn job_id(&self, seed: Option<u64>) -> String {
        let base = match self {
            DetectorKind::Vae { beta } => format!("vae_b{beta}"),
            DetectorKind::Ae => "ae".into(),
            DetectorKind::Arima => "arima".into(),
        };
        match seed {
            Some(s) if self.is_learned() => format!("{base}_s{s}"),
            _ => base,
        }
    }

    pub fn is_learned(&self) -> bool {
        !matches!(self, DetectorKind::Arima)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_len: usize,
    pub flatline: FlatlineConfig,
    /// Run the flatline component on scaled instead of raw values.
    pub flatline_on_scaled: bool,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub arima: ArimaConfig,
    pub latent: LatentMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            window_len: 60,
            flatline: FlatlineConfig::default(),
            flatline_on_scaled: false,
            hidden_dim: crate::model::DEFAULT_HIDDEN_DIM,
            latent_dim: crate::model::DEFAULT_LATENT_DIM,
            num_layers: crate::model::DEFAULT_NUM_LAYERS,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            arima: ArimaConfig::default(),
            latent: LatentMode::Mean,
        }
    }
}

impl PipelineConfig {
    pub fn architecture(&self, kind: DetectorKind) -> Option<Architecture> {
        let (mode, beta) = match kind {
            DetectorKind::Vae { beta } => (Mode::Vae, beta),
            DetectorKind::Ae => (Mode::Ae, 0.0),
            DetectorKind::Arima => return None,
        };
        let mut arch = Architecture::new(self.window_len, mode, beta);
        arch.hidden_dim = self.hidden_dim;
        arch.latent_dim = self.latent_dim;
        arch.num_layers = self.num_layers;
        Some(arch)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

/// A validated record with its scaled copy and flatline labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub raw: Record,
    pub scaled: Record,
    pub flatline: LabelMask,
}

impl PreparedRecord {
    pub fn truth(&self) -> Result<&LabelMask> {
        self.raw
            .truth
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("record {} has no truth labels", self.raw.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreparedData {
    pub train: Vec<PreparedRecord>,
    pub validation: Vec<PreparedRecord>,
    pub test: Vec<PreparedRecord>,
    pub rejected: Vec<(String, RejectReason)>,
}

/// Validates, scales and flatline-labels every record named by `splits`.
/// Rejected records are dropped and listed.
pub fn prepare(
    records: &[Record],
    splits: &SplitIds,
    cfg: &PipelineConfig,
) -> Result<PreparedData> {
    cfg.flatline.validate()?;
    let by_id: HashMap<&str, &Record> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = PreparedData::default();
    let build = |ids: &[String],
                 rejected: &mut Vec<(String, RejectReason)>|
     -> Result<Vec<PreparedRecord>> {
        let mut v = Vec::with_capacity(ids.len());
        for id in ids {
            let raw = *by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Protocol(format!("split names unknown record {id}")))?;
            if let ValidationResult::Reject(reason) = validate_record(raw) {
                rejected.push((id.clone(), reason));
                continue;
            }
            let (scaled, _) = scale_record(raw)?;
            let flatline = detect_flatline(
                if cfg.flatline_on_scaled { &scaled } else { raw },
                &cfg.flatline,
            )?;
            v.push(PreparedRecord {
                raw: raw.clone(),
                scaled,
                flatline,
            });
        }
        Ok(v)
    };
    out.train = build(&splits.train, &mut out.rejected)?;
    out.validation = build(&splits.validation, &mut out.rejected)?;
    out.test = build(&splits.test, &mut out.rejected)?;
    Ok(out)
}

/// A ready-to-deploy δ source.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Model {
        params: ModelParams,
        latent: LatentMode,
    },
    Arima(ArimaConfig),
}

impl Detector {
    /// δ trace and number of degenerate ARIMA fits for one scaled record.
    pub fn delta(&self, scaled: &Record) -> Result<(DeltaTrace, usize)> {
        match self {
            Detector::Model { params, latent } => {
                Ok((reconstruct_record_with(scaled, params, *latent)?, 0))
            }
            Detector::Arima(cfg) => {
                let t = arima_delta_trace_with_report(scaled, cfg)?;
                Ok((t.delta, t.fallbacks))
            }
        }
    }
}

/// Trains the (V)AE for `kind` on the clean windows of the training split.
/// ARIMA needs no training and yields `None`.
pub fn train_detector(
    kind: DetectorKind,
    data: &PreparedData,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Option<TrainOutcome>> {
    let Some(arch) = cfg.architecture(kind) else {
        return Ok(None);
    };
    let mut batches = Vec::with_capacity(data.train.len());
    for r in &data.train {
        batches.push(clean_training_windows(
            &r.scaled,
            r.truth()?,
            cfg.window_len,
        )?);
    }
    let pool = shuffle_and_pool(&batches, seed)?;
    train(&pool, arch, &cfg.train_config(seed)).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QResult {
    pub q: f64,
    pub threshold: f64,
    pub counts: ConfusionCounts,
}

/// Test-set confusion counts of one trained detector at every Q.
#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub kind: DetectorKind,
    pub seed: Option<u64>,
    pub rows: Vec<QResult>,
    pub arima_fallbacks: usize,
}

/// Calibrates on validation, deploys flatline + spike + fusion on test and
/// pools the confusion counts over test samples.
pub fn evaluate_detector(
    detector: &Detector,
    kind: DetectorKind,
    seed: Option<u64>,
    data: &PreparedData,
    qs: &[f64],
) -> Result<JobResult> {
    let mut fallbacks = 0;
    let mut val_deltas = Vec::with_capacity(data.validation.len());
    for r in &data.validation {
        let (d, f) = detector
            .delta(&r.scaled)
            .map_err(|e| e.in_job(format!("record {}", r.raw.id)))?;
        fallbacks += f;
        val_deltas.push(d);
    }
    let val_flat: Vec<LabelMask> = data.validation.iter().map(|r| r.flatline.clone()).collect();
    let model_id = kind.job_id(seed);
    let thresholds = calibrate_thresholds(&val_deltas, &val_flat, qs, &model_id, "validation")?;

    let mut counts = vec![ConfusionCounts::default(); qs.len()];
    for r in &data.test {
        let (d, f) = detector
            .delta(&r.scaled)
            .map_err(|e| e.in_job(format!("record {}", r.raw.id)))?;
        fallbacks += f;
        let truth = r.truth()?;
        for (c, t) in counts.iter_mut().zip(&thresholds) {
            let fused = fuse(&r.flatline, &detect_spikes(&d, t.value))?;
            *c = *c + confusion(&fused, truth)?;
        }
    }
    Ok(JobResult {
        kind,
        seed,
        rows: thresholds
            .iter()
            .zip(counts)
            .map(|(t, counts)| QResult {
                q: t.q,
                threshold: t.value,
                counts,
            })
            .collect(),
        arima_fallbacks: fallbacks,
    })
}

/// Per-seed train + evaluate, aggregated into one row per Q. ARIMA runs
/// once regardless of `seeds`.
pub fn run_experiment(
    kind: DetectorKind,
    data: &PreparedData,
    cfg: &PipelineConfig,
    seeds: &[u64],
    qs: &[f64],
) -> Result<Vec<ExperimentStats>> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let runs: Vec<Option<u64>> = if kind.is_learned() {
        seeds.iter().map(|&s| Some(s)).collect()
    } else {
        vec![None]
    };
    let mut jobs = Vec::with_capacity(runs.len());
    for seed in runs {
        let job = (|| {
            let detector = match train_detector(kind, data, cfg, seed.unwrap_or(0))? {
                Some(outcome) => Detector::Model {
                    params: outcome.params,
                    latent: cfg.latent,
                },
                None => Detector::Arima(cfg.arima),
            };
            evaluate_detector(&detector, kind, seed, data, qs)
        })()
        .map_err(|e| e.in_job(kind.job_id(seed)))?;
        jobs.push(job);
    }
    aggregate_jobs(kind, &jobs)
}

/// One ExperimentStats per Q over the given jobs (all of the same kind).
pub(crate) fn aggregate_jobs(
    kind: DetectorKind,
    jobs: &[JobResult],
) -> Result<Vec<ExperimentStats>> {
    let first = jobs
        .first()
        .ok_or_else(|| Error::Empty(format!("no jobs for {}", kind.job_id(None))))?;
    let mut out = Vec::with_capacity(first.rows.len());
    for (qi, row) in first.rows.iter().enumerate() {
        let mut sens = Vec::with_capacity(jobs.len());
        let mut spec = Vec::with_capacity(jobs.len());
        for j in jobs {
            let r = j.rows.get(qi).filter(|r| r.q == row.q).ok_or_else(|| {
                Error::Protocol(format!("job {} lacks Q={}", kind.job_id(j.seed), row.q))
            })?;
            sens.push(sensitivity(&r.counts));
            spec.push(specificity(&r.counts));
        }
        out.push(ExperimentStats {
            kind,
            q: row.q,
            iterations: jobs.len(),
            sensitivity: summarize(&sens),
            specificity: summarize(&spec),
        });
    }
    Ok(out)
}
