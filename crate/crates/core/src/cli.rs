//! Command-line surface: argument parsing and the six subcommands.
//!
//! Every command resolves its configuration (defaults, then `--config`,
//! then `--set` in order, then `--seed`) and writes `resolved_config.txt`
//! into `--out` before doing any work.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, KindChoice};
use crate::error::{Error, Result};
use crate::eval::{
    confusion, prepare, sensitivity, specificity, sweep, train_detector, write_plot_csv,
    write_sweep_csv, write_table_csv, ConfusionCounts, Detector, PreparedData,
};
use crate::flatline::detect_flatline;
use crate::fusion::{calibrate_thresholds, detect_spikes, fuse, Threshold};
use crate::io::{
    load_model, manifest_entries, parse_labels_csv, parse_manifest, parse_record_csv, read_bytes,
    read_text, save_model, splits_from_manifest, write_atomic, write_labels_csv, write_loss_trace,
    write_manifest, write_record_csv,
};
use crate::preprocess::{scale_record, SplitIds};
use crate::signal::{validate_record, Label, LabelMask, Record, ValidationResult};
use crate::synth::{gen_dataset, EventKind, GenerationLog};

pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

#[derive(Debug, Parser)]
#[command(
    name = "bpm-artifact",
    version,
    about = "Artifact detection for minute-resolution mean blood pressure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable and applied in order after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out", global = true)]
    pub out: PathBuf,
    /// Shorthand for `--set seed=N`, applied last.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground-truth labels and splits.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train one (V)AE on the clean windows of the training split.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Calibrate spike thresholds on the validation split for every Q.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Label records with the fused flatline + spike detector.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Record CSVs to label; defaults to the test split of the dataset.
        records: Vec<PathBuf>,
    },
    /// Compare predicted label files against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full β × Q grid plus baselines and emit table and plot data.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Train { common }
            | Command::Calibrate { common }
            | Command::Detect { common, .. }
            | Command::Evaluate { common }
            | Command::Sweep { common } => common,
        }
    }
}

/// Defaults, then the config file, then overrides, then `--seed`.
pub fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_text(&read_text(path)?)?;
    }
    for kv in &common.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common();
    let cfg = resolve_config(common)?;
    let out = common.out.as_path();
    write_atomic(&out.join(RESOLVED_CONFIG), cfg.to_text())?;
    match &cli.command {
        Command::Synth { .. } => cmd_synth(&cfg, out),
        Command::Train { .. } => cmd_train(&cfg, out),
        Command::Calibrate { .. } => cmd_calibrate(&cfg, out),
        Command::Detect { records, .. } => cmd_detect(&cfg, out, records),
        Command::Evaluate { .. } => cmd_evaluate(&cfg, out),
        Command::Sweep { .. } => cmd_sweep(&cfg, out),
    }
}

fn generation_log_csv(logs: &[GenerationLog]) -> String {
    let mut s = String::from(
        "record_id,index,trials,flatline_events,flatline_samples,spike_events,spike_samples,\
         missing_events,missing_samples,missing_suppressed,overflow_suppressed,clean_constant_runs\n",
    );
    for l in logs {
        let k = |e| (l.starts(e), l.samples(e));
        let (fe, fs) = k(EventKind::Flatline);
        let (se, ss) = k(EventKind::Spike);
        let (me, ms) = k(EventKind::Missing);
        writeln!(
            s,
            "{},{},{},{fe},{fs},{se},{ss},{me},{ms},{},{},{}",
            l.record_id,
            l.index,
            l.trials,
            l.missing_suppressed,
            l.overflow_suppressed,
            l.clean_constant_runs
        )
        .unwrap();
    }
    s
}

pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = gen_dataset(&cfg.synth)?;
    for r in &ds.records {
        write_atomic(
            &out.join("records").join(format!("{}.csv", r.id)),
            write_record_csv(r),
        )?;
    }
    let ids: Vec<String> = ds.records.iter().map(|r| r.id.clone()).collect();
    let entries = manifest_entries(&ids, &ds.splits, cfg.synth.seed);
    write_atomic(&out.join("manifest.csv"), write_manifest(&entries))?;
    write_atomic(
        &out.join("generation_log.csv"),
        generation_log_csv(&ds.logs),
    )?;
    eprintln!(
        "synth: {} records ({} train / {} validation / {} test) -> {}",
        ds.records.len(),
        ds.splits.train.len(),
        ds.splits.validation.len(),
        ds.splits.test.len(),
        out.display()
    );
    Ok(())
}

/// Records and splits from `data_dir`, or generated in memory from the
/// synth keys when no directory is configured.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(Vec<Record>, SplitIds)> {
    let Some(dir) = &cfg.data_dir else {
        let ds = gen_dataset(&cfg.synth)?;
        return Ok((ds.records, ds.splits));
    };
    let entries = parse_manifest(&read_text(&dir.join("manifest.csv"))?)?;
    let mut records = Vec::with_capacity(entries.len());
    for e in &entries {
        let path = dir.join("records").join(format!("{}.csv", e.record_id));
        let r = parse_record_csv(&read_text(&path)?, &e.record_id)
            .map_err(|err| err.in_job(path.display().to_string()))?;
        records.push(r);
    }
    Ok((records, splits_from_manifest(&entries)))
}

fn prepared(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (records, splits) = load_dataset(cfg)?;
    let data = prepare(&records, &splits, &cfg.pipeline)?;
    for (id, reason) in &data.rejected {
        eprintln!("skipping record {id}: {reason:?}");
    }
    Ok(data)
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let kind = cfg.detector_kind();
    if cfg.kind == KindChoice::Arima {
        return Err(Error::Config("kind=arima has no trainable model".into()));
    }
    let data = prepared(cfg)?;
    let outcome =
        train_detector(kind, &data, &cfg.pipeline, cfg.seed)?.expect("learned kinds always train");
    write_atomic(&out.join("model.bpm"), save_model(&outcome.params))?;
    write_atomic(
        &out.join("loss_trace.csv"),
        write_loss_trace(&outcome.trace),
    )?;
    if let Some(last) = outcome.trace.last() {
        eprintln!(
            "train: {} epochs, final loss {:.6} -> {}",
            outcome.trace.len(),
            last.total,
            out.display()
        );
    }
    Ok(())
}

fn build_detector(cfg: &ExperimentConfig) -> Result<(Detector, String)> {
    match cfg.kind {
        KindChoice::Arima => Ok((
            Detector::Arima(cfg.arima()),
            cfg.detector_kind().job_id(None),
        )),
        _ => {
            let path = cfg.model.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "kind={} needs model=PATH",
                    cfg.get("kind").unwrap_or_default()
                ))
            })?;
            let params = load_model(&read_bytes(path)?)?;
            let id = path
                .file_stem()
                .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
            Ok((
                Detector::Model {
                    params,
                    latent: cfg.pipeline.latent,
                },
                id,
            ))
        }
    }
}

fn calibrate(
    detector: &Detector,
    model_id: &str,
    data: &PreparedData,
    qs: &[f64],
) -> Result<Vec<Threshold>> {
    let mut deltas = Vec::with_capacity(data.validation.len());
    for r in &data.validation {
        deltas.push(detector.delta(&r.scaled)?.0);
    }
    let flat: Vec<LabelMask> = data.validation.iter().map(|r| r.flatline.clone()).collect();
    calibrate_thresholds(&deltas, &flat, qs, model_id, "validation")
}

fn threshold_file_name(q: f64) -> String {
    format!("q{q}.threshold")
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let (detector, model_id) = build_detector(cfg)?;
    let data = prepared(cfg)?;
    for t in calibrate(&detector, &model_id, &data, &cfg.q_grid)? {
        write_atomic(
            &out.join("thresholds").join(threshold_file_name(t.q)),
            t.to_sidecar(),
        )?;
        eprintln!("calibrate: Q={} threshold={}", t.q, t.value);
    }
    Ok(())
}

fn record_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "record".into(), |s| s.to_string_lossy().into_owned())
}

fn label_code(l: Label) -> &'static str {
    match l {
        Label::Valid => "0",
        Label::Artifact => "1",
        Label::Unknown => "",
    }
}

fn component_csv(
    record: &Record,
    delta: &[Option<f64>],
    flat: &LabelMask,
    spikes: &LabelMask,
    fused: &LabelMask,
) -> String {
    let mut s = String::from("time_min,delta,flatline,spike,fused\n");
    for i in 0..record.len() {
        let d = delta[i].map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{d},{},{},{}",
            record.minutes[i],
            label_code(flat.labels[i]),
            label_code(spikes.labels[i]),
            label_code(fused.labels[i])
        )
        .unwrap();
    }
    s
}

pub fn cmd_detect(cfg: &ExperimentConfig, out: &Path, paths: &[PathBuf]) -> Result<()> {
    let (detector, model_id) = build_detector(cfg)?;
    let threshold = match &cfg.threshold {
        Some(p) => Threshold::from_sidecar(&read_text(p)?)?,
        None => {
            let data = if cfg.data_dir.is_some() {
                prepared(cfg)?
            } else {
                PreparedData::default()
            };
            if data.validation.is_empty() {
                return Err(Error::Protocol(
                    "no threshold file given and no validation split to calibrate on".into(),
                ));
            }
            calibrate(&detector, &model_id, &data, &[cfg.q])?.remove(0)
        }
    };
    let records: Vec<Record> = if paths.is_empty() {
        let (records, splits) = load_dataset(cfg)?;
        records
            .into_iter()
            .filter(|r| splits.test.contains(&r.id))
            .collect()
    } else {
        let mut v = Vec::with_capacity(paths.len());
        for p in paths {
            v.push(
                parse_record_csv(&read_text(p)?, &record_id_from_path(p))
                    .map_err(|e| e.in_job(p.display().to_string()))?,
            );
        }
        v
    };

    let mut report = String::new();
    writeln!(
        report,
        "# model_id={} q={} threshold={}",
        threshold.model_id, threshold.q, threshold.value
    )
    .unwrap();
    report.push_str("record_id,status,samples,flatline,spike,fused\n");
    for r in &records {
        if let ValidationResult::Reject(reason) = validate_record(r) {
            writeln!(report, "{},rejected:{reason:?},{},,,", r.id, r.len()).unwrap();
            continue;
        }
        let (scaled, _) = scale_record(r)?;
        let flat = detect_flatline(
            if cfg.pipeline.flatline_on_scaled {
                &scaled
            } else {
                r
            },
            &cfg.flatline(),
        )?;
        let (delta, _) = detector
            .delta(&scaled)
            .map_err(|e| e.in_job(r.id.clone()))?;
        let spikes = detect_spikes(&delta, threshold.value);
        let fused = fuse(&flat, &spikes)?;
        write_atomic(
            &out.join("labels").join(format!("{}.csv", r.id)),
            write_labels_csv(r, &fused)?,
        )?;
        write_atomic(
            &out.join("components").join(format!("{}.csv", r.id)),
            component_csv(r, &delta.values, &flat, &spikes, &fused),
        )?;
        writeln!(
            report,
            "{},ok,{},{},{},{}",
            r.id,
            r.len(),
            flat.artifact_count(),
            spikes.artifact_count(),
            fused.artifact_count()
        )
        .unwrap();
    }
    write_atomic(&out.join("detection_report.csv"), report)?;
    eprintln!("detect: {} records -> {}", records.len(), out.display());
    Ok(())
}

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let labels_dir = cfg
        .labels_dir
        .as_ref()
        .ok_or_else(|| Error::Config("evaluate needs labels_dir=PATH".into()))?;
    let (records, _) = load_dataset(cfg)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(labels_dir)
        .map_err(|e| Error::io(labels_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!(
            "no label files in {}",
            labels_dir.display()
        )));
    }
    let mut s = String::from("record_id,tp,fp,tn,fn,sensitivity,specificity\n");
    let mut total = ConfusionCounts::default();
    for path in &files {
        let id = record_id_from_path(path);
        let (_, pred) = parse_labels_csv(&read_text(path)?, &id)?;
        let truth_record = records
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::Protocol(format!("no ground truth for {id}")))?;
        let truth = truth_record
            .truth
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("record {id} has no truth labels")))?;
        let c = confusion(&pred, truth).map_err(|e| e.in_job(id.clone()))?;
        total = total + c;
        writeln!(
            s,
            "{id},{},{},{},{},{},{}",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            metric(sensitivity(&c)),
            metric(specificity(&c))
        )
        .unwrap();
    }
    let c = total;
    writeln!(
        s,
        "pooled,{},{},{},{},{},{}",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        metric(sensitivity(&c)),
        metric(specificity(&c))
    )
    .unwrap();
    write_atomic(&out.join("evaluation.csv"), s)?;
    eprintln!(
        "evaluate: {} files, sensitivity {} specificity {}",
        files.len(),
        metric(sensitivity(&c)),
        metric(specificity(&c))
    );
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = prepared(cfg)?;
    let spec = cfg.sweep_spec();
    eprintln!(
        "sweep: {} setups, {} models",
        spec.setup_count(),
        spec.jobs().len()
    );
    let outcome = sweep(&data, &cfg.pipeline, &spec, Some(&out.join("jobs")))?;
    write_atomic(&out.join("sweep.csv"), write_sweep_csv(&outcome.rows))?;
    write_atomic(
        &out.join("table.csv"),
        write_table_csv(&outcome.rows, &spec.qs),
    )?;
    write_atomic(
        &out.join("plot_sensitivity.csv"),
        write_plot_csv(&outcome.rows, |r| r.sensitivity),
    )?;
    write_atomic(
        &out.join("plot_specificity.csv"),
        write_plot_csv(&outcome.rows, |r| r.specificity),
    )?;
    let fallbacks: usize = outcome.jobs.iter().map(|j| j.arima_fallbacks).sum();
    if fallbacks > 0 {
        eprintln!("sweep: {fallbacks} degenerate ARIMA fits fell back to persistence");
    }
    Ok(())
}
