use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::aggregate_jobs;
use super::{
    evaluate_detector, run_pool, train_detector, ConfusionCounts, Detector, DetectorKind,
    ExperimentStats, JobResult, PipelineConfig, PreparedData, QResult, Summary,
};
use crate::error::{Error, Result};
use crate::io::{save_model, write_atomic, write_loss_trace};

/// The β × Q grid plus optional AE and ARIMA setups.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub betas: Vec<f64>,
    pub qs: Vec<f64>,
    pub include_ae: bool,
    pub include_arima: bool,
    pub seeds: Vec<u64>,
    pub threads: usize,
    /// Identifies the configuration that produced a job file; files with a
    /// different fingerprint are recomputed instead of resumed.
    pub fingerprint: String,
}

impl SweepSpec {
    pub fn kinds(&self) -> Vec<DetectorKind> {
        let mut kinds: Vec<DetectorKind> = self
            .betas
            .iter()
            .map(|&beta| DetectorKind::Vae { beta })
            .collect();
        if self.include_ae {
            kinds.push(DetectorKind::Ae);
        }
        if self.include_arima {
            kinds.push(DetectorKind::Arima);
        }
        kinds
    }

    /// Every (kind, seed) model to build; models are reused across Q.
    pub fn jobs(&self) -> Vec<(DetectorKind, Option<u64>)> {
        let mut jobs = Vec::new();
        for kind in self.kinds() {
            if kind.is_learned() {
                jobs.extend(self.seeds.iter().map(|&s| (kind, Some(s))));
            } else {
                jobs.push((kind, None));
            }
        }
        jobs
    }

    pub fn setup_count(&self) -> usize {
        self.kinds().len() * self.qs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.qs.is_empty() || self.kinds().is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(q) = self.qs.iter().find(|q| !(0.0..=100.0).contains(*q)) {
            return Err(Error::Config(format!("percentile {q} outside [0, 100]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ExperimentStats>,
    pub jobs: Vec<JobResult>,
}

pub fn job_file_name(kind: DetectorKind, seed: Option<u64>) -> String {
    format!("{}.counts.csv", kind.job_id(seed))
}

const JOB_HEADER: &str = "q,threshold,tp,fp,tn,fn";

pub fn write_job_file(job: &JobResult, fingerprint: &str) -> String {
    let mut s = String::new();
    writeln!(s, "job={}", job.kind.job_id(job.seed)).unwrap();
    writeln!(s, "fingerprint={fingerprint}").unwrap();
    writeln!(s, "arima_fallbacks={}", job.arima_fallbacks).unwrap();
    writeln!(s, "{JOB_HEADER}").unwrap();
    for r in &job.rows {
        let c = r.counts;
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.q, r.threshold, c.tp, c.fp, c.tn, c.fn_
        )
        .unwrap();
    }
    s
}

/// Parses a job file written for exactly this setup; `None` when the file
/// belongs to another job or configuration.
pub fn parse_job_file(
    text: &str,
    kind: DetectorKind,
    seed: Option<u64>,
    qs: &[f64],
    fingerprint: &str,
) -> Option<JobResult> {
    let mut lines = text.lines();
    let job = lines.next()?.strip_prefix("job=")?;
    let fp = lines.next()?.strip_prefix("fingerprint=")?;
    let fallbacks = lines
        .next()?
        .strip_prefix("arima_fallbacks=")?
        .parse()
        .ok()?;
    if job != kind.job_id(seed) || fp != fingerprint || lines.next()? != JOB_HEADER {
        return None;
    }
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        rows.push(QResult {
            q: f[0].parse().ok()?,
            threshold: f[1].parse().ok()?,
            counts: ConfusionCounts {
                tp: f[2].parse().ok()?,
                fp: f[3].parse().ok()?,
                tn: f[4].parse().ok()?,
                fn_: f[5].parse().ok()?,
            },
        });
    }
    let same_q = rows.len() == qs.len() && rows.iter().zip(qs).all(|(r, q)| r.q == *q);
    same_q.then_some(JobResult {
        kind,
        seed,
        rows,
        arima_fallbacks: fallbacks,
    })
}

fn run_job(
    kind: DetectorKind,
    seed: Option<u64>,
    data: &PreparedData,
    cfg: &PipelineConfig,
    spec: &SweepSpec,
    job_dir: Option<&Path>,
) -> Result<JobResult> {
    let counts_path = job_dir.map(|d| d.join(job_file_name(kind, seed)));
    if let Some(path) = &counts_path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Some(done) = parse_job_file(&text, kind, seed, &spec.qs, &spec.fingerprint) {
                return Ok(done);
            }
        }
    }
    let detector = match train_detector(kind, data, cfg, seed.unwrap_or(0))? {
        Some(outcome) => {
            if let Some(dir) = job_dir {
                let id = kind.job_id(seed);
                write_atomic(
                    &dir.join(format!("{id}.model")),
                    save_model(&outcome.params),
                )?;
                write_atomic(
                    &dir.join(format!("{id}.loss.csv")),
                    write_loss_trace(&outcome.trace),
                )?;
            }
            Detector::Model {
                params: outcome.params,
                latent: cfg.latent,
            }
        }
        None => Detector::Arima(cfg.arima),
    };
    let result = evaluate_detector(&detector, kind, seed, data, &spec.qs)?;
    if let Some(path) = &counts_path {
        write_atomic(path, write_job_file(&result, &spec.fingerprint))?;
    }
    Ok(result)
}

/// Trains every (kind, seed) model once, evaluates it at all Q and
/// aggregates over seeds. With `job_dir`, finished jobs are persisted and
/// reused on the next run.
pub fn sweep(
    data: &PreparedData,
    cfg: &PipelineConfig,
    spec: &SweepSpec,
    job_dir: Option<&Path>,
) -> Result<SweepOutcome> {
    spec.validate()?;
    let jobs = spec.jobs();
    let results = run_pool(jobs.len(), spec.threads, |i| {
        let (kind, seed) = jobs[i];
        run_job(kind, seed, data, cfg, spec, job_dir).map_err(|e| e.in_job(kind.job_id(seed)))
    })?;
    let rows = aggregate(spec, &results)?;
    Ok(SweepOutcome {
        rows,
        jobs: results,
    })
}

/// Sweep rows in grid order: VAE β values, then AE, then ARIMA; Q inner.
pub fn aggregate(spec: &SweepSpec, jobs: &[JobResult]) -> Result<Vec<ExperimentStats>> {
    let mut rows = Vec::with_capacity(spec.setup_count());
    for kind in spec.kinds() {
        let mine: Vec<JobResult> = jobs.iter().filter(|j| j.kind == kind).cloned().collect();
        rows.extend(aggregate_jobs(kind, &mine)?);
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_sweep_csv(rows: &[ExperimentStats]) -> String {
    let mut s = String::from("kind,beta,q,sens_mean,sens_std,spec_mean,spec_std\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.kind.name(),
            r.kind.beta().map(|b| b.to_string()).unwrap_or_default(),
            r.q,
            opt(r.sensitivity.mean),
            opt(r.sensitivity.std),
            opt(r.specificity.mean),
            opt(r.specificity.std)
        )
        .unwrap();
    }
    s
}

fn series_name(kind: DetectorKind) -> String {
    match kind {
        DetectorKind::Vae { beta } => format!("VAE beta={beta}"),
        other => other.name().to_string(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

/// Setups as rows, Q as columns, cells `sens|spec` to three decimals.
pub fn write_table_csv(rows: &[ExperimentStats], qs: &[f64]) -> String {
    let mut s = String::from("setup");
    for q in qs {
        write!(s, ",Q{q}").unwrap();
    }
    s.push('\n');
    let mut current: Option<DetectorKind> = None;
    for r in rows {
        if current != Some(r.kind) {
            if current.is_some() {
                s.push('\n');
            }
            s.push_str(&series_name(r.kind));
            current = Some(r.kind);
        }
        write!(
            s,
            ",{}|{}",
            cell(r.sensitivity.mean),
            cell(r.specificity.mean)
        )
        .unwrap();
    }
    if current.is_some() {
        s.push('\n');
    }
    s
}

/// Mean ± σ against Q, one series per setup kind.
pub fn write_plot_csv(
    rows: &[ExperimentStats],
    metric: impl Fn(&ExperimentStats) -> Summary,
) -> String {
    let mut s = String::from("series,q,mean,std\n");
    for r in rows {
        let m = metric(r);
        writeln!(
            s,
            "{},{},{},{}",
            series_name(r.kind),
            r.q,
            opt(m.mean),
            opt(m.std)
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SweepSpec {
        SweepSpec {
            betas: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            qs: vec![90.0, 92.0, 94.0, 96.0, 98.0],
            include_ae: true,
            include_arima: true,
            seeds: vec![1, 2, 3, 4, 5],
            threads: 1,
            fingerprint: "f".into(),
        }
    }

    #[test]
    fn full_grid_has_forty_setups() {
        let s = spec();
        assert_eq!(s.setup_count(), 40);
        assert_eq!(s.jobs().len(), 7 * 5 + 1);
    }

    #[test]
    fn desk_grid_count_matches_product() {
        let s = SweepSpec {
            betas: vec![0.1, 0.6],
            qs: vec![90.0, 98.0],
            ..spec()
        };
        assert_eq!(s.setup_count(), (2 + 1 + 1) * 2);
    }

    fn job(kind: DetectorKind, seed: Option<u64>, tp: u64) -> JobResult {
        JobResult {
            kind,
            seed,
            rows: [90.0, 98.0]
                .iter()
                .map(|&q| QResult {
                    q,
                    threshold: q / 100.0 + 0.1,
                    counts: ConfusionCounts {
                        tp,
                        fp: 3,
                        tn: 7,
                        fn_: 10 - tp,
                    },
                })
                .collect(),
            arima_fallbacks: 2,
        }
    }

    #[test]
    fn job_file_round_trip() {
        let j = job(DetectorKind::Vae { beta: 0.1 }, Some(3), 8);
        let text = write_job_file(&j, "abc");
        let qs = [90.0, 98.0];
        assert_eq!(
            parse_job_file(&text, j.kind, j.seed, &qs, "abc"),
            Some(j.clone())
        );
        assert_eq!(parse_job_file(&text, j.kind, j.seed, &qs, "other"), None);
        assert_eq!(parse_job_file(&text, j.kind, Some(4), &qs, "abc"), None);
        assert_eq!(parse_job_file(&text, j.kind, j.seed, &[90.0], "abc"), None);
        assert_eq!(parse_job_file("garbage", j.kind, j.seed, &qs, "abc"), None);
    }

    #[test]
    fn aggregation_and_reports() {
        let s = SweepSpec {
            betas: vec![0.1],
            qs: vec![90.0, 98.0],
            include_ae: false,
            include_arima: true,
            seeds: vec![1, 2],
            ..spec()
        };
        let vae = DetectorKind::Vae { beta: 0.1 };
        let jobs = vec![
            job(vae, Some(1), 8),
            job(vae, Some(2), 10),
            job(DetectorKind::Arima, None, 5),
        ];
        let rows = aggregate(&s, &jobs).unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[0].sensitivity.mean.unwrap() - 0.9).abs() < 1e-15);
        assert!((rows[0].sensitivity.std.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(rows[2].iterations, 1);
        assert_eq!(rows[2].sensitivity.std, Some(0.0));
        let csv = write_sweep_csv(&rows);
        assert!(csv.starts_with("kind,beta,q,sens_mean,sens_std,spec_mean,spec_std\nVAE,0.1,90,"));
        assert!(csv.contains("\nARIMA,,98,0.5,0,0.7,0\n"));
        let table = write_table_csv(&rows, &s.qs);
        assert_eq!(
            table,
            "setup,Q90,Q98\nVAE beta=0.1,0.900|0.700,0.900|0.700\nARIMA,0.500|0.700,0.500|0.700\n"
        );
        let plot = write_plot_csv(&rows, |r| r.specificity);
        assert_eq!(plot.lines().count(), 5);
    }
}
