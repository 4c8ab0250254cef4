//! On-disk formats: record and label CSVs, the split manifest, loss traces
//! and the binary model container. Every writer is byte-deterministic.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Architecture, EpochLoss, Mode, ModelParams};
use crate::nn::Tensor2;
use crate::preprocess::SplitIds;
use crate::signal::{Label, LabelMask, LabelSource, Record};

pub const RECORD_HEADER: &str = "time_min,bpm,label";
pub const LABELS_HEADER: &str = "time_min,bpm,pred_label,source";
pub const MANIFEST_HEADER: &str = "record_id,split,seed,index";
pub const LOSS_HEADER: &str = "epoch,recon,kl,total";

pub const MODEL_MAGIC: &[u8; 8] = b"BPMVAE01";
pub const MODEL_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temporary file so readers never see a partial
/// file; creates parent directories.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn label_code(l: Label) -> &'static str {
    match l {
        Label::Valid => "0",
        Label::Artifact => "1",
        Label::Unknown => "",
    }
}

fn parse_label(field: &str, line: usize) -> Result<Label> {
    match field {
        "0" => Ok(Label::Valid),
        "1" => Ok(Label::Artifact),
        "" => Ok(Label::Unknown),
        other => Err(Error::Parse {
            line,
            msg: format!("label must be 0, 1 or empty, got {other:?}"),
        }),
    }
}

fn parse_bpm(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad bpm value {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite bpm value {field:?}"),
        });
    }
    Ok(Some(v))
}

fn parse_minute(field: &str, line: usize) -> Result<i64> {
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad time_min {field:?}"),
    })
}

/// Data rows of a CSV with the expected header, as (1-based line, fields).
fn csv_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == header => {}
        Some((_, h)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {header:?}, got {h:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {width} fields, got {}", fields.len()),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

fn check_increasing(minutes: &[i64], lines: &[usize]) -> Result<()> {
    for k in 1..minutes.len() {
        if minutes[k] <= minutes[k - 1] {
            return Err(Error::Validation(format!(
                "time_min not increasing at line {}: {} after {}",
                lines[k],
                minutes[k],
                minutes[k - 1]
            )));
        }
    }
    Ok(())
}

/// Parses `time_min,bpm,label`. A missing `bpm` always yields an UNKNOWN
/// truth label.
pub fn parse_record_csv(text: &str, id: &str) -> Result<Record> {
    let rows = csv_rows(text, RECORD_HEADER)?;
    let mut minutes = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut lines = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        minutes.push(parse_minute(f[0], *line)?);
        let v = parse_bpm(f[1], *line)?;
        let l = parse_label(f[2], *line)?;
        labels.push(if v.is_none() { Label::Unknown } else { l });
        values.push(v);
        lines.push(*line);
    }
    check_increasing(&minutes, &lines)?;
    Record::new(id, minutes, values)?.with_truth(LabelMask::new(labels, LabelSource::Truth))
}

pub fn write_record_csv(record: &Record) -> String {
    let mut s = String::with_capacity(record.len() * 16);
    s.push_str(RECORD_HEADER);
    s.push('\n');
    for i in 0..record.len() {
        let label = record
            .truth
            .as_ref()
            .map_or("", |t| label_code(t.labels[i]));
        match record.values[i] {
            Some(v) => writeln!(s, "{},{},{}", record.minutes[i], v, label),
            None => writeln!(s, "{},,{}", record.minutes[i], label),
        }
        .unwrap();
    }
    s
}

/// Up to 6 significant digits, trailing zeros removed, no locale.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let s = if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

pub fn write_labels_csv(record: &Record, mask: &LabelMask) -> Result<String> {
    if mask.len() != record.len() {
        return Err(Error::LengthMismatch {
            expected: record.len(),
            actual: mask.len(),
        });
    }
    let mut s = String::with_capacity(record.len() * 24);
    s.push_str(LABELS_HEADER);
    s.push('\n');
    for i in 0..record.len() {
        let bpm = record.values[i].map(format_sig6).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{}",
            record.minutes[i],
            bpm,
            label_code(mask.labels[i]),
            mask.source.as_str()
        )
        .unwrap();
    }
    Ok(s)
}

/// Inverse of [`write_labels_csv`]; the record carries no truth.
pub fn parse_labels_csv(text: &str, id: &str) -> Result<(Record, LabelMask)> {
    let rows = csv_rows(text, LABELS_HEADER)?;
    let mut minutes = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    let mut source = None;
    for (line, f) in &rows {
        minutes.push(parse_minute(f[0], *line)?);
        values.push(parse_bpm(f[1], *line)?);
        labels.push(parse_label(f[2], *line)?);
        lines.push(*line);
        let s = LabelSource::parse(f[3]).ok_or_else(|| Error::Parse {
            line: *line,
            msg: format!("unknown source {:?}", f[3]),
        })?;
        if source.is_some_and(|prev| prev != s) {
            return Err(Error::Parse {
                line: *line,
                msg: "mixed label sources in one file".into(),
            });
        }
        source = Some(s);
    }
    check_increasing(&minutes, &lines)?;
    let record = Record::new(id, minutes, values)?;
    Ok((
        record,
        LabelMask::new(labels, source.unwrap_or(LabelSource::Fused)),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub record_id: String,
    pub split: String,
    pub seed: u64,
    pub index: usize,
}

pub fn manifest_entries(
    ids_in_order: &[String],
    splits: &SplitIds,
    seed: u64,
) -> Vec<ManifestEntry> {
    ids_in_order
        .iter()
        .enumerate()
        .map(|(index, id)| {
            let split = if splits.train.contains(id) {
                "train"
            } else if splits.validation.contains(id) {
                "validation"
            } else {
                "test"
            };
            ManifestEntry {
                record_id: id.clone(),
                split: split.into(),
                seed,
                index,
            }
        })
        .collect()
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for e in entries {
        writeln!(s, "{},{},{},{}", e.record_id, e.split, e.seed, e.index).unwrap();
    }
    s
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    csv_rows(text, MANIFEST_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            if !matches!(f[1], "train" | "validation" | "test") {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown split {:?}", f[1]),
                });
            }
            let bad = |what: &str| Error::Parse {
                line,
                msg: format!("bad {what}"),
            };
            Ok(ManifestEntry {
                record_id: f[0].to_string(),
                split: f[1].to_string(),
                seed: f[2].parse().map_err(|_| bad("seed"))?,
                index: f[3].parse().map_err(|_| bad("index"))?,
            })
        })
        .collect()
}

pub fn splits_from_manifest(entries: &[ManifestEntry]) -> SplitIds {
    let mut s = SplitIds::default();
    for e in entries {
        let bucket = match e.split.as_str() {
            "train" => &mut s.train,
            "validation" => &mut s.validation,
            _ => &mut s.test,
        };
        bucket.push(e.record_id.clone());
    }
    s
}

pub fn write_loss_trace(trace: &[EpochLoss]) -> String {
    let mut s = String::from(LOSS_HEADER);
    s.push('\n');
    for e in trace {
        writeln!(s, "{},{},{},{}", e.epoch, e.recon, e.kl, e.total).unwrap();
    }
    s
}

/// Architecture and provenance stored in the model file header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMetadata {
    pub version: u32,
    pub arch: Architecture,
    pub seed: u64,
}

fn metadata_text(params: &ModelParams) -> String {
    let a = &params.arch;
    format!(
        "version={MODEL_VERSION}\nW={}\ninput_dim={}\nhidden_dim={}\nlatent_dim={}\nnum_layers={}\nmode={}\nbeta={}\nseed={}\n",
        a.window_len,
        a.input_dim,
        a.hidden_dim,
        a.latent_dim,
        a.num_layers,
        a.mode.as_str(),
        a.beta,
        params.seed
    )
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn save_model(params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 * params.parameter_count() + 1024);
    buf.extend_from_slice(MODEL_MAGIC);
    let meta = metadata_text(params);
    put_u64(&mut buf, meta.len() as u64);
    buf.extend_from_slice(meta.as_bytes());
    for (name, t) in params.named_tensors() {
        put_u64(&mut buf, name.len() as u64);
        buf.extend_from_slice(name.as_bytes());
        put_u64(&mut buf, t.rows() as u64);
        put_u64(&mut buf, t.cols() as u64);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated {what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?)
            .map_err(|_| Error::ModelFormat(format!("{what} too large")))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn read_header<'a>(bytes: &'a [u8]) -> Result<(ModelMetadata, Reader<'a>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let n = r.len("metadata length")?;
    let text = std::str::from_utf8(r.take(n, "metadata")?)
        .map_err(|_| Error::ModelFormat("metadata is not UTF-8".into()))?;
    Ok((parse_metadata(text)?, r))
}

fn parse_metadata(text: &str) -> Result<ModelMetadata> {
    let mut kv = std::collections::BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::ModelFormat(format!("bad metadata line {line:?}")))?;
        kv.insert(k, v);
    }
    fn get<T: std::str::FromStr>(
        kv: &std::collections::BTreeMap<&str, &str>,
        k: &str,
    ) -> Result<T> {
        kv.get(k)
            .ok_or_else(|| Error::ModelFormat(format!("metadata lacks {k}")))?
            .parse()
            .map_err(|_| Error::ModelFormat(format!("bad metadata value for {k}")))
    }
    let version: u32 = get(&kv, "version")?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unknown model version {version}"
        )));
    }
    let mode_text: String = get(&kv, "mode")?;
    let mode = Mode::parse(&mode_text)
        .ok_or_else(|| Error::ModelFormat(format!("bad mode {mode_text:?}")))?;
    let arch = Architecture {
        window_len: get(&kv, "W")?,
        input_dim: get(&kv, "input_dim")?,
        hidden_dim: get(&kv, "hidden_dim")?,
        latent_dim: get(&kv, "latent_dim")?,
        num_layers: get(&kv, "num_layers")?,
        mode,
        beta: get(&kv, "beta")?,
    };
    arch.validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(ModelMetadata {
        version,
        arch,
        seed: get(&kv, "seed")?,
    })
}

/// Header only; tensors are not touched.
pub fn read_model_metadata(bytes: &[u8]) -> Result<ModelMetadata> {
    Ok(read_header(bytes)?.0)
}

pub fn load_model(bytes: &[u8]) -> Result<ModelParams> {
    let (meta, mut r) = read_header(bytes)?;
    let mut params = ModelParams::zeros(meta.arch);
    params.seed = meta.seed;
    let mut loaded: Vec<(String, Tensor2)> = Vec::new();
    while !r.at_end() {
        let n = r.len("tensor name length")?;
        let name = std::str::from_utf8(r.take(n, "tensor name")?)
            .map_err(|_| Error::ModelFormat("tensor name is not UTF-8".into()))?
            .to_string();
        let rows = r.len("row count")?;
        let cols = r.len("column count")?;
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| Error::ModelFormat(format!("tensor {name} too large")))?;
        let payload = r.take(count * 8, &format!("tensor {name}"))?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        loaded.push((name, Tensor2::from_vec(rows, cols, data)?));
    }
    let mut slots = params.named_tensors_mut();
    if loaded.len() != slots.len() {
        return Err(Error::ModelFormat(format!(
            "expected {} tensors, found {}",
            slots.len(),
            loaded.len()
        )));
    }
    for ((name, slot), (lname, t)) in slots.iter_mut().zip(loaded) {
        if *name != lname {
            return Err(Error::ModelFormat(format!(
                "expected tensor {name}, found {lname}"
            )));
        }
        if slot.shape() != t.shape() {
            return Err(Error::ModelFormat(format!(
                "tensor {name} has shape {:?}, architecture needs {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        **slot = t;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::Rng;
    use proptest::prelude::*;
    use Label::{Artifact as A, Unknown as U, Valid as V};

    #[test]
    fn parse_record_examples() {
        let r = parse_record_csv("time_min,bpm,label\n0,80.0,0\n1,81.0,1\n", "r").unwrap();
        assert_eq!(r.values, vec![Some(80.0), Some(81.0)]);
        assert_eq!(r.truth.unwrap().labels, vec![V, A]);

        let r = parse_record_csv("time_min,bpm,label\n0,,\n1,80.0,0\n", "r").unwrap();
        assert_eq!(r.values[0], None);
        assert_eq!(r.truth.unwrap().labels[0], U);

        match parse_record_csv("time_min,bpm,label\n0,80.0,2\n", "r") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn record_parse_errors() {
        assert!(matches!(
            parse_record_csv("a,b,c\n", "r"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_record_csv("time_min,bpm,label\n0,abc,0\n", "r"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_record_csv("time_min,bpm,label\n0,1,0\n1,2\n", "r"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_record_csv("time_min,bpm,label\n1,1,0\n0,2,0\n", "r"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_value_forces_unknown_label() {
        let r = parse_record_csv("time_min,bpm,label\n0,,1\n", "r").unwrap();
        assert_eq!(r.truth.unwrap().labels, vec![U]);
    }

    fn random_record(seed: u64, n: usize) -> Record {
        let mut rng = Rng::new(seed);
        let values: Vec<Option<f64>> = (0..n)
            .map(|_| (rng.next_uniform() > 0.1).then(|| 60.0 + 40.0 * rng.next_gaussian()))
            .collect();
        let labels = values
            .iter()
            .map(|v| match v {
                None => U,
                Some(_) if rng.next_uniform() < 0.2 => A,
                Some(_) => V,
            })
            .collect();
        Record::contiguous("x", 5, values)
            .with_truth(LabelMask::new(labels, LabelSource::Truth))
            .unwrap()
    }

    proptest! {
        #[test]
        fn record_round_trip_is_exact(seed in 0u64..10_000, n in 1usize..50) {
            let r = random_record(seed, n);
            let text = write_record_csv(&r);
            let back = parse_record_csv(&text, "x").unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(write_record_csv(&back), text);
        }

        #[test]
        fn labels_round_trip(seed in 0u64..10_000, n in 1usize..50) {
            let r = random_record(seed, n);
            let mask = LabelMask::new(r.truth.clone().unwrap().labels, LabelSource::Fused);
            let text = write_labels_csv(&r, &mask).unwrap();
            let (back, m) = parse_labels_csv(&text, "x").unwrap();
            prop_assert_eq!(m, mask);
            prop_assert_eq!(back.minutes, r.minutes);
        }
    }

    #[test]
    fn labels_csv_examples() {
        let r = Record::contiguous("r", 0, vec![Some(80.123456789), None]);
        let mask = LabelMask::new(vec![A, V], LabelSource::Fused);
        let text = write_labels_csv(&r, &mask).unwrap();
        assert_eq!(
            text,
            "time_min,bpm,pred_label,source\n0,80.1235,1,fused\n1,,0,fused\n"
        );
        assert_eq!(text.lines().count(), 3);
        assert!(write_labels_csv(&r, &LabelMask::new(vec![A], LabelSource::Fused)).is_err());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(80.0), "80");
        assert_eq!(format_sig6(-0.5), "-0.5");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(1.5e-7), "1.5e-7");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn manifest_round_trip() {
        let ids: Vec<String> = (0..4).map(|i| format!("rec{i:04}")).collect();
        let splits = SplitIds {
            train: vec![ids[2].clone(), ids[0].clone()],
            validation: vec![ids[1].clone()],
            test: vec![ids[3].clone()],
        };
        let entries = manifest_entries(&ids, &splits, 7);
        let text = write_manifest(&entries);
        assert!(text.starts_with("record_id,split,seed,index\nrec0000,train,7,0\n"));
        let back = parse_manifest(&text).unwrap();
        assert_eq!(back, entries);
        let s = splits_from_manifest(&back);
        assert_eq!(s.train, vec![ids[0].clone(), ids[2].clone()]);
        assert!(parse_manifest("record_id,split,seed,index\na,bogus,1,0\n").is_err());
    }

    fn small_params(mode: Mode) -> ModelParams {
        let mut arch = Architecture::new(12, mode, 0.25);
        arch.hidden_dim = 5;
        arch.latent_dim = 3;
        ModelParams::init(arch, 17).unwrap()
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        for mode in [Mode::Ae, Mode::Vae] {
            let p = small_params(mode);
            let bytes = save_model(&p);
            let back = load_model(&bytes).unwrap();
            assert_eq!(back, p);
            assert_eq!(save_model(&back), bytes);
        }
    }

    #[test]
    fn metadata_reads_without_tensors() {
        let p = ModelParams::init(Architecture::new(60, Mode::Vae, 0.1), 3).unwrap();
        let bytes = save_model(&p);
        let header_len = 16 + u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let meta = read_model_metadata(&bytes[..header_len]).unwrap();
        assert_eq!(meta.arch.window_len, 60);
        assert_eq!(meta.arch.hidden_dim, 64);
        assert_eq!(meta.arch.latent_dim, 12);
        assert_eq!(meta.seed, 3);
        assert!(load_model(&bytes[..header_len]).is_err());
    }

    #[test]
    fn corrupt_models_are_rejected() {
        let bytes = save_model(&small_params(Mode::Vae));
        let mut tampered = bytes.clone();
        tampered[0] = b'X';
        assert!(matches!(load_model(&tampered), Err(Error::ModelFormat(_))));
        assert!(load_model(&bytes[..bytes.len() - 3]).is_err());
        let text = String::from_utf8_lossy(&bytes[16..40]).into_owned();
        assert!(text.starts_with("version=1"));
        let mut v2 = bytes.clone();
        v2[16 + 8] = b'2';
        assert!(matches!(load_model(&v2), Err(Error::ModelFormat(m)) if m.contains("version")));
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0u8; 4]);
        assert!(load_model(&extra).is_err());
    }

    #[test]
    fn loss_trace_format() {
        let t = [EpochLoss {
            epoch: 0,
            recon: 0.5,
            kl: 0.25,
            total: 0.525,
        }];
        assert_eq!(
            write_loss_trace(&t),
            "epoch,recon,kl,total\n0,0.5,0.25,0.525\n"
        );
    }
}
