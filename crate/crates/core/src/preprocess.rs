//! Record-level robust scaling, overlapping windowing, clean-window
//! extraction and record splitting.

use crate::error::{Error, Result};
use crate::prng::Rng;
use crate::signal::{Label, LabelMask, Record, ScaleStats};
use crate::stats::percentile_sorted;

/// Where a window came from: window cell `k` maps to sample `start + k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowOrigin {
    pub record_id: String,
    pub start: usize,
}

/// N x W matrix of MISSING-free windows (row-major) with their origins.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub window_len: usize,
    pub data: Vec<f64>,
    pub origins: Vec<WindowOrigin>,
}

impl WindowBatch {
    pub fn empty(window_len: usize) -> Self {
        Self {
            window_len,
            data: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        &self.data[i * self.window_len..(i + 1) * self.window_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.window_len.max(1)).take(self.len())
    }

    fn push(&mut self, values: impl IntoIterator<Item = f64>, origin: WindowOrigin) {
        let before = self.data.len();
        self.data.extend(values);
        debug_assert_eq!(self.data.len() - before, self.window_len);
        self.origins.push(origin);
    }
}

/// Median and IQR over all numeric samples, artifacts included.
pub fn compute_scale_stats(record: &Record) -> Result<ScaleStats> {
    let mut values: Vec<f64> = record.values.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::Empty(format!(
            "record {} has no numeric samples",
            record.id
        )));
    }
    values.sort_by(f64::total_cmp);
    let q = |p| percentile_sorted(&values, p).expect("nonempty");
    Ok(ScaleStats {
        median: q(50.0),
        iqr: q(75.0) - q(25.0),
    })
}

/// `(v - median) / iqr`, with a zero IQR replaced by 1.
pub fn scale(record: &Record, stats: &ScaleStats) -> Record {
    let (m, d) = (stats.median, stats.divisor());
    record.map_values(|v| (v - m) / d)
}

pub fn unscale(record: &Record, stats: &ScaleStats) -> Record {
    let (m, d) = (stats.median, stats.divisor());
    record.map_values(|v| v * d + m)
}

/// Scale a record with its own statistics.
pub fn scale_record(record: &Record) -> Result<(Record, ScaleStats)> {
    let stats = compute_scale_stats(record)?;
    Ok((scale(record, &stats), stats))
}

/// Windows of length `window_len` starting every `step` samples; windows
/// touching a missing sample are dropped.
pub fn make_windows(record: &Record, window_len: usize, step: usize) -> Result<WindowBatch> {
    if window_len == 0 || step == 0 {
        return Err(Error::Config(format!(
            "window length ({window_len}) and step ({step}) must be >= 1"
        )));
    }
    let mut batch = WindowBatch::empty(window_len);
    push_windows(&mut batch, record, 0, record.len(), step);
    Ok(batch)
}

fn push_windows(batch: &mut WindowBatch, record: &Record, from: usize, to: usize, step: usize) {
    let w = batch.window_len;
    if to < from + w {
        return;
    }
    let mut s = from;
    while s + w <= to {
        let window = &record.values[s..s + w];
        if let Some(last_missing) = window.iter().rposition(Option::is_none) {
            // Skip every start that would still include this missing sample.
            let next = s + last_missing + 1;
            s += (next - s).div_ceil(step) * step;
            continue;
        }
        batch.push(
            window.iter().map(|v| v.expect("checked")),
            WindowOrigin {
                record_id: record.id.clone(),
                start: s,
            },
        );
        s += step;
    }
}

/// Step-1 windows inside maximal runs of VALID, numeric samples.
pub fn clean_training_windows(
    record: &Record,
    truth: &LabelMask,
    window_len: usize,
) -> Result<WindowBatch> {
    if truth.len() != record.len() {
        return Err(Error::LengthMismatch {
            expected: record.len(),
            actual: truth.len(),
        });
    }
    if window_len == 0 {
        return Err(Error::Config("window length must be >= 1".into()));
    }
    let mut batch = WindowBatch::empty(window_len);
    let usable = |i: usize| truth.labels[i] == Label::Valid && record.values[i].is_some();
    let mut i = 0;
    while i < record.len() {
        if !usable(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < record.len() && usable(i) {
            i += 1;
        }
        push_windows(&mut batch, record, start, i, 1);
    }
    Ok(batch)
}

/// Concatenate per-record batches and apply one seeded Fisher–Yates permutation.
pub fn shuffle_and_pool(batches: &[WindowBatch], seed: u64) -> Result<WindowBatch> {
    let window_len = batches
        .first()
        .ok_or_else(|| Error::Empty("no window batches to pool".into()))?
        .window_len;
    if let Some(b) = batches.iter().find(|b| b.window_len != window_len) {
        return Err(Error::Shape(format!(
            "mixed window lengths {window_len} and {}",
            b.window_len
        )));
    }
    let refs: Vec<(usize, usize)> = batches
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| (0..b.len()).map(move |wi| (bi, wi)))
        .collect();
    let mut order: Vec<usize> = (0..refs.len()).collect();
    Rng::new(seed).shuffle(&mut order);
    let mut pooled = WindowBatch::empty(window_len);
    pooled.data.reserve(refs.len() * window_len);
    for k in order {
        let (bi, wi) = refs[k];
        let b = &batches[bi];
        pooled.push(b.window(wi).iter().copied(), b.origins[wi].clone());
    }
    Ok(pooled)
}

/// Record ids assigned to the three partitions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [53.0, 15.0, 17.0];

/// Partition sizes for `n` items by largest-remainder rounding. Ties on the
/// fractional part go to the earlier partition.
pub fn split_sizes(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let total: f64 = ratios.iter().sum();
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r / total).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = q.floor() as usize;
    }
    let mut remaining = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[k] += 1;
        remaining -= 1;
    }
    sizes
}

/// Seeded permutation followed by a proportional, exhaustive split.
pub fn split_records(ids: &[String], ratios: &[f64; 3], seed: u64) -> Result<SplitIds> {
    if ids.len() < 3 {
        return Err(Error::Protocol(format!(
            "need at least 3 records to split, got {}",
            ids.len()
        )));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(format!("invalid split ratios {ratios:?}")));
    }
    let mut shuffled = ids.to_vec();
    Rng::new(seed).shuffle(&mut shuffled);
    let [a, b, _] = split_sizes(ids.len(), ratios);
    let test = shuffled.split_off(a + b);
    let validation = shuffled.split_off(a);
    Ok(SplitIds {
        train: shuffled,
        validation,
        test,
    })
}
