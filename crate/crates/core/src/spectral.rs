//! Welch power spectral density for short, minute-sampled series.

use std::f64::consts::PI;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided periodogram of a Hann-tapered, mean-removed segment, bins
/// `k = 0..=n/2` at `k / n` cycles per sample.
pub fn periodogram(segment: &[f64]) -> Vec<f64> {
    let n = segment.len();
    if n == 0 {
        return Vec::new();
    }
    let w = hann(n);
    let mean = segment.iter().sum::<f64>() / n as f64;
    let tapered: Vec<f64> = segment
        .iter()
        .zip(&w)
        .map(|(x, w)| (x - mean) * w)
        .collect();
    let norm: f64 = w.iter().map(|v| v * v).sum();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in tapered.iter().enumerate() {
                let phase = 2.0 * PI * (k * t % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            let p = (re * re + im * im) / norm;
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Welch estimate: mean periodogram over equal-length segments.
pub fn welch<'a>(segments: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for s in segments {
        let p = periodogram(s);
        if acc.is_empty() {
            acc = p;
        } else {
            assert_eq!(acc.len(), p.len(), "Welch segments must share one length");
            acc.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count.max(1) as f64);
    acc
}

/// Power in bins strictly above `cutoff` cycles per sample.
pub fn power_above(psd: &[f64], segment_len: usize, cutoff: f64) -> f64 {
    psd.iter()
        .enumerate()
        .filter(|(k, _)| *k as f64 / segment_len as f64 > cutoff)
        .map(|(_, p)| p)
        .sum()
}
